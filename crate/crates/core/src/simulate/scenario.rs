//! Short scenario names `S/X/Y`.
//!
//! X is the process variant: `T` (none), `G<b>` (global borrowing at rate
//! `b * mu`), `L<z>-<b>` (local borrowing within `z` years), `BH<p>` and
//! `MH<p>` (per-branch and per-meaning rates with sd `p` percent of the
//! mean). Y is the constraint: `U<n>` (unconstrained with `lambda/mu = n`)
//! or `C<n>` (no-empty-field over `n` meaning classes).

use std::fmt;
use std::str::FromStr;

use super::{Borrowing, RateHeterogeneity, SimScenario};
use crate::data::ObservationModel;
use crate::error::{Error, Result};
use crate::tree::DatedTree;

/// Expected traits per meaning class and lineage in `C<n>` scenarios.
pub const EMPTY_FIELD_RATIO: f64 = 1.4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProcessCode {
    Plain,
    Global { rate: f64 },
    Local { depth: f64, rate: f64 },
    BranchRates { percent: f64 },
    MeaningRates { percent: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintCode {
    Unconstrained { ratio: f64 },
    EmptyField { classes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioCode {
    pub process: ProcessCode,
    pub constraint: ConstraintCode,
}

fn number(s: &str, code: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite() && *x >= 0.0)
        .ok_or_else(|| Error::InvalidInput(format!("bad number '{s}' in scenario code '{code}'")))
}

impl FromStr for ScenarioCode {
    type Err = Error;

    fn from_str(code: &str) -> Result<Self> {
        let parts: Vec<&str> = code.split('/').collect();
        let [s, x, y] = parts[..] else {
            return Err(Error::InvalidInput(format!(
                "scenario code '{code}' is not of the form S/X/Y"
            )));
        };
        if s != "S" {
            return Err(Error::InvalidInput(format!(
                "scenario code '{code}' must start with S/"
            )));
        }
        let process = if x == "T" {
            ProcessCode::Plain
        } else if let Some(p) = x.strip_prefix("BH") {
            ProcessCode::BranchRates {
                percent: number(p, code)?,
            }
        } else if let Some(p) = x.strip_prefix("MH") {
            ProcessCode::MeaningRates {
                percent: number(p, code)?,
            }
        } else if let Some(b) = x.strip_prefix('G') {
            ProcessCode::Global {
                rate: number(b, code)?,
            }
        } else if let Some(rest) = x.strip_prefix('L') {
            let (z, b) = rest.split_once('-').ok_or_else(|| {
                Error::InvalidInput(format!("local borrowing in '{code}' needs L<z>-<b>"))
            })?;
            ProcessCode::Local {
                depth: number(z, code)?,
                rate: number(b, code)?,
            }
        } else {
            return Err(Error::InvalidInput(format!(
                "unknown process '{x}' in '{code}'"
            )));
        };
        let constraint = if let Some(n) = y.strip_prefix('U') {
            ConstraintCode::Unconstrained {
                ratio: number(n, code)?,
            }
        } else if let Some(n) = y.strip_prefix('C') {
            let classes = n
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| Error::InvalidInput(format!("bad class count in '{code}'")))?;
            ConstraintCode::EmptyField { classes }
        } else {
            return Err(Error::InvalidInput(format!(
                "unknown constraint '{y}' in '{code}'"
            )));
        };
        Ok(ScenarioCode {
            process,
            constraint,
        })
    }
}

impl fmt::Display for ScenarioCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S/")?;
        match self.process {
            ProcessCode::Plain => write!(f, "T")?,
            ProcessCode::Global { rate } => write!(f, "G{rate}")?,
            ProcessCode::Local { depth, rate } => write!(f, "L{depth}-{rate}")?,
            ProcessCode::BranchRates { percent } => write!(f, "BH{percent}")?,
            ProcessCode::MeaningRates { percent } => write!(f, "MH{percent}")?,
        }
        match self.constraint {
            ConstraintCode::Unconstrained { ratio } => write!(f, "/U{ratio}"),
            ConstraintCode::EmptyField { classes } => write!(f, "/C{classes}"),
        }
    }
}

impl ScenarioCode {
    /// The scenario this code names, on `tree` with death rate `mu`.
    ///
    /// `U<n>` uses the NOABSENT model; with per-meaning rates it uses `n`
    /// meaning classes (rounded). `C<n>` gives each class
    /// [`EMPTY_FIELD_RATIO`] expected traits per lineage.
    pub fn scenario(&self, tree: DatedTree, mu: f64, seed: u64) -> Result<SimScenario> {
        let (lambda, classes, empty_field) = match self.constraint {
            ConstraintCode::Unconstrained { ratio } => {
                let classes = matches!(self.process, ProcessCode::MeaningRates { .. })
                    .then(|| (ratio.round() as usize).max(1));
                (ratio * mu, classes, false)
            }
            ConstraintCode::EmptyField { classes } => {
                (EMPTY_FIELD_RATIO * mu * classes as f64, Some(classes), true)
            }
        };
        let mut s = SimScenario::new(tree, lambda, mu, ObservationModel::NoAbsent, seed);
        s.classes = classes;
        s.empty_field = empty_field;
        match self.process {
            ProcessCode::Plain => {}
            ProcessCode::Global { rate } => s.borrowing = Borrowing::Global { rate },
            ProcessCode::Local { depth, rate } => s.borrowing = Borrowing::Local { depth, rate },
            ProcessCode::BranchRates { percent } => {
                s.rate_het = RateHeterogeneity::PerBranch { r: percent / 100.0 }
            }
            ProcessCode::MeaningRates { percent } => {
                s.rate_het = RateHeterogeneity::PerMeaning { r: percent / 100.0 }
            }
        }
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for code in [
            "S/T/U200",
            "S/G0.1/U200",
            "S/L500-1/C200",
            "S/BH50/U200",
            "S/MH25/U200",
        ] {
            let c: ScenarioCode = code.parse().unwrap();
            assert_eq!(c.to_string(), code);
        }
    }

    #[test]
    fn parses_parts() {
        let c: ScenarioCode = "S/L500-1/C200".parse().unwrap();
        assert_eq!(
            c.process,
            ProcessCode::Local {
                depth: 500.0,
                rate: 1.0
            }
        );
        assert_eq!(c.constraint, ConstraintCode::EmptyField { classes: 200 });
        for bad in [
            "T/U200",
            "S/X/U200",
            "S/T/Z3",
            "S/L500/U2",
            "S/T/C0",
            "S/G-1/U2",
        ] {
            assert!(bad.parse::<ScenarioCode>().is_err(), "{bad}");
        }
    }

    #[test]
    fn builds_scenarios() {
        let tree = DatedTree::two_leaf("A", "B", 100.0).unwrap();
        let s = "S/MH50/U200"
            .parse::<ScenarioCode>()
            .unwrap()
            .scenario(tree.clone(), 1e-3, 1)
            .unwrap();
        assert_eq!(s.classes, Some(200));
        assert!((s.lambda - 0.2).abs() < 1e-12);
        assert_eq!(s.rate_het, RateHeterogeneity::PerMeaning { r: 0.5 });
        let s = "S/T/C10"
            .parse::<ScenarioCode>()
            .unwrap()
            .scenario(tree, 1e-3, 1)
            .unwrap();
        assert!(s.empty_field);
        assert!((s.lambda - 1.4e-2).abs() < 1e-12);
    }
}
