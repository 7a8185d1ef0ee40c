//! Posterior summaries and predictive checks.

mod consensus;
mod predictive;

pub use consensus::{majority_consensus, ConsensusNode, ConsensusTree};
pub use predictive::{posterior_predictive, Envelope, PredictiveConfig, PredictiveReport};

use crate::data::TraitMatrix;
use crate::error::{Error, Result};
use crate::mcmc::{ChainTrace, SeriesDiagnostics};
use crate::tree::DatedTree;

/// Number of traits displayed only at taxon `i`, for each taxon.
pub fn singleton_counts(data: &TraitMatrix) -> Vec<usize> {
    let mut x = vec![0; data.n_taxa()];
    for t in data.traits() {
        if let [i] = t.leaves[..] {
            x[i] += 1;
        }
    }
    x
}

/// `y[n]` is the number of traits displayed at exactly `n` taxa, for
/// `n = 0..=L`. Entry 0 counts traits displayed nowhere.
pub fn frequency_spectrum(data: &TraitMatrix) -> Vec<usize> {
    let mut y = vec![0; data.n_taxa() + 1];
    for t in data.traits() {
        y[t.leaves.len()] += 1;
    }
    y
}

/// Empirical quantile with linear interpolation; `sorted` must be ascending and nonempty.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Standard error allowing for autocorrelation in the trace.
    pub se: f64,
}

fn estimate(xs: &[f64]) -> Estimate {
    let d = SeriesDiagnostics::of(xs);
    let se = match d.ess {
        Some(ess) if ess > 0.0 => d.sd / ess.sqrt(),
        _ => 0.0,
    };
    Estimate { value: d.mean, se }
}

fn aligned_trees(trace: &ChainTrace) -> Result<Vec<DatedTree>> {
    let first = trace
        .samples
        .first()
        .ok_or_else(|| Error::InvalidInput("trace has no samples".into()))?;
    let taxa = first.tree.leaf_names();
    trace
        .trees()
        .map(|t| {
            if t.leaf_names() == taxa {
                Ok(t.clone())
            } else {
                t.with_leaf_order(taxa)
            }
        })
        .collect()
}

/// Fraction of recorded trees in which `taxa` form a clade.
pub fn clade_support<S: AsRef<str>>(trace: &ChainTrace, taxa: &[S]) -> Result<Estimate> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("trace has no samples".into()));
    }
    let hits = trace
        .trees()
        .map(|t| t.is_clade(taxa).map(|b| b as u8 as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(estimate(&hits))
}

/// Posterior summary of the age of the common ancestor of a taxon set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgeSummary {
    pub mean: Estimate,
    /// Central 95% interval.
    pub lower: f64,
    pub upper: f64,
}

/// Age of the MRCA of `taxa` over recorded trees, whether or not the taxa form a clade.
pub fn clade_mrca_mean_age<S: AsRef<str>>(trace: &ChainTrace, taxa: &[S]) -> Result<AgeSummary> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("trace has no samples".into()));
    }
    let ages = trace
        .trees()
        .map(|t| t.mrca(taxa).map(|v| t.age(v)))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = ages.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(AgeSummary {
        mean: estimate(&ages),
        lower: quantile(&sorted, 0.025),
        upper: quantile(&sorted, 0.975),
    })
}

/// Summary of a scalar trace column: mean with SE and central 95% interval.
pub fn summarize_series(xs: &[f64]) -> Option<AgeSummary> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(AgeSummary {
        mean: estimate(xs),
        lower: quantile(&sorted, 0.025),
        upper: quantile(&sorted, 0.975),
    })
}
