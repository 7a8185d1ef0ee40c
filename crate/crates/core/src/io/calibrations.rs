use std::fmt::Write;

use crate::error::{Error, Result};
use crate::tree::{CalibrationSet, CladeConstraint, LeafAgeInterval};

/// Parses calibration lines, one constraint per line, fields separated by `;`:
///
/// ```text
/// # clade: name; taxa; lower or -; upper or -
/// Brythonic; Welsh_N,Welsh_C,Breton_List; 1450; 1600
/// # leaf age: taxon; youngest; oldest
/// Hittite; 3300; 3700
/// ```
///
/// Ages are years before present. Blank lines and text after `#` are ignored.
pub fn read_calibrations<S: AsRef<str>>(text: &str, taxa: Option<&[S]>) -> Result<CalibrationSet> {
    let mut set = CalibrationSet::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(';').map(str::trim).collect();
        let known = |name: &str| -> Result<()> {
            match taxa {
                Some(ts) if !ts.iter().any(|t| t.as_ref() == name) => {
                    Err(Error::parse(line, format!("unknown taxon '{name}'")))
                }
                _ => Ok(()),
            }
        };
        match fields[..] {
            [name, members, lower, upper] => {
                if name.is_empty() {
                    return Err(Error::parse(line, "clade has no name"));
                }
                let members: Vec<String> = members
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
                if members.is_empty() {
                    return Err(Error::parse(line, format!("clade '{name}' lists no taxa")));
                }
                for m in &members {
                    known(m)?;
                }
                let lower = bound(lower, line)?;
                let upper = bound(upper, line)?;
                if let (Some(lo), Some(hi)) = (lower, upper) {
                    if lo > hi {
                        return Err(Error::parse(
                            line,
                            format!("lower bound {lo} exceeds upper bound {hi}"),
                        ));
                    }
                }
                set.clades.push(CladeConstraint {
                    name: name.to_string(),
                    taxa: members,
                    lower,
                    upper,
                });
            }
            [taxon, t_minus, t_plus] => {
                known(taxon)?;
                let t_minus = age(t_minus, line)?;
                let t_plus = age(t_plus, line)?;
                if t_minus > t_plus {
                    return Err(Error::parse(
                        line,
                        format!("leaf age range [{t_minus}, {t_plus}] is reversed"),
                    ));
                }
                set.leaf_ages.push(LeafAgeInterval {
                    taxon: taxon.to_string(),
                    t_minus,
                    t_plus,
                });
            }
            _ => {
                return Err(Error::parse(
                    line,
                    format!(
                        "expected 3 or 4 ';'-separated fields, found {}",
                        fields.len()
                    ),
                ))
            }
        }
    }
    Ok(set)
}

fn age(s: &str, line: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
        _ => Err(Error::parse(
            line,
            format!("'{s}' is not a nonnegative age"),
        )),
    }
}

fn bound(s: &str, line: usize) -> Result<Option<f64>> {
    if s == "-" || s.is_empty() {
        Ok(None)
    } else {
        age(s, line).map(Some)
    }
}

pub fn write_calibrations(set: &CalibrationSet) -> String {
    let mut out = String::new();
    let show = |b: Option<f64>| b.map_or("-".to_string(), |x| x.to_string());
    for c in &set.clades {
        let _ = writeln!(
            out,
            "{}; {}; {}; {}",
            c.name,
            c.taxa.join(","),
            show(c.lower),
            show(c.upper)
        );
    }
    for l in &set.leaf_ages {
        let _ = writeln!(out, "{}; {}; {}", l.taxon, l.t_minus, l.t_plus);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAXA: [&str; 6] = [
        "Welsh_N",
        "Welsh_C",
        "Breton_List",
        "Breton_SE",
        "Breton_ST",
        "Hittite",
    ];

    #[test]
    fn clade_and_leaf_lines() {
        let text = "\
# Celtic
Brythonic; Welsh_N,Welsh_C,Breton_List,Breton_SE,Breton_ST; 1450; 1600
Breton; Breton_List, Breton_SE, Breton_ST; 500; -   # lower only

Hittite; 3300; 3700
";
        let set = read_calibrations(text, Some(&TAXA[..])).unwrap();
        assert_eq!(set.clades.len(), 2);
        assert_eq!(set.clades[0].taxa.len(), 5);
        assert_eq!(
            (set.clades[0].lower, set.clades[0].upper),
            (Some(1450.0), Some(1600.0))
        );
        assert_eq!(
            (set.clades[1].lower, set.clades[1].upper),
            (Some(500.0), None)
        );
        assert_eq!(set.leaf_ages[0].t_plus, 3700.0);
        let again = read_calibrations(&write_calibrations(&set), Some(&TAXA[..])).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_calibrations("\n\nX; Welsh_N,Cornish; 1; 2\n", Some(&TAXA[..])).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_calibrations::<&str>("X; a,b; 20; 10\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(read_calibrations::<&str>("X; a,b\n", None).is_err());
        assert!(read_calibrations::<&str>("X; a,b; old; -\n", None).is_err());
        assert!(read_calibrations::<&str>("", None).unwrap().is_empty());
    }
}
