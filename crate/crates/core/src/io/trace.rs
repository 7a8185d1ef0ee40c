use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mcmc::{ChainTrace, MoveKind, MoveWeights, Sample};
use crate::tree::DatedTree;

const COLUMNS: [&str; 7] = [
    "iteration",
    "log_posterior",
    "log_prior",
    "log_likelihood",
    "mu",
    "root_age",
    "tree",
];

/// A trace read back from disk, with any extra `# key<TAB>value` header lines.
#[derive(Clone, Debug)]
pub struct TraceFile {
    pub trace: ChainTrace,
    pub metadata: Vec<(String, String)>,
}

/// Writes a trace as TSV. Header comments carry the seed, move weights and
/// `metadata`; move counts follow the samples as trailing comments.
pub fn write_trace<W: Write>(
    trace: &ChainTrace,
    metadata: &[(String, String)],
    mut out: W,
) -> Result<()> {
    writeln!(out, "# seed\t{}", trace.seed)?;
    let weights: Vec<String> = MoveKind::ALL
        .iter()
        .map(|&k| format!("{}={}", k.name(), trace.weights.get(k)))
        .collect();
    writeln!(out, "# weights\t{}", weights.join(","))?;
    for (k, v) in metadata {
        writeln!(out, "# {k}\t{v}")?;
    }
    writeln!(out, "{}", COLUMNS.join("\t"))?;
    for s in &trace.samples {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.iteration,
            s.log_posterior,
            s.log_prior,
            s.log_likelihood,
            s.mu,
            s.root_age,
            s.tree.to_newick()
        )?;
    }
    for m in &trace.moves {
        writeln!(
            out,
            "# move\t{}\t{}\t{}",
            m.kind.name(),
            m.proposed,
            m.accepted
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<TraceFile> {
    let mut trace = ChainTrace::new(0, MoveWeights::default());
    let mut metadata = Vec::new();
    let mut seen_header = false;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let fields: Vec<&str> = rest.trim_start().split('\t').collect();
            match fields[..] {
                ["seed", v] => {
                    trace.seed = v
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad seed '{v}'")))?;
                }
                ["weights", v] => trace.weights = parse_weights(v, line_no)?,
                ["move", name, proposed, accepted] => {
                    let kind = MoveKind::from_name(name)
                        .ok_or_else(|| Error::parse(line_no, format!("unknown move '{name}'")))?;
                    let slot = trace
                        .moves
                        .iter_mut()
                        .find(|m| m.kind == kind)
                        .expect("every kind has a slot");
                    slot.proposed = number(proposed, line_no)?;
                    slot.accepted = number(accepted, line_no)?;
                }
                [key, value] => metadata.push((key.to_string(), value.to_string())),
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !seen_header {
            if fields != COLUMNS {
                return Err(Error::parse(line_no, "unexpected trace column header"));
            }
            seen_header = true;
            continue;
        }
        if fields.len() != COLUMNS.len() {
            return Err(Error::parse(
                line_no,
                format!("expected {} columns, found {}", COLUMNS.len(), fields.len()),
            ));
        }
        let root_age: f64 = number(fields[5], line_no)?;
        let tree = DatedTree::from_newick_with_root_age(fields[6], root_age)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        trace.samples.push(Sample {
            iteration: number(fields[0], line_no)?,
            log_posterior: number(fields[1], line_no)?,
            log_prior: number(fields[2], line_no)?,
            log_likelihood: number(fields[3], line_no)?,
            mu: number(fields[4], line_no)?,
            root_age,
            tree,
        });
    }
    if !seen_header {
        return Err(Error::parse(1, "no trace column header"));
    }
    Ok(TraceFile { trace, metadata })
}

fn number<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("bad number '{s}'")))
}

fn parse_weights(s: &str, line: usize) -> Result<MoveWeights> {
    let mut w = MoveWeights::default();
    for item in s.split(',') {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("bad weight '{item}'")))?;
        let kind = MoveKind::from_name(name)
            .ok_or_else(|| Error::parse(line, format!("unknown move '{name}'")))?;
        w.set(kind, number(value, line)?);
    }
    Ok(w)
}
