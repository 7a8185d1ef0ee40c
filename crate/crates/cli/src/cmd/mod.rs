pub mod diagnose;
pub mod infer;
pub mod ppc;
pub mod simulate;
pub mod summarize;
pub mod two_leaf;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dollo_core::io::{read_trace, read_trait_matrix, TraceFile};
use dollo_core::mcmc::ChainTrace;
use dollo_core::{DatedTree, TraitMatrix};

/// A validation failure detected by the front end.
pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    dollo_core::Error::Config(msg.into()).into()
}

/// Opens an input file; a missing file is a validation failure.
pub fn open_input(path: &Path) -> Result<fs::File> {
    if !path.is_file() {
        return Err(invalid(format!(
            "input file {} does not exist",
            path.display()
        )));
    }
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

pub fn read_input(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::io::Read::read_to_string(&mut open_input(path)?, &mut s)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(s)
}

pub fn load_matrix(path: &Path) -> Result<TraitMatrix> {
    let file = open_input(path)?;
    let parsed = read_trait_matrix(file).with_context(|| format!("reading {}", path.display()))?;
    if parsed.missing > 0 {
        log::warn!(
            "{}: {} missing cells ('?') read as trait absence",
            path.display(),
            parsed.missing
        );
    }
    Ok(parsed.matrix)
}

pub fn load_trace(path: &Path) -> Result<TraceFile> {
    let file = open_input(path)?;
    read_trace(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// Reads and pools several trace files.
pub fn load_traces(paths: &[PathBuf]) -> Result<ChainTrace> {
    let traces = paths
        .iter()
        .map(|p| load_trace(p).map(|f| f.trace))
        .collect::<Result<Vec<_>>>()?;
    let pooled = ChainTrace::pooled(&traces).ok_or_else(|| invalid("no trace given"))?;
    if pooled.is_empty() {
        return Err(invalid("traces contain no samples"));
    }
    Ok(pooled)
}

/// A tree given either as Newick text or as a path to a Newick file.
pub fn load_tree(spec: &str) -> Result<DatedTree> {
    let text = if spec.trim_start().starts_with('(') {
        spec.to_string()
    } else {
        read_input(Path::new(spec))?
    };
    Ok(DatedTree::from_newick(text.trim())?)
}

pub fn out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Fixed-precision number for reports; keeps large ages readable and small rates exact enough.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        format!("{x}")
    } else if x.abs() >= 1e-2 && x.abs() < 1e6 {
        format!("{x:.4}")
    } else {
        format!("{x:.4e}")
    }
}
