use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dollo_core::likelihood::{two_leaf_mle, two_leaf_posterior_logpdf};

use super::{invalid, write};
use crate::manifest::Manifest;

#[derive(Args, Debug)]
pub struct TwoLeafArgs {
    /// Traits seen only at the first taxon.
    #[arg(long)]
    n1: usize,
    /// Traits seen only at the second taxon.
    #[arg(long)]
    n2: usize,
    /// Traits seen at both.
    #[arg(long)]
    n12: usize,
    #[arg(long)]
    mu: f64,
    /// Write the normalized posterior density of the total branch length to this TSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    points: usize,
    /// Right end of the curve; defaults to five times the estimate.
    #[arg(long)]
    max_length: Option<f64>,
}

pub fn run(a: TwoLeafArgs) -> Result<()> {
    let mle = two_leaf_mle(a.n1, a.n2, a.n12, a.mu)?;
    println!("{mle:.4}");
    let Some(path) = &a.curve else {
        return Ok(());
    };
    if a.n1 + a.n2 == 0 || a.n12 == 0 {
        return Err(invalid(
            "the posterior is improper unless both shared and private traits are present",
        ));
    }
    if a.points < 2 {
        return Err(invalid("--points must be at least 2"));
    }
    let hi = a.max_length.unwrap_or(5.0 * mle);
    if hi.is_nan() || hi <= 0.0 {
        return Err(invalid("--max-length must be positive"));
    }
    let xs: Vec<f64> = (1..=a.points)
        .map(|i| hi * i as f64 / a.points as f64)
        .collect();
    let lps: Vec<f64> = xs
        .iter()
        .map(|&x| two_leaf_posterior_logpdf(x, a.mu, a.n1, a.n2, a.n12))
        .collect();
    let top = lps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lps.iter().map(|lp| (lp - top).exp()).collect();
    // trapezoid rule, with the density taken as zero at length 0
    let h = hi / a.points as f64;
    let area = h * (dens.iter().sum::<f64>() - 0.5 * dens[dens.len() - 1]);
    let mut tsv = String::from("length\tlog_density\tdensity\n");
    for ((x, lp), d) in xs.iter().zip(&lps).zip(&dens) {
        let _ = writeln!(tsv, "{x}\t{lp}\t{:e}", d / area);
    }
    write(path, &tsv)?;

    let mut manifest = Manifest::new(
        "two-leaf",
        format!(
            "n1={} n2={} n12={} mu={} points={} max_length={hi}",
            a.n1, a.n2, a.n12, a.mu, a.points
        ),
        None,
    );
    manifest.output(path);
    let mut mpath = path.clone().into_os_string();
    mpath.push(".manifest.json");
    manifest.write(&PathBuf::from(mpath))?;
    Ok(())
}
