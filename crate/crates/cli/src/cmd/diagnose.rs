use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dollo_core::mcmc::{autocorrelation, ChainTrace, SeriesDiagnostics};

use super::{load_trace, num, out_dir, write};
use crate::manifest::Manifest;
use crate::OutDir;

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// Largest lag written to acf.tsv.
    #[arg(long, default_value_t = 200)]
    max_lag: usize,
    #[command(flatten)]
    out: OutDir,
}

fn columns(trace: &ChainTrace) -> [(&'static str, Vec<f64>); 4] {
    [
        ("log_posterior", trace.series(|s| s.log_posterior)),
        ("log_likelihood", trace.series(|s| s.log_likelihood)),
        ("mu", trace.mu()),
        ("root_age", trace.root_age()),
    ]
}

pub fn run(a: DiagnoseArgs) -> Result<()> {
    let mut text = String::new();
    let mut tsv = String::from("trace\tseries\tn\tmean\tsd\tiact\tess\treliable\n");
    let mut acf = String::from("trace\tseries\tlag\tacf\n");
    for p in &a.traces {
        let trace = load_trace(p)?.trace;
        let _ = writeln!(text, "{} ({} samples)", p.display(), trace.len());
        let _ = writeln!(
            text,
            "  {:<15} {:>12} {:>12} {:>8} {:>8}",
            "series", "mean", "sd", "iact", "ess"
        );
        for (name, xs) in columns(&trace) {
            let d = SeriesDiagnostics::of(&xs);
            let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.1}"));
            let mut note = String::new();
            if d.degenerate {
                note.push_str("  constant");
            } else if !d.reliable {
                note.push_str("  too short");
            }
            let _ = writeln!(
                text,
                "  {:<15} {:>12} {:>12} {:>8} {:>8}{note}",
                name,
                num(d.mean),
                num(d.sd),
                opt(d.iact),
                opt(d.ess)
            );
            let _ = writeln!(
                tsv,
                "{}\t{name}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.display(),
                d.n,
                d.mean,
                d.sd,
                opt(d.iact),
                opt(d.ess),
                d.reliable
            );
            if !d.degenerate && xs.len() > 1 {
                for (lag, r) in autocorrelation(&xs, a.max_lag.min(xs.len() - 1))
                    .iter()
                    .enumerate()
                {
                    let _ = writeln!(acf, "{}\t{name}\t{lag}\t{r}", p.display());
                }
            }
        }
        for m in trace.moves.iter().filter(|m| m.proposed > 0) {
            let _ = writeln!(
                text,
                "  move {:<10} proposed {:>10} accepted {:.3}",
                m.kind.name(),
                m.proposed,
                m.acceptance_rate()
            );
        }
    }
    let dir = out_dir(&a.out.out)?;
    let mut manifest = Manifest::new("diagnose", format!("max_lag={}", a.max_lag), None);
    for p in &a.traces {
        manifest.input(p);
    }
    for (name, body) in [("diagnostics.tsv", tsv), ("acf.tsv", acf)] {
        let path = dir.join(name);
        write(&path, &body)?;
        manifest.output(&path);
    }
    manifest.write(&dir.join("manifest.json"))?;
    print!("{text}");
    Ok(())
}
