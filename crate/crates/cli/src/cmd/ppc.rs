use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dollo_core::analysis::{posterior_predictive, Envelope, PredictiveConfig};
use dollo_core::{Execution, ObservationModel};

use super::{load_matrix, load_traces, out_dir, write};
use crate::manifest::Manifest;
use crate::OutDir;

#[derive(Args, Debug)]
pub struct PpcArgs {
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// The full trait matrix, singletons included.
    #[arg(long)]
    data: PathBuf,
    /// Observation model the traces were fitted under.
    #[arg(long, default_value = "noabsent")]
    obs: ObservationModel,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    out: OutDir,
}

fn row(label: &str, e: &Envelope) -> String {
    format!(
        "{label}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        e.observed,
        e.mean,
        e.sd,
        e.lower,
        e.upper,
        e.outside_two_sd() as u8
    )
}

const HEADER: &str = "observed\tmean\tsd\tlower\tupper\toutside_2sd\n";

pub fn run(a: PpcArgs) -> Result<()> {
    let trace = load_traces(&a.traces)?;
    let data = load_matrix(&a.data)?;
    let config = PredictiveConfig {
        replicates: a.reps,
        seed: a.seed,
        execution: if a.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let report = posterior_predictive(&trace, &data, a.obs, &config)?;

    let mut singletons = format!("taxon\t{HEADER}");
    for (t, e) in report.taxa.iter().zip(&report.singletons) {
        singletons.push_str(&row(t, e));
    }
    let mut spectrum = format!("n\t{HEADER}");
    for (n, e) in &report.spectrum {
        spectrum.push_str(&row(&n.to_string(), e));
    }

    let mut text = format!("{} replicates\n\nfrequency spectrum\n", report.replicates);
    let _ = writeln!(
        text,
        "{:>4} {:>9} {:>9} {:>9}",
        "n", "observed", "mean", "sd"
    );
    for (n, e) in &report.spectrum {
        let mark = if e.outside_two_sd() { "  *" } else { "" };
        let _ = writeln!(
            text,
            "{n:>4} {:>9} {:>9.1} {:>9.1}{mark}",
            e.observed, e.mean, e.sd
        );
    }
    let flags = report.spectrum_flags();
    let _ = writeln!(
        text,
        "\nbins outside +-2 sd: {}",
        if flags.is_empty() {
            "none".into()
        } else {
            format!("{flags:?}")
        }
    );
    let taxa = report.singleton_flags();
    let _ = writeln!(
        text,
        "taxa with singleton counts outside +-2 sd: {}",
        if taxa.is_empty() {
            "none".into()
        } else {
            taxa.join(", ")
        }
    );

    let dir = out_dir(&a.out.out)?;
    let mut manifest = Manifest::new(
        "ppc",
        format!("obs={} reps={} seed={}", a.obs, a.reps, a.seed),
        Some(a.seed),
    );
    for p in a.traces.iter().chain(std::iter::once(&a.data)) {
        manifest.input(p);
    }
    for (name, body) in [
        ("singletons.tsv", singletons),
        ("spectrum.tsv", spectrum),
        ("ppc.txt", text.clone()),
    ] {
        let path = dir.join(name);
        write(&path, &body)?;
        manifest.output(&path);
    }
    manifest.write(&dir.join("manifest.json"))?;
    print!("{text}");
    Ok(())
}
