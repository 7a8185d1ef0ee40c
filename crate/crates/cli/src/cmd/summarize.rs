use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dollo_core::analysis::{
    clade_mrca_mean_age, clade_support, majority_consensus, summarize_series,
};
use dollo_core::io::read_calibrations;

use super::{invalid, load_traces, num, out_dir, read_input, write};
use crate::manifest::Manifest;
use crate::OutDir;

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    /// Trace files; several are pooled.
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// Clades to report, as NAME=TAXON,TAXON,...
    #[arg(long = "clade")]
    clades: Vec<String>,
    /// Also report every clade named in this calibration file.
    #[arg(long)]
    calibrations: Option<PathBuf>,
    /// Minimum support for consensus clades.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    out: OutDir,
}

pub fn run(a: SummarizeArgs) -> Result<()> {
    let trace = load_traces(&a.traces)?;
    let taxa = trace.samples[0].tree.leaf_names().to_vec();

    let mut clades: Vec<(String, Vec<String>)> = vec![("root".into(), taxa.clone())];
    if let Some(p) = &a.calibrations {
        let text = read_input(p)?;
        for c in read_calibrations(&text, Some(&taxa[..]))?.clades {
            clades.push((c.name, c.taxa));
        }
    }
    for spec in &a.clades {
        let (name, members) = spec
            .split_once('=')
            .ok_or_else(|| invalid(format!("clade '{spec}' is not NAME=TAXON,...")))?;
        clades.push((
            name.trim().to_string(),
            members.split(',').map(|s| s.trim().to_string()).collect(),
        ));
    }

    let mut tsv =
        String::from("clade\ttaxa\tsupport\tsupport_se\tmean_age\tage_se\tage_lower\tage_upper\n");
    let mut text = format!(
        "{} samples from {} trace(s)\n\n",
        trace.len(),
        a.traces.len()
    );
    let _ = writeln!(
        text,
        "{:<20} {:>8} {:>10} {:>10} {:>10} {:>10}",
        "clade", "support", "mean age", "+-", "2.5%", "97.5%"
    );
    for (name, members) in &clades {
        let support = clade_support(&trace, members)?;
        let age = clade_mrca_mean_age(&trace, members)?;
        let _ = writeln!(
            tsv,
            "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            members.join(","),
            support.value,
            support.se,
            age.mean.value,
            age.mean.se,
            age.lower,
            age.upper
        );
        let _ = writeln!(
            text,
            "{:<20} {:>8.3} {:>10.0} {:>10.0} {:>10.0} {:>10.0}",
            name, support.value, age.mean.value, age.mean.se, age.lower, age.upper
        );
    }

    let mut params = String::from("parameter\tmean\tse\tlower\tupper\n");
    text.push('\n');
    for (name, xs) in [("mu", trace.mu()), ("root_age", trace.root_age())] {
        let s = summarize_series(&xs).expect("trace is nonempty");
        let _ = writeln!(
            params,
            "{name}\t{}\t{}\t{}\t{}",
            s.mean.value, s.mean.se, s.lower, s.upper
        );
        let _ = writeln!(
            text,
            "{name:<9} mean {} +- {}  95% [{}, {}]",
            num(s.mean.value),
            num(s.mean.se),
            num(s.lower),
            num(s.upper)
        );
    }

    let consensus = majority_consensus(&trace, a.threshold)?;
    let dir = out_dir(&a.out.out)?;
    let mut manifest = Manifest::new(
        "summarize",
        format!("clades={:?} threshold={}", clades, a.threshold),
        None,
    );
    for p in a.traces.iter().chain(&a.calibrations) {
        manifest.input(p);
    }
    for (name, body) in [
        ("clades.tsv", tsv),
        ("parameters.tsv", params),
        ("consensus.nwk", consensus.to_newick() + "\n"),
        ("summary.txt", text.clone()),
    ] {
        let path = dir.join(name);
        write(&path, &body)?;
        manifest.output(&path);
    }
    manifest.write(&dir.join("manifest.json"))?;
    print!("{text}");
    Ok(())
}
