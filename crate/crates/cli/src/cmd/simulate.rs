use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dollo_core::io::write_trait_matrix;
use dollo_core::simulate::{simulate, ScenarioCode};
use dollo_core::ObservationModel;
use serde_json::json;

use super::{load_tree, out_dir, write};
use crate::manifest::Manifest;
use crate::OutDir;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// True tree: Newick text or a file holding it. Branch lengths in years.
    #[arg(long)]
    tree: String,
    /// Scenario code, e.g. S/T/U200, S/G0.1/U200, S/MH50/U200, S/T/C200.
    #[arg(long)]
    scenario: ScenarioCode,
    /// Trait death rate per lineage per year.
    #[arg(long)]
    mu: f64,
    /// Overrides the scenario's observation model (noabsent or nounique).
    #[arg(long)]
    obs: Option<ObservationModel>,
    #[arg(long)]
    seed: u64,
    /// Skip the ground-truth file.
    #[arg(long)]
    no_truth: bool,
    #[command(flatten)]
    out: OutDir,
}

pub fn run(a: SimulateArgs) -> Result<()> {
    let tree = load_tree(&a.tree)?;
    let mut scenario = a.scenario.scenario(tree.clone(), a.mu, a.seed)?;
    if let Some(obs) = a.obs {
        scenario.obs = obs;
    }
    let sim = simulate(&scenario)?;
    log::info!(
        "{}: {} traits on {} taxa (lambda = {:.4e})",
        a.scenario,
        sim.data.n_traits(),
        sim.data.n_taxa(),
        scenario.lambda
    );

    let dir = out_dir(&a.out.out)?;
    let mut manifest = Manifest::new(
        "simulate",
        format!(
            "tree={} scenario={} mu={} obs={} seed={}",
            tree.to_newick(),
            a.scenario,
            a.mu,
            scenario.obs,
            a.seed
        ),
        Some(a.seed),
    );
    if !a.tree.trim_start().starts_with('(') {
        manifest.input(&PathBuf::from(&a.tree));
    }

    let matrix = dir.join("matrix.csv");
    let mut buf = Vec::new();
    write_trait_matrix(&sim.data, &mut buf)?;
    write(&matrix, std::str::from_utf8(&buf)?)?;
    manifest.output(&matrix);

    if !a.no_truth {
        let sets = tree.leaf_sets();
        let births: Vec<_> = sim
            .births
            .iter()
            .map(|b| {
                let below: Vec<&str> = sets[b.node].ones().map(|i| tree.leaf_name(i)).collect();
                json!({ "trait": b.trait_id, "age": b.age, "above_clade": below })
            })
            .collect();
        let truth = json!({
            "scenario": a.scenario.to_string(),
            "tree": tree.to_newick(),
            "root_age": tree.root_age(),
            "lambda": scenario.lambda,
            "mu": scenario.mu,
            "observation_model": scenario.obs.to_string(),
            "class_rates": sim.class_rates,
            "births": births,
        });
        let path = dir.join("truth.json");
        write(&path, &(serde_json::to_string_pretty(&truth)? + "\n"))?;
        manifest.output(&path);
    }
    manifest.write(&dir.join("manifest.json"))?;
    println!("{}", matrix.display());
    Ok(())
}
