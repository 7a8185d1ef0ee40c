use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use dollo_core::io::{read_calibrations, write_trace};
use dollo_core::mcmc::{
    diagnostics, run_chains, ChainConfig, ModelConfig, MoveKind, MoveWeights, Schedule,
};
use dollo_core::priors::{PriorConfig, RatePrior, TreePrior, DEFAULT_MAX_ROOT_AGE};
use dollo_core::tree::CalibrationSet;
use dollo_core::{Execution, ObservationModel};

use super::{invalid, load_matrix, num, out_dir, read_input};
use crate::manifest::Manifest;
use crate::OutDir;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TreePriorArg {
    UniformRoot,
    Branching,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RatePriorArg {
    Reciprocal,
    Uniform,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Trait matrix (CSV).
    #[arg(long)]
    data: PathBuf,
    /// Calibration file.
    #[arg(long)]
    calibrations: Option<PathBuf>,
    /// Run even though nothing fixes the time scale.
    #[arg(long)]
    allow_unconstrained: bool,
    #[arg(long, default_value = "noabsent")]
    obs: ObservationModel,
    /// Remove singleton traits instead of refusing nounique runs that contain them.
    #[arg(long)]
    drop_singletons: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    iterations: u64,
    /// Defaults to a tenth of the iterations.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Defaults to about ten thousand recorded states.
    #[arg(long)]
    thin: Option<u64>,
    /// Independent chains, seeded `seed`, `seed + 1`, ...
    #[arg(long, default_value_t = 1)]
    chains: u64,
    #[arg(long, value_enum, default_value = "uniform-root")]
    tree_prior: TreePriorArg,
    #[arg(long, default_value_t = DEFAULT_MAX_ROOT_AGE)]
    max_root_age: f64,
    #[arg(long, value_enum, default_value = "reciprocal")]
    mu_prior: RatePriorArg,
    #[arg(long, default_value_t = 1e-8)]
    mu_lower: f64,
    #[arg(long, default_value_t = 1e2)]
    mu_upper: f64,
    /// Starting death rate; estimated from the data when absent.
    #[arg(long)]
    mu: Option<f64>,
    /// Hold the death rate at --mu.
    #[arg(long, requires = "mu")]
    fix_mu: bool,
    /// Sample from the prior, ignoring the traits.
    #[arg(long)]
    prior_only: bool,
    /// Move weights, e.g. node-age=40,topology=25,ridge=15,mu-walk=10,leaf-age=10.
    #[arg(long)]
    weights: Option<String>,
    /// Evaluate everything on one thread.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    out: OutDir,
}

fn parse_weights(s: &str) -> Result<MoveWeights> {
    let mut w = MoveWeights::default();
    for item in s.split(',') {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| invalid(format!("bad move weight '{item}'")))?;
        let kind = MoveKind::from_name(name.trim())
            .ok_or_else(|| invalid(format!("unknown move '{name}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad move weight '{item}'")))?;
        w.set(kind, value);
    }
    Ok(w)
}

pub fn run(a: InferArgs) -> Result<()> {
    let mut data = load_matrix(&a.data)?;
    if a.obs == ObservationModel::NoUnique {
        let singletons = data.traits().iter().filter(|t| t.leaves.len() == 1).count();
        if singletons > 0 {
            if !a.drop_singletons {
                return Err(invalid(format!(
                    "{singletons} singleton traits in nounique data; pass --drop-singletons to remove them"
                )));
            }
            log::info!("dropping {singletons} singleton traits");
            data = data.thinned(ObservationModel::NoUnique);
        }
    }
    data.check_observation_model(a.obs)?;

    let cal = match &a.calibrations {
        Some(p) => {
            let text = read_input(p)?;
            read_calibrations(&text, Some(data.taxa()))
                .with_context(|| format!("reading {}", p.display()))?
        }
        None => CalibrationSet::default(),
    };
    if !cal.has_upper_bound() {
        if !a.allow_unconstrained && !a.fix_mu && !a.prior_only {
            return Err(invalid(
                "no clade age has an upper bound, so the time scale is not identified and the posterior \
                 may be improper; add calibrations or pass --allow-unconstrained",
            ));
        }
        log::warn!("no upper-bounded calibration: the time scale rests on the priors alone");
    }
    for c in cal
        .clades
        .iter()
        .filter(|c| c.lower.is_some() && c.upper.is_none())
    {
        log::warn!(
            "clade '{}' has only a lower bound, which does not fix the time scale by itself",
            c.name
        );
    }

    let (mu_lower, mu_upper) = (a.mu_lower, a.mu_upper);
    let prior = PriorConfig {
        tree: match a.tree_prior {
            TreePriorArg::UniformRoot => TreePrior::UniformRoot {
                max_root_age: a.max_root_age,
            },
            TreePriorArg::Branching => TreePrior::Branching,
        },
        mu: match a.mu_prior {
            RatePriorArg::Reciprocal => RatePrior::Reciprocal {
                lower: mu_lower,
                upper: mu_upper,
            },
            RatePriorArg::Uniform => RatePrior::Uniform {
                lower: mu_lower,
                upper: mu_upper,
            },
        },
    };
    let mut schedule = Schedule::with_iterations(a.iterations);
    if let Some(b) = a.burn_in {
        schedule.burn_in = b;
    }
    if let Some(t) = a.thin {
        schedule.thin = t;
    }
    let weights = match &a.weights {
        Some(s) => parse_weights(s)?,
        None => MoveWeights::default(),
    };
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let config = ChainConfig {
        model: ModelConfig {
            obs: a.obs,
            mu: a.mu,
            fix_mu: a.fix_mu,
            prior_only: a.prior_only,
        },
        prior,
        weights,
        schedule,
        initial_tree: None,
        execution: exec,
    };
    if a.chains == 0 {
        return Err(invalid("--chains must be at least 1"));
    }

    let dir = out_dir(&a.out.out)?;
    let mut manifest = Manifest::new(
        "infer",
        format!(
            "obs={} drop_singletons={} iterations={} burn_in={} thin={} chains={} tree_prior={:?} \
             mu_prior={:?} mu={:?} fix_mu={} prior_only={} weights={:?} seed={}",
            a.obs,
            a.drop_singletons,
            schedule.iterations,
            schedule.burn_in,
            schedule.thin,
            a.chains,
            prior.tree,
            prior.mu,
            a.mu,
            a.fix_mu,
            a.prior_only,
            weights,
            a.seed
        ),
        Some(a.seed),
    );
    manifest.input(&a.data);
    if let Some(p) = &a.calibrations {
        manifest.input(p);
    }

    let seeds: Vec<u64> = (0..a.chains).map(|i| a.seed.wrapping_add(i)).collect();
    log::info!(
        "{} chain(s) of {} iterations on {} taxa, {} traits",
        seeds.len(),
        schedule.iterations,
        data.n_taxa(),
        data.n_traits()
    );
    let traces = run_chains(&data, &cal, &config, &seeds, exec)
        .into_iter()
        .collect::<dollo_core::Result<Vec<_>>>()?;

    let meta = vec![
        ("config_sha256".to_string(), manifest.config_digest()),
        (
            "data_sha256".to_string(),
            crate::manifest::sha256_file(&a.data)?,
        ),
        ("observation_model".to_string(), a.obs.to_string()),
    ];
    for (i, trace) in traces.iter().enumerate() {
        let name = if traces.len() == 1 {
            "trace.tsv".to_string()
        } else {
            format!("trace-{}.tsv", i + 1)
        };
        let path = dir.join(name);
        let file =
            std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_trace(trace, &meta, std::io::BufWriter::new(file))?;
        manifest.output(&path);

        let d = diagnostics(trace);
        println!(
            "chain {} (seed {}): {} samples -> {}",
            i + 1,
            trace.seed,
            trace.len(),
            path.display()
        );
        for m in &trace.moves {
            if m.proposed > 0 {
                println!(
                    "  {:<10} acceptance {:.3}",
                    m.kind.name(),
                    m.acceptance_rate()
                );
            }
        }
        let ess = |x: Option<f64>| x.map_or("-".to_string(), |e| format!("{e:.0}"));
        println!(
            "  root age mean {}  ESS {};  mu mean {}  ESS {}",
            num(d.root_age.mean),
            ess(d.root_age.ess),
            num(d.mu.mean),
            ess(d.mu.ess)
        );
    }
    manifest.write(&dir.join("manifest.json"))?;
    Ok(())
}
