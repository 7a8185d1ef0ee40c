use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::{frequency_spectrum, quantile, singleton_counts};
use crate::data::{ObservationModel, TraitMatrix};
use crate::error::{Error, Result};
use crate::likelihood::expected_births_integral;
use crate::mcmc::ChainTrace;
use crate::par::{map_range, Execution};
use crate::simulate::{simulate, SimScenario};

#[derive(Clone, Copy, Debug)]
pub struct PredictiveConfig {
    pub replicates: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        PredictiveConfig {
            replicates: 1000,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

/// Predictive distribution of one statistic against its observed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub observed: f64,
    pub mean: f64,
    pub sd: f64,
    /// 2.5% and 97.5% points of the replicates.
    pub lower: f64,
    pub upper: f64,
}

impl Envelope {
    fn of(observed: f64, reps: &mut [f64]) -> Self {
        let n = reps.len() as f64;
        let mean = reps.iter().sum::<f64>() / n;
        let sd = if reps.len() > 1 {
            (reps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        reps.sort_by(f64::total_cmp);
        Envelope {
            observed,
            mean,
            sd,
            lower: quantile(reps, 0.025),
            upper: quantile(reps, 0.975),
        }
    }

    /// Observed value more than two predictive standard deviations from the mean.
    pub fn outside_two_sd(&self) -> bool {
        (self.observed - self.mean).abs() > 2.0 * self.sd
    }

    /// Observed value outside the central 95% interval.
    pub fn outside_interval(&self) -> bool {
        self.observed < self.lower || self.observed > self.upper
    }
}

#[derive(Clone, Debug)]
pub struct PredictiveReport {
    pub taxa: Vec<String>,
    /// Singleton count per taxon.
    pub singletons: Vec<Envelope>,
    /// `(n, envelope)` for every spectrum bin the fitted model describes.
    pub spectrum: Vec<(usize, Envelope)>,
    pub replicates: usize,
}

impl PredictiveReport {
    /// Spectrum bins whose observed count lies more than two SDs from the predictive mean.
    pub fn spectrum_flags(&self) -> Vec<usize> {
        self.spectrum
            .iter()
            .filter(|(_, e)| e.outside_two_sd())
            .map(|&(n, _)| n)
            .collect()
    }

    pub fn singleton_flags(&self) -> Vec<&str> {
        self.taxa
            .iter()
            .zip(&self.singletons)
            .filter(|(_, e)| e.outside_two_sd())
            .map(|(t, _)| t.as_str())
            .collect()
    }
}

/// Replicates data sets from posterior samples and compares singleton counts
/// and the frequency spectrum with `data`.
///
/// Each replicate picks a recorded state at random, draws the birth rate from
/// its conditional posterior given the number of traits recorded under
/// `obs_fit`, and simulates a complete data set with every nonempty trait
/// kept.
pub fn posterior_predictive(
    trace: &ChainTrace,
    data: &TraitMatrix,
    obs_fit: ObservationModel,
    config: &PredictiveConfig,
) -> Result<PredictiveReport> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("trace has no samples".into()));
    }
    if config.replicates == 0 {
        return Err(Error::Config("at least one replicate is needed".into()));
    }
    let taxa = data.taxa();
    let mut sorted_data: Vec<&str> = taxa.iter().map(String::as_str).collect();
    let mut sorted_tree: Vec<&str> = trace.samples[0]
        .tree
        .leaf_names()
        .iter()
        .map(String::as_str)
        .collect();
    sorted_data.sort_unstable();
    sorted_tree.sort_unstable();
    if sorted_data != sorted_tree {
        return Err(Error::Config(
            "trace trees and data have different taxa".into(),
        ));
    }
    let n_fit = data.thinned(obs_fit).n_traits();
    if n_fit == 0 {
        return Err(Error::InvalidInput(
            "no traits pass the observation model".into(),
        ));
    }
    let l = taxa.len();

    let reps = map_range(
        config.execution,
        config.replicates,
        |r| -> Result<(Vec<usize>, Vec<usize>)> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64);
            let s = &trace.samples[rng.random_range(0..trace.samples.len())];
            let integral = expected_births_integral(&s.tree, s.mu, obs_fit)?;
            let lambda = Gamma::new(n_fit as f64, s.mu / integral)
                .map_err(|e| Error::Domain(format!("birth-rate posterior: {e}")))?
                .sample(&mut rng);
            let scenario = SimScenario::new(
                s.tree.clone(),
                lambda,
                s.mu,
                ObservationModel::NoAbsent,
                rng.random(),
            );
            let sim = simulate(&scenario)?.data.with_taxa_order(taxa)?;
            Ok((singleton_counts(&sim), frequency_spectrum(&sim)))
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let x = singleton_counts(data);
    let y = frequency_spectrum(data);
    let singletons = (0..l)
        .map(|i| {
            let mut col: Vec<f64> = reps.iter().map(|(xs, _)| xs[i] as f64).collect();
            Envelope::of(x[i] as f64, &mut col)
        })
        .collect();
    let spectrum = (obs_fit.threshold() + 1..=l)
        .map(|n| {
            let mut col: Vec<f64> = reps.iter().map(|(_, ys)| ys[n] as f64).collect();
            (n, Envelope::of(y[n] as f64, &mut col))
        })
        .collect();
    Ok(PredictiveReport {
        taxa: taxa.to_vec(),
        singletons,
        spectrum,
        replicates: config.replicates,
    })
}
