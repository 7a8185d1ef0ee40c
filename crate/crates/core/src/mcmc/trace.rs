use super::moves::{MoveKind, MoveWeights};
use super::state::ChainState;
use crate::tree::DatedTree;

/// One recorded state.
#[derive(Clone, Debug)]
pub struct Sample {
    pub iteration: u64,
    pub log_posterior: f64,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub mu: f64,
    pub root_age: f64,
    pub tree: DatedTree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveStats {
    pub kind: MoveKind,
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Recorded states of one chain plus per-move acceptance counts.
#[derive(Clone, Debug)]
pub struct ChainTrace {
    pub seed: u64,
    pub weights: MoveWeights,
    pub samples: Vec<Sample>,
    pub moves: Vec<MoveStats>,
}

impl ChainTrace {
    pub fn new(seed: u64, weights: MoveWeights) -> Self {
        ChainTrace {
            seed,
            weights,
            samples: Vec::new(),
            moves: MoveKind::ALL
                .into_iter()
                .map(|kind| MoveStats {
                    kind,
                    proposed: 0,
                    accepted: 0,
                })
                .collect(),
        }
    }

    pub(crate) fn count(&mut self, kind: MoveKind, accepted: bool) {
        let s = self
            .moves
            .iter_mut()
            .find(|s| s.kind == kind)
            .expect("every kind has a slot");
        s.proposed += 1;
        s.accepted += accepted as u64;
    }

    pub(crate) fn record(&mut self, iteration: u64, state: &ChainState) {
        self.samples.push(Sample {
            iteration,
            log_posterior: state.log_posterior(),
            log_prior: state.log_prior,
            log_likelihood: state.log_lkd,
            mu: state.mu,
            root_age: state.tree.root_age(),
            tree: state.tree.clone(),
        });
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total number of steps taken, burn-in included.
    pub fn iterations(&self) -> u64 {
        self.moves.iter().map(|s| s.proposed).sum()
    }

    pub fn series(&self, f: impl Fn(&Sample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    pub fn mu(&self) -> Vec<f64> {
        self.series(|s| s.mu)
    }

    pub fn root_age(&self) -> Vec<f64> {
        self.series(|s| s.root_age)
    }

    pub fn trees(&self) -> impl Iterator<Item = &DatedTree> {
        self.samples.iter().map(|s| &s.tree)
    }

    /// Concatenates the samples of several chains; move counts are summed.
    pub fn pooled(traces: &[ChainTrace]) -> Option<ChainTrace> {
        let first = traces.first()?;
        let mut out = ChainTrace::new(first.seed, first.weights);
        for t in traces {
            out.samples.extend(t.samples.iter().cloned());
            for (a, b) in out.moves.iter_mut().zip(&t.moves) {
                a.proposed += b.proposed;
                a.accepted += b.accepted;
            }
        }
        Some(out)
    }
}
