//! Sequential model-based hyperparameter search with a quantile (good/bad)
//! Parzen surrogate.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Param {
    Uniform {
        lo: f64,
        hi: f64,
    },
    LogUniform {
        lo: f64,
        hi: f64,
    },
    /// Integers in `lo..=hi`.
    Int {
        lo: i64,
        hi: i64,
    },
    Choice {
        values: Vec<f64>,
    },
}

impl Param {
    fn check(&self, name: &str) -> Result<()> {
        let ok = match self {
            Param::Uniform { lo, hi } => lo <= hi && lo.is_finite() && hi.is_finite(),
            Param::LogUniform { lo, hi } => *lo > 0.0 && lo <= hi && hi.is_finite(),
            Param::Int { lo, hi } => lo <= hi,
            Param::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("search parameter {name} has an empty or invalid range")))
        }
    }

    /// Maps a unit-interval coordinate onto the parameter's domain.
    fn decode(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Param::Uniform { lo, hi } => lo + u * (hi - lo),
            Param::LogUniform { lo, hi } => (lo.ln() + u * (hi.ln() - lo.ln())).exp(),
            Param::Int { lo, hi } => {
                let span = (hi - lo + 1) as f64;
                (*lo + ((u * span).floor() as i64).min(hi - lo)) as f64
            }
            Param::Choice { values } => values[((u * values.len() as f64).floor() as usize).min(values.len() - 1)],
        }
    }
}

pub type SearchSpace = BTreeMap<String, Param>;
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub config: Assignment,
    /// Validation score; `None` when the objective failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

impl Trial {
    fn value(&self) -> f64 {
        self.score.filter(|s| !s.is_nan()).unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: usize,
    pub trials: Vec<Trial>,
}

impl SearchResult {
    pub fn best_config(&self) -> &Assignment {
        &self.trials[self.best].config
    }
}

const GOOD_QUANTILE: f64 = 0.25;
const N_CANDIDATES: usize = 24;

/// Maximizes `objective` over `space`. The first `max(5, budget/5)` trials are
/// uniform random; later trials pick, among candidates drawn from the good
/// density, the one with the highest good/bad density ratio. Ties in the final
/// score go to the earliest trial.
pub fn hyperparameter_search<F>(space: &SearchSpace, mut objective: F, budget: usize, seed: u64) -> Result<SearchResult>
where
    F: FnMut(&Assignment) -> Result<f64>,
{
    if budget == 0 {
        return Err(Error::invalid("search budget must be at least 1"));
    }
    for (name, p) in space {
        p.check(name)?;
    }
    let dims: Vec<(&String, &Param)> = space.iter().collect();
    let mut g = rng::from_seed(seed);
    let n_init = 5.max(budget / 5);
    let mut units: Vec<Vec<f64>> = Vec::new();
    let mut trials: Vec<Trial> = Vec::new();
    for index in 0..budget {
        let u: Vec<f64> = if index < n_init || dims.is_empty() {
            dims.iter().map(|_| g.random::<f64>()).collect()
        } else {
            propose(&units, &trials, dims.len(), &mut g)
        };
        let config: Assignment = dims.iter().zip(&u).map(|((n, p), &x)| ((*n).clone(), p.decode(x))).collect();
        let (score, error) = match objective(&config) {
            Ok(s) if s.is_finite() => (Some(s), None),
            Ok(s) => (None, Some(format!("objective returned {s}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        units.push(u);
        trials.push(Trial { index, config, score, error });
    }
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.value() > trials[best].value() {
            best = i;
        }
    }
    Ok(SearchResult { best, trials })
}

fn propose(units: &[Vec<f64>], trials: &[Trial], d: usize, g: &mut rng::Rng) -> Vec<f64> {
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by(|&a, &b| trials[b].value().total_cmp(&trials[a].value()).then(a.cmp(&b)));
    let n_good = ((GOOD_QUANTILE * trials.len() as f64).ceil() as usize).clamp(1, trials.len());
    let good: Vec<&Vec<f64>> = order[..n_good].iter().map(|&i| &units[i]).collect();
    let bad: Vec<&Vec<f64>> = order[n_good..].iter().map(|&i| &units[i]).collect();
    let bw_good = bandwidths(&good, d);
    let bw_bad = bandwidths(&bad, d);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..N_CANDIDATES {
        let centre = good[g.random_range(0..good.len())];
        let cand: Vec<f64> = (0..d)
            .map(|k| {
                let noise = Normal::new(0.0, bw_good[k]).expect("positive bandwidth");
                reflect(centre[k] + noise.sample(g))
            })
            .collect();
        let ratio = log_density(&cand, &good, &bw_good) - log_density(&cand, &bad, &bw_bad);
        if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
            best = Some((ratio, cand));
        }
    }
    best.expect("at least one candidate").1
}

fn reflect(x: f64) -> f64 {
    let y = x.rem_euclid(2.0);
    if y > 1.0 {
        2.0 - y
    } else {
        y
    }
}

/// Scott-style bandwidth per dimension, floored so the density never collapses.
fn bandwidths(points: &[&Vec<f64>], d: usize) -> Vec<f64> {
    let m = points.len();
    (0..d)
        .map(|k| {
            if m < 2 {
                return 0.25;
            }
            let mean = points.iter().map(|p| p[k]).sum::<f64>() / m as f64;
            let sd = (points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
            (1.06 * sd * (m as f64).powf(-0.2)).max(0.05)
        })
        .collect()
}

/// Log of a Gaussian mixture on the unit cube blended with the uniform prior.
fn log_density(x: &[f64], points: &[&Vec<f64>], bw: &[f64]) -> f64 {
    let prior_weight = 1.0 / (points.len() as f64 + 1.0);
    x.iter()
        .enumerate()
        .map(|(k, &xk)| {
            let kde = if points.is_empty() {
                0.0
            } else {
                points
                    .iter()
                    .map(|p| {
                        let z = (xk - p[k]) / bw[k];
                        (-0.5 * z * z).exp() / (bw[k] * (2.0 * std::f64::consts::PI).sqrt())
                    })
                    .sum::<f64>()
                    / points.len() as f64
            };
            (prior_weight + (1.0 - prior_weight) * kde).ln()
        })
        .sum()
}
