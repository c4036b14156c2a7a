//! Probabilistic forecast scores.
//!
//! Every function takes a [`Forecaster`] and observations with raw
//! (unstandardized) features. Per-observation work runs in parallel and is
//! reduced in input order.

use std::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::JdanModel;
use crate::data::Observation;
use crate::error::{Error, Result};
use crate::hypernet::Forecaster;
use crate::quadrature::simpson;
use crate::training::LOG_GUARD;

/// Simpson intervals on each side of the observation.
pub const CRPS_INTERVALS: usize = 256;

pub const DEFAULT_ENERGY_SAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub log_score: f64,
    pub crps: Vec<f64>,
    pub pit_ks: Vec<f64>,
    pub energy_score: f64,
    pub n_evaluated: usize,
    /// Rows with a target outside the bounds; left out of the log score.
    pub n_out_of_bounds: usize,
}

impl MetricsReport {
    pub fn table(&self) -> String {
        let mut s = format!(
            "observations      {}\nout of bounds     {}\nlog score         {:.6}\nenergy score      {:.6}\n",
            self.n_evaluated, self.n_out_of_bounds, self.log_score, self.energy_score
        );
        for (d, (c, k)) in self.crps.iter().zip(&self.pit_ks).enumerate() {
            s.push_str(&format!("dim {:<3} crps {:.6}  pit ks {:.6}\n", d + 1, c, k));
        }
        s
    }
}

fn check(f: &dyn Forecaster, data: &[Observation]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for o in data {
        if o.y.len() != f.dim() {
            return Err(Error::Dimension {
                expected: f.dim(),
                got: o.y.len(),
            });
        }
        if o.x.len() != f.input_dim() {
            return Err(Error::Dimension {
                expected: f.input_dim(),
                got: o.x.len(),
            });
        }
    }
    Ok(())
}

fn in_bounds(model: &JdanModel<f64>, y: &[f64]) -> bool {
    y.iter().zip(model.bounds()).all(|(&v, b)| b.contains(v))
}

fn clamped(model: &JdanModel<f64>, y: &[f64]) -> Vec<f64> {
    y.iter().zip(model.bounds()).map(|(&v, b)| b.clamp(v)).collect()
}

fn per_observation<T: Send>(
    f: &dyn Forecaster,
    data: &[Observation],
    op: impl Fn(usize, &JdanModel<f64>, &Observation) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    check(f, data)?;
    data.par_iter()
        .enumerate()
        .map(|(i, o)| op(i, &f.model_for(&o.x)?, o))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Mean `ln(pdf + 1e-12)` over in-bounds rows, and the number of rows
/// left out.
pub fn log_score_counted(f: &dyn Forecaster, data: &[Observation]) -> Result<(f64, usize)> {
    let terms = per_observation(f, data, |_, m, o| {
        if in_bounds(m, &o.y) {
            Ok(Some((m.joint_pdf(&o.y)? + LOG_GUARD).ln()))
        } else {
            Ok(None)
        }
    })?;
    let kept: Vec<f64> = terms.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((kept.iter().sum::<f64>() / kept.len() as f64, terms.len() - kept.len()))
}

pub fn log_score(f: &dyn Forecaster, data: &[Observation]) -> Result<f64> {
    log_score_counted(f, data).map(|(s, _)| s)
}

/// `∫ (F(t) − 1{t ≥ y})² dt` over the bounds for one marginal.
pub fn crps_single(model: &JdanModel<f64>, d: usize, y: f64) -> Result<f64> {
    let b = model.bounds()[d];
    let net = &model.marginals()[d];
    let norm = net.normalizer(&b)?;
    let y = b.clamp(y);
    let failure = RefCell::new(None);
    let cdf = |t: f64| match net.cdf_with(&norm, t, &b) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let below = simpson(|t| cdf(t).powi(2), b.lower, y, CRPS_INTERVALS);
    let above = simpson(|t| (1.0 - cdf(t)).powi(2), y, b.upper, CRPS_INTERVALS);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(below + above),
    }
}

pub fn crps_marginal(f: &dyn Forecaster, data: &[Observation], d: usize) -> Result<f64> {
    if d >= f.dim() {
        return Err(Error::Dimension {
            expected: f.dim(),
            got: d + 1,
        });
    }
    let v = per_observation(f, data, |_, m, o| crps_single(m, d, o.y[d]))?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// `F_d(y_d)` for every observation, with targets clamped into the bounds.
pub fn pit_values(f: &dyn Forecaster, data: &[Observation], d: usize) -> Result<Vec<f64>> {
    if d >= f.dim() {
        return Err(Error::Dimension {
            expected: f.dim(),
            got: d + 1,
        });
    }
    per_observation(f, data, |_, m, o| {
        let b = m.bounds()[d];
        m.marginals()[d].normalized_cdf(b.clamp(o.y[d]), &b)
    })
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `values` and Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

pub fn pit_ks(f: &dyn Forecaster, data: &[Observation], d: usize) -> Result<f64> {
    Ok(ks_uniform(&pit_values(f, data, d)?))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Energy score of one forecast from `samples`.
pub fn energy_single(samples: &[Vec<f64>], y: &[f64]) -> f64 {
    let m = samples.len() as f64;
    let first = samples.iter().map(|s| distance(s, y)).sum::<f64>() / m;
    let mut spread = 0.0;
    for (j, a) in samples.iter().enumerate() {
        for b in &samples[j + 1..] {
            spread += distance(a, b);
        }
    }
    // The double sum counts each unordered pair twice.
    first - spread / (m * m)
}

/// Mean energy score; observation `i` draws its samples from stream `i`
/// of a generator seeded with `seed`.
pub fn energy_score(f: &dyn Forecaster, data: &[Observation], samples: usize, seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Contract(format!("energy score needs at least 2 samples, got {samples}")));
    }
    let v = per_observation(f, data, |i, m, o| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let s = m.sample(samples, &mut rng)?;
        Ok(energy_single(&s, &clamped(m, &o.y)))
    })?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

pub fn evaluate(f: &dyn Forecaster, data: &[Observation], energy_samples: usize, seed: u64) -> Result<MetricsReport> {
    let (log_score, n_out_of_bounds) = log_score_counted(f, data)?;
    let dims = 0..f.dim();
    Ok(MetricsReport {
        log_score,
        crps: dims.clone().map(|d| crps_marginal(f, data, d)).collect::<Result<_>>()?,
        pit_ks: dims.map(|d| pit_ks(f, data, d)).collect::<Result<_>>()?,
        energy_score: energy_score(f, data, energy_samples, seed)?,
        n_evaluated: data.len(),
        n_out_of_bounds,
    })
}
