//! Maximum-likelihood training of the conditioning network.
//!
//! The loss is the mean of `−ln(p(y | x) + 1e-12)` over a batch, where
//! `p` is the joint density of the model materialized from the network
//! output. Gradients come from [`crate::autodiff`] applied to the same
//! generic code that evaluates the loss. Batches are split into fixed-size
//! chunks that may run on different threads; chunk results are always
//! summed in chunk order, so results do not depend on the thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Var};
use crate::data::{fit_bounds, AffineMap, Dataset, Observation};
use crate::error::{Error, Result};
use crate::hypernet::{Architecture, ConditionalModel, ConditioningNet};
use crate::marginal::Bounds;
use crate::scalar::{lift, Scalar};

/// Added to the density inside the logarithm.
pub const LOG_GUARD: f64 = 1e-12;

const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Maximum L2 norm of a batch gradient.
    pub grad_clip: f64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 500,
            patience: 20,
            seed: 0,
            grad_clip: 10.0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.grad_clip > 0.0
            && self.validation_fraction > 0.0
            && self.validation_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("invalid training configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_validation_nll: f64,
    /// Validation rows outside the bounds, left out of the validation NLL.
    pub validation_excluded: usize,
    pub skipped_batches: usize,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// `epoch,train_nll,val_nll` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_nll,val_nll\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_nll, e.val_nll));
        }
        out
    }
}

/// Adam moments, kept so training can be checkpointed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub state: AdamState,
}

impl Adam {
    pub fn new(n: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            state: AdamState {
                step: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        let s = &mut self.state;
        s.step += 1;
        let bias1 = 1.0 - self.beta1.powi(s.step as i32);
        let bias2 = 1.0 - self.beta2.powi(s.step as i32);
        for i in 0..params.len() {
            s.m[i] = self.beta1 * s.m[i] + (1.0 - self.beta1) * grad[i];
            s.v[i] = self.beta2 * s.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = s.m[i] / bias1;
            let v_hat = s.v[i] / bias2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`.
pub fn clip_gradient(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

/// Summed per-observation NLL of a chunk; `first` is the global index of
/// the chunk's first observation, for error reporting.
fn chunk_nll<T: Scalar>(
    net: &ConditioningNet<T>,
    arch: &Architecture,
    chunk: &[Observation],
    first: usize,
) -> Result<T> {
    let shared = if net.input_dim() == 0 {
        let model = net.model_for(arch, &[])?;
        let norms = model.normalizers()?;
        Some((model, norms))
    } else {
        None
    };
    let mut total = T::zero();
    for (k, obs) in chunk.iter().enumerate() {
        let y: Vec<T> = lift(&obs.y);
        let pdf = match &shared {
            Some((model, norms)) => model.joint_pdf_with(norms, &y)?,
            None => net.model_for(arch, &lift(&obs.x))?.joint_pdf(&y)?,
        };
        let nll = -(pdf + T::of(LOG_GUARD)).ln();
        if !nll.is_finite() {
            return Err(Error::NonFiniteLoss { index: first + k });
        }
        total = total + nll;
    }
    Ok(total)
}

fn check_batch(arch: &Architecture, batch: &[Observation]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    for (i, obs) in batch.iter().enumerate() {
        if obs.y.len() != arch.dim || obs.x.len() != arch.input_dim {
            return Err(Error::Dimension {
                expected: arch.dim + arch.input_dim,
                got: obs.y.len() + obs.x.len(),
            });
        }
        if let Some(d) = (0..arch.dim).find(|&d| !arch.bounds[d].contains(obs.y[d])) {
            return Err(Error::Contract(format!(
                "sample {i}: target {} = {} is outside its bounds",
                d + 1,
                obs.y[d]
            )));
        }
    }
    Ok(())
}

/// Mean NLL of `batch` (features already standardized).
pub fn nll_loss(net: &ConditioningNet<f64>, arch: &Architecture, batch: &[Observation]) -> Result<f64> {
    check_batch(arch, batch)?;
    let sums = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| chunk_nll(net, arch, chunk, c * CHUNK))
        .collect::<Vec<_>>();
    let mut total = 0.0;
    for s in sums {
        total += s?;
    }
    Ok(total / batch.len() as f64)
}

/// Mean NLL and its exact gradient with respect to `net.flatten()`.
pub fn loss_and_grad(
    net: &ConditioningNet<f64>,
    arch: &Architecture,
    batch: &[Observation],
) -> Result<(f64, Vec<f64>)> {
    check_batch(arch, batch)?;
    let params = net.flatten();
    let layout = net.layer_sizes().to_vec();
    let activation = net.activation();
    let parts = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut failure = None;
            let (value, grad) = autodiff::gradient(&params, |p| {
                let result = ConditioningNet::<Var>::from_flat(layout.clone(), activation, p)
                    .and_then(|vnet| chunk_nll(&vnet, arch, chunk, c * CHUNK));
                result.unwrap_or_else(|e| {
                    failure = Some(e);
                    Var::of(f64::NAN)
                })
            });
            match failure {
                Some(e) => Err(e),
                None => Ok((value, grad)),
            }
        })
        .collect::<Vec<_>>();
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for part in parts {
        let (v, g) = part?;
        loss += v;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok((loss / n, grad))
}

pub fn grad(net: &ConditioningNet<f64>, arch: &Architecture, batch: &[Observation]) -> Result<Vec<f64>> {
    loss_and_grad(net, arch, batch).map(|(_, g)| g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheck {
    /// Largest `|g − fd| / max(|g|, |fd|)` over checked coordinates.
    pub max_relative_error: f64,
    pub worst_coordinate: Option<usize>,
    /// Coordinates compared (those with `|g| > 1e-8`).
    pub checked: usize,
}

/// Compares [`grad`] against central differences of [`nll_loss`] with
/// step `h`. When the network has more than `max_coordinates` parameters a
/// seeded random subset of that size is checked. With the `quad` feature,
/// coordinates whose f64 difference quotient disagrees by more than 1e-6
/// are re-differenced in 128-bit floating point.
pub fn grad_check_subset(
    net: &ConditioningNet<f64>,
    arch: &Architecture,
    batch: &[Observation],
    h: f64,
    max_coordinates: usize,
    seed: u64,
) -> Result<GradCheck> {
    if !(h > 0.0) {
        return Err(Error::Contract(format!("finite-difference step {h} must be positive")));
    }
    let analytic = grad(net, arch, batch)?;
    let params = net.flatten();
    let mut coords: Vec<usize> = (0..params.len()).collect();
    if coords.len() > max_coordinates {
        coords.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        coords.truncate(max_coordinates);
        coords.sort_unstable();
    }
    let loss_at = |p: &[f64]| -> Result<f64> {
        let n = ConditioningNet::from_flat(net.layer_sizes().to_vec(), net.activation(), p)?;
        nll_loss(&n, arch, batch)
    };
    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst_coordinate: None,
        checked: 0,
    };
    let mut p = params.clone();
    for i in coords {
        let g = analytic[i];
        if g.abs() <= 1e-8 {
            continue;
        }
        p[i] = params[i] + h;
        let up = loss_at(&p)?;
        p[i] = params[i] - h;
        let down = loss_at(&p)?;
        p[i] = params[i];
        let mut fd = (up - down) / (2.0 * h);
        let mut rel = (g - fd).abs() / g.abs().max(fd.abs());
        // At small steps the f64 quotient carries rounding noise of order
        // eps·L/h; recheck disagreeing coordinates in quad precision.
        #[cfg(feature = "quad")]
        if rel > QUAD_RECHECK {
            fd = quad_central_difference(net, arch, batch, &params, i, h)?;
            rel = (g - fd).abs() / g.abs().max(fd.abs());
        }
        report.checked += 1;
        if rel > report.max_relative_error || report.worst_coordinate.is_none() {
            report.max_relative_error = rel.max(report.max_relative_error);
            report.worst_coordinate = Some(i);
        }
    }
    Ok(report)
}

#[cfg(feature = "quad")]
const QUAD_RECHECK: f64 = 1e-6;

#[cfg(feature = "quad")]
fn quad_central_difference(
    net: &ConditioningNet<f64>,
    arch: &Architecture,
    batch: &[Observation],
    params: &[f64],
    i: usize,
    h: f64,
) -> Result<f64> {
    use f128::f128;
    use num_traits::ToPrimitive;
    let mut p: Vec<f128> = lift(params);
    let step = f128::of(h);
    let loss_at = |p: &[f128]| -> Result<f128> {
        let n = ConditioningNet::from_flat(net.layer_sizes().to_vec(), net.activation(), p)?;
        let mut total = f128::zero();
        for (c, chunk) in batch.chunks(CHUNK).enumerate() {
            total = total + chunk_nll(&n, arch, chunk, c * CHUNK)?;
        }
        Ok(total / f128::of(batch.len() as f64))
    };
    let centre = p[i];
    p[i] = centre + step;
    let up = loss_at(&p)?;
    p[i] = centre - step;
    let down = loss_at(&p)?;
    Ok(((up - down) / (step + step)).to_f64().unwrap_or(f64::NAN))
}

/// [`grad_check_subset`] over every coordinate.
pub fn grad_check(
    net: &ConditioningNet<f64>,
    arch: &Architecture,
    batch: &[Observation],
    h: f64,
) -> Result<GradCheck> {
    grad_check_subset(net, arch, batch, h, usize::MAX, 0)
}

/// Deterministic `(train, validation)` index split.
pub fn split_indices(n: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    idx.shuffle(&mut rng);
    let n_val = ((n as f64 * validation_fraction).round() as usize).clamp(1.min(n), n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Bounds fitted on the rows [`train`] will use for training, so that
/// validation rows play no part in choosing the support.
pub fn training_bounds(dataset: &Dataset, cfg: &TrainConfig, margin: f64) -> Result<Vec<Bounds>> {
    let (train_idx, _) = split_indices(dataset.len(), cfg.validation_fraction, cfg.seed);
    let rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| dataset.targets()[i].clone()).collect();
    fit_bounds(&rows, margin)
}

pub struct TrainOutcome {
    pub model: ConditionalModel,
    pub report: TrainReport,
    pub optimizer: AdamState,
}

/// Adam with gradient clipping, seeded shuffling and early stopping on
/// validation NLL; returns the parameters of the best validation epoch.
pub fn train(dataset: &Dataset, arch: &Architecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    arch.validate()?;
    if dataset.dim() != arch.dim || dataset.feature_dim() != arch.input_dim {
        return Err(Error::Contract(format!(
            "dataset has {} targets and {} features, architecture expects {} and {}",
            dataset.dim(),
            dataset.feature_dim(),
            arch.dim,
            arch.input_dim
        )));
    }
    let (train_idx, val_idx) = split_indices(dataset.len(), cfg.validation_fraction, cfg.seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Contract("dataset too small to split".into()));
    }
    let feature_scaling: Vec<AffineMap> = (0..dataset.feature_dim())
        .map(|j| AffineMap::standardizing(train_idx.iter().map(move |&i| dataset.features()[i][j])))
        .collect();
    let standardized = |i: usize| Observation {
        x: dataset.features()[i]
            .iter()
            .zip(&feature_scaling)
            .map(|(&v, m)| m.apply(v))
            .collect(),
        y: dataset.targets()[i].clone(),
    };
    let in_bounds = |o: &Observation| o.y.iter().zip(&arch.bounds).all(|(&v, b)| b.contains(v));
    let train_obs: Vec<Observation> = train_idx.iter().map(|&i| standardized(i)).collect();
    if let Some(bad) = train_obs.iter().position(|o| !in_bounds(o)) {
        return Err(Error::Contract(format!(
            "training row {} has a target outside the architecture bounds",
            train_idx[bad]
        )));
    }
    let all_val: Vec<Observation> = val_idx.iter().map(|&i| standardized(i)).collect();
    let validation_excluded = all_val.iter().filter(|o| !in_bounds(o)).count();
    let val_obs: Vec<Observation> = all_val.into_iter().filter(|o| in_bounds(o)).collect();
    if val_obs.is_empty() {
        return Err(Error::Contract("no validation rows inside the bounds".into()));
    }
    if train_obs.len() < 10 * cfg.batch_size {
        log::warn!(
            "only {} training rows for batch size {}",
            train_obs.len(),
            cfg.batch_size
        );
    }

    let net = ConditioningNet::init(arch, cfg.seed)?;
    let layout = net.layer_sizes().to_vec();
    let activation = net.activation();
    let mut params = net.flatten();
    let mut best_params = params.clone();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);

    let mut order: Vec<usize> = (0..train_obs.len()).collect();
    let mut epochs = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut skipped = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<Observation> = batch_idx.iter().map(|&i| train_obs[i].clone()).collect();
            let current = ConditioningNet::from_flat(layout.clone(), activation, &params)?;
            match loss_and_grad(&current, arch, &batch) {
                Ok((loss, mut g)) if loss.is_finite() => {
                    clip_gradient(&mut g, cfg.grad_clip);
                    adam.update(&mut params, &g);
                    loss_sum += loss * batch.len() as f64;
                    seen += batch.len();
                }
                Ok(_) => skipped += 1,
                Err(e) if e.is_numerical() => {
                    log::debug!("epoch {epoch}: skipping batch: {e}");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if seen == 0 {
            return Err(Error::TrainingFailed {
                epoch,
                last_good: Box::new(best_params),
            });
        }
        let current = ConditioningNet::from_flat(layout.clone(), activation, &params)?;
        let val_nll = match nll_loss(&current, arch, &val_obs) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let train_nll = loss_sum / seen as f64;
        log::info!("epoch {epoch}: train {train_nll:.6} val {val_nll:.6}");
        epochs.push(EpochRecord {
            epoch,
            train_nll,
            val_nll,
        });
        if val_nll < best {
            best = val_nll;
            best_epoch = epoch;
            best_params.clone_from(&params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let stopped_epoch = epochs.len();
    if best_epoch == 0 {
        return Err(Error::TrainingFailed {
            epoch: stopped_epoch,
            last_good: Box::new(best_params),
        });
    }
    let net = ConditioningNet::from_flat(layout, activation, &best_params)?;
    Ok(TrainOutcome {
        model: ConditionalModel {
            architecture: arch.clone(),
            net,
            feature_scaling,
        },
        report: TrainReport {
            epochs,
            stopped_epoch,
            best_epoch,
            best_validation_nll: best,
            validation_excluded,
            skipped_batches: skipped,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
        optimizer: adam.state,
    })
}

/// Random observations inside the architecture bounds, for checks.
pub fn random_batch<R: Rng + ?Sized>(arch: &Architecture, n: usize, rng: &mut R) -> Vec<Observation> {
    (0..n)
        .map(|_| Observation {
            x: (0..arch.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            y: arch
                .bounds
                .iter()
                .map(|b| b.lower + b.width() * rng.random_range(0.02..0.98))
                .collect(),
        })
        .collect()
}
