//! Invariant battery for materialized joint models.
//!
//! Every check here must pass for any parameter values; a failure points
//! at an implementation bug rather than at a badly trained model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::copula::JdanModel;
use crate::error::{Error, Result};
use crate::hypernet::Forecaster;
use crate::model_file::LoadedModel;
use crate::quadrature::{panel_simpson, tensor_rule, Rule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            _ => Err(Error::Contract(format!("unknown verify level {s:?} (quick or full)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub models: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            s.push_str(&format!("{tag} {:<28} {}\n", c.name, c.detail));
        }
        s
    }
}

struct Counts {
    points: usize,
    /// Panels per dimension for D = 1, 2, 3 (half uniform, half at
    /// marginal quantiles).
    panels: [usize; 3],
    monte_carlo: usize,
}

impl Level {
    fn counts(self) -> Counts {
        match self {
            Level::Quick => Counts {
                points: 500,
                panels: [512, 64, 16],
                monte_carlo: 50_000,
            },
            Level::Full => Counts {
                points: 10_000,
                panels: [2048, 256, 48],
                monte_carlo: 1_000_000,
            },
        }
    }
}

fn interior_point<R: Rng + ?Sized>(model: &JdanModel<f64>, rng: &mut R, margin: f64) -> Vec<f64> {
    model
        .bounds()
        .iter()
        .map(|b| b.lower + b.width() * rng.random_range(margin..1.0 - margin))
        .collect()
}

fn check(name: &str, failures: usize, total: usize, extra: String) -> Check {
    Check {
        name: name.to_string(),
        passed: failures == 0,
        detail: format!("{failures} violations in {total}{extra}"),
    }
}

pub fn nonnegativity(model: &JdanModel<f64>, points: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norms = model.normalizers()?;
    let mut bad = 0;
    let mut min = f64::INFINITY;
    for _ in 0..points {
        let y = interior_point(model, &mut rng, 0.0);
        let p = model.joint_pdf_with(&norms, &y)?;
        min = min.min(p);
        if !(p >= 0.0) {
            bad += 1;
        }
    }
    Ok(check("density nonnegative", bad, points, format!(", min {min:.3e}")))
}

/// Closed-form density against the finite-difference mixed partial. The
/// plain stencil uses steps of `1e-3` of each width; a Richardson
/// combination with twice that step covers sharply curved marginals,
/// where the plain stencil's truncation error alone exceeds the tolerance.
pub fn fd_agreement(model: &JdanModel<f64>, points: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let volume: f64 = model.bounds().iter().map(|b| b.width()).product();
    let mut bad = 0;
    let mut worst = 0.0_f64;
    for _ in 0..points {
        let y = interior_point(model, &mut rng, 0.01);
        let a = model.joint_pdf(&y)?;
        let fine = model.mixed_partial_fd(&y, 1e-3)?;
        let coarse = model.mixed_partial_fd(&y, 2e-3)?;
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        let rel = |f: f64| (a - f).abs() / (a.abs().max(f.abs()) + 1e-6 / volume);
        let err = rel(fine).min(rel(extrapolated));
        worst = worst.max(err);
        if !(err <= 1e-3) {
            bad += 1;
        }
    }
    Ok(check("density matches fd", bad, points, format!(", worst rel {worst:.2e}")))
}

/// Range, faces, corner, marginal consistency and monotonicity of the CDF.
pub fn cdf_battery(model: &JdanModel<f64>, points: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = model.dim();
    let lower: Vec<f64> = model.bounds().iter().map(|b| b.lower).collect();
    let upper: Vec<f64> = model.bounds().iter().map(|b| b.upper).collect();
    let mut bad = 0;
    let mut total = 1;
    if (model.joint_cdf(&upper)? - 1.0).abs() > 1e-12 {
        bad += 1;
    }
    for _ in 0..points {
        let y = interior_point(model, &mut rng, 0.0);
        let f = model.joint_cdf(&y)?;
        total += 1;
        if !(0.0..=1.0).contains(&f) {
            bad += 1;
        }
        let d = rng.random_range(0..dim);
        let mut face = y.clone();
        face[d] = lower[d];
        total += 1;
        if model.joint_cdf(&face)? != 0.0 {
            bad += 1;
        }
        let mut edge = upper.clone();
        edge[d] = y[d];
        let b = model.bounds()[d];
        total += 1;
        if (model.joint_cdf(&edge)? - model.marginals()[d].normalized_cdf(y[d], &b)?).abs() > 1e-12 {
            bad += 1;
        }
        let mut higher = y.clone();
        for (v, b) in higher.iter_mut().zip(model.bounds()) {
            *v += rng.random::<f64>() * (b.upper - *v);
        }
        total += 1;
        if model.joint_cdf(&higher)? < f - 1e-14 {
            bad += 1;
        }
    }
    Ok(check("cdf validity", bad, total, String::new()))
}

/// Simpson panels for dimension `d` with edges at `panels / 2` uniform
/// points, `panels / 2` marginal quantiles and the tail quantiles
/// `2^-j`, `1 − 2^-j` for `j ≤ tail_levels`,
/// so that sharp marginals still get enough nodes where their mass is.
pub fn adapted_rule(model: &JdanModel<f64>, d: usize, panels: usize, tail_levels: i32) -> Result<Rule> {
    let b = model.bounds()[d];
    let net = &model.marginals()[d];
    let norm = net.normalizer(&b)?;
    let k = (panels / 2).max(1);
    let mut edges: Vec<f64> = (0..=k).map(|i| b.lower + b.width() * i as f64 / k as f64).collect();
    let tails = (1..=tail_levels).flat_map(|j| {
        let p = 0.5_f64.powi(j);
        [p, 1.0 - p]
    });
    for p in (1..k).map(|i| i as f64 / k as f64).chain(tails) {
        edges.push(net.inverse_cdf_with(&norm, p, &b)?);
    }
    Ok(panel_simpson(&edges))
}

/// Integral of each marginal density over its bounds.
pub fn marginal_normalization(model: &JdanModel<f64>, panels: usize) -> Result<Check> {
    let mut worst = 0.0_f64;
    for (d, (net, b)) in model.marginals().iter().zip(model.bounds()).enumerate() {
        let norm = net.normalizer(b)?;
        let rule = adapted_rule(model, d, panels, 30)?;
        let integral = rule.integrate(|t| net.cdf_pdf_with(&norm, t, b).map(|(_, p)| p).unwrap_or(f64::NAN));
        worst = worst.max((integral - 1.0).abs());
    }
    Ok(Check {
        name: "marginals integrate to 1".into(),
        passed: worst <= 1e-3,
        detail: format!("max |integral − 1| {worst:.2e}"),
    })
}

/// Integral of the joint density over the box: tensor Simpson on adapted
/// panels for D ≤ 3, Monte Carlo beyond.
pub fn normalization(model: &JdanModel<f64>, level: Level, seed: u64) -> Result<Check> {
    let counts = level.counts();
    let norms = model.normalizers()?;
    let pdf = |y: &[f64]| model.joint_pdf_with(&norms, y).unwrap_or(f64::NAN);
    let dim = model.dim();
    let (integral, tol, method) = if dim <= 3 {
        let rules = (0..dim)
            .map(|d| adapted_rule(model, d, counts.panels[dim - 1], [30, 20, 10][dim - 1]))
            .collect::<Result<Vec<_>>>()?;
        (tensor_rule(pdf, &rules), 1e-3, "simpson")
    } else {
        let (mean, se) = monte_carlo_integral(model, counts.monte_carlo, seed)?;
        (mean, (5.0 * se).max(5e-3), "monte carlo")
    };
    Ok(Check {
        name: "density integrates to 1".into(),
        passed: (integral - 1.0).abs() <= tol,
        detail: format!("{method} integral {integral:.6} (tol {tol:.1e})"),
    })
}

/// Uniform Monte Carlo estimate of the box integral of the density, and
/// its standard error. Chunks use independent streams, so the result does
/// not depend on the thread count.
pub fn monte_carlo_integral(model: &JdanModel<f64>, n: usize, seed: u64) -> Result<(f64, f64)> {
    const CHUNK: usize = 10_000;
    let norms = model.normalizers()?;
    let volume: f64 = model.bounds().iter().map(|b| b.width()).product();
    let chunks = n.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..CHUNK.min(n - c * CHUNK) {
                let y = interior_point(model, &mut rng, 0.0);
                let v = model.joint_pdf_with(&norms, &y)? * volume;
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect::<Vec<Result<(f64, f64)>>>();
    let (mut s, mut s2) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        s += a;
        s2 += b;
    }
    let nf = n as f64;
    let mean = s / nf;
    let var = (s2 / nf - mean * mean).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

pub fn verify_joint(model: &JdanModel<f64>, level: Level, seed: u64) -> Result<Vec<Check>> {
    let counts = level.counts();
    let mut checks = vec![
        nonnegativity(model, counts.points, seed)?,
        cdf_battery(model, counts.points / 10, seed.wrapping_add(1))?,
        marginal_normalization(model, counts.panels[0])?,
    ];
    // The 2^D stencil loses digits to rounding beyond four dimensions.
    if model.dim() <= 4 {
        checks.push(fd_agreement(model, counts.points / 50, seed.wrapping_add(2))?);
    }
    if level == Level::Full {
        checks.push(normalization(model, level, seed.wrapping_add(3))?);
    }
    Ok(checks)
}

/// Runs the battery on the stored joint model and, for conditional
/// models, on forecasts for `feature_draws` random feature vectors.
pub fn verify(model: &LoadedModel, level: Level, seed: u64) -> Result<VerifyReport> {
    let mut joints = Vec::new();
    match model {
        LoadedModel::Joint(m) => joints.push(m.clone()),
        LoadedModel::Conditional(c) => {
            let mean: Vec<f64> = c.feature_scaling.iter().map(|m| m.invert(0.0)).collect();
            joints.push(c.model_for(&mean)?);
        }
    }
    if let LoadedModel::Conditional(c) = model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = if level == Level::Full { 5 } else { 2 };
        for _ in 0..draws {
            let x: Vec<f64> = c
                .feature_scaling
                .iter()
                .map(|m| m.invert(rng.random_range(-2.0..2.0)))
                .collect();
            joints.push(c.model_for(&x)?);
        }
    }
    let mut checks = Vec::new();
    for (i, joint) in joints.iter().enumerate() {
        for mut c in verify_joint(joint, level, seed)? {
            if joints.len() > 1 {
                c.name = format!("{} [{}]", c.name, i);
            }
            checks.push(c);
        }
    }
    Ok(VerifyReport {
        level,
        models: joints.len(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Activation;
    use crate::hypernet::{Architecture, ConditionalModel, ConditioningNet, MarginalSpec};
    use crate::marginal::Bounds;

    fn random_joint(dim: usize, seed: u64) -> JdanModel<f64> {
        let arch = Architecture::new(
            (0..dim).map(|d| Bounds::new(-(d as f64), 2.0 + d as f64).unwrap()).collect(),
            0,
        )
        .with_marginals(MarginalSpec {
            hidden: vec![4, 4],
            activation: Activation::Tanh,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..arch.raw_len()).map(|_| rng.random_range(-1.5..1.5)).collect();
        arch.materialize(&raw).unwrap()
    }

    #[test]
    fn random_models_pass_quick() {
        for dim in 2..=5 {
            let m = LoadedModel::Joint(random_joint(dim, dim as u64));
            let r = verify(&m, Level::Quick, 1).unwrap();
            assert!(r.passed(), "dim {dim}\n{}", r.summary());
        }
    }

    #[test]
    fn full_level_integrates() {
        for dim in [2, 3, 4] {
            let m = random_joint(dim, 10 + dim as u64);
            let c = normalization(&m, Level::Full, 0).unwrap();
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn conditional_models_are_checked_per_feature_draw() {
        let arch = Architecture::new(vec![Bounds::unit(); 2], 1).with_hypernet(vec![3], Activation::Tanh);
        let model = LoadedModel::Conditional(ConditionalModel {
            net: ConditioningNet::init(&arch, 2).unwrap(),
            architecture: arch,
            feature_scaling: vec![crate::data::AffineMap::identity()],
        });
        let r = verify(&model, Level::Quick, 0).unwrap();
        assert_eq!(r.models, 3);
        assert!(r.passed(), "{}", r.summary());
        assert!(r.summary().contains("[2]"));
    }

    #[test]
    fn adapted_rule_integrates_a_sharp_marginal() {
        use crate::marginal::{InputMap, MarginalNet};
        let sharp = MarginalNet::new(vec![1, 1, 1], Activation::Sigmoid, vec![vec![3.0], vec![0.0]], vec![vec![0.0], vec![0.0]])
            .unwrap()
            .with_input_map(InputMap { offset: 0.3, scale: 1e-3 });
        let m = JdanModel::new(
            vec![sharp.clone(), sharp],
            vec![Bounds::unit(); 2],
            crate::copula::Correlations::from_coefficients(2, &[0.5]).unwrap(),
        )
        .unwrap();
        let c = marginal_normalization(&m, 512).unwrap();
        assert!(c.passed, "{c:?}");
        assert!(normalization(&m, Level::Quick, 0).unwrap().passed);
        // A uniform grid of the same size misses the spike.
        let b = Bounds::unit();
        let norm = m.marginals()[0].normalizer(&b).unwrap();
        let naive = crate::quadrature::simpson(
            |t| m.marginals()[0].cdf_pdf_with(&norm, t, &b).unwrap().1,
            0.0,
            1.0,
            64,
        );
        assert!((naive - 1.0).abs() > 1e-2);
    }

    #[test]
    fn level_parsing() {
        assert_eq!("quick".parse::<Level>().unwrap(), Level::Quick);
        assert!("slow".parse::<Level>().is_err());
    }
}
