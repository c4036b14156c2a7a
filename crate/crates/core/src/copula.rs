//! Pairwise-correlation combiner over normalized marginal CDFs.
//!
//! With marginal CDF values `u_d` and pair coefficients `C_di ∈ (−1, 1)`,
//! the joint CDF is
//!
//! ```text
//! F(u) = ∏_d u_d · (1/P) Σ_{d<i} [C_di (1 − u_d)(1 − u_i) + 1],   P = D(D−1)/2
//! ```
//!
//! Each variable enters a pair term as `u(1 − u)` and the remaining ones
//! as `u`, so the mixed partial over all coordinates is
//!
//! ```text
//! c(u) = 1 + (1/P) Σ_{d<i} C_di (1 − 2u_d)(1 − 2u_i)  ∈ [0, 2]
//! ```
//!
//! and the joint density is `c(F_1(y_1), …, F_D(y_D)) · ∏_d f_d(y_d)`,
//! nonnegative for every parameter value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::marginal::{Bounds, MarginalNet, Normalizer};
use crate::scalar::Scalar;

/// Largest supported dimension.
pub const MAX_DIM: usize = 12;

/// Upper bound of the copula density, used as the rejection envelope.
pub const DENSITY_ENVELOPE: f64 = 2.0;

pub fn pair_count(dim: usize) -> usize {
    dim * dim.saturating_sub(1) / 2
}

/// Pairs `(d, i)` with `d < i` in row-major upper-triangular order.
pub fn pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(move |d| (d + 1..dim).map(move |i| (d, i)))
}

fn check_dim(dim: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "dimension must be between 2 and {MAX_DIM}, got {dim}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correlations<T> {
    dim: usize,
    raw: Vec<T>,
    coefficients: Vec<T>,
}

impl<T: Scalar> Correlations<T> {
    /// Coefficients are `tanh(raw)`.
    pub fn new(dim: usize, raw: Vec<T>) -> Result<Self> {
        check_dim(dim)?;
        if raw.len() != pair_count(dim) {
            return Err(Error::Dimension {
                expected: pair_count(dim),
                got: raw.len(),
            });
        }
        let coefficients = raw.iter().map(|&r| r.tanh()).collect();
        Ok(Correlations {
            dim,
            raw,
            coefficients,
        })
    }

    pub fn independent(dim: usize) -> Result<Self> {
        Self::new(dim, vec![T::zero(); pair_count(dim)])
    }

    /// From target coefficients, each strictly inside `(−1, 1)`.
    pub fn from_coefficients(dim: usize, coefficients: &[f64]) -> Result<Self> {
        if let Some(c) = coefficients.iter().find(|c| !(c.abs() < 1.0)) {
            return Err(Error::Contract(format!(
                "correlation coefficient {c} is outside (-1, 1)"
            )));
        }
        let raw = coefficients.iter().map(|c| T::of(c.atanh())).collect();
        Self::new(dim, raw)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn raw(&self) -> &[T] {
        &self.raw
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn coefficient(&self, d: usize, i: usize) -> T {
        let (d, i) = if d < i { (d, i) } else { (i, d) };
        // Offset of row d in the packed upper triangle.
        let row = d * (2 * self.dim - d - 1) / 2;
        self.coefficients[row + i - d - 1]
    }

    fn check_len(&self, u: &[T]) -> Result<()> {
        if u.len() == self.dim {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim,
                got: u.len(),
            })
        }
    }

    /// Copula CDF at `u ∈ [0, 1]^D`.
    pub fn cdf(&self, u: &[T]) -> Result<T> {
        self.check_len(u)?;
        let product = u.iter().fold(T::one(), |acc, &v| acc * v);
        let mut bracket = T::zero();
        for ((d, i), &c) in pairs(self.dim).zip(&self.coefficients) {
            bracket = bracket + (c * (T::one() - u[d]) * (T::one() - u[i]) + T::one());
        }
        Ok(product * (bracket / T::of(pair_count(self.dim) as f64)))
    }

    /// Mixed partial of [`Correlations::cdf`] over all coordinates.
    pub fn density(&self, u: &[T]) -> Result<T> {
        self.check_len(u)?;
        let two = T::of(2.0);
        let mut sum = T::zero();
        for ((d, i), &c) in pairs(self.dim).zip(&self.coefficients) {
            sum = sum + c * (T::one() - two * u[d]) * (T::one() - two * u[i]);
        }
        Ok(T::one() + sum / T::of(pair_count(self.dim) as f64))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JdanModel<T> {
    marginals: Vec<MarginalNet<T>>,
    bounds: Vec<Bounds>,
    correlations: Correlations<T>,
}

impl<T: Scalar> JdanModel<T> {
    pub fn new(
        marginals: Vec<MarginalNet<T>>,
        bounds: Vec<Bounds>,
        correlations: Correlations<T>,
    ) -> Result<Self> {
        let dim = marginals.len();
        check_dim(dim)?;
        if bounds.len() != dim || correlations.dim() != dim {
            return Err(Error::Contract(format!(
                "{dim} marginals but {} bounds and a {}-dimensional correlation block",
                bounds.len(),
                correlations.dim()
            )));
        }
        for b in &bounds {
            b.validate()?;
        }
        Ok(JdanModel {
            marginals,
            bounds,
            correlations,
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalNet<T>] {
        &self.marginals
    }

    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn correlations(&self) -> &Correlations<T> {
        &self.correlations
    }

    /// Raw parameters: each marginal flattened in turn, then correlation raws.
    pub fn flatten(&self) -> Vec<T> {
        let mut out: Vec<T> = self.marginals.iter().flat_map(|m| m.flatten()).collect();
        out.extend_from_slice(self.correlations.raw());
        out
    }

    fn check_point(&self, y: &[T]) -> Result<()> {
        if y.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim(),
                got: y.len(),
            })
        }
    }

    pub fn normalizers(&self) -> Result<Vec<Normalizer<T>>> {
        self.marginals
            .iter()
            .zip(&self.bounds)
            .map(|(m, b)| m.normalizer(b))
            .collect()
    }

    /// Normalized marginal CDF values at `y` (clamped to the box).
    pub fn marginal_cdfs(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_point(y)?;
        let norms = self.normalizers()?;
        self.marginals
            .iter()
            .zip(&self.bounds)
            .zip(norms.iter().zip(y))
            .map(|((m, b), (n, &v))| m.cdf_with(n, v, b))
            .collect()
    }

    pub fn joint_cdf(&self, y: &[T]) -> Result<T> {
        let u = self.marginal_cdfs(y)?;
        self.correlations.cdf(&u)
    }

    pub fn joint_pdf(&self, y: &[T]) -> Result<T> {
        self.check_point(y)?;
        let norms = self.normalizers()?;
        self.joint_pdf_with(&norms, y)
    }

    /// Joint density reusing precomputed normalizers.
    pub fn joint_pdf_with(&self, norms: &[Normalizer<T>], y: &[T]) -> Result<T> {
        self.check_point(y)?;
        let mut u = Vec::with_capacity(self.dim());
        let mut density = T::one();
        for d in 0..self.dim() {
            let (cdf, pdf) = self.marginals[d].cdf_pdf_with(&norms[d], y[d], &self.bounds[d])?;
            u.push(cdf);
            density = density * pdf;
        }
        Ok(self.correlations.density(&u)? * density)
    }

    /// Draws `n` points: rejection sampling of `u` against the copula
    /// density with envelope 2, then marginal inversion.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let norms = self.normalizers()?;
        let mut out = Vec::with_capacity(n);
        let mut u = vec![T::zero(); self.dim()];
        while out.len() < n {
            for v in u.iter_mut() {
                *v = T::of(rng.random::<f64>());
            }
            let accept = rng.random::<f64>() * DENSITY_ENVELOPE;
            if accept > self.correlations.density(&u)?.value() {
                continue;
            }
            let row = self
                .marginals
                .iter()
                .zip(&self.bounds)
                .zip(norms.iter().zip(&u))
                .map(|((m, b), (norm, p))| m.inverse_cdf_with(norm, p.value(), b).map(T::value))
                .collect::<Result<Vec<f64>>>()?;
            out.push(row);
        }
        Ok(out)
    }

    /// [`JdanModel::sample`] with a ChaCha8 generator seeded from `seed`.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

impl JdanModel<f64> {
    /// Central-difference estimate of `∂^D F / ∂y_1 … ∂y_D` on the `2^D`
    /// stencil, with per-dimension step `rel_step · (U_d − L_d)`.
    pub fn mixed_partial_fd(&self, y: &[f64], rel_step: f64) -> Result<f64> {
        self.check_point(y)?;
        let steps: Vec<f64> = self.bounds.iter().map(|b| rel_step * b.width()).collect();
        for (d, ((b, &v), &h)) in self.bounds.iter().zip(y).zip(&steps).enumerate() {
            if v - b.lower < h || b.upper - v < h {
                return Err(Error::Bracket { dim: d, margin: h });
            }
        }
        let dim = self.dim();
        let mut point = vec![0.0; dim];
        let mut sum = 0.0;
        for mask in 0..(1usize << dim) {
            let mut sign = 1.0;
            for d in 0..dim {
                if mask >> d & 1 == 1 {
                    point[d] = y[d] + steps[d];
                } else {
                    point[d] = y[d] - steps[d];
                    sign = -sign;
                }
            }
            sum += sign * self.joint_cdf(&point)?;
        }
        let volume: f64 = steps.iter().map(|h| 2.0 * h).product();
        Ok(sum / volume)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Activation;
    use crate::quadrature::tensor_simpson;
    use rand::Rng;

    fn uniform_model(dim: usize, coefficients: &[f64]) -> JdanModel<f64> {
        let marginals = (0..dim)
            .map(|_| MarginalNet::zeros(vec![1, 1, 1], Activation::Linear).unwrap())
            .collect();
        let corr = Correlations::from_coefficients(dim, coefficients).unwrap();
        JdanModel::new(marginals, vec![Bounds::unit(); dim], corr).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> JdanModel<f64> {
        let marginals = (0..dim)
            .map(|_| MarginalNet::random(vec![1, 4, 1], Activation::Sigmoid, 0.8, rng).unwrap())
            .collect();
        let bounds = (0..dim)
            .map(|_| {
                let l = rng.random_range(-2.0..1.0);
                Bounds::new(l, l + rng.random_range(0.5..3.0)).unwrap()
            })
            .collect();
        let raw = (0..pair_count(dim)).map(|_| rng.random_range(-1.5..1.5)).collect();
        JdanModel::new(marginals, bounds, Correlations::new(dim, raw).unwrap()).unwrap()
    }

    fn interior_point(rng: &mut ChaCha8Rng, model: &JdanModel<f64>) -> Vec<f64> {
        model
            .bounds()
            .iter()
            .map(|b| b.lower + b.width() * rng.random_range(0.05..0.95))
            .collect()
    }

    #[test]
    fn pair_ordering_and_lookup() {
        let got: Vec<_> = pairs(4).collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let c = Correlations::<f64>::from_coefficients(4, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert!((c.coefficient(1, 3) - 0.5).abs() < 1e-12);
        assert!((c.coefficient(3, 1) - 0.5).abs() < 1e-12);
        assert!((c.coefficient(0, 2) - 0.2).abs() < 1e-12);
        assert!((c.coefficient(2, 3) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn coefficients_stay_open_interval() {
        let c = Correlations::<f64>::new(2, vec![50.0]).unwrap();
        assert!(c.coefficients()[0] <= 1.0);
        let c = Correlations::<f64>::new(2, vec![3.0]).unwrap();
        assert!(c.coefficients()[0] < 1.0 && c.coefficients()[0] > -1.0);
        assert!(Correlations::<f64>::from_coefficients(2, &[1.0]).is_err());
    }

    #[test]
    fn density_examples() {
        let ind = Correlations::<f64>::independent(3).unwrap();
        assert_eq!(ind.density(&[0.1, 0.7, 0.4]).unwrap(), 1.0);
        let c = Correlations::<f64>::from_coefficients(2, &[0.35]).unwrap();
        assert!((c.density(&[0.0, 0.0]).unwrap() - 1.35).abs() < 1e-12);
    }

    fn copula_mixed_partial_fd(c: &Correlations<f64>, u: &[f64], h: f64) -> f64 {
        let dim = u.len();
        let mut sum = 0.0;
        let mut p = vec![0.0; dim];
        for mask in 0..(1usize << dim) {
            let mut sign = 1.0;
            for d in 0..dim {
                if mask >> d & 1 == 1 {
                    p[d] = u[d] + h;
                } else {
                    p[d] = u[d] - h;
                    sign = -sign;
                }
            }
            sum += sign * c.cdf(&p).unwrap();
        }
        sum / (2.0 * h).powi(dim as i32)
    }

    #[test]
    fn closed_form_density_matches_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for dim in 2..=4 {
            for _ in 0..100 {
                let raw = (0..pair_count(dim)).map(|_| rng.random_range(-2.0..2.0)).collect();
                let c = Correlations::new(dim, raw).unwrap();
                let u: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0001..0.9999)).collect();
                let analytic = c.density(&u).unwrap();
                // The copula CDF is quadratic in each coordinate, so the
                // stencil has no truncation error and only rounding remains.
                let fd = copula_mixed_partial_fd(&c, &u, 0.1);
                assert!((fd - analytic).abs() <= 1e-9, "D={dim}: {fd} vs {analytic}");
                if dim <= 3 {
                    let fd = copula_mixed_partial_fd(&c, &u, 1e-4);
                    assert!((fd - analytic).abs() <= 1e-4, "D={dim}: {fd} vs {analytic}");
                }
            }
        }
    }

    #[test]
    fn density_bounded_by_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100_000 {
            let dim = rng.random_range(2..=6);
            let raw = (0..pair_count(dim)).map(|_| rng.random_range(-6.0..6.0)).collect();
            let c = Correlations::new(dim, raw).unwrap();
            let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            let v = c.density(&u).unwrap();
            assert!((0.0..=DENSITY_ENVELOPE).contains(&v), "{v}");
        }
    }

    #[test]
    fn three_way_decomposition_into_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-0.99..0.99)).collect();
            let c3 = Correlations::<f64>::from_coefficients(3, &coeffs).unwrap();
            let u: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let pair = |c: f64, a: f64, b: f64| {
                Correlations::<f64>::from_coefficients(2, &[c]).unwrap().cdf(&[a, b]).unwrap()
            };
            let c12 = Correlations::<f64>::from_coefficients(2, &[c3.coefficient(0, 1)]).unwrap();
            // Unnormalized: 3·F₃ = F₂(u1,u2)·u3 + u2·F(u1,u3) + u1·F(u2,u3).
            let lhs = 3.0 * c3.cdf(&u).unwrap();
            let rhs = c12.cdf(&u[..2]).unwrap() * u[2]
                + u[1] * pair(c3.coefficient(0, 2), u[0], u[2])
                + u[0] * pair(c3.coefficient(1, 2), u[1], u[2]);
            assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn joint_cdf_corners_and_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in 2..=5 {
            let model = random_model(&mut rng, dim);
            let upper: Vec<f64> = model.bounds().iter().map(|b| b.upper).collect();
            assert_eq!(model.joint_cdf(&upper).unwrap(), 1.0);
            for d in 0..dim {
                let mut y = interior_point(&mut rng, &model);
                y[d] = model.bounds()[d].lower;
                assert_eq!(model.joint_cdf(&y).unwrap(), 0.0);

                let mut y = upper.clone();
                y[d] = interior_point(&mut rng, &model)[d];
                let marginal = model.marginals()[d]
                    .normalized_cdf(y[d], &model.bounds()[d])
                    .unwrap();
                assert_eq!(model.joint_cdf(&y).unwrap(), marginal);
            }
        }
        let ind = uniform_model(2, &[0.0]);
        assert!((ind.joint_cdf(&[0.3, 0.6]).unwrap() - 0.18).abs() < 1e-15);
    }

    #[test]
    fn uniform_margins_give_closed_form_density() {
        let model = uniform_model(2, &[0.5]);
        assert!((model.joint_pdf(&[0.0, 0.0]).unwrap() - 1.5).abs() < 1e-12);
        let ind = uniform_model(3, &[0.0, 0.0, 0.0]);
        assert!((ind.joint_pdf(&[0.2, 0.9, 0.5]).unwrap() - 1.0).abs() < 1e-12);
        assert!(model.joint_pdf(&[0.0]).is_err());
        assert!(model.joint_cdf(&[0.0, 0.1, 0.2]).is_err());
    }

    #[test]
    fn independence_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let model = random_model(&mut rng, 3);
        let ind = JdanModel::new(
            model.marginals().to_vec(),
            model.bounds().to_vec(),
            Correlations::independent(3).unwrap(),
        )
        .unwrap();
        let y = interior_point(&mut rng, &ind);
        let product: f64 = (0..3)
            .map(|d| ind.marginals()[d].normalized_pdf(y[d], &ind.bounds()[d]).unwrap())
            .product();
        assert!((ind.joint_pdf(&y).unwrap() - product).abs() < 1e-12 * product.max(1.0));
    }

    #[test]
    fn density_matches_cdf_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for dim in 2..=4 {
            for _ in 0..40 {
                let model = random_model(&mut rng, dim);
                let y = interior_point(&mut rng, &model);
                let fd = model.mixed_partial_fd(&y, 1e-3).unwrap();
                let pdf = model.joint_pdf(&y).unwrap();
                assert!((fd - pdf).abs() <= 1e-3 * pdf.abs().max(fd.abs()), "D={dim}: {fd} vs {pdf}");
            }
        }
        let ind = uniform_model(2, &[0.0]);
        assert!((ind.mixed_partial_fd(&[0.4, 0.5], 1e-3).unwrap() - 1.0).abs() < 1e-4);
        let ind4 = uniform_model(4, &[0.0; 6]);
        assert!((ind4.mixed_partial_fd(&[0.4, 0.5, 0.3, 0.6], 1e-3).unwrap() - 1.0).abs() < 1e-3);
        assert!(matches!(
            ind.mixed_partial_fd(&[0.0005, 0.5], 1e-3),
            Err(Error::Bracket { dim: 0, .. })
        ));
    }

    #[test]
    fn normalization_by_tensor_simpson() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for (dim, n) in [(2, 64), (3, 32)] {
            let model = random_model(&mut rng, dim);
            let lo: Vec<f64> = model.bounds().iter().map(|b| b.lower).collect();
            let hi: Vec<f64> = model.bounds().iter().map(|b| b.upper).collect();
            let mass = tensor_simpson(|y| model.joint_pdf(y).unwrap(), &lo, &hi, n);
            assert!((mass - 1.0).abs() <= 1e-3, "D={dim}: {mass}");
        }
    }

    #[test]
    fn independent_uniform_sample_moments() {
        let model = uniform_model(2, &[0.0]);
        let n = 4000;
        let s = model.sample_seeded(n, 21).unwrap();
        for d in 0..2 {
            let mean = s.iter().map(|r| r[d]).sum::<f64>() / n as f64;
            assert!((mean - 0.5).abs() <= 3.0 / (12.0 * n as f64).sqrt());
        }
        assert_eq!(s, model.sample_seeded(n, 21).unwrap());
        assert_ne!(s, model.sample_seeded(n, 22).unwrap());
    }

    #[test]
    fn empirical_cdf_tracks_joint_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let model = random_model(&mut rng, 2);
        let n = 10_000;
        let s = model.sample_seeded(n, 5).unwrap();
        let b = model.bounds();
        let mut sup: f64 = 0.0;
        for i in 1..=20 {
            for j in 1..=20 {
                let y = [
                    b[0].lower + b[0].width() * i as f64 / 21.0,
                    b[1].lower + b[1].width() * j as f64 / 21.0,
                ];
                let emp = s.iter().filter(|r| r[0] <= y[0] && r[1] <= y[1]).count() as f64 / n as f64;
                sup = sup.max((emp - model.joint_cdf(&y).unwrap()).abs());
            }
        }
        assert!(sup <= 1.6 / (n as f64).sqrt(), "{sup}");
    }

    #[test]
    fn dimension_limits() {
        assert!(Correlations::<f64>::independent(1).is_err());
        assert!(Correlations::<f64>::independent(MAX_DIM + 1).is_err());
        assert!(Correlations::<f64>::new(3, vec![0.0; 2]).is_err());
        let m = MarginalNet::<f64>::zeros(vec![1, 1, 1], Activation::Linear).unwrap();
        assert!(JdanModel::new(
            vec![m.clone(), m],
            vec![Bounds::unit()],
            Correlations::independent(2).unwrap()
        )
        .is_err());
    }
}
