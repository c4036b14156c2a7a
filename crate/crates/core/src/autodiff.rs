//! Reverse-mode differentiation on a thread-local operation tape.
//!
//! [`gradient`] resets the calling thread's tape, registers one leaf per
//! input, runs the closure and sweeps the recorded partials backwards.
//! Constants never touch the tape. A node stores a contiguous run of
//! `(parent, local partial)` pairs, so n-ary nodes such as
//! [`Scalar::affine`] cost one node instead of 2n.
//!
//! Calls do not nest on one thread; separate threads own separate tapes.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

const CONSTANT: u32 = u32::MAX;

#[derive(Default)]
struct Tape {
    nodes: Vec<(u32, u32)>,
    partials: Vec<(u32, f64)>,
    active: bool,
}

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape::default());
}

/// A scalar tracked on the current thread's tape.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    value: f64,
    index: u32,
}

impl Var {
    pub fn constant(value: f64) -> Self {
        Var { value, index: CONSTANT }
    }

    pub fn is_constant(self) -> bool {
        self.index == CONSTANT
    }

    fn record(value: f64, parents: &[(Var, f64)]) -> Var {
        if parents.iter().all(|(p, _)| p.is_constant()) {
            return Var::constant(value);
        }
        TAPE.with(|tape| {
            let mut tape = tape.borrow_mut();
            let start = tape.partials.len() as u32;
            for &(p, d) in parents {
                if !p.is_constant() {
                    tape.partials.push((p.index, d));
                }
            }
            let end = tape.partials.len() as u32;
            let index = tape.nodes.len() as u32;
            tape.nodes.push((start, end));
            Var { value, index }
        })
    }

    fn unary(self, value: f64, d: f64) -> Var {
        Var::record(value, &[(self, d)])
    }
}

/// Evaluates `f` at `x` and returns `(f(x), ∇f(x))`.
///
/// Panics if called from inside another `gradient` closure on the same
/// thread.
pub fn gradient<F>(x: &[f64], f: F) -> (f64, Vec<f64>)
where
    F: FnOnce(&[Var]) -> Var,
{
    let leaves: Vec<Var> = TAPE.with(|tape| {
        let mut tape = tape.borrow_mut();
        assert!(!tape.active, "nested autodiff::gradient on one thread");
        tape.active = true;
        tape.nodes.clear();
        tape.partials.clear();
        x.iter()
            .enumerate()
            .map(|(i, &value)| {
                tape.nodes.push((0, 0));
                Var { value, index: i as u32 }
            })
            .collect()
    });

    let out = f(&leaves);

    TAPE.with(|tape| {
        let mut tape = tape.borrow_mut();
        tape.active = false;
        let mut grad = vec![0.0; x.len()];
        if out.is_constant() {
            return (out.value, grad);
        }
        let mut adjoint = vec![0.0; out.index as usize + 1];
        adjoint[out.index as usize] = 1.0;
        for node in (0..=out.index as usize).rev() {
            let a = adjoint[node];
            if a == 0.0 {
                continue;
            }
            let (start, end) = tape.nodes[node];
            for &(parent, d) in &tape.partials[start as usize..end as usize] {
                adjoint[parent as usize] += a * d;
            }
        }
        let n = x.len().min(adjoint.len());
        grad[..n].copy_from_slice(&adjoint[..n]);
        (out.value, grad)
    })
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        Var::record(self.value + rhs.value, &[(self, 1.0), (rhs, 1.0)])
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        Var::record(self.value - rhs.value, &[(self, 1.0), (rhs, -1.0)])
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        Var::record(
            self.value * rhs.value,
            &[(self, rhs.value), (rhs, self.value)],
        )
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, rhs: Var) -> Var {
        let q = self.value / rhs.value;
        Var::record(q, &[(self, 1.0 / rhs.value), (rhs, -q / rhs.value)])
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        self.unary(-self.value, -1.0)
    }
}

impl Scalar for Var {
    fn of(v: f64) -> Self {
        Var::constant(v)
    }

    fn value(self) -> f64 {
        self.value
    }

    fn epsilon() -> f64 {
        f64::EPSILON
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    fn ln_1p(self) -> Self {
        self.unary(self.value.ln_1p(), 1.0 / (1.0 + self.value))
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    fn affine(bias: Self, weights: &[Self], inputs: &[Self]) -> Self {
        let mut value = bias.value;
        let mut parents = Vec::with_capacity(2 * weights.len() + 1);
        parents.push((bias, 1.0));
        for (&w, &x) in weights.iter().zip(inputs) {
            value += w.value * x.value;
            parents.push((w, x.value));
            parents.push((x, w.value));
        }
        Var::record(value, &parents)
    }

    fn sigmoid(self) -> Self {
        let s = Scalar::sigmoid(self.value);
        self.unary(s, s * (1.0 - s))
    }

    fn softplus(self) -> Self {
        self.unary(Scalar::softplus(self.value), Scalar::sigmoid(self.value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        let mut p = x.to_vec();
        (0..x.len())
            .map(|i| {
                p[i] = x[i] + h;
                let up = f(&p);
                p[i] = x[i] - h;
                let down = f(&p);
                p[i] = x[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn generic_expr<T: Scalar>(v: &[T]) -> T {
        let a = v[0] * v[1] + v[2].exp() / (v[0] + T::of(3.0));
        let b = T::affine(v[1], &v[..2], &v[1..]).tanh();
        (a - b).softplus() + v[2].sigmoid().ln() - (-v[0]).ln_1p()
    }

    #[test]
    fn polynomial_gradient() {
        let (value, g) = gradient(&[3.0, 2.0], |v| v[0] * v[0] * v[1] - v[1]);
        assert_eq!(value, 16.0);
        assert_eq!(g, vec![12.0, 8.0]);
    }

    #[test]
    fn matches_finite_differences_on_composite_expression() {
        let x = [0.4, -0.7, 0.3];
        let (value, g) = gradient(&x, generic_expr::<Var>);
        assert!((value - generic_expr::<f64>(&x)).abs() < 1e-15);
        let numeric = fd(generic_expr::<f64>, &x, 1e-6);
        for (a, n) in g.iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-8, "{a} vs {n}");
        }
    }

    #[test]
    fn constants_stay_off_the_tape() {
        let c = Var::of(2.0) * Var::of(4.0);
        assert!(c.is_constant());
        let (v, g) = gradient(&[1.0], |_| Var::of(5.0));
        assert_eq!(v, 5.0);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn unused_input_has_zero_gradient() {
        let (_, g) = gradient(&[1.0, 2.0, 3.0], |v| v[1].exp());
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 2.0_f64.exp()).abs() < 1e-12);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn tape_is_reused_across_calls() {
        for k in 0..3 {
            let (_, g) = gradient(&[k as f64], |v| v[0] * v[0]);
            assert_eq!(g[0], 2.0 * k as f64);
        }
    }
}
