//! Composite Simpson rules used for CRPS and for normalization checks.

/// Composite Simpson on `[a, b]` with `intervals` subintervals (rounded up
/// to the next even count).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = (intervals.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Simpson node weights for `intervals` subintervals on an interval of
/// width `width`.
pub fn simpson_weights(width: f64, intervals: usize) -> Vec<f64> {
    let n = (intervals.max(2) + 1) & !1;
    let h = width / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Tensor-product Simpson over the box `∏ [lo_d, hi_d]`.
pub fn tensor_simpson(
    f: impl Fn(&[f64]) -> f64,
    lower: &[f64],
    upper: &[f64],
    intervals: usize,
) -> f64 {
    assert_eq!(lower.len(), upper.len());
    let rules: Vec<Rule> = lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| {
            let weights = simpson_weights(u - l, intervals);
            let step = (u - l) / (weights.len() - 1) as f64;
            let nodes = (0..weights.len()).map(|i| l + i as f64 * step).collect();
            Rule { nodes, weights }
        })
        .collect();
    tensor_rule(f, &rules)
}

/// One-dimensional quadrature nodes and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }
}

/// Simpson's rule on each panel between consecutive `edges` (sorted,
/// duplicates ignored).
pub fn panel_simpson(edges: &[f64]) -> Rule {
    let mut e = edges.to_vec();
    e.sort_by(f64::total_cmp);
    e.dedup();
    let mut nodes = vec![e[0]];
    let mut weights = vec![0.0];
    for pair in e.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let h = (b - a) / 6.0;
        *weights.last_mut().unwrap() += h;
        nodes.extend([0.5 * (a + b), b]);
        weights.extend([4.0 * h, h]);
    }
    Rule { nodes, weights }
}

/// Tensor product of one-dimensional rules.
pub fn tensor_rule(f: impl Fn(&[f64]) -> f64, rules: &[Rule]) -> f64 {
    let dim = rules.len();
    let mut index = vec![0usize; dim];
    let mut point: Vec<f64> = rules.iter().map(|r| r.nodes[0]).collect();
    let mut total = 0.0;
    loop {
        let w: f64 = index.iter().zip(rules).map(|(&i, r)| r.weights[i]).product();
        total += w * f(&point);
        let mut d = 0;
        loop {
            if d == dim {
                return total;
            }
            index[d] += 1;
            if index[d] < rules[d].nodes.len() {
                point[d] = rules[d].nodes[index[d]];
                break;
            }
            index[d] = 0;
            point[d] = rules[d].nodes[0];
            d += 1;
        }
    }
}
