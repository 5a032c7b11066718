//! One-shot property battery behind `starrad verify`.
//!
//! Checks that exercise an algorithm take the implementation as an argument
//! so the battery can be pointed at a deliberately broken variant.

use std::fmt;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starrad::net::{forward_jet, init_network, loss_gradient, Activation, Batch, NetworkSpec, Order};
use starrad::pde::{analytic_field, residual, Pde, Problem};
use starrad::quad::{compare, error_bounds, interval_maxima, ErrorBounds, DEFAULT_SAMPLES};
use starrad::rad::{build_density, Criterion, DensityParams};
use starrad::{BenchFunction, Interval64};

pub type AllocateFn = dyn Fn(&[f64], usize) -> starrad::Result<Vec<usize>> + Sync;
pub type BoundsFn = dyn Fn(&[f64], Interval64, usize) -> starrad::Result<ErrorBounds<f64>> + Sync;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Implementations under test.
pub struct Battery<'a> {
    pub allocate: &'a AllocateFn,
    pub bounds: &'a BoundsFn,
}

impl Default for Battery<'static> {
    fn default() -> Self {
        Self {
            allocate: &|m, n| starrad::quad::allocate(m, n),
            bounds: &|m, iv, n| error_bounds(m, iv, n),
        }
    }
}

impl Battery<'_> {
    pub fn run(&self) -> Vec<Check> {
        let mut checks = vec![
            check_allocation_sums(self.allocate, 2000, 11),
            check_bound_dominance(self.bounds, 1000, 12),
            check_jets_against_differences(100, 13),
            check_gradients_against_differences(100, 14),
            check_density_normalization(500, 15),
            check_analytic_residuals(100, 16),
        ];
        checks.extend(GOLDEN.iter().map(check_golden));
        checks
    }
}

/// Random budgets and maxima, including zero maxima and ties.
pub fn check_allocation_sums(allocate: &AllocateFn, cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let k = rng.gen_range(1..=40);
        let n = rng.gen_range(k..=250);
        let maxima: Vec<f64> = (0..k)
            .map(|_| match rng.gen_range(0..5) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.gen_range(0.0..1e3),
            })
            .collect();
        let counts = match allocate(&maxima, n) {
            Ok(c) => c,
            Err(e) => return Check::new("allocation sums", false, format!("case {case}: {e}")),
        };
        let total: usize = counts.iter().sum();
        if counts.len() != k || total != n || counts.contains(&0) {
            return Check::new(
                "allocation sums",
                false,
                format!("case {case}: N={n}, k={k}, got sum {total} over {} intervals, min {:?}", counts.len(), counts.iter().min()),
            );
        }
    }
    Check::new("allocation sums", true, format!("{cases} random plans sum to N with every n_j >= 1"))
}

/// A random trigonometric polynomial `sum_m a_m sin(w_m x + p_m)` and its
/// second derivative.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    terms: Vec<(f64, f64, f64)>,
}

impl TrigPoly {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let m = rng.gen_range(1..=6);
        Self {
            terms: (0..m)
                .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.1..30.0), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.terms.iter().map(|(a, w, p)| a * (w * x + p).sin()).sum()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.terms.iter().map(|(a, w, p)| -a * w * w * (w * x + p).sin()).sum()
    }
}

pub fn check_bound_dominance(bounds: &BoundsFn, cases: usize, seed: u64) -> Check {
    let name = "refined bound dominance";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let f = TrigPoly::random(&mut rng);
        let lo = rng.gen_range(-3.0..3.0);
        let iv = Interval64::new(lo, lo + rng.gen_range(0.1..5.0)).expect("positive width");
        let n = rng.gen_range(1..=200);
        let k = rng.gen_range(1..=n.min(60));
        let maxima = match interval_maxima(|x| f.second_derivative(x), iv, k, DEFAULT_SAMPLES) {
            Ok(m) => m,
            Err(e) => return Check::new(name, false, format!("case {case}: {e}")),
        };
        match bounds(&maxima, iv, n) {
            Ok(b) if b.refined <= b.uniform => {
                if b.uniform > 0.0 {
                    worst = worst.max(b.refined / b.uniform);
                }
            }
            Ok(b) => {
                return Check::new(
                    name,
                    false,
                    format!("case {case}: N={n}, k={k}, refined {:.6e} > uniform {:.6e}", b.refined, b.uniform),
                )
            }
            Err(e) => return Check::new(name, false, format!("case {case}: {e}")),
        }
    }
    Check::new(name, true, format!("{cases} random integrands, largest refined/uniform ratio {worst:.6}"))
}

fn random_tanh_net<R: Rng>(rng: &mut R) -> (NetworkSpec, Vec<f64>, Vec<f64>) {
    let dim = rng.gen_range(1..=2);
    let depth = rng.gen_range(1..=3);
    let hidden = (0..depth).map(|_| rng.gen_range(2..=8)).collect();
    let spec = NetworkSpec::new(dim, hidden, Activation::Tanh).expect("valid");
    let mut params = init_network::<f64>(&spec, rng.gen()).into_inner();
    // non-zero biases so that every code path carries weight
    for p in params.iter_mut() {
        *p += rng.gen_range(-0.3..0.3);
    }
    let x = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
    (spec, params, x)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn check_jets_against_differences(cases: usize, seed: u64) -> Check {
    let name = "jets vs finite differences";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (spec, params, x) = random_tanh_net(&mut rng);
        let value = |p: &[f64]| forward_jet(&spec, &params, p).map(|j| j.value);
        let jet = match forward_jet(&spec, &params, &x) {
            Ok(j) => j,
            Err(e) => return Check::new(name, false, format!("case {case}: {e}")),
        };
        for i in 0..x.len() {
            let shifted = |d: f64| {
                let mut p = x.clone();
                p[i] += d;
                value(&p).expect("finite")
            };
            let h1 = 1e-5;
            let g = (shifted(h1) - shifted(-h1)) / (2.0 * h1);
            let h2 = 1e-4;
            let q = (shifted(h2) - 2.0 * jet.value + shifted(-h2)) / (h2 * h2);
            worst = worst.max((jet.grad[i] - g).abs() / g.abs().max(1.0));
            worst = worst.max((jet.hess[i] - q).abs() / q.abs().max(1.0));
            if !close(jet.grad[i], g, 1e-5) || !close(jet.hess[i], q, 1e-5) {
                return Check::new(
                    name,
                    false,
                    format!("case {case}, coordinate {i}: grad {} vs {g}, hess {} vs {q}", jet.grad[i], jet.hess[i]),
                );
            }
        }
    }
    Check::new(name, true, format!("{cases} random tanh networks, worst relative gap {worst:.2e}"))
}

pub fn check_gradients_against_differences(cases: usize, seed: u64) -> Check {
    let name = "parameter gradients vs finite differences";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (spec, params, x) = random_tanh_net(&mut rng);
        let dim = x.len();
        let pts = Array2::from_shape_vec((1, dim), x.clone()).expect("one row");
        let loss_of = |theta: &[f64]| {
            loss_gradient(&spec, theta, &[Batch::new(pts.view(), Order::Hessian)], |_, jets| {
                let j = &jets[0][0];
                let mut l = (j.hess[0] - 1.0).square() + j.value.square();
                for g in &j.grad {
                    l = l + g.square() * 0.5;
                }
                l
            })
        };
        let (_, grad) = match loss_of(&params) {
            Ok(v) => v,
            Err(e) => return Check::new(name, false, format!("case {case}: {e}")),
        };
        let h = 1e-6;
        let mut fd = vec![0.0; params.len()];
        let mut theta = params.clone();
        for (i, slot) in fd.iter_mut().enumerate() {
            theta[i] = params[i] + h;
            let up = loss_of(&theta).expect("finite").0;
            theta[i] = params[i] - h;
            let down = loss_of(&theta).expect("finite").0;
            theta[i] = params[i];
            *slot = (up - down) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let gap = grad.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst = worst.max(gap);
        if gap > 1e-4 {
            return Check::new(name, false, format!("case {case}: relative gap {gap:.3e}"));
        }
    }
    Check::new(name, true, format!("{cases} random tanh networks, worst relative gap {worst:.2e}"))
}

pub fn check_density_normalization(cases: usize, seed: u64) -> Check {
    let name = "density normalization";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=200);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1e4) * rng.gen_range(0.0f64..1.0).powi(3)).collect();
        let dp = DensityParams::new(rng.gen_range(0.0..2.0), if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..3.0) })
            .expect("valid");
        let criterion = Criterion::ALL[rng.gen_range(0..4)];
        let p = match build_density(&values, criterion, &dp) {
            Ok(p) => p,
            Err(e) => return Check::new(name, false, format!("case {case}: {e}")),
        };
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || p.iter().any(|v| *v < 0.0) || p.len() != n {
            return Check::new(name, false, format!("case {case}: sum {sum}"));
        }
    }
    Check::new(name, true, format!("{cases} random densities sum to 1 within 1e-12 with no negative entry"))
}

pub fn check_analytic_residuals(points: usize, seed: u64) -> Check {
    let name = "analytic residuals";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for pname in Problem::<f64>::NAMES {
        let problem: Problem<f64> = pname.parse().expect("known problem");
        let field = analytic_field(&problem);
        for _ in 0..points {
            let p: Vec<f64> = problem
                .domain()
                .bounds()
                .iter()
                .map(|iv| iv.lo() + iv.width() * rng.gen_range(0.01..0.99))
                .collect();
            match residual(&problem, &field, &p) {
                Ok(r) if r.abs() <= 1e-4 => worst = worst.max(r.abs()),
                Ok(r) => return Check::new(name, false, format!("{pname} at {p:?}: residual {r:.3e}")),
                Err(e) => return Check::new(name, false, format!("{pname} at {p:?}: {e}")),
            }
        }
    }
    Check::new(name, true, format!("{points} interior points per problem, largest |residual| {worst:.2e}"))
}

/// A reference quadrature case with its tolerances in percentage points.
pub struct Golden {
    pub function: BenchFunction,
    pub n: usize,
    pub k: usize,
    pub uniform: (f64, f64),
    pub refined: (f64, f64),
}

pub const GOLDEN: [Golden; 3] = [
    Golden {
        function: BenchFunction::Example1,
        n: 25,
        k: 11,
        uniform: (15.3, 0.2),
        refined: (5.47, 1.5),
    },
    Golden {
        function: BenchFunction::Example2,
        n: 25,
        k: 10,
        uniform: (16.4, 0.2),
        refined: (1.89, 1.0),
    },
    Golden {
        function: BenchFunction::Sharkfin,
        n: 25,
        k: 10,
        uniform: (0.59, 0.05),
        refined: (0.049, 0.05),
    },
];

pub fn check_golden(g: &Golden) -> Check {
    let f = g.function;
    let name = format!("{} N={} k={}", f.name(), g.n, g.k);
    let c = match compare(|x: f64| f.value(x), |x: f64| f.second_derivative(x), f.domain(), g.n, g.k, DEFAULT_SAMPLES) {
        Ok(c) => c,
        Err(e) => return Check::new(name, false, e.to_string()),
    };
    let (u, r) = (c.uniform.relative_error, c.refined.relative_error);
    let passed = (u - g.uniform.0).abs() <= g.uniform.1 && (r - g.refined.0).abs() <= g.refined.1;
    Check::new(
        name,
        passed,
        format!(
            "uniform {u:.4}% (expected {} +/- {}), refined {r:.4}% (expected {} +/- {})",
            g.uniform.0, g.uniform.1, g.refined.0, g.refined.1
        ),
    )
}
