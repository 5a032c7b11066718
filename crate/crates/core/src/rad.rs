//! Residual-driven adaptive resampling of collocation points.
//!
//! A criterion turns the squared-residual landscape `f` into non-negative
//! magnitudes over a candidate pool, the density maps those magnitudes to
//! probabilities, and the sampler draws the new collocation set.

use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::{Array2, ArrayView2};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::Surrogate;
use crate::pde::{residuals, Domain, Pde};
use crate::quad::CompensatedSum;
use crate::scalar::Real;

/// Finite-difference step of the criterion stencils, relative to the width
/// of each coordinate.
pub const CRITERION_STEP: f64 = 1e-3;

/// Which quantity of the residual landscape drives the density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    Res,
    Grad,
    Hessian,
    Unif,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Res, Criterion::Grad, Criterion::Hessian, Criterion::Unif];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Res => "res",
            Criterion::Grad => "grad",
            Criterion::Hessian => "hessian",
            Criterion::Unif => "unif",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown criterion `{s}`; expected one of res, grad, hessian, unif")))
    }
}

/// Exponent `tau` and offset `c` of the density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityParams<T> {
    pub tau: T,
    pub c: T,
}

impl<T: Real> DensityParams<T> {
    pub fn new(tau: T, c: T) -> Result<Self> {
        for (name, v) in [("tau", tau), ("c", c)] {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::Config(format!("density parameter {name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(Self { tau, c })
    }
}

impl<T: Real> Default for DensityParams<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(0.5),
            c: T::zero(),
        }
    }
}

/// Candidates with their criterion magnitudes and sampling probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePool<T> {
    points: Array2<T>,
    values: Vec<T>,
    probabilities: Vec<T>,
}

impl<T: Real> CandidatePool<T> {
    pub fn new(points: Array2<T>, values: Vec<T>, probabilities: Vec<T>) -> Result<Self> {
        let n = points.nrows();
        for len in [values.len(), probabilities.len()] {
            if len != n {
                return Err(Error::Shape { expected: n, got: len });
            }
        }
        if probabilities.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::Config("probabilities must be non-negative".into()));
        }
        Ok(Self {
            points,
            values,
            probabilities,
        })
    }

    /// Evaluates `criterion` over `points` and builds the density.
    pub fn evaluate<P: Pde<T>, U: Surrogate<T>>(
        points: Array2<T>,
        criterion: Criterion,
        density: &DensityParams<T>,
        problem: &P,
        u: &U,
    ) -> Result<Self> {
        let values = criterion_values(criterion, problem, u, points.view())?;
        let probabilities = build_density(&values, criterion, density)?;
        Self::new(points, values, probabilities)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> ArrayView2<'_, T> {
        self.points.view()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probabilities
    }
}

/// The three-point stencil along one coordinate: central where it fits,
/// otherwise one-sided into the domain. Offsets are in units of `h`.
fn stencil_offsets<T: Real>(x: T, h: T, lo: T, hi: T) -> [i32; 3] {
    if x - h < lo {
        [0, 1, 2]
    } else if x + h > hi {
        [-2, -1, 0]
    } else {
        [-1, 0, 1]
    }
}

/// Second-order first and second derivatives from three samples taken at
/// `offsets * h`.
fn stencil_derivatives<T: Real>(offsets: [i32; 3], f: [T; 3], h: T) -> (T, T) {
    let two = T::lit(2.0);
    let second = (f[0] - two * f[1] + f[2]) / (h * h);
    let first = match offsets {
        [0, 1, 2] => (-T::lit(3.0) * f[0] + T::lit(4.0) * f[1] - f[2]) / (two * h),
        [-2, -1, 0] => (f[0] - T::lit(4.0) * f[1] + T::lit(3.0) * f[2]) / (two * h),
        _ => (f[2] - f[0]) / (two * h),
    };
    (first, second)
}

/// Criterion magnitudes for an arbitrary landscape `f`, evaluated in
/// batches: `f` receives a matrix of points (one per row) and returns one
/// value per row.
pub fn landscape_criterion<T, F>(criterion: Criterion, domain: &Domain<T>, candidates: ArrayView2<'_, T>, mut f: F) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(ArrayView2<'_, T>) -> Result<Vec<T>>,
{
    let (n, dim) = candidates.dim();
    if dim != domain.dim() {
        return Err(Error::Shape {
            expected: domain.dim(),
            got: dim,
        });
    }
    for row in candidates.rows() {
        domain.check(&row.to_vec())?;
    }
    match criterion {
        Criterion::Unif => return Ok(vec![T::one(); n]),
        Criterion::Res => {
            let v = f(candidates)?;
            return Ok(v.into_iter().map(|x| x.abs()).collect());
        }
        Criterion::Grad | Criterion::Hessian => {}
    }

    let steps: Vec<T> = domain.bounds().iter().map(|iv| iv.width() * T::lit(CRITERION_STEP)).collect();
    // stencil rows: for every candidate and coordinate, three points
    let per = 3 * dim;
    let mut offsets = Vec::with_capacity(n * dim);
    let mut stencil = Array2::zeros((n * per, dim));
    for (p, row) in candidates.rows().into_iter().enumerate() {
        for (i, iv) in domain.bounds().iter().enumerate() {
            let h = steps[i];
            let off = stencil_offsets(row[i], h, iv.lo(), iv.hi());
            offsets.push(off);
            for (s, o) in off.iter().enumerate() {
                let r = p * per + 3 * i + s;
                stencil.row_mut(r).assign(&row);
                stencil[[r, i]] = row[i] + T::lit(f64::from(*o)) * h;
            }
        }
    }
    let values = f(stencil.view())?;
    if values.len() != n * per {
        return Err(Error::Shape {
            expected: n * per,
            got: values.len(),
        });
    }
    Ok((0..n)
        .map(|p| {
            let mut acc = T::zero();
            for i in 0..dim {
                let base = p * per + 3 * i;
                let (d1, d2) = stencil_derivatives(offsets[p * dim + i], [values[base], values[base + 1], values[base + 2]], steps[i]);
                let d = if criterion == Criterion::Grad { d1 } else { d2 };
                acc = acc + d * d;
            }
            acc.sqrt()
        })
        .collect())
}

/// Criterion magnitudes of the squared residual of `problem` under `u` at
/// each candidate.
pub fn criterion_values<T: Real, P: Pde<T>, U: Surrogate<T>>(
    criterion: Criterion,
    problem: &P,
    u: &U,
    candidates: ArrayView2<'_, T>,
) -> Result<Vec<T>> {
    landscape_criterion(criterion, problem.domain(), candidates, |pts| {
        Ok(residuals(problem, u, pts)?.into_iter().map(|r| r * r).collect())
    })
}

/// Probabilities proportional to `v^tau / mean(v^tau) + c`.
///
/// The uniform criterion returns exactly `1/n` for every entry. If every
/// weight vanishes (all values zero with `c = 0`) the result falls back to
/// uniform as well.
pub fn build_density<T: Real>(values: &[T], criterion: Criterion, params: &DensityParams<T>) -> Result<Vec<T>> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Config("density needs at least one value".into()));
    }
    let uniform = || vec![T::one() / T::count(n); n];
    if criterion == Criterion::Unif {
        return Ok(uniform());
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
        return Err(Error::Config(format!("criterion values must be finite and non-negative, got {bad}")));
    }
    let powered: Vec<T> = values.iter().map(|v| v.powf(params.tau)).collect();
    let mut mean = CompensatedSum::default();
    for p in &powered {
        mean.add(*p);
    }
    let mean = mean.total() / T::count(n);
    let weights: Vec<T> = if mean > T::zero() {
        powered.iter().map(|p| *p / mean + params.c).collect()
    } else {
        vec![params.c; n]
    };
    let mut total = CompensatedSum::default();
    for w in &weights {
        total.add(*w);
    }
    let total = total.total();
    if !(total > T::zero()) || !total.is_finite() {
        warn!("all sampling weights vanish; falling back to the uniform density");
        return Ok(uniform());
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Purposes of the independent random streams derived from a run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Candidates = 1,
    Sampling = 2,
}

/// Generator for `(seed, purpose, event)`; distinct purposes and events
/// never share a stream.
pub fn stream_rng(seed: u64, purpose: Stream, event: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | event);
    rng
}

/// `count` points uniform in the open interior of `domain`, reproducible
/// per `(seed, event)`.
pub fn make_candidates<T: Real>(domain: &Domain<T>, count: usize, seed: u64, event: u64) -> Array2<T> {
    let mut rng = stream_rng(seed, Stream::Candidates, event);
    let dim = domain.dim();
    let mut out = Array2::zeros((count, dim));
    for mut row in out.rows_mut() {
        for (x, iv) in row.iter_mut().zip(domain.bounds()) {
            // rounding can land a draw on the closed boundary; redraw
            *x = loop {
                let u: f64 = rng.sample(Open01);
                let v = iv.lo() + iv.width() * T::lit(u);
                if v > iv.lo() && v < iv.hi() {
                    break v;
                }
            };
        }
    }
    out
}

/// Indices of `n` items drawn without replacement with probabilities
/// proportional to `weights`.
///
/// Each item gets the key `ln(u) / w` with `u` uniform in (0, 1) and the
/// `n` largest keys win. Working with logarithms keeps tiny weights from
/// underflowing. Zero-weight items are only chosen once every positive
/// item is taken, in uniformly random order.
pub fn weighted_sample_indices<T: Real, R: Rng>(weights: &[T], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n > weights.len() {
        return Err(Error::Config(format!(
            "cannot draw {n} points from a pool of {}",
            weights.len()
        )));
    }
    let mut keyed: Vec<(bool, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let u: f64 = rng.sample(Open01);
            let w = w.as_f64();
            if w > 0.0 {
                (true, u.ln() / w, i)
            } else {
                (false, u.ln(), i)
            }
        })
        .collect();
    keyed.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    Ok(keyed.into_iter().take(n).map(|(_, _, i)| i).collect())
}

/// Draws `n` collocation points from the pool, reproducible per
/// `(seed, event)`.
pub fn sample_collocation<T: Real>(pool: &CandidatePool<T>, n: usize, seed: u64, event: u64) -> Result<Array2<T>> {
    let mut rng = stream_rng(seed, Stream::Sampling, event);
    let picks = weighted_sample_indices(&pool.probabilities, n, &mut rng)?;
    Ok(pool.points.select(ndarray::Axis(0), &picks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Interval;
    use ndarray::array;

    fn line(lo: f64, hi: f64) -> Domain<f64> {
        Domain::line(Interval::new(lo, hi).unwrap())
    }

    fn apply(f: impl Fn(&[f64]) -> f64) -> impl FnMut(ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        move |pts| Ok(pts.rows().into_iter().map(|r| f(&r.to_vec())).collect())
    }

    #[test]
    fn unif_is_all_ones() {
        let pts = array![[0.1], [0.2], [0.3], [0.4], [0.5]];
        let v = landscape_criterion(Criterion::Unif, &line(0.0, 1.0), pts.view(), apply(|_| 7.0)).unwrap();
        assert_eq!(v, vec![1.0; 5]);
    }

    #[test]
    fn quadratic_curvature() {
        let pts = array![[0.2], [0.5], [0.8]];
        let v = landscape_criterion(Criterion::Hessian, &line(0.0, 1.0), pts.view(), apply(|x| x[0] * x[0])).unwrap();
        for h in v {
            assert!((h - 2.0).abs() < 1e-4, "{h}");
        }
        let g = landscape_criterion(Criterion::Grad, &line(0.0, 1.0), pts.view(), apply(|x| x[0] * x[0])).unwrap();
        for (gi, x) in g.iter().zip([0.2, 0.5, 0.8]) {
            assert!((gi - 2.0 * x).abs() < 1e-9);
        }
    }

    #[test]
    fn edge_stencils_are_one_sided_and_exact_on_quadratics() {
        let pts = array![[1e-5], [1.0 - 1e-5]];
        let domain = line(0.0, 1.0);
        let mut seen = Vec::new();
        let g = landscape_criterion(Criterion::Grad, &domain, pts.view(), |p: ArrayView2<'_, f64>| {
            seen.extend(p.iter().copied());
            Ok(p.iter().map(|x| 3.0 * x * x - x).collect())
        })
        .unwrap();
        assert!(seen.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!((g[0] - (6.0_f64 * 1e-5 - 1.0).abs()).abs() < 1e-9);
        assert!((g[1] - (6.0 * (1.0 - 1e-5) - 1.0)).abs() < 1e-9);
        let h = landscape_criterion(Criterion::Hessian, &domain, pts.view(), apply(|x| 3.0 * x[0] * x[0])).unwrap();
        assert!(h.iter().all(|v| (v - 6.0).abs() < 1e-6));
    }

    #[test]
    fn two_dimensional_aggregation() {
        let square = Domain::new(vec![Interval::new(0.0, 1.0).unwrap(); 2]).unwrap();
        let pts = array![[0.3, 0.6]];
        let f = apply(|p| p[0] * p[0] + 2.0 * p[1] * p[1]);
        let h = landscape_criterion(Criterion::Hessian, &square, pts.view(), f).unwrap();
        assert!((h[0] - 20f64.sqrt()).abs() < 1e-5);
        let g = landscape_criterion(Criterion::Grad, &square, pts.view(), apply(|p| p[0] * p[0] + 2.0 * p[1] * p[1])).unwrap();
        assert!((g[0] - (0.36f64 + 5.76).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn candidates_outside_are_rejected() {
        let pts = array![[1.5]];
        assert!(matches!(
            landscape_criterion(Criterion::Res, &line(0.0, 1.0), pts.view(), apply(|_| 0.0)),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn density_examples() {
        let dp = DensityParams::new(0.5, 0.0).unwrap();
        let p = build_density(&[0.0_f64, 1.0, 4.0], Criterion::Res, &dp).unwrap();
        for (a, b) in p.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let dp = DensityParams::new(0.5, 1.0).unwrap();
        let p = build_density(&[0.0_f64, 1.0, 4.0], Criterion::Hessian, &dp).unwrap();
        for (a, b) in p.iter().zip([1.0 / 6.0, 1.0 / 3.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = build_density(&[5.0, 0.0, 1.0, 2.0], Criterion::Unif, &dp).unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let p = build_density(&[0.0; 4], Criterion::Res, &DensityParams::default()).unwrap();
        assert_eq!(p, vec![0.25; 4]);
        assert!(build_density::<f64>(&[], Criterion::Res, &DensityParams::default()).is_err());
        assert!(build_density(&[1.0, -1.0], Criterion::Res, &DensityParams::default()).is_err());
        assert!(DensityParams::new(-0.5, 0.0).is_err());
    }

    fn pool(probs: Vec<f64>) -> CandidatePool<f64> {
        let n = probs.len();
        let points = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        CandidatePool::new(points, vec![1.0; n], probs).unwrap()
    }

    #[test]
    fn degenerate_density_always_picks_its_point() {
        let pool = pool(vec![1.0, 0.0, 0.0]);
        for seed in 0..50 {
            assert_eq!(sample_collocation(&pool, 1, seed, 0).unwrap()[[0, 0]], 0.0);
        }
    }

    #[test]
    fn exhaustion_returns_the_whole_pool() {
        let pool = pool(vec![0.2; 5]);
        let s = sample_collocation(&pool, 5, 3, 1).unwrap();
        let mut got: Vec<f64> = s.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(sample_collocation(&pool, 6, 3, 1), Err(Error::Config(_))));
    }

    #[test]
    fn empirical_frequencies_follow_the_density() {
        let pool = pool(vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        let draws = 30_000;
        let mut counts = [0usize; 3];
        for seed in 0..draws {
            counts[sample_collocation(&pool, 1, seed, 0).unwrap()[[0, 0]] as usize] += 1;
        }
        for (c, p) in counts.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert!((*c as f64 / draws as f64 - p).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn tiny_weights_do_not_underflow() {
        let mut rng = stream_rng(0, Stream::Sampling, 0);
        let w = [1e-300, 2e-300, 0.0];
        let picks = weighted_sample_indices(&w, 2, &mut rng).unwrap();
        let mut sorted = picks.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1]);
    }

    #[test]
    fn candidates_are_interior_and_reproducible() {
        let domain = line(0.0, 1000.0);
        let a = make_candidates(&domain, 4000, 5, 2);
        assert!(a.iter().all(|x| *x > 0.0 && *x < 1000.0));
        assert_eq!(a, make_candidates(&domain, 4000, 5, 2));
        assert_ne!(a, make_candidates(&domain, 4000, 5, 3));
        assert_ne!(a, make_candidates(&domain, 4000, 6, 2));
    }

    #[test]
    fn criterion_names_round_trip() {
        for c in Criterion::ALL {
            assert_eq!(c.name().parse::<Criterion>().unwrap(), c);
        }
        assert!("laplace".parse::<Criterion>().is_err());
    }
}
