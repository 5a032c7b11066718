//! Uniform and curvature-refined composite trapezoidal quadrature.
//!
//! The refined rule splits `[a, b]` into `k` equal sub-intervals, samples
//! `|f''|` on each of them, and hands out the trapezoid budget `N` in
//! proportion to `sqrt(M_j)`, where `M_j` is the sampled maximum of `|f''|`
//! on sub-interval `j`. Both rules spend exactly `N` trapezoids.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of Simpson panels used by [`reference_integral`].
pub const REFERENCE_PANELS: usize = 1_000_000;

/// Number of `|f''|` samples per sub-interval used in the benchmarks.
pub const DEFAULT_SAMPLES: usize = 100;

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInterval {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// The `i`-th of `n + 1` equispaced nodes. Node `n` is exactly `hi`.
    #[inline]
    pub fn node(&self, i: usize, n: usize) -> T {
        if i == n {
            self.hi
        } else {
            self.lo + self.width() * T::count(i) / T::count(n)
        }
    }

    /// Splits into `k` sub-intervals of equal width sharing endpoints.
    pub fn split(&self, k: usize) -> Vec<Interval<T>> {
        (0..k)
            .map(|j| Interval {
                lo: self.node(j, k),
                hi: self.node(j + 1, k),
            })
            .collect()
    }
}

impl<T: Real> std::fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Trapezoid counts for each sub-interval together with the `|f''|` maxima
/// they were derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationPlan<T> {
    pub maxima: Vec<T>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl<T> AllocationPlan<T> {
    pub fn intervals(&self) -> usize {
        self.counts.len()
    }
}

/// Worst-case error bounds of the two rules for the same budget `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBounds<T> {
    pub uniform: T,
    pub refined: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureReport<T> {
    pub estimate: T,
    pub reference: T,
    /// Percent.
    pub relative_error: T,
    pub bound_uniform: T,
    pub bound_refined: T,
}

/// Both rules applied to one integrand with a shared budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison<T> {
    pub uniform: QuadratureReport<T>,
    pub refined: QuadratureReport<T>,
    pub plan: AllocationPlan<T>,
}

#[inline]
fn checked<T: Real>(y: T, x: T) -> Result<T> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite {
            location: vec![x.as_f64()],
        })
    }
}

/// Composite trapezoid rule on `n` equal-width trapezoids.
pub fn uniform_trapezoid<T, F>(f: F, iv: Interval<T>, n: usize) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    if n == 0 {
        return Err(Error::Config("trapezoid count must be positive".into()));
    }
    let half = T::lit(0.5);
    let mut x0 = iv.lo();
    let mut y0 = checked(f(x0), x0)?;
    let mut acc = CompensatedSum::default();
    for i in 1..=n {
        let x1 = iv.node(i, n);
        let y1 = checked(f(x1), x1)?;
        acc.add((x1 - x0) * (y0 + y1) * half);
        x0 = x1;
        y0 = y1;
    }
    Ok(acc.total())
}

/// Sampled maximum of `|fpp|` over each of `k` equal sub-intervals, using
/// `samples` equidistant points per sub-interval with both endpoints included.
pub fn interval_maxima<T, F>(fpp: F, iv: Interval<T>, k: usize, samples: usize) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    if k == 0 {
        return Err(Error::Config("sub-interval count must be positive".into()));
    }
    if samples < 2 {
        return Err(Error::Config("need at least two samples per sub-interval".into()));
    }
    iv.split(k)
        .iter()
        .map(|sub| {
            (0..samples).try_fold(T::zero(), |m, s| {
                let x = sub.node(s, samples - 1);
                Ok(m.max(checked(fpp(x), x)?.abs()))
            })
        })
        .collect()
}

/// `ceil(N * sqrt(M_j) / sum_p sqrt(M_p))`, with every entry zero when all
/// maxima vanish.
fn raw_counts<T: Real>(maxima: &[T], total: usize) -> Vec<usize> {
    let roots: Vec<T> = maxima.iter().map(|m| m.sqrt()).collect();
    let norm: T = roots.iter().copied().sum();
    if norm <= T::zero() {
        return vec![0; maxima.len()];
    }
    let budget = T::count(total);
    // shares that land on an integer up to rounding must not be bumped by `ceil`
    let slack = T::epsilon() * T::count(4 * maxima.len()) * budget;
    roots
        .iter()
        .map(|r| {
            let share = budget * *r / norm;
            let nearest = share.round();
            let c = if (share - nearest).abs() <= slack { nearest } else { share.ceil() };
            c.to_usize().unwrap_or(0)
        })
        .collect()
}

/// Hands out exactly `total` trapezoids over `maxima.len()` sub-intervals.
///
/// Counts start at `ceil(N sqrt(M_j) / sum sqrt(M_p))`, zeros are lifted to
/// one, and then the largest entry is decremented (or the smallest
/// incremented) until the sum is `total`. Ties go to the lowest index.
pub fn allocate<T: Real>(maxima: &[T], total: usize) -> Result<Vec<usize>> {
    let k = maxima.len();
    if k == 0 {
        return Err(Error::Config("no sub-intervals to allocate".into()));
    }
    if let Some(bad) = maxima.iter().find(|m| !(m.is_finite() && **m >= T::zero())) {
        return Err(Error::Config(format!("invalid |f''| maximum {bad}")));
    }
    if k > total {
        return Err(Error::Infeasible { intervals: k, total });
    }
    let mut counts = raw_counts(maxima, total);
    for c in counts.iter_mut() {
        *c = (*c).max(1);
    }
    let mut sum: usize = counts.iter().sum();
    while sum != total {
        if sum > total {
            let j = argmax(&counts);
            counts[j] -= 1;
            sum -= 1;
        } else {
            let j = argmin(&counts);
            counts[j] += 1;
            sum += 1;
        }
    }
    Ok(counts)
}

fn argmax(xs: &[usize]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn argmin(xs: &[usize]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

/// Builds the allocation plan for `f` from its second derivative `fpp`.
pub fn plan<T, G>(fpp: G, iv: Interval<T>, total: usize, k: usize, samples: usize) -> Result<AllocationPlan<T>>
where
    T: Real,
    G: Fn(T) -> T,
{
    if k > total {
        return Err(Error::Infeasible { intervals: k, total });
    }
    let maxima = interval_maxima(fpp, iv, k, samples)?;
    let counts = allocate(&maxima, total)?;
    Ok(AllocationPlan {
        maxima,
        counts,
        total,
    })
}

/// Integrates `f` with the trapezoid counts of `plan`, summing the
/// sub-intervals left to right.
pub fn integrate_with_plan<T, F>(f: F, iv: Interval<T>, plan: &AllocationPlan<T>) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    let mut acc = CompensatedSum::default();
    for (sub, n) in iv.split(plan.intervals()).into_iter().zip(&plan.counts) {
        acc.add(uniform_trapezoid(&f, sub, *n)?);
    }
    Ok(acc.total())
}

/// Refined rule: allocation from sampled `|f''|` maxima, then per-interval
/// uniform trapezoids.
pub fn refined_trapezoid<T, F, G>(
    f: F,
    fpp: G,
    iv: Interval<T>,
    total: usize,
    k: usize,
    samples: usize,
) -> Result<(T, AllocationPlan<T>)>
where
    T: Real,
    F: Fn(T) -> T,
    G: Fn(T) -> T,
{
    let plan = plan(fpp, iv, total, k, samples)?;
    let estimate = integrate_with_plan(f, iv, &plan)?;
    Ok((estimate, plan))
}

/// Error bounds of the uniform rule and of the refined rule.
///
/// The refined bound uses the un-adjusted ceilings and replaces each
/// `|f''(xi_j)|` by its upper bound `M_j`. It is evaluated as
/// `B_unif * rho` with `rho = k^-3 sum_j (M_j / M) (N / c_j)^2`, which is at
/// most one and equals one exactly when every `M_j` is equal and `k` divides
/// `N`.
pub fn error_bounds<T: Real>(maxima: &[T], iv: Interval<T>, total: usize) -> Result<ErrorBounds<T>> {
    let k = maxima.len();
    if k == 0 || total == 0 {
        return Err(Error::Config("bounds need at least one interval and one trapezoid".into()));
    }
    if k > total {
        return Err(Error::Infeasible { intervals: k, total });
    }
    let peak = maxima.iter().copied().fold(T::zero(), T::max);
    if peak <= T::zero() {
        return Ok(ErrorBounds {
            uniform: T::zero(),
            refined: T::zero(),
        });
    }
    let n = T::count(total);
    let width = iv.width();
    let uniform = width * width * width / (T::lit(12.0) * n * n) * peak;

    let ceilings = raw_counts(maxima, total);
    let mut ratio = CompensatedSum::default();
    for (m, c) in maxima.iter().zip(&ceilings) {
        if *c == 0 || *m <= T::zero() {
            continue;
        }
        let share = n / T::count(*c);
        ratio.add(*m / peak * share * share);
    }
    let kk = T::count(k);
    let refined = uniform * (ratio.total() / (kk * kk * kk));
    Ok(ErrorBounds { uniform, refined })
}

/// High-resolution composite Simpson estimate on [`REFERENCE_PANELS`]
/// panels. Used as the reference value for every relative error.
pub fn reference_integral<T, F>(f: F, iv: Interval<T>) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    simpson(f, iv, REFERENCE_PANELS)
}

/// Composite Simpson rule; `panels` is rounded up to an even count.
pub fn simpson<T, F>(f: F, iv: Interval<T>, panels: usize) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    let n = panels.max(2).next_multiple_of(2);
    let mut acc = CompensatedSum::default();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    for i in 0..=n {
        let x = iv.node(i, n);
        let y = checked(f(x), x)?;
        let w = if i == 0 || i == n {
            T::one()
        } else if i % 2 == 1 {
            four
        } else {
            two
        };
        acc.add(w * y);
    }
    let h = iv.width() / T::count(n);
    Ok(acc.total() * h / T::lit(3.0))
}

/// `100 |estimate - reference| / |reference|`. A zero reference yields
/// zero when the estimate is also zero and infinity otherwise.
pub fn relative_error<T: Real>(estimate: T, reference: T) -> T {
    let diff = (estimate - reference).abs();
    if reference == T::zero() {
        return if diff == T::zero() { T::zero() } else { T::infinity() };
    }
    T::lit(100.0) * diff / reference.abs()
}

/// Runs both rules with budget `total` and reports errors against the
/// Simpson reference together with both bounds.
pub fn compare<T, F, G>(f: F, fpp: G, iv: Interval<T>, total: usize, k: usize, samples: usize) -> Result<Comparison<T>>
where
    T: Real,
    F: Fn(T) -> T,
    G: Fn(T) -> T,
{
    let reference = reference_integral(&f, iv)?;
    comparison_with_reference(f, fpp, iv, total, k, samples, reference)
}

/// As [`compare`], with a precomputed reference value.
pub fn comparison_with_reference<T, F, G>(
    f: F,
    fpp: G,
    iv: Interval<T>,
    total: usize,
    k: usize,
    samples: usize,
    reference: T,
) -> Result<Comparison<T>>
where
    T: Real,
    F: Fn(T) -> T,
    G: Fn(T) -> T,
{
    let uniform = uniform_trapezoid(&f, iv, total)?;
    let (refined, plan) = refined_trapezoid(&f, fpp, iv, total, k, samples)?;
    let bounds = error_bounds(&plan.maxima, iv, total)?;
    let report = |estimate| QuadratureReport {
        estimate,
        reference,
        relative_error: relative_error(estimate, reference),
        bound_uniform: bounds.uniform,
        bound_refined: bounds.refined,
    };
    Ok(Comparison {
        uniform: report(uniform),
        refined: report(refined),
        plan,
    })
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub(crate) fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> T {
        self.sum + self.carry
    }
}
