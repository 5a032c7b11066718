//! Test problems: residuals, initial and boundary data, closed-form
//! solutions, and the weighted physics-informed loss.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::net::{loss_gradient, Arith, Batch, Jet, JetBatch, Mlp, NetworkSpec, Order, Surrogate};
use crate::quad::Interval;
use crate::scalar::Real;

/// An axis-aligned box: one interval per input coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain<T> {
    bounds: Vec<Interval<T>>,
}

impl<T: Real> Domain<T> {
    pub fn new(bounds: Vec<Interval<T>>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Config("domain needs at least one coordinate".into()));
        }
        Ok(Self { bounds })
    }

    pub fn line(iv: Interval<T>) -> Self {
        Self { bounds: vec![iv] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval<T>] {
        &self.bounds
    }

    pub fn contains(&self, p: &[T]) -> bool {
        p.len() == self.dim() && self.bounds.iter().zip(p).all(|(iv, x)| iv.contains(*x))
    }

    pub fn check(&self, p: &[T]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                location: p.iter().map(|x| x.as_f64()).collect(),
                domain: self.to_string(),
            })
        }
    }
}

impl<T: Real> fmt::Display for Domain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.bounds.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

/// Points with prescribed solution values (Dirichlet-type data).
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T> {
    pub points: Array2<T>,
    pub targets: Vec<T>,
}

impl<T: Real> PointSet<T> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Weights of the initial-condition, boundary and regulariser terms. The
/// regulariser weight is carried for completeness; no regulariser is
/// implemented, so it never contributes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights<T> {
    pub initial: T,
    pub boundary: T,
    pub regularizer: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            initial: T::one(),
            boundary: T::one(),
            regularizer: T::zero(),
        }
    }
}

/// A forward PDE problem with a known solution.
pub trait Pde<T: Real> {
    fn name(&self) -> &'static str;

    fn domain(&self) -> &Domain<T>;

    /// Highest input-derivative order appearing in the residual.
    fn order(&self) -> Order;

    /// Pointwise residual of the equation for the field described by `jet`.
    fn residual<S: Arith<T>>(&self, jet: &Jet<S>, p: &[T]) -> S;

    fn analytic(&self, p: &[T]) -> T;

    /// Initial-condition data, `None` if the problem has no initial term.
    fn initial(&self) -> Option<&PointSet<T>>;

    /// Boundary data, `None` if the problem has no boundary term.
    fn boundary(&self) -> Option<&PointSet<T>>;

    /// Named constants of the equation.
    fn constants(&self) -> BTreeMap<&'static str, f64>;
}

fn single(points: Vec<Vec<f64>>, targets: Vec<f64>) -> PointSet<f64> {
    let dim = points.first().map_or(1, |p| p.len());
    let flat: Vec<f64> = points.into_iter().flatten().collect();
    PointSet {
        points: Array2::from_shape_vec((flat.len() / dim, dim), flat).expect("rectangular"),
        targets,
    }
}

fn cast_set<T: Real>(set: PointSet<f64>) -> PointSet<T> {
    PointSet {
        points: set.points.mapv(T::lit),
        targets: set.targets.into_iter().map(T::lit).collect(),
    }
}

/// Newton's law of cooling, `dT/dt = R (T_env - T)`, `T(0) = T0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonCooling<T> {
    pub rate: T,
    pub ambient: T,
    pub initial_temperature: T,
    pub horizon: T,
    domain: Domain<T>,
    initial: PointSet<T>,
}

impl<T: Real> NewtonCooling<T> {
    pub fn new(rate: T, ambient: T, initial_temperature: T, horizon: T) -> Result<Self> {
        let domain = Domain::line(Interval::new(T::zero(), horizon)?);
        let initial = PointSet {
            points: Array2::zeros((1, 1)),
            targets: vec![initial_temperature],
        };
        Ok(Self {
            rate,
            ambient,
            initial_temperature,
            horizon,
            domain,
            initial,
        })
    }
}

impl<T: Real> Default for NewtonCooling<T> {
    fn default() -> Self {
        Self::new(T::lit(0.005), T::lit(25.0), T::lit(100.0), T::lit(1000.0)).expect("valid defaults")
    }
}

impl<T: Real> Pde<T> for NewtonCooling<T> {
    fn name(&self) -> &'static str {
        "newton"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn order(&self) -> Order {
        Order::Gradient
    }

    fn residual<S: Arith<T>>(&self, jet: &Jet<S>, _p: &[T]) -> S {
        // dT/dt - R (T_env - T)
        jet.grad[0] + jet.value * self.rate - self.rate * self.ambient
    }

    fn analytic(&self, p: &[T]) -> T {
        self.ambient + (self.initial_temperature - self.ambient) * (-self.rate * p[0]).exp()
    }

    fn initial(&self) -> Option<&PointSet<T>> {
        Some(&self.initial)
    }

    fn boundary(&self) -> Option<&PointSet<T>> {
        None
    }

    fn constants(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("rate", self.rate.as_f64()),
            ("ambient", self.ambient.as_f64()),
            ("initial_temperature", self.initial_temperature.as_f64()),
            ("horizon", self.horizon.as_f64()),
        ])
    }
}

/// Brinkman-Forchheimer channel flow,
/// `-(nu_e / eps) u'' + (nu / K) u = g` on `[0, H]` with `u(0) = u(H) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Brinkman<T> {
    pub effective_viscosity: T,
    pub viscosity: T,
    pub porosity: T,
    pub permeability: T,
    pub forcing: T,
    pub height: T,
    domain: Domain<T>,
    boundary: PointSet<T>,
}

impl<T: Real> Brinkman<T> {
    pub fn new(effective_viscosity: T, viscosity: T, porosity: T, permeability: T, forcing: T, height: T) -> Result<Self> {
        let domain = Domain::line(Interval::new(T::zero(), height)?);
        let boundary = PointSet {
            points: Array2::from_shape_vec((2, 1), vec![T::zero(), height]).expect("two points"),
            targets: vec![T::zero(); 2],
        };
        Ok(Self {
            effective_viscosity,
            viscosity,
            porosity,
            permeability,
            forcing,
            height,
            domain,
            boundary,
        })
    }

    /// `sqrt(nu eps / (nu_e K))`, the inverse boundary-layer thickness.
    pub fn decay(&self) -> T {
        (self.viscosity * self.porosity / (self.effective_viscosity * self.permeability)).sqrt()
    }
}

impl<T: Real> Default for Brinkman<T> {
    fn default() -> Self {
        Self::new(T::lit(1e-3), T::lit(1e-3), T::lit(0.4), T::lit(1e-3), T::one(), T::one()).expect("valid defaults")
    }
}

impl<T: Real> Pde<T> for Brinkman<T> {
    fn name(&self) -> &'static str {
        "brinkman"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn order(&self) -> Order {
        Order::Hessian
    }

    fn residual<S: Arith<T>>(&self, jet: &Jet<S>, _p: &[T]) -> S {
        let diffusion = -self.effective_viscosity / self.porosity;
        let drag = self.viscosity / self.permeability;
        jet.hess[0] * diffusion + jet.value * drag - self.forcing
    }

    fn analytic(&self, p: &[T]) -> T {
        let r = self.decay();
        let half = self.height * T::lit(0.5);
        let scale = self.forcing * self.permeability / self.viscosity;
        scale * (T::one() - (r * (p[0] - half)).cosh() / (r * half).cosh())
    }

    fn initial(&self) -> Option<&PointSet<T>> {
        None
    }

    fn boundary(&self) -> Option<&PointSet<T>> {
        Some(&self.boundary)
    }

    fn constants(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("effective_viscosity", self.effective_viscosity.as_f64()),
            ("viscosity", self.viscosity.as_f64()),
            ("porosity", self.porosity.as_f64()),
            ("permeability", self.permeability.as_f64()),
            ("forcing", self.forcing.as_f64()),
            ("height", self.height.as_f64()),
        ])
    }
}

/// Poisson problem `u_xx + u_yy = F` on the unit square whose solution is
/// the bump `(16 x (1-x) y (1-y))^a`, with zero boundary values.
#[derive(Clone, Debug, PartialEq)]
pub struct Poisson2d<T> {
    pub exponent: T,
    domain: Domain<T>,
    boundary: PointSet<T>,
}

/// Boundary points per side of the unit square.
pub const POISSON_POINTS_PER_SIDE: usize = 100;

impl<T: Real> Poisson2d<T> {
    pub fn new(exponent: T) -> Result<Self> {
        if !(exponent >= T::lit(2.0)) {
            return Err(Error::Config(format!("poisson exponent must be at least 2, got {exponent}")));
        }
        let unit = Interval::new(T::zero(), T::one())?;
        let m = POISSON_POINTS_PER_SIDE;
        let mut pts = Vec::with_capacity(4 * m);
        for i in 0..m {
            let s = i as f64 / m as f64;
            pts.push(vec![s, 0.0]);
        }
        for i in 0..m {
            let s = i as f64 / m as f64;
            pts.push(vec![1.0, s]);
        }
        for i in 0..m {
            let s = i as f64 / m as f64;
            pts.push(vec![1.0 - s, 1.0]);
        }
        for i in 0..m {
            let s = i as f64 / m as f64;
            pts.push(vec![0.0, 1.0 - s]);
        }
        let boundary = cast_set(single(pts, vec![0.0; 4 * m]));
        Ok(Self {
            exponent,
            domain: Domain::new(vec![unit, unit])?,
            boundary,
        })
    }

    /// `(4 s (1 - s))^a`, i.e. `2^(2a) s^a (1-s)^a`.
    fn profile(&self, s: T) -> T {
        (T::lit(4.0) * s * (T::one() - s)).powf(self.exponent)
    }

    /// Second derivative of [`Self::profile`]:
    /// `16 a (4 s (1-s))^(a-2) [(a-1)(1-s)^2 - 2 a s (1-s) + (a-1) s^2]`.
    fn profile_curvature(&self, s: T) -> T {
        let a = self.exponent;
        let one = T::one();
        let t = one - s;
        let bracket = (a - one) * t * t - T::lit(2.0) * a * s * t + (a - one) * s * s;
        T::lit(16.0) * a * (T::lit(4.0) * s * t).powf(a - T::lit(2.0)) * bracket
    }

    /// Forcing `F = Laplacian of the analytic solution`.
    pub fn forcing(&self, x: T, y: T) -> T {
        self.profile_curvature(x) * self.profile(y) + self.profile(x) * self.profile_curvature(y)
    }
}

impl<T: Real> Default for Poisson2d<T> {
    fn default() -> Self {
        Self::new(T::lit(10.0)).expect("valid default")
    }
}

impl<T: Real> Pde<T> for Poisson2d<T> {
    fn name(&self) -> &'static str {
        "poisson2d"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn order(&self) -> Order {
        Order::Hessian
    }

    fn residual<S: Arith<T>>(&self, jet: &Jet<S>, p: &[T]) -> S {
        jet.hess[0] + jet.hess[1] - self.forcing(p[0], p[1])
    }

    fn analytic(&self, p: &[T]) -> T {
        self.profile(p[0]) * self.profile(p[1])
    }

    fn initial(&self) -> Option<&PointSet<T>> {
        None
    }

    fn boundary(&self) -> Option<&PointSet<T>> {
        Some(&self.boundary)
    }

    fn constants(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([("exponent", self.exponent.as_f64())])
    }
}

/// The three problems behind one type, selectable by name.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem<T> {
    Newton(NewtonCooling<T>),
    Brinkman(Brinkman<T>),
    Poisson(Poisson2d<T>),
}

impl<T: Real> Problem<T> {
    pub const NAMES: [&'static str; 3] = ["newton", "brinkman", "poisson2d"];

    /// Builds a problem by name, overriding the default constants with the
    /// entries of `overrides`. Unknown constant names are rejected.
    pub fn build(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let defaults: Problem<T> = name.parse()?;
        let mut constants: BTreeMap<&str, f64> = defaults.constants();
        for (key, value) in overrides {
            match constants.get_mut(key.as_str()) {
                Some(slot) => *slot = *value,
                None => {
                    let known: Vec<_> = constants.keys().copied().collect();
                    return Err(Error::Config(format!(
                        "unknown constant `{key}` for {name}; expected one of {}",
                        known.join(", ")
                    )));
                }
            }
        }
        let c = |k: &str| T::lit(constants[k]);
        Ok(match defaults {
            Problem::Newton(_) => Problem::Newton(NewtonCooling::new(
                c("rate"),
                c("ambient"),
                c("initial_temperature"),
                c("horizon"),
            )?),
            Problem::Brinkman(_) => Problem::Brinkman(Brinkman::new(
                c("effective_viscosity"),
                c("viscosity"),
                c("porosity"),
                c("permeability"),
                c("forcing"),
                c("height"),
            )?),
            Problem::Poisson(_) => Problem::Poisson(Poisson2d::new(c("exponent"))?),
        })
    }
}

impl<T: Real> FromStr for Problem<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(Problem::Newton(NewtonCooling::default())),
            "brinkman" => Ok(Problem::Brinkman(Brinkman::default())),
            "poisson2d" => Ok(Problem::Poisson(Poisson2d::default())),
            other => Err(Error::Config(format!(
                "unknown problem `{other}`; expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $body:expr) => {
        match $self {
            Problem::Newton($p) => $body,
            Problem::Brinkman($p) => $body,
            Problem::Poisson($p) => $body,
        }
    };
}

impl<T: Real> Pde<T> for Problem<T> {
    fn name(&self) -> &'static str {
        dispatch!(self, p => p.name())
    }

    fn domain(&self) -> &Domain<T> {
        dispatch!(self, p => p.domain())
    }

    fn order(&self) -> Order {
        dispatch!(self, p => p.order())
    }

    fn residual<S: Arith<T>>(&self, jet: &Jet<S>, x: &[T]) -> S {
        dispatch!(self, p => p.residual(jet, x))
    }

    fn analytic(&self, x: &[T]) -> T {
        dispatch!(self, p => p.analytic(x))
    }

    fn initial(&self) -> Option<&PointSet<T>> {
        dispatch!(self, p => p.initial())
    }

    fn boundary(&self) -> Option<&PointSet<T>> {
        dispatch!(self, p => p.boundary())
    }

    fn constants(&self) -> BTreeMap<&'static str, f64> {
        dispatch!(self, p => p.constants())
    }
}

/// A closed-form field whose derivatives are taken by central differences
/// with a fixed step per coordinate.
pub struct FiniteDifferenceField<T, F> {
    steps: Vec<T>,
    field: F,
}

impl<T: Real, F: Fn(&[T]) -> T> FiniteDifferenceField<T, F> {
    pub fn new(steps: Vec<T>, field: F) -> Self {
        Self { steps, field }
    }

    pub fn jet(&self, p: &[T], order: Order) -> Jet<T> {
        let value = (self.field)(p);
        let mut grad = Vec::new();
        let mut hess = Vec::new();
        if order >= Order::Gradient {
            let mut q = p.to_vec();
            for (i, h) in self.steps.iter().enumerate() {
                q[i] = p[i] + *h;
                let up = (self.field)(&q);
                q[i] = p[i] - *h;
                let down = (self.field)(&q);
                q[i] = p[i];
                grad.push((up - down) / (T::lit(2.0) * *h));
                if order >= Order::Hessian {
                    hess.push((up - T::lit(2.0) * value + down) / (*h * *h));
                }
            }
        }
        Jet { value, grad, hess }
    }
}

impl<T: Real, F: Fn(&[T]) -> T> Surrogate<T> for FiniteDifferenceField<T, F> {
    fn input_dim(&self) -> usize {
        self.steps.len()
    }

    fn jets(&self, points: ArrayView2<'_, T>, order: Order) -> Result<JetBatch<T>> {
        let jets: Vec<Jet<T>> = points
            .rows()
            .into_iter()
            .map(|row| self.jet(&row.to_vec(), order))
            .collect();
        JetBatch::from_jets(order, self.input_dim(), &jets)
    }
}

/// The analytic solution of `problem` as a surrogate, differentiated with a
/// step of `1e-4` times the domain width.
pub fn analytic_field<T: Real, P: Pde<T>>(problem: &P) -> FiniteDifferenceField<T, impl Fn(&[T]) -> T + '_> {
    let steps = problem
        .domain()
        .bounds()
        .iter()
        .map(|iv| iv.width() * T::lit(1e-4))
        .collect();
    FiniteDifferenceField::new(steps, move |p: &[T]| problem.analytic(p))
}

/// Pointwise residual of `problem` for the surrogate `u` at `p`.
pub fn residual<T: Real, P: Pde<T>, U: Surrogate<T>>(problem: &P, u: &U, p: &[T]) -> Result<T> {
    problem.domain().check(p)?;
    let point = ArrayView2::from_shape((1, p.len()), p).map_err(|_| Error::Shape {
        expected: problem.domain().dim(),
        got: p.len(),
    })?;
    let jets = u.jets(point, problem.order())?;
    Ok(problem.residual(&jets.jet(0), p))
}

/// Residuals at every row of `points`. Points are not domain-checked.
pub fn residuals<T: Real, P: Pde<T>, U: Surrogate<T>>(problem: &P, u: &U, points: ArrayView2<'_, T>) -> Result<Vec<T>> {
    let jets = u.jets(points, problem.order())?;
    Ok(points
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let p = row.to_vec();
            problem.residual(&jets.jet(i), &p)
        })
        .collect())
}

fn check_sets<T: Real, P: Pde<T>>(problem: &P, collocation: &ArrayView2<'_, T>) -> Result<()> {
    if collocation.nrows() == 0 {
        return Err(Error::Config("collocation set is empty".into()));
    }
    if collocation.ncols() != problem.domain().dim() {
        return Err(Error::Shape {
            expected: problem.domain().dim(),
            got: collocation.ncols(),
        });
    }
    for (label, set) in [("initial", problem.initial()), ("boundary", problem.boundary())] {
        if set.is_some_and(|s| s.is_empty()) {
            return Err(Error::Config(format!("{label} point set is empty")));
        }
    }
    Ok(())
}

/// Mean of `items^2`, or `None` for an empty sequence.
fn mean_square<T: Real, S: Arith<T>>(items: impl Iterator<Item = S>) -> Option<S> {
    let mut count = 0usize;
    let total = items.map(|r| r * r).inspect(|_| count += 1).reduce(|a, b| a + b)?;
    Some(total * (T::one() / T::count(count)))
}

/// Interior, initial and boundary contributions assembled from jets.
fn assemble<T, S, P>(problem: &P, weights: &LossWeights<T>, col: (&[Jet<S>], &ArrayView2<'_, T>), init: &[Jet<S>], bnd: &[Jet<S>]) -> S
where
    T: Real,
    S: Arith<T>,
    P: Pde<T>,
{
    let (jets, points) = col;
    let interior = mean_square(
        jets.iter()
            .zip(points.rows())
            .map(|(j, row)| problem.residual(j, row.as_slice().expect("contiguous rows"))),
    )
    .expect("collocation set is non-empty");
    let mut total = interior;
    if let Some(set) = problem.initial() {
        let mse = mean_square(init.iter().zip(&set.targets).map(|(j, t)| j.value - *t)).expect("checked non-empty");
        total = total + mse * weights.initial;
    }
    if let Some(set) = problem.boundary() {
        let mse = mean_square(bnd.iter().zip(&set.targets).map(|(j, t)| j.value - *t)).expect("checked non-empty");
        total = total + mse * weights.boundary;
    }
    total
}

fn standard<T: Real>(points: ArrayView2<'_, T>) -> Array2<T> {
    points.as_standard_layout().into_owned()
}

/// `mean(residual^2) + l1 mean(initial error^2) + l2 mean(boundary error^2)`.
pub fn composite_loss<T: Real, P: Pde<T>, U: Surrogate<T>>(
    problem: &P,
    u: &U,
    collocation: ArrayView2<'_, T>,
    weights: &LossWeights<T>,
) -> Result<T> {
    check_sets(problem, &collocation)?;
    let collocation = standard(collocation);
    let col = u.jets(collocation.view(), problem.order())?;
    let col_jets: Vec<_> = (0..col.len()).map(|p| col.jet(p)).collect();
    let value_jets = |set: Option<&PointSet<T>>| -> Result<Vec<Jet<T>>> {
        match set {
            Some(s) => {
                let b = u.jets(s.points.view(), Order::Value)?;
                Ok((0..b.len()).map(|p| b.jet(p)).collect())
            }
            None => Ok(Vec::new()),
        }
    };
    let init = value_jets(problem.initial())?;
    let bnd = value_jets(problem.boundary())?;
    Ok(assemble(problem, weights, (&col_jets, &collocation.view()), &init, &bnd))
}

/// [`composite_loss`] for a network, together with its parameter gradient.
pub fn composite_loss_gradient<T: Real, P: Pde<T>>(
    problem: &P,
    spec: &NetworkSpec,
    params: &[T],
    collocation: ArrayView2<'_, T>,
    weights: &LossWeights<T>,
) -> Result<(T, Vec<T>)> {
    check_sets(problem, &collocation)?;
    let collocation = standard(collocation);
    let mut batches = vec![Batch::new(collocation.view(), problem.order())];
    let init_slot = problem.initial().map(|s| {
        batches.push(Batch::new(s.points.view(), Order::Value));
        batches.len() - 1
    });
    let bnd_slot = problem.boundary().map(|s| {
        batches.push(Batch::new(s.points.view(), Order::Value));
        batches.len() - 1
    });
    let col_view = collocation.view();
    loss_gradient(spec, params, &batches, |_tape, jets| {
        let init = init_slot.map_or(&[][..], |i| &jets[i][..]);
        let bnd = bnd_slot.map_or(&[][..], |i| &jets[i][..]);
        assemble(problem, weights, (&jets[0], &col_view), init, bnd)
    })
}

/// Convenience wrapper evaluating [`composite_loss`] for a network.
pub fn network_loss<T: Real, P: Pde<T>>(
    problem: &P,
    spec: &NetworkSpec,
    params: &[T],
    collocation: ArrayView2<'_, T>,
    weights: &LossWeights<T>,
) -> Result<T> {
    composite_loss(problem, &Mlp::new(spec, params), collocation, weights)
}
