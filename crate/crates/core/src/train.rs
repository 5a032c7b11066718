//! The adaptive training loop: full-batch Adam on the physics loss, with the
//! collocation set replaced from a criterion-weighted density at a fixed
//! period.

use std::time::Instant;

use log::debug;
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::net::{forward, init_network, Adam, Mlp, NetworkSpec, Order, ParameterVector, Surrogate};
use crate::pde::{composite_loss_gradient, network_loss, LossWeights, Pde, Problem};
use crate::rad::{make_candidates, sample_collocation, CandidatePool, Criterion, DensityParams};
use crate::scalar::Real;

/// Metrics are recorded at every multiple of this many epochs, plus the
/// first and last epoch.
pub const RECORD_EVERY: usize = 100;

/// Test points for one-dimensional problems.
pub const TEST_POINTS_1D: usize = 1000;

/// Test grid points per axis for two-dimensional problems.
pub const TEST_POINTS_PER_AXIS_2D: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<T> {
    pub problem: Problem<T>,
    pub spec: NetworkSpec,
    pub criterion: Criterion,
    pub density: DensityParams<T>,
    pub epochs: usize,
    pub learning_rate: T,
    pub n_collocation: usize,
    pub pool_size: usize,
    pub resample_period: usize,
    pub weights: LossWeights<T>,
    pub seed: u64,
}

impl<T: Real> TrainConfig<T> {
    /// Newton cooling: 4 x 100 relu, learning rate 1e-5, 40 points from
    /// 4000 candidates, 30000 epochs.
    pub fn newton(criterion: Criterion, seed: u64) -> Self {
        Self {
            problem: Problem::Newton(Default::default()),
            spec: NetworkSpec::new(1, vec![100; 4], crate::net::Activation::Relu).expect("valid"),
            criterion,
            density: DensityParams::default(),
            epochs: 30_000,
            learning_rate: T::lit(1e-5),
            n_collocation: 40,
            pool_size: 4000,
            resample_period: 1000,
            weights: LossWeights::default(),
            seed,
        }
    }

    /// Brinkman: 3 x 20 tanh, learning rate 1e-3, 30 points from 4000
    /// candidates, 30000 epochs.
    pub fn brinkman(criterion: Criterion, seed: u64) -> Self {
        Self {
            problem: Problem::Brinkman(Default::default()),
            spec: NetworkSpec::new(1, vec![20; 3], crate::net::Activation::Tanh).expect("valid"),
            learning_rate: T::lit(1e-3),
            n_collocation: 30,
            ..Self::newton(criterion, seed)
        }
    }

    /// Poisson: 3 x 20 tanh, learning rate 1e-3, 400 points from 40000
    /// candidates, 20000 epochs.
    pub fn poisson(criterion: Criterion, seed: u64) -> Self {
        Self {
            problem: Problem::Poisson(Default::default()),
            spec: NetworkSpec::new(2, vec![20; 3], crate::net::Activation::Tanh).expect("valid"),
            epochs: 20_000,
            n_collocation: 400,
            pool_size: 40_000,
            ..Self::brinkman(criterion, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.spec.input_dim() != self.problem.domain().dim() {
            return fail(format!(
                "network input dimension {} does not match the {} domain dimension {}",
                self.spec.input_dim(),
                self.problem.name(),
                self.problem.domain().dim()
            ));
        }
        if self.epochs == 0 || self.n_collocation == 0 || self.pool_size == 0 || self.resample_period == 0 {
            return fail("epochs, n_collocation, pool_size and resample_period must be positive".into());
        }
        if self.n_collocation > self.pool_size {
            return fail(format!(
                "n_collocation ({}) exceeds pool_size ({})",
                self.n_collocation, self.pool_size
            ));
        }
        if self.resample_period > self.epochs {
            return fail(format!(
                "resample_period ({}) exceeds epochs ({})",
                self.resample_period, self.epochs
            ));
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        DensityParams::new(self.density.tau, self.density.c)?;
        let w = &self.weights;
        for v in [w.initial, w.boundary, w.regularizer] {
            if !v.is_finite() || v < T::zero() {
                return fail(format!("loss weights must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// One recorded epoch. `epoch` is stored as a float so that traces survive
/// a plain numeric CSV round trip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub epoch: f64,
    pub train_loss: f64,
    pub l2_test_error: f64,
    pub seconds: f64,
}

impl TraceRow {
    pub fn epoch(&self) -> usize {
        self.epoch as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace<T> {
    pub rows: Vec<TraceRow>,
    /// Epochs after which the collocation set was replaced.
    pub resample_epochs: Vec<usize>,
    pub params: ParameterVector<T>,
    /// Collocation set in use at the end of training.
    pub collocation: Array2<T>,
}

impl<T> TrainTrace<T> {
    /// The recorded row for `epoch`, if any.
    pub fn at(&self, epoch: usize) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.epoch() == epoch)
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace always holds epoch 0")
    }
}

/// The fixed test grid of a problem: equispaced with endpoints for 1D,
/// cell-centred interior points for 2D.
pub fn test_grid<T: Real, P: Pde<T>>(problem: &P) -> Array2<T> {
    let bounds = problem.domain().bounds();
    match bounds {
        [iv] => {
            let n = TEST_POINTS_1D;
            Array2::from_shape_fn((n, 1), |(i, _)| iv.node(i, n - 1))
        }
        _ => {
            let m = TEST_POINTS_PER_AXIS_2D;
            let (bx, by) = (bounds[0], bounds[1]);
            let at = |iv: &crate::quad::Interval<T>, i: usize| {
                iv.lo() + iv.width() * (T::count(i) + T::lit(0.5)) / T::count(m)
            };
            Array2::from_shape_fn((m * m, 2), |(r, c)| if c == 0 { at(&bx, r / m) } else { at(&by, r % m) })
        }
    }
}

/// Squared error `(analytic - u)^2` at every grid point.
pub fn squared_errors<T: Real, P: Pde<T>, U: Surrogate<T>>(problem: &P, u: &U, grid: ArrayView2<'_, T>) -> Result<Vec<T>> {
    let jets = u.jets(grid, Order::Value)?;
    Ok(grid
        .rows()
        .into_iter()
        .zip(jets.values())
        .map(|(row, v)| {
            let d = problem.analytic(&row.to_vec()) - *v;
            d * d
        })
        .collect())
}

/// Mean squared deviation from the analytic solution over the test grid.
pub fn l2_test_error<T: Real, P: Pde<T>, U: Surrogate<T>>(problem: &P, u: &U) -> Result<T> {
    let grid = test_grid(problem);
    mean_of(&squared_errors(problem, u, grid.view())?)
}

fn mean_of<T: Real>(v: &[T]) -> Result<T> {
    let mut acc = crate::quad::CompensatedSum::default();
    for x in v {
        acc.add(*x);
    }
    Ok(acc.total() / T::count(v.len().max(1)))
}

fn l2_on_grid<T: Real>(analytic: &[T], spec: &NetworkSpec, params: &[T], grid: ArrayView2<'_, T>) -> Result<T> {
    let out = forward(spec, params, grid, Order::Value)?;
    let sq: Vec<T> = analytic
        .iter()
        .zip(out.values())
        .map(|(a, v)| (*a - *v) * (*a - *v))
        .collect();
    mean_of(&sq)
}

/// Runs the adaptive training loop.
///
/// Collocation starts as `n_collocation` uniform interior points. After
/// every `resample_period` epochs (except the last) a fresh pool of
/// `pool_size` candidates is drawn, scored by the criterion under the
/// current network, and the whole set is replaced by a weighted draw.
pub fn train<T: Real>(config: &TrainConfig<T>) -> Result<TrainTrace<T>> {
    config.validate()?;
    let start = Instant::now();
    let problem = &config.problem;
    let spec = &config.spec;
    let mut params = init_network::<T>(spec, config.seed);
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut collocation = make_candidates(problem.domain(), config.n_collocation, config.seed, 0);

    let grid = test_grid(problem);
    let analytic: Vec<T> = grid.rows().into_iter().map(|r| problem.analytic(&r.to_vec())).collect();

    let mut rows = Vec::new();
    let mut resample_epochs = Vec::new();
    let record = |epoch: usize, params: &[T], collocation: &Array2<T>, rows: &mut Vec<TraceRow>| -> Result<()> {
        let diverged = |rows: &Vec<TraceRow>| Error::Diverged {
            epoch,
            rows: rows.clone(),
        };
        let loss = match network_loss(problem, spec, params, collocation.view(), &config.weights) {
            Ok(l) if l.is_finite() => l,
            Ok(_) | Err(Error::NonFinite { .. }) => return Err(diverged(rows)),
            Err(e) => return Err(e),
        };
        let l2 = match l2_on_grid(&analytic, spec, params, grid.view()) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(diverged(rows)),
            Err(e) => return Err(e),
        };
        rows.push(TraceRow {
            epoch: epoch as f64,
            train_loss: loss.as_f64(),
            l2_test_error: l2.as_f64(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    };

    record(0, &params, &collocation, &mut rows)?;
    for epoch in 1..=config.epochs {
        let (loss, grad) = match composite_loss_gradient(problem, spec, &params, collocation.view(), &config.weights) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch, rows }),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, rows });
        }
        adam.step(&mut params, &grad)?;

        if epoch % RECORD_EVERY == 0 || epoch == config.epochs {
            record(epoch, &params, &collocation, &mut rows)?;
        }
        if epoch % config.resample_period == 0 && epoch < config.epochs {
            let event = (epoch / config.resample_period) as u64;
            let candidates = make_candidates(problem.domain(), config.pool_size, config.seed, event);
            let pool = CandidatePool::evaluate(
                candidates,
                config.criterion,
                &config.density,
                problem,
                &Mlp::new(spec, &params),
            )
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged {
                    epoch,
                    rows: rows.clone(),
                },
                other => other,
            })?;
            collocation = sample_collocation(&pool, config.n_collocation, config.seed, event)?;
            resample_epochs.push(epoch);
            debug!("{} {}: resampled at epoch {epoch}", problem.name(), config.criterion);
        }
    }
    Ok(TrainTrace {
        rows,
        resample_epochs,
        params,
        collocation,
    })
}
