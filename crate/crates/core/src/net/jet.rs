//! Batched Taylor-jet propagation and its reverse sweep.
//!
//! A batch of `P` points is carried through the network as a stacked matrix
//! with one block of `P` rows per channel: the value, then `d/dx_i` for each
//! input coordinate, then `d^2/dx_i^2` for each input coordinate. Every
//! channel shares the same weight product, so a layer costs one matrix
//! multiplication regardless of the derivative order.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};

use super::tape::{Tape, Var};
use super::NetworkSpec;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Points per chunk when evaluating large batches without a reverse sweep.
const FORWARD_CHUNK: usize = 2048;

/// Highest input-derivative order carried by a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Value = 0,
    Gradient = 1,
    Hessian = 2,
}

impl Order {
    pub fn channels(self, dim: usize) -> usize {
        1 + dim * self as usize
    }
}

/// Value, gradient and diagonal Hessian of the network output at one point.
/// `grad` is empty below [`Order::Gradient`], `hess` below
/// [`Order::Hessian`].
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S> {
    pub value: S,
    pub grad: Vec<S>,
    pub hess: Vec<S>,
}

/// Network jets for a batch of points, stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct JetBatch<T> {
    order: Order,
    dim: usize,
    points: usize,
    data: Vec<T>,
}

impl<T: Real> JetBatch<T> {
    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn order(&self) -> Order {
        self.order
    }

    #[inline]
    pub fn value(&self, p: usize) -> T {
        self.data[p]
    }

    #[inline]
    pub fn grad(&self, p: usize, i: usize) -> T {
        debug_assert!(self.order >= Order::Gradient);
        self.data[(1 + i) * self.points + p]
    }

    #[inline]
    pub fn hess(&self, p: usize, i: usize) -> T {
        debug_assert!(self.order >= Order::Hessian);
        self.data[(1 + self.dim + i) * self.points + p]
    }

    pub fn values(&self) -> &[T] {
        &self.data[..self.points]
    }

    /// Builds a batch from per-point jets, each carrying `dim` gradient and
    /// Hessian entries as required by `order`.
    pub fn from_jets(order: Order, dim: usize, jets: &[Jet<T>]) -> Result<Self> {
        let n = jets.len();
        let mut data = vec![T::zero(); order.channels(dim) * n];
        for (p, jet) in jets.iter().enumerate() {
            data[p] = jet.value;
            if order >= Order::Gradient {
                if jet.grad.len() != dim {
                    return Err(Error::Shape {
                        expected: dim,
                        got: jet.grad.len(),
                    });
                }
                for i in 0..dim {
                    data[(1 + i) * n + p] = jet.grad[i];
                }
            }
            if order >= Order::Hessian {
                if jet.hess.len() != dim {
                    return Err(Error::Shape {
                        expected: dim,
                        got: jet.hess.len(),
                    });
                }
                for i in 0..dim {
                    data[(1 + dim + i) * n + p] = jet.hess[i];
                }
            }
        }
        Ok(Self {
            order,
            dim,
            points: n,
            data,
        })
    }

    pub fn jet(&self, p: usize) -> Jet<T> {
        let grad = if self.order >= Order::Gradient {
            (0..self.dim).map(|i| self.grad(p, i)).collect()
        } else {
            Vec::new()
        };
        let hess = if self.order >= Order::Hessian {
            (0..self.dim).map(|i| self.hess(p, i)).collect()
        } else {
            Vec::new()
        };
        Jet {
            value: self.value(p),
            grad,
            hess,
        }
    }
}

/// Points (one per row) and the derivative order wanted for them.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a, T> {
    pub points: ArrayView2<'a, T>,
    pub order: Order,
}

impl<'a, T> Batch<'a, T> {
    pub fn new(points: ArrayView2<'a, T>, order: Order) -> Self {
        Self { points, order }
    }
}

/// Per-layer state kept for the reverse sweep.
struct Cache<T> {
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
    // s', s'', s''' at the value rows of each hidden pre-activation
    slopes: Vec<[Array2<T>; 3]>,
}

fn check_inputs<T: Real>(spec: &NetworkSpec, params: &[T], points: &ArrayView2<'_, T>) -> Result<()> {
    let expected = spec.param_count();
    if params.len() != expected {
        return Err(Error::Shape {
            expected,
            got: params.len(),
        });
    }
    if points.ncols() != spec.input_dim() {
        return Err(Error::Shape {
            expected: spec.input_dim(),
            got: points.ncols(),
        });
    }
    Ok(())
}

fn seed_jets<T: Real>(spec: &NetworkSpec, points: &ArrayView2<'_, T>, order: Order) -> Array2<T> {
    let (n, dim) = points.dim();
    let mut h = Array2::zeros((order.channels(dim) * n, dim));
    for (i, (shift, scale)) in spec.input_map().iter().enumerate() {
        let (shift, scale) = (T::lit(*shift), T::lit(*scale));
        for p in 0..n {
            h[[p, i]] = (points[[p, i]] - shift) * scale;
        }
        if order >= Order::Gradient {
            h.slice_mut(s![(1 + i) * n..(2 + i) * n, i]).fill(scale);
        }
    }
    h
}

/// Pushes jets through the network. Returns the stacked output column
/// (`channels * P` rows) and, when `keep` is set, the reverse-sweep cache.
fn propagate<T: Real>(
    spec: &NetworkSpec,
    params: &[T],
    points: &ArrayView2<'_, T>,
    order: Order,
    keep: bool,
) -> (Array2<T>, Option<Cache<T>>) {
    let n = points.nrows();
    let dim = spec.input_dim();
    let layout = spec.layout();
    let act = spec.activation();
    let last = layout.layers.len() - 1;
    let mut cache = keep.then(|| Cache {
        inputs: Vec::with_capacity(layout.layers.len()),
        pre: Vec::with_capacity(last),
        slopes: Vec::with_capacity(last),
    });

    let mut h = seed_jets(spec, points, order);
    for (l, slot) in layout.layers.iter().enumerate() {
        let w = ArrayView2::from_shape((slot.fan_out, slot.fan_in), &params[slot.weights..slot.bias])
            .expect("layout matches parameter length");
        let bias = &params[slot.bias..slot.bias + slot.fan_out];
        let mut z = h.dot(&w.t());
        for mut row in z.rows_mut().into_iter().take(n) {
            for (zj, bj) in row.iter_mut().zip(bias) {
                *zj = *zj + *bj;
            }
        }
        if l == last {
            if let Some(c) = cache.as_mut() {
                c.inputs.push(h);
            }
            return (z, cache);
        }

        let width = slot.fan_out;
        let mut a = Array2::zeros(z.raw_dim());
        let mut d1s = Array2::zeros((n, width));
        let mut d2s = Array2::zeros((n, width));
        let mut d3s = Array2::zeros((n, width));
        for p in 0..n {
            for j in 0..width {
                let [sv, d1, d2, d3] = act.eval(z[[p, j]]);
                a[[p, j]] = sv;
                if order >= Order::Gradient {
                    for i in 0..dim {
                        let g = (1 + i) * n + p;
                        let zg = z[[g, j]];
                        a[[g, j]] = d1 * zg;
                        if order == Order::Hessian {
                            let q = (1 + dim + i) * n + p;
                            a[[q, j]] = d2 * zg * zg + d1 * z[[q, j]];
                        }
                    }
                }
                d1s[[p, j]] = d1;
                d2s[[p, j]] = d2;
                d3s[[p, j]] = d3;
            }
        }
        if let Some(c) = cache.as_mut() {
            c.inputs.push(std::mem::replace(&mut h, a));
            c.pre.push(z);
            c.slopes.push([d1s, d2s, d3s]);
        } else {
            h = a;
        }
    }
    unreachable!("layout always has an output layer")
}

/// Accumulates the parameter gradient of a scalar whose adjoint with
/// respect to the stacked output column is `out_bar`.
fn reverse<T: Real>(spec: &NetworkSpec, params: &[T], cache: &Cache<T>, out_bar: Array2<T>, order: Order, grad: &mut [T]) {
    let layout = spec.layout();
    let dim = spec.input_dim();
    let n = out_bar.nrows() / order.channels(dim);
    let mut zbar = out_bar;
    for (l, slot) in layout.layers.iter().enumerate().rev() {
        let h = &cache.inputs[l];
        {
            let mut dw = ArrayViewMut2::from_shape((slot.fan_out, slot.fan_in), &mut grad[slot.weights..slot.bias])
                .expect("layout matches gradient length");
            general_mat_mul(T::one(), &zbar.t(), h, T::one(), &mut dw);
        }
        for row in zbar.rows().into_iter().take(n) {
            for (gb, zb) in grad[slot.bias..slot.bias + slot.fan_out].iter_mut().zip(row) {
                *gb = *gb + *zb;
            }
        }
        if l == 0 {
            break;
        }
        let w = ArrayView2::from_shape((slot.fan_out, slot.fan_in), &params[slot.weights..slot.bias])
            .expect("layout matches parameter length");
        let abar = zbar.dot(&w);
        let z = &cache.pre[l - 1];
        let [d1s, d2s, d3s] = &cache.slopes[l - 1];
        let width = slot.fan_in;
        let two = T::lit(2.0);
        let mut next = Array2::zeros(abar.raw_dim());
        for p in 0..n {
            for j in 0..width {
                let (d1, d2, d3) = (d1s[[p, j]], d2s[[p, j]], d3s[[p, j]]);
                let mut zv = abar[[p, j]] * d1;
                if order >= Order::Gradient {
                    for i in 0..dim {
                        let g = (1 + i) * n + p;
                        let zg = z[[g, j]];
                        let ag = abar[[g, j]];
                        zv = zv + ag * d2 * zg;
                        let mut zgbar = ag * d1;
                        if order == Order::Hessian {
                            let q = (1 + dim + i) * n + p;
                            let aq = abar[[q, j]];
                            zv = zv + aq * (d3 * zg * zg + d2 * z[[q, j]]);
                            zgbar = zgbar + aq * two * d2 * zg;
                            next[[q, j]] = aq * d1;
                        }
                        next[[g, j]] = zgbar;
                    }
                }
                next[[p, j]] = zv;
            }
        }
        zbar = next;
    }
}

fn first_non_finite<T: Real>(out: &Array2<T>, points: &ArrayView2<'_, T>) -> Option<Vec<f64>> {
    let n = points.nrows();
    out.iter()
        .position(|v| !v.is_finite())
        .map(|r| points.row(r % n).iter().map(|x| x.as_f64()).collect())
}

/// Network jets at every row of `points`, up to `order`.
pub fn forward<T: Real>(spec: &NetworkSpec, params: &[T], points: ArrayView2<'_, T>, order: Order) -> Result<JetBatch<T>> {
    check_inputs(spec, params, &points)?;
    let n = points.nrows();
    let dim = spec.input_dim();
    let channels = order.channels(dim);
    let mut data = vec![T::zero(); channels * n];
    let mut start = 0;
    while start < n {
        let end = (start + FORWARD_CHUNK).min(n);
        let chunk = points.slice(s![start..end, ..]);
        let (out, _) = propagate(spec, params, &chunk, order, false);
        if let Some(location) = first_non_finite(&out, &chunk) {
            return Err(Error::NonFinite { location });
        }
        let m = end - start;
        for c in 0..channels {
            for p in 0..m {
                data[c * n + start + p] = out[[c * m + p, 0]];
            }
        }
        start = end;
    }
    Ok(JetBatch {
        order,
        dim,
        points: n,
        data,
    })
}

/// Value, gradient and diagonal Hessian of the network at a single point.
pub fn forward_jet<T: Real>(spec: &NetworkSpec, params: &[T], x: &[T]) -> Result<Jet<T>> {
    let point = ArrayView2::from_shape((1, x.len()), x).map_err(|_| Error::Shape {
        expected: spec.input_dim(),
        got: x.len(),
    })?;
    Ok(forward(spec, params, point, Order::Hessian)?.jet(0))
}

/// Value and parameter gradient of a scalar loss built from network jets.
///
/// The network is evaluated on every batch; `loss` receives one vector of
/// jets per batch, recorded on a tape, and returns the scalar. Its adjoints
/// with respect to each jet component are then swept back through the
/// network.
pub fn loss_gradient<T, F>(spec: &NetworkSpec, params: &[T], batches: &[Batch<'_, T>], loss: F) -> Result<(T, Vec<T>)>
where
    T: Real,
    F: for<'t> FnOnce(&'t Tape<T>, &[Vec<Jet<Var<'t, T>>>]) -> Var<'t, T>,
{
    let dim = spec.input_dim();
    let mut evaluated = Vec::with_capacity(batches.len());
    let mut leaves_needed = 0;
    for b in batches {
        check_inputs(spec, params, &b.points)?;
        let (out, cache) = propagate(spec, params, &b.points, b.order, true);
        if let Some(location) = first_non_finite(&out, &b.points) {
            return Err(Error::NonFinite { location });
        }
        leaves_needed += out.nrows();
        evaluated.push((out, cache.expect("cache requested")));
    }

    let tape = Tape::with_capacity(leaves_needed * 4);
    let mut first_leaf = Vec::with_capacity(batches.len());
    let mut jets = Vec::with_capacity(batches.len());
    for (b, (out, _)) in batches.iter().zip(&evaluated) {
        let n = b.points.nrows();
        let channels = b.order.channels(dim);
        // leaves are allocated channel-major so that leaf `first + r`
        // corresponds to output row `r`
        let leaves: Vec<Var<'_, T>> = (0..channels * n).map(|r| tape.var(out[[r, 0]])).collect();
        first_leaf.push(leaves.first().map(|v| v.index()).unwrap_or(0));
        let batch_jets = (0..n)
            .map(|p| Jet {
                value: leaves[p],
                grad: if b.order >= Order::Gradient {
                    (0..dim).map(|i| leaves[(1 + i) * n + p]).collect()
                } else {
                    Vec::new()
                },
                hess: if b.order >= Order::Hessian {
                    (0..dim).map(|i| leaves[(1 + dim + i) * n + p]).collect()
                } else {
                    Vec::new()
                },
            })
            .collect();
        jets.push(batch_jets);
    }

    let out = loss(&tape, &jets);
    let value = out.value();
    if !value.is_finite() {
        return Err(Error::NonFinite { location: Vec::new() });
    }
    let adj = tape.gradient(out);

    let mut grad = vec![T::zero(); params.len()];
    for ((b, (out, cache)), first) in batches.iter().zip(&evaluated).zip(first_leaf) {
        let rows = out.nrows();
        let out_bar = Array2::from_shape_fn((rows, 1), |(r, _)| adj[first + r]);
        reverse(spec, params, cache, out_bar, b.order, &mut grad);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { location: Vec::new() });
    }
    Ok((value, grad))
}
