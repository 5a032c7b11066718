//! Fully connected networks with exact input derivatives.
//!
//! Input derivatives (gradient and diagonal Hessian) are obtained by pushing
//! second-order truncated Taylor coefficients through every layer. Parameter
//! gradients of any scalar assembled from those jets are obtained by a
//! reverse sweep over the same computation.

mod adam;
mod jet;
mod tape;

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use adam::Adam;
pub use jet::{forward, forward_jet, loss_gradient, Batch, Jet, JetBatch, Order};
pub use tape::{Arith, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    /// `(s(z), s'(z), s''(z), s'''(z))`. Relu has zero curvature everywhere
    /// and a zero slope at the kink.
    #[inline]
    pub fn eval<T: Real>(self, z: T) -> [T; 4] {
        match self {
            Activation::Tanh => {
                let s = z.tanh();
                let d1 = T::one() - s * s;
                let two = T::lit(2.0);
                let d2 = -two * s * d1;
                let d3 = -two * d1 * (d1 - two * s * s);
                [s, d1, d2, d3]
            }
            Activation::Relu => {
                if z > T::zero() {
                    [z, T::one(), T::zero(), T::zero()]
                } else {
                    [T::zero(); 4]
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`; expected tanh or relu"))),
        }
    }
}

/// Architecture of a scalar-output multilayer perceptron.
///
/// Inputs pass through a fixed (untrained) affine map `z = (x - shift) * scale`
/// per coordinate before the first layer; the identity by default.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    input_dim: usize,
    hidden: Vec<usize>,
    activation: Activation,
    input_map: Vec<(f64, f64)>,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, activation: Activation) -> Result<Self> {
        if !(1..=2).contains(&input_dim) {
            return Err(Error::Config(format!("input dimension must be 1 or 2, got {input_dim}")));
        }
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty with positive widths".into()));
        }
        Ok(Self {
            input_dim,
            hidden,
            activation,
            input_map: vec![(0.0, 1.0); input_dim],
        })
    }

    /// Maps each coordinate range `[lo, hi]` onto `[-1, 1]` ahead of the
    /// first layer.
    pub fn with_input_bounds(mut self, bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.len() != self.input_dim {
            return Err(Error::Shape {
                expected: self.input_dim,
                got: bounds.len(),
            });
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidInterval { lo: *lo, hi: *hi });
        }
        self.input_map = bounds.iter().map(|(lo, hi)| (0.5 * (lo + hi), 2.0 / (hi - lo))).collect();
        Ok(self)
    }

    /// `(shift, scale)` per input coordinate.
    pub fn input_map(&self) -> &[(f64, f64)] {
        &self.input_map
    }

    pub fn is_input_identity(&self) -> bool {
        self.input_map.iter().all(|m| *m == (0.0, 1.0))
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Input width, hidden widths, then the scalar output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn layout(&self) -> Layout {
        let widths = self.widths();
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            layers.push(LayerSlot {
                fan_in,
                fan_out,
                weights: offset,
                bias: offset + fan_in * fan_out,
            });
            offset += fan_in * fan_out + fan_out;
        }
        Layout { layers, len: offset }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

/// Where one layer's row-major `fan_out x fan_in` weight matrix and bias
/// vector live inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerSlot>,
    pub len: usize,
}

/// Flat network parameters, laid out per [`Layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector<T>(Vec<T>);

impl<T: Real> ParameterVector<T> {
    pub fn from_vec(spec: &NetworkSpec, values: Vec<T>) -> Result<Self> {
        let expected = spec.param_count();
        if values.len() != expected {
            return Err(Error::Shape {
                expected,
                got: values.len(),
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self(vec![T::zero(); spec.param_count()])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for ParameterVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for ParameterVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

/// Anything that can produce jets of a scalar field at a batch of points.
///
/// The residual, loss and sampling criteria are written against this trait
/// so they apply equally to a network and to a closed-form field.
pub trait Surrogate<T: Real> {
    fn input_dim(&self) -> usize;

    fn jets(&self, points: ArrayView2<'_, T>, order: Order) -> Result<JetBatch<T>>;
}

/// A network together with its parameters.
#[derive(Clone, Copy, Debug)]
pub struct Mlp<'a, T> {
    pub spec: &'a NetworkSpec,
    pub params: &'a [T],
}

impl<'a, T> Mlp<'a, T> {
    pub fn new(spec: &'a NetworkSpec, params: &'a [T]) -> Self {
        Self { spec, params }
    }
}

impl<T: Real> Surrogate<T> for Mlp<'_, T> {
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    fn jets(&self, points: ArrayView2<'_, T>, order: Order) -> Result<JetBatch<T>> {
        forward(self.spec, self.params, points, order)
    }
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_network<T: Real>(spec: &NetworkSpec, seed: u64) -> ParameterVector<T> {
    let layout = spec.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![T::zero(); layout.len];
    for slot in &layout.layers {
        let bound = 1.0 / (slot.fan_in as f64).sqrt();
        for w in &mut values[slot.weights..slot.bias] {
            *w = T::lit(rng.gen_range(-bound..bound));
        }
    }
    ParameterVector(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_arithmetic() {
        let spec = NetworkSpec::new(1, vec![2], Activation::Tanh).unwrap();
        assert_eq!(spec.param_count(), 2 * 1 + 2 + 1 * 2 + 1);
        let layout = spec.layout();
        assert_eq!(layout.layers[1].weights, 4);
        assert_eq!(layout.layers[1].bias, 6);

        let deep = NetworkSpec::new(1, vec![100; 4], Activation::Relu).unwrap();
        assert_eq!(deep.param_count(), 200 + 3 * 10_100 + 101);
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(3, vec![4], Activation::Tanh).is_err());
        assert!(NetworkSpec::new(1, vec![], Activation::Tanh).is_err());
        assert!(NetworkSpec::new(1, vec![4, 0], Activation::Tanh).is_err());
        assert!("sigmoid".parse::<Activation>().is_err());
        assert_eq!("relu".parse::<Activation>().unwrap(), Activation::Relu);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let spec = NetworkSpec::new(2, vec![20, 20, 20], Activation::Tanh).unwrap();
        let a = init_network::<f64>(&spec, 7);
        let b = init_network::<f64>(&spec, 7);
        let c = init_network::<f64>(&spec, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for slot in spec.layout().layers {
            assert!(a[slot.bias..slot.bias + slot.fan_out].iter().all(|b| *b == 0.0));
            let bound = 1.0 / (slot.fan_in as f64).sqrt();
            assert!(a[slot.weights..slot.bias].iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn tanh_derivatives_match_finite_differences() {
        let h = 1e-5;
        for z in [-1.3, -0.2, 0.0, 0.7, 2.1] {
            let [_, d1, d2, d3] = Activation::Tanh.eval::<f64>(z);
            let f = |x: f64| Activation::Tanh.eval::<f64>(x);
            assert!((d1 - (f(z + h)[0] - f(z - h)[0]) / (2.0 * h)).abs() < 1e-9);
            assert!((d2 - (f(z + h)[1] - f(z - h)[1]) / (2.0 * h)).abs() < 1e-9);
            assert!((d3 - (f(z + h)[2] - f(z - h)[2]) / (2.0 * h)).abs() < 1e-8);
        }
    }
}
