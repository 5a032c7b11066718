//! Scalar reverse-mode tape for the loss head.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Real;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy)]
struct Node<T> {
    parents: [usize; 2],
    partials: [T; 2],
}

/// Records elementary operations so that the derivative of one output with
/// respect to every recorded variable can be read back in a single sweep.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    /// A new independent variable.
    pub fn var(&self, value: T) -> Var<'_, T> {
        self.push(value, [NONE, NONE], [T::zero(), T::zero()])
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: T, parents: [usize; 2], partials: [T; 2]) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, partials });
        Var {
            tape: self,
            index: nodes.len() - 1,
            value,
        }
    }

    /// Adjoint `d output / d v` for every variable `v` on the tape, indexed
    /// by [`Var::index`].
    pub fn gradient(&self, output: Var<'_, T>) -> Vec<T> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![T::zero(); nodes.len()];
        adj[output.index] = T::one();
        for i in (0..=output.index).rev() {
            let a = adj[i];
            if a == T::zero() {
                continue;
            }
            let node = nodes[i];
            for (p, d) in node.parents.iter().zip(node.partials) {
                if *p != NONE {
                    adj[*p] = adj[*p] + a * d;
                }
            }
        }
        adj
    }
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    index: usize,
    value: T,
}

impl<'t, T: Real> Var<'t, T> {
    pub fn value(&self) -> T {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn square(self) -> Self {
        let two = T::lit(2.0);
        self.tape
            .push(self.value * self.value, [self.index, NONE], [two * self.value, T::zero()])
    }

    /// Sum of a non-empty sequence of variables.
    pub fn sum<I: IntoIterator<Item = Self>>(items: I) -> Option<Self> {
        items.into_iter().reduce(|a, b| a + b)
    }
}

impl<T: fmt::Debug> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("index", &self.index)
            .field("value", &self.value)
            .finish()
    }
}

impl<'t, T: Real> Add for Var<'t, T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.tape
            .push(self.value + rhs.value, [self.index, rhs.index], [T::one(), T::one()])
    }
}

impl<'t, T: Real> Sub for Var<'t, T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.tape
            .push(self.value - rhs.value, [self.index, rhs.index], [T::one(), -T::one()])
    }
}

impl<'t, T: Real> Mul for Var<'t, T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.tape
            .push(self.value * rhs.value, [self.index, rhs.index], [rhs.value, self.value])
    }
}

impl<'t, T: Real> Neg for Var<'t, T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.tape.push(-self.value, [self.index, NONE], [-T::one(), T::zero()])
    }
}

impl<'t, T: Real> Add<T> for Var<'t, T> {
    type Output = Self;
    fn add(self, rhs: T) -> Self {
        self.tape.push(self.value + rhs, [self.index, NONE], [T::one(), T::zero()])
    }
}

impl<'t, T: Real> Sub<T> for Var<'t, T> {
    type Output = Self;
    fn sub(self, rhs: T) -> Self {
        self.tape.push(self.value - rhs, [self.index, NONE], [T::one(), T::zero()])
    }
}

impl<'t, T: Real> Mul<T> for Var<'t, T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.tape.push(self.value * rhs, [self.index, NONE], [rhs, T::zero()])
    }
}

/// Arithmetic shared by plain scalars and tape variables, so that a PDE
/// residual can be written once and evaluated either way.
pub trait Arith<T>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Add<T, Output = Self>
    + Sub<T, Output = Self> + Mul<T, Output = Self>
{
}

impl<T: Real> Arith<T> for T {}
impl<'t, T: Real> Arith<T> for Var<'t, T> {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = tape.var(-2.0);
        let z = (x * y + x.square()) * 2.0 - y;
        assert_eq!(z.value(), 2.0 * (-6.0 + 9.0) + 2.0);
        let g = tape.gradient(z);
        assert_eq!(g[x.index()], 2.0 * (-2.0 + 6.0));
        assert_eq!(g[y.index()], 2.0 * 3.0 - 1.0);
    }

    #[test]
    fn reused_variable_accumulates() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let s = Var::sum([x, x, -x, x * 4.0]).unwrap();
        assert_eq!(tape.gradient(s)[x.index()], 5.0);
        assert!(Var::<f64>::sum(std::iter::empty()).is_none());
    }
}
