use crate::error::{Error, Result};
use crate::scalar::Real;

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> Adam<T> {
    pub fn new(len: usize, learning_rate: T) -> Self {
        Self {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }

    /// One update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n || grad.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: if params.len() != n { params.len() } else { grad.len() },
            });
        }
        self.step_count += 1;
        let t = i32::try_from(self.step_count).unwrap_or(i32::MAX);
        let one = T::one();
        let c1 = one - self.beta1.powi(t);
        let c2 = one - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (one - self.beta1) * *g;
            *v = self.beta2 * *v + (one - self.beta2) * *g * *g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_learning_rate_sized() {
        let mut adam = Adam::new(1, 1e-3_f64);
        let mut theta = [0.0];
        adam.step(&mut theta, &[1.0]).unwrap();
        let expected = -1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((theta[0] - expected).abs() < 1e-18);
        assert!((theta[0] + 0.000999999990).abs() < 1e-15);
        assert_eq!(adam.step_count, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = Adam::new(3, 0.1_f64);
        let mut theta = [1.0, -2.0, 0.5];
        adam.step(&mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn second_step_not_larger() {
        let mut adam = Adam::new(1, 1e-3_f64);
        let mut theta = [0.0];
        adam.step(&mut theta, &[1.0]).unwrap();
        let first = theta[0];
        adam.step(&mut theta, &[1.0]).unwrap();
        let second = theta[0] - first;
        assert_eq!(adam.step_count, 2);
        assert!(second.abs() <= first.abs() * (1.0 + 1e-12));
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = Adam::new(2, 0.1_f64);
        assert!(adam.step(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(adam.step(&mut [0.0; 2], &[0.0; 1]).is_err());
    }
}
