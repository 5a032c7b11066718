//! Benchmark integrands with closed-form second derivatives.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quad::Interval;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchFunction {
    /// `(-1.4 + 3x^2) sin(16x)` on `[0, 2]`.
    Example1,
    /// `sin(x^(-3/2))` on `[0.1, 1]`.
    Example2,
    /// Two circular arcs meeting at `x = 1` on `[0, 2]`.
    Sharkfin,
}

impl BenchFunction {
    pub const ALL: [BenchFunction; 3] = [Self::Example1, Self::Example2, Self::Sharkfin];

    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Sharkfin => "sharkfin",
        }
    }

    pub fn domain<T: Real>(self) -> Interval<T> {
        let (lo, hi) = match self {
            Self::Example1 | Self::Sharkfin => (0.0, 2.0),
            Self::Example2 => (0.1, 1.0),
        };
        Interval::new(T::lit(lo), T::lit(hi)).expect("static domain")
    }

    /// Function value without a domain check.
    pub fn value<T: Real>(self, x: T) -> T {
        match self {
            Self::Example1 => (T::lit(-1.4) + T::lit(3.0) * x * x) * (T::lit(16.0) * x).sin(),
            Self::Example2 => x.powf(T::lit(-1.5)).sin(),
            Self::Sharkfin => {
                if x < T::one() {
                    T::lit(-0.1) + arc(x, T::lit(1.1))
                } else {
                    T::lit(1.1) - arc(x, T::lit(2.1))
                }
            }
        }
    }

    /// Closed-form second derivative without a domain check. The sharkfin
    /// junction `x = 1` takes the left branch.
    pub fn second_derivative<T: Real>(self, x: T) -> T {
        match self {
            Self::Example1 => {
                let s = (T::lit(16.0) * x).sin();
                let c = (T::lit(16.0) * x).cos();
                (T::lit(364.4) - T::lit(768.0) * x * x) * s + T::lit(192.0) * x * c
            }
            Self::Example2 => {
                let u = x.powf(T::lit(-1.5));
                let du = T::lit(-1.5) * x.powf(T::lit(-2.5));
                let ddu = T::lit(3.75) * x.powf(T::lit(-3.5));
                u.cos() * ddu - u.sin() * du * du
            }
            Self::Sharkfin => {
                // d^2/dx^2 sqrt(r^2 - (x - c)^2) = -r^2 / g^3
                let r2 = T::lit(1.22);
                if x <= T::one() {
                    let g = arc(x, T::lit(1.1));
                    -r2 / (g * g * g)
                } else {
                    let g = arc(x, T::lit(2.1));
                    r2 / (g * g * g)
                }
            }
        }
    }

    pub fn eval<T: Real>(self, x: T) -> Result<T> {
        self.check(x)?;
        Ok(self.value(x))
    }

    pub fn eval_second_derivative<T: Real>(self, x: T) -> Result<T> {
        self.check(x)?;
        Ok(self.second_derivative(x))
    }

    fn check<T: Real>(self, x: T) -> Result<()> {
        let dom = self.domain::<T>();
        if dom.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                location: vec![x.as_f64()],
                domain: dom.to_string(),
            })
        }
    }
}

#[inline]
fn arc<T: Real>(x: T, centre: T) -> T {
    let d = x - centre;
    (T::lit(1.22) - d * d).sqrt()
}

impl fmt::Display for BenchFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|b| b.name()).collect();
                Error::Config(format!("unknown function `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Default central-difference step `1e-4 (1 + |x|)`.
pub fn default_step<T: Real>(x: T) -> T {
    T::lit(1e-4) * (T::one() + x.abs())
}

/// Central second difference `(f(x - h) - 2 f(x) + f(x + h)) / h^2`. The
/// whole stencil must lie in `domain`.
pub fn fd_second_derivative<T, F>(f: F, domain: Interval<T>, x: T, h: T) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    if !(h > T::zero()) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    if !(domain.contains(x - h) && domain.contains(x + h)) {
        return Err(Error::OutsideDomain {
            location: vec![(x - h).as_f64(), (x + h).as_f64()],
            domain: domain.to_string(),
        });
    }
    let two = T::lit(2.0);
    Ok((f(x - h) - two * f(x) + f(x + h)) / (h * h))
}
