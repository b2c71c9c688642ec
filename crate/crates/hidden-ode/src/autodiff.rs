//! Forward-mode automatic differentiation on first-order dual numbers.
//!
//! The benchmark vector fields are written generically over [`Scalar`] so the
//! same expression evaluates either on plain `f64` or on [`Dual`] carrying one
//! directional derivative. Seeding the derivative slot once per input
//! coordinate yields machine-precision Jacobian columns; no finite differences
//! enter the production path.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type usable inside the benchmark vector fields.
///
/// `value` exposes the primal part so that branch decisions (e.g. guarding a
/// removable singularity) are taken consistently between plain and dual
/// evaluation.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Value together with one directional derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    /// Primal value.
    pub v: f64,
    /// Derivative along the seeded direction.
    pub d: f64,
}

impl Dual {
    /// A variable seeded with derivative 1 (the coordinate being varied).
    pub fn variable(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v + rhs.v,
            d: self.d + rhs.d,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v - rhs.v,
            d: self.d - rhs.d,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v * rhs.v,
            d: self.d * rhs.v + self.v * rhs.d,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v / rhs.v,
            d: (self.d * rhs.v - self.v * rhs.d) / (rhs.v * rhs.v),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
}

impl Scalar for Dual {
    fn constant(c: f64) -> Self {
        Dual { v: c, d: 0.0 }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual {
            v: e,
            d: self.d * e,
        }
    }
    fn sin(self) -> Self {
        Dual {
            v: self.v.sin(),
            d: self.d * self.v.cos(),
        }
    }
    fn cos(self) -> Self {
        Dual {
            v: self.v.cos(),
            d: -self.d * self.v.sin(),
        }
    }
    fn powi(self, n: i32) -> Self {
        Dual {
            v: self.v.powi(n),
            d: f64::from(n) * self.v.powi(n - 1) * self.d,
        }
    }
}

/// Evaluates the gradient of `f` at `x` by one forward pass per coordinate.
///
/// `f` receives the full coordinate vector as duals; exactly one entry is
/// seeded per pass. Returns `(f(x), ∇f(x))` for scalar-valued `f`.
pub fn gradient<F>(f: F, x: &[f64]) -> (f64, Vec<f64>)
where
    F: Fn(&[Dual]) -> Dual,
{
    let mut grad = vec![0.0; x.len()];
    let mut val = 0.0;
    for (j, slot) in grad.iter_mut().enumerate() {
        let seeded: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(k, &xi)| {
                if k == j {
                    Dual::variable(xi)
                } else {
                    Dual::constant(xi)
                }
            })
            .collect();
        let out = f(&seeded);
        val = out.v;
        *slot = out.d;
    }
    (val, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn arithmetic_matches_finite_differences() {
        let g = |x: f64| (x * x + 3.0 * x) / (x - 2.0);
        let gd = |x: Dual| {
            (x * x + Dual::constant(3.0) * x) / (x - Dual::constant(2.0))
        };
        for &x in &[0.5, 1.0, -1.3, 7.0] {
            let d = gd(Dual::variable(x));
            assert_relative_eq!(d.v, g(x), max_relative = 1e-12);
            assert_relative_eq!(d.d, fd(g, x), max_relative = 1e-6);
        }
    }

    #[test]
    fn transcendentals_match_finite_differences() {
        let g = |x: f64| (x.sin() * x.cos()).exp() + x.powi(4);
        let gd = |x: Dual| (x.sin() * x.cos()).exp() + x.powi(4);
        for &x in &[0.0, 0.7, -2.1] {
            let d = gd(Dual::variable(x));
            assert_relative_eq!(d.v, g(x), max_relative = 1e-12);
            assert_relative_eq!(d.d, fd(g, x), max_relative = 1e-5);
        }
    }

    #[test]
    fn gradient_of_quadratic_form() {
        // f(x) = x0^2 + x0*x1, ∇f = [2 x0 + x1, x0]
        let f = |x: &[Dual]| x[0] * x[0] + x[0] * x[1];
        let (val, grad) = gradient(f, &[3.0, -1.0]);
        assert_relative_eq!(val, 6.0);
        assert_relative_eq!(grad[0], 5.0);
        assert_relative_eq!(grad[1], 3.0);
    }

    #[test]
    fn constants_carry_zero_derivative() {
        let c = Dual::constant(4.2);
        assert_eq!(c.d, 0.0);
        let x = Dual::variable(2.0);
        let y = x * c;
        assert_relative_eq!(y.d, 4.2);
    }
}
