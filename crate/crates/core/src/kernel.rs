//! Rational momentum-space kernels.
//!
//! After angular reduction every term's dependence on the loop momentum sits
//! in a factor
//!
//! ```text
//!     (p^2)^a / (p^2 + m^2)^N        (a integer, N >= 0)
//! ```
//!
//! optionally times `log((p^2 + m^2)/L0^2)`.  The same shape serves the
//! radial integrals in the variable `u = p^2`.  This module implements the
//! closed differential calculus on such kernels: `d/du` maps the space into
//! itself, and the logarithm differentiates into a rational kernel.

use crate::coeff::Coefficient;
use num::bigint::BigInt;
use num::rational::BigRational;
use serde::Serialize;
use std::fmt;

/// `(u)^{u_pow} / (u + m^2)^{den_pow}` with `u = p^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Kernel {
    /// Integer power of `u` (negative values are honest `1/u` poles).
    pub u_pow: i64,
    /// Non-negative power of the shifted denominator `(u + m^2)`.
    pub den_pow: i64,
}

impl Kernel {
    /// The constant kernel `1`.
    pub const ONE: Kernel = Kernel { u_pow: 0, den_pow: 0 };

    /// Build, asserting the denominator power is non-negative.
    pub fn new(u_pow: i64, den_pow: i64) -> Self {
        assert!(den_pow >= 0, "kernel denominator power must be >= 0");
        Kernel { u_pow, den_pow }
    }

    /// Pointwise product of kernels.
    pub fn mul(self, other: Kernel) -> Kernel {
        Kernel {
            u_pow: self.u_pow + other.u_pow,
            den_pow: self.den_pow + other.den_pow,
        }
    }

    /// Total large-`u` decay degree: `deg_u` of the kernel as `u -> inf`.
    pub fn decay_degree(self) -> i64 {
        self.u_pow - self.den_pow
    }

    /// `d/du` of the kernel as a two-term rational combination.
    ///
    /// ```text
    ///   d/du [ u^a (u+m^2)^-N ] = a u^{a-1}(u+m^2)^-N - N u^a (u+m^2)^-(N+1)
    /// ```
    pub fn d_du(self) -> Vec<(BigRational, Kernel)> {
        let mut out = Vec::new();
        if self.u_pow != 0 {
            out.push((
                BigRational::from_integer(BigInt::from(self.u_pow)),
                Kernel {
                    u_pow: self.u_pow - 1,
                    den_pow: self.den_pow,
                },
            ));
        }
        if self.den_pow != 0 {
            out.push((
                BigRational::from_integer(BigInt::from(-self.den_pow)),
                Kernel {
                    u_pow: self.u_pow,
                    den_pow: self.den_pow + 1,
                },
            ));
        }
        out
    }

    /// Coefficient of `u^{-1} (m^2)^j` in the large-`u` binomial expansion.
    ///
    /// Writing `u^a (u+m^2)^{-N} = u^{a-N} (1 + m^2/u)^{-N}` and expanding,
    /// the `u^{-1}` term appears at exactly one order `j = a - N + 1` with
    /// coefficient `binom(-N, j) = (-1)^j binom(N+j-1, j)`.  Returns the pair
    /// `(j, coefficient)` or `None` when no `1/u` tail exists (`j < 0`).
    pub fn inverse_u_tail(self) -> Option<(i64, BigRational)> {
        let j = self.u_pow - self.den_pow + 1;
        if j < 0 {
            return None;
        }
        Some((j, binom_neg(self.den_pow, j)))
    }

    /// Numeric evaluation at given `u`, `m^2` (used only by test oracles and
    /// the numeric cross-checks; the engine itself stays exact).
    pub fn eval_f64(self, u: f64, m2: f64) -> f64 {
        u.powi(self.u_pow as i32) * (u + m2).powi(-(self.den_pow as i32))
    }

    /// Partial-fraction normal form over the basis of pure powers `u^a` and
    /// pure denominators `(u+m^2)^-N`, splitting off explicit mass powers:
    ///
    /// ```text
    ///   u^a (u+m^2)^-N = u^{a-1} (u+m^2)^-(N-1) - m^2 u^{a-1} (u+m^2)^-N
    /// ```
    ///
    /// applied until no kernel mixes both.  Returns `(mass power, rational
    /// weight, pure kernel)` triples; kernels that are already pure pass
    /// through unchanged.
    pub fn partial_fraction(self) -> Vec<(i32, BigRational, Kernel)> {
        let one = BigRational::from_integer(BigInt::from(1));
        let mut out = Vec::new();
        let mut work = vec![(0i32, one, self)];
        while let Some((m, c, k)) = work.pop() {
            if k.u_pow > 0 && k.den_pow > 0 {
                work.push((m, c.clone(), Kernel::new(k.u_pow - 1, k.den_pow - 1)));
                work.push((m + 1, -c, Kernel::new(k.u_pow - 1, k.den_pow)));
            } else {
                out.push((m, c, k));
            }
        }
        out
    }
}

/// `binom(-n, j)` for `n >= 0`, `j >= 0`: `(-1)^j binom(n+j-1, j)`.
pub(crate) fn binom_neg(n: i64, j: i64) -> BigRational {
    assert!(n >= 0 && j >= 0);
    let mut acc = BigRational::from_integer(BigInt::from(1));
    for t in 0..j {
        // multiply by (-n - t) / (t + 1)
        acc *= BigRational::new(BigInt::from(-n - t), BigInt::from(t + 1));
    }
    acc
}

/// A kernel together with an optional regulator-logarithm factor.
///
/// The flag marks multiplication by `log((u + m^2)/L0^2)`; a coefficient
/// carrying `L0` grading accompanies the flag so reference-scale cancellation
/// stays checkable.
#[derive(Clone, Debug, PartialEq)]
pub struct LogKernelTerm {
    pub coeff: Coefficient,
    pub kernel: Kernel,
    pub has_log: bool,
}

impl LogKernelTerm {
    /// `d/du`, staying inside the `{kernel, log * kernel}` space.
    pub fn d_du(&self) -> Vec<LogKernelTerm> {
        let mut out = Vec::new();
        for (r, k) in self.kernel.d_du() {
            out.push(LogKernelTerm {
                coeff: self.coeff.scale(&r),
                kernel: k,
                has_log: self.has_log,
            });
        }
        if self.has_log {
            // log'((u+m^2)/L0^2) = 1/(u+m^2)
            out.push(LogKernelTerm {
                coeff: self.coeff.clone(),
                kernel: self.kernel.mul(Kernel { u_pow: 0, den_pow: 1 }),
                has_log: false,
            });
        }
        out
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.u_pow, self.den_pow) {
            (0, 0) => write!(f, "1"),
            (a, 0) => write!(f, "u^{a}"),
            (0, n) => write!(f, "(u+m2)^-{n}"),
            (a, n) => write!(f, "u^{a}*(u+m2)^-{n}"),
        }
    }
}
