//! Exact coefficient ring for divergence bookkeeping.
//!
//! Every quantity the engine manipulates carries a coefficient of the form
//!
//! ```text
//!     (re + i*im) * e^a * (m^2)^b * (1/pi^2)^c * L0^w
//! ```
//!
//! with `re`, `im` rational, `e` the coupling, `m^2` the mass square, `pi`
//! the circle constant entering through the sphere volume, and `L0` the
//! arbitrary reference scale of the regularized logarithm.  The four grades
//! are tracked as integer exponents so that cancellation of the reference
//! scale can be *asserted* rather than hoped for.
//!
//! Coefficients with different grade vectors never merge; addition panics if
//! grades differ, which turns bookkeeping mistakes into immediate failures
//! instead of silent garbage.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Mul, Neg};

/// Grade vector of a coefficient: exponents of the graded units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Grading {
    /// Power of the coupling `e`.
    pub e_pow: i32,
    /// Power of `m^2`.
    pub m2_pow: i32,
    /// Power of `1/pi^2`.
    pub pi_inv2_pow: i32,
    /// Power of the reference scale `L0` (must vanish in physical output).
    pub l0_pow: i32,
}

impl Grading {
    /// The trivial grading: a pure number.
    pub const UNIT: Grading = Grading {
        e_pow: 0,
        m2_pow: 0,
        pi_inv2_pow: 0,
        l0_pow: 0,
    };

    /// Component-wise sum, as under multiplication of graded units.
    pub fn combine(self, other: Grading) -> Grading {
        Grading {
            e_pow: self.e_pow + other.e_pow,
            m2_pow: self.m2_pow + other.m2_pow,
            pi_inv2_pow: self.pi_inv2_pow + other.pi_inv2_pow,
            l0_pow: self.l0_pow + other.l0_pow,
        }
    }
}

/// An exact Gaussian-rational coefficient with grading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coefficient {
    /// Real part.
    pub re: BigRational,
    /// Imaginary part.
    pub im: BigRational,
    /// Graded unit exponents.
    pub grading: Grading,
}

impl Coefficient {
    /// Zero with trivial grading.
    pub fn zero() -> Self {
        Coefficient {
            re: BigRational::zero(),
            im: BigRational::zero(),
            grading: Grading::UNIT,
        }
    }

    /// One with trivial grading.
    pub fn one() -> Self {
        Coefficient {
            re: BigRational::one(),
            im: BigRational::zero(),
            grading: Grading::UNIT,
        }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Coefficient {
            re: BigRational::zero(),
            im: BigRational::one(),
            grading: Grading::UNIT,
        }
    }

    /// Integer constant.
    pub fn from_int(n: i64) -> Self {
        Coefficient {
            re: BigRational::from_integer(BigInt::from(n)),
            im: BigRational::zero(),
            grading: Grading::UNIT,
        }
    }

    /// Rational constant `num/den`.  Panics on zero denominator.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        Coefficient {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
            grading: Grading::UNIT,
        }
    }

    /// Attach graded units to a copy of `self`.
    pub fn with_grading(mut self, grading: Grading) -> Self {
        self.grading = self.grading.combine(grading);
        self
    }

    /// Multiply by `e^k`.
    pub fn times_e_pow(self, k: i32) -> Self {
        self.with_grading(Grading {
            e_pow: k,
            ..Grading::UNIT
        })
    }

    /// Multiply by `(m^2)^k`.
    pub fn times_m2_pow(self, k: i32) -> Self {
        self.with_grading(Grading {
            m2_pow: k,
            ..Grading::UNIT
        })
    }

    /// Multiply by `(1/pi^2)^k`.
    pub fn times_pi_inv2(self, k: i32) -> Self {
        self.with_grading(Grading {
            pi_inv2_pow: k,
            ..Grading::UNIT
        })
    }

    /// Multiply by `L0^k`.
    pub fn times_l0_pow(self, k: i32) -> Self {
        self.with_grading(Grading {
            l0_pow: k,
            ..Grading::UNIT
        })
    }

    /// True when the numeric part vanishes (grading then irrelevant).
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// True when the imaginary part vanishes.
    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// Multiply the numeric part by a bare rational, keeping the grading.
    pub fn scale(&self, r: &BigRational) -> Self {
        Coefficient {
            re: &self.re * r,
            im: &self.im * r,
            grading: self.grading,
        }
    }

    /// Multiply the numeric part by `i^k`.
    pub fn times_i_pow(&self, k: i32) -> Self {
        let mut out = self.clone();
        let k = k.rem_euclid(4);
        for _ in 0..k {
            let re = -out.im.clone();
            let im = out.re.clone();
            out.re = re;
            out.im = im;
        }
        out
    }

    /// Multiplicative inverse.  Panics on zero.
    ///
    /// The grading negates, so dividing two coefficients of different grade
    /// yields the graded ratio (e.g. an `e^2` proportionality constant).
    pub fn invert(&self) -> Coefficient {
        assert!(!self.is_zero(), "attempted to invert zero");
        let norm = &self.re * &self.re + &self.im * &self.im;
        Coefficient {
            re: &self.re / &norm,
            im: -&self.im / &norm,
            grading: Grading {
                e_pow: -self.grading.e_pow,
                m2_pow: -self.grading.m2_pow,
                pi_inv2_pow: -self.grading.pi_inv2_pow,
                l0_pow: -self.grading.l0_pow,
            },
        }
    }

    /// Sum that insists the gradings agree.
    ///
    /// Distinct gradings represent distinct physical units; adding them is a
    /// logic error upstream and is reported loudly.
    pub fn checked_add(&self, other: &Coefficient) -> Coefficient {
        if !self.is_zero() && !other.is_zero() {
            assert_eq!(
                self.grading, other.grading,
                "attempted to add coefficients of different grading"
            );
        }
        let grading = if self.is_zero() {
            other.grading
        } else {
            self.grading
        };
        Coefficient {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
            grading,
        }
    }
}

impl Add for Coefficient {
    type Output = Coefficient;
    fn add(self, rhs: Coefficient) -> Coefficient {
        self.checked_add(&rhs)
    }
}

impl Neg for Coefficient {
    type Output = Coefficient;
    fn neg(self) -> Coefficient {
        Coefficient {
            re: -self.re,
            im: -self.im,
            grading: self.grading,
        }
    }
}

impl Mul for Coefficient {
    type Output = Coefficient;
    fn mul(self, rhs: Coefficient) -> Coefficient {
        // (a+ib)(c+id) = (ac-bd) + i(ad+bc)
        let re = &self.re * &rhs.re - &self.im * &rhs.im;
        let im = &self.re * &rhs.im + &self.im * &rhs.re;
        Coefficient {
            re,
            im,
            grading: self.grading.combine(rhs.grading),
        }
    }
}

/// Render a rational as `p` or `p/q` without whitespace.
pub fn rational_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", rational_string(&self.re))?;
        } else if self.re.is_zero() {
            write!(f, "{}*i", rational_string(&self.im))?;
        } else {
            let sign = if self.im.is_negative() { "-" } else { "+" };
            write!(
                f,
                "({}{}{}*i)",
                rational_string(&self.re),
                sign,
                rational_string(&self.im.abs())
            )?;
        }
        let g = &self.grading;
        if g.e_pow != 0 {
            write!(f, "*e^{}", g.e_pow)?;
        }
        if g.m2_pow != 0 {
            write!(f, "*m2^{}", g.m2_pow)?;
        }
        if g.pi_inv2_pow != 0 {
            write!(f, "*pi^{}", -2 * g.pi_inv2_pow)?;
        }
        if g.l0_pow != 0 {
            write!(f, "*L0^{}", g.l0_pow)?;
        }
        Ok(())
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Coefficient", 3)?;
        s.serialize_field("re", &rational_string(&self.re))?;
        s.serialize_field("im", &rational_string(&self.im))?;
        s.serialize_field("grading", &self.grading)?;
        s.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_multiplication_matches_hand_expansion() {
        // (1 + 2i)(3 - i) = 5 + 5i
        let a = Coefficient::from_int(1) + Coefficient::from_int(2).times_i_pow(1);
        let b = Coefficient::from_int(3) + Coefficient::from_int(-1).times_i_pow(1);
        let c = a * b;
        assert_eq!(c.re, BigRational::from_integer(BigInt::from(5)));
        assert_eq!(c.im, BigRational::from_integer(BigInt::from(5)));
    }

    #[test]
    fn i_powers_cycle() {
        let one = Coefficient::one();
        assert_eq!(one.times_i_pow(4), one);
        assert_eq!(one.times_i_pow(2), Coefficient::from_int(-1));
        assert_eq!(one.times_i_pow(1), Coefficient::i());
        assert_eq!(one.times_i_pow(3), -Coefficient::i());
    }

    #[test]
    fn grading_combines_additively() {
        let a = Coefficient::one().times_e_pow(2).times_m2_pow(1);
        let b = Coefficient::one().times_e_pow(1).times_l0_pow(-2);
        let c = a * b;
        assert_eq!(
            c.grading,
            Grading {
                e_pow: 3,
                m2_pow: 1,
                pi_inv2_pow: 0,
                l0_pow: -2
            }
        );
    }

    #[test]
    #[should_panic(expected = "different grading")]
    fn mixed_grade_addition_panics() {
        let a = Coefficient::one().times_e_pow(2);
        let b = Coefficient::one();
        let _ = a + b;
    }

    #[test]
    fn zero_is_graded_neutral() {
        let a = Coefficient::one().times_e_pow(2);
        let z = Coefficient::zero();
        assert_eq!(z.checked_add(&a), a);
        assert_eq!(a.checked_add(&Coefficient::zero()), a);
    }

    #[test]
    fn display_is_compact() {
        let c = Coefficient::from_ratio(-1, 16)
            .times_pi_inv2(1)
            .times_e_pow(2);
        assert_eq!(c.to_string(), "-1/16*e^2*pi^-2");
    }
}
