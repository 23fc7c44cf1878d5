//! Angular averaging over the unit three-sphere in momentum space.
//!
//! A product of `2k` momentum components averaged over directions is a sum
//! over perfect pairings:
//!
//! ```text
//!   < p_{a1} ... p_{a_2k} >  =  (p^2)^k / (2^k (k+1)!) * sum_pairings prod delta
//! ```
//!
//! valid in four Euclidean dimensions (`k = 1` gives the familiar
//! `p_a p_b -> p^2 delta_ab / 4`).  Odd products average to zero.  The
//! pairing formula holds verbatim for repeated labels, so no precondition
//! beyond the engine-wide two-occurrence rule is needed.

use crate::error::{CalcError, Result};
use crate::expr::Expr;
use crate::index::Index;
use num::bigint::BigInt;
use num::rational::BigRational;

/// Largest supported open-momentum degree.
pub const MAX_ANGULAR_DEGREE: usize = 8;

/// All perfect pairings of the slots `0..len`, as index-pair lists.
pub(crate) fn pairings(len: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(len % 2 == 0);
    if len == 0 {
        return vec![Vec::new()];
    }
    // Pair slot 0 with each other slot; recurse on the remainder.
    let mut out = Vec::new();
    for partner in 1..len {
        let rest: Vec<usize> = (1..len).filter(|&x| x != partner).collect();
        for sub in pairings(len - 2) {
            let mut pairing = vec![(0usize, partner)];
            for (x, y) in sub {
                pairing.push((rest[x], rest[y]));
            }
            out.push(pairing);
        }
    }
    out
}

/// `1 / (2^k (k+1)!)` as an exact rational.
fn pairing_weight(k: usize) -> BigRational {
    let mut denom = BigInt::from(1);
    for j in 1..=(k as i64 + 1) {
        denom *= BigInt::from(j);
    }
    denom *= BigInt::from(2).pow(k as u32);
    BigRational::new(BigInt::from(1), denom)
}

/// Replace every open momentum product by its sphere average.
///
/// Terms with an odd number of open momenta vanish.  Each even term of
/// degree `2k` becomes a sum over pairings with the momentum square folded
/// into the kernel and the weight `1/(2^k (k+1)!)` per pairing.
pub fn angular_average(expr: &Expr) -> Result<Expr> {
    let mut out = Expr::zero();
    for t in &expr.terms {
        let n = t.p_open.len();
        if n == 0 {
            out.terms.push(t.clone());
            continue;
        }
        if n % 2 == 1 {
            continue;
        }
        if n > MAX_ANGULAR_DEGREE {
            return Err(CalcError::AngularDegree(n, MAX_ANGULAR_DEGREE));
        }
        let k = n / 2;
        let weight = pairing_weight(k);
        let labels: Vec<Index> = t.p_open.clone();
        for pairing in pairings(n) {
            let mut branch = t.clone();
            branch.p_open.clear();
            branch.kernel.u_pow += k as i64;
            branch.coeff = branch.coeff.scale(&weight);
            for (i, j) in pairing {
                branch.etas.push((labels[i], labels[j]));
            }
            out.terms.push(branch);
        }
    }
    Ok(out)
}
