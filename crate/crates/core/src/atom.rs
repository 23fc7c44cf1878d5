//! The alphabet of word atoms.
//!
//! A term's operator/field content is an ordered word of atoms.  Operator
//! atoms (`Partial`, `CovD`, `BoxOp`) act on everything to their right and
//! disappear under evaluation-on-1; field atoms (`Gauge`, `Strength`,
//! `SigmaF`, `Regulator`, `GaugeParam`) are matrix-valued functions of
//! position and therefore never commute past each other, in either product
//! regime.  Each field atom carries a multiset of applied partial
//! derivatives and a shift marker used by the deformed product, where every
//! symbol is evaluated at the translated point `x - (1/2) Theta p`.

use crate::index::{DerivSet, Index};
use serde::Serialize;
use std::fmt;

/// One letter of a term's word.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum WordAtom {
    /// Open partial derivative operator acting to the right.
    Partial(Index),
    /// Gauge-covariant derivative operator `D = d + i e A`.
    CovD(Index),
    /// Covariant Laplacian `D^a D_a`.
    BoxOp,
    /// Gauge potential component `A_index` with applied derivatives.
    Gauge {
        index: Index,
        derivs: DerivSet,
        shifted: bool,
    },
    /// Field strength `F_{first second}` with applied derivatives.
    Strength {
        first: Index,
        second: Index,
        derivs: DerivSet,
        shifted: bool,
    },
    /// Spin block `sigma . F` (half the commutator of gammas contracted
    /// with the field strength), kept opaque until the spinor trace.
    SigmaF { derivs: DerivSet, shifted: bool },
    /// Central scalar regulator insertion `f`.
    Regulator { derivs: DerivSet, shifted: bool },
    /// Gauge-transformation parameter `chi`.
    GaugeParam { derivs: DerivSet, shifted: bool },
}

impl WordAtom {
    /// Plain gauge potential `A_index`.
    pub fn gauge(index: Index) -> Self {
        WordAtom::Gauge {
            index,
            derivs: DerivSet::empty(),
            shifted: false,
        }
    }

    /// Plain field strength `F_{a b}`.
    pub fn strength(first: Index, second: Index) -> Self {
        WordAtom::Strength {
            first,
            second,
            derivs: DerivSet::empty(),
            shifted: false,
        }
    }

    /// Plain spin block.
    pub fn sigma_f() -> Self {
        WordAtom::SigmaF {
            derivs: DerivSet::empty(),
            shifted: false,
        }
    }

    /// Plain regulator insertion.
    pub fn regulator() -> Self {
        WordAtom::Regulator {
            derivs: DerivSet::empty(),
            shifted: false,
        }
    }

    /// Plain gauge parameter.
    pub fn gauge_param() -> Self {
        WordAtom::GaugeParam {
            derivs: DerivSet::empty(),
            shifted: false,
        }
    }

    /// True for atoms that act as operators (vanish on the constant 1 unless
    /// expanded first).
    pub fn is_operator(&self) -> bool {
        matches!(
            self,
            WordAtom::Partial(_) | WordAtom::CovD(_) | WordAtom::BoxOp
        )
    }

    /// True for position-dependent field atoms.
    pub fn is_field(&self) -> bool {
        !self.is_operator()
    }

    /// The derivative multiset of a field atom, if any.
    pub fn derivs(&self) -> Option<&DerivSet> {
        match self {
            WordAtom::Gauge { derivs, .. }
            | WordAtom::Strength { derivs, .. }
            | WordAtom::SigmaF { derivs, .. }
            | WordAtom::Regulator { derivs, .. }
            | WordAtom::GaugeParam { derivs, .. } => Some(derivs),
            _ => None,
        }
    }

    /// Apply one more partial derivative to a field atom.
    /// Panics on operator atoms: callers must expand those first.
    pub fn apply_derivative(&self, idx: Index) -> WordAtom {
        let mut out = self.clone();
        match &mut out {
            WordAtom::Gauge { derivs, .. }
            | WordAtom::Strength { derivs, .. }
            | WordAtom::SigmaF { derivs, .. }
            | WordAtom::Regulator { derivs, .. }
            | WordAtom::GaugeParam { derivs, .. } => derivs.push(idx),
            _ => panic!("cannot differentiate an operator atom in place"),
        }
        out
    }

    /// The shift marker of a field atom.
    pub fn shifted(&self) -> Option<bool> {
        match self {
            WordAtom::Gauge { shifted, .. }
            | WordAtom::Strength { shifted, .. }
            | WordAtom::SigmaF { shifted, .. }
            | WordAtom::Regulator { shifted, .. }
            | WordAtom::GaugeParam { shifted, .. } => Some(*shifted),
            _ => None,
        }
    }

    /// Copy with the shift marker set as given (field atoms only).
    pub fn with_shift(&self, flag: bool) -> WordAtom {
        let mut out = self.clone();
        match &mut out {
            WordAtom::Gauge { shifted, .. }
            | WordAtom::Strength { shifted, .. }
            | WordAtom::SigmaF { shifted, .. }
            | WordAtom::Regulator { shifted, .. }
            | WordAtom::GaugeParam { shifted, .. } => *shifted = flag,
            _ => panic!("operator atoms carry no shift marker"),
        }
        out
    }

    /// Mass dimension of a field atom (gauge potential 1, strength 2, spin
    /// block 2, scalars 0) plus one per derivative; operators have none here.
    pub fn field_dimension(&self) -> Option<i64> {
        let base = match self {
            WordAtom::Gauge { .. } => 1,
            WordAtom::Strength { .. } | WordAtom::SigmaF { .. } => 2,
            WordAtom::Regulator { .. } | WordAtom::GaugeParam { .. } => 0,
            _ => return None,
        };
        Some(base + self.derivs().map_or(0, |d| d.len() as i64))
    }

    /// All index labels this atom mentions, in slot order: derivatives first
    /// (sorted), then the atom's own indices.
    pub fn indices(&self) -> Vec<Index> {
        let mut out: Vec<Index> = self.derivs().map_or(Vec::new(), |d| d.iter().collect());
        match self {
            WordAtom::Partial(i) | WordAtom::CovD(i) => out.push(*i),
            WordAtom::Gauge { index, .. } => out.push(*index),
            WordAtom::Strength { first, second, .. } => {
                out.push(*first);
                out.push(*second);
            }
            _ => {}
        }
        out
    }

    /// Apply a relabeling map to every index label in the atom.
    pub fn relabel(&self, map: &impl Fn(Index) -> Index) -> WordAtom {
        let mut out = self.clone();
        match &mut out {
            WordAtom::Partial(i) | WordAtom::CovD(i) => *i = map(*i),
            WordAtom::Gauge { index, derivs, .. } => {
                *index = map(*index);
                *derivs = derivs.relabel(map);
            }
            WordAtom::Strength {
                first,
                second,
                derivs,
                ..
            } => {
                *first = map(*first);
                *second = map(*second);
                *derivs = derivs.relabel(map);
            }
            WordAtom::SigmaF { derivs, .. }
            | WordAtom::Regulator { derivs, .. }
            | WordAtom::GaugeParam { derivs, .. } => {
                *derivs = derivs.relabel(map);
            }
            WordAtom::BoxOp => {}
        }
        out
    }
}

impl fmt::Display for WordAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shift_mark = |s: &bool| if *s { "~" } else { "" };
        match self {
            WordAtom::Partial(i) => write!(f, "d[{i}]"),
            WordAtom::CovD(i) => write!(f, "D[{i}]"),
            WordAtom::BoxOp => write!(f, "Box"),
            WordAtom::Gauge {
                index,
                derivs,
                shifted,
            } => write!(f, "{derivs}A{}[{index}]", shift_mark(shifted)),
            WordAtom::Strength {
                first,
                second,
                derivs,
                shifted,
            } => write!(f, "{derivs}F{}[{first},{second}]", shift_mark(shifted)),
            WordAtom::SigmaF { derivs, shifted } => {
                write!(f, "{derivs}sF{}", shift_mark(shifted))
            }
            WordAtom::Regulator { derivs, shifted } => {
                write!(f, "{derivs}f{}", shift_mark(shifted))
            }
            WordAtom::GaugeParam { derivs, shifted } => {
                write!(f, "{derivs}chi{}", shift_mark(shifted))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_count_derivatives() {
        let a = WordAtom::gauge(Index(0)).apply_derivative(Index(1));
        assert_eq!(a.field_dimension(), Some(2));
        let s = WordAtom::strength(Index(0), Index(1));
        assert_eq!(s.field_dimension(), Some(2));
        assert_eq!(WordAtom::BoxOp.field_dimension(), None);
    }

    #[test]
    fn relabel_touches_all_slots() {
        let a = WordAtom::Strength {
            first: Index(0),
            second: Index(1),
            derivs: DerivSet::from_indices(vec![Index(2)]),
            shifted: false,
        };
        let b = a.relabel(&|i| Index(i.0 + 10));
        assert_eq!(b.indices(), vec![Index(12), Index(10), Index(11)]);
    }

    #[test]
    fn display_round_trips_visually() {
        let a = WordAtom::gauge(Index(0)).apply_derivative(Index(1));
        assert_eq!(a.to_string(), "d[nu]A[mu]");
        let s = WordAtom::sigma_f();
        assert_eq!(s.to_string(), "sF");
    }
}
