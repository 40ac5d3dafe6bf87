//! Whole-line Jacobi and CMV operators, presets, half-line splits and finite truncations.

mod cmv;
mod jacobi;
pub mod presets;
mod seq;
mod truncate;

pub use cmv::{make_cmv, theta, Block, CmvHalfLine, VerblunskyCoeffs};
pub use jacobi::{make_jacobi, HalfLine, JacobiCoeffs, TailInfo, PROBE_RADIUS};
pub use seq::{Generator, Periodic, Sequence};
pub(crate) use seq::lcm;
pub use truncate::{truncate, TruncatedCmv, TruncatedJacobi, TruncatedOperator};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub enum OperatorModel<T> {
    Jacobi(JacobiCoeffs<T>),
    Cmv(VerblunskyCoeffs<T>),
}

impl<T> From<JacobiCoeffs<T>> for OperatorModel<T> {
    fn from(j: JacobiCoeffs<T>) -> Self {
        OperatorModel::Jacobi(j)
    }
}

impl<T> From<VerblunskyCoeffs<T>> for OperatorModel<T> {
    fn from(c: VerblunskyCoeffs<T>) -> Self {
        OperatorModel::Cmv(c)
    }
}
