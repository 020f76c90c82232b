pub mod lattice;
pub mod modular;
pub mod qei;
pub mod search;
pub mod toy;

use qeilab_core::operator::CMatrix;

pub(crate) fn op_norm(m: &CMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}
