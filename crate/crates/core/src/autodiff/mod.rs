//! Reverse-mode automatic differentiation over dense `f32`/`f64` arrays, plus Adam.

mod adam;
mod check;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use check::finite_diff_check;
pub use params::{Gradients, Param, ParamGroup, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
