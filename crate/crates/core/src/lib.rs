#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoherence;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod oracle;
pub mod presets;
pub mod quadrature;
pub mod sampling;
pub mod spectral;
