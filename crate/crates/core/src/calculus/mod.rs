//! Discrete calculus on parameter grids.

pub mod field;
pub mod grid;
pub mod stencil;
pub mod tensor;

pub use field::{Chart, Field};
pub use grid::{Axis, ParamGrid};
pub use stencil::{Backend, StencilConfig};
pub use tensor::{
    covariant_derivative, curvature, integrate, integrate_unmasked, laplace_beltrami, levi_civita,
    BundleConnection, Curvature, MetricField, Slot, TensorField,
};
