//! Matrix-free solvers for the complex Toeplitz-plus-diagonal systems produced
//! by linearly implicit schemes for Riesz fractional nonlinear Schrödinger
//! equations in one and two space dimensions.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`. Analysis and experiment drivers are
//! `f64` only.

pub mod analysis;
pub mod block;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod precond;
pub mod scalar;
pub mod scheme;
pub mod solvers;
pub mod stencil;
pub mod structured;
pub mod trig;

pub use error::{Error, Result};
pub use scalar::Real;
pub use stencil::{centered_coeffs, tail_bound, FractionalOrder};

pub type Complex64 = num_complex::Complex<f64>;

pub type Coeffs = stencil::StencilCoeffs<f64>;
pub type SineTransform = trig::SineTransformPlan<f64>;
pub type Toeplitz = structured::ToeplitzOp<f64>;
pub type Toeplitz2 = structured::Toeplitz2Op<f64>;
pub type Tau = structured::TauOp<f64>;
pub type Circulant = structured::CirculantOp<f64>;
pub type Diagonal = structured::DiagonalBlock<f64>;
pub type Operator = structured::FractionalToeplitz<f64>;
pub type BlockVec = block::BlockVector<f64>;
pub type System = block::BlockSystem<f64>;
pub type TauPrecond = precond::TauPreconditioner<f64>;
pub type CirculantPrecond = precond::CirculantPreconditioner<f64>;
pub type Grid = scheme::GridSpec;
pub type State = scheme::StateField<f64>;
