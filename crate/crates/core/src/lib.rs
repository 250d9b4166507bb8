//! Capacities, error bounds and reliability exponents of classical-quantum
//! channels, with square-root-measurement decoding and Gaussian bosonic
//! channels.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decode;
pub mod error;
pub mod gaussian;
pub mod info;
pub mod io;
pub mod linalg;
pub mod numeric;
pub mod qstate;
pub mod reliability;

pub use decode::{Codebook, Decoder, ExperimentConfig, ExperimentRecord, ExperimentReport, GramMatrix, TypicalProjector};
pub use error::{Error, Result};
pub use gaussian::{ModeSpec, NoiseSpectrum, WaterFillingResult};
pub use info::{CapacityResult, ChannelCq};
pub use linalg::{CMatrix, CVector};
pub use qstate::{DecisionRule, DensityMatrix, Ensemble, Letter, PureState, Tolerances};
pub use reliability::{ExponentCurve, Regime};
