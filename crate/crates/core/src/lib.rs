//! Fault location on mixed overhead/underground-cable transmission lines.
//!
//! The crate is a staged pipeline:
//!
//! 1. [`netmodel`] describes the two-source mixed line and its sequence impedances.
//! 2. [`relaysim`] solves single-line-to-ground faults, synthesizes relay waveforms,
//!    estimates phasors and produces the apparent-impedance trajectory.
//! 3. [`rxplot`] rasterizes the trajectory and a mho zone onto an R-X image.
//! 4. [`texture`] extracts GLCM statistics into a 20-slot feature vector.
//! 5. [`regress`] trains the 19 regression variants and cross-validates them.
//! 6. [`evalkit`] computes RMSE and percentage error and builds the reports.
//! 7. [`pipeline`] wires everything into a config-driven experiment.

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops mirror
// the matrix notation of the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod evalkit;
pub mod netmodel;
pub mod pipeline;
pub mod regress;
pub mod relaysim;
pub mod rxplot;
pub mod texture;

pub use error::{Error, Result};
pub use evalkit::{EvalReport, EvalRow};
pub use netmodel::{ComplexValue, LineSection, MixedLine, NetworkModel, SectionKind, SourceModel};
pub use regress::{Dataset, FittedModel, RegressorSpec, Variant};
pub use relaysim::{FaultScenario, FaultSolution, ImpedanceTrajectory, RelayRecord};
pub use rxplot::{CanvasSpec, GrayImage};
pub use texture::{FeatureVector, Glcm};
