//! Hyperspectral pansharpening toolkit.
//!
//! The crate covers the full classical sharpening workflow:
//!
//! * [`cube`] — raster types (`ImageCube`, `PanImage`, `Plane`), the sensor
//!   description and population statistics;
//! * [`resample`] — interpolation, MTF-shaped degradation filters and the
//!   reduced-resolution evaluation protocol;
//! * [`fusion`] — component-substitution, multiresolution-analysis and
//!   variational sharpeners behind a string-keyed registry;
//! * [`metrics`] — reference-based (ERGAS, SAM, Q2n) and no-reference
//!   (spectral/spatial distortion, hybrid quality) scores;
//! * [`synth`] — a deterministic synthetic scene generator producing
//!   physically consistent hyperspectral/panchromatic pairs;
//! * [`io`] — a raw band-sequential on-disk format with a JSON sidecar, plus
//!   the benchmark campaign configuration.
//!
//! Heavy loops are data-parallel over rayon when the default `parallel`
//! feature is enabled and fall back to equivalent sequential code without
//! it; results are identical either way.

pub mod cube;
pub mod error;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod resample;
pub mod solve;
pub mod synth;

mod parallel;

pub use cube::{
    global_stats, FusionResult, GlobalStats, ImageCube, PanImage, Plane, SensorModel,
    SubspaceModel,
};
pub use error::{Error, Result};
