//! Pansharpening methods.
//!
//! Every method takes the low-resolution cube, the co-registered
//! panchromatic image at `ratio` times the cube's grid, and the sensor
//! model, and returns a fused cube on the panchromatic grid.
//!
//! Three families are implemented. Component substitution (`gsa`, `bt-h`,
//! `bdsd-pc`, `pracs`) builds a spectrally weighted intensity, equalises
//! the panchromatic image against it and injects the difference with
//! per-band gains. Multiresolution analysis (`mtf-glp-fs`, `mtf-glp-hpm`,
//! `mtf-glp-hpm-r`, `awlp`, `mf`) extracts the panchromatic spatial detail
//! with a low-pass pyramid matched to the sensor and injects it additively
//! or proportionally. The variational method (`tv`) minimises a data-fit
//! plus total-variation objective. `exp` is plain interpolation and serves
//! as the baseline every other method must beat.
//!
//! All methods share one degenerate-input rule: a panchromatic image with
//! no dynamic range carries no spatial detail, so they return the
//! interpolated cube unchanged.

mod cs;
mod mra;
mod tv;

pub use cs::{bdsd_pc, bt_h, exp, gsa, pracs};
pub use mra::{atrous_smooth, awlp, glp_lowpass, mf, mtf_glp_fs, mtf_glp_hpm, mtf_glp_hpm_r};
pub use tv::{tv_pansharpen, TvOptions};

use std::collections::BTreeMap;
use std::time::Instant;

use crate::cube::{FusionResult, ImageCube, PanImage, Plane, SensorModel};
use crate::error::{Error, Result};
use crate::resample::{ideal_interp, pan_downgrade};
use crate::solve::{lsq_with_intercept, LsqFit};

/// Canonical lowercase names accepted by [`run_method`], in presentation
/// order.
pub const METHOD_NAMES: [&str; 11] = [
    "exp",
    "gsa",
    "bt-h",
    "bdsd-pc",
    "pracs",
    "mtf-glp-fs",
    "mtf-glp-hpm",
    "mtf-glp-hpm-r",
    "awlp",
    "mf",
    "tv",
];

/// Names reserved for methods that are planned but not implemented.
pub const RESERVED_NAMES: [&str; 2] = ["hysure", "sr-d"];

/// Runs a fusion method by name (case-insensitive). Unknown names list the
/// available methods; reserved names explain their status.
pub fn run_method(
    name: &str,
    hs: &ImageCube,
    pan: &PanImage,
    sensor: &SensorModel,
) -> Result<FusionResult> {
    match name.to_ascii_lowercase().as_str() {
        "exp" => exp(hs, pan, sensor),
        "gsa" => gsa(hs, pan, sensor),
        "bt-h" => bt_h(hs, pan, sensor),
        "bdsd-pc" => bdsd_pc(hs, pan, sensor),
        "pracs" => pracs(hs, pan, sensor),
        "mtf-glp-fs" => mtf_glp_fs(hs, pan, sensor),
        "mtf-glp-hpm" => mtf_glp_hpm(hs, pan, sensor),
        "mtf-glp-hpm-r" => mtf_glp_hpm_r(hs, pan, sensor),
        "awlp" => awlp(hs, pan, sensor),
        "mf" => mf(hs, pan, sensor),
        "tv" => tv_pansharpen(hs, pan, sensor, &TvOptions::default()),
        r if RESERVED_NAMES.contains(&r) => Err(Error::Unknown(format!(
            "method '{r}' is reserved for a future release and not implemented"
        ))),
        other => Err(Error::Unknown(format!(
            "unknown method '{other}'; available: {}",
            METHOD_NAMES.join(", ")
        ))),
    }
}

/// Display name (uppercase convention) for a canonical method name.
pub fn display_name(name: &str) -> String {
    match name.to_ascii_lowercase().as_str() {
        "exp" => "EXP".into(),
        "gsa" => "GSA".into(),
        "bt-h" => "BT-H".into(),
        "bdsd-pc" => "BDSD-PC".into(),
        "pracs" => "PRACS".into(),
        "mtf-glp-fs" => "MTF-GLP-FS".into(),
        "mtf-glp-hpm" => "MTF-GLP-HPM".into(),
        "mtf-glp-hpm-r" => "MTF-GLP-HPM-R".into(),
        "awlp" => "AWLP".into(),
        "mf" => "MF".into(),
        "tv" => "TV".into(),
        other => other.to_ascii_uppercase(),
    }
}

pub(crate) fn check_geometry(
    hs: &ImageCube,
    pan: &PanImage,
    sensor: &SensorModel,
) -> Result<()> {
    sensor.validate()?;
    if pan.height() != hs.height() * sensor.ratio || pan.width() != hs.width() * sensor.ratio {
        return Err(Error::dim(format!(
            "panchromatic {}x{} is not {}x the {}x{} cube",
            pan.height(),
            pan.width(),
            sensor.ratio,
            hs.height(),
            hs.width()
        )));
    }
    Ok(())
}

/// Whether a plane has no usable dynamic range.
pub(crate) fn is_effectively_constant(plane: &Plane) -> bool {
    let (mn, mx) = (plane.min(), plane.max());
    mx - mn <= 1e-12 * mx.abs().max(mn.abs()).max(1.0)
}

/// Shared entry stage: validates geometry, interpolates the cube to the
/// panchromatic grid, and resolves the flat-panchromatic degenerate case.
pub(crate) enum Prepared {
    /// The panchromatic image carries no detail; the finished result is the
    /// interpolated cube.
    Flat(FusionResult),
    /// Proceed with fusion on the interpolated cube.
    Go { up: ImageCube, started: Instant },
}

pub(crate) fn prepare(
    hs: &ImageCube,
    pan: &PanImage,
    sensor: &SensorModel,
    method: &str,
) -> Result<Prepared> {
    check_geometry(hs, pan, sensor)?;
    let started = Instant::now();
    let up = ideal_interp(hs, sensor.ratio)?;
    if is_effectively_constant(pan.plane()) {
        let mut params = base_params(sensor);
        params.insert(
            "note".into(),
            "flat panchromatic input; returned the interpolated cube".into(),
        );
        return Ok(Prepared::Flat(finish(up, method, params, started)));
    }
    Ok(Prepared::Go { up, started })
}

pub(crate) fn base_params(sensor: &SensorModel) -> BTreeMap<String, String> {
    let mut params = BTreeMap::new();
    params.insert("ratio".into(), sensor.ratio.to_string());
    params
}

pub(crate) fn finish(
    cube: ImageCube,
    method: &str,
    params: BTreeMap<String, String>,
    started: Instant,
) -> FusionResult {
    FusionResult {
        cube,
        method: display_name(method),
        params,
        runtime_s: started.elapsed().as_secs_f64(),
    }
}

/// Spectral weights of the panchromatic image over the cube's bands,
/// estimated where both are defined: the panchromatic image is degraded to
/// the cube's grid and regressed (with intercept) on the original bands.
pub fn estimate_weights_lsq(
    hs: &ImageCube,
    pan: &PanImage,
    sensor: &SensorModel,
) -> Result<LsqFit> {
    check_geometry(hs, pan, sensor)?;
    let pan_d = pan_downgrade(pan.plane(), sensor)?;
    let planes = hs.to_planes();
    let columns: Vec<&[f64]> = planes.iter().map(|p| p.as_slice()).collect();
    lsq_with_intercept(&columns, pan_d.as_slice())
}

/// Weighted band combination `sum_b w_b * planes[b] + bias`.
pub(crate) fn intensity_plane(planes: &[Plane], weights: &[f64], bias: f64) -> Result<Plane> {
    if planes.is_empty() || planes.len() != weights.len() {
        return Err(Error::dim("weight count does not match band count"));
    }
    let mut acc = vec![bias; planes[0].len()];
    for (plane, &w) in planes.iter().zip(weights) {
        for (a, &v) in acc.iter_mut().zip(plane.as_slice()) {
            *a += w * v;
        }
    }
    Plane::new(planes[0].height(), planes[0].width(), acc)
}

/// Affine rescaling of `source` to the target mean and standard deviation.
/// Returns `None` when the source has no variance to rescale.
pub fn moment_match(source: &Plane, target_mean: f64, target_std: f64) -> Option<Plane> {
    let m = crate::cube::mean(source.as_slice());
    let v = crate::cube::variance(source.as_slice());
    if v <= 0.0 {
        return None;
    }
    let scale = target_std / v.sqrt();
    Some(source.map(|x| (x - m) * scale + target_mean))
}

/// Panchromatic image equalised to the intensity plane's first two moments.
pub(crate) fn equalized_pan(pan: &Plane, intensity: &Plane) -> Result<Plane> {
    let m = crate::cube::mean(intensity.as_slice());
    let s = crate::cube::variance(intensity.as_slice()).sqrt();
    moment_match(pan, m, s)
        .ok_or_else(|| Error::degenerate("panchromatic image has no variance to equalise"))
}

/// Fused planes reassembled into a cube carrying the source wavelengths.
pub(crate) fn cube_like(src: &ImageCube, planes: &[Plane]) -> Result<ImageCube> {
    ImageCube::from_planes(planes, src.wavelengths_nm().map(|w| w.to_vec()))
}
