//! Multiresolution-analysis methods: the panchromatic spatial detail is the
//! difference between the panchromatic image and a low-pass version whose
//! passband mimics the hyperspectral sensor. The detail is injected into
//! each interpolated band either additively with regression gains or
//! multiplicatively (high-pass modulation).

use super::{base_params, cube_like, finish, prepare, Prepared};
use crate::cube::{
    covariance, mean, variance, FusionResult, ImageCube, PanImage, Plane, SensorModel,
};
use crate::error::{Error, Result};
use crate::parallel::{for_each_chunk_mut, map_indices};
use crate::resample::{centre_phase, decimate, filter_separable, interp_plane, mtf_gaussian};

/// A panchromatic image split into its sensor-matched low-pass component
/// and the residual spatial detail; `lowpass + detail` reconstructs the
/// input exactly.
pub struct PanDetail {
    pub lowpass: Plane,
    pub detail: Plane,
}

/// Generalised Laplacian pyramid low-pass: the panchromatic image is
/// filtered with the hyperspectral MTF Gaussian (mean gain over bands),
/// decimated to the coarse grid and re-interpolated. Dimensions must be
/// divisible by the resolution ratio.
pub fn glp_lowpass(pan: &Plane, sensor: &SensorModel) -> Result<PanDetail> {
    sensor.validate()?;
    let ratio = sensor.ratio;
    if pan.height() % ratio != 0 || pan.width() % ratio != 0 {
        return Err(Error::dim(format!(
            "{}x{} panchromatic image not divisible by ratio {ratio}",
            pan.height(),
            pan.width()
        )));
    }
    let gain = mean(&sensor.hs_mtf_gain);
    let kernel = mtf_gaussian(gain, ratio, sensor.kernel_taps)?;
    let filtered = filter_separable(pan, &kernel)?;
    let coarse = decimate(&filtered, ratio, centre_phase(ratio))?;
    let lowpass = interp_plane(&coarse, ratio)?;
    let detail = pan.zip_map(&lowpass, |p, l| p - l)?;
    Ok(PanDetail { lowpass, detail })
}

/// Additive detail injection with full-scale regression gains: each band's
/// gain is its regression coefficient on the panchromatic low-pass, the
/// band's best linear proxy at the original resolution.
pub fn mtf_glp_fs(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "mtf-glp-fs")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let pd = glp_lowpass(pan.plane(), sensor)?;
    let var_lp = variance(pd.lowpass.as_slice());
    if var_lp <= 0.0 {
        return Err(Error::degenerate(
            "panchromatic low-pass is constant; regression gains undefined",
        ));
    }
    let planes = up.to_planes();
    let fused = map_indices(planes.len(), |b| -> Result<Plane> {
        let gain = covariance(planes[b].as_slice(), pd.lowpass.as_slice()) / var_lp;
        planes[b].zip_map(&pd.detail, |v, d| v + gain * d)
    });
    let fused: Vec<Plane> = fused.into_iter().collect::<Result<_>>()?;
    let params = base_params(sensor);
    Ok(finish(cube_like(&up, &fused)?, "mtf-glp-fs", params, started))
}

/// Multiplicative (high-pass modulation) injection shared by the Gaussian
/// and morphological pyramids: each band is multiplied by the ratio of the
/// band-equalised panchromatic image to its band-equalised low-pass. The
/// equalisation is the affine map matching the panchromatic moments to the
/// band's; applying the same map to the low-pass keeps the ratio at one in
/// flat areas. Pixels where the equalised low-pass vanishes keep their
/// interpolated value.
fn hpm_inject(
    up: &ImageCube,
    pan: &Plane,
    lowpass: &Plane,
    affine: impl Fn(&Plane, &Plane) -> (f64, f64) + Sync,
) -> Result<Vec<Plane>> {
    let planes = up.to_planes();
    let fused = map_indices(planes.len(), |b| -> Result<Plane> {
        let (scale, offset) = affine(&planes[b], lowpass);
        let p_b = pan.map(|p| scale * p + offset);
        let lp_b = lowpass.map(|l| scale * l + offset);
        let eps = 1e-6 * p_b.dynamic_range().max(f64::MIN_POSITIVE);
        let mut out = Vec::with_capacity(planes[b].len());
        for ((&v, &num), &den) in planes[b]
            .as_slice()
            .iter()
            .zip(p_b.as_slice())
            .zip(lp_b.as_slice())
        {
            let factor = if den.abs() <= eps { 1.0 } else { num / den };
            out.push(v * factor);
        }
        Plane::new(planes[b].height(), planes[b].width(), out)
    });
    fused.into_iter().collect()
}

/// High-pass modulation over the Gaussian pyramid with moment-matched
/// equalisation: the panchromatic image is mapped to each band's mean and
/// standard deviation before taking the modulation ratio.
pub fn mtf_glp_hpm(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "mtf-glp-hpm")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let pd = glp_lowpass(pan.plane(), sensor)?;
    let pan_mean = mean(pan.plane().as_slice());
    let pan_std = variance(pan.plane().as_slice()).sqrt();
    let fused = hpm_inject(&up, pan.plane(), &pd.lowpass, |band, _| {
        let scale = variance(band.as_slice()).sqrt() / pan_std;
        (scale, mean(band.as_slice()) - scale * pan_mean)
    })?;
    let params = base_params(sensor);
    Ok(finish(cube_like(&up, &fused)?, "mtf-glp-hpm", params, started))
}

/// High-pass modulation with regression-based equalisation: the affine map
/// comes from regressing each band on the panchromatic low-pass, which is
/// more robust than moment matching when band and panchromatic contrasts
/// disagree. A constant band gets slope zero and passes through unchanged.
pub fn mtf_glp_hpm_r(
    hs: &ImageCube,
    pan: &PanImage,
    sensor: &SensorModel,
) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "mtf-glp-hpm-r")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let pd = glp_lowpass(pan.plane(), sensor)?;
    let var_lp = variance(pd.lowpass.as_slice());
    if var_lp <= 0.0 {
        return Err(Error::degenerate(
            "panchromatic low-pass is constant; regression gains undefined",
        ));
    }
    let lp_mean = mean(pd.lowpass.as_slice());
    let fused = hpm_inject(&up, pan.plane(), &pd.lowpass, |band, lowpass| {
        let slope = covariance(band.as_slice(), lowpass.as_slice()) / var_lp;
        (slope, mean(band.as_slice()) - slope * lp_mean)
    })?;
    let params = base_params(sensor);
    Ok(finish(cube_like(&up, &fused)?, "mtf-glp-hpm-r", params, started))
}

// ---------------------------------------------------------------------------
// Stationary wavelet (a-trous) machinery
// ---------------------------------------------------------------------------

/// One level of the stationary wavelet smoothing: the cubic B-spline kernel
/// `[1, 4, 6, 4, 1] / 16` applied along rows and columns with its taps
/// spread `2^level` samples apart (mirrored boundary).
pub fn atrous_smooth(plane: &Plane, level: usize) -> Result<Plane> {
    const TAPS: [f64; 5] = [1.0 / 16.0, 0.25, 0.375, 0.25, 1.0 / 16.0];
    let s = 1usize << level;
    let (h, w) = (plane.height(), plane.width());
    if 2 * s >= h || 2 * s >= w {
        return Err(Error::dim(format!(
            "level-{level} smoothing reach {} does not fit a {h}x{w} plane",
            2 * s
        )));
    }
    let offsets = [-2 * s as isize, -(s as isize), 0, s as isize, 2 * s as isize];
    let mirror = |idx: isize, n: usize| -> usize {
        let m = if idx < 0 {
            -idx
        } else if idx as usize >= n {
            2 * (n as isize - 1) - idx
        } else {
            idx
        };
        m as usize
    };

    let src = plane.as_slice();
    let mut rowpass = vec![0.0; h * w];
    for_each_chunk_mut(&mut rowpass, w, |r, out_row| {
        let row = &src[r * w..(r + 1) * w];
        for (c, o) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (&off, &t) in offsets.iter().zip(&TAPS) {
                acc += t * row[mirror(c as isize + off, w)];
            }
            *o = acc;
        }
    });
    let mut out = vec![0.0; h * w];
    for_each_chunk_mut(&mut out, w, |r, out_row| {
        for (&off, &t) in offsets.iter().zip(&TAPS) {
            let rr = mirror(r as isize + off, h);
            let src_row = &rowpass[rr * w..(rr + 1) * w];
            for (o, &v) in out_row.iter_mut().zip(src_row) {
                *o += t * v;
            }
        }
    });
    Plane::new(h, w, out)
}

/// Number of dyadic decomposition levels covering a resolution ratio.
pub fn wavelet_levels(ratio: usize) -> usize {
    (ratio as f64).log2().ceil() as usize
}

/// Additive wavelet injection proportional to the spectrum: the stationary
/// wavelet detail of the panchromatic image (scaled to each band's
/// contrast) is distributed across bands in proportion to each band's share
/// of the mean spectrum, preserving the spectral shape. Pixels with a
/// vanishing mean spectrum receive no detail.
pub fn awlp(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "awlp")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let levels = wavelet_levels(sensor.ratio);
    let mut approx = pan.plane().clone();
    for j in 0..levels {
        approx = atrous_smooth(&approx, j)?;
    }
    let detail = pan.plane().zip_map(&approx, |p, a| p - a)?;

    let planes = up.to_planes();
    let bands = planes.len() as f64;
    let mut spectrum_mean = vec![0.0; planes[0].len()];
    for plane in &planes {
        for (m, &v) in spectrum_mean.iter_mut().zip(plane.as_slice()) {
            *m += v / bands;
        }
    }
    let spectrum_mean = Plane::new(planes[0].height(), planes[0].width(), spectrum_mean)?;
    let scale_guard = spectrum_mean
        .as_slice()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-9 * scale_guard.max(f64::MIN_POSITIVE);

    let pan_std = variance(pan.plane().as_slice()).sqrt();
    let fused = map_indices(planes.len(), |b| -> Result<Plane> {
        let band_scale = variance(planes[b].as_slice()).sqrt() / pan_std;
        let mut out = Vec::with_capacity(planes[b].len());
        for ((&v, &m), &d) in planes[b]
            .as_slice()
            .iter()
            .zip(spectrum_mean.as_slice())
            .zip(detail.as_slice())
        {
            if m.abs() <= eps {
                out.push(v);
            } else {
                out.push(v + v / m * band_scale * d);
            }
        }
        Plane::new(planes[b].height(), planes[b].width(), out)
    });
    let fused: Vec<Plane> = fused.into_iter().collect::<Result<_>>()?;
    let mut params = base_params(sensor);
    params.insert("wavelet_levels".into(), levels.to_string());
    Ok(finish(cube_like(&up, &fused)?, "awlp", params, started))
}

// ---------------------------------------------------------------------------
// Morphological machinery
// ---------------------------------------------------------------------------

fn morph_pass(plane: &Plane, spacing: usize, take_min: bool) -> Result<Plane> {
    let (h, w) = (plane.height(), plane.width());
    if spacing >= h || spacing >= w {
        return Err(Error::dim(format!(
            "structuring element spacing {spacing} does not fit a {h}x{w} plane"
        )));
    }
    let s = spacing as isize;
    let mirror = |idx: isize, n: usize| -> usize {
        let m = if idx < 0 {
            -idx
        } else if idx as usize >= n {
            2 * (n as isize - 1) - idx
        } else {
            idx
        };
        m as usize
    };
    let pick = if take_min { f64::min } else { f64::max };

    // A square structuring element separates into a row pass and a column
    // pass over offsets {-s, 0, s}.
    let src = plane.as_slice();
    let mut rowpass = vec![0.0; h * w];
    for_each_chunk_mut(&mut rowpass, w, |r, out_row| {
        let row = &src[r * w..(r + 1) * w];
        for (c, o) in out_row.iter_mut().enumerate() {
            let a = row[mirror(c as isize - s, w)];
            let b = row[c];
            let d = row[mirror(c as isize + s, w)];
            *o = pick(pick(a, b), d);
        }
    });
    let mut out = vec![0.0; h * w];
    for_each_chunk_mut(&mut out, w, |r, out_row| {
        let up_row = &rowpass[mirror(r as isize - s, h) * w..mirror(r as isize - s, h) * w + w];
        let mid_row = &rowpass[r * w..(r + 1) * w];
        let dn_row = &rowpass[mirror(r as isize + s, h) * w..mirror(r as isize + s, h) * w + w];
        for (((o, &a), &b), &d) in out_row.iter_mut().zip(up_row).zip(mid_row).zip(dn_row) {
            *o = pick(pick(a, b), d);
        }
    });
    Plane::new(h, w, out)
}

/// Grey-scale erosion with a 3x3 square structuring element whose taps sit
/// `spacing` samples apart (mirrored boundary).
pub fn morph_erode(plane: &Plane, spacing: usize) -> Result<Plane> {
    morph_pass(plane, spacing, true)
}

/// Grey-scale dilation, the max-counterpart of [`morph_erode`].
pub fn morph_dilate(plane: &Plane, spacing: usize) -> Result<Plane> {
    morph_pass(plane, spacing, false)
}

/// Morphological half-gradient pyramid: each level replaces the current
/// approximation by the average of its erosion and dilation at doubling
/// spacing, a nonlinear low-pass that flattens texture while keeping
/// region boundaries sharp.
pub fn morph_lowpass(pan: &Plane, levels: usize) -> Result<Plane> {
    let mut approx = pan.clone();
    for j in 0..levels {
        let spacing = 1usize << j;
        let eroded = morph_erode(&approx, spacing)?;
        let dilated = morph_dilate(&approx, spacing)?;
        approx = eroded.zip_map(&dilated, |e, d| 0.5 * (e + d))?;
    }
    Ok(approx)
}

/// High-pass modulation over the morphological pyramid. Morphological
/// operators commute with positive affine maps, so the same moment-matched
/// equalisation as the Gaussian variant applies.
pub fn mf(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "mf")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let levels = wavelet_levels(sensor.ratio);
    let lowpass = morph_lowpass(pan.plane(), levels)?;
    let pan_mean = mean(pan.plane().as_slice());
    let pan_std = variance(pan.plane().as_slice()).sqrt();
    let fused = hpm_inject(&up, pan.plane(), &lowpass, |band, _| {
        let scale = variance(band.as_slice()).sqrt() / pan_std;
        (scale, mean(band.as_slice()) - scale * pan_mean)
    })?;
    let mut params = base_params(sensor);
    params.insert("pyramid_levels".into(), levels.to_string());
    Ok(finish(cube_like(&up, &fused)?, "mf", params, started))
}
