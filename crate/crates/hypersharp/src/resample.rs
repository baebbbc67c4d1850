//! Spatial resampling: polynomial interpolation between resolution grids,
//! MTF-shaped Gaussian degradation filters, separable filtering with a
//! symmetric boundary, decimation, and the reduced-resolution degradation
//! protocol built from them.
//!
//! Conventions shared by every consumer:
//!
//! * decimation by `ratio` keeps samples at `ratio * i + floor(ratio / 2)`
//!   per axis (centred phase), with output dimensions rounded up over the
//!   sampled grid;
//! * interpolation places input sample `i` at output position
//!   `ratio * i + floor(ratio / 2)`, so decimating an interpolated raster
//!   returns the original samples bit-exactly;
//! * filtering uses mirror-without-repeat boundary extension
//!   (`x[-k] = x[k]`), and all low-pass kernels are normalised to unit DC
//!   gain, so constants pass through every path unchanged.

use crate::cube::{ImageCube, PanImage, Plane, SensorModel};
use crate::error::{Error, Result};
use crate::parallel::{for_each_chunk_mut, map_indices};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// A 1-D filter applied along rows then columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableKernel {
    taps: Vec<f64>,
    normalized: bool,
}

impl SeparableKernel {
    /// Wraps raw taps. The length must be odd so the filter has a centre.
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.len() % 2 == 0 {
            return Err(Error::domain(format!(
                "separable kernel needs an odd number of taps, got {}",
                taps.len()
            )));
        }
        if !taps.iter().all(|t| t.is_finite()) {
            return Err(Error::domain("kernel contains a non-finite tap"));
        }
        let sum: f64 = taps.iter().sum();
        let normalized = (sum - 1.0).abs() < 1e-12;
        Ok(SeparableKernel { taps, normalized })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether the taps sum to one (unit DC gain).
    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Frequency response magnitude at angular frequency `omega` (radians
    /// per sample); the taps are symmetric so the response is real.
    pub fn response_at(&self, omega: f64) -> f64 {
        let half = (self.taps.len() / 2) as isize;
        let mut s = 0.0;
        for (i, &t) in self.taps.iter().enumerate() {
            let n = i as isize - half;
            s += t * (omega * n as f64).cos();
        }
        s
    }
}

/// Standard deviation of the Gaussian whose frequency response passes
/// through `gain_nyquist` at the reduced-grid Nyquist frequency `pi / ratio`.
pub fn gaussian_sigma(gain_nyquist: f64, ratio: usize) -> Result<f64> {
    if !(0.0 < gain_nyquist && gain_nyquist < 1.0) {
        return Err(Error::domain(format!(
            "Nyquist gain {gain_nyquist} outside (0, 1)"
        )));
    }
    if ratio < 2 {
        return Err(Error::domain(format!("ratio {ratio} < 2")));
    }
    Ok(ratio as f64 / std::f64::consts::PI * (-2.0 * gain_nyquist.ln()).sqrt())
}

fn check_degradation_taps(taps: usize, ratio: usize) -> Result<()> {
    if taps % 2 == 0 || taps < 4 * ratio + 1 {
        return Err(Error::domain(format!(
            "degradation filter needs an odd tap count >= {}, got {taps}",
            4 * ratio + 1
        )));
    }
    Ok(())
}

/// Gaussian low-pass kernel matching a sensor MTF gain at Nyquist,
/// normalised to unit DC gain.
pub fn mtf_gaussian(gain_nyquist: f64, ratio: usize, taps: usize) -> Result<SeparableKernel> {
    check_degradation_taps(taps, ratio)?;
    let sigma = gaussian_sigma(gain_nyquist, ratio)?;
    let half = (taps / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|n| (-(n as f64) * (n as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for t in &mut k {
        *t /= sum;
    }
    SeparableKernel::new(k)
}

/// Hamming-windowed sinc low-pass with cutoff `pi / ratio`, normalised to
/// unit DC gain. Used to degrade the panchromatic image, whose optics are
/// close to ideal compared with the spectrometer.
pub fn lowpass_sinc(ratio: usize, taps: usize) -> Result<SeparableKernel> {
    if ratio < 2 {
        return Err(Error::domain(format!("ratio {ratio} < 2")));
    }
    check_degradation_taps(taps, ratio)?;
    let half = (taps / 2) as isize;
    let m = half as f64;
    let mut k: Vec<f64> = (-half..=half)
        .map(|n| {
            let x = n as f64 / ratio as f64;
            let sinc = if n == 0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            let window = 0.54 + 0.46 * (std::f64::consts::PI * n as f64 / m).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for t in &mut k {
        *t /= sum;
    }
    SeparableKernel::new(k)
}

// ---------------------------------------------------------------------------
// Separable filtering (mirror-without-repeat boundary)
// ---------------------------------------------------------------------------

#[inline]
fn mirror(idx: isize, n: usize) -> usize {
    // Whole-sample reflection: x[-k] = x[k], x[n-1+k] = x[n-1-k].
    let m = if idx < 0 {
        -idx
    } else if idx as usize >= n {
        2 * (n as isize - 1) - idx
    } else {
        idx
    };
    debug_assert!(m >= 0 && (m as usize) < n);
    m as usize
}

fn check_kernel_fits(kernel: &SeparableKernel, height: usize, width: usize) -> Result<()> {
    let half = kernel.len() / 2;
    if half >= height || half >= width {
        return Err(Error::dim(format!(
            "{}-tap kernel does not fit a {height}x{width} plane with mirrored boundaries",
            kernel.len()
        )));
    }
    Ok(())
}

fn conv_row(src: &[f64], k: &[f64], out: &mut [f64]) {
    let n = src.len();
    let half = k.len() / 2;
    let interior_end = n.saturating_sub(half);
    for c in 0..half.min(n) {
        let mut s = 0.0;
        for (t, &kt) in k.iter().enumerate() {
            s += kt * src[mirror(c as isize + t as isize - half as isize, n)];
        }
        out[c] = s;
    }
    for c in half..interior_end {
        let window = &src[c - half..c + half + 1];
        let mut s = 0.0;
        for (&kt, &v) in k.iter().zip(window) {
            s += kt * v;
        }
        out[c] = s;
    }
    for c in interior_end.max(half.min(n))..n {
        let mut s = 0.0;
        for (t, &kt) in k.iter().enumerate() {
            s += kt * src[mirror(c as isize + t as isize - half as isize, n)];
        }
        out[c] = s;
    }
}

/// Filters a plane with the same 1-D kernel along rows and then columns,
/// extending the raster by mirror-without-repeat at the boundaries. The
/// kernel half-length must be smaller than both dimensions.
pub fn filter_separable(plane: &Plane, kernel: &SeparableKernel) -> Result<Plane> {
    let (h, w) = (plane.height(), plane.width());
    check_kernel_fits(kernel, h, w)?;
    let k = kernel.taps();
    let half = k.len() / 2;

    // Row pass.
    let mut rowpass = vec![0.0; h * w];
    {
        let src = plane.as_slice();
        for_each_chunk_mut(&mut rowpass, w, |r, out_row| {
            conv_row(&src[r * w..(r + 1) * w], k, out_row);
        });
    }

    // Column pass: each output row accumulates kernel-weighted source rows,
    // which keeps the inner loops contiguous.
    let mut out = vec![0.0; h * w];
    for_each_chunk_mut(&mut out, w, |r, out_row| {
        for (t, &kt) in k.iter().enumerate() {
            let rr = mirror(r as isize + t as isize - half as isize, h);
            let src_row = &rowpass[rr * w..(rr + 1) * w];
            for (o, &v) in out_row.iter_mut().zip(src_row) {
                *o += kt * v;
            }
        }
    });
    Plane::new(h, w, out)
}

/// Exact adjoint of [`filter_separable`] with respect to the standard inner
/// product, mirrored boundary included. Runs sequentially; callers
/// parallelise across bands.
pub fn filter_separable_adjoint(plane: &Plane, kernel: &SeparableKernel) -> Result<Plane> {
    let (h, w) = (plane.height(), plane.width());
    check_kernel_fits(kernel, h, w)?;
    let k = kernel.taps();
    let half = k.len() / 2;

    // Adjoint of the column pass: scatter down columns.
    let src = plane.as_slice();
    let mut colpass = vec![0.0; h * w];
    for r in 0..h {
        for (t, &kt) in k.iter().enumerate() {
            let rr = mirror(r as isize + t as isize - half as isize, h);
            let dst = rr * w;
            let s = r * w;
            for c in 0..w {
                colpass[dst + c] += kt * src[s + c];
            }
        }
    }

    // Adjoint of the row pass: scatter along rows.
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let src_row = &colpass[r * w..(r + 1) * w];
        let out_row = &mut out[r * w..(r + 1) * w];
        for (c, &v) in src_row.iter().enumerate() {
            for (t, &kt) in k.iter().enumerate() {
                out_row[mirror(c as isize + t as isize - half as isize, w)] += kt * v;
            }
        }
    }
    Plane::new(h, w, out)
}

// ---------------------------------------------------------------------------
// Decimation
// ---------------------------------------------------------------------------

/// Keeps samples at `ratio * i + phase` per axis. Output dimensions round up
/// over the sampled grid: `ceil((n - phase) / ratio)`.
pub fn decimate(plane: &Plane, ratio: usize, phase: usize) -> Result<Plane> {
    if ratio < 2 {
        return Err(Error::domain(format!("decimation ratio {ratio} < 2")));
    }
    if phase >= ratio {
        return Err(Error::domain(format!("phase {phase} >= ratio {ratio}")));
    }
    let (h, w) = (plane.height(), plane.width());
    if phase >= h || phase >= w {
        return Err(Error::dim("decimation phase outside the plane"));
    }
    let oh = (h - phase).div_ceil(ratio);
    let ow = (w - phase).div_ceil(ratio);
    let mut data = Vec::with_capacity(oh * ow);
    for i in 0..oh {
        let row = plane.row(phase + ratio * i);
        for j in 0..ow {
            data.push(row[phase + ratio * j]);
        }
    }
    Plane::new(oh, ow, data)
}

/// Adjoint of [`decimate`]: spreads samples back onto the fine grid at
/// `ratio * i + phase`, zeros elsewhere.
pub fn decimate_adjoint(
    plane: &Plane,
    ratio: usize,
    phase: usize,
    out_height: usize,
    out_width: usize,
) -> Result<Plane> {
    let mut data = vec![0.0; out_height * out_width];
    for i in 0..plane.height() {
        let r = phase + ratio * i;
        if r >= out_height {
            return Err(Error::dim("adjoint decimation target too small"));
        }
        for j in 0..plane.width() {
            let c = phase + ratio * j;
            if c >= out_width {
                return Err(Error::dim("adjoint decimation target too small"));
            }
            data[r * out_width + c] = plane.get(i, j);
        }
    }
    Plane::new(out_height, out_width, data)
}

/// Centred decimation phase used across the crate.
pub fn centre_phase(ratio: usize) -> usize {
    ratio / 2
}

// ---------------------------------------------------------------------------
// Polynomial interpolation
// ---------------------------------------------------------------------------

/// Piecewise-cubic interpolation weight (Catmull-Rom family, `a = -1/2`):
/// interpolating, unit DC gain per phase, exact on linear ramps.
#[inline]
fn cubic_weight(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1.0 {
        (1.5 * ax - 2.5) * ax * ax + 1.0
    } else if ax < 2.0 {
        ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0
    } else {
        0.0
    }
}

fn interp_axis_weights(ratio: usize, out_len: usize) -> Vec<(isize, [f64; 4])> {
    // For output index o, the source coordinate is (o - offset) / ratio; the
    // cubic kernel reads the four integer neighbours of that coordinate.
    // This is the polyphase form of zero insertion followed by the
    // (4 * ratio - 1)-tap polynomial low-pass.
    let offset = centre_phase(ratio) as isize;
    (0..out_len)
        .map(|o| {
            let num = o as isize - offset;
            let base = num.div_euclid(ratio as isize);
            let frac = num.rem_euclid(ratio as isize) as f64 / ratio as f64;
            let mut ws = [0.0; 4];
            for (j, w) in ws.iter_mut().enumerate() {
                *w = cubic_weight(frac + 1.0 - j as f64);
            }
            (base - 1, ws)
        })
        .collect()
}

/// Interpolates a plane by an integer factor with the polynomial kernel.
/// Input sample `i` lands exactly on output position
/// `ratio * i + floor(ratio / 2)`, so [`decimate`] at the centred phase
/// recovers the input bit-exactly.
pub fn interp_plane(plane: &Plane, ratio: usize) -> Result<Plane> {
    if ratio < 2 {
        return Err(Error::domain(format!("interpolation ratio {ratio} < 2")));
    }
    let (h, w) = (plane.height(), plane.width());
    let (oh, ow) = (h * ratio, w * ratio);
    let col_w = interp_axis_weights(ratio, ow);
    let row_w = interp_axis_weights(ratio, oh);

    // Horizontal pass: h x ow.
    let mut horiz = vec![0.0; h * ow];
    {
        let src = plane.as_slice();
        for_each_chunk_mut(&mut horiz, ow, |r, out_row| {
            let src_row = &src[r * w..(r + 1) * w];
            for (o, &(base, ws)) in out_row.iter_mut().zip(&col_w) {
                let mut s = 0.0;
                for (j, &wj) in ws.iter().enumerate() {
                    if wj != 0.0 {
                        s += wj * src_row[mirror(base + j as isize, w)];
                    }
                }
                *o = s;
            }
        });
    }

    // Vertical pass: oh x ow.
    let mut out = vec![0.0; oh * ow];
    for_each_chunk_mut(&mut out, ow, |r, out_row| {
        let (base, ws) = row_w[r];
        // On-grid output rows copy the source row exactly, keeping the
        // decimate-after-interpolate round trip bit-exact.
        if ws == [0.0, 1.0, 0.0, 0.0] {
            let rr = mirror(base + 1, h);
            out_row.copy_from_slice(&horiz[rr * ow..(rr + 1) * ow]);
            return;
        }
        for (j, &wj) in ws.iter().enumerate() {
            if wj == 0.0 {
                continue;
            }
            let rr = mirror(base + j as isize, h);
            let src_row = &horiz[rr * ow..(rr + 1) * ow];
            for (o, &v) in out_row.iter_mut().zip(src_row) {
                *o += wj * v;
            }
        }
    });
    Plane::new(oh, ow, out)
}

/// Interpolates every band of a cube by `ratio` (wavelengths preserved).
pub fn ideal_interp(cube: &ImageCube, ratio: usize) -> Result<ImageCube> {
    let planes = cube.to_planes();
    let up: Vec<Plane> = map_results(map_indices(planes.len(), |b| {
        interp_plane(&planes[b], ratio)
    }))?;
    ImageCube::from_planes(&up, cube.wavelengths_nm().map(|w| w.to_vec()))
}

fn map_results<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Wald degradation protocol
// ---------------------------------------------------------------------------

/// Degrades every band of `cube` by the sensor's per-band Gaussian MTF
/// filter followed by centred decimation.
pub fn mtf_downgrade_cube(cube: &ImageCube, sensor: &SensorModel) -> Result<ImageCube> {
    sensor.validate()?;
    let bands = cube.bands();
    let planes = cube.to_planes();
    let phase = centre_phase(sensor.ratio);
    let down: Vec<Plane> = map_results(map_indices(bands, |b| {
        let gain = sensor.hs_gain_for(b, bands)?;
        let kernel = mtf_gaussian(gain, sensor.ratio, sensor.kernel_taps)?;
        let filtered = filter_separable(&planes[b], &kernel)?;
        decimate(&filtered, sensor.ratio, phase)
    }))?;
    ImageCube::from_planes(&down, cube.wavelengths_nm().map(|w| w.to_vec()))
}

/// Degrades a panchromatic plane with the near-ideal windowed-sinc low-pass
/// followed by centred decimation.
pub fn pan_downgrade(pan: &Plane, sensor: &SensorModel) -> Result<Plane> {
    sensor.validate()?;
    let kernel = lowpass_sinc(sensor.ratio, sensor.kernel_taps)?;
    let filtered = filter_separable(pan, &kernel)?;
    decimate(&filtered, sensor.ratio, centre_phase(sensor.ratio))
}

/// Degrades a co-registered hyperspectral/panchromatic pair one resolution
/// step down: bands through their MTF-shaped Gaussians, the panchromatic
/// image through the windowed sinc, both decimated at the centred phase.
/// The panchromatic image must measure exactly `ratio` times the cube.
pub fn wald_downgrade(
    cube: &ImageCube,
    pan: &PanImage,
    sensor: &SensorModel,
) -> Result<(ImageCube, PanImage)> {
    if pan.height() != cube.height() * sensor.ratio || pan.width() != cube.width() * sensor.ratio {
        return Err(Error::dim(format!(
            "panchromatic {}x{} is not {}x the {}x{} cube",
            pan.height(),
            pan.width(),
            sensor.ratio,
            cube.height(),
            cube.width()
        )));
    }
    let cube_lr = mtf_downgrade_cube(cube, sensor)?;
    let pan_lr = pan_downgrade(pan.plane(), sensor)?;
    Ok((cube_lr, PanImage::new(pan_lr, pan.gsd_m().map(|g| g * sensor.ratio as f64))?))
}
