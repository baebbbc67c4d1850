//! Core raster types: single-band planes, hyperspectral cubes, the
//! panchromatic image, the sensor description and the fusion result record.
//!
//! Cubes store samples band-interleaved by pixel (all bands of a pixel are
//! contiguous), which keeps per-pixel spectra cache-friendly for metrics and
//! per-pixel gains. Band planes are extracted on demand as owned copies; no
//! operation in the crate mutates an input raster in place.
//!
//! All statistics in this crate are population statistics (normalised by
//! `N`, not `N - 1`); every consumer relies on that convention.

use crate::error::{Error, Result};
use crate::parallel::pairwise_sum;

// ---------------------------------------------------------------------------
// Plane
// ---------------------------------------------------------------------------

/// A single-band raster in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    /// Wraps row-major samples as a plane. Rejects empty geometry, a length
    /// mismatch, and non-finite samples.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::dim("plane dimensions must be nonzero"));
        }
        if data.len() != height * width {
            return Err(Error::dim(format!(
                "plane of {height}x{width} needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("plane contains a non-finite sample"));
        }
        Ok(Plane { height, width, data })
    }

    /// A constant-valued plane.
    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Plane::new(height, width, vec![value; height * width])
    }

    /// Builds a plane from a per-pixel closure `(row, col) -> value`.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Plane::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Same shape as `self`?
    pub fn same_shape(&self, other: &Plane) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Element-wise map into a new plane.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two planes of equal shape.
    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Result<Plane> {
        if !self.same_shape(other) {
            return Err(Error::dim("zip_map on planes of different shape"));
        }
        Ok(Plane {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Copies the `height x width` window with top-left corner `(row0, col0)`.
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Plane> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::dim(format!(
                "crop {height}x{width}+{row0}+{col0} exceeds plane {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width);
        for r in row0..row0 + height {
            data.extend_from_slice(&self.data[r * self.width + col0..r * self.width + col0 + width]);
        }
        Plane::new(height, width, data)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max minus min.
    pub fn dynamic_range(&self) -> f64 {
        self.max() - self.min()
    }

    /// Percentile in `[0, 100]` with linear interpolation between order
    /// statistics (rank `p/100 * (n-1)`).
    pub fn percentile(&self, p: f64) -> Result<f64> {
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::domain(format!("percentile {p} outside [0, 100]")));
        }
        let mut sorted = self.data.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("planes hold finite samples"));
        let rank = p / 100.0 * (sorted.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let frac = rank - lo as f64;
        Ok(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
    }
}

// ---------------------------------------------------------------------------
// Population statistics
// ---------------------------------------------------------------------------

/// Mean, variance and standard deviation of one raster plus the covariance
/// against a second raster of the same shape. All moments are population
/// moments (divide by `N`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalStats {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
}

/// Population mean of a slice.
pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Population variance of a slice.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|&v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / values.len() as f64
}

/// Population covariance of two equally long slices.
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let prod: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x - ma) * (y - mb))
        .collect();
    pairwise_sum(&prod) / a.len() as f64
}

/// Joint population moments of two planes of equal shape.
pub fn global_stats(a: &Plane, b: &Plane) -> Result<GlobalStats> {
    if !a.same_shape(b) {
        return Err(Error::dim("global_stats on planes of different shape"));
    }
    Ok(GlobalStats {
        mean_a: mean(a.as_slice()),
        mean_b: mean(b.as_slice()),
        var_a: variance(a.as_slice()),
        var_b: variance(b.as_slice()),
        cov: covariance(a.as_slice(), b.as_slice()),
    })
}

// ---------------------------------------------------------------------------
// ImageCube
// ---------------------------------------------------------------------------

/// A hyperspectral cube: `bands` co-registered planes of `height x width`
/// samples, stored band-interleaved by pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCube {
    height: usize,
    width: usize,
    bands: usize,
    /// Sample `(r, c, b)` lives at `(r * width + c) * bands + b`.
    samples: Vec<f64>,
    wavelengths_nm: Option<Vec<f64>>,
}

impl ImageCube {
    /// Wraps interleaved samples as a cube, validating geometry, finiteness
    /// and (when present) strictly increasing wavelengths.
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        samples: Vec<f64>,
        wavelengths_nm: Option<Vec<f64>>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::dim("cube dimensions must be nonzero"));
        }
        if samples.len() != height * width * bands {
            return Err(Error::dim(format!(
                "cube of {height}x{width}x{bands} needs {} samples, got {}",
                height * width * bands,
                samples.len()
            )));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("cube contains a non-finite sample"));
        }
        if let Some(wl) = &wavelengths_nm {
            if wl.len() != bands {
                return Err(Error::dim(format!(
                    "{} wavelengths for {} bands",
                    wl.len(),
                    bands
                )));
            }
            if !wl.windows(2).all(|w| w[0] < w[1]) || !wl.iter().all(|v| v.is_finite()) {
                return Err(Error::domain(
                    "wavelengths must be finite and strictly increasing",
                ));
            }
        }
        Ok(ImageCube {
            height,
            width,
            bands,
            samples,
            wavelengths_nm,
        })
    }

    /// Assembles a cube from equally shaped band planes (band order given).
    pub fn from_planes(planes: &[Plane], wavelengths_nm: Option<Vec<f64>>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::dim("cube needs at least one band"))?;
        if !planes.iter().all(|p| p.same_shape(first)) {
            return Err(Error::dim("band planes differ in shape"));
        }
        let (h, w, b) = (first.height(), first.width(), planes.len());
        let mut samples = vec![0.0; h * w * b];
        for (bi, plane) in planes.iter().enumerate() {
            for (pix, &v) in plane.as_slice().iter().enumerate() {
                samples[pix * b + bi] = v;
            }
        }
        ImageCube::new(h, w, b, samples, wavelengths_nm)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn wavelengths_nm(&self) -> Option<&[f64]> {
        self.wavelengths_nm.as_deref()
    }

    /// Interleaved samples; pixel spectra are contiguous.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// The spectrum of pixel `(row, col)` as a contiguous slice.
    #[inline]
    pub fn spectrum(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.bands;
        &self.samples[start..start + self.bands]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.samples[(row * self.width + col) * self.bands + band]
    }

    /// Extracts band `b` as an owned plane. The cube is left untouched.
    pub fn band(&self, b: usize) -> Result<Plane> {
        if b >= self.bands {
            return Err(Error::dim(format!(
                "band {b} out of range for {}-band cube",
                self.bands
            )));
        }
        let mut data = Vec::with_capacity(self.pixels());
        data.extend(self.samples.iter().skip(b).step_by(self.bands));
        Plane::new(self.height, self.width, data)
    }

    /// All band planes in order.
    pub fn to_planes(&self) -> Vec<Plane> {
        (0..self.bands)
            .map(|b| self.band(b).expect("band index in range"))
            .collect()
    }

    /// Copies a spatial window out of every band.
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<ImageCube> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::dim(format!(
                "crop {height}x{width}+{row0}+{col0} exceeds cube {}x{}",
                self.height, self.width
            )));
        }
        let mut samples = Vec::with_capacity(height * width * self.bands);
        for r in row0..row0 + height {
            let start = (r * self.width + col0) * self.bands;
            samples.extend_from_slice(&self.samples[start..start + width * self.bands]);
        }
        ImageCube::new(height, width, self.bands, samples, self.wavelengths_nm.clone())
    }

    /// Index of the band whose wavelength is closest to `target_nm`.
    pub fn nearest_band(&self, target_nm: f64) -> Result<usize> {
        let wl = self
            .wavelengths_nm
            .as_ref()
            .ok_or_else(|| Error::domain("cube carries no wavelength table"))?;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, &w) in wl.iter().enumerate() {
            let d = (w - target_nm).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(best)
    }
}

// ---------------------------------------------------------------------------
// PanImage
// ---------------------------------------------------------------------------

/// The single-band panchromatic image, optionally tagged with its ground
/// sample distance in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct PanImage {
    plane: Plane,
    gsd_m: Option<f64>,
}

impl PanImage {
    pub fn new(plane: Plane, gsd_m: Option<f64>) -> Result<Self> {
        if let Some(g) = gsd_m {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::domain(format!("ground sample distance {g} not positive")));
            }
        }
        Ok(PanImage { plane, gsd_m })
    }

    pub fn from_samples(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        PanImage::new(Plane::new(height, width, data)?, None)
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn gsd_m(&self) -> Option<f64> {
        self.gsd_m
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<PanImage> {
        PanImage::new(self.plane.crop(row0, col0, height, width)?, self.gsd_m)
    }
}

// ---------------------------------------------------------------------------
// SensorModel
// ---------------------------------------------------------------------------

/// Acquisition geometry and modulation-transfer assumptions shared by the
/// degradation protocol, the fusion methods and the no-reference metrics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SensorModel {
    /// Resolution ratio between panchromatic and hyperspectral grids.
    pub ratio: usize,
    /// Per-band hyperspectral MTF gain at Nyquist. A single entry is
    /// broadcast to every band.
    pub hs_mtf_gain: Vec<f64>,
    /// Panchromatic MTF gain at Nyquist.
    pub pan_mtf_gain: f64,
    /// Length of every degradation filter; odd.
    pub kernel_taps: usize,
}

impl SensorModel {
    pub fn new(
        ratio: usize,
        hs_mtf_gain: Vec<f64>,
        pan_mtf_gain: f64,
        kernel_taps: usize,
    ) -> Result<Self> {
        let model = SensorModel {
            ratio,
            hs_mtf_gain,
            pan_mtf_gain,
            kernel_taps,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every stored invariant; used both by the constructor and after
    /// deserialisation from a config file.
    pub fn validate(&self) -> Result<()> {
        if self.ratio < 2 {
            return Err(Error::domain(format!("resolution ratio {} < 2", self.ratio)));
        }
        if self.hs_mtf_gain.is_empty() {
            return Err(Error::domain("hs_mtf_gain must have at least one entry"));
        }
        for &g in self.hs_mtf_gain.iter().chain(std::iter::once(&self.pan_mtf_gain)) {
            if !(g.is_finite() && 0.0 < g && g < 1.0) {
                return Err(Error::domain(format!("MTF gain {g} outside (0, 1)")));
            }
        }
        if self.kernel_taps % 2 == 0 || self.kernel_taps < 7 {
            return Err(Error::domain(format!(
                "kernel_taps {} must be odd and >= 7",
                self.kernel_taps
            )));
        }
        Ok(())
    }

    /// MTF gain for band `b` of a `bands`-band cube, broadcasting a single
    /// stored gain.
    pub fn hs_gain_for(&self, b: usize, bands: usize) -> Result<f64> {
        if self.hs_mtf_gain.len() == 1 {
            return Ok(self.hs_mtf_gain[0]);
        }
        if self.hs_mtf_gain.len() != bands {
            return Err(Error::dim(format!(
                "{} MTF gains for {} bands",
                self.hs_mtf_gain.len(),
                bands
            )));
        }
        Ok(self.hs_mtf_gain[b])
    }
}

impl Default for SensorModel {
    /// A PRISMA-like sensor: ratio 6, band MTF gain 0.30, pan MTF gain 0.40,
    /// 41-tap degradation filters.
    fn default() -> Self {
        SensorModel {
            ratio: 6,
            hs_mtf_gain: vec![0.30],
            pan_mtf_gain: 0.40,
            kernel_taps: 41,
        }
    }
}

// ---------------------------------------------------------------------------
// FusionResult
// ---------------------------------------------------------------------------

/// A sharpened cube plus the record of how it was produced.
#[derive(Debug, Clone)]
pub struct FusionResult {
    pub cube: ImageCube,
    /// Display name of the method ("GSA", "MTF-GLP-HPM", ...).
    pub method: String,
    /// Parameters that affected the run, as printable key/value pairs.
    pub params: std::collections::BTreeMap<String, String>,
    /// Wall-clock seconds spent inside the method.
    pub runtime_s: f64,
}

// ---------------------------------------------------------------------------
// SubspaceModel
// ---------------------------------------------------------------------------

/// A linear spectral model `cube = mixing * coefficients`: each of the
/// `bands` rows of `mixing` expresses one band as a combination of
/// `components` latent columns. Used by the variational sharpener to relate
/// the panchromatic image to band combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    bands: usize,
    components: usize,
    /// Row-major `bands x components`.
    mixing: Vec<f64>,
}

impl SubspaceModel {
    /// Validates shape and full column rank (via the Gram determinant of the
    /// normalised columns).
    pub fn new(bands: usize, components: usize, mixing: Vec<f64>) -> Result<Self> {
        if bands == 0 || components == 0 || components > bands {
            return Err(Error::dim(format!(
                "subspace of {components} components over {bands} bands"
            )));
        }
        if mixing.len() != bands * components {
            return Err(Error::dim("mixing matrix length mismatch"));
        }
        if !mixing.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("mixing matrix contains a non-finite entry"));
        }
        let model = SubspaceModel {
            bands,
            components,
            mixing,
        };
        if !model.full_column_rank() {
            return Err(Error::degenerate("mixing matrix is column rank deficient"));
        }
        Ok(model)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn mixing(&self) -> &[f64] {
        &self.mixing
    }

    #[inline]
    pub fn coef(&self, band: usize, component: usize) -> f64 {
        self.mixing[band * self.components + component]
    }

    fn full_column_rank(&self) -> bool {
        // Gram matrix of unit-normalised columns; rank deficiency shows up as
        // a vanishing pivot during Cholesky-style elimination.
        let c = self.components;
        let mut norms = vec![0.0; c];
        for j in 0..c {
            for b in 0..self.bands {
                norms[j] += self.coef(b, j) * self.coef(b, j);
            }
            if norms[j] <= 0.0 {
                return false;
            }
            norms[j] = norms[j].sqrt();
        }
        let mut gram = vec![0.0; c * c];
        for i in 0..c {
            for j in 0..c {
                let mut s = 0.0;
                for b in 0..self.bands {
                    s += self.coef(b, i) * self.coef(b, j);
                }
                gram[i * c + j] = s / (norms[i] * norms[j]);
            }
        }
        // In-place LDL elimination; pivots below tolerance mean dependence.
        for k in 0..c {
            let pivot = gram[k * c + k];
            if pivot < 1e-10 {
                return false;
            }
            for i in k + 1..c {
                let f = gram[i * c + k] / pivot;
                for j in k..c {
                    gram[i * c + j] -= f * gram[k * c + j];
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_extraction_uses_interleaved_layout() {
        // 2x2 pixels, 2 bands; sample (r, c, b) = 100*r + 10*c + b.
        let mut samples = Vec::new();
        for r in 0..2 {
            for c in 0..2 {
                for b in 0..2 {
                    samples.push((100 * r + 10 * c + b) as f64);
                }
            }
        }
        let cube = ImageCube::new(2, 2, 2, samples, None).unwrap();
        let b1 = cube.band(1).unwrap();
        assert_eq!(b1.get(0, 0), 1.0);
        assert_eq!(b1.get(0, 1), 11.0);
        assert_eq!(b1.get(1, 0), 101.0);
        assert_eq!(b1.get(1, 1), 111.0);
        assert_eq!(cube.get(1, 0, 0), 100.0);
        assert_eq!(cube.spectrum(1, 1), &[110.0, 111.0]);
    }

    #[test]
    fn from_planes_round_trips() {
        let p0 = Plane::from_fn(3, 4, |r, c| (r * 4 + c) as f64).unwrap();
        let p1 = p0.map(|v| v * 2.0 + 1.0);
        let cube = ImageCube::from_planes(&[p0.clone(), p1.clone()], None).unwrap();
        assert_eq!(cube.band(0).unwrap(), p0);
        assert_eq!(cube.band(1).unwrap(), p1);
    }

    #[test]
    fn nan_sample_is_rejected() {
        let err = ImageCube::new(1, 2, 1, vec![1.0, f64::NAN], None);
        assert!(matches!(err, Err(Error::Domain(_))));
        let err = Plane::new(1, 2, vec![f64::INFINITY, 0.0]);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn out_of_range_band_is_an_error() {
        let cube = ImageCube::new(1, 1, 2, vec![0.0, 1.0], None).unwrap();
        assert!(cube.band(2).is_err());
    }

    #[test]
    fn wavelengths_must_increase() {
        let err = ImageCube::new(1, 1, 2, vec![0.0, 1.0], Some(vec![500.0, 500.0]));
        assert!(err.is_err());
        let ok = ImageCube::new(1, 1, 2, vec![0.0, 1.0], Some(vec![500.0, 600.0]));
        assert!(ok.is_ok());
    }

    #[test]
    fn variance_of_alternating_plane() {
        // Hand value: mean of {0,2,0,2} is 1, squared deviations all 1.
        let p = Plane::new(2, 2, vec![0.0, 2.0, 0.0, 2.0]).unwrap();
        assert_eq!(mean(p.as_slice()), 1.0);
        assert_eq!(variance(p.as_slice()), 1.0);
    }

    #[test]
    fn covariance_hand_value() {
        // Population covariance of {0,1} with {0,2}:
        // means 0.5 and 1.0; E[(x-mx)(y-my)] = (0.5 + 0.5) / 2 = 0.5.
        let a = Plane::new(1, 2, vec![0.0, 1.0]).unwrap();
        let b = Plane::new(1, 2, vec![0.0, 2.0]).unwrap();
        let s = global_stats(&a, &b).unwrap();
        assert_eq!(s.cov, 0.5);
    }

    #[test]
    fn covariance_is_symmetric_and_bounded() {
        // Cauchy-Schwarz: cov^2 <= var_a * var_b, checked on a seeded raster.
        let a = Plane::from_fn(8, 8, |r, c| ((r * 31 + c * 7) % 13) as f64).unwrap();
        let b = Plane::from_fn(8, 8, |r, c| ((r * 5 + c * 17) % 11) as f64).unwrap();
        let s = global_stats(&a, &b).unwrap();
        let s_t = global_stats(&b, &a).unwrap();
        assert!((s.cov - s_t.cov).abs() < 1e-12);
        assert!(s.cov * s.cov <= s.var_a * s.var_b * (1.0 + 1e-12));
    }

    #[test]
    fn percentile_interpolates() {
        let p = Plane::new(1, 5, vec![10.0, 20.0, 30.0, 40.0, 50.0]).unwrap();
        assert_eq!(p.percentile(0.0).unwrap(), 10.0);
        assert_eq!(p.percentile(100.0).unwrap(), 50.0);
        assert_eq!(p.percentile(50.0).unwrap(), 30.0);
        assert_eq!(p.percentile(25.0).unwrap(), 20.0);
    }

    #[test]
    fn sensor_model_rejects_bad_parameters() {
        assert!(SensorModel::new(1, vec![0.3], 0.4, 41).is_err());
        assert!(SensorModel::new(6, vec![0.0], 0.4, 41).is_err());
        assert!(SensorModel::new(6, vec![0.3], 1.0, 41).is_err());
        assert!(SensorModel::new(6, vec![0.3], 0.4, 40).is_err());
        assert!(SensorModel::new(6, vec![0.3], 0.4, 5).is_err());
        assert!(SensorModel::new(6, vec![0.3], 0.4, 41).is_ok());
    }

    #[test]
    fn subspace_model_requires_full_column_rank() {
        // Two identical columns are dependent.
        let dep = SubspaceModel::new(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert!(matches!(dep, Err(Error::Degenerate(_))));
        let ok = SubspaceModel::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(ok.is_ok());
    }

    #[test]
    fn crop_copies_window() {
        let cube_samples: Vec<f64> = (0..36).map(|v| v as f64).collect();
        let cube = ImageCube::new(3, 4, 3, cube_samples, None).unwrap();
        let crop = cube.crop(1, 1, 2, 2).unwrap();
        assert_eq!(crop.get(0, 0, 0), cube.get(1, 1, 0));
        assert_eq!(crop.get(1, 1, 2), cube.get(2, 2, 2));
        assert!(cube.crop(2, 0, 2, 2).is_err());
    }

    #[test]
    fn nearest_band_picks_closest_wavelength() {
        let cube = ImageCube::new(
            1,
            1,
            3,
            vec![0.0, 1.0, 2.0],
            Some(vec![450.0, 550.0, 650.0]),
        )
        .unwrap();
        assert_eq!(cube.nearest_band(560.0).unwrap(), 1);
        assert_eq!(cube.nearest_band(400.0).unwrap(), 0);
        assert_eq!(cube.nearest_band(1000.0).unwrap(), 2);
    }
}
