//! Synthetic scene generator.
//!
//! Scenes follow a linear mixing model: a handful of endmember spectra
//! (smooth positive curves) mixed by spatially structured abundance maps
//! (Voronoi-like regions, low-order gradients and discs), modulated by a
//! high-pass structural texture, plus per-band Gaussian noise. The
//! panchromatic image is a uniform combination of the visible-wavelength
//! reference bands with a touch of independent high-frequency texture, so
//! a regression of the panchromatic image on the reference bands explains
//! at least ~95% of its variance.
//!
//! Randomness is drawn from counter-based streams keyed by `(seed,
//! purpose, index)`, so every raster is bit-reproducible regardless of
//! thread count, and adding bands or endmembers does not shift the draws
//! of existing ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::{variance, ImageCube, PanImage, Plane, SensorModel};
use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::resample::{interp_plane, mtf_downgrade_cube, wald_downgrade};

/// Radiometric scale of the reference cube (counts).
const SCALE: f64 = 1000.0;

/// Abundance fields are synthesised on a grid this many times coarser than
/// the reference and interpolated up, which keeps region boundaries smooth
/// at the pixel scale and the generator fast.
const ABUNDANCE_SUBSAMPLE: usize = 4;

// Stream purposes; the index half of the stream id selects the band or
// endmember so streams never overlap.
const STREAM_SITES: u64 = 1;
const STREAM_GRADIENTS: u64 = 2;
const STREAM_DISCS: u64 = 3;
const STREAM_SPECTRA: u64 = 4;
const STREAM_NOISE: u64 = 5;
const STREAM_PAN_TEXTURE: u64 = 6;

fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | index);
    rng
}

/// Parameters of one synthetic scene. Dimensions refer to the reference
/// (fine) grid; the observed cube is the reference degraded by the sensor
/// model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub endmembers: usize,
    /// Strength of the brightness texture modulating all bands jointly.
    #[serde(default = "default_texture")]
    pub texture: f64,
    /// Additive per-band noise standard deviation as a fraction of the
    /// radiometric scale.
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_wavelength_start")]
    pub wavelength_start_nm: f64,
    #[serde(default = "default_wavelength_end")]
    pub wavelength_end_nm: f64,
}

fn default_texture() -> f64 {
    0.15
}

fn default_noise_sigma() -> f64 {
    0.002
}

fn default_wavelength_start() -> f64 {
    400.0
}

fn default_wavelength_end() -> f64 {
    2500.0
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            height: 1152,
            width: 1152,
            bands: 159,
            endmembers: 6,
            texture: default_texture(),
            noise_sigma: default_noise_sigma(),
            wavelength_start_nm: default_wavelength_start(),
            wavelength_end_nm: default_wavelength_end(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self, sensor: &SensorModel) -> Result<()> {
        sensor.validate()?;
        if self.height == 0 || self.width == 0 {
            return Err(Error::domain("scene dimensions must be positive"));
        }
        if self.height % sensor.ratio != 0 || self.width % sensor.ratio != 0 {
            return Err(Error::domain(format!(
                "scene {}x{} not divisible by resolution ratio {}",
                self.height, self.width, sensor.ratio
            )));
        }
        let coarse = (self.height / sensor.ratio).min(self.width / sensor.ratio);
        if sensor.kernel_taps / 2 >= coarse {
            return Err(Error::domain(format!(
                "{}-tap degradation kernel does not fit the {coarse}-pixel observed grid",
                sensor.kernel_taps
            )));
        }
        if self.bands == 0 {
            return Err(Error::domain("scene needs at least one band"));
        }
        if self.endmembers == 0 {
            return Err(Error::domain("scene needs at least one endmember"));
        }
        if !(self.texture >= 0.0 && self.texture.is_finite()) {
            return Err(Error::domain(format!("texture {} not in [0, inf)", self.texture)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::domain(format!(
                "noise_sigma {} not in [0, inf)",
                self.noise_sigma
            )));
        }
        if !(self.wavelength_start_nm > 0.0
            && self.wavelength_end_nm > self.wavelength_start_nm)
        {
            return Err(Error::domain("wavelength range must be increasing and positive"));
        }
        Ok(())
    }

    fn wavelengths(&self) -> Vec<f64> {
        if self.bands == 1 {
            return vec![self.wavelength_start_nm];
        }
        let step =
            (self.wavelength_end_nm - self.wavelength_start_nm) / (self.bands - 1) as f64;
        (0..self.bands)
            .map(|b| self.wavelength_start_nm + step * b as f64)
            .collect()
    }
}

/// A generated scene: the fine-grid reference truth, the sensor-degraded
/// observed cube, and the panchromatic image on the reference grid.
#[derive(Debug, Clone)]
pub struct Scene {
    pub reference: ImageCube,
    pub hs: ImageCube,
    pub pan: PanImage,
}

/// A reduced-resolution evaluation pair: inputs degraded one resolution
/// step down plus the original cube as ground truth.
#[derive(Debug, Clone)]
pub struct RrPair {
    pub hs: ImageCube,
    pub pan: PanImage,
    pub gt: ImageCube,
}

/// Degrades an observed pair one resolution step so fusion results can be
/// scored against the original cube.
pub fn make_rr_pair(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<RrPair> {
    if hs.height() % sensor.ratio != 0 || hs.width() % sensor.ratio != 0 {
        return Err(Error::dim(format!(
            "cube {}x{} not divisible by ratio {}; the degraded pair would not align",
            hs.height(),
            hs.width(),
            sensor.ratio
        )));
    }
    let (hs_lr, pan_lr) = wald_downgrade(hs, pan, sensor)?;
    Ok(RrPair {
        hs: hs_lr,
        pan: pan_lr,
        gt: hs.clone(),
    })
}

/// Catmull-Rom interpolation of a control polygon at parameter `t` in
/// control-point units, with clamped end handling.
fn catmull_rom(points: &[f64], t: f64) -> f64 {
    let n = points.len();
    let i = (t.floor() as usize).min(n.saturating_sub(2));
    let u = t - i as f64;
    let p = |j: isize| points[j.clamp(0, n as isize - 1) as usize];
    let (p0, p1, p2, p3) = (p(i as isize - 1), p(i as isize), p(i as isize + 1), p(i as isize + 2));
    0.5 * (2.0 * p1
        + (-p0 + p2) * u
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u)
}

/// Smooth positive spectrum over `bands` samples, peak-normalised to 1.
fn endmember_spectrum(rng: &mut ChaCha8Rng, bands: usize) -> Vec<f64> {
    const CONTROL_POINTS: usize = 8;
    let cps: Vec<f64> = (0..CONTROL_POINTS).map(|_| rng.gen_range(0.2..1.0)).collect();
    let denom = (bands.max(2) - 1) as f64;
    let mut curve: Vec<f64> = (0..bands)
        .map(|b| {
            let t = b as f64 / denom * (CONTROL_POINTS - 1) as f64;
            catmull_rom(&cps, t).max(0.05)
        })
        .collect();
    let peak = curve.iter().fold(0.0f64, |m, &v| m.max(v));
    for v in &mut curve {
        *v /= peak;
    }
    curve
}

/// Abundance maps on the fine grid: one plane per endmember, nonnegative,
/// summing to one at every pixel.
fn abundance_maps(spec: &SceneSpec) -> Result<Vec<Plane>> {
    let e_count = spec.endmembers;
    let aux_h = spec.height.div_ceil(ABUNDANCE_SUBSAMPLE).max(4);
    let aux_w = spec.width.div_ceil(ABUNDANCE_SUBSAMPLE).max(4);

    // Region structure: soft Voronoi cells around labelled sites.
    let mut site_rng = stream_rng(spec.seed, STREAM_SITES, 0);
    let site_count = (e_count * 5).max(8);
    let sites: Vec<(f64, f64, usize)> = (0..site_count)
        .map(|k| {
            (
                site_rng.gen_range(0.0..aux_h as f64),
                site_rng.gen_range(0.0..aux_w as f64),
                k % e_count,
            )
        })
        .collect();
    let sigma2 = (aux_h * aux_w) as f64 / site_count as f64;

    // Low-order polynomial gradients per endmember.
    let gradients: Vec<[f64; 5]> = (0..e_count)
        .map(|e| {
            let mut rng = stream_rng(spec.seed, STREAM_GRADIENTS, e as u64);
            [
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            ]
        })
        .collect();

    // Discs of locally boosted abundance.
    let mut disc_rng = stream_rng(spec.seed, STREAM_DISCS, 0);
    let disc_count = e_count + (spec.texture * 15.0).round() as usize;
    let min_dim = aux_h.min(aux_w) as f64;
    let discs: Vec<(f64, f64, f64, f64, usize)> = (0..disc_count)
        .map(|k| {
            (
                disc_rng.gen_range(0.0..aux_h as f64),
                disc_rng.gen_range(0.0..aux_w as f64),
                disc_rng.gen_range(min_dim / 20.0..min_dim / 6.0),
                disc_rng.gen_range(0.2..0.8),
                k % e_count,
            )
        })
        .collect();

    let aux_fields: Vec<Plane> = map_indices(e_count, |e| {
        let g = &gradients[e];
        Plane::from_fn(aux_h, aux_w, |r, c| {
            let (u, v) = (r as f64 / aux_h as f64, c as f64 / aux_w as f64);
            let mut field = g[0] * u + g[1] * v + g[2] * u * v + g[3] * u * u + g[4] * v * v;
            for &(sr, sc, label) in &sites {
                if label == e {
                    let d2 = (r as f64 - sr).powi(2) + (c as f64 - sc).powi(2);
                    field += 1.0 / (1.0 + d2 / sigma2);
                }
            }
            for &(dr, dc, radius, amp, label) in &discs {
                if label == e {
                    let d2 = (r as f64 - dr).powi(2) + (c as f64 - dc).powi(2);
                    let bump = 1.0 - d2 / (radius * radius);
                    if bump > 0.0 {
                        field += amp * bump;
                    }
                }
            }
            field
        })
        .expect("aux dimensions are positive")
    });

    // Interpolate to the fine grid, clamp, and renormalise to the simplex
    // (cubic interpolation can overshoot).
    let mut fine: Vec<Plane> = aux_fields
        .iter()
        .map(|f| -> Result<Plane> {
            interp_plane(f, ABUNDANCE_SUBSAMPLE)?.crop(0, 0, spec.height, spec.width)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; spec.height * spec.width];
    for plane in &mut fine {
        for (t, v) in total.iter_mut().zip(plane.as_mut_slice()) {
            *v = v.max(0.0) + 1e-9;
            *t += *v;
        }
    }
    for plane in &mut fine {
        for (v, &t) in plane.as_mut_slice().iter_mut().zip(&total) {
            *v /= t;
        }
    }
    Ok(fine)
}

/// High-pass brightness structure derived from the abundance layout,
/// normalised to unit standard deviation (zero plane when the scene has no
/// spatial structure).
fn structural_texture(abundances: &[Plane]) -> Result<Plane> {
    let (h, w) = (abundances[0].height(), abundances[0].width());
    let mut mix = vec![0.0; h * w];
    for (e, plane) in abundances.iter().enumerate() {
        let weight = (e + 1) as f64;
        for (m, &v) in mix.iter_mut().zip(plane.as_slice()) {
            *m += weight * v;
        }
    }
    let mix = Plane::new(h, w, mix)?;
    let smooth = crate::fusion::atrous_smooth(&mix, 1)?;
    let high = mix.zip_map(&smooth, |a, b| a - b)?;
    let sd = variance(high.as_slice()).sqrt();
    if sd <= 0.0 {
        return Plane::filled(h, w, 0.0);
    }
    Ok(high.map(|v| v / sd))
}

/// Generates a scene: reference truth on the fine grid, observed cube
/// through the sensor degradation, and the panchromatic image.
pub fn generate_scene(spec: &SceneSpec, sensor: &SensorModel) -> Result<Scene> {
    spec.validate(sensor)?;
    let wavelengths = spec.wavelengths();
    let abundances = abundance_maps(spec)?;
    let texture = structural_texture(&abundances)?;
    let spectra: Vec<Vec<f64>> = (0..spec.endmembers)
        .map(|e| {
            let mut rng = stream_rng(spec.seed, STREAM_SPECTRA, e as u64);
            endmember_spectrum(&mut rng, spec.bands)
        })
        .collect();

    // Per-band reference planes; each band owns its noise stream, so the
    // parallel band loop stays bit-reproducible.
    let pixels = spec.height * spec.width;
    let band_planes: Vec<Plane> = map_indices(spec.bands, |b| {
        let mut rng = stream_rng(spec.seed, STREAM_NOISE, b as u64);
        let normal = Normal::new(0.0, 1.0).expect("unit normal is well-formed");
        let mut data = vec![0.0; pixels];
        for (i, out) in data.iter_mut().enumerate() {
            let mut v = 0.0;
            for (plane, spectrum) in abundances.iter().zip(&spectra) {
                v += plane.as_slice()[i] * spectrum[b];
            }
            let modulation = (1.0 + spec.texture * texture.as_slice()[i]).max(0.05);
            let noise = if spec.noise_sigma > 0.0 {
                spec.noise_sigma * SCALE * normal.sample(&mut rng)
            } else {
                0.0
            };
            *out = (v * SCALE * modulation + noise).max(0.0);
        }
        Plane::new(spec.height, spec.width, data).expect("scene dimensions are positive")
    });

    // Panchromatic image: uniform combination of the visible bands plus a
    // small independent high-frequency texture.
    let visible: Vec<usize> = wavelengths
        .iter()
        .enumerate()
        .filter(|(_, &w)| w <= 700.0)
        .map(|(b, _)| b)
        .collect();
    let visible = if visible.is_empty() { vec![0] } else { visible };
    let mut pan_data = vec![0.0; pixels];
    for &b in &visible {
        for (p, &v) in pan_data.iter_mut().zip(band_planes[b].as_slice()) {
            *p += v / visible.len() as f64;
        }
    }
    let pan_sd = variance(&pan_data).sqrt();
    let mut pan_rng = stream_rng(spec.seed, STREAM_PAN_TEXTURE, 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is well-formed");
    if pan_sd > 0.0 {
        for p in &mut pan_data {
            *p = (*p + 0.02 * pan_sd * normal.sample(&mut pan_rng)).max(0.0);
        }
    }
    let pan = PanImage::new(Plane::new(spec.height, spec.width, pan_data)?, None)?;

    let reference = ImageCube::from_planes(&band_planes, Some(wavelengths))?;
    let hs = mtf_downgrade_cube(&reference, sensor)?;
    Ok(Scene { reference, hs, pan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::lsq_with_intercept;

    fn small_spec() -> SceneSpec {
        SceneSpec {
            seed: 7,
            height: 48,
            width: 48,
            bands: 5,
            endmembers: 3,
            texture: 0.15,
            noise_sigma: 0.002,
            wavelength_start_nm: 400.0,
            wavelength_end_nm: 2500.0,
        }
    }

    fn sensor() -> SensorModel {
        SensorModel::new(2, vec![0.3], 0.4, 9).unwrap()
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let a = generate_scene(&small_spec(), &sensor()).unwrap();
        let b = generate_scene(&small_spec(), &sensor()).unwrap();
        assert_eq!(a.reference.samples(), b.reference.samples());
        assert_eq!(a.hs.samples(), b.hs.samples());
        assert_eq!(a.pan.plane().as_slice(), b.pan.plane().as_slice());
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_scene(&small_spec(), &sensor()).unwrap();
        let mut other = small_spec();
        other.seed = 8;
        let b = generate_scene(&other, &sensor()).unwrap();
        assert_ne!(a.reference.samples(), b.reference.samples());
    }

    #[test]
    fn observed_cube_is_the_degraded_reference() {
        let scene = generate_scene(&small_spec(), &sensor()).unwrap();
        let degraded = mtf_downgrade_cube(&scene.reference, &sensor()).unwrap();
        assert_eq!(scene.hs.samples(), degraded.samples());
        assert_eq!(scene.hs.height(), 24);
        assert_eq!(scene.pan.height(), 48);
    }

    #[test]
    fn panchromatic_image_is_explained_by_the_reference_bands() {
        let scene = generate_scene(&small_spec(), &sensor()).unwrap();
        let planes = scene.reference.to_planes();
        let columns: Vec<&[f64]> = planes.iter().map(|p| p.as_slice()).collect();
        let fit = lsq_with_intercept(&columns, scene.pan.plane().as_slice()).unwrap();
        let var_p = variance(scene.pan.plane().as_slice());
        let unexplained = fit.residual_sse / scene.pan.plane().len() as f64 / var_p;
        assert!(unexplained <= 0.05, "unexplained fraction {unexplained}");
    }

    #[test]
    fn reference_is_nonnegative_with_wavelengths_attached() {
        let scene = generate_scene(&small_spec(), &sensor()).unwrap();
        assert!(scene.reference.samples().iter().all(|&v| v >= 0.0));
        let w = scene.reference.wavelengths_nm().unwrap();
        assert_eq!(w.len(), 5);
        assert!(w.windows(2).all(|p| p[1] > p[0]));
        assert_eq!(w[0], 400.0);
        assert_eq!(w[4], 2500.0);
    }

    #[test]
    fn single_endmember_without_texture_or_noise_is_flat() {
        let spec = SceneSpec {
            endmembers: 1,
            texture: 0.0,
            noise_sigma: 0.0,
            ..small_spec()
        };
        let scene = generate_scene(&spec, &sensor()).unwrap();
        for b in 0..spec.bands {
            let plane = scene.reference.band(b).unwrap();
            assert!(
                plane.dynamic_range() <= 1e-9 * plane.max().abs().max(1.0),
                "band {b} range {}",
                plane.dynamic_range()
            );
        }
    }

    #[test]
    fn reduced_resolution_pair_keeps_the_original_as_truth() {
        let scene = generate_scene(&small_spec(), &sensor()).unwrap();
        let pair = make_rr_pair(&scene.hs, &PanImage::new(scene.pan.plane().clone(), None).unwrap(), &sensor()).unwrap();
        assert_eq!(pair.gt.samples(), scene.hs.samples());
        assert_eq!(pair.hs.height(), 12);
        assert_eq!(pair.pan.height(), 24);

        let odd = scene.hs.crop(0, 0, 23, 24).unwrap();
        let pan_odd = scene.pan.crop(0, 0, 46, 48).unwrap();
        assert!(make_rr_pair(&odd, &pan_odd, &sensor()).is_err());
    }

    #[test]
    fn spec_validation_catches_bad_geometry() {
        let mut spec = small_spec();
        spec.height = 47;
        assert!(spec.validate(&sensor()).is_err());
        let mut spec = small_spec();
        spec.bands = 0;
        assert!(spec.validate(&sensor()).is_err());
        let mut spec = small_spec();
        spec.wavelength_end_nm = spec.wavelength_start_nm;
        assert!(spec.validate(&sensor()).is_err());
        let mut spec = small_spec();
        spec.noise_sigma = -0.1;
        assert!(spec.validate(&sensor()).is_err());
    }

    #[test]
    fn endmember_spectra_are_smooth_and_normalised() {
        let mut rng = stream_rng(3, STREAM_SPECTRA, 0);
        let s = endmember_spectrum(&mut rng, 64);
        let peak = s.iter().fold(0.0f64, |m, &v| m.max(v));
        assert!((peak - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|&v| v > 0.0));
        // Smoothness: adjacent samples move by far less than the range.
        for w in s.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.15, "{:?}", w);
        }
    }
}
