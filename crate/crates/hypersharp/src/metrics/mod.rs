//! Fusion quality metrics.
//!
//! With a reference: [`ergas`] (band-wise relative RMSE), [`sam`] (mean
//! spectral angle) and [`q2n`] (hypercomplex universal quality index).
//! Without a reference: [`d_lambda`] (spectral distortion against the input
//! cube), [`d_s`] (spatial distortion against the panchromatic image) and
//! the combined [`rqnr`] score.

mod q2n;

pub use q2n::{q2n, q2n_with_block};

use crate::cube::{variance, ImageCube, PanImage, SensorModel};
use crate::error::{Error, Result};
use crate::parallel::{map_indices, pairwise_sum};
use crate::resample::mtf_downgrade_cube;
use crate::solve::lsq_with_intercept;

fn check_same_shape(a: &ImageCube, b: &ImageCube) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() || a.bands() != b.bands() {
        return Err(Error::dim(format!(
            "cube shapes differ: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.bands(),
            b.height(),
            b.width(),
            b.bands()
        )));
    }
    Ok(())
}

/// Relative dimensionless global error (percent-scaled): the quadratic mean
/// over bands of each band's RMSE divided by its reference mean, scaled by
/// `100 / ratio`. Population statistics; zero when the images are identical.
///
/// Fails when a reference band mean is too close to zero for the relative
/// error to be meaningful.
pub fn ergas(reference: &ImageCube, fused: &ImageCube, ratio: usize) -> Result<f64> {
    check_same_shape(reference, fused)?;
    if ratio < 2 {
        return Err(Error::domain(format!("resolution ratio {ratio} < 2")));
    }
    let bands = reference.bands();
    let pixels = (reference.height() * reference.width()) as f64;
    let terms: Vec<Result<f64>> = map_indices(bands, |b| {
        let gt = reference.band(b)?;
        let fu = fused.band(b)?;
        let mean = crate::cube::mean(gt.as_slice());
        let scale = gt.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if mean.abs() <= 1e-12 * scale {
            return Err(Error::domain(format!(
                "reference band {b} has near-zero mean {mean}; relative error undefined"
            )));
        }
        let sq: Vec<f64> = gt
            .as_slice()
            .iter()
            .zip(fu.as_slice())
            .map(|(g, f)| (g - f) * (g - f))
            .collect();
        let mse = pairwise_sum(&sq) / pixels;
        Ok(mse / (mean * mean))
    });
    let mut acc = Vec::with_capacity(bands);
    for t in terms {
        acc.push(t?);
    }
    let mean_term = pairwise_sum(&acc) / bands as f64;
    Ok(100.0 / ratio as f64 * mean_term.sqrt())
}

/// Mean spectral angle between corresponding pixels, in degrees. Pixels
/// where either spectrum has zero norm are skipped; fails when no pixel has
/// a defined angle.
pub fn sam(reference: &ImageCube, fused: &ImageCube) -> Result<f64> {
    check_same_shape(reference, fused)?;
    let (h, w) = (reference.height(), reference.width());
    let partials: Vec<(f64, usize, usize)> = map_indices(h, |r| {
        let mut sum = 0.0;
        let mut valid = 0usize;
        let mut skipped = 0usize;
        for c in 0..w {
            let u = reference.spectrum(r, c);
            let v = fused.spectrum(r, c);
            let mut dot = 0.0;
            let mut nu = 0.0;
            let mut nv = 0.0;
            for (a, b) in u.iter().zip(v) {
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
            if nu <= 0.0 || nv <= 0.0 {
                skipped += 1;
                continue;
            }
            // At the Cauchy-Schwarz boundary (identical or exactly
            // proportional spectra) acos is ill-conditioned; resolve the
            // angle as exactly 0 or pi instead.
            if dot * dot >= nu * nv {
                sum += if dot >= 0.0 { 0.0 } else { std::f64::consts::PI };
            } else {
                sum += (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0).acos();
            }
            valid += 1;
        }
        (sum, valid, skipped)
    });
    let mut sum = 0.0;
    let mut valid = 0usize;
    let mut skipped = 0usize;
    for (s, v, k) in partials {
        sum += s;
        valid += v;
        skipped += k;
    }
    if valid == 0 {
        return Err(Error::degenerate(
            "every pixel has a zero-norm spectrum; spectral angle undefined",
        ));
    }
    if skipped > 0 {
        log::debug!("spectral angle skipped {skipped} zero-norm pixels");
    }
    Ok((sum / valid as f64).to_degrees())
}

/// No-reference spectral distortion: degrades the fused cube back to the
/// input resolution through the sensor MTF model and measures `1 - Q2n`
/// against the original cube. Clamped to `[0, 1]`.
pub fn d_lambda(fused: &ImageCube, hs: &ImageCube, sensor: &SensorModel) -> Result<f64> {
    if fused.height() != hs.height() * sensor.ratio || fused.width() != hs.width() * sensor.ratio {
        return Err(Error::dim(format!(
            "fused {}x{} is not {}x the {}x{} input cube",
            fused.height(),
            fused.width(),
            sensor.ratio,
            hs.height(),
            hs.width()
        )));
    }
    let degraded = mtf_downgrade_cube(fused, sensor)?;
    Ok((1.0 - q2n(hs, &degraded)?).clamp(0.0, 1.0))
}

/// No-reference spatial distortion: the fraction of panchromatic variance
/// left unexplained by an affine regression of the panchromatic image on
/// the fused bands. Clamped to `[0, 1]`.
pub fn d_s(fused: &ImageCube, pan: &PanImage) -> Result<f64> {
    if fused.height() != pan.height() || fused.width() != pan.width() {
        return Err(Error::dim(format!(
            "fused {}x{} vs panchromatic {}x{}",
            fused.height(),
            fused.width(),
            pan.height(),
            pan.width()
        )));
    }
    let var_p = variance(pan.plane().as_slice());
    if var_p <= 0.0 {
        return Err(Error::degenerate(
            "panchromatic image is constant; spatial distortion undefined",
        ));
    }
    let planes = fused.to_planes();
    let columns: Vec<&[f64]> = planes.iter().map(|p| p.as_slice()).collect();
    let fit = lsq_with_intercept(&columns, pan.plane().as_slice())?;
    let n = (pan.height() * pan.width()) as f64;
    Ok((fit.residual_sse / n / var_p).clamp(0.0, 1.0))
}

/// Combined no-reference quality: `(1 - d_lambda) * (1 - d_s)`. Both inputs
/// must already lie in `[0, 1]`.
pub fn rqnr(d_lambda: f64, d_s: f64) -> Result<f64> {
    for (name, v) in [("spectral distortion", d_lambda), ("spatial distortion", d_s)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok((1.0 - d_lambda) * (1.0 - d_s))
}
