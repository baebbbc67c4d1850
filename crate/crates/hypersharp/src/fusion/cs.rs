//! Component-substitution methods: a spectrally weighted intensity stands
//! in for the panchromatic image at low resolution, and the difference
//! between the (moment-equalised) panchromatic image and that intensity is
//! injected into every interpolated band with method-specific gains.

use std::time::Instant;

use super::{
    base_params, check_geometry, cube_like, equalized_pan, estimate_weights_lsq, finish,
    intensity_plane, prepare, Prepared,
};
use crate::cube::{global_stats, FusionResult, ImageCube, PanImage, Plane, SensorModel};
use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::resample::{ideal_interp, wald_downgrade};
use crate::solve::nnls_gram;

/// Baseline: band-wise polynomial interpolation with no detail injection.
/// Every other method is expected to beat this.
pub fn exp(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    check_geometry(hs, pan, sensor)?;
    let started = Instant::now();
    let up = ideal_interp(hs, sensor.ratio)?;
    let mut params = base_params(sensor);
    params.insert(
        "note".into(),
        "band-wise polynomial interpolation; no detail injection".into(),
    );
    Ok(finish(up, "exp", params, started))
}

struct IntensityStage {
    planes: Vec<Plane>,
    intensity: Plane,
    intensity_var: f64,
    delta: Plane,
    bias: f64,
    condition: f64,
}

/// Builds the weighted intensity, checks it carries variance, and equalises
/// the panchromatic image against it.
fn intensity_stage(
    hs: &ImageCube,
    pan: &PanImage,
    sensor: &SensorModel,
    up: &ImageCube,
) -> Result<IntensityStage> {
    let fit = estimate_weights_lsq(hs, pan, sensor)?;
    let planes = up.to_planes();
    let intensity = intensity_plane(&planes, &fit.weights, fit.bias)?;
    let intensity_var = crate::cube::variance(intensity.as_slice());
    if intensity_var <= 0.0 {
        return Err(Error::degenerate(
            "weighted intensity is constant; component substitution undefined",
        ));
    }
    let p_eq = equalized_pan(pan.plane(), &intensity)?;
    let delta = p_eq.zip_map(&intensity, |p, i| p - i)?;
    Ok(IntensityStage {
        planes,
        intensity,
        intensity_var,
        delta,
        bias: fit.bias,
        condition: fit.condition,
    })
}

/// Adaptive component substitution: per-band injection gains are the
/// regression coefficients of each interpolated band on the intensity, so
/// spectrally dissimilar bands receive proportionally less panchromatic
/// detail.
pub fn gsa(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "gsa")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let stage = intensity_stage(hs, pan, sensor, &up)?;
    let fused = map_indices(stage.planes.len(), |b| -> Result<Plane> {
        let gs = global_stats(&stage.planes[b], &stage.intensity)?;
        let gain = gs.cov / stage.intensity_var;
        stage.planes[b].zip_map(&stage.delta, |v, d| v + gain * d)
    });
    let fused: Vec<Plane> = fused.into_iter().collect::<Result<_>>()?;
    let mut params = base_params(sensor);
    params.insert("intensity_bias".into(), format!("{:.6e}", stage.bias));
    params.insert("weights_condition".into(), format!("{:.3e}", stage.condition));
    Ok(finish(cube_like(&up, &fused)?, "gsa", params, started))
}

/// Haze-corrected multiplicative substitution: per-pixel gains
/// `(band - band_haze) / (intensity - haze)` steer the equalised
/// panchromatic detail, with the haze levels taken as low percentiles.
/// Gains are clamped to `[0, 5]` and forced to zero where the intensity
/// sits at its haze level.
pub fn bt_h(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "bt-h")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let stage = intensity_stage(hs, pan, sensor, &up)?;
    let haze_i = stage.intensity.percentile(0.5)?;
    let eps = 1e-6 * stage.intensity.dynamic_range().max(f64::MIN_POSITIVE);
    let fused = map_indices(stage.planes.len(), |b| -> Result<Plane> {
        let haze_b = stage.planes[b].percentile(0.5)?;
        let band = &stage.planes[b];
        let mut out = Vec::with_capacity(band.len());
        for ((&v, &i), &d) in band
            .as_slice()
            .iter()
            .zip(stage.intensity.as_slice())
            .zip(stage.delta.as_slice())
        {
            let denom = i - haze_i;
            let gain = if denom <= eps {
                0.0
            } else {
                ((v - haze_b) / denom).clamp(0.0, 5.0)
            };
            out.push(v + gain * d);
        }
        Plane::new(band.height(), band.width(), out)
    });
    let fused: Vec<Plane> = fused.into_iter().collect::<Result<_>>()?;
    let mut params = base_params(sensor);
    params.insert("intensity_haze".into(), format!("{haze_i:.6e}"));
    Ok(finish(cube_like(&up, &fused)?, "bt-h", params, started))
}

/// Partial-replacement substitution: the global gains of [`gsa`] are scaled
/// per band by the correlation between the band and the intensity (clipped
/// to `[0, 1]`), so weakly correlated bands keep their interpolated values.
pub fn pracs(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "pracs")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let stage = intensity_stage(hs, pan, sensor, &up)?;
    let fused = map_indices(stage.planes.len(), |b| -> Result<Plane> {
        let gs = global_stats(&stage.planes[b], &stage.intensity)?;
        let gain = gs.cov / stage.intensity_var;
        let alpha = if gs.var_a <= 0.0 {
            0.0
        } else {
            (gs.cov / (gs.var_a.sqrt() * stage.intensity_var.sqrt())).clamp(0.0, 1.0)
        };
        stage.planes[b].zip_map(&stage.delta, |v, d| v + alpha * gain * d)
    });
    let fused: Vec<Plane> = fused.into_iter().collect::<Result<_>>()?;
    let mut params = base_params(sensor);
    params.insert("intensity_bias".into(), format!("{:.6e}", stage.bias));
    Ok(finish(cube_like(&up, &fused)?, "pracs", params, started))
}

/// Per-band nonnegative coefficients of the band-dependent detail model
/// `gamma * pan - sum_k c_k * band_k`, fitted against the given targets by
/// nonnegative least squares sharing one Gram matrix.
fn bdsd_coefficients(
    pan_col: &[f64],
    band_cols: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n_cols = band_cols.len() + 1;
    let columns: Vec<&[f64]> = std::iter::once(pan_col)
        .chain(band_cols.iter().map(|c| c.as_slice()))
        .collect();
    // The model subtracts the band terms, so their columns enter negated.
    let signs: Vec<f64> = std::iter::once(1.0)
        .chain(std::iter::repeat(-1.0).take(band_cols.len()))
        .collect();
    let mut gram = vec![0.0; n_cols * n_cols];
    for i in 0..n_cols {
        for j in i..n_cols {
            let dot: f64 = columns[i]
                .iter()
                .zip(columns[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * signs[i]
                * signs[j];
            gram[i * n_cols + j] = dot;
            gram[j * n_cols + i] = dot;
        }
    }
    targets
        .iter()
        .map(|t| {
            let rhs: Vec<f64> = columns
                .iter()
                .zip(&signs)
                .map(|(col, s)| s * col.iter().zip(t).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let x = nnls_gram(&gram, n_cols, &rhs)?;
            Ok((x[0], x[1..].to_vec()))
        })
        .collect()
}

/// Band-dependent detail injection with a physical nonnegativity
/// constraint. The detail model `gamma_b * pan - sum_k c_bk * band_k` is
/// fitted per band at reduced resolution, where the true detail is known
/// from the degradation protocol, and then applied at full resolution.
/// Falls back to [`gsa`] if the reduced-scale design is too degenerate to
/// fit.
pub fn bdsd_pc(hs: &ImageCube, pan: &PanImage, sensor: &SensorModel) -> Result<FusionResult> {
    let (up, started) = match prepare(hs, pan, sensor, "bdsd-pc")? {
        Prepared::Flat(r) => return Ok(r),
        Prepared::Go { up, started } => (up, started),
    };
    let bands = hs.bands();

    // The detail model is fitted one resolution step down, where the true
    // detail is known. If that stage cannot run at all (the input is too
    // small for the degradation filters) or the design is degenerate, the
    // method degrades gracefully to the substitution gains.
    let reduced_scale_fit = || -> Result<Vec<(f64, Vec<f64>)>> {
        let (hs_lr, pan_lr) = wald_downgrade(hs, pan, sensor)?;
        let up_lr = ideal_interp(&hs_lr, sensor.ratio)?;
        let band_cols: Vec<Vec<f64>> = (0..bands)
            .map(|b| Ok(up_lr.band(b)?.into_vec()))
            .collect::<Result<_>>()?;
        let targets: Vec<Vec<f64>> = (0..bands)
            .map(|b| {
                let native = hs.band(b)?;
                let smooth = up_lr.band(b)?;
                Ok(native
                    .as_slice()
                    .iter()
                    .zip(smooth.as_slice())
                    .map(|(n, s)| n - s)
                    .collect())
            })
            .collect::<Result<_>>()?;
        bdsd_coefficients(pan_lr.plane().as_slice(), &band_cols, &targets)
    };

    let coefficients = match reduced_scale_fit() {
        Ok(c) => c,
        Err(err) => {
            log::warn!("reduced-scale detail fit unavailable ({err}); falling back to gsa gains");
            let fallback = gsa(hs, pan, sensor)?;
            let mut params = base_params(sensor);
            params.insert("fallback".into(), format!("gsa (reduced-scale fit unavailable: {err})"));
            return Ok(finish(fallback.cube, "bdsd-pc", params, started));
        }
    };

    let planes = up.to_planes();
    let pan_plane = pan.plane();
    let fused = map_indices(bands, |b| -> Result<Plane> {
        let (gamma, ref cs) = coefficients[b];
        let mut out: Vec<f64> = planes[b]
            .as_slice()
            .iter()
            .zip(pan_plane.as_slice())
            .map(|(v, p)| v + gamma * p)
            .collect();
        for (k, &c) in cs.iter().enumerate() {
            if c != 0.0 {
                for (o, &v) in out.iter_mut().zip(planes[k].as_slice()) {
                    *o -= c * v;
                }
            }
        }
        Plane::new(pan_plane.height(), pan_plane.width(), out)
    });
    let fused: Vec<Plane> = fused.into_iter().collect::<Result<_>>()?;
    let gamma_max = coefficients.iter().map(|(g, _)| *g).fold(0.0, f64::max);
    let mut params = base_params(sensor);
    params.insert("gamma_max".into(), format!("{gamma_max:.6e}"));
    Ok(finish(cube_like(&up, &fused)?, "bdsd-pc", params, started))
}
