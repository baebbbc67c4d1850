//! Binary PPM previews of selected cube bands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use hypersharp::{ImageCube, Plane};

/// Band-centre wavelengths (nm) of a natural-colour composite.
pub const TRUE_COLOR_NM: [f64; 3] = [663.0, 560.0, 466.0];
/// Wavelengths (nm) of a shortwave-infrared false-colour composite.
pub const SWIR_COLOR_NM: [f64; 3] = [1943.0, 1261.0, 832.0];

/// Stretches a plane to 8 bits between its 2nd and 98th percentiles; a
/// flat plane maps to mid-grey.
fn stretch_to_u8(plane: &Plane) -> Result<Vec<u8>> {
    let lo = plane.percentile(2.0)?;
    let hi = plane.percentile(98.0)?;
    let scale = plane.max().abs().max(plane.min().abs()).max(1.0);
    if hi - lo <= 1e-12 * scale {
        return Ok(vec![128; plane.as_slice().len()]);
    }
    Ok(plane
        .as_slice()
        .iter()
        .map(|&v| (((v - lo) / (hi - lo) * 255.0).round()).clamp(0.0, 255.0) as u8)
        .collect())
}

/// Writes a three-band composite of `cube` as a binary (P6) PPM, picking
/// for each channel the band whose wavelength is nearest the request.
/// Requests outside the cube's spectral range fall back to the nearest
/// band with a warning.
pub fn write_band_triplet_ppm(path: &Path, cube: &ImageCube, wavelengths_nm: [f64; 3]) -> Result<()> {
    let table = cube
        .wavelengths_nm()
        .context("cube carries no wavelength table; cannot pick preview bands")?;
    let (min_nm, max_nm) = table
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
            (lo.min(w), hi.max(w))
        });
    let mut channels = Vec::with_capacity(3);
    for nm in wavelengths_nm {
        if nm < min_nm || nm > max_nm {
            log::warn!(
                "preview wavelength {nm} nm outside the cube range [{min_nm}, {max_nm}]; \
                 using the nearest band"
            );
        }
        let band = cube.nearest_band(nm)?;
        channels.push(stretch_to_u8(&cube.band(band)?)?);
    }

    let mut writer = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    write!(writer, "P6\n{} {}\n255\n", cube.width(), cube.height())?;
    let mut pixel = [0u8; 3];
    for i in 0..cube.pixels() {
        for (p, ch) in pixel.iter_mut().zip(&channels) {
            *p = ch[i];
        }
        writer.write_all(&pixel)?;
    }
    writer.flush()?;
    Ok(())
}
