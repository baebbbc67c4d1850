//! Raster file I/O and benchmark configuration.
//!
//! Cubes are stored as raw band-sequential little-endian binary (`.hsc`)
//! next to a JSON sidecar (`.hsc.json`) that records the geometry, the
//! sample type (`f64`, `f32` or `u16`, all promoted to `f64` on read),
//! the band-centre wavelengths and, for single-band rasters, the ground
//! sampling distance. Unknown sidecar keys are tolerated with a warning
//! so files written by newer revisions stay readable.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cube::{ImageCube, PanImage, Plane, SensorModel};
use crate::error::{Error, Result};
use crate::synth::SceneSpec;

/// File extension for raster payloads; the sidecar appends `.json`.
pub const CUBE_EXTENSION: &str = "hsc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    F64,
    F32,
    U16,
}

impl SampleType {
    fn byte_width(self) -> usize {
        match self {
            SampleType::F64 => 8,
            SampleType::F32 => 4,
            SampleType::U16 => 2,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    height: usize,
    width: usize,
    bands: usize,
    dtype: SampleType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wavelengths_nm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gsd_m: Option<f64>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

/// Path of the JSON sidecar belonging to a raster payload.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let sidecar_file = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar_file).map_err(|e| {
        Error::Config(format!("cannot read sidecar {}: {e}", sidecar_file.display()))
    })?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("sidecar {}: {e}", sidecar_file.display())))?;
    for key in sidecar.extra.keys() {
        log::warn!(
            "sidecar {}: ignoring unknown key {key:?}",
            sidecar_file.display()
        );
    }
    if sidecar.height == 0 || sidecar.width == 0 || sidecar.bands == 0 {
        return Err(Error::Config(format!(
            "sidecar {}: zero-sized raster {}x{}x{}",
            sidecar_file.display(),
            sidecar.height,
            sidecar.width,
            sidecar.bands
        )));
    }
    if let Some(w) = &sidecar.wavelengths_nm {
        if w.len() != sidecar.bands {
            return Err(Error::Config(format!(
                "sidecar {}: {} wavelengths for {} bands",
                sidecar_file.display(),
                w.len(),
                sidecar.bands
            )));
        }
    }
    Ok(sidecar)
}

/// Reads raw band-sequential samples, promoting them to `f64`.
fn read_samples(path: &Path, sidecar: &Sidecar) -> Result<Vec<f64>> {
    let count = sidecar.height * sidecar.width * sidecar.bands;
    let expected = count * sidecar.dtype.byte_width();
    let actual = std::fs::metadata(path)?.len();
    if actual != expected as u64 {
        return Err(Error::Config(format!(
            "{}: payload is {actual} bytes but the sidecar implies {expected}",
            path.display()
        )));
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut bytes = vec![0u8; expected];
    reader.read_exact(&mut bytes)?;
    let values: Vec<f64> = match sidecar.dtype {
        SampleType::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")))
            .collect(),
        SampleType::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk is 4 bytes")) as f64)
            .collect(),
        SampleType::U16 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().expect("chunk is 2 bytes")) as f64)
            .collect(),
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "{}: non-finite sample at flat index {i}",
            path.display()
        )));
    }
    Ok(values)
}

/// Reads a multi-band cube (band count may be 1).
pub fn read_cube(path: &Path) -> Result<ImageCube> {
    let sidecar = read_sidecar(path)?;
    let values = read_samples(path, &sidecar)?;
    let plane_len = sidecar.height * sidecar.width;
    let planes: Vec<Plane> = (0..sidecar.bands)
        .map(|b| {
            Plane::new(
                sidecar.height,
                sidecar.width,
                values[b * plane_len..(b + 1) * plane_len].to_vec(),
            )
        })
        .collect::<Result<_>>()?;
    ImageCube::from_planes(&planes, sidecar.wavelengths_nm)
}

/// Reads a single-band raster as a panchromatic image.
pub fn read_pan(path: &Path) -> Result<PanImage> {
    let sidecar = read_sidecar(path)?;
    if sidecar.bands != 1 {
        return Err(Error::Config(format!(
            "{}: expected a single-band raster, found {} bands",
            path.display(),
            sidecar.bands
        )));
    }
    let values = read_samples(path, &sidecar)?;
    PanImage::new(Plane::new(sidecar.height, sidecar.width, values)?, sidecar.gsd_m)
}

fn write_payload(path: &Path, planes: &[&[f64]]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for plane in planes {
        for value in *plane {
            writer.write_all(&value.to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    let text = serde_json::to_string_pretty(sidecar)
        .map_err(|e| Error::Config(format!("cannot encode sidecar: {e}")))?;
    std::fs::write(sidecar_path(path), text + "\n")?;
    Ok(())
}

/// Writes a cube as `f64` band-sequential binary plus its sidecar.
pub fn write_cube(path: &Path, cube: &ImageCube) -> Result<()> {
    let planes = cube.to_planes();
    let slices: Vec<&[f64]> = planes.iter().map(|p| p.as_slice()).collect();
    write_payload(path, &slices)?;
    write_sidecar(
        path,
        &Sidecar {
            height: cube.height(),
            width: cube.width(),
            bands: cube.bands(),
            dtype: SampleType::F64,
            wavelengths_nm: cube.wavelengths_nm().map(<[f64]>::to_vec),
            gsd_m: None,
            extra: BTreeMap::new(),
        },
    )
}

/// Writes a panchromatic image as a single-band raster.
pub fn write_pan(path: &Path, pan: &PanImage) -> Result<()> {
    write_payload(path, &[pan.plane().as_slice()])?;
    write_sidecar(
        path,
        &Sidecar {
            height: pan.height(),
            width: pan.width(),
            bands: 1,
            dtype: SampleType::F64,
            wavelengths_nm: None,
            gsd_m: pan.gsd_m(),
            extra: BTreeMap::new(),
        },
    )
}

/// Configuration of a benchmark campaign: how many scenes to synthesise,
/// their shape, the sensor model, and the crop used for full-resolution
/// evaluation (in observed-grid pixels). Scene `i` uses `scene.seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub scenes: usize,
    pub scene: SceneSpec,
    pub sensor: SensorModel,
    pub fr_crop: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            scenes: 4,
            scene: SceneSpec {
                seed: 42,
                height: 1800,
                width: 1800,
                bands: 8,
                endmembers: 6,
                ..SceneSpec::default()
            },
            sensor: SensorModel::default(),
            fr_crop: 100,
        }
    }
}

impl CampaignConfig {
    /// Loads and validates a configuration from a JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: CampaignConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 {
            return Err(Error::config("campaign needs at least one scene"));
        }
        self.scene.validate(&self.sensor)?;
        let ratio = self.sensor.ratio;
        if self.scene.height % (ratio * ratio) != 0 || self.scene.width % (ratio * ratio) != 0 {
            return Err(Error::config(format!(
                "scene {}x{} must be divisible by ratio squared ({}) so the observed cube \
                 can be degraded a second time for reduced-resolution evaluation",
                self.scene.height,
                self.scene.width,
                ratio * ratio
            )));
        }
        let (obs_h, obs_w) = (self.scene.height / ratio, self.scene.width / ratio);
        if self.fr_crop < 32 {
            return Err(Error::config(format!(
                "fr_crop {} is below the 32-pixel block size of the spectral score",
                self.fr_crop
            )));
        }
        if self.fr_crop > obs_h || self.fr_crop > obs_w {
            return Err(Error::config(format!(
                "fr_crop {} exceeds the {obs_h}x{obs_w} observed grid",
                self.fr_crop
            )));
        }
        Ok(())
    }

    /// Specification of the `index`-th scene of the campaign.
    pub fn scene_spec(&self, index: usize) -> SceneSpec {
        SceneSpec {
            seed: self.scene.seed + index as u64,
            ..self.scene.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demo_cube() -> ImageCube {
        let planes: Vec<Plane> = (0..3)
            .map(|b| {
                Plane::from_fn(4, 5, |r, c| (b * 100 + r * 5 + c) as f64 * 0.25 - 3.0).unwrap()
            })
            .collect();
        ImageCube::from_planes(&planes, Some(vec![400.0, 700.0, 1000.0])).unwrap()
    }

    #[test]
    fn cube_round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.hsc");
        let cube = demo_cube();
        write_cube(&path, &cube).unwrap();
        let back = read_cube(&path).unwrap();
        assert_eq!(back.samples(), cube.samples());
        assert_eq!(back.wavelengths_nm(), cube.wavelengths_nm());
    }

    #[test]
    fn pan_round_trip_preserves_gsd() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pan.hsc");
        let pan = PanImage::new(
            Plane::from_fn(6, 4, |r, c| (r as f64).mul_add(0.5, c as f64)).unwrap(),
            Some(5.0),
        )
        .unwrap();
        write_pan(&path, &pan).unwrap();
        let back = read_pan(&path).unwrap();
        assert_eq!(back.plane().as_slice(), pan.plane().as_slice());
        assert_eq!(back.gsd_m(), Some(5.0));
    }

    #[test]
    fn foreign_sample_types_are_promoted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.hsc");
        let mut bytes = Vec::new();
        for v in [1.5f32, -2.25, 0.0, 1e6] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        std::fs::write(
            sidecar_path(&path),
            r#"{"height":2,"width":2,"bands":1,"dtype":"f32"}"#,
        )
        .unwrap();
        let cube = read_cube(&path).unwrap();
        assert_eq!(cube.samples(), &[1.5, -2.25, 0.0, 1e6]);

        let mut bytes = Vec::new();
        for v in [0u16, 7, 65535, 300] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        std::fs::write(
            sidecar_path(&path),
            r#"{"height":2,"width":2,"bands":1,"dtype":"u16"}"#,
        )
        .unwrap();
        let cube = read_cube(&path).unwrap();
        assert_eq!(cube.samples(), &[0.0, 7.0, 65535.0, 300.0]);
    }

    #[test]
    fn unknown_sidecar_keys_are_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.hsc");
        std::fs::write(&path, 1.0f64.to_le_bytes()).unwrap();
        std::fs::write(
            sidecar_path(&path),
            r#"{"height":1,"width":1,"bands":1,"dtype":"f64","colour_space":"sRGB"}"#,
        )
        .unwrap();
        assert_eq!(read_cube(&path).unwrap().samples(), &[1.0]);
    }

    #[test]
    fn corrupt_payloads_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.hsc");

        // Truncated payload.
        std::fs::write(&path, 1.0f64.to_le_bytes()).unwrap();
        std::fs::write(
            sidecar_path(&path),
            r#"{"height":1,"width":2,"bands":1,"dtype":"f64"}"#,
        )
        .unwrap();
        assert!(matches!(read_cube(&path), Err(Error::Config(_))));

        // Non-finite sample.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        bytes.extend_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_cube(&path), Err(Error::Domain(_))));

        // Unknown sample type.
        std::fs::write(&path, 1.0f64.to_le_bytes()).unwrap();
        std::fs::write(
            sidecar_path(&path),
            r#"{"height":1,"width":1,"bands":1,"dtype":"i8"}"#,
        )
        .unwrap();
        assert!(matches!(read_cube(&path), Err(Error::Config(_))));

        // Wavelength count disagrees with the band count.
        std::fs::write(
            sidecar_path(&path),
            r#"{"height":1,"width":1,"bands":1,"dtype":"f64","wavelengths_nm":[1.0,2.0]}"#,
        )
        .unwrap();
        assert!(matches!(read_cube(&path), Err(Error::Config(_))));
    }

    #[test]
    fn multi_band_pan_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.hsc");
        write_cube(&path, &demo_cube()).unwrap();
        assert!(matches!(read_pan(&path), Err(Error::Config(_))));
    }

    #[test]
    fn default_campaign_validates() {
        let config = CampaignConfig::default();
        config.validate().unwrap();
        assert_eq!(config.scene_spec(2).seed, config.scene.seed + 2);
        assert_eq!(config.scene_spec(2).height, config.scene.height);
    }

    #[test]
    fn campaign_validation_catches_inconsistencies() {
        let mut config = CampaignConfig::default();
        config.scenes = 0;
        assert!(config.validate().is_err());

        let mut config = CampaignConfig::default();
        config.fr_crop = 16;
        assert!(config.validate().is_err());

        let mut config = CampaignConfig::default();
        config.fr_crop = 100_000;
        assert!(config.validate().is_err());

        // Divisible by the ratio but not by its square.
        let mut config = CampaignConfig::default();
        config.scene.height = 1806;
        assert!(config.validate().is_err());
    }

    #[test]
    fn campaign_config_loads_from_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("campaign.json");
        let config = CampaignConfig::default();
        std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
        assert_eq!(CampaignConfig::load(&path).unwrap(), config);

        // Partial configurations inherit defaults.
        std::fs::write(&path, r#"{"scenes": 2}"#).unwrap();
        let partial = CampaignConfig::load(&path).unwrap();
        assert_eq!(partial.scenes, 2);
        assert_eq!(partial.scene, CampaignConfig::default().scene);

        // Typos in keys are hard errors.
        std::fs::write(&path, r#"{"scens": 2}"#).unwrap();
        assert!(matches!(CampaignConfig::load(&path), Err(Error::Config(_))));

        // A scene block only needs the identity fields; the radiometric
        // knobs fall back to their defaults.
        std::fs::write(
            &path,
            r#"{"scene": {"seed": 9, "height": 720, "width": 720, "bands": 6, "endmembers": 4}}"#,
        )
        .unwrap();
        let partial = CampaignConfig::load(&path).unwrap();
        assert_eq!(partial.scene.height, 720);
        assert_eq!(partial.scene.texture, CampaignConfig::default().scene.texture);
        assert_eq!(
            partial.scene.noise_sigma,
            CampaignConfig::default().scene.noise_sigma
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn arbitrary_cubes_round_trip(
            h in 1usize..5,
            w in 1usize..5,
            b in 1usize..4,
            seed in 0u64..1000,
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("cube.hsc");
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2e6 - 1e6
            };
            let planes: Vec<Plane> = (0..b)
                .map(|_| {
                    let data: Vec<f64> = (0..h * w).map(|_| next()).collect();
                    Plane::new(h, w, data).unwrap()
                })
                .collect();
            let cube = ImageCube::from_planes(&planes, None).unwrap();
            write_cube(&path, &cube).unwrap();
            let back = read_cube(&path).unwrap();
            prop_assert_eq!(back.samples(), cube.samples());
        }
    }
}
