//! Benchmark campaign orchestration: scene synthesis, sharpening runs,
//! metric tables and preview crops, laid out under one output directory.
//!
//! ```text
//! <out>/
//!   config.json               effective campaign configuration
//!   manifest.json             sha-256 of every synthesised raster
//!   scenes/scene-XX/          fr_hs, fr_pan, rr_hs, rr_pan, rr_gt (.hsc)
//!   results/
//!     sharpened/scene-XX/<scale>/<method>.hsc (+ .meta.json)
//!     results_rr.csv|md       scores against the reduced-resolution truth
//!     results_fr.csv|md       no-reference scores at full resolution
//!     timings.csv             median wall-clock per method (reduced scale)
//!     crops/scene-XX/         8-bit preview composites (.ppm)
//! ```
//!
//! Failures of individual methods are isolated: they are logged, reported
//! and reflected in the exit code, but never abort the rest of a run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use hypersharp::fusion::{display_name, run_method, METHOD_NAMES, RESERVED_NAMES};
use hypersharp::io::{
    read_cube, read_pan, sidecar_path, write_cube, write_pan, CampaignConfig,
};
use hypersharp::metrics::{d_lambda, d_s, ergas, q2n, rqnr, sam};
use hypersharp::synth::{generate_scene, make_rr_pair};
use hypersharp::{ImageCube, PanImage};

use crate::ppm::{write_band_triplet_ppm, SWIR_COLOR_NM, TRUE_COLOR_NM};
use crate::tables::{median, timings_csv, Better, MetricSpec, ResultsGrid};

/// Evaluation scale: `Rr` scores against a known truth after degrading
/// the inputs one resolution step; `Fr` scores the native-scale result
/// without one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Rr,
    Fr,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Rr => "rr",
            Scale::Fr => "fr",
        }
    }
}

/// A per-method problem that was isolated instead of aborting the run.
#[derive(Debug)]
pub struct Failure {
    pub scene: String,
    pub context: String,
    pub message: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} [{}]: {}", self.scene, self.context, self.message)
    }
}

/// File layout of one campaign directory.
#[derive(Debug, Clone)]
pub struct CampaignPaths {
    root: PathBuf,
}

pub fn scene_name(index: usize) -> String {
    format!("scene-{index:02}")
}

impl CampaignPaths {
    pub fn new(root: &Path) -> Self {
        CampaignPaths {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn scene_dir(&self, scene: &str) -> PathBuf {
        self.root.join("scenes").join(scene)
    }

    pub fn raster(&self, scene: &str, stem: &str) -> PathBuf {
        self.scene_dir(scene).join(format!("{stem}.hsc"))
    }

    pub fn sharpened(&self, scene: &str, scale: Scale, method: &str) -> PathBuf {
        self.root
            .join("results")
            .join("sharpened")
            .join(scene)
            .join(scale.as_str())
            .join(format!("{method}.hsc"))
    }

    pub fn sharpened_meta(&self, scene: &str, scale: Scale, method: &str) -> PathBuf {
        self.sharpened(scene, scale, method).with_extension("meta.json")
    }

    pub fn results_csv(&self, scale: Scale) -> PathBuf {
        self.root
            .join("results")
            .join(format!("results_{}.csv", scale.as_str()))
    }

    pub fn results_md(&self, scale: Scale) -> PathBuf {
        self.root
            .join("results")
            .join(format!("results_{}.md", scale.as_str()))
    }

    pub fn timings(&self) -> PathBuf {
        self.root.join("results").join("timings.csv")
    }

    pub fn crops_dir(&self, scene: &str) -> PathBuf {
        self.root.join("results").join("crops").join(scene)
    }
}

/// Expands a user-supplied method list to lowercase registry names in
/// registry order; an empty request means every available method.
pub fn resolve_methods(requested: &[String]) -> Result<Vec<String>> {
    if requested.is_empty() {
        return Ok(METHOD_NAMES.iter().map(|m| m.to_string()).collect());
    }
    let mut chosen = vec![false; METHOD_NAMES.len()];
    for name in requested {
        let lower = name.to_ascii_lowercase();
        match METHOD_NAMES.iter().position(|&m| m == lower) {
            Some(i) => chosen[i] = true,
            None if RESERVED_NAMES.contains(&lower.as_str()) => {
                bail!("method {name:?} is reserved for a future release")
            }
            None => bail!(
                "unknown method {name:?}; available: {}",
                METHOD_NAMES.join(", ")
            ),
        }
    }
    Ok(METHOD_NAMES
        .iter()
        .zip(chosen)
        .filter_map(|(m, c)| c.then(|| m.to_string()))
        .collect())
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot hash {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn relative_to<'a>(path: &'a Path, root: &Path) -> &'a Path {
    path.strip_prefix(root).unwrap_or(path)
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a CampaignConfig,
    files: &'a BTreeMap<String, String>,
}

/// Synthesises every scene of the campaign and writes the manifest.
pub fn cmd_synth(config: &CampaignConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let paths = CampaignPaths::new(out);
    fs::create_dir_all(paths.root())?;
    fs::write(
        paths.config(),
        serde_json::to_string_pretty(config)? + "\n",
    )?;

    let mut files = BTreeMap::new();
    let mut record = |path: &Path| -> Result<()> {
        for p in [path.to_path_buf(), sidecar_path(path)] {
            files.insert(
                relative_to(&p, paths.root()).display().to_string(),
                hash_file(&p)?,
            );
        }
        Ok(())
    };

    for i in 0..config.scenes {
        let name = scene_name(i);
        let spec = config.scene_spec(i);
        log::info!(
            "synthesising {name}: {}x{}x{} seed {}",
            spec.height,
            spec.width,
            spec.bands,
            spec.seed
        );
        let scene = generate_scene(&spec, &config.sensor)
            .with_context(|| format!("cannot synthesise {name}"))?;
        let pair = make_rr_pair(&scene.hs, &scene.pan, &config.sensor)
            .with_context(|| format!("cannot degrade {name} for reduced-resolution runs"))?;

        fs::create_dir_all(paths.scene_dir(&name))?;
        let writes: [(&str, &dyn Fn(&Path) -> hypersharp::Result<()>); 5] = [
            ("fr_hs", &|p| write_cube(p, &scene.hs)),
            ("fr_pan", &|p| write_pan(p, &scene.pan)),
            ("rr_hs", &|p| write_cube(p, &pair.hs)),
            ("rr_pan", &|p| write_pan(p, &pair.pan)),
            ("rr_gt", &|p| write_cube(p, &pair.gt)),
        ];
        for (stem, write) in writes {
            let path = paths.raster(&name, stem);
            write(&path).with_context(|| format!("cannot write {}", path.display()))?;
            record(&path)?;
        }
    }

    let manifest = Manifest {
        config,
        files: &files,
    };
    fs::write(
        paths.manifest(),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    log::info!("campaign manifest lists {} files", files.len());
    Ok(())
}

/// Centre crop of the native pair used for full-resolution runs, so the
/// variational method stays affordable on large scenes.
fn fr_inputs(
    config: &CampaignConfig,
    hs: &ImageCube,
    pan: &PanImage,
) -> hypersharp::Result<(ImageCube, PanImage)> {
    let ratio = config.sensor.ratio;
    let side = config.fr_crop;
    let r0 = (hs.height() - side) / 2;
    let c0 = (hs.width() - side) / 2;
    Ok((
        hs.crop(r0, c0, side, side)?,
        pan.crop(r0 * ratio, c0 * ratio, side * ratio, side * ratio)?,
    ))
}

fn load_scale_inputs(
    paths: &CampaignPaths,
    config: &CampaignConfig,
    scene: &str,
    scale: Scale,
) -> Result<(ImageCube, PanImage)> {
    match scale {
        Scale::Rr => Ok((
            read_cube(&paths.raster(scene, "rr_hs"))?,
            read_pan(&paths.raster(scene, "rr_pan"))?,
        )),
        Scale::Fr => {
            let hs = read_cube(&paths.raster(scene, "fr_hs"))?;
            let pan = read_pan(&paths.raster(scene, "fr_pan"))?;
            Ok(fr_inputs(config, &hs, &pan)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SharpenOptions {
    pub scales: Vec<Scale>,
    pub methods: Vec<String>,
    pub repeats: usize,
}

#[derive(Serialize)]
struct SharpenMeta<'a> {
    method: &'a str,
    params: &'a BTreeMap<String, String>,
    runtimes_s: &'a [f64],
}

/// Runs the requested methods over every scene, writing fused cubes and
/// per-run metadata; reduced-scale runtimes feed `timings.csv`.
pub fn cmd_sharpen(
    config: &CampaignConfig,
    out: &Path,
    opts: &SharpenOptions,
) -> Result<Vec<Failure>> {
    config.validate()?;
    if opts.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let paths = CampaignPaths::new(out);
    let mut failures = Vec::new();
    let mut rr_runtimes: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for i in 0..config.scenes {
        let name = scene_name(i);
        for &scale in &opts.scales {
            let (hs, pan) = load_scale_inputs(&paths, config, &name, scale)
                .with_context(|| format!("cannot load {name} inputs at {}", scale.as_str()))?;
            for method in &opts.methods {
                let mut runtimes = Vec::with_capacity(opts.repeats);
                let mut last = None;
                for _ in 0..opts.repeats {
                    match run_method(method, &hs, &pan, &config.sensor) {
                        Ok(result) => {
                            runtimes.push(result.runtime_s);
                            last = Some(result);
                        }
                        Err(e) => {
                            log::error!("{name}/{}/{method}: {e}", scale.as_str());
                            failures.push(Failure {
                                scene: name.clone(),
                                context: format!("sharpen {} {method}", scale.as_str()),
                                message: e.to_string(),
                            });
                            last = None;
                            break;
                        }
                    }
                }
                let Some(result) = last else { continue };
                log::info!(
                    "{name}/{}/{method}: {:.3}s",
                    scale.as_str(),
                    result.runtime_s
                );
                if scale == Scale::Rr {
                    rr_runtimes
                        .entry(method.clone())
                        .or_default()
                        .extend(&runtimes);
                }
                let cube_path = paths.sharpened(&name, scale, method);
                fs::create_dir_all(cube_path.parent().expect("sharpened path has a parent"))?;
                write_cube(&cube_path, &result.cube)
                    .with_context(|| format!("cannot write {}", cube_path.display()))?;
                let meta = SharpenMeta {
                    method: &result.method,
                    params: &result.params,
                    runtimes_s: &runtimes,
                };
                fs::write(
                    paths.sharpened_meta(&name, scale, method),
                    serde_json::to_string_pretty(&meta)? + "\n",
                )?;
            }
        }
    }

    if opts.scales.contains(&Scale::Rr) && !rr_runtimes.is_empty() {
        let rows: Vec<(String, f64)> = opts
            .methods
            .iter()
            .filter_map(|m| {
                rr_runtimes
                    .get(m)
                    .map(|times| (display_name(m), median(times)))
            })
            .collect();
        fs::create_dir_all(paths.timings().parent().expect("timings path has a parent"))?;
        fs::write(paths.timings(), timings_csv(&rows))?;
    }
    Ok(failures)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub scales: Vec<Scale>,
    pub methods: Vec<String>,
}

fn scale_metrics(scale: Scale) -> Vec<MetricSpec> {
    match scale {
        Scale::Rr => vec![
            MetricSpec {
                name: "ERGAS",
                better: Better::Lower,
            },
            MetricSpec {
                name: "SAM",
                better: Better::Lower,
            },
            MetricSpec {
                name: "Q2n",
                better: Better::Higher,
            },
        ],
        Scale::Fr => vec![
            MetricSpec {
                name: "D_lambda",
                better: Better::Lower,
            },
            MetricSpec {
                name: "D_s",
                better: Better::Lower,
            },
            MetricSpec {
                name: "RQNR",
                better: Better::Higher,
            },
        ],
    }
}

/// Scores the sharpened cubes and writes the CSV and markdown tables.
pub fn cmd_eval(config: &CampaignConfig, out: &Path, opts: &EvalOptions) -> Result<Vec<Failure>> {
    config.validate()?;
    let paths = CampaignPaths::new(out);
    let mut failures = Vec::new();
    let scene_names: Vec<String> = (0..config.scenes).map(scene_name).collect();

    for &scale in &opts.scales {
        let mut grid = ResultsGrid::new(
            scene_names.clone(),
            opts.methods.iter().map(|m| display_name(m)).collect(),
            scale_metrics(scale),
        );
        for (s, name) in scene_names.iter().enumerate() {
            // Reference data for this scale: the withheld truth at reduced
            // resolution, the fusion inputs themselves at full resolution.
            enum Reference {
                Truth(ImageCube),
                Inputs(ImageCube, PanImage),
            }
            let reference = match scale {
                Scale::Rr => Reference::Truth(
                    read_cube(&paths.raster(name, "rr_gt"))
                        .with_context(|| format!("cannot load {name} truth"))?,
                ),
                Scale::Fr => {
                    let (hs, pan) = load_scale_inputs(&paths, config, name, Scale::Fr)
                        .with_context(|| format!("cannot load {name} inputs"))?;
                    Reference::Inputs(hs, pan)
                }
            };
            for (m, method) in opts.methods.iter().enumerate() {
                let fused_path = paths.sharpened(name, scale, method);
                let outcome = read_cube(&fused_path).and_then(|fused| match &reference {
                    Reference::Truth(gt) => Ok(vec![
                        ergas(gt, &fused, config.sensor.ratio)?,
                        sam(gt, &fused)?,
                        q2n(gt, &fused)?,
                    ]),
                    Reference::Inputs(hs, pan) => {
                        let dl = d_lambda(&fused, hs, &config.sensor)?;
                        let ds = d_s(&fused, pan)?;
                        Ok(vec![dl, ds, rqnr(dl, ds)?])
                    }
                });
                match outcome {
                    Ok(values) => grid.set(s, m, values),
                    Err(e) => {
                        log::error!("{name}/{}/{method}: {e}", scale.as_str());
                        failures.push(Failure {
                            scene: name.clone(),
                            context: format!("eval {} {method}", scale.as_str()),
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
        fs::create_dir_all(
            paths
                .results_csv(scale)
                .parent()
                .expect("results path has a parent"),
        )?;
        fs::write(paths.results_csv(scale), grid.to_csv())?;
        fs::write(paths.results_md(scale), grid.to_markdown())?;
        log::info!(
            "wrote {} and {}",
            paths.results_csv(scale).display(),
            paths.results_md(scale).display()
        );
    }
    Ok(failures)
}

/// Writes natural- and shortwave-infrared composites of the truth and of
/// every reduced-scale sharpened cube.
pub fn cmd_crop(config: &CampaignConfig, out: &Path, methods: &[String]) -> Result<Vec<Failure>> {
    config.validate()?;
    let paths = CampaignPaths::new(out);
    let mut failures = Vec::new();

    for i in 0..config.scenes {
        let name = scene_name(i);
        let dir = paths.crops_dir(&name);
        fs::create_dir_all(&dir)?;
        let mut targets: Vec<(String, PathBuf)> = vec![(
            "gt".to_string(),
            paths.raster(&name, "rr_gt"),
        )];
        for method in methods {
            targets.push((method.clone(), paths.sharpened(&name, Scale::Rr, method)));
        }
        for (label, cube_path) in targets {
            let outcome = read_cube(&cube_path).map_err(anyhow::Error::from).and_then(|cube| {
                write_band_triplet_ppm(&dir.join(format!("{label}_rgb.ppm")), &cube, TRUE_COLOR_NM)?;
                write_band_triplet_ppm(&dir.join(format!("{label}_swir.ppm")), &cube, SWIR_COLOR_NM)
            });
            if let Err(e) = outcome {
                log::error!("{name}/crop/{label}: {e}");
                failures.push(Failure {
                    scene: name.clone(),
                    context: format!("crop {label}"),
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(failures)
}

/// Full pipeline: synthesise, sharpen, score, and export previews.
pub fn cmd_all(
    config: &CampaignConfig,
    out: &Path,
    opts: &SharpenOptions,
) -> Result<Vec<Failure>> {
    cmd_synth(config, out)?;
    let mut failures = cmd_sharpen(config, out, opts)?;
    failures.extend(cmd_eval(
        config,
        out,
        &EvalOptions {
            scales: opts.scales.clone(),
            methods: opts.methods.clone(),
        },
    )?);
    if opts.scales.contains(&Scale::Rr) {
        failures.extend(cmd_crop(config, out, &opts.methods)?);
    }
    Ok(failures)
}
