//! Command implementations behind the `derain` binary.
//!
//! Each command returns the text it would print to stdout so it can be driven
//! from tests without spawning a process.

pub mod config;
pub mod error;
pub mod synth;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use derain_core::brisque::{brisque_score, ScorerModel};
use derain_core::mask::compute_rdp;
use derain_core::metrics::evaluate;
use derain_core::rl::{derain, load_params, save_params, train_from, Network};
use derain_core::{Image, RainMask};
use rayon::prelude::*;

pub use crate::config::RunConfig;
pub use crate::error::{CliError, Result};

/// Loads the configured scorer or fits the built-in one.
pub fn load_scorer(cfg: &RunConfig) -> Result<ScorerModel> {
    match &cfg.scorer {
        Some(path) => Ok(ScorerModel::load(path)?),
        None => synth::synthetic_scorer(),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn cmd_mask(input: &Path, out: &Path, cfg: &RunConfig) -> Result<String> {
    let img = Image::load(input)?;
    let mask = compute_rdp(&img, &cfg.mask)?;
    mask.save(out)?;
    Ok(format!("mask density: {:.2}%\n", 100.0 * mask.density()))
}

/// Optional artifacts of [`cmd_derain`].
#[derive(Clone, Debug, Default)]
pub struct DerainOutputs {
    /// Use this mask instead of computing one.
    pub mask: Option<PathBuf>,
    /// Start training from these parameters instead of a fresh init.
    pub weights_in: Option<PathBuf>,
    pub weights_out: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

pub fn cmd_derain(
    input: &Path,
    out: &Path,
    cfg: &RunConfig,
    extra: &DerainOutputs,
) -> Result<String> {
    let img = Image::load(input)?;
    let mask = match &extra.mask {
        Some(p) => RainMask::load(p)?,
        None => compute_rdp(&img, &cfg.mask)?,
    };
    if !mask.matches(&img) {
        return Err(CliError::Usage(format!(
            "mask is {}x{} but image is {}x{}",
            mask.height(),
            mask.width(),
            img.height(),
            img.width()
        )));
    }
    let scorer = load_scorer(cfg)?;
    let init = match &extra.weights_in {
        Some(p) => {
            let net: Network<f32> = load_params(p)?;
            if net.image_channels != img.channels() {
                return Err(CliError::Usage(format!(
                    "weights expect {} channels, image has {}",
                    net.image_channels,
                    img.channels()
                )));
            }
            net
        }
        None => Network::init(img.channels(), cfg.train.width, cfg.train.seed),
    };
    let (net, log) = train_from(init, &img, &mask, &cfg.train, &scorer)?;
    let result = derain(&img, &mask, &net, cfg.train.t_max)?;
    result.save(out)?;
    if let Some(p) = &extra.weights_out {
        save_params(&net, p)?;
    }
    if let Some(p) = &extra.log {
        write_file(p, log.to_csv())?;
    }
    Ok(format!(
        "mask density: {:.2}%\ntrained {} episodes\nwrote {}\n",
        100.0 * mask.density(),
        log.rows.len(),
        out.display()
    ))
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub brisque: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// Scores every PNG in `dir_in` (and compares with the same names in `dir_gt`
/// when given) and writes one CSV row per image plus a `mean` row.
pub fn cmd_eval(
    dir_in: &Path,
    dir_gt: Option<&Path>,
    out: &Path,
    cfg: &RunConfig,
) -> Result<Vec<EvalRow>> {
    let names = png_names(dir_in)?;
    if names.is_empty() {
        return Err(CliError::Usage(format!("no PNG files in {}", dir_in.display())));
    }
    if let Some(gt) = dir_gt {
        let gt_names = png_names(gt)?;
        let missing: Vec<&String> = names.iter().filter(|n| !gt_names.contains(n)).collect();
        let extra: Vec<&String> = gt_names.iter().filter(|n| !names.contains(n)).collect();
        if !missing.is_empty() || !extra.is_empty() {
            let join = |v: &[&String]| {
                v.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            };
            return Err(CliError::Usage(format!(
                "file names differ: missing from ground truth [{}]; missing from input [{}]",
                join(&missing),
                join(&extra)
            )));
        }
    }
    let scorer = load_scorer(cfg)?;
    let rows = names
        .par_iter()
        .map(|name| -> Result<EvalRow> {
            let img = Image::load(dir_in.join(name))?;
            let (psnr, ssim) = match dir_gt {
                Some(gt) => {
                    let reference = Image::load(gt.join(name))?;
                    let m = evaluate(&img, &reference)?;
                    (Some(m.psnr), Some(m.ssim))
                }
                None => (None, None),
            };
            Ok(EvalRow {
                name: name.clone(),
                psnr,
                ssim,
                brisque: brisque_score(&img, &scorer)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("name,psnr,ssim,brisque\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{}", r.name, opt(r.psnr), opt(r.ssim), r.brisque).unwrap();
    }
    let mean = EvalRow {
        name: "mean".into(),
        psnr: dir_gt.map(|_| mean_of(rows.iter().filter_map(|r| r.psnr))),
        ssim: dir_gt.map(|_| mean_of(rows.iter().filter_map(|r| r.ssim))),
        brisque: mean_of(rows.iter().map(|r| r.brisque)),
    };
    writeln!(
        csv,
        "{},{},{},{}",
        mean.name,
        opt(mean.psnr),
        opt(mean.ssim),
        mean.brisque
    )
    .unwrap();
    write_file(out, csv)?;
    let mut all = rows;
    all.push(mean);
    Ok(all)
}

pub fn cmd_brisque(input: &Path, model: Option<&Path>, cfg: &RunConfig) -> Result<String> {
    let img = Image::load(input)?;
    let scorer = match model {
        Some(p) => ScorerModel::load(p)?,
        None => load_scorer(cfg)?,
    };
    Ok(format!("{:.4}\n", brisque_score(&img, &scorer)?))
}

pub fn cmd_synth(clean: &Path, out_rain: &Path, out_mask: &Path, cfg: &RunConfig) -> Result<String> {
    let img = Image::load(clean)?;
    let (rain, mask) = synth::add_streaks(&img, &cfg.streaks, cfg.seed)?;
    rain.save(out_rain)?;
    mask.save(out_mask)?;
    Ok(format!(
        "painted {} pixels ({:.2}%)\n",
        mask.count(),
        100.0 * mask.density()
    ))
}

/// Writes a procedural clean scene.
pub fn cmd_scene(out: &Path, height: usize, width: usize, cfg: &RunConfig) -> Result<String> {
    synth::natural_scene(height, width, cfg.seed)?.save(out)?;
    Ok(format!("wrote {}\n", out.display()))
}

/// Writes the built-in scorer model in the text format.
pub fn cmd_scorer(out: &Path) -> Result<String> {
    synth::synthetic_scorer()?.save(out)?;
    Ok(format!("wrote {}\n", out.display()))
}
