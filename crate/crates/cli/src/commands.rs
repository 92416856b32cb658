//! Command implementations. Each returns the number of per-item errors it
//! logged; fatal problems are returned as `Err`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cscf_core::afri::{fuse_pipeline, FusionOutput};
use cscf_core::grid::{
    deserialize_tensor, read_image, serialize_tensor, write_image, CoeffMap, Dictionary,
};
use cscf_core::jsrl::{learn_dictionary_with, DictInit};
use cscf_core::metrics::metric_report;
use cscf_core::synth::{planted_scene, SceneSpec};
use cscf_core::vgii::{
    calibrate_film, encode, fit_transfer, infer_ir, inference_losses, FeatureProvider, FilmParams,
    SemanticProvider, TransferOp,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{find_images, find_pairs, find_visible, load_pairs};
use crate::settings::{ProviderKind, Settings};

pub const DICTIONARY_FILE: &str = "dictionary.cscf";
pub const TRANSFER_FILE: &str = "transfer.cscf";
pub const FILM_FILE: &str = "film.cscf";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const FUSION_REPORT_FILE: &str = "fusion_report.csv";
pub const METRICS_FILE: &str = "metrics.csv";

pub const FUSION_REPORT_HEADER: &str = "file,inf_grad,fuse_int,fuse_grad,fuse_total,ag,en,sf,ei";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn require_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    Ok(())
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{} does not exist", path.display());
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    require_file(path)?;
    deserialize_tensor(path).with_context(|| format!("reading dictionary {}", path.display()))
}

pub fn load_transfer(path: &Path) -> Result<TransferOp> {
    require_file(path)?;
    deserialize_tensor(path).with_context(|| format!("reading transfer {}", path.display()))
}

pub fn load_provider(settings: &Settings) -> Result<SemanticProvider> {
    let path = || {
        settings
            .provider_path
            .as_deref()
            .with_context(|| format!("provider={} needs provider_path", settings.provider))
    };
    Ok(match settings.provider {
        ProviderKind::Identity => SemanticProvider::Identity,
        ProviderKind::Calibrated => SemanticProvider::Calibrated(
            FilmParams::load(path()?).context("reading film calibration")?,
        ),
        ProviderKind::File => SemanticProvider::File(
            FeatureProvider::load(path()?).context("reading feature provider")?,
        ),
    })
}

/// Writes a planted scene as `scene_NN_{vis,ir}.pgm` plus the true
/// dictionary.
pub fn synth(spec: &SceneSpec, seed: u64, out: &Path) -> Result<usize> {
    create_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = planted_scene(spec, &mut rng)?;
    for (i, pair) in scene.pairs.iter().enumerate() {
        write_image(&pair.vis, out.join(format!("scene_{i:02}_vis.pgm")))?;
        write_image(&pair.ir, out.join(format!("scene_{i:02}_ir.pgm")))?;
    }
    serialize_tensor(&scene.dict, out.join("planted_dictionary.cscf"))?;
    log::info!(
        "wrote {} planted pairs to {}",
        scene.pairs.len(),
        out.display()
    );
    Ok(0)
}

/// Seeded random crops, aligned across the two modalities of each pair.
pub fn patches(settings: &Settings, input: &Path, out: &Path) -> Result<usize> {
    require_dir(input)?;
    create_dir(out)?;
    let size = settings.patch_size;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut written = 0;
    for pair in find_pairs(input)? {
        if settings.patch_count == 0 {
            break;
        }
        let (vis, ir) = load_pairs(std::slice::from_ref(&pair))?.remove(0);
        let (h, w) = vis.dims();
        if h < size || w < size {
            log::warn!(
                "skipping {}: {h}x{w} is smaller than {size}x{size}",
                pair.stem
            );
            continue;
        }
        for i in 0..settings.patch_count {
            let y0 = rng.random_range(0..=h - size);
            let x0 = rng.random_range(0..=w - size);
            let stem = format!("{}_p{i:03}", pair.stem);
            write_image(
                &vis.crop(y0, x0, size, size)?,
                out.join(format!("{stem}_vis.pgm")),
            )?;
            write_image(
                &ir.crop(y0, x0, size, size)?,
                out.join(format!("{stem}_ir.pgm")),
            )?;
            written += 1;
        }
    }
    log::info!("wrote {written} patch pairs to {}", out.display());
    Ok(0)
}

pub fn learn(settings: &Settings, input: &Path, out: &Path) -> Result<(Dictionary, usize)> {
    require_dir(input)?;
    create_dir(out)?;
    let pairs = load_pairs(&find_pairs(input)?)?;
    log::info!("learning from {} pairs in {}", pairs.len(), input.display());
    let init = match &settings.init {
        Some(path) => DictInit::Provided(load_dictionary(path)?),
        None => DictInit::RandomUnit,
    };
    let cfg = settings.jsrl(init);
    let dict_path = out.join(DICTIONARY_FILE);
    let (dict, history) = learn_dictionary_with(&pairs, &cfg, |sweep, state| {
        let r = state.history.last().expect("sweep recorded");
        log::debug!(
            "sweep {sweep}: ell_S={:.6e} ell_D={:.6e} psnr={:.3}",
            r.ell_s,
            r.ell_d,
            r.psnr
        );
        if settings.checkpoint {
            serialize_tensor(&state.dict, &dict_path)?;
        }
        Ok(())
    })?;
    serialize_tensor(&dict, &dict_path)?;
    let mut csv = String::from("iteration,ell_S,ell_D,psnr\n");
    for (i, r) in history.iter().enumerate() {
        csv.push_str(&format!("{},{},{},{}\n", i + 1, r.ell_s, r.ell_d, r.psnr));
    }
    write_text(&out.join(RESIDUALS_FILE), &csv)?;
    if let Some(last) = history.last() {
        log::info!(
            "final ell_D={:.6e}, mean psnr {:.2} dB",
            last.ell_d,
            last.psnr
        );
    }
    Ok((dict, 0))
}

/// Fitted transfer and, with a calibrated provider, the FiLM parameters.
pub struct TransferFit {
    pub op: TransferOp,
    pub film: Option<FilmParams>,
}

/// Encodes both modalities with the frozen dictionary and regresses the
/// infrared codes on the visible ones.
pub fn fit_transfer_cmd(
    settings: &Settings,
    dict: &Dictionary,
    input: &Path,
    out: &Path,
) -> Result<(TransferFit, usize)> {
    require_dir(input)?;
    create_dir(out)?;
    let pairs = load_pairs(&find_pairs(input)?)?;
    if pairs.is_empty() {
        bail!("no image pairs in {}", input.display());
    }
    log::info!("fitting transfer with ridge {}", settings.ridge);
    let iters = settings.encode_iters;
    let codes: Vec<(CoeffMap, CoeffMap)> = pairs
        .par_iter()
        .map(|(v, r)| {
            Ok((
                encode(v, dict, &settings.params, iters)?,
                encode(r, dict, &settings.params, iters)?,
            ))
        })
        .collect::<cscf_core::Result<_>>()?;
    let op = fit_transfer(&codes, settings.ridge)?;
    serialize_tensor(&op, out.join(TRANSFER_FILE))?;

    let (film, provider) = if settings.provider == ProviderKind::Calibrated {
        let film = calibrate_film(&codes, &op)?;
        film.save(out.join(FILM_FILE))?;
        (Some(film.clone()), SemanticProvider::Calibrated(film))
    } else {
        (None, load_provider(settings)?)
    };

    let losses: Vec<_> = pairs
        .par_iter()
        .zip(&codes)
        .map(|((v, r), (_, s_ir))| {
            let inf = infer_ir(v, dict, &op, &provider, &settings.params, iters)?;
            inference_losses(&inf.i_pir, r, &inf.s_pir, s_ir, v)
        })
        .collect::<cscf_core::Result<_>>()?;
    let n = losses.len() as f64;
    let mean =
        |f: fn(&cscf_core::vgii::InferenceLosses) -> f64| losses.iter().map(f).sum::<f64>() / n;
    log::info!(
        "training-set losses: int={:.6e} reg={:.6e} grad={:.6e} total={:.6e}",
        mean(|l| l.int),
        mean(|l| l.reg),
        mean(|l| l.grad),
        mean(|l| l.total)
    );
    Ok((TransferFit { op, film }, 0))
}

pub fn infer_ir_cmd(
    settings: &Settings,
    dict: &Dictionary,
    op: &TransferOp,
    provider: &SemanticProvider,
    input: &Path,
    out: &Path,
) -> Result<usize> {
    require_dir(input)?;
    create_dir(out)?;
    let images = find_visible(input)?;
    if images.is_empty() {
        log::warn!("no visible images in {}", input.display());
    }
    let errors: usize = images
        .par_iter()
        .map(|(stem, path)| {
            let result = read_image(path)
                .map_err(anyhow::Error::from)
                .and_then(|img| {
                    let inf = infer_ir(
                        &img,
                        dict,
                        op,
                        provider,
                        &settings.params,
                        settings.encode_iters,
                    )?;
                    write_image(&inf.i_pir, out.join(format!("{stem}_pir.pgm")))?;
                    Ok(())
                });
            match result {
                Ok(()) => 0,
                Err(e) => {
                    log::error!("{}: {e:#}", path.display());
                    1
                }
            }
        })
        .sum();
    Ok(errors)
}

fn report_row(name: &str, o: &FusionOutput) -> String {
    let r = &o.report;
    format!(
        "{name},{},{},{},{},{},{},{},{}\n",
        r.inf_grad,
        r.fusion.int,
        r.fusion.grad,
        r.fusion.total,
        r.metrics.ag,
        r.metrics.en,
        r.metrics.sf,
        r.metrics.ei
    )
}

/// Fuses every visible image of `input`; with `tensors` the fused images are
/// also written in the lossless tensor format.
pub fn fuse_cmd(
    settings: &Settings,
    dict: &Dictionary,
    op: &TransferOp,
    provider: &SemanticProvider,
    input: &Path,
    out: &Path,
    tensors: bool,
) -> Result<usize> {
    require_dir(input)?;
    create_dir(out)?;
    let gate = settings.gate();
    let images = find_visible(input)?;
    if images.is_empty() {
        log::warn!(
            "no visible images in {}; writing an empty report",
            input.display()
        );
    }
    let rows: Vec<Option<String>> = images
        .par_iter()
        .map(|(stem, path)| {
            let result = read_image(path)
                .map_err(anyhow::Error::from)
                .and_then(|img| {
                    let o = fuse_pipeline(
                        &img,
                        dict,
                        op,
                        provider,
                        &gate,
                        &settings.params,
                        settings.encode_iters,
                    )?;
                    write_image(&o.fused, out.join(format!("{stem}_fused.pgm")))?;
                    if tensors {
                        serialize_tensor(&o.fused, out.join(format!("{stem}_fused.cscf")))?;
                    }
                    Ok(report_row(&format!("{stem}_fused"), &o))
                });
            result
                .map_err(|e| log::error!("{}: {e:#}", path.display()))
                .ok()
        })
        .collect();
    let mut csv = format!("{FUSION_REPORT_HEADER}\n");
    let mut errors = 0;
    for row in rows {
        match row {
            Some(r) => csv.push_str(&r),
            None => errors += 1,
        }
    }
    write_text(&out.join(FUSION_REPORT_FILE), &csv)?;
    log::info!("fused {} of {} images", images.len() - errors, images.len());
    Ok(errors)
}

/// Metric rows for files and directories (expanded to their images).
pub fn metrics_cmd(paths: &[PathBuf], out: Option<&Path>) -> Result<usize> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            files.extend(find_images(p)?);
        } else {
            files.push(p.clone());
        }
    }
    let mut csv = String::from("path,ag,en,sf,ei\n");
    let mut errors = 0;
    for f in &files {
        match read_image(f).and_then(|img| metric_report(&img)) {
            Ok(m) => csv.push_str(&format!(
                "{},{},{},{},{}\n",
                f.display(),
                m.ag,
                m.en,
                m.sf,
                m.ei
            )),
            Err(e) => {
                log::error!("{}: {e}", f.display());
                errors += 1;
            }
        }
    }
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_text(&dir.join(METRICS_FILE), &csv)?;
        }
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(errors)
}

/// Patches (when `patch_count > 0`), learning, transfer fitting and fusion
/// of the visible images of `input`.
pub fn pipeline(settings: &Settings, input: &Path, out: &Path) -> Result<usize> {
    require_dir(input)?;
    create_dir(out)?;
    let train_dir = if settings.patch_count > 0 {
        let dir = out.join("patches");
        patches(settings, input, &dir)?;
        dir
    } else {
        input.to_path_buf()
    };
    let (dict, _) = learn(settings, &train_dir, out)?;
    let (fit, _) = fit_transfer_cmd(settings, &dict, &train_dir, out)?;
    let provider = match fit.film {
        Some(film) => SemanticProvider::Calibrated(film),
        None => load_provider(settings)?,
    };
    fuse_cmd(
        settings,
        &dict,
        &fit.op,
        &provider,
        input,
        &out.join("fused"),
        true,
    )
}
