//! Input discovery: `<stem>_vis.<ext>` / `<stem>_ir.<ext>` pairs and plain
//! image lists, with `ext` one of `pgm` or `cscf`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cscf_core::grid::{read_image, Image};

const EXTENSIONS: [&str; 2] = ["pgm", "cscf"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairPaths {
    pub stem: String,
    pub vis: PathBuf,
    pub ir: PathBuf,
}

fn split_name(path: &Path) -> Option<(String, &'static str)> {
    let ext = path.extension()?.to_str()?;
    if !EXTENSIONS.contains(&ext) {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    if let Some(s) = stem.strip_suffix("_vis") {
        Some((s.to_string(), "vis"))
    } else {
        stem.strip_suffix("_ir").map(|s| (s.to_string(), "ir"))
    }
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Matches every visible image with its infrared partner; an unmatched
/// file on either side is an error naming it.
pub fn find_pairs(dir: &Path) -> Result<Vec<PairPaths>> {
    let mut vis = BTreeMap::new();
    let mut ir = BTreeMap::new();
    for path in sorted_files(dir)? {
        match split_name(&path) {
            Some((stem, "vis")) => {
                vis.insert(stem, path);
            }
            Some((stem, _)) => {
                ir.insert(stem, path);
            }
            None => {}
        }
    }
    if let Some((_, orphan)) = ir.iter().find(|(s, _)| !vis.contains_key(*s)) {
        bail!("{} has no matching visible image", orphan.display());
    }
    vis.into_iter()
        .map(|(stem, v)| match ir.remove(&stem) {
            Some(r) => Ok(PairPaths {
                stem,
                vis: v,
                ir: r,
            }),
            None => bail!("{} has no matching infrared image", v.display()),
        })
        .collect()
}

/// Visible images of a directory as `(stem, path)`.
pub fn find_visible(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    Ok(sorted_files(dir)?
        .into_iter()
        .filter_map(|p| match split_name(&p) {
            Some((stem, "vis")) => Some((stem, p)),
            _ => None,
        })
        .collect())
}

/// Every readable image file in `dir`, sorted.
pub fn find_images(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_files(dir)?
        .into_iter()
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| EXTENSIONS.contains(&e))
        })
        .collect())
}

pub fn load_pairs(pairs: &[PairPaths]) -> Result<Vec<(Image, Image)>> {
    pairs
        .iter()
        .map(|p| {
            let v = read_image(&p.vis).with_context(|| format!("reading {}", p.vis.display()))?;
            let r = read_image(&p.ir).with_context(|| format!("reading {}", p.ir.display()))?;
            if v.dims() != r.dims() {
                bail!(
                    "{} is {}x{} but {} is {}x{}",
                    p.vis.display(),
                    v.height(),
                    v.width(),
                    p.ir.display(),
                    r.height(),
                    r.width()
                );
            }
            Ok((v, r))
        })
        .collect()
}
