// SPDX-License-Identifier: Apache-2.0

//! IDX and CSV image readers, plus file hashing for dataset manifests.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::patches::{Image, PatchLayout};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

/// Parses an IDX3 unsigned-byte image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let height = be_u32(bytes, 8)? as usize;
    let width = be_u32(bytes, 12)? as usize;
    let size = height * width;
    let body = &bytes[16..];
    if body.len() != n * size {
        return Err(Error::Format(format!(
            "IDX image payload has {} bytes, expected {}",
            body.len(),
            n * size
        )));
    }
    Ok(body
        .chunks_exact(size.max(1))
        .take(n)
        .map(|px| Image {
            height,
            width,
            pixels: px.to_vec(),
        })
        .collect())
}

/// Parses an IDX1 unsigned-byte label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::Format(format!(
            "IDX label payload has {} bytes, expected {n}",
            body.len()
        )));
    }
    Ok(body.to_vec())
}

pub fn encode_idx_images(images: &[Image]) -> Result<Vec<u8>> {
    let (h, w) = images.first().map_or((0, 0), |i| (i.height, i.width));
    if images.iter().any(|i| i.height != h || i.width != w) {
        return Err(Error::invalid("IDX images must share dimensions"));
    }
    let mut out = Vec::with_capacity(16 + images.len() * h * w);
    for v in [IDX_IMAGES_MAGIC, images.len() as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    images.iter().for_each(|i| out.extend_from_slice(&i.pixels));
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Reads an image/label IDX pair.
pub fn read_idx_pair(images: &Path, labels: &Path) -> Result<(Vec<Image>, Vec<u8>)> {
    let imgs = parse_idx_images(&read_all(images)?)?;
    let labs = parse_idx_labels(&read_all(labels)?)?;
    if imgs.len() != labs.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            imgs.len(),
            labs.len()
        )));
    }
    Ok((imgs, labs))
}

/// Reads `label,p0,...,p{h*w-1}` rows; a non-numeric first row is treated
/// as a header.
pub fn read_csv_images(path: &Path, height: usize, width: usize) -> Result<(Vec<Image>, Vec<u8>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let first = rec.get(0).unwrap_or("").trim();
        let Ok(label) = first.parse::<u8>() else {
            if row == 0 {
                continue;
            }
            return Err(Error::Format(format!("row {row}: bad label {first:?}")));
        };
        if rec.len() != 1 + height * width {
            return Err(Error::Format(format!(
                "row {row}: {} fields, expected {}",
                rec.len(),
                1 + height * width
            )));
        }
        let pixels = rec
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<u8>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        images.push(Image {
            height,
            width,
            pixels,
        });
        labels.push(label);
    }
    Ok((images, labels))
}

pub fn write_csv_images(path: &Path, images: &[Image], labels: &[u8]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    for (img, &l) in images.iter().zip(labels) {
        let mut rec = vec![l.to_string()];
        rec.extend(img.pixels.iter().map(|p| p.to_string()));
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(read_all(path)?)))
}

/// Dataset manifest: source files with expected hashes, patch layout and
/// class selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: ImageFormat,
    pub train_images: String,
    #[serde(default)]
    pub train_labels: Option<String>,
    #[serde(default)]
    pub sha256: std::collections::BTreeMap<String, String>,
    pub height: usize,
    pub width: usize,
    pub layout: LayoutSpec,
    /// Original labels mapped to class indices `0..M` in this order.
    pub classes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Idx,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl DatasetManifest {
    pub fn layout(&self) -> Result<PatchLayout> {
        PatchLayout::grid(self.height, self.width, self.layout.grid_rows, self.layout.grid_cols)
    }

    fn resolve(base: &Path, p: &str) -> std::path::PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    pub fn files(&self, base: &Path) -> Vec<std::path::PathBuf> {
        let mut v = vec![Self::resolve(base, &self.train_images)];
        if let Some(l) = &self.train_labels {
            v.push(Self::resolve(base, l));
        }
        v
    }

    /// Checks that the files exist and, where hashes are recorded, that
    /// they match. Returns `(file, sha256)` for every file.
    pub fn verify(&self, base: &Path) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for path in self.files(base) {
            if !path.exists() {
                return Err(Error::Config(format!("missing data file {}", path.display())));
            }
            let digest = sha256_file(&path)?;
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if let Some(expect) = self.sha256.get(&name) {
                if !expect.eq_ignore_ascii_case(&digest) {
                    return Err(Error::Config(format!(
                        "sha256 mismatch for {name}: expected {expect}, got {digest}"
                    )));
                }
            }
            out.push((name, digest));
        }
        Ok(out)
    }

    /// Loads images restricted to the selected classes, relabelled to
    /// `0..M`.
    pub fn load(&self, base: &Path) -> Result<(Vec<Image>, Vec<usize>)> {
        let files = self.files(base);
        let (images, raw) = match self.format {
            ImageFormat::Idx => {
                let labels = files
                    .get(1)
                    .ok_or_else(|| Error::Config("IDX manifest needs train_labels".into()))?;
                read_idx_pair(&files[0], labels)?
            }
            ImageFormat::Csv => read_csv_images(&files[0], self.height, self.width)?,
        };
        let mut imgs = Vec::new();
        let mut labels = Vec::new();
        for (img, l) in images.into_iter().zip(raw) {
            if let Some(c) = self.classes.iter().position(|&x| x == l) {
                if img.height != self.height || img.width != self.width {
                    return Err(Error::Format("image size does not match manifest".into()));
                }
                imgs.push(img);
                labels.push(c);
            }
        }
        Ok((imgs, labels))
    }
}
