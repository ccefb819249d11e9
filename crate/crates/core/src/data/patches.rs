// SPDX-License-Identifier: Apache-2.0

//! Grid partition of images into per-agent patches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grayscale image, row-major pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

/// Partition of an image into a `rows x cols` grid of patches, one per
/// agent, numbered row-major. When the image size is not divisible by the
/// grid, the last row and column of patches absorb the remainder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLayout {
    pub height: usize,
    pub width: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Row boundaries `[r_0 = 0, ..., r_rows = height]`.
    pub row_bounds: Vec<usize>,
    pub col_bounds: Vec<usize>,
}

fn bounds(extent: usize, parts: usize) -> Vec<usize> {
    let base = extent / parts;
    let mut b: Vec<usize> = (0..parts).map(|j| j * base).collect();
    b.push(extent);
    b
}

impl PatchLayout {
    pub fn grid(height: usize, width: usize, grid_rows: usize, grid_cols: usize) -> Result<Self> {
        if grid_rows == 0 || grid_cols == 0 {
            return Err(Error::invalid("grid must have at least one patch"));
        }
        if grid_rows > height || grid_cols > width {
            return Err(Error::invalid(format!(
                "grid {grid_rows}x{grid_cols} larger than image {height}x{width}"
            )));
        }
        Ok(PatchLayout {
            height,
            width,
            grid_rows,
            grid_cols,
            row_bounds: bounds(height, grid_rows),
            col_bounds: bounds(width, grid_cols),
        })
    }

    pub fn num_patches(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Row-major pixel indices of patch `agent`.
    pub fn pixel_indices(&self, agent: usize) -> Vec<usize> {
        let (pr, pc) = (agent / self.grid_cols, agent % self.grid_cols);
        let mut idx = Vec::new();
        for r in self.row_bounds[pr]..self.row_bounds[pr + 1] {
            for c in self.col_bounds[pc]..self.col_bounds[pc + 1] {
                idx.push(r * self.width + c);
            }
        }
        idx
    }

    pub fn patch_size(&self, agent: usize) -> usize {
        let (pr, pc) = (agent / self.grid_cols, agent % self.grid_cols);
        (self.row_bounds[pr + 1] - self.row_bounds[pr]) * (self.col_bounds[pc + 1] - self.col_bounds[pc])
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.height != self.height || img.width != self.width || img.pixels.len() != self.height * self.width {
            return Err(Error::invalid(format!(
                "image {}x{} does not match layout {}x{}",
                img.height, img.width, self.height, self.width
            )));
        }
        Ok(())
    }

    /// Splits one image into per-agent views scaled to `[0, 1]`.
    pub fn split(&self, img: &Image) -> Result<Vec<Vec<f64>>> {
        self.check(img)?;
        Ok((0..self.num_patches())
            .map(|k| {
                self.pixel_indices(k)
                    .into_iter()
                    .map(|p| img.pixels[p] as f64 / 255.0)
                    .collect()
            })
            .collect())
    }

    /// Inverse of [`PatchLayout::split`].
    pub fn reassemble(&self, views: &[Vec<f64>]) -> Result<Image> {
        if views.len() != self.num_patches() {
            return Err(Error::DimensionMismatch {
                expected: self.num_patches(),
                actual: views.len(),
                context: "patch views",
            });
        }
        let mut pixels = vec![0u8; self.height * self.width];
        for (k, v) in views.iter().enumerate() {
            let idx = self.pixel_indices(k);
            if idx.len() != v.len() {
                return Err(Error::DimensionMismatch {
                    expected: idx.len(),
                    actual: v.len(),
                    context: "patch size",
                });
            }
            for (p, x) in idx.into_iter().zip(v) {
                pixels[p] = (x * 255.0).round() as u8;
            }
        }
        Ok(Image {
            height: self.height,
            width: self.width,
            pixels,
        })
    }
}

/// Splits a batch of images: `result[k][n]` is agent `k`'s view of image `n`.
pub fn split_patches(images: &[Image], layout: &PatchLayout) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut views = vec![Vec::with_capacity(images.len()); layout.num_patches()];
    for img in images {
        for (k, v) in layout.split(img)?.into_iter().enumerate() {
            views[k].push(v);
        }
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image {
            height: h,
            width: w,
            pixels: (0..h * w).map(|i| (i * 7 % 256) as u8).collect(),
        }
    }

    #[test]
    fn mnist_sized_grid_round_trip() {
        let layout = PatchLayout::grid(28, 28, 3, 3).unwrap();
        assert_eq!(layout.row_bounds, vec![0, 9, 18, 28]);
        assert_eq!(layout.patch_size(0), 81);
        assert_eq!(layout.patch_size(8), 100);
        let total: usize = (0..9).map(|k| layout.patch_size(k)).sum();
        assert_eq!(total, 784);
        let img = ramp(28, 28);
        let views = layout.split(&img).unwrap();
        assert_eq!(views.len(), 9);
        assert!(views.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(layout.reassemble(&views).unwrap(), img);
    }

    #[test]
    fn patches_partition_pixels() {
        let layout = PatchLayout::grid(11, 7, 3, 2).unwrap();
        let mut seen = vec![0; 77];
        for k in 0..6 {
            for p in layout.pixel_indices(k) {
                seen[p] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn single_patch_is_identity() {
        let layout = PatchLayout::grid(5, 4, 1, 1).unwrap();
        let img = ramp(5, 4);
        let v = layout.split(&img).unwrap();
        let expect: Vec<f64> = img.pixels.iter().map(|&p| p as f64 / 255.0).collect();
        assert_eq!(v, vec![expect]);
    }

    #[test]
    fn invalid_layouts() {
        assert!(PatchLayout::grid(4, 4, 5, 1).is_err());
        assert!(PatchLayout::grid(4, 4, 0, 1).is_err());
        let layout = PatchLayout::grid(4, 4, 2, 2).unwrap();
        assert!(layout.split(&ramp(5, 4)).is_err());
    }
}
