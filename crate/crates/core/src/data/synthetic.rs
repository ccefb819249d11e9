// SPDX-License-Identifier: Apache-2.0

//! Small digit-like 8x8 glyph images with pixel noise, for image
//! experiments that run without external datasets.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::patches::Image;
use crate::error::{Error, Result};
use crate::seed;

pub const GLYPH_SIZE: usize = 8;

const GLYPHS: [[&str; 8]; 10] = [
    ["..####..", ".#....#.", "#......#", "#......#", "#......#", "#......#", ".#....#.", "..####.."],
    ["...##...", "..###...", ".#.##...", "...##...", "...##...", "...##...", "...##...", ".######."],
    ["..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."],
    [".#####..", "......#.", "......#.", "..####..", "......#.", "......#.", "......#.", ".#####.."],
    ["....##..", "...#.#..", "..#..#..", ".#...#..", "########", ".....#..", ".....#..", ".....#.."],
    [".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."],
    ["..####..", ".#......", "#.......", "#.####..", "##....#.", "#......#", ".#....#.", "..####.."],
    [".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."],
    ["..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", "#......#", ".#....#.", "..####.."],
    ["..####..", ".#....#.", "#......#", ".#....##", "..####.#", ".......#", "......#.", "..####.."],
];

/// Noiseless glyph for `digit`.
pub fn glyph(digit: usize) -> Result<Image> {
    let rows = GLYPHS
        .get(digit)
        .ok_or_else(|| Error::OutOfRange(format!("digit {digit}")))?;
    let pixels = rows
        .iter()
        .flat_map(|r| r.bytes().map(|b| if b == b'#' { 255 } else { 0 }))
        .collect();
    Ok(Image {
        height: GLYPH_SIZE,
        width: GLYPH_SIZE,
        pixels,
    })
}

/// `n_per_class` noisy copies of each digit in `digits`: every pixel gets
/// Gaussian noise of standard deviation `noise * 255`, a random one-pixel
/// shift is applied with probability one half. Labels are indices into
/// `digits`.
pub fn noisy_digits(digits: &[usize], n_per_class: usize, noise: f64, seed: u64) -> Result<(Vec<Image>, Vec<usize>)> {
    let normal = Normal::new(0.0, noise.max(0.0) * 255.0).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seed::rng(seed);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (c, &d) in digits.iter().enumerate() {
        let base = glyph(d)?;
        for _ in 0..n_per_class {
            let (dr, dc) = if rng.random::<bool>() {
                (rng.random_range(-1i32..=1), rng.random_range(-1i32..=1))
            } else {
                (0, 0)
            };
            let mut pixels = vec![0u8; GLYPH_SIZE * GLYPH_SIZE];
            for r in 0..GLYPH_SIZE as i32 {
                for col in 0..GLYPH_SIZE as i32 {
                    let (sr, sc) = (r - dr, col - dc);
                    let v = if (0..GLYPH_SIZE as i32).contains(&sr) && (0..GLYPH_SIZE as i32).contains(&sc) {
                        base.pixels[(sr * GLYPH_SIZE as i32 + sc) as usize] as f64
                    } else {
                        0.0
                    };
                    let noisy = v + normal.sample(&mut rng);
                    pixels[(r * GLYPH_SIZE as i32 + col) as usize] = noisy.round().clamp(0.0, 255.0) as u8;
                }
            }
            images.push(Image {
                height: GLYPH_SIZE,
                width: GLYPH_SIZE,
                pixels,
            });
            labels.push(c);
        }
    }
    Ok((images, labels))
}
