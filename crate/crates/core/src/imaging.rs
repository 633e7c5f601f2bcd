//! Path-pair rasterization, augmentation, and feature flattening.
//!
//! A path image paints both routes of a pair onto a blank raster (obstacles
//! are deliberately absent: the classifier judges route geometry, not map
//! layout). Shared cells always read as `Original` — the adversarial route
//! is painted first and the original painted over it — so the
//! `AdversarialOnly` class marks exactly the cells where the adversarial
//! route departs from the original.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gridworld::{Cell, PathPair};

/// What a raster pixel shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PixelClass {
    Background,
    /// Visited by the original path (shared cells included).
    Original,
    /// Visited by the adversarial path only.
    AdversarialOnly,
}

/// A row-major raster of pixel classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<PixelClass>,
}

impl PathImage {
    pub fn blank(width: usize, height: usize) -> Self {
        PathImage { width, height, pixels: vec![PixelClass::Background; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> PixelClass {
        self.pixels[y * self.width + x]
    }

    fn set(&mut self, c: Cell, class: PixelClass) {
        self.pixels[c.y as usize * self.width + c.x as usize] = class;
    }

    /// Pixel totals as `(background, original, adversarial_only)`.
    pub fn class_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for p in &self.pixels {
            match p {
                PixelClass::Background => counts.0 += 1,
                PixelClass::Original => counts.1 += 1,
                PixelClass::AdversarialOnly => counts.2 += 1,
            }
        }
        counts
    }
}

/// The augmentation group: reflections and quarter-turn rotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmentOp {
    Identity,
    FlipH,
    FlipV,
    Rot90,
    Rot180,
    Rot270,
}

impl AugmentOp {
    /// The five ops that actually move pixels; these are what augmentation
    /// samples from.
    pub const NON_IDENTITY: [AugmentOp; 5] = [
        AugmentOp::FlipH,
        AugmentOp::FlipV,
        AugmentOp::Rot90,
        AugmentOp::Rot180,
        AugmentOp::Rot270,
    ];

    /// Destination of pixel `(x, y)` on a `size`-square raster (flips also
    /// accept non-square rasters via their own width/height).
    fn map(self, x: usize, y: usize, width: usize, height: usize) -> (usize, usize) {
        match self {
            AugmentOp::Identity => (x, y),
            AugmentOp::FlipH => (width - 1 - x, y),
            AugmentOp::FlipV => (x, height - 1 - y),
            AugmentOp::Rot90 => (height - 1 - y, x),
            AugmentOp::Rot180 => (width - 1 - x, height - 1 - y),
            AugmentOp::Rot270 => (y, width - 1 - x),
        }
    }

    fn needs_square(self) -> bool {
        matches!(self, AugmentOp::Rot90 | AugmentOp::Rot270)
    }
}

/// Imaging failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("path cell {cell} falls outside the {width}x{height} raster")]
    CellOutOfRaster { cell: Cell, width: usize, height: usize },
    #[error("rotating a {width}x{height} raster requires it to be square")]
    NonSquareRotation { width: usize, height: usize },
    #[error("cannot balance an empty minority class")]
    EmptyMinority,
}

/// Paints a path pair onto a blank raster.
///
/// The adversarial route is painted first and the original second, so any
/// cell both routes visit reads `Original` and no shared cell can ever read
/// `AdversarialOnly`.
pub fn rasterize(pp: &PathPair, width: usize, height: usize) -> Result<PathImage, ImageError> {
    let mut img = PathImage::blank(width, height);
    let in_raster = |c: Cell| {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < width && (c.y as usize) < height
    };
    for &cell in &pp.adversarial.steps {
        if !in_raster(cell) {
            return Err(ImageError::CellOutOfRaster { cell, width, height });
        }
        img.set(cell, PixelClass::AdversarialOnly);
    }
    for &cell in &pp.original.steps {
        if !in_raster(cell) {
            return Err(ImageError::CellOutOfRaster { cell, width, height });
        }
        img.set(cell, PixelClass::Original);
    }
    Ok(img)
}

/// Applies one augmentation op, returning a new raster of the same size.
/// Quarter-turn rotations require a square raster.
pub fn apply_augment(img: &PathImage, op: AugmentOp) -> Result<PathImage, ImageError> {
    if op.needs_square() && img.width != img.height {
        return Err(ImageError::NonSquareRotation { width: img.width, height: img.height });
    }
    let mut out = PathImage::blank(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let (nx, ny) = op.map(x, y, img.width, img.height);
            out.pixels[ny * out.width + nx] = img.get(x, y);
        }
    }
    Ok(out)
}

/// Grows a minority image list to `target_count` by appending augmented
/// copies: each appended image is a uniformly drawn source image transformed
/// by a uniformly drawn non-identity op. The input images are preserved at
/// the front of the result, and a target at or below the current count is a
/// no-op.
pub fn balance_classes(
    minority: &[PathImage],
    target_count: usize,
    seed: u64,
) -> Result<Vec<PathImage>, ImageError> {
    if minority.is_empty() {
        return Err(ImageError::EmptyMinority);
    }
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = minority.to_vec();
    while out.len() < target_count {
        let source = &minority[rng.gen_range(0..minority.len())];
        let op = AugmentOp::NON_IDENTITY[rng.gen_range(0..AugmentOp::NON_IDENTITY.len())];
        out.push(apply_augment(source, op)?);
    }
    Ok(out)
}

/// Flattens a raster into the classifier's feature layout: two one-hot
/// channels of `width * height` entries each, `Original` first and then
/// `AdversarialOnly`, both row-major.
pub fn flatten(img: &PathImage) -> Vec<f64> {
    let n = img.width * img.height;
    let mut v = vec![0.0; 2 * n];
    for (i, p) in img.pixels.iter().enumerate() {
        match p {
            PixelClass::Original => v[i] = 1.0,
            PixelClass::AdversarialOnly => v[n + i] = 1.0,
            PixelClass::Background => {}
        }
    }
    v
}

/// Renders the raster as a plain-text PPM (P3): original cells red,
/// adversarial-only cells blue, background white.
pub fn to_ppm(img: &PathImage) -> String {
    let mut out = String::with_capacity(img.pixels.len() * 12 + 32);
    out.push_str(&format!("P3\n{} {}\n255\n", img.width, img.height));
    for y in 0..img.height {
        let mut row = Vec::with_capacity(img.width);
        for x in 0..img.width {
            row.push(match img.get(x, y) {
                PixelClass::Background => "255 255 255",
                PixelClass::Original => "255 0 0",
                PixelClass::AdversarialOnly => "0 0 255",
            });
        }
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
