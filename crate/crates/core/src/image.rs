//! In-memory linear-RGB images, illuminants and the geometric pipeline
//! (center crop, bilinear resize, translation/reflection augmentation,
//! rectangular masking).
//!
//! All values are `f64` in linear light. Images are row-major.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector::{self, Vec3};

/// Default side of the square network input.
pub const DEFAULT_SIDE: usize = 224;

/// Tolerance on `‖e‖ − √3` for an illuminant to count as normalized.
pub const NORMALIZED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelRgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl PixelRgb {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn to_array(self) -> Vec3 {
        [self.r, self.g, self.b]
    }

    pub fn from_array(a: Vec3) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_valid(&self) -> bool {
        [self.r, self.g, self.b]
            .iter()
            .all(|c| c.is_finite() && *c >= 0.0)
    }

    #[inline]
    pub fn channel(&self, c: usize) -> f64 {
        match c {
            0 => self.r,
            1 => self.g,
            2 => self.b,
            _ => panic!("channel index {c} out of range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    pixels: Vec<PixelRgb>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, pixels: Vec<PixelRgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::domain(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_valid()) {
            return Err(Error::domain(format!(
                "pixel {i} is negative or non-finite: {:?}",
                pixels[i]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from a per-coordinate generator `f(x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> PixelRgb,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn uniform(width: usize, height: usize, color: PixelRgb) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[PixelRgb] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<PixelRgb> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> PixelRgb {
        self.pixels[y * self.width + x]
    }

    /// Multiplies every channel by `s` (global exposure change).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        self.map_pixels(|p| PixelRgb::new(p.r * s, p.g * s, p.b * s))
    }

    pub fn mirror_horizontal(&self) -> Self {
        let w = self.width;
        let pixels = (0..self.height)
            .flat_map(|y| (0..w).rev().map(move |x| (x, y)))
            .map(|(x, y)| self.get(x, y))
            .collect();
        Self {
            width: w,
            height: self.height,
            pixels,
        }
    }

    fn map_pixels(&self, f: impl Fn(PixelRgb) -> PixelRgb) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixels.iter().copied().map(f).collect(),
        )
    }
}

/// Global illumination color. Components are strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Illuminant {
    rgb: Vec3,
}

impl Illuminant {
    pub fn new(e1: f64, e2: f64, e3: f64) -> Result<Self> {
        Self::from_array([e1, e2, e3])
    }

    pub fn from_array(rgb: Vec3) -> Result<Self> {
        if rgb.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::domain(format!(
                "illuminant components must be positive and finite, got {rgb:?}"
            )));
        }
        Ok(Self { rgb })
    }

    /// The neutral light (1, 1, 1), already of length √3.
    pub const fn neutral() -> Self {
        Self { rgb: [1.0; 3] }
    }

    pub fn as_array(&self) -> Vec3 {
        self.rgb
    }

    pub fn is_normalized(&self) -> bool {
        (vector::norm(&self.rgb) - 3f64.sqrt()).abs() <= NORMALIZED_TOL
    }

    pub fn normalized(&self) -> Self {
        // positive components guarantee a nonzero norm
        Self {
            rgb: normalize_vector(&self.rgb).expect("positive illuminant has nonzero norm"),
        }
    }
}

/// Rescales an arbitrary nonzero 3-vector to length √3, keeping its direction.
pub fn normalize_vector(v: &Vec3) -> Result<Vec3> {
    if !vector::is_finite(v) {
        return Err(Error::domain(format!("non-finite vector {v:?}")));
    }
    let n = vector::norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::domain(format!("cannot normalize vector {v:?}")));
    }
    Ok(vector::scale(v, 3f64.sqrt() / n))
}

/// `e ← √3·e/‖e‖`.
pub fn normalize_illuminant(e: &Illuminant) -> Illuminant {
    e.normalized()
}

/// Discounts the illuminant: `(R, G, B) ↦ (R/e1, G/e2, B/e3)`.
pub fn von_kries_correct(img: &LinearImage, e: &Illuminant) -> Result<LinearImage> {
    let [e1, e2, e3] = e.as_array();
    img.map_pixels(|p| PixelRgb::new(p.r / e1, p.g / e2, p.b / e3))
}

/// Applies an illuminant cast: `(R, G, B) ↦ (e1·R, e2·G, e3·B)`.
pub fn von_kries_cast(img: &LinearImage, e: &Illuminant) -> Result<LinearImage> {
    let [e1, e2, e3] = e.as_array();
    img.map_pixels(|p| PixelRgb::new(p.r * e1, p.g * e2, p.b * e3))
}

/// Axis-aligned rectangle excluded from estimation (gray ball, color chart).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskRect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl MaskRect {
    pub const fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h
    }

    pub fn check_inside(&self, img: &LinearImage) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::domain(format!("mask {self:?} has zero extent")));
        }
        if self.x0 + self.w > img.width() || self.y0 + self.h > img.height() {
            return Err(Error::domain(format!(
                "mask {:?} exceeds the {}x{} image",
                self,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    /// True when the square neighbourhood of radius `r` around `(x, y)`
    /// touches the mask.
    pub(crate) fn touches(&self, x: usize, y: usize, r: usize) -> bool {
        x + r >= self.x0 && x < self.x0 + self.w + r && y + r >= self.y0 && y < self.y0 + self.h + r
    }
}

/// Pixels outside the mask, in row-major order.
pub fn masked_pixels(img: &LinearImage, mask: Option<&MaskRect>) -> Result<Vec<PixelRgb>> {
    match mask {
        None => Ok(img.pixels().to_vec()),
        Some(m) => {
            m.check_inside(img)?;
            let w = img.width();
            Ok(img
                .pixels()
                .iter()
                .enumerate()
                .filter(|(i, _)| !m.contains(i % w, i / w))
                .map(|(_, p)| *p)
                .collect())
        }
    }
}

/// Source taps `(lo, hi, t)` of a bilinear resample from `src_side` to
/// `side` samples (half-pixel centers, edge clamped).
fn resample_taps(src_side: usize, side: usize) -> Vec<(usize, usize, f64)> {
    let ratio = src_side as f64 / side as f64;
    let last = (src_side - 1) as f64;
    (0..side)
        .map(|d| {
            let s = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, last);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src_side - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Square source window plus an optional horizontal reflection, resampled to
/// a `side × side` output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropGeometry {
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
    pub flip: bool,
}

impl CropGeometry {
    /// The centered `min(w, h)` square; odd leftovers go right/bottom.
    pub fn centered(img: &LinearImage) -> Self {
        let s = img.width().min(img.height());
        Self {
            x0: (img.width() - s) / 2,
            y0: (img.height() - s) / 2,
            size: s,
            flip: false,
        }
    }

    pub fn apply(&self, img: &LinearImage, side: usize) -> Result<LinearImage> {
        if side == 0 {
            return Err(Error::contract("output side must be at least 1"));
        }
        if self.size == 0 || self.x0 + self.size > img.width() || self.y0 + self.size > img.height() {
            return Err(Error::contract(format!(
                "crop window {self:?} does not fit the {}x{} image",
                img.width(),
                img.height()
            )));
        }
        let taps = resample_taps(self.size, side);
        let lerp = |a: PixelRgb, b: PixelRgb, t: f64| {
            PixelRgb::new(
                a.r + (b.r - a.r) * t,
                a.g + (b.g - a.g) * t,
                a.b + (b.b - a.b) * t,
            )
        };
        let (x0, y0) = (self.x0, self.y0);
        let out = LinearImage::from_fn(side, side, |x, y| {
            let (xl, xh, tx) = taps[x];
            let (yl, yh, ty) = taps[y];
            let top = lerp(img.get(x0 + xl, y0 + yl), img.get(x0 + xh, y0 + yl), tx);
            let bottom = lerp(img.get(x0 + xl, y0 + yh), img.get(x0 + xh, y0 + yh), tx);
            lerp(top, bottom, ty)
        })?;
        Ok(if self.flip { out.mirror_horizontal() } else { out })
    }

    /// Smallest output rectangle containing every output pixel whose
    /// interpolation reads a masked source pixel; `None` when the mask lies
    /// outside the window.
    pub fn map_mask(&self, mask: &MaskRect, side: usize) -> Option<MaskRect> {
        let taps = resample_taps(self.size, side);
        let span = |m0: usize, mlen: usize, w0: usize| -> Option<(usize, usize)> {
            let lo = m0 as i64 - w0 as i64;
            let hi = lo + mlen as i64;
            let hit = |i: usize| (lo..hi).contains(&(i as i64));
            let mut touched = taps
                .iter()
                .enumerate()
                .filter(|(_, (a, b, t))| hit(*a) || (*t > 0.0 && hit(*b)))
                .map(|(d, _)| d);
            let first = touched.next()?;
            let last = touched.next_back().unwrap_or(first);
            Some((first, last - first + 1))
        };
        let (x, w) = span(mask.x0, mask.w, self.x0)?;
        let (y, h) = span(mask.y0, mask.h, self.y0)?;
        let x = if self.flip { side - (x + w) } else { x };
        Some(MaskRect::new(x, y, w, h))
    }
}

/// Crops the centered `min(w, h)` square (odd leftovers go right/bottom) and
/// resizes it to `side × side`.
pub fn center_square_resize(img: &LinearImage, side: usize) -> Result<LinearImage> {
    CropGeometry::centered(img).apply(img, side)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Largest crop-window translation along each axis, in pixels.
    pub max_shift: usize,
    /// Probability of a horizontal reflection.
    pub hflip_prob: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            max_shift: 30,
            hflip_prob: 0.5,
        }
    }
}

impl AugmentParams {
    pub fn validate_for(&self, img: &LinearImage) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::contract(format!(
                "hflip_prob must lie in [0, 1], got {}",
                self.hflip_prob
            )));
        }
        let min_side = img.width().min(img.height());
        if 2 * self.max_shift >= min_side {
            return Err(Error::contract(format!(
                "max_shift {} must be below half the shorter image side ({min_side})",
                self.max_shift
            )));
        }
        Ok(())
    }
}

/// Draws the crop window and reflection used by [`augment`].
///
/// The window is the centered square shrunk by `max_shift` on every side,
/// displaced by `(dx, dy)` drawn uniformly from `[-max_shift, max_shift]²`,
/// so it never leaves the image and no border fill is needed.
pub fn augment_geometry(
    img: &LinearImage,
    params: &AugmentParams,
    rng_seed: u64,
) -> Result<CropGeometry> {
    params.validate_for(img)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let m = params.max_shift as i64;
    let dx = rng.random_range(-m..=m);
    let dy = rng.random_range(-m..=m);
    let flip = rng.random_bool(params.hflip_prob);

    let s = img.width().min(img.height()) - 2 * params.max_shift;
    let shifted = |extent: usize, d: i64| {
        let center = ((extent - s) / 2) as i64;
        (center + d).clamp(0, (extent - s) as i64) as usize
    };
    Ok(CropGeometry {
        x0: shifted(img.width(), dx),
        y0: shifted(img.height(), dy),
        size: s,
        flip,
    })
}

/// Random translation plus optional horizontal reflection, then resize to
/// `side × side`. With `max_shift = 0` and `hflip_prob = 0` this is exactly
/// [`center_square_resize`].
pub fn augment(
    img: &LinearImage,
    params: &AugmentParams,
    side: usize,
    rng_seed: u64,
) -> Result<LinearImage> {
    augment_geometry(img, params, rng_seed)?.apply(img, side)
}
