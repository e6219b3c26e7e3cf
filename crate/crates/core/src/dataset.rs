//! Manifest-driven datasets, PNG decoding/encoding and the seeded synthetic
//! scene generator.
//!
//! Manifest CSV (UTF-8), one row per image, paths relative to the manifest:
//!
//! ```text
//! image,e1,e2,e3,mask_x0,mask_y0,mask_w,mask_h
//! scene_0000.png,1.02,0.97,1.01,,,,
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::extract_features;
use crate::image::{
    augment_geometry, von_kries_cast, AugmentParams, CropGeometry, Illuminant, LinearImage,
    MaskRect, PixelRgb,
};
use crate::training::Sample;

pub const MANIFEST_HEADER: [&str; 8] = [
    "image", "e1", "e2", "e3", "mask_x0", "mask_y0", "mask_w", "mask_h",
];
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    /// Ground truth, normalized to length √3.
    pub illuminant: Illuminant,
    pub mask: Option<MaskRect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn image_path(&self, i: usize) -> PathBuf {
        self.root.join(&self.entries[i].image)
    }

    pub fn truths(&self) -> Vec<[f64; 3]> {
        self.entries.iter().map(|e| e.illuminant.as_array()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = MANIFEST_HEADER.join(",");
        out.push('\n');
        for e in &self.entries {
            let [e1, e2, e3] = e.illuminant.as_array();
            let mask = match e.mask {
                Some(m) => format!("{},{},{},{}", m.x0, m.y0, m.w, m.h),
                None => ",,,".to_string(),
            };
            out.push_str(&format!("{},{e1},{e2},{e3},{mask}\n", e.image.display()));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| parse_err(1, "empty manifest".into()))?
        .map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().map(str::trim).ne(MANIFEST_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!("header must be '{}'", MANIFEST_HEADER.join(",")),
        ));
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != MANIFEST_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", MANIFEST_HEADER.len(), rec.len()),
            ));
        }
        let image = rec[0].trim();
        if image.is_empty() {
            return Err(parse_err(line, "empty image path".into()));
        }
        let real = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("{} is not a number: '{}'", MANIFEST_HEADER[i], &rec[i])))
        };
        let e = [real(1)?, real(2)?, real(3)?];
        let illuminant = Illuminant::from_array(e)
            .map_err(|_| parse_err(line, format!("illuminant {e:?} must be positive and finite")))?;
        // rows already on the √3 sphere are kept verbatim so save/load is lossless
        let illuminant = if illuminant.is_normalized() {
            illuminant
        } else {
            illuminant.normalized()
        };
        let mask_fields: Vec<&str> = (4..8).map(|i| rec[i].trim()).collect();
        let mask = if mask_fields.iter().all(|f| f.is_empty()) {
            None
        } else {
            let v = mask_fields
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| parse_err(line, format!("bad mask columns {mask_fields:?}")))?;
            if v[2] == 0 || v[3] == 0 {
                return Err(parse_err(line, "mask extent must be positive".into()));
            }
            Some(MaskRect::new(v[0], v[1], v[2], v[3]))
        };
        if !seen.insert(image.to_string()) {
            return Err(parse_err(line, format!("duplicate image path '{image}'")));
        }
        entries.push(ManifestEntry {
            image: PathBuf::from(image),
            illuminant,
            mask,
        });
    }
    if entries.is_empty() {
        return Err(parse_err(1, "manifest has no entries".into()));
    }
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Manifest { root, entries })
}

/// Transfer curve between integer codes (normalized to [0, 1]) and linear light.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma {
    #[default]
    Linear,
    Srgb,
    Pow(f64),
}

impl Gamma {
    pub fn decode(self, v: f64) -> f64 {
        match self {
            Gamma::Linear => v,
            Gamma::Srgb => {
                if v <= 0.04045 {
                    v / 12.92
                } else {
                    ((v + 0.055) / 1.055).powf(2.4)
                }
            }
            Gamma::Pow(g) => v.powf(g),
        }
    }

    pub fn encode(self, v: f64) -> f64 {
        match self {
            Gamma::Linear => v,
            Gamma::Srgb => {
                if v <= 0.0031308 {
                    v * 12.92
                } else {
                    1.055 * v.powf(1.0 / 2.4) - 0.055
                }
            }
            Gamma::Pow(g) => v.powf(1.0 / g),
        }
    }
}

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "linear" => return Ok(Gamma::Linear),
            "srgb" => return Ok(Gamma::Srgb),
            _ => {}
        }
        let inner = s
            .strip_prefix("pow(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("pow:"))
            .ok_or_else(|| format!("unknown gamma '{s}' (linear|srgb|pow(g))"))?;
        match inner.parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(Gamma::Pow(g)),
            _ => Err(format!("gamma exponent must be positive, got '{inner}'")),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Linear => f.write_str("linear"),
            Gamma::Srgb => f.write_str("srgb"),
            Gamma::Pow(g) => write!(f, "pow({g})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Decodes an 8- or 16-bit PNG and reports its bit depth.
pub fn load_image_with_depth(path: &Path, gamma: Gamma) -> Result<(LinearImage, BitDepth)> {
    let img_err = |source| Error::Image {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    reader.set_format(ImageFormat::Png);
    let decoded = reader.decode().map_err(img_err)?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (codes, depth): (Vec<f64>, BitDepth) = match &decoded {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => (
            decoded.to_rgb16().into_raw().into_iter().map(f64::from).collect(),
            BitDepth::Sixteen,
        ),
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => (
            decoded.to_rgb8().into_raw().into_iter().map(f64::from).collect(),
            BitDepth::Eight,
        ),
        _ => {
            return Err(Error::domain(format!(
                "{}: only 8- and 16-bit PNG images are supported",
                path.display()
            )))
        }
    };
    let max = depth.max_code();
    let pixels = codes
        .chunks_exact(3)
        .map(|c| {
            PixelRgb::new(
                gamma.decode(c[0] / max),
                gamma.decode(c[1] / max),
                gamma.decode(c[2] / max),
            )
        })
        .collect();
    Ok((LinearImage::new(w, h, pixels)?, depth))
}

pub fn load_image(path: &Path, gamma: Gamma) -> Result<LinearImage> {
    load_image_with_depth(path, gamma).map(|(img, _)| img)
}

/// Clips to [0, 1], applies the transfer curve and writes an RGB PNG.
pub fn save_png(img: &LinearImage, path: &Path, depth: BitDepth, gamma: Gamma) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let max = depth.max_code();
    let codes = img
        .pixels()
        .iter()
        .flat_map(|p| p.to_array())
        .map(move |v| (gamma.encode(v.clamp(0.0, 1.0)) * max).round());
    let res = match depth {
        BitDepth::Sixteen => {
            let raw: Vec<u16> = codes.map(|c| c as u16).collect();
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw)
                .expect("buffer size matches dimensions")
                .save_with_format(path, ImageFormat::Png)
        }
        BitDepth::Eight => {
            let raw: Vec<u8> = codes.map(|c| c as u8).collect();
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw)
                .expect("buffer size matches dimensions")
                .save_with_format(path, ImageFormat::Png)
        }
    };
    res.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SceneKind {
    /// Reflectances whose per-channel means are equal, so Gray-World holds.
    #[default]
    GrayMean,
    /// Smooth colored noise with an arbitrary mean chromaticity.
    Textured,
}

impl FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gray-mean" => Ok(SceneKind::GrayMean),
            "textured" => Ok(SceneKind::Textured),
            other => Err(format!("unknown scene kind '{other}' (gray-mean|textured)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_scenes: usize,
    pub side: usize,
    /// Half-width of the uniform perturbation of (1, 1, 1) the illuminants
    /// are drawn from.
    pub illuminant_spread: f64,
    pub scene_kind: SceneKind,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_scenes: 100,
            side: 64,
            illuminant_spread: 0.5,
            scene_kind: SceneKind::GrayMean,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.n_scenes == 0 || self.side == 0 {
            return Err(Error::contract("scene count and side must be positive"));
        }
        if !(0.0..=1.0).contains(&self.illuminant_spread) {
            return Err(Error::contract(format!(
                "illuminant spread must lie in [0, 1], got {}",
                self.illuminant_spread
            )));
        }
        Ok(())
    }
}

/// Draws `normalize((1, 1, 1) + spread·u)`, `u ~ U[-1, 1]³`, rejecting
/// non-positive components.
pub fn draw_illuminant(rng: &mut impl Rng, spread: f64) -> Illuminant {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| 1.0 + spread * rng.random_range(-1.0..=1.0));
        if let Ok(e) = Illuminant::from_array(v) {
            return e.normalized();
        }
    }
}

/// Mondrian of overlapping colored rectangles, rescaled per channel so the
/// three channel means coincide.
fn gray_mean_scene(side: usize, rng: &mut ChaCha8Rng) -> Result<LinearImage> {
    let mut px = vec![[0.0f64; 3]; side * side];
    let background: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
    px.fill(background);
    for _ in 0..12 {
        let w = rng.random_range(side / 8..=side / 2).max(1);
        let h = rng.random_range(side / 8..=side / 2).max(1);
        let x0 = rng.random_range(0..=side - w);
        let y0 = rng.random_range(0..=side - h);
        let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
        for y in y0..y0 + h {
            px[y * side + x0..y * side + x0 + w].fill(color);
        }
    }
    for p in px.iter_mut() {
        for c in p.iter_mut() {
            *c *= rng.random_range(0.9..1.1);
        }
    }
    let n = px.len() as f64;
    let means: [f64; 3] = std::array::from_fn(|c| px.iter().map(|p| p[c]).sum::<f64>() / n);
    let target = (means[0] + means[1] + means[2]) / 3.0;
    LinearImage::new(
        side,
        side,
        px.iter()
            .map(|p| PixelRgb::from_array(std::array::from_fn(|c| p[c] * target / means[c])))
            .collect(),
    )
}

/// Low-frequency sinusoidal texture around a random base reflectance.
fn textured_scene(side: usize, rng: &mut ChaCha8Rng) -> Result<LinearImage> {
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..1.0));
    let waves: Vec<[f64; 4]> = (0..9)
        .map(|_| {
            [
                rng.random_range(0.5..3.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    let s = side as f64;
    LinearImage::from_fn(side, side, |x, y| {
        let (u, v) = (x as f64 / s, y as f64 / s);
        PixelRgb::from_array(std::array::from_fn(|c| {
            let noise: f64 = waves[c * 3..c * 3 + 3]
                .iter()
                .map(|[fx, fy, px, py]| {
                    (std::f64::consts::TAU * fx * u + px).sin()
                        * (std::f64::consts::TAU * fy * v + py).cos()
                })
                .sum::<f64>()
                / 3.0;
            base[c] * (0.6 + 0.4 * noise)
        }))
    })
}

/// Writes `n_scenes` cast scenes as 16-bit PNGs plus `manifest.csv` into
/// `out_dir`, returning the manifest.
pub fn generate_synthetic(config: &SyntheticConfig, out_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entries = Vec::with_capacity(config.n_scenes);
    for i in 0..config.n_scenes {
        let e = draw_illuminant(&mut rng, config.illuminant_spread);
        let scene = match config.scene_kind {
            SceneKind::GrayMean => gray_mean_scene(config.side, &mut rng)?,
            SceneKind::Textured => textured_scene(config.side, &mut rng)?,
        };
        let cast = von_kries_cast(&scene, &e)?;
        let peak = cast
            .pixels()
            .iter()
            .flat_map(|p| p.to_array())
            .fold(0.0, f64::max);
        let exposure = rng.random_range(0.6..0.95) / peak;
        let name = format!("scene_{i:05}.png");
        save_png(
            &cast.scaled(exposure)?,
            &out_dir.join(&name),
            BitDepth::Sixteen,
            Gamma::Linear,
        )?;
        entries.push(ManifestEntry {
            image: PathBuf::from(name),
            illuminant: e,
            mask: None,
        });
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        entries,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Options for turning manifest images into feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureOptions {
    /// Output side of the square crop; `None` keeps the native square size.
    pub side: Option<usize>,
    pub augment: Option<AugmentParams>,
    pub gamma: Gamma,
    pub seed: u64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            side: Some(crate::image::DEFAULT_SIDE),
            augment: None,
            gamma: Gamma::Linear,
            seed: 0,
        }
    }
}

/// Loads one manifest entry and applies crop/resize (and augmentation),
/// carrying the mask through the same geometry.
pub fn prepare_entry(
    manifest: &Manifest,
    i: usize,
    opts: &FeatureOptions,
) -> Result<(LinearImage, Option<MaskRect>)> {
    let img = load_image(&manifest.image_path(i), opts.gamma)?;
    let mask = manifest.entries[i].mask;
    if let Some(m) = &mask {
        m.check_inside(&img)?;
    }
    let geometry = match &opts.augment {
        Some(params) => {
            let entry_seed = opts.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64;
            augment_geometry(&img, params, entry_seed)?
        }
        None => CropGeometry::centered(&img),
    };
    let side = opts.side.unwrap_or(geometry.size);
    let out = geometry.apply(&img, side)?;
    let mask = mask.and_then(|m| geometry.map_mask(&m, side));
    Ok((out, mask))
}

/// load → crop/resize (→ augment) → features, one sample per manifest entry.
pub fn build_feature_dataset(manifest: &Manifest, opts: &FeatureOptions) -> Result<Vec<Sample>> {
    (0..manifest.len())
        .into_par_iter()
        .map(|i| {
            let (img, mask) = prepare_entry(manifest, i, opts)?;
            Ok((
                extract_features(&img, mask.as_ref())?,
                manifest.entries[i].illuminant,
            ))
        })
        .collect()
}
