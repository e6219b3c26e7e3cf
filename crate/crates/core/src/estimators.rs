//! Statistics-based illuminant estimators under the Minkowski framework,
//! plus the learned head's inference path.
//!
//! Per channel `c` the framework statistic is
//! `((1/N)·Σ_x |d_c(x)|^p)^(1/p)` where `d` is the (optionally Gaussian
//! smoothed) pixel value for order 0, or its gradient magnitude for order 1.
//! `p = ∞` takes the per-channel maximum instead.
//!
//! | estimator          | order | p  | σ |
//! |--------------------|-------|----|---|
//! | Gray-World         | 0     | 1  | 0 |
//! | White-Patch        | 0     | ∞  | 0 |
//! | Shades-of-Gray     | 0     | p  | 0 |
//! | Gray-Edge          | 0/1   | p  | σ |

use std::fmt;

use crate::error::{Error, Result};
use crate::image::{masked_pixels, normalize_vector, Illuminant, LinearImage, MaskRect, PixelRgb};
use crate::model::MlpModel;
use crate::vector::{self, Vec3};

/// Length of the handcrafted feature vector produced by [`extract_features`].
pub const FEATURE_DIM: usize = 15;

/// Finite exponents at or above this value are evaluated relative to the
/// channel maximum so that `|d|^p` cannot overflow.
const LARGE_P: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinkowskiNorm {
    P(f64),
    /// The `p → ∞` limit: per-channel maximum.
    Max,
}

impl MinkowskiNorm {
    fn validate(self) -> Result<()> {
        match self {
            MinkowskiNorm::P(p) if !(p > 0.0 && p.is_finite()) => Err(Error::domain(format!(
                "Minkowski exponent must be positive and finite, got {p}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MinkowskiNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinkowskiNorm::P(p) => write!(f, "{p}"),
            MinkowskiNorm::Max => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    Zero,
    One,
}

impl TryFrom<u32> for DerivativeOrder {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            0 => Ok(DerivativeOrder::Zero),
            1 => Ok(DerivativeOrder::One),
            _ => Err(Error::domain(format!("derivative order must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    GrayWorld,
    WhitePatch,
    ShadesOfGray(MinkowskiNorm),
    GrayEdge {
        order: DerivativeOrder,
        norm: MinkowskiNorm,
        sigma: f64,
    },
    Learned(Box<MlpModel>),
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::ShadesOfGray(n) => n.validate(),
            EstimatorSpec::GrayEdge { norm, sigma, .. } => {
                norm.validate()?;
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::domain(format!("sigma must be >= 0, got {sigma}")));
                }
                Ok(())
            }
            EstimatorSpec::Learned(m) => {
                if m.input_dim() != FEATURE_DIM {
                    return Err(Error::contract(format!(
                        "learned model expects {} features, the recipe produces {FEATURE_DIM}",
                        m.input_dim()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Fixed-length handcrafted descriptor fed to the learned head.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn require_nonempty<T>(values: &[T]) -> Result<()> {
    if values.is_empty() {
        Err(Error::domain("no unmasked pixels left to estimate from"))
    } else {
        Ok(())
    }
}

/// Per-channel arithmetic mean of the unmasked pixels.
fn channel_mean(pixels: &[PixelRgb]) -> Vec3 {
    let n = pixels.len() as f64;
    let mut sum = [0.0; 3];
    for p in pixels {
        sum[0] += p.r;
        sum[1] += p.g;
        sum[2] += p.b;
    }
    [sum[0] / n, sum[1] / n, sum[2] / n]
}

fn channel_max(pixels: &[PixelRgb]) -> Vec3 {
    pixels.iter().fold([0.0f64; 3], |m, p| {
        [m[0].max(p.r.abs()), m[1].max(p.g.abs()), m[2].max(p.b.abs())]
    })
}

/// Minkowski mean of `|d|` over a set of 3-vectors.
fn minkowski_pool(values: &[PixelRgb], norm: MinkowskiNorm) -> Vec3 {
    let p = match norm {
        MinkowskiNorm::Max => return channel_max(values),
        MinkowskiNorm::P(p) => p,
    };
    let n = values.len() as f64;
    std::array::from_fn(|c| {
        if p >= LARGE_P {
            let max = values.iter().map(|v| v.channel(c).abs()).fold(0.0, f64::max);
            if max == 0.0 {
                return 0.0;
            }
            let sum: f64 = values
                .iter()
                .map(|v| (v.channel(c).abs() / max).powf(p))
                .sum();
            max * (sum / n).powf(1.0 / p)
        } else {
            let sum: f64 = values.iter().map(|v| v.channel(c).abs().powf(p)).sum();
            (sum / n).powf(1.0 / p)
        }
    })
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian blur with clamped borders. Callers only read pixels
/// whose full kernel support lies inside the image, so the clamping never
/// influences a statistic.
fn smooth(img: &LinearImage, kernel: &[f64]) -> Vec<Vec3> {
    let (w, h) = (img.width(), img.height());
    let r = (kernel.len() / 2) as i64;
    let src: Vec<Vec3> = img.pixels().iter().map(|p| p.to_array()).collect();
    if kernel.len() == 1 {
        return src;
    }
    let conv = |data: &[Vec3], horizontal: bool| -> Vec<Vec3> {
        let mut out = vec![[0.0; 3]; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for (k, wk) in kernel.iter().enumerate() {
                    let off = k as i64 - r;
                    let (sx, sy) = if horizontal {
                        ((x as i64 + off).clamp(0, w as i64 - 1) as usize, y)
                    } else {
                        (x, (y as i64 + off).clamp(0, h as i64 - 1) as usize)
                    };
                    let v = data[sy * w + sx];
                    for c in 0..3 {
                        acc[c] += wk * v[c];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    let tmp = conv(&src, true);
    conv(&tmp, false)
}

/// Values `d(x)` entering the statistic for smoothed and/or derivative
/// variants, restricted to pixels whose whole stencil is inside the image and
/// clear of the mask.
fn stencil_values(
    img: &LinearImage,
    mask: Option<&MaskRect>,
    order: DerivativeOrder,
    sigma: f64,
) -> Result<Vec<PixelRgb>> {
    if let Some(m) = mask {
        m.check_inside(img)?;
    }
    let kernel = gaussian_kernel(sigma);
    let margin = kernel.len() / 2 + usize::from(order == DerivativeOrder::One);
    let (w, h) = (img.width(), img.height());
    if w <= 2 * margin || h <= 2 * margin {
        return Err(Error::domain(format!(
            "{w}x{h} image is too small for a stencil margin of {margin}"
        )));
    }
    let s = smooth(img, &kernel);
    let mut out = Vec::with_capacity((w - 2 * margin) * (h - 2 * margin));
    for y in margin..h - margin {
        for x in margin..w - margin {
            if mask.is_some_and(|m| m.touches(x, y, margin)) {
                continue;
            }
            let v = match order {
                DerivativeOrder::Zero => s[y * w + x],
                DerivativeOrder::One => {
                    let (l, r) = (s[y * w + x - 1], s[y * w + x + 1]);
                    let (u, d) = (s[(y - 1) * w + x], s[(y + 1) * w + x]);
                    std::array::from_fn(|c| {
                        let dx = 0.5 * (r[c] - l[c]);
                        let dy = 0.5 * (d[c] - u[c]);
                        (dx * dx + dy * dy).sqrt()
                    })
                }
            };
            out.push(PixelRgb::from_array(v));
        }
    }
    require_nonempty(&out)?;
    Ok(out)
}

/// Raw (unnormalized) Minkowski-framework statistic.
pub fn minkowski_statistic(
    img: &LinearImage,
    mask: Option<&MaskRect>,
    order: DerivativeOrder,
    norm: MinkowskiNorm,
    sigma: f64,
) -> Result<Vec3> {
    norm.validate()?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let values = if order == DerivativeOrder::Zero && sigma == 0.0 {
        masked_pixels(img, mask)?
    } else {
        stencil_values(img, mask, order, sigma)?
    };
    require_nonempty(&values)?;
    Ok(minkowski_pool(&values, norm))
}

fn to_estimate(stat: Vec3) -> Result<Illuminant> {
    if stat.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::DegenerateScene(format!(
            "image statistic {stat:?} has a non-positive channel"
        )));
    }
    Ok(Illuminant::from_array(stat)?.normalized())
}

/// Estimates the scene illuminant from the unmasked pixels, normalized to
/// length √3.
pub fn estimate(
    spec: &EstimatorSpec,
    img: &LinearImage,
    mask: Option<&MaskRect>,
) -> Result<Illuminant> {
    spec.validate()?;
    match spec {
        EstimatorSpec::GrayWorld => {
            let px = masked_pixels(img, mask)?;
            require_nonempty(&px)?;
            to_estimate(channel_mean(&px))
        }
        EstimatorSpec::WhitePatch => {
            let px = masked_pixels(img, mask)?;
            require_nonempty(&px)?;
            to_estimate(channel_max(&px))
        }
        EstimatorSpec::ShadesOfGray(norm) => to_estimate(minkowski_statistic(
            img,
            mask,
            DerivativeOrder::Zero,
            *norm,
            0.0,
        )?),
        EstimatorSpec::GrayEdge { order, norm, sigma } => {
            to_estimate(minkowski_statistic(img, mask, *order, *norm, *sigma)?)
        }
        EstimatorSpec::Learned(model) => {
            let raw = predict(model, &extract_features(img, mask)?)?;
            let n = normalize_vector(&raw)?;
            Illuminant::from_array(n).map_err(|_| {
                Error::DegenerateScene(format!("learned model predicted {raw:?}"))
            })
        }
    }
}

fn unit_block(v: Vec3) -> Option<Vec3> {
    let n = vector::norm(&v);
    (n > 0.0).then(|| vector::scale(&v, 1.0 / n))
}

/// Fifteen exposure-invariant descriptors: order-0 Minkowski statistics at
/// p = 1, 2, 6 and ∞, followed by the order-1, p = 1, σ = 1 edge statistic.
/// Every 3-block is scaled to unit length; a flat image yields an all-zero
/// edge block.
pub fn extract_features(img: &LinearImage, mask: Option<&MaskRect>) -> Result<FeatureVector> {
    let px = masked_pixels(img, mask)?;
    require_nonempty(&px)?;
    let mut values = Vec::with_capacity(FEATURE_DIM);
    for norm in [
        MinkowskiNorm::P(1.0),
        MinkowskiNorm::P(2.0),
        MinkowskiNorm::P(6.0),
        MinkowskiNorm::Max,
    ] {
        let block = unit_block(minkowski_pool(&px, norm))
            .ok_or_else(|| Error::domain("cannot extract features from an all-black image"))?;
        values.extend_from_slice(&block);
    }
    let edges = minkowski_statistic(img, mask, DerivativeOrder::One, MinkowskiNorm::P(1.0), 1.0)?;
    values.extend_from_slice(&unit_block(edges).unwrap_or([0.0; 3]));
    debug_assert_eq!(values.len(), FEATURE_DIM);
    Ok(FeatureVector(values))
}

/// Forward pass of the learned head (raw, unnormalized output).
pub fn predict(model: &MlpModel, features: &FeatureVector) -> Result<Vec3> {
    model.forward(features.as_slice())
}
