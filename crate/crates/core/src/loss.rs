//! Angular error and the angular loss family with analytic gradients.
//!
//! With `c = ⟨ê, e⟩ / (‖ê‖‖e‖)` and `ε = arccos c`:
//!
//! | kind            | value        | range   |
//! |-----------------|--------------|---------|
//! | `Arccos`        | `ε`          | [0, π]  |
//! | `OneMinusCos`   | `1 − cos ε`  | [0, 2]  |
//! | `SinSquared`    | `1 − cos² ε` | [0, 1]  |
//! | `Sin`           | `sin ε`      | [0, 1]  |
//! | `Mse`           | `⅓Σ(ê−e)²`   | [0, ∞)  |
//!
//! All angular gradients are assembled from
//! `∂(1 − cos ε)/∂ê_i = (ê_i⟨ê,e⟩ − e_i⟨ê,ê⟩) / (‖ê‖³‖e‖)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector::{self, Vec3};

/// Below this value of `sin ε` the `Arccos` and `Sin` gradients are reported
/// as singular.
pub const SIN_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LossKind {
    /// `L1 = ε`
    Arccos,
    /// `L2 = 1 − cos ε`
    #[default]
    OneMinusCos,
    /// `L3 = sin² ε`
    SinSquared,
    /// `L4 = sin ε`
    Sin,
    Mse,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Arccos,
        LossKind::OneMinusCos,
        LossKind::SinSquared,
        LossKind::Sin,
        LossKind::Mse,
    ];

    pub fn is_angular(self) -> bool {
        self != LossKind::Mse
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Arccos => "l1",
            LossKind::OneMinusCos => "l2",
            LossKind::SinSquared => "l3",
            LossKind::Sin => "l4",
            LossKind::Mse => "mse",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::Arccos),
            "l2" => Ok(LossKind::OneMinusCos),
            "l3" => Ok(LossKind::SinSquared),
            "l4" => Ok(LossKind::Sin),
            "mse" => Ok(LossKind::Mse),
            other => Err(format!(
                "unknown loss '{other}', expected one of l1, l2, l3, l4, mse"
            )),
        }
    }
}

/// `∂L/∂ê`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gradient3(pub Vec3);

impl Gradient3 {
    pub fn as_array(&self) -> Vec3 {
        self.0
    }

    pub fn norm(&self) -> f64 {
        vector::norm(&self.0)
    }
}

/// Angle in `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngleRadians(f64);

impl AngleRadians {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&value) {
            return Err(Error::domain(format!("angle {value} outside [0, pi]")));
        }
        Ok(Self(value))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

fn checked_norm(v: &Vec3, what: &str) -> Result<f64> {
    if !vector::is_finite(v) {
        return Err(Error::domain(format!("{what} vector {v:?} is not finite")));
    }
    let n = vector::norm(v);
    if n == 0.0 {
        return Err(Error::domain(format!("{what} vector has zero norm")));
    }
    Ok(n)
}

/// Cosine of the angle between `pred` and `truth`, clamped into `[-1, 1]`.
pub fn cos_similarity(pred: &Vec3, truth: &Vec3) -> Result<f64> {
    let np = checked_norm(pred, "prediction")?;
    let nt = checked_norm(truth, "ground-truth")?;
    Ok((vector::dot(pred, truth) / (np * nt)).clamp(-1.0, 1.0))
}

/// Recovery angular error `ε = arccos c`, evaluated as `atan2(sin ε, cos ε)`.
pub fn angular_error(pred: &Vec3, truth: &Vec3) -> Result<AngleRadians> {
    let (sin, cos) = sin_cos(pred, truth)?;
    Ok(AngleRadians(sin.atan2(cos)))
}

fn sin_cos(pred: &Vec3, truth: &Vec3) -> Result<(f64, f64)> {
    let np = checked_norm(pred, "prediction")?;
    let nt = checked_norm(truth, "ground-truth")?;
    let cos = (vector::dot(pred, truth) / (np * nt)).clamp(-1.0, 1.0);
    Ok((sin_angle(pred, truth, np, nt), cos))
}

/// Angular error in degrees.
pub fn angular_error_deg(pred: &Vec3, truth: &Vec3) -> Result<f64> {
    angular_error(pred, truth).map(AngleRadians::degrees)
}

/// `sin ε` through the cross product, which stays accurate near 0 and π
/// where `√(1 − c²)` loses all precision.
fn sin_angle(pred: &Vec3, truth: &Vec3, np: f64, nt: f64) -> f64 {
    (vector::norm(&vector::cross(pred, truth)) / (np * nt)).min(1.0)
}

fn mse(pred: &Vec3, truth: &Vec3) -> Result<f64> {
    if !vector::is_finite(pred) || !vector::is_finite(truth) {
        return Err(Error::domain("MSE inputs must be finite"));
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / 3.0)
}

pub fn loss_value(kind: LossKind, pred: &Vec3, truth: &Vec3) -> Result<f64> {
    if kind == LossKind::Mse {
        return mse(pred, truth);
    }
    let (s, c) = sin_cos(pred, truth)?;
    Ok(match kind {
        LossKind::Arccos => s.atan2(c),
        // sin²/(1 + c) avoids cancellation for small angles
        LossKind::OneMinusCos if c > 0.0 => s * s / (1.0 + c),
        LossKind::OneMinusCos => 1.0 - c,
        LossKind::SinSquared => s * s,
        LossKind::Sin => s,
        LossKind::Mse => unreachable!(),
    })
}

/// Analytic `∂L/∂ê`.
///
/// `Arccos` and `Sin` divide by `sin ε` and return [`Error::SingularAngle`]
/// when it falls below [`SIN_FLOOR`].
pub fn loss_gradient(kind: LossKind, pred: &Vec3, truth: &Vec3) -> Result<Gradient3> {
    if kind == LossKind::Mse {
        mse(pred, truth)?;
        return Ok(Gradient3(std::array::from_fn(|i| {
            2.0 / 3.0 * (pred[i] - truth[i])
        })));
    }
    let np = checked_norm(pred, "prediction")?;
    let nt = checked_norm(truth, "ground-truth")?;
    let pt = vector::dot(pred, truth);
    let pp = vector::dot(pred, pred);
    let denom = pp * np * nt;
    let d_one_minus_cos: Vec3 = std::array::from_fn(|i| (pred[i] * pt - truth[i] * pp) / denom);
    let cos = (pt / (np * nt)).clamp(-1.0, 1.0);

    let singular_scale = |factor: f64| -> Result<Gradient3> {
        let sin = sin_angle(pred, truth, np, nt);
        if sin < SIN_FLOOR {
            return Err(Error::SingularAngle {
                sin,
                cos,
                floor: SIN_FLOOR,
            });
        }
        Ok(Gradient3(vector::scale(&d_one_minus_cos, factor / sin)))
    };

    match kind {
        LossKind::OneMinusCos => Ok(Gradient3(d_one_minus_cos)),
        // -2c·∂c = 2c·∂(1 − c)
        LossKind::SinSquared => Ok(Gradient3(vector::scale(&d_one_minus_cos, 2.0 * cos))),
        // -∂c / sin ε
        LossKind::Arccos => singular_scale(1.0),
        // -c·∂c / sin ε
        LossKind::Sin => singular_scale(cos),
        LossKind::Mse => unreachable!(),
    }
}

/// Central-difference estimate of `∂L/∂ê` with step `h`.
pub fn finite_difference_gradient(
    kind: LossKind,
    pred: &Vec3,
    truth: &Vec3,
    h: f64,
) -> Result<Gradient3> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::contract(format!("step h must be positive, got {h}")));
    }
    let mut g = [0.0; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let mut plus = *pred;
        let mut minus = *pred;
        plus[i] += h;
        minus[i] -= h;
        *gi = (loss_value(kind, &plus, truth)? - loss_value(kind, &minus, truth)?) / (2.0 * h);
    }
    Ok(Gradient3(g))
}

/// Largest componentwise `|a − b| / (|a| + 1e-8)` between an analytic
/// gradient `a` and a reference `b`.
pub fn relative_deviation(analytic: &Gradient3, reference: &Gradient3) -> f64 {
    analytic
        .0
        .iter()
        .zip(reference.0.iter())
        .map(|(a, b)| (a - b).abs() / (a.abs() + 1e-8))
        .fold(0.0, f64::max)
}

/// Angles kept by [`sample_gradcheck_pair`] for angular kinds, away from the
/// singular endpoints.
pub const GRADCHECK_ANGLE_MARGIN: f64 = 0.01;

/// Draws one `(prediction, truth)` pair for gradient checking.
///
/// Angular kinds: truth in `(0.1, 2)³`, prediction in `(−2, 2)³`, with
/// `ε ∈ (0.01, π − 0.01)`. `Mse`: prediction = truth + δ, `|δ_i| ∈ [0.2, 1]`,
/// which keeps every gradient component away from zero.
pub fn sample_gradcheck_pair(kind: LossKind, rng: &mut impl Rng) -> (Vec3, Vec3) {
    let truth: Vec3 = std::array::from_fn(|_| rng.random_range(0.1..2.0));
    if kind == LossKind::Mse {
        let pred = std::array::from_fn(|i| {
            let d: f64 = rng.random_range(0.2..=1.0);
            if rng.random_bool(0.5) {
                truth[i] + d
            } else {
                truth[i] - d
            }
        });
        return (pred, truth);
    }
    loop {
        let pred: Vec3 = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        if vector::norm(&pred) < 0.1 {
            continue;
        }
        let (s, c) = sin_cos(&pred, &truth).expect("sampled vectors are finite and nonzero");
        let eps = s.atan2(c);
        if eps > GRADCHECK_ANGLE_MARGIN && eps < PI - GRADCHECK_ANGLE_MARGIN {
            return (pred, truth);
        }
    }
}

/// Largest [`relative_deviation`] between [`loss_gradient`] and
/// [`finite_difference_gradient`] over `trials` seeded pairs.
pub fn gradient_check(kind: LossKind, trials: usize, seed: u64, h: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (pred, truth) = sample_gradcheck_pair(kind, &mut rng);
        let analytic = loss_gradient(kind, &pred, &truth)?;
        let numeric = finite_difference_gradient(kind, &pred, &truth, h)?;
        worst = worst.max(relative_deviation(&analytic, &numeric));
    }
    Ok(worst)
}
