//! Mini-batch gradient descent for the regression head under a selectable
//! [`LossKind`].
//!
//! Predictions are left unconstrained during training; angular kinds only
//! see their direction. Validation error is the mean recovery angular error
//! in degrees, and the model with the lowest validation error is returned.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::FeatureVector;
use crate::image::{AugmentParams, Illuminant};
use crate::loss::{self, Gradient3, LossKind};
use crate::model::{MlpGradient, MlpModel};
use crate::vector::Vec3;

/// One training example: features plus normalized ground truth.
pub type Sample = (FeatureVector, Illuminant);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    /// Geometric augmentation applied when images are turned into features
    /// (see `dataset::build_feature_dataset`); `train` itself only sees
    /// feature vectors.
    pub augment: Option<AugmentParams>,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::OneMinusCos,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 16,
            hidden_dim: 16,
            seed: 0,
            augment: None,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Mean validation angular error (degrees) per epoch.
    pub val_error_deg: Vec<f64>,
    /// Zero-based epoch whose model was returned; `None` for the untrained model.
    pub best_epoch: Option<usize>,
    pub best_val_error_deg: f64,
    pub checksum: String,
    pub seed: u64,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_error_deg\n");
        for (i, (l, v)) in self.train_loss.iter().zip(&self.val_error_deg).enumerate() {
            out.push_str(&format!("{},{l:?},{v:?}\n", i + 1));
        }
        out
    }
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` weights, zero hidden biases and output
/// bias `(1, 1, 1)` so the untrained head predicts neutral light.
pub fn init_model(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<MlpModel> {
    let mut m = MlpModel::zeros(input_dim, hidden_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a1 = 1.0 / (input_dim as f64).sqrt();
    for w in m.w1.iter_mut() {
        *w = rng.random_range(-a1..=a1);
    }
    let a2 = 1.0 / (hidden_dim as f64).sqrt();
    for w in m.w2.iter_mut() {
        *w = rng.random_range(-a2..=a2);
    }
    m.b2 = [1.0; 3];
    Ok(m)
}

/// `∂L/∂ê` with the trainer's rule for the singular points of the arccos and
/// sine losses: zero at `ε ≈ 0`, the `1 − cos ε` gradient at `ε ≈ π`.
pub fn training_loss_gradient(kind: LossKind, pred: &Vec3, truth: &Vec3) -> Result<Gradient3> {
    match loss::loss_gradient(kind, pred, truth) {
        Err(Error::SingularAngle { cos, .. }) => {
            if cos > 0.0 {
                Ok(Gradient3::default())
            } else {
                loss::loss_gradient(LossKind::OneMinusCos, pred, truth)
            }
        }
        other => other,
    }
}

/// Parameter gradient of the per-sample loss.
pub fn model_gradient(
    model: &MlpModel,
    features: &FeatureVector,
    truth: &Illuminant,
    kind: LossKind,
) -> Result<MlpGradient> {
    let acts = model.forward_with_activations(features.as_slice())?;
    let d_out = loss::loss_gradient(kind, &acts.output, &truth.as_array())?;
    Ok(model.backward(features.as_slice(), &acts, &d_out.0))
}

fn mean_angular_error_deg(model: &MlpModel, data: &[Sample], idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let (f, t) = &data[i];
        let pred = model.forward(f.as_slice())?;
        total += loss::angular_error_deg(&pred, &t.as_array())
            .map_err(|e| Error::Training(format!("validation sample {i}: {e}")))?;
    }
    Ok(total / idx.len() as f64)
}

/// Splits `0..n` into (train, validation) index sets. An empty validation
/// set means the training set doubles as validation.
fn split_indices(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut n_val = (n as f64 * fraction).floor() as usize;
    if fraction > 0.0 && n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    } else {
        n_val = 0;
    }
    let val = idx.split_off(n - n_val);
    (idx, val)
}

pub fn train(dataset: &[Sample], config: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::contract("learning rate must be positive"));
    }
    if !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::contract("validation fraction must lie in [0, 1)"));
    }
    if config.batch_size == 0 || config.hidden_dim == 0 {
        return Err(Error::contract("batch size and hidden width must be positive"));
    }
    let input_dim = dataset[0].0.len();
    if let Some(i) = dataset.iter().position(|(f, _)| f.len() != input_dim) {
        return Err(Error::contract(format!("sample {i} has a different feature length")));
    }
    if let Some(i) = dataset.iter().position(|(_, t)| !t.is_normalized()) {
        return Err(Error::contract(format!("ground truth of sample {i} is not normalized")));
    }

    let mut model = init_model(input_dim, config.hidden_dim, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let (mut train_idx, val_idx) =
        split_indices(dataset.len(), config.validation_fraction, &mut rng);
    if config.batch_size > train_idx.len() {
        return Err(Error::contract(format!(
            "batch size {} exceeds the {} training samples",
            config.batch_size,
            train_idx.len()
        )));
    }
    let val_idx = if val_idx.is_empty() {
        train_idx.clone()
    } else {
        val_idx
    };

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        val_error_deg: Vec::with_capacity(config.epochs),
        best_epoch: None,
        best_val_error_deg: f64::INFINITY,
        checksum: String::new(),
        seed: config.seed,
    };
    let mut best = model.clone();

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            let mut acc = MlpGradient::zeros(input_dim, config.hidden_dim);
            for &i in batch {
                let (f, t) = &dataset[i];
                let acts = model.forward_with_activations(f.as_slice())?;
                let truth = t.as_array();
                let value = loss::loss_value(config.loss, &acts.output, &truth)
                    .map_err(|e| Error::Training(format!("epoch {epoch}, sample {i}: {e}")))?;
                if !value.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, sample {i}"
                    )));
                }
                epoch_loss += value;
                let d_out = training_loss_gradient(config.loss, &acts.output, &truth)?;
                acc.add_scaled(&model.backward(f.as_slice(), &acts, &d_out.0), 1.0);
            }
            model.apply_update(&acc, config.learning_rate / batch.len() as f64);
        }
        if model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::Training(format!("parameters diverged at epoch {epoch}")));
        }
        report.train_loss.push(epoch_loss / train_idx.len() as f64);
        let val = mean_angular_error_deg(&model, dataset, &val_idx)?;
        report.val_error_deg.push(val);
        if val < report.best_val_error_deg {
            report.best_val_error_deg = val;
            report.best_epoch = Some(epoch);
            best.clone_from(&model);
        }
    }
    if report.best_epoch.is_none() {
        report.best_val_error_deg = mean_angular_error_deg(&best, dataset, &val_idx)?;
    }
    report.checksum = best.checksum();
    Ok((best, report))
}
