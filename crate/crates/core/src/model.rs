//! Two-layer regression head: `y = W2·tanh(W1·x + b1) + b2`, three outputs.
//!
//! Text serialization (`mlp-v1`):
//!
//! ```text
//! mlp-v1 <input_dim> <hidden_dim>
//! <W1 row 0>            (input_dim reals)
//! ...
//! <W1 row hidden_dim-1>
//! <b1>                  (hidden_dim reals)
//! <W2 row 0..2>         (hidden_dim reals each)
//! <b2>                  (3 reals)
//! ```
//!
//! Reals are written in Rust's shortest round-trip decimal form, so
//! `load(save(m)) == m` bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::vector::Vec3;

pub const FORMAT_TAG: &str = "mlp-v1";
pub const OUTPUT_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    hidden_dim: usize,
    /// hidden_dim × input_dim, row-major
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    /// 3 × hidden_dim, row-major
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec3,
}

/// Parameter gradients, laid out exactly like [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec3,
}

impl MlpGradient {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w1: vec![0.0; input_dim * hidden_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; OUTPUT_DIM * hidden_dim],
            b2: [0.0; 3],
        }
    }

    /// W1, b1, W2, b2 concatenated.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + self.b1.len() + self.w2.len() + 3);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub(crate) fn add_scaled(&mut self, other: &MlpGradient, s: f64) {
        let pairs = self
            .w1
            .iter_mut()
            .zip(&other.w1)
            .chain(self.b1.iter_mut().zip(&other.b1))
            .chain(self.w2.iter_mut().zip(&other.w2))
            .chain(self.b2.iter_mut().zip(&other.b2));
        for (a, b) in pairs {
            *a += s * b;
        }
    }
}

/// Intermediate values of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct Activations {
    pub hidden: Vec<f64>,
    pub output: Vec3,
}

impl MlpModel {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec3,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::contract("model dimensions must be positive"));
        }
        if w1.len() != input_dim * hidden_dim
            || b1.len() != hidden_dim
            || w2.len() != OUTPUT_DIM * hidden_dim
        {
            return Err(Error::contract(format!(
                "parameter shapes do not match a {input_dim}->{hidden_dim}->3 model"
            )));
        }
        let m = Self {
            input_dim,
            hidden_dim,
            w1,
            b1,
            w2,
            b2,
        };
        if m.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("model parameters must be finite"));
        }
        Ok(m)
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Result<Self> {
        Self::new(
            input_dim,
            hidden_dim,
            vec![0.0; input_dim * hidden_dim],
            vec![0.0; hidden_dim],
            vec![0.0; OUTPUT_DIM * hidden_dim],
            [0.0; 3],
        )
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> Vec3 {
        self.b2
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + OUTPUT_DIM
    }

    /// W1, b1, W2, b2 concatenated.
    pub fn parameters(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                flat.len()
            )));
        }
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
        Ok(())
    }

    pub(crate) fn apply_update(&mut self, grad: &MlpGradient, step: f64) {
        let pairs = self
            .w1
            .iter_mut()
            .zip(&grad.w1)
            .chain(self.b1.iter_mut().zip(&grad.b1))
            .chain(self.w2.iter_mut().zip(&grad.w2))
            .chain(self.b2.iter_mut().zip(&grad.b2));
        for (p, g) in pairs {
            *p -= step * g;
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::contract(format!(
                "model expects {} features, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward_with_activations(&self, x: &[f64]) -> Result<Activations> {
        self.check_input(x)?;
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b).tanh())
            .collect();
        let output = std::array::from_fn(|k| {
            let row = &self.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
            row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + self.b2[k]
        });
        Ok(Activations { hidden, output })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec3> {
        Ok(self.forward_with_activations(x)?.output)
    }

    /// Backpropagates `∂L/∂y` through the head.
    #[allow(clippy::needless_range_loop)]
    pub fn backward(&self, x: &[f64], acts: &Activations, d_output: &Vec3) -> MlpGradient {
        let (n_in, n_hid) = (self.input_dim, self.hidden_dim);
        let mut g = MlpGradient::zeros(n_in, n_hid);
        g.b2 = *d_output;
        for k in 0..OUTPUT_DIM {
            for j in 0..n_hid {
                g.w2[k * n_hid + j] = d_output[k] * acts.hidden[j];
            }
        }
        for j in 0..n_hid {
            let dh: f64 = (0..OUTPUT_DIM)
                .map(|k| self.w2[k * n_hid + j] * d_output[k])
                .sum();
            let dz = dh * (1.0 - acts.hidden[j] * acts.hidden[j]);
            g.b1[j] = dz;
            for i in 0..n_in {
                g.w1[j * n_in + i] = dz * x[i];
            }
        }
        g
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_TAG} {} {}\n", self.input_dim, self.hidden_dim);
        let mut line = |vals: &[f64]| {
            let joined: Vec<String> = vals.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", joined.join(" "));
        };
        for row in self.w1.chunks_exact(self.input_dim) {
            line(row);
        }
        line(&self.b1);
        for row in self.w2.chunks_exact(self.hidden_dim) {
            line(row);
        }
        line(&self.b2);
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line as u64,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty model file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != FORMAT_TAG {
            return Err(parse_err(1, format!("expected '{FORMAT_TAG} <input> <hidden>' header")));
        }
        let dim = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|d| *d > 0)
                .ok_or_else(|| parse_err(1, format!("bad dimension '{s}'")))
        };
        let (n_in, n_hid) = (dim(fields[1])?, dim(fields[2])?);

        let mut read_row = |len: usize| -> Result<Vec<f64>> {
            let (no, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, "unexpected end of model file".into()))?;
            let row = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| parse_err(no, e.to_string()))?;
            if row.len() != len {
                return Err(parse_err(no, format!("expected {len} values, got {}", row.len())));
            }
            Ok(row)
        };
        let mut w1 = Vec::with_capacity(n_in * n_hid);
        for _ in 0..n_hid {
            w1.extend(read_row(n_in)?);
        }
        let b1 = read_row(n_hid)?;
        let mut w2 = Vec::with_capacity(OUTPUT_DIM * n_hid);
        for _ in 0..OUTPUT_DIM {
            w2.extend(read_row(n_hid)?);
        }
        let b2 = read_row(OUTPUT_DIM)?;
        if let Some((no, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(parse_err(no, format!("trailing content '{extra}'")));
        }
        Self::new(n_in, n_hid, w1, b1, w2, [b2[0], b2[1], b2[2]])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
