//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::{Mlp, MlpGrads};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, param: &mut [f64], grad: &[f64], cfg: &AdamConfig) -> Result<()> {
        if param.len() != grad.len() || param.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} values", self.m.len()),
                format!("param {} / grad {}", param.len(), grad.len()),
            ));
        }
        self.t += 1;
        adam_kernel(param, grad, &mut self.m, &mut self.v, self.t, cfg);
        Ok(())
    }
}

pub(crate) fn adam_kernel(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let bc1 = 1.0 - cfg.beta1.powf(t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(t as f64);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One Adam update of a matrix parameter.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::shape(
            "adam_step",
            format!("{}x{}", param.rows(), param.cols()),
            format!("{}x{}", grad.rows(), grad.cols()),
        ));
    }
    state.step(param.as_mut_slice(), grad.as_slice(), cfg)
}

/// Adam states for every weight and bias of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpAdam {
    pub weights: Vec<AdamState>,
    pub biases: Vec<AdamState>,
}

impl MlpAdam {
    pub fn new(net: &Mlp) -> Self {
        Self {
            weights: net.layers().iter().map(|l| AdamState::new(l.weight.as_slice().len())).collect(),
            biases: net.layers().iter().map(|l| AdamState::new(l.bias.len())).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads, cfg: &AdamConfig) -> Result<()> {
        if grads.weights.len() != self.weights.len() {
            return Err(Error::shape("MlpAdam::step", self.weights.len(), grads.weights.len()));
        }
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            self.weights[i].step(layer.weight.as_mut_slice(), grads.weights[i].as_slice(), cfg)?;
            self.biases[i].step(&mut layer.bias, &grads.biases[i], cfg)?;
        }
        Ok(())
    }
}

/// Per-row Adam state for a table of trainable rows, where a step touches
/// only a subset of rows and each row keeps its own step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowAdam {
    pub m: Matrix,
    pub v: Matrix,
    pub t: Vec<u64>,
}

impl RowAdam {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: vec![0; rows],
        }
    }

    /// Updates `table` rows listed in `indices` with the matching rows of `grads`.
    pub fn step_rows(&mut self, table: &mut Matrix, indices: &[usize], grads: &Matrix, cfg: &AdamConfig) -> Result<()> {
        if grads.rows() != indices.len() || grads.cols() != table.cols() || table.shape() != self.m.shape() {
            return Err(Error::shape(
                "RowAdam::step_rows",
                format!("{} x {}", indices.len(), table.cols()),
                format!("{} x {}", grads.rows(), grads.cols()),
            ));
        }
        for (b, &row) in indices.iter().enumerate() {
            if row >= table.rows() {
                return Err(Error::shape("RowAdam::step_rows", format!("row < {}", table.rows()), row));
            }
            self.t[row] += 1;
            adam_kernel(
                table.row_mut(row),
                grads.row(b),
                self.m.row_mut(row),
                self.v.row_mut(row),
                self.t[row],
                cfg,
            );
        }
        Ok(())
    }
}
