//! Fully connected networks with rectifier hidden layers and exact backprop.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{softmax_in_place, Matrix};
use crate::error::{Error, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// Activation applied to the final layer. Hidden layers always use ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Softmax,
}

/// One affine layer, `y = x W + b` with `W` stored as `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Debug)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
    id: u64,
    generation: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            output: self.output,
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.output == other.output
    }
}

/// Intermediates recorded by one forward pass. Consumed by [`Mlp::backward`].
#[derive(Debug)]
pub struct GradTape {
    net_id: u64,
    generation: u64,
    /// Input to each layer (the first entry is the network input).
    inputs: Vec<Matrix>,
    /// Pre-activations of each layer.
    pre: Vec<Matrix>,
    output: Matrix,
}

impl GradTape {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Gradients for every weight and bias of an [`Mlp`], laid out like its layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.in_dim(), l.out_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) -> Result<()> {
        if self.weights.len() != other.weights.len() {
            return Err(Error::shape(
                "MlpGrads::add_assign",
                format!("{} layers", self.weights.len()),
                other.weights.len(),
            ));
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.add_assign(b)?;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Flattened in the same order as [`Mlp::flat_params`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.as_slice().iter().all(|v| *v == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|v| *v == 0.0))
    }
}

impl Mlp {
    /// Builds a network through the given layer widths (`dims[0]` is the input
    /// width). Weights are Glorot-uniform, biases zero.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!(
                "network needs at least two positive layer widths, got {dims:?}"
            )));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Dense {
                    weight: Matrix::from_vec(fan_in, fan_out, data).expect("sized above"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self::from_layers_unchecked(layers, output))
    }

    /// Builds a network from explicit layers, checking that widths chain.
    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!("bias of length {} in layer {i}", l.out_dim()),
                    l.bias.len(),
                ));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!("layer {} input width {}", i + 1, pair[0].out_dim()),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(Self::from_layers_unchecked(layers, output))
    }

    fn from_layers_unchecked(layers: Vec<Dense>, output: OutputActivation) -> Self {
        Self {
            layers,
            output,
            id: fresh_id(),
            generation: 0,
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Mutable access to the layers. Invalidates outstanding tapes.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Overwrites parameters from a slice in [`Mlp::flat_params`] order and
    /// returns how many values were consumed.
    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<usize> {
        let n = self.num_params();
        if values.len() < n {
            return Err(Error::shape("Mlp::set_flat_params", n, values.len()));
        }
        let mut offset = 0;
        for l in self.layers_mut() {
            let w = l.weight.as_mut_slice();
            let len = w.len();
            w.copy_from_slice(&values[offset..offset + len]);
            offset += len;
            let len = l.bias.len();
            l.bias.copy_from_slice(&values[offset..offset + len]);
            offset += len;
        }
        Ok(offset)
    }

    /// Forward pass without recording intermediates.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut act = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &act)?;
            if i < last {
                relu_in_place(&mut z);
            } else {
                self.apply_output(&mut z);
            }
            act = z;
        }
        act.ensure_finite("network output")?;
        Ok(act)
    }

    /// Forward pass that records every intermediate needed by [`Mlp::backward`].
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, GradTape)> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &act)?;
            let mut a = z.clone();
            if i < last {
                relu_in_place(&mut a);
            } else {
                self.apply_output(&mut a);
            }
            inputs.push(act);
            pre.push(z);
            act = a;
        }
        act.ensure_finite("network output")?;
        let tape = GradTape {
            net_id: self.id,
            generation: self.generation,
            inputs,
            pre,
            output: act.clone(),
        };
        Ok((act, tape))
    }

    /// Backpropagates `dy` (the gradient of a scalar with respect to the
    /// forward output) and returns parameter gradients plus the input gradient.
    pub fn backward(&self, tape: GradTape, dy: &Matrix) -> Result<(MlpGrads, Matrix)> {
        if tape.net_id != self.id || tape.generation != self.generation {
            return Err(Error::Usage(
                "gradient tape does not belong to the current state of this network".into(),
            ));
        }
        if dy.shape() != tape.output.shape() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{}x{}", tape.output.rows(), tape.output.cols()),
                format!("{}x{}", dy.rows(), dy.cols()),
            ));
        }
        let mut delta = match self.output {
            OutputActivation::Identity => dy.clone(),
            OutputActivation::Softmax => softmax_backward(&tape.output, dy),
        };
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        for i in (0..n).rev() {
            if i < n - 1 {
                // delta currently holds d/d(activation); pass through ReLU.
                for (d, z) in delta.as_mut_slice().iter_mut().zip(tape.pre[i].as_slice()) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let dw = tape.inputs[i].t_matmul(&delta)?;
            let mut db = vec![0.0; delta.cols()];
            for row in delta.iter_rows() {
                for (b, v) in db.iter_mut().zip(row) {
                    *b += v;
                }
            }
            let dx = delta.matmul_t(&self.layers[i].weight)?;
            weights.push(dw);
            biases.push(db);
            delta = dx;
        }
        weights.reverse();
        biases.reverse();
        Ok((MlpGrads { weights, biases }, delta))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape(
                "Mlp::forward",
                format!("{} input columns", self.in_dim()),
                x.cols(),
            ));
        }
        if x.rows() == 0 {
            return Err(Error::shape("Mlp::forward", "at least one row", 0));
        }
        Ok(())
    }

    fn apply_output(&self, z: &mut Matrix) {
        if self.output == OutputActivation::Softmax {
            let cols = z.cols();
            for row in z.as_mut_slice().chunks_exact_mut(cols) {
                softmax_in_place(row);
            }
        }
    }
}

fn affine(layer: &Dense, x: &Matrix) -> Result<Matrix> {
    let mut z = x.matmul(&layer.weight)?;
    let cols = z.cols();
    for row in z.as_mut_slice().chunks_exact_mut(cols) {
        for (v, b) in row.iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    Ok(z)
}

fn relu_in_place(m: &mut Matrix) {
    m.as_mut_slice().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
}

/// Vector-Jacobian product of row softmax: `y * (dy - <dy, y>)` row by row.
fn softmax_backward(y: &Matrix, dy: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, dr) = (y.row(r), dy.row(r));
        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
        for (o, (a, b)) in out.row_mut(r).iter_mut().zip(yr.iter().zip(dr)) {
            *o = a * (b - dot);
        }
    }
    out
}

/// Serializable snapshot of a network's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpShape {
    pub dims: Vec<usize>,
    pub output: OutputActivation,
}

impl Mlp {
    pub fn shape(&self) -> MlpShape {
        let mut dims = vec![self.in_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim()));
        MlpShape {
            dims,
            output: self.output,
        }
    }

    /// A zero-initialised network of the given shape.
    pub fn zeros(shape: &MlpShape) -> Result<Self> {
        if shape.dims.len() < 2 {
            return Err(Error::Config("network shape needs two widths".into()));
        }
        let layers = shape
            .dims
            .windows(2)
            .map(|w| Dense {
                weight: Matrix::zeros(w[0], w[1]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Self::from_layers(layers, shape.output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::finite_diff_check;
    use crate::nn::reference::{lift, mlp_forward};
    use crate::nn::DoubleDouble;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(w: f64, b: f64) -> Mlp {
        Mlp::from_layers(
            vec![Dense {
                weight: Matrix::from_vec(1, 1, vec![w]).unwrap(),
                bias: vec![b],
            }],
            OutputActivation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_nonnegative_input() {
        let net = Mlp::from_layers(
            vec![
                Dense { weight: Matrix::identity(3), bias: vec![0.0; 3] },
                Dense { weight: Matrix::identity(3), bias: vec![0.0; 3] },
            ],
            OutputActivation::Identity,
        )
        .unwrap();
        let x = Matrix::from_rows(&[[0.0, 1.5, 2.0], [3.0, 0.25, 0.0]]).unwrap();
        let (y, _) = net.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_input_with_zero_bias_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 5, 2], OutputActivation::Identity, &mut rng).unwrap();
        let y = net.predict(&Matrix::zeros(3, 4)).unwrap();
        assert!(y.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_evaluated_affine_rectifier() {
        // max(0, 2 * 3 + 1) through a hidden-layer rectifier.
        let net = Mlp::from_layers(
            vec![
                Dense { weight: Matrix::from_vec(1, 1, vec![2.0]).unwrap(), bias: vec![1.0] },
                Dense { weight: Matrix::identity(1), bias: vec![0.0] },
            ],
            OutputActivation::Identity,
        )
        .unwrap();
        let y = net.predict(&Matrix::from_vec(1, 1, vec![3.0]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[7.0]);
        assert_eq!(single(2.0, 1.0).predict(&Matrix::from_vec(1, 1, vec![3.0]).unwrap()).unwrap().as_slice(), &[7.0]);
    }

    #[test]
    fn input_width_mismatch_is_shape_error() {
        let net = single(1.0, 0.0);
        assert!(matches!(net.forward(&Matrix::zeros(2, 3)), Err(Error::Shape { .. })));
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[3, 6, 4, 2], OutputActivation::Softmax, &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.3, -1.0, 2.0], [1.0, 0.5, -0.2]]).unwrap();
        let (y, tape) = net.forward(&x).unwrap();
        let (g, dx) = net.backward(tape, &Matrix::zeros(y.rows(), y.cols())).unwrap();
        assert!(g.is_zero());
        assert!(dx.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_layer_adjoint() {
        let w = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let net = Mlp::from_layers(
            vec![Dense { weight: w.clone(), bias: vec![0.0; 2] }],
            OutputActivation::Identity,
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        let (_, tape) = net.forward(&x).unwrap();
        let (g, dx) = net.backward(tape, &Matrix::filled(1, 2, 1.0)).unwrap();
        // dW[i][j] = x_i, dx_i = sum_j W[i][j]
        assert_eq!(g.weights[0].column(0), vec![1.0, -2.0, 0.5]);
        assert_eq!(g.weights[0].column(1), vec![1.0, -2.0, 0.5]);
        assert_eq!(g.biases[0], vec![1.0, 1.0]);
        assert_eq!(dx.as_slice(), &[3.0, 7.0, 11.0]);
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[2, 3, 1], OutputActivation::Identity, &mut rng).unwrap();
        let (_, tape) = net.forward(&Matrix::filled(1, 2, 0.5)).unwrap();
        net.layers_mut()[0].bias[0] += 0.1;
        assert!(matches!(
            net.backward(tape, &Matrix::filled(1, 1, 1.0)),
            Err(Error::Usage(_))
        ));
        let other = net.clone();
        let (_, tape) = net.forward(&Matrix::filled(1, 2, 0.5)).unwrap();
        assert!(other.backward(tape, &Matrix::filled(1, 1, 1.0)).is_err());
    }

    fn sum_output_check(output: OutputActivation, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::new(&[4, 6, 5, 3], output, &mut rng).unwrap();
        // Non-zero biases keep pre-activations off the rectifier kink.
        for l in net.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let x = Matrix::from_vec(5, 4, (0..20).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        // Weighted sum keeps the softmax case non-trivial (a plain sum is constant).
        let weights: Vec<f64> = (0..15).map(|i| 0.3 + 0.1 * i as f64).collect();
        let dy = Matrix::from_vec(5, 3, weights.clone()).unwrap();
        let (_, tape) = net.forward(&x).unwrap();
        let (g, dx) = net.backward(tape, &dy).unwrap();
        let mut analytic = Vec::new();
        g.flatten_into(&mut analytic);
        analytic.extend_from_slice(dx.as_slice());

        let n_net = net.num_params();
        let mut params = net.flat_params();
        params.extend_from_slice(x.as_slice());
        let mut probe = net.clone();
        let report = finite_diff_check(
            |p| {
                probe.set_flat_params(&p[..n_net])?;
                let xi = Matrix::from_vec(5, 4, p[n_net..].to_vec())?;
                let y = mlp_forward::<DoubleDouble>(&probe, &lift(&xi));
                let mut total = DoubleDouble::new(0.0);
                for (a, &b) in y.iter().flatten().zip(&weights) {
                    total = total + *a * DoubleDouble::new(b);
                }
                Ok(total)
            },
            &params,
            &analytic,
            1e-6,
        )
        .unwrap();
        report.max_rel_error
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..5 {
            let e = sum_output_check(OutputActivation::Identity, seed);
            assert!(e < 1e-5, "seed {seed}: {e}");
            let e = sum_output_check(OutputActivation::Softmax, seed + 100);
            assert!(e < 1e-5, "softmax seed {seed}: {e}");
        }
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(&[3, 4, 2], OutputActivation::Identity, &mut rng).unwrap();
        let mut copy = Mlp::zeros(&net.shape()).unwrap();
        assert_eq!(copy.set_flat_params(&net.flat_params()).unwrap(), net.num_params());
        assert_eq!(copy, net);
    }
}
