//! Direct, loop-based forward pass in any [`Real`] precision.
//!
//! Shares no code with the GEMM-backed path, so it doubles as an independent
//! oracle for it.

use super::matrix::Matrix;
use super::mlp::{Mlp, OutputActivation};
use super::real::Real;

/// Row-major rows of scalars.
pub type Rows<R> = Vec<Vec<R>>;

pub fn lift<R: Real>(m: &Matrix) -> Rows<R> {
    m.iter_rows().map(|row| row.iter().map(|&v| R::from_f64(v)).collect()).collect()
}

pub fn lower<R: Real>(rows: &Rows<R>) -> Vec<Vec<f64>> {
    rows.iter().map(|row| row.iter().map(|v| v.to_f64()).collect()).collect()
}

pub fn softmax<R: Real>(z: &[R]) -> Vec<R> {
    let mut top = z[0];
    for &v in &z[1..] {
        top = top.max(v);
    }
    let e: Vec<R> = z.iter().map(|&v| (v - top).exp()).collect();
    let mut total = R::zero();
    for &v in &e {
        total = total + v;
    }
    e.into_iter().map(|v| v / total).collect()
}

pub fn mlp_forward<R: Real>(net: &Mlp, x: &Rows<R>) -> Rows<R> {
    let last = net.layers().len() - 1;
    let mut cur = x.clone();
    for (l, layer) in net.layers().iter().enumerate() {
        let w = &layer.weight;
        cur = cur
            .iter()
            .map(|row| {
                let mut out: Vec<R> = layer.bias.iter().map(|&b| R::from_f64(b)).collect();
                for (i, &xi) in row.iter().enumerate() {
                    for (o, acc) in out.iter_mut().enumerate() {
                        *acc = *acc + xi * R::from_f64(w.get(i, o));
                    }
                }
                if l < last {
                    for v in out.iter_mut() {
                        *v = v.max(R::zero());
                    }
                } else if net.output_activation() == OutputActivation::Softmax {
                    out = softmax(&out);
                }
                out
            })
            .collect();
    }
    cur
}
