use std::ops::AddAssign;

use rayon::prelude::*;
use serde::Serialize;

use super::params::{AttentionOptions, LayerParams};
use crate::error::{Error, Result};
use crate::mask::AllowList;
use crate::numeric::{dot, row_softmax, row_softmax_in_place, Matrix, MlpParams};
use crate::query::QueryBundle;

/// Softmax work charged per permitted pair and head: one exponential and one
/// normalisation.
pub const SOFTMAX_OPS_PER_PAIR: u64 = 2;

/// Multiply-accumulate tally of executed work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MacCount {
    /// Q/K/V projections.
    pub transforms: u64,
    /// Logits, softmax and value aggregation over visited pairs.
    pub attention: u64,
    pub residual: u64,
    pub feed_forward: u64,
}

impl MacCount {
    pub fn total(&self) -> u64 {
        self.transforms + self.attention + self.residual + self.feed_forward
    }
}

impl AddAssign for MacCount {
    fn add_assign(&mut self, o: Self) {
        self.transforms += o.transforms;
        self.attention += o.attention;
        self.residual += o.residual;
        self.feed_forward += o.feed_forward;
    }
}

pub(crate) struct Projected {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
}

pub(crate) fn check_inputs(x: &QueryBundle, p: &LayerParams, m: &AllowList) -> Result<()> {
    if m.geometry() != x.geometry {
        return Err(Error::shape(
            "attention",
            format!("mask geometry {} vs input {}", m.geometry(), x.geometry),
        ));
    }
    if p.width() != x.width() {
        return Err(Error::shape(
            "attention",
            format!("params width {} vs features {}", p.width(), x.width()),
        ));
    }
    Ok(())
}

pub(crate) fn project(x: &Matrix, p: &LayerParams, counter: &mut MacCount) -> Result<Projected> {
    let q = x.affine(&p.wq, &p.bq)?;
    let k = x.affine(&p.wk, &p.bk)?;
    let v = x.affine(&p.wv, &p.bv)?;
    let (n, d) = x.shape();
    counter.transforms += 3 * (n * d * d) as u64;
    Ok(Projected { q, k, v })
}

/// Reference path: materialises the full `n × n` logit matrix per head, adds
/// the additive mask and multiplies the softmax by `V`.
pub fn attention_dense(
    x: &QueryBundle,
    p: &LayerParams,
    m: &AllowList,
    opts: &AttentionOptions,
) -> Result<QueryBundle> {
    attention_dense_counted(x, p, m, opts, &mut MacCount::default())
}

pub fn attention_dense_counted(
    x: &QueryBundle,
    p: &LayerParams,
    m: &AllowList,
    opts: &AttentionOptions,
    counter: &mut MacCount,
) -> Result<QueryBundle> {
    check_inputs(x, p, m)?;
    let (n, d) = x.features.shape();
    let hw = opts.head_width(d)?;
    let scale = opts.logit_scale(hw);
    let proj = project(&x.features, p, counter)?;
    let additive = m.to_additive();

    let mut out = Matrix::zeros(n, d);
    for h in 0..opts.heads {
        let cols = h * hw..(h + 1) * hw;
        let qh = proj.q.slice_cols(cols.start, cols.end);
        let kh = proj.k.slice_cols(cols.start, cols.end);
        let vh = proj.v.slice_cols(cols.start, cols.end);
        let logits = qh.matmul_transposed(&kh)?.scale(scale).add(&additive)?;
        let weights = row_softmax(&logits)?;
        let heads_out = weights.matmul(&vh)?;
        for i in 0..n {
            out.row_mut(i)[cols.clone()].copy_from_slice(heads_out.row(i));
        }
    }
    counter.attention += (n * n) as u64 * (2 * d as u64 + SOFTMAX_OPS_PER_PAIR * opts.heads as u64);
    counter.residual += (n * d) as u64;
    QueryBundle::new(x.geometry, out.add(&x.features)?)
}

/// Sparse gather path: every query row visits only its permitted keys. Rows
/// are processed in parallel; each row's reduction order is fixed (keys in
/// ascending index order), so results do not depend on thread count.
pub fn attention_sparse(
    x: &QueryBundle,
    p: &LayerParams,
    m: &AllowList,
    opts: &AttentionOptions,
) -> Result<QueryBundle> {
    attention_sparse_counted(x, p, m, opts, &mut MacCount::default())
}

pub fn attention_sparse_counted(
    x: &QueryBundle,
    p: &LayerParams,
    m: &AllowList,
    opts: &AttentionOptions,
    counter: &mut MacCount,
) -> Result<QueryBundle> {
    check_inputs(x, p, m)?;
    let (n, d) = x.features.shape();
    let hw = opts.head_width(d)?;
    let scale = opts.logit_scale(hw);
    let proj = project(&x.features, p, counter)?;

    let rows: Vec<Result<(Vec<f64>, u64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let keys = m.row(i);
            let mut out = vec![0.0; d];
            let mut weights = vec![0.0; keys.len()];
            let mut macs = 0u64;
            for h in 0..opts.heads {
                let cols = h * hw..(h + 1) * hw;
                let qi = &proj.q.row(i)[cols.clone()];
                for (w, &j) in weights.iter_mut().zip(keys) {
                    *w = dot(qi, &proj.k.row(j)[cols.clone()]) * scale;
                    macs += hw as u64;
                }
                if !row_softmax_in_place(&mut weights) {
                    return Err(Error::DegenerateRow { row: i });
                }
                macs += SOFTMAX_OPS_PER_PAIR * keys.len() as u64;
                let acc = &mut out[cols.clone()];
                for (&w, &j) in weights.iter().zip(keys) {
                    for (a, v) in acc.iter_mut().zip(&proj.v.row(j)[cols.clone()]) {
                        *a += w * v;
                    }
                    macs += hw as u64;
                }
            }
            for (o, xv) in out.iter_mut().zip(x.features.row(i)) {
                *o += xv;
            }
            Ok((out, macs))
        })
        .collect();

    let mut data = Vec::with_capacity(n * d);
    for r in rows {
        let (row, macs) = r?;
        data.extend_from_slice(&row);
        counter.attention += macs;
    }
    counter.residual += (n * d) as u64;
    QueryBundle::new(x.geometry, Matrix::from_vec(n, d, data)?)
}

/// Row-wise standardisation without learned scale or shift.
pub fn layer_norm(x: &Matrix) -> Matrix {
    const EPS: f64 = 1e-5;
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + EPS).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) * inv;
        }
    }
    out
}

/// `x + mlp(x)`.
pub fn feed_forward(x: &Matrix, mlp: &MlpParams, counter: &mut MacCount) -> Result<Matrix> {
    let y = mlp.apply(x)?;
    counter.feed_forward += x.rows() as u64 * mlp.macs_per_row();
    counter.residual += (x.rows() * x.cols()) as u64;
    y.add(x)
}
