//! Inference for the CNN + message-passing policy network.
//!
//! Per agent: conv 3x3 (no padding) -> leaky-ReLU -> flatten -> append the
//! greedy vector -> two linear maps giving a node embedding and a message.
//! Then three rounds of
//!
//! ```text
//! h' = leaky(W_self h + b + W_neigh mean_{j in N(i)} m_j)
//! ```
//!
//! where `m` is the message embedding in the first round and the previous
//! `h` afterwards, with layer norm between rounds. An agent without
//! neighbors aggregates zeros. Head: linear -> leaky -> linear -> softmax.

use rayon::prelude::*;

use super::weights::{WeightsFile, GNN_LAYERS, INPUT_CHANNELS, KERNEL};
use crate::error::WeightsError;
use crate::features::{fov_size, FovTensor};
use crate::grid::Action;

pub const LEAKY_SLOPE: f32 = 0.01;
pub const LAYER_NORM_EPS: f32 = 1e-5;

/// Node features and in-neighbor lists for one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub fovs: Vec<FovTensor>,
    pub neighbors: Vec<Vec<u32>>,
}

#[inline]
fn leaky(x: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// `out = W x + b` for a row-major `[out, in]` weight.
fn linear(weight: &[f32], bias: Option<&[f32]>, x: &[f32], out_dim: usize) -> Vec<f32> {
    let in_dim = x.len();
    debug_assert_eq!(weight.len(), out_dim * in_dim);
    (0..out_dim)
        .map(|o| {
            let row = &weight[o * in_dim..(o + 1) * in_dim];
            let dot: f32 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            dot + bias.map_or(0.0, |b| b[o])
        })
        .collect()
}

fn layer_norm(x: &mut [f32], gain: &[f32], bias: &[f32]) {
    let n = x.len() as f32;
    let mean = x.iter().sum::<f32>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for ((v, g), b) in x.iter_mut().zip(gain).zip(bias) {
        *v = (*v - mean) * inv * g + b;
    }
}

fn encode(w: &WeightsFile, fov: &FovTensor) -> (Vec<f32>, Vec<f32>) {
    let arch = w.architecture();
    let d = fov_size(arch.radius);
    let o = arch.conv_out_size();
    let kernel = &w.tensor("conv.weight").data;
    let kbias = &w.tensor("conv.bias").data;
    let channels: Vec<&[f32]> = fov.channels().collect();
    let mut features = Vec::with_capacity(arch.encoder_width());
    for c in 0..arch.conv_channels {
        for y in 0..o {
            for x in 0..o {
                let mut acc = kbias[c];
                for (ci, img) in channels.iter().enumerate() {
                    let kbase = (c * INPUT_CHANNELS + ci) * KERNEL * KERNEL;
                    for ky in 0..KERNEL {
                        let row = &img[(y + ky) * d + x..(y + ky) * d + x + KERNEL];
                        let krow = &kernel[kbase + ky * KERNEL..kbase + ky * KERNEL + KERNEL];
                        for kx in 0..KERNEL {
                            acc += krow[kx] * row[kx];
                        }
                    }
                }
                features.push(leaky(acc));
            }
        }
    }
    features.extend_from_slice(&fov.greedy);
    let e = arch.embed_dim;
    let node = linear(&w.tensor("node.weight").data, Some(&w.tensor("node.bias").data), &features, e);
    let msg = linear(
        &w.tensor("message.weight").data,
        Some(&w.tensor("message.bias").data),
        &features,
        e,
    );
    (node, msg)
}

fn check_input(w: &WeightsFile, graph: &GraphInput) -> Result<(), WeightsError> {
    let arch = w.architecture();
    let n = graph.fovs.len();
    if graph.neighbors.len() != n {
        return Err(WeightsError::Input(format!(
            "{} neighbor lists for {n} agents",
            graph.neighbors.len()
        )));
    }
    let cells = fov_size(arch.radius).pow(2);
    for (i, f) in graph.fovs.iter().enumerate() {
        if f.radius != arch.radius || f.channels().any(|c| c.len() != cells) {
            return Err(WeightsError::Input(format!(
                "agent {i} has radius {} tensors, weights expect {}",
                f.radius, arch.radius
            )));
        }
    }
    if let Some(bad) = graph.neighbors.iter().flatten().find(|j| **j as usize >= n) {
        return Err(WeightsError::Input(format!("neighbor index {bad} out of range")));
    }
    Ok(())
}

/// Raw output logits, one row per agent.
pub fn neural_logits(w: &WeightsFile, graph: &GraphInput) -> Result<Vec<[f32; Action::COUNT]>, WeightsError> {
    check_input(w, graph)?;
    let e = w.architecture().embed_dim;
    let (mut h, mut msg): (Vec<Vec<f32>>, Vec<Vec<f32>>) =
        graph.fovs.par_iter().map(|f| encode(w, f)).unzip();

    for l in 0..GNN_LAYERS {
        let w_self = &w.tensor(&format!("sage{l}.self.weight")).data;
        let b_self = &w.tensor(&format!("sage{l}.self.bias")).data;
        let w_neigh = &w.tensor(&format!("sage{l}.neigh.weight")).data;
        let norm = (l + 1 < GNN_LAYERS).then(|| {
            (
                &w.tensor(&format!("norm{l}.weight")).data,
                &w.tensor(&format!("norm{l}.bias")).data,
            )
        });
        let next: Vec<Vec<f32>> = (0..h.len())
            .into_par_iter()
            .map(|i| {
                let mut agg = vec![0.0f32; e];
                let nbrs = &graph.neighbors[i];
                for &j in nbrs {
                    for (a, m) in agg.iter_mut().zip(&msg[j as usize]) {
                        *a += m;
                    }
                }
                if !nbrs.is_empty() {
                    let k = nbrs.len() as f32;
                    agg.iter_mut().for_each(|a| *a /= k);
                }
                let s = linear(w_self, Some(b_self), &h[i], e);
                let t = linear(w_neigh, None, &agg, e);
                let mut out: Vec<f32> = s.iter().zip(&t).map(|(a, b)| leaky(a + b)).collect();
                if let Some((g, b)) = norm {
                    layer_norm(&mut out, g, b);
                }
                out
            })
            .collect();
        h = next;
        msg = h.clone();
    }

    let hidden_w = &w.tensor("head.hidden.weight").data;
    let hidden_b = &w.tensor("head.hidden.bias").data;
    let out_w = &w.tensor("head.out.weight").data;
    let out_b = &w.tensor("head.out.bias").data;
    Ok(h
        .par_iter()
        .map(|x| {
            let hidden: Vec<f32> = linear(hidden_w, Some(hidden_b), x, e).into_iter().map(leaky).collect();
            let logits = linear(out_w, Some(out_b), &hidden, Action::COUNT);
            [logits[0], logits[1], logits[2], logits[3], logits[4]]
        })
        .collect())
}

/// Numerically stable softmax, accumulated in f64.
pub fn softmax(logits: &[f32; Action::COUNT]) -> [f64; Action::COUNT] {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exp = logits.map(|l| (l as f64 - max).exp());
    let sum: f64 = exp.iter().sum();
    exp.map(|v| v / sum)
}
