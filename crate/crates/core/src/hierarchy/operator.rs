//! The truncated hierarchy generator S = S⁺ + S⁻ in mode space.
//!
//! With the crate's Fourier convention the creation/annihilation pieces act
//! by mode transfer:
//!   (S^{m,+}g^{m+1})(p) = -Σ_{i≤m} Σ_q [K̂(q)·p_i]·g^{m+1}(…, p_i-q, …; q)
//!   (S^{m,-}g^{m-1})(p) =  Σ_{j≥2} Σ_{i≠j} [K̂(p_j)·p_i]·g^{m-1}(p∖j; p_i+p_j)
//! (q runs over the kernel's signed modes; K̂(q)·q = 0 kills same-slot
//! terms). Transfers leaving the |k|_∞ ≤ Λ ball are dropped — that is the
//! orthogonal mode truncation — and levels are truncated at M, so the
//! assembled operator is Hermitian for the weighted inner product.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::kernels::TorusKernel;
use crate::{Error, Result};

use super::basis::{FockBasis, FockVector};

#[derive(Debug, Clone)]
struct SignedMode {
    idx: u16,
    k: [i64; 2],
    k_hat: [Complex64; 2],
}

pub struct HierarchyOperator {
    pub basis: Arc<FockBasis>,
    modes: Vec<SignedMode>,
}

/// K̂(q)·p for an integer mode p.
fn amp(k_hat: &[Complex64; 2], p: [i64; 2]) -> Complex64 {
    k_hat[0] * p[0] as f64 + k_hat[1] * p[1] as f64
}

pub fn build_operator(kernel: &TorusKernel, basis: Arc<FockBasis>) -> Result<HierarchyOperator> {
    if kernel.max_mode_linf() > 2 * basis.lambda {
        return Err(Error::Config(format!(
            "kernel modes reach |k|_∞ = {} beyond 2Λ = {}",
            kernel.max_mode_linf(),
            2 * basis.lambda
        )));
    }
    let modes = kernel
        .fourier_modes()
        .into_iter()
        .filter_map(|m| basis.mode_index(m.k).map(|idx| SignedMode { idx, k: m.k, k_hat: m.k_hat }))
        .collect();
    Ok(HierarchyOperator { basis, modes })
}

impl HierarchyOperator {
    /// S·v (matrix-free gather, parallel over output elements).
    pub fn apply(&self, v: &FockVector) -> FockVector {
        let basis = &self.basis;
        let data = (0..basis.m_max)
            .map(|li| {
                let level = &basis.levels[li];
                level
                    .elems
                    .par_iter()
                    .map(|e| self.gather(li, e.tagged, &e.background, v))
                    .collect()
            })
            .collect();
        FockVector { data }
    }

    fn gather(&self, li: usize, tagged: u16, background: &[u16], v: &FockVector) -> Complex64 {
        let basis = &self.basis;
        let m = li + 1;
        let mut acc = Complex64::ZERO;
        let p1 = basis.mode_of(tagged);

        // S^{m,+}: absorb one background slot from level m+1
        if li + 1 < basis.m_max {
            let up = &basis.levels[li + 1];
            let mut bg = Vec::with_capacity(m);
            // i = 1 (tagged slot shifted by -q, background gains q)
            for q in &self.modes {
                if let Some(t2) = basis.mode_index([p1[0] - q.k[0], p1[1] - q.k[1]]) {
                    bg.clear();
                    bg.extend_from_slice(background);
                    let pos = bg.partition_point(|&x| x < q.idx);
                    bg.insert(pos, q.idx);
                    if let Some(j) = up.index_of(t2, &bg) {
                        acc -= amp(&q.k_hat, p1) * v.data[li + 1][j];
                    }
                }
            }
            // i ≥ 2: a background slot with mode w shifts to w - q
            let mut s = 0;
            while s < background.len() {
                let mut mult = 1usize;
                while s + mult < background.len() && background[s + mult] == background[s] {
                    mult += 1;
                }
                let w = basis.mode_of(background[s]);
                for q in &self.modes {
                    let w2 = [w[0] - q.k[0], w[1] - q.k[1]];
                    if w2 == [0, 0] {
                        continue; // mean-zero slot vanishes
                    }
                    if let Some(w2i) = basis.mode_index(w2) {
                        bg.clear();
                        bg.extend_from_slice(background);
                        bg.remove(s);
                        let pos = bg.partition_point(|&x| x < w2i);
                        bg.insert(pos, w2i);
                        let pos = bg.partition_point(|&x| x < q.idx);
                        bg.insert(pos, q.idx);
                        if let Some(j) = up.index_of(tagged, &bg) {
                            acc -= mult as f64 * amp(&q.k_hat, w) * v.data[li + 1][j];
                        }
                    }
                }
                s += mult;
            }
        }

        // S^{m,-}: emit one background slot into level m-1
        if li >= 1 {
            let down = &basis.levels[li - 1];
            let mut bg = Vec::with_capacity(m);
            let mut s = 0;
            while s < background.len() {
                let mut mult_u = 1usize;
                while s + mult_u < background.len() && background[s + mult_u] == background[s] {
                    mult_u += 1;
                }
                let u = basis.mode_of(background[s]);
                // only kernel modes couple: K̂(u) must be present
                if let Some(q) = self.modes.iter().find(|q| q.idx == background[s]) {
                    // i = 1: tagged shifts to p1 + u
                    if let Some(t2) = basis.mode_index([p1[0] + u[0], p1[1] + u[1]]) {
                        bg.clear();
                        bg.extend_from_slice(background);
                        bg.remove(s);
                        if let Some(j) = down.index_of(t2, &bg) {
                            acc += mult_u as f64 * amp(&q.k_hat, p1) * v.data[li - 1][j];
                        }
                    }
                    // i ≥ 2: another slot with mode w shifts to w + u
                    let mut t = 0;
                    while t < background.len() {
                        let mut mult_w = 1usize;
                        while t + mult_w < background.len() && background[t + mult_w] == background[t]
                        {
                            mult_w += 1;
                        }
                        if t != s {
                            let w = basis.mode_of(background[t]);
                            let w2 = [w[0] + u[0], w[1] + u[1]];
                            let pairs = (mult_u * mult_w) as f64;
                            if w2 != [0, 0] {
                                if let Some(w2i) = basis.mode_index(w2) {
                                    bg.clear();
                                    bg.extend_from_slice(background);
                                    // remove one u and one w (s ≠ t)
                                    let (a, b) = if s < t { (s, t) } else { (t, s) };
                                    bg.remove(b);
                                    bg.remove(a);
                                    let pos = bg.partition_point(|&x| x < w2i);
                                    bg.insert(pos, w2i);
                                    if let Some(j) = down.index_of(tagged, &bg) {
                                        acc += pairs * amp(&q.k_hat, w) * v.data[li - 1][j];
                                    }
                                }
                            }
                        } else if mult_u >= 2 {
                            // same mode in two distinct slots: K̂(u)·u = 0
                        }
                        t += mult_w;
                    }
                }
                s += mult_u;
            }
        }
        acc
    }

    /// Dense matrix in the orthonormalized frame c̃ = √w·c (Hermitian).
    pub fn assemble_dense(&self) -> Result<DMatrix<Complex64>> {
        let basis = &self.basis;
        let dim = basis.total_dim();
        if dim > 5000 {
            return Err(Error::BasisOverflow(format!(
                "dense assembly limited to 5000 coefficients, basis has {dim}"
            )));
        }
        let offsets: Vec<usize> = basis
            .level_dims()
            .iter()
            .scan(0usize, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect();
        let sqrt_w: Vec<f64> = basis
            .levels
            .iter()
            .flat_map(|l| l.elems.iter().map(|e| e.weight.sqrt()))
            .collect();
        let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
        for (li, lvl) in basis.levels.iter().enumerate() {
            for f in 0..lvl.dim() {
                let mut unit = basis.zeros();
                unit.data[li][f] = Complex64::ONE;
                let col = self.apply(&unit);
                let fg = offsets[li] + f;
                for (lj, out) in col.data.iter().enumerate() {
                    for (e, &val) in out.iter().enumerate() {
                        if val != Complex64::ZERO {
                            let eg = offsets[lj] + e;
                            mat[(eg, fg)] += val * sqrt_w[eg] / sqrt_w[fg];
                        }
                    }
                }
            }
        }
        Ok(mat)
    }

    /// Flatten to the orthonormalized frame (matching `assemble_dense`).
    pub fn to_tilde(&self, v: &FockVector) -> Vec<Complex64> {
        self.basis
            .levels
            .iter()
            .zip(&v.data)
            .flat_map(|(l, d)| {
                l.elems.iter().zip(d).map(|(e, &c)| c * e.weight.sqrt()).collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn from_tilde(&self, t: &[Complex64]) -> FockVector {
        let mut out = self.basis.zeros();
        let mut idx = 0;
        for (l, d) in self.basis.levels.iter().zip(&mut out.data) {
            for (e, c) in l.elems.iter().zip(d.iter_mut()) {
                *c = t[idx] / e.weight.sqrt();
                idx += 1;
            }
        }
        out
    }
}
