//! Truncated weighted symmetric tensor basis for the limiting hierarchy.
//!
//! Level m holds functions of (x₁; x₂,…,x_m) symmetric in the background
//! slots, stored per (tagged mode k₁, background multiset {k₂,…,k_m}) with
//! all modes in the sup-norm ball |k|_∞ ≤ Λ and background modes nonzero.
//! The weighted inner product ‖h‖² = Σ_m ‖h^m‖²/(m-1)! becomes
//! Σ_elements w_e·|c_e|² with w_e = 1/∏_v mult_v! over the multiset.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::{Error, Result};

/// Basis element: tagged ball index plus sorted background ball indices.
#[derive(Debug, Clone)]
pub struct Element {
    pub tagged: u16,
    pub background: Vec<u16>,
    /// 1/∏ mult_v! — the multiset weight in the inner product
    pub weight: f64,
}

#[derive(Debug)]
pub struct Level {
    pub elems: Vec<Element>,
    lookup: HashMap<u128, u32>,
}

impl Level {
    pub fn dim(&self) -> usize {
        self.elems.len()
    }

    pub fn index_of(&self, tagged: u16, sorted_background: &[u16]) -> Option<usize> {
        self.lookup.get(&pack_key(tagged, sorted_background)).map(|&i| i as usize)
    }
}

fn pack_key(tagged: u16, sorted_background: &[u16]) -> u128 {
    debug_assert!(sorted_background.len() <= 17);
    let mut key = tagged as u128 + 1;
    for &b in sorted_background {
        key = (key << 7) | (b as u128 + 1);
    }
    key
}

/// Truncated basis with mode cutoff Λ and level cutoff M.
#[derive(Debug)]
pub struct FockBasis {
    pub lambda: i64,
    pub m_max: usize,
    pub levels: Vec<Level>,
    side: i64,
    zero_idx: u16,
}

impl FockBasis {
    pub fn new(lambda: i64, m_max: usize) -> Result<Self> {
        if lambda < 1 || m_max < 1 {
            return Err(Error::Config("need Λ ≥ 1 and M ≥ 1".into()));
        }
        if lambda > 5 || m_max > 17 {
            return Err(Error::BasisOverflow(format!(
                "Λ = {lambda}, M = {m_max} exceeds the packed-key bounds (Λ ≤ 5, M ≤ 17)"
            )));
        }
        let side = 2 * lambda + 1;
        let n_modes = (side * side) as usize;
        let zero_idx = Self::index_static(lambda, [0, 0]);

        // dimension guard before enumeration
        let b = n_modes - 1;
        let mut total: f64 = 0.0;
        for m in 1..=m_max {
            total += n_modes as f64 * binom(b + m - 2, m - 1);
            if total > 1e7 {
                return Err(Error::BasisOverflow(format!(
                    "Λ = {lambda}, M = {m_max}: more than 10⁷ coefficients"
                )));
            }
        }

        let bg_ids: Vec<u16> =
            (0..n_modes as u16).filter(|&i| i != zero_idx).collect();
        let mut levels = Vec::with_capacity(m_max);
        for m in 1..=m_max {
            let mut elems = Vec::new();
            let mut multiset = vec![0usize; m - 1];
            for tagged in 0..n_modes as u16 {
                enumerate_multisets(&bg_ids, &mut multiset, 0, 0, &mut |sel: &[u16]| {
                    let weight = 1.0 / multiplicity_factorial(sel);
                    elems.push(Element { tagged, background: sel.to_vec(), weight });
                });
            }
            let lookup = elems
                .iter()
                .enumerate()
                .map(|(i, e)| (pack_key(e.tagged, &e.background), i as u32))
                .collect();
            levels.push(Level { elems, lookup });
        }
        Ok(FockBasis { lambda, m_max, levels, side, zero_idx })
    }

    fn index_static(lambda: i64, k: [i64; 2]) -> u16 {
        let side = 2 * lambda + 1;
        ((k[0] + lambda) * side + (k[1] + lambda)) as u16
    }

    /// Ball index of a mode, None outside |k|_∞ ≤ Λ.
    pub fn mode_index(&self, k: [i64; 2]) -> Option<u16> {
        if k[0].abs() > self.lambda || k[1].abs() > self.lambda {
            None
        } else {
            Some(((k[0] + self.lambda) * self.side + (k[1] + self.lambda)) as u16)
        }
    }

    pub fn mode_of(&self, idx: u16) -> [i64; 2] {
        let i = idx as i64;
        [i / self.side - self.lambda, i % self.side - self.lambda]
    }

    pub fn zero_index(&self) -> u16 {
        self.zero_idx
    }

    pub fn level_dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.dim()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.levels.iter().map(|l| l.dim()).sum()
    }

    pub fn zeros(&self) -> FockVector {
        FockVector { data: self.levels.iter().map(|l| vec![Complex64::ZERO; l.dim()]).collect() }
    }

    /// Weighted inner product ⟨a, b⟩_H.
    pub fn dot(&self, a: &FockVector, b: &FockVector) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (lvl, (va, vb)) in self.levels.iter().zip(a.data.iter().zip(&b.data)) {
            for (e, (x, y)) in lvl.elems.iter().zip(va.iter().zip(vb)) {
                acc += e.weight * x.conj() * y;
            }
        }
        acc
    }

    pub fn norm(&self, a: &FockVector) -> f64 {
        self.dot(a, a).re.max(0.0).sqrt()
    }
}

fn multiplicity_factorial(sorted: &[u16]) -> f64 {
    let mut f = 1.0;
    let mut run = 1u32;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            f *= run as f64;
        } else {
            run = 1;
        }
    }
    f
}

fn binom(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v *= (n - i) as f64 / (k - i) as f64;
    }
    v
}

fn enumerate_multisets(
    ids: &[u16],
    buf: &mut Vec<usize>,
    depth: usize,
    start: usize,
    f: &mut impl FnMut(&[u16]),
) {
    if depth == buf.len() {
        let sel: Vec<u16> = buf.iter().map(|&p| ids[p]).collect();
        f(&sel);
        return;
    }
    for p in start..ids.len() {
        buf[depth] = p;
        enumerate_multisets(ids, buf, depth + 1, p, f);
    }
}

/// Coefficient arrays per level, aligned with a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub data: Vec<Vec<Complex64>>,
}

impl FockVector {
    pub fn scaled_add(&mut self, c: Complex64, other: &FockVector) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for a in self.data.iter_mut() {
            for x in a.iter_mut() {
                *x *= c;
            }
        }
    }
}
