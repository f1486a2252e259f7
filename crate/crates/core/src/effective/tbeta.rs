//! The Gaussian-case single-particle operator T_β on L²_β and its per-mode
//! spectral machinery.
//!
//! With x = (r, θ) and h = Σ_k h_k(r) e^{ikθ}, the operator
//!   (iT_β h)(x) = -βR·x · ∫ K(x-y) h(y) μ_β(y) dy
//! is diagonal per angular mode: the kernel of T_β at mode k is the real
//! symmetric t_k(r,s) = -βR·k·2π·w_k(r,s) against the measure μ(s)·s·ds,
//! where w_k are the relative-angle modes of W. Its kernel (the set of
//! radial functions) is the k = 0 block, which vanishes identically.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::grid::RadialGrid;
use crate::meanfield::EquilibriumProfile;
use crate::modes::TwoPointModeTable;
use crate::Result;

/// Function on the plane in (radial grid × signed angular mode) form.
#[derive(Debug, Clone)]
pub struct RadialModeField {
    pub grid: RadialGrid,
    pub l_max: usize,
    /// data[l + l_max][i] = h_l(r_i), l = -l_max..=l_max
    pub data: Vec<Vec<Complex64>>,
}

impl RadialModeField {
    pub fn zeros(grid: &RadialGrid, l_max: usize) -> Self {
        RadialModeField {
            grid: grid.clone(),
            l_max,
            data: vec![vec![Complex64::ZERO; grid.len()]; 2 * l_max + 1],
        }
    }

    pub fn mode(&self, l: i64) -> &[Complex64] {
        &self.data[(l + self.l_max as i64) as usize]
    }

    pub fn mode_mut(&mut self, l: i64) -> &mut Vec<Complex64> {
        &mut self.data[(l + self.l_max as i64) as usize]
    }

    /// Radial function (k = 0 only).
    pub fn from_radial(grid: &RadialGrid, l_max: usize, values: &[f64]) -> Self {
        let mut f = Self::zeros(grid, l_max);
        *f.mode_mut(0) = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        f
    }

    /// h(x) = x₁ = r·cosθ: modes ±1 with h_{±1}(r) = r/2.
    pub fn coordinate_x1(grid: &RadialGrid, l_max: usize) -> Self {
        let mut f = Self::zeros(grid, l_max);
        let half_r: Vec<Complex64> = grid.r.iter().map(|&r| Complex64::new(r / 2.0, 0.0)).collect();
        *f.mode_mut(1) = half_r.clone();
        *f.mode_mut(-1) = half_r;
        f
    }

    /// Pointwise value at polar (r, θ) by mode summation and interpolation.
    pub fn eval(&self, r: f64, theta: f64) -> Complex64 {
        let mut v = Complex64::ZERO;
        for l in -(self.l_max as i64)..=self.l_max as i64 {
            let row = self.mode(l);
            let re: Vec<f64> = row.iter().map(|c| c.re).collect();
            let im: Vec<f64> = row.iter().map(|c| c.im).collect();
            let c = Complex64::new(self.grid.interp(&re, r), self.grid.interp(&im, r));
            v += c * Complex64::new(0.0, l as f64 * theta).exp();
        }
        v
    }

    /// Weighted inner product ⟨g, h⟩_{L²_β} = Σ_l 2π ∫ conj(g_l) h_l μ r dr.
    pub fn inner(&self, other: &Self, mu: &[f64]) -> Complex64 {
        let mut acc = Complex64::ZERO;
        let l_max = self.l_max.min(other.l_max) as i64;
        for l in -l_max..=l_max {
            let (a, b) = (self.mode(l), other.mode(l));
            for i in 0..self.grid.len() {
                acc += a[i].conj() * b[i] * (mu[i] * self.grid.r[i] * self.grid.w[i]);
            }
        }
        acc * 2.0 * std::f64::consts::PI
    }

    pub fn norm(&self, mu: &[f64]) -> f64 {
        self.inner(self, mu).re.max(0.0).sqrt()
    }
}

/// Assembled per-mode matrices of the Gaussian-case T_β, with cached
/// eigendecompositions for propagation.
pub struct GaussTBeta {
    pub grid: RadialGrid,
    pub l_max: usize,
    pub beta: f64,
    pub r_const: f64,
    pub mu: Vec<f64>,
    /// quadrature weights d_j = μ_j r_j w_j (the 2π is carried explicitly)
    d: Vec<f64>,
    /// w_k tables for k = 0..=l_max
    w_modes: TwoPointModeTable,
    /// eigen of the symmetrized kernel per k = 1..=l_max (k=0 block is zero)
    eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl GaussTBeta {
    pub fn new(
        profile: &EquilibriumProfile,
        r_const: f64,
        w_modes: &TwoPointModeTable,
        l_max: usize,
    ) -> Self {
        let grid = profile.grid.clone();
        let n = grid.len();
        let d: Vec<f64> = (0..n).map(|j| profile.mu[j] * grid.r[j] * grid.w[j]).collect();
        let mut eigs = Vec::with_capacity(l_max);
        for k in 1..=l_max {
            // symmetrized: M[i,j] = t_k(r_i, r_j)·sqrt(2π d_i · 2π d_j)
            let t = &w_modes.data[k];
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let tk = -profile.beta * r_const * k as f64
                        * 2.0
                        * std::f64::consts::PI
                        * t[i * n + j];
                    m[(i, j)] = tk * (d[i] * d[j]).sqrt();
                }
            }
            eigs.push(m.symmetric_eigen());
        }
        GaussTBeta {
            grid,
            l_max,
            beta: profile.beta,
            r_const,
            mu: profile.mu.clone(),
            d,
            w_modes: w_modes.clone(),
            eigs,
        }
    }

    /// Kernel value of T_β at signed mode k: t_k(r_i, r_j) (real), to be
    /// integrated against μ(s)·s·ds.
    pub fn kernel(&self, k: i64, i: usize, j: usize) -> f64 {
        if k == 0 || k.unsigned_abs() as usize > self.l_max {
            return 0.0;
        }
        let n = self.grid.len();
        -self.beta * self.r_const * k as f64
            * 2.0
            * std::f64::consts::PI
            * self.w_modes.data[k.unsigned_abs() as usize][i * n + j]
    }

    /// T_β h (mode-diagonal application).
    pub fn apply(&self, h: &RadialModeField) -> RadialModeField {
        let n = self.grid.len();
        let mut out = RadialModeField::zeros(&self.grid, h.l_max);
        let l_max = h.l_max.min(self.l_max) as i64;
        for l in -l_max..=l_max {
            if l == 0 {
                continue;
            }
            let src = h.mode(l);
            let dst = out.mode_mut(l);
            for i in 0..n {
                let mut acc = Complex64::ZERO;
                for j in 0..n {
                    acc += src[j] * (self.kernel(l, i, j) * self.d[j]);
                }
                dst[i] = acc;
            }
        }
        out
    }

    /// Eigenvalues of the mode-k block (k ≥ 1).
    pub fn eigenvalues(&self, k: usize) -> &DVector<f64> {
        &self.eigs[k - 1].eigenvalues
    }

    /// Full eigendecomposition of the symmetrized mode-k block (k ≥ 1).
    pub fn eig_block(&self, k: usize) -> &SymmetricEigen<f64, nalgebra::Dyn> {
        &self.eigs[k - 1]
    }

    /// e^{-i·t·T_β} applied per mode (unitary on L²_β).
    pub fn propagate(&self, h: &RadialModeField, t: f64) -> RadialModeField {
        self.propagate_with(h, |lambda| Complex64::new(0.0, -t * lambda).exp())
    }

    /// Apply f(T_β) per mode through the eigendecomposition; f acts on
    /// eigenvalues of the signed-mode block (λ flips sign with k).
    pub fn propagate_with(
        &self,
        h: &RadialModeField,
        f: impl Fn(f64) -> Complex64,
    ) -> RadialModeField {
        let n = self.grid.len();
        let mut out = RadialModeField::zeros(&self.grid, h.l_max);
        let l_max = h.l_max.min(self.l_max) as i64;
        for l in -l_max..=l_max {
            if l == 0 {
                // T_β annihilates radial functions: f(0) acts as a scalar
                let c = f(0.0);
                let dst = out.mode_mut(0);
                for (o, &v) in dst.iter_mut().zip(h.mode(0)) {
                    *o = c * v;
                }
                continue;
            }
            let eig = &self.eigs[l.unsigned_abs() as usize - 1];
            // block at -k has kernel -t_k: eigenvalues flip sign
            let sign = if l > 0 { 1.0 } else { -1.0 };
            let src = h.mode(l);
            // transform to the symmetrized frame: ṽ_i = sqrt(2π d_i)·v_i
            let vt: DVector<Complex64> = DVector::from_iterator(
                n,
                (0..n).map(|i| src[i] * (2.0 * std::f64::consts::PI * self.d[i]).sqrt()),
            );
            // project on eigenvectors, scale, reassemble
            let mut acc = DVector::<Complex64>::zeros(n);
            for (e, col) in eig.eigenvalues.iter().zip(eig.eigenvectors.column_iter()) {
                let coeff: Complex64 =
                    col.iter().zip(vt.iter()).map(|(&u, &v)| u * v).sum::<Complex64>();
                let scale = f(sign * e);
                for i in 0..n {
                    acc[i] += col[i] * coeff * scale;
                }
            }
            let dst = out.mode_mut(l);
            for i in 0..n {
                dst[i] = acc[i] / (2.0 * std::f64::consts::PI * self.d[i]).sqrt();
            }
        }
        out
    }
}

/// T_β h for a Gaussian profile with constant R; the paper-facing operation.
pub fn apply_t_beta(
    profile: &EquilibriumProfile,
    r_const: f64,
    w_modes: &TwoPointModeTable,
    h: &RadialModeField,
) -> Result<RadialModeField> {
    let t = GaussTBeta::new(profile, r_const, w_modes, h.l_max);
    Ok(t.apply(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::PlaneKernel;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn setup(l_max: usize) -> (PlaneKernel, EquilibriumProfile, TwoPointModeTable) {
        let g = RadialGrid::gauss_legendre(8.0, 16, 8);
        let k = PlaneKernel::gaussian(1.0, 1.0).unwrap();
        let p = EquilibriumProfile::gaussian(1.0, 1.0, g.clone());
        let w = TwoPointModeTable::from_radial_kernel(&g, l_max, 256, |d| k.w(d));
        (k, p, w)
    }

    #[test]
    fn annihilates_radial_functions() {
        let (_, p, w) = setup(8);
        let vals: Vec<f64> = p.grid.r.iter().map(|&r| (-r * r / 3.0).exp()).collect();
        let h = RadialModeField::from_radial(&p.grid, 8, &vals);
        let t = GaussTBeta::new(&p, 1.0, &w, 8);
        let out = t.apply(&h);
        let sup = out
            .data
            .iter()
            .flat_map(|m| m.iter())
            .fold(0.0f64, |a, c| a.max(c.norm()));
        assert!(sup < 1e-14, "T_β on radial input = {sup:.2e}");
    }

    #[test]
    fn self_adjoint_on_weighted_space() {
        let (_, p, w) = setup(6);
        let t = GaussTBeta::new(&p, 1.0, &w, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let mut h = RadialModeField::zeros(&p.grid, 6);
            let mut g = RadialModeField::zeros(&p.grid, 6);
            for l in -6i64..=6 {
                for i in 0..p.grid.len() {
                    h.mode_mut(l)[i] =
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    g.mode_mut(l)[i] =
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
            let th = t.apply(&h);
            let tg = t.apply(&g);
            let lhs = g.inner(&th, &p.mu);
            let rhs = tg.inner(&h, &p.mu);
            let scale = h.norm(&p.mu) * g.norm(&p.mu);
            assert!(
                (lhs - rhs).norm() <= 1e-10 * scale.max(1.0),
                "⟨g,Th⟩ = {lhs}, ⟨Tg,h⟩ = {rhs}"
            );
        }
    }

    #[test]
    fn matches_dense_quadrature_oracle_on_x1() {
        // h(x) = x₁ with a Gaussian W: compare iT_β h against brute-force
        // 2-D quadrature at probe points.
        let (k, p, w) = setup(4);
        let t = GaussTBeta::new(&p, 1.0, &w, 4);
        let h = RadialModeField::coordinate_x1(&p.grid, 4);
        let out = t.apply(&h); // T_β h; iT_β h = i·(T_β h)
        let beta_r = p.beta * 1.0;
        // probe exactly at grid radii so mode summation needs no interpolation
        for &(ri, th) in &[(20usize, 0.0f64), (55, 1.1), (90, 4.0)] {
            let rp = p.grid.r[ri];
            let x = [rp * th.cos(), rp * th.sin()];
            // oracle: (iT_β h)(x) = -βR x·∫K(x-y) y₁ μ(y) dy
            let g = &p.grid;
            let mut acc = [0.0f64; 2];
            let nphi = 512;
            for j in 0..g.len() {
                let s = g.r[j];
                for u in 0..nphi {
                    let phi = 2.0 * std::f64::consts::PI * u as f64 / nphi as f64;
                    let y = [s * phi.cos(), s * phi.sin()];
                    let kf = k.eval_force([x[0] - y[0], x[1] - y[1]]);
                    let wgt = p.mu[j] * s * g.w[j] * (2.0 * std::f64::consts::PI / nphi as f64);
                    acc[0] += kf[0] * y[0] * wgt;
                    acc[1] += kf[1] * y[0] * wgt;
                }
            }
            let oracle_i_t = -beta_r * (x[0] * acc[0] + x[1] * acc[1]);
            // our value: iT_β h = i·T_β h
            let got = Complex64::new(0.0, 1.0) * out.eval(rp, th);
            assert!(got.im.abs() < 1e-10, "iT_β h should be real, got {got}");
            assert_relative_eq!(got.re, oracle_i_t, epsilon = 1e-6, max_relative = 1e-5);
        }
    }

    #[test]
    fn propagator_is_unitary_per_mode() {
        let (_, p, w) = setup(4);
        let t = GaussTBeta::new(&p, 1.0, &w, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut h = RadialModeField::zeros(&p.grid, 4);
        for l in -4i64..=4 {
            for i in 0..p.grid.len() {
                h.mode_mut(l)[i] =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let n0 = h.norm(&p.mu);
        for &t_val in &[0.5, 3.0, 17.0] {
            let ht = t.propagate(&h, t_val);
            assert_relative_eq!(ht.norm(&p.mu), n0, epsilon = 1e-10);
        }
    }
}
