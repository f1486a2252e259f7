//! Propagation of the truncated hierarchy: g(τ) = e^{iτS}g°.
//!
//! The workhorse is a Lanczos/Krylov propagator with full
//! reorthogonalization in the weighted inner product and step-size control
//! from the standard last-component error estimate. Below the dense-assembly
//! limit an exact Hermitian eigendecomposition path doubles as the oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::kernels::TorusDensity;
use crate::{Error, Result};

use super::basis::{FockBasis, FockVector};
use super::operator::HierarchyOperator;

/// ḡ° from eq-style initial data: level 1 = f̂°, higher levels zero.
pub fn initial_state(f0: &TorusDensity, basis: &FockBasis) -> Result<FockVector> {
    if f0.max_mode_linf() > basis.lambda {
        return Err(Error::Config(format!(
            "initial density carries modes beyond Λ = {}",
            basis.lambda
        )));
    }
    let mut v = basis.zeros();
    for (k, c) in f0.fourier_coeffs() {
        let idx = basis.mode_index(k).unwrap();
        let j = basis.levels[0].index_of(idx, &[]).unwrap();
        v.data[0][j] = Complex64::new(c, 0.0);
    }
    Ok(v)
}

/// Level-1 component as (mode, coefficient) pairs.
pub fn tagged_observable(basis: &FockBasis, v: &FockVector) -> Vec<([i64; 2], Complex64)> {
    basis.levels[0]
        .elems
        .iter()
        .zip(&v.data[0])
        .map(|(e, &c)| (basis.mode_of(e.tagged), c))
        .collect()
}

/// Real-space reconstruction of the level-1 density on an n×n torus grid.
pub fn tagged_real_space(basis: &FockBasis, v: &FockVector, n: usize) -> Vec<f64> {
    let modes = tagged_observable(basis, v);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let x = [
                2.0 * std::f64::consts::PI * i as f64 / n as f64,
                2.0 * std::f64::consts::PI * j as f64 / n as f64,
            ];
            let mut acc = Complex64::ZERO;
            for &(k, c) in &modes {
                let ph = k[0] as f64 * x[0] + k[1] as f64 * x[1];
                acc += c * Complex64::new(ph.cos(), ph.sin());
            }
            out[i * n + j] = acc.re;
        }
    }
    out
}

/// e^{iτS} g° at the requested times via adaptive Lanczos.
pub fn propagate_lanczos(
    op: &HierarchyOperator,
    g0: &FockVector,
    tau_grid: &[f64],
    krylov_dim: usize,
    tol: f64,
) -> Result<Vec<FockVector>> {
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("tau_grid must increase".into()));
    }
    let basis = &op.basis;
    let mut out = Vec::with_capacity(tau_grid.len());
    let mut v = g0.clone();
    let mut tau = 0.0;
    for &t in tau_grid {
        let mut remaining = t - tau;
        if remaining < 0.0 {
            return Err(Error::Config("tau_grid must start at ≥ 0".into()));
        }
        while remaining > 1e-14 {
            let norm_v = basis.norm(&v);
            if norm_v == 0.0 {
                break;
            }
            // Krylov basis with full reorthogonalization
            let m_target = krylov_dim.max(4);
            let mut vs: Vec<FockVector> = Vec::with_capacity(m_target);
            let mut alphas: Vec<f64> = Vec::new();
            let mut betas: Vec<f64> = Vec::new();
            let mut w0 = v.clone();
            w0.scale(Complex64::new(1.0 / norm_v, 0.0));
            vs.push(w0);
            let mut breakdown = false;
            for j in 0..m_target {
                let mut w = op.apply(&vs[j]);
                let alpha = basis.dot(&vs[j], &w);
                alphas.push(alpha.re);
                // subtract projections (full reorthogonalization, twice)
                for _ in 0..2 {
                    for u in &vs {
                        let c = basis.dot(u, &w);
                        w.scaled_add(-c, u);
                    }
                }
                let beta = basis.norm(&w);
                if j + 1 == m_target {
                    betas.push(beta);
                    break;
                }
                if beta < 1e-13 * norm_v.max(1.0) {
                    breakdown = true;
                    break;
                }
                betas.push(beta);
                w.scale(Complex64::new(1.0 / beta, 0.0));
                vs.push(w);
            }
            let m = vs.len();
            // tridiagonal T
            let mut tm = DMatrix::<f64>::zeros(m, m);
            for j in 0..m {
                tm[(j, j)] = alphas[j];
                if j + 1 < m {
                    tm[(j, j + 1)] = betas[j];
                    tm[(j + 1, j)] = betas[j];
                }
            }
            let eig = tm.symmetric_eigen();
            let mut dt = remaining;
            let mut halvings = 0;
            loop {
                let y = propagator_column(&eig, dt);
                // a-posteriori error: weight leaked past the last basis vector
                let err = if breakdown || m == 1 {
                    0.0
                } else {
                    (betas[m - 1] * y[m - 1].norm()).abs() * dt
                };
                if err <= tol * norm_v.max(1e-300) || breakdown {
                    // v_new = norm_v · Σ_j y_j · vs[j]
                    let mut vn = basis.zeros();
                    for (j, u) in vs.iter().enumerate() {
                        vn.scaled_add(y[j] * norm_v, u);
                    }
                    v = vn;
                    tau += dt;
                    remaining -= dt;
                    break;
                }
                dt *= 0.5;
                halvings += 1;
                if halvings > 40 {
                    return Err(Error::Propagation(format!(
                        "Lanczos step control failed at τ = {tau:.3} (err {err:.2e})"
                    )));
                }
            }
        }
        out.push(v.clone());
        tau = t;
    }
    Ok(out)
}

/// Column e^{i·dt·T}·e₁ of the small tridiagonal propagator.
fn propagator_column(eig: &SymmetricEigen<f64, nalgebra::Dyn>, dt: f64) -> Vec<Complex64> {
    let m = eig.eigenvalues.len();
    let mut y = vec![Complex64::ZERO; m];
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::new(0.0, dt * lam).exp();
        let uj0 = eig.eigenvectors[(0, j)];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += eig.eigenvectors[(i, j)] * uj0 * phase;
        }
    }
    y
}

/// Exact Hermitian eigendecomposition of S in the orthonormalized frame.
pub struct EigenPropagator {
    pub eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl EigenPropagator {
    pub fn new(op: &HierarchyOperator) -> Result<Self> {
        let m = op.assemble_dense()?;
        let eig = m.symmetric_eigen();
        Ok(EigenPropagator {
            eigenvalues: eig.eigenvalues.iter().cloned().collect(),
            vectors: eig.eigenvectors,
        })
    }

    /// Spectral coefficients u_j† x̃ of a vector.
    pub fn coefficients(&self, op: &HierarchyOperator, v: &FockVector) -> Vec<Complex64> {
        let t = DVector::from_vec(op.to_tilde(v));
        self.vectors.adjoint_iter_rows(&t)
    }

    pub fn propagate(&self, op: &HierarchyOperator, g0: &FockVector, tau: f64) -> FockVector {
        let c = self.coefficients(op, g0);
        let mut acc = DVector::<Complex64>::zeros(self.eigenvalues.len());
        for (j, (&lam, cj)) in self.eigenvalues.iter().zip(&c).enumerate() {
            let phase = Complex64::new(0.0, tau * lam).exp();
            for i in 0..acc.len() {
                acc[i] += self.vectors[(i, j)] * cj * phase;
            }
        }
        op.from_tilde(acc.as_slice())
    }
}

trait AdjointRows {
    fn adjoint_iter_rows(&self, v: &DVector<Complex64>) -> Vec<Complex64>;
}

impl AdjointRows for DMatrix<Complex64> {
    fn adjoint_iter_rows(&self, v: &DVector<Complex64>) -> Vec<Complex64> {
        (0..self.ncols())
            .map(|j| {
                let mut acc = Complex64::ZERO;
                for i in 0..self.nrows() {
                    acc += self[(i, j)].conj() * v[i];
                }
                acc
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::operator::build_operator;
    use crate::kernels::TorusKernel;
    use std::sync::Arc;

    fn cos_cos() -> TorusKernel {
        TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 1.0)]).unwrap()
    }

    fn f0() -> TorusDensity {
        TorusDensity::new(&[([1, 0], 0.5)]).unwrap()
    }

    #[test]
    fn zero_kernel_state_is_frozen() {
        let basis = Arc::new(FockBasis::new(1, 3).unwrap());
        let op = build_operator(&TorusKernel::new(&[]).unwrap(), basis.clone()).unwrap();
        let g0 = initial_state(&f0(), &basis).unwrap();
        let out = propagate_lanczos(&op, &g0, &[0.5, 2.0], 20, 1e-12).unwrap();
        for g in &out {
            let mut diff = g.clone();
            diff.scaled_add(Complex64::new(-1.0, 0.0), &g0);
            assert!(basis.norm(&diff) < 1e-14);
        }
        // tagged observable returns f° itself
        let obs = tagged_observable(&basis, &out[1]);
        for (k, c) in obs {
            assert!((c.re - f0().fhat(k)).abs() < 1e-14 && c.im.abs() < 1e-14);
        }
    }

    #[test]
    fn initial_state_structure_and_norm() {
        let basis = Arc::new(FockBasis::new(1, 3).unwrap());
        let g0 = initial_state(&f0(), &basis).unwrap();
        // entries {0: 1, ±(1,0): 1/4}; norm = ‖f°‖_{L²}
        let obs = tagged_observable(&basis, &g0);
        for (k, c) in obs {
            let expect = f0().fhat(k);
            assert_eq!(c, Complex64::new(expect, 0.0));
        }
        let l2 = (1.0f64 + 2.0 * 0.25f64.powi(2)).sqrt();
        assert!((basis.norm(&g0) - l2).abs() < 1e-14);
        // uniform density: only the k=0 entry
        let gu = initial_state(&TorusDensity::uniform(), &basis).unwrap();
        assert!((basis.norm(&gu) - 1.0).abs() < 1e-15);
        // out-of-ball mode rejected
        let wide = TorusDensity::new(&[([2, 0], 0.1)]).unwrap();
        assert!(initial_state(&wide, &basis).is_err());
    }

    #[test]
    fn lanczos_preserves_norm_and_matches_eigen() {
        let basis = Arc::new(FockBasis::new(1, 3).unwrap());
        let op = build_operator(&cos_cos(), basis.clone()).unwrap();
        let g0 = initial_state(&f0(), &basis).unwrap();
        let taus = [0.3, 1.0, 2.5, 10.0];
        let lan = propagate_lanczos(&op, &g0, &taus, 40, 1e-13).unwrap();
        let n0 = basis.norm(&g0);
        for g in &lan {
            assert!((basis.norm(g) - n0).abs() <= 1e-10 * n0, "norm drift");
        }
        let eig = EigenPropagator::new(&op).unwrap();
        for (g, &t) in lan.iter().zip(&taus) {
            let ge = eig.propagate(&op, &g0, t);
            let mut diff = g.clone();
            diff.scaled_add(Complex64::new(-1.0, 0.0), &ge);
            assert!(
                basis.norm(&diff) < 1e-9 * n0,
                "Lanczos vs eigendecomposition at τ = {t}: {:.3e}",
                basis.norm(&diff)
            );
        }
    }

    #[test]
    fn short_time_taylor_of_level_one() {
        // ḡ¹(τ) - f̂° - (τ²/2)(-kᵀAk)f̂° = O(τ⁴); Λ = 2 keeps the
        // composition untruncated for the |k|=1 carrier
        let basis = Arc::new(FockBasis::new(2, 3).unwrap());
        let op = build_operator(&cos_cos(), basis.clone()).unwrap();
        let g0 = initial_state(&f0(), &basis).unwrap();
        let a = crate::effective::diffusion_matrix_torus(&cos_cos());
        let defect = |tau: f64| -> f64 {
            let g = propagate_lanczos(&op, &g0, &[tau], 40, 1e-14).unwrap().remove(0);
            let mut worst = 0.0f64;
            for (k, c) in tagged_observable(&basis, &g) {
                let kak = a.quadratic_form([k[0] as f64, k[1] as f64]);
                let taylor = f0().fhat(k) * (1.0 - tau * tau / 2.0 * kak);
                worst = worst.max((c - Complex64::new(taylor, 0.0)).norm());
            }
            worst
        };
        let (d1, d2) = (defect(0.2), defect(0.1));
        let ratio = d1 / d2;
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected ~16x (O(τ⁴)); got {d1:.3e}/{d2:.3e} = {ratio:.1}"
        );
    }

    #[test]
    fn truncation_cauchy_differences_shrink() {
        // ‖ḡ¹_M(τ) - ḡ¹_{M+1}(τ)‖ decreases with M at fixed τ ≤ 1
        let kernel = cos_cos();
        let tau = 0.8;
        let level1 = |m_max: usize| -> Vec<Complex64> {
            let basis = Arc::new(FockBasis::new(1, m_max).unwrap());
            let op = build_operator(&kernel, basis.clone()).unwrap();
            let g0 = initial_state(&f0(), &basis).unwrap();
            let g = propagate_lanczos(&op, &g0, &[tau], 40, 1e-13).unwrap().remove(0);
            g.data[0].clone()
        };
        let l2 = level1(2);
        let l3 = level1(3);
        let l4 = level1(4);
        let l5 = level1(5);
        let d = |a: &[Complex64], b: &[Complex64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
        };
        let (d23, d34, d45) = (d(&l2, &l3), d(&l3, &l4), d(&l4, &l5));
        assert!(d34 < d23 && d45 < d34, "Cauchy: {d23:.3e}, {d34:.3e}, {d45:.3e}");
    }

    #[test]
    fn real_space_reconstruction_two_routes() {
        let basis = Arc::new(FockBasis::new(1, 2).unwrap());
        let op = build_operator(&cos_cos(), basis.clone()).unwrap();
        let g0 = initial_state(&f0(), &basis).unwrap();
        let g = propagate_lanczos(&op, &g0, &[0.5], 30, 1e-12).unwrap().remove(0);
        let n = 64;
        let grid = tagged_real_space(&basis, &g, n);
        // independent summation order: accumulate per mode over the grid
        let mut alt = vec![0.0; n * n];
        for (k, c) in tagged_observable(&basis, &g) {
            for i in 0..n {
                for j in 0..n {
                    let ph = k[0] as f64 * (2.0 * std::f64::consts::PI * i as f64 / n as f64)
                        + k[1] as f64 * (2.0 * std::f64::consts::PI * j as f64 / n as f64);
                    alt[i * n + j] += (c * Complex64::new(ph.cos(), ph.sin())).re;
                }
            }
        }
        let worst =
            grid.iter().zip(&alt).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(worst < 1e-12);
    }
}
