//! Diffusion coefficients: the constant torus matrix A = ∫K⊗K, the
//! next-order matrix B, and the Gaussian-case radial matrix field
//! A(x) = 2π ∫ (⨏ K(x-re) dσ(e))^⊗2 μ_β(r) r dr.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::grid::RadialGrid;
use crate::kernels::{PlaneKernel, TorusKernel};
use crate::meanfield::{classify_equilibrium, EquilibriumClass, EquilibriumProfile};
use crate::{Error, Result};

/// 2×2 real matrix (row-major); symmetric for the objects produced here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix {
    pub m: [[f64; 2]; 2],
}

impl DiffusionMatrix {
    pub fn zero() -> Self {
        DiffusionMatrix { m: [[0.0; 2]; 2] }
    }

    pub fn quadratic_form(&self, k: [f64; 2]) -> f64 {
        k[0] * (self.m[0][0] * k[0] + self.m[0][1] * k[1])
            + k[1] * (self.m[1][0] * k[0] + self.m[1][1] * k[1])
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let s = &self.m;
        s[0][0] >= -tol
            && s[1][1] >= -tol
            && s[0][0] * s[1][1] - s[0][1] * s[1][0] >= -tol * (1.0 + s[0][0].abs() + s[1][1].abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

/// A = ∫_{T²} K⊗K = Σ_k K̂(k)⊗conj(K̂(k)) (normalized measure).
pub fn diffusion_matrix_torus(kernel: &TorusKernel) -> DiffusionMatrix {
    let mut m = [[0.0; 2]; 2];
    for mode in kernel.fourier_modes() {
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] += (mode.k_hat[a] * mode.k_hat[b].conj()).re;
            }
        }
    }
    DiffusionMatrix { m }
}

/// Finite signed mode map of a real field on the torus; product of fields is
/// convolution of maps, convolution of fields is pointwise product.
#[derive(Debug, Clone, Default)]
struct ModeMap(HashMap<[i64; 2], Complex64>);

impl ModeMap {
    fn insert_add(&mut self, k: [i64; 2], v: Complex64) {
        if v != Complex64::ZERO {
            *self.0.entry(k).or_insert(Complex64::ZERO) += v;
        }
    }

    /// pointwise product of fields
    fn field_product(&self, o: &ModeMap) -> ModeMap {
        let mut out = ModeMap::default();
        for (&p, &a) in &self.0 {
            for (&q, &b) in &o.0 {
                out.insert_add([p[0] + q[0], p[1] + q[1]], a * b);
            }
        }
        out
    }

    /// convolution of fields (normalized measure): hats multiply pointwise
    fn field_convolution(&self, o: &ModeMap) -> ModeMap {
        let mut out = ModeMap::default();
        for (&p, &a) in &self.0 {
            if let Some(&b) = o.0.get(&p) {
                out.insert_add(p, a * b);
            }
        }
        out
    }

    /// ∫ field dm = hat at k = 0
    fn integral(&self) -> Complex64 {
        self.0.get(&[0, 0]).copied().unwrap_or(Complex64::ZERO)
    }
}

fn k_hat_map(kernel: &TorusKernel, component: usize) -> ModeMap {
    let mut m = ModeMap::default();
    for mode in kernel.fourier_modes() {
        m.insert_add(mode.k, mode.k_hat[component]);
    }
    m
}

fn grad_map(f: &ModeMap, dir: usize) -> ModeMap {
    let mut m = ModeMap::default();
    for (&k, &v) in &f.0 {
        m.insert_add(k, Complex64::new(0.0, k[dir] as f64) * v);
    }
    m
}

/// Next-order correction matrix B of the subcritical wave expansion,
/// evaluated in Fourier space (products ↦ mode convolutions, convolutions ↦
/// mode products), summing over the repeated indices δ, γ:
///   B_αβ = ∫(∇_γK_δ)(∇_δK_γ)(K_α∗K_β)
///        - 2·(∫(∇_δK_α)(∇_γK_β))·(∫K_δK_γ)
///        - 2·∫(∇_δK_α)(∇_γK_β)(K_δ∗K_γ)
///        - 2·∫(∇_δK_α)(∇_γK_δ)(K_γ∗K_β)
pub fn next_order_b(kernel: &TorusKernel) -> DiffusionMatrix {
    let k: [ModeMap; 2] = [k_hat_map(kernel, 0), k_hat_map(kernel, 1)];
    let dk = |d: usize, a: usize| grad_map(&k[a], d);
    let mut m = [[0.0; 2]; 2];
    for alpha in 0..2 {
        for beta in 0..2 {
            let mut t = Complex64::ZERO;
            for delta in 0..2 {
                for gamma in 0..2 {
                    // ∫ (∇_γ K_δ)(∇_δ K_γ)(K_α ∗ K_β)
                    t += dk(gamma, delta)
                        .field_product(&dk(delta, gamma))
                        .field_product(&k[alpha].field_convolution(&k[beta]))
                        .integral();
                    // -2 (∫(∇_δK_α)(∇_γK_β)) (∫K_δ K_γ)
                    t -= 2.0
                        * dk(delta, alpha).field_product(&dk(gamma, beta)).integral()
                        * k[delta].field_product(&k[gamma]).integral();
                    // -2 ∫(∇_δK_α)(∇_γK_β)(K_δ ∗ K_γ)
                    t -= 2.0
                        * dk(delta, alpha)
                            .field_product(&dk(gamma, beta))
                            .field_product(&k[delta].field_convolution(&k[gamma]))
                            .integral();
                    // -2 ∫(∇_δK_α)(∇_γK_δ)(K_γ ∗ K_β)
                    t -= 2.0
                        * dk(delta, alpha)
                            .field_product(&dk(gamma, delta))
                            .field_product(&k[gamma].field_convolution(&k[beta]))
                            .integral();
                }
            }
            debug_assert!(t.im.abs() < 1e-12 * (1.0 + t.re.abs()));
            m[alpha][beta] = t.re;
        }
    }
    DiffusionMatrix { m }
}

/// Radial representation of the Gaussian-case diffusion field: at x = r·e,
/// A(x) = a_n(r)·e_r⊗e_r + a_t(r)·e_θ⊗e_θ (normal component vanishes
/// analytically and is kept as a numerical check).
#[derive(Debug, Clone)]
pub struct RadialMatrixField {
    pub grid: RadialGrid,
    pub tangential: Vec<f64>,
    pub normal: Vec<f64>,
    /// largest |cross term| observed while assembling (should be ~0)
    pub max_cross: f64,
}

impl RadialMatrixField {
    /// A(x) from the rotation-equivariant representation.
    pub fn eval(&self, x: [f64; 2]) -> DiffusionMatrix {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r == 0.0 {
            return DiffusionMatrix::zero();
        }
        let at = self.grid.interp(&self.tangential, r);
        let an = self.grid.interp(&self.normal, r);
        let er = [x[0] / r, x[1] / r];
        let et = [-er[1], er[0]];
        let mut m = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] = an * er[a] * er[b] + at * et[a] * et[b];
            }
        }
        DiffusionMatrix { m }
    }

    /// CSV rows `r,a_tangential,a_normal`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,a_tangential,a_normal\n");
        for i in 0..self.grid.len() {
            s.push_str(&format!("{},{},{}\n", self.grid.r[i], self.tangential[i], self.normal[i]));
        }
        s
    }
}

const N_PHI: usize = 256;

/// Angular average b(x, s) = ⨏ K(x - s·e) dσ(e) at x = ρ·e₁ (components in
/// the (e_r, e_θ) frame of x); the σ-measure is normalized to mass 1 and the
/// 2π sits in the radial integral of [`diffusion_field_gaussian`]. That
/// convention is pinned against a Monte Carlo evaluation of the defining
/// integral in the tests.
fn ring_vector_average(kernel: &PlaneKernel, rho: f64, s: f64) -> [f64; 2] {
    let mut b = [0.0; 2];
    for t in 0..N_PHI {
        let phi = 2.0 * std::f64::consts::PI * t as f64 / N_PHI as f64;
        let z = [rho - s * phi.cos(), -s * phi.sin()];
        let f = kernel.eval_force(z);
        b[0] += f[0];
        b[1] += f[1];
    }
    [b[0] / N_PHI as f64, b[1] / N_PHI as f64]
}

/// Direct evaluation of A(x) = 2π ∫ b(x,s)^⊗2 μ(s) s ds at an arbitrary
/// point, without using equivariance (oracle for the representation).
pub fn diffusion_field_direct(
    kernel: &PlaneKernel,
    profile: &EquilibriumProfile,
    x: [f64; 2],
) -> DiffusionMatrix {
    let g = &profile.grid;
    let mut m = [[0.0; 2]; 2];
    for j in 0..g.len() {
        let s = g.r[j];
        // average over the ring centred at x with radius s, in the lab frame
        let mut b = [0.0; 2];
        for t in 0..N_PHI {
            let phi = 2.0 * std::f64::consts::PI * t as f64 / N_PHI as f64;
            let z = [x[0] - s * phi.cos(), x[1] - s * phi.sin()];
            let f = kernel.eval_force(z);
            b[0] += f[0];
            b[1] += f[1];
        }
        b = [b[0] / N_PHI as f64, b[1] / N_PHI as f64];
        let wgt = 2.0 * std::f64::consts::PI * profile.mu[j] * s * g.w[j];
        for a in 0..2 {
            for c in 0..2 {
                m[a][c] += wgt * b[a] * b[c];
            }
        }
    }
    DiffusionMatrix { m }
}

/// Gaussian-case diffusion coefficient field on the profile's grid.
pub fn diffusion_field_gaussian(
    kernel: &PlaneKernel,
    profile: &EquilibriumProfile,
) -> Result<RadialMatrixField> {
    let (class, ev) = classify_equilibrium(profile, 1e-4);
    if !matches!(class, EquilibriumClass::Gaussian { .. }) {
        return Err(Error::Numerics(format!(
            "diffusion field requires a Gaussian profile; got {class:?} (deviation {:.2e})",
            ev.sup_gaussian_deviation
        )));
    }
    let g = &profile.grid;
    let n = g.len();
    let mut tangential = vec![0.0; n];
    let mut normal = vec![0.0; n];
    let mut max_cross: f64 = 0.0;
    for i in 0..n {
        let mut at = 0.0;
        let mut an = 0.0;
        let mut cross = 0.0;
        for j in 0..n {
            // b₂ also equals -⟨q(d)(ρ - s·cosφ)⟩ (ring_radial_derivative of
            // W); b₁ vanishes by symmetry and is kept as a check
            let b = ring_vector_average(kernel, g.r[i], g.r[j]);
            let wgt = 2.0 * std::f64::consts::PI * profile.mu[j] * g.r[j] * g.w[j];
            an += wgt * b[0] * b[0];
            at += wgt * b[1] * b[1];
            cross += wgt * b[0] * b[1];
        }
        tangential[i] = at;
        normal[i] = an;
        max_cross = max_cross.max(cross.abs());
    }
    Ok(RadialMatrixField { grid: g.clone(), tangential, normal, max_cross })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn torus_matrix_halves_identity() {
        let k = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 1.0)]).unwrap();
        let a = diffusion_matrix_torus(&k);
        assert_relative_eq!(a.m[0][0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(a.m[1][1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(a.m[0][1], 0.0, epsilon = 1e-15);
        assert!(a.is_positive_semidefinite(1e-14));
        let zero = TorusKernel::new(&[]).unwrap();
        assert_eq!(diffusion_matrix_torus(&zero).max_abs(), 0.0);
    }

    #[test]
    fn torus_matrix_single_mode() {
        // W = cos(k·x) → A = (k⊥⊗k⊥)/2
        let k = TorusKernel::new(&[([2, 1], 1.0)]).unwrap();
        let a = diffusion_matrix_torus(&k);
        // k⊥ = (-1, 2)
        assert_relative_eq!(a.m[0][0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(a.m[0][1], -1.0, epsilon = 1e-14);
        assert_relative_eq!(a.m[1][0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(a.m[1][1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn torus_matrix_matches_real_space_quadrature() {
        // two independent routes: Parseval sum vs grid quadrature of ∫K⊗K
        let k = TorusKernel::new(&[([1, 0], 0.7), ([1, 1], -0.4), ([0, 2], 0.2)]).unwrap();
        let a = diffusion_matrix_torus(&k);
        let n = 128;
        let mut q = [[0.0; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                let x = [
                    2.0 * std::f64::consts::PI * i as f64 / n as f64,
                    2.0 * std::f64::consts::PI * j as f64 / n as f64,
                ];
                let f = k.eval_force(x);
                for p in 0..2 {
                    for r in 0..2 {
                        q[p][r] += f[p] * f[r];
                    }
                }
            }
        }
        for p in 0..2 {
            for r in 0..2 {
                assert_relative_eq!(a.m[p][r], q[p][r] / (n * n) as f64, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn b_matrix_zero_kernel_and_parity() {
        let zero = TorusKernel::new(&[]).unwrap();
        assert_eq!(next_order_b(&zero).max_abs(), 0.0);
        // W = cos x₁ single mode in d=2: cross term vanishes by parity
        let k = TorusKernel::new(&[([1, 0], 1.0)]).unwrap();
        let b = next_order_b(&k);
        assert_relative_eq!(b.m[0][1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(b.m[1][0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn b_matrix_matches_real_space_oracle() {
        // independent real-space route on a 128² grid with FFT convolutions
        let kern = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 0.6), ([1, 1], -0.3)]).unwrap();
        let b = next_order_b(&kern);
        let o = b_real_space_oracle(&kern);
        for p in 0..2 {
            for q in 0..2 {
                assert_relative_eq!(b.m[p][q], o[p][q], epsilon = 1e-8, max_relative = 1e-8);
            }
        }
    }

    /// Real-space evaluation of the B matrix on a grid: fields sampled
    /// pointwise, convolutions via FFT, integrals via the trapezoid rule
    /// (exact for band-limited integrands).
    fn b_real_space_oracle(kern: &TorusKernel) -> [[f64; 2]; 2] {
        use rustfft::{num_complex::Complex, FftPlanner};
        let n = 128usize;
        let np = n * n;
        let xs = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        // sample K components and their derivatives by finite mode sums
        let mut kf = [vec![0.0; np], vec![0.0; np]];
        for i in 0..n {
            for j in 0..n {
                let f = kern.eval_force([xs(i), xs(j)]);
                kf[0][i * n + j] = f[0];
                kf[1][i * n + j] = f[1];
            }
        }
        // ∇K sampled pointwise (analytic per cosine pair)
        let mut dk: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; np]; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                let g = kern.eval_force_gradient([xs(i), xs(j)]);
                for d in 0..2 {
                    for a in 0..2 {
                        dk[d][a][i * n + j] = g[a][d];
                    }
                }
            }
        }
        // FFT-based circular convolution with normalized measure:
        // (f∗g)(x) = (1/(2π)²)∫f(x-y)g(y)dy → (1/np)·ifft(fft(f)·fft(g))·…
        let fft_fwd = FftPlanner::new().plan_fft_forward(n);
        let fft_inv = FftPlanner::new().plan_fft_inverse(n);
        let fft2 = |f: &[f64]| -> Vec<Complex<f64>> {
            let mut d: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
            let fft = &fft_fwd;
            let mut scratch = vec![Complex::default(); n];
            for row in d.chunks_mut(n) {
                fft.process_with_scratch(row, &mut scratch);
            }
            // columns
            for j in 0..n {
                let mut col: Vec<Complex<f64>> = (0..n).map(|i| d[i * n + j]).collect();
                fft.process_with_scratch(&mut col, &mut scratch);
                for i in 0..n {
                    d[i * n + j] = col[i];
                }
            }
            d
        };
        let ifft2 = |mut d: Vec<Complex<f64>>| -> Vec<f64> {
            let fft = &fft_inv;
            let mut scratch = vec![Complex::default(); n];
            for row in d.chunks_mut(n) {
                fft.process_with_scratch(row, &mut scratch);
            }
            for j in 0..n {
                let mut col: Vec<Complex<f64>> = (0..n).map(|i| d[i * n + j]).collect();
                fft.process_with_scratch(&mut col, &mut scratch);
                for i in 0..n {
                    d[i * n + j] = col[i];
                }
            }
            d.iter().map(|c| c.re / np as f64).collect()
        };
        let convolve = |f: &[f64], g: &[f64]| -> Vec<f64> {
            let (a, b) = (fft2(f), fft2(g));
            let prod: Vec<Complex<f64>> =
                a.iter().zip(&b).map(|(x, y)| x * y / np as f64).collect();
            ifft2(prod)
        };
        let integrate = |f: &[f64]| f.iter().sum::<f64>() / np as f64;
        let prod = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x * y).collect()
        };
        let mut out = [[0.0; 2]; 2];
        for alpha in 0..2 {
            for beta in 0..2 {
                let mut t = 0.0;
                for delta in 0..2 {
                    for gamma in 0..2 {
                        t += integrate(&prod(
                            &prod(&dk[gamma][delta], &dk[delta][gamma]),
                            &convolve(&kf[alpha], &kf[beta]),
                        ));
                        t -= 2.0
                            * integrate(&prod(&dk[delta][alpha], &dk[gamma][beta]))
                            * integrate(&prod(&kf[delta], &kf[gamma]));
                        t -= 2.0
                            * integrate(&prod(
                                &prod(&dk[delta][alpha], &dk[gamma][beta]),
                                &convolve(&kf[delta], &kf[gamma]),
                            ));
                        t -= 2.0
                            * integrate(&prod(
                                &prod(&dk[delta][alpha], &dk[gamma][delta]),
                                &convolve(&kf[gamma], &kf[beta]),
                            ));
                    }
                }
                out[alpha][beta] = t;
            }
        }
        out
    }

    fn gaussian_setup() -> (PlaneKernel, EquilibriumProfile) {
        let g = RadialGrid::gauss_legendre(8.0, 16, 8);
        let k = PlaneKernel::gaussian(1.0, 1.0).unwrap();
        let p = EquilibriumProfile::gaussian(1.0, 1.0, g);
        (k, p)
    }

    #[test]
    fn gaussian_field_zero_at_origin_and_equivariant() {
        let (k, p) = gaussian_setup();
        let f = diffusion_field_gaussian(&k, &p).unwrap();
        // A(0) = 0
        let a0 = diffusion_field_direct(&k, &p, [0.0, 0.0]);
        assert!(a0.max_abs() < 1e-12, "A(0) = {:?}", a0.m);
        assert!(f.max_cross < 1e-12);
        // rotation equivariance A(Ox) = O A(x) Oᵀ against the direct route,
        // probed at grid radii with random rotation angles
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..4 {
            let r = p.grid.r[8 + (rng.random::<f64>() * 100.0) as usize];
            let th = rng.random::<f64>() * std::f64::consts::TAU;
            let x = [r * th.cos(), r * th.sin()];
            let got = f.eval(x);
            let direct = diffusion_field_direct(&k, &p, x);
            for a in 0..2 {
                for b in 0..2 {
                    assert_relative_eq!(got.m[a][b], direct.m[a][b], epsilon = 1e-8);
                }
            }
        }
        // non-Gaussian profile rejected
        let g = RadialGrid::gauss_legendre(4.5, 18, 8);
        let bad = crate::meanfield::solve_mu_beta(
            &crate::kernels::ExternalPotential::Quartic { c2: 1.0, c4: 1.0 },
            None,
            1.0,
            &g,
            1e-12,
            200,
        )
        .unwrap();
        assert!(diffusion_field_gaussian(&k, &bad).is_err());
    }

    #[test]
    fn gaussian_field_matches_monte_carlo() {
        // A((1,0)) against a 2·10⁶-sample Monte Carlo estimate of the
        // defining integral E[K(x-y) ⊗ K(x-R_φ y)], y ~ μ_β, φ ~ U.
        let (k, p) = gaussian_setup();
        let f = diffusion_field_gaussian(&k, &p).unwrap();
        let x = [1.0, 0.0];
        let a = f.eval(x);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 2_000_000usize;
        let mut mean = [[0.0f64; 2]; 2];
        let mut m2 = [[0.0f64; 2]; 2];
        let sigma = 1.0; // βR = 1 → coordinate variance 1/(βR)
        for s in 0..n {
            let gauss = |rng: &mut ChaCha8Rng| {
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random::<f64>();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * sigma
            };
            let y = [gauss(&mut rng), gauss(&mut rng)];
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let yr = [y[0] * phi.cos() - y[1] * phi.sin(), y[0] * phi.sin() + y[1] * phi.cos()];
            let f1 = k.eval_force([x[0] - y[0], x[1] - y[1]]);
            let f2 = k.eval_force([x[0] - yr[0], x[1] - yr[1]]);
            for i in 0..2 {
                for j in 0..2 {
                    let v = f1[i] * f2[j];
                    let d = v - mean[i][j];
                    mean[i][j] += d / (s + 1) as f64;
                    m2[i][j] += d * (v - mean[i][j]);
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let se = (m2[i][j] / (n as f64 - 1.0) / n as f64).sqrt();
                assert!(
                    (a.m[i][j] - mean[i][j]).abs() <= 3.0 * se + 1e-9,
                    "A[{i}][{j}] = {} vs MC {} ± {se}",
                    a.m[i][j],
                    mean[i][j]
                );
            }
        }
    }
}
