//! The Gaussian-case oscillatory main term
//!   m(t) = -(∇ - βR·x)·∫ K(x-x_*)·(e^{-it(Id⊗T_β)}H)(x, x_*) μ_β(x_*) dx_*
//! with H(x, x_*) = -K(x-x_*)·(∇f°/μ_β)(x), and its Cesàro time averages.
//!
//! H is jointly rotation-invariant, so everything reduces to relative-angle
//! modes: with η_ℓ(r,s) = iℓ·w_ℓ(r,s)/r (the modes of H₀(x,y) = x̂·K(x-y))
//! one has H_ℓ(r,s) = -(f°'(r)/μ(r))·η_ℓ(r,s), the second-variable
//! propagator acts per mode, and the output is the radial function
//!   m(t, r) = -(1/r)·d/dr(r·φ_r) + βR·r·φ_r,
//!   φ_r(t, r) = 2π·Σ_ℓ ∫ η_ℓ(r,s)·G_{-ℓ}(t; r,s) μ(s) s ds.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::meanfield::EquilibriumProfile;
use crate::modes::TwoPointModeTable;
use crate::Result;

use super::tbeta::GaussTBeta;

/// Radial main-term series m(t_j, r_i).
#[derive(Debug, Clone)]
pub struct MainTermSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl MainTermSeries {
    /// CSV rows `t,r,value`.
    pub fn to_csv(&self, grid_r: &[f64]) -> String {
        let mut s = String::from("t,r,value\n");
        for (t, row) in self.times.iter().zip(&self.values) {
            for (r, v) in grid_r.iter().zip(row) {
                s.push_str(&format!("{t},{r},{v}\n"));
            }
        }
        s
    }
}

struct ModeData {
    /// Im η_ℓ(r,s): η = i·eta_im (η is purely imaginary)
    eta_im: Vec<f64>,
    /// Im H_ℓ(r,s)
    h_im: Vec<f64>,
}

struct MainTermEngine<'a> {
    profile: &'a EquilibriumProfile,
    t_beta: &'a GaussTBeta,
    modes: Vec<ModeData>, // ℓ = 1..=l_max
}

impl<'a> MainTermEngine<'a> {
    fn new(
        profile: &'a EquilibriumProfile,
        t_beta: &'a GaussTBeta,
        w_modes: &TwoPointModeTable,
        f0_prime: &dyn Fn(f64) -> f64,
    ) -> Self {
        let g = &profile.grid;
        let n = g.len();
        let mut modes = Vec::new();
        for l in 1..=t_beta.l_max {
            let w = &w_modes.data[l];
            let mut eta_im = vec![0.0; n * n];
            let mut h_im = vec![0.0; n * n];
            for i in 0..n {
                let c = -f0_prime(g.r[i]) / profile.mu[i];
                for j in 0..n {
                    let e = l as f64 * w[i * n + j] / g.r[i];
                    eta_im[i * n + j] = e;
                    h_im[i * n + j] = c * e;
                }
            }
            modes.push(ModeData { eta_im, h_im });
        }
        MainTermEngine { profile, t_beta, modes }
    }

    /// φ_r(r) with the second-variable propagator replaced by the spectral
    /// multiplier `f` (e.g. e^{-itλ}, or its Cesàro average).
    fn phi_r(&self, f: &dyn Fn(f64) -> Complex64) -> Vec<f64> {
        let g = &self.profile.grid;
        let n = g.len();
        let mut phi = vec![Complex64::ZERO; n];
        for (li, md) in self.modes.iter().enumerate() {
            let l = li + 1;
            // propagate H_ℓ(r, ·) in the second variable at y-mode -ℓ:
            // kernel t_{-ℓ} = -t_ℓ, so eigenvalues flip sign.
            let eig = self.t_beta_eig(l);
            // Build the propagated matrix G_ℓ = H_ℓ · Pᵀ where P acts on the
            // second index in the symmetrized frame.
            let sq: Vec<f64> =
                (0..n).map(|j| (2.0 * std::f64::consts::PI * self.d(j)).sqrt()).collect();
            // column-transformed H: Ht[i,j] = H[i,j]·sq[j]
            let mut ht = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    ht[(i, j)] = md.h_im[i * n + j] * sq[j];
                }
            }
            // coefficients C = Ht · U (U = eigenvectors), scale by f(-λ),
            // back: G̃ = C·diag·Uᵀ, remove the frame factor
            let u = &eig.eigenvectors;
            let c = &ht * u;
            let mut spectral = DMatrix::<Complex64>::zeros(n, n);
            for (jj, &lam) in eig.eigenvalues.iter().enumerate() {
                let scale = f(-lam);
                for i in 0..n {
                    spectral[(i, jj)] = Complex64::new(c[(i, jj)], 0.0) * scale;
                }
            }
            // G_im_complex[i, s] = Σ_jj spectral[i,jj]·U[s,jj] / sq[s]
            // contraction with η and quadrature in s:
            // φ contribution = 2π Σ_s η_ℓ(r,s)·(i)·G(r,s)·(-i)… combine signs:
            // η = i·eta_im, H = i·h_im, G = i·(propagated h_im) [the
            // propagator mixes real/imag through f(λ)], and G_{-ℓ} = conj(G_ℓ)
            // for the real field; the ±ℓ pair sums to 2·Re[η_ℓ·G_{-ℓ}]-type
            // terms handled below.
            for i in 0..n {
                let mut acc = Complex64::ZERO;
                for s in 0..n {
                    let mut gval = Complex64::ZERO;
                    for jj in 0..n {
                        gval += spectral[(i, jj)] * u[(s, jj)];
                    }
                    gval /= sq[s];
                    // pair ℓ and -ℓ: η_{-ℓ} = -η_ℓ (imag), H similarly;
                    // contribution = η_ℓ G_{-ℓ} + η_{-ℓ} G_{ℓ}.
                    // With η_ℓ = i e, H_ℓ = i h: G_ℓ(t) has multiplier f(-λ)
                    // on the i·h data; G_{-ℓ}(t) = -i·(h propagated with
                    // f(+λ)). Using realness of the underlying field:
                    // η_ℓ G_{-ℓ} + c.c. = 2·Re[(i e)·conj(i·g)] = 2·Re[e·conj(g)]
                    let e = md.eta_im[i * n + s];
                    acc += 2.0 * e * gval.conj() * (self.d(s) * 2.0 * std::f64::consts::PI);
                }
                phi[i] += acc;
            }
        }
        phi.iter().map(|c| c.re).collect()
    }

    fn d(&self, j: usize) -> f64 {
        self.profile.mu[j] * self.profile.grid.r[j] * self.profile.grid.w[j]
    }

    fn t_beta_eig(&self, l: usize) -> &nalgebra::SymmetricEigen<f64, nalgebra::Dyn> {
        self.t_beta.eig_block(l)
    }

    /// m(r) = -(1/r)·(r·φ_r)' + βR·r·φ_r
    fn assemble(&self, phi: &[f64]) -> Vec<f64> {
        let g = &self.profile.grid;
        let rphi: Vec<f64> = g.r.iter().zip(phi).map(|(&r, &p)| r * p).collect();
        let d = g.derivative(&rphi);
        (0..g.len())
            .map(|i| {
                -d[i] / g.r[i]
                    + self.t_beta.beta * self.t_beta.r_const * g.r[i] * phi[i]
            })
            .collect()
    }
}

/// Evaluate the main term at the given times.
pub fn gaussian_main_term(
    profile: &EquilibriumProfile,
    t_beta: &GaussTBeta,
    w_modes: &TwoPointModeTable,
    f0_prime: &dyn Fn(f64) -> f64,
    t_grid: &[f64],
) -> Result<MainTermSeries> {
    let engine = MainTermEngine::new(profile, t_beta, w_modes, f0_prime);
    let values = t_grid
        .iter()
        .map(|&t| {
            let phi = engine.phi_r(&|lam: f64| Complex64::new(0.0, -t * lam).exp());
            engine.assemble(&phi)
        })
        .collect();
    Ok(MainTermSeries { times: t_grid.to_vec(), values })
}

/// Radial component φ_r(t, r) of the flux Φ = ∫K(x-x_*)(e^{-itT}H)μ dx_*,
/// exposed for diagnostics and oracle comparisons.
pub fn gaussian_main_term_radial_flux(
    profile: &EquilibriumProfile,
    t_beta: &GaussTBeta,
    w_modes: &TwoPointModeTable,
    f0_prime: &dyn Fn(f64) -> f64,
    t: f64,
) -> Vec<f64> {
    let engine = MainTermEngine::new(profile, t_beta, w_modes, f0_prime);
    engine.phi_r(&|lam: f64| Complex64::new(0.0, -t * lam).exp())
}

/// Cesàro average (1/T)∫₀ᵀ m(t) dt, evaluated spectrally.
pub fn main_term_cesaro(
    profile: &EquilibriumProfile,
    t_beta: &GaussTBeta,
    w_modes: &TwoPointModeTable,
    f0_prime: &dyn Fn(f64) -> f64,
    t_final: f64,
) -> Result<Vec<f64>> {
    let engine = MainTermEngine::new(profile, t_beta, w_modes, f0_prime);
    let phi = engine.phi_r(&|lam: f64| {
        if lam.abs() < 1e-14 {
            Complex64::ONE
        } else {
            let z = Complex64::new(0.0, -t_final * lam);
            (z.exp() - 1.0) / z
        }
    });
    Ok(engine.assemble(&phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::kernels::PlaneKernel;

    fn setup() -> (PlaneKernel, EquilibriumProfile, TwoPointModeTable, GaussTBeta) {
        let g = RadialGrid::gauss_legendre(8.0, 16, 8);
        let k = PlaneKernel::gaussian(2.0, 1.0).unwrap();
        let p = EquilibriumProfile::gaussian(1.0, 1.0, g.clone());
        let w = TwoPointModeTable::from_radial_kernel(&g, 12, 256, |d| k.w(d));
        let t = GaussTBeta::new(&p, 1.0, &w, 12);
        (k, p, w, t)
    }

    // f° ∝ e^{-r²}: smooth, effectively compactly supported
    fn f0_prime(r: f64) -> f64 {
        -2.0 * r * (-r * r).exp() / std::f64::consts::PI
    }

    /// Dense-quadrature Φ(x) at x = ρ·e₁: Φ = ∫K(x-y)H(x,y)μ(y)dy with
    /// H = -K(x-y)·(∇f°/μ)(x); the t = 0 oracle.
    fn phi_oracle(k: &PlaneKernel, p: &EquilibriumProfile, rho: f64) -> [f64; 2] {
        let g = &p.grid;
        let mut acc = [0.0; 2];
        let nphi = 1024;
        let mu_rho = g.interp(&p.mu, rho);
        for j in 0..g.len() {
            let s = g.r[j];
            for u in 0..nphi {
                let ph = 2.0 * std::f64::consts::PI * u as f64 / nphi as f64;
                let y = [s * ph.cos(), s * ph.sin()];
                let kf = k.eval_force([rho - y[0], -y[1]]);
                let h = -kf[0] * f0_prime(rho) / mu_rho;
                let wgt = p.mu[j] * s * g.w[j] * (2.0 * std::f64::consts::PI / nphi as f64);
                acc[0] += kf[0] * h * wgt;
                acc[1] += kf[1] * h * wgt;
            }
        }
        acc
    }

    #[test]
    fn t0_matches_direct_quadrature() {
        let (k, p, w, t) = setup();
        let g = p.grid.clone();
        // radial flux φ_r against the dense 2-D quadrature oracle
        let flux = gaussian_main_term_radial_flux(&p, &t, &w, &f0_prime, 0.0);
        for &i in &[25usize, 60, 95] {
            let oracle = phi_oracle(&k, &p, g.r[i]);
            assert!(
                (flux[i] - oracle[0]).abs() < 1e-7,
                "φ_r({:.3}) = {:.6e} vs oracle {:.6e}",
                g.r[i],
                flux[i],
                oracle[0]
            );
        }
        // assembled m(0): limited by the O(h²) radial derivative stencil
        let series = gaussian_main_term(&p, &t, &w, &f0_prime, &[0.0]).unwrap();
        let beta_r = 1.0;
        let scale = series.values[0].iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for &i in &[25usize, 60, 95] {
            let rho = g.r[i];
            let h = 1e-4;
            let (pm, pp) = (phi_oracle(&k, &p, rho - h), phi_oracle(&k, &p, rho + h));
            let d_rphi = ((rho + h) * pp[0] - (rho - h) * pm[0]) / (2.0 * h);
            let oracle = -d_rphi / rho + beta_r * rho * phi_oracle(&k, &p, rho)[0];
            let got = series.values[0][i];
            assert!(
                (got - oracle).abs() <= 2e-3 * scale,
                "r = {rho:.3}: got {got:.6e}, oracle {oracle:.6e}"
            );
        }
    }

    #[test]
    fn weighted_norm_bounded_by_initial() {
        let (_k, p, w, t) = setup();
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 1.0).collect();
        let series = gaussian_main_term(&p, &t, &w, &f0_prime, &times).unwrap();
        let n0 = p.weighted_norm(&series.values[0]);
        for row in &series.values[1..] {
            let n = p.weighted_norm(row);
            assert!(n <= n0 * 1.05, "‖m(t)‖ = {n:.4e} exceeds ‖m(0)‖ = {n0:.4e}");
        }
    }

    #[test]
    fn cesaro_average_decays_to_projection_limit() {
        // (Id⊗π₀)H = 0 for radial f° (the angular average of K over rings is
        // tangential), so the Cesàro average must decay toward
        // (1/μ)div(A∇f°) ≡ 0; check monotone-in-T smallness relative to m(0).
        let (_k, p, w, t) = setup();
        let series = gaussian_main_term(&p, &t, &w, &f0_prime, &[0.0]).unwrap();
        let scale = p.weighted_norm(&series.values[0]);
        let c50 = p.weighted_norm(&main_term_cesaro(&p, &t, &w, &f0_prime, 50.0).unwrap());
        let c200 = p.weighted_norm(&main_term_cesaro(&p, &t, &w, &f0_prime, 200.0).unwrap());
        assert!(c200 < c50, "Cesàro not decaying: C(50) = {c50:.3e}, C(200) = {c200:.3e}");
        assert!(c200 <= 0.02 * scale, "C(200) = {c200:.3e} vs scale {scale:.3e}");
    }
}
