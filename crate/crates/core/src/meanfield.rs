//! Mean-field equilibrium: fixed point for μ_β, angular velocity Ω_β,
//! equilibrium classification, μ_β-convolution powers and the renormalized
//! two-point potential.

use crate::grid::RadialGrid;
use crate::kernels::{EvenRadialTable, ExternalPotential, PlaneKernel};
use crate::modes::{ring_radial_derivative, TwoPointModeTable};
use crate::{Error, Result};

const N_THETA: usize = 256;

/// Radial-grid representation of the mean-field equilibrium μ_β together
/// with its normalization, potential and angular velocity.
#[derive(Debug, Clone)]
pub struct EquilibriumProfile {
    pub beta: f64,
    pub grid: RadialGrid,
    pub mu: Vec<f64>,
    pub z_beta: f64,
    /// U = V + W∗μ_β on the grid.
    pub u: Vec<f64>,
    /// Ω_β with (log μ_β)' = β r Ω_β, i.e. Ω_β = -U'(r)/r.
    pub omega: Vec<f64>,
    /// sup-residual history of the Picard iteration.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

impl EquilibriumProfile {
    /// 2π ∫ μ r dr.
    pub fn mass(&self) -> f64 {
        self.grid.integrate_plane(&self.mu)
    }

    pub fn log_mu(&self) -> Vec<f64> {
        self.mu.iter().map(|&m| m.ln()).collect()
    }

    /// Exact Gaussian equilibrium μ = (βR/2π)·e^{-βR r²/2} with
    /// V + W∗μ = R r²/2 (the degenerate case).
    pub fn gaussian(beta: f64, r_const: f64, grid: RadialGrid) -> Self {
        let c = beta * r_const;
        let mu: Vec<f64> =
            grid.r.iter().map(|&r| c / (2.0 * std::f64::consts::PI) * (-0.5 * c * r * r).exp()).collect();
        let u: Vec<f64> = grid.r.iter().map(|&r| 0.5 * r_const * r * r).collect();
        let omega = vec![-r_const; grid.len()];
        EquilibriumProfile {
            beta,
            grid,
            mu,
            z_beta: 2.0 * std::f64::consts::PI / c,
            u,
            omega,
            residuals: vec![],
            warnings: vec![],
        }
    }

    /// Value of Ω_β extrapolated to r = 0 (even quadratic fit on the first
    /// nodes; Ω is even in r).
    pub fn omega_at_origin(&self) -> f64 {
        self.even_fit().0
    }

    /// Ω_β''(0) from the same even fit.
    pub fn omega_second_deriv_at_origin(&self) -> f64 {
        2.0 * self.even_fit().1
    }

    // fit Ω ≈ c0 + c1 r² + c2 r⁴ on the first 8 nodes
    fn even_fit(&self) -> (f64, f64) {
        let n = 8.min(self.grid.len());
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for i in 0..n {
            let x = self.grid.r[i] * self.grid.r[i];
            let basis = [1.0, x, x * x];
            for p in 0..3 {
                for q in 0..3 {
                    a[p][q] += basis[p] * basis[q];
                }
                b[p] += basis[p] * self.omega[i];
            }
        }
        solve3(a, b)
    }

    pub fn interp_mu(&self, r: f64) -> f64 {
        self.grid.interp(&self.mu, r)
    }

    /// Weighted L²_β norm of a radial function given on the grid:
    /// (2π ∫ |f|² μ r dr)^{1/2}.
    pub fn weighted_norm(&self, f: &[f64]) -> f64 {
        let sq: Vec<f64> = f.iter().zip(&self.mu).map(|(&v, &m)| v * v * m).collect();
        self.grid.integrate_plane(&sq).sqrt()
    }

    /// CSV rows `r,mu,omega`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,mu,omega\n");
        for i in 0..self.grid.len() {
            s.push_str(&format!("{},{},{}\n", self.grid.r[i], self.mu[i], self.omega[i]));
        }
        s
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> (f64, f64) {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let x2 = b[2] / a[2][2];
    let x1 = (b[1] - a[1][2] * x2) / a[1][1];
    let x0 = (b[0] - a[0][1] * x1 - a[0][2] * x2) / a[0][0];
    (x0, x1)
}

/// Radial convolution (W∗μ)(r) evaluated at arbitrary target radii.
pub fn convolve_radial(
    w: &PlaneKernel,
    grid: &RadialGrid,
    mu: &[f64],
    targets: &[f64],
) -> Vec<f64> {
    targets
        .iter()
        .map(|&rt| {
            let mut acc = 0.0;
            for j in 0..grid.len() {
                let s = grid.r[j];
                let mut ring = 0.0;
                for t in 0..N_THETA {
                    let th = 2.0 * std::f64::consts::PI * t as f64 / N_THETA as f64;
                    let d = (rt * rt + s * s - 2.0 * rt * s * th.cos()).max(0.0).sqrt();
                    ring += w.w(d);
                }
                acc += ring / N_THETA as f64 * mu[j] * s * grid.w[j];
            }
            2.0 * std::f64::consts::PI * acc
        })
        .collect()
}

/// Construct the external potential V = R r²/2 - W∗μ_G that makes the
/// Gaussian μ_G = (βR/2π)e^{-βR r²/2} the exact mean-field equilibrium.
pub fn gaussian_case_potential(
    w: &PlaneKernel,
    beta: f64,
    r_const: f64,
    grid: &RadialGrid,
) -> Result<ExternalPotential> {
    let gauss = EquilibriumProfile::gaussian(beta, r_const, grid.clone());
    let n_tab = 512;
    let targets: Vec<f64> = (0..n_tab).map(|i| grid.r_max * i as f64 / (n_tab - 1) as f64).collect();
    let conv = convolve_radial(w, grid, &gauss.mu, &targets);
    let v: Vec<f64> =
        targets.iter().zip(&conv).map(|(&r, &c)| 0.5 * r_const * r * r - c).collect();
    Ok(ExternalPotential::Radial(EvenRadialTable::new(targets, v)?))
}

/// Solve the mean-field fixed point μ = Z^{-1} e^{-β(V + W∗μ)} by damped
/// Picard iteration.
pub fn solve_mu_beta(
    v: &ExternalPotential,
    w: Option<&PlaneKernel>,
    beta: f64,
    grid: &RadialGrid,
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumProfile> {
    let n = grid.len();
    let mut warnings = Vec::new();
    let bw = beta * w.map_or(0.0, |k| k.sup_norm());
    if bw > 0.5 {
        warnings.push(format!(
            "β‖W‖∞ = {bw:.3} exceeds the contraction bound 0.5; Picard may need damping"
        ));
    }

    // ℓ=0 ring table of W on the grid, reused every iteration
    let ring0 = w.map(|k| TwoPointModeTable::from_radial_kernel(grid, 0, N_THETA, |d| k.w(d)));
    let conv = |mu: &[f64]| -> Vec<f64> {
        match &ring0 {
            None => vec![0.0; n],
            Some(t) => {
                let tab = &t.data[0];
                (0..n)
                    .map(|i| {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += tab[i * n + j] * mu[j] * grid.r[j] * grid.w[j];
                        }
                        2.0 * std::f64::consts::PI * acc
                    })
                    .collect()
            }
        }
    };

    let vr: Vec<f64> = grid.r.iter().map(|&r| v.v(r)).collect();
    let normalize = |u: &[f64]| -> (Vec<f64>, f64) {
        let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let m: Vec<f64> = u.iter().map(|&x| (-beta * (x - umin)).exp()).collect();
        let z = grid.integrate_plane(&m);
        (m.iter().map(|&x| x / z).collect(), z * (-beta * umin).exp())
    };

    let (mut mu, _) = normalize(&vr);
    let mut residuals: Vec<f64> = Vec::new();
    let mut z_beta = 0.0;
    let mut converged = false;
    for _ in 0..max_iter {
        let u: Vec<f64> = vr.iter().zip(conv(&mu)).map(|(&a, b)| a + b).collect();
        let (mu_new, z) = normalize(&u);
        z_beta = z;
        let res = mu.iter().zip(&mu_new).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        let damp = residuals.last().is_some_and(|&prev| res > prev);
        residuals.push(res);
        if damp {
            for (m, mn) in mu.iter_mut().zip(&mu_new) {
                *m = 0.5 * (*m + mn);
            }
        } else {
            mu = mu_new;
        }
        if res < tol {
            converged = true;
            break;
        }
        if residuals.len() > 20 {
            let k = residuals.len();
            if residuals[k - 1] > 10.0 * residuals[k - 21] {
                return Err(Error::MeanField(format!(
                    "Picard iteration diverging (residual {:.3e} after {k} steps; β‖W‖∞ = {bw:.3})",
                    residuals[k - 1]
                )));
            }
        }
    }
    if !converged {
        return Err(Error::MeanField(format!(
            "no convergence in {max_iter} iterations; last residual {:.3e}",
            residuals.last().copied().unwrap_or(f64::NAN)
        )));
    }

    if mu.iter().any(|&m| m <= 0.0 || !m.is_finite()) {
        return Err(Error::MeanField("μ_β not strictly positive on the grid".into()));
    }
    let u: Vec<f64> = vr.iter().zip(conv(&mu)).map(|(&a, b)| a + b).collect();

    // angular velocity Ω = -U'(r)/r from analytic V' and the ring-derivative
    // table of W (independent of finite differences of log μ)
    let omega = {
        let dconv: Vec<f64> = match w {
            None => vec![0.0; n],
            Some(k) => {
                let tab = ring_radial_derivative(grid, N_THETA, |d| k.w_prime(d));
                (0..n)
                    .map(|i| {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += tab[i * n + j] * mu[j] * grid.r[j] * grid.w[j];
                        }
                        2.0 * std::f64::consts::PI * acc
                    })
                    .collect()
            }
        };
        grid.r
            .iter()
            .enumerate()
            .map(|(i, &r)| -(v.v_prime_over_r(r) + dconv[i] / r))
            .collect()
    };

    if mu[n - 1] > 1e-10 {
        warnings.push(format!(
            "μ_β(R_max) = {:.3e} not negligible; grid may truncate the support",
            mu[n - 1]
        ));
    }

    Ok(EquilibriumProfile { beta, grid: grid.clone(), mu, z_beta, u, omega, residuals, warnings })
}

/// Angular velocity recovered from a profile's log-density by finite
/// differences; used as a cross-check of the analytic route stored in
/// `EquilibriumProfile::omega`.
pub fn angular_velocity_fd(profile: &EquilibriumProfile) -> Result<Vec<f64>> {
    if profile.mu.iter().any(|&m| m <= 0.0) {
        return Err(Error::MeanField("μ_β touches zero inside the grid".into()));
    }
    let lm = profile.log_mu();
    let d = profile.grid.derivative(&lm);
    Ok(d.iter()
        .zip(&profile.grid.r)
        .map(|(&dl, &r)| dl / (profile.beta * r))
        .collect())
}

/// Classification of the equilibrium shape.
#[derive(Debug, Clone, PartialEq)]
pub enum EquilibriumClass {
    /// Ω_β ≈ -R constant: degenerate (Gaussian) case.
    Gaussian { r_const: f64 },
    /// |Ω'(r)| ≥ (r∧1)/R and |Ω''(0)| ≥ 1/R: non-degenerate case.
    NonDegenerate { r_const: f64 },
    Other,
}

/// The inequalities actually checked during classification.
#[derive(Debug, Clone)]
pub struct ClassificationEvidence {
    pub fitted_r: f64,
    pub sup_gaussian_deviation: f64,
    /// sup over the grid of (r∧1)/|Ω'(r)|.
    pub slope_r_required: f64,
    pub omega_pp_origin: f64,
}

const R_CAP: f64 = 1e3;

pub fn classify_equilibrium(
    profile: &EquilibriumProfile,
    tol: f64,
) -> (EquilibriumClass, ClassificationEvidence) {
    let omega = &profile.omega;
    let max = omega.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = omega.iter().cloned().fold(f64::INFINITY, f64::min);
    let fitted_r = -0.5 * (max + min);
    let dev = omega.iter().map(|&o| (o + fitted_r).abs()).fold(0.0f64, f64::max);

    let dw = profile.grid.derivative(omega);
    let mut slope_r_required = 0.0f64;
    for (i, &d) in dw.iter().enumerate() {
        let need = profile.grid.r[i].min(1.0);
        let r = if d.abs() > 0.0 { need / d.abs() } else { f64::INFINITY };
        slope_r_required = slope_r_required.max(r);
    }
    let omega_pp_origin = profile.omega_second_deriv_at_origin();
    let evidence = ClassificationEvidence {
        fitted_r,
        sup_gaussian_deviation: dev,
        slope_r_required,
        omega_pp_origin,
    };

    if dev < tol {
        return (EquilibriumClass::Gaussian { r_const: fitted_r }, evidence);
    }
    let curvature_r = if omega_pp_origin.abs() > 0.0 {
        1.0 / omega_pp_origin.abs()
    } else {
        f64::INFINITY
    };
    let r_needed = slope_r_required.max(curvature_r);
    if r_needed.is_finite() && r_needed <= R_CAP {
        (EquilibriumClass::NonDegenerate { r_const: r_needed }, evidence)
    } else {
        (EquilibriumClass::Other, evidence)
    }
}

/// n-fold μ_β-convolution power W^{∗_μ n} as a mode table (n ≥ 1).
pub fn mu_convolution_power(
    w_table: &TwoPointModeTable,
    profile: &EquilibriumProfile,
    n: usize,
) -> TwoPointModeTable {
    assert!(n >= 1);
    let mut acc = w_table.clone();
    for _ in 1..n {
        acc = w_table.mu_product(&acc, &profile.mu);
    }
    acc
}

/// Renormalized two-point potential W_β = Σ (-β)^n W^{∗_μ(n+1)}.
#[derive(Debug, Clone)]
pub struct RenormalizedPotential {
    pub table: TwoPointModeTable,
    pub truncation_order: usize,
    pub tail_bound: f64,
}

pub fn renormalized_potential(
    w: &PlaneKernel,
    w_table: &TwoPointModeTable,
    profile: &EquilibriumProfile,
    tol: f64,
) -> Result<RenormalizedPotential> {
    let beta = profile.beta;
    let q = beta * w.sup_norm();
    if q >= 1.0 {
        return Err(Error::MeanField(format!(
            "β‖W‖∞ = {q:.3} ≥ 1: renormalization series divergent"
        )));
    }
    let mut sum = w_table.clone();
    let mut term = w_table.clone();
    let mut n_terms = 1usize;
    loop {
        let tail = w.sup_norm() * q.powi(n_terms as i32) / (1.0 - q);
        if tail < tol || n_terms > 400 {
            return Ok(RenormalizedPotential {
                table: sum,
                truncation_order: n_terms,
                tail_bound: tail,
            });
        }
        // term_{n+1} = -β · W ∗_μ term_n
        let mut next = w_table.mu_product(&term, &profile.mu);
        for row in &mut next.data {
            for x in row.iter_mut() {
                *x *= -beta;
            }
        }
        term = next;
        sum.scaled_add(1.0, &term);
        n_terms += 1;
    }
}

/// Residual of the defining identity W_β + β·(W_β ∗_μ W) = W, entrywise sup
/// over stored modes.
pub fn renormalization_identity_residual(
    wb: &RenormalizedPotential,
    w_table: &TwoPointModeTable,
    profile: &EquilibriumProfile,
) -> f64 {
    let mut lhs = wb.table.mu_product(w_table, &profile.mu);
    for row in &mut lhs.data {
        for x in row.iter_mut() {
            *x *= profile.beta;
        }
    }
    lhs.scaled_add(1.0, &wb.table);
    lhs.scaled_add(-1.0, w_table);
    lhs.sup_entry()
}
