//! The non-degenerate Fokker–Planck coefficient
//!   a_β(r) = ∫_{S¹} ( ∫ H₀(re,y)·[Re(iL²_β+0)^{-1}H_β](re,y)·μ_β(y) dy ) dσ(e)
//! with H₀(x,y) = x̂·K(x-y), H_β(x,y) = x̂·(-∇₁⊥W_β)(x,y), evaluated at a
//! decreasing ε-schedule with first-order Richardson extrapolation to ε→0.
//!
//! In relative-angle modes H₀ and H_β live on the pairs (k₁,k₂) = (ℓ,-ℓ)
//! with purely imaginary coefficients iℓ·w_ℓ(r,s)/r and iℓ·(W_β)_ℓ(r,s)/r;
//! the σ-average is normalized to mass 1 (the 2π is carried by the radial
//! contraction), matching the convention pinned in the diffusion-field
//! Monte Carlo test.

use num_complex::Complex64;

use crate::grid::RadialGrid;
use crate::meanfield::{EquilibriumProfile, RenormalizedPotential};
use crate::modes::TwoPointModeTable;
use crate::{Error, Result};

use super::resolvent::{solve_blocks, ResolventReport, TwoParticleField};

/// a_β(r) with its ε-schedule provenance and pointwise stability gap.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub grid: RadialGrid,
    /// Richardson-extrapolated values
    pub a: Vec<f64>,
    pub eps_schedule: Vec<f64>,
    /// a^{(ε)} for each ε in the schedule
    pub a_per_eps: Vec<Vec<f64>>,
    /// pointwise |a^{(ε_last)} - a^{(ε_prev)}|
    pub stability_gap: Vec<f64>,
    /// sup of the gap per consecutive ε pair (should decrease)
    pub gap_history: Vec<f64>,
    /// set when the last gap exceeded the requested tolerance
    pub flagged: bool,
    pub reports: Vec<ResolventReport>,
}

impl CoefficientField {
    /// CSV rows `r,a,stability_gap`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,a,stability_gap\n");
        for i in 0..self.grid.len() {
            s.push_str(&format!("{},{},{}\n", self.grid.r[i], self.a[i], self.stability_gap[i]));
        }
        s
    }

    pub fn min_value(&self) -> f64 {
        self.a.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Source field H_β over the (ℓ,-ℓ) blocks, ℓ = 1..=l_max.
fn h_beta_field(
    profile: &EquilibriumProfile,
    wb: &RenormalizedPotential,
    l_max: usize,
) -> TwoParticleField {
    let g = &profile.grid;
    let n = g.len();
    let blocks = (1..=l_max.min(wb.table.l_max))
        .map(|l| {
            let w = &wb.table.data[l];
            let mut d = vec![Complex64::ZERO; n * n];
            for i in 0..n {
                for j in 0..n {
                    d[i * n + j] = Complex64::new(0.0, l as f64 * w[i * n + j] / g.r[i]);
                }
            }
            ((l as i64, -(l as i64)), d)
        })
        .collect();
    TwoParticleField { grid: g.clone(), blocks }
}

/// a^{(ε)}(r) for one ε: solve the resolvent blocks and contract against H₀
/// with the same resolvent-weighted quadrature. The ±ℓ pairs are complex
/// conjugates, so only ℓ ≥ 1 is solved and the real part doubled.
fn a_at_eps(
    profile: &EquilibriumProfile,
    w_modes: &TwoPointModeTable,
    wb: &RenormalizedPotential,
    eps: f64,
    l_max: usize,
) -> Result<(Vec<f64>, ResolventReport)> {
    let g = &profile.grid;
    let n = g.len();
    let source = h_beta_field(profile, wb, l_max);
    let (blocks, report) =
        solve_blocks(profile, w_modes, Complex64::new(eps, 0.0), &source, profile.beta)?;
    let mut a = vec![0.0; n];
    for b in &blocks {
        let l = b.k1 as usize; // blocks are (ℓ, -ℓ) with ℓ ≥ 1
        let w = &w_modes.data[l.min(w_modes.l_max)];
        for i in 0..n {
            let mut acc = Complex64::ZERO;
            for j in 0..n {
                // The ±ℓ pair contributes η_ℓΨ_{-ℓ} + η_{-ℓ}Ψ_ℓ
                // = 2·Re[η_ℓ·conj(Ψ_ℓ)] since the resolved field is real.
                // conj(Ψ_ℓ) = conj(numerator)/conj(D): integrate the smooth
                // factor η·conj(numerator)·μ·s against conj(weights).
                let eta = Complex64::new(0.0, l as f64 * w[i * n + j] / g.r[i]);
                acc += eta
                    * (b.numerator[i * n + j] * b.weights[i * n + j]).conj()
                    * (profile.mu[j] * g.r[j]);
            }
            a[i] += 2.0 * std::f64::consts::PI * 2.0 * acc.re;
        }
    }
    Ok((a, report))
}

/// Compute a_β on a decreasing ε-schedule with Richardson extrapolation.
/// `flag_tol` bounds the acceptable final stability gap; exceeding it flags
/// (but does not fail) the result.
pub fn compute_a_beta(
    profile: &EquilibriumProfile,
    w_modes: &TwoPointModeTable,
    wb: &RenormalizedPotential,
    eps_schedule: &[f64],
    l_max: usize,
    flag_tol: f64,
) -> Result<CoefficientField> {
    if eps_schedule.len() < 2 || eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("ε schedule must be decreasing with ≥ 2 entries".into()));
    }
    let mut a_per_eps = Vec::new();
    let mut reports = Vec::new();
    for &eps in eps_schedule {
        let (a, rep) = a_at_eps(profile, w_modes, wb, eps, l_max)?;
        a_per_eps.push(a);
        reports.push(rep);
    }
    let n = profile.grid.len();
    let m = a_per_eps.len();
    let gap_history: Vec<f64> = (1..m)
        .map(|k| {
            (0..n)
                .map(|i| (a_per_eps[k][i] - a_per_eps[k - 1][i]).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let stability_gap: Vec<f64> =
        (0..n).map(|i| (a_per_eps[m - 1][i] - a_per_eps[m - 2][i]).abs()).collect();
    // first-order Richardson on the last two (ε halving schedule)
    let a: Vec<f64> =
        (0..n).map(|i| 2.0 * a_per_eps[m - 1][i] - a_per_eps[m - 2][i]).collect();
    let flagged = *gap_history.last().unwrap() > flag_tol;
    Ok(CoefficientField {
        grid: profile.grid.clone(),
        a,
        eps_schedule: eps_schedule.to_vec(),
        a_per_eps,
        stability_gap,
        gap_history,
        flagged,
        reports,
    })
}
