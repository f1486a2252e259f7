//! Modal wave evolution of the subcritical uniform-case law:
//! f̂(τ, k) = f̂°(k)·cos(√(kᵀAk)·τ) with zero initial velocity.

use crate::kernels::TorusDensity;
use crate::{Error, Result};

use super::diffusion::DiffusionMatrix;

#[derive(Debug, Clone)]
pub struct WaveSolution {
    pub times: Vec<f64>,
    pub modes: Vec<[i64; 2]>,
    /// f̂°(k) and ω_k = √(kᵀAk) per mode
    pub f0_hat: Vec<f64>,
    pub omega: Vec<f64>,
    /// coeffs[t][mode]
    pub coeffs: Vec<Vec<f64>>,
}

impl WaveSolution {
    pub fn eval(&self, ti: usize, x: [f64; 2]) -> f64 {
        self.modes
            .iter()
            .zip(&self.coeffs[ti])
            .map(|(&k, &c)| {
                c * (k[0] as f64 * x[0] + k[1] as f64 * x[1]).cos()
                    - 0.0 * (k[0] as f64 * x[0] + k[1] as f64 * x[1]).sin()
            })
            .sum()
    }

    /// Wave energy Σ_k |∂_τ f̂|² + (kᵀAk)|f̂|² at output time ti.
    pub fn energy(&self, ti: usize) -> f64 {
        let t = self.times[ti];
        self.modes
            .iter()
            .zip(self.f0_hat.iter().zip(&self.omega))
            .map(|(_, (&f0, &om))| {
                let dcoef = -om * f0 * (om * t).sin();
                let c = f0 * (om * t).cos();
                dcoef * dcoef + om * om * c * c
            })
            .sum()
    }

    /// CSV rows `tau,k1,k2,coeff`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,k1,k2,coeff\n");
        for (t, row) in self.times.iter().zip(&self.coeffs) {
            for (k, c) in self.modes.iter().zip(row) {
                s.push_str(&format!("{t},{},{},{c}\n", k[0], k[1]));
            }
        }
        s
    }
}

/// Exact modal solution of ∂_τ²f = div(A∇f), f(0) = f°, ∂_τf(0) = 0.
pub fn wave_evolve(
    f0: &TorusDensity,
    a: &DiffusionMatrix,
    tau_grid: &[f64],
) -> Result<WaveSolution> {
    if !a.is_positive_semidefinite(1e-12) {
        return Err(Error::Numerics("wave evolution needs positive semidefinite A".into()));
    }
    let coeffs0 = f0.fourier_coeffs();
    let modes: Vec<[i64; 2]> = coeffs0.iter().map(|&(k, _)| k).collect();
    let f0_hat: Vec<f64> = coeffs0.iter().map(|&(_, c)| c).collect();
    let omega: Vec<f64> = modes
        .iter()
        .map(|&k| a.quadratic_form([k[0] as f64, k[1] as f64]).max(0.0).sqrt())
        .collect();
    let coeffs = tau_grid
        .iter()
        .map(|&t| {
            f0_hat
                .iter()
                .zip(&omega)
                .map(|(&f, &om)| f * (om * t).cos())
                .collect()
        })
        .collect();
    Ok(WaveSolution { times: tau_grid.to_vec(), modes, f0_hat, omega, coeffs })
}
