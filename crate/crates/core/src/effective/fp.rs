//! Radial Fokker–Planck solver in conservative (divergence) form:
//!   ∂_τ f = (1/r)·∂_r( r·a(r)·μ·∂_r(f/μ) )
//! with no-flux boundaries at r = 0 and r = R_max.
//!
//! Finite volumes on a uniform cell grid with face flux F = a·μ·Δ(f/μ)/h
//! keep f = c·μ exactly stationary, conserve mass to roundoff, and make
//! implicit Euler a contraction for ‖f/μ‖_{L²_β}.

use crate::meanfield::EquilibriumProfile;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct FpSolution {
    /// cell centers
    pub r: Vec<f64>,
    pub times: Vec<f64>,
    /// profiles[t][cell]
    pub profiles: Vec<Vec<f64>>,
    /// 2π ∫ f r dr per output time
    pub masses: Vec<f64>,
    /// ‖f(τ)/μ‖_{L²_β} per output time
    pub weighted_norms: Vec<f64>,
}

impl FpSolution {
    /// CSV rows `tau,r,f`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,r,f\n");
        for (t, row) in self.times.iter().zip(&self.profiles) {
            for (r, v) in self.r.iter().zip(row) {
                s.push_str(&format!("{t},{r},{v}\n"));
            }
        }
        s
    }
}

/// Evolve f° with implicit Euler steps of size `dt` to each output time.
/// `a_field` must be nonnegative; `f0` and outputs live on cell centers.
pub fn fp_evolve(
    f0: &dyn Fn(f64) -> f64,
    a_field: &dyn Fn(f64) -> f64,
    profile: &EquilibriumProfile,
    tau_grid: &[f64],
    n_cells: usize,
    dt: f64,
) -> Result<FpSolution> {
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("tau_grid must increase".into()));
    }
    let r_max = profile.grid.r_max;
    let h = r_max / n_cells as f64;
    let centers: Vec<f64> = (0..n_cells).map(|i| (i as f64 + 0.5) * h).collect();
    let faces: Vec<f64> = (0..=n_cells).map(|i| i as f64 * h).collect();
    let mu_c: Vec<f64> = centers.iter().map(|&r| profile.interp_mu(r).max(1e-300)).collect();
    let mu_f: Vec<f64> = faces.iter().map(|&r| profile.interp_mu(r).max(1e-300)).collect();
    let a_f: Vec<f64> = faces.iter().map(|&r| a_field(r)).collect();
    // tolerate quadrature-level negativity (the a_β positivity criterion
    // allows -1e-8); anything larger is a real sign error
    if a_f.iter().any(|&a| a < -1e-8) {
        return Err(Error::Numerics("a_β must be nonnegative for the H-theorem".into()));
    }
    let a_f: Vec<f64> = a_f.iter().map(|&a| a.max(0.0)).collect();

    // flux at interior face k (between cells k-1 and k):
    //   F_k = a_k μ_k (f_k/μ_k^c - f_{k-1}/μ_{k-1}^c)/h
    // cell update: df_i/dτ = (r_{i+1}F_{i+1} - r_iF_i)/(r_i^c h)
    // implicit Euler → tridiagonal system (I - dt·L) f^{n+1} = f^n
    let coef = |k: usize| -> f64 {
        // face k weight: r_k a_k μ_k / h
        faces[k] * a_f[k] * mu_f[k] / h
    };

    let mut f: Vec<f64> = centers.iter().map(|&r| f0(r)).collect();
    let mass = |f: &[f64]| -> f64 {
        2.0 * std::f64::consts::PI * f.iter().zip(&centers).map(|(&v, &r)| v * r * h).sum::<f64>()
    };
    let wnorm = |f: &[f64]| -> f64 {
        (2.0 * std::f64::consts::PI
            * f.iter()
                .zip(&centers)
                .zip(&mu_c)
                .map(|((&v, &r), &m)| (v / m).powi(2) * m * r * h)
                .sum::<f64>())
        .sqrt()
    };

    let mut times = Vec::new();
    let mut profiles = Vec::new();
    let mut masses = Vec::new();
    let mut weighted_norms = Vec::new();
    let mut tau = 0.0;

    let mut push_output = |tau: f64, f: &[f64]| {
        times.push(tau);
        profiles.push(f.to_vec());
        masses.push(mass(f));
        weighted_norms.push(wnorm(f));
    };
    if tau_grid.first() == Some(&0.0) {
        push_output(0.0, &f);
    }

    // tridiagonal scratch
    let n = n_cells;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    for &t_out in tau_grid.iter().skip_while(|&&t| t == 0.0) {
        while tau < t_out - 1e-14 {
            let step = dt.min(t_out - tau);
            // assemble (I - step·L)
            for i in 0..n {
                let vol = centers[i] * h;
                let cl = if i > 0 { coef(i) } else { 0.0 };
                let cu = if i + 1 < n { coef(i + 1) } else { 0.0 };
                lower[i] = if i > 0 { -step * cl / (vol * mu_c[i - 1]) } else { 0.0 };
                upper[i] = if i + 1 < n { -step * cu / (vol * mu_c[i + 1]) } else { 0.0 };
                diag[i] = 1.0 + step * (cl + cu) / (vol * mu_c[i]);
                rhs[i] = f[i];
            }
            thomas_solve(&lower, &mut diag, &upper, &mut rhs)?;
            f.copy_from_slice(&rhs);
            tau += step;
        }
        push_output(t_out, &f);
    }

    Ok(FpSolution { r: centers, times, profiles, masses, weighted_norms })
}

fn thomas_solve(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1].abs() < 1e-300 {
            return Err(Error::Numerics("singular tridiagonal pivot in FP solve".into()));
        }
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::kernels::ExternalPotential;
    use crate::meanfield::solve_mu_beta;
    use approx::assert_relative_eq;

    fn profile() -> EquilibriumProfile {
        let g = RadialGrid::gauss_legendre(5.0, 20, 8);
        solve_mu_beta(
            &ExternalPotential::Quartic { c2: 1.0, c4: 1.0 },
            None,
            1.0,
            &g,
            1e-12,
            200,
        )
        .unwrap()
    }

    fn a_smooth(r: f64) -> f64 {
        0.1 * (-0.2 * r * r).exp() + 0.02
    }

    #[test]
    fn equilibrium_is_stationary_and_mass_conserved() {
        let p = profile();
        let mu0 = p.interp_mu(0.0);
        let f0 = move |r: f64| p.interp_mu(r) / mu0;
        let p2 = profile();
        let sol = fp_evolve(&f0, &a_smooth, &p2, &[0.0, 0.5, 1.0], 400, 1e-3).unwrap();
        let start = &sol.profiles[0];
        let end = &sol.profiles[sol.profiles.len() - 1];
        let sup = start
            .iter()
            .zip(end)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-10, "equilibrium drifted by {sup:.3e}");
        for m in &sol.masses {
            assert_relative_eq!(*m, sol.masses[0], epsilon = 1e-10);
        }
    }

    #[test]
    fn h_theorem_and_thermalization() {
        let p = profile();
        // localized non-equilibrium start
        let f0 = |r: f64| (-(r - 1.2) * (r - 1.2) / 0.08).exp();
        let taus: Vec<f64> = (0..=30).map(|i| i as f64 * 4.0).collect();
        let sol = fp_evolve(&f0, &a_smooth, &p, &taus, 300, 5e-3).unwrap();
        // ‖f/μ‖_{L²_β} non-increasing
        for w in sol.weighted_norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "H-theorem violated: {w:?}");
        }
        // τ→∞ profile approaches the discrete equilibrium: μ on the cells,
        // scaled to carry the initial (conserved) mass
        let end = sol.profiles.last().unwrap();
        let mu_c: Vec<f64> = sol.r.iter().map(|&r| p.interp_mu(r)).collect();
        let h = sol.r[1] - sol.r[0];
        let mu_mass: f64 = 2.0 * std::f64::consts::PI
            * mu_c.iter().zip(&sol.r).map(|(&m, &r)| m * r * h).sum::<f64>();
        let c = sol.masses[0] / mu_mass;
        let sup = end
            .iter()
            .zip(&mu_c)
            .map(|(&v, &m)| (v - c * m).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-4, "not thermalized: sup dev {sup:.3e}");
    }

    #[test]
    fn rejects_negative_coefficient() {
        let p = profile();
        let f0 = |r: f64| (-r * r).exp();
        let bad = |_r: f64| -0.1;
        assert!(fp_evolve(&f0, &bad, &p, &[0.0, 0.1], 100, 1e-3).is_err());
    }
}
