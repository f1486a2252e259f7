//! The acceptance checks. Every tolerance and parameter is pinned here; the
//! `acceptance` integration test target and the `verify` subcommand both run
//! these functions.
//!
//! `Effort::Fast` shrinks ensemble sizes and grids for a quick smoke pass;
//! `Effort::Full` runs the committed configurations.

use std::sync::Arc;

use num_complex::Complex64;

use crate::cumulants::{
    exact_short_time_derivatives, invert_cluster, marginals_from_moments, scaling_report,
};
use crate::effective::{
    apply_forward, compute_a_beta, diffusion_field_direct, diffusion_field_gaussian,
    diffusion_matrix_torus, fp_evolve, gaussian_main_term, main_term_cesaro, next_order_b,
    resolvent_l2, GaussTBeta, RadialModeField, TwoParticleField,
};
use crate::grid::RadialGrid;
use crate::hierarchy::{
    build_operator, initial_state, propagate_lanczos, spectral_diagnostics, tagged_observable,
    FockBasis,
};
use crate::kernels::{ExternalPotential, PlaneKernel, TorusDensity, TorusKernel};
use crate::meanfield::{
    renormalization_identity_residual, renormalized_potential, solve_mu_beta, EquilibriumProfile,
};
use crate::modes::TwoPointModeTable;
use crate::nbody::{
    run_ensemble, run_stencil_ensemble, EnsembleConfig, InitialKind, NBodySystem, TaggedDensity,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effort {
    Fast,
    Full,
}

/// One line of the verification report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckLine {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: String,
    pub lines: Vec<CheckLine>,
    pub seconds: f64,
    pub pass: bool,
}

impl CriterionOutcome {
    fn new(id: usize, title: &str) -> Self {
        CriterionOutcome { id, title: title.into(), lines: vec![], seconds: 0.0, pass: true }
    }

    /// |measured - target| ≤ tolerance
    fn check(&mut self, name: &str, measured: f64, target: f64, tolerance: f64) {
        let pass = (measured - target).abs() <= tolerance;
        self.pass &= pass;
        self.lines.push(CheckLine { name: name.into(), measured, target, tolerance, pass });
    }

    /// measured ≤ bound
    fn check_le(&mut self, name: &str, measured: f64, bound: f64) {
        let pass = measured <= bound;
        self.pass &= pass;
        self.lines
            .push(CheckLine { name: name.into(), measured, target: 0.0, tolerance: bound, pass });
    }

    /// monotone decrease of a sequence
    fn check_decreasing(&mut self, name: &str, seq: &[f64]) {
        let worst =
            seq.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
        self.check_le(name, worst, 1.0);
    }

    pub fn summary_line(&self) -> String {
        format!(
            "criterion {}: {} ... {}",
            self.id,
            self.title,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn cos_cos() -> TorusKernel {
    TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 1.0)]).unwrap()
}

fn half_cos_density() -> TorusDensity {
    TorusDensity::new(&[([1, 0], 0.5)]).unwrap()
}

pub fn criterion(id: usize, effort: Effort) -> Result<CriterionOutcome> {
    let t0 = std::time::Instant::now();
    let mut out = match id {
        1 => wave_law(effort),
        2 => cumulant_scaling(effort),
        3 => hierarchy_vs_nbody(effort),
        4 => operator_algebra(),
        5 => rage_diagnostic(effort),
        6 => gaussian_case(effort),
        7 => non_gaussian_coefficient(effort),
        8 => fokker_planck(effort),
        9 => mean_field_solver(),
        other => Err(Error::Config(format!("no criterion {other} (1..=9)"))),
    }?;
    out.seconds = t0.elapsed().as_secs_f64();
    Ok(out)
}

pub const CRITERIA: std::ops::RangeInclusive<usize> = 1..=9;

/// 1. Wave-law reproduction: the Monte Carlo second time difference of
/// f̂¹((1,0)) at t = 0 matches -((N-1)/N²)(kᵀAk)f̂°(k) within 3σ plus the
/// stencil bias, and the third difference is consistent with zero.
fn wave_law(effort: Effort) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(1, "wave law vs short-time oracle");
    let kernel = cos_cos();
    let f0 = half_cos_density();
    let k = [1i64, 0i64];
    let a = diffusion_matrix_torus(&kernel);
    let b = next_order_b(&kernel);
    let kf = [k[0] as f64, k[1] as f64];
    let kak = a.quadratic_form(kf);
    let kbk = b.quadratic_form(kf);
    let (ns, samples): (&[usize], usize) = match effort {
        Effort::Full => (&[8, 32, 128], 200_000),
        Effort::Fast => (&[8], 20_000),
    };
    for &n in ns {
        let sys = NBodySystem::torus(&kernel);
        let dt = sys.dt_max();
        let h = 5.0 * dt;
        let cfg = EnsembleConfig {
            n_particles: n,
            n_samples: samples,
            seed: 20_260_809 + n as u64,
            dt,
            t_grid: vec![],
            single_modes: vec![],
            pair_modes: vec![],
            triple_modes: vec![],
            initial: InitialKind::UniformBackground,
            beta: 0.0,
            track_hamiltonian: false,
        };
        let est = run_stencil_ensemble(&cfg, &sys, &TaggedDensity::Torus(&f0), k, h)?;
        let exact = exact_short_time_derivatives(&f0, &kernel, n, 1);
        let pos = exact.modes.iter().position(|&m| m == k).unwrap();
        let d2 = exact.d2[pos];
        // ∂_t⁴ bound from the next-order expansion, with margin for the
        // finite-N prefactors
        let d4_bound = 1.5 / (n * n) as f64 * (3.0 * kak * kak + kbk.abs()) * f0.fhat(k).abs();
        let bias2 = h * h / 12.0 * d4_bound;
        let bias3 = 0.5 * h * d4_bound;
        out.check(
            &format!("N={n}: Re d2 stencil vs exact"),
            est.d2.re,
            d2,
            3.0 * est.d2.se_re + bias2,
        );
        out.check(&format!("N={n}: Im d2 ~ 0"), est.d2.im, 0.0, 3.0 * est.d2.se_im + bias2);
        out.check(&format!("N={n}: Re d3 ~ 0"), est.d3.re, 0.0, 3.0 * est.d3.se_re + bias3);
        out.check(&format!("N={n}: Im d3 ~ 0"), est.d3.im, 0.0, 3.0 * est.d3.se_im + bias3);
    }
    Ok(out)
}

/// 2. Critical cumulant scaling: slope of log‖g²_N(0.3·√N)‖ vs log N.
fn cumulant_scaling(effort: Effort) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(2, "critical cumulant scaling");
    let kernel = cos_cos();
    let f0 = half_cos_density();
    let sys = NBodySystem::torus(&kernel);
    let dt = sys.dt_max();
    let tau0 = 0.3;
    let ns: &[usize] = match effort {
        Effort::Full => &[128, 256, 512, 1024],
        Effort::Fast => &[64, 128, 256],
    };
    // retained modes: tagged |k|_∞ ≤ 1, background l ≠ 0, |l|_∞ ≤ 1
    let mut pair_modes = Vec::new();
    let mut singles = Vec::new();
    for kx in -1i64..=1 {
        for ky in -1i64..=1 {
            singles.push([kx, ky]);
            for lx in -1i64..=1 {
                for ly in -1i64..=1 {
                    if (lx, ly) != (0, 0) {
                        pair_modes.push(([kx, ky], [lx, ly]));
                    }
                }
            }
        }
    }
    let mut points = Vec::new();
    for &n in ns {
        let samples = match effort {
            Effort::Full => (1usize << 23) / n,
            Effort::Fast => 2048,
        };
        let t = tau0 * (n as f64).sqrt();
        let cfg = EnsembleConfig {
            n_particles: n,
            n_samples: samples,
            seed: 77,
            dt,
            t_grid: vec![t],
            single_modes: singles.clone(),
            pair_modes: pair_modes.clone(),
            triple_modes: vec![],
            initial: InitialKind::UniformBackground,
            beta: 0.0,
            track_hamiltonian: false,
        };
        let est = run_ensemble(&cfg, &sys, &TaggedDensity::Torus(&f0))?;
        let marg = marginals_from_moments(&est, 0, 2)?;
        let corr = invert_cluster(&marg, 2)?;
        let (norm, se) = corr[1].l2_norm_debiased();
        points.push((n, norm, se));
    }
    let rep = scaling_report(&points, 2, 0)?;
    out.check("slope of log‖g²‖ vs log N", rep.slope, -0.5, 0.15);
    Ok(out)
}

/// 3. Truncated hierarchy vs N-body marginal at the critical timescale.
fn hierarchy_vs_nbody(effort: Effort) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(3, "hierarchy vs N-body tagged density");
    let kernel = cos_cos();
    let f0 = half_cos_density();
    let taus = [0.2, 0.4, 0.6];
    let (n, samples, m_levels) = match effort {
        Effort::Full => (1024usize, 60_000usize, 5usize),
        Effort::Fast => (256, 4_000, 4),
    };
    let modes = [[1i64, 0i64], [0, 1], [1, 1]];

    // hierarchy side at M and M+1 (the Cauchy difference is the truncation
    // error proxy)
    let level1 = |m_max: usize| -> Result<Vec<Vec<([i64; 2], Complex64)>>> {
        let basis = Arc::new(FockBasis::new(1, m_max)?);
        let op = build_operator(&kernel, basis.clone())?;
        let g0 = initial_state(&f0, &basis)?;
        let gs = propagate_lanczos(&op, &g0, &taus, 40, 1e-12)?;
        Ok(gs.iter().map(|g| tagged_observable(&basis, g)).collect())
    };
    let g_m = level1(m_levels)?;
    let g_m1 = level1(m_levels + 1)?;

    // Monte Carlo side
    let sys = NBodySystem::torus(&kernel);
    let dt = sys.dt_max();
    let sqrt_n = (n as f64).sqrt();
    let cfg = EnsembleConfig {
        n_particles: n,
        n_samples: samples,
        seed: 4242,
        dt,
        t_grid: taus.iter().map(|&t| t * sqrt_n).collect(),
        single_modes: modes.to_vec(),
        pair_modes: vec![],
        triple_modes: vec![],
        initial: InitialKind::UniformBackground,
        beta: 0.0,
        track_hamiltonian: false,
    };
    let est = run_ensemble(&cfg, &sys, &TaggedDensity::Torus(&f0))?;
    for (ti, &tau) in taus.iter().enumerate() {
        for &k in &modes {
            let mc = est.single_at(k, ti).unwrap();
            let gh = g_m[ti].iter().find(|(m, _)| *m == k).unwrap().1;
            let gh1 = g_m1[ti].iter().find(|(m, _)| *m == k).unwrap().1;
            let cauchy = (gh - gh1).norm();
            out.check(
                &format!("τ={tau}, k={k:?}: Re(f̂¹ MC) vs hierarchy"),
                mc.re,
                gh.re,
                3.0 * mc.se_re + cauchy,
            );
            out.check(
                &format!("τ={tau}, k={k:?}: Im(f̂¹ MC) vs hierarchy"),
                mc.im,
                gh.im,
                3.0 * mc.se_im + cauchy,
            );
        }
    }
    Ok(out)
}

/// 4. Operator algebra: adjoint symmetry, propagator unitarity, and the
/// bottom composition against the diffusion matrix.
fn operator_algebra() -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(4, "hierarchy operator algebra");
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let kernel = cos_cos();

    // adjoint residual over 100 random unit pairs at Λ=1, M=4
    let basis = Arc::new(FockBasis::new(1, 4)?);
    let op = build_operator(&kernel, basis.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut random_unit = || {
        let mut v = basis.zeros();
        for lvl in &mut v.data {
            for c in lvl.iter_mut() {
                *c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let n = basis.norm(&v);
        v.scale(Complex64::new(1.0 / n, 0.0));
        v
    };
    let mut adj = 0.0f64;
    for _ in 0..100 {
        let h = random_unit();
        let g = random_unit();
        let lhs = basis.dot(&op.apply(&h), &g);
        let rhs = basis.dot(&h, &op.apply(&g));
        adj = adj.max((lhs - rhs).norm());
    }
    out.check_le("adjoint residual ⟨Sh,g⟩-⟨h,Sg⟩", adj, 1e-12);

    // norm drift of the Lanczos propagator over τ ∈ [0, 10]
    let g0 = initial_state(&half_cos_density(), &basis)?;
    let taus: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let gs = propagate_lanczos(&op, &g0, &taus, 40, 1e-13)?;
    let n0 = basis.norm(&g0);
    let drift = gs
        .iter()
        .map(|g| (basis.norm(g) - n0).abs())
        .fold(0.0f64, f64::max);
    out.check_le("propagator norm drift over τ ∈ [0,10]", drift, 1e-10);

    // level-1 composition equals -kᵀAk (Λ=2 keeps transfers in the ball)
    let basis2 = Arc::new(FockBasis::new(2, 3)?);
    let op2 = build_operator(&kernel, basis2.clone())?;
    let a = diffusion_matrix_torus(&kernel);
    let f0 = half_cos_density();
    let g0 = initial_state(&f0, &basis2)?;
    let mut s2 = op2.apply(&op2.apply(&g0));
    s2.scale(Complex64::new(-1.0, 0.0));
    let mut comp = 0.0f64;
    for (k, c) in tagged_observable(&basis2, &s2) {
        let expect = -a.quadratic_form([k[0] as f64, k[1] as f64]) * f0.fhat(k);
        comp = comp.max((c - Complex64::new(expect, 0.0)).norm());
    }
    out.check_le("level-1 composition vs -kᵀAk", comp, 1e-10);
    Ok(out)
}

/// 5. RAGE diagnostic: Cesàro averages approach the eigenweight sum at ~1/T.
fn rage_diagnostic(effort: Effort) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(5, "RAGE Cesàro diagnostic");
    let m_max = match effort {
        Effort::Full => 4,
        Effort::Fast => 3,
    };
    let basis = Arc::new(FockBasis::new(1, m_max)?);
    let kernel = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 1.0), ([1, 1], 0.7)])?;
    let op = build_operator(&kernel, basis.clone())?;
    let g0 = initial_state(&half_cos_density(), &basis)?;
    let rep = spectral_diagnostics(&op, &g0, &g0, &[50.0, 100.0, 200.0, 400.0])?;
    let p = rep
        .decay_exponent
        .ok_or_else(|| Error::DegenerateFit("RAGE exponent fit failed".into()))?;
    out.check_le("1/T decay exponent deficit (0.9 - p)", (0.9 - p).max(0.0), 0.0);
    out.check_decreasing("cross terms decrease along T list", &rep.cross_term);
    Ok(out)
}

/// Shared Gaussian-case setup: exact Gaussian profile, kernel, mode tables.
fn gaussian_setup(
    effort: Effort,
) -> (PlaneKernel, EquilibriumProfile, TwoPointModeTable, GaussTBeta) {
    let (panels, l_max) = match effort {
        Effort::Full => (16usize, 12usize),
        Effort::Fast => (12, 8),
    };
    let grid = RadialGrid::gauss_legendre(8.0, panels, 8);
    let kernel = PlaneKernel::gaussian(2.0, 1.0).unwrap();
    let profile = EquilibriumProfile::gaussian(1.0, 1.0, grid.clone());
    let w = TwoPointModeTable::from_radial_kernel(&grid, l_max, 256, |d| kernel.w(d));
    let t_beta = GaussTBeta::new(&profile, 1.0, &w, l_max);
    (kernel, profile, w, t_beta)
}

fn gauss_f0_prime(r: f64) -> f64 {
    -2.0 * r * (-r * r).exp() / std::f64::consts::PI
}

/// 6. Gaussian case: T_β structure, the diffusion field, and the Cesàro
/// average of the oscillatory main term against (1/μ)div(A∇f°).
fn gaussian_case(effort: Effort) -> Result<CriterionOutcome> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut out = CriterionOutcome::new(6, "Gaussian (degenerate) case");
    let (kernel, profile, w, t_beta) = gaussian_setup(effort);
    let grid = &profile.grid;

    // T_β annihilates radial functions
    let vals: Vec<f64> = grid.r.iter().map(|&r| (-0.37 * r * r).exp()).collect();
    let radial = RadialModeField::from_radial(grid, w.l_max, &vals);
    let tr = t_beta.apply(&radial);
    let sup =
        tr.data.iter().flat_map(|m| m.iter()).fold(0.0f64, |a, c| a.max(c.norm()));
    out.check_le("T_β on radial input", sup, 1e-10);

    // self-adjointness on random pairs
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sa = 0.0f64;
    for _ in 0..10 {
        let mut h = RadialModeField::zeros(grid, w.l_max);
        let mut g = RadialModeField::zeros(grid, w.l_max);
        for l in -(w.l_max as i64)..=w.l_max as i64 {
            for i in 0..grid.len() {
                h.mode_mut(l)[i] =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                g.mode_mut(l)[i] =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let lhs = g.inner(&t_beta.apply(&h), &profile.mu);
        let rhs = t_beta.apply(&g).inner(&h, &profile.mu);
        let scale = h.norm(&profile.mu) * g.norm(&profile.mu);
        sa = sa.max((lhs - rhs).norm() / scale.max(1e-300));
    }
    out.check_le("T_β self-adjointness residual", sa, 1e-10);

    // diffusion field: A(0) = 0 and rotation equivariance
    let field = diffusion_field_gaussian(&kernel, &profile)?;
    let a0 = diffusion_field_direct(&kernel, &profile, [0.0, 0.0]);
    out.check_le("A(0)", a0.max_abs(), 1e-12);
    let mut eq = 0.0f64;
    for s in 0..4 {
        let r = grid.r[10 + 25 * s];
        let th = 0.7 + 1.3 * s as f64;
        let x = [r * th.cos(), r * th.sin()];
        let got = field.eval(x);
        let direct = diffusion_field_direct(&kernel, &profile, x);
        for a in 0..2 {
            for b in 0..2 {
                eq = eq.max((got.m[a][b] - direct.m[a][b]).abs());
            }
        }
    }
    out.check_le("rotation equivariance A(Ox) = OA(x)Oᵀ", eq, 1e-8);

    // Cesàro average of the main term vs (1/μ)div(A∇f°)
    let t_final = 200.0;
    let m0 = gaussian_main_term(&profile, &t_beta, &w, &gauss_f0_prime, &[0.0])?;
    let scale = profile.weighted_norm(&m0.values[0]);
    let ces = main_term_cesaro(&profile, &t_beta, &w, &gauss_f0_prime, t_final)?;
    // target: (1/μ)(1/r)d/dr(r·a_n(r)·f°'(r)) from the radial representation
    // (the tangential part annihilates radial gradients)
    let target: Vec<f64> = {
        let ran: Vec<f64> =
            grid.r.iter().zip(&field.normal).map(|(&r, &an)| r * an * gauss_f0_prime(r)).collect();
        let d = grid.derivative(&ran);
        (0..grid.len()).map(|i| d[i] / (grid.r[i] * profile.mu[i])).collect()
    };
    let diff: Vec<f64> = ces.iter().zip(&target).map(|(&c, &t)| c - t).collect();
    let dev = profile.weighted_norm(&diff);
    out.check_le("‖Cesàro(200) - (1/μ)div(A∇f°)‖_β / ‖m(0)‖_β", dev / scale, 0.02);
    Ok(out)
}

/// Shared non-Gaussian setup for criteria 7 and 8.
fn non_gaussian_profile(
    panels: usize,
    l_max: usize,
) -> Result<(PlaneKernel, EquilibriumProfile, TwoPointModeTable, crate::meanfield::RenormalizedPotential)>
{
    let grid = RadialGrid::gauss_legendre(5.5, panels, 8);
    let kernel = PlaneKernel::gaussian(1.0, 1.0)?;
    let v = ExternalPotential::Quartic { c2: 1.0, c4: 1.0 };
    let profile = solve_mu_beta(&v, Some(&kernel), 0.1, &grid, 1e-12, 300)?;
    let w = TwoPointModeTable::from_radial_kernel(&grid, l_max, 256, |d| kernel.w(d));
    let wb = renormalized_potential(&kernel, &w, &profile, 1e-12)?;
    Ok((kernel, profile, w, wb))
}

/// 7. Non-Gaussian coefficient a_β: positivity, ε-halving stability,
/// grid-doubling reproducibility, resolvent identity.
fn non_gaussian_coefficient(effort: Effort) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(7, "non-Gaussian coefficient a_β");
    let (panels, l_max) = match effort {
        Effort::Full => (24usize, 16usize),
        Effort::Fast => (16, 10),
    };
    let eps: &[f64] = &[1e-2, 5e-3, 2.5e-3];
    let (_, profile, w, wb) = non_gaussian_profile(panels, l_max)?;
    let field = compute_a_beta(&profile, &w, &wb, eps, l_max, 1e-2)?;
    out.check_le("min_r a_β(r) ≥ -1e-8 (deficit)", (-field.min_value()).max(0.0), 1e-8);
    out.check_decreasing("ε-halving stability gaps decrease", &field.gap_history);

    // grid doubling: change below the reported stability gap
    let (_, p2, w2, wb2) = non_gaussian_profile(2 * panels, l_max)?;
    let f2 = compute_a_beta(&p2, &w2, &wb2, eps, l_max, 1e-2)?;
    let mut change = 0.0f64;
    for (i, &r) in profile.grid.r.iter().enumerate() {
        change = change.max((field.a[i] - p2.grid.interp(&f2.a, r)).abs());
    }
    let gap = *field.gap_history.last().unwrap();
    out.check_le("grid-doubling change vs stability gap", change / gap, 1.0);

    // resolvent identity on a refined grid in the smooth-ω regime, plus the
    // exact diagonal identity with the coupling off
    let id_panels = match effort {
        Effort::Full => 160,
        Effort::Fast => 48,
    };
    let id_tol = match effort {
        Effort::Full => 1e-8,
        Effort::Fast => 1e-6,
    };
    let (_, pid, wid, _) = non_gaussian_profile(id_panels, 8)?;
    let g = &pid.grid;
    let n = g.len();
    let mut data = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let (r, s) = (g.r[i], g.r[j]);
            data[i * n + j] = Complex64::new(
                r * s * (-0.3 * (r * r + s * s)).exp(),
                0.1 * (r - s) * (-0.4 * (r * r + s * s)).exp(),
            );
        }
    }
    let src = TwoParticleField { grid: g.clone(), blocks: vec![((1, -1), data)] };
    let omega = Complex64::new(4.0, 0.0);
    let (psi, rep) = resolvent_l2(&pid, &wid, omega, &src, pid.beta)?;
    let back = apply_forward(&pid, &wid, omega, &psi, pid.beta);
    let (bb, hh) = (back.block(1, -1).unwrap(), src.block(1, -1).unwrap());
    let mut resid = 0.0f64;
    for i in 2..n - 2 {
        for j in 2..n - 2 {
            resid = resid.max((bb[i * n + j] - hh[i * n + j]).norm());
        }
    }
    out.check_le("resolvent identity residual (grid interior)", resid, id_tol);
    // Neumann ratios below 1 after the head of the series
    let ratios = rep.ratios();
    let worst_ratio = ratios.iter().skip(1).cloned().fold(0.0f64, f64::max);
    out.check_le("Neumann increment ratio", worst_ratio, 1.0);
    // coupling off: exact diagonal formula at small ε
    let eps_small = Complex64::new(2.5e-3, 0.0);
    let (psi0, _) = resolvent_l2(&pid, &wid, eps_small, &src, 0.0)?;
    let x = psi0.block(1, -1).unwrap();
    let h = src.block(1, -1).unwrap();
    let mut diag_dev = 0.0f64;
    for i in (0..n).step_by(13) {
        for j in (0..n).step_by(17) {
            let d = Complex64::new(0.0, pid.omega[i] - pid.omega[j]) + eps_small;
            diag_dev = diag_dev.max((x[i * n + j] - h[i * n + j] / d).norm());
        }
    }
    out.check_le("γ=0 diagonal resolvent exactness", diag_dev, 1e-13);
    Ok(out)
}

/// 8. Fokker–Planck H-theorem with the computed a_β.
fn fokker_planck(effort: Effort) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(8, "Fokker–Planck thermalization");
    let (panels, l_max, cells) = match effort {
        Effort::Full => (16usize, 12usize, 400usize),
        Effort::Fast => (12, 8, 200),
    };
    let (_, profile, w, wb) = non_gaussian_profile(panels, l_max)?;
    let field = compute_a_beta(&profile, &w, &wb, &[1e-2, 5e-3], l_max, 1e-2)?;
    let a_interp = {
        let grid = field.grid.clone();
        let a = field.a.clone();
        move |r: f64| grid.interp(&a, r).max(0.0)
    };
    let f0 = |r: f64| (-(r - 1.2) * (r - 1.2) / 0.08).exp();

    // H-theorem over 10³ implicit steps
    let dt = 1e-3;
    let taus: Vec<f64> = (1..=1000).map(|i| i as f64 * dt).collect();
    let sol = fp_evolve(&f0, &a_interp, &profile, &taus, cells, dt)?;
    let worst_increase = sol
        .weighted_norms
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(0.0f64, f64::max);
    out.check_le("‖f/μ‖_β increase per step over 10³ steps", worst_increase, 1e-12);
    let mass_drift = sol
        .masses
        .iter()
        .map(|&m| (m - sol.masses[0]).abs())
        .fold(0.0f64, f64::max);
    out.check_le("mass drift", mass_drift / sol.masses[0], 1e-10);

    // μ stationary to 1e-10
    let mu0 = profile.interp_mu(0.0);
    let feq = |r: f64| profile.interp_mu(r) / mu0;
    let sol_eq = fp_evolve(&feq, &a_interp, &profile, &[0.5, 1.0], cells, 1e-3)?;
    let drift = sol_eq.profiles[1]
        .iter()
        .zip(&sol_eq.profiles[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    out.check_le("equilibrium stationarity", drift, 1e-10);

    // τ → ∞ limit within 1e-4 of the (discrete, mass-matched) equilibrium.
    // The endpoint is the scheme's fixed point, so the tail is driven with
    // large implicit steps (unconditionally stable, contraction per step).
    let horizon = match effort {
        Effort::Full => 6000.0,
        Effort::Fast => 4000.0,
    };
    let sol_long = fp_evolve(&f0, &a_interp, &profile, &[horizon], cells, 10.0)?;
    let end = &sol_long.profiles[0];
    let mu_c: Vec<f64> = sol_long.r.iter().map(|&r| profile.interp_mu(r)).collect();
    let h = sol_long.r[1] - sol_long.r[0];
    let mu_mass: f64 = 2.0 * std::f64::consts::PI
        * mu_c.iter().zip(&sol_long.r).map(|(&m, &r)| m * r * h).sum::<f64>();
    let c = sol_long.masses[0] / mu_mass;
    let dev = end
        .iter()
        .zip(&mu_c)
        .map(|(&v, &m)| (v - c * m).abs())
        .fold(0.0f64, f64::max);
    out.check_le("τ→∞ deviation from equilibrium", dev, 1e-4);
    Ok(out)
}

/// 9. Mean-field solver: fixed-point residual and the W_β identity.
fn mean_field_solver() -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(9, "mean-field fixed point and W_β");
    let grid = RadialGrid::gauss_legendre(12.0, 24, 8);
    let kernel = PlaneKernel::gaussian(1.0, 1.0)?;
    let v = ExternalPotential::Harmonic { a: 1.0 };
    let profile = solve_mu_beta(&v, Some(&kernel), 0.4, &grid, 1e-11, 400)?;
    out.check_le(
        "fixed-point residual at β‖W‖ = 0.4",
        *profile.residuals.last().unwrap(),
        1e-10,
    );
    let w = TwoPointModeTable::from_radial_kernel(&grid, 8, 256, |d| kernel.w(d));
    let wb = renormalized_potential(&kernel, &w, &profile, 1e-12)?;
    let resid = renormalization_identity_residual(&wb, &w, &profile);
    out.check_le("W_β + βW_β∗W - W identity residual", resid, 1e-8);
    out.check(
        "mass normalization",
        profile.mass(),
        1.0,
        1e-10,
    );
    Ok(out)
}

/// Run a suite; returns the outcomes (callers print and set exit codes).
pub fn run_suite(effort: Effort) -> Result<Vec<CriterionOutcome>> {
    let ids: Vec<usize> = match effort {
        Effort::Full => CRITERIA.collect(),
        // fast: everything that finishes in seconds-to-a-minute
        Effort::Fast => vec![1, 4, 5, 6, 7, 8, 9],
    };
    let mut out = Vec::new();
    for id in ids {
        let c = criterion(id, effort)?;
        println!("{}", c.summary_line());
        for l in &c.lines {
            println!(
                "    {} measured {:.6e}, target {:.6e} ± {:.3e} → {}",
                l.name,
                l.measured,
                l.target,
                l.tolerance,
                if l.pass { "ok" } else { "FAIL" }
            );
        }
        out.push(c);
    }
    Ok(out)
}
