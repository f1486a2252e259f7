//! N-particle point-vortex dynamics with Gibbs or uniform initial data and
//! Fourier-moment estimation over parallel ensembles.
//!
//! Torus forces are evaluated through per-mode structure factors (exact for
//! the finite cosine tables used here, O(N·modes) per stage); plane forces by
//! direct O(N²) pair summation. Ensemble runs are bitwise reproducible for a
//! fixed seed regardless of thread count: per-sample RNG streams are derived
//! by counter-based splitting and chunk accumulators merge in index order.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::kernels::{ExternalPotential, PlaneKernel, TorusDensity, TorusKernel};
use crate::stats::ComplexWelford;
use crate::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Domain {
    Torus,
    Plane,
}

/// Positions of the tagged particle (index 0) and the background.
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub positions: Vec<[f64; 2]>,
    pub time: f64,
}

impl ParticleState {
    pub fn n(&self) -> usize {
        self.positions.len()
    }
}

/// The force environment of a run.
pub struct NBodySystem<'a> {
    pub domain: Domain,
    pub torus_kernel: Option<&'a TorusKernel>,
    pub plane_kernel: Option<&'a PlaneKernel>,
    pub external: Option<&'a ExternalPotential>,
}

impl<'a> NBodySystem<'a> {
    /// Translation-invariant torus system (no external force).
    pub fn torus(kernel: &'a TorusKernel) -> Self {
        NBodySystem { domain: Domain::Torus, torus_kernel: Some(kernel), plane_kernel: None, external: None }
    }

    pub fn plane(kernel: &'a PlaneKernel, external: &'a ExternalPotential) -> Self {
        NBodySystem {
            domain: Domain::Plane,
            torus_kernel: None,
            plane_kernel: Some(kernel),
            external: Some(external),
        }
    }

    /// dt_max = 0.05 / max(1, ‖∇K‖_∞ + ‖∇F‖_∞).
    pub fn dt_max(&self) -> f64 {
        let gk = self.torus_kernel.map_or(0.0, |k| k.grad_bound())
            + self.plane_kernel.map_or(0.0, |k| k.grad_bound());
        let gf = self.external.map_or(0.0, |v| v.grad_bound(20.0));
        0.05 / f64::max(1.0, gk + gf)
    }
}

/// Scratch buffers reused across integrator stages.
pub struct Workspace {
    k: [Vec<[f64; 2]>; 4],
    tmp: Vec<[f64; 2]>,
    trig: Vec<(f64, f64)>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace {
            k: std::array::from_fn(|_| vec![[0.0; 2]; n]),
            tmp: vec![[0.0; 2]; n],
            trig: vec![(0.0, 0.0); n],
        }
    }
}

/// Velocities ẋ_i = F(x_i) + (1/N)·Σ_j K(x_i - x_j) into `out`.
fn velocities(sys: &NBodySystem, pos: &[[f64; 2]], out: &mut [[f64; 2]], trig: &mut [(f64, f64)]) {
    let n = pos.len();
    let inv_n = 1.0 / n as f64;
    for v in out.iter_mut() {
        *v = [0.0, 0.0];
    }
    if let Some(k) = sys.torus_kernel {
        for &(kv, a) in k.cosine_pairs() {
            let (k0, k1) = (kv[0] as f64, kv[1] as f64);
            let mut c_sum = 0.0;
            let mut s_sum = 0.0;
            for (i, p) in pos.iter().enumerate() {
                let (s, c) = (k0 * p[0] + k1 * p[1]).sin_cos();
                trig[i] = (s, c);
                c_sum += c;
                s_sum += s;
            }
            // Σ_j sin(k·(x_i - x_j)) = sin(k·x_i)·C - cos(k·x_i)·S
            let (p0, p1) = (-k1, k0);
            for (v, &(s, c)) in out.iter_mut().zip(trig.iter()) {
                let f = a * inv_n * (s * c_sum - c * s_sum);
                v[0] += p0 * f;
                v[1] += p1 * f;
            }
        }
    }
    if let Some(k) = sys.plane_kernel {
        for i in 0..n {
            for j in 0..i {
                let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                let f = k.eval_force(d);
                out[i][0] += inv_n * f[0];
                out[i][1] += inv_n * f[1];
                out[j][0] -= inv_n * f[0];
                out[j][1] -= inv_n * f[1];
            }
        }
    }
    if let Some(v) = sys.external {
        for (o, p) in out.iter_mut().zip(pos) {
            let f = v.eval_force(*p);
            o[0] += f[0];
            o[1] += f[1];
        }
    }
}

/// One classical RK4 step; torus coordinates are reduced to [0, 2π) after
/// the step.
pub fn rk4_step(state: &mut ParticleState, dt: f64, sys: &NBodySystem, ws: &mut Workspace) -> Result<()> {
    let n = state.n();
    let pos = &mut state.positions;
    let stages = [0.0, 0.5 * dt, 0.5 * dt, dt];
    for s in 0..4 {
        if s == 0 {
            ws.tmp.copy_from_slice(pos);
        } else {
            for i in 0..n {
                ws.tmp[i][0] = pos[i][0] + stages[s] * ws.k[s - 1][i][0];
                ws.tmp[i][1] = pos[i][1] + stages[s] * ws.k[s - 1][i][1];
            }
        }
        let Workspace { k, tmp, trig } = ws;
        velocities(sys, tmp, &mut k[s], trig);
    }
    for i in 0..n {
        for c in 0..2 {
            pos[i][c] += dt / 6.0
                * (ws.k[0][i][c] + 2.0 * ws.k[1][i][c] + 2.0 * ws.k[2][i][c] + ws.k[3][i][c]);
            if !pos[i][c].is_finite() {
                return Err(Error::Integration(format!("non-finite position at particle {i}")));
            }
        }
        if sys.domain == Domain::Torus {
            pos[i][0] = pos[i][0].rem_euclid(TAU);
            pos[i][1] = pos[i][1].rem_euclid(TAU);
        }
    }
    state.time += dt;
    Ok(())
}

/// Integrate to `t_end` with uniform sub-steps of size ≤ dt.
pub fn integrate_to(
    state: &mut ParticleState,
    t_end: f64,
    dt: f64,
    sys: &NBodySystem,
    ws: &mut Workspace,
) -> Result<()> {
    let span = t_end - state.time;
    if span <= 0.0 {
        return Ok(());
    }
    let steps = (span / dt).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    for _ in 0..steps {
        rk4_step(state, h, sys, ws)?;
    }
    state.time = t_end;
    Ok(())
}

/// Conserved energy H = Σ V(x_i) + (1/2N)·Σ_{i,j} W(x_i - x_j)
/// (diagonal included, matching the Gibbs exponent).
pub fn hamiltonian(state: &ParticleState, sys: &NBodySystem) -> f64 {
    let n = state.n() as f64;
    let pos = &state.positions;
    let mut h = 0.0;
    if let Some(v) = sys.external {
        h += pos.iter().map(|p| v.v((p[0] * p[0] + p[1] * p[1]).sqrt())).sum::<f64>();
    }
    if let Some(k) = sys.torus_kernel {
        for &(kv, a) in k.cosine_pairs() {
            let (k0, k1) = (kv[0] as f64, kv[1] as f64);
            let mut c_sum = 0.0;
            let mut s_sum = 0.0;
            for p in pos {
                let (s, c) = (k0 * p[0] + k1 * p[1]).sin_cos();
                c_sum += c;
                s_sum += s;
            }
            h += a / (2.0 * n) * (c_sum * c_sum + s_sum * s_sum);
        }
    }
    if let Some(k) = sys.plane_kernel {
        let mut acc = 0.0;
        for (i, pi) in pos.iter().enumerate() {
            acc += k.w(0.0); // diagonal term of the double sum
            for pj in pos.iter().take(i) {
                let d = ((pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2)).sqrt();
                acc += 2.0 * k.w(d);
            }
        }
        h += acc / (2.0 * n);
    }
    h
}

/// Initial background law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialKind {
    /// Background i.i.d. uniform on the torus.
    UniformBackground,
    /// Background from the restricted Gibbs measure via Metropolis.
    GibbsBackground,
}

/// Tagged-particle initial density.
pub enum TaggedDensity<'a> {
    Torus(&'a TorusDensity),
    /// Radial plane density; `bound` must dominate sup f°.
    PlaneRadial { eval: &'a (dyn Fn(f64) -> f64 + Sync), r_max: f64, bound: f64 },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SamplerStats {
    pub burn_in_proposals: usize,
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    pub warnings: Vec<String>,
}

/// Draw the tagged particle from f° and the background from the requested
/// ensemble.
pub fn sample_initial(
    kind: InitialKind,
    tagged: &TaggedDensity,
    sys: &NBodySystem,
    beta: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(ParticleState, SamplerStats)> {
    if n < 1 {
        return Err(Error::Sampler("need at least one particle".into()));
    }
    let mut stats = SamplerStats::default();
    let mut positions = vec![[0.0; 2]; n];

    match (kind, sys.domain) {
        (InitialKind::UniformBackground, Domain::Torus) => {
            for p in positions.iter_mut().skip(1) {
                *p = [rng.random::<f64>() * TAU, rng.random::<f64>() * TAU];
            }
        }
        (InitialKind::UniformBackground, Domain::Plane) => {
            return Err(Error::Sampler("uniform background is not normalizable on the plane".into()));
        }
        (InitialKind::GibbsBackground, domain) => {
            if domain == Domain::Plane && beta == 0.0 {
                return Err(Error::Sampler("β = 0 Gibbs background is improper on the plane".into()));
            }
            metropolis_background(&mut positions[1..], sys, beta, rng, &mut stats)?;
        }
    }

    positions[0] = sample_tagged(tagged, rng)?;
    Ok((ParticleState { positions, time: 0.0 }, stats))
}

fn sample_tagged(tagged: &TaggedDensity, rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
    match tagged {
        TaggedDensity::Torus(f) => {
            let bound = f.sup_bound();
            loop {
                let x = [rng.random::<f64>() * TAU, rng.random::<f64>() * TAU];
                let v = f.eval(x);
                if v > bound * (1.0 + 1e-12) {
                    return Err(Error::Sampler(format!(
                        "rejection bound violated: f°(x) = {v} > bound {bound}"
                    )));
                }
                if rng.random::<f64>() * bound < v {
                    return Ok(x);
                }
            }
        }
        TaggedDensity::PlaneRadial { eval, r_max, bound } => loop {
            let x = [
                (rng.random::<f64>() * 2.0 - 1.0) * r_max,
                (rng.random::<f64>() * 2.0 - 1.0) * r_max,
            ];
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r > *r_max {
                continue;
            }
            let v = eval(r);
            if v > bound * (1.0 + 1e-12) {
                return Err(Error::Sampler(format!(
                    "rejection bound violated: f°({r}) = {v} > bound {bound}"
                )));
            }
            if rng.random::<f64>() * bound < v {
                return Ok(x);
            }
        },
    }
}

/// Single-site Metropolis for the restricted Gibbs background
/// ∝ exp[-β(Σ V(x_i) + (1/2N)·Σ_{ij} W(x_i-x_j))] over background indices.
/// The proposal scale is auto-tuned toward ~40% acceptance during a burn-in
/// of 100·N proposals.
fn metropolis_background(
    bg: &mut [[f64; 2]],
    sys: &NBodySystem,
    beta: f64,
    rng: &mut ChaCha8Rng,
    stats: &mut SamplerStats,
) -> Result<()> {
    let m = bg.len();
    if m == 0 {
        return Ok(());
    }
    let n_total = m + 1;

    // initialization: torus uniform; plane i.i.d. ∝ e^{-βV} by inverse CDF
    match sys.domain {
        Domain::Torus => {
            for p in bg.iter_mut() {
                *p = [rng.random::<f64>() * TAU, rng.random::<f64>() * TAU];
            }
        }
        Domain::Plane => {
            let v = sys.external.ok_or_else(|| {
                Error::Sampler("plane Gibbs background needs an external potential".into())
            })?;
            let n_tab = 4096;
            let mut r_cut: f64 = 1.0;
            while beta * (v.v(r_cut) - v.v(0.0)) < 40.0 && r_cut < 1e4 {
                r_cut *= 1.25;
            }
            let mut cdf = vec![0.0; n_tab + 1];
            let h = r_cut / n_tab as f64;
            for i in 0..n_tab {
                let r = (i as f64 + 0.5) * h;
                cdf[i + 1] = cdf[i] + (-beta * (v.v(r) - v.v(0.0))).exp() * r * h;
            }
            let total = cdf[n_tab];
            for p in bg.iter_mut() {
                let u = rng.random::<f64>() * total;
                let j = cdf.partition_point(|&c| c < u).clamp(1, n_tab);
                let t = (u - cdf[j - 1]) / (cdf[j] - cdf[j - 1]).max(1e-300);
                let r = (j as f64 - 1.0 + t) * h;
                let th = rng.random::<f64>() * TAU;
                *p = [r * th.cos(), r * th.sin()];
            }
        }
    }

    let pair_w = |a: [f64; 2], b: [f64; 2]| -> f64 {
        match sys.domain {
            Domain::Torus => sys.torus_kernel.map_or(0.0, |k| k.eval_w([a[0] - b[0], a[1] - b[1]])),
            Domain::Plane => sys.plane_kernel.map_or(0.0, |k| {
                k.w(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            }),
        }
    };
    let ext_v = |a: [f64; 2]| -> f64 {
        sys.external.map_or(0.0, |v| v.v((a[0] * a[0] + a[1] * a[1]).sqrt()))
    };

    let burn_in = 100 * m;
    let mut scale: f64 = match sys.domain {
        Domain::Torus => 1.0,
        Domain::Plane => 0.5,
    };
    let mut accepted_batch = 0usize;
    let mut proposed_batch = 0usize;
    let mut accepted_tail = 0usize;
    let mut proposed_tail = 0usize;

    for step in 0..burn_in {
        let i = rng.random_range(0..m);
        let old = bg[i];
        let mut new = old;
        {
            // isotropic Gaussian move (Box–Muller)
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random::<f64>();
            let r = (-2.0 * u1.ln()).sqrt();
            new[0] += scale * r * (TAU * u2).cos();
            new[1] += scale * r * (TAU * u2).sin();
        }
        if sys.domain == Domain::Torus {
            new[0] = new[0].rem_euclid(TAU);
            new[1] = new[1].rem_euclid(TAU);
        }
        let mut de = ext_v(new) - ext_v(old);
        let mut dw = 0.0;
        for (j, p) in bg.iter().enumerate() {
            if j != i {
                dw += pair_w(new, *p) - pair_w(old, *p);
            }
        }
        de += dw / n_total as f64;
        let accept = de <= 0.0 || rng.random::<f64>() < (-beta * de).exp();
        if accept {
            bg[i] = new;
        }
        proposed_batch += 1;
        accepted_batch += accept as usize;
        if step >= burn_in / 2 {
            proposed_tail += 1;
            accepted_tail += accept as usize;
        }
        if proposed_batch >= m && step < burn_in / 2 {
            let acc = accepted_batch as f64 / proposed_batch as f64;
            scale = (scale * (acc - 0.4).exp()).clamp(1e-3, 10.0);
            accepted_batch = 0;
            proposed_batch = 0;
        }
    }

    stats.burn_in_proposals = burn_in;
    stats.proposal_scale = scale;
    stats.acceptance_rate =
        if proposed_tail > 0 { accepted_tail as f64 / proposed_tail as f64 } else { 1.0 };
    if stats.acceptance_rate < 0.1 || stats.acceptance_rate > 0.9 {
        stats.warnings.push(format!(
            "Metropolis acceptance {:.2} outside [0.1, 0.9] after tuning (scale {:.3e})",
            stats.acceptance_rate, scale
        ));
    }
    Ok(())
}

/// Ensemble configuration; observables are Fourier modes of the tagged
/// particle and of tagged-background pairs/triples.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_grid: Vec<f64>,
    pub single_modes: Vec<[i64; 2]>,
    pub pair_modes: Vec<([i64; 2], [i64; 2])>,
    pub triple_modes: Vec<([i64; 2], [i64; 2], [i64; 2])>,
    pub initial: InitialKind,
    pub beta: f64,
    pub track_hamiltonian: bool,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ComplexStat {
    pub re: f64,
    pub im: f64,
    pub se_re: f64,
    pub se_im: f64,
}

/// Ensemble moment estimates. Pair moments are averaged over background
/// indices j ≥ 2, triples over ordered pairs of distinct background indices.
#[derive(Debug, Clone, Serialize)]
pub struct MomentEstimates {
    pub n_particles: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub single_modes: Vec<[i64; 2]>,
    /// single[mode][time]
    pub single: Vec<Vec<ComplexStat>>,
    pub pair_modes: Vec<([i64; 2], [i64; 2])>,
    pub pair: Vec<Vec<ComplexStat>>,
    pub triple_modes: Vec<([i64; 2], [i64; 2], [i64; 2])>,
    pub triple: Vec<Vec<ComplexStat>>,
    /// Hamiltonian (mean, se) per output time.
    pub hamiltonian: Vec<(f64, f64)>,
    pub mean_acceptance: f64,
    pub sampler_warnings: Vec<String>,
}

impl MomentEstimates {
    /// Artifact form: {meta, times, moments: [{k, re[], im[], se_re[], se_im[]}],
    /// pair_moments, triple_moments, hamiltonian}.
    pub fn to_artifact(&self) -> serde_json::Value {
        let series = |stats: &Vec<Vec<ComplexStat>>, i: usize| {
            serde_json::json!({
                "re": stats[i].iter().map(|s| s.re).collect::<Vec<_>>(),
                "im": stats[i].iter().map(|s| s.im).collect::<Vec<_>>(),
                "se_re": stats[i].iter().map(|s| s.se_re).collect::<Vec<_>>(),
                "se_im": stats[i].iter().map(|s| s.se_im).collect::<Vec<_>>(),
            })
        };
        let mut moments = Vec::new();
        for (i, k) in self.single_modes.iter().enumerate() {
            let mut v = series(&self.single, i);
            v["k"] = serde_json::json!(k);
            moments.push(v);
        }
        let mut pairs = Vec::new();
        for (i, (k, l)) in self.pair_modes.iter().enumerate() {
            let mut v = series(&self.pair, i);
            v["k"] = serde_json::json!(k);
            v["l"] = serde_json::json!(l);
            pairs.push(v);
        }
        let mut triples = Vec::new();
        for (i, (k, l1, l2)) in self.triple_modes.iter().enumerate() {
            let mut v = series(&self.triple, i);
            v["k"] = serde_json::json!(k);
            v["l1"] = serde_json::json!(l1);
            v["l2"] = serde_json::json!(l2);
            triples.push(v);
        }
        serde_json::json!({
            "meta": {
                "n_particles": self.n_particles,
                "n_samples": self.n_samples,
                "seed": self.seed,
                "dt": self.dt,
                "mean_acceptance": self.mean_acceptance,
                "sampler_warnings": self.sampler_warnings,
            },
            "times": self.times,
            "moments": moments,
            "pair_moments": pairs,
            "triple_moments": triples,
            "hamiltonian": self.hamiltonian,
        })
    }

    pub fn single_at(&self, k: [i64; 2], ti: usize) -> Option<ComplexStat> {
        self.single_modes.iter().position(|&m| m == k).map(|i| self.single[i][ti])
    }

    pub fn pair_at(&self, k: [i64; 2], l: [i64; 2], ti: usize) -> Option<ComplexStat> {
        self.pair_modes.iter().position(|&m| m == (k, l)).map(|i| self.pair[i][ti])
    }

    pub fn triple_at(&self, k: [i64; 2], l1: [i64; 2], l2: [i64; 2], ti: usize) -> Option<ComplexStat> {
        self.triple_modes.iter().position(|&m| m == (k, l1, l2)).map(|i| self.triple[i][ti])
    }
}

#[derive(Clone)]
struct Accumulator {
    single: Vec<Vec<ComplexWelford>>,
    pair: Vec<Vec<ComplexWelford>>,
    triple: Vec<Vec<ComplexWelford>>,
    ham: Vec<crate::stats::Welford>,
    acceptance: crate::stats::Welford,
    warnings: Vec<String>,
}

impl Accumulator {
    fn new(cfg: &EnsembleConfig) -> Self {
        let nt = cfg.t_grid.len();
        Accumulator {
            single: vec![vec![ComplexWelford::default(); nt]; cfg.single_modes.len()],
            pair: vec![vec![ComplexWelford::default(); nt]; cfg.pair_modes.len()],
            triple: vec![vec![ComplexWelford::default(); nt]; cfg.triple_modes.len()],
            ham: vec![crate::stats::Welford::default(); nt],
            acceptance: crate::stats::Welford::default(),
            warnings: vec![],
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        for (a, b) in self.single.iter_mut().zip(&o.single) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        for (a, b) in self.pair.iter_mut().zip(&o.pair) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        for (a, b) in self.triple.iter_mut().zip(&o.triple) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        for (x, y) in self.ham.iter_mut().zip(&o.ham) {
            x.merge(y);
        }
        self.acceptance.merge(&o.acceptance);
        if self.warnings.len() < 16 {
            self.warnings.extend(o.warnings.iter().cloned());
            self.warnings.truncate(16);
        }
    }
}

/// Union of background modes needed by pair/triple estimators.
fn background_modes(cfg: &EnsembleConfig) -> Vec<[i64; 2]> {
    let mut set: Vec<[i64; 2]> = Vec::new();
    let push = |k: [i64; 2], set: &mut Vec<[i64; 2]>| {
        if k != [0, 0] && !set.contains(&k) {
            set.push(k);
        }
    };
    for &(_, l) in &cfg.pair_modes {
        push(l, &mut set);
    }
    for &(_, l1, l2) in &cfg.triple_modes {
        push(l1, &mut set);
        push(l2, &mut set);
        push([l1[0] + l2[0], l1[1] + l2[1]], &mut set);
    }
    set
}

/// Run S independent samples and accumulate moments.
pub fn run_ensemble(
    cfg: &EnsembleConfig,
    sys: &NBodySystem,
    tagged: &TaggedDensity,
) -> Result<MomentEstimates> {
    if cfg.t_grid.windows(2).any(|w| w[1] <= w[0]) || cfg.t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Config("t_grid must be increasing and nonnegative".into()));
    }
    let dt_max = sys.dt_max();
    if cfg.dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::Config(format!("dt = {} exceeds dt_max = {dt_max:.4}", cfg.dt)));
    }
    let bg_modes = background_modes(cfg);
    let n_chunks = 256.min(cfg.n_samples.max(1));
    let bounds: Vec<(usize, usize)> = (0..n_chunks)
        .map(|c| (c * cfg.n_samples / n_chunks, (c + 1) * cfg.n_samples / n_chunks))
        .collect();

    let chunk_results: Vec<Result<Accumulator>> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = Accumulator::new(cfg);
            let mut ws = Workspace::new(cfg.n_particles);
            for s in lo..hi {
                run_sample(cfg, sys, tagged, s as u64, &bg_modes, &mut ws, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();

    let mut total = Accumulator::new(cfg);
    for r in chunk_results {
        total.merge(&r?);
    }

    let to_stats = |w: &Vec<Vec<ComplexWelford>>| -> Vec<Vec<ComplexStat>> {
        w.iter()
            .map(|row| {
                row.iter()
                    .map(|c| ComplexStat {
                        re: c.re.mean,
                        im: c.im.mean,
                        se_re: c.re.se(),
                        se_im: c.im.se(),
                    })
                    .collect()
            })
            .collect()
    };

    Ok(MomentEstimates {
        n_particles: cfg.n_particles,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        dt: cfg.dt,
        times: cfg.t_grid.clone(),
        single_modes: cfg.single_modes.clone(),
        single: to_stats(&total.single),
        pair_modes: cfg.pair_modes.clone(),
        pair: to_stats(&total.pair),
        triple_modes: cfg.triple_modes.clone(),
        triple: to_stats(&total.triple),
        hamiltonian: total.ham.iter().map(|w| (w.mean, w.se())).collect(),
        mean_acceptance: if total.acceptance.count > 0 { total.acceptance.mean } else { 1.0 },
        sampler_warnings: total.warnings,
    })
}

fn run_sample(
    cfg: &EnsembleConfig,
    sys: &NBodySystem,
    tagged: &TaggedDensity,
    sample: u64,
    bg_modes: &[[i64; 2]],
    ws: &mut Workspace,
    acc: &mut Accumulator,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(sample + 1);
    let (mut state, stats) =
        sample_initial(cfg.initial, tagged, sys, cfg.beta, cfg.n_particles, &mut rng)?;
    if cfg.initial == InitialKind::GibbsBackground {
        acc.acceptance.push(stats.acceptance_rate);
        if acc.warnings.len() < 16 {
            acc.warnings.extend(stats.warnings);
            acc.warnings.truncate(16);
        }
    }
    let n = cfg.n_particles;
    let mut bg_sums = vec![Complex64::ZERO; bg_modes.len()];
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        integrate_to(&mut state, t, cfg.dt, sys, ws)
            .map_err(|e| Error::Integration(format!("{e} (sample {sample})")))?;
        let x1 = state.positions[0];
        // background structure sums B_l = Σ_{j≥2} e^{-i l·x_j}
        for (b, &l) in bg_sums.iter_mut().zip(bg_modes) {
            let mut re = 0.0;
            let mut im = 0.0;
            for p in &state.positions[1..] {
                let (s, c) = (l[0] as f64 * p[0] + l[1] as f64 * p[1]).sin_cos();
                re += c;
                im -= s;
            }
            *b = Complex64::new(re, im);
        }
        let phase = |k: [i64; 2]| -> Complex64 {
            let (s, c) = (k[0] as f64 * x1[0] + k[1] as f64 * x1[1]).sin_cos();
            Complex64::new(c, -s)
        };
        let bsum = |l: [i64; 2]| -> Complex64 {
            if l == [0, 0] {
                Complex64::new((n - 1) as f64, 0.0)
            } else {
                bg_sums[bg_modes.iter().position(|&m| m == l).unwrap()]
            }
        };
        for (mi, &k) in cfg.single_modes.iter().enumerate() {
            let z = phase(k);
            acc.single[mi][ti].push(z.re, z.im);
        }
        for (mi, &(k, l)) in cfg.pair_modes.iter().enumerate() {
            let z = phase(k) * bsum(l) / (n - 1) as f64;
            acc.pair[mi][ti].push(z.re, z.im);
        }
        for (mi, &(k, l1, l2)) in cfg.triple_modes.iter().enumerate() {
            let cross = bsum(l1) * bsum(l2) - bsum([l1[0] + l2[0], l1[1] + l2[1]]);
            let z = phase(k) * cross / ((n - 1) * (n - 2).max(1)) as f64;
            acc.triple[mi][ti].push(z.re, z.im);
        }
        if cfg.track_hamiltonian {
            acc.ham[ti].push(hamiltonian(&state, sys));
        }
    }
    Ok(())
}

/// Monte Carlo time-stencil estimates of ∂_t² and ∂_t³ of f̂¹(k) at t = 0.
///
/// Differences are formed per sample before averaging, so the correlation
/// between stencil nodes reduces the variance instead of inflating the
/// reported error. ∂_t f̂¹|₀ = ∂_t³ f̂¹|₀ = 0 makes f̂¹ even in t to O(t⁵);
/// the second difference therefore uses the mirrored stencil
/// 2(f(h) - f(0))/h², and the third uses the one-sided cube stencil.
#[derive(Debug, Clone, Serialize)]
pub struct StencilEstimates {
    pub d2: ComplexStat,
    pub d3: ComplexStat,
    pub h: f64,
}

pub fn run_stencil_ensemble(
    cfg: &EnsembleConfig,
    sys: &NBodySystem,
    tagged: &TaggedDensity,
    k: [i64; 2],
    h: f64,
) -> Result<StencilEstimates> {
    if h < 5.0 * cfg.dt {
        return Err(Error::Config(format!(
            "stencil spacing h = {h} must be ≥ 5·dt = {}",
            5.0 * cfg.dt
        )));
    }
    let n_chunks = 256.min(cfg.n_samples.max(1));
    let bounds: Vec<(usize, usize)> = (0..n_chunks)
        .map(|c| (c * cfg.n_samples / n_chunks, (c + 1) * cfg.n_samples / n_chunks))
        .collect();
    let results: Vec<Result<(ComplexWelford, ComplexWelford)>> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc2 = ComplexWelford::default();
            let mut acc3 = ComplexWelford::default();
            let mut ws = Workspace::new(cfg.n_particles);
            for s in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(s as u64 + 1);
                let (mut state, _) =
                    sample_initial(cfg.initial, tagged, sys, cfg.beta, cfg.n_particles, &mut rng)?;
                let mut z = [Complex64::ZERO; 4];
                for (step, zv) in z.iter_mut().enumerate() {
                    integrate_to(&mut state, step as f64 * h, cfg.dt, sys, &mut ws)?;
                    let x1 = state.positions[0];
                    let (si, co) = (k[0] as f64 * x1[0] + k[1] as f64 * x1[1]).sin_cos();
                    *zv = Complex64::new(co, -si);
                }
                let d2 = 2.0 * (z[1] - z[0]) / (h * h);
                let d3 = (-z[0] + 3.0 * z[1] - 3.0 * z[2] + z[3]) / (h * h * h);
                acc2.push(d2.re, d2.im);
                acc3.push(d3.re, d3.im);
            }
            Ok((acc2, acc3))
        })
        .collect();
    let mut d2 = ComplexWelford::default();
    let mut d3 = ComplexWelford::default();
    for r in results {
        let (a, b) = r?;
        d2.merge(&a);
        d3.merge(&b);
    }
    let stat = |w: &ComplexWelford| ComplexStat {
        re: w.re.mean,
        im: w.im.mean,
        se_re: w.re.se(),
        se_im: w.im.se(),
    };
    Ok(StencilEstimates { d2: stat(&d2), d3: stat(&d3), h })
}
