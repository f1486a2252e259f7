//! Cluster expansion: marginals from ensemble moments, Möbius inversion to
//! correlation functions (cumulants), N-scaling fits, and the exact
//! short-time derivative oracles of the uniform setting.
//!
//! Mode conventions: a level-m tensor carries the tagged mode k in slot 0 and
//! background modes in slots 1..m. Correlations vanish whenever a background
//! slot carries the zero mode (mean-zero constraint), which makes the
//! inversion triangular in mode space.

use serde::Serialize;

use crate::kernels::{TorusDensity, TorusKernel};
use crate::nbody::{ComplexStat, MomentEstimates};
use crate::stats::weighted_line_fit;
use crate::{Error, Result};

/// Marginal mode tensors f̂^m at one output time.
#[derive(Debug, Clone, Serialize)]
pub struct Marginals {
    pub n_particles: usize,
    pub time: f64,
    pub m1: Vec<([i64; 2], ComplexStat)>,
    pub m2: Vec<(([i64; 2], [i64; 2]), ComplexStat)>,
    pub m3: Vec<(([i64; 2], [i64; 2], [i64; 2]), ComplexStat)>,
}

impl Marginals {
    fn f1(&self, k: [i64; 2]) -> Option<ComplexStat> {
        if k == [0, 0] {
            return Some(ComplexStat { re: 1.0, im: 0.0, se_re: 0.0, se_im: 0.0 });
        }
        self.m1.iter().find(|(m, _)| *m == k).map(|&(_, s)| s)
    }

    fn f2(&self, k: [i64; 2], l: [i64; 2]) -> Option<ComplexStat> {
        self.m2.iter().find(|(m, _)| *m == (k, l)).map(|&(_, s)| s)
    }
}

/// Extract marginal tensors from ensemble moments at output time `ti`:
/// f̂¹(k) = Ê[e^{-ik·x₁}], f̂²(k,l) the background-averaged pair moment, and
/// f̂³ the triple analogue.
pub fn marginals_from_moments(est: &MomentEstimates, ti: usize, m_max: usize) -> Result<Marginals> {
    if ti >= est.times.len() {
        return Err(Error::MissingModes(format!("time index {ti} out of range")));
    }
    let m1 = est
        .single_modes
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, est.single[i][ti]))
        .collect();
    let m2 = if m_max >= 2 {
        est.pair_modes.iter().enumerate().map(|(i, &kl)| (kl, est.pair[i][ti])).collect()
    } else {
        vec![]
    };
    let m3 = if m_max >= 3 {
        est.triple_modes.iter().enumerate().map(|(i, &m)| (m, est.triple[i][ti])).collect()
    } else {
        vec![]
    };
    Ok(Marginals { n_particles: est.n_particles, time: est.times[ti], m1, m2, m3 })
}

/// Correlation (cumulant) mode tensor at one level and time.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationEstimate {
    pub level: usize,
    pub time: f64,
    pub n_particles: usize,
    /// mode tuples, slot 0 tagged; values aligned with `modes`.
    pub modes: Vec<Vec<[i64; 2]>>,
    pub values: Vec<ComplexStat>,
}

impl CorrelationEstimate {
    pub fn value_at(&self, modes: &[[i64; 2]]) -> Option<ComplexStat> {
        self.modes.iter().position(|m| m == modes).map(|i| self.values[i])
    }

    /// Debiased ℓ² norm over retained modes with a delta-method standard
    /// error: ‖g‖² = Σ max(0, |z|² - se²).
    pub fn l2_norm_debiased(&self) -> (f64, f64) {
        let mut n2 = 0.0;
        let mut var_n2 = 0.0;
        for v in &self.values {
            n2 += (v.re * v.re + v.im * v.im - v.se_re * v.se_re - v.se_im * v.se_im).max(0.0);
            var_n2 += 4.0 * (v.re * v.re * v.se_re * v.se_re + v.im * v.im * v.se_im * v.se_im);
        }
        let norm = n2.sqrt();
        let se = if norm > 0.0 { var_n2.sqrt() / (2.0 * norm) } else { var_n2.sqrt().sqrt() };
        (norm, se)
    }
}

fn sub(a: ComplexStat, b: ComplexStat) -> ComplexStat {
    ComplexStat {
        re: a.re - b.re,
        im: a.im - b.im,
        se_re: (a.se_re * a.se_re + b.se_re * b.se_re).sqrt(),
        se_im: (a.se_im * a.se_im + b.se_im * b.se_im).sqrt(),
    }
}

fn add(a: ComplexStat, b: ComplexStat) -> ComplexStat {
    ComplexStat {
        re: a.re + b.re,
        im: a.im + b.im,
        se_re: (a.se_re * a.se_re + b.se_re * b.se_re).sqrt(),
        se_im: (a.se_im * a.se_im + b.se_im * b.se_im).sqrt(),
    }
}

const ZERO_STAT: ComplexStat = ComplexStat { re: 0.0, im: 0.0, se_re: 0.0, se_im: 0.0 };

/// Möbius inversion of the cluster expansion in mode space, up to level
/// `m_max` ≤ 3:
///   ĝ²(k,l)      = f̂²(k,l)      - f̂¹(k)·1_{l=0}
///   ĝ³(k,l₁,l₂) = f̂³(k,l₁,l₂) - f̂²(k,l₁)·1_{l₂=0} - f̂²(k,l₂)·1_{l₁=0}
///                                + f̂¹(k)·1_{l₁=0}·1_{l₂=0}
pub fn invert_cluster(marg: &Marginals, m_max: usize) -> Result<Vec<CorrelationEstimate>> {
    let mut out = Vec::new();
    let mut missing: Vec<String> = Vec::new();

    // level 1: g¹ = f¹ (uniform background, density ratio trivial)
    let g1 = CorrelationEstimate {
        level: 1,
        time: marg.time,
        n_particles: marg.n_particles,
        modes: marg.m1.iter().map(|&(k, _)| vec![k]).collect(),
        values: marg.m1.iter().map(|&(_, v)| v).collect(),
    };
    out.push(g1);

    if m_max >= 2 {
        let mut modes = Vec::new();
        let mut values = Vec::new();
        for &((k, l), f2) in &marg.m2 {
            let v = if l == [0, 0] {
                match marg.f1(k) {
                    Some(f1) => sub(f2, f1),
                    None => {
                        missing.push(format!("f¹{k:?}"));
                        ZERO_STAT
                    }
                }
            } else {
                f2
            };
            modes.push(vec![k, l]);
            values.push(v);
        }
        out.push(CorrelationEstimate {
            level: 2,
            time: marg.time,
            n_particles: marg.n_particles,
            modes,
            values,
        });
    }

    if m_max >= 3 {
        let mut modes = Vec::new();
        let mut values = Vec::new();
        for &((k, l1, l2), f3) in &marg.m3 {
            let mut v = f3;
            if l2 == [0, 0] {
                match marg.f2(k, l1) {
                    Some(f2) => v = sub(v, f2),
                    None => missing.push(format!("f²({k:?},{l1:?})")),
                }
            }
            if l1 == [0, 0] {
                match marg.f2(k, l2) {
                    Some(f2) => v = sub(v, f2),
                    None => missing.push(format!("f²({k:?},{l2:?})")),
                }
            }
            if l1 == [0, 0] && l2 == [0, 0] {
                match marg.f1(k) {
                    Some(f1) => v = add(v, f1),
                    None => missing.push(format!("f¹{k:?}")),
                }
            }
            modes.push(vec![k, l1, l2]);
            values.push(v);
        }
        out.push(CorrelationEstimate {
            level: 3,
            time: marg.time,
            n_particles: marg.n_particles,
            modes,
            values,
        });
    }

    if !missing.is_empty() {
        missing.dedup();
        return Err(Error::MissingModes(missing.join(", ")));
    }
    Ok(out)
}

/// Cluster expansion (the inverse of [`invert_cluster`]); used as the
/// roundtrip oracle in tests and to synthesize marginals from planted
/// correlation tensors.
pub fn expand_cluster(
    g1: &[([i64; 2], ComplexStat)],
    g2: &[(([i64; 2], [i64; 2]), ComplexStat)],
    g3: &[(([i64; 2], [i64; 2], [i64; 2]), ComplexStat)],
    n_particles: usize,
    time: f64,
) -> Marginals {
    let find1 = |k: [i64; 2]| -> ComplexStat {
        if k == [0, 0] {
            ComplexStat { re: 1.0, im: 0.0, se_re: 0.0, se_im: 0.0 }
        } else {
            g1.iter().find(|(m, _)| *m == k).map_or(ZERO_STAT, |&(_, v)| v)
        }
    };
    let find2 = |k: [i64; 2], l: [i64; 2]| -> ComplexStat {
        g2.iter().find(|(m, _)| *m == (k, l)).map_or(ZERO_STAT, |&(_, v)| v)
    };
    let m1 = g1.to_vec();
    let m2: Vec<_> = g2
        .iter()
        .map(|&((k, l), g)| {
            let mut v = g;
            if l == [0, 0] {
                v = add(v, find1(k));
            }
            ((k, l), v)
        })
        .collect();
    let m3: Vec<_> = g3
        .iter()
        .map(|&((k, l1, l2), g)| {
            let mut v = g;
            if l2 == [0, 0] {
                v = add(v, find2(k, l1));
            }
            if l1 == [0, 0] {
                v = add(v, find2(k, l2));
            }
            if l1 == [0, 0] && l2 == [0, 0] {
                v = add(v, find1(k));
            }
            ((k, l1, l2), v)
        })
        .collect();
    Marginals { n_particles, time, m1, m2, m3 }
}

/// Log-log N-scaling fit of correlation norms.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub level: usize,
    pub derivative_order: usize,
    /// (N, norm, se)
    pub points: Vec<(usize, f64, f64)>,
    pub slope: f64,
    pub slope_se: f64,
}

impl ScalingReport {
    /// CSV rows `N,norm,se`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,norm,se\n");
        for &(n, v, e) in &self.points {
            s.push_str(&format!("{n},{v},{e}\n"));
        }
        s
    }
}

/// Weighted least-squares slope of log‖g‖ vs log N.
pub fn scaling_report(
    points: &[(usize, f64, f64)],
    level: usize,
    derivative_order: usize,
) -> Result<ScalingReport> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit("need at least 3 distinct N values".into()));
    }
    let x: Vec<f64> = points.iter().map(|&(n, _, _)| (n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|&(_, v, _)| v.ln()).collect();
    // σ of ln(norm) ≈ se/norm; floor keeps exact synthetic inputs fittable
    let s: Vec<f64> = points.iter().map(|&(_, v, e)| (e / v).max(1e-12)).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-positive norm in scaling fit".into()));
    }
    let (_, slope, _, var_b) = weighted_line_fit(&x, &y, &s)
        .ok_or_else(|| Error::DegenerateFit("singular weighted fit".into()))?;
    Ok(ScalingReport {
        level,
        derivative_order,
        points: points.to_vec(),
        slope,
        slope_se: var_b.sqrt(),
    })
}

/// Exact short-time derivatives of the tagged marginal in the uniform
/// setting: ∂_t²f̂¹(k)|₀ = -((N-1)/N²)·(kᵀAk)·f̂°(k) with A = ∫K⊗K, and
/// ∂_t³f̂¹|₀ ≡ 0.
#[derive(Debug, Clone, Serialize)]
pub struct ShortTimeDerivatives {
    pub modes: Vec<[i64; 2]>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

pub fn exact_short_time_derivatives(
    f0: &TorusDensity,
    kernel: &TorusKernel,
    n_particles: usize,
    mode_cutoff: i64,
) -> ShortTimeDerivatives {
    let a = crate::effective::diffusion_matrix_torus(kernel);
    let n = n_particles as f64;
    let mut modes = Vec::new();
    let mut d2 = Vec::new();
    for (k, fk) in f0.fourier_coeffs() {
        if k[0].abs().max(k[1].abs()) > mode_cutoff {
            continue;
        }
        let kf = [k[0] as f64, k[1] as f64];
        let kak = kf[0] * (a.m[0][0] * kf[0] + a.m[0][1] * kf[1])
            + kf[1] * (a.m[1][0] * kf[0] + a.m[1][1] * kf[1]);
        modes.push(k);
        d2.push(-(n - 1.0) / (n * n) * kak * fk);
    }
    let d3 = vec![0.0; modes.len()];
    ShortTimeDerivatives { modes, d2, d3 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn stat(re: f64, im: f64) -> ComplexStat {
        ComplexStat { re, im, se_re: 0.0, se_im: 0.0 }
    }

    #[test]
    fn product_marginal_has_zero_correlation() {
        // f² = f¹ ⊗ 1 in mode space: f̂²(k,l) = f̂¹(k)·1_{l=0}
        let m = Marginals {
            n_particles: 16,
            time: 0.0,
            m1: vec![([1, 0], stat(0.25, 0.0))],
            m2: vec![
                (([1, 0], [0, 0]), stat(0.25, 0.0)),
                (([1, 0], [1, 0]), stat(0.0, 0.0)),
                (([1, 0], [0, 1]), stat(0.0, 0.0)),
            ],
            m3: vec![],
        };
        let g = invert_cluster(&m, 2).unwrap();
        for v in &g[1].values {
            assert_eq!((v.re, v.im), (0.0, 0.0));
        }
    }

    #[test]
    fn planted_tensor_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut r = || rng.random::<f64>() - 0.5;
        let ks = [[0i64, 0], [1, 0], [0, 1]];
        let ls = [[0i64, 0], [1, 0], [0, 1], [1, 1]];
        let g1: Vec<_> = ks[1..].iter().map(|&k| (k, stat(r(), r()))).collect();
        // plant g², g³ honoring the mean-zero constraint (zero at l = 0)
        let mut g2 = Vec::new();
        for &k in &ks {
            for &l in &ls {
                let v = if l == [0, 0] { stat(0.0, 0.0) } else { stat(r(), r()) };
                g2.push(((k, l), v));
            }
        }
        let mut g3 = Vec::new();
        for &k in &ks {
            for (i, &l1) in ls.iter().enumerate() {
                for &l2 in &ls[i..] {
                    let v = if l1 == [0, 0] || l2 == [0, 0] {
                        stat(0.0, 0.0)
                    } else {
                        stat(r(), r())
                    };
                    // symmetric in the background slots
                    g3.push(((k, l1, l2), v));
                    if l1 != l2 {
                        g3.push(((k, l2, l1), v));
                    }
                }
            }
        }
        let marg = expand_cluster(&g1, &g2, &g3, 64, 0.5);
        let out = invert_cluster(&marg, 3).unwrap();
        for (modes, v) in out[1].modes.iter().zip(&out[1].values) {
            let planted = g2.iter().find(|(m, _)| *m == (modes[0], modes[1])).unwrap().1;
            assert_relative_eq!(v.re, planted.re, epsilon = 1e-12);
            assert_relative_eq!(v.im, planted.im, epsilon = 1e-12);
        }
        for (modes, v) in out[2].modes.iter().zip(&out[2].values) {
            let planted =
                g3.iter().find(|(m, _)| *m == (modes[0], modes[1], modes[2])).unwrap().1;
            assert_relative_eq!(v.re, planted.re, epsilon = 1e-12);
            assert_relative_eq!(v.im, planted.im, epsilon = 1e-12);
        }
        // cumulants vanish whenever a background slot mode is zero
        for (modes, v) in out[2].modes.iter().zip(&out[2].values) {
            if modes[1] == [0, 0] || modes[2] == [0, 0] {
                assert!(v.re.abs() < 1e-12 && v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_modes_are_reported() {
        let m = Marginals {
            n_particles: 8,
            time: 0.0,
            m1: vec![],
            m2: vec![(([1, 0], [0, 0]), stat(0.2, 0.0))],
            m3: vec![],
        };
        // f̂²(k, 0) needs f̂¹(k), which is absent for k = (1,0)
        let err = invert_cluster(&m, 2).unwrap_err();
        assert!(err.to_string().contains("f¹[1, 0]"), "{err}");
    }

    #[test]
    fn scaling_fit_recovers_planted_law() {
        // g² = c/√N → slope -1/2 with negligible error
        let points: Vec<(usize, f64, f64)> =
            [128usize, 256, 512, 1024].iter().map(|&n| (n, 0.7 / (n as f64).sqrt(), 1e-9)).collect();
        let rep = scaling_report(&points, 2, 0).unwrap();
        assert_relative_eq!(rep.slope, -0.5, epsilon = 1e-6);
        assert!(rep.slope_se < 1e-6);
        assert!(scaling_report(&points[..2], 2, 0).is_err());
    }

    #[test]
    fn exact_d2_matches_hand_computation() {
        // W = cos x₁ + cos x₂ (A = I/2), f° = 1 + cos(x₁)/2, N = 10:
        // ∂_t²f¹|₀ = -0.0225·cos x₁, i.e. d2 = -9/800 at k = ±(1,0)
        let k = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 1.0)]).unwrap();
        let f0 = TorusDensity::new(&[([1, 0], 0.5)]).unwrap();
        let d = exact_short_time_derivatives(&f0, &k, 10, 2);
        let i = d.modes.iter().position(|&m| m == [1, 0]).unwrap();
        assert_relative_eq!(d.d2[i], -9.0 / 800.0, epsilon = 1e-15);
        let i = d.modes.iter().position(|&m| m == [-1, 0]).unwrap();
        assert_relative_eq!(d.d2[i], -9.0 / 800.0, epsilon = 1e-15);
        // reconstructed field amplitude: 2·d2·cos = -0.0225·cos
        assert_relative_eq!(2.0 * d.d2[i], -0.0225, epsilon = 1e-15);
        assert!(d.d3.iter().all(|&v| v == 0.0));
        // N = 1: the (N-1) factor kills d2
        let d = exact_short_time_derivatives(&f0, &k, 1, 2);
        assert!(d.d2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parseval_consistency() {
        // mode-space ℓ² norm equals the grid L² norm (normalized measure)
        let f0 = TorusDensity::new(&[([1, 0], 0.4), ([1, 1], 0.2)]).unwrap();
        let mode_norm2: f64 = f0.fourier_coeffs().iter().map(|&(_, c)| c * c).sum();
        let n = 128;
        let mut grid_norm2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [
                    2.0 * std::f64::consts::PI * i as f64 / n as f64,
                    2.0 * std::f64::consts::PI * j as f64 / n as f64,
                ];
                grid_norm2 += f0.eval(x).powi(2);
            }
        }
        grid_norm2 /= (n * n) as f64;
        assert_relative_eq!(mode_norm2, grid_norm2, epsilon = 1e-12);
    }

    #[test]
    fn exchangeability_across_background_indices() {
        // pair moments computed from background index 2 only vs 3 only agree
        // within combined statistical error
        use crate::nbody::*;
        let kern = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 1.0)]).unwrap();
        let sys = NBodySystem::torus(&kern);
        let f0 = TorusDensity::new(&[([1, 0], 0.5)]).unwrap();
        let mut acc2 = crate::stats::ComplexWelford::default();
        let mut acc3 = crate::stats::ComplexWelford::default();
        let (k, l) = ([1i64, 0i64], [0i64, 1i64]);
        for s in 0..3000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            rng.set_stream(s + 1);
            let (mut st, _) = sample_initial(
                InitialKind::UniformBackground,
                &TaggedDensity::Torus(&f0),
                &sys,
                0.0,
                8,
                &mut rng,
            )
            .unwrap();
            let mut ws = Workspace::new(8);
            integrate_to(&mut st, 0.5, 0.02, &sys, &mut ws).unwrap();
            let ph = |k: [i64; 2], p: [f64; 2]| {
                let (s, c) = (k[0] as f64 * p[0] + k[1] as f64 * p[1]).sin_cos();
                num_complex::Complex64::new(c, -s)
            };
            let z2 = ph(k, st.positions[0]) * ph(l, st.positions[1]);
            let z3 = ph(k, st.positions[0]) * ph(l, st.positions[2]);
            acc2.push(z2.re, z2.im);
            acc3.push(z3.re, z3.im);
        }
        let d_re = (acc2.re.mean - acc3.re.mean).abs();
        let se = (acc2.re.se().powi(2) + acc3.re.se().powi(2)).sqrt();
        assert!(d_re <= 3.5 * se, "j=2 vs j=3 differ: {d_re:.4} vs se {se:.4}");
    }
}
