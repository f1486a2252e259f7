//! Interaction and external potentials with their derived incompressible
//! force fields, on the 2-torus (spectral) and on the plane (radial).
//!
//! Conventions, fixed once for the whole crate:
//! - torus is `[0,2π)²` with Lebesgue measure normalized to total mass 1;
//! - Fourier transform `ĝ(k) = ∫ g(x) e^{-ik·x} dm(x)`, so `g = Σ ĝ(k) e^{ik·x}`;
//! - `∇⊥ = (-∂₂, ∂₁)`, force kernels `K = -∇⊥W`, `F = -∇⊥V`;
//! - a torus mode entry `(k, a)` means `W += a·cos(k·x)`, i.e. `Ŵ(±k) = a/2`.

use num_complex::Complex64;

use crate::{Error, Result};

/// One signed Fourier mode of a torus kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusMode {
    pub k: [i64; 2],
    /// Ŵ(k), real by evenness of W.
    pub w_hat: f64,
    /// K̂(k) = -i·(-k₂,k₁)·Ŵ(k); purely imaginary components.
    pub k_hat: [Complex64; 2],
}

/// Smooth even interaction potential on the torus, held as a finite cosine
/// table, together with the derived divergence-free force `K = -∇⊥W`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusKernel {
    /// Canonical representative per ±pair (k₁>0, or k₁=0 and k₂>0), with the
    /// cosine amplitude: W(x) = Σ a·cos(k·x).
    pairs: Vec<([i64; 2], f64)>,
}

fn canonical(k: [i64; 2]) -> ([i64; 2], bool) {
    if k[0] > 0 || (k[0] == 0 && k[1] > 0) {
        (k, false)
    } else {
        ([-k[0], -k[1]], true)
    }
}

impl TorusKernel {
    /// Build from cosine-pair entries `(k, a)` meaning `W += a·cos(k·x)`.
    /// Each ± mode pair may be given once, through either representative.
    pub fn new(table: &[([i64; 2], f64)]) -> Result<Self> {
        let mut pairs: Vec<([i64; 2], f64)> = Vec::with_capacity(table.len());
        for &(k, a) in table {
            if k == [0, 0] {
                return Err(Error::Kernel(
                    "zero mode k=(0,0) not allowed: W must have ∫W = 0 on the torus".into(),
                ));
            }
            if !a.is_finite() {
                return Err(Error::Kernel(format!("non-finite amplitude at mode {k:?}")));
            }
            let (c, _) = canonical(k);
            if pairs.iter().any(|&(p, _)| p == c) {
                return Err(Error::Kernel(format!(
                    "duplicate mode pair ±{c:?}: each cosine pair may be specified once"
                )));
            }
            pairs.push((c, a));
        }
        pairs.sort_by_key(|&(k, _)| k);
        Ok(TorusKernel { pairs })
    }

    /// Build from a signed mode table `(k, Ŵ(k))`. The table must be even:
    /// Ŵ(-k) = Ŵ(k), with both signs present.
    pub fn from_signed_modes(table: &[([i64; 2], f64)]) -> Result<Self> {
        let mut seen: Vec<([i64; 2], f64)> = Vec::new();
        for &(k, w) in table {
            if k == [0, 0] {
                return Err(Error::Kernel("zero mode k=(0,0) not allowed".into()));
            }
            let km = [-k[0], -k[1]];
            match table.iter().find(|&&(q, _)| q == km) {
                None => {
                    return Err(Error::Kernel(format!(
                        "odd-violating table: mode {k:?} present without its mirror {km:?}"
                    )))
                }
                Some(&(_, wm)) if (wm - w).abs() > 1e-14 * (1.0 + w.abs()) => {
                    return Err(Error::Kernel(format!(
                        "evenness violated: Ŵ({k:?}) = {w} ≠ Ŵ({km:?}) = {wm}"
                    )))
                }
                _ => {}
            }
            let (c, _) = canonical(k);
            if !seen.iter().any(|&(p, _)| p == c) {
                seen.push((c, 2.0 * w));
            }
        }
        Self::new(&seen)
    }

    /// Cosine-pair table (canonical representatives).
    pub fn cosine_pairs(&self) -> &[([i64; 2], f64)] {
        &self.pairs
    }

    /// Full signed mode list with Ŵ(k) and K̂(k).
    pub fn fourier_modes(&self) -> Vec<TorusMode> {
        let mut out = Vec::with_capacity(2 * self.pairs.len());
        for &(k, a) in &self.pairs {
            for k in [k, [-k[0], -k[1]]] {
                let w_hat = 0.5 * a;
                let perp = [-(k[1] as f64), k[0] as f64];
                let k_hat = [
                    Complex64::new(0.0, -perp[0] * w_hat),
                    Complex64::new(0.0, -perp[1] * w_hat),
                ];
                out.push(TorusMode { k, w_hat, k_hat });
            }
        }
        out
    }

    /// max over modes of |k·K̂(k)| (zero exactly by construction).
    pub fn max_spectral_divergence(&self) -> f64 {
        self.fourier_modes()
            .iter()
            .map(|m| (m.k[0] as f64 * m.k_hat[0] + m.k[1] as f64 * m.k_hat[1]).norm())
            .fold(0.0, f64::max)
    }

    pub fn eval_w(&self, x: [f64; 2]) -> f64 {
        self.pairs
            .iter()
            .map(|&(k, a)| a * (k[0] as f64 * x[0] + k[1] as f64 * x[1]).cos())
            .sum()
    }

    /// K(x) = Σ a·k⊥·sin(k·x), k⊥ = (-k₂, k₁).
    pub fn eval_force(&self, x: [f64; 2]) -> [f64; 2] {
        let mut f = [0.0, 0.0];
        for &(k, a) in &self.pairs {
            let s = a * (k[0] as f64 * x[0] + k[1] as f64 * x[1]).sin();
            f[0] += -(k[1] as f64) * s;
            f[1] += k[0] as f64 * s;
        }
        f
    }

    /// ∇K at x: entry [c][d] = ∂_d K_c = Σ a·k⊥_c·k_d·cos(k·x).
    pub fn eval_force_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for &(k, a) in &self.pairs {
            let c = a * (k[0] as f64 * x[0] + k[1] as f64 * x[1]).cos();
            let perp = [-(k[1] as f64), k[0] as f64];
            for i in 0..2 {
                for d in 0..2 {
                    g[i][d] += perp[i] * (k[d] as f64) * c;
                }
            }
        }
        g
    }

    /// Upper bound for sup‖∇K‖ used in step-size control: Σ |a|·|k|².
    pub fn grad_bound(&self) -> f64 {
        self.pairs
            .iter()
            .map(|&(k, a)| a.abs() * (k[0] * k[0] + k[1] * k[1]) as f64)
            .sum()
    }

    /// Largest sup-norm |k|_∞ over modes.
    pub fn max_mode_linf(&self) -> i64 {
        self.pairs
            .iter()
            .map(|&(k, _)| k[0].abs().max(k[1].abs()))
            .max()
            .unwrap_or(0)
    }
}

/// Band-limited probability density on the torus:
/// f(x) = 1 + Σ a·cos(k·x + φ) over cosine pairs, with f ≥ 0.
/// Fourier coefficients: f̂(0) = 1, f̂(±k) = (a/2)e^{∓iφ}... phases are not
/// needed by any consumer here, so entries are plain cosine pairs (φ = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct TorusDensity {
    pairs: Vec<([i64; 2], f64)>,
}

impl TorusDensity {
    pub fn uniform() -> Self {
        TorusDensity { pairs: vec![] }
    }

    /// f(x) = 1 + Σ a·cos(k·x); requires min f ≥ 0, i.e. Σ|a| ≤ 1.
    pub fn new(pairs: &[([i64; 2], f64)]) -> Result<Self> {
        let total: f64 = pairs.iter().map(|&(_, a)| a.abs()).sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::Kernel(format!(
                "density may go negative: Σ|a| = {total:.3} > 1"
            )));
        }
        for &(k, _) in pairs {
            if k == [0, 0] {
                return Err(Error::Kernel("k=0 amplitude is fixed to 1 (normalization)".into()));
            }
        }
        let mut pairs: Vec<([i64; 2], f64)> = pairs.iter().map(|&(k, a)| (canonical(k).0, a)).collect();
        pairs.sort_by_key(|&(k, _)| k);
        Ok(TorusDensity { pairs })
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        1.0 + self
            .pairs
            .iter()
            .map(|&(k, a)| a * (k[0] as f64 * x[0] + k[1] as f64 * x[1]).cos())
            .sum::<f64>()
    }

    /// Upper bound for rejection sampling.
    pub fn sup_bound(&self) -> f64 {
        1.0 + self.pairs.iter().map(|&(_, a)| a.abs()).sum::<f64>()
    }

    /// Signed Fourier coefficients: (k, f̂(k)) with f̂(0) = 1, f̂(±k) = a/2.
    pub fn fourier_coeffs(&self) -> Vec<([i64; 2], f64)> {
        let mut out = vec![([0, 0], 1.0)];
        for &(k, a) in &self.pairs {
            out.push((k, 0.5 * a));
            out.push(([-k[0], -k[1]], 0.5 * a));
        }
        out
    }

    /// f̂(k) for a single mode.
    pub fn fhat(&self, k: [i64; 2]) -> f64 {
        if k == [0, 0] {
            return 1.0;
        }
        let (c, _) = canonical(k);
        self.pairs.iter().find(|&&(p, _)| p == c).map_or(0.0, |&(_, a)| 0.5 * a)
    }

    /// Largest |k|_∞ carried by the density.
    pub fn max_mode_linf(&self) -> i64 {
        self.pairs.iter().map(|&(k, _)| k[0].abs().max(k[1].abs())).max().unwrap_or(0)
    }
}

/// Analytic radial profile families for plane kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialFamily {
    /// W(r) = amp·exp(-r²/(2·width²))
    Gaussian { amp: f64, width: f64 },
    /// W(r) = amp·exp(1 - 1/(1-(r/radius)²)) for r < radius, else 0
    Bump { amp: f64, radius: f64 },
}

/// Smooth bounded radial interaction potential on the plane with the derived
/// force `K(x) = -(W'(|x|)/|x|)·x⊥`, evaluated through `q(r) = W'(r)/r`
/// which is finite at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneKernel {
    pub family: RadialFamily,
    pub cutoff_radius: f64,
}

impl PlaneKernel {
    pub fn new(family: RadialFamily) -> Result<Self> {
        let cutoff_radius = match &family {
            RadialFamily::Gaussian { amp, width } => {
                if *width <= 0.0 || !amp.is_finite() {
                    return Err(Error::Kernel("gaussian family needs width > 0".into()));
                }
                width * (2.0 * (amp.abs() / 1e-14).ln().max(0.0)).sqrt()
            }
            RadialFamily::Bump { amp, radius } => {
                if *radius <= 0.0 || !amp.is_finite() {
                    return Err(Error::Kernel("bump family needs radius > 0".into()));
                }
                *radius
            }
        };
        Ok(PlaneKernel { family, cutoff_radius })
    }

    pub fn gaussian(amp: f64, width: f64) -> Result<Self> {
        Self::new(RadialFamily::Gaussian { amp, width })
    }

    pub fn bump(amp: f64, radius: f64) -> Result<Self> {
        Self::new(RadialFamily::Bump { amp, radius })
    }

    pub fn w(&self, r: f64) -> f64 {
        match self.family {
            RadialFamily::Gaussian { amp, width } => amp * (-r * r / (2.0 * width * width)).exp(),
            RadialFamily::Bump { amp, radius } => {
                let u = r / radius;
                if u >= 1.0 {
                    0.0
                } else {
                    amp * (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
        }
    }

    /// q(r) = W'(r)/r, smooth at r = 0 with q(0) = W''(0).
    pub fn w_prime_over_r(&self, r: f64) -> f64 {
        match self.family {
            RadialFamily::Gaussian { amp, width } => {
                let s2 = width * width;
                -(amp / s2) * (-r * r / (2.0 * s2)).exp()
            }
            RadialFamily::Bump { amp, radius } => {
                let u = r / radius;
                if u >= 1.0 {
                    0.0
                } else {
                    let d = 1.0 - u * u;
                    -amp * (1.0 - 1.0 / d).exp() * 2.0 / (radius * radius * d * d)
                }
            }
        }
    }

    pub fn w_prime(&self, r: f64) -> f64 {
        r * self.w_prime_over_r(r)
    }

    /// ‖W‖_∞ (profiles here are monotone in |W| from the origin).
    pub fn sup_norm(&self) -> f64 {
        match self.family {
            RadialFamily::Gaussian { amp, .. } => amp.abs(),
            RadialFamily::Bump { amp, .. } => amp.abs(),
        }
    }

    /// K(x) = -(W'(|x|)/|x|)·x⊥.
    pub fn eval_force(&self, x: [f64; 2]) -> [f64; 2] {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let q = self.w_prime_over_r(r);
        [q * x[1], -q * x[0]]
    }

    /// Bound for sup‖∇K‖; sampled, adequate for step-size control.
    pub fn grad_bound(&self) -> f64 {
        let mut m: f64 = 0.0;
        let n = 4096;
        for i in 0..n {
            let r = self.cutoff_radius * (i as f64 + 0.5) / n as f64;
            let h = self.cutoff_radius / n as f64;
            let q = self.w_prime_over_r(r);
            let dq = (self.w_prime_over_r(r + h) - self.w_prime_over_r((r - h).max(0.0))) / (2.0 * h);
            // ∇K entries bounded by |q| + r|q'|
            m = m.max(q.abs() + r * dq.abs());
        }
        m
    }
}

/// Radial external potential V with force `F = -∇⊥V = -(V'(r)/r)·x⊥`.
#[derive(Debug, Clone)]
pub enum ExternalPotential {
    Zero,
    /// V = a·r²/2
    Harmonic { a: f64 },
    /// V = c2·r²/2 + c4·r⁴/4
    Quartic { c2: f64, c4: f64 },
    /// Tabulated radial profile, cubic-interpolated; must satisfy V'(0)=0.
    Radial(EvenRadialTable),
}

/// Even radial profile stored as a cubic spline in s = r². This keeps
/// V'(r)/r = 2·Ṽ'(r²) smooth through the origin.
#[derive(Debug, Clone)]
pub struct EvenRadialTable {
    table: RadialTable,
}

impl EvenRadialTable {
    pub fn new(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let s: Vec<f64> = r.iter().map(|&x| x * x).collect();
        Ok(EvenRadialTable { table: RadialTable::new(s, v)? })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.table.eval(r * r)
    }

    /// V'(r)/r = 2·dṼ/ds at s = r².
    pub fn deriv_over_r(&self, r: f64) -> f64 {
        2.0 * self.table.eval_deriv(r * r)
    }
}

/// Radial table with natural cubic spline interpolation.
#[derive(Debug, Clone)]
pub struct RadialTable {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    m: Vec<f64>, // spline second derivatives
}

impl RadialTable {
    pub fn new(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() < 4 || r.len() != v.len() {
            return Err(Error::Kernel("radial table needs ≥ 4 samples".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Kernel("radial table abscissae must increase".into()));
        }
        let m = natural_spline_m(&r, &v);
        Ok(RadialTable { r, v, m })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (j, a, b, h) = self.locate(x);
        let (t, u) = ((self.r[j + 1] - x) / h, (x - self.r[j]) / h);
        t * a + u * b + ((t * t * t - t) * self.m[j] + (u * u * u - u) * self.m[j + 1]) * h * h / 6.0
    }

    pub fn eval_deriv(&self, x: f64) -> f64 {
        let (j, a, b, h) = self.locate(x);
        let (t, u) = ((self.r[j + 1] - x) / h, (x - self.r[j]) / h);
        (b - a) / h + ((3.0 * u * u - 1.0) * self.m[j + 1] - (3.0 * t * t - 1.0) * self.m[j]) * h / 6.0
    }

    fn locate(&self, x: f64) -> (usize, f64, f64, f64) {
        let n = self.r.len();
        let x = x.clamp(self.r[0], self.r[n - 1]);
        let j = self.r.partition_point(|&v| v < x).clamp(1, n - 1) - 1;
        (j, self.v[j], self.v[j + 1], self.r[j + 1] - self.r[j])
    }
}

fn natural_spline_m(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        let p = sig * m[i - 1] + 2.0;
        m[i] = (sig - 1.0) / p;
        u[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * u[i] / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    for i in (0..n - 1).rev() {
        m[i] = m[i] * m[i + 1] + u[i];
    }
    m
}

impl ExternalPotential {
    /// Build a tabulated potential, rejecting profiles with V'(0) ≠ 0.
    pub fn from_table(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() >= 3 && r[0] < 1e-6 {
            // derivative at 0 of the quadratic through the first three samples
            let (x0, x1, x2) = (r[0], r[1], r[2]);
            let d0 = v[0] * (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
                + v[1] * (x0 - x2) / ((x1 - x0) * (x1 - x2))
                + v[2] * (x0 - x1) / ((x2 - x0) * (x2 - x1));
            let scale = v.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            if d0.abs() > 1e-6 * scale.max(1.0) {
                return Err(Error::Kernel(format!(
                    "potential not smooth at origin: V'(0) ≈ {d0:.3e} ≠ 0"
                )));
            }
        }
        Ok(ExternalPotential::Radial(EvenRadialTable::new(r, v)?))
    }

    pub fn v(&self, r: f64) -> f64 {
        match self {
            ExternalPotential::Zero => 0.0,
            ExternalPotential::Harmonic { a } => 0.5 * a * r * r,
            ExternalPotential::Quartic { c2, c4 } => 0.5 * c2 * r * r + 0.25 * c4 * r.powi(4),
            ExternalPotential::Radial(t) => t.eval(r),
        }
    }

    pub fn v_prime(&self, r: f64) -> f64 {
        r * self.v_prime_over_r(r)
    }

    /// V'(r)/r, finite at the origin.
    pub fn v_prime_over_r(&self, r: f64) -> f64 {
        match self {
            ExternalPotential::Zero => 0.0,
            ExternalPotential::Harmonic { a } => *a,
            ExternalPotential::Quartic { c2, c4 } => c2 + c4 * r * r,
            ExternalPotential::Radial(t) => t.deriv_over_r(r),
        }
    }

    /// F(x) = -(V'(|x|)/|x|)·x⊥.
    pub fn eval_force(&self, x: [f64; 2]) -> [f64; 2] {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let q = self.v_prime_over_r(r);
        [q * x[1], -q * x[0]]
    }

    pub fn grad_bound(&self, r_max: f64) -> f64 {
        match self {
            ExternalPotential::Zero => 0.0,
            ExternalPotential::Harmonic { a } => a.abs(),
            ExternalPotential::Quartic { c2, c4 } => {
                let q = c2.abs() + c4.abs() * r_max * r_max;
                q + 2.0 * c4.abs() * r_max * r_max
            }
            ExternalPotential::Radial(_) => {
                let mut m: f64 = 0.0;
                let n = 2048;
                let h = r_max / n as f64;
                for i in 0..n {
                    let r = (i as f64 + 0.5) * h;
                    let q = self.v_prime_over_r(r);
                    let dq = (self.v_prime_over_r(r + h) - self.v_prime_over_r((r - h).max(0.0)))
                        / (2.0 * h);
                    m = m.max(q.abs() + r * dq.abs());
                }
                m
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cos_cos_force_value() {
        // W = cos x₁ + cos x₂ → K(π/2, 0) = (0, 1)
        let k = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 1.0)]).unwrap();
        let f = k.eval_force([std::f64::consts::FRAC_PI_2, 0.0]);
        assert_relative_eq!(f[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(f[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_table_is_zero_kernel() {
        let k = TorusKernel::new(&[]).unwrap();
        assert_eq!(k.eval_force([1.234, -0.5]), [0.0, 0.0]);
        assert_eq!(k.eval_w([0.3, 0.4]), 0.0);
    }

    #[test]
    fn spectral_divergence_exactly_zero() {
        let k = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 0.7), ([1, 1], -0.3), ([2, -1], 0.2)])
            .unwrap();
        assert_eq!(k.max_spectral_divergence(), 0.0);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(TorusKernel::new(&[([0, 0], 1.0)]).is_err());
        assert!(TorusKernel::new(&[([1, 0], 1.0), ([-1, 0], 1.0)]).is_err());
        assert!(TorusKernel::new(&[([1, 0], f64::NAN)]).is_err());
        // signed table missing a mirror is odd-violating
        assert!(TorusKernel::from_signed_modes(&[([1, 0], 0.5)]).is_err());
        // asymmetric signed table violates evenness
        assert!(TorusKernel::from_signed_modes(&[([1, 0], 0.5), ([-1, 0], 0.4)]).is_err());
    }

    #[test]
    fn fourier_modes_roundtrip() {
        let k = TorusKernel::new(&[([1, 0], 1.0), ([0, 1], 0.5), ([2, 1], -0.25)]).unwrap();
        let signed: Vec<([i64; 2], f64)> = k.fourier_modes().iter().map(|m| (m.k, m.w_hat)).collect();
        let k2 = TorusKernel::from_signed_modes(&signed).unwrap();
        assert_eq!(k, k2);
    }

    #[test]
    fn torus_force_at_origin_vanishes() {
        let k = TorusKernel::new(&[([1, 0], 1.0)]).unwrap();
        assert_eq!(k.eval_force([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn oddness_at_random_points() {
        let tk = TorusKernel::new(&[([1, 0], 0.8), ([1, 1], -0.3), ([0, 2], 0.1)]).unwrap();
        let pk = PlaneKernel::gaussian(1.3, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = [rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0];
            let (fp, fm) = (tk.eval_force(x), tk.eval_force([-x[0], -x[1]]));
            assert!((fp[0] + fm[0]).abs() < 1e-12 && (fp[1] + fm[1]).abs() < 1e-12);
            let (gp, gm) = (pk.eval_force(x), pk.eval_force([-x[0], -x[1]]));
            assert!((gp[0] + gm[0]).abs() < 1e-12 && (gp[1] + gm[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_gaussian_force_value() {
        // W = e^{-r²/2}: K((1,0)) = (0, e^{-1/2})
        let k = PlaneKernel::gaussian(1.0, 1.0).unwrap();
        let f = k.eval_force([1.0, 0.0]);
        assert_relative_eq!(f[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(f[1], (-0.5f64).exp(), epsilon = 1e-14);
        assert_eq!(k.eval_force([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn plane_force_tangential() {
        let k = PlaneKernel::bump(0.7, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let x = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            let f = k.eval_force(x);
            worst = worst.max((x[0] * f[0] + x[1] * f[1]).abs());
        }
        assert!(worst < 1e-14);
    }

    #[test]
    fn plane_force_matches_centered_differences_of_w() {
        // K = -∇⊥W against O(h²) centered differences of W(x).
        let k = PlaneKernel::gaussian(1.1, 0.8).unwrap();
        let h = 1e-4;
        let weval = |x: [f64; 2]| k.w((x[0] * x[0] + x[1] * x[1]).sqrt());
        for &x in &[[0.3, -0.6], [1.0, 0.2], [0.0, 1.4], [2.2, 2.0]] {
            let d2 = (weval([x[0], x[1] + h]) - weval([x[0], x[1] - h])) / (2.0 * h);
            let d1 = (weval([x[0] + h, x[1]]) - weval([x[0] - h, x[1]])) / (2.0 * h);
            let f = k.eval_force(x);
            assert_relative_eq!(f[0], d2, epsilon = 1e-7);
            assert_relative_eq!(f[1], -d1, epsilon = 1e-7);
        }
    }

    #[test]
    fn torus_force_matches_centered_differences_of_w() {
        let k = TorusKernel::new(&[([1, 0], 0.6), ([1, 1], -0.4)]).unwrap();
        let h = 1e-5;
        for &x in &[[0.3, -0.6], [1.0, 0.2], [2.5, 4.0]] {
            let d2 = (k.eval_w([x[0], x[1] + h]) - k.eval_w([x[0], x[1] - h])) / (2.0 * h);
            let d1 = (k.eval_w([x[0] + h, x[1]]) - k.eval_w([x[0] - h, x[1]])) / (2.0 * h);
            let f = k.eval_force(x);
            assert_relative_eq!(f[0], d2, epsilon = 1e-9);
            assert_relative_eq!(f[1], -d1, epsilon = 1e-9);
        }
    }

    #[test]
    fn quartic_potential_derivatives() {
        let v = ExternalPotential::Quartic { c2: 1.0, c4: 1.0 };
        assert_relative_eq!(v.v(1.3), 0.5 * 1.69 + 0.25 * 1.3f64.powi(4), epsilon = 1e-14);
        assert_relative_eq!(v.v_prime(1.3), 1.3 + 1.3f64.powi(3), epsilon = 1e-14);
        assert_relative_eq!(v.v_prime_over_r(0.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn radial_table_round_trip_and_origin_check() {
        let r: Vec<f64> = (0..200).map(|i| i as f64 * 0.02).collect();
        let v: Vec<f64> = r.iter().map(|&r| 0.5 * r * r).collect();
        let p = ExternalPotential::from_table(r, v).unwrap();
        assert_relative_eq!(p.v(1.5), 1.125, epsilon = 1e-6);
        assert_relative_eq!(p.v_prime(1.5), 1.5, epsilon = 1e-5);
        // linear-at-origin profile must be rejected
        let r: Vec<f64> = (0..200).map(|i| i as f64 * 0.02).collect();
        let v: Vec<f64> = r.iter().map(|&r| r).collect();
        assert!(ExternalPotential::from_table(r, v).is_err());
    }
}
