//! Relative-angular-mode tables for two-point kernels on the plane.
//!
//! A jointly rotation-invariant kernel G(x,y) is stored as real coefficients
//! `g_ℓ(r,s)` with `G = Σ_{ℓ∈Z} g_|ℓ|(r,s) e^{iℓ(θ_x-θ_y)}` on a fixed radial
//! grid. Radial kernels W(x-y) are diagonal in this representation, and the
//! μ-weighted two-point product stays diagonal per mode, so convolution
//! algebra reduces to per-mode matrix products.

use crate::grid::RadialGrid;

#[derive(Debug, Clone)]
pub struct TwoPointModeTable {
    pub grid: RadialGrid,
    pub l_max: usize,
    /// data[ℓ][i*n + j] = g_ℓ(r_i, r_j), ℓ = 0..=l_max.
    pub data: Vec<Vec<f64>>,
}

impl TwoPointModeTable {
    /// Mode table of the radial kernel (x,y) ↦ f(|x-y|).
    pub fn from_radial_kernel(
        grid: &RadialGrid,
        l_max: usize,
        n_theta: usize,
        f: impl Fn(f64) -> f64,
    ) -> Self {
        let n = grid.len();
        let cos_tab = cos_table(l_max, n_theta);
        let mut data = vec![vec![0.0; n * n]; l_max + 1];
        let mut samples = vec![0.0; n_theta];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (grid.r[i], grid.r[j]);
                for (t, s) in samples.iter_mut().enumerate() {
                    let th = 2.0 * std::f64::consts::PI * t as f64 / n_theta as f64;
                    let d2 = ri * ri + rj * rj - 2.0 * ri * rj * th.cos();
                    *s = f(d2.max(0.0).sqrt());
                }
                for (l, row) in data.iter_mut().enumerate() {
                    let c = &cos_tab[l];
                    let v: f64 =
                        samples.iter().zip(c).map(|(&s, &ct)| s * ct).sum::<f64>() / n_theta as f64;
                    row[i * n + j] = v;
                    row[j * n + i] = v;
                }
            }
        }
        TwoPointModeTable { grid: grid.clone(), l_max, data }
    }

    /// Zero table with the same shape.
    pub fn zeros_like(&self) -> Self {
        TwoPointModeTable {
            grid: self.grid.clone(),
            l_max: self.l_max,
            data: vec![vec![0.0; self.grid.len() * self.grid.len()]; self.l_max + 1],
        }
    }

    /// μ-weighted product: (A ∗_μ B)(x,y) = ∫ A(x,z) B(z,y) μ(z) dz,
    /// diagonal per mode: (A∗B)_ℓ = A_ℓ · diag(2π μ_j r_j w_j) · B_ℓ.
    pub fn mu_product(&self, other: &Self, mu: &[f64]) -> Self {
        let n = self.grid.len();
        assert_eq!(other.grid.len(), n);
        let l_max = self.l_max.min(other.l_max);
        let d: Vec<f64> = (0..n)
            .map(|j| 2.0 * std::f64::consts::PI * mu[j] * self.grid.r[j] * self.grid.w[j])
            .collect();
        let mut data = vec![vec![0.0; n * n]; l_max + 1];
        for l in 0..=l_max {
            let (a, b, out) = (&self.data[l], &other.data[l], &mut data[l]);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += a[i * n + m] * d[m] * b[m * n + j];
                    }
                    out[i * n + j] = acc;
                }
            }
        }
        TwoPointModeTable { grid: self.grid.clone(), l_max, data }
    }

    pub fn scaled_add(&mut self, c: f64, other: &Self) {
        let l = self.l_max.min(other.l_max);
        for (a, b) in self.data[..=l].iter_mut().zip(&other.data[..=l]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
    }

    pub fn sup_entry(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Reconstruct G(x,y) at polar points (r_i, θ) and (r_j, φ).
    pub fn evaluate(&self, i: usize, j: usize, dtheta: f64) -> f64 {
        let n = self.grid.len();
        let mut v = self.data[0][i * n + j];
        for l in 1..=self.l_max {
            v += 2.0 * self.data[l][i * n + j] * (l as f64 * dtheta).cos();
        }
        v
    }

    /// Max |A_ℓ(i,j) - A_ℓ(j,i)| over stored modes (two-point symmetry).
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.len();
        let mut m: f64 = 0.0;
        for row in &self.data {
            for i in 0..n {
                for j in 0..i {
                    m = m.max((row[i * n + j] - row[j * n + i]).abs());
                }
            }
        }
        m
    }
}

fn cos_table(l_max: usize, n_theta: usize) -> Vec<Vec<f64>> {
    (0..=l_max)
        .map(|l| {
            (0..n_theta)
                .map(|t| (2.0 * std::f64::consts::PI * (l * t) as f64 / n_theta as f64).cos())
                .collect()
        })
        .collect()
}

/// Ring-derivative table A[i,j] = ⟨ W'(d)·(r_i - s_j cosθ)/d ⟩_θ, the radial
/// derivative ∂_r of the ring average of W; used for the angular velocity.
pub fn ring_radial_derivative(
    grid: &RadialGrid,
    n_theta: usize,
    w_prime: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let n = grid.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (ri, sj) = (grid.r[i], grid.r[j]);
            let mut acc = 0.0;
            for t in 0..n_theta {
                let th = 2.0 * std::f64::consts::PI * t as f64 / n_theta as f64;
                let c = th.cos();
                let d2 = ri * ri + sj * sj - 2.0 * ri * sj * c;
                let d = d2.max(1e-300).sqrt();
                acc += w_prime(d) * (ri - sj * c) / d;
            }
            out[i * n + j] = acc / n_theta as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_ring_average_matches_quadrature() {
        let grid = RadialGrid::gauss_legendre(4.0, 8, 6);
        let t = TwoPointModeTable::from_radial_kernel(&grid, 4, 256, |d| (-d * d / 2.0).exp());
        // compare ℓ=0 and ℓ=2 against fine trapezoid at one pair
        let (i, j) = (10, 20);
        let (ri, rj) = (grid.r[i], grid.r[j]);
        let nfine = 20000;
        let mut c0 = 0.0;
        let mut c2 = 0.0;
        for t in 0..nfine {
            let th = 2.0 * std::f64::consts::PI * t as f64 / nfine as f64;
            let d = (ri * ri + rj * rj - 2.0 * ri * rj * th.cos()).sqrt();
            let w = (-d * d / 2.0).exp();
            c0 += w;
            c2 += w * (2.0 * th).cos();
        }
        c0 /= nfine as f64;
        c2 /= nfine as f64;
        let n = grid.len();
        assert_relative_eq!(t.data[0][i * n + j], c0, epsilon = 1e-12);
        assert_relative_eq!(t.data[2][i * n + j], c2, epsilon = 1e-12);
    }

    #[test]
    fn table_is_symmetric() {
        let grid = RadialGrid::gauss_legendre(3.0, 6, 4);
        let t = TwoPointModeTable::from_radial_kernel(&grid, 6, 128, |d| (-d).exp());
        assert_eq!(t.asymmetry(), 0.0);
    }

    #[test]
    fn mode_reconstruction() {
        let grid = RadialGrid::gauss_legendre(3.0, 4, 4);
        let t = TwoPointModeTable::from_radial_kernel(&grid, 16, 256, |d| (-d * d / 2.0).exp());
        let (i, j) = (3, 9);
        for &dth in &[0.0f64, 0.7, 2.1] {
            let (ri, rj) = (grid.r[i], grid.r[j]);
            let d = (ri * ri + rj * rj - 2.0 * ri * rj * dth.cos()).sqrt();
            assert_relative_eq!(t.evaluate(i, j, dth), (-d * d / 2.0).exp(), epsilon = 1e-10);
        }
    }
}
