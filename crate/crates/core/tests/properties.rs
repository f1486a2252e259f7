//! Property tests for the structural invariants: kernel symmetry laws,
//! cluster-expansion roundtrips, and reduction determinism.

use proptest::prelude::*;
use vortexkin::cumulants::{expand_cluster, invert_cluster};
use vortexkin::kernels::TorusKernel;
use vortexkin::nbody::ComplexStat;
use vortexkin::stats::Welford;

fn mode_table() -> impl Strategy<Value = Vec<([i64; 2], f64)>> {
    proptest::collection::vec(
        ((-3i64..=3, -3i64..=3), -2.0f64..2.0),
        1..5,
    )
    .prop_map(|v| {
        let mut out: Vec<([i64; 2], f64)> = Vec::new();
        for ((kx, ky), a) in v {
            let k = if (kx, ky) == (0, 0) { (1, 0) } else { (kx, ky) };
            let canon = if k.0 > 0 || (k.0 == 0 && k.1 > 0) { k } else { (-k.0, -k.1) };
            if !out.iter().any(|&(m, _)| m == [canon.0, canon.1]) {
                out.push(([canon.0, canon.1], a));
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_kernel_is_odd_and_divergence_free(table in mode_table(), x0 in -4.0f64..4.0, x1 in -4.0f64..4.0) {
        let k = TorusKernel::new(&table).unwrap();
        prop_assert_eq!(k.max_spectral_divergence(), 0.0);
        let (fp, fm) = (k.eval_force([x0, x1]), k.eval_force([-x0, -x1]));
        prop_assert!((fp[0] + fm[0]).abs() < 1e-12);
        prop_assert!((fp[1] + fm[1]).abs() < 1e-12);
        // W even
        prop_assert!((k.eval_w([x0, x1]) - k.eval_w([-x0, -x1])).abs() < 1e-12);
    }

    #[test]
    fn cluster_expansion_roundtrip(vals in proptest::collection::vec(-1.0f64..1.0, 24)) {
        // plant g² on a fixed mode set honoring the mean-zero constraint,
        // expand to marginals, invert, recover
        let ks = [[0i64, 0i64], [1, 0], [0, 1]];
        let ls = [[1i64, 0i64], [0, 1], [1, 1], [0, 0]];
        let mut g1 = Vec::new();
        let mut g2 = Vec::new();
        let mut it = vals.iter();
        for &k in &ks[1..] {
            g1.push((k, ComplexStat { re: *it.next().unwrap(), im: *it.next().unwrap(), se_re: 0.0, se_im: 0.0 }));
        }
        for &k in &ks {
            for &l in &ls {
                let v = if l == [0, 0] {
                    ComplexStat::default()
                } else {
                    ComplexStat { re: *it.next().unwrap() * 0.3, im: 0.0, se_re: 0.0, se_im: 0.0 }
                };
                g2.push(((k, l), v));
            }
        }
        let marg = expand_cluster(&g1, &g2, &[], 32, 0.0);
        let out = invert_cluster(&marg, 2).unwrap();
        for (modes, v) in out[1].modes.iter().zip(&out[1].values) {
            let planted = g2.iter().find(|(m, _)| *m == (modes[0], modes[1])).unwrap().1;
            prop_assert!((v.re - planted.re).abs() < 1e-12);
            prop_assert!((v.im - planted.im).abs() < 1e-12);
        }
    }

    #[test]
    fn welford_merge_is_order_independent_across_chunking(
        xs in proptest::collection::vec(-10.0f64..10.0, 8..64),
        split in 1usize..7,
    ) {
        let mut whole = Welford::default();
        for &x in &xs { whole.push(x); }
        let cut = (xs.len() * split) / 8;
        let mut a = Welford::default();
        let mut b = Welford::default();
        for &x in &xs[..cut] { a.push(x); }
        for &x in &xs[cut..] { b.push(x); }
        a.merge(&b);
        prop_assert!((a.mean - whole.mean).abs() <= 1e-12 * (1.0 + whole.mean.abs()));
        prop_assert!((a.variance() - whole.variance()).abs() <= 1e-10 * (1.0 + whole.variance()));
    }
}
