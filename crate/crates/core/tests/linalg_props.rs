use cmbp::linalg::{perron_frobenius, power_decay, spectral_radius, Matrix};
use proptest::prelude::*;

fn square(p: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..hi, p * p).prop_map(move |e| {
        Matrix::from_rows(&e.chunks(p).map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    })
}

fn positive() -> impl Strategy<Value = Matrix> {
    (2usize..=4).prop_flat_map(|p| square(p, 0.01, 2.0))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn projection_is_outer_product(a in positive()) {
        let s = perron_frobenius(&a).unwrap();
        prop_assert!(s.pi.max_abs_diff(&Matrix::outer(&s.u, &s.v)) <= 1e-12);
        prop_assert!((s.u.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(s.u.iter().chain(&s.v).all(|&x| x > 0.0));
    }

    #[test]
    fn projection_is_idempotent_and_absorbs(a in positive()) {
        let rho = spectral_radius(&a);
        let critical = a.scale(1.0 / rho);
        let s = perron_frobenius(&critical).unwrap();
        prop_assert!((s.rho - 1.0).abs() <= 1e-10);
        prop_assert!(s.pi.mul(&s.pi).max_abs_diff(&s.pi) <= 1e-10);
        prop_assert!(s.pi.mul(&critical).max_abs_diff(&s.pi) <= 1e-10);
        prop_assert!(critical.mul(&s.pi).max_abs_diff(&s.pi) <= 1e-10);
    }

    #[test]
    fn spectral_radius_scales(
        a in (2usize..=3).prop_flat_map(|p| square(p, -2.0, 2.0)),
        c in -3.0f64..3.0,
    ) {
        let r = spectral_radius(&a);
        let rc = spectral_radius(&a.scale(c));
        prop_assert!((rc - c.abs() * r).abs() <= 1e-9 * (1.0 + c.abs() * r));
    }

    #[test]
    fn power_decay_is_geometric(a in positive()) {
        let critical = a.scale(1.0 / spectral_radius(&a));
        let s = perron_frobenius(&critical).unwrap();
        let r = s.second_modulus + 0.01;
        let decay = power_decay(&critical, &s.pi, 150);
        // a constant fitted at k = 1 alone misses the transient of a
        // non-normal or rotating remainder, so fit over the first 25 powers
        let c = (1..=25).map(|k| decay[k - 1] / r.powi(k as i32)).fold(0.0, f64::max);
        for (i, d) in decay.iter().enumerate() {
            let k = (i + 1) as i32;
            prop_assert!(*d <= c * r.powi(k) * (1.0 + 1e-9) + 1e-12, "k = {}: {} > {}", k, d, c * r.powi(k));
        }
    }
}

#[test]
fn permutation_conjugation_keeps_the_radius() {
    let a = Matrix::from_rows(&[vec![0.2, 1.0, 0.3], vec![0.5, 0.1, 0.9], vec![0.7, 0.4, 0.2]]).unwrap();
    let perm = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
    let b = perm.mul(&a).mul(&perm.transpose());
    assert!((spectral_radius(&a) - spectral_radius(&b)).abs() < 1e-12);
}
