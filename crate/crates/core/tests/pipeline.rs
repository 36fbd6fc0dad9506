use meandim_core::dimension::{metric_mean_dim_estimate, scale_entropy_table, topological_entropy_estimate};
use meandim_core::expansiveness::{certify_expansive, certify_expansive_finite, modulus_of_expansivity};
use meandim_core::frink::{dynamical_rho, frink_metrize, window_contraction_check};
use meandim_core::systems::{periodic_product_points, periodic_sft_points};
use meandim_core::*;

fn cat() -> ToralAutomorphism {
    ToralAutomorphism::new(vec![vec![2, 1], vec![1, 1]]).unwrap()
}

#[test]
fn shift_pipeline_from_certificate_to_metric() {
    let sys = ProductShiftSystem { site: Site::Alphabet { size: 2 }, h: SiteMap::Identity };
    let (fa, _) = periodic_product_points(&sys, 6, BaseMetric::Origin, 64).unwrap();
    let sigma = fa.restrict(&[LatticeVector(vec![1, 0])]);
    let cert = certify_expansive_finite(&sigma, 0.4, 6).unwrap();
    let (rho, params) = dynamical_rho(&sigma, &cert, 8, 8).unwrap();
    let dm = frink_metrize(&rho).unwrap();
    assert!(dm.d.triangle_violation().is_none());
    for n in 1..=4 {
        assert!(window_contraction_check(&dm, &sigma, params.alpha, n).unwrap().violation.is_none());
    }
    let t = scale_entropy_table(&EntropySource::Finite(&sigma), &[0.5, 0.25, 0.1], &[1, 2, 3]).unwrap();
    let h = topological_entropy_estimate(&t);
    assert!(h.lb >= 0.0 && h.ub <= 2f64.ln() + 1e-9);
}

#[test]
fn analytic_modulus_agrees_with_tail_formula() {
    let sys = System::Product(ProductShiftSystem { site: Site::Torus(QuantizedTorus::new(2, 4, Norm::Euclidean).unwrap()), h: SiteMap::Toral(cat()) });
    let cert = certify_expansive(&sys, 0.1).unwrap();
    let mut prev = 0;
    for eps in [0.5, 0.25, 0.1, 0.05, 0.01] {
        let m = modulus_of_expansivity(&sys, &cert, eps, 64).unwrap();
        assert!(m >= prev);
        prev = m;
    }
}

#[test]
fn three_term_periodic_points_form_an_action() {
    let sys = systems::build_three_term_system(3).unwrap();
    let (fa, words) = periodic_sft_points(&sys, &[2, 2], BaseMetric::Origin, 1 << 12).unwrap();
    assert_eq!(words.len(), 9);
    assert!(fa.commutes());
}

#[test]
fn circle_shift_metric_dimension_is_one() {
    let site = Site::Torus(QuantizedTorus::new(1, 4096, Norm::Euclidean).unwrap());
    let t = scale_entropy_table(&EntropySource::FullShift { site: &site, k: 2 }, &[1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0], &[1, 2]).unwrap();
    let m = metric_mean_dim_estimate(&t).unwrap();
    assert!((m.slope.lo - 1.0).abs() < 1e-9 && (m.slope.hi - 1.0).abs() < 1e-9);
}
