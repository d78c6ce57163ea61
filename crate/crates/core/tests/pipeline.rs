use proptest::prelude::*;

use privgraph_core::harness::{
    adjusted_rand_index, experiment_sbm, kmeans, lemniscate_sample, median, sbm_threshold_eps, ExperimentConfig,
    ExperimentKind, RhoRule, SbmMethod,
};
use privgraph_core::model::{sample_grdpg, sample_latent, ShapeParams};
use privgraph_core::privacy::edge_flip;
use privgraph_core::spectral::pase;
use privgraph_core::tda::topo_cluster;
use privgraph_core::LatentDistributionSpec;

#[test]
fn clean_shape_is_recovered_by_topological_clustering() {
    let shape = ShapeParams::default();
    let aris: Vec<f64> = (0..10)
        .map(|seed| {
            let (x, labels) = lemniscate_sample(&shape, 1200, seed).unwrap();
            let found = topo_cluster(&x.normalized(), 10.0).unwrap();
            adjusted_rand_index(&labels, &found).unwrap()
        })
        .collect();
    assert!(median(aris.iter().copied()) >= 0.95, "{aris:?}");
}

fn sbm_ari(n: usize, gamma: f64, rho: f64, eps: f64, seed: u64) -> f64 {
    let spec = LatentDistributionSpec::sbm(gamma, 0.25).unwrap();
    let (x, labels) = spec.sample_labeled(n, seed).unwrap();
    let a = sample_grdpg(&x, rho, seed).unwrap();
    let z = edge_flip(&a, eps, seed).unwrap();
    let e = pase(&z, eps, 2).unwrap();
    adjusted_rand_index(&labels, &kmeans(&e.embedding.xhat, 2, seed).unwrap()).unwrap()
}

#[test]
fn sbm_blocks_recovered_at_moderate_privacy() {
    let aris: Vec<f64> = (0..10).map(|s| sbm_ari(800, 0.8, 0.5, 2.0, s)).collect();
    assert!(median(aris.iter().copied()) >= 0.95, "{aris:?}");
}

#[test]
fn sbm_blocks_lost_far_below_threshold() {
    let eps = sbm_threshold_eps(800, 0.8, 0.5, 0.1);
    let aris: Vec<f64> = (0..10).map(|s| sbm_ari(800, 0.8, 0.5, eps, s)).collect();
    assert!(median(aris.iter().copied()) <= 0.1, "{aris:?}");
}

#[test]
fn sbm_experiment_rows_cover_methods_and_budgets() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Sbm, vec![200, 300], vec![2.0, f64::INFINITY], 2, 3);
    cfg.rho = Some(RhoRule::Fixed(0.5));
    let out = experiment_sbm(&cfg).unwrap();
    assert_eq!(out.rows.len(), 2 * 2 * 2 * 2);
    assert!(out.rows.iter().all(|r| r.runtime_ms.is_nan() && r.ari <= 1.0));
    assert_eq!(out.rows.iter().filter(|r| r.method == SbmMethod::PaseTopo).count(), 8);
}

fn spec_strategy() -> impl Strategy<Value = LatentDistributionSpec> {
    prop_oneof![
        (0.2..0.7f64, 0.0..1.0f64).prop_map(|(c, f)| {
            let r = f * (c / 2f64.sqrt()).min(1.0 - c);
            LatentDistributionSpec::shifted_circle(c, r)
        }),
        (0.05..0.95f64, 0.05..0.95f64).prop_map(|(g, a)| LatentDistributionSpec::sbm(g, a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampled_positions_are_admissible(spec in spec_strategy(), seed in 0u64..1000) {
        let x = sample_latent(&spec, 60, seed).unwrap();
        let (lo, hi) = x.inner_product_range();
        prop_assert!(lo >= -1e-12);
        prop_assert!(hi <= spec.inner_product_bounds().unwrap().1 + 1e-12);
    }

    #[test]
    fn sampling_is_deterministic(spec in spec_strategy(), seed in 0u64..1000) {
        let x = sample_latent(&spec, 40, seed).unwrap();
        prop_assert_eq!(&x, &sample_latent(&spec, 40, seed).unwrap());
        let rho = 0.9 / spec.inner_product_bounds().unwrap().1.max(1.0);
        prop_assert_eq!(sample_grdpg(&x, rho, seed).unwrap(), sample_grdpg(&x, rho, seed).unwrap());
    }

    #[test]
    fn ari_is_bounded_and_exact_on_identity(
        a in proptest::collection::vec(0usize..5, 1..60),
        b in proptest::collection::vec(0usize..5, 60),
    ) {
        let b = &b[..a.len()];
        prop_assert!(adjusted_rand_index(&a, b).unwrap() <= 1.0);
        prop_assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
    }
}
