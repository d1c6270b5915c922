use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sharpmax::tree_sim::{
    discretize_ito, exact_moments, mc_estimate, random_martingale_tree, random_submartingale_tree,
    Integrand, ItoScheme, McEstimate, Mode, RandomTreeSpec, RandomWalkTransform, ReflectedWalk,
    TreeBuilder, TreeSampler,
};
use sharpmax::verify::sample_rng;

fn small() -> RandomTreeSpec {
    RandomTreeSpec {
        max_depth: 3,
        ..RandomTreeSpec::default()
    }
}

#[test]
fn tree_estimates_within_three_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut misses = 0;
    for run in 0..20u64 {
        let tree = if run % 2 == 0 {
            random_martingale_tree(&mut rng, &small()).unwrap()
        } else {
            random_submartingale_tree(&mut rng, &small(), 1.0).unwrap()
        };
        let exact = exact_moments(&tree, 2.0).unwrap();
        let e = mc_estimate(&TreeSampler::new(tree), 2.0, 50_000, run).unwrap();
        for (est, se, truth) in [
            (e.summary.e_gstar_p, e.se_gstar_p, exact.e_gstar_p),
            (e.summary.e_f_p, e.se_f_p, exact.e_f_p),
            (e.summary.ratio, e.se_ratio, exact.ratio),
        ] {
            if (est - truth).abs() > 3.0 * se {
                misses += 1;
            }
        }
    }
    assert!(misses <= 1, "{misses} of 60 estimates outside 3 SE");
}

#[test]
fn standard_error_scales_as_inverse_square_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let tree = random_martingale_tree(&mut rng, &small()).unwrap();
    let s = TreeSampler::new(tree);
    let a = mc_estimate(&s, 2.0, 10_000, 1).unwrap();
    let b = mc_estimate(&s, 2.0, 40_000, 2).unwrap();
    let r = a.se_gstar_p / b.se_gstar_p;
    assert!((r - 2.0).abs() <= 0.2, "se ratio {r}");
}

fn with_threads(n: usize, f: impl FnOnce() -> McEstimate + Send) -> McEstimate {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn estimates_do_not_depend_on_worker_count() {
    let walk = RandomWalkTransform::new(30, 0.0, Integrand::RandomSign).unwrap();
    let one = with_threads(1, || mc_estimate(&walk, 3.0, 20_000, 5).unwrap());
    let three = with_threads(3, || mc_estimate(&walk, 3.0, 20_000, 5).unwrap());
    assert_eq!(one, three);
    let scheme = ItoScheme::with_steps(
        ReflectedWalk { s0: 0.0 },
        Integrand::Alternating,
        Integrand::Alternating,
        1.0,
        200,
        1.0,
    )
    .unwrap();
    let one = with_threads(1, || mc_estimate(&scheme, 2.0, 5_000, 9).unwrap());
    let three = with_threads(3, || mc_estimate(&scheme, 2.0, 5_000, 9).unwrap());
    assert_eq!(one, three);
    let other = mc_estimate(&scheme, 2.0, 5_000, 10).unwrap();
    assert_ne!(one, other);
}

#[test]
fn deterministic_pair_has_exact_estimate() {
    let mut b = TreeBuilder::new(Mode::Martingale, 1.0, 1.0);
    b.add_branch(TreeBuilder::ROOT, 1.0, 0.0, 0.0).unwrap();
    let e = mc_estimate(&TreeSampler::new(b.build().unwrap()), 2.0, 1_000, 0).unwrap();
    assert_eq!(e.summary.ratio, 1.0);
    assert_eq!(e.se_ratio, 0.0);
}

#[test]
fn random_walk_transform_respects_the_bound() {
    let walk = RandomWalkTransform::new(50, 0.0, Integrand::RandomSign).unwrap();
    let e = mc_estimate(&walk, 3.0, 100_000, 3).unwrap();
    assert!(e.summary.ratio <= 3.0 + 3.0 * e.se_ratio);
}

#[test]
fn submartingale_scheme_respects_the_bound() {
    let scheme = ItoScheme::with_steps(
        ReflectedWalk { s0: 0.0 },
        Integrand::RandomSign,
        Integrand::RandomSign,
        1.0,
        50,
        50.0,
    )
    .unwrap();
    let e = mc_estimate(&scheme, 3.0, 100_000, 4).unwrap();
    assert!(e.summary.ratio <= 6.0 + 3.0 * e.se_ratio);
}

#[test]
fn ito_path_is_doob_decomposed() {
    let scheme = ItoScheme::with_steps(
        ReflectedWalk { s0: 0.0 },
        Integrand::Alternating,
        Integrand::Alternating,
        0.5,
        400,
        1.0,
    )
    .unwrap();
    let path = discretize_ito(&scheme, &mut sample_rng(1, 0)).unwrap();
    assert_eq!(path.x.len(), 401);
    let h = scheme.dt.sqrt();
    for (k, w) in path.x.windows(2).enumerate() {
        assert!(w[1] >= 0.0 && ((w[1] - w[0]).abs() - h).abs() <= 1e-12);
        let dy = path.y[k + 1] - path.y[k];
        assert!(dy.abs() <= (w[1] - w[0]).abs() + 1e-12);
    }
}
