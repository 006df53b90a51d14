use cbm_core::interpolation::{ts_free_entropy, InterpParams, InterpPath};
use cbm_core::model::{Instance, ModelParams};
use cbm_core::oracle::ExactGibbs;
use cbm_core::replica::{sup_h_rs, RsParams};
use proptest::prelude::*;

fn small_params() -> impl Strategy<Value = ModelParams> {
    (3usize..=10, 2usize..=3, 0.0f64..2.0, 0.0f64..=1.0)
        .prop_map(|(n, k, alpha, q)| ModelParams::new(n, k, alpha, q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rank_entropy_matches_enumeration(params in small_params(), seed in any::<u64>()) {
        let inst = Instance::generate(params, seed).unwrap();
        let g = ExactGibbs::enumerate(&inst).unwrap();
        prop_assert_eq!(g.z(), 1u64 << (params.n - inst.to_gf2().rank()));
    }

    #[test]
    fn json_round_trip(params in small_params(), seed in any::<u64>()) {
        let inst = Instance::generate(params, seed).unwrap();
        let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back.factors, &inst.factors);
        prop_assert_eq!(&back.couplings, &inst.couplings);
        prop_assert_eq!(back.free_entropy(), inst.free_entropy());
    }

    #[test]
    fn free_entropy_in_unit_range(params in small_params(), seed in any::<u64>()) {
        let phi = Instance::generate(params, seed).unwrap().free_entropy();
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&phi));
    }

    #[test]
    fn supremum_dominates_curve(k in 2usize..=5, alpha in 0.0f64..6.0, q in 0.0f64..=1.0, x in 0.0f64..=1.0) {
        let p = RsParams::new(k, alpha, q).unwrap();
        let best = sup_h_rs(&p, 801, 1e-10).unwrap();
        prop_assert!(best.h >= p.h_rs_scalar(x) - 1e-12);
        prop_assert!((0.0..=1.0).contains(&p.de_map(x)));
    }
}

#[test]
fn trials_do_not_depend_on_thread_count() {
    let model = ModelParams::new(60, 3, 0.5, 0.4).unwrap();
    let params = InterpParams::new(model, 12, 0.1, 0.1, 0.2).unwrap();
    let path = InterpPath::constant(12, 0.4, &model).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ts_free_entropy(&params, &path, 5, 0.3, 64, 99).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.seeds, b.seeds);
    assert_eq!(a.estimate.mean.to_bits(), b.estimate.mean.to_bits());
    assert_eq!(a.estimate.se.to_bits(), b.estimate.se.to_bits());
}
