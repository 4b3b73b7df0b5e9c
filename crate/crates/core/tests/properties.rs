use linregions_core::bounds::{
    deep_rectifier_lower, deep_rectifier_lower_refined, rectifier_upper_bound, shallow_max_regions,
};
use linregions_core::constructions::{build_abs_net, build_sawtooth_readout, build_shi_layer, sawtooth_value};
use linregions_core::io::{network_from_json, network_to_json};
use linregions_core::nalgebra::{DMatrix, DVector};
use linregions_core::regions::{count_regions, enumerate_regions, oracle_count_by_grid};
use linregions_core::report::RegionReport;
use linregions_core::rng::{gaussian_rectifier_net, stream};
use linregions_core::{FeasibilityConfig, Layer, Network, NetworkStructure};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::Rng as _;

fn small_net() -> impl Strategy<Value = (Network, u64)> {
    (1usize..=2, prop::collection::vec(1usize..=4, 1..=2), any::<u64>()).prop_map(|(n0, widths, seed)| {
        let mut rng = stream(seed, 0);
        (gaussian_rectifier_net(n0, &widths, &mut rng).unwrap(), seed)
    })
}

fn cfg() -> FeasibilityConfig {
    FeasibilityConfig::default()
}

fn random_point(rng: &mut linregions_core::rng::Rng, dim: usize, half: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-half..half))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn network_is_affine_on_each_region((net, seed) in small_net()) {
        let rs = enumerate_regions(&net, &cfg()).unwrap();
        let mut rng = stream(seed, 1);
        for r in &rs.regions {
            let at_witness = net.output(&r.witness).unwrap();
            prop_assert!((at_witness - r.affine.apply(&r.witness)).amax() < 1e-8);
        }
        for _ in 0..50 {
            let x = random_point(&mut rng, net.input_dim, 5.0);
            let p = net.pattern_at(&x).unwrap();
            if let Some(r) = rs.find(&p) {
                prop_assert!((net.output(&x).unwrap() - r.affine.apply(&x)).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn patterns_and_regions_correspond((net, seed) in small_net()) {
        let rs = enumerate_regions(&net, &cfg()).unwrap();
        for pair in rs.regions.windows(2) {
            prop_assert!(pair[0].pattern < pair[1].pattern);
        }
        for r in &rs.regions {
            prop_assert!(r.contains(&r.witness));
            prop_assert_eq!(&net.pattern_at(&r.witness).unwrap(), &r.pattern);
        }
        let mut rng = stream(seed, 2);
        for _ in 0..50 {
            let x = random_point(&mut rng, net.input_dim, 5.0);
            let inside: Vec<_> = rs.regions.iter().filter(|r| r.contains(&x)).collect();
            prop_assert!(inside.len() <= 1);
            if let Some(r) = inside.first() {
                prop_assert_eq!(&net.pattern_at(&x).unwrap(), &r.pattern);
            }
        }
    }

    #[test]
    fn adding_a_layer_only_subdivides((net, _seed) in small_net()) {
        let mut previous = 1;
        for depth in 1..=net.depth() {
            let prefix = Network::new(net.input_dim, net.layers[..depth].to_vec()).unwrap();
            let count = count_regions(&prefix, &cfg()).unwrap();
            prop_assert!(count >= previous);
            previous = count;
        }
    }

    #[test]
    fn count_respects_upper_bounds((net, _seed) in small_net()) {
        let count = count_regions(&net, &cfg()).unwrap();
        let s = net.structure();
        prop_assert!(BigUint::from(count) <= rectifier_upper_bound(&s).unwrap());
        prop_assert!(count <= 1usize << net.total_units());
    }

    #[test]
    fn grid_oracle_never_exceeds_enumeration((net, _seed) in small_net()) {
        let b = 3.0;
        let box_cfg = FeasibilityConfig { box_halfwidth: b, ..cfg() };
        let count = count_regions(&net, &box_cfg).unwrap();
        let bounds = vec![(-b, b); net.input_dim];
        let seen = oracle_count_by_grid(&net, &bounds, if net.input_dim == 1 { 20001 } else { 301 }).unwrap();
        prop_assert!(seen <= count);
    }

    #[test]
    fn enumeration_is_deterministic((net, _seed) in small_net()) {
        let a = RegionReport::new(&enumerate_regions(&net, &cfg()).unwrap()).to_json().unwrap();
        let b = RegionReport::new(&enumerate_regions(&net, &cfg()).unwrap()).to_json().unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip_is_exact((net, _seed) in small_net()) {
        let back = network_from_json(&network_to_json(&net).unwrap()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn lines_in_general_position_attain_the_shallow_count(seed in any::<u64>(), n1 in 1usize..=6) {
        let mut rng = stream(seed, 3);
        let weights = DMatrix::from_fn(n1, 2, |_, _| rng.random_range(-1.0f64..1.0));
        let through = DMatrix::from_fn(n1, 2, |_, _| rng.random_range(-1.0f64..1.0));
        let bias = DVector::from_fn(n1, |i, _| -(weights.row(i).dot(&through.row(i))));
        for i in 0..n1 {
            prop_assume!(weights.row(i).norm() > 0.1);
            for j in 0..i {
                let m = DMatrix::from_rows(&[weights.row(i).clone_owned(), weights.row(j).clone_owned()]);
                prop_assume!(m.determinant().abs() > 1e-2);
                let meet = m.lu().solve(&DVector::from_vec(vec![-bias[i], -bias[j]])).unwrap();
                prop_assume!(meet.amax() < 500.0);
            }
        }
        let net = Network::new(2, vec![Layer::rectifier(weights, bias).unwrap()]).unwrap();
        let count = count_regions(&net, &cfg()).unwrap();
        prop_assert_eq!(BigUint::from(count), shallow_max_regions(2, n1 as u64));
    }

    #[test]
    fn deep_bounds_are_ordered(n0 in 1usize..=3, extra in prop::collection::vec(0usize..=6, 1..=4)) {
        let widths: Vec<usize> = extra.iter().map(|e| n0 + e).collect();
        let s = NetworkStructure::rectifier(n0, &widths).unwrap();
        let plain = deep_rectifier_lower(&s).unwrap();
        let refined = deep_rectifier_lower_refined(&s).unwrap();
        let upper = rectifier_upper_bound(&s).unwrap();
        prop_assert!(plain <= refined);
        prop_assert!(refined <= upper);
        prop_assert!(upper <= BigUint::from(2u32).pow(s.total_units() as u32));
    }

    #[test]
    fn readout_absorbs_the_mixing_row(p in 2usize..=6, bias in -1.0f64..0.0, u in 0.0f64..1.0) {
        let x = u * p as f64;
        let net = build_sawtooth_readout(p, bias).unwrap();
        let y = net.output(&DVector::from_element(1, x)).unwrap()[0];
        let triangle = ((x + 1.0).rem_euclid(2.0) - 1.0).abs();
        prop_assert!((sawtooth_value(p, x) - triangle).abs() < 1e-9);
        let expected = (triangle + bias).max(0.0);
        prop_assert!((y - expected).abs() < 1e-9, "{y} vs {expected}");
    }
}

#[test]
fn small_perturbations_do_not_lose_regions() {
    for (net, base) in [(build_abs_net().network, 4), (build_shi_layer(3).unwrap().network, 16)] {
        assert_eq!(count_regions(&net, &cfg()).unwrap(), base);
        let mut rng = stream(11, 4);
        for _ in 0..5 {
            let noisy = net.map_parameters(|v| v + rng.random_range(-1e-6..=1e-6));
            assert!(count_regions(&noisy, &cfg()).unwrap() >= base);
        }
    }
}
