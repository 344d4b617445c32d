//! Property-based invariants over randomly generated inputs.

use proptest::prelude::*;

use archsmith::arch::{format_architecture, parse_architecture, Architecture, Primitive, PrimitivePool};
use archsmith::extrapolate::{run_length_decode, run_length_encode, stretch};
use archsmith::proxy::{split_train_val, synthetic_base};

fn arb_primitive() -> impl Strategy<Value = Primitive> {
    prop_oneof![
        Just(Primitive::Mlp),
        Just(Primitive::Attention),
        Just(Primitive::Mamba),
    ]
}

fn arb_architecture(max_len: usize) -> impl Strategy<Value = Architecture> {
    prop::collection::vec(arb_primitive(), 1..=max_len).prop_map(Architecture::new)
}

proptest! {
    #[test]
    fn parse_format_roundtrip(arch in arb_architecture(64)) {
        let pool = PrimitivePool::three_primitive();
        let text = format_architecture(&arch);
        let back = parse_architecture(&text, &pool, arch.len()).unwrap();
        prop_assert_eq!(back, arch);
    }

    #[test]
    fn run_length_roundtrip(arch in arb_architecture(64)) {
        let runs = run_length_encode(&arch);
        // adjacent runs never share a primitive
        prop_assert!(runs.windows(2).all(|w| w[0].primitive != w[1].primitive));
        prop_assert_eq!(run_length_decode(&runs), arch.layers().to_vec());
    }

    #[test]
    fn stretch_apportionment(arch in arb_architecture(32), extra in 0usize..96) {
        let target = arch.len() + extra;
        let stretched = stretch(&arch, target).unwrap();
        // exact depth, run structure preserved, every run still present
        prop_assert_eq!(stretched.depth, target);
        let base_runs = run_length_encode(&arch);
        prop_assert_eq!(stretched.runs.len(), base_runs.len());
        for (orig, out) in base_runs.iter().zip(&stretched.runs) {
            prop_assert_eq!(orig.primitive, out.primitive);
            prop_assert!(out.length >= orig.length);
        }
        let total: usize = stretched.runs.iter().map(|r| r.length).sum();
        prop_assert_eq!(total, target);
        // per-primitive shares move by less than one layer per run
        for (orig, out) in base_runs.iter().zip(&stretched.runs) {
            let exact = orig.length as f64 * target as f64 / arch.len() as f64;
            prop_assert!((out.length as f64 - exact).abs() < 1.0);
        }
    }

    #[test]
    fn base_fitness_bounded(arch in arb_architecture(64)) {
        let base = synthetic_base(&arch);
        prop_assert!((0.5..=1.0).contains(&base));
    }

    #[test]
    fn split_partitions(items in 1usize..500, seed in any::<u64>()) {
        let (train, val) = split_train_val(items, 0.7, seed);
        prop_assert_eq!(train.len(), ((0.7 * items as f64).round() as usize).min(items));
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..items).collect::<Vec<_>>());
    }
}
