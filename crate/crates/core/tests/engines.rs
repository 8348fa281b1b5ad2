mod common;

use lorcheck::fixtures::stuttered;
use lorcheck::pclor::{check, CheckOptions, Engine, Witness};
use lorcheck::qe_oracle::first_bad_depth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_systems_match_bruteforce() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..40 {
        let n = 2 + i % 5;
        let text = common::random_system(&mut rng, n, i % 2 == 1);
        let ts = stuttered(&text).unwrap();
        let expect = first_bad_depth(&ts).unwrap();
        for engine in [Engine::Lor, Engine::LorIc] {
            let opts = CheckOptions {
                engine,
                check_co: true,
                oracle_check: true,
                ..CheckOptions::default()
            };
            let r = check(&ts, &opts).unwrap_or_else(|e| panic!("{text}\n{engine:?}: {e}"));
            for it in &r.iterations {
                assert!(it.co.as_ref().unwrap().passes(), "{text}");
                assert_ne!(it.boundary, Some(false), "{text}");
            }
            match r.witness {
                Witness::Counterexample(t) => assert_eq!(Some(t.len()), expect, "{text}"),
                Witness::Invariant(_) => assert_eq!(expect, None, "{text}"),
            }
        }
    }
}

use lorcheck::pclor::Trace;
use lorcheck::witness::{parse_trace, write_trace};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engines_agree_and_keep_frame_conditions(seed in any::<u64>(), latches in 2usize..6, fail in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = common::random_system(&mut rng, latches, fail);
        let ts = stuttered(&text).unwrap();
        let expect = first_bad_depth(&ts).unwrap();
        for engine in [Engine::Lor, Engine::LorIc] {
            let opts = CheckOptions { engine, check_co: true, ..CheckOptions::default() };
            let r = check(&ts, &opts).unwrap();
            for it in &r.iterations {
                prop_assert!(it.co.as_ref().unwrap().passes());
            }
            let got = match r.witness {
                Witness::Counterexample(t) => Some(t.len()),
                Witness::Invariant(_) => None,
            };
            prop_assert_eq!(got, expect);
        }
    }

    #[test]
    fn trace_text_round_trips(states in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..6),
                              width in 0usize..3) {
        let inputs = (1..states.len()).map(|i| vec![i % 2 == 0; width]).collect();
        let t = Trace { states, inputs };
        prop_assert_eq!(parse_trace(&write_trace(&t)).unwrap(), t);
    }
}
