mod oracles;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regimen::traineval::{evaluate, MatchMode};

use oracles::eval::{brute_force_counts, compare, random_instance};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn scores_match_exhaustive_assignment(seed in any::<u64>()) {
        let (gold, pred) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        for (mode, lenient) in [(MatchMode::Strict, false), (MatchMode::Lenient, true)] {
            let report = evaluate(&gold, &pred, mode);
            let oracle = brute_force_counts(&gold, &pred, lenient);
            prop_assert!(compare(&report, &oracle).is_ok(), "{:?}: {:?}", mode, compare(&report, &oracle));
        }
    }

    #[test]
    fn strict_never_exceeds_lenient(seed in any::<u64>()) {
        let (gold, pred) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let s = evaluate(&gold, &pred, MatchMode::Strict);
        let l = evaluate(&gold, &pred, MatchMode::Lenient);
        prop_assert!(s.micro.tp <= l.micro.tp);
        prop_assert!(s.micro.f1 <= l.micro.f1);
        prop_assert!(s.micro.precision <= l.micro.precision);
        prop_assert!(s.micro.recall <= l.micro.recall);
        for (t, row) in &s.per_type {
            prop_assert!(row.f1 <= l.per_type[t].f1);
        }
    }

    #[test]
    fn gold_against_itself_is_perfect(seed in any::<u64>()) {
        let (gold, _) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        for mode in [MatchMode::Strict, MatchMode::Lenient] {
            let r = evaluate(&gold, &gold, mode);
            prop_assert_eq!(r.micro.fp, 0);
            prop_assert_eq!(r.micro.fn_, 0);
            if r.micro.tp > 0 {
                prop_assert_eq!(r.micro.f1, 1.0);
            }
        }
    }

    #[test]
    fn document_order_is_irrelevant(seed in any::<u64>()) {
        let (gold, mut pred) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let before = evaluate(&gold, &pred, MatchMode::Strict);
        pred.reverse();
        for d in &mut pred {
            d.relations.reverse();
        }
        prop_assert_eq!(before, evaluate(&gold, &pred, MatchMode::Strict));
    }
}

#[test]
fn random_instances_cover_partial_matches() {
    let (mut looser, mut mixed, mut orphan_docs) = (0, 0, 0);
    for seed in 0..200 {
        let (gold, pred) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let s = evaluate(&gold, &pred, MatchMode::Strict);
        let l = evaluate(&gold, &pred, MatchMode::Lenient);
        looser += usize::from(s.micro.tp < l.micro.tp);
        mixed += usize::from(s.micro.tp > 0 && s.micro.fp > 0 && s.micro.fn_ > 0);
        orphan_docs += usize::from(gold.len() != pred.len());
    }
    assert!(looser >= 20 && mixed >= 20 && orphan_docs >= 20, "{looser} {mixed} {orphan_docs}");
}
