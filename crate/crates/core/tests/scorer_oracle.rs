mod common;

use common::oracle_score;
use polysrl::conll::Corpus;
use polysrl::scorer::score;
use polysrl::synth::{perturb, synth_corpus, SynthConfig};
use proptest::prelude::*;

fn small_corpus(seed: u64, sentences: usize) -> Corpus {
    let cfg = SynthConfig {
        sentences,
        max_len: 6,
        ..SynthConfig::small("cat")
    };
    synth_corpus(&cfg, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_item_multiset_oracle(seed in any::<u64>(), n in 1usize..=5, rate in 0.0f64..1.0) {
        let gold = small_corpus(seed, n);
        let pred = perturb(&gold, rate, "AM-LOC", seed ^ 1);
        let report = score(&gold, &pred).unwrap();
        let (labeled, unlabeled) = oracle_score(&gold, &pred);
        prop_assert_eq!(
            (report.labeled.correct, report.labeled.predicted, report.labeled.gold),
            (labeled.correct, labeled.predicted, labeled.gold)
        );
        prop_assert_eq!(
            (report.unlabeled.correct, report.unlabeled.predicted, report.unlabeled.gold),
            (unlabeled.correct, unlabeled.predicted, unlabeled.gold)
        );
        prop_assert_eq!((report.labeled.precision, report.labeled.recall, report.labeled.f1), labeled.prf());
        prop_assert_eq!((report.unlabeled.precision, report.unlabeled.recall, report.unlabeled.f1), unlabeled.prf());
        prop_assert!(report.labeled.correct <= report.unlabeled.correct);
        for m in [&report.labeled, &report.unlabeled] {
            prop_assert!((0.0..=100.0).contains(&m.precision));
            prop_assert!((0.0..=100.0).contains(&m.recall));
            prop_assert!((0.0..=100.0).contains(&m.f1));
        }
    }

    #[test]
    fn self_score_is_perfect(seed in any::<u64>(), n in 1usize..=5) {
        let gold = small_corpus(seed, n);
        prop_assume!(gold.predicate_count() > 0);
        let r = score(&gold, &gold).unwrap();
        prop_assert_eq!((r.labeled.precision, r.labeled.recall, r.labeled.f1), (100.0, 100.0, 100.0));
        prop_assert_eq!((r.unlabeled.precision, r.unlabeled.recall, r.unlabeled.f1), (100.0, 100.0, 100.0));
    }

    #[test]
    fn swapping_exchanges_precision_and_recall(seed in any::<u64>(), n in 1usize..=5, rate in 0.0f64..1.0) {
        let gold = small_corpus(seed, n);
        let pred = perturb(&gold, rate, "AM-LOC", seed ^ 7);
        let a = score(&gold, &pred).unwrap();
        let b = score(&pred, &gold).unwrap();
        prop_assert_eq!(a.labeled.precision, b.labeled.recall);
        prop_assert_eq!(a.labeled.recall, b.labeled.precision);
        prop_assert_eq!(a.unlabeled.precision, b.unlabeled.recall);
        prop_assert_eq!(a.unlabeled.recall, b.unlabeled.precision);
    }

    #[test]
    fn fixing_a_label_never_lowers_f1(seed in any::<u64>(), n in 1usize..=5, pick in any::<prop::sample::Index>()) {
        let gold = small_corpus(seed, n);
        let pred = perturb(&gold, 0.5, "AM-LOC", seed ^ 3);
        let mut wrong = Vec::new();
        for (s, (gs, ps)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
            for (t, (gt, pt)) in gs.tokens.iter().zip(&ps.tokens).enumerate() {
                for k in 0..gt.apreds.len() {
                    if let (Some(a), Some(b)) = (&gt.apreds[k], &pt.apreds[k]) {
                        if a != b {
                            wrong.push((s, t, k));
                        }
                    }
                }
            }
        }
        prop_assume!(!wrong.is_empty());
        let (s, t, k) = wrong[pick.index(wrong.len())];
        let mut fixed = pred.clone();
        fixed.sentences[s].tokens[t].apreds[k] = gold.sentences[s].tokens[t].apreds[k].clone();
        let before = score(&gold, &pred).unwrap().labeled.f1;
        let after = score(&gold, &fixed).unwrap().labeled.f1;
        prop_assert!(after >= before);
    }
}
