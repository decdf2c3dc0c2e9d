use std::path::Path;

use polysrl::conll::{gold_predictions, parse_conll09, parse_str, write_conll09};
use polysrl::synth::{synth_corpus, SynthConfig};
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

#[test]
fn fixture_is_a_byte_exact_fixpoint() {
    let text = fixture("tiny_spa.conll09");
    let corpus = parse_str(&text, "spa").unwrap();
    assert_eq!(corpus.to_conll09(), text);
    let rewritten = write_conll09(&corpus, &gold_predictions(&corpus)).unwrap();
    assert_eq!(rewritten, text);
}

#[test]
fn fixture_stats_match_hand_count() {
    let corpus = parse_conll09(fixture("tiny_spa.conll09").as_bytes(), "spa").unwrap();
    let s = corpus.stats();
    assert_eq!((s.n_sentences, s.n_sentences_with_pred, s.n_predicates), (3, 2, 3));
    let empty = parse_str(&fixture("empty.conll09"), "spa").unwrap().stats();
    assert_eq!((empty.n_sentences, empty.n_sentences_with_pred, empty.n_predicates), (0, 0, 0));
}

proptest! {
    #[test]
    fn generated_corpora_round_trip(seed in any::<u64>(), sentences in 0usize..12, max_predicates in 0usize..4) {
        let cfg = SynthConfig { sentences, max_predicates, ..SynthConfig::small("deu") };
        let corpus = synth_corpus(&cfg, seed);
        let text = corpus.to_conll09();
        let again = parse_str(&text, "deu").unwrap();
        prop_assert_eq!(&again, &corpus);
        prop_assert_eq!(again.to_conll09(), text);
        prop_assert_eq!(again.instances().len(), corpus.predicate_count());
    }
}
