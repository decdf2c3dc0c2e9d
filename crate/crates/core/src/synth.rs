//! Seeded synthetic corpora and word vectors.
//!
//! Used by the test suites and the CLI smoke paths where real treebanks are
//! unavailable. Argument labels are a deterministic function of the word and
//! its side of the predicate, so a model can learn them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conll::{Corpus, Sentence, Token};
use crate::embeddings::EmbeddingTable;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub language: String,
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Number of distinct word forms `w0 .. w{vocab-1}`.
    pub vocab: usize,
    pub labels: Vec<String>,
    /// Number of distinct predicate lemmas.
    pub lemmas: usize,
    /// Each lemma gets between 1 and this many senses.
    pub max_senses: usize,
    /// Predicates per sentence are drawn from `min_predicates..=max_predicates`.
    pub min_predicates: usize,
    pub max_predicates: usize,
    /// Probability that a non-predicate token is an argument.
    pub arg_rate: f64,
    /// When set, arguments are exactly the tokens within this distance of the
    /// predicate, which makes every label a function of the sentence.
    pub arg_window: Option<usize>,
    /// Sense cells repeat the lemma instead of `lemma.NN`.
    pub identity_senses: bool,
}

impl SynthConfig {
    pub fn small(language: &str) -> Self {
        SynthConfig {
            language: language.to_string(),
            sentences: 20,
            min_len: 3,
            max_len: 8,
            vocab: 12,
            labels: ["A0", "A1", "AM-TMP"].iter().map(|s| s.to_string()).collect(),
            lemmas: 4,
            max_senses: 2,
            min_predicates: 0,
            max_predicates: 2,
            arg_rate: 0.4,
            arg_window: None,
            identity_senses: false,
        }
    }
}

pub fn word(i: usize) -> String {
    format!("w{}", i)
}

pub fn lemma(i: usize) -> String {
    format!("p{}", i)
}

fn label_for(cfg: &SynthConfig, word: usize, before_predicate: bool) -> &str {
    let k = cfg.labels.len();
    &cfg.labels[(2 * word + usize::from(before_predicate)) % k]
}

fn blank_token(id: usize, form: String, lemma: String) -> Token {
    Token {
        id,
        form,
        lemma,
        pos: "X".into(),
        opaque: vec!["_".to_string(); 8],
        fill_pred: false,
        pred_sense: None,
        apreds: Vec::new(),
    }
}

/// Generates a corpus; identical `(cfg, seed)` always yields the same corpus.
pub fn synth_corpus(cfg: &SynthConfig, seed: u64) -> Corpus {
    assert!(cfg.min_len >= 1 && cfg.min_len <= cfg.max_len, "bad sentence length range");
    assert!(cfg.vocab > 0 && cfg.lemmas > 0 && cfg.max_senses > 0, "empty inventories");
    assert!(!cfg.labels.is_empty(), "no labels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let senses_of: Vec<usize> = (0..cfg.lemmas).map(|_| rng.gen_range(1..=cfg.max_senses)).collect();

    let mut corpus = Corpus::new(cfg.language.clone());
    for _ in 0..cfg.sentences {
        let n = rng.gen_range(cfg.min_len..=cfg.max_len);
        let words: Vec<usize> = (0..n).map(|_| rng.gen_range(0..cfg.vocab)).collect();
        let mut tokens: Vec<Token> = words
            .iter()
            .enumerate()
            .map(|(i, &w)| blank_token(i + 1, word(w), word(w)))
            .collect();

        let k = rng.gen_range(cfg.min_predicates.min(n)..=cfg.max_predicates.min(n));
        let mut positions: Vec<usize> = (0..n).collect();
        positions.shuffle(&mut rng);
        let mut positions = positions[..k].to_vec();
        positions.sort_unstable();

        for &p in &positions {
            let l = rng.gen_range(0..cfg.lemmas);
            let name = lemma(l);
            let sense = if cfg.identity_senses {
                name.clone()
            } else {
                format!("{}.{:02}", name, rng.gen_range(1..=senses_of[l]))
            };
            let tok = &mut tokens[p];
            tok.form = name.clone();
            tok.lemma = name;
            tok.fill_pred = true;
            tok.pred_sense = Some(sense);
        }
        for &p in &positions {
            let column: Vec<Option<String>> = (0..n)
                .map(|i| {
                    let is_arg = match cfg.arg_window {
                        Some(w) => i != p && i.abs_diff(p) <= w,
                        None => i != p && rng.gen_bool(cfg.arg_rate),
                    };
                    is_arg
                        .then(|| label_for(cfg, words[i], i < p).to_string())
                })
                .collect();
            for (tok, cell) in tokens.iter_mut().zip(column) {
                tok.apreds.push(cell);
            }
        }
        corpus.sentences.push(Sentence {
            language: cfg.language.clone(),
            tokens,
        });
    }
    corpus
}

/// Copy of `gold` with each sense and each argument cell independently
/// corrupted with probability `rate`: senses get a wrong suffix, cells are
/// dropped, relabeled (possibly with `extra_label`) or added.
pub fn perturb(gold: &Corpus, rate: f64, extra_label: &str, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = gold.clone();
    let mut labels: Vec<String> = gold
        .sentences
        .iter()
        .flat_map(|s| s.tokens.iter().flat_map(|t| t.apreds.iter().flatten().cloned()))
        .collect();
    labels.push(extra_label.to_string());
    labels.sort();
    labels.dedup();
    for sentence in &mut out.sentences {
        for tok in &mut sentence.tokens {
            if let Some(sense) = tok.pred_sense.as_mut() {
                if rng.gen_bool(rate) {
                    sense.push('x');
                }
            }
            for cell in &mut tok.apreds {
                if !rng.gen_bool(rate) {
                    continue;
                }
                *cell = match cell {
                    Some(_) if rng.gen_bool(0.5) => None,
                    _ => Some(labels.choose(&mut rng).expect("non-empty").clone()),
                };
            }
        }
    }
    out
}

/// A memorizable corpus of exactly 20 single-predicate sentences over six
/// word types (five words and one predicate lemma with one sense) and three
/// argument labels.
pub fn overfit_corpus(language: &str, seed: u64) -> Corpus {
    let cfg = overfit_config(language);
    synth_corpus(&cfg, seed)
}

pub fn overfit_config(language: &str) -> SynthConfig {
    SynthConfig {
        sentences: 20,
        min_len: 4,
        max_len: 8,
        vocab: 5,
        lemmas: 1,
        max_senses: 1,
        min_predicates: 1,
        max_predicates: 1,
        arg_window: Some(2),
        ..SynthConfig::small(language)
    }
}

/// Gaussian-ish random vectors for every word and lemma `cfg` can emit.
pub fn synth_embeddings(cfg: &SynthConfig, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..cfg.vocab).map(word).chain((0..cfg.lemmas).map(lemma));
    let entries: Vec<(String, Vec<f64>)> = names
        .map(|w| {
            let v = (0..dim)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>())
                .collect();
            (w, v)
        })
        .collect();
    EmbeddingTable::from_entries(entries)
}
