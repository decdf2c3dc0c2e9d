//! The SRL tagger.
//!
//! Every instance is one sentence with one marked predicate. Each token's input
//! row is its (frozen) word vector, a learned predicate-indicator embedding
//! and, for the language-aware variants, a learned language-ID vector. A
//! stack of highway biLSTM layers encodes the sequence; two independent
//! softmax heads read the result:
//!
//! - the argument head labels every token with one of its language's argument
//!   labels or NULL (index 0), with no sequence constraints between tokens;
//! - the sense head reads the predicate position only and is masked down to
//!   the senses the lexicon allows for the predicate's lemma.
//!
//! Both heads are per language, so label and sense spaces never mix across
//! languages. [`Variant::LangSpecificLstm`] adds a private two-layer biLSTM per
//! language whose output joins the shared stack at the third layer.

pub mod checkpoint;
mod lstm;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph, ParamId, ParamStore, Tensor, Var};
use crate::conll::{Corpus, InstanceId, PredicateInstance, Sentence};
use crate::embeddings::EmbeddingTable;
use crate::lexicon::SenseLexicon;
use crate::{Error, Result};

pub use crate::conll::LabeledPrediction;
use lstm::BiLayerParams;

/// Depth of each language-specific stack.
pub const PRIVATE_LAYERS: usize = 2;
/// Shared layer (0-based) whose input concatenates the private stack output.
pub const PRIVATE_JOIN_LAYER: usize = 2;

pub const NULL_LABEL: &str = "_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mono,
    SimplePolyglot,
    LangId,
    LangSpecificLstm,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Mono,
        Variant::SimplePolyglot,
        Variant::LangId,
        Variant::LangSpecificLstm,
    ];

    pub fn uses_lang_id(self) -> bool {
        matches!(self, Variant::LangId | Variant::LangSpecificLstm)
    }

    pub fn is_polyglot(self) -> bool {
        self != Variant::Mono
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Mono => "mono",
            Variant::SimplePolyglot => "simple_polyglot",
            Variant::LangId => "lang_id",
            Variant::LangSpecificLstm => "lang_specific_lstm",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Model(format!("unknown variant {:?}", s)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// ISO 639-3 codes. Mono models have one; polyglot models two.
    pub languages: Vec<String>,
    pub word_dim: usize,
    pub shared_layers: usize,
    /// Per direction.
    pub hidden_size: usize,
    pub indicator_dim: usize,
    pub lang_id_dim: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Small configuration for laptop-scale runs: 3 layers of 32 units.
    pub fn desk(variant: Variant, languages: &[&str], word_dim: usize) -> Self {
        ModelConfig {
            variant,
            languages: languages.iter().map(|s| s.to_string()).collect(),
            word_dim,
            shared_layers: 3,
            hidden_size: 32,
            indicator_dim: 2,
            lang_id_dim: 8,
            dropout: 0.1,
        }
    }

    /// 4 layers of 300 units per direction over 100-dimensional vectors.
    pub fn paper_scale(variant: Variant, languages: &[&str]) -> Self {
        ModelConfig {
            shared_layers: 4,
            hidden_size: 300,
            ..ModelConfig::desk(variant, languages, 100)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = if self.variant.is_polyglot() { 2 } else { 1 };
        if self.languages.len() != expected {
            return Err(Error::Model(format!(
                "{} models take {} language(s), got {:?}",
                self.variant, expected, self.languages
            )));
        }
        if self.languages.len() == 2 && self.languages[0] == self.languages[1] {
            return Err(Error::Model("polyglot languages must differ".into()));
        }
        if self.shared_layers == 0 || self.hidden_size == 0 || self.word_dim == 0 || self.indicator_dim == 0 {
            return Err(Error::Model("layer count and dimensions must be positive".into()));
        }
        if self.variant.uses_lang_id() && self.lang_id_dim == 0 {
            return Err(Error::Model("language-ID variants need lang_id_dim > 0".into()));
        }
        if self.variant == Variant::LangSpecificLstm && self.shared_layers <= PRIVATE_JOIN_LAYER {
            return Err(Error::Model(format!(
                "language-specific stacks join at layer {}; need shared_layers >= {}",
                PRIVATE_JOIN_LAYER + 1,
                PRIVATE_JOIN_LAYER + 1
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Model(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of one input row.
    pub fn input_dim(&self) -> usize {
        self.word_dim
            + self.indicator_dim
            + if self.variant.uses_lang_id() {
                self.lang_id_dim
            } else {
                0
            }
    }

    pub fn language_index(&self, language: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l == language)
            .ok_or_else(|| Error::Model(format!("language {:?} is not one of {:?}", language, self.languages)))
    }
}

/// Output vocabularies of one language. Both lists are sorted; argument
/// label `labels[i]` is head index `i + 1`, index 0 being NULL.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageVocab {
    pub labels: Vec<String>,
    pub senses: Vec<String>,
}

impl LanguageVocab {
    pub fn new(mut labels: Vec<String>, mut senses: Vec<String>) -> Self {
        labels.sort();
        labels.dedup();
        senses.sort();
        senses.dedup();
        LanguageVocab { labels, senses }
    }

    /// Labels seen in `instances`; senses from the lexicon (none in identity mode).
    pub fn from_instances(instances: &[PredicateInstance], lexicon: &SenseLexicon) -> Self {
        let labels = instances
            .iter()
            .flat_map(|i| i.gold_args.values().cloned())
            .collect();
        let senses = if lexicon.identity_mode {
            Vec::new()
        } else {
            lexicon.sense_inventory()
        };
        LanguageVocab::new(labels, senses)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok().map(|i| i + 1)
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        index.checked_sub(1).and_then(|i| self.labels.get(i)).map(String::as_str)
    }

    pub fn sense_index(&self, sense: &str) -> Option<usize> {
        self.senses.binary_search_by(|s| s.as_str().cmp(sense)).ok()
    }

    fn is_sorted(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] < w[1]) && self.senses.windows(2).all(|w| w[0] < w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Heads {
    arg_w: ParamId,
    arg_b: ParamId,
    sense: Option<(ParamId, ParamId)>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    indicator: ParamId,
    lang_id: Option<ParamId>,
    shared: Vec<BiLayerParams>,
    private: BTreeMap<String, Vec<BiLayerParams>>,
    heads: BTreeMap<String, Heads>,
}

/// Whether dropout is active. Training masks are drawn from a generator seeded
/// with `seed`, so a given seed always yields the same masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub hidden: Var,
    /// n × (|labels| + 1).
    pub arg_logits: Var,
    /// 1 × |senses|, absent for identity-sense languages.
    pub sense_logits: Option<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrlModel {
    pub config: ModelConfig,
    pub vocab: BTreeMap<String, LanguageVocab>,
    pub lexicons: BTreeMap<String, SenseLexicon>,
    pub params: ParamStore,
    layout: Layout,
}

fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, limit: f64) -> Tensor {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect(),
    )
    .expect("shape matches data")
}

fn has_sense_head(vocab: &LanguageVocab, lexicon: &SenseLexicon) -> bool {
    !lexicon.identity_mode && !vocab.senses.is_empty()
}

impl SrlModel {
    /// Freshly initialized parameters for `config`. Every configured language
    /// needs a vocabulary and a lexicon.
    pub fn new(
        config: ModelConfig,
        vocab: BTreeMap<String, LanguageVocab>,
        lexicons: BTreeMap<String, SenseLexicon>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        Self::check_languages(&config, &vocab, &lexicons)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let h = config.hidden_size;

        let indicator = store.add("indicator", uniform(&mut rng, 2, config.indicator_dim, 0.5))?;
        let lang_id = if config.variant.uses_lang_id() {
            Some(store.add(
                "lang_id",
                uniform(&mut rng, config.languages.len(), config.lang_id_dim, 0.5),
            )?)
        } else {
            None
        };

        let mut shared = Vec::with_capacity(config.shared_layers);
        for l in 0..config.shared_layers {
            let input_dim = match l {
                0 => config.input_dim(),
                PRIVATE_JOIN_LAYER if config.variant == Variant::LangSpecificLstm => 4 * h,
                _ => 2 * h,
            };
            shared.push(BiLayerParams::init(&mut store, &format!("shared.{}", l), input_dim, h, &mut rng)?);
        }

        let mut private = BTreeMap::new();
        if config.variant == Variant::LangSpecificLstm {
            for lang in &config.languages {
                let mut stack = Vec::with_capacity(PRIVATE_LAYERS);
                for l in 0..PRIVATE_LAYERS {
                    let input_dim = if l == 0 { config.input_dim() } else { 2 * h };
                    stack.push(BiLayerParams::init(
                        &mut store,
                        &format!("private.{}.{}", lang, l),
                        input_dim,
                        h,
                        &mut rng,
                    )?);
                }
                private.insert(lang.clone(), stack);
            }
        }

        let mut heads = BTreeMap::new();
        for lang in &config.languages {
            let v = &vocab[lang];
            let n_out = v.labels.len() + 1;
            let limit = (6.0 / (2 * h + n_out) as f64).sqrt();
            let arg_w = store.add(format!("head.{}.arg.w", lang), uniform(&mut rng, 2 * h, n_out, limit))?;
            let arg_b = store.add(format!("head.{}.arg.b", lang), Tensor::zeros(1, n_out))?;
            let sense = if has_sense_head(v, &lexicons[lang]) {
                let n_s = v.senses.len();
                let limit = (6.0 / (2 * h + n_s) as f64).sqrt();
                Some((
                    store.add(format!("head.{}.sense.w", lang), uniform(&mut rng, 2 * h, n_s, limit))?,
                    store.add(format!("head.{}.sense.b", lang), Tensor::zeros(1, n_s))?,
                ))
            } else {
                None
            };
            heads.insert(lang.clone(), Heads { arg_w, arg_b, sense });
        }

        Ok(SrlModel {
            config,
            vocab,
            lexicons,
            params: store,
            layout: Layout {
                indicator,
                lang_id,
                shared,
                private,
                heads,
            },
        })
    }

    fn check_languages(
        config: &ModelConfig,
        vocab: &BTreeMap<String, LanguageVocab>,
        lexicons: &BTreeMap<String, SenseLexicon>,
    ) -> Result<()> {
        for lang in &config.languages {
            let v = vocab
                .get(lang)
                .ok_or_else(|| Error::Model(format!("no output vocabulary for {:?}", lang)))?;
            if !v.is_sorted() {
                return Err(Error::Model(format!("vocabulary of {:?} is not sorted and unique", lang)));
            }
            if !lexicons.contains_key(lang) {
                return Err(Error::Model(format!("no sense lexicon for {:?}", lang)));
            }
        }
        Ok(())
    }

    /// Reassembles a model from stored parameters, checking every expected
    /// tensor is present with the right shape.
    pub fn from_parts(
        config: ModelConfig,
        vocab: BTreeMap<String, LanguageVocab>,
        lexicons: BTreeMap<String, SenseLexicon>,
        params: ParamStore,
    ) -> Result<Self> {
        let template = SrlModel::new(config, vocab, lexicons, 0)?;
        if template.params.len() != params.len() {
            return Err(Error::Model(format!(
                "expected {} parameter tensors, found {}",
                template.params.len(),
                params.len()
            )));
        }
        let mut ordered = ParamStore::new();
        for (_, name, expected) in template.params.iter() {
            let id = params
                .id(name)
                .ok_or_else(|| Error::Model(format!("missing parameter {:?}", name)))?;
            let value = params.get(id);
            if value.dims() != expected.dims() {
                return Err(Error::Model(format!(
                    "parameter {:?} has shape {:?}, expected {:?}",
                    name,
                    value.dims(),
                    expected.dims()
                )));
            }
            ordered.add(name, value.clone())?;
        }
        Ok(SrlModel {
            params: ordered,
            ..template
        })
    }

    pub fn vocab_for(&self, language: &str) -> Result<&LanguageVocab> {
        self.vocab
            .get(language)
            .ok_or_else(|| Error::Model(format!("no vocabulary for {:?}", language)))
    }

    pub fn lexicon_for(&self, language: &str) -> Result<&SenseLexicon> {
        self.lexicons
            .get(language)
            .ok_or_else(|| Error::Model(format!("no lexicon for {:?}", language)))
    }

    /// Input rows: word vector ⊕ predicate indicator ⊕ language ID (if used).
    pub fn build_input<'a>(
        &self,
        g: &mut Graph<'a>,
        params: &'a ParamStore,
        sentence: &Sentence,
        predicate: usize,
        embeddings: &EmbeddingTable,
    ) -> Result<Var> {
        let lang_index = self.config.language_index(&sentence.language)?;
        if embeddings.dim() != self.config.word_dim {
            return Err(Error::Model(format!(
                "embeddings have {} dimensions, model expects {}",
                embeddings.dim(),
                self.config.word_dim
            )));
        }
        let n = sentence.len();
        if predicate >= n {
            return Err(Error::Model(format!("predicate position {} outside sentence of {}", predicate, n)));
        }
        let mut words = Vec::with_capacity(n * self.config.word_dim);
        for form in sentence.forms() {
            words.extend_from_slice(embeddings.lookup(form));
        }
        let words = g.constant(Tensor::matrix(n, self.config.word_dim, words)?);

        let flags: Vec<usize> = (0..n).map(|t| usize::from(t == predicate)).collect();
        let indicator = g.param(params, self.layout.indicator);
        let indicator = g.gather_rows(indicator, &flags)?;

        let mut parts = vec![words, indicator];
        if let Some(lang_id) = self.layout.lang_id {
            let table = g.param(params, lang_id);
            parts.push(g.gather_rows(table, &vec![lang_index; n])?);
        }
        g.concat(&parts, 1)
    }

    /// Runs the biLSTM stack over `input` and returns n × 2·hidden states.
    pub fn encode<'a>(
        &self,
        g: &mut Graph<'a>,
        params: &'a ParamStore,
        input: Var,
        language: &str,
        mode: Mode,
    ) -> Result<Var> {
        self.config.language_index(language)?;
        let mut rng = match mode {
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Mode::Eval => None,
        };
        let dropout = self.config.dropout;
        let mut apply_dropout = |g: &mut Graph<'a>, x: Var| -> Result<Var> {
            match rng.as_mut() {
                Some(rng) if dropout > 0.0 => {
                    let (n, m) = g.value(x).dims();
                    let keep = 1.0 / (1.0 - dropout);
                    let mask: Vec<f64> = (0..n * m)
                        .map(|_| if rng.gen::<f64>() < dropout { 0.0 } else { keep })
                        .collect();
                    let mask = g.constant(Tensor::matrix(n, m, mask)?);
                    g.mul(x, mask)
                }
                _ => Ok(x),
            }
        };

        let private_out = match self.layout.private.get(language) {
            Some(stack) => {
                let mut x = input;
                for layer in stack {
                    x = layer.run(g, params, x)?;
                    x = apply_dropout(g, x)?;
                }
                Some(x)
            }
            None if self.config.variant == Variant::LangSpecificLstm => {
                return Err(Error::Model(format!("no language-specific stack for {:?}", language)))
            }
            None => None,
        };

        let mut x = input;
        for (l, layer) in self.layout.shared.iter().enumerate() {
            if l == PRIVATE_JOIN_LAYER {
                if let Some(private) = private_out {
                    x = g.concat(&[x, private], 1)?;
                }
            }
            x = layer.run(g, params, x)?;
            x = apply_dropout(g, x)?;
        }
        Ok(x)
    }

    pub fn forward<'a>(
        &self,
        g: &mut Graph<'a>,
        params: &'a ParamStore,
        sentence: &Sentence,
        predicate: usize,
        embeddings: &EmbeddingTable,
        mode: Mode,
    ) -> Result<Forward> {
        let input = self.build_input(g, params, sentence, predicate, embeddings)?;
        let hidden = self.encode(g, params, input, &sentence.language, mode)?;
        let heads = self.layout.heads[&sentence.language];

        let arg_w = g.param(params, heads.arg_w);
        let arg_b = g.param(params, heads.arg_b);
        let arg_logits = g.matmul(hidden, arg_w)?;
        let arg_logits = g.add(arg_logits, arg_b)?;

        let sense_logits = match heads.sense {
            Some((w, b)) => {
                let at_pred = g.slice(hidden, 0, predicate, 1)?;
                let w = g.param(params, w);
                let b = g.param(params, b);
                let logits = g.matmul(at_pred, w)?;
                Some(g.add(logits, b)?)
            }
            None => None,
        };
        Ok(Forward {
            hidden,
            arg_logits,
            sense_logits,
        })
    }

    /// Mask (true = excluded) over the sense vocabulary for `lemma`, or `None`
    /// when the lexicon does not know the lemma.
    fn sense_mask(&self, language: &str, lemma: &str) -> Result<Option<(Vec<bool>, Vec<String>)>> {
        let vocab = self.vocab_for(language)?;
        let valid = self.lexicon_for(language)?.valid_senses(lemma);
        if valid.is_empty() {
            return Ok(None);
        }
        let mut mask = vec![true; vocab.senses.len()];
        for s in &valid {
            if let Some(i) = vocab.sense_index(s) {
                mask[i] = false;
            }
        }
        Ok(Some((mask, valid)))
    }

    /// Mean per-token argument cross-entropy plus the masked sense
    /// cross-entropy (omitted for identity-sense languages).
    pub fn loss_graph<'a>(
        &self,
        g: &mut Graph<'a>,
        params: &'a ParamStore,
        sentence: &Sentence,
        instance: &PredicateInstance,
        embeddings: &EmbeddingTable,
        mode: Mode,
    ) -> Result<Var> {
        let language = sentence.language.as_str();
        let fwd = self.forward(g, params, sentence, instance.position, embeddings, mode)?;
        let vocab = self.vocab_for(language)?;

        let mut gold = vec![0usize; sentence.len()];
        for (&pos, label) in &instance.gold_args {
            gold[pos] = vocab.label_index(label).ok_or_else(|| {
                Error::Model(format!("argument label {:?} is not in the {} label set", label, language))
            })?;
        }
        let probs = g.softmax(fwd.arg_logits);
        let arg_ce = g.cross_entropy(probs, &gold)?;
        let arg_term = g.scale(arg_ce, 1.0 / sentence.len() as f64);

        let Some(sense_logits) = fwd.sense_logits else {
            return Ok(arg_term);
        };
        let gold_sense = vocab.sense_index(instance.gold_sense.trim()).ok_or_else(|| {
            Error::Model(format!("sense {:?} is not in the {} sense set", instance.gold_sense, language))
        })?;
        let (mask, _) = self.sense_mask(language, &instance.lemma)?.ok_or_else(|| {
            Error::Model(format!("lemma {:?} is unknown to the {} lexicon", instance.lemma, language))
        })?;
        if mask[gold_sense] {
            return Err(Error::Model(format!(
                "sense {:?} is not a valid sense of lemma {:?}",
                instance.gold_sense, instance.lemma
            )));
        }
        let sense_probs = g.masked_softmax(sense_logits, &mask)?;
        let sense_ce = g.cross_entropy(sense_probs, &[gold_sense])?;
        g.add(arg_term, sense_ce)
    }

    pub fn loss(
        &self,
        sentence: &Sentence,
        instance: &PredicateInstance,
        embeddings: &EmbeddingTable,
        mode: Mode,
    ) -> Result<f64> {
        let mut g = Graph::new();
        let loss = self.loss_graph(&mut g, &self.params, sentence, instance, embeddings, mode)?;
        Ok(g.value(loss).data()[0])
    }

    pub fn loss_and_gradients(
        &self,
        sentence: &Sentence,
        instance: &PredicateInstance,
        embeddings: &EmbeddingTable,
        mode: Mode,
    ) -> Result<(f64, Gradients)> {
        let mut g = Graph::new();
        let loss = self.loss_graph(&mut g, &self.params, sentence, instance, embeddings, mode)?;
        let grads = g.backward(loss, &self.params)?;
        Ok((g.value(loss).data()[0], grads))
    }

    /// Independent per-token argmax over the argument head; sense by masked
    /// argmax, or the lexicon's fallback for unseen lemmas.
    pub fn predict(
        &self,
        sentence: &Sentence,
        instance: &PredicateInstance,
        embeddings: &EmbeddingTable,
    ) -> Result<LabeledPrediction> {
        let language = sentence.language.as_str();
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, &self.params, sentence, instance.position, embeddings, Mode::Eval)?;
        let vocab = self.vocab_for(language)?;

        let logits = g.value(fwd.arg_logits);
        let mut args = BTreeMap::new();
        for t in 0..logits.rows() {
            let best = argmax(logits.row_slice(t), |_| true).expect("non-empty row");
            if let Some(label) = vocab.label(best) {
                args.insert(t, label.to_string());
            }
        }

        let lexicon = self.lexicon_for(language)?;
        let sense = match self.sense_mask(language, &instance.lemma)? {
            None => lexicon.fallback_sense(&instance.lemma),
            Some((_, valid)) if valid.len() == 1 => valid[0].clone(),
            Some((mask, valid)) => match fwd.sense_logits {
                Some(sl) => {
                    let row = g.value(sl).row_slice(0);
                    match argmax(row, |i| !mask[i]) {
                        Some(i) => vocab.senses[i].clone(),
                        None => valid[0].clone(),
                    }
                }
                None => valid[0].clone(),
            },
        };
        Ok(LabeledPrediction { sense, args })
    }

    /// Predictions for every predicate of `corpus`, computed in parallel.
    pub fn predict_corpus(
        &self,
        corpus: &Corpus,
        embeddings: &EmbeddingTable,
    ) -> Result<BTreeMap<InstanceId, LabeledPrediction>> {
        let instances = corpus.instances();
        let preds: Result<Vec<_>> = instances
            .par_iter()
            .map(|inst| {
                let sentence = &corpus.sentences[inst.id.sentence];
                self.predict(sentence, inst, embeddings).map(|p| (inst.id, p))
            })
            .collect();
        Ok(preds?.into_iter().collect())
    }
}

fn argmax(row: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in row.iter().enumerate() {
        if allowed(i) && best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}
