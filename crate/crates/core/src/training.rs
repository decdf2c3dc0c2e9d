//! Training loops.
//!
//! Polyglot epochs follow a stratified schedule: every instance of the larger
//! dataset once, the smaller dataset cycled in freshly shuffled rounds until
//! it matches, and the two streams interleaved by a seeded shuffle. Each
//! language therefore contributes the same number of steps per epoch while no
//! instance is skipped.
//!
//! Optimization is Adam with global-norm clipping. Per-instance gradients
//! inside a batch are computed in parallel and summed in schedule order, so
//! results do not depend on thread count. After every epoch the model is
//! scored on each language's dev set; the parameters with the best dev F1 of
//! the selection language (the non-pivot language for polyglot runs) are kept.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, ParamStore, Tensor};
use crate::conll::{Corpus, PredicateInstance};
use crate::embeddings::EmbeddingTable;
use crate::lexicon::{SenseLexicon, DEFAULT_IDENTITY_LANGUAGES};
use crate::model::{LanguageVocab, Mode, ModelConfig, SrlModel};
use crate::scorer::score;
use crate::{Error, Result};

pub const DEFAULT_PIVOT: &str = "eng";

/// One step of an epoch: which dataset (0 or 1) and which of its instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub dataset: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl EpochSchedule {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appearances of each instance of `dataset`, indexed by instance.
    pub fn counts(&self, dataset: usize, size: usize) -> Vec<usize> {
        let mut out = vec![0; size];
        for e in self.entries.iter().filter(|e| e.dataset == dataset) {
            out[e.index] += 1;
        }
        out
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// `max(n_a, n_b)` entries per dataset. The smaller dataset is drawn in
/// shuffled rounds, the last one truncated, so each of its instances appears
/// `⌊max/min⌋` or `⌈max/min⌉` times.
pub fn stratified_schedule(n_a: usize, n_b: usize, seed: u64, epoch: usize) -> Result<EpochSchedule> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::Training(format!(
            "stratified sampling needs two non-empty datasets, got sizes {} and {}",
            n_a, n_b
        )));
    }
    let mut rng = epoch_rng(seed, epoch);
    let target = n_a.max(n_b);
    let mut entries = Vec::with_capacity(2 * target);
    for (dataset, n) in [(0, n_a), (1, n_b)] {
        let mut drawn = 0;
        while drawn < target {
            let mut round: Vec<usize> = (0..n).collect();
            round.shuffle(&mut rng);
            let take = n.min(target - drawn);
            entries.extend(round[..take].iter().map(|&index| ScheduleEntry { dataset, index }));
            drawn += take;
        }
    }
    entries.shuffle(&mut rng);
    Ok(EpochSchedule { entries })
}

/// A shuffled single pass over one dataset.
pub fn monolingual_schedule(n: usize, seed: u64, epoch: usize) -> Result<EpochSchedule> {
    if n == 0 {
        return Err(Error::Training("training set is empty".into()));
    }
    let mut rng = epoch_rng(seed, epoch);
    let mut entries: Vec<ScheduleEntry> = (0..n).map(|index| ScheduleEntry { dataset: 0, index }).collect();
    entries.shuffle(&mut rng);
    Ok(EpochSchedule { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev-F1 improvement before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub seed: u64,
    /// Stop as soon as the selection dev F1 reaches this value.
    pub target_dev_f1: Option<f64>,
    /// Pivot language of polyglot runs.
    pub pivot: String,
    /// Languages whose sense annotation is the lemma itself.
    pub identity_languages: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            max_epochs: 30,
            patience: 5,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            seed: 1,
            target_dev_f1: None,
            pivot: DEFAULT_PIVOT.to_string(),
            identity_languages: DEFAULT_IDENTITY_LANGUAGES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Training("batch_size, max_epochs and patience must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Training("learning_rate and clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (k, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = grads.get(id).data();
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            let p = params.get_mut(id).data_mut();
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + self.epsilon);
            }
        }
    }
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[derive(Debug, Clone)]
pub struct LanguageData {
    pub train: Corpus,
    pub dev: Option<Corpus>,
    pub embeddings: EmbeddingTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub split: String,
    pub language: String,
    pub loss: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "epoch,split,language,loss,precision,recall,f1";

    pub fn to_csv(&self) -> String {
        let cell = |x: Option<f64>| x.map_or(String::new(), |v| format!("{:.6}", v));
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch,
                r.split,
                r.language,
                cell(r.loss),
                cell(r.precision),
                cell(r.recall),
                cell(r.f1)
            );
        }
        out
    }

    /// Dev F1 per epoch for `language`, in epoch order.
    pub fn dev_f1(&self, language: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.split == "dev" && r.language == language)
            .filter_map(|r| r.f1)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best dev epoch.
    pub model: SrlModel,
    pub log: TrainingLog,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub selection_language: String,
    pub epochs_run: usize,
}

/// Lexicon and output vocabulary of one language from its training instances.
pub fn build_outputs(
    language: &str,
    instances: &[PredicateInstance],
    identity: bool,
) -> (SenseLexicon, LanguageVocab) {
    let lexicon = SenseLexicon::build(
        language,
        identity,
        instances.iter().map(|i| (i.lemma.as_str(), i.gold_sense.as_str())),
    );
    let vocab = LanguageVocab::from_instances(instances, &lexicon);
    (lexicon, vocab)
}

/// Language whose dev F1 drives checkpoint selection.
pub fn selection_language(config: &ModelConfig, pivot: &str) -> Result<String> {
    if !config.variant.is_polyglot() {
        return Ok(config.languages[0].clone());
    }
    if !config.languages.iter().any(|l| l == pivot) {
        return Err(Error::Training(format!(
            "polyglot languages {:?} must include the pivot {:?}",
            config.languages, pivot
        )));
    }
    Ok(config.languages.iter().find(|l| *l != pivot).expect("two distinct languages").clone())
}

struct Prepared<'d> {
    language: String,
    sentences: &'d Corpus,
    instances: Vec<PredicateInstance>,
    dev: &'d Corpus,
    embeddings: &'d EmbeddingTable,
}

/// Per-instance dropout seed, unique across (run seed, epoch, step).
fn dropout_seed(seed: u64, epoch: usize, step: usize) -> u64 {
    let mut x = seed ^ ((epoch as u64) << 32) ^ step as u64;
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn train(
    data: &BTreeMap<String, LanguageData>,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    model_config.validate()?;
    config.validate()?;
    let selection = selection_language(model_config, &config.pivot)?;

    let mut prepared = Vec::new();
    let mut vocab = BTreeMap::new();
    let mut lexicons = BTreeMap::new();
    for lang in &model_config.languages {
        let d = data
            .get(lang)
            .ok_or_else(|| Error::Training(format!("no training data for {:?}", lang)))?;
        let dev = d
            .dev
            .as_ref()
            .ok_or_else(|| Error::Training(format!("language {:?} has no dev set", lang)))?;
        let instances = d.train.instances();
        if instances.is_empty() {
            return Err(Error::Training(format!("training data for {:?} has no predicates", lang)));
        }
        let identity = config.identity_languages.iter().any(|l| l == lang);
        let (lex, voc) = build_outputs(lang, &instances, identity);
        lexicons.insert(lang.clone(), lex);
        vocab.insert(lang.clone(), voc);
        prepared.push(Prepared {
            language: lang.clone(),
            sentences: &d.train,
            instances,
            dev,
            embeddings: &d.embeddings,
        });
    }

    let mut model = SrlModel::new(model_config.clone(), vocab, lexicons, config.seed)?;
    let mut adam = Adam::new(&model.params, config.learning_rate);
    let mut log = TrainingLog::default();
    let mut best: Option<(usize, f64, ParamStore)> = None;
    let mut stale = 0;
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        let schedule = match prepared.as_slice() {
            [only] => monolingual_schedule(only.instances.len(), config.seed, epoch)?,
            [a, b] => stratified_schedule(a.instances.len(), b.instances.len(), config.seed, epoch)?,
            _ => unreachable!("validated language count"),
        };
        if log::log_enabled!(log::Level::Debug) {
            let draws: Vec<String> = prepared
                .iter()
                .enumerate()
                .map(|(d, p)| format!("{}={}", p.language, schedule.entries.iter().filter(|e| e.dataset == d).count()))
                .collect();
            log::debug!("epoch {} schedule: {} entries ({})", epoch, schedule.len(), draws.join(", "));
        }

        let mut loss_sum = vec![0.0; prepared.len()];
        let mut loss_n = vec![0usize; prepared.len()];
        for (b, batch) in schedule.entries.chunks(config.batch_size).enumerate() {
            let model_ref = &model;
            let results: Vec<Result<(f64, Gradients)>> = batch
                .par_iter()
                .enumerate()
                .map(|(j, e)| {
                    let p = &prepared[e.dataset];
                    let inst = &p.instances[e.index];
                    let sentence = &p.sentences.sentences[inst.id.sentence];
                    let mode = Mode::Train {
                        seed: dropout_seed(config.seed, epoch, b * config.batch_size + j),
                    };
                    model_ref.loss_and_gradients(sentence, inst, p.embeddings, mode)
                })
                .collect();

            let mut total = Gradients::zeros_like(&model.params);
            for (e, r) in batch.iter().zip(results) {
                let (loss, grads) = r?;
                if !loss.is_finite() {
                    let p = &prepared[e.dataset];
                    let id = p.instances[e.index].id;
                    return Err(Error::Training(format!(
                        "non-finite loss {} at epoch {} on {} sentence {} predicate {}",
                        loss,
                        epoch,
                        p.language,
                        id.sentence + 1,
                        id.predicate + 1
                    )));
                }
                loss_sum[e.dataset] += loss;
                loss_n[e.dataset] += 1;
                total.accumulate(&grads);
            }
            total.scale(1.0 / batch.len() as f64);
            let norm = clip_gradients(&mut total, config.clip_norm);
            if !norm.is_finite() {
                return Err(Error::Training(format!("non-finite gradient norm at epoch {}", epoch)));
            }
            adam.step(&mut model.params, &total);
        }

        let mut selection_f1 = 0.0;
        for (k, p) in prepared.iter().enumerate() {
            log.rows.push(LogRow {
                epoch,
                split: "train".into(),
                language: p.language.clone(),
                loss: Some(loss_sum[k] / loss_n[k].max(1) as f64),
                precision: None,
                recall: None,
                f1: None,
            });
        }
        for p in &prepared {
            let preds = model.predict_corpus(p.dev, p.embeddings)?;
            let report = score(p.dev, &p.dev.with_predictions(&preds)?)?;
            log.rows.push(LogRow {
                epoch,
                split: "dev".into(),
                language: p.language.clone(),
                loss: None,
                precision: Some(report.labeled.precision),
                recall: Some(report.labeled.recall),
                f1: Some(report.labeled.f1),
            });
            if p.language == selection {
                selection_f1 = report.labeled.f1;
            }
        }
        log::info!("epoch {}: {} dev F1 {:.2}", epoch, selection, selection_f1);

        if best.as_ref().is_none_or(|(_, f, _)| selection_f1 > *f) {
            best = Some((epoch, selection_f1, model.params.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if config.target_dev_f1.is_some_and(|t| selection_f1 >= t) || stale >= config.patience {
            break;
        }
    }

    let (best_epoch, best_dev_f1, params) = best.expect("at least one epoch ran");
    model.params = params;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_dev_f1,
        selection_language: selection,
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use crate::synth::{synth_corpus, synth_embeddings, SynthConfig};
    use proptest::prelude::*;

    #[test]
    fn schedule_examples() {
        let s = stratified_schedule(100, 300, 1, 0).unwrap();
        assert_eq!(s.len(), 600);
        assert!(s.counts(1, 300).iter().all(|&c| c == 1));
        assert!(s.counts(0, 100).iter().all(|&c| c == 3));

        let s = stratified_schedule(50, 50, 4, 2).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.counts(0, 50).iter().chain(&s.counts(1, 50)).all(|&c| c == 1));

        let s = stratified_schedule(1, 5, 0, 0).unwrap();
        assert_eq!(s.counts(0, 1), vec![5]);

        assert!(stratified_schedule(0, 3, 0, 0).is_err());
        assert!(stratified_schedule(3, 0, 0, 0).is_err());
    }

    #[test]
    fn schedule_is_seeded_by_seed_and_epoch() {
        let a = stratified_schedule(7, 19, 3, 1).unwrap();
        assert_eq!(a, stratified_schedule(7, 19, 3, 1).unwrap());
        assert_ne!(a, stratified_schedule(7, 19, 3, 2).unwrap());
        assert_ne!(a, stratified_schedule(7, 19, 4, 1).unwrap());
    }

    #[test]
    fn expected_appearances_match_ratio() {
        let (small, large) = (7usize, 30usize);
        let seeds = 400;
        let mut totals = vec![0usize; small];
        for seed in 0..seeds {
            let s = stratified_schedule(large, small, seed, 0).unwrap();
            for (t, c) in totals.iter_mut().zip(s.counts(1, small)) {
                *t += c;
            }
        }
        let expected = large as f64 / small as f64;
        for t in totals {
            let mean = t as f64 / seeds as f64;
            assert!((mean - expected).abs() / expected < 0.05, "{} vs {}", mean, expected);
        }
    }

    proptest! {
        #[test]
        fn schedule_invariants(n_a in 1usize..60, n_b in 1usize..60, seed in any::<u64>(), epoch in 0usize..5) {
            let s = stratified_schedule(n_a, n_b, seed, epoch).unwrap();
            let m = n_a.max(n_b);
            prop_assert_eq!(s.len(), 2 * m);
            let ca = s.counts(0, n_a);
            let cb = s.counts(1, n_b);
            prop_assert!(ca.iter().chain(&cb).all(|&c| c >= 1));
            prop_assert_eq!(ca.iter().sum::<usize>(), m);
            prop_assert_eq!(cb.iter().sum::<usize>(), m);
            let (small, n_small) = if n_a <= n_b { (&ca, n_a) } else { (&cb, n_b) };
            let q = m / n_small;
            prop_assert!(small.iter().all(|&c| c == q || c == q + 1));
        }
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row(vec![1.0, -1.0])).unwrap();
        let mut grads = Gradients::zeros_like(&store);
        *grads.get_mut(id) = Tensor::row(vec![2.0, -0.5]);
        let mut adam = Adam::new(&store, 0.1);
        adam.step(&mut store, &grads);
        // The first bias-corrected step has magnitude lr in every coordinate.
        let w = store.get(id).data();
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row(vec![0.0, 0.0])).unwrap();
        let mut g = Gradients::zeros_like(&store);
        *g.get_mut(id) = Tensor::row(vec![3.0, 4.0]);
        assert_eq!(clip_gradients(&mut g, 1.0), 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-12);
        let before = g.global_norm();
        assert_eq!(clip_gradients(&mut g, 2.0), before);
        assert!((g.global_norm() - 1.0).abs() < 1e-12);
    }

    fn data(lang: &str, seed: u64) -> LanguageData {
        let cfg = SynthConfig::small(lang);
        let train = synth_corpus(&cfg, seed);
        LanguageData {
            dev: Some(train.clone()),
            train,
            embeddings: synth_embeddings(&cfg, 6, seed).unwrap(),
        }
    }

    fn tiny_model(variant: Variant, langs: &[&str]) -> ModelConfig {
        ModelConfig {
            hidden_size: 6,
            ..ModelConfig::desk(variant, langs, 6)
        }
    }

    #[test]
    fn training_is_deterministic_and_mono_ignores_other_languages() {
        let mut all = BTreeMap::new();
        all.insert("cat".to_string(), data("cat", 1));
        all.insert("eng".to_string(), data("eng", 2));
        let cfg = TrainConfig {
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let m = tiny_model(Variant::Mono, &["cat"]);
        let a = train(&all, &m, &cfg).unwrap();
        let b = train(&all, &m, &cfg).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.model, b.model);
        assert!(a.log.rows.iter().all(|r| r.language == "cat"));
        assert_eq!(a.log.rows.len(), 4);
    }

    #[test]
    fn kept_checkpoint_is_running_maximum() {
        let mut all = BTreeMap::new();
        all.insert("cat".to_string(), data("cat", 1));
        all.insert("eng".to_string(), data("eng", 2));
        let cfg = TrainConfig {
            max_epochs: 4,
            patience: 4,
            ..TrainConfig::default()
        };
        let out = train(&all, &tiny_model(Variant::LangId, &["cat", "eng"]), &cfg).unwrap();
        assert_eq!(out.selection_language, "cat");
        let dev = out.log.dev_f1("cat");
        let max = dev.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(out.best_dev_f1, max);
        assert_eq!(dev[out.best_epoch - 1], max);
        assert!(out.log.to_csv().starts_with(TrainingLog::CSV_HEADER));
    }

    #[test]
    fn training_errors() {
        let mut all = BTreeMap::new();
        let mut d = data("cat", 1);
        d.dev = None;
        all.insert("cat".to_string(), d);
        all.insert("eng".to_string(), data("eng", 2));
        let cfg = TrainConfig::default();
        let err = train(&all, &tiny_model(Variant::Mono, &["cat"]), &cfg).unwrap_err();
        assert!(err.to_string().contains("dev"));
        assert!(train(&all, &tiny_model(Variant::Mono, &["spa"]), &cfg).is_err());
        all.insert("spa".to_string(), data("spa", 3));
        let err = train(&all, &tiny_model(Variant::SimplePolyglot, &["spa", "cat"]), &cfg).unwrap_err();
        assert!(err.to_string().contains("pivot"));
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(&all, &tiny_model(Variant::Mono, &["spa"]), &bad).is_err());
    }
}
