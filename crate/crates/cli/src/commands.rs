use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use log::info;
use polysrl::conll::{parse_conll09, Corpus, CorpusStats};
use polysrl::embeddings::{align_to_pivot, load_vectors, pca_reduce, BilingualDictionary, EmbeddingTable};
use polysrl::manifest::{sha256_file, RunManifest};
use polysrl::model::checkpoint::{self, CheckpointMetadata, EmbeddingRef};
use polysrl::scorer::{compare, per_label_table, EvalReport};
use polysrl::synth::{overfit_config, synth_corpus, synth_embeddings, SynthConfig};
use polysrl::training::{self, LanguageData};
use serde_json::json;

use crate::config::{resolve, RunConfig};
use crate::{AnalyzeArgs, PredictArgs, PrepareArgs, ScoreArgs, StatsArgs, SynthArgs, TrainArgs};

pub struct Context {
    pub data_dir: Option<PathBuf>,
}

impl Context {
    fn input(&self, path: &Path) -> PathBuf {
        match &self.data_dir {
            Some(base) => resolve(base, path),
            None => path.to_path_buf(),
        }
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn read_corpus(path: &Path, lang: &str) -> Result<Corpus> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_conll09(BufReader::new(file), lang).with_context(|| format!("reading {}", path.display()))
}

fn read_vectors(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_vectors(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_table(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    table.write(&mut out)?;
    out.flush()?;
    Ok(())
}

fn finish(mut manifest: RunManifest, artifact: &Path) -> Result<()> {
    manifest.add_output(artifact)?;
    manifest.finished = Some(now());
    manifest.write_sidecar(artifact)?;
    Ok(())
}

pub fn stats(ctx: &Context, args: StatsArgs) -> Result<()> {
    let corpus = read_corpus(&ctx.input(&args.file), &args.lang)?;
    if !args.no_header {
        println!("{}", CorpusStats::CSV_HEADER);
    }
    println!("{}", corpus.stats().csv_row(&args.lang));
    Ok(())
}

pub fn embed_prepare(ctx: &Context, args: PrepareArgs) -> Result<()> {
    let started = now();
    let vectors_path = ctx.input(&args.vectors);
    let mut manifest = RunManifest::new(
        "embed prepare",
        json!({
            "pca": args.pca,
            "cca_dim": args.cca_dim,
            "ridge": args.ridge,
            "aligned": args.align_to.is_some(),
        }),
        None,
        started,
    );
    manifest.add_input(&vectors_path)?;

    let raw = read_vectors(&vectors_path)?;
    let reduced = pca_reduce(&raw, args.pca).context("PCA reduction")?;
    info!("reduced {} vectors from {} to {} dimensions", raw.len(), raw.dim(), args.pca);

    let output = match (&args.align_to, &args.dict) {
        (Some(pivot_path), Some(dict_path)) => {
            let pivot_path = ctx.input(pivot_path);
            let dict_path = ctx.input(dict_path);
            manifest.add_input(&pivot_path)?;
            manifest.add_input(&dict_path)?;
            let pivot = read_vectors(&pivot_path)?;
            if pivot.dim() != args.pca {
                bail!(
                    "pivot table has {} dimensions; prepare it with --pca {} first",
                    pivot.dim(),
                    args.pca
                );
            }
            let file = File::open(&dict_path).with_context(|| format!("opening {}", dict_path.display()))?;
            let dict = BilingualDictionary::load(BufReader::new(file))?;
            let k = args.cca_dim.unwrap_or(args.pca);
            let alignment = align_to_pivot(&reduced, &pivot, &dict, k, args.ridge).context("CCA alignment")?;
            println!(
                "usable_pairs={} cca_dim={} mean_canonical_correlation={:.6}",
                alignment.usable_pairs,
                k,
                alignment.cca.mean_correlation()
            );
            manifest.config["mean_canonical_correlation"] = json!(alignment.cca.mean_correlation());
            alignment.table
        }
        _ => reduced,
    };
    write_table(&args.output, &output)?;
    println!("wrote {} vectors of dimension {} to {}", output.len(), output.dim(), args.output.display());
    finish(manifest, &args.output)
}

pub fn train(ctx: &Context, args: TrainArgs) -> Result<()> {
    let started = now();
    let config_path = ctx.input(&args.config);
    let mut run = RunConfig::load(&config_path)?;
    let base = match &ctx.data_dir {
        Some(d) => d.clone(),
        None => config_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    run.resolve_paths(&base);
    if let Some(seed) = args.seed {
        run.train.seed = seed;
    }

    let mut manifest = RunManifest::new("train", serde_json::to_value(&run)?, Some(run.train.seed), started);
    manifest.add_input(&config_path)?;

    let mut data = BTreeMap::new();
    let mut embedding_refs = BTreeMap::new();
    let mut word_dim = None;
    for lang in &run.languages {
        let paths = &run.data[lang];
        let train = read_corpus(&paths.train, lang)?;
        manifest.add_input(&paths.train)?;
        let dev = match &paths.dev {
            Some(p) => {
                manifest.add_input(p)?;
                Some(read_corpus(p, lang)?)
            }
            None => None,
        };
        let embeddings = read_vectors(&paths.vectors)?;
        manifest.add_input(&paths.vectors)?;
        match word_dim {
            None => word_dim = Some(embeddings.dim()),
            Some(d) if d != embeddings.dim() => {
                bail!("vectors for {} have {} dimensions, expected {}", lang, embeddings.dim(), d)
            }
            _ => {}
        }
        embedding_refs.insert(
            lang.clone(),
            EmbeddingRef {
                path: paths.vectors.display().to_string(),
                sha256: sha256_file(&paths.vectors)?,
            },
        );
        data.insert(lang.clone(), LanguageData { train, dev, embeddings });
    }

    let model_config = run.model_config(word_dim.expect("at least one language"));
    let outcome = training::train(&data, &model_config, &run.train)?;
    println!(
        "best epoch {} of {}: {} dev F1 {:.2}",
        outcome.best_epoch, outcome.epochs_run, outcome.selection_language, outcome.best_dev_f1
    );

    std::fs::create_dir_all(&run.output).with_context(|| format!("creating {}", run.output.display()))?;
    let ckpt = run.output.join("model.ckpt");
    let meta = CheckpointMetadata {
        seed: run.train.seed,
        best_epoch: Some(outcome.best_epoch),
        best_dev_f1: Some(outcome.best_dev_f1),
        embeddings: embedding_refs,
    };
    checkpoint::save_file(&outcome.model, &meta, &ckpt)?;
    let log_path = run.output.join("train_log.csv");
    write_text(&log_path, &outcome.log.to_csv())?;
    manifest.add_output(&log_path)?;
    println!("wrote {} and {}", ckpt.display(), log_path.display());
    finish(manifest, &ckpt)
}

pub fn predict(ctx: &Context, args: PredictArgs) -> Result<()> {
    let started = now();
    let ckpt_path = ctx.input(&args.checkpoint);
    let input = ctx.input(&args.input);
    let (model, meta) =
        checkpoint::load_file(&ckpt_path).with_context(|| format!("loading {}", ckpt_path.display()))?;
    if !model.config.languages.contains(&args.lang) {
        bail!("checkpoint covers {:?}, not {}", model.config.languages, args.lang);
    }

    let vectors_path = match &args.vectors {
        Some(p) => ctx.input(p),
        None => {
            let r = meta
                .embeddings
                .get(&args.lang)
                .with_context(|| format!("checkpoint records no vectors for {}; pass --vectors", args.lang))?;
            let path = PathBuf::from(&r.path);
            let digest = sha256_file(&path).with_context(|| format!("hashing {}", path.display()))?;
            if digest != r.sha256 {
                bail!("{} changed since training (sha256 mismatch); pass --vectors to override", path.display());
            }
            path
        }
    };

    let mut manifest = RunManifest::new(
        "predict",
        json!({ "lang": args.lang, "checkpoint": ckpt_path.display().to_string() }),
        Some(meta.seed),
        started,
    );
    for p in [&ckpt_path, &input, &vectors_path] {
        manifest.add_input(p)?;
    }

    let embeddings = read_vectors(&vectors_path)?;
    let corpus = read_corpus(&input, &args.lang)?;
    let preds = model.predict_corpus(&corpus, &embeddings)?;
    let labeled = corpus.with_predictions(&preds)?;
    write_text(&args.output, &labeled.to_conll09())?;
    println!("labeled {} predicates in {}", preds.len(), args.output.display());
    finish(manifest, &args.output)
}

pub fn score(ctx: &Context, args: ScoreArgs) -> Result<()> {
    let started = now();
    let gold_path = ctx.input(&args.gold);
    let pred_path = ctx.input(&args.pred);
    let gold = read_corpus(&gold_path, &args.lang)?;
    let pred = read_corpus(&pred_path, &args.lang)?;
    let report = polysrl::scorer::score(&gold, &pred)?;
    print!("{}", report.summary());

    if let Some(path) = &args.report {
        let mut manifest = RunManifest::new("score", json!({ "lang": args.lang }), None, started);
        manifest.add_input(&gold_path)?;
        manifest.add_input(&pred_path)?;
        write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        finish(manifest, path)?;
    }
    if let Some(path) = &args.per_label {
        write_text(path, &per_label_table(&report))?;
    }
    if let Some(path) = &args.overall {
        write_text(path, &report.overall_csv())?;
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

pub fn analyze(ctx: &Context, args: AnalyzeArgs) -> Result<()> {
    let a = read_report(&ctx.input(&args.reports[0]))?;
    let b = read_report(&ctx.input(&args.reports[1]))?;
    let csv = compare(&a, &b)?.to_csv();
    match &args.output {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{}", csv);
            Ok(())
        }
    }
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let cfg = if args.overfit {
        overfit_config(&args.lang)
    } else {
        SynthConfig {
            sentences: args.sentences,
            ..SynthConfig::small(&args.lang)
        }
    };
    let train = synth_corpus(&cfg, args.seed);
    let dev = synth_corpus(&cfg, args.seed.wrapping_add(1));
    let vectors = synth_embeddings(&cfg, args.dim, args.seed)?;
    std::fs::create_dir_all(&args.output_dir)?;
    write_text(&args.output_dir.join("train.conll09"), &train.to_conll09())?;
    let dev = if args.overfit { &train } else { &dev };
    write_text(&args.output_dir.join("dev.conll09"), &dev.to_conll09())?;
    write_table(&args.output_dir.join("vectors.txt"), &vectors)?;
    println!(
        "wrote {} sentences ({} predicates) to {}",
        train.sentences.len(),
        train.predicate_count(),
        args.output_dir.display()
    );
    Ok(())
}
