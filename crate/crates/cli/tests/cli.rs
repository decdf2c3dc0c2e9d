use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn polysrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polysrl"))
        .args(args)
        .env_remove("POLYSRL_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = polysrl(args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_on_fixture() {
    let out = ok(&["stats", &fixture("tiny_spa.conll09"), "--lang", "spa"]);
    assert_eq!(out, "language,sentences,sentences_with_predicates,predicates\nspa,3,2,3\n");
    let out = ok(&["stats", &fixture("tiny_spa.conll09"), "--lang", "spa", "--no-header"]);
    assert_eq!(out, "spa,3,2,3\n");
}

#[test]
fn data_dir_resolves_relative_inputs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let out = ok(&["--data-dir", s(&dir), "stats", "empty.conll09", "--lang", "spa", "--no-header"]);
    assert_eq!(out, "spa,0,0,0\n");
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    assert_eq!(polysrl(&["stats"]).status.code(), Some(2));
    assert_eq!(polysrl(&["frobnicate"]).status.code(), Some(2));
    let missing = polysrl(&["stats", "/nonexistent/file.conll09", "--lang", "spa"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
}

fn write_run(dir: &Path, variant: &str, langs: &[&str], model: &str, train: &str) -> PathBuf {
    let list: Vec<String> = langs.iter().map(|l| format!("\"{}\"", l)).collect();
    let mut text = format!(
        "variant = \"{}\"\nlanguages = [{}]\noutput = \"out\"\n\n[model]\n{}\n\n[train]\nbatch_size = 4\n{}\n",
        variant,
        list.join(", "),
        model,
        train
    );
    for l in langs {
        text.push_str(&format!(
            "\n[data.{l}]\ntrain = \"{l}/train.conll09\"\ndev = \"{l}/dev.conll09\"\nvectors = \"{l}/vectors.txt\"\n"
        ));
    }
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn synth(dir: &Path, lang: &str, seed: &str) {
    ok(&[
        "synth",
        "--lang",
        lang,
        "--overfit",
        "--dim",
        "16",
        "--seed",
        seed,
        "--output-dir",
        s(&dir.join(lang)),
    ]);
}

#[test]
fn synth_train_predict_score_pipeline() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth(dir, "spa", "5");
    let run = write_run(dir, "mono", &["spa"], "", "target_dev_f1 = 99.0");
    ok(&["train", "--config", s(&run)]);

    let ckpt = dir.join("out/model.ckpt");
    assert!(ckpt.exists());
    assert!(dir.join("out/model.ckpt.manifest.json").exists());
    let log = fs::read_to_string(dir.join("out/train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,split,language,loss,precision,recall,f1\n"));

    let gold = dir.join("spa/dev.conll09");
    let pred = dir.join("pred.conll09");
    ok(&["predict", "--checkpoint", s(&ckpt), "--input", s(&gold), "--lang", "spa", "--output", s(&pred)]);
    assert_eq!(
        ok(&["stats", s(&pred), "--lang", "spa"]),
        ok(&["stats", s(&gold), "--lang", "spa"])
    );

    let report = dir.join("report.json");
    let overall = dir.join("overall.csv");
    let per_label = dir.join("per_label.csv");
    ok(&[
        "score",
        "--gold",
        s(&gold),
        "--pred",
        s(&pred),
        "--lang",
        "spa",
        "--report",
        s(&report),
        "--overall",
        s(&overall),
        "--per-label",
        s(&per_label),
    ]);
    let overall = fs::read_to_string(overall).unwrap();
    let labeled = overall.lines().find(|l| l.contains("labeled") && !l.contains("unlabeled")).unwrap();
    let f1: f64 = labeled.rsplit(',').next().unwrap().parse().unwrap();
    assert!(f1 >= 99.0, "labeled F1 {} in {}", f1, overall);
    assert!(fs::read_to_string(per_label).unwrap().starts_with("label,gold_count,precision,recall,f1\n"));

    let cmp = ok(&["analyze", "--reports", s(&report), s(&report)]);
    let rows: Vec<&str> = cmp.lines().skip(1).collect();
    assert!(rows.len() >= 3);
    assert!(rows.iter().all(|r| r.ends_with(",+0.00")), "{}", cmp);
}

#[test]
fn training_is_reproducible_and_seed_sensitive() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth(dir, "cat", "2");
    synth(dir, "eng", "3");
    let run = write_run(dir, "simple_polyglot", &["cat", "eng"], "hidden_size = 8", "max_epochs = 2");
    let ckpt = dir.join("out/model.ckpt");

    ok(&["train", "--config", s(&run)]);
    let first = fs::read(&ckpt).unwrap();
    let first_log = fs::read(dir.join("out/train_log.csv")).unwrap();
    ok(&["train", "--config", s(&run)]);
    assert_eq!(first, fs::read(&ckpt).unwrap());
    assert_eq!(first_log, fs::read(dir.join("out/train_log.csv")).unwrap());
    ok(&["train", "--config", s(&run), "--seed", "9"]);
    assert_ne!(first, fs::read(&ckpt).unwrap());
}

#[test]
fn predict_refuses_changed_vectors() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth(dir, "deu", "4");
    let run = write_run(dir, "mono", &["deu"], "hidden_size = 8", "max_epochs = 1");
    ok(&["train", "--config", s(&run)]);
    let vectors = dir.join("deu/vectors.txt");
    let original = fs::read_to_string(&vectors).unwrap();
    fs::write(&vectors, original.replacen('1', "2", 1)).unwrap();

    let ckpt = dir.join("out/model.ckpt");
    let input = dir.join("deu/dev.conll09");
    let pred = dir.join("pred.conll09");
    let args = ["predict", "--checkpoint", s(&ckpt), "--input", s(&input), "--lang", "deu", "--output", s(&pred)];
    let out = polysrl(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sha256"));

    let mut forced = args.to_vec();
    forced.extend(["--vectors", s(&vectors)]);
    ok(&forced);

    let wrong_lang = polysrl(&["predict", "--checkpoint", s(&ckpt), "--input", s(&input), "--lang", "eng", "--output", s(&pred)]);
    assert_eq!(wrong_lang.status.code(), Some(1));
}

fn write_vectors(path: &Path, rows: &[(String, Vec<f64>)]) {
    let dim = rows[0].1.len();
    let mut text = format!("{} {}\n", rows.len(), dim);
    for (w, v) in rows {
        let vals: Vec<String> = v.iter().map(|x| format!("{:.6}", x)).collect();
        text.push_str(&format!("{} {}\n", w, vals.join(" ")));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn embed_prepare_reduces_and_aligns() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let n = 40;
    let latent: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = i as f64;
            vec![(0.7 * t).sin() * 3.0, (1.3 * t).cos() * 2.0, (0.37 * t).sin()]
        })
        .collect();
    let eng: Vec<(String, Vec<f64>)> = latent
        .iter()
        .enumerate()
        .map(|(i, z)| (format!("e{}", i), vec![z[0], z[1], z[2], z[0] + z[1], 0.5 * z[2] - z[0]]))
        .collect();
    let cat: Vec<(String, Vec<f64>)> = latent
        .iter()
        .enumerate()
        .map(|(i, z)| (format!("c{}", i), vec![z[1] - z[2], 2.0 * z[0], z[2] + z[0], z[1], -z[0]]))
        .collect();
    write_vectors(&dir.join("eng.txt"), &eng);
    write_vectors(&dir.join("cat.txt"), &cat);
    let dict: String = (0..n).map(|i| format!("c{}\te{}\n", i, i)).collect();
    fs::write(dir.join("dict.tsv"), dict).unwrap();

    let eng3 = dir.join("eng3.txt");
    ok(&["embed", "prepare", "--vectors", s(&dir.join("eng.txt")), "--pca", "3", "--output", s(&eng3)]);
    let reduced = fs::read_to_string(&eng3).unwrap();
    assert_eq!(reduced.lines().count(), 40);
    assert!(reduced.lines().all(|l| l.split_whitespace().count() == 4));
    assert!(dir.join("eng3.txt.manifest.json").exists());

    let cat3 = dir.join("cat3.txt");
    let out = ok(&[
        "embed",
        "prepare",
        "--vectors",
        s(&dir.join("cat.txt")),
        "--pca",
        "3",
        "--align-to",
        s(&eng3),
        "--dict",
        s(&dir.join("dict.tsv")),
        "--ridge",
        "0",
        "--output",
        s(&cat3),
    ]);
    assert!(out.contains("usable_pairs=40"), "{}", out);
    let corr: f64 = out
        .split("mean_canonical_correlation=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(corr > 0.999, "{}", out);

    let too_wide = polysrl(&["embed", "prepare", "--vectors", s(&dir.join("eng.txt")), "--pca", "9", "--output", s(&dir.join("x.txt"))]);
    assert_eq!(too_wide.status.code(), Some(1));

    let mismatched = polysrl(&[
        "embed",
        "prepare",
        "--vectors",
        s(&dir.join("cat.txt")),
        "--pca",
        "2",
        "--align-to",
        s(&eng3),
        "--dict",
        s(&dir.join("dict.tsv")),
        "--output",
        s(&dir.join("y.txt")),
    ]);
    assert_eq!(mismatched.status.code(), Some(1));
    assert_eq!(polysrl(&["embed", "prepare", "--vectors", "a", "--pca", "2", "--align-to", "b", "--output", "c"]).status.code(), Some(2));
}
