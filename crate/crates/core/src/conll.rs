//! CoNLL 2009 shared-task format.
//!
//! Each token row carries at least 14 tab-separated columns:
//!
//! ```text
//! ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL PDEPREL FILLPRED PRED APRED1 .. APREDk
//! ```
//!
//! Sentences are separated by blank lines. `_` marks an empty cell. The k-th
//! `APRED` column holds the argument labels of the k-th predicate (in token
//! order) of the sentence. Columns the tagger never reads (syntax, features,
//! predicted lemma/POS) are preserved verbatim so that writing a parsed corpus
//! back reproduces the input.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Minimum number of columns in a token row.
pub const MIN_COLUMNS: usize = 14;
const EMPTY: &str = "_";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub pos: String,
    /// PLEMMA, PPOS, FEAT, PFEAT, HEAD, PHEAD, DEPREL, PDEPREL.
    pub opaque: Vec<String>,
    pub fill_pred: bool,
    pub pred_sense: Option<String>,
    pub apreds: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub language: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// 0-based token positions of the marked predicates, in column order.
    pub fn predicate_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.fill_pred)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn predicate_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.fill_pred).count()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub language: String,
    pub sentences: Vec<Sentence>,
}

/// Identifies the k-th predicate of a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceId {
    pub sentence: usize,
    pub predicate: usize,
}

/// The annotations of a single predicate: one training instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateInstance {
    pub id: InstanceId,
    /// 0-based token position of the predicate.
    pub position: usize,
    pub lemma: String,
    pub gold_sense: String,
    /// 0-based token position -> label; absent positions are NULL.
    pub gold_args: BTreeMap<usize, String>,
}

/// A predicted sense plus argument labels for one predicate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub sense: String,
    /// 0-based token position -> label; NULL positions are omitted.
    pub args: BTreeMap<usize, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_sentences: usize,
    pub n_sentences_with_pred: usize,
    pub n_predicates: usize,
}

impl CorpusStats {
    pub const CSV_HEADER: &'static str = "language,sentences,sentences_with_predicates,predicates";

    pub fn csv_row(&self, language: &str) -> String {
        format!(
            "{},{},{},{}",
            language, self.n_sentences, self.n_sentences_with_pred, self.n_predicates
        )
    }
}

fn cell(value: &str) -> Option<String> {
    if value == EMPTY {
        None
    } else {
        Some(value.to_string())
    }
}

fn parse_row(line: &str, line_no: usize) -> Result<Token> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < MIN_COLUMNS {
        return Err(Error::Parse {
            line: line_no,
            message: format!(
                "expected at least {} tab-separated columns, found {}",
                MIN_COLUMNS,
                cols.len()
            ),
        });
    }
    let id = cols[0].parse::<usize>().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("token id {:?} is not a positive integer", cols[0]),
    })?;
    let fill_pred = match cols[12] {
        "Y" => true,
        EMPTY => false,
        other => {
            return Err(Error::Parse {
                line: line_no,
                message: format!("FILLPRED must be Y or _, found {:?}", other),
            })
        }
    };
    let pred_sense = cell(cols[13]);
    match (fill_pred, &pred_sense) {
        (true, None) => {
            return Err(Error::Validation(format!(
                "line {}: FILLPRED=Y with empty PRED",
                line_no
            )))
        }
        (false, Some(sense)) => {
            return Err(Error::Validation(format!(
                "line {}: PRED {:?} on a token without FILLPRED=Y",
                line_no, sense
            )))
        }
        _ => {}
    }
    let mut opaque = Vec::with_capacity(8);
    opaque.push(cols[3].to_string());
    opaque.extend(cols[5..12].iter().map(|c| c.to_string()));
    Ok(Token {
        id,
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        pos: cols[4].to_string(),
        opaque,
        fill_pred,
        pred_sense,
        apreds: cols[14..].iter().map(|c| cell(c)).collect(),
    })
}

fn validate_sentence(tokens: &[Token], first_line: usize) -> Result<()> {
    for (i, tok) in tokens.iter().enumerate() {
        if tok.id != i + 1 {
            return Err(Error::Validation(format!(
                "sentence at line {}: token ids must be 1..n contiguous, found {} at position {}",
                first_line,
                tok.id,
                i + 1
            )));
        }
    }
    let width = tokens[0].apreds.len();
    if let Some(tok) = tokens.iter().find(|t| t.apreds.len() != width) {
        return Err(Error::Validation(format!(
            "sentence at line {}: token {} has {} APRED columns, token 1 has {}",
            first_line,
            tok.id,
            tok.apreds.len(),
            width
        )));
    }
    let n_preds = tokens.iter().filter(|t| t.fill_pred).count();
    if n_preds != width {
        return Err(Error::Validation(format!(
            "sentence at line {}: {} predicates but {} APRED columns",
            first_line, n_preds, width
        )));
    }
    Ok(())
}

/// Parses a CoNLL 2009 stream. The language code is supplied by the caller.
pub fn parse_conll09<R: BufRead>(reader: R, language: &str) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut first_line = 0;

    let mut flush = |tokens: &mut Vec<Token>, first_line: usize| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        validate_sentence(tokens, first_line)?;
        sentences.push(Sentence {
            language: language.to_string(),
            tokens: std::mem::take(tokens),
        });
        Ok(())
    };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, first_line)?;
            continue;
        }
        if tokens.is_empty() {
            first_line = line_no;
        }
        tokens.push(parse_row(line, line_no)?);
    }
    flush(&mut tokens, first_line)?;

    Ok(Corpus {
        language: language.to_string(),
        sentences,
    })
}

pub fn parse_str(text: &str, language: &str) -> Result<Corpus> {
    parse_conll09(text.as_bytes(), language)
}

impl Corpus {
    pub fn new(language: impl Into<String>) -> Self {
        Corpus {
            language: language.into(),
            sentences: Vec::new(),
        }
    }

    /// One instance per (sentence, marked predicate); the k-th predicate reads
    /// its arguments from APRED column k.
    pub fn instances(&self) -> Vec<PredicateInstance> {
        let mut out = Vec::new();
        for (s_idx, sentence) in self.sentences.iter().enumerate() {
            for (k, pos) in sentence.predicate_positions().into_iter().enumerate() {
                let pred = &sentence.tokens[pos];
                let gold_args = sentence
                    .tokens
                    .iter()
                    .enumerate()
                    .filter_map(|(i, t)| t.apreds[k].as_ref().map(|l| (i, l.clone())))
                    .collect();
                out.push(PredicateInstance {
                    id: InstanceId {
                        sentence: s_idx,
                        predicate: k,
                    },
                    position: pos,
                    lemma: pred.lemma.clone(),
                    gold_sense: pred.pred_sense.clone().unwrap_or_default(),
                    gold_args,
                });
            }
        }
        out
    }

    pub fn stats(&self) -> CorpusStats {
        let mut stats = CorpusStats {
            n_sentences: self.sentences.len(),
            ..CorpusStats::default()
        };
        for sentence in &self.sentences {
            let n = sentence.predicate_count();
            if n > 0 {
                stats.n_sentences_with_pred += 1;
            }
            stats.n_predicates += n;
        }
        stats
    }

    pub fn predicate_count(&self) -> usize {
        self.sentences.iter().map(Sentence::predicate_count).sum()
    }

    /// Copy of the corpus whose PRED/APRED cells carry `predictions`.
    /// Every predicate must have a prediction.
    pub fn with_predictions(
        &self,
        predictions: &BTreeMap<InstanceId, LabeledPrediction>,
    ) -> Result<Corpus> {
        let mut out = self.clone();
        for (s_idx, sentence) in out.sentences.iter_mut().enumerate() {
            let positions = sentence.predicate_positions();
            for (k, &pos) in positions.iter().enumerate() {
                let id = InstanceId {
                    sentence: s_idx,
                    predicate: k,
                };
                let pred = predictions.get(&id).ok_or_else(|| {
                    Error::Validation(format!(
                        "no prediction for predicate {} of sentence {}",
                        k + 1,
                        s_idx + 1
                    ))
                })?;
                if let Some(&bad) = pred.args.keys().find(|&&p| p >= sentence.tokens.len()) {
                    return Err(Error::Validation(format!(
                        "prediction for predicate {} of sentence {} labels position {} beyond sentence length {}",
                        k + 1,
                        s_idx + 1,
                        bad,
                        sentence.tokens.len()
                    )));
                }
                sentence.tokens[pos].pred_sense = Some(pred.sense.clone());
                for (i, tok) in sentence.tokens.iter_mut().enumerate() {
                    tok.apreds[k] = pred.args.get(&i).cloned();
                }
            }
        }
        Ok(out)
    }

    /// Serializes the corpus in CoNLL 2009 layout.
    pub fn to_conll09(&self) -> String {
        let mut out = String::new();
        for sentence in &self.sentences {
            for tok in &sentence.tokens {
                write_token(&mut out, tok);
            }
            out.push('\n');
        }
        out
    }
}

fn write_token(out: &mut String, tok: &Token) {
    let mut cols: Vec<&str> = Vec::with_capacity(MIN_COLUMNS + tok.apreds.len());
    let id = tok.id.to_string();
    cols.push(&id);
    cols.push(&tok.form);
    cols.push(&tok.lemma);
    cols.push(&tok.opaque[0]);
    cols.push(&tok.pos);
    cols.extend(tok.opaque[1..].iter().map(String::as_str));
    cols.push(if tok.fill_pred { "Y" } else { EMPTY });
    cols.push(tok.pred_sense.as_deref().unwrap_or(EMPTY));
    cols.extend(tok.apreds.iter().map(|a| a.as_deref().unwrap_or(EMPTY)));
    out.push_str(&cols.join("\t"));
    out.push('\n');
}

pub fn extract_instances(corpus: &Corpus) -> Vec<PredicateInstance> {
    corpus.instances()
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    corpus.stats()
}

/// Writes `corpus` with PRED/APRED cells replaced by `predictions`.
pub fn write_conll09(
    corpus: &Corpus,
    predictions: &BTreeMap<InstanceId, LabeledPrediction>,
) -> Result<String> {
    Ok(corpus.with_predictions(predictions)?.to_conll09())
}

/// Gold annotations of every instance, keyed for [`write_conll09`].
pub fn gold_predictions(corpus: &Corpus) -> BTreeMap<InstanceId, LabeledPrediction> {
    corpus
        .instances()
        .into_iter()
        .map(|inst| {
            (
                inst.id,
                LabeledPrediction {
                    sense: inst.gold_sense,
                    args: inst.gold_args,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, form: &str, fill: &str, pred: &str, apreds: &[&str]) -> String {
        let mut cols = vec![
            id.to_string(),
            form.to_string(),
            form.to_lowercase(),
            form.to_lowercase(),
            "NN".into(),
            "NN".into(),
            "_".into(),
            "_".into(),
            "0".into(),
            "0".into(),
            "ROOT".into(),
            "ROOT".into(),
            fill.into(),
            pred.into(),
        ];
        cols.extend(apreds.iter().map(|s| s.to_string()));
        cols.join("\t")
    }

    #[test]
    fn minimal_sentence() {
        let text = format!(
            "{}\n{}\n\n",
            row(1, "eat", "Y", "eat.01", &["_"]),
            row(2, "apples", "_", "_", &["A1"])
        );
        let corpus = parse_str(&text, "eng").unwrap();
        assert_eq!(corpus.sentences.len(), 1);
        assert_eq!(corpus.predicate_count(), 1);
        let inst = corpus.instances();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].gold_sense, "eat.01");
        assert_eq!(inst[0].lemma, "eat");
        assert_eq!(inst[0].gold_args, BTreeMap::from([(1, "A1".to_string())]));
        assert_eq!(corpus.to_conll09(), text);
    }

    #[test]
    fn sentence_without_predicates() {
        let text = format!("{}\n{}\n", row(1, "Hi", "_", "_", &[]), row(2, "there", "_", "_", &[]));
        let corpus = parse_str(&text, "eng").unwrap();
        assert_eq!(corpus.sentences[0].predicate_count(), 0);
        assert_eq!(
            corpus.stats(),
            CorpusStats {
                n_sentences: 1,
                n_sentences_with_pred: 0,
                n_predicates: 0
            }
        );
        assert!(corpus.instances().is_empty());
    }

    #[test]
    fn two_predicates_read_distinct_columns() {
        let text = [
            row(1, "John", "_", "_", &["A0", "_"]),
            row(2, "wants", "Y", "want.01", &["_", "_"]),
            row(3, "to", "_", "_", &["_", "_"]),
            row(4, "eat", "Y", "eat.01", &["A1", "_"]),
            row(5, "fish", "_", "_", &["_", "A1"]),
        ]
        .join("\n");
        let corpus = parse_str(&text, "eng").unwrap();
        let inst = corpus.instances();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].position, 1);
        assert_eq!(inst[1].position, 3);
        assert_eq!(inst[0].gold_args.get(&0).map(String::as_str), Some("A0"));
        assert_eq!(inst[0].gold_args.get(&3).map(String::as_str), Some("A1"));
        assert_eq!(inst[1].gold_args, BTreeMap::from([(4, "A1".to_string())]));
    }

    #[test]
    fn empty_stream() {
        let corpus = parse_str("", "deu").unwrap();
        assert!(corpus.instances().is_empty());
        assert_eq!(corpus.stats(), CorpusStats::default());
    }

    #[test]
    fn short_row_reports_line() {
        let text = format!("{}\n1\tfoo\tfoo\n", row(1, "a", "_", "_", &[]));
        match parse_str(&text, "eng") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn fillpred_without_sense() {
        let text = row(1, "eat", "Y", "_", &["_"]);
        assert!(matches!(parse_str(&text, "eng"), Err(Error::Validation(_))));
    }

    #[test]
    fn ragged_apreds() {
        let text = [
            row(1, "eat", "Y", "eat.01", &["_"]),
            row(2, "fish", "_", "_", &["A1", "_"]),
        ]
        .join("\n");
        assert!(matches!(parse_str(&text, "eng"), Err(Error::Validation(_))));
    }

    #[test]
    fn apred_count_must_match_predicates() {
        let text = [
            row(1, "eat", "_", "_", &["_"]),
            row(2, "fish", "_", "_", &["A1"]),
        ]
        .join("\n");
        assert!(matches!(parse_str(&text, "eng"), Err(Error::Validation(_))));
    }

    #[test]
    fn non_contiguous_ids() {
        let text = [row(1, "a", "_", "_", &[]), row(3, "b", "_", "_", &[])].join("\n");
        assert!(matches!(parse_str(&text, "eng"), Err(Error::Validation(_))));
    }

    #[test]
    fn predictions_replace_semantic_cells() {
        let text = format!(
            "{}\n{}\n\n",
            row(1, "eat", "Y", "eat.01", &["_"]),
            row(2, "apples", "_", "_", &["A1"])
        );
        let corpus = parse_str(&text, "eng").unwrap();
        let mut preds = gold_predictions(&corpus);
        assert_eq!(write_conll09(&corpus, &preds).unwrap(), text);

        let p = preds.get_mut(&InstanceId { sentence: 0, predicate: 0 }).unwrap();
        p.sense = "eat.02".into();
        p.args = BTreeMap::from([(0, "AM-TMP".to_string())]);
        let out = write_conll09(&corpus, &preds).unwrap();
        let back = parse_str(&out, "eng").unwrap();
        assert_eq!(back.sentences[0].tokens[0].pred_sense.as_deref(), Some("eat.02"));
        assert_eq!(back.sentences[0].tokens[0].apreds[0].as_deref(), Some("AM-TMP"));
        assert_eq!(back.sentences[0].tokens[1].apreds[0], None);

        preds.clear();
        assert!(write_conll09(&corpus, &preds).is_err());
    }

    #[test]
    fn stats_csv() {
        let s = CorpusStats {
            n_sentences: 13200,
            n_sentences_with_pred: 12876,
            n_predicates: 37444,
        };
        assert_eq!(s.csv_row("cat"), "cat,13200,12876,37444");
    }
}
