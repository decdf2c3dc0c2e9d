//! Lemma -> sense inventories observed in training data.
//!
//! Sense predictions are restricted to the senses a lemma was seen with. An
//! unseen lemma falls back to its first sense (`lemma.01`). In identity mode,
//! used for treebanks whose "sense" is just the predicate lemma, every lemma
//! has exactly one sense: itself.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::conll::PredicateInstance;
use crate::{Error, Result};

/// Languages whose sense annotation is the lemma itself.
pub const DEFAULT_IDENTITY_LANGUAGES: &[&str] = &["ces", "jpn"];

pub const FIRST_SENSE_SUFFIX: &str = ".01";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenseLexicon {
    pub language: String,
    pub identity_mode: bool,
    /// lemma -> (sense, training count), in prediction order.
    senses: BTreeMap<String, Vec<(String, usize)>>,
}

/// Orders senses by numeric suffix (`eat.02` before `eat.10`), then by
/// descending frequency, then by name. Non-numeric suffixes sort after numeric
/// ones.
fn sense_order(a: &(String, usize), b: &(String, usize)) -> std::cmp::Ordering {
    fn suffix(s: &str) -> (Option<u64>, &str) {
        let tail = s.rsplit_once('.').map_or(s, |(_, t)| t);
        (tail.parse().ok(), tail)
    }
    let (na, ta) = suffix(&a.0);
    let (nb, tb) = suffix(&b.0);
    let by_suffix = match (na, nb) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ta.cmp(tb),
    };
    by_suffix.then(b.1.cmp(&a.1)).then(a.0.cmp(&b.0))
}

impl SenseLexicon {
    /// Builds from (lemma, gold sense) observations.
    pub fn build<'a, I>(language: &str, identity_mode: bool, observations: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for (lemma, sense) in observations {
            let sense = if identity_mode { lemma } else { sense.trim() };
            *counts
                .entry(lemma.to_string())
                .or_default()
                .entry(sense.to_string())
                .or_default() += 1;
        }
        let senses = counts
            .into_iter()
            .map(|(lemma, by_sense)| {
                let mut list: Vec<(String, usize)> = by_sense.into_iter().collect();
                list.sort_by(sense_order);
                (lemma, list)
            })
            .collect();
        SenseLexicon {
            language: language.to_string(),
            identity_mode,
            senses,
        }
    }

    pub fn is_known(&self, lemma: &str) -> bool {
        self.senses.contains_key(lemma)
    }

    /// Stored senses of a known lemma; `[lemma]` in identity mode; otherwise
    /// empty for unknown lemmas.
    pub fn valid_senses(&self, lemma: &str) -> Vec<String> {
        if self.identity_mode {
            return vec![lemma.to_string()];
        }
        self.senses
            .get(lemma)
            .map(|list| list.iter().map(|(s, _)| s.clone()).collect())
            .unwrap_or_default()
    }

    /// Prediction for a lemma never seen in training.
    pub fn fallback_sense(&self, lemma: &str) -> String {
        if self.identity_mode {
            lemma.to_string()
        } else {
            format!("{}{}", lemma, FIRST_SENSE_SUFFIX)
        }
    }

    pub fn count(&self, lemma: &str, sense: &str) -> usize {
        self.senses
            .get(lemma)
            .and_then(|l| l.iter().find(|(s, _)| s == sense))
            .map_or(0, |(_, c)| *c)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.senses.keys().map(String::as_str)
    }

    pub fn lemma_count(&self) -> usize {
        self.senses.len()
    }

    /// Every stored sense, sorted and deduplicated.
    pub fn sense_inventory(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .senses
            .values()
            .flat_map(|l| l.iter().map(|(s, _)| s.clone()))
            .collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn mean_senses_per_lemma(&self) -> f64 {
        if self.senses.is_empty() {
            return 0.0;
        }
        self.senses.values().map(Vec::len).sum::<usize>() as f64 / self.senses.len() as f64
    }

    /// `# language=<code> identity=<bool>` followed by `lemma TAB sense TAB count`.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# language={} identity={}", self.language, self.identity_mode)?;
        for (lemma, list) in &self.senses {
            for (sense, count) in list {
                writeln!(out, "{}\t{}\t{}", lemma, sense, count)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("lexicon text is UTF-8")
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut language = None;
        let mut identity_mode = false;
        let mut senses: BTreeMap<String, Vec<(String, usize)>> = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if let Some(header) = line.strip_prefix('#') {
                for field in header.split_whitespace() {
                    match field.split_once('=') {
                        Some(("language", v)) => language = Some(v.to_string()),
                        Some(("identity", v)) => identity_mode = v == "true",
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parsed = match fields.as_slice() {
                [lemma, sense, count] => count.parse::<usize>().ok().map(|c| (*lemma, *sense, c)),
                _ => None,
            };
            let (lemma, sense, count) = parsed.ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected lemma<TAB>sense<TAB>count".into(),
            })?;
            senses
                .entry(lemma.to_string())
                .or_default()
                .push((sense.to_string(), count));
        }
        for list in senses.values_mut() {
            list.sort_by(sense_order);
        }
        Ok(SenseLexicon {
            language: language.ok_or_else(|| Error::Parse {
                line: 1,
                message: "missing '# language=..' header".into(),
            })?,
            identity_mode,
            senses,
        })
    }
}

/// Builds the lexicon of `language` from its training instances. Identity
/// mode is switched on for [`DEFAULT_IDENTITY_LANGUAGES`].
pub fn build_lexicon(instances: &[PredicateInstance], language: &str) -> SenseLexicon {
    let identity = DEFAULT_IDENTITY_LANGUAGES.contains(&language);
    SenseLexicon::build(
        language,
        identity,
        instances
            .iter()
            .map(|i| (i.lemma.as_str(), i.gold_sense.as_str())),
    )
}
