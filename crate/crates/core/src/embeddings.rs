//! Pretrained word vectors: loading, PCA reduction and crosslingual alignment.
//!
//! Alignment follows the pivot construction used for multilingual CCA: a
//! bilingual dictionary pairs foreign and English vectors, CCA finds paired
//! projections into a shared k-dimensional space, and foreign vectors are
//! carried into English coordinates by composing the foreign projection with
//! the pseudoinverse of the English projection. The English table is never
//! modified.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::{linalg, Error, Result};

/// Ridge added to both covariance matrices before whitening.
pub const DEFAULT_CCA_RIDGE: f64 = 1e-3;

/// Tolerance on canonical correlations exceeding 1.
pub const CORRELATION_SLACK: f64 = 1e-9;

/// Token -> vector table with a mean-vector fallback for unknown tokens.
///
/// Keys are lowercased on insertion and on lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    /// Row-major, one row per word.
    data: Vec<f64>,
    oov: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from (token, vector) pairs. Duplicate tokens keep their
    /// first vector.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut dim = None;
        let mut words = Vec::new();
        let mut index = HashMap::new();
        let mut data = Vec::new();
        for (word, vec) in entries {
            let d = *dim.get_or_insert(vec.len());
            if vec.len() != d {
                return Err(Error::Embedding(format!(
                    "vector for {:?} has {} components, expected {}",
                    word.as_ref(),
                    vec.len(),
                    d
                )));
            }
            let key = word.as_ref().to_lowercase();
            if index.contains_key(&key) {
                log::warn!("duplicate embedding for {:?}; keeping the first", key);
                continue;
            }
            index.insert(key.clone(), words.len());
            words.push(key);
            data.extend(vec);
        }
        let dim = dim.ok_or_else(|| Error::Embedding("no vectors".into()))?;
        if dim == 0 {
            return Err(Error::Embedding("zero-dimensional vectors".into()));
        }
        Ok(EmbeddingTable::assemble(dim, words, index, data))
    }

    fn assemble(dim: usize, words: Vec<String>, index: HashMap<String, usize>, data: Vec<f64>) -> Self {
        let mut table = EmbeddingTable {
            dim,
            words,
            index,
            data,
            oov: vec![0.0; dim],
        };
        table.recompute_oov();
        table
    }

    fn recompute_oov(&mut self) {
        let n = self.words.len().max(1) as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.data.chunks(self.dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        self.oov = mean;
    }

    /// Same vocabulary with every vector replaced; `rows` is row-major.
    fn with_vectors(&self, dim: usize, rows: Vec<f64>) -> Self {
        debug_assert_eq!(rows.len(), dim * self.words.len());
        EmbeddingTable::assemble(dim, self.words.clone(), self.index.clone(), rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn oov_vector(&self) -> &[f64] {
        &self.oov
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(&token.to_lowercase())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(&token.to_lowercase()).map(|&i| self.row(i))
    }

    /// Vector for `token`, or the OOV vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.get(token).unwrap_or(&self.oov)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.words.len(), self.dim, &self.data)
    }

    /// Writes one `token v1 v2 ...` line per entry; values round-trip exactly.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, word) in self.words.iter().enumerate() {
            write!(out, "{}", word)?;
            for x in self.row(i) {
                write!(out, " {}", x)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Reads whitespace-separated `token v1 .. vd` lines (GloVe text format). A
/// leading `count dim` header line, as written by word2vec, is skipped.
pub fn load_vectors<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if line_no == 1 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let values = rest
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad vector component: {}", e),
            })?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d || d == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} components, found {}", d, values.len()),
            });
        }
        entries.push((word.to_string(), values));
    }
    if entries.is_empty() {
        return Err(Error::Embedding("vector file contains no entries".into()));
    }
    EmbeddingTable::from_entries(entries)
}

/// A fitted principal-component projection.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// d×k, columns are unit principal directions.
    pub components: DMatrix<f64>,
    /// Sample variance (n−1 denominator) along each retained component,
    /// non-increasing.
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(table: &EmbeddingTable, k: usize) -> Result<Self> {
        let (n, d) = (table.len(), table.dim());
        if k == 0 || k > d {
            return Err(Error::Embedding(format!(
                "cannot keep {} components of {}-dimensional vectors",
                k, d
            )));
        }
        if n < k + 1 {
            return Err(Error::Embedding(format!(
                "PCA to {} components needs at least {} entries, table has {}",
                k,
                k + 1,
                n
            )));
        }
        let mut x = table.matrix();
        let mean = column_mean(&x);
        center(&mut x, &mean);
        let (singular, v) = linalg::tall_right_svd(&x)?;

        let mut components = DMatrix::zeros(d, k);
        let mut variances = Vec::with_capacity(k);
        for j in 0..k {
            let mut dir: DVector<f64> = v.column(j).into_owned();
            // Deterministic sign: largest-magnitude coordinate positive.
            let pivot = dir.iamax();
            if dir[pivot] < 0.0 {
                dir.neg_mut();
            }
            components.set_column(j, &dir);
            let s = singular[j];
            variances.push(s * s / (n as f64 - 1.0));
        }
        Ok(Pca {
            mean,
            components,
            variances,
        })
    }

    pub fn transform(&self, table: &EmbeddingTable) -> Result<EmbeddingTable> {
        if table.dim() != self.mean.len() {
            return Err(Error::Embedding(format!(
                "PCA fitted on {} dimensions applied to {}",
                self.mean.len(),
                table.dim()
            )));
        }
        let mut x = table.matrix();
        center(&mut x, &self.mean);
        let projected = x * &self.components;
        Ok(table.with_vectors(self.components.ncols(), row_major(&projected)))
    }
}

/// Centers the table and projects it onto its top-`k` principal directions.
pub fn pca_reduce(table: &EmbeddingTable, k: usize) -> Result<EmbeddingTable> {
    Pca::fit(table, k)?.transform(table)
}

/// Paired projections found by canonical correlation analysis.
#[derive(Debug, Clone)]
pub struct CcaProjection {
    /// d_f×k.
    pub proj_foreign: DMatrix<f64>,
    /// d_e×k.
    pub proj_english: DMatrix<f64>,
    /// Canonical correlations, non-increasing.
    pub correlations: Vec<f64>,
    pub mean_foreign: DVector<f64>,
    pub mean_english: DVector<f64>,
}

impl CcaProjection {
    pub fn mean_correlation(&self) -> f64 {
        self.correlations.iter().sum::<f64>() / self.correlations.len() as f64
    }

    /// Linear map taking centered foreign rows into English coordinates:
    /// `proj_foreign · pinv(proj_english)`.
    pub fn foreign_to_english(&self) -> Result<DMatrix<f64>> {
        Ok(&self.proj_foreign * linalg::pseudo_inverse(&self.proj_english)?)
    }
}

/// Fits CCA between paired rows of `x` (foreign) and `y` (English), keeping
/// `k` canonical pairs. Each covariance gets `ridge`·I before whitening; the
/// canonical pairs are the singular vectors of the whitened cross-covariance.
pub fn fit_cca(x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize, ridge: f64) -> Result<CcaProjection> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Numeric(format!(
            "CCA needs paired rows, got {} and {}",
            n,
            y.nrows()
        )));
    }
    if k == 0 || k > x.ncols().min(y.ncols()) {
        return Err(Error::Numeric(format!(
            "CCA dimension {} outside 1..={}",
            k,
            x.ncols().min(y.ncols())
        )));
    }
    if n <= k {
        return Err(Error::Numeric(format!(
            "CCA with k={} needs more than {} pairs, got {}",
            k, k, n
        )));
    }
    let mean_x = column_mean(x);
    let mean_y = column_mean(y);
    let mut xc = x.clone();
    let mut yc = y.clone();
    center(&mut xc, &mean_x);
    center(&mut yc, &mean_y);

    let denom = n as f64 - 1.0;
    let cxx = xc.transpose() * &xc / denom;
    let cyy = yc.transpose() * &yc / denom;
    let cxy = xc.transpose() * &yc / denom;
    if cxx.trace() <= 0.0 || cyy.trace() <= 0.0 {
        return Err(Error::Numeric("CCA input has zero variance".into()));
    }

    let wx = linalg::inverse_sqrt(&(cxx + DMatrix::identity(x.ncols(), x.ncols()) * ridge))
        .map_err(|e| Error::Numeric(format!("foreign side: {}; add ridge regularization", e)))?;
    let wy = linalg::inverse_sqrt(&(cyy + DMatrix::identity(y.ncols(), y.ncols()) * ridge))
        .map_err(|e| Error::Numeric(format!("english side: {}; add ridge regularization", e)))?;
    let m = &wx * cxy * &wy;
    let svd = linalg::svd(&m)?;

    let mut a = DMatrix::zeros(x.ncols(), k);
    let mut b = DMatrix::zeros(y.ncols(), k);
    let mut correlations = Vec::with_capacity(k);
    for j in 0..k {
        a.set_column(j, &(&wx * svd.u.column(j)));
        b.set_column(j, &(&wy * svd.v.column(j)));
        correlations.push(svd.s[j]);
    }
    if let Some(&c) = correlations.iter().find(|&&c| c > 1.0 + CORRELATION_SLACK) {
        return Err(Error::Numeric(format!("canonical correlation {} exceeds 1", c)));
    }
    Ok(CcaProjection {
        proj_foreign: a,
        proj_english: b,
        correlations,
        mean_foreign: mean_x,
        mean_english: mean_y,
    })
}

/// Foreign–English word pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BilingualDictionary {
    pub pairs: Vec<(String, String)>,
}

impl BilingualDictionary {
    /// Deduplicates while keeping first-seen order.
    pub fn new<I, A, B>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (f, e) in pairs {
            let (f, e) = (f.into(), e.into());
            if f.is_empty() || e.is_empty() {
                return Err(Error::Embedding("dictionary entries must be non-empty".into()));
            }
            if seen.insert((f.clone(), e.clone())) {
                out.push((f, e));
            }
        }
        Ok(BilingualDictionary { pairs: out })
    }

    /// Two tab-separated tokens per line; `#` starts a comment line.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "dictionary lines hold exactly two tab-separated tokens".into(),
                });
            }
            pairs.push((fields[0].to_string(), fields[1].to_string()));
        }
        BilingualDictionary::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Result of mapping a foreign table into the English space.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub table: EmbeddingTable,
    pub cca: CcaProjection,
    pub usable_pairs: usize,
}

/// Maps `foreign` into the coordinates of `english` through CCA fitted on the
/// dictionary pairs whose tokens both sides know.
pub fn align_to_pivot(
    foreign: &EmbeddingTable,
    english: &EmbeddingTable,
    dict: &BilingualDictionary,
    k: usize,
    ridge: f64,
) -> Result<Alignment> {
    let usable: Vec<(&[f64], &[f64])> = dict
        .pairs
        .iter()
        .filter_map(|(f, e)| Some((foreign.get(f)?, english.get(e)?)))
        .collect();
    if usable.len() <= k {
        return Err(Error::Embedding(format!(
            "alignment to {} dimensions needs more than {} in-vocabulary dictionary pairs, found {} usable",
            k,
            k,
            usable.len()
        )));
    }
    let x = DMatrix::from_row_iterator(
        usable.len(),
        foreign.dim(),
        usable.iter().flat_map(|(f, _)| f.iter().copied()),
    );
    let y = DMatrix::from_row_iterator(
        usable.len(),
        english.dim(),
        usable.iter().flat_map(|(_, e)| e.iter().copied()),
    );
    let cca = fit_cca(&x, &y, k, ridge)?;
    let map = cca.foreign_to_english()?;

    let mut all = foreign.matrix();
    center(&mut all, &cca.mean_foreign);
    let mut mapped = all * map;
    for mut row in mapped.row_iter_mut() {
        row += cca.mean_english.transpose();
    }
    let table = foreign.with_vectors(english.dim(), row_major(&mapped));
    Ok(Alignment {
        table,
        cca,
        usable_pairs: usable.len(),
    })
}

fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    x.row_mean().transpose()
}

fn center(x: &mut DMatrix<f64>, mean: &DVector<f64>) {
    for mut row in x.row_iter_mut() {
        row -= mean.transpose();
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
