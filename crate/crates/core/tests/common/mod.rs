//! Test-side oracles, written without touching the library's own algorithms.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use polysrl::conll::Corpus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl OracleScore {
    pub fn prf(&self) -> (f64, f64, f64) {
        let p = if self.predicted == 0 { 0.0 } else { 100.0 * self.correct as f64 / self.predicted as f64 };
        let r = if self.gold == 0 { 0.0 } else { 100.0 * self.correct as f64 / self.gold as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }
}

type Item = (usize, usize, Option<usize>, Option<String>);

/// Every scored item as (sentence, predicate column, position or None for
/// the sense item, label or sense string when labeled).
fn items(corpus: &Corpus, labeled: bool) -> BTreeMap<Item, usize> {
    let mut bag = BTreeMap::new();
    for (s, sentence) in corpus.sentences.iter().enumerate() {
        let preds: Vec<usize> = (0..sentence.tokens.len())
            .filter(|&i| sentence.tokens[i].fill_pred)
            .collect();
        for (k, &p) in preds.iter().enumerate() {
            let sense = sentence.tokens[p].pred_sense.clone().unwrap_or_default().trim().to_string();
            *bag.entry((s, k, None, labeled.then_some(sense))).or_insert(0) += 1;
            for (i, tok) in sentence.tokens.iter().enumerate() {
                if let Some(label) = &tok.apreds[k] {
                    *bag.entry((s, k, Some(i), labeled.then(|| label.clone()))).or_insert(0) += 1;
                }
            }
        }
    }
    bag
}

fn intersect(gold: &BTreeMap<Item, usize>, pred: &BTreeMap<Item, usize>) -> OracleScore {
    let correct = gold
        .iter()
        .map(|(item, &g)| g.min(pred.get(item).copied().unwrap_or(0)))
        .sum();
    OracleScore {
        correct,
        predicted: pred.values().sum(),
        gold: gold.values().sum(),
    }
}

/// (labeled, unlabeled) item-multiset intersections.
pub fn oracle_score(gold: &Corpus, pred: &Corpus) -> (OracleScore, OracleScore) {
    (
        intersect(&items(gold, true), &items(pred, true)),
        intersect(&items(gold, false), &items(pred, false)),
    )
}

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations,
/// sorted descending.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Sample covariance with n−1 denominator of the columns of `x` against `y`.
pub fn covariance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let mx: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).sum() / n as f64).collect();
    let my: Vec<f64> = (0..y.ncols()).map(|j| y.column(j).sum() / n as f64).collect();
    (0..x.ncols())
        .map(|a| {
            (0..y.ncols())
                .map(|b| (0..n).map(|i| (x[(i, a)] - mx[a]) * (y[(i, b)] - my[b])).sum::<f64>() / (n as f64 - 1.0))
                .collect()
        })
        .collect()
}

/// Principal-component variances: eigenvalues of the sample covariance.
pub fn pca_variances(x: &DMatrix<f64>) -> Vec<f64> {
    symmetric_eigenvalues(&covariance(x, x))
}

fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Solves L·X = B column by column for lower-triangular L.
fn forward_solve(l: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = l.len();
    let m = b[0].len();
    let mut x = vec![vec![0.0; m]; n];
    for c in 0..m {
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i][k] * x[k][c]).sum();
            x[i][c] = (b[i][c] - s) / l[i][i];
        }
    }
    x
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a.len())
        .map(|i| (0..b[0].len()).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn add_ridge(a: &mut [Vec<f64>], ridge: f64) {
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += ridge;
    }
}

/// Canonical correlations from the generalized eigenproblem
/// `Cxy (Cyy+λI)⁻¹ Cyx a = ρ² (Cxx+λI) a`, reduced to a symmetric problem via
/// the Cholesky factors of both covariances.
pub fn cca_correlations(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> Vec<f64> {
    let mut cxx = covariance(x, x);
    let mut cyy = covariance(y, y);
    add_ridge(&mut cxx, ridge);
    add_ridge(&mut cyy, ridge);
    let cxy = covariance(x, y);
    let lx = cholesky(&cxx);
    let ly = cholesky(&cyy);
    // K = Lx⁻¹ Cxy Ly⁻ᵀ; correlations are singular values of K.
    let t = forward_solve(&lx, &cxy);
    let k = transpose(&forward_solve(&ly, &transpose(&t)));
    let kkt = mul(&k, &transpose(&k));
    symmetric_eigenvalues(&kkt)
        .into_iter()
        .map(|e| e.max(0.0).sqrt())
        .collect()
}

/// Closed-form canonical correlations for two-dimensional views: the square
/// roots of the eigenvalues of the 2×2 matrix `(Cxx+λI)⁻¹ Cxy (Cyy+λI)⁻¹ Cyx`.
pub fn cca_correlations_2d(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> [f64; 2] {
    let inv2 = |m: &[Vec<f64>]| {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        vec![vec![m[1][1] / det, -m[0][1] / det], vec![-m[1][0] / det, m[0][0] / det]]
    };
    let mut cxx = covariance(x, x);
    let mut cyy = covariance(y, y);
    add_ridge(&mut cxx, ridge);
    add_ridge(&mut cyy, ridge);
    let cxy = covariance(x, y);
    let m = mul(&mul(&inv2(&cxx), &cxy), &mul(&inv2(&cyy), &transpose(&cxy)));
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [(tr / 2.0 + disc).max(0.0).sqrt(), (tr / 2.0 - disc).max(0.0).sqrt()]
}

pub fn dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    to_rows(m)
}
