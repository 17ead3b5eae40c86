//! Binary feature formalism and the conflict-set shortcut-bias metric.
//!
//! Scores are expectations over ordered pairs `(i, j)`, `i != j`. They are
//! evaluated from grouped counts, which gives the exact pair average in
//! linear time.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureAssignment {
    pub name: String,
    pub values: Vec<u8>,
}

impl FeatureAssignment {
    pub fn new(name: impl Into<String>, values: Vec<u8>) -> Result<Self> {
        let name = name.into();
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidFeature(format!("`{name}` has non-binary value {v}")));
        }
        let ones = values.iter().filter(|&&v| v == 1).count();
        if ones == 0 || ones == values.len() {
            return Err(Error::InvalidFeature(format!("`{name}` takes a single value")));
        }
        Ok(FeatureAssignment { name, values })
    }

    /// Labels in {-1, +1} induced by this feature (value 1 maps to +1).
    pub fn induced_labels(&self) -> Vec<i8> {
        self.values.iter().map(|&v| if v == 1 { 1 } else { -1 }).collect()
    }

    pub fn flipped(&self) -> Self {
        FeatureAssignment { name: self.name.clone(), values: self.values.iter().map(|&v| 1 - v).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledPrediction {
    pub labels: Vec<i8>,
    pub preds: Vec<i8>,
}

impl LabeledPrediction {
    pub fn new(labels: Vec<i8>, preds: Vec<i8>) -> Result<Self> {
        if labels.len() != preds.len() || labels.len() < 2 {
            return Err(Error::LengthMismatch(format!(
                "labels {} vs preds {} (need equal and >= 2)",
                labels.len(),
                preds.len()
            )));
        }
        if labels.iter().chain(&preds).any(|&v| v != 1 && v != -1) {
            return Err(Error::DomainError("labels and preds must be -1 or +1".into()));
        }
        Ok(LabeledPrediction { labels, preds })
    }

    /// Binarises raw model outputs; ties go to +1.
    pub fn from_outputs<T: Scalar>(labels: Vec<i8>, outputs: &[T]) -> Result<Self> {
        Self::new(labels, outputs.iter().map(|&f| binarize(f)).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn binarize<T: Scalar>(f: T) -> i8 {
    if f >= T::zero() {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport<T> {
    pub s_alpha: T,
    pub s_beta: T,
    pub shortcut_bias: T,
    pub conflict_accuracy: T,
    pub conflict_count: usize,
    /// False when `s_beta < s_alpha`; the bias is then reported signed.
    pub ordered: bool,
}

fn check_len(n: usize, others: &[usize]) -> Result<()> {
    if others.iter().any(|&m| m != n) {
        return Err(Error::LengthMismatch(format!("expected {n} samples everywhere, got {others:?}")));
    }
    Ok(())
}

fn pm(v: i8) -> usize {
    usize::from(v == 1)
}

/// Mean of `δ_f − δ_Y` over ordered pairs that differ on `feat_k` and agree on `other`.
pub fn s_score<T: Scalar>(feat_k: &FeatureAssignment, other: &FeatureAssignment, lp: &LabeledPrediction) -> Result<T> {
    let n = lp.len();
    check_len(n, &[feat_k.len(), other.len()])?;
    // counts[o][v][p][y]
    let mut counts = [[[[0u64; 2]; 2]; 2]; 2];
    for i in 0..n {
        counts[other.values[i] as usize][feat_k.values[i] as usize][pm(lp.preds[i])][pm(lp.labels[i])] += 1;
    }
    let (mut pairs, mut same_f, mut same_y) = (0u128, 0u128, 0u128);
    for c in &counts {
        let tot = |v: usize| -> u128 { c[v].iter().flatten().map(|&x| x as u128).sum() };
        pairs += 2 * tot(0) * tot(1);
        for p in 0..2 {
            let a: u128 = c[0][p].iter().map(|&x| x as u128).sum();
            let b: u128 = c[1][p].iter().map(|&x| x as u128).sum();
            same_f += 2 * a * b;
        }
        for y in 0..2 {
            let a: u128 = (0..2).map(|p| c[0][p][y] as u128).sum();
            let b: u128 = (0..2).map(|p| c[1][p][y] as u128).sum();
            same_y += 2 * a * b;
        }
    }
    if pairs == 0 {
        return Err(Error::EmptyConflictSet(feat_k.name.clone()));
    }
    let diff = same_f as f64 - same_y as f64;
    Ok(T::c(diff) / T::c(pairs as f64))
}

/// Shortcut bias of `alpha` relative to the reference feature `beta`.
pub fn shortcut_bias<T: Scalar>(
    alpha: &FeatureAssignment,
    beta: &FeatureAssignment,
    lp: &LabeledPrediction,
) -> Result<BiasReport<T>> {
    let s_alpha: T = s_score(alpha, beta, lp)?;
    let s_beta: T = s_score(beta, alpha, lp)?;
    let mut hits = 0usize;
    let mut count = 0usize;
    for i in 0..lp.len() {
        if alpha.values[i] != beta.values[i] {
            count += 1;
            hits += usize::from(lp.preds[i] == lp.labels[i]);
        }
    }
    Ok(BiasReport {
        s_alpha,
        s_beta,
        shortcut_bias: (s_beta - s_alpha) / T::c(2.0),
        conflict_accuracy: T::from_usize_lossy(hits) / T::from_usize_lossy(count),
        conflict_count: count,
        ordered: s_beta >= s_alpha,
    })
}

/// Distance between the conflict-set error rate and the shortcut bias.
///
/// Under class balance, conflict-set class balance and perfect accuracy where
/// the two features agree, the bias equals the rate at which predictions
/// follow the shortcut on the conflict set, i.e. `1 - conflict_accuracy`.
pub fn bias_equivalence_check<T: Scalar>(
    alpha: &FeatureAssignment,
    beta: &FeatureAssignment,
    lp: &LabeledPrediction,
    balance_tol: f64,
) -> Result<T> {
    let n = lp.len();
    check_len(n, &[alpha.len(), beta.len()])?;
    let mut failed = Vec::new();
    let pos = lp.labels.iter().filter(|&&y| y == 1).count();
    let class_imb = (pos as f64 / n as f64 - 0.5).abs();
    if class_imb > balance_tol {
        failed.push(format!("class balance off by {class_imb:.4}"));
    }
    let conflict: Vec<usize> = (0..n).filter(|&i| alpha.values[i] != beta.values[i]).collect();
    if !conflict.is_empty() {
        let cpos = conflict.iter().filter(|&&i| lp.labels[i] == 1).count();
        let imb = (cpos as f64 / conflict.len() as f64 - 0.5).abs();
        if imb > balance_tol {
            failed.push(format!("conflict-set class balance off by {imb:.4}"));
        }
    }
    let agree_miss = (0..n).filter(|&i| alpha.values[i] == beta.values[i] && lp.preds[i] != lp.labels[i]).count();
    if agree_miss > 0 {
        failed.push(format!("agreement-set accuracy below 1 ({agree_miss} misses)"));
    }
    if !failed.is_empty() {
        return Err(Error::PreconditionViolated(failed.join("; ")));
    }
    let r: BiasReport<T> = shortcut_bias(alpha, beta, lp)?;
    Ok(((T::one() - r.conflict_accuracy) - r.shortcut_bias).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeatureClass {
    Core,
    Noise,
    Other,
}

/// Pair statistics of a feature against labels.
#[derive(Debug, Clone, Copy)]
pub struct PairStats {
    pub pairs: f64,
    pub cov: f64,
}

pub fn pair_covariance(feat: &FeatureAssignment, labels: &[i8]) -> PairStats {
    let n = labels.len() as f64;
    let mut c = [[0f64; 2]; 2];
    for (i, &y) in labels.iter().enumerate() {
        c[feat.values[i] as usize][pm(y)] += 1.0;
    }
    let pairs = n * (n - 1.0);
    let sq = |x: f64| x * (x - 1.0);
    let v_same = sq(c[0][0] + c[0][1]) + sq(c[1][0] + c[1][1]);
    let y_same = sq(c[0][0] + c[1][0]) + sq(c[0][1] + c[1][1]);
    let both = c.iter().flatten().map(|&x| sq(x)).sum::<f64>();
    // E[δ_V (2δ_Y − 1)] − E[δ_V] E[2δ_Y − 1]
    let exy = (2.0 * both - v_same) / pairs;
    let ex = v_same / pairs;
    let ey = 2.0 * y_same / pairs - 1.0;
    PairStats { pairs, cov: exy - ex * ey }
}

/// Default noise tolerance: three standard deviations of the pair covariance
/// under independence, which is asymptotically chi-square(1) / (2n).
pub fn default_noise_tolerance(n: usize) -> f64 {
    4.5 / n as f64
}

pub fn classify_feature(feat: &FeatureAssignment, labels: &[i8], noise_tol: Option<f64>) -> Result<FeatureClass> {
    if labels.is_empty() {
        return Err(Error::PreconditionViolated("no samples".into()));
    }
    check_len(labels.len(), &[feat.len()])?;
    // core iff V is a bijective relabelling of Y
    let mut map = [None::<i8>; 2];
    let mut core = true;
    for (i, &y) in labels.iter().enumerate() {
        let slot = &mut map[feat.values[i] as usize];
        match slot {
            None => *slot = Some(y),
            Some(prev) if *prev != y => core = false,
            _ => {}
        }
    }
    if core && map[0].is_some() && map[1].is_some() && map[0] != map[1] {
        return Ok(FeatureClass::Core);
    }
    let tol = noise_tol.unwrap_or_else(|| default_noise_tolerance(labels.len()));
    let st = pair_covariance(feat, labels);
    Ok(if st.cov.abs() <= tol { FeatureClass::Noise } else { FeatureClass::Other })
}

/// One row of the sample CSV: `id,label,pred,<feature columns...>`.
#[derive(Debug, Clone)]
pub struct SampleTable {
    pub ids: Vec<String>,
    pub lp: LabeledPrediction,
    pub features: BTreeMap<String, FeatureAssignment>,
}

pub fn read_samples_csv<R: Read>(reader: R) -> Result<SampleTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "label" || &headers[2] != "pred" {
        return Err(Error::ParseError { line: 1, msg: "header must start with id,label,pred".into() });
    }
    let names: Vec<String> = headers.iter().skip(3).map(String::from).collect();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    let mut cols: Vec<Vec<u8>> = vec![Vec::new(); names.len()];
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::ParseError { line, msg: e.to_string() })?;
        let parse = |s: &str| -> Result<i64> {
            s.trim().parse::<i64>().map_err(|e| Error::ParseError { line, msg: format!("`{s}`: {e}") })
        };
        ids.push(rec[0].to_string());
        labels.push(parse(&rec[1])? as i8);
        preds.push(parse(&rec[2])? as i8);
        for (j, col) in cols.iter_mut().enumerate() {
            let v = parse(rec.get(3 + j).unwrap_or(""))?;
            if !(0..=1).contains(&v) {
                return Err(Error::ParseError { line, msg: format!("feature value {v} not in {{0,1}}") });
            }
            col.push(v as u8);
        }
    }
    let lp = LabeledPrediction::new(labels, preds)?;
    let mut features = BTreeMap::new();
    for (name, vals) in names.into_iter().zip(cols) {
        features.insert(name.clone(), FeatureAssignment::new(name, vals)?);
    }
    Ok(SampleTable { ids, lp, features })
}
