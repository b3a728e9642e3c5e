//! Retrieval metrics over exhaustive Hamming rankings: mAP, precision-recall,
//! precision@k and precision within a Hamming radius.
//!
//! Relevance is label equality. Queries whose label never occurs in the
//! database have no defined recall or AP and are left out of every metric.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codes::{code_balance, code_correlation, max_off_diagonal, BinaryCodeSet};
use crate::error::{Error, Result};
use crate::index::{distances, rank_distances, RankedList};

/// Average precision over the full ranking: mean over relevant items of
/// precision at that item's rank.
pub fn average_precision(ranking: &RankedList, relevant: &[usize]) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::invalid("average precision needs a non-empty relevant set"));
    }
    let mut mask = vec![false; ranking.len()];
    for &r in relevant {
        if r >= mask.len() {
            return Err(Error::invalid(format!("relevant index {r} outside database of {}", mask.len())));
        }
        mask[r] = true;
    }
    let total = mask.iter().filter(|&&m| m).count();
    Ok(ap_from_flags(ranking.indices.iter().map(|&i| mask[i]), total))
}

fn ap_from_flags(flags: impl Iterator<Item = bool>, total_relevant: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, rel) in flags.enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
            if hits == total_relevant {
                break;
            }
        }
    }
    sum / total_relevant as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub k: usize,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeDiagnostics {
    pub balance: Vec<f64>,
    /// max_k |balance_k − 0.5|
    pub max_balance_deviation: f64,
    /// Largest |off-diagonal| of the ±1 bit correlation matrix.
    pub max_abs_correlation: f64,
}

impl CodeDiagnostics {
    pub fn of(codes: &BinaryCodeSet) -> Result<Self> {
        let balance = code_balance(codes)?;
        let max_balance_deviation = balance.iter().fold(0.0_f64, |m, b| m.max((b - 0.5).abs()));
        let max_abs_correlation = max_off_diagonal(&code_correlation(codes)?);
        Ok(CodeDiagnostics {
            balance,
            max_balance_deviation,
            max_abs_correlation,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map: f64,
    pub pr_points: Vec<PrPoint>,
    pub prec_at_k: Vec<(usize, f64)>,
    pub prec_within_radius: Vec<(usize, f64)>,
    pub diagnostics: Option<CodeDiagnostics>,
    /// Queries that contributed (had at least one relevant database item).
    pub n_query: usize,
    pub n_db: usize,
}

/// What to compute in [`evaluate`].
#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub radii: Vec<usize>,
    pub pr_curve: bool,
    pub diagnostics: bool,
}

struct Retrieval<'a> {
    queries: &'a BinaryCodeSet,
    db: &'a BinaryCodeSet,
    db_labels: &'a [u8],
    query_labels: &'a [u8],
    class_counts: Vec<usize>,
}

/// Per-query view along the ranking.
struct QueryRank {
    ranking: RankedList,
    relevant: Vec<bool>,
    total_relevant: usize,
}

impl<'a> Retrieval<'a> {
    fn new(queries: &'a BinaryCodeSet, db: &'a BinaryCodeSet, db_labels: &'a [u8], query_labels: &'a [u8]) -> Result<Self> {
        if queries.bits() != db.bits() {
            return Err(Error::shape("evaluate", format!("queries have {} bits", queries.bits()), format!("database has {} bits", db.bits())));
        }
        if db_labels.len() != db.len() {
            return Err(Error::shape("evaluate", format!("{} database codes", db.len()), format!("{} database labels", db_labels.len())));
        }
        if query_labels.len() != queries.len() {
            return Err(Error::shape("evaluate", format!("{} query codes", queries.len()), format!("{} query labels", query_labels.len())));
        }
        let mut class_counts = vec![0usize; 256];
        for &l in db_labels {
            class_counts[l as usize] += 1;
        }
        let r = Retrieval {
            queries,
            db,
            db_labels,
            query_labels,
            class_counts,
        };
        if r.active_queries().next().is_none() {
            return Err(Error::invalid("no query has a relevant item in the database"));
        }
        Ok(r)
    }

    fn active_queries(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.queries.len()).filter(|&q| self.class_counts[self.query_labels[q] as usize] > 0)
    }

    fn rank(&self, q: usize) -> QueryRank {
        let dist = distances(self.queries.code_ref(q), self.db).expect("bit lengths checked");
        let ranking = rank_distances(&dist, self.db.bits());
        let label = self.query_labels[q];
        let relevant = ranking.indices.iter().map(|&i| self.db_labels[i] == label).collect();
        QueryRank {
            ranking,
            relevant,
            total_relevant: self.class_counts[label as usize],
        }
    }
}

/// Single pass over queries computing every requested metric.
pub fn evaluate(
    queries: &BinaryCodeSet,
    db: &BinaryCodeSet,
    db_labels: &[u8],
    query_labels: &[u8],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let ret = Retrieval::new(queries, db, db_labels, query_labels)?;
    let n = db.len();
    for &k in &opts.ks {
        if k == 0 || k > n {
            return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
        }
    }
    for &r in &opts.radii {
        if r > db.bits() {
            return Err(Error::invalid(format!("radius {r} exceeds code length {}", db.bits())));
        }
    }

    let mut ap_sum = 0.0;
    let mut prec_sum = if opts.pr_curve { vec![0.0; n] } else { Vec::new() };
    let mut recall_sum = prec_sum.clone();
    let mut at_k_sum = vec![0.0; opts.ks.len()];
    let mut radius_sum = vec![0.0; opts.radii.len()];
    let mut count = 0usize;

    for q in ret.active_queries() {
        let qr = ret.rank(q);
        count += 1;
        ap_sum += ap_from_flags(qr.relevant.iter().copied(), qr.total_relevant);

        if opts.pr_curve || !opts.ks.is_empty() {
            let mut hits = 0usize;
            let mut next_k = 0;
            let mut ks: Vec<(usize, usize)> = opts.ks.iter().copied().enumerate().map(|(i, k)| (k, i)).collect();
            ks.sort_unstable();
            for (pos, &rel) in qr.relevant.iter().enumerate() {
                hits += usize::from(rel);
                let k = pos + 1;
                if opts.pr_curve {
                    prec_sum[pos] += hits as f64 / k as f64;
                    recall_sum[pos] += hits as f64 / qr.total_relevant as f64;
                }
                while next_k < ks.len() && ks[next_k].0 == k {
                    at_k_sum[ks[next_k].1] += hits as f64 / k as f64;
                    next_k += 1;
                }
            }
        }

        if !opts.radii.is_empty() {
            let bits = db.bits();
            let mut within = vec![0usize; bits + 1];
            let mut within_rel = vec![0usize; bits + 1];
            for (&d, &rel) in qr.ranking.distances.iter().zip(&qr.relevant) {
                within[d as usize] += 1;
                within_rel[d as usize] += usize::from(rel);
            }
            for d in 1..=bits {
                within[d] += within[d - 1];
                within_rel[d] += within_rel[d - 1];
            }
            for (slot, &r) in radius_sum.iter_mut().zip(&opts.radii) {
                if within[r] > 0 {
                    *slot += within_rel[r] as f64 / within[r] as f64;
                }
            }
        }
    }

    let c = count as f64;
    let pr_points = prec_sum
        .iter()
        .zip(&recall_sum)
        .enumerate()
        .map(|(pos, (p, r))| PrPoint {
            k: pos + 1,
            recall: if pos + 1 == n { 1.0 } else { r / c },
            precision: p / c,
        })
        .collect();
    let diagnostics = if opts.diagnostics && db.len() >= 2 {
        Some(CodeDiagnostics::of(db)?)
    } else {
        None
    };
    Ok(EvalReport {
        map: ap_sum / c,
        pr_points,
        prec_at_k: opts.ks.iter().copied().zip(at_k_sum.iter().map(|s| s / c)).collect(),
        prec_within_radius: opts.radii.iter().copied().zip(radius_sum.iter().map(|s| s / c)).collect(),
        diagnostics,
        n_query: count,
        n_db: n,
    })
}

/// Unweighted mean of per-query AP.
pub fn mean_ap(queries: &BinaryCodeSet, db: &BinaryCodeSet, db_labels: &[u8], query_labels: &[u8]) -> Result<f64> {
    Ok(evaluate(queries, db, db_labels, query_labels, &EvalOptions::default())?.map)
}

/// Query-averaged (recall, precision) at every rank cutoff k = 1..=n.
pub fn pr_curve(queries: &BinaryCodeSet, db: &BinaryCodeSet, db_labels: &[u8], query_labels: &[u8]) -> Result<Vec<PrPoint>> {
    let opts = EvalOptions {
        pr_curve: true,
        ..EvalOptions::default()
    };
    Ok(evaluate(queries, db, db_labels, query_labels, &opts)?.pr_points)
}

pub fn precision_at_k(
    queries: &BinaryCodeSet,
    db: &BinaryCodeSet,
    db_labels: &[u8],
    query_labels: &[u8],
    ks: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let opts = EvalOptions {
        ks: ks.to_vec(),
        ..EvalOptions::default()
    };
    Ok(evaluate(queries, db, db_labels, query_labels, &opts)?.prec_at_k)
}

/// Mean over queries of the relevant fraction within distance `r`; a query
/// retrieving nothing contributes 0.
pub fn precision_within_radius(
    queries: &BinaryCodeSet,
    db: &BinaryCodeSet,
    db_labels: &[u8],
    query_labels: &[u8],
    r: usize,
) -> Result<f64> {
    let opts = EvalOptions {
        radii: vec![r],
        ..EvalOptions::default()
    };
    Ok(evaluate(queries, db, db_labels, query_labels, &opts)?.prec_within_radius[0].1)
}

/// Run metadata written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub bits: usize,
    pub map: f64,
    pub seed: u64,
    pub n_query: usize,
    pub n_db: usize,
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{header}").unwrap();
    for r in rows {
        writeln!(out, "{r}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `summary.json`, `pr_curve.csv`, `prec_at_k.csv` and `prec_radius.csv`.
pub fn write_report(dir: &Path, report: &EvalReport, method: &str, bits: usize, seed: u64) -> Result<Summary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = Summary {
        method: method.to_string(),
        bits,
        map: report.map,
        seed,
        n_query: report.n_query,
        n_db: report.n_db,
    };
    write_summary(dir, &summary)?;
    write_csv(
        &dir.join("pr_curve.csv"),
        "k,recall,precision",
        report.pr_points.iter().map(|p| format!("{},{},{}", p.k, p.recall, p.precision)),
    )?;
    write_csv(&dir.join("prec_at_k.csv"), "k,precision", report.prec_at_k.iter().map(|(k, p)| format!("{k},{p}")))?;
    write_csv(&dir.join("prec_radius.csv"), "r,precision", report.prec_within_radius.iter().map(|(r, p)| format!("{r},{p}")))?;
    Ok(summary)
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<()> {
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::rank_all;
    use crate::numerics::Rng;

    fn ranked(indices: Vec<usize>) -> RankedList {
        let distances = (0..indices.len() as u32).collect();
        RankedList { indices, distances }
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&ranked(vec![0, 1, 2, 3]), &[0, 1]).unwrap(), 1.0);
        let ap = average_precision(&ranked(vec![0, 1, 2]), &[0, 2]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        let n = 7;
        let ap = average_precision(&ranked((0..n).collect()), &[n - 1]).unwrap();
        assert!((ap - 1.0 / n as f64).abs() < 1e-12);
        assert!(average_precision(&ranked(vec![0]), &[]).is_err());
        assert!(average_precision(&ranked(vec![0]), &[3]).is_err());
    }

    #[test]
    fn swapping_trailing_irrelevant_items_keeps_ap() {
        let a = average_precision(&ranked(vec![4, 0, 2, 1, 3]), &[4, 2]).unwrap();
        let b = average_precision(&ranked(vec![4, 0, 2, 3, 1]), &[4, 2]).unwrap();
        assert_eq!(a, b);
    }

    fn codes(words: &[u64], bits: usize) -> BinaryCodeSet {
        BinaryCodeSet::from_words(words.len(), bits, words.to_vec()).unwrap()
    }

    #[test]
    fn mean_of_two_queries() {
        // db: 0b00 (label 0), 0b11 (label 1), 0b01 (label 0)
        let db = codes(&[0b00, 0b11, 0b01], 2);
        let db_labels = [0, 1, 0];
        // query 0b00, label 0 -> ranking 0,2,1 -> AP 1
        // query 0b11, label 0 -> ranking 1,2,0 -> relevant at 2,3 -> (1/2 + 2/3)/2
        let q = codes(&[0b00, 0b11], 2);
        let map = mean_ap(&q, &db, &db_labels, &[0, 0]).unwrap();
        let expected = (1.0 + (0.5 + 2.0 / 3.0) / 2.0) / 2.0;
        assert!((map - expected).abs() < 1e-12);
        let single = mean_ap(&codes(&[0b00], 2), &db, &db_labels, &[0]).unwrap();
        assert_eq!(single, 1.0);
    }

    #[test]
    fn queries_without_relevant_items_are_skipped() {
        let db = codes(&[0b00, 0b11], 2);
        let q = codes(&[0b00, 0b00], 2);
        let report = evaluate(&q, &db, &[0, 1], &[0, 5], &EvalOptions::default()).unwrap();
        assert_eq!(report.n_query, 1);
        assert!(mean_ap(&q, &db, &[0, 1], &[5, 5]).is_err());
    }

    #[test]
    fn perfect_ranking_curve() {
        let db = codes(&[0b0000, 0b0001, 0b1111, 0b1110], 4);
        let q = codes(&[0b0000], 4);
        let pr = pr_curve(&q, &db, &[0, 0, 1, 1], &[0]).unwrap();
        assert_eq!(pr.len(), 4);
        assert_eq!(pr[0].precision, 1.0);
        assert_eq!(pr[1].precision, 1.0);
        assert_eq!(pr[3].recall, 1.0);
        assert!(pr.windows(2).all(|w| w[0].recall <= w[1].recall));
    }

    #[test]
    fn precision_at_k_examples() {
        let db = codes(&[0b0000, 0b0001, 0b1111, 0b1110, 0b1100], 4);
        let labels = [0, 0, 1, 1, 1];
        let q = codes(&[0b0000, 0b1111], 4);
        let p = precision_at_k(&q, &db, &labels, &[0, 1], &[1, 5]).unwrap();
        assert_eq!(p[0], (1, 1.0));
        // k = n: mean of class priors of the two query labels
        assert!((p[1].1 - (2.0 / 5.0 + 3.0 / 5.0) / 2.0).abs() < 1e-12);
        assert!(precision_at_k(&q, &db, &labels, &[0, 1], &[0]).is_err());
        assert!(precision_at_k(&q, &db, &labels, &[0, 1], &[6]).is_err());
    }

    #[test]
    fn radius_examples() {
        let db = codes(&[0b0001, 0b0011, 0b1111], 4);
        let labels = [0, 1, 1];
        let q = codes(&[0b0000], 4);
        // Nothing at distance 0.
        assert_eq!(precision_within_radius(&q, &db, &labels, &[0], 0).unwrap(), 0.0);
        assert_eq!(precision_within_radius(&q, &db, &labels, &[0], 1).unwrap(), 1.0);
        let full = precision_within_radius(&q, &db, &labels, &[0], 4).unwrap();
        let base = precision_at_k(&q, &db, &labels, &[0], &[3]).unwrap()[0].1;
        assert_eq!(full, base);
        assert!(precision_within_radius(&q, &db, &labels, &[0], 5).is_err());
    }

    #[test]
    fn evaluate_is_consistent_with_single_metric_calls() {
        let mut rng = Rng::new(12);
        let mk = |rng: &mut Rng, n: usize| {
            let words: Vec<u64> = (0..n).map(|_| rng.next_u64() & 0xffff).collect();
            codes(&words, 16)
        };
        let db = mk(&mut rng, 40);
        let q = mk(&mut rng, 6);
        let dl: Vec<u8> = (0..40).map(|i| (i % 3) as u8).collect();
        let ql: Vec<u8> = (0..6).map(|i| (i % 3) as u8).collect();
        let opts = EvalOptions {
            ks: vec![1, 10, 40],
            radii: (0..=16).collect(),
            pr_curve: true,
            diagnostics: true,
        };
        let rep = evaluate(&q, &db, &dl, &ql, &opts).unwrap();
        assert_eq!(rep.map, mean_ap(&q, &db, &dl, &ql).unwrap());
        assert_eq!(rep.prec_within_radius.len(), 17);
        let mut manual = 0.0;
        for (i, &label) in ql.iter().enumerate().take(6) {
            let r = rank_all(q.code_ref(i), &db).unwrap();
            let rel: Vec<usize> = (0..40).filter(|&j| dl[j] == label).collect();
            manual += average_precision(&r, &rel).unwrap();
        }
        assert!((rep.map - manual / 6.0).abs() < 1e-12);
        assert!(rep.diagnostics.is_some());
    }

    #[test]
    fn mismatched_inputs() {
        let db = codes(&[0b00, 0b11], 2);
        let q = codes(&[0b000], 3);
        assert!(mean_ap(&q, &db, &[0, 1], &[0]).is_err());
        let q = codes(&[0b00], 2);
        assert!(mean_ap(&q, &db, &[0], &[0]).is_err());
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let db = codes(&[0b00, 0b11, 0b01], 2);
        let q = codes(&[0b00], 2);
        let opts = EvalOptions {
            ks: vec![1, 2],
            radii: vec![0, 1, 2],
            pr_curve: true,
            diagnostics: true,
        };
        let rep = evaluate(&q, &db, &[0, 1, 0], &[0], &opts).unwrap();
        let s = write_report(dir.path(), &rep, "lsh", 2, 3).unwrap();
        assert_eq!(s.bits, 2);
        let pr = fs::read_to_string(dir.path().join("pr_curve.csv")).unwrap();
        assert!(pr.starts_with("k,recall,precision\n"));
        assert_eq!(pr.lines().count(), 4);
        let radius = fs::read_to_string(dir.path().join("prec_radius.csv")).unwrap();
        assert_eq!(radius.lines().count(), 4);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        for key in ["method", "bits", "map", "seed", "n_query", "n_db"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
