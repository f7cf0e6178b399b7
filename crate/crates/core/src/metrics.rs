//! Structure-recovery evaluation: SHD, TPR/FDR, AUPRC, and score pooling.

use crate::error::{Error, Result};
use crate::graph::Digraph;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// One evaluation of a predicted digraph (and edge scores) against a truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub shd: usize,
    pub tpr: f64,
    pub fdr: f64,
    pub auprc: f64,
    pub auprc_ratio: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    pub reversed: usize,
}

/// Structural Hamming distance between digraphs: minimal number of single
/// edge insertions, deletions, and reversals; a reversed edge counts one.
///
/// Edits never interact across node pairs, so the distance decomposes into
/// the per-pair edit cost between the four configurations
/// {none, forward, backward, both}.
pub fn shd(pred: &Digraph, truth: &Digraph) -> Result<usize> {
    if pred.d != truth.d {
        return Err(Error::param(format!(
            "node counts differ: {} vs {}",
            pred.d, truth.d
        )));
    }
    let mut total = 0usize;
    for u in 0..pred.d {
        for v in (u + 1)..pred.d {
            let a = (pred.has_edge(u, v), pred.has_edge(v, u));
            let b = (truth.has_edge(u, v), truth.has_edge(v, u));
            total += pair_edit_cost(a, b);
        }
    }
    Ok(total)
}

fn pair_edit_cost(a: (bool, bool), b: (bool, bool)) -> usize {
    match (a, b) {
        _ if a == b => 0,
        // none <-> both needs two insertions/deletions
        ((false, false), (true, true)) | ((true, true), (false, false)) => 2,
        // everything else is one insert, delete, or reversal
        _ => 1,
    }
}

/// Directed-edge counts underlying TPR and FDR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub reversed: usize,
}

/// TPR = TP / |truth|, FDR = FP / |pred| (both 0 on an empty denominator).
pub fn classification_rates(pred: &Digraph, truth: &Digraph) -> Result<(f64, f64, EdgeCounts)> {
    if pred.d != truth.d {
        return Err(Error::param(format!(
            "node counts differ: {} vs {}",
            pred.d, truth.d
        )));
    }
    let tp = pred.edges.iter().filter(|e| truth.edges.contains(e)).count();
    let fp = pred.edges.len() - tp;
    let fn_count = truth.edges.len() - tp;
    let reversed = pred
        .edges
        .iter()
        .filter(|&&(u, v)| !truth.has_edge(u, v) && truth.has_edge(v, u))
        .count();
    let tpr = tp as f64 / truth.edges.len().max(1) as f64;
    let fdr = fp as f64 / pred.edges.len().max(1) as f64;
    Ok((
        tpr,
        fdr,
        EdgeCounts {
            tp,
            fp,
            fn_count,
            reversed,
        },
    ))
}

/// Area under the precision-recall curve over all off-diagonal ordered pairs
/// ranked by descending score. Tied scores are processed as one block, and
/// the area is the step sum of (R_k - R_{k-1}) * P_k at block boundaries.
pub fn auprc(scores: &Array2<f64>, truth: &Digraph) -> Result<f64> {
    let d = truth.d;
    if scores.nrows() != d || scores.ncols() != d {
        return Err(Error::param(format!(
            "score matrix is {}x{}, expected {d}x{d}",
            scores.nrows(),
            scores.ncols()
        )));
    }
    let positives = truth.edges.len();
    if positives == 0 {
        return Err(Error::param("AUPRC is undefined for an empty truth graph"));
    }
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(d * (d - 1));
    for k in 0..d {
        for j in 0..d {
            if k == j {
                continue;
            }
            let s = scores[(k, j)];
            if !s.is_finite() || s < 0.0 {
                return Err(Error::param(format!(
                    "scores must be finite and nonnegative, got {s} at ({k},{j})"
                )));
            }
            pairs.push((s, truth.has_edge(k, j)));
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut area = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut idx = 0;
    while idx < pairs.len() {
        let score = pairs[idx].0;
        while idx < pairs.len() && pairs[idx].0 == score {
            seen += 1;
            if pairs[idx].1 {
                tp += 1;
            }
            idx += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// AUPRC of a random ranking: edge prevalence among ordered pairs.
pub fn auprc_random(truth: &Digraph) -> f64 {
    let d = truth.d;
    truth.edges.len() as f64 / (d * (d - 1)) as f64
}

/// Elementwise l2 pooling of the two weight matrices into one score matrix.
pub fn combine_scores(w0: &Array2<f64>, w1: &Array2<f64>) -> Result<Array2<f64>> {
    if w0.dim() != w1.dim() {
        return Err(Error::param(format!(
            "weight matrices must share a shape, got {:?} vs {:?}",
            w0.dim(),
            w1.dim()
        )));
    }
    let mut out = Array2::zeros(w0.raw_dim());
    for ((idx, &a), &b) in w0.indexed_iter().zip(w1.iter()) {
        out[idx] = (a * a + b * b).sqrt();
    }
    for k in 0..out.nrows().min(out.ncols()) {
        out[(k, k)] = 0.0;
    }
    Ok(out)
}

/// Assemble the full report from a prediction, its scores, and the truth.
pub fn evaluate(pred: &Digraph, scores: &Array2<f64>, truth: &Digraph) -> Result<EvalReport> {
    let shd_val = shd(pred, truth)?;
    let (tpr, fdr, counts) = classification_rates(pred, truth)?;
    let pr = auprc(scores, truth)?;
    let random = auprc_random(truth);
    Ok(EvalReport {
        shd: shd_val,
        tpr,
        fdr,
        auprc: pr,
        auprc_ratio: if random > 0.0 { pr / random } else { 0.0 },
        tp: counts.tp,
        fp: counts.fp,
        fn_count: counts.fn_count,
        reversed: counts.reversed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn dg(d: usize, edges: &[(usize, usize)]) -> Digraph {
        Digraph::from_edges(d, edges.iter().copied())
    }

    #[test]
    fn shd_fixture_values() {
        let truth = dg(3, &[(0, 1), (1, 2)]);
        assert_eq!(shd(&truth, &truth).unwrap(), 0);

        // single reversal counts one
        let rev = dg(3, &[(1, 0), (1, 2)]);
        assert_eq!(shd(&rev, &truth).unwrap(), 1);

        // delete (1,2), insert (0,2)
        let moved = dg(3, &[(0, 1), (0, 2)]);
        assert_eq!(shd(&moved, &truth).unwrap(), 2);

        // both directions present vs one: single deletion
        let both = dg(3, &[(0, 1), (1, 0), (1, 2)]);
        assert_eq!(shd(&both, &truth).unwrap(), 1);

        assert!(shd(&dg(2, &[]), &truth).is_err());
    }

    #[test]
    fn shd_is_symmetric() {
        let a = dg(4, &[(0, 1), (2, 3), (3, 1)]);
        let b = dg(4, &[(1, 0), (2, 3), (0, 2)]);
        assert_eq!(shd(&a, &b).unwrap(), shd(&b, &a).unwrap());
    }

    #[test]
    fn classification_fixture_values() {
        let truth = dg(4, &[(0, 1)]);
        let (tpr, fdr, c) = classification_rates(&truth, &truth).unwrap();
        assert_eq!((tpr, fdr), (1.0, 0.0));
        assert_eq!((c.tp, c.fp, c.fn_count), (1, 0, 0));

        let empty = dg(4, &[]);
        let (tpr, fdr, _) = classification_rates(&empty, &truth).unwrap();
        assert_eq!((tpr, fdr), (0.0, 0.0));

        let pred = dg(4, &[(0, 1), (2, 0)]);
        let (tpr, fdr, c) = classification_rates(&pred, &truth).unwrap();
        assert_relative_eq!(tpr, 1.0);
        assert_relative_eq!(fdr, 0.5);
        assert_eq!(c.tp + c.fp, pred.edges.len());
        assert_eq!(c.tp + c.fn_count, truth.edges.len());

        // reversed edge is an FP and tallied separately
        let rev = dg(4, &[(1, 0)]);
        let (_, _, c) = classification_rates(&rev, &truth).unwrap();
        assert_eq!(c.reversed, 1);
        assert_eq!(c.fp, 1);
    }

    #[test]
    fn auprc_hand_enumerated_fixtures() {
        let truth = dg(3, &[(0, 1)]);

        // true edge ranked first: perfect
        let mut scores = Array2::from_elem((3, 3), 0.1);
        scores[(0, 1)] = 0.9;
        scores[(1, 0)] = 0.8;
        assert_relative_eq!(auprc(&scores, &truth).unwrap(), 1.0);

        // true edge ranked second: area = 0.5
        let mut scores = Array2::from_elem((3, 3), 0.1);
        scores[(1, 0)] = 0.9;
        scores[(0, 1)] = 0.8;
        assert_relative_eq!(auprc(&scores, &truth).unwrap(), 0.5);

        // all tied: single block gives prevalence
        let flat = Array2::from_elem((3, 3), 0.5);
        assert_relative_eq!(auprc(&flat, &truth).unwrap(), 1.0 / 6.0);
    }

    #[test]
    fn auprc_monotone_transform_invariance() {
        let truth = dg(4, &[(0, 1), (2, 3), (1, 3)]);
        let scores = array![
            [0.0, 0.9, 0.2, 0.05],
            [0.1, 0.0, 0.3, 0.8],
            [0.4, 0.15, 0.0, 0.7],
            [0.02, 0.6, 0.25, 0.0]
        ];
        let base = auprc(&scores, &truth).unwrap();
        let squared = scores.mapv(|v| v * v);
        assert_relative_eq!(auprc(&squared, &truth).unwrap(), base, epsilon = 1e-12);
        let scaled = scores.mapv(|v| 3.0 * v + 1.0);
        assert_relative_eq!(auprc(&scaled, &truth).unwrap(), base, epsilon = 1e-12);
    }

    #[test]
    fn auprc_rejects_bad_input() {
        let truth = dg(3, &[]);
        let scores = Array2::zeros((3, 3));
        assert!(auprc(&scores, &truth).is_err());

        let truth = dg(3, &[(0, 1)]);
        let mut neg = Array2::zeros((3, 3));
        neg[(0, 1)] = -1.0;
        assert!(auprc(&neg, &truth).is_err());
        assert!(auprc(&Array2::zeros((2, 2)), &truth).is_err());
    }

    #[test]
    fn combine_scores_is_l2_pooling() {
        let w0 = array![[0.0, 3.0], [1.0, 0.0]];
        let w1 = array![[0.0, 4.0], [0.0, 0.0]];
        let s = combine_scores(&w0, &w1).unwrap();
        assert_relative_eq!(s[(0, 1)], 5.0);
        assert_relative_eq!(s[(1, 0)], 1.0);
        assert_eq!(s[(0, 0)], 0.0);

        // w1 = 0 reduces to |w0|
        let z = Array2::zeros((2, 2));
        let s = combine_scores(&w0, &z).unwrap();
        assert_relative_eq!(s[(0, 1)], 3.0);
        assert!(combine_scores(&w0, &Array2::zeros((3, 3))).is_err());
    }

    #[test]
    fn evaluate_assembles_report() {
        let truth = dg(3, &[(0, 1), (1, 2)]);
        let pred = dg(3, &[(0, 1), (1, 2)]);
        let mut scores = Array2::from_elem((3, 3), 0.01);
        scores[(0, 1)] = 0.9;
        scores[(1, 2)] = 0.8;
        let rep = evaluate(&pred, &scores, &truth).unwrap();
        assert_eq!(rep.shd, 0);
        assert_relative_eq!(rep.tpr, 1.0);
        assert_relative_eq!(rep.fdr, 0.0);
        assert_relative_eq!(rep.auprc, 1.0);
        assert_relative_eq!(rep.auprc_ratio, 3.0); // prevalence 2/6
    }

    #[test]
    fn random_scores_have_unit_auprc_ratio_in_expectation() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let d = 20;
        let truth = Digraph::from(&crate::graph::generate_er(d, 0.5, 3).unwrap());
        let pairs = d * (d - 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        // exchangeable scores with ties: a fixed multiset of 16 levels
        let mut values: Vec<f64> = (0..pairs).map(|i| (i % 16) as f64 / 16.0).collect();
        let mut total = 0.0;
        let shuffles = 1000;
        for _ in 0..shuffles {
            values.shuffle(&mut rng);
            let mut scores = Array2::zeros((d, d));
            let mut idx = 0;
            for k in 0..d {
                for j in 0..d {
                    if k != j {
                        scores[(k, j)] = values[idx];
                        idx += 1;
                    }
                }
            }
            total += auprc(&scores, &truth).unwrap() / auprc_random(&truth);
        }
        let mean = total / shuffles as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean auprc ratio {mean}");
    }
}
