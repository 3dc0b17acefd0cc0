//! Decision metrics over fused scores.
//!
//! A transmitter is accepted (decided legitimate, H=1) when its score z is at
//! least the threshold λ. False alarm = rejecting a legitimate transmitter;
//! missed detection = accepting an impersonator. The combined error weighs
//! both equally: ε = 0.5 p_FA + 0.5 p_MD.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Legitimate-transmitter label (hypothesis H=1).
pub const LABEL_LEGIT: u8 = 1;
/// Impersonator label (hypothesis H=0).
pub const LABEL_ATTACK: u8 = 0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("score set is empty")]
    Empty,

    #[error("score label {0} is not 0 or 1")]
    InvalidLabel(u8),

    #[error("non-finite score {0}")]
    NonFiniteScore(f64),

    #[error("no scores with label {0} present")]
    MissingClass(u8),

    #[error("target false-alarm rate {0} outside [0, 1]")]
    InvalidTarget(f64),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Labeled fused scores for one evaluation split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    entries: Vec<(f64, u8)>,
}

impl ScoreSet {
    /// Builds a set from `(score, label)` pairs; labels must be 0 or 1.
    pub fn new(entries: Vec<(f64, u8)>) -> Result<Self, EvalError> {
        if entries.is_empty() {
            return Err(EvalError::Empty);
        }
        for &(z, label) in &entries {
            if label > 1 {
                return Err(EvalError::InvalidLabel(label));
            }
            if !z.is_finite() {
                return Err(EvalError::NonFiniteScore(z));
            }
        }
        Ok(Self { entries })
    }

    /// Builds a set from per-class score lists.
    pub fn from_classes(legit: &[f64], attack: &[f64]) -> Result<Self, EvalError> {
        let entries: Vec<(f64, u8)> = legit
            .iter()
            .map(|&z| (z, LABEL_LEGIT))
            .chain(attack.iter().map(|&z| (z, LABEL_ATTACK)))
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(f64, u8)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn count_label(&self, label: u8) -> usize {
        self.entries.iter().filter(|(_, l)| *l == label).count()
    }

    fn require_label(&self, label: u8) -> Result<usize, EvalError> {
        match self.count_label(label) {
            0 => Err(EvalError::MissingClass(label)),
            n => Ok(n),
        }
    }

    /// Scores sorted ascending with labels attached.
    fn sorted(&self) -> Vec<(f64, u8)> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

/// Candidate thresholds: one below every score, the midpoint between each
/// pair of consecutive distinct scores, and one above every score.
///
/// A midpoint that rounds onto the lower score would flip that score to the
/// accept side, so it is nudged up to the higher score (decisions use z ≥ λ).
fn candidate_thresholds(sorted: &[(f64, u8)]) -> Vec<f64> {
    let lo = sorted.first().unwrap().0;
    let hi = sorted.last().unwrap().0;
    let mut cands = vec![lo - 1.0];
    let mut prev = lo;
    for &(z, _) in sorted.iter().skip(1) {
        if z > prev {
            let mut mid = prev + (z - prev) / 2.0;
            if mid <= prev {
                mid = z;
            }
            cands.push(mid);
            prev = z;
        }
    }
    cands.push(hi + 1.0);
    cands
}

/// False-alarm rate, missed-detection rate, and combined error at `lambda`.
pub fn compute_rates(s: &ScoreSet, lambda: f64) -> Result<(f64, f64, f64), EvalError> {
    let n1 = s.require_label(LABEL_LEGIT)?;
    let n0 = s.require_label(LABEL_ATTACK)?;
    let mut fa = 0usize;
    let mut md = 0usize;
    for &(z, label) in s.entries() {
        if label == LABEL_LEGIT {
            if z < lambda {
                fa += 1;
            }
        } else if z >= lambda {
            md += 1;
        }
    }
    let p_fa = fa as f64 / n1 as f64;
    let p_md = md as f64 / n0 as f64;
    Ok((p_fa, p_md, 0.5 * p_fa + 0.5 * p_md))
}

/// Threshold minimizing ε over the candidate set, ties toward the smallest λ.
pub fn optimize_threshold(s: &ScoreSet) -> Result<(f64, f64), EvalError> {
    let n1 = s.require_label(LABEL_LEGIT)?;
    let n0 = s.require_label(LABEL_ATTACK)?;
    let sorted = s.sorted();
    // Sweep candidates in ascending order, maintaining the counts a
    // recomputation at each candidate would produce: scores strictly below
    // the candidate are rejected.
    let mut fa = 0usize; // legit scores below λ
    let mut md = n0; // attack scores at or above λ
    let eps = |fa: usize, md: usize| {
        0.5 * (fa as f64 / n1 as f64) + 0.5 * (md as f64 / n0 as f64)
    };
    let mut best_lambda = sorted[0].0 - 1.0;
    let mut best_eps = eps(fa, md);
    let mut i = 0;
    while i < sorted.len() {
        // Flip the group of equal scores the sweep is about to pass.
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 == LABEL_LEGIT {
                fa += 1;
            } else {
                md -= 1;
            }
            i += 1;
        }
        let lambda = if i < sorted.len() {
            let next = sorted[i].0;
            let mid = v + (next - v) / 2.0;
            if mid <= v {
                next
            } else {
                mid
            }
        } else {
            v + 1.0
        };
        let e = eps(fa, md);
        if e < best_eps {
            best_eps = e;
            best_lambda = lambda;
        }
    }
    Ok((best_lambda, best_eps))
}

/// Largest candidate threshold whose empirical false-alarm rate does not
/// exceed `target_p_fa`.
pub fn threshold_for_target_fa(s: &ScoreSet, target_p_fa: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&target_p_fa) {
        return Err(EvalError::InvalidTarget(target_p_fa));
    }
    let n1 = s.require_label(LABEL_LEGIT)?;
    let sorted = s.sorted();
    let mut fa = 0usize;
    let mut best = sorted[0].0 - 1.0; // always satisfies p_fa = 0
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 == LABEL_LEGIT {
                fa += 1;
            }
            i += 1;
        }
        let lambda = if i < sorted.len() {
            let next = sorted[i].0;
            let mid = v + (next - v) / 2.0;
            if mid <= v {
                next
            } else {
                mid
            }
        } else {
            v + 1.0
        };
        if fa as f64 / n1 as f64 <= target_p_fa {
            best = lambda;
        }
    }
    Ok(best)
}

/// Operating points `(p_fa, 1 − p_md)` over all candidate thresholds,
/// sorted by p_fa.
pub fn roc(s: &ScoreSet) -> Result<Vec<(f64, f64)>, EvalError> {
    s.require_label(LABEL_LEGIT)?;
    s.require_label(LABEL_ATTACK)?;
    let sorted = s.sorted();
    let mut points = Vec::new();
    for lambda in candidate_thresholds(&sorted) {
        let (p_fa, p_md, _) = compute_rates(s, lambda)?;
        points.push((p_fa, 1.0 - p_md));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(points)
}

/// Evaluation outcome for one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: String,
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
    pub lambda: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub epsilon: f64,
    /// Operating points of the test split; not exported in the summary CSV.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roc: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    scheme: &'a str,
    #[serde(rename = "M")]
    m: usize,
    alpha: f64,
    seed: u64,
    lambda: f64,
    p_fa: f64,
    p_md: f64,
    epsilon: f64,
}

/// Writes one summary CSV row per report, in the given order.
pub fn write_summary_csv(reports: &[EvalReport], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(SummaryRow {
            scheme: &r.scheme,
            m: r.m,
            alpha: r.alpha,
            seed: r.seed,
            lambda: r.lambda,
            p_fa: r.p_fa,
            p_md: r.p_md,
            epsilon: r.epsilon,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes a report's operating points as a `p_fa,detection` CSV.
pub fn write_roc_csv(report: &EvalReport, path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p_fa", "detection"])?;
    for &(x, y) in &report.roc {
        w.write_record([format!("{x}"), format!("{y}")])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(legit: &[f64], attack: &[f64]) -> ScoreSet {
        ScoreSet::from_classes(legit, attack).unwrap()
    }

    #[test]
    fn epsilon_weighs_both_rates_equally() {
        // 1 of 10 legit below λ, 3 of 10 attack above: (0.1, 0.3) -> 0.2.
        let legit: Vec<f64> = (0..9).map(|i| 0.6 + i as f64 * 0.01).chain([0.2]).collect();
        let attack: Vec<f64> = (0..7).map(|i| 0.1 + i as f64 * 0.01).chain([0.8, 0.9, 0.7]).collect();
        let (p_fa, p_md, eps) = compute_rates(&set(&legit, &attack), 0.5).unwrap();
        assert_eq!(p_fa, 0.1);
        assert_eq!(p_md, 0.3);
        assert_eq!(eps, 0.2);
    }

    #[test]
    fn separated_scores_give_zero_error() {
        let s = set(&[0.9, 0.8, 0.7], &[0.1, 0.2, 0.3]);
        assert_eq!(compute_rates(&s, 0.5).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn degenerate_thresholds_give_half_error() {
        let s = set(&[0.9, 0.8], &[0.1, 0.2]);
        assert_eq!(compute_rates(&s, -5.0).unwrap(), (0.0, 1.0, 0.5));
        assert_eq!(compute_rates(&s, 5.0).unwrap(), (1.0, 0.0, 0.5));
    }

    #[test]
    fn boundary_score_counts_as_accepted() {
        // Decision is z ≥ λ, so a legit score exactly at λ is accepted and
        // an attack score exactly at λ is a miss.
        let s = set(&[0.5], &[0.5]);
        assert_eq!(compute_rates(&s, 0.5).unwrap(), (0.0, 1.0, 0.5));
    }

    #[test]
    fn rates_need_both_classes() {
        let only_legit = ScoreSet::new(vec![(0.5, 1)]).unwrap();
        assert!(matches!(
            compute_rates(&only_legit, 0.3),
            Err(EvalError::MissingClass(0))
        ));
        let only_attack = ScoreSet::new(vec![(0.5, 0)]).unwrap();
        assert!(matches!(
            compute_rates(&only_attack, 0.3),
            Err(EvalError::MissingClass(1))
        ));
    }

    #[test]
    fn optimizer_finds_quarter_error_overlap() {
        // Two tied minima (ε = 0.25) exist: rejecting only 0.1 or splitting
        // at 0.75; the tie breaks toward the smaller candidate threshold.
        let s = set(&[0.9, 0.4], &[0.6, 0.1]);
        let (lambda, eps) = optimize_threshold(&s).unwrap();
        assert_eq!(eps, 0.25);
        assert_eq!(lambda, 0.25);
        let (p_fa, p_md, e) = compute_rates(&s, lambda).unwrap();
        assert_eq!((p_fa, p_md, e), (0.0, 0.5, 0.25));
    }

    #[test]
    fn optimizer_reaches_zero_on_separable_scores() {
        let s = set(&[0.7, 0.8, 0.9], &[0.1, 0.2, 0.3]);
        let (lambda, eps) = optimize_threshold(&s).unwrap();
        assert_eq!(eps, 0.0);
        assert!(lambda > 0.3 && lambda <= 0.7);
    }

    /// Quadratic-time oracle: recompute rates at every candidate threshold.
    fn brute_force_optimum(s: &ScoreSet) -> (f64, f64) {
        let sorted = s.sorted();
        let mut best = (f64::NAN, f64::INFINITY);
        for lambda in candidate_thresholds(&sorted) {
            let (_, _, eps) = compute_rates(s, lambda).unwrap();
            if eps < best.1 {
                best = (lambda, eps);
            }
        }
        best
    }

    #[test]
    fn optimizer_matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for round in 0..20 {
            let n = 500;
            let entries: Vec<(f64, u8)> = (0..n)
                .map(|_| {
                    let label = rng.random_range(0..2u8);
                    // Overlapping classes with occasional exact ties.
                    let z: f64 = if label == 1 {
                        rng.random_range(0.3..1.0)
                    } else {
                        rng.random_range(0.0..0.7)
                    };
                    let z = (z * 100.0).round() / 100.0;
                    (z, label)
                })
                .collect();
            let s = ScoreSet::new(entries).unwrap();
            let got = optimize_threshold(&s).unwrap();
            let want = brute_force_optimum(&s);
            assert_eq!(got.0.to_bits(), want.0.to_bits(), "round {round}");
            assert_eq!(got.1.to_bits(), want.1.to_bits(), "round {round}");
        }
    }

    #[test]
    fn target_fa_picks_largest_satisfying_threshold() {
        let s = ScoreSet::new(vec![(0.9, 1), (0.8, 1), (0.7, 1), (0.6, 1)]).unwrap();
        let lambda = threshold_for_target_fa(&s, 0.25).unwrap();
        assert!(lambda > 0.6 && lambda <= 0.7, "lambda {lambda}");
        let with_attack = set(&[0.9, 0.8, 0.7, 0.6], &[0.5]);
        let (p_fa, _, _) = compute_rates(&with_attack, lambda).unwrap();
        assert_eq!(p_fa, 0.25);
    }

    #[test]
    fn target_fa_zero_accepts_all_legit_scores() {
        let s = set(&[0.9, 0.5, 0.2], &[0.3]);
        let lambda = threshold_for_target_fa(&s, 0.0).unwrap();
        assert!(lambda <= 0.2);
        let (p_fa, _, _) = compute_rates(&s, lambda).unwrap();
        assert_eq!(p_fa, 0.0);
    }

    #[test]
    fn target_fa_one_allows_rejecting_everything() {
        let s = set(&[0.9, 0.5], &[0.3]);
        let lambda = threshold_for_target_fa(&s, 1.0).unwrap();
        assert!(lambda > 0.9);
    }

    #[test]
    fn roc_of_separable_scores_passes_through_perfect_corner() {
        let s = set(&[0.7, 0.8], &[0.1, 0.2]);
        let points = roc(&s).unwrap();
        assert!(points.contains(&(0.0, 1.0)));
        assert_eq!(points.first().unwrap().0, 0.0);
        assert_eq!(points.last().unwrap(), &(1.0, 1.0));
    }

    #[test]
    fn roc_of_inverted_labels_stays_on_or_below_diagonal() {
        let s = set(&[0.1, 0.2], &[0.7, 0.8]);
        for (x, y) in roc(&s).unwrap() {
            assert!(y <= x + 1e-12, "({x}, {y}) above diagonal");
        }
    }

    #[test]
    fn roc_area_for_random_scores_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let entries: Vec<(f64, u8)> = (0..10_000)
            .map(|_| (rng.random::<f64>(), rng.random_range(0..2u8)))
            .collect();
        let s = ScoreSet::new(entries).unwrap();
        let points = roc(&s).unwrap();
        let mut auc = 0.0;
        for w in points.windows(2) {
            auc += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
        }
        assert!((auc - 0.5).abs() <= 0.02, "AUC {auc}");
    }

    #[test]
    fn summary_csv_has_expected_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        let report = EvalReport {
            scheme: "cldae".into(),
            m: 2,
            alpha: 0.5,
            seed: 3,
            lambda: 0.25,
            p_fa: 0.01,
            p_md: 0.02,
            epsilon: 0.015,
            roc: vec![],
        };
        write_summary_csv(std::slice::from_ref(&report), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scheme,M,alpha,seed,lambda,p_fa,p_md,epsilon"
        );
        assert_eq!(lines.next().unwrap(), "cldae,2,0.5,3,0.25,0.01,0.02,0.015");
    }

    proptest! {
        #[test]
        fn fa_rises_and_md_falls_with_lambda(
            mut zs in proptest::collection::vec(-1e3..1e3f64, 4..64),
            lo in -1e3..1e3f64,
            delta in 0.0..1e3f64,
        ) {
            // Ensure both labels: alternate them over the score list.
            let entries: Vec<(f64, u8)> = zs.drain(..).enumerate()
                .map(|(i, z)| (z, (i % 2) as u8))
                .collect();
            let s = ScoreSet::new(entries).unwrap();
            let (fa_lo, md_lo, _) = compute_rates(&s, lo).unwrap();
            let (fa_hi, md_hi, _) = compute_rates(&s, lo + delta).unwrap();
            prop_assert!(fa_hi >= fa_lo);
            prop_assert!(md_hi <= md_lo);
        }

        #[test]
        fn optimized_epsilon_never_exceeds_half(
            mut zs in proptest::collection::vec(-1e3..1e3f64, 4..64),
        ) {
            let entries: Vec<(f64, u8)> = zs.drain(..).enumerate()
                .map(|(i, z)| (z, (i % 2) as u8))
                .collect();
            let s = ScoreSet::new(entries).unwrap();
            let (_, eps) = optimize_threshold(&s).unwrap();
            prop_assert!(eps <= 0.5);
        }

        #[test]
        fn rates_survive_increasing_transforms(
            mut zs in proptest::collection::vec(-10.0..10.0f64, 4..64),
            lambda in -10.0..10.0f64,
        ) {
            let entries: Vec<(f64, u8)> = zs.drain(..).enumerate()
                .map(|(i, z)| (z, (i % 2) as u8))
                .collect();
            let s = ScoreSet::new(entries).unwrap();
            let base = compute_rates(&s, lambda).unwrap();
            // x -> 2x + 1 and x -> atan(x) are strictly increasing.
            for f in [|x: f64| 2.0 * x + 1.0, |x: f64| x.atan()] {
                let mapped: Vec<(f64, u8)> = s.entries().iter()
                    .map(|&(z, l)| (f(z), l))
                    .collect();
                let ms = ScoreSet::new(mapped).unwrap();
                prop_assert_eq!(compute_rates(&ms, f(lambda)).unwrap(), base);
            }
        }
    }
}
