//! Resolution rule and RMSE with estimate-to-truth association.
//!
//! Estimates are paired with truths one-to-one, minimising the total squared
//! error; in one dimension this is the order-preserving matching. Truths left
//! without a partner borrow their nearest estimate, and when a trial has no
//! estimates at all the caller's fallback angle stands in.

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimate {
    /// Ascending, degrees.
    pub estimates: Vec<f64>,
    pub resolved: bool,
    pub method: String,
}

impl TrialEstimate {
    pub fn new(mut estimates: Vec<f64>, truth: &[f64], method: impl Into<String>) -> Self {
        estimates.sort_by(f64::total_cmp);
        let resolved = resolution_check(&estimates, truth);
        Self {
            estimates,
            resolved,
            method: method.into(),
        }
    }
}

fn sorted(xs: &[f64]) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = xs.iter().copied().enumerate().collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v
}

/// Signed error `θ̂ − θ` per truth (in `truth` order).
pub fn associate(estimates: &[f64], truth: &[f64], fallback: f64) -> Vec<f64> {
    if estimates.is_empty() {
        return truth.iter().map(|t| fallback - t).collect();
    }
    let est = sorted(estimates);
    let tru = sorted(truth);
    let (ne, nt) = (est.len(), tru.len());
    let mut errors = vec![f64::NAN; nt];
    if ne >= nt {
        // Choose which estimates to use: order-preserving DP over (estimate, truth).
        let mut cost = vec![vec![f64::INFINITY; nt + 1]; ne + 1];
        for row in cost.iter_mut() {
            row[0] = 0.0;
        }
        for i in 1..=ne {
            for j in 1..=nt.min(i) {
                let take = cost[i - 1][j - 1] + (est[i - 1].1 - tru[j - 1].1).powi(2);
                let skip = cost[i - 1][j];
                cost[i][j] = if take <= skip { take } else { skip };
            }
        }
        let (mut i, mut j) = (ne, nt);
        while j > 0 {
            let take = cost[i - 1][j - 1] + (est[i - 1].1 - tru[j - 1].1).powi(2);
            if cost[i][j] == take {
                errors[tru[j - 1].0] = est[i - 1].1 - tru[j - 1].1;
                j -= 1;
            }
            i -= 1;
        }
    } else {
        // Choose which truths get a partner.
        let mut cost = vec![vec![f64::INFINITY; ne + 1]; nt + 1];
        for row in cost.iter_mut() {
            row[0] = 0.0;
        }
        for j in 1..=nt {
            for i in 1..=ne.min(j) {
                let take = cost[j - 1][i - 1] + (est[i - 1].1 - tru[j - 1].1).powi(2);
                let skip = cost[j - 1][i];
                cost[j][i] = if take <= skip { take } else { skip };
            }
        }
        let (mut i, mut j) = (ne, nt);
        while i > 0 {
            let take = cost[j - 1][i - 1] + (est[i - 1].1 - tru[j - 1].1).powi(2);
            if cost[j][i] == take {
                errors[tru[j - 1].0] = est[i - 1].1 - tru[j - 1].1;
                i -= 1;
            }
            j -= 1;
        }
        for (t, e) in truth.iter().zip(errors.iter_mut()) {
            if e.is_nan() {
                let nearest = estimates
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
                    .unwrap_or(fallback);
                *e = nearest - t;
            }
        }
    }
    errors
}

/// Smallest gap between distinct truths.
fn separation(truth: &[f64]) -> f64 {
    let mut t: Vec<f64> = truth.to_vec();
    t.sort_by(f64::total_cmp);
    t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Resolved when there are at least two estimates, every truth has its own
/// estimate, and each paired error is within half the truth separation.
pub fn resolution_check(estimates: &[f64], truth: &[f64]) -> bool {
    if estimates.len() < 2 || estimates.len() < truth.len() || truth.len() < 2 {
        return false;
    }
    let half = separation(truth) / 2.0;
    associate(estimates, truth, 0.0).iter().all(|e| e.abs() <= half)
}

/// `√(Σ_trials Σ_l e²/(R·L))` over all trials.
pub fn rmse(trials: &[TrialEstimate], truth: &[f64], fallback: f64) -> f64 {
    accumulate(trials.iter(), truth, fallback).unwrap_or(f64::NAN)
}

/// RMSE over resolved trials only; `None` when no trial resolved.
pub fn rmse_resolved(trials: &[TrialEstimate], truth: &[f64], fallback: f64) -> Option<f64> {
    accumulate(trials.iter().filter(|t| t.resolved), truth, fallback)
}

fn accumulate<'a>(trials: impl Iterator<Item = &'a TrialEstimate>, truth: &[f64], fallback: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in trials {
        sum += associate(&t.estimates, truth, fallback)
            .iter()
            .map(|e| e * e)
            .sum::<f64>();
        count += truth.len();
    }
    (count > 0).then(|| (sum / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TRUTH: [f64; 2] = [-1.0, 1.0];

    #[test]
    fn resolution_examples() {
        assert!(resolution_check(&[-1.4, 0.8], &TRUTH));
        assert!(!resolution_check(&[-2.2, 1.0], &TRUTH));
        assert!(!resolution_check(&[0.9], &TRUTH));
        assert!(!resolution_check(&[0.9, 1.1], &TRUTH));
    }

    #[test]
    fn rmse_examples() {
        let exact = TrialEstimate::new(vec![1.0, -1.0], &TRUTH, "x");
        assert_eq!(rmse(&[exact], &TRUTH, 0.0), 0.0);
        let t = TrialEstimate::new(vec![-0.7, 1.4], &TRUTH, "x");
        assert!((rmse(&[t], &TRUTH, 0.0) - 0.353_553_390_593_273_8).abs() < 1e-12);
    }

    #[test]
    fn missing_estimates_use_nearest_or_fallback() {
        let e = associate(&[0.8], &TRUTH, 0.0);
        assert!((e[0] - 1.8).abs() < 1e-12 && (e[1] + 0.2).abs() < 1e-12);
        assert_eq!(associate(&[], &TRUTH, 0.0), vec![1.0, -1.0]);
    }

    #[test]
    fn resolved_only_variant() {
        let a = TrialEstimate::new(vec![-1.1, 1.1], &TRUTH, "x");
        let b = TrialEstimate::new(vec![3.0], &TRUTH, "x");
        assert!(a.resolved && !b.resolved);
        assert!((rmse_resolved(&[a.clone(), b.clone()], &TRUTH, 0.0).unwrap() - 0.1).abs() < 1e-12);
        assert!(rmse(&[a, b.clone()], &TRUTH, 0.0) > 0.1);
        assert!(rmse_resolved(&[b], &TRUTH, 0.0).is_none());
    }

    #[test]
    fn matches_reference_accumulation() {
        // Independent oracle: plain sorted pairing and a running sum.
        let mut trials = Vec::new();
        let mut reference = 0.0;
        for i in 0..500 {
            let x = (i as f64 * 0.37).sin() * 0.5;
            let y = (i as f64 * 0.11).cos() * 0.5;
            let est = vec![1.0 + y, -1.0 + x];
            let mut s = est.clone();
            s.sort_by(f64::total_cmp);
            reference += (s[0] + 1.0).powi(2) + (s[1] - 1.0).powi(2);
            trials.push(TrialEstimate::new(est, &TRUTH, "x"));
        }
        let reference = (reference / 1000.0).sqrt();
        assert!((rmse(&trials, &TRUTH, 0.0) - reference).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn association_is_optimal(e in proptest::collection::vec(-5.0f64..5.0, 2..4), t in proptest::collection::vec(-5.0f64..5.0, 2..3)) {
            let got: f64 = associate(&e, &t, 0.0).iter().map(|x| x * x).sum();
            // Brute force over injective maps from truths to estimates.
            let mut best = f64::INFINITY;
            for i in 0..e.len() {
                for j in 0..e.len() {
                    if i != j {
                        best = best.min((e[i] - t[0]).powi(2) + (e[j] - t[1]).powi(2));
                    }
                }
            }
            prop_assert!((got - best).abs() < 1e-9);
        }
    }
}
