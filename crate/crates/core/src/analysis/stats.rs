//! Friedman rank test and Nemenyi post-hoc comparison.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::evalkit::average_ranks;

/// Largest number of distinct rank-sum states the exact null distribution
/// may track before falling back to the chi-square approximation.
const EXACT_STATE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Enumerated within-row permutation distribution.
    Exact,
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    pub p_method: PValueMethod,
    /// Mean rank per method, rank 1 = best.
    pub mean_ranks: Vec<f64>,
    pub n: usize,
    pub k: usize,
}

/// Ranks within each row, 1 = best under the given direction.
pub fn row_ranks(matrix: &[Vec<f64>], higher_is_better: bool) -> Vec<Vec<f64>> {
    matrix
        .iter()
        .map(|row| {
            let keyed: Vec<f64> = row.iter().map(|v| if higher_is_better { -v } else { *v }).collect();
            average_ranks(&keyed)
        })
        .collect()
}

fn tie_term(ranks: &[f64]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Sum of squared deviations of column rank sums from their null mean.
fn spread(sums: &[f64], n: usize, k: usize) -> f64 {
    let centre = n as f64 * (k + 1) as f64 / 2.0;
    sums.iter().map(|s| (s - centre).powi(2)).sum()
}

fn permutations(v: &[f64]) -> Vec<Vec<f64>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Exact P(spread ≥ observed) under independent uniform within-row
/// permutations; `None` when the state space grows too large.
fn exact_p(ranks: &[Vec<f64>], observed: f64) -> Option<f64> {
    let k = ranks[0].len();
    if k > 6 {
        return None;
    }
    // doubled ranks are integers even with averaged ties
    let mut dist: HashMap<Vec<i64>, f64> = HashMap::from([(vec![0; k], 1.0)]);
    for row in ranks {
        let perms = permutations(row);
        let w = 1.0 / perms.len() as f64;
        let mut next: HashMap<Vec<i64>, f64> =
            HashMap::with_capacity((dist.len() * perms.len()).min(EXACT_STATE_LIMIT + 1));
        for (state, mass) in &dist {
            for p in &perms {
                let key: Vec<i64> = state.iter().zip(p).map(|(s, r)| s + (2.0 * r).round() as i64).collect();
                *next.entry(key).or_insert(0.0) += mass * w;
            }
            if next.len() > EXACT_STATE_LIMIT {
                return None;
            }
        }
        dist = next;
    }
    let n = ranks.len();
    let tail: f64 = dist
        .iter()
        .filter(|(state, _)| {
            let sums: Vec<f64> = state.iter().map(|s| *s as f64 / 2.0).collect();
            spread(&sums, n, k) >= observed - 1e-9
        })
        .map(|(_, m)| m)
        .sum();
    Some(tail.min(1.0))
}

/// Friedman test over an `n_datasets × k_methods` matrix with the tie
/// correction. Small designs get the exact permutation p-value; larger ones
/// the chi-square tail with k − 1 degrees of freedom.
pub fn friedman(matrix: &[Vec<f64>], higher_is_better: bool) -> Result<FriedmanResult> {
    let n = matrix.len();
    let k = matrix.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::invalid(format!("Friedman test needs n ≥ 2 and k ≥ 2, got {n}×{k}")));
    }
    if matrix.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("ragged matrix"));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite values"));
    }
    let ranks = row_ranks(matrix, higher_is_better);
    let sums: Vec<f64> = (0..k).map(|j| ranks.iter().map(|r| r[j]).sum()).collect();
    let mean_ranks: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let (nf, kf) = (n as f64, k as f64);
    let correction = 1.0 - ranks.iter().map(|r| tie_term(r)).sum::<f64>() / (nf * kf * (kf * kf - 1.0));
    if correction <= 1e-12 {
        return Ok(FriedmanResult { statistic: 0.0, p_value: 1.0, p_method: PValueMethod::Exact, mean_ranks, n, k });
    }
    let observed = spread(&sums, n, k);
    let statistic = 12.0 / (nf * kf * (kf + 1.0)) * observed / correction;
    let (p_value, p_method) = match exact_p(&ranks, observed) {
        Some(p) => (p, PValueMethod::Exact),
        None => {
            let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::invalid(e.to_string()))?;
            (chi.sf(statistic), PValueMethod::ChiSquare)
        }
    };
    Ok(FriedmanResult { statistic, p_value, p_method, mean_ranks, n, k })
}

/// Two-tailed Nemenyi critical values q_α (already divided by √2) for
/// k = 2..=10 methods.
const CRITICAL_Q: [(f64, [f64; 9]); 3] = [
    (0.01, [2.576, 2.913, 3.113, 3.255, 3.364, 3.452, 3.526, 3.590, 3.646]),
    (0.05, [1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164]),
    (0.10, [1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920]),
];

pub const MAX_NEMENYI_METHODS: usize = 10;

pub fn critical_q(k: usize, alpha: f64) -> Option<f64> {
    if !(2..=MAX_NEMENYI_METHODS).contains(&k) {
        return None;
    }
    CRITICAL_Q.iter().find(|(a, _)| (*a - alpha).abs() < 1e-12).map(|(_, row)| row[k - 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NemenyiResult {
    pub q: Vec<Vec<f64>>,
    /// p-value brackets: "1.00", "<0.01", "<0.05", "<0.1" or ">=0.1".
    pub p: Vec<Vec<String>>,
}

fn bracket(q: f64, k: usize) -> String {
    if q == 0.0 {
        return "1.00".into();
    }
    for (alpha, label) in [(0.01, "<0.01"), (0.05, "<0.05"), (0.10, "<0.1")] {
        if q > critical_q(k, alpha).expect("k checked by caller") {
            return label.into();
        }
    }
    ">=0.1".into()
}

pub fn nemenyi(mean_ranks: &[f64], n: usize) -> Result<NemenyiResult> {
    let k = mean_ranks.len();
    if k > MAX_NEMENYI_METHODS {
        return Err(Error::Unsupported(format!(
            "Nemenyi critical values are tabulated for at most {MAX_NEMENYI_METHODS} methods, got {k}"
        )));
    }
    if k < 2 || n == 0 {
        return Err(Error::invalid(format!("Nemenyi needs k ≥ 2 and n ≥ 1, got k={k}, n={n}")));
    }
    let se = ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt();
    let q: Vec<Vec<f64>> =
        (0..k).map(|i| (0..k).map(|j| (mean_ranks[i] - mean_ranks[j]).abs() / se).collect()).collect();
    let p = q.iter().map(|row| row.iter().map(|v| bracket(*v, k)).collect()).collect();
    Ok(NemenyiResult { q, p })
}

/// Square matrix of p-value brackets as CSV with method names on both axes.
pub fn nemenyi_csv(methods: &[String], result: &NemenyiResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(methods.iter().cloned());
    w.write_record(&header)?;
    for (m, row) in methods.iter().zip(&result.p) {
        let mut rec = vec![m.clone()];
        rec.extend(row.iter().cloned());
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
