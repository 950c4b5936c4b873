//! Brute-force reference implementations used as test oracles.
//!
//! Each one is written from the definitions, on plain dense data, without
//! calling the code under test.

#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use hyql_core::casebase::Case;
use hyql_core::context::{LocationConcept, Period, Situation, TimeConcept};

/// One-step Q-learning target, arranged differently from the library.
pub fn q_update(q: f64, reward: f64, alpha: f64, gamma: f64, max_next: f64) -> f64 {
    (1.0 - alpha) * q + alpha * (reward + gamma * max_next)
}

/// Deterministic finite MDP: `next[s][a]`, `reward[s][a]`.
pub struct Mdp {
    pub next: Vec<Vec<usize>>,
    pub reward: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl Mdp {
    /// Three states, two actions, every state reachable from every other.
    /// With 1/n step sizes Q-learning converges roughly like n^-(1-γ), so
    /// γ is kept small enough to settle well within the step budget.
    pub fn three_state() -> Mdp {
        Mdp {
            next: vec![vec![1, 2], vec![2, 0], vec![0, 1]],
            reward: vec![vec![0.0, 1.0], vec![0.5, 0.0], vec![1.0, 0.2]],
            gamma: 0.2,
        }
    }

    /// Optimal action values by value iteration to a fixed point.
    pub fn value_iteration(&self) -> Vec<Vec<f64>> {
        let n = self.next.len();
        let mut q = vec![vec![0.0; self.next[0].len()]; n];
        loop {
            let v: Vec<f64> = q
                .iter()
                .map(|row| row.iter().cloned().fold(f64::MIN, f64::max))
                .collect();
            let mut delta: f64 = 0.0;
            for s in 0..n {
                for a in 0..q[s].len() {
                    let updated = self.reward[s][a] + self.gamma * v[self.next[s][a]];
                    delta = delta.max((updated - q[s][a]).abs());
                    q[s][a] = updated;
                }
            }
            if delta < 1e-15 {
                return q;
            }
        }
    }
}

/// Dense ratings, `None` for vacant cells; users and items are indices.
pub type Dense = Vec<Vec<Option<f64>>>;

pub fn parse_dense(text: &str) -> Dense {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            l.split('\t')
                .map(|c| if c == "-" { None } else { Some(c.parse().unwrap()) })
                .collect()
        })
        .collect()
}

fn cosine(dot: f64, na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
    }
}

pub fn user_cosine(m: &Dense, u: usize, v: usize) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for i in 0..m[u].len() {
        if let (Some(x), Some(y)) = (m[u][i], m[v][i]) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
    }
    cosine(dot, na, nb)
}

/// The `k` best candidates by selection: repeatedly take the highest
/// similarity, lowest index first among equals.
fn top_k(mut candidates: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    while out.len() < k && !candidates.is_empty() {
        let mut best = 0;
        for c in 1..candidates.len() {
            let (ci, cs) = candidates[c];
            let (bi, bs) = candidates[best];
            if cs > bs || (cs == bs && ci < bi) {
                best = c;
            }
        }
        out.push(candidates.remove(best));
    }
    out
}

pub fn fill(m: &Dense, k_users: usize) -> Vec<Vec<f64>> {
    let n_users = m.len();
    let n_items = m[0].len();
    let mut out = vec![vec![0.0; n_items]; n_users];
    for u in 0..n_users {
        for i in 0..n_items {
            if let Some(r) = m[u][i] {
                out[u][i] = r;
                continue;
            }
            let candidates = (0..n_users)
                .filter(|&v| v != u && m[v][i].is_some())
                .map(|v| (v, user_cosine(m, u, v)))
                .filter(|c| c.1 > 0.0)
                .collect();
            let (mut num, mut den) = (0.0, 0.0);
            for (v, s) in top_k(candidates, k_users) {
                num += s * m[v][i].unwrap();
                den += s;
            }
            if den > 0.0 {
                out[u][i] = (num / den).clamp(0.0, 1.0);
            }
        }
    }
    out
}

pub fn item_cosine(filled: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let (mut dot, mut ni, mut nj) = (0.0, 0.0, 0.0);
    for row in filled {
        dot += row[i] * row[j];
        ni += row[i] * row[i];
        nj += row[j] * row[j];
    }
    cosine(dot, ni, nj)
}

pub fn item_neighbours(filled: &[Vec<f64>], k_items: usize) -> Vec<Vec<(usize, f64)>> {
    let n_items = filled[0].len();
    (0..n_items)
        .map(|i| {
            let candidates = (0..n_items)
                .filter(|&j| j != i)
                .map(|j| (j, item_cosine(filled, i, j)))
                .filter(|c| c.1 > 0.0)
                .collect();
            top_k(candidates, k_items)
        })
        .collect()
}

pub fn predict(neighbours: &[Vec<(usize, f64)>], filled: &[Vec<f64>], u: usize, i: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(j, s) in &neighbours[i] {
        num += s * filled[u][j];
        den += s;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Prediction for users with ratings, the other users' mean filled rating
/// for users without.
pub fn score(m: &Dense, neighbours: &[Vec<(usize, f64)>], filled: &[Vec<f64>], u: usize, i: usize) -> f64 {
    if m[u].iter().any(Option::is_some) {
        return predict(neighbours, filled, u, i);
    }
    let others = filled.len() - 1;
    if others == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (v, row) in filled.iter().enumerate() {
        if v != u {
            sum += row[i];
        }
    }
    sum / others as f64
}

/// Highest-scored item, lowest index among equals.
pub fn social_action(m: &Dense, neighbours: &[Vec<(usize, f64)>], filled: &[Vec<f64>], u: usize) -> usize {
    let mut best = 0;
    let mut best_score = score(m, neighbours, filled, u, 0);
    for i in 1..filled[0].len() {
        let s = score(m, neighbours, filled, u, i);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

fn period_rank(p: Period) -> i32 {
    Period::ALL.iter().position(|q| *q == p).unwrap() as i32
}

fn period_of(hour: u8, boundaries: [u8; 4]) -> Period {
    let rank = boundaries.iter().filter(|b| hour >= **b).count();
    Period::ALL[rank]
}

/// Time similarity from the definitions: equal 1; same period, or periods
/// next to each other on the daily cycle, 0.5; otherwise 0.
pub fn time_sim(a: TimeConcept, b: TimeConcept, boundaries: [u8; 4]) -> f64 {
    use TimeConcept as T;
    if a == b {
        return 1.0;
    }
    let near = |x: Period, y: Period| {
        let d = (period_rank(x) - period_rank(y)).rem_euclid(5);
        d == 1 || d == 4
    };
    let half = match (a, b) {
        (T::Hour(x), T::Hour(y)) => period_of(x, boundaries) == period_of(y, boundaries),
        (T::Period(x), T::Period(y)) => near(x, y),
        (T::Hour(h), T::Period(p)) | (T::Period(p), T::Hour(h)) => period_of(h, boundaries) == p,
        _ => false,
    };
    if half {
        0.5
    } else {
        0.0
    }
}

pub fn location_sim(a: &LocationConcept, b: &LocationConcept) -> f64 {
    if a == b {
        1.0
    } else if a.city.is_some() && a.city == b.city {
        0.5
    } else if a.region == b.region {
        0.25
    } else {
        0.0
    }
}

/// Equal-weight situation similarity.
pub fn situation_sim(a: &Situation, b: &Situation, boundaries: [u8; 4]) -> f64 {
    let flag = |x: bool| if x { 1.0 } else { 0.0 };
    (time_sim(a.time, b.time, boundaries)
        + location_sim(&a.location, &b.location)
        + flag(a.group == b.group)
        + flag(a.cognitive == b.cognitive))
        / 4.0
}

/// Full scan: among cases clearing both thresholds, the most similar, then
/// the most recent, then the lowest action, then the lowest situation key.
pub fn retrieve<'a>(
    cases: &'a [Case],
    query: &Situation,
    reuse: f64,
    success: f64,
    boundaries: [u8; 4],
) -> Option<(&'a Case, f64)> {
    let mut eligible: Vec<(&Case, f64)> = cases
        .iter()
        .filter(|c| c.attempts > 0 && c.successes as f64 / c.attempts as f64 >= success)
        .map(|c| (c, situation_sim(query, &c.situation, boundaries)))
        .filter(|(_, s)| *s >= reuse)
        .collect();
    eligible.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap()
            .then(b.last_trial.cmp(&a.last_trial))
            .then(a.action.cmp(&b.action))
            .then(a.situation.encode().cmp(&b.situation.encode()))
    });
    eligible.into_iter().next()
}
