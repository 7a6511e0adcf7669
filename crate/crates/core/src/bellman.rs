//! The Bellman operator `L` on `[0, ∞]^V`, Kleene iteration to its least
//! fixed point, finite-horizon values, and discounted value iteration with a
//! certified error bound.
//!
//! Kleene iterates `Lⁿ(0)` are monotone lower bounds on the game value. For
//! the undiscounted operator there is no contraction, so a small residual
//! does not certify the distance to the fixed point; [`SolveReport::values`]
//! are lower bounds. Deciding whether a value is `∞` has no general
//! algorithm either: vertices whose iterate exceeds a bound are *flagged*
//! and reported as `∞`, which is a heuristic, not a certificate.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::Dense;
use crate::model::{Game, Owner, Violation};
use crate::numerics::{ext_sum, ExtValue};
use crate::scalar::Scalar;

/// Games at least this large apply `L` in parallel.
const PARALLEL_THRESHOLD: usize = 4096;
/// Largest game for which discounted iteration jumps to exact strategy values.
const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid game: {0:?}")]
    InvalidGame(Vec<Violation>),
    #[error("discount factor {0} outside (0, 1)")]
    BadDiscount(f64),
    #[error("reward {reward} at {vertex} exceeds 1; normalize rewards first")]
    RewardAboveOne { vertex: String, reward: f64 },
    #[error("value at {0} is unresolved (iteration hit its limit before converging)")]
    Unresolved(String),
    #[error("no horizon/discount in the schedule reaches the target at {0}")]
    ScheduleExhausted(String),
}

/// One extended value per vertex, indexed like the game.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector<S>(Vec<ExtValue<S>>);

impl<S: Scalar> ValueVector<S> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![ExtValue::zero(); n])
    }

    pub fn from_vec(v: Vec<ExtValue<S>>) -> Self {
        Self(v)
    }

    pub fn from_finite(v: &[S]) -> Self {
        Self(v.iter().map(|&x| ExtValue::Finite(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[ExtValue<S>] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = ExtValue<S>> + '_ {
        self.0.iter().copied()
    }

    pub fn into_vec(self) -> Vec<ExtValue<S>> {
        self.0
    }

    pub fn get(&self, game: &Game<S>, id: &str) -> Option<ExtValue<S>> {
        game.index_of(id).map(|v| self.0[v])
    }

    /// Pointwise `⊑`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `max_v |self_v − other_v|` over entries finite in both.
    pub fn finite_sup_diff(&self, other: &Self) -> S {
        self.0
            .iter()
            .zip(&other.0)
            .filter_map(|(a, b)| a.abs_diff(*b))
            .fold(S::zero(), S::max)
    }

    /// `(id, value)` pairs in vertex order.
    pub fn named<'a>(&'a self, game: &'a Game<S>) -> Vec<(&'a str, ExtValue<S>)> {
        self.0
            .iter()
            .enumerate()
            .map(|(v, &x)| (game.id(v), x))
            .collect()
    }

    pub fn scaled(&self, c: S) -> Self {
        Self(self.0.iter().map(|x| x.scale(c)).collect())
    }
}

impl<S> std::ops::Index<usize> for ValueVector<S> {
    type Output = ExtValue<S>;
    fn index(&self, v: usize) -> &ExtValue<S> {
        &self.0[v]
    }
}

fn apply_at<S: Scalar>(game: &Game<S>, x: &ValueVector<S>, v: usize) -> ExtValue<S> {
    let r = ExtValue::Finite(game.reward(v));
    let succ = game.succ(v);
    let best = match game.owner(v) {
        Owner::Max => succ.iter().map(|&u| x[u]).fold(ExtValue::zero(), ExtValue::max),
        Owner::Min => succ
            .iter()
            .map(|&u| x[u])
            .reduce(ExtValue::min)
            .unwrap_or_else(ExtValue::zero),
        Owner::Chance => ext_sum(game.transitions(v).map(|(u, p)| (x[u], p))),
    };
    r + best
}

/// One application of the Bellman operator:
/// `y_v = r(v) + max / min / Σp·x` over successors, by owner.
pub fn apply_l<S: Scalar>(game: &Game<S>, x: &ValueVector<S>) -> ValueVector<S> {
    assert_eq!(x.len(), game.len(), "value vector domain");
    let n = game.len();
    let out = if n >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(|v| apply_at(game, x, v)).collect()
    } else {
        (0..n).map(|v| apply_at(game, x, v)).collect()
    };
    ValueVector(out)
}

/// The Kleene chain `L(0), L²(0), L³(0), …`.
pub fn kleene_iterates<S: Scalar>(game: &Game<S>) -> impl Iterator<Item = ValueVector<S>> + '_ {
    let mut x = ValueVector::zeros(game.len());
    std::iter::repeat_with(move || {
        x = apply_l(game, &x);
        x.clone()
    })
}

/// Optimal expected reward accumulated over the first `n + 1` vertices,
/// i.e. `L^{n+1}(0)`.
pub fn nstep_values<S: Scalar>(game: &Game<S>, n: usize) -> ValueVector<S> {
    kleene_iterates(game)
        .nth(n)
        .unwrap_or_else(|| ValueVector::zeros(game.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<S> {
    pub tol: S,
    pub max_iter: usize,
    /// Iterates above this are flagged divergent and reported as `∞`.
    pub divergence_bound: S,
}

impl<S: Scalar> Default for SolveOptions<S> {
    fn default() -> Self {
        Self {
            tol: S::lit(1e-9),
            max_iter: 100_000,
            divergence_bound: S::lit(1e12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Largest per-vertex increase fell below the tolerance.
    Residual,
    MaxIter,
}

/// Outcome of Kleene value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<S> {
    /// Lower bounds on the game value; flagged vertices hold `∞`.
    pub values: ValueVector<S>,
    pub iterations: usize,
    /// Largest increase over finite entries in the last step.
    pub residual: S,
    /// Vertices flagged as heuristically infinite, ascending.
    pub divergent: Vec<usize>,
    pub converged: bool,
    pub stopped: StopReason,
}

impl<S: Scalar> SolveReport<S> {
    /// Whether the entry at `v` is settled: either the iteration stalled
    /// below the tolerance or `v` was flagged divergent.
    pub fn resolved(&self, v: usize) -> bool {
        self.stopped == StopReason::Residual || self.values[v].is_infinite()
    }
}

fn check_valid<S: Scalar>(game: &Game<S>) -> Result<(), SolveError> {
    let violations = game.validate();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(SolveError::InvalidGame(violations))
    }
}

/// Kleene iteration `x₀ = 0, x_{n+1} = L(x_n)` to the least fixed point.
pub fn value_iterate<S: Scalar>(game: &Game<S>, opts: &SolveOptions<S>) -> Result<SolveReport<S>, SolveError> {
    check_valid(game)?;
    let mut x = ValueVector::zeros(game.len());
    let mut residual = S::zero();
    let mut iterations = 0;
    let mut stopped = StopReason::MaxIter;
    while iterations < opts.max_iter {
        let mut y = apply_l(game, &x);
        iterations += 1;
        for e in y.0.iter_mut() {
            if matches!(*e, ExtValue::Finite(f) if f > opts.divergence_bound) {
                *e = ExtValue::Infinite;
            }
        }
        let newly_infinite = x.iter().zip(y.iter()).any(|(a, b)| a.is_finite() && b.is_infinite());
        residual = y.finite_sup_diff(&x);
        x = y;
        if residual < opts.tol && !newly_infinite {
            stopped = StopReason::Residual;
            break;
        }
    }
    let divergent: Vec<usize> = (0..game.len()).filter(|&v| x[v].is_infinite()).collect();
    Ok(SolveReport {
        converged: stopped == StopReason::Residual && divergent.is_empty(),
        values: x,
        iterations,
        residual,
        divergent,
        stopped,
    })
}

/// First successor maximizing `x` (successor-list order breaks ties).
pub fn first_argmax<S: Scalar>(game: &Game<S>, v: usize, x: &[ExtValue<S>]) -> usize {
    let succ = game.succ(v);
    let mut best = succ[0];
    for &u in &succ[1..] {
        if x[u] > x[best] {
            best = u;
        }
    }
    best
}

/// First successor minimizing `x`.
pub fn first_argmin<S: Scalar>(game: &Game<S>, v: usize, x: &[ExtValue<S>]) -> usize {
    let succ = game.succ(v);
    let mut best = succ[0];
    for &u in &succ[1..] {
        if x[u] < x[best] {
            best = u;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedReport<S> {
    /// Finite approximations of the discounted values, all `≤ 1/(1−λ)`.
    pub values: ValueVector<S>,
    /// Sup-norm distance to the discounted fixed point is at most this.
    pub error_bound: S,
    pub iterations: usize,
    /// `error_bound < tol` was reached.
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedOptions {
    pub max_iter: usize,
    /// Periodically replace the iterate by the exact value of the current
    /// greedy strategy pair when that lowers the Bellman residual.
    pub accelerate: bool,
}

impl Default for DiscountedOptions {
    fn default() -> Self {
        Self {
            max_iter: 1_000_000,
            accelerate: true,
        }
    }
}

fn discounted_step<S: Scalar>(game: &Game<S>, lambda: S, x: &[S]) -> Vec<S> {
    (0..game.len())
        .map(|v| {
            let succ = game.succ(v);
            let inner = match game.owner(v) {
                Owner::Max => succ.iter().map(|&u| x[u]).fold(S::neg_infinity(), S::max),
                Owner::Min => succ.iter().map(|&u| x[u]).fold(S::infinity(), S::min),
                Owner::Chance => game.transitions(v).map(|(u, p)| p * x[u]).sum(),
            };
            game.reward(v) + lambda * inner
        })
        .collect()
}

fn sup_diff<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).abs())
        .fold(S::zero(), S::max)
}

/// Exact discounted value of the pair that is greedy with respect to `x`.
fn greedy_pair_value<S: Scalar>(game: &Game<S>, lambda: S, x: &[S]) -> Option<Vec<S>> {
    let n = game.len();
    let mut a = Dense::identity(n);
    let ext: Vec<ExtValue<S>> = x.iter().map(|&f| ExtValue::Finite(f)).collect();
    for v in 0..n {
        match game.owner(v) {
            Owner::Max => a[(v, first_argmax(game, v, &ext))] -= lambda,
            Owner::Min => a[(v, first_argmin(game, v, &ext))] -= lambda,
            Owner::Chance => {
                for (u, p) in game.transitions(v) {
                    a[(v, u)] -= lambda * p;
                }
            }
        }
    }
    let b = (0..n).map(|v| game.reward(v)).collect();
    a.solve(b).ok()
}

/// Iterates `y_v = r(v) + λ·(max / min / Σp·x)` until the contraction bound
/// `λ/(1−λ)·‖x_{k+1} − x_k‖ < tol` certifies `‖x − x*‖ < tol`.
///
/// When floating-point resolution prevents reaching `tol` the best iterate
/// is returned with `certified = false` and its actual bound.
pub fn discounted_iterate<S: Scalar>(
    game: &Game<S>,
    lambda: S,
    tol: S,
    opts: &DiscountedOptions,
) -> Result<DiscountedReport<S>, SolveError> {
    check_valid(game)?;
    if !(lambda > S::zero() && lambda < S::one()) {
        return Err(SolveError::BadDiscount(lambda.as_f64()));
    }
    if let Some(v) = (0..game.len()).find(|&v| game.reward(v) > S::one()) {
        return Err(SolveError::RewardAboveOne {
            vertex: game.id(v).to_string(),
            reward: game.reward(v).as_f64(),
        });
    }
    let factor = lambda / (S::one() - lambda);
    let accelerate = opts.accelerate && game.len() <= DENSE_LIMIT;
    const JUMP_EVERY: usize = 8;
    const STALL_LIMIT: usize = 256;

    let mut x = vec![S::zero(); game.len()];
    let mut tx = discounted_step(game, lambda, &x);
    let mut res = sup_diff(&tx, &x);
    let mut best = (res, tx.clone());
    let mut since_best = 0;
    let mut iterations = 1;

    while factor * res >= tol && iterations < opts.max_iter && since_best < STALL_LIMIT {
        x = tx;
        tx = discounted_step(game, lambda, &x);
        res = sup_diff(&tx, &x);
        iterations += 1;
        if accelerate && iterations % JUMP_EVERY == 0 {
            if let Some(z) = greedy_pair_value(game, lambda, &tx) {
                let tz = discounted_step(game, lambda, &z);
                let rz = sup_diff(&tz, &z);
                if rz < res {
                    tx = tz;
                    res = rz;
                }
            }
        }
        if res < best.0 {
            best = (res, tx.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
    }
    let (res, tx) = if res <= best.0 { (res, tx) } else { best };
    let bound = factor * res;
    // rewards ≤ 1 keep the fixed point inside [0, 1/(1−λ)]
    let cap = S::one() / (S::one() - lambda);
    let values = tx.iter().map(|&f| f.max(S::zero()).min(cap)).collect::<Vec<_>>();
    Ok(DiscountedReport {
        values: ValueVector::from_finite(&values),
        error_bound: bound,
        iterations,
        certified: bound < tol,
    })
}

/// Least `ℓ` with `λ^ℓ/(1−λ)·max_reward < eps/8`.
pub fn horizon_for_eps<S: Scalar>(lambda: S, max_reward: S, eps: S) -> u64 {
    let (l, m, e) = (lambda.as_f64(), max_reward.as_f64(), eps.as_f64());
    if m <= 0.0 {
        return 0;
    }
    let holds = |k: u64| l.powf(k as f64) / (1.0 - l) * m < e / 8.0;
    let estimate = ((e * (1.0 - l) / (8.0 * m)).ln() / l.ln()).floor();
    let mut k = if estimate.is_finite() && estimate > 0.0 {
        estimate as u64
    } else {
        0
    };
    while k > 0 && holds(k - 1) {
        k -= 1;
    }
    while !holds(k) {
        k += 1;
    }
    k
}

/// Candidate discount factors, tried in order.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSchedule {
    /// `λ_i = 1 − 2^{−i}` for `i = 1..=max_i`.
    Dyadic { max_i: u32 },
    Explicit(Vec<f64>),
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::Dyadic { max_i: 52 }
    }
}

impl LambdaSchedule {
    pub fn candidates<S: Scalar>(&self) -> Vec<S> {
        match self {
            LambdaSchedule::Dyadic { max_i } => (1..=*max_i)
                .map(|i| S::one() - S::lit(2f64.powi(-(i as i32))))
                .filter(|&l| l < S::one())
                .collect(),
            LambdaSchedule::Explicit(v) => v.iter().map(|&l| S::lit(l)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSearch<S> {
    pub schedule: LambdaSchedule,
    pub solve: SolveOptions<S>,
    /// Largest horizon `n` examined.
    pub max_horizon: usize,
}

impl<S: Scalar> Default for LambdaSearch<S> {
    fn default() -> Self {
        Self {
            schedule: LambdaSchedule::default(),
            solve: SolveOptions::default(),
            max_horizon: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaChoice<S> {
    pub lambda: S,
    /// Horizon with `nstep_values(n) ≥ value ⊖ eps/4`.
    pub n: usize,
}

impl<S: Scalar> fmt::Display for LambdaChoice<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "λ = {}, n = {}", self.lambda, self.n)
    }
}

fn require_unit_rewards<S: Scalar>(game: &Game<S>) -> Result<(), SolveError> {
    match (0..game.len()).find(|&v| game.reward(v) > S::one()) {
        Some(v) => Err(SolveError::RewardAboveOne {
            vertex: game.id(v).to_string(),
            reward: game.reward(v).as_f64(),
        }),
        None => Ok(()),
    }
}

/// Least `n` such that `L^{n+1}(0)_v ≥ target_v ⊖ eps/4` for every vertex in
/// `vertices`; the maximum over those vertices is returned.
pub(crate) fn sufficient_horizon<S: Scalar>(
    game: &Game<S>,
    report: &SolveReport<S>,
    vertices: &[usize],
    eps: S,
    max_horizon: usize,
) -> Result<usize, SolveError> {
    let quarter = eps / S::lit(4.0);
    let mut pending: Vec<usize> = vertices.to_vec();
    for v in &pending {
        if !report.resolved(*v) {
            return Err(SolveError::Unresolved(game.id(*v).to_string()));
        }
    }
    let mut n_needed = 0;
    for (n, x) in kleene_iterates(game).enumerate() {
        pending.retain(|&v| !x[v].meets_lower(report.values[v], quarter));
        if pending.is_empty() {
            return Ok(n_needed.max(n));
        }
        n_needed = n;
        if n >= max_horizon {
            break;
        }
    }
    Err(SolveError::ScheduleExhausted(game.id(pending[0]).to_string()))
}

fn first_lambda<S: Scalar>(schedule: &LambdaSchedule, n: usize, eps: S, game: &Game<S>) -> Option<S> {
    let m = game.max_reward().max(S::one());
    let need = S::one() - eps / (S::lit(4.0) * S::lit((n + 1) as f64) * m);
    schedule
        .candidates::<S>()
        .into_iter()
        .find(|&l| l.powf(S::lit(n as f64)) >= need)
}

/// Picks a horizon `n` with `nstep_values(n)_v ≥ Val(v) ⊖ eps/4` and the
/// first scheduled `λ` with `λⁿ ≥ 1 − eps/(4(n+1)·max(r,1))`, which makes
/// discounted reward lose at most `eps/4` against `Acc_n` on every run.
pub fn choose_lambda<S: Scalar>(
    game: &Game<S>,
    v: usize,
    eps: S,
    search: &LambdaSearch<S>,
) -> Result<LambdaChoice<S>, SolveError> {
    require_unit_rewards(game)?;
    let report = value_iterate(game, &search.solve)?;
    choose_lambda_with(game, &report, &[v], eps, search)
}

/// [`choose_lambda`] for several start vertices at once, reusing a solve.
/// The returned `λ` and `n` work for every listed vertex.
pub fn choose_lambda_with<S: Scalar>(
    game: &Game<S>,
    report: &SolveReport<S>,
    vertices: &[usize],
    eps: S,
    search: &LambdaSearch<S>,
) -> Result<LambdaChoice<S>, SolveError> {
    require_unit_rewards(game)?;
    let n = sufficient_horizon(game, report, vertices, eps, search.max_horizon)?;
    let lambda = first_lambda(&search.schedule, n, eps, game).ok_or_else(|| {
        SolveError::ScheduleExhausted(vertices.first().map(|&v| game.id(v)).unwrap_or("").to_string())
    })?;
    Ok(LambdaChoice { lambda, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GameBuilder;
    use proptest::prelude::*;

    type E = ExtValue<f64>;

    fn fin(x: f64) -> E {
        E::Finite(x)
    }

    fn chain() -> Game<f64> {
        GameBuilder::new()
            .chance("v", 1.0, &[("t", 1.0)])
            .chance("t", 0.0, &[("t", 1.0)])
            .build()
            .unwrap()
    }

    fn loop1() -> Game<f64> {
        GameBuilder::new().chance("v", 1.0, &[("v", 1.0)]).build().unwrap()
    }

    #[test]
    fn l_of_zero_is_reward() {
        let g = GameBuilder::<f64>::new()
            .max("a", 0.5, &["b"])
            .min("b", 2.0, &["a", "b"])
            .chance("c", 1.0, &[("a", 1.0)])
            .build()
            .unwrap();
        let y = apply_l(&g, &ValueVector::zeros(3));
        assert_eq!(y.as_slice(), &[fin(0.5), fin(2.0), fin(1.0)]);
    }

    #[test]
    fn l_min_and_chance() {
        let g = GameBuilder::<f64>::new()
            .min("m", 1.0, &["a", "b"])
            .chance("c", 0.0, &[("a", 0.5), ("b", 0.5)])
            .chance("a", 0.0, &[("a", 1.0)])
            .chance("b", 0.0, &[("b", 1.0)])
            .build()
            .unwrap();
        let x = ValueVector::from_vec(vec![fin(0.0), fin(0.0), fin(3.0), fin(5.0)]);
        let y = apply_l(&g, &x);
        assert_eq!(y[0], fin(4.0));
        let x = ValueVector::from_vec(vec![fin(0.0), fin(0.0), fin(2.0), E::Infinite]);
        assert_eq!(apply_l(&g, &x)[1], E::Infinite);
    }

    #[test]
    fn zero_loop_converges_immediately() {
        let g = GameBuilder::<f64>::new().chance("v", 0.0, &[("v", 1.0)]).build().unwrap();
        let r = value_iterate(&g, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.values[0], fin(0.0));
    }

    #[test]
    fn chain_value_is_one() {
        // oracle: the unique run is v t t t ..., so Acc = 1 + 0 + 0 + ... = 1
        let r = value_iterate(&chain(), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.values.as_slice(), &[fin(1.0), fin(0.0)]);
    }

    #[test]
    fn positive_self_loop_is_flagged() {
        let opts = SolveOptions {
            divergence_bound: 100.0,
            ..SolveOptions::default()
        };
        let r = value_iterate(&loop1(), &opts).unwrap();
        assert_eq!(r.divergent, vec![0]);
        assert!(!r.converged);
        assert_eq!(r.values[0], E::Infinite);
        assert_eq!(r.stopped, StopReason::Residual);
    }

    #[test]
    fn iteration_limit_reports_unconverged() {
        let opts = SolveOptions {
            max_iter: 50,
            ..SolveOptions::default()
        };
        let r = value_iterate(&loop1(), &opts).unwrap();
        assert_eq!(r.stopped, StopReason::MaxIter);
        assert!(!r.converged);
        assert_eq!(r.values[0], fin(50.0));
        assert!(!r.resolved(0));
    }

    #[test]
    fn nstep_examples() {
        let g = loop1();
        assert_eq!(nstep_values(&g, 0)[0], fin(1.0));
        assert_eq!(nstep_values(&g, 9)[0], fin(10.0));
    }

    /// Brute force over every deterministic history-dependent choice: the
    /// value of horizon `n` at `v` is the sup over Max decision trees of the
    /// inf over Min decision trees of the expected sum of `n+1` rewards.
    fn brute_force_nstep(g: &Game<f64>, v: usize, n: usize) -> f64 {
        // Enumerate all assignments of choices to player-owned paths.
        fn paths(g: &Game<f64>, v: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            prefix.push(v);
            if prefix.len() <= n && g.owner(v).is_player() {
                out.push(prefix.clone());
            }
            if prefix.len() <= n {
                for &u in g.succ(v) {
                    paths(g, u, n, prefix, out);
                }
            }
            prefix.pop();
        }
        fn expect(
            g: &Game<f64>,
            v: usize,
            n: usize,
            prefix: &mut Vec<usize>,
            choice: &std::collections::HashMap<Vec<usize>, usize>,
        ) -> f64 {
            prefix.push(v);
            let mut acc = g.reward(v);
            if prefix.len() <= n {
                if g.owner(v).is_player() {
                    acc += expect(g, choice[&*prefix], n, prefix, choice);
                } else {
                    for (u, p) in g.transitions(v).collect::<Vec<_>>() {
                        acc += p * expect(g, u, n, prefix, choice);
                    }
                }
            }
            prefix.pop();
            acc
        }
        let mut all = Vec::new();
        paths(g, v, n, &mut Vec::new(), &mut all);
        let max_paths: Vec<_> = all.iter().filter(|p| g.owner(*p.last().unwrap()) == Owner::Max).cloned().collect();
        let min_paths: Vec<_> = all.iter().filter(|p| g.owner(*p.last().unwrap()) == Owner::Min).cloned().collect();
        let assignments = |ps: &[Vec<usize>]| -> Vec<Vec<usize>> {
            let mut out = vec![vec![]];
            for p in ps {
                let succ = g.succ(*p.last().unwrap());
                out = out
                    .into_iter()
                    .flat_map(|a| succ.iter().map(move |&s| { let mut b = a.clone(); b.push(s); b }))
                    .collect();
            }
            out
        };
        let mut best = f64::NEG_INFINITY;
        for a in assignments(&max_paths) {
            let mut worst = f64::INFINITY;
            for b in assignments(&min_paths) {
                let mut choice = std::collections::HashMap::new();
                for (p, &c) in max_paths.iter().zip(&a) {
                    choice.insert(p.clone(), c);
                }
                for (p, &c) in min_paths.iter().zip(&b) {
                    choice.insert(p.clone(), c);
                }
                worst = worst.min(expect(g, v, n, &mut Vec::new(), &choice));
            }
            best = best.max(worst);
        }
        best
    }

    #[test]
    fn nstep_matches_exhaustive_strategy_trees() {
        let g = GameBuilder::<f64>::new()
            .max("a", 0.0, &["b", "c"])
            .min("b", 1.0, &["a", "c"])
            .chance("c", 0.5, &[("a", 0.3), ("b", 0.7)])
            .build()
            .unwrap();
        for n in 0..=3 {
            let x = nstep_values(&g, n);
            for v in 0..3 {
                let oracle = brute_force_nstep(&g, v, n);
                assert!((x[v].finite().unwrap() - oracle).abs() < 1e-12, "n={n} v={v}");
            }
        }
    }

    #[test]
    fn discounted_examples() {
        let g = GameBuilder::<f64>::new().chance("v", 0.0, &[("v", 1.0)]).build().unwrap();
        let d = discounted_iterate(&g, 0.5, 1e-9, &DiscountedOptions::default()).unwrap();
        assert_eq!(d.values[0], fin(0.0));

        let d = discounted_iterate(&loop1(), 0.5, 1e-12, &DiscountedOptions::default()).unwrap();
        assert!(d.certified);
        assert!((d.values[0].to_f64() - 2.0).abs() < 1e-12);

        // series 1 + 0.9·0 + 0.81·0 + ... = 1
        let d = discounted_iterate(&chain(), 0.9, 1e-12, &DiscountedOptions::default()).unwrap();
        assert!((d.values[0].to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discounted_errors() {
        let o = DiscountedOptions::default();
        assert!(matches!(discounted_iterate(&chain(), 1.0, 1e-9, &o), Err(SolveError::BadDiscount(_))));
        assert!(matches!(discounted_iterate(&chain(), 0.0, 1e-9, &o), Err(SolveError::BadDiscount(_))));
        let g = GameBuilder::<f64>::new().max("v", 1.5, &["v"]).build().unwrap();
        assert!(matches!(discounted_iterate(&g, 0.5, 1e-9, &o), Err(SolveError::RewardAboveOne { .. })));
    }

    #[test]
    fn accelerated_and_plain_agree() {
        let g = GameBuilder::<f64>::new()
            .max("a", 0.2, &["b", "c"])
            .min("b", 1.0, &["a", "c"])
            .chance("c", 0.5, &[("a", 0.3), ("b", 0.6), ("d", 0.1)])
            .chance("d", 0.0, &[("d", 1.0)])
            .build()
            .unwrap();
        let plain = DiscountedOptions { accelerate: false, ..Default::default() };
        let a = discounted_iterate(&g, 0.99, 1e-10, &DiscountedOptions::default()).unwrap();
        let b = discounted_iterate(&g, 0.99, 1e-10, &plain).unwrap();
        assert!(a.certified && b.certified);
        assert!(a.iterations < b.iterations);
        assert!(a.values.finite_sup_diff(&b.values) < 2e-10);
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(horizon_for_eps(0.5, 1.0, 8.0 * 0.5), 3);
        assert_eq!(horizon_for_eps(0.9, 1.0, 8.0), 22);
        assert_eq!(horizon_for_eps(0.9, 0.0, 8.0), 0);
        let l = 1.0 - 2f64.powi(-30);
        let k = horizon_for_eps(l, 1.0, 0.01);
        assert!(l.powf(k as f64) / (1.0 - l) < 0.01 / 8.0);
        assert!(l.powf((k - 1) as f64) / (1.0 - l) >= 0.01 / 8.0);
    }

    #[test]
    fn choose_lambda_zero_rewards() {
        let g = GameBuilder::<f64>::new().chance("v", 0.0, &[("v", 1.0)]).build().unwrap();
        let c = choose_lambda(&g, 0, 0.1, &LambdaSearch::default()).unwrap();
        assert_eq!(c, LambdaChoice { lambda: 0.5, n: 0 });
    }

    #[test]
    fn choose_lambda_chain() {
        // nstep(0)_v = r(v) = 1 = Val(v) already, so the horizon is 0 and no
        // discounting is needed for the first step.
        let c = choose_lambda(&chain(), 0, 0.4, &LambdaSearch::default()).unwrap();
        assert_eq!(c.n, 0);
        assert_eq!(c.lambda, 0.5);
        // with horizon 1 forced, the pathwise inequality needs λ ≥ 0.95
        let need = 1.0 - 0.4 / (4.0 * 2.0);
        let l = first_lambda(&LambdaSchedule::default(), 1, 0.4, &chain()).unwrap();
        assert!(l >= need && l == 1.0 - 2f64.powi(-5));
    }

    #[test]
    fn choose_lambda_divergent_targets_inverse_eps() {
        let search = LambdaSearch {
            solve: SolveOptions { divergence_bound: 100.0, ..SolveOptions::default() },
            ..LambdaSearch::default()
        };
        // ∞ ⊖ eps/4 = 4/eps = 8; L^{n+1}(0) = n + 1 ≥ 8 first at n = 7
        let c = choose_lambda(&loop1(), 0, 0.5, &search).unwrap();
        assert_eq!(c.n, 7);
        let need: f64 = 1.0 - 0.5 / (4.0 * 8.0);
        assert!(c.lambda.powi(7) >= need);
    }

    #[test]
    fn choose_lambda_requires_unit_rewards_and_resolution() {
        let g = GameBuilder::<f64>::new().chance("v", 3.0, &[("v", 1.0)]).build().unwrap();
        assert!(matches!(
            choose_lambda(&g, 0, 0.1, &LambdaSearch::default()),
            Err(SolveError::RewardAboveOne { .. })
        ));
        let search = LambdaSearch {
            solve: SolveOptions { max_iter: 10, ..SolveOptions::default() },
            ..LambdaSearch::default()
        };
        assert!(matches!(choose_lambda(&loop1(), 0, 0.1, &search), Err(SolveError::Unresolved(_))));
        let search = LambdaSearch {
            schedule: LambdaSchedule::Explicit(vec![0.5]),
            solve: SolveOptions { divergence_bound: 100.0, ..SolveOptions::default() },
            ..LambdaSearch::default()
        };
        assert!(matches!(choose_lambda(&loop1(), 0, 0.1, &search), Err(SolveError::ScheduleExhausted(_))));
    }

    fn arb_game() -> impl Strategy<Value = (Game<f64>, Vec<f64>, Vec<f64>)> {
        (2usize..7).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u8..3, 0u8..3, proptest::collection::vec(0..n, 1..4), proptest::collection::vec(0.1f64..1.0, 3)), n),
                proptest::collection::vec(0.0f64..5.0, n),
                proptest::collection::vec(0.0f64..5.0, n),
            )
        })
        .prop_map(|(specs, xa, xb)| {
            let mut b = GameBuilder::<f64>::new();
            for (i, (owner, rew, mut succ, w)) in specs.into_iter().enumerate() {
                succ.sort();
                succ.dedup();
                let ids: Vec<String> = succ.iter().map(|s| format!("v{s}")).collect();
                let id = format!("v{i}");
                let reward = rew as f64 * 0.5;
                b = match owner {
                    0 => b.max(&id, reward, &ids.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
                    1 => b.min(&id, reward, &ids.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
                    _ => {
                        let total: f64 = w[..ids.len()].iter().sum();
                        let edges: Vec<(&str, f64)> = ids.iter().zip(&w).map(|(s, p)| (s.as_str(), p / total)).collect();
                        b.chance(&id, reward, &edges)
                    }
                };
            }
            (b.build().unwrap(), xa, xb)
        })
    }

    proptest! {
        #[test]
        fn l_is_monotone((g, xa, xb) in arb_game()) {
            let lo: Vec<E> = xa.iter().zip(&xb).map(|(a, b)| fin(a.min(*b))).collect();
            let mut hi: Vec<E> = xa.iter().zip(&xb).map(|(a, b)| fin(a.max(*b))).collect();
            hi[0] = E::Infinite;
            let (lo, hi) = (ValueVector::from_vec(lo), ValueVector::from_vec(hi));
            prop_assert!(apply_l(&g, &lo).le(&apply_l(&g, &hi)));
        }

        #[test]
        fn kleene_chain_is_monotone((g, _, _) in arb_game()) {
            let it: Vec<_> = kleene_iterates(&g).take(30).collect();
            for w in it.windows(2) {
                prop_assert!(w[0].le(&w[1]));
            }
            prop_assert_eq!(&nstep_values(&g, 4), &it[4]);
        }

        #[test]
        fn discounted_below_undiscounted((g, _, _) in arb_game()) {
            let (g, _) = crate::model::normalize_rewards(&g);
            let d = discounted_iterate(&g, 0.9, 1e-10, &DiscountedOptions::default()).unwrap();
            let k = nstep_values(&g, 2000);
            for v in 0..g.len() {
                prop_assert!(d.values[v].to_f64() <= k[v].to_f64() + 1e-6 || k[v].to_f64() > 1e3);
                prop_assert!(d.values[v].to_f64() <= 10.0 + 1e-9);
            }
        }
    }
}
