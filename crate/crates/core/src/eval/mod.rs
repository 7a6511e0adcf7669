//! Exact evaluation of memoryless strategy pairs, best responses, and
//! exhaustive MD enumeration.
//!
//! Fixing both players' memoryless strategies leaves a finite Markov chain.
//! Its expected total reward is `∞` exactly when a recurrent class reachable
//! from the start carries a positive reward; otherwise it solves
//! `x = r + P x` on the transient part.

mod exhaustive;
pub mod scc;

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::bellman::{value_iterate, SolveError, SolveOptions, SolveReport};
use crate::linalg::{Dense, Singular};
use crate::model::{fix_strategy, induced_chain, Game, ModelError, Owner, TargetSet};
use crate::numerics::ExtValue;
use crate::scalar::Scalar;
use crate::strategy::Memoryless;

pub use exhaustive::{
    exhaustive_md_values, exhaustive_md_values_all, exhaustive_md_values_over, md_strategies,
    md_strategy_count, MdExtremes, DEFAULT_CAP,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("linear system for the transient part is singular: {0}")]
    Singular(#[from] Singular),
    #[error("{0} is a player vertex; expected a Markov chain")]
    NotAChain(String),
    #[error("strategy for {got} passed where a {expected} strategy is needed")]
    WrongPlayer { expected: Owner, got: Owner },
    #[error("iterative evaluation stopped with residual {0:e}")]
    NoConvergence(f64),
    #[error("{count} MD strategy pairs exceed the cap of {cap}")]
    CapExceeded { count: f64, cap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMethod {
    LinearSolve,
    Iterative,
    InfiniteCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct EvalResult<S> {
    pub value: ExtValue<S>,
    pub finite_certified: bool,
    pub method: EvalMethod,
}

impl<S: Scalar> EvalResult<S> {
    fn finite(x: S, method: EvalMethod) -> Self {
        Self {
            value: ExtValue::Finite(x.max(S::zero())),
            finite_certified: true,
            method,
        }
    }

    fn infinite() -> Self {
        Self {
            value: ExtValue::Infinite,
            finite_certified: false,
            method: EvalMethod::InfiniteCertificate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Largest transient part solved by elimination; bigger ones iterate.
    pub dense_limit: usize,
    pub iter_tol: f64,
    pub max_iter: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            dense_limit: 2000,
            iter_tol: 1e-14,
            max_iter: 10_000_000,
        }
    }
}

fn require_chain<S: Scalar>(chain: &Game<S>) -> Result<(), EvalError> {
    match (0..chain.len()).find(|&v| chain.owner(v) != Owner::Chance) {
        Some(v) => Err(EvalError::NotAChain(chain.id(v).to_string())),
        None => Ok(()),
    }
}

/// Vertices reachable from `roots`, ascending.
fn forward_closure<S: Scalar>(g: &Game<S>, roots: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; g.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &r in roots {
        if !seen[r] {
            seen[r] = true;
            queue.push_back(r);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in g.succ(v) {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    (0..g.len()).filter(|&v| seen[v]).collect()
}

/// A successor-closed set of chain vertices with local numbering.
struct Local<'a, S> {
    chain: &'a Game<S>,
    members: Vec<usize>,
    local: Vec<usize>,
}

impl<'a, S: Scalar> Local<'a, S> {
    fn new(chain: &'a Game<S>, members: Vec<usize>) -> Self {
        let mut local = vec![usize::MAX; chain.len()];
        for (i, &v) in members.iter().enumerate() {
            local[v] = i;
        }
        Self { chain, members, local }
    }

    fn len(&self) -> usize {
        self.members.len()
    }

    fn adj(&self) -> Vec<Vec<usize>> {
        self.members
            .iter()
            .map(|&v| self.chain.succ(v).iter().map(|&u| self.local[u]).collect())
            .collect()
    }

    fn edges(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        self.chain.transitions(self.members[i]).map(|(u, p)| (self.local[u], p))
    }

    /// Local vertices that can reach a marked one.
    fn backward(&self, marked: &[bool]) -> Vec<bool> {
        let n = self.len();
        let mut rev = vec![Vec::new(); n];
        for i in 0..n {
            for (j, _) in self.edges(i) {
                rev[j].push(i);
            }
        }
        let mut seen = marked.to_vec();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| marked[i]).collect();
        while let Some(j) = queue.pop_front() {
            for &i in &rev[j] {
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    /// Solves `x_i = b_i + Σ_{j ∈ unknown} P_ij x_j` over the `unknown` set.
    fn solve(&self, unknown: &[usize], b: &[S], opts: &EvalOptions) -> Result<(Vec<S>, EvalMethod), EvalError> {
        let k = unknown.len();
        let mut pos = vec![usize::MAX; self.len()];
        for (a, &i) in unknown.iter().enumerate() {
            pos[i] = a;
        }
        if k <= opts.dense_limit {
            let mut m = Dense::identity(k);
            for (a, &i) in unknown.iter().enumerate() {
                for (j, p) in self.edges(i) {
                    if pos[j] != usize::MAX {
                        m[(a, pos[j])] -= p;
                    }
                }
            }
            return Ok((m.solve(b.to_vec())?, EvalMethod::LinearSolve));
        }
        // Gauss-Seidel sweeps; the transient part is substochastic
        let mut x = b.to_vec();
        let tol = S::lit(opts.iter_tol).max(S::epsilon() * S::lit(4.0));
        let mut last = f64::INFINITY;
        for _ in 0..opts.max_iter {
            let mut change = S::zero();
            let mut scale = S::one();
            for (a, &i) in unknown.iter().enumerate() {
                let mut y = b[a];
                for (j, p) in self.edges(i) {
                    if pos[j] != usize::MAX {
                        y += p * x[pos[j]];
                    }
                }
                change = change.max((y - x[a]).abs());
                scale = scale.max(y.abs());
                x[a] = y;
            }
            if change <= tol * scale {
                return Ok((x, EvalMethod::Iterative));
            }
            last = change.as_f64();
        }
        Err(EvalError::NoConvergence(last))
    }
}

/// Expected total reward from every member of a successor-closed set.
fn acc_values<S: Scalar>(local: &Local<'_, S>, opts: &EvalOptions) -> Result<Vec<EvalResult<S>>, EvalError> {
    let n = local.len();
    let adj = local.adj();
    let (comp, count) = scc::strongly_connected(&adj);
    let bottom = scc::bottom_components(&adj, &comp, count);
    let mut positive = vec![false; count];
    for i in 0..n {
        if local.chain.reward(local.members[i]) > S::zero() {
            positive[comp[i]] = true;
        }
    }
    let seeds: Vec<bool> = (0..n).map(|i| bottom[comp[i]] && positive[comp[i]]).collect();
    let infinite = local.backward(&seeds);

    let transient: Vec<usize> = (0..n).filter(|&i| !infinite[i] && !bottom[comp[i]]).collect();
    let b: Vec<S> = transient.iter().map(|&i| local.chain.reward(local.members[i])).collect();
    let (x, method) = if transient.is_empty() {
        (Vec::new(), EvalMethod::LinearSolve)
    } else {
        local.solve(&transient, &b, opts)?
    };
    let mut out = vec![EvalResult::finite(S::zero(), EvalMethod::LinearSolve); n];
    for i in 0..n {
        if infinite[i] {
            out[i] = EvalResult::infinite();
        }
    }
    for (a, &i) in transient.iter().enumerate() {
        out[i] = EvalResult::finite(x[a], method);
    }
    Ok(out)
}

/// Probability of visiting `targets` from every member.
fn reach_values<S: Scalar>(local: &Local<'_, S>, targets: &TargetSet, opts: &EvalOptions) -> Result<Vec<S>, EvalError> {
    let n = local.len();
    let is_target: Vec<bool> = local.members.iter().map(|&v| targets.contains(v)).collect();
    let can = local.backward(&is_target);
    let unknown: Vec<usize> = (0..n).filter(|&i| can[i] && !is_target[i]).collect();
    let b: Vec<S> = unknown
        .iter()
        .map(|&i| local.edges(i).filter(|&(j, _)| is_target[j]).map(|(_, p)| p).sum())
        .collect();
    let (x, _) = if unknown.is_empty() {
        (Vec::new(), EvalMethod::LinearSolve)
    } else {
        local.solve(&unknown, &b, opts)?
    };
    let mut out: Vec<S> = is_target.iter().map(|&t| if t { S::one() } else { S::zero() }).collect();
    for (a, &i) in unknown.iter().enumerate() {
        out[i] = x[a].max(S::zero()).min(S::one());
    }
    Ok(out)
}

/// Expected total reward from `v` in a Markov chain (a game without player
/// vertices).
pub fn evaluate_chain<S: Scalar>(chain: &Game<S>, v: usize) -> Result<EvalResult<S>, EvalError> {
    evaluate_chain_with(chain, v, &EvalOptions::default())
}

pub fn evaluate_chain_with<S: Scalar>(chain: &Game<S>, v: usize, opts: &EvalOptions) -> Result<EvalResult<S>, EvalError> {
    require_chain(chain)?;
    let local = Local::new(chain, forward_closure(chain, &[v]));
    Ok(acc_values(&local, opts)?[local.local[v]])
}

/// Expected total reward from every vertex of a Markov chain.
pub fn evaluate_chain_all<S: Scalar>(chain: &Game<S>) -> Result<Vec<EvalResult<S>>, EvalError> {
    require_chain(chain)?;
    acc_values(&Local::new(chain, (0..chain.len()).collect()), &EvalOptions::default())
}

/// `E[Acc]` from `v` under a pair of memoryless strategies (deterministic or
/// randomized). Entries at vertices a strategy's player does not own are
/// ignored.
pub fn evaluate_md_pair<S, A, B>(game: &Game<S>, sigma: &A, pi: &B, v: usize) -> Result<EvalResult<S>, EvalError>
where
    S: Scalar,
    A: Memoryless<S> + ?Sized,
    B: Memoryless<S> + ?Sized,
{
    check_players(sigma.player(), pi.player())?;
    evaluate_chain(&induced_chain(game, sigma, pi)?, v)
}

/// [`evaluate_md_pair`] at every vertex.
pub fn evaluate_pair_all<S, A, B>(game: &Game<S>, sigma: &A, pi: &B) -> Result<Vec<EvalResult<S>>, EvalError>
where
    S: Scalar,
    A: Memoryless<S> + ?Sized,
    B: Memoryless<S> + ?Sized,
{
    check_players(sigma.player(), pi.player())?;
    evaluate_chain_all(&induced_chain(game, sigma, pi)?)
}

/// Probability of visiting `targets` from `v` under a memoryless pair.
pub fn evaluate_reach<S, A, B>(game: &Game<S>, sigma: &A, pi: &B, v: usize, targets: &TargetSet) -> Result<S, EvalError>
where
    S: Scalar,
    A: Memoryless<S> + ?Sized,
    B: Memoryless<S> + ?Sized,
{
    check_players(sigma.player(), pi.player())?;
    let chain = induced_chain(game, sigma, pi)?;
    let local = Local::new(&chain, forward_closure(&chain, &[v]));
    Ok(reach_values(&local, targets, &EvalOptions::default())?[local.local[v]])
}

/// [`evaluate_reach`] at every vertex.
pub fn evaluate_reach_all<S, A, B>(game: &Game<S>, sigma: &A, pi: &B, targets: &TargetSet) -> Result<Vec<S>, EvalError>
where
    S: Scalar,
    A: Memoryless<S> + ?Sized,
    B: Memoryless<S> + ?Sized,
{
    check_players(sigma.player(), pi.player())?;
    let chain = induced_chain(game, sigma, pi)?;
    reach_values(&Local::new(&chain, (0..chain.len()).collect()), targets, &EvalOptions::default())
}

fn check_players(a: Owner, b: Owner) -> Result<(), EvalError> {
    if a != Owner::Max {
        return Err(EvalError::WrongPlayer { expected: Owner::Max, got: a });
    }
    if b != Owner::Min {
        return Err(EvalError::WrongPlayer { expected: Owner::Min, got: b });
    }
    Ok(())
}

/// Value of the Min-MDP left after fixing `sigma`: the infimum over Min
/// strategies of `E[Acc]`, as Kleene lower bounds.
pub fn best_response_min<S, A>(game: &Game<S>, sigma: &A, opts: &SolveOptions<S>) -> Result<SolveReport<S>, EvalError>
where
    S: Scalar,
    A: Memoryless<S> + ?Sized,
{
    if sigma.player() != Owner::Max {
        return Err(EvalError::WrongPlayer { expected: Owner::Max, got: sigma.player() });
    }
    Ok(value_iterate(&fix_strategy(game, sigma)?, opts)?)
}

/// Dual of [`best_response_min`].
pub fn best_response_max<S, B>(game: &Game<S>, pi: &B, opts: &SolveOptions<S>) -> Result<SolveReport<S>, EvalError>
where
    S: Scalar,
    B: Memoryless<S> + ?Sized,
{
    if pi.player() != Owner::Min {
        return Err(EvalError::WrongPlayer { expected: Owner::Min, got: pi.player() });
    }
    Ok(value_iterate(&fix_strategy(game, pi)?, opts)?)
}
