//! Seeded Monte Carlo rollouts of a strategy pair.
//!
//! Episode `i` draws from a ChaCha8 stream selected by `(seed, i)`, and
//! episodes are merged in fixed chunks in index order, so results do not
//! depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Game, Owner, TargetSet};
use crate::scalar::Scalar;
use crate::strategy::{AnyStrategy, StrategyError};

const CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("invalid simulation options: {0}")]
    Options(String),
    #[error("strategy for {got} passed where a {expected} strategy is needed")]
    WrongPlayer { expected: Owner, got: Owner },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Number of vertices whose rewards are summed per episode.
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
    /// Worker threads; 1 runs on the calling thread.
    pub threads: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            episodes: 10_000,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub episodes: usize,
    pub horizon: usize,
    pub mean_acc: f64,
    pub stderr: f64,
    /// Episodes that hit the horizon while reward (or an unvisited target)
    /// was still reachable.
    pub truncated_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reach_fraction: Option<f64>,
    pub seed: u64,
    /// `truncated_fraction · max reward · horizon`.
    pub bias_bound: f64,
}

/// Welford/Chan running moments plus counters.
#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    n: u64,
    mean: f64,
    m2: f64,
    truncated: u64,
    reached: u64,
}

impl Partial {
    fn push(&mut self, x: f64, truncated: bool, reached: bool) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.truncated += truncated as u64;
        self.reached += reached as u64;
    }

    fn merge(self, o: Partial) -> Partial {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Partial {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
            truncated: self.truncated + o.truncated,
            reached: self.reached + o.reached,
        }
    }
}

/// Vertices from which a marked vertex is reachable (in zero or more steps).
fn co_reachable(succ: &[Vec<usize>], marked: &[bool]) -> Vec<bool> {
    let n = succ.len();
    let mut rev = vec![Vec::new(); n];
    for (v, s) in succ.iter().enumerate() {
        for &u in s {
            rev[u].push(v);
        }
    }
    let mut seen = marked.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&v| marked[v]).collect();
    while let Some(u) = stack.pop() {
        for &v in &rev[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

struct Walker<'a, S> {
    game: &'a Game<S>,
    sigma: &'a AnyStrategy<S>,
    pi: &'a AnyStrategy<S>,
    start: usize,
    targets: Option<&'a TargetSet>,
    horizon: usize,
    /// Some successor can still produce reward.
    reward_ahead: Vec<bool>,
    /// Some successor can still reach a target.
    target_ahead: Vec<bool>,
}

impl<S: Scalar> Walker<'_, S> {
    fn episode(&self, rng: &mut ChaCha8Rng, history: &mut Vec<usize>) -> Result<(f64, bool, bool), SimError> {
        history.clear();
        let g = self.game;
        let mut u = self.start;
        let mut acc = 0.0;
        let mut reached = false;
        for step in 0..self.horizon {
            history.push(u);
            acc += g.reward(u).as_f64();
            reached |= self.targets.is_some_and(|t| t.contains(u));
            let live = self.reward_ahead[u] || (self.targets.is_some() && !reached && self.target_ahead[u]);
            if !live {
                return Ok((acc, false, reached));
            }
            if step + 1 == self.horizon {
                return Ok((acc, true, reached));
            }
            let draw: f64 = rng.random();
            u = match g.owner(u) {
                Owner::Max => self.sigma.pick(g, history, S::lit(draw))?,
                Owner::Min => self.pi.pick(g, history, S::lit(draw))?,
                Owner::Chance => {
                    let mut c = 0.0;
                    let mut pick = *g.succ(u).last().expect("total");
                    for (w, p) in g.transitions(u) {
                        c += p.as_f64();
                        if draw < c {
                            pick = w;
                            break;
                        }
                    }
                    pick
                }
            };
        }
        Ok((acc, false, reached))
    }

    fn chunk(&self, seed: u64, first: usize, last: usize) -> Result<Partial, SimError> {
        let mut part = Partial::default();
        let mut history = Vec::new();
        for ep in first..last {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ep as u64);
            let (x, t, r) = self.episode(&mut rng, &mut history)?;
            part.push(x, t, r);
        }
        Ok(part)
    }
}

/// Successor lists that over-approximate where play can go: the support of
/// memoryless strategies, or the whole game graph otherwise.
fn support<S: Scalar>(game: &Game<S>, sigma: &AnyStrategy<S>, pi: &AnyStrategy<S>) -> Vec<Vec<usize>> {
    (0..game.len())
        .map(|v| {
            let s = match game.owner(v) {
                Owner::Max => sigma.as_memoryless(),
                Owner::Min => pi.as_memoryless(),
                Owner::Chance => None,
            };
            match s.and_then(|s| s.distribution(game, v).ok()) {
                Some(d) => d.into_iter().map(|(u, _)| u).collect(),
                None => game.succ(v).to_vec(),
            }
        })
        .collect()
}

/// Estimates `E[Acc]` (and the probability of visiting `targets`) from `v`
/// by sampling `episodes` runs of at most `horizon` vertices.
pub fn simulate<S: Scalar>(
    game: &Game<S>,
    sigma: &AnyStrategy<S>,
    pi: &AnyStrategy<S>,
    v: usize,
    targets: Option<&TargetSet>,
    opts: &SimOptions,
) -> Result<SimStats, SimError> {
    if opts.horizon == 0 || opts.episodes == 0 {
        return Err(SimError::Options("horizon and episodes must be at least 1".into()));
    }
    if sigma.player() != Owner::Max {
        return Err(SimError::WrongPlayer { expected: Owner::Max, got: sigma.player() });
    }
    if pi.player() != Owner::Min {
        return Err(SimError::WrongPlayer { expected: Owner::Min, got: pi.player() });
    }
    let succ = support(game, sigma, pi);
    let ahead = |marked: Vec<bool>| {
        let reach = co_reachable(&succ, &marked);
        succ.iter().map(|s| s.iter().any(|&u| reach[u])).collect::<Vec<_>>()
    };
    let walker = Walker {
        game,
        sigma,
        pi,
        start: v,
        targets,
        horizon: opts.horizon,
        reward_ahead: ahead((0..game.len()).map(|u| game.reward(u) > S::zero()).collect()),
        target_ahead: ahead((0..game.len()).map(|u| targets.is_some_and(|t| t.contains(u))).collect()),
    };

    let chunks: Vec<(usize, usize)> = (0..opts.episodes)
        .step_by(CHUNK)
        .map(|a| (a, (a + CHUNK).min(opts.episodes)))
        .collect();
    let parts: Vec<Result<Partial, SimError>> = if opts.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| SimError::Options(e.to_string()))?;
        pool.install(|| chunks.par_iter().map(|&(a, b)| walker.chunk(opts.seed, a, b)).collect())
    } else {
        chunks.iter().map(|&(a, b)| walker.chunk(opts.seed, a, b)).collect()
    };
    let mut total = Partial::default();
    for p in parts {
        total = total.merge(p?);
    }

    let n = total.n as f64;
    let var = if total.n > 1 { total.m2 / (n - 1.0) } else { 0.0 };
    let truncated_fraction = total.truncated as f64 / n;
    Ok(SimStats {
        episodes: opts.episodes,
        horizon: opts.horizon,
        mean_acc: total.mean,
        stderr: (var.max(0.0) / n).sqrt(),
        truncated_fraction,
        reach_fraction: targets.map(|_| total.reached as f64 / n),
        seed: opts.seed,
        bias_bound: truncated_fraction * game.max_reward().as_f64() * opts.horizon as f64,
    })
}
