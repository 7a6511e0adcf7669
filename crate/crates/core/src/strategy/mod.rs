//! Strategies for one player: memoryless deterministic (MD), memoryless
//! randomized (MR) and history-dependent deterministic (HD), plus the
//! syntheses in [`synth`].
//!
//! All deterministic choices break ties by successor-list order.

mod doc;
mod synth;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bellman::{first_argmax, first_argmin, SolveError};
use crate::model::{Game, ModelError, Owner};
use crate::numerics::ExtValue;
use crate::scalar::Scalar;

pub use doc::{load_strategy, save_strategy, StrategyDocument};
pub use synth::{
    max_eps_hd, max_md_eps, min_eps_hd, min_md_optimal, mr_from_weights, MaxMdReport, SynthOptions,
};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("strategy parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} is not a player")]
    NotAPlayer(Owner),
    #[error("strategy for {player} has an entry at {vertex}, which {player} does not own")]
    NotOwned { vertex: String, player: Owner },
    #[error("value vector has {got} entries for a game with {expected} vertices")]
    DomainMismatch { expected: usize, got: usize },
    #[error("values are not a fixed point at {vertex}: best successor exceeds the value by {gap:e}")]
    Inconsistent { vertex: String, gap: f64 },
    #[error("{vertex}: {weights} weights for {succ} successors")]
    WeightCount { vertex: String, succ: usize, weights: usize },
    #[error("{vertex}: weight {weight} is not positive")]
    BadWeight { vertex: String, weight: f64 },
    #[error("{vertex}: {reason}")]
    BadDistribution { vertex: String, reason: String },
    #[error("epsilon {0} must be positive and finite")]
    BadEpsilon(f64),
    #[error("empty history")]
    EmptyHistory,
    #[error("unknown strategy kind {0}")]
    UnknownKind(String),
}

/// A strategy that looks only at the current vertex.
pub trait Memoryless<S: Scalar> {
    fn player(&self) -> Owner;

    /// Distribution over successors of `v`, which must be owned by
    /// [`Memoryless::player`].
    fn distribution(&self, game: &Game<S>, v: usize) -> Result<Vec<(usize, S)>, ModelError>;
}

fn require_player(owner: Owner) -> Result<(), StrategyError> {
    if owner.is_player() {
        Ok(())
    } else {
        Err(StrategyError::NotAPlayer(owner))
    }
}

fn check_keys<'a, S: Scalar>(
    game: &Game<S>,
    player: Owner,
    keys: impl Iterator<Item = &'a usize>,
) -> Result<(), StrategyError> {
    require_player(player)?;
    let mut covered = vec![false; game.len()];
    for &v in keys {
        if v >= game.len() {
            return Err(ModelError::UnknownVertex(format!("#{v}")).into());
        }
        if game.owner(v) != player {
            return Err(StrategyError::NotOwned {
                vertex: game.id(v).to_string(),
                player,
            });
        }
        covered[v] = true;
    }
    match game.owned_by(player).find(|&v| !covered[v]) {
        Some(v) => Err(ModelError::MissingChoice {
            player,
            vertex: game.id(v).to_string(),
        }
        .into()),
        None => Ok(()),
    }
}

/// Memoryless deterministic strategy: one successor per owned vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdStrategy {
    player: Owner,
    choices: BTreeMap<usize, usize>,
}

impl MdStrategy {
    pub fn from_choices(player: Owner, choices: BTreeMap<usize, usize>) -> Self {
        Self { player, choices }
    }

    pub fn empty(player: Owner) -> Self {
        Self::from_choices(player, BTreeMap::new())
    }

    /// Picks the `i`-th successor at every owned vertex, where `pick`
    /// returns a position in the successor list.
    pub fn from_positions<S: Scalar>(
        game: &Game<S>,
        player: Owner,
        mut pick: impl FnMut(usize) -> usize,
    ) -> Self {
        let choices = game
            .owned_by(player)
            .map(|v| (v, game.succ(v)[pick(v)]))
            .collect();
        Self { player, choices }
    }

    /// The first successor everywhere.
    pub fn first<S: Scalar>(game: &Game<S>, player: Owner) -> Self {
        Self::from_positions(game, player, |_| 0)
    }

    pub fn from_ids<S: Scalar>(
        game: &Game<S>,
        player: Owner,
        pairs: &[(&str, &str)],
    ) -> Result<Self, ModelError> {
        let choices = pairs
            .iter()
            .map(|(v, u)| Ok((game.resolve(v)?, game.resolve(u)?)))
            .collect::<Result<_, ModelError>>()?;
        Ok(Self { player, choices })
    }

    pub fn player(&self) -> Owner {
        self.player
    }

    pub fn choices(&self) -> &BTreeMap<usize, usize> {
        &self.choices
    }

    pub fn choice(&self, v: usize) -> Option<usize> {
        self.choices.get(&v).copied()
    }

    pub fn set(&mut self, v: usize, u: usize) {
        self.choices.insert(v, u);
    }

    /// Strict check: defined on exactly the owned vertices, and every choice
    /// is a successor.
    pub fn check<S: Scalar>(&self, game: &Game<S>) -> Result<(), StrategyError> {
        check_keys(game, self.player, self.choices.keys())?;
        for (&v, &u) in &self.choices {
            if game.succ_position(v, u).is_none() {
                return Err(not_a_successor(game, v, u).into());
            }
        }
        Ok(())
    }
}

fn not_a_successor<S: Scalar>(game: &Game<S>, v: usize, u: usize) -> ModelError {
    ModelError::NotASuccessor {
        from: game.id(v).to_string(),
        to: if u < game.len() {
            game.id(u).to_string()
        } else {
            format!("#{u}")
        },
    }
}

impl<S: Scalar> Memoryless<S> for MdStrategy {
    fn player(&self) -> Owner {
        self.player
    }

    fn distribution(&self, game: &Game<S>, v: usize) -> Result<Vec<(usize, S)>, ModelError> {
        let u = self.choice(v).ok_or_else(|| ModelError::MissingChoice {
            player: self.player,
            vertex: game.id(v).to_string(),
        })?;
        if game.succ_position(v, u).is_none() {
            return Err(not_a_successor(game, v, u));
        }
        Ok(vec![(u, S::one())])
    }
}

/// Memoryless randomized strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct MrStrategy<S> {
    player: Owner,
    dists: BTreeMap<usize, Vec<(usize, S)>>,
}

impl<S: Scalar> MrStrategy<S> {
    /// Validates that every distribution is over distinct successors with
    /// positive entries summing to 1 (within 1e-9), then renormalizes.
    pub fn new(
        game: &Game<S>,
        player: Owner,
        dists: BTreeMap<usize, Vec<(usize, S)>>,
    ) -> Result<Self, StrategyError> {
        check_keys(game, player, dists.keys())?;
        let mut out = BTreeMap::new();
        for (v, d) in dists {
            let bad = |reason: String| StrategyError::BadDistribution {
                vertex: game.id(v).to_string(),
                reason,
            };
            if d.is_empty() {
                return Err(bad("empty distribution".into()));
            }
            for (i, &(u, p)) in d.iter().enumerate() {
                if game.succ_position(v, u).is_none() {
                    return Err(not_a_successor(game, v, u).into());
                }
                if d[..i].iter().any(|&(w, _)| w == u) {
                    return Err(bad(format!("successor {} listed twice", game.id(u))));
                }
                if !(p > S::zero()) || !p.is_finite() {
                    return Err(bad(format!("probability {p} is not positive")));
                }
            }
            let total: S = d.iter().map(|&(_, p)| p).sum();
            if (total - S::one()).abs().as_f64() > crate::model::PROB_SUM_TOL {
                return Err(bad(format!("probabilities sum to {total}")));
            }
            out.insert(v, d.into_iter().map(|(u, p)| (u, p / total)).collect());
        }
        Ok(Self { player, dists: out })
    }

    pub fn from_md(md: &MdStrategy) -> Self {
        Self {
            player: md.player,
            dists: md.choices.iter().map(|(&v, &u)| (v, vec![(u, S::one())])).collect(),
        }
    }

    pub fn player(&self) -> Owner {
        self.player
    }

    pub fn dists(&self) -> &BTreeMap<usize, Vec<(usize, S)>> {
        &self.dists
    }
}

impl<S: Scalar> Memoryless<S> for MrStrategy<S> {
    fn player(&self) -> Owner {
        self.player
    }

    fn distribution(&self, game: &Game<S>, v: usize) -> Result<Vec<(usize, S)>, ModelError> {
        self.dists.get(&v).cloned().ok_or_else(|| ModelError::MissingChoice {
            player: self.player,
            vertex: game.id(v).to_string(),
        })
    }
}

/// Decision rule of an HD strategy. Every rule depends on the history only
/// through its last vertex and its length.
#[derive(Debug, Clone, PartialEq)]
pub enum HdRule<S> {
    Memoryless(MdStrategy),
    /// Min: at step `m` in `u`, the first `u'` with
    /// `r(u) + K(u') ≤ K(u) ⊕ eps/2^{m+1}`.
    Slack { values: Vec<ExtValue<S>>, eps: S },
    /// Max: with tables `T_0..T_n`, at step `m ≤ n` in `u` the first `u'`
    /// with `r(u) + T_{n-m-1}(u') ≥ T_{n-m}(u) ⊖ eps/2^{m+1}` (`T_{-1} = 0`);
    /// after step `n`, the `tail` strategy.
    Countdown {
        tables: Vec<Vec<ExtValue<S>>>,
        eps: S,
        tail: MdStrategy,
    },
}

/// History-dependent deterministic strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct HdStrategy<S> {
    player: Owner,
    rule: HdRule<S>,
}

/// `eps / 2^{m+1}`, reaching 0 for long histories.
fn slack<S: Scalar>(eps: S, m: usize) -> S {
    let k = (m + 1).min(i32::MAX as usize) as i32;
    eps * S::lit(0.5f64.powi(k))
}

impl<S: Scalar> HdStrategy<S> {
    pub fn new(player: Owner, rule: HdRule<S>) -> Result<Self, StrategyError> {
        require_player(player)?;
        Ok(Self { player, rule })
    }

    pub fn player(&self) -> Owner {
        self.player
    }

    pub fn rule(&self) -> &HdRule<S> {
        &self.rule
    }

    /// Horizon `n` of a countdown rule.
    pub fn horizon(&self) -> Option<usize> {
        match &self.rule {
            HdRule::Countdown { tables, .. } => Some(tables.len() - 1),
            _ => None,
        }
    }

    /// Successor chosen after `history`, whose last vertex must be owned by
    /// this strategy's player.
    pub fn decide(&self, game: &Game<S>, history: &[usize]) -> Result<usize, StrategyError> {
        let &u = history.last().ok_or(StrategyError::EmptyHistory)?;
        if game.owner(u) != self.player {
            return Err(StrategyError::NotOwned {
                vertex: game.id(u).to_string(),
                player: self.player,
            });
        }
        let m = history.len() - 1;
        let r = ExtValue::Finite(game.reward(u));
        match &self.rule {
            HdRule::Memoryless(md) => Ok(Memoryless::<S>::distribution(md, game, u)?[0].0),
            HdRule::Slack { values, eps } => {
                let bound = values[u].oplus(slack(*eps, m));
                Ok(game
                    .succ(u)
                    .iter()
                    .copied()
                    .find(|&w| r + values[w] <= bound)
                    .unwrap_or_else(|| first_argmin(game, u, values)))
            }
            HdRule::Countdown { tables, eps, tail } => {
                let n = tables.len() - 1;
                if m > n {
                    return Ok(Memoryless::<S>::distribution(tail, game, u)?[0].0);
                }
                let target = tables[n - m][u];
                let next = |w: usize| {
                    if m < n {
                        tables[n - m - 1][w]
                    } else {
                        ExtValue::zero()
                    }
                };
                let s = slack(*eps, m);
                Ok(game
                    .succ(u)
                    .iter()
                    .copied()
                    .find(|&w| (r + next(w)).meets_lower(target, s))
                    .unwrap_or_else(|| {
                        let look: Vec<_> = (0..game.len()).map(next).collect();
                        first_argmax(game, u, &look)
                    }))
            }
        }
    }
}

/// Any strategy kind, as consumed by simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyStrategy<S> {
    Md(MdStrategy),
    Mr(MrStrategy<S>),
    Hd(HdStrategy<S>),
}

impl<S: Scalar> AnyStrategy<S> {
    pub fn player(&self) -> Owner {
        match self {
            AnyStrategy::Md(s) => s.player(),
            AnyStrategy::Mr(s) => s.player(),
            AnyStrategy::Hd(s) => s.player(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyStrategy::Md(_) => "md",
            AnyStrategy::Mr(_) => "mr",
            AnyStrategy::Hd(_) => "hd",
        }
    }

    /// The memoryless view, if the strategy has one.
    pub fn as_memoryless(&self) -> Option<&dyn Memoryless<S>> {
        match self {
            AnyStrategy::Md(s) => Some(s),
            AnyStrategy::Mr(s) => Some(s),
            AnyStrategy::Hd(HdStrategy {
                rule: HdRule::Memoryless(s),
                ..
            }) => Some(s),
            AnyStrategy::Hd(_) => None,
        }
    }

    /// Successor chosen after `history`; `draw` is a uniform sample from
    /// `[0, 1)` used only by randomized strategies.
    pub fn pick(&self, game: &Game<S>, history: &[usize], draw: S) -> Result<usize, StrategyError> {
        let &u = history.last().ok_or(StrategyError::EmptyHistory)?;
        match self {
            AnyStrategy::Md(s) => Ok(Memoryless::<S>::distribution(s, game, u)?[0].0),
            AnyStrategy::Mr(s) => {
                let d = s.distribution(game, u)?;
                let mut acc = S::zero();
                for &(w, p) in &d {
                    acc += p;
                    if draw < acc {
                        return Ok(w);
                    }
                }
                Ok(d.last().expect("non-empty distribution").0)
            }
            AnyStrategy::Hd(s) => s.decide(game, history),
        }
    }

    /// Strict structural check against `game`.
    pub fn check(&self, game: &Game<S>) -> Result<(), StrategyError> {
        match self {
            AnyStrategy::Md(s) => s.check(game),
            AnyStrategy::Mr(s) => MrStrategy::new(game, s.player, s.dists.clone()).map(|_| ()),
            AnyStrategy::Hd(s) => {
                require_player(s.player)?;
                let want = game.len();
                match &s.rule {
                    HdRule::Memoryless(md) => md.check(game),
                    HdRule::Slack { values, .. } if values.len() != want => {
                        Err(StrategyError::DomainMismatch { expected: want, got: values.len() })
                    }
                    HdRule::Countdown { tables, tail, .. } => {
                        if let Some(t) = tables.iter().find(|t| t.len() != want) {
                            return Err(StrategyError::DomainMismatch { expected: want, got: t.len() });
                        }
                        tail.check(game)
                    }
                    HdRule::Slack { .. } => Ok(()),
                }
            }
        }
    }
}

impl<S> From<MdStrategy> for AnyStrategy<S> {
    fn from(s: MdStrategy) -> Self {
        AnyStrategy::Md(s)
    }
}

impl<S> From<MrStrategy<S>> for AnyStrategy<S> {
    fn from(s: MrStrategy<S>) -> Self {
        AnyStrategy::Mr(s)
    }
}

impl<S> From<HdStrategy<S>> for AnyStrategy<S> {
    fn from(s: HdStrategy<S>) -> Self {
        AnyStrategy::Hd(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GameBuilder;

    fn game() -> Game<f64> {
        GameBuilder::new()
            .max("a", 0.0, &["b", "c"])
            .min("b", 0.0, &["a", "c"])
            .chance("c", 1.0, &[("c", 1.0)])
            .build()
            .unwrap()
    }

    #[test]
    fn md_check() {
        let g = game();
        let s = MdStrategy::first(&g, Owner::Max);
        assert!(s.check(&g).is_ok());
        assert_eq!(s.choice(0), Some(1));
        assert!(matches!(
            MdStrategy::empty(Owner::Max).check(&g),
            Err(StrategyError::Model(ModelError::MissingChoice { .. }))
        ));
        let extra = MdStrategy::from_choices(Owner::Max, [(0, 1), (1, 0)].into_iter().collect());
        assert!(matches!(extra.check(&g), Err(StrategyError::NotOwned { .. })));
        let bad = MdStrategy::from_choices(Owner::Max, [(0, 0)].into_iter().collect());
        assert!(matches!(bad.check(&g), Err(StrategyError::Model(ModelError::NotASuccessor { .. }))));
        assert!(matches!(
            MdStrategy::empty(Owner::Chance).check(&g),
            Err(StrategyError::NotAPlayer(_))
        ));
    }

    #[test]
    fn mr_validation() {
        let g = game();
        let ok = MrStrategy::new(&g, Owner::Max, [(0, vec![(1, 0.25), (2, 0.75)])].into_iter().collect());
        assert!(ok.is_ok());
        let sum = MrStrategy::new(&g, Owner::Max, [(0, vec![(1, 0.25), (2, 0.5)])].into_iter().collect());
        assert!(matches!(sum, Err(StrategyError::BadDistribution { .. })));
        let zero = MrStrategy::new(&g, Owner::Max, [(0, vec![(1, 0.0), (2, 1.0)])].into_iter().collect());
        assert!(matches!(zero, Err(StrategyError::BadDistribution { .. })));
    }

    #[test]
    fn mr_pick_follows_cumulative_mass() {
        let g = game();
        let s: AnyStrategy<f64> = MrStrategy::new(&g, Owner::Max, [(0, vec![(1, 0.25), (2, 0.75)])].into_iter().collect())
            .unwrap()
            .into();
        assert_eq!(s.pick(&g, &[0], 0.1).unwrap(), 1);
        assert_eq!(s.pick(&g, &[0], 0.25).unwrap(), 2);
        assert_eq!(s.pick(&g, &[0], 0.999).unwrap(), 2);
    }

    #[test]
    fn hd_refuses_foreign_vertices() {
        let g = game();
        let s = HdStrategy::new(Owner::Max, HdRule::Memoryless(MdStrategy::first(&g, Owner::Max))).unwrap();
        assert!(matches!(s.decide(&g, &[1]), Err(StrategyError::NotOwned { .. })));
        assert!(matches!(s.decide(&g, &[]), Err(StrategyError::EmptyHistory)));
        assert_eq!(s.decide(&g, &[2, 0]).unwrap(), 1);
    }

    #[test]
    fn slack_vanishes() {
        assert_eq!(slack(1.0f64, 0), 0.5);
        assert_eq!(slack(1.0f64, 3), 1.0 / 16.0);
        assert_eq!(slack(1.0f64, 5000), 0.0);
    }
}
