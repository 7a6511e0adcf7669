//! Finite game graphs: vertices owned by Max, Min or chance, non-negative
//! rewards, and positive distributions on chance vertices.

mod io;
mod transform;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use io::{load, load_as, save, GameDocument, VertexDocument};
pub use transform::{fix_strategy, induced_chain, normalize_rewards, reach_to_acc, RewardSplit};

/// Tolerance on `Σ p = 1` for chance distributions.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Who picks the successor at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Max,
    Min,
    Chance,
}

impl Owner {
    pub fn token(self) -> &'static str {
        match self {
            Owner::Max => "max",
            Owner::Min => "min",
            Owner::Chance => "chance",
        }
    }

    pub fn is_player(self) -> bool {
        !matches!(self, Owner::Chance)
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex<S> {
    pub id: String,
    pub owner: Owner,
    pub reward: S,
    pub succ: Vec<usize>,
    /// Aligned index-wise with `succ`; present iff `owner` is chance.
    pub dist: Option<Vec<S>>,
}

/// An invariant broken at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub vertex: String,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    NoSuccessor,
    DuplicateSuccessor(String),
    InvalidReward(f64),
    MissingDistribution,
    UnexpectedDistribution,
    DistributionLength { succ: usize, dist: usize },
    NonPositiveProbability { succ: String, p: f64 },
    ProbabilitySum(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.vertex;
        match &self.rule {
            Rule::NoSuccessor => write!(f, "{v}: no successor (transition relation not total)"),
            Rule::DuplicateSuccessor(s) => write!(f, "{v}: successor {s} listed twice"),
            Rule::InvalidReward(r) => write!(f, "{v}: reward {r} is not a finite non-negative real"),
            Rule::MissingDistribution => write!(f, "{v}: chance vertex without distribution"),
            Rule::UnexpectedDistribution => write!(f, "{v}: player vertex carries a distribution"),
            Rule::DistributionLength { succ, dist } => {
                write!(f, "{v}: {dist} probabilities for {succ} successors")
            }
            Rule::NonPositiveProbability { succ, p } => {
                write!(f, "{v}: probability {p} on edge to {succ} is not positive")
            }
            Rule::ProbabilitySum(s) => write!(f, "{v}: probabilities sum to {s}, not 1"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty vertex id")]
    EmptyId,
    #[error("duplicate vertex id {0}")]
    DuplicateId(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("invalid game: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("strategy has no entry for {player} vertex {vertex}")]
    MissingChoice { player: Owner, vertex: String },
    #[error("choice {to} is not a successor of {from}")]
    NotASuccessor { from: String, to: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A finite stochastic game with vertex rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Game<S> {
    vertices: Vec<Vertex<S>>,
    index: HashMap<String, usize>,
}

impl<S: Scalar> Game<S> {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex<S>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vertex<S> {
        &self.vertices[v]
    }

    pub fn id(&self, v: usize) -> &str {
        &self.vertices[v].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Like [`Game::index_of`] but reports unknown ids as an error.
    pub fn resolve(&self, id: &str) -> Result<usize, ModelError> {
        self.index_of(id)
            .ok_or_else(|| ModelError::UnknownVertex(id.to_string()))
    }

    pub fn owner(&self, v: usize) -> Owner {
        self.vertices[v].owner
    }

    pub fn reward(&self, v: usize) -> S {
        self.vertices[v].reward
    }

    pub fn succ(&self, v: usize) -> &[usize] {
        &self.vertices[v].succ
    }

    pub fn dist(&self, v: usize) -> Option<&[S]> {
        self.vertices[v].dist.as_deref()
    }

    /// `(successor, probability)` pairs of a chance vertex.
    pub fn transitions(&self, v: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let vx = &self.vertices[v];
        let dist = vx.dist.as_deref().unwrap_or(&[]);
        vx.succ.iter().copied().zip(dist.iter().copied())
    }

    pub fn owned_by(&self, owner: Owner) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&v| self.vertices[v].owner == owner)
    }

    pub fn max_reward(&self) -> S {
        self.vertices
            .iter()
            .map(|v| v.reward)
            .fold(S::zero(), S::max)
    }

    /// Position of `to` in the successor list of `from`.
    pub fn succ_position(&self, from: usize, to: usize) -> Option<usize> {
        self.vertices[from].succ.iter().position(|&s| s == to)
    }

    /// Checks every structural invariant; an empty result means the game is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for vx in &self.vertices {
            let mut push = |rule| {
                out.push(Violation {
                    vertex: vx.id.clone(),
                    rule,
                })
            };
            if vx.succ.is_empty() {
                push(Rule::NoSuccessor);
            }
            let mut seen = BTreeSet::new();
            for &s in &vx.succ {
                if !seen.insert(s) {
                    push(Rule::DuplicateSuccessor(self.vertices[s].id.clone()));
                }
            }
            if !vx.reward.is_finite() || vx.reward < S::zero() {
                push(Rule::InvalidReward(vx.reward.as_f64()));
            }
            match (&vx.dist, vx.owner) {
                (None, Owner::Chance) => push(Rule::MissingDistribution),
                (Some(_), Owner::Max | Owner::Min) => push(Rule::UnexpectedDistribution),
                (None, _) => {}
                (Some(dist), Owner::Chance) => {
                    if dist.len() != vx.succ.len() {
                        push(Rule::DistributionLength {
                            succ: vx.succ.len(),
                            dist: dist.len(),
                        });
                    }
                    for (&s, &p) in vx.succ.iter().zip(dist) {
                        if !(p > S::zero()) || !p.is_finite() {
                            push(Rule::NonPositiveProbability {
                                succ: self.vertices[s].id.clone(),
                                p: p.as_f64(),
                            });
                        }
                    }
                    let sum: f64 = dist.iter().map(|p| p.as_f64()).sum();
                    if !dist.is_empty() && (sum - 1.0).abs() > PROB_SUM_TOL {
                        push(Rule::ProbabilitySum(sum));
                    }
                }
            }
        }
        out
    }

    /// Converts every number to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Game<T> {
        Game {
            vertices: self
                .vertices
                .iter()
                .map(|v| Vertex {
                    id: v.id.clone(),
                    owner: v.owner,
                    reward: T::lit(v.reward.as_f64()),
                    succ: v.succ.clone(),
                    dist: v
                        .dist
                        .as_ref()
                        .map(|d| d.iter().map(|p| T::lit(p.as_f64())).collect()),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    pub(crate) fn from_vertices_unchecked(vertices: Vec<Vertex<S>>) -> Self {
        let index = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), i))
            .collect();
        Game { vertices, index }
    }

    /// Validates and renormalizes chance distributions to sum to exactly 1.
    pub(crate) fn into_checked(mut self) -> Result<Self, ModelError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        for vx in &mut self.vertices {
            if let Some(dist) = vx.dist.as_mut() {
                let sum: S = dist.iter().copied().sum();
                if sum != S::one() {
                    for p in dist.iter_mut() {
                        *p /= sum;
                    }
                }
            }
        }
        Ok(self)
    }

    /// Fresh vertex id derived from `base` that does not clash with existing ids.
    pub(crate) fn fresh_id(&self, base: &str) -> String {
        if self.index_of(base).is_none() {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}#{i}"))
            .find(|c| self.index_of(c).is_none())
            .expect("unbounded id supply")
    }
}

/// Set of target vertices for a reachability objective.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetSet(BTreeSet<usize>);

impl TargetSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_indices(idx: impl IntoIterator<Item = usize>) -> Self {
        Self(idx.into_iter().collect())
    }

    pub fn from_ids<S: Scalar, I, T>(game: &Game<S>, ids: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        ids.into_iter()
            .map(|id| game.resolve(id.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()
            .map(Self)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids<'a, S: Scalar>(&'a self, game: &'a Game<S>) -> Vec<&'a str> {
        self.iter().map(|v| game.id(v)).collect()
    }
}

/// One vertex as written by a caller, successors referenced by id.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexRecord<S> {
    pub id: String,
    pub owner: Owner,
    pub reward: S,
    pub succ: Vec<String>,
    pub dist: Option<Vec<S>>,
}

/// Collects vertex records and resolves them into a [`Game`].
#[derive(Debug, Clone, Default)]
pub struct GameBuilder<S> {
    records: Vec<VertexRecord<S>>,
}

impl<S: Scalar> GameBuilder<S> {
    pub fn new() -> Self {
        Self {
            records: Vec::new(),
        }
    }

    pub fn record(mut self, record: VertexRecord<S>) -> Self {
        self.records.push(record);
        self
    }

    pub fn max(self, id: &str, reward: f64, succ: &[&str]) -> Self {
        self.player(id, Owner::Max, reward, succ)
    }

    pub fn min(self, id: &str, reward: f64, succ: &[&str]) -> Self {
        self.player(id, Owner::Min, reward, succ)
    }

    pub fn player(self, id: &str, owner: Owner, reward: f64, succ: &[&str]) -> Self {
        self.record(VertexRecord {
            id: id.to_string(),
            owner,
            reward: S::lit(reward),
            succ: succ.iter().map(|s| s.to_string()).collect(),
            dist: None,
        })
    }

    pub fn chance(self, id: &str, reward: f64, edges: &[(&str, f64)]) -> Self {
        self.record(VertexRecord {
            id: id.to_string(),
            owner: Owner::Chance,
            reward: S::lit(reward),
            succ: edges.iter().map(|(s, _)| s.to_string()).collect(),
            dist: Some(edges.iter().map(|&(_, p)| S::lit(p)).collect()),
        })
    }

    /// Resolves ids only; the result may violate game invariants.
    pub fn build_unchecked(self) -> Result<Game<S>, ModelError> {
        let mut index = HashMap::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if r.id.is_empty() {
                return Err(ModelError::EmptyId);
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateId(r.id.clone()));
            }
        }
        let vertices = self
            .records
            .into_iter()
            .map(|r| {
                let succ = r
                    .succ
                    .iter()
                    .map(|s| {
                        index
                            .get(s)
                            .copied()
                            .ok_or_else(|| ModelError::UnknownVertex(s.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Vertex {
                    id: r.id,
                    owner: r.owner,
                    reward: r.reward,
                    succ,
                    dist: r.dist,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Game { vertices, index })
    }

    /// Resolves ids, validates, and renormalizes distributions.
    pub fn build(self) -> Result<Game<S>, ModelError> {
        self.build_unchecked()?.into_checked()
    }
}
