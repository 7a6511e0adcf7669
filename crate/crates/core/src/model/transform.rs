//! Game-to-game constructions: reachability as total reward, reward
//! splitting, and the Markov chain induced by two memoryless strategies.

use std::collections::BTreeMap;

use super::{Game, ModelError, Owner, TargetSet, Vertex};
use crate::scalar::Scalar;
use crate::strategy::{MdStrategy, Memoryless};

/// Encodes a reachability objective as total accumulated reward.
///
/// Every target gets reward 1 and a single transition to a fresh absorbing
/// chance sink of reward 0; all other rewards become 0. Targets are turned
/// into chance vertices with a Dirac distribution so strategies of the
/// original game remain usable (their entries at targets are ignored).
pub fn reach_to_acc<S: Scalar>(game: &Game<S>, targets: &TargetSet) -> Result<Game<S>, ModelError> {
    if let Some(bad) = targets.iter().find(|&t| t >= game.len()) {
        return Err(ModelError::UnknownVertex(format!("#{bad}")));
    }
    let sink = game.len();
    let sink_id = game.fresh_id("sink");
    let mut vertices: Vec<Vertex<S>> = game
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if targets.contains(i) {
                Vertex {
                    id: v.id.clone(),
                    owner: Owner::Chance,
                    reward: S::one(),
                    succ: vec![sink],
                    dist: Some(vec![S::one()]),
                }
            } else {
                Vertex {
                    reward: S::zero(),
                    ..v.clone()
                }
            }
        })
        .collect();
    vertices.push(Vertex {
        id: sink_id,
        owner: Owner::Chance,
        reward: S::zero(),
        succ: vec![sink],
        dist: Some(vec![S::one()]),
    });
    Game::from_vertices_unchecked(vertices).into_checked()
}

/// Correspondence between a game and its reward-normalized version.
///
/// Original vertex `v` keeps its index and id in the normalized game (it is
/// the head of its chain); `tail[v]` is the vertex that carries `v`'s owner
/// and successors.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSplit {
    pub tail: Vec<usize>,
    /// For every vertex of the normalized game, the original vertex it came from.
    pub origin: Vec<usize>,
}

impl RewardSplit {
    pub fn added(&self) -> usize {
        self.origin.len() - self.tail.len()
    }

    /// Moves strategy entries of an original-game strategy onto chain tails.
    pub fn push_md(&self, s: &MdStrategy) -> MdStrategy {
        let choices: BTreeMap<usize, usize> =
            s.choices().iter().map(|(&v, &u)| (self.tail[v], u)).collect();
        MdStrategy::from_choices(s.player(), choices)
    }

    /// Inverse of [`RewardSplit::push_md`].
    pub fn pull_md(&self, s: &MdStrategy) -> MdStrategy {
        let choices: BTreeMap<usize, usize> =
            s.choices().iter().map(|(&v, &u)| (self.origin[v], u)).collect();
        MdStrategy::from_choices(s.player(), choices)
    }
}

/// Splits every vertex with reward `r > 1` into a deterministic chain of
/// `⌈r⌉` vertices each carrying `r/⌈r⌉`; the last one inherits the owner and
/// successors. Afterwards all rewards are at most 1.
pub fn normalize_rewards<S: Scalar>(game: &Game<S>) -> (Game<S>, RewardSplit) {
    let n = game.len();
    let mut vertices: Vec<Vertex<S>> = game.vertices().to_vec();
    let mut tail: Vec<usize> = (0..n).collect();
    let mut origin: Vec<usize> = (0..n).collect();
    let mut taken: std::collections::HashSet<String> =
        game.vertices().iter().map(|v| v.id.clone()).collect();

    for v in 0..n {
        let r = game.reward(v);
        if r <= S::one() {
            continue;
        }
        let k = r.ceil().to_usize().expect("finite reward");
        let share = r / S::lit(k as f64);
        let original = vertices[v].clone();
        let mut prev = v;
        for i in 1..k {
            let idx = vertices.len();
            let mut id = format!("{}~{}", original.id, i);
            while taken.contains(&id) {
                id.push('\'');
            }
            taken.insert(id.clone());
            vertices[prev].owner = Owner::Chance;
            vertices[prev].succ = vec![idx];
            vertices[prev].dist = Some(vec![S::one()]);
            vertices[prev].reward = share;
            vertices.push(Vertex {
                id,
                owner: original.owner,
                reward: share,
                succ: original.succ.clone(),
                dist: original.dist.clone(),
            });
            origin.push(v);
            prev = idx;
        }
        tail[v] = prev;
    }
    let g = Game::from_vertices_unchecked(vertices)
        .into_checked()
        .expect("splitting preserves validity");
    (g, RewardSplit { tail, origin })
}

/// Fixes both players' memoryless strategies, leaving a game in which every
/// vertex is a chance vertex. Entries at vertices the player does not own
/// are ignored.
pub fn induced_chain<S, A, B>(game: &Game<S>, sigma: &A, pi: &B) -> Result<Game<S>, ModelError>
where
    S: Scalar,
    A: Memoryless<S> + ?Sized,
    B: Memoryless<S> + ?Sized,
{
    fix_strategy(&fix_strategy(game, sigma)?, pi)
}

/// Fixes one player's memoryless strategy; that player's vertices become
/// chance vertices and the other player's are left alone.
pub fn fix_strategy<S, A>(game: &Game<S>, strategy: &A) -> Result<Game<S>, ModelError>
where
    S: Scalar,
    A: Memoryless<S> + ?Sized,
{
    let player = strategy.player();
    let vertices = game
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, vx)| {
            if vx.owner != player {
                return Ok(vx.clone());
            }
            let dist = strategy.distribution(game, v)?;
            Ok(Vertex {
                id: vx.id.clone(),
                owner: Owner::Chance,
                reward: vx.reward,
                succ: dist.iter().map(|&(u, _)| u).collect(),
                dist: Some(dist.iter().map(|&(_, p)| p).collect()),
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(Game::from_vertices_unchecked(vertices))
}
