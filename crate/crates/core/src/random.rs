//! Random games and strategies for property tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::model::{Game, Owner, TargetSet, Vertex};
use crate::scalar::Scalar;
use crate::strategy::MdStrategy;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomGameSpec {
    /// Vertices besides the absorbing sink.
    pub vertices: usize,
    pub max_succ: usize,
    /// At most this many Max plus Min vertices.
    pub max_player: usize,
    pub rewards: Vec<f64>,
    /// Chance that a successor slot points at the sink.
    pub sink_bias: f64,
}

impl Default for RandomGameSpec {
    fn default() -> Self {
        Self {
            vertices: 8,
            max_succ: 3,
            max_player: 8,
            rewards: vec![0.0, 0.5, 1.0],
            sink_bias: 0.25,
        }
    }
}

/// Vertices `v0..` plus a zero-reward absorbing chance vertex `sink` last.
pub fn random_game<S: Scalar, R: Rng + ?Sized>(rng: &mut R, spec: &RandomGameSpec) -> Game<S> {
    let n = spec.vertices;
    let sink = n;
    let mut players = 0;
    let mut vertices = Vec::with_capacity(n + 1);
    for i in 0..n {
        let owner = match rng.random_range(0..3) {
            0 if players < spec.max_player => Owner::Max,
            1 if players < spec.max_player => Owner::Min,
            _ => Owner::Chance,
        };
        if owner.is_player() {
            players += 1;
        }
        let k = rng.random_range(1..=spec.max_succ.max(1));
        let mut succ: Vec<usize> = Vec::with_capacity(k);
        for _ in 0..k {
            let u = if rng.random_bool(spec.sink_bias) {
                sink
            } else {
                rng.random_range(0..n)
            };
            if !succ.contains(&u) {
                succ.push(u);
            }
        }
        let dist = (owner == Owner::Chance).then(|| {
            let w: Vec<f64> = succ.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| S::lit(x / total)).collect()
        });
        let reward = *spec.rewards.choose(rng).unwrap_or(&0.0);
        vertices.push(Vertex {
            id: format!("v{i}"),
            owner,
            reward: S::lit(reward),
            succ,
            dist,
        });
    }
    vertices.push(Vertex {
        id: "sink".into(),
        owner: Owner::Chance,
        reward: S::zero(),
        succ: vec![sink],
        dist: Some(vec![S::one()]),
    });
    Game::from_vertices_unchecked(vertices)
        .into_checked()
        .expect("generated games are valid")
}

/// A uniformly random MD strategy.
pub fn random_md<S: Scalar, R: Rng + ?Sized>(rng: &mut R, game: &Game<S>, player: Owner) -> MdStrategy {
    MdStrategy::from_positions(game, player, |v| rng.random_range(0..game.succ(v).len()))
}

/// Each vertex is a target independently with probability `p`.
pub fn random_targets<S: Scalar, R: Rng + ?Sized>(rng: &mut R, game: &Game<S>, p: f64) -> TargetSet {
    TargetSet::from_indices((0..game.len()).filter(|_| rng.random_bool(p)).collect::<Vec<_>>())
}
