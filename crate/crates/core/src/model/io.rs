use serde::{Deserialize, Serialize};

use super::{Game, GameBuilder, ModelError, Owner, VertexRecord};
use crate::scalar::Scalar;

/// On-disk game: `{"vertices":[{"id","owner","reward","succ","dist"?}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub vertices: Vec<VertexDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDocument {
    pub id: String,
    pub owner: Owner,
    pub reward: f64,
    pub succ: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<f64>>,
}

impl GameDocument {
    pub fn from_game<S: Scalar>(game: &Game<S>) -> Self {
        let vertices = game
            .vertices()
            .iter()
            .map(|v| VertexDocument {
                id: v.id.clone(),
                owner: v.owner,
                reward: v.reward.as_f64(),
                succ: v.succ.iter().map(|&s| game.id(s).to_string()).collect(),
                dist: v
                    .dist
                    .as_ref()
                    .map(|d| d.iter().map(|p| p.as_f64()).collect()),
            })
            .collect();
        GameDocument { vertices }
    }

    pub fn into_game<S: Scalar>(self) -> Result<Game<S>, ModelError> {
        self.vertices
            .into_iter()
            .fold(GameBuilder::new(), |b, v| {
                b.record(VertexRecord {
                    id: v.id,
                    owner: v.owner,
                    reward: S::lit(v.reward),
                    succ: v.succ,
                    dist: v.dist.map(|d| d.into_iter().map(S::lit).collect()),
                })
            })
            .build()
    }
}

/// Parses and validates a game document.
pub fn load(text: &str) -> Result<Game<f64>, ModelError> {
    load_as(text)
}

pub fn load_as<S: Scalar>(text: &str) -> Result<Game<S>, ModelError> {
    let doc: GameDocument = serde_json::from_str(text)?;
    doc.into_game()
}

pub fn save<S: Scalar>(game: &Game<S>) -> String {
    serde_json::to_string_pretty(&GameDocument::from_game(game))
        .expect("game documents always serialize")
}
