//! JSON form of strategies, with vertices referenced by id.
//!
//! MD: `{"kind":"md","player":"max","choices":{"v":"u"}}` (`kind` may be
//! omitted). MR mirrors the game format with aligned `choices`/`dist` arrays.
//! HD carries its rule, `eps`, and the value tables the rule reads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnyStrategy, HdRule, HdStrategy, MdStrategy, MrStrategy, StrategyError};
use crate::model::{Game, Owner};
use crate::numerics::ExtValue;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdDocument {
    pub player: Owner,
    pub choices: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrDocument {
    pub player: Owner,
    pub choices: BTreeMap<String, Vec<String>>,
    pub dist: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HdKind {
    Md,
    Slack,
    Countdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdDocument {
    pub player: Owner,
    pub rule: HdKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BTreeMap<String, ExtValue<f64>>>,
    /// `T_0, …, T_n` of a countdown rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<BTreeMap<String, ExtValue<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyDocument {
    Md(MdDocument),
    Mr(MrDocument),
    Hd(HdDocument),
}

fn md_map<S: Scalar>(game: &Game<S>, s: &MdStrategy) -> BTreeMap<String, String> {
    s.choices()
        .iter()
        .map(|(&v, &u)| (game.id(v).to_string(), game.id(u).to_string()))
        .collect()
}

fn md_from_map<S: Scalar>(game: &Game<S>, player: Owner, m: &BTreeMap<String, String>) -> Result<MdStrategy, StrategyError> {
    let choices = m
        .iter()
        .map(|(v, u)| Ok((game.resolve(v)?, game.resolve(u)?)))
        .collect::<Result<_, StrategyError>>()?;
    let s = MdStrategy::from_choices(player, choices);
    s.check(game)?;
    Ok(s)
}

fn value_map<S: Scalar>(game: &Game<S>, values: &[ExtValue<S>]) -> BTreeMap<String, ExtValue<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(v, x)| (game.id(v).to_string(), x.cast()))
        .collect()
}

fn values_from_map<S: Scalar>(game: &Game<S>, m: &BTreeMap<String, ExtValue<f64>>) -> Result<Vec<ExtValue<S>>, StrategyError> {
    let mut out = vec![None; game.len()];
    for (id, x) in m {
        out[game.resolve(id)?] = Some(x.cast());
    }
    if out.iter().any(Option::is_none) {
        return Err(StrategyError::DomainMismatch {
            expected: game.len(),
            got: m.len(),
        });
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

fn missing(field: &str) -> StrategyError {
    StrategyError::UnknownKind(format!("hd strategy without `{field}`"))
}

impl StrategyDocument {
    pub fn from_strategy<S: Scalar>(game: &Game<S>, s: &AnyStrategy<S>) -> Self {
        match s {
            AnyStrategy::Md(md) => StrategyDocument::Md(MdDocument {
                player: md.player(),
                choices: md_map(game, md),
            }),
            AnyStrategy::Mr(mr) => StrategyDocument::Mr(MrDocument {
                player: mr.player(),
                choices: mr
                    .dists()
                    .iter()
                    .map(|(&v, d)| (game.id(v).to_string(), d.iter().map(|&(u, _)| game.id(u).to_string()).collect()))
                    .collect(),
                dist: mr
                    .dists()
                    .iter()
                    .map(|(&v, d)| (game.id(v).to_string(), d.iter().map(|&(_, p)| p.as_f64()).collect()))
                    .collect(),
            }),
            AnyStrategy::Hd(hd) => {
                let mut doc = HdDocument {
                    player: hd.player(),
                    rule: HdKind::Md,
                    eps: None,
                    choices: None,
                    values: None,
                    tables: None,
                    tail: None,
                };
                match hd.rule() {
                    HdRule::Memoryless(md) => doc.choices = Some(md_map(game, md)),
                    HdRule::Slack { values, eps } => {
                        doc.rule = HdKind::Slack;
                        doc.eps = Some(eps.as_f64());
                        doc.values = Some(value_map(game, values));
                    }
                    HdRule::Countdown { tables, eps, tail } => {
                        doc.rule = HdKind::Countdown;
                        doc.eps = Some(eps.as_f64());
                        doc.tables = Some(tables.iter().map(|t| value_map(game, t)).collect());
                        doc.tail = Some(md_map(game, tail));
                    }
                }
                StrategyDocument::Hd(doc)
            }
        }
    }

    pub fn into_strategy<S: Scalar>(self, game: &Game<S>) -> Result<AnyStrategy<S>, StrategyError> {
        let s = match self {
            StrategyDocument::Md(d) => AnyStrategy::Md(md_from_map(game, d.player, &d.choices)?),
            StrategyDocument::Mr(d) => {
                let mut dists = BTreeMap::new();
                for (v, succ) in &d.choices {
                    let probs = d.dist.get(v).ok_or_else(|| StrategyError::BadDistribution {
                        vertex: v.clone(),
                        reason: "no probabilities".into(),
                    })?;
                    if probs.len() != succ.len() {
                        return Err(StrategyError::BadDistribution {
                            vertex: v.clone(),
                            reason: format!("{} probabilities for {} successors", probs.len(), succ.len()),
                        });
                    }
                    let entries = succ
                        .iter()
                        .zip(probs)
                        .map(|(u, &p)| Ok((game.resolve(u)?, S::lit(p))))
                        .collect::<Result<Vec<_>, StrategyError>>()?;
                    dists.insert(game.resolve(v)?, entries);
                }
                if let Some(v) = d.dist.keys().find(|k| !d.choices.contains_key(*k)) {
                    return Err(StrategyError::BadDistribution {
                        vertex: v.clone(),
                        reason: "probabilities without successors".into(),
                    });
                }
                AnyStrategy::Mr(MrStrategy::new(game, d.player, dists)?)
            }
            StrategyDocument::Hd(d) => {
                let eps = || -> Result<S, StrategyError> {
                    let e = d.eps.ok_or_else(|| missing("eps"))?;
                    if e > 0.0 && e.is_finite() {
                        Ok(S::lit(e))
                    } else {
                        Err(StrategyError::BadEpsilon(e))
                    }
                };
                let rule = match d.rule {
                    HdKind::Md => HdRule::Memoryless(md_from_map(
                        game,
                        d.player,
                        d.choices.as_ref().ok_or_else(|| missing("choices"))?,
                    )?),
                    HdKind::Slack => HdRule::Slack {
                        values: values_from_map(game, d.values.as_ref().ok_or_else(|| missing("values"))?)?,
                        eps: eps()?,
                    },
                    HdKind::Countdown => {
                        let tables = d
                            .tables
                            .as_ref()
                            .ok_or_else(|| missing("tables"))?
                            .iter()
                            .map(|t| values_from_map(game, t))
                            .collect::<Result<Vec<_>, _>>()?;
                        if tables.is_empty() {
                            return Err(missing("tables"));
                        }
                        HdRule::Countdown {
                            tables,
                            eps: eps()?,
                            tail: md_from_map(game, d.player, d.tail.as_ref().ok_or_else(|| missing("tail"))?)?,
                        }
                    }
                };
                AnyStrategy::Hd(HdStrategy::new(d.player, rule)?)
            }
        };
        s.check(game)?;
        Ok(s)
    }

    pub fn to_value(&self) -> Value {
        let (kind, v) = match self {
            StrategyDocument::Md(d) => ("md", serde_json::to_value(d)),
            StrategyDocument::Mr(d) => ("mr", serde_json::to_value(d)),
            StrategyDocument::Hd(d) => ("hd", serde_json::to_value(d)),
        };
        let mut v = v.expect("strategy documents serialize");
        v.as_object_mut()
            .expect("object")
            .insert("kind".into(), Value::String(kind.into()));
        v
    }

    /// Accepts a bare strategy object or any object holding one under
    /// `"strategy"`.
    pub fn from_value(mut v: Value) -> Result<Self, StrategyError> {
        if let Some(inner) = v.get_mut("strategy") {
            return Self::from_value(inner.take());
        }
        let kind = match v.as_object_mut().and_then(|o| o.remove("kind")) {
            None => "md".to_string(),
            Some(Value::String(k)) => k,
            Some(other) => return Err(StrategyError::UnknownKind(other.to_string())),
        };
        Ok(match kind.as_str() {
            "md" => StrategyDocument::Md(serde_json::from_value(v)?),
            "mr" => StrategyDocument::Mr(serde_json::from_value(v)?),
            "hd" => StrategyDocument::Hd(serde_json::from_value(v)?),
            _ => return Err(StrategyError::UnknownKind(kind)),
        })
    }
}

pub fn save_strategy<S: Scalar>(game: &Game<S>, s: &AnyStrategy<S>) -> Value {
    StrategyDocument::from_strategy(game, s).to_value()
}

pub fn load_strategy<S: Scalar>(game: &Game<S>, text: &str) -> Result<AnyStrategy<S>, StrategyError> {
    let v: Value = serde_json::from_str(text)?;
    StrategyDocument::from_value(v)?.into_strategy(game)
}
