//! Brute force over all memoryless deterministic strategy pairs.

use super::{evaluate_md_pair, evaluate_pair_all, evaluate_reach, evaluate_reach_all, EvalError};
use crate::model::{Game, Owner, TargetSet};
use crate::numerics::ExtValue;
use crate::scalar::Scalar;
use crate::strategy::MdStrategy;

/// Default bound on the number of MD strategy pairs.
pub const DEFAULT_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct MdExtremes<S> {
    /// `sup_σ inf_π` over MD strategies.
    pub sup_inf: ExtValue<S>,
    /// `inf_π sup_σ` over MD strategies.
    pub inf_sup: ExtValue<S>,
    /// Maximizing `σ` and Min's best reply to it.
    pub sup_inf_witness: (MdStrategy, MdStrategy),
    /// Max's best reply to the minimizing `π`, and that `π`.
    pub inf_sup_witness: (MdStrategy, MdStrategy),
    /// Pairs actually evaluated.
    pub evaluated: usize,
}

/// Number of MD strategy pairs: the product of successor counts over all
/// player vertices.
pub fn md_strategy_count<S: Scalar>(game: &Game<S>) -> f64 {
    (0..game.len())
        .filter(|&v| game.owner(v).is_player())
        .map(|v| game.succ(v).len() as f64)
        .product()
}

/// All MD strategies of `player` in lexicographic successor order, the
/// lowest-indexed vertex varying slowest.
pub fn md_strategies<S: Scalar>(game: &Game<S>, player: Owner) -> Vec<MdStrategy> {
    let owned: Vec<usize> = game.owned_by(player).collect();
    let mut pos = vec![0usize; owned.len()];
    let mut out = Vec::new();
    loop {
        out.push(MdStrategy::from_choices(
            player,
            owned.iter().zip(&pos).map(|(&v, &i)| (v, game.succ(v)[i])).collect(),
        ));
        let mut k = owned.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            pos[k] += 1;
            if pos[k] < game.succ(owned[k]).len() {
                break;
            }
            pos[k] = 0;
        }
    }
}

fn check_cap<S: Scalar>(game: &Game<S>, cap: f64) -> Result<(), EvalError> {
    let count = md_strategy_count(game);
    if count > cap {
        Err(EvalError::CapExceeded { count, cap })
    } else {
        Ok(())
    }
}

/// `sup inf` and `inf sup` over all MD pairs of `E[Acc]` from `v`, or of
/// the probability of visiting `targets` when given.
pub fn exhaustive_md_values<S: Scalar>(
    game: &Game<S>,
    v: usize,
    targets: Option<&TargetSet>,
    cap: f64,
) -> Result<MdExtremes<S>, EvalError> {
    check_cap(game, cap)?;
    let sigmas = md_strategies(game, Owner::Max);
    let pis = md_strategies(game, Owner::Min);
    exhaustive_md_values_over(game, v, targets, &sigmas, &pis)
}

/// [`exhaustive_md_values`] restricted to the given candidate lists.
/// Inner loops stop as soon as a row (column) cannot beat the best so far.
pub fn exhaustive_md_values_over<S: Scalar>(
    game: &Game<S>,
    v: usize,
    targets: Option<&TargetSet>,
    sigmas: &[MdStrategy],
    pis: &[MdStrategy],
) -> Result<MdExtremes<S>, EvalError> {
    assert!(!sigmas.is_empty() && !pis.is_empty(), "empty candidate list");
    let mut evaluated = 0;
    let mut value = |s: &MdStrategy, p: &MdStrategy| -> Result<ExtValue<S>, EvalError> {
        evaluated += 1;
        Ok(match targets {
            Some(t) => ExtValue::Finite(evaluate_reach(game, s, p, v, t)?),
            None => evaluate_md_pair(game, s, p, v)?.value,
        })
    };

    let mut best: Option<(ExtValue<S>, usize, usize)> = None;
    for (i, s) in sigmas.iter().enumerate() {
        let mut inner: Option<(ExtValue<S>, usize)> = None;
        let mut pruned = false;
        for (j, p) in pis.iter().enumerate() {
            let x = value(s, p)?;
            if inner.is_none_or(|(m, _)| x < m) {
                inner = Some((x, j));
            }
            if best.is_some_and(|(b, _, _)| inner.unwrap().0 <= b) {
                pruned = true;
                break;
            }
        }
        let (x, j) = inner.unwrap();
        if !pruned && best.is_none_or(|(b, _, _)| x > b) {
            best = Some((x, i, j));
        }
    }
    let (sup_inf, si, sj) = best.unwrap();

    let mut best: Option<(ExtValue<S>, usize, usize)> = None;
    for (j, p) in pis.iter().enumerate() {
        let mut inner: Option<(ExtValue<S>, usize)> = None;
        let mut pruned = false;
        for (i, s) in sigmas.iter().enumerate() {
            let x = value(s, p)?;
            if inner.is_none_or(|(m, _)| x > m) {
                inner = Some((x, i));
            }
            if best.is_some_and(|(b, _, _)| inner.unwrap().0 >= b) {
                pruned = true;
                break;
            }
        }
        let (x, i) = inner.unwrap();
        if !pruned && best.is_none_or(|(b, _, _)| x < b) {
            best = Some((x, i, j));
        }
    }
    let (inf_sup, ii, ij) = best.unwrap();

    Ok(MdExtremes {
        sup_inf,
        inf_sup,
        sup_inf_witness: (sigmas[si].clone(), pis[sj].clone()),
        inf_sup_witness: (sigmas[ii].clone(), pis[ij].clone()),
        evaluated,
    })
}

/// [`exhaustive_md_values`] at every vertex, evaluating each pair once per
/// pass for all vertices together.
pub fn exhaustive_md_values_all<S: Scalar>(
    game: &Game<S>,
    targets: Option<&TargetSet>,
    cap: f64,
) -> Result<Vec<MdExtremes<S>>, EvalError> {
    check_cap(game, cap)?;
    let n = game.len();
    let sigmas = md_strategies(game, Owner::Max);
    let pis = md_strategies(game, Owner::Min);
    let mut evaluated = 0;
    let mut values = |s: &MdStrategy, p: &MdStrategy| -> Result<Vec<ExtValue<S>>, EvalError> {
        evaluated += 1;
        Ok(match targets {
            Some(t) => evaluate_reach_all(game, s, p, t)?.into_iter().map(ExtValue::Finite).collect(),
            None => evaluate_pair_all(game, s, p)?.into_iter().map(|r| r.value).collect(),
        })
    };

    // sup over rows of the row minimum, per vertex
    let mut sup_inf: Vec<Option<(ExtValue<S>, usize, usize)>> = vec![None; n];
    for (i, s) in sigmas.iter().enumerate() {
        let mut row: Vec<Option<(ExtValue<S>, usize)>> = vec![None; n];
        for (j, p) in pis.iter().enumerate() {
            for (v, x) in values(s, p)?.into_iter().enumerate() {
                if row[v].is_none_or(|(m, _)| x < m) {
                    row[v] = Some((x, j));
                }
            }
        }
        for v in 0..n {
            let (x, j) = row[v].unwrap();
            if sup_inf[v].is_none_or(|(b, _, _)| x > b) {
                sup_inf[v] = Some((x, i, j));
            }
        }
    }
    let mut inf_sup: Vec<Option<(ExtValue<S>, usize, usize)>> = vec![None; n];
    for (j, p) in pis.iter().enumerate() {
        let mut col: Vec<Option<(ExtValue<S>, usize)>> = vec![None; n];
        for (i, s) in sigmas.iter().enumerate() {
            for (v, x) in values(s, p)?.into_iter().enumerate() {
                if col[v].is_none_or(|(m, _)| x > m) {
                    col[v] = Some((x, i));
                }
            }
        }
        for v in 0..n {
            let (x, i) = col[v].unwrap();
            if inf_sup[v].is_none_or(|(b, _, _)| x < b) {
                inf_sup[v] = Some((x, i, j));
            }
        }
    }
    Ok((0..n)
        .map(|v| {
            let (a, si, sj) = sup_inf[v].unwrap();
            let (b, ii, ij) = inf_sup[v].unwrap();
            MdExtremes {
                sup_inf: a,
                inf_sup: b,
                sup_inf_witness: (sigmas[si].clone(), pis[sj].clone()),
                inf_sup_witness: (sigmas[ii].clone(), pis[ij].clone()),
                evaluated,
            }
        })
        .collect())
}
