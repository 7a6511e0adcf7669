use std::collections::BTreeMap;

use super::{HdRule, HdStrategy, MdStrategy, MrStrategy, StrategyError};
use crate::bellman::{
    choose_lambda_with, discounted_iterate, first_argmin, horizon_for_eps, kleene_iterates,
    sufficient_horizon, value_iterate, DiscountedOptions, LambdaSearch, ValueVector,
};
use crate::model::{normalize_rewards, Game, Owner};
use crate::numerics::ExtValue;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions<S> {
    pub search: LambdaSearch<S>,
    pub discounted: DiscountedOptions,
    /// How far `r(u) + min K(u')` may exceed `K(u)` before the values are
    /// rejected as not being a fixed point.
    pub consistency_tol: S,
}

impl<S: Scalar> Default for SynthOptions<S> {
    fn default() -> Self {
        Self {
            search: LambdaSearch::default(),
            discounted: DiscountedOptions::default(),
            consistency_tol: S::lit(1e-6),
        }
    }
}

fn check_eps<S: Scalar>(eps: S) -> Result<(), StrategyError> {
    if eps > S::zero() && eps.is_finite() {
        Ok(())
    } else {
        Err(StrategyError::BadEpsilon(eps.as_f64()))
    }
}

fn check_domain<S: Scalar>(game: &Game<S>, values: &ValueVector<S>) -> Result<(), StrategyError> {
    if values.len() == game.len() {
        Ok(())
    } else {
        Err(StrategyError::DomainMismatch {
            expected: game.len(),
            got: values.len(),
        })
    }
}

/// At each Min vertex, the first successor minimizing `values`. Optimal for
/// Min when `values` is the least fixed point.
pub fn min_md_optimal<S: Scalar>(game: &Game<S>, values: &ValueVector<S>) -> Result<MdStrategy, StrategyError> {
    check_domain(game, values)?;
    let choices = game
        .owned_by(Owner::Min)
        .map(|v| (v, first_argmin(game, v, values.as_slice())))
        .collect();
    Ok(MdStrategy::from_choices(Owner::Min, choices))
}

/// The slack-schedule HD strategy for Min: against any Max strategy the
/// expected total reward from `u` is at most `values(u) ⊕ eps`.
pub fn min_eps_hd<S: Scalar>(
    game: &Game<S>,
    values: &ValueVector<S>,
    eps: S,
    opts: &SynthOptions<S>,
) -> Result<HdStrategy<S>, StrategyError> {
    check_domain(game, values)?;
    check_eps(eps)?;
    for u in game.owned_by(Owner::Min) {
        let best = values[first_argmin(game, u, values.as_slice())];
        let lhs = best + game.reward(u);
        if let (ExtValue::Finite(l), ExtValue::Finite(k)) = (lhs, values[u]) {
            let gap = l - k;
            if gap > opts.consistency_tol * k.max(S::one()) {
                return Err(StrategyError::Inconsistent {
                    vertex: game.id(u).to_string(),
                    gap: gap.as_f64(),
                });
            }
        } else if lhs.is_infinite() && values[u].is_finite() {
            return Err(StrategyError::Inconsistent {
                vertex: game.id(u).to_string(),
                gap: f64::INFINITY,
            });
        }
    }
    HdStrategy::new(
        Owner::Min,
        HdRule::Slack {
            values: values.as_slice().to_vec(),
            eps,
        },
    )
}

/// Result of [`max_md_eps`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxMdReport<S> {
    pub strategy: MdStrategy,
    pub lambda: S,
    /// Horizon with `λ^ℓ/(1−λ)·max r < eps/8`.
    pub ell: u64,
    /// Undiscounted horizon found while choosing `λ`.
    pub n: usize,
    /// Certified distance of the discounted iterate to its fixed point.
    pub discounted_error: S,
    pub certified: bool,
}

/// Memoryless deterministic Max strategy that is `eps`-optimal at every
/// vertex: greedy with respect to discounted values for a discount close
/// enough to 1.
///
/// Rewards are normalized to at most 1 internally and the strategy is
/// pulled back to `game`. The discount works for every vertex at once.
pub fn max_md_eps<S: Scalar>(game: &Game<S>, eps: S, opts: &SynthOptions<S>) -> Result<MaxMdReport<S>, StrategyError> {
    check_eps(eps)?;
    let (g, split) = normalize_rewards(game);
    let report = value_iterate(&g, &opts.search.solve)?;
    let all: Vec<usize> = (0..g.len()).collect();
    let choice = choose_lambda_with(&g, &report, &all, eps, &opts.search)?;
    let ell = horizon_for_eps(choice.lambda, g.max_reward(), eps);
    let per_step = eps / S::lit(ell.max(1) as f64);
    // iterate error eps/(16ℓ) on both sides plus eps/(8ℓ) selection slack
    // stays inside the eps/(4ℓ) per-step budget
    let d = discounted_iterate(&g, choice.lambda, per_step / S::lit(16.0), &opts.discounted)?;
    let pick = per_step / S::lit(8.0);
    let mut choices = BTreeMap::new();
    for v in g.owned_by(Owner::Max) {
        let best = g.succ(v).iter().map(|&u| d.values[u].to_scalar()).fold(S::zero(), S::max);
        let u = g
            .succ(v)
            .iter()
            .copied()
            .find(|&u| d.values[u].to_scalar() >= best - pick)
            .expect("the maximizer qualifies");
        choices.insert(v, u);
    }
    let strategy = split.pull_md(&MdStrategy::from_choices(Owner::Max, choices));
    Ok(MaxMdReport {
        strategy,
        lambda: choice.lambda,
        ell,
        n: choice.n,
        discounted_error: d.error_bound,
        certified: d.certified,
    })
}

/// Horizon-countdown HD strategy for Max, `eps`-optimal at every vertex.
///
/// The budget is `eps/4` for the horizon gap, `Σ eps/2^{m+1} ≤ eps/2` for
/// the per-step slack and `eps/8` for the memoryless tail played after the
/// horizon, which leaves a margin below `eps`.
pub fn max_eps_hd<S: Scalar>(game: &Game<S>, eps: S, opts: &SynthOptions<S>) -> Result<HdStrategy<S>, StrategyError> {
    check_eps(eps)?;
    let report = value_iterate(game, &opts.search.solve)?;
    let all: Vec<usize> = (0..game.len()).collect();
    let n = sufficient_horizon(game, &report, &all, eps, opts.search.max_horizon)?;
    let tables = kleene_iterates(game)
        .take(n + 1)
        .map(ValueVector::into_vec)
        .collect();
    let tail = max_md_eps(game, eps / S::lit(8.0), opts)?.strategy;
    HdStrategy::new(Owner::Max, HdRule::Countdown { tables, eps, tail })
}

/// Randomizes at `v` in proportion to `weights` (one per successor); every
/// other vertex of the same owner gets its first successor.
pub fn mr_from_weights<S: Scalar>(game: &Game<S>, v: usize, weights: &[S]) -> Result<MrStrategy<S>, StrategyError> {
    let player = game.owner(v);
    let succ = game.succ(v);
    if weights.len() != succ.len() {
        return Err(StrategyError::WeightCount {
            vertex: game.id(v).to_string(),
            succ: succ.len(),
            weights: weights.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|&&w| !(w > S::zero() && w.is_finite())) {
        return Err(StrategyError::BadWeight {
            vertex: game.id(v).to_string(),
            weight: w.as_f64(),
        });
    }
    let total: S = weights.iter().copied().sum();
    let dists = game
        .owned_by(player)
        .map(|x| {
            if x == v {
                (x, succ.iter().zip(weights).map(|(&u, &w)| (u, w / total)).collect())
            } else {
                (x, vec![(game.succ(x)[0], S::one())])
            }
        })
        .collect();
    MrStrategy::new(game, player, dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{nstep_values, SolveOptions};
    use crate::model::GameBuilder;

    fn fin(x: f64) -> ExtValue<f64> {
        ExtValue::Finite(x)
    }

    #[test]
    fn min_md_first_minimizer() {
        let g = GameBuilder::<f64>::new()
            .min("u", 0.0, &["a", "b", "c"])
            .chance("a", 4.0, &[("z", 1.0)])
            .chance("b", 2.0, &[("z", 1.0)])
            .chance("c", 2.0, &[("z", 1.0)])
            .chance("z", 0.0, &[("z", 1.0)])
            .build()
            .unwrap();
        let r = value_iterate(&g, &SolveOptions::default()).unwrap();
        let s = min_md_optimal(&g, &r.values).unwrap();
        assert_eq!(s.choice(0), Some(2));
        assert_eq!(s, min_md_optimal(&g, &r.values.scaled(7.5)).unwrap());
        assert!(matches!(
            min_md_optimal(&g, &ValueVector::zeros(2)),
            Err(StrategyError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn min_md_without_min_vertices_is_empty() {
        let g = GameBuilder::<f64>::new().max("a", 1.0, &["a"]).build().unwrap();
        let s = min_md_optimal(&g, &ValueVector::zeros(1)).unwrap();
        assert!(s.choices().is_empty());
    }

    #[test]
    fn slack_rule_example() {
        // eps = 1 at history length 0: bound 2 + 0.5, so 2.4 qualifies
        let g = GameBuilder::<f64>::new()
            .min("u", 0.0, &["a", "b"])
            .chance("a", 0.0, &[("a", 1.0)])
            .chance("b", 0.0, &[("b", 1.0)])
            .build()
            .unwrap();
        let s = HdStrategy::new(
            Owner::Min,
            HdRule::Slack {
                values: vec![fin(2.0), fin(2.4), fin(2.6)],
                eps: 1.0,
            },
        )
        .unwrap();
        assert_eq!(s.decide(&g, &[0]).unwrap(), 1);
        assert_eq!(s.decide(&g, &[0]).unwrap(), 1);
        let opts = SynthOptions::default();
        let vals = ValueVector::from_vec(vec![fin(2.0), fin(2.4), fin(2.6)]);
        assert!(matches!(
            min_eps_hd(&g, &vals, 1.0, &opts),
            Err(StrategyError::Inconsistent { .. })
        ));
    }

    #[test]
    fn slack_rule_matches_argmin_at_fixed_point() {
        let g = GameBuilder::<f64>::new()
            .min("u", 0.5, &["a", "b", "u"])
            .chance("a", 3.0, &[("z", 1.0)])
            .chance("b", 1.0, &[("u", 0.5), ("z", 0.5)])
            .chance("z", 0.0, &[("z", 1.0)])
            .build()
            .unwrap();
        let r = value_iterate(&g, &SolveOptions { tol: 1e-14, ..SolveOptions::default() }).unwrap();
        let md = min_md_optimal(&g, &r.values).unwrap();
        let hd = min_eps_hd(&g, &r.values, 0.1, &SynthOptions::default()).unwrap();
        for len in 1..40 {
            let hist = vec![0; len];
            assert_eq!(hd.decide(&g, &hist).unwrap(), md.choice(0).unwrap());
        }
    }

    #[test]
    fn max_md_picks_larger_chain() {
        let g = GameBuilder::<f64>::new()
            .max("v", 0.0, &["a1", "b1"])
            .chance("a1", 1.0, &[("z", 1.0)])
            .chance("b1", 1.0, &[("b2", 1.0)])
            .chance("b2", 1.0, &[("z", 1.0)])
            .chance("z", 0.0, &[("z", 1.0)])
            .build()
            .unwrap();
        let rep = max_md_eps(&g, 0.1, &SynthOptions::default()).unwrap();
        assert_eq!(rep.strategy.choice(0), Some(2));
        assert!(rep.lambda > 0.0 && rep.lambda < 1.0);
    }

    #[test]
    fn max_md_unique_maximizer_and_split_rewards() {
        let g = GameBuilder::<f64>::new()
            .max("v", 2.5, &["a", "b"])
            .chance("a", 3.0, &[("z", 1.0)])
            .chance("b", 1.0, &[("z", 1.0)])
            .chance("z", 0.0, &[("z", 1.0)])
            .build()
            .unwrap();
        for eps in [1.0, 0.1, 0.01] {
            let rep = max_md_eps(&g, eps, &SynthOptions::default()).unwrap();
            assert_eq!(rep.strategy.choices().len(), 1);
            assert_eq!(rep.strategy.choice(0), Some(1));
            assert!(rep.strategy.check(&g).is_ok());
        }
    }

    #[test]
    fn countdown_depth_two_tree() {
        let g = GameBuilder::<f64>::new()
            .max("root", 0.0, &["l", "r"])
            .chance("l", 0.0, &[("z", 1.0)])
            .chance("r", 5.0, &[("z", 1.0)])
            .chance("z", 0.0, &[("z", 1.0)])
            .build()
            .unwrap();
        let s = max_eps_hd(&g, 1.0, &SynthOptions::default()).unwrap();
        assert_eq!(s.decide(&g, &[0]).unwrap(), 2);
        // T_1(root) = 5 by backward induction
        assert_eq!(nstep_values(&g, 1)[0], fin(5.0));
        assert!(s.horizon().unwrap() >= 1);
    }

    #[test]
    fn countdown_on_single_path() {
        let g = GameBuilder::<f64>::new()
            .max("a", 1.0, &["b"])
            .max("b", 0.0, &["b"])
            .build()
            .unwrap();
        let s = max_eps_hd(&g, 0.3, &SynthOptions::default()).unwrap();
        for len in 1..10 {
            assert_eq!(s.decide(&g, &vec![1; len]).unwrap(), 1);
        }
        assert_eq!(s.decide(&g, &[0]).unwrap(), 1);
    }

    #[test]
    fn weights_normalize() {
        let g = GameBuilder::<f64>::new()
            .max("v", 0.0, &["a", "b"])
            .max("w", 0.0, &["a", "b"])
            .chance("a", 0.0, &[("a", 1.0)])
            .chance("b", 0.0, &[("b", 1.0)])
            .build()
            .unwrap();
        let s = mr_from_weights(&g, 0, &[1.0, 1.0]).unwrap();
        assert_eq!(s.dists()[&0], vec![(2, 0.5), (3, 0.5)]);
        assert_eq!(s.dists()[&1], vec![(2, 1.0)]);
        assert!(matches!(mr_from_weights(&g, 0, &[1.0]), Err(StrategyError::WeightCount { .. })));
        assert!(matches!(mr_from_weights(&g, 0, &[1.0, 0.0]), Err(StrategyError::BadWeight { .. })));
        let h = GameBuilder::<f64>::new().max("v", 0.0, &["v"]).build().unwrap();
        assert_eq!(mr_from_weights(&h, 0, &[3.0]).unwrap().dists()[&0], vec![(0, 1.0)]);
    }
}
