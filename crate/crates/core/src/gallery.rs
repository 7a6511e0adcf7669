//! Finite truncations of two infinitely-branching counterexample games, with
//! closed-form values.
//!
//! Fig. 1 is a grid with rows 0 (bottom) to 4 and columns `0..=N`:
//!
//! * row 0: `v` at column 0 steps right; Max vertices at columns `1..N`
//!   choose right or up, column `N` only goes up.
//! * row 1: chance vertices, uniform over up and left; column 0 is the
//!   absorbing `s`.
//! * row 2: deterministic left moves into Min's `u` at column 0.
//! * row 3: `u` enters at any column `0..=N`; chance vertices uniform over
//!   up and left; column 0 is the absorbing target `t`.
//! * row 4: deterministic left moves into `p`, which returns to `v`.
//!
//! If Max goes up at column `j` and Min enters column `k`, `s` is hit with
//! probability `p_s = 2^{-j}` per round and `t` with `p_t = 2^{-k}`.
//! Rewards are all zero; the objective is reaching `t`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Game, GameBuilder, ModelError, Owner, TargetSet};
use crate::scalar::Scalar;
use crate::strategy::{mr_from_weights, MdStrategy, MrStrategy, StrategyError};

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("truncation must be at least 1, got {0}")]
    Truncation(usize),
    #[error("reward 2^{0} is not finite in this scalar type")]
    Overflow(usize),
    #[error("column {col} outside 1..={n}")]
    Column { col: usize, n: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// A gallery game with its distinguished vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Named<S> {
    pub game: Game<S>,
    /// Name → vertex index.
    pub names: BTreeMap<String, usize>,
    /// Where play starts.
    pub start: usize,
    pub targets: TargetSet,
    pub n: usize,
}

impl<S: Scalar> Named<S> {
    pub fn vertex(&self, name: &str) -> usize {
        self.names[name]
    }

    /// Name → vertex id, for manifests.
    pub fn manifest(&self) -> BTreeMap<String, String> {
        self.names
            .iter()
            .map(|(k, &v)| (k.clone(), self.game.id(v).to_string()))
            .collect()
    }
}

fn cell(row: usize, col: usize) -> String {
    match (row, col) {
        (0, 0) => "v".into(),
        (1, 0) => "s".into(),
        (2, 0) => "u".into(),
        (3, 0) => "t".into(),
        (4, 0) => "p".into(),
        _ => format!("r{row}c{col}"),
    }
}

fn check_n(n: usize) -> Result<(), GalleryError> {
    if n == 0 {
        Err(GalleryError::Truncation(n))
    } else {
        Ok(())
    }
}

/// Rows 0..=2 of the grid (Max's half) plus `s`.
fn lower_half<S: Scalar>(mut b: GameBuilder<S>, n: usize) -> GameBuilder<S> {
    let right = cell(0, 1);
    b = b.max("v", 0.0, &[&right]);
    for c in 1..=n {
        let up = cell(1, c);
        b = if c < n {
            let r = cell(0, c + 1);
            b.max(&cell(0, c), 0.0, &[&r, &up])
        } else {
            b.max(&cell(0, c), 0.0, &[&up])
        };
    }
    b = b.chance("s", 0.0, &[("s", 1.0)]);
    for c in 1..=n {
        let (up, left) = (cell(2, c), cell(1, c - 1));
        b = b.chance(&cell(1, c), 0.0, &[(&up, 0.5), (&left, 0.5)]);
    }
    for c in 1..=n {
        let left = cell(2, c - 1);
        b = b.chance(&cell(2, c), 0.0, &[(&left, 1.0)]);
    }
    b
}

/// Rows 3..=4 of the grid (Min's half), with `p` leading to `back`.
fn upper_half<S: Scalar>(mut b: GameBuilder<S>, n: usize, back: &str) -> GameBuilder<S> {
    b = b.chance("t", 0.0, &[("t", 1.0)]);
    for c in 1..=n {
        let (up, left) = (cell(4, c), cell(3, c - 1));
        b = b.chance(&cell(3, c), 0.0, &[(&up, 0.5), (&left, 0.5)]);
    }
    b = b.chance("p", 0.0, &[(back, 1.0)]);
    for c in 1..=n {
        let left = cell(4, c - 1);
        b = b.chance(&cell(4, c), 0.0, &[(&left, 1.0)]);
    }
    b
}

fn min_u<S: Scalar>(b: GameBuilder<S>, n: usize) -> GameBuilder<S> {
    let cols: Vec<String> = (0..=n).map(|c| cell(3, c)).collect();
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    b.min("u", 0.0, &refs)
}

fn named<S: Scalar>(game: Game<S>, names: &[&str], start: &str, target: &str, n: usize) -> Result<Named<S>, GalleryError> {
    let names = names.iter().map(|&k| Ok((k.to_string(), game.resolve(k)?))).collect::<Result<_, ModelError>>()?;
    let targets = TargetSet::from_ids(&game, [target])?;
    let start = game.resolve(start)?;
    Ok(Named { game, names, start, targets, n })
}

/// The Fig. 1 grid truncated at column `n`: `5(n+1)` vertices.
pub fn build_fig1<S: Scalar>(n: usize) -> Result<Named<S>, GalleryError> {
    check_n(n)?;
    let b = upper_half(min_u(lower_half(GameBuilder::new(), n), n), n, "v");
    named(b.build()?, &["v", "s", "u", "t", "p"], "v", "t", n)
}

/// Max goes up at column `j ≥ 1`; Min enters column `k ≥ 0`.
pub fn fig1_column_strategies<S: Scalar>(g: &Named<S>, j: usize, k: usize) -> Result<(MdStrategy, MdStrategy), GalleryError> {
    if j == 0 || j > g.n {
        return Err(GalleryError::Column { col: j, n: g.n });
    }
    if k > g.n {
        return Err(GalleryError::Column { col: k, n: g.n });
    }
    let sigma = fig1_max_column(g, j)?;
    let pi = MdStrategy::from_ids(&g.game, Owner::Min, &[("u", &cell(3, k))])?;
    Ok((sigma, pi))
}

fn fig1_max_column<S: Scalar>(g: &Named<S>, j: usize) -> Result<MdStrategy, GalleryError> {
    let game = &g.game;
    let mut sigma = MdStrategy::first(game, Owner::Max);
    for c in 1..=g.n {
        let v = game.resolve(&cell(0, c))?;
        let dest = if c < j { cell(0, c + 1) } else { cell(1, c) };
        sigma.set(v, game.resolve(&dest)?);
    }
    Ok(sigma)
}

fn half_pow(k: usize) -> f64 {
    0.5f64.powi(k.min(i32::MAX as usize) as i32)
}

/// Probability of reaching `t` from `v` when Max always goes up at column
/// `j` and Min always enters column `k`:
/// `(1 − p_s)·p_t / (p_s + p_t − p_s·p_t)` with `p_s = 2^{-j}`, `p_t = 2^{-k}`.
pub fn fig1_md_value(j: usize, k: usize) -> f64 {
    let ps = half_pow(j);
    let pt = half_pow(k);
    (1.0 - ps) * pt / (ps + pt - ps * pt)
}

/// Max's half only: `u` becomes an absorbing target, so going up at column
/// `j` wins with probability `1 − 2^{-j}`.
pub fn build_fig1_no_max_optimal<S: Scalar>(n: usize) -> Result<Named<S>, GalleryError> {
    check_n(n)?;
    let b = lower_half(GameBuilder::new(), n).chance("u", 0.0, &[("u", 1.0)]);
    named(b.build()?, &["v", "s", "u"], "v", "u", n)
}

/// Max's column strategies in [`build_fig1_no_max_optimal`].
pub fn fig1_no_max_column<S: Scalar>(g: &Named<S>, j: usize) -> Result<MdStrategy, GalleryError> {
    if j == 0 || j > g.n {
        return Err(GalleryError::Column { col: j, n: g.n });
    }
    fig1_max_column(g, j)
}

/// Min's half only, with `p` redirected to `u`; play starts at `u`.
///
/// Without the losing vertex `s`, every run eventually enters `t`: each
/// round reaches `t` with probability at least `2^{-N}`, so every truncation
/// has value 1 at `u`. Min's advantage in the untruncated game comes from
/// entering ever larger columns, which a finite truncation cannot offer; at
/// any fixed horizon the optimal `n`-step value falls toward 0 as `N` grows.
pub fn build_fig1_no_min_optimal<S: Scalar>(n: usize) -> Result<Named<S>, GalleryError> {
    check_n(n)?;
    let b = upper_half(min_u(GameBuilder::new(), n), n, "u");
    named(b.build()?, &["u", "t", "p"], "u", "t", n)
}

/// Fig. 2: Max at `v` picks `q_n` (reward `2^n`, `n = 1..=N`), then the
/// absorbing `t`.
pub fn build_fig2<S: Scalar>(n: usize) -> Result<Named<S>, GalleryError> {
    check_n(n)?;
    if !S::lit(2f64.powi(n.min(i32::MAX as usize) as i32)).is_finite() {
        return Err(GalleryError::Overflow(n));
    }
    let qs: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let refs: Vec<&str> = qs.iter().map(String::as_str).collect();
    let mut b = GameBuilder::<S>::new().max("v", 0.0, &refs);
    for (i, q) in qs.iter().enumerate() {
        b = b.chance(q, 2f64.powi(i as i32 + 1), &[("t", 1.0)]);
    }
    b = b.chance("t", 0.0, &[("t", 1.0)]);
    let game = b.build()?;
    let mut names: Vec<&str> = vec!["v", "t"];
    names.extend(refs.iter().copied());
    named(game, &names, "v", "t", n)
}

/// The randomized strategy choosing `q_n` with probability proportional to
/// `2^{-n}`.
pub fn fig2_sigma_star<S: Scalar>(g: &Named<S>) -> Result<MrStrategy<S>, GalleryError> {
    let weights: Vec<S> = (1..=g.n).map(|i| S::lit(half_pow(i))).collect();
    Ok(mr_from_weights(&g.game, g.start, &weights)?)
}

/// `E[Acc]` of [`fig2_sigma_star`]: `N / (1 − 2^{-N})`.
pub fn fig2_sigma_star_value(n: usize) -> f64 {
    n as f64 / (1.0 - half_pow(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{nstep_values, value_iterate, SolveOptions};
    use crate::model::reach_to_acc;
    use crate::eval::{evaluate_reach, exhaustive_md_values};

    #[test]
    fn fig1_shape() {
        let g = build_fig1::<f64>(1).unwrap();
        assert_eq!(g.game.len(), 10);
        assert_eq!(g.game.succ(g.vertex("v")), &[g.game.resolve("r0c1").unwrap()]);
        assert_eq!(g.game.succ(g.game.resolve("r0c1").unwrap()).len(), 1);
        assert_eq!(g.game.succ(g.vertex("u")).len(), 2);
        for n in 1..=20 {
            let g = build_fig1::<f64>(n).unwrap();
            assert_eq!(g.game.len(), 5 * (n + 1));
            assert!(g.game.validate().is_empty());
            assert!(build_fig1_no_max_optimal::<f64>(n).unwrap().game.validate().is_empty());
            assert!(build_fig1_no_min_optimal::<f64>(n).unwrap().game.validate().is_empty());
            assert!(build_fig2::<f64>(n).unwrap().game.validate().is_empty());
        }
        assert!(matches!(build_fig1::<f64>(0), Err(GalleryError::Truncation(0))));
    }

    /// Independent first-step analysis: reach `t` from `v` solves
    /// `x = (1 − p_s)(p_t + (1 − p_t) x)`.
    fn first_step(ps: f64, pt: f64) -> f64 {
        let a = (1.0 - ps) * pt;
        let b = (1.0 - ps) * (1.0 - pt);
        a / (1.0 - b)
    }

    #[test]
    fn closed_form_examples() {
        assert!((fig1_md_value(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        for j in 0..10 {
            assert!((fig1_md_value(j, 0) - (1.0 - 0.5f64.powi(j as i32))).abs() < 1e-15);
        }
        for k in 0..10 {
            assert_eq!(fig1_md_value(0, k), 0.0);
        }
        for j in 1..6 {
            for k in 1..6 {
                let (ps, pt) = (0.5f64.powi(j), 0.5f64.powi(k));
                assert!((fig1_md_value(j as usize, k as usize) - first_step(ps, pt)).abs() < 1e-12);
                // the loop sum is bounded by (1 − p_s)·p_t / p_s
                assert!(fig1_md_value(j as usize, k as usize) <= (1.0 - ps) * pt / ps + 1e-12);
            }
        }
    }

    #[test]
    fn column_strategies_match_closed_form() {
        let g = build_fig1::<f64>(6).unwrap();
        for j in 1..=6 {
            for k in 0..=6 {
                let (s, p) = fig1_column_strategies(&g, j, k).unwrap();
                let x = evaluate_reach(&g.game, &s, &p, g.start, &g.targets).unwrap();
                assert!((x - fig1_md_value(j, k)).abs() < 1e-12, "j={j} k={k}");
            }
        }
    }

    #[test]
    fn truncation_has_a_saddle_at_the_last_column() {
        let n = 8;
        let inner = |j: usize| (0..=n).map(|k| fig1_md_value(j, k)).fold(f64::INFINITY, f64::min);
        let outer = |k: usize| (1..=n).map(|j| fig1_md_value(j, k)).fold(0.0, f64::max);
        let sup_inf = (1..=n).map(inner).fold(0.0, f64::max);
        let inf_sup = (0..=n).map(outer).fold(f64::INFINITY, f64::min);
        let a = 0.5f64.powi(n as i32);
        assert!((sup_inf - inf_sup).abs() < 1e-15);
        assert!((sup_inf - (1.0 - a) / (2.0 - a)).abs() < 1e-15);
    }

    #[test]
    fn no_max_variant() {
        let g = build_fig1_no_max_optimal::<f64>(10).unwrap();
        assert_eq!(g.game.len(), 33);
        let none = MdStrategy::empty(Owner::Min);
        for j in 1..=10 {
            let s = fig1_no_max_column(&g, j).unwrap();
            let x = evaluate_reach(&g.game, &s, &none, g.start, &g.targets).unwrap();
            assert!((x - fig1_md_value(j, 0)).abs() < 1e-12);
            assert!(x < 1.0);
        }
    }

    #[test]
    fn no_min_variant_always_reaches() {
        let g = build_fig1_no_min_optimal::<f64>(5).unwrap();
        assert_eq!(g.game.len(), 13);
        assert_eq!(g.game.succ(g.vertex("u")).len(), 6);
        let none = MdStrategy::empty(Owner::Max);
        for k in 0..=5 {
            let p = MdStrategy::from_ids(&g.game, Owner::Min, &[("u", &cell(3, k))]).unwrap();
            let x = evaluate_reach(&g.game, &none, &p, g.start, &g.targets).unwrap();
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_min_variant_value_is_one_but_short_horizons_fade() {
        for n in 1..=20 {
            let g = build_fig1_no_min_optimal::<f64>(n).unwrap();
            assert!(g.game.validate().is_empty());
            // Kleene lower bounds creep up at rate 2^-N here; enumerate instead
            let e = exhaustive_md_values(&g.game, g.start, Some(&g.targets), 1e6).unwrap();
            assert!((e.inf_sup.to_f64() - 1.0).abs() < 1e-9, "N = {n}");
            assert!((e.sup_inf.to_f64() - 1.0).abs() < 1e-9, "N = {n}");
        }
        // Min's best reply at a fixed horizon: the chance of reaching t
        // within 40 steps shrinks as columns get farther away
        let short: Vec<f64> = [2, 4, 8, 16]
            .into_iter()
            .map(|n| {
                let g = build_fig1_no_min_optimal::<f64>(n).unwrap();
                let acc = reach_to_acc(&g.game, &g.targets).unwrap();
                nstep_values(&acc, 40)[g.start].to_f64()
            })
            .collect();
        assert!(short.windows(2).all(|w| w[1] < w[0]), "{short:?}");
        assert!(short[3] < 1e-3, "{short:?}");
    }

    #[test]
    fn fig2_values() {
        let g = build_fig2::<f64>(4).unwrap();
        let r = value_iterate(&g.game, &SolveOptions::default()).unwrap();
        assert_eq!(r.values[g.start].to_f64(), 16.0);
        assert!(matches!(build_fig2::<f32>(200), Err(GalleryError::Overflow(200))));
        assert!(build_fig2::<f32>(100).is_ok());
        let mr = fig2_sigma_star(&g).unwrap();
        let none = MdStrategy::empty(Owner::Min);
        let x = crate::eval::evaluate_md_pair(&g.game, &mr, &none, g.start).unwrap();
        assert!((x.value.to_f64() - fig2_sigma_star_value(4)).abs() < 1e-12);
    }
}
