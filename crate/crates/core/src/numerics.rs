//! Non-negative extended reals `[0, ∞]` with lower/upper ε-approximations.
//!
//! All value quantities in the crate (game values, iterates of the Bellman
//! operator, expected accumulated rewards) live in this type. Negative values
//! are unrepresentable, and `∞` absorbs addition and multiplication by
//! positive reals.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("value {0} is not a non-negative real")]
    NotNonNegative(f64),
    #[error("lower approximation {value} ⊖ {eps} is negative")]
    NegativeApproximation { value: f64, eps: f64 },
    #[error("approximation radius {0} must be finite and non-negative")]
    BadEpsilon(f64),
}

/// Element of `ℝ≥0 ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtValue<S> {
    Finite(S),
    Infinite,
}

impl<S: Scalar> Default for ExtValue<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> ExtValue<S> {
    /// Wraps a real. `+∞` maps to [`ExtValue::Infinite`]; negatives and NaN
    /// are rejected.
    pub fn new(x: S) -> Result<Self, NumericsError> {
        if x.is_nan() || x < S::zero() {
            return Err(NumericsError::NotNonNegative(x.as_f64()));
        }
        if x.is_infinite() {
            return Ok(Self::Infinite);
        }
        Ok(Self::Finite(x))
    }

    pub fn zero() -> Self {
        Self::Finite(S::zero())
    }

    pub fn infinity() -> Self {
        Self::Infinite
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// The finite payload, if any.
    pub fn finite(self) -> Option<S> {
        match self {
            Self::Finite(x) => Some(x),
            Self::Infinite => None,
        }
    }

    /// Lossy view as a plain float (`∞` becomes `S::infinity()`).
    pub fn to_scalar(self) -> S {
        match self {
            Self::Finite(x) => x,
            Self::Infinite => S::infinity(),
        }
    }

    pub fn to_f64(self) -> f64 {
        self.to_scalar().as_f64()
    }

    /// Upper ε-approximation `c ⊕ ε = c + ε`.
    pub fn oplus(self, eps: S) -> Self {
        debug_assert!(eps >= S::zero() && eps.is_finite());
        match self {
            Self::Finite(x) => Self::Finite(x + eps),
            Self::Infinite => Self::Infinite,
        }
    }

    /// Lower ε-approximation: `c ⊖ ε = c − ε` for finite `c`, `∞ ⊖ ε = 1/ε`
    /// for `ε > 0`, and `∞ ⊖ 0 = ∞`.
    ///
    /// A finite `c` with `ε > c` has no non-negative approximation and is
    /// reported as an error; use [`ExtValue::ominus_clamped`] to saturate at 0.
    pub fn ominus(self, eps: S) -> Result<Self, NumericsError> {
        if eps.is_nan() || eps < S::zero() || eps.is_infinite() {
            return Err(NumericsError::BadEpsilon(eps.as_f64()));
        }
        match self {
            Self::Finite(x) if eps > x => Err(NumericsError::NegativeApproximation {
                value: x.as_f64(),
                eps: eps.as_f64(),
            }),
            Self::Finite(x) => Ok(Self::Finite(x - eps)),
            Self::Infinite if eps == S::zero() => Ok(Self::Infinite),
            Self::Infinite => Ok(Self::Finite(S::one() / eps)),
        }
    }

    /// `max(c ⊖ ε, 0)` for finite `c`; identical to [`ExtValue::ominus`] otherwise.
    pub fn ominus_clamped(self, eps: S) -> Self {
        match self {
            Self::Finite(x) => Self::Finite((x - eps).max(S::zero())),
            Self::Infinite if eps > S::zero() => Self::Finite(S::one() / eps),
            Self::Infinite => Self::Infinite,
        }
    }

    /// `self ≥ target ⊖ eps`, where a finite target below `eps` is met by
    /// every value.
    pub fn meets_lower(self, target: Self, eps: S) -> bool {
        match target.ominus(eps) {
            Ok(bound) => self >= bound,
            Err(_) => true,
        }
    }

    /// Multiplication by a non-negative weight. `0 · ∞ = 0`.
    pub fn scale(self, w: S) -> Self {
        debug_assert!(w >= S::zero());
        match self {
            _ if w == S::zero() => Self::zero(),
            Self::Finite(x) => Self::Finite(x * w),
            Self::Infinite => Self::Infinite,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Absolute difference of two finite values; `None` when either is `∞`.
    pub fn abs_diff(self, other: Self) -> Option<S> {
        Some((self.finite()? - other.finite()?).abs())
    }

    /// Total order (finite values compare by magnitude, `∞` is largest).
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            (Self::Finite(_), Self::Infinite) => Ordering::Less,
            (Self::Infinite, Self::Finite(_)) => Ordering::Greater,
            (Self::Infinite, Self::Infinite) => Ordering::Equal,
        }
    }

    pub fn cast<T: Scalar>(self) -> ExtValue<T> {
        match self {
            Self::Finite(x) => ExtValue::Finite(T::lit(x.as_f64())),
            Self::Infinite => ExtValue::Infinite,
        }
    }
}

impl<S: Scalar> PartialOrd for ExtValue<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl<S: Scalar> Add for ExtValue<S> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Self::Finite(a), Self::Finite(b)) => Self::Finite(a + b),
            _ => Self::Infinite,
        }
    }
}

impl<S: Scalar> Add<S> for ExtValue<S> {
    type Output = Self;

    fn add(self, rhs: S) -> Self {
        self.oplus(rhs)
    }
}

impl<S: Scalar> fmt::Display for ExtValue<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(x) => write!(f, "{x}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

/// Weighted sum `Σ wᵢ·vᵢ` with `∞` absorbing under positive weight.
pub fn ext_sum<S, I>(terms: I) -> ExtValue<S>
where
    S: Scalar,
    I: IntoIterator<Item = (ExtValue<S>, S)>,
{
    terms
        .into_iter()
        .fold(ExtValue::zero(), |acc, (v, w)| acc + v.scale(w))
}

// JSON form: finite values are numbers, ∞ is the string "inf".
impl<S: Scalar> Serialize for ExtValue<S> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        match self {
            Self::Finite(x) => serializer.serialize_f64(x.as_f64()),
            Self::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de, S: Scalar> Deserialize<'de> for ExtValue<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtVisitor<S>(std::marker::PhantomData<S>);

        impl<S: Scalar> Visitor<'_> for ExtVisitor<S> {
            type Value = ExtValue<S>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                ExtValue::new(S::lit(v)).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                match v {
                    "inf" | "Infinity" | "∞" => Ok(ExtValue::Infinite),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ExtVisitor(std::marker::PhantomData))
    }
}
