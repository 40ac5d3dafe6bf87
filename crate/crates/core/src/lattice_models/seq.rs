use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Sequence that repeats with a fixed period in the *global* index: `at(n) = pattern[n mod p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Periodic<V> {
    pattern: Vec<V>,
}

impl<V: Copy> Periodic<V> {
    pub fn new(pattern: Vec<V>) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::Domain("periodic tail with empty pattern".into()));
        }
        Ok(Self { pattern })
    }

    pub fn constant(v: V) -> Self {
        Self { pattern: vec![v] }
    }

    pub fn period(&self) -> usize {
        self.pattern.len()
    }

    pub fn pattern(&self) -> &[V] {
        &self.pattern
    }

    #[inline]
    pub fn at(&self, n: i64) -> V {
        self.pattern[n.rem_euclid(self.pattern.len() as i64) as usize]
    }
}

pub type Generator<V> = Arc<dyn Fn(i64) -> V + Send + Sync>;

/// A total function `Z -> V`.
///
/// `Window` sequences are explicit on `[lo, lo + values.len())` and periodic outside, which
/// lets the continued fractions close exactly. `Generated` sequences are arbitrary pure
/// functions of the index (random or quasi-periodic presets).
#[derive(Clone)]
pub enum Sequence<V> {
    Window {
        lo: i64,
        values: Vec<V>,
        left: Periodic<V>,
        right: Periodic<V>,
    },
    Generated(Generator<V>),
}

impl<V: fmt::Debug> fmt::Debug for Sequence<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sequence::Window {
                lo,
                values,
                left,
                right,
            } => f
                .debug_struct("Window")
                .field("lo", lo)
                .field("values", values)
                .field("left", left)
                .field("right", right)
                .finish(),
            Sequence::Generated(_) => f.write_str("Generated(..)"),
        }
    }
}

impl<V: Copy> Sequence<V> {
    pub fn constant(v: V) -> Self {
        Self::periodic(Periodic::constant(v))
    }

    pub fn periodic(p: Periodic<V>) -> Self {
        Sequence::Window {
            lo: 0,
            values: Vec::new(),
            left: p.clone(),
            right: p,
        }
    }

    /// `background` everywhere except `values` placed from index `lo`.
    pub fn window(lo: i64, values: Vec<V>, background: V) -> Self {
        Sequence::Window {
            lo,
            values,
            left: Periodic::constant(background),
            right: Periodic::constant(background),
        }
    }

    pub fn generated(f: impl Fn(i64) -> V + Send + Sync + 'static) -> Self {
        Sequence::Generated(Arc::new(f))
    }

    #[inline]
    pub fn at(&self, n: i64) -> V {
        match self {
            Sequence::Window {
                lo,
                values,
                left,
                right,
            } => {
                if n < *lo {
                    left.at(n)
                } else if n < lo + values.len() as i64 {
                    values[(n - lo) as usize]
                } else {
                    right.at(n)
                }
            }
            Sequence::Generated(f) => f(n),
        }
    }

    /// `(s, tail)`: for every `n >= s` the value is `tail.at(n)`.
    pub fn right_tail(&self) -> Option<(i64, &Periodic<V>)> {
        match self {
            Sequence::Window {
                lo, values, right, ..
            } => Some((lo + values.len() as i64, right)),
            Sequence::Generated(_) => None,
        }
    }

    /// `(s, tail)`: for every `n < s` the value is `tail.at(n)`.
    pub fn left_tail(&self) -> Option<(i64, &Periodic<V>)> {
        match self {
            Sequence::Window { lo, left, .. } => Some((*lo, left)),
            Sequence::Generated(_) => None,
        }
    }

    /// Every distinct stored value, or `None` for generated sequences.
    pub fn stored_values(&self) -> Option<Vec<V>> {
        match self {
            Sequence::Window {
                values,
                left,
                right,
                ..
            } => Some(
                values
                    .iter()
                    .chain(left.pattern())
                    .chain(right.pattern())
                    .copied()
                    .collect(),
            ),
            Sequence::Generated(_) => None,
        }
    }
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}
