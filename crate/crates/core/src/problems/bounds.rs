use rand::Rng;
use serde::{Deserialize, Serialize};

/// Gap kept from an open lower bound when projecting or sampling.
pub const OPEN_BOUND_MARGIN: f64 = 1e-9;

/// A real interval `[lo, hi]`, or `(lo, hi]` when `open_lo` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub open_lo: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi, open_lo: false }
    }

    pub fn left_open(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty interval ({lo}, {hi}]");
        Self { lo, hi, open_lo: true }
    }

    /// Smallest value projection and sampling will produce.
    pub fn feasible_lo(&self) -> f64 {
        if self.open_lo {
            self.lo + OPEN_BOUND_MARGIN
        } else {
            self.lo
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.open_lo { v > self.lo } else { v >= self.lo };
        above && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        if v.is_nan() {
            return self.feasible_lo();
        }
        v.clamp(self.feasible_lo(), self.hi)
    }
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bounds(Vec<Interval>);

impl Bounds {
    pub fn new(intervals: Vec<Interval>) -> Self {
        assert!(!intervals.is_empty(), "a box needs at least one coordinate");
        Self(intervals)
    }

    pub fn uniform(interval: Interval, n: usize) -> Self {
        Self::new(vec![interval; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim() && self.0.iter().zip(v).all(|(iv, &x)| iv.contains(x))
    }

    /// Componentwise clamp onto the box.
    pub fn project(&self, v: &mut [f64]) {
        for (iv, x) in self.0.iter().zip(v.iter_mut()) {
            *x = iv.clamp(*x);
        }
    }

    pub fn projected(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project(&mut out);
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.0
            .iter()
            .map(|iv| iv.clamp(iv.lo + rng.random::<f64>() * iv.width()))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.0.iter().map(Interval::width).collect()
    }

    /// Maps a point of the box to `[0, 1]^n`.
    pub fn to_unit(&self, v: &[f64]) -> Vec<f64> {
        self.0
            .iter()
            .zip(v)
            .map(|(iv, &x)| (x - iv.lo) / iv.width())
            .collect()
    }

    /// Inverse of [`Bounds::to_unit`], followed by projection.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.0
            .iter()
            .zip(u)
            .map(|(iv, &t)| iv.clamp(iv.lo + t * iv.width()))
            .collect()
    }

    /// The unit cube of the same dimension.
    pub fn unit(n: usize) -> Self {
        Self::uniform(Interval::closed(0.0, 1.0), n)
    }
}
