//! Minimax problem definitions: the six benchmark landscapes (two of them
//! scalable), the digital filter design problem, and the MSE metric.
//!
//! Problems are immutable data. Budget metering is done by an external
//! [`BudgetCounter`] passed to [`MinimaxProblem::evaluate`], so the same
//! problem can be shared between algorithm runs and the regret oracle.

mod bounds;
mod budget;
pub mod filter;

use serde::{Deserialize, Serialize};

pub use bounds::{Bounds, Interval, OPEN_BOUND_MARGIN};
pub use budget::BudgetCounter;
pub use filter::{filter_amplitude, filter_error, FilterParams};

use crate::error::{Error, EvalError, Result};

/// Dimensions the scalable landscapes are benchmarked at.
pub const SCALABLE_DIMS: [usize; 7] = [2, 5, 10, 15, 20, 40, 50];

/// Ids of the default (unscaled) problem set.
pub const DEFAULT_IDS: [&str; 6] = ["L1", "L2", "L3", "L4", "L5", "L6"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// `sum (x_i - 5)^2 - (y_i - 5)^2`
    L1 { n: usize },
    /// `sum min{3 - 0.2 x_i + 0.3 y_i, 3 + 0.2 x_i - 0.1 y_i}`
    L2 { n: usize },
    /// `sin(x - y) / sqrt(x^2 + y^2)`
    L3,
    /// `cos(sqrt(x^2 + y^2)) / (sqrt(x^2 + y^2) + 10)`
    L4,
    /// `100 (x2 - x1^2)^2 + (1 - x1)^2 - y1 (x1 + x2^2) - y2 (x1^2 + x2)`
    L5,
    /// `(x1 - 2)^2 + (x2 - 1)^2 + y1 (x1^2 - x2) + y2 (x1 + x2 - 2)`
    L6,
    /// `|e(x, psi)|` of the filter design problem.
    Filter,
}

impl Objective {
    fn formula(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        let v = match *self {
            Objective::L1 { .. } => x
                .iter()
                .zip(y)
                .map(|(&xi, &yi)| (xi - 5.0).powi(2) - (yi - 5.0).powi(2))
                .sum(),
            Objective::L2 { .. } => x
                .iter()
                .zip(y)
                .map(|(&xi, &yi)| (3.0 - 0.2 * xi + 0.3 * yi).min(3.0 + 0.2 * xi - 0.1 * yi))
                .sum(),
            Objective::L3 => (x[0] - y[0]).sin() / x[0].hypot(y[0]),
            Objective::L4 => {
                let r = x[0].hypot(y[0]);
                r.cos() / (r + 10.0)
            }
            Objective::L5 => {
                let (x1, x2, y1, y2) = (x[0], x[1], y[0], y[1]);
                100.0 * (x2 - x1 * x1).powi(2) + (1.0 - x1).powi(2)
                    - y1 * (x1 + x2 * x2)
                    - y2 * (x1 * x1 + x2)
            }
            Objective::L6 => {
                let (x1, x2, y1, y2) = (x[0], x[1], y[0], y[1]);
                (x1 - 2.0).powi(2) + (x2 - 1.0).powi(2) + y1 * (x1 * x1 - x2) + y2 * (x1 + x2 - 2.0)
            }
            Objective::Filter => {
                let p = FilterParams::from_slice(x).map_err(|e| EvalError::OutOfDomain(e.to_string()))?;
                filter_error(&p, y[0])?.abs()
            }
        };
        if v.is_nan() {
            return Err(EvalError::Numeric(format!("{self:?} is undefined at x={x:?}, y={y:?}")));
        }
        Ok(v)
    }
}

/// Worst-case partner of a known optimal `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalY {
    Point(Vec<f64>),
    /// Several equally bad responses.
    OneOf(Vec<Vec<f64>>),
    /// Every `y` in the domain is a maximizer.
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub y: OptimalY,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxProblem {
    id: String,
    objective: Objective,
    x_bounds: Bounds,
    y_bounds: Bounds,
    known_optimum: Option<KnownOptimum>,
    /// Optimal minimax value used for regret; equals the optimum's value when one is known.
    reference_value: Option<f64>,
}

impl MinimaxProblem {
    fn with_optimum(id: String, objective: Objective, x_bounds: Bounds, y_bounds: Bounds, x: Vec<f64>, y: OptimalY) -> Self {
        let y_probe = match &y {
            OptimalY::Point(p) => p.clone(),
            OptimalY::OneOf(ps) => ps[0].clone(),
            OptimalY::Any => y_bounds.intervals().iter().map(|iv| iv.feasible_lo()).collect(),
        };
        let value = objective.formula(&x, &y_probe).expect("optimum must be evaluable");
        Self {
            id,
            objective,
            x_bounds,
            y_bounds,
            known_optimum: Some(KnownOptimum { x, y, value }),
            reference_value: Some(value),
        }
    }

    pub fn l1(n: usize) -> Self {
        assert!(n >= 1);
        let b = Bounds::uniform(Interval::closed(0.0, 10.0), n);
        Self::with_optimum(scaled_id("L1", n, 3), Objective::L1 { n }, b.clone(), b, vec![5.0; n], OptimalY::Point(vec![5.0; n]))
    }

    pub fn l2(n: usize) -> Self {
        assert!(n >= 1);
        let b = Bounds::uniform(Interval::closed(0.0, 10.0), n);
        Self::with_optimum(scaled_id("L2", n, 3), Objective::L2 { n }, b.clone(), b, vec![0.0; n], OptimalY::Point(vec![0.0; n]))
    }

    pub fn l3() -> Self {
        let b = Bounds::uniform(Interval::left_open(0.0, 10.0), 1);
        Self::with_optimum("L3".into(), Objective::L3, b.clone(), b, vec![10.0], OptimalY::Point(vec![2.125683]))
    }

    pub fn l4() -> Self {
        let b = Bounds::uniform(Interval::closed(0.0, 10.0), 1);
        Self::with_optimum(
            "L4".into(),
            Objective::L4,
            b.clone(),
            b,
            vec![7.044146],
            OptimalY::OneOf(vec![vec![0.0], vec![10.0]]),
        )
    }

    pub fn l5() -> Self {
        Self::with_optimum(
            "L5".into(),
            Objective::L5,
            Bounds::new(vec![Interval::closed(-0.5, 0.5), Interval::closed(0.0, 1.0)]),
            Bounds::uniform(Interval::closed(0.0, 10.0), 2),
            vec![0.5, 0.25],
            OptimalY::Point(vec![0.0, 0.0]),
        )
    }

    pub fn l6() -> Self {
        Self::with_optimum(
            "L6".into(),
            Objective::L6,
            Bounds::uniform(Interval::closed(-1.0, 3.0), 2),
            Bounds::uniform(Interval::closed(0.0, 10.0), 2),
            vec![1.0, 1.0],
            OptimalY::Any,
        )
    }

    /// Filter design: `x in [-1, 1]^9`, `psi in [0, 1]`, no known optimizer,
    /// reference value 0 (perfect approximation).
    pub fn filter() -> Self {
        Self {
            id: "filter".into(),
            objective: Objective::Filter,
            x_bounds: Bounds::uniform(Interval::closed(-1.0, 1.0), filter::FILTER_DIM),
            y_bounds: Bounds::uniform(Interval::closed(0.0, 1.0), 1),
            known_optimum: None,
            reference_value: Some(0.0),
        }
    }

    /// Resolves `"L1".."L6"`, `"filter"`, and scaled variants such as `"L1-n20"`.
    pub fn from_id(id: &str) -> Result<Self> {
        let unknown = || Error::UnknownProblem(id.to_string());
        match id {
            "L1" => return Ok(Self::l1(3)),
            "L2" => return Ok(Self::l2(3)),
            "L3" => return Ok(Self::l3()),
            "L4" => return Ok(Self::l4()),
            "L5" => return Ok(Self::l5()),
            "L6" => return Ok(Self::l6()),
            "filter" => return Ok(Self::filter()),
            _ => {}
        }
        let (family, n) = id.split_once("-n").ok_or_else(unknown)?;
        let n: usize = n.parse().map_err(|_| unknown())?;
        if n == 0 {
            return Err(unknown());
        }
        match family {
            "L1" => Ok(Self::l1(n)),
            "L2" => Ok(Self::l2(n)),
            _ => Err(unknown()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn n_x(&self) -> usize {
        self.x_bounds.dim()
    }

    pub fn n_y(&self) -> usize {
        self.y_bounds.dim()
    }

    pub fn x_bounds(&self) -> &Bounds {
        &self.x_bounds
    }

    pub fn y_bounds(&self) -> &Bounds {
        &self.y_bounds
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.known_optimum.as_ref()
    }

    /// `L(x*, y*)` when an optimum is listed.
    pub fn saddle_value(&self) -> Option<f64> {
        self.known_optimum.as_ref().map(|o| o.value)
    }

    /// The value regret is measured against: the saddle value, or the target
    /// value for problems without a known optimizer.
    pub fn reference_value(&self) -> Option<f64> {
        self.reference_value
    }

    fn check_domain(&self, x: &[f64], y: &[f64]) -> Result<(), EvalError> {
        if !self.x_bounds.contains(x) {
            return Err(EvalError::OutOfDomain(format!("{}: x={x:?}", self.id)));
        }
        if !self.y_bounds.contains(y) {
            return Err(EvalError::OutOfDomain(format!("{}: y={y:?}", self.id)));
        }
        Ok(())
    }

    /// Unmetered, domain-checked `L(x, y)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        self.check_domain(x, y)?;
        self.objective.formula(x, y)
    }

    /// `L(x, y)` extended past the box by the same closed form. Only dimensions
    /// are checked; used for finite differences and perturbation estimates at
    /// points near the boundary.
    pub fn value_unchecked(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.n_x() || y.len() != self.n_y() {
            return Err(EvalError::OutOfDomain(format!(
                "{}: expected dims ({}, {}), got ({}, {})",
                self.id,
                self.n_x(),
                self.n_y(),
                x.len(),
                y.len()
            )));
        }
        self.objective.formula(x, y)
    }

    /// Metered `L(x, y)`: one unit of `budget` per call that reaches the objective.
    pub fn evaluate(&self, x: &[f64], y: &[f64], budget: &mut BudgetCounter) -> Result<f64, EvalError> {
        if budget.is_exhausted() {
            return Err(EvalError::BudgetExhausted);
        }
        self.check_domain(x, y)?;
        budget.charge()?;
        self.objective.formula(x, y)
    }

    pub fn manifest_entry(&self) -> ManifestEntry {
        ManifestEntry {
            id: self.id.clone(),
            n_x: self.n_x(),
            n_y: self.n_y(),
            x_bounds: self.x_bounds.clone(),
            y_bounds: self.y_bounds.clone(),
            known_optimum: self.known_optimum.clone(),
            reference_value: self.reference_value,
        }
    }
}

fn scaled_id(family: &str, n: usize, default_n: usize) -> String {
    if n == default_n {
        family.to_string()
    } else {
        format!("{family}-n{n}")
    }
}

/// One record of the machine-readable problem manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub n_x: usize,
    pub n_y: usize,
    pub x_bounds: Bounds,
    pub y_bounds: Bounds,
    pub known_optimum: Option<KnownOptimum>,
    pub reference_value: Option<f64>,
}

/// Manifest of the default problems, the filter problem and every scaled variant.
pub fn manifest() -> Vec<ManifestEntry> {
    let mut out: Vec<ManifestEntry> = DEFAULT_IDS
        .iter()
        .map(|id| MinimaxProblem::from_id(id).expect("builtin id").manifest_entry())
        .collect();
    out.push(MinimaxProblem::filter().manifest_entry());
    for &n in &SCALABLE_DIMS {
        if n != 3 {
            out.push(MinimaxProblem::l1(n).manifest_entry());
            out.push(MinimaxProblem::l2(n).manifest_entry());
        }
    }
    out
}

pub fn manifest_json() -> Result<String> {
    Ok(serde_json::to_string_pretty(&manifest())?)
}

/// Mean squared Euclidean error `||x - x*||^2 / n`.
pub fn mse(x: &[f64], x_star: &[f64]) -> Result<f64> {
    if x.len() != x_star.len() {
        return Err(Error::Dimension {
            expected: x_star.len(),
            got: x.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let sq: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sq / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_listed() -> Vec<MinimaxProblem> {
        DEFAULT_IDS.iter().map(|id| MinimaxProblem::from_id(id).unwrap()).collect()
    }

    #[test]
    fn evaluate_examples() {
        let mut b = BudgetCounter::new(100);
        let l1 = MinimaxProblem::l1(3);
        assert_eq!(l1.evaluate(&[5.0; 3], &[5.0; 3], &mut b).unwrap(), 0.0);
        assert_eq!(l1.evaluate(&[0.0; 3], &[5.0; 3], &mut b).unwrap(), 75.0);
        assert_eq!(MinimaxProblem::l6().evaluate(&[1.0, 1.0], &[3.0, 7.0], &mut b).unwrap(), 1.0);
        assert_abs_diff_eq!(
            MinimaxProblem::l5().evaluate(&[0.5, 0.25], &[0.0, 0.0], &mut b).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert_eq!(b.used(), 4);
    }

    #[test]
    fn l3_inner_max_at_listed_point() {
        let p = MinimaxProblem::l3();
        let v = p.value(&[10.0], &[2.125683]).unwrap();
        assert_abs_diff_eq!(v, 0.09780, epsilon = 1e-5);
        // Dense grid over the open interval (0, 10].
        let steps = 1_000_000;
        let grid_max = (1..=steps)
            .map(|i| p.value(&[10.0], &[10.0 * i as f64 / steps as f64]).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(grid_max - v < 1e-9, "grid max {grid_max} vs listed {v}");
        assert!(v - grid_max < 1e-9);
    }

    #[test]
    fn evaluate_errors() {
        let l1 = MinimaxProblem::l1(3);
        let mut b = BudgetCounter::new(1);
        assert!(matches!(l1.evaluate(&[11.0, 0.0, 0.0], &[0.0; 3], &mut b), Err(EvalError::OutOfDomain(_))));
        assert!(matches!(l1.evaluate(&[1.0, 0.0], &[0.0; 3], &mut b), Err(EvalError::OutOfDomain(_))));
        assert_eq!(b.used(), 0);
        l1.evaluate(&[1.0; 3], &[1.0; 3], &mut b).unwrap();
        assert_eq!(l1.evaluate(&[1.0; 3], &[1.0; 3], &mut b), Err(EvalError::BudgetExhausted));
        let l3 = MinimaxProblem::l3();
        assert!(matches!(l3.value(&[0.0], &[1.0]), Err(EvalError::OutOfDomain(_))));
    }

    #[test]
    fn saddle_values() {
        assert_eq!(MinimaxProblem::l1(3).saddle_value(), Some(0.0));
        assert_eq!(MinimaxProblem::l6().saddle_value(), Some(1.0));
        assert_eq!(MinimaxProblem::l2(3).saddle_value(), Some(9.0));
        assert_eq!(MinimaxProblem::filter().saddle_value(), None);
        assert_eq!(MinimaxProblem::filter().reference_value(), Some(0.0));
    }

    #[test]
    fn l2_minimax_value_by_grid() {
        // Per coordinate: min over x of max over y of min{3-0.2x+0.3y, 3+0.2x-0.1y}.
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let per_coord = grid
            .iter()
            .map(|&x| {
                grid.iter()
                    .map(|&y| (3.0 - 0.2 * x + 0.3 * y).min(3.0 + 0.2 * x - 0.1 * y))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(per_coord, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(3.0 * per_coord, MinimaxProblem::l2(3).saddle_value().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn listed_optima_evaluate_to_saddle_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in all_listed() {
            let opt = p.known_optimum().unwrap();
            let ys = match &opt.y {
                OptimalY::Point(y) => vec![y.clone()],
                OptimalY::OneOf(ys) => ys.clone(),
                OptimalY::Any => (0..100).map(|_| p.y_bounds().sample(&mut rng)).collect(),
            };
            for y in ys {
                let v = p.value(&opt.x, &y).unwrap();
                // L4's listed x* carries six decimals, so its two worst cases only agree to ~2e-8.
                let tol = if p.id() == "L4" { 1e-7 } else { 1e-9 };
                assert!((v - opt.value).abs() <= tol, "{}: {v} vs {}", p.id(), opt.value);
            }
        }
    }

    #[test]
    fn saddle_inequality_on_symmetric_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [MinimaxProblem::l1(3), MinimaxProblem::l6()] {
            let opt = p.known_optimum().unwrap();
            let y_star = match &opt.y {
                OptimalY::Point(y) => y.clone(),
                // Any y is a worst case at x*, but only the KKT multipliers bound L from below.
                _ => vec![2.0 / 3.0, 2.0 / 3.0],
            };
            for _ in 0..1000 {
                let x = p.x_bounds().sample(&mut rng);
                let y = p.y_bounds().sample(&mut rng);
                assert!(p.value(&opt.x, &y).unwrap() <= opt.value + 1e-9);
                assert!(opt.value <= p.value(&x, &y_star).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn scalable_dims_and_additivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &n in &SCALABLE_DIMS {
            for (small, big) in [(MinimaxProblem::l1(n), MinimaxProblem::l1(2 * n)), (MinimaxProblem::l2(n), MinimaxProblem::l2(2 * n))] {
                assert_eq!(small.n_x(), n);
                let x = small.x_bounds().sample(&mut rng);
                let y = small.y_bounds().sample(&mut rng);
                let xx = [x.clone(), x.clone()].concat();
                let yy = [y.clone(), y.clone()].concat();
                let v = small.value(&x, &y).unwrap();
                assert_abs_diff_eq!(big.value(&xx, &yy).unwrap(), 2.0 * v, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn registry_ids() {
        assert_eq!(MinimaxProblem::from_id("L1-n20").unwrap().n_x(), 20);
        assert_eq!(MinimaxProblem::from_id("L2-n5").unwrap().n_y(), 5);
        assert_eq!(MinimaxProblem::from_id("L1-n3").unwrap().id(), "L1");
        assert_eq!(MinimaxProblem::from_id("filter").unwrap().n_x(), 9);
        for bad in ["L7", "L3-n2", "L1-n0", "L1-nx", ""] {
            assert!(matches!(MinimaxProblem::from_id(bad), Err(Error::UnknownProblem(_))), "{bad}");
        }
    }

    #[test]
    fn manifest_is_json_with_every_problem() {
        let json: serde_json::Value = serde_json::from_str(&manifest_json().unwrap()).unwrap();
        let arr = json.as_array().unwrap();
        assert_eq!(arr.len(), 7 + 2 * SCALABLE_DIMS.len());
        assert_eq!(arr[0]["id"], "L1");
        assert_eq!(arr[0]["known_optimum"]["value"], 0.0);
        assert_eq!(arr[5]["known_optimum"]["y"], "any");
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[5.0; 3], &[5.0; 3]).unwrap(), 0.0);
        assert_eq!(mse(&[6.0; 3], &[5.0; 3]).unwrap(), 1.0);
        assert_eq!(mse(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn mse_properties(pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..12), seed in any::<u64>()) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let xs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let m = mse(&x, &xs).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert_eq!(m == 0.0, x == xs);
            prop_assert_eq!(mse(&x, &x).unwrap(), 0.0);
            let mut idx: Vec<usize> = (0..x.len()).collect();
            use rand::seq::SliceRandom;
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let px: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let pxs: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
            prop_assert!((mse(&px, &pxs).unwrap() - m).abs() <= 1e-12 * (1.0 + m));
        }
    }
}
