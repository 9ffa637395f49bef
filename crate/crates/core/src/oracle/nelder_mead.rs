//! Bounded Nelder-Mead: vertices are projected onto the box after every move.

use crate::problems::Bounds;

#[derive(Clone, Debug, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
}

/// Minimizes `f` from `start` with an initial simplex edge of
/// `step_frac * width` per coordinate, spending at most `max_evals`.
pub fn nelder_mead<F>(mut f: F, bounds: &Bounds, start: &[f64], step_frac: f64, max_evals: u64) -> LocalResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = bounds.dim();
    let mut evals = 0u64;
    let mut eval = |x: &[f64], evals: &mut u64| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let x0 = bounds.projected(start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for (i, iv) in bounds.intervals().iter().enumerate() {
        if evals >= max_evals {
            break;
        }
        let mut v = x0.clone();
        let h = step_frac * iv.width();
        v[i] = if v[i] + h <= iv.hi { v[i] + h } else { v[i] - h };
        bounds.project(&mut v);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }
    if simplex.len() < n + 1 {
        return best_of(simplex, evals);
    }

    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        let mut p: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect();
        bounds.project(&mut p);
        p
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let spread = (worst - best).abs();
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= 1e-15 * (1.0 + best.abs()) && diameter <= 1e-12 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64).collect();
        let worst_pt = simplex[n].0.clone();
        let xr = combine(&centroid, &worst_pt, -1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            if evals >= max_evals {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = combine(&centroid, &worst_pt, -2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if evals >= max_evals {
                break;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = combine(&centroid, &worst_pt, -0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = combine(&centroid, &worst_pt, 0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for k in 1..=n {
                    if evals >= max_evals {
                        break;
                    }
                    let p = combine(&anchor, &simplex[k].0, 0.5);
                    let fp = eval(&p, &mut evals);
                    simplex[k] = (p, fp);
                }
            }
        }
    }
    best_of(simplex, evals)
}

fn best_of(simplex: Vec<(Vec<f64>, f64)>, evaluations: u64) -> LocalResult {
    let (x, value) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex has a vertex");
    LocalResult { x, value, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Interval;

    #[test]
    fn rosenbrock_interior() {
        let b = Bounds::uniform(Interval::closed(-5.0, 5.0), 2);
        let r = nelder_mead(
            |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &b,
            &[-1.2, 1.0],
            0.1,
            5000,
        );
        assert!(r.value < 1e-12, "{}", r.value);
        assert!(r.evaluations <= 5000);
    }

    #[test]
    fn optimum_on_the_boundary() {
        let b = Bounds::uniform(Interval::closed(0.0, 1.0), 3);
        let r = nelder_mead(|x: &[f64]| x.iter().map(|v| (v + 1.0).powi(2)).sum(), &b, &[0.7, 0.2, 0.9], 0.1, 3000);
        assert!(r.x.iter().all(|&v| v.abs() < 1e-9), "{:?}", r.x);
    }

    #[test]
    fn respects_budget() {
        let b = Bounds::uniform(Interval::closed(0.0, 1.0), 4);
        let mut calls = 0u64;
        let r = nelder_mead(
            |x: &[f64]| {
                calls += 1;
                x[0].sin()
            },
            &b,
            &[0.5; 4],
            0.1,
            17,
        );
        assert_eq!(calls, r.evaluations);
        assert!(calls <= 17);
    }
}
