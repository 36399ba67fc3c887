//! Nelder-Mead minimizer used by the conditional-sum-of-squares fit.

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    pub max_iterations: usize,
    pub initial_step: f64,
    /// Convergence when the spread of objective values across the simplex
    /// falls below `f_tol * (1 + |f_best|)`.
    pub f_tol: f64,
    /// ... and every vertex lies within `x_tol` of the best one.
    pub x_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            initial_step: 0.1,
            f_tol: 1e-12,
            x_tol: 1e-9,
        }
    }
}

/// Minimizes `f` from `start`. Non-finite objective values are treated as
/// `+inf`, so `f` may signal an infeasible point by returning NaN.
pub(crate) fn minimize<F>(f: F, start: &[f64], opts: Options) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let dim = start.len();
    if dim == 0 {
        return Minimum {
            point: Vec::new(),
            value: eval(start),
            iterations: 0,
            converged: true,
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), eval(start)));
    for i in 0..dim {
        let mut x = start.to_vec();
        x[i] += if x[i] == 0.0 {
            opts.initial_step
        } else {
            opts.initial_step * x[i].abs().max(0.5)
        };
        let v = eval(&x);
        simplex.push((x, v));
    }

    let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let spread = worst - best;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best.is_finite() && spread <= opts.f_tol * (1.0 + best.abs()) && size <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let worst_x = simplex[dim].0.clone();
        let reflected = blend(&centroid, &worst_x, -1.0);
        let f_r = eval(&reflected);

        if f_r < simplex[0].1 {
            let expanded = blend(&centroid, &worst_x, -2.0);
            let f_e = eval(&expanded);
            simplex[dim] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_r);
        } else {
            let (contracted, f_c) = if f_r < worst {
                let x = blend(&centroid, &reflected, 0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = blend(&centroid, &worst_x, 0.5);
                let v = eval(&x);
                (x, v)
            };
            if f_c < worst.min(f_r) {
                simplex[dim] = (contracted, f_c);
            } else {
                let best_x = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = blend(&best_x, &vertex.0, 0.5);
                    let v = eval(&x);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Minimum {
        point,
        value,
        iterations,
        converged,
    }
}
