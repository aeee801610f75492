//! Derivative-free minimization utilities used by the decomposition search
//! and spectral sweeps.

/// Result of a simplex minimization.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead with dimension-adaptive expansion/contraction/shrink
/// coefficients. Terminates when both the simplex diameter and the spread of
/// function values fall below `xtol`/`ftol`.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    initial_step: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> SimplexResult {
    let n = x0.len();
    assert!(n >= 1, "empty parameter vector");
    let (alpha, beta, gamma, delta) = (
        1.0,
        1.0 + 2.0 / n as f64,
        0.75 - 1.0 / (2.0 * n as f64),
        1.0 - 1.0 / n as f64,
    );

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        // order best..worst
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reorder_s: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let reorder_v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = reorder_s;
        values = reorder_v;

        let diam = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(simplex[0].iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = values[n] - values[0];
        if diam < xtol && spread < ftol {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v.iter()) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let combine = |a: f64, b: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst.iter())
                .map(|(c, w)| a * c + b * w)
                .collect()
        };

        let xr = combine(1.0 + alpha, -alpha);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = combine(1.0 + alpha * beta, -alpha * beta);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let outside = fr < values[n];
            let (xc, fc) = if outside {
                let xc = combine(1.0 + alpha * gamma, -alpha * gamma);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = combine(1.0 - gamma, gamma);
                let fc = f(&xc);
                (xc, fc)
            };
            let accept = if outside { fc <= fr } else { fc < values[n] };
            if accept {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                // shrink toward the best point
                for i in 1..=n {
                    let best = simplex[0].clone();
                    for (x, b) in simplex[i].iter_mut().zip(best.iter()) {
                        *x = b + delta * (*x - b);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    SimplexResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Vertex of the parabola through three points; falls back to the middle
/// abscissa when the points are collinear. Used to refine grid-sampled
/// minima.
pub fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let p = x[1] - x[0];
    let q = x[1] - x[2];
    let num = p * p * (y[1] - y[2]) - q * q * (y[1] - y[0]);
    let den = p * (y[1] - y[2]) - q * (y[1] - y[0]);
    if den.abs() < 1e-300 {
        return x[1];
    }
    let v = x[1] - 0.5 * num / den;
    // keep the vertex inside the bracket
    let lo = x[0].min(x[2]);
    let hi = x[0].max(x[2]);
    if v.is_finite() {
        v.clamp(lo, hi)
    } else {
        x[1]
    }
}

/// Golden-section search for a unimodal minimum on `[a, b]`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    (x, v)
}
