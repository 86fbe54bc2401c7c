//! Unconstrained Nelder–Mead minimisation in a handful of dimensions.

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub initial_step: f64,
    /// Stop once the spread of function values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter below this.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { initial_step: 0.1, f_tol: 1e-14, x_tol: 1e-9, max_iter: 4000 }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult<const D: usize> {
    pub x: [f64; D],
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Standard coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
pub fn minimize<const D: usize>(
    f: impl Fn(&[f64; D]) -> f64,
    start: [f64; D],
    opts: SimplexOptions,
) -> SimplexResult<D> {
    let mut pts: Vec<[f64; D]> = Vec::with_capacity(D + 1);
    pts.push(start);
    for k in 0..D {
        let mut p = start;
        p[k] += opts.initial_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(&f).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=D).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[D] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; D];
        for p in &pts[..D] {
            for k in 0..D {
                centroid[k] += p[k] / D as f64;
            }
        }
        let along = |t: f64| -> [f64; D] {
            let mut q = [0.0; D];
            for k in 0..D {
                q[k] = centroid[k] + t * (pts[D][k] - centroid[k]);
            }
            q
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[D] = xe;
                vals[D] = fe;
            } else {
                pts[D] = xr;
                vals[D] = fr;
            }
            continue;
        }
        if fr < vals[D - 1] {
            pts[D] = xr;
            vals[D] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[D] {
            let x = along(-0.5);
            (x, f(&x))
        } else {
            let x = along(0.5);
            (x, f(&x))
        };
        if fc < vals[D].min(fr) {
            pts[D] = xc;
            vals[D] = fc;
            continue;
        }
        let best = pts[0];
        for i in 1..=D {
            for k in 0..D {
                pts[i][k] = best[k] + 0.5 * (pts[i][k] - best[k]);
            }
            vals[i] = f(&pts[i]);
        }
    }

    let (ib, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex is never empty");
    SimplexResult { x: pts[ib], f: vals[ib], iterations, converged }
}
