//! Dense Levenberg–Marquardt for small parameter counts.

/// A weighted least-squares problem `min Σ r_i(p)²`.
///
/// Residuals are expected to already carry their weights.
pub trait LeastSquares {
    fn params(&self) -> usize;
    fn observations(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);
    /// Row-major Jacobian, `observations × params`.
    fn jacobian(&self, p: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once every parameter moves by less than this relative amount.
    pub xtol: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, xtol: 1e-6, ftol: 1e-14 }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A smooth objective with a positive semi-definite curvature model, e.g.
/// Gauss–Newton for least squares or Fisher scoring for Poisson likelihoods.
pub trait Objective {
    fn params(&self) -> usize;
    /// Non-negative cost; non-finite values reject a step.
    fn cost(&self, p: &[f64]) -> f64;
    /// Curvature matrix (row-major `params × params`) and gradient at `p`.
    fn linearize(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// Adapts a [`LeastSquares`] problem to `cost = ½ Σ r²`.
pub struct Squares<'a, P>(pub &'a P);

impl<P: LeastSquares> Objective for Squares<'_, P> {
    fn params(&self) -> usize {
        self.0.params()
    }

    fn cost(&self, p: &[f64]) -> f64 {
        let mut r = vec![0.0; self.0.observations()];
        self.0.residuals(p, &mut r);
        0.5 * r.iter().map(|v| v * v).sum::<f64>()
    }

    fn linearize(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.0.observations(), self.0.params());
        let mut r = vec![0.0; m];
        let mut jac = vec![0.0; m * n];
        self.0.residuals(p, &mut r);
        self.0.jacobian(p, &mut jac);
        normal_equations(&jac, &r, m, n)
    }
}

pub fn minimize<P: LeastSquares>(problem: &P, start: &[f64], opts: &LmOptions) -> LmReport {
    minimize_objective(&Squares(problem), start, opts)
}

/// Levenberg–Marquardt with Marquardt's diagonal scaling.
pub fn minimize_objective<O: Objective>(objective: &O, start: &[f64], opts: &LmOptions) -> LmReport {
    let n = objective.params();
    let mut p = start.to_vec();
    let mut trial = vec![0.0; n];
    let mut cost = objective.cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    if !cost.is_finite() {
        return LmReport { params: p, cost, iterations, converged };
    }

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let (curv, grad) = objective.linearize(&p);
        if grad.iter().any(|g| !g.is_finite()) {
            break;
        }

        loop {
            let mut a = curv.clone();
            for i in 0..n {
                let d = curv[i * n + i].max(1e-300);
                a[i * n + i] += lambda * d;
            }
            let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
            let Some(step) = cholesky_solve(&mut a, &rhs, n) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break 'outer;
                }
                continue;
            };
            for i in 0..n {
                trial[i] = p[i] + step[i];
            }
            let trial_cost = objective.cost(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small_step = step.iter().zip(&p).all(|(d, x)| d.abs() <= opts.xtol * (x.abs() + opts.xtol));
                let small_gain = cost - trial_cost <= opts.ftol * cost;
                p.copy_from_slice(&trial);
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                if small_step || small_gain {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no downhill step left: we are at a (numerical) minimum
                converged = gradient_is_small(&grad, cost);
                break 'outer;
            }
        }
    }
    LmReport { params: p, cost, iterations, converged }
}

fn gradient_is_small(grad: &[f64], cost: f64) -> bool {
    let g = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    g <= 1e-8 * (1.0 + cost)
}

fn normal_equations(jac: &[f64], r: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    for row in 0..m {
        let j = &jac[row * n..(row + 1) * n];
        for a in 0..n {
            jtr[a] += j[a] * r[row];
            for b in a..n {
                jtj[a * n + b] += j[a] * j[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[a * n + b] = jtj[b * n + a];
        }
    }
    (jtj, jtr)
}

/// Solve `A x = b` for symmetric positive definite `A` (overwritten).
pub fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * y[k];
        }
        y[i] = s / a[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= a[k * n + i] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    Some(x)
}
