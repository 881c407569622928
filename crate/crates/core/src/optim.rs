//! Small dense optimizers with numeric derivatives.
//!
//! [`minimize_unconstrained`] is a BFGS quasi-Newton method used for the
//! trajectory fits of the learner. [`minimize_constrained`] handles a box plus
//! inequality constraints `g(x) ≥ 0` with an augmented Lagrangian whose
//! subproblems are solved by a projected Newton method; it is meant for the
//! handful of decision variables of a receding-horizon controller.

use crate::error::{PaccError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm fell below the tolerance.
    Converged,
    /// No line-search step decreased the objective: the point is stationary
    /// up to the accuracy of the numeric gradient.
    Stalled,
    /// Iteration budget used up; the best point found is returned.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn budget_exhausted(&self) -> bool {
        self.termination == Termination::BudgetExhausted
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UnconstrainedOptions {
    pub grad_tol: f64,
    pub fd_step: f64,
    pub max_iter: usize,
}

impl Default for UnconstrainedOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            fd_step: 1e-6,
            max_iter: 200,
        }
    }
}

/// Central-difference gradient.
pub fn numeric_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64, out: &mut [f64]) {
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        out[i] = (fp - fm) / (2.0 * h);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking.
///
/// Stops when the gradient ∞-norm drops below `grad_tol`, when the line search
/// can no longer decrease the objective, or after `max_iter` iterations.
pub fn minimize_unconstrained(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    opts: &UnconstrainedOptions,
) -> Result<Minimum> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(PaccError::invalid(format!(
            "objective is not finite at the start point ({fx})"
        )));
    }
    let mut g = vec![0.0; n];
    numeric_gradient(&f, &x, opts.fd_step, &mut g);
    let mut hinv = identity(n);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    for iter in 0..opts.max_iter {
        if inf_norm(&g) < opts.grad_tol {
            return Ok(Minimum {
                point: x,
                value: fx,
                iterations: iter,
                termination: Termination::Converged,
            });
        }
        mat_vec_neg(&hinv, &g, &mut dir);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hinv = identity(n);
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &dir);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-12 {
            for i in 0..n {
                x_new[i] = x[i] + alpha * dir[i];
            }
            let f_new = f(&x_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * alpha * slope {
                accepted = Some(f_new);
                break;
            }
            alpha *= 0.5;
        }
        let Some(f_new) = accepted else {
            return Ok(Minimum {
                point: x,
                value: fx,
                iterations: iter,
                termination: Termination::Stalled,
            });
        };

        numeric_gradient(&f, &x_new, opts.fd_step, &mut g_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
    }

    let termination = if inf_norm(&g) < opts.grad_tol {
        Termination::Converged
    } else {
        Termination::BudgetExhausted
    };
    Ok(Minimum {
        point: x,
        value: fx,
        iterations: opts.max_iter,
        termination,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec_neg(m: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m) {
        *o = -dot(row, v);
    }
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Objective plus box and inequality constraints `g(x) ≥ 0`.
pub struct BoxedProblem<'a> {
    pub objective: Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// All inequality constraint values at once, each required to be ≥ 0.
    pub constraints: Box<dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a>,
}

impl<'a> BoxedProblem<'a> {
    pub fn new(
        objective: impl Fn(&[f64]) -> f64 + Sync + 'a,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Self {
        Self {
            objective: Box::new(objective),
            lower,
            upper,
            constraints: Box::new(|_| Vec::new()),
        }
    }

    pub fn with_constraints(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Sync + 'a) -> Self {
        self.constraints = Box::new(g);
        self
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*l, *u);
        }
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        (self.constraints)(x)
            .iter()
            .fold(0.0, |m, g| m.max(-g))
    }

    fn validate(&self) -> Result<()> {
        let n = self.lower.len();
        if n == 0 || self.upper.len() != n {
            return Err(PaccError::invalid("bounds must be non-empty and of equal length"));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(PaccError::invalid(format!("invalid bound pair [{l}, {u}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstrainedOptions {
    /// Accepted constraint violation of the returned point.
    pub feasibility_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub fd_step: f64,
}

impl Default for ConstrainedOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-6,
            max_outer: 40,
            max_inner: 100,
            fd_step: 1e-5,
        }
    }
}

/// Minimize within the box subject to `g(x) ≥ 0`.
///
/// The returned point lies in the box and violates no constraint by more
/// than `feasibility_tol`. If `start` (projected into the box) is feasible,
/// the returned value never exceeds the objective there.
pub fn minimize_constrained(
    problem: &BoxedProblem<'_>,
    start: &[f64],
    opts: &ConstrainedOptions,
) -> Result<Minimum> {
    problem.validate()?;
    if start.len() != problem.dimension() {
        return Err(PaccError::invalid(format!(
            "start has {} components, problem has {}",
            start.len(),
            problem.dimension()
        )));
    }
    let mut x = start.to_vec();
    problem.project(&mut x);
    let f0 = (problem.objective)(&x);
    if !f0.is_finite() {
        return Err(PaccError::invalid("objective is not finite at the start point"));
    }

    let feasible_start = (problem.violation(&x) <= opts.feasibility_tol).then(|| (x.clone(), f0));

    let m = (problem.constraints)(&x).len();
    let mut lambda = vec![0.0; m];
    let mut rho = 10.0;
    let mut prev_violation = f64::INFINITY;
    let mut total_iter = 0;
    let mut termination = Termination::BudgetExhausted;

    for _ in 0..opts.max_outer {
        let lagrangian = |z: &[f64]| {
            let mut v = (problem.objective)(z);
            for (g, l) in (problem.constraints)(z).iter().zip(&lambda) {
                let t = (l - rho * g).max(0.0);
                v += (t * t - l * l) / (2.0 * rho);
            }
            v
        };
        let inner = projected_newton(&lagrangian, &x, &problem.lower, &problem.upper, opts);
        total_iter += inner.iterations;
        x = inner.point;

        let g = (problem.constraints)(&x);
        let violation = g.iter().fold(0.0, |m: f64, gi| m.max(-gi));
        let mut max_dl: f64 = 0.0;
        for (l, gi) in lambda.iter_mut().zip(&g) {
            let new = (*l - rho * gi).max(0.0);
            max_dl = max_dl.max((new - *l).abs());
            *l = new;
        }
        if violation <= 1e-10 && max_dl <= 1e-8 * (1.0 + lambda.iter().fold(0.0, |a: f64, b| a.max(*b))) {
            termination = Termination::Converged;
            break;
        }
        if violation > 0.25 * prev_violation && rho < 1e10 {
            rho *= 10.0;
        }
        prev_violation = violation;
    }

    if problem.violation(&x) > opts.feasibility_tol {
        restore_feasibility(problem, &mut x, opts);
    }
    let violation = problem.violation(&x);
    let value = (problem.objective)(&x);
    let candidate = (violation <= opts.feasibility_tol && value.is_finite()).then_some((x, value));

    let best = match (candidate, feasible_start) {
        (Some(c), Some(s)) => {
            if c.1 <= s.1 {
                c
            } else {
                s
            }
        }
        (Some(c), None) => c,
        (None, Some(s)) => s,
        (None, None) => return Err(PaccError::Infeasible { violation }),
    };
    Ok(Minimum {
        point: best.0,
        value: best.1,
        iterations: total_iter,
        termination,
    })
}

/// Push `x` towards the feasible set by minimizing the squared violation.
fn restore_feasibility(problem: &BoxedProblem<'_>, x: &mut Vec<f64>, opts: &ConstrainedOptions) {
    // Aim slightly inside the feasible set so the result clears the tolerance.
    let margin = 0.1 * opts.feasibility_tol;
    let phi = |z: &[f64]| {
        (problem.constraints)(z)
            .iter()
            .map(|g| (g - margin).min(0.0).powi(2))
            .sum::<f64>()
    };
    let r = projected_newton(&phi, x, &problem.lower, &problem.upper, opts);
    *x = r.point;
}

/// Projected Newton method for `min f(x)` over a box, with a numeric Hessian.
fn projected_newton(
    f: &impl Fn(&[f64]) -> f64,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &ConstrainedOptions,
) -> Minimum {
    let n = start.len();
    let project = |z: &mut [f64]| {
        for i in 0..n {
            z[i] = z[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = start.to_vec();
    project(&mut x);
    let mut fx = f(&x);
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let h = opts.fd_step;

    for iter in 0..opts.max_inner {
        numeric_gradient(f, &x, h, &mut g);
        let pg: Vec<f64> = (0..n)
            .map(|i| x[i] - (x[i] - g[i]).clamp(lower[i], upper[i]))
            .collect();
        let pg_norm = inf_norm(&pg);
        if pg_norm < 1e-10 {
            return Minimum {
                point: x,
                value: fx,
                iterations: iter,
                termination: Termination::Converged,
            };
        }
        let eps = pg_norm.min(1e-6);
        let active: Vec<bool> = (0..n)
            .map(|i| {
                (x[i] <= lower[i] + eps && g[i] > 0.0) || (x[i] >= upper[i] - eps && g[i] < 0.0)
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();

        let mut dir: Vec<f64> = g.iter().map(|gi| -gi).collect();
        if !free.is_empty() {
            let hess = numeric_hessian(f, &x, 1e3 * h, &free);
            let rhs: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
            if let Some(step) = solve_regularized(&hess, &rhs) {
                for (k, &i) in free.iter().enumerate() {
                    dir[i] = step[k];
                }
            }
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            for i in 0..n {
                trial[i] = x[i] + alpha * dir[i];
            }
            project(&mut trial);
            let f_trial = f(&trial);
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
            if f_trial.is_finite() && f_trial <= fx + 1e-4 * decrease.min(0.0) && f_trial < fx {
                let small = (fx - f_trial) <= 1e-15 * (1.0 + fx.abs());
                x.copy_from_slice(&trial);
                fx = f_trial;
                accepted = true;
                if small {
                    return Minimum {
                        point: x,
                        value: fx,
                        iterations: iter + 1,
                        termination: Termination::Converged,
                    };
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Minimum {
                point: x,
                value: fx,
                iterations: iter,
                termination: Termination::Stalled,
            };
        }
    }
    Minimum {
        point: x,
        value: fx,
        iterations: opts.max_inner,
        termination: Termination::BudgetExhausted,
    }
}

fn numeric_hessian(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64, idx: &[usize]) -> Vec<Vec<f64>> {
    let k = idx.len();
    let mut z = x.to_vec();
    let mut eval = |di: usize, si: f64, dj: usize, sj: f64| {
        z.copy_from_slice(x);
        z[di] += si * h;
        z[dj] += sj * h;
        f(&z)
    };
    let f0 = f(x);
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        let i = idx[a];
        let fp = eval(i, 1.0, i, 0.0);
        let fm = eval(i, -1.0, i, 0.0);
        out[a][a] = (fp - 2.0 * f0 + fm) / (h * h);
        for b in (a + 1)..k {
            let j = idx[b];
            let v = (eval(i, 1.0, j, 1.0) - eval(i, 1.0, j, -1.0) - eval(i, -1.0, j, 1.0)
                + eval(i, -1.0, j, -1.0))
                / (4.0 * h * h);
            out[a][b] = v;
            out[b][a] = v;
        }
    }
    out
}

/// Solve `(H + μI) x = b` with the smallest μ ≥ 0 that makes the matrix
/// positive definite.
fn solve_regularized(hess: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = hess.iter().enumerate().fold(0.0f64, |m, (i, r)| m.max(r[i].abs())).max(1e-12);
    let mut mu = 0.0;
    for _ in 0..40 {
        let mut a: Vec<Vec<f64>> = hess.to_vec();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += mu;
        }
        if let Some(l) = cholesky(&a) {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
                y[i] = (b[i] - s) / l[i][i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let s: f64 = ((i + 1)..n).map(|k| l[k][i] * x[k]).sum();
                x[i] = (y[i] - s) / l[i][i];
            }
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        mu = if mu == 0.0 { 1e-8 * scale } else { mu * 10.0 };
    }
    None
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}
