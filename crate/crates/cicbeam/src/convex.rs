//! Log-barrier interior-point solver for the convexified rate subproblem.
//!
//! The subproblem maximizes a linear objective over a real vector `x` that
//! packs the beamformer coefficients (real parts then imaginary parts, per
//! stream block), the stream rates and one auxiliary interference-plus-noise
//! level per decoding GBS. The real and imaginary parts of each received
//! amplitude `h^H w` are affine in `x` and are represented by a
//! [`Projection`]; they are substituted directly instead of being carried as
//! separate equality-constrained variables.
//!
//! Every constraint is in `g(x) <= 0` form. The solver is the textbook barrier
//! method: center with damped Newton steps on `-t c^T x - sum ln(-g_i(x))`,
//! then grow `t` geometrically until `m / t` drops below the gap tolerance.

use std::f64::consts::LN_2;
use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Real-linear functionals `a = p . x[offset..]`, `b = q . x[offset..]` giving
/// the real and imaginary part of a complex inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub offset: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Projection {
    pub fn eval(&self, x: &[f64]) -> (f64, f64) {
        let block = &x[self.offset..self.offset + self.p.len()];
        let a = self.p.iter().zip(block).map(|(p, v)| p * v).sum();
        let b = self.q.iter().zip(block).map(|(q, v)| q * v).sum();
        (a, b)
    }

    /// `grad += ca * p + cb * q` on this block.
    fn add_grad(&self, ca: f64, cb: f64, grad: &mut DVector<f64>) {
        for k in 0..self.p.len() {
            grad[self.offset + k] += ca * self.p[k] + cb * self.q[k];
        }
    }

    /// `h += weight * (p p^T + q q^T)` on this block.
    fn add_outer(&self, weight: f64, h: &mut DMatrix<f64>) {
        let n = self.p.len();
        for r in 0..n {
            for c in 0..n {
                h[(self.offset + r, self.offset + c)] += weight * (self.p[r] * self.p[c] + self.q[r] * self.q[c]);
            }
        }
    }
}

/// Linearization point of the rate surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Concave lower bound of `a^2 + b^2 - (2^R - 1) eta`, tight when
/// `(a, b) = (anchor.a, anchor.b)` and `anchor.c = sqrt((2^R - 1) / eta)`.
/// Returns the value and its gradient in `(a, b, R, eta)`.
pub fn eval_surrogate(a: f64, b: f64, rate: f64, eta: f64, anchor: &Anchor) -> Result<(f64, [f64; 4])> {
    let Anchor { a: at, b: bt, c: ct } = *anchor;
    if !(ct > 0.0) {
        return Err(Error::NonPositiveAnchor(ct));
    }
    let e = rate.exp2();
    let u = eta * ct / 2.0 + (e - 1.0) / (2.0 * ct);
    let f = 2.0 * at * a + 2.0 * bt * b - at * at - bt * bt - u * u;
    let grad = [2.0 * at, 2.0 * bt, -2.0 * u * LN_2 * e / (2.0 * ct), -2.0 * u * ct / 2.0];
    Ok((f, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `-f(a, b, R, eta | anchor) <= 0`
    Surrogate { proj: Projection, rate: usize, eta: usize, anchor: Anchor },
    /// `(2^R - 1) eta - a^2 - b^2 <= 0`. Not convex; used to assess the
    /// original problem at a point, never handed to the solver.
    RateExact { proj: Projection, rate: usize, eta: usize },
    /// `sum_k |terms_k|^2 + constant - x[minus] <= 0`
    QuadraticSum { terms: Vec<Projection>, constant: f64, minus: Option<usize> },
    /// `sum ||x[range]||^2 - budget <= 0`
    Ball { ranges: Vec<(usize, usize)>, budget: f64 },
    /// `bound - x[index] <= 0`
    Lower { index: usize, bound: f64 },
}

impl Constraint {
    pub fn is_convex(&self) -> bool {
        !matches!(self, Constraint::RateExact { .. })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Surrogate { proj, rate, eta, anchor } => {
                let (a, b) = proj.eval(x);
                let at = anchor;
                let u = x[*eta] * at.c / 2.0 + (x[*rate].exp2() - 1.0) / (2.0 * at.c);
                -(2.0 * at.a * a + 2.0 * at.b * b - at.a * at.a - at.b * at.b - u * u)
            }
            Constraint::RateExact { proj, rate, eta } => {
                let (a, b) = proj.eval(x);
                (x[*rate].exp2() - 1.0) * x[*eta] - a * a - b * b
            }
            Constraint::QuadraticSum { terms, constant, minus } => {
                let s: f64 = terms
                    .iter()
                    .map(|t| {
                        let (a, b) = t.eval(x);
                        a * a + b * b
                    })
                    .sum();
                s + constant - minus.map_or(0.0, |i| x[i])
            }
            Constraint::Ball { ranges, budget } => {
                ranges.iter().flat_map(|&(s, e)| x[s..e].iter()).map(|v| v * v).sum::<f64>() - budget
            }
            Constraint::Lower { index, bound } => bound - x[*index],
        }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        match self {
            Constraint::Surrogate { proj, rate, eta, anchor } => {
                let e = x[*rate].exp2();
                let u = x[*eta] * anchor.c / 2.0 + (e - 1.0) / (2.0 * anchor.c);
                proj.add_grad(-2.0 * anchor.a, -2.0 * anchor.b, &mut g);
                g[*rate] += 2.0 * u * LN_2 * e / (2.0 * anchor.c);
                g[*eta] += 2.0 * u * anchor.c / 2.0;
            }
            Constraint::RateExact { proj, rate, eta } => {
                let (a, b) = proj.eval(x);
                let e = x[*rate].exp2();
                proj.add_grad(-2.0 * a, -2.0 * b, &mut g);
                g[*rate] += LN_2 * e * x[*eta];
                g[*eta] += e - 1.0;
            }
            Constraint::QuadraticSum { terms, minus, .. } => {
                for t in terms {
                    let (a, b) = t.eval(x);
                    t.add_grad(2.0 * a, 2.0 * b, &mut g);
                }
                if let Some(i) = minus {
                    g[*i] -= 1.0;
                }
            }
            Constraint::Ball { ranges, .. } => {
                for &(s, e) in ranges {
                    for i in s..e {
                        g[i] += 2.0 * x[i];
                    }
                }
            }
            Constraint::Lower { index, .. } => g[*index] = -1.0,
        }
        g
    }

    /// `h += weight * hessian(g)(x)`
    pub fn add_hessian(&self, x: &[f64], weight: f64, h: &mut DMatrix<f64>) {
        match self {
            Constraint::Surrogate { rate, eta, anchor, .. } => {
                let e = x[*rate].exp2();
                let u = x[*eta] * anchor.c / 2.0 + (e - 1.0) / (2.0 * anchor.c);
                let du_r = LN_2 * e / (2.0 * anchor.c);
                let du_e = anchor.c / 2.0;
                let d2u_r = LN_2 * LN_2 * e / (2.0 * anchor.c);
                h[(*rate, *rate)] += weight * (2.0 * du_r * du_r + 2.0 * u * d2u_r);
                h[(*eta, *eta)] += weight * 2.0 * du_e * du_e;
                h[(*rate, *eta)] += weight * 2.0 * du_r * du_e;
                h[(*eta, *rate)] += weight * 2.0 * du_r * du_e;
            }
            Constraint::RateExact { proj, rate, eta } => {
                let e = x[*rate].exp2();
                proj.add_outer(-2.0 * weight, h);
                h[(*rate, *rate)] += weight * LN_2 * LN_2 * e * x[*eta];
                h[(*rate, *eta)] += weight * LN_2 * e;
                h[(*eta, *rate)] += weight * LN_2 * e;
            }
            Constraint::QuadraticSum { terms, .. } => {
                for t in terms {
                    t.add_outer(2.0 * weight, h);
                }
            }
            Constraint::Ball { ranges, .. } => {
                for &(s, e) in ranges {
                    for i in s..e {
                        h[(i, i)] += 2.0 * weight;
                    }
                }
            }
            Constraint::Lower { .. } => {}
        }
    }
}

/// Maximize `objective . x` subject to `constraints`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub dim: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl SubproblemSpec {
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Scaled stationarity residual `||-c + sum_i duals_i grad g_i(x)||_inf`.
    pub fn stationarity_residual(&self, x: &[f64], duals: &[f64]) -> f64 {
        let mut r = DVector::from_iterator(self.dim, self.objective.iter().map(|c| -c));
        for (c, l) in self.constraints.iter().zip(duals) {
            r.axpy(*l, &c.gradient(x), 1.0);
        }
        let scale = self.objective.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        r.amax() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub t0: f64,
    pub mu: f64,
    /// Stop once `m / t` is below this.
    pub gap_tol: f64,
    /// Stop centering once half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub line_search_alpha: f64,
    pub line_search_beta: f64,
    pub max_newton_per_center: usize,
    pub max_outer: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            t0: 1.0,
            mu: 10.0,
            gap_tol: 1e-8,
            newton_tol: 1e-10,
            line_search_alpha: 0.25,
            line_search_beta: 0.5,
            max_newton_per_center: 100,
            max_outer: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleStart,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::InfeasibleStart => "infeasible_start",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    pub objective: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective: f64,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub max_violation: f64,
    /// Barrier estimate of the Lagrange multipliers, one per constraint.
    pub duals: Vec<f64>,
    pub status: SolveStatus,
    /// One record per completed centering step.
    pub history: Vec<IterateRecord>,
}

impl SolveReport {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,objective,max_violation\n");
        for r in &self.history {
            s.push_str(&format!("{},{:e},{:e}\n", r.iteration, r.objective, r.max_violation));
        }
        s
    }
}

fn newton_direction(h: DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let n = h.nrows();
    let diag_max = (0..n).map(|i| h[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-300);
    let mut shift = 0.0;
    loop {
        let mut hs = h.clone();
        for i in 0..n {
            hs[(i, i)] += shift;
        }
        if let Some(ch) = Cholesky::new(hs) {
            return -ch.solve(grad);
        }
        shift = if shift == 0.0 { 1e-12 * diag_max } else { shift * 10.0 };
    }
}

/// Gradient and Hessian of `-t c^T x - sum ln(-g_i(x))`, plus each `grad g_i`.
fn barrier_system(
    spec: &SubproblemSpec,
    c: &DVector<f64>,
    x: &[f64],
    g: &[f64],
    t: f64,
) -> (DVector<f64>, DMatrix<f64>, Vec<DVector<f64>>) {
    let mut grad = c * -t;
    let mut hess = DMatrix::zeros(spec.dim, spec.dim);
    let mut dgs = Vec::with_capacity(g.len());
    for (con, &gi) in spec.constraints.iter().zip(g) {
        let s = -gi;
        let dg = con.gradient(x);
        grad.axpy(1.0 / s, &dg, 1.0);
        hess.ger(1.0 / (s * s), &dg, &dg, 1.0);
        con.add_hessian(x, 1.0 / s, &mut hess);
        dgs.push(dg);
    }
    (grad, hess, dgs)
}

/// Run the barrier method from a strictly feasible `start`.
pub fn solve(spec: &SubproblemSpec, start: &[f64], opts: &SolverOptions) -> SolveReport {
    let m = spec.constraints.len();
    let c = DVector::from_column_slice(&spec.objective);
    let start_obj = spec.objective_value(start);
    let values = |x: &[f64]| spec.constraints.iter().map(|g| g.value(x)).collect::<Vec<f64>>();

    let g0 = values(start);
    if let Some(worst) = g0.iter().copied().reduce(f64::max).filter(|v| !(*v < 0.0)) {
        return SolveReport {
            x: start.to_vec(),
            objective: start_obj,
            outer_iterations: 0,
            newton_iterations: 0,
            max_violation: worst,
            duals: vec![0.0; m],
            status: SolveStatus::InfeasibleStart,
            history: Vec::new(),
        };
    }

    let mut x = DVector::from_column_slice(start);
    let mut g = g0;
    let mut t = opts.t0;
    let mut newton_iterations = 0;
    let mut outer = 0;
    let mut status = SolveStatus::Optimal;
    let mut history = Vec::new();

    loop {
        outer += 1;
        let mut centered = false;
        for _ in 0..opts.max_newton_per_center {
            let (grad, hess, _) = barrier_system(spec, &c, x.as_slice(), &g, t);
            let dx = newton_direction(hess, &grad);
            let slope = grad.dot(&dx);
            newton_iterations += 1;
            if -slope / 2.0 <= opts.newton_tol {
                centered = true;
                break;
            }

            // Backtrack to strict feasibility, then to sufficient decrease.
            // The barrier change is formed from differences to avoid
            // cancellation at large t.
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-14 {
                let xn = &x + &dx * step;
                let gn = values(xn.as_slice());
                if gn.iter().all(|v| *v < 0.0) {
                    let dphi: f64 = gn.iter().zip(&g).map(|(a, b)| -(a / b).ln()).sum();
                    let df = -t * step * c.dot(&dx) + dphi;
                    if df <= opts.line_search_alpha * step * slope {
                        accepted = Some((xn, gn));
                        break;
                    }
                }
                step *= opts.line_search_beta;
            }
            match accepted {
                Some((xn, gn)) => {
                    x = xn;
                    g = gn;
                }
                None => {
                    // No progress possible at working precision.
                    centered = true;
                    break;
                }
            }
        }
        if !centered {
            status = SolveStatus::MaxIter;
        }
        history.push(IterateRecord {
            iteration: outer,
            objective: spec.objective_value(x.as_slice()),
            max_violation: g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        if !centered || m as f64 / t < opts.gap_tol {
            break;
        }
        if outer >= opts.max_outer {
            status = SolveStatus::MaxIter;
            break;
        }
        t *= opts.mu;
    }

    // Multipliers corrected by one Newton step, which removes the first-order
    // centering error from the stationarity residual.
    let (grad, hess, dgs) = barrier_system(spec, &c, x.as_slice(), &g, t);
    let dx = newton_direction(hess, &grad);
    let duals: Vec<f64> =
        g.iter().zip(&dgs).map(|(gi, dg)| ((1.0 + dg.dot(&dx) / -gi) / (t * -gi)).max(0.0)).collect();
    let mut x: Vec<f64> = x.as_slice().to_vec();
    let mut objective = spec.objective_value(&x);
    // Never hand back something worse than the start.
    if objective < start_obj {
        x = start.to_vec();
        objective = start_obj;
    }
    let max_violation = spec.max_violation(&x).max(0.0);
    SolveReport { x, objective, outer_iterations: outer, newton_iterations, max_violation, duals, status, history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn surrogate_tight_at_anchor() {
        let anchor = Anchor { a: 1.0, b: 0.0, c: 1.0 };
        let (f, _) = eval_surrogate(1.0, 0.0, 1.0, 1.0, &anchor).unwrap();
        assert!(f.abs() < 1e-15);
    }

    #[test]
    fn surrogate_lower_bound_example() {
        let anchor = Anchor { a: 1.0, b: 1.0, c: 1.0 };
        let (f, _) = eval_surrogate(2.0, 0.0, 1.0, 1.0, &anchor).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        let exact = 4.0 - 1.0;
        assert!(f <= exact);
    }

    #[test]
    fn surrogate_at_zero_rate() {
        let anchor = Anchor { a: 0.7, b: -0.2, c: 1.3 };
        let (f, _) = eval_surrogate(0.5, 0.4, 0.0, 2.0, &anchor).unwrap();
        let expected = 2.0 * 0.7 * 0.5 + 2.0 * -0.2 * 0.4 - 0.49 - 0.04 - (2.0 * 1.3 / 2.0f64).powi(2);
        assert!((f - expected).abs() < 1e-14);
    }

    #[test]
    fn surrogate_rejects_nonpositive_anchor() {
        let anchor = Anchor { a: 1.0, b: 0.0, c: 0.0 };
        assert!(matches!(eval_surrogate(1.0, 0.0, 1.0, 1.0, &anchor), Err(Error::NonPositiveAnchor(_))));
    }

    fn random_projection(rng: &mut ChaCha8Rng, offset: usize, len: usize) -> Projection {
        Projection {
            offset,
            p: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            q: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    /// Layout: x[0..4] beamformer block, x[4] rate, x[5] eta.
    fn sample_constraints(rng: &mut ChaCha8Rng) -> Vec<Constraint> {
        vec![
            Constraint::Surrogate {
                proj: random_projection(rng, 0, 4),
                rate: 4,
                eta: 5,
                anchor: Anchor { a: rng.random_range(-1.0..1.0), b: rng.random_range(-1.0..1.0), c: rng.random_range(0.2..2.0) },
            },
            Constraint::RateExact { proj: random_projection(rng, 0, 4), rate: 4, eta: 5 },
            Constraint::QuadraticSum {
                terms: vec![random_projection(rng, 0, 4), random_projection(rng, 2, 2)],
                constant: 0.3,
                minus: Some(5),
            },
            Constraint::Ball { ranges: vec![(0, 4)], budget: 3.0 },
            Constraint::Lower { index: 4, bound: 0.1 },
        ]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let cons = sample_constraints(&mut rng);
            let x: Vec<f64> = (0..6).map(|i| if i == 5 { rng.random_range(0.1..3.0) } else { rng.random_range(-1.5..1.5) }).collect();
            for con in &cons {
                let g = con.gradient(&x);
                for i in 0..6 {
                    let h = 1e-6;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (con.value(&xp) - con.value(&xm)) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{con:?} i={i}: {fd} vs {}", g[i]);
                }
                // Hessian column i vs finite difference of the gradient.
                let mut h = DMatrix::zeros(6, 6);
                con.add_hessian(&x, 1.0, &mut h);
                for i in 0..6 {
                    let d = 1e-6;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += d;
                    xm[i] -= d;
                    let fd = (con.gradient(&xp) - con.gradient(&xm)) / (2.0 * d);
                    for r in 0..6 {
                        assert!((fd[r] - h[(r, i)]).abs() <= 1e-5 * (1.0 + h[(r, i)].abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let anchor = Anchor { a: rng.random_range(-2.0..2.0), b: rng.random_range(-2.0..2.0), c: rng.random_range(0.1..3.0) };
            let v = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..4.0), rng.random_range(0.1..5.0)];
            let (_, g) = eval_surrogate(v[0], v[1], v[2], v[3], &anchor).unwrap();
            for i in 0..4 {
                let h = 1e-6;
                let mut p = v;
                let mut m = v;
                p[i] += h;
                m[i] -= h;
                let fp = eval_surrogate(p[0], p[1], p[2], p[3], &anchor).unwrap().0;
                let fm = eval_surrogate(m[0], m[1], m[2], m[3], &anchor).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()));
            }
        }
    }

    #[test]
    fn convex_constraints_lie_below_chords() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let cons = sample_constraints(&mut rng);
            // Rates and interference levels are nonnegative on the domain.
            let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..6).map(|i| if i >= 4 { rng.random_range(0.0..2.0) } else { rng.random_range(-1.0..2.0) }).collect()
            };
            let x = point(&mut rng);
            let y = point(&mut rng);
            let th: f64 = rng.random_range(0.0..1.0);
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| th * a + (1.0 - th) * b).collect();
            for con in cons.iter().filter(|c| c.is_convex()) {
                let chord = th * con.value(&x) + (1.0 - th) * con.value(&y);
                assert!(con.value(&z) <= chord + 1e-9);
            }
        }
    }

    /// One stream, one receiver with effective channel `h` (real 2-vector),
    /// unit noise, power `p`. Anchors at the known optimum.
    fn single_link(h: [f64; 2], p: f64, anchor_at_optimum: bool) -> (SubproblemSpec, Vec<f64>, f64) {
        // x = [re w0, re w1, im w0, im w1, R, eta]
        let proj = Projection { offset: 0, p: vec![h[0], h[1], 0.0, 0.0], q: vec![0.0, 0.0, h[0], h[1]] };
        let hn2 = h[0] * h[0] + h[1] * h[1];
        let r_opt = (1.0 + p * hn2).log2();
        let anchor = if anchor_at_optimum {
            Anchor { a: (p * hn2).sqrt(), b: 0.0, c: ((r_opt.exp2() - 1.0) / 1.0).sqrt() }
        } else {
            Anchor { a: 0.5 * (p * hn2).sqrt(), b: 0.0, c: 1.0 }
        };
        let spec = SubproblemSpec {
            dim: 6,
            objective: vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            constraints: vec![
                Constraint::Surrogate { proj, rate: 4, eta: 5, anchor },
                Constraint::QuadraticSum { terms: vec![], constant: 1.0, minus: Some(5) },
                Constraint::Ball { ranges: vec![(0, 4)], budget: p },
                Constraint::Lower { index: 4, bound: 0.0 },
            ],
        };
        // Start: half-power matched filter, small rate.
        let s = (0.5 * p / hn2).sqrt();
        let start = vec![s * h[0], s * h[1], 0.0, 0.0, 0.05, 1.1];
        (spec, start, r_opt)
    }

    #[test]
    fn single_link_reaches_capacity_with_tight_anchor() {
        let (spec, start, r_opt) = single_link([1.2, -0.4], 10.0, true);
        let r = solve(&spec, &start, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - r_opt).abs() < 1e-4, "{} vs {r_opt}", r.objective);
        assert!(r.objective >= spec.objective_value(&start));
        let power: f64 = r.x[..4].iter().map(|v| v * v).sum();
        assert!((power - 10.0).abs() < 1e-6);
        let kkt = spec.stationarity_residual(&r.x, &r.duals);
        assert!(kkt < 1e-7, "{kkt} {:?}", r);
    }

    #[test]
    fn improves_on_start_with_loose_anchor() {
        let (spec, start, r_opt) = single_link([0.3, 0.9], 4.0, false);
        let r = solve(&spec, &start, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective >= spec.objective_value(&start));
        assert!(r.objective <= r_opt + 1e-9);
        assert!(r.max_violation <= 1e-7);
    }

    #[test]
    fn rejects_infeasible_start() {
        let (spec, mut start, _) = single_link([1.0, 0.0], 1.0, true);
        start[5] = 0.5; // eta below noise
        let r = solve(&spec, &start, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::InfeasibleStart);
    }

    #[test]
    fn objective_nondecreasing_across_centering_steps() {
        let (spec, start, _) = single_link([0.8, 0.8], 50.0, true);
        let r = solve(&spec, &start, &SolverOptions::default());
        for w in r.history.windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-9);
        }
        assert!(r.history_csv().starts_with("iteration,objective,max_violation\n"));
    }


    proptest::proptest! {
        #[test]
        fn surrogate_is_a_lower_bound(
            a in -3.0f64..3.0, b in -3.0f64..3.0, r in 0.0f64..6.0, eta in 0.0f64..6.0,
            at in -3.0f64..3.0, bt in -3.0f64..3.0, ct in 0.01f64..10.0,
        ) {
            let (f, _) = eval_surrogate(a, b, r, eta, &Anchor { a: at, b: bt, c: ct }).unwrap();
            let exact = a * a + b * b - (r.exp2() - 1.0) * eta;
            proptest::prop_assert!(f <= exact + 1e-9 * exact.abs().max(1.0));
        }

        #[test]
        fn surrogate_is_concave_on_segments(
            p in proptest::array::uniform4(0.0f64..3.0), q in proptest::array::uniform4(0.0f64..3.0),
            ct in 0.05f64..5.0, s in 0.0f64..1.0,
        ) {
            let anchor = Anchor { a: 0.7, b: -0.4, c: ct };
            let f = |x: [f64; 4]| eval_surrogate(x[0], x[1], x[2], x[3], &anchor).unwrap().0;
            let mid = [0, 1, 2, 3].map(|k| s * p[k] + (1.0 - s) * q[k]);
            let chord = s * f(p) + (1.0 - s) * f(q);
            proptest::prop_assert!(f(mid) >= chord - 1e-9 * chord.abs().max(1.0));
        }
    }
}
