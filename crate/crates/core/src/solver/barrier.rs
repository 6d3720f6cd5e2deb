//! Log-barrier interior-point method for small dense convex QCQPs.

use nalgebra::{DMatrix, DVector};

use super::quad::Quad;

/// `minimize objective(z)  s.t.  constraints[i](z) <= 0`.
#[derive(Debug, Clone)]
pub struct Program {
    pub objective: Quad,
    pub constraints: Vec<Quad>,
}

impl Program {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|g| g.value(z))
            .fold(0.0, f64::max)
    }

    pub fn strictly_feasible(&self, z: &DVector<f64>) -> bool {
        self.constraints.iter().all(|g| g.value(z) < 0.0)
    }

    /// The phase-one problem `minimize s  s.t.  g_i(z) <= s` over `(z, s)`.
    pub fn phase_one(&self) -> Program {
        let n = self.dim();
        let mut objective = Quad::zero(n + 1);
        objective.lin[n] = 1.0;
        Program {
            objective,
            constraints: self.constraints.iter().map(|g| g.extend(-1.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Stop once the duality-gap bound `m / t` drops below this.
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            newton_tol: 1e-10,
            max_newton: 200,
            mu: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierStatus {
    Converged,
    /// A caller-supplied predicate stopped the run early.
    Stopped,
    MaxNewton,
}

#[derive(Debug, Clone)]
pub struct BarrierOutcome {
    pub z: DVector<f64>,
    /// Multiplier estimates `1 / (t * -g_i(z))`.
    pub duals: Vec<f64>,
    pub t: f64,
    pub newton_steps: usize,
    pub status: BarrierStatus,
}

impl BarrierOutcome {
    /// Lower bound on the optimal value implied by the central-path duals.
    pub fn lower_bound(&self, prog: &Program) -> f64 {
        prog.objective.value(&self.z) - prog.constraints.len() as f64 / self.t
    }
}

struct Eval {
    values: Vec<f64>,
    grads: Vec<DVector<f64>>,
    obj_grad: DVector<f64>,
}

fn evaluate(prog: &Program, z: &DVector<f64>) -> Eval {
    Eval {
        values: prog.constraints.iter().map(|g| g.value(z)).collect(),
        grads: prog.constraints.iter().map(|g| g.grad(z)).collect(),
        obj_grad: prog.objective.grad(z),
    }
}

fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let mut h = h.clone();
    let scale = h.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        if let Some(ch) = h.clone().cholesky() {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        let next = if ridge == 0.0 { scale * 1e-14 } else { ridge * 100.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += next - ridge;
        }
        ridge = next;
    }
    None
}

const MIN_STEP: f64 = 1e-4;

/// Initial barrier weight balancing objective and barrier gradients.
fn initial_t(prog: &Program, z: &DVector<f64>) -> f64 {
    let e = evaluate(prog, z);
    let mut barrier_grad = DVector::zeros(prog.dim());
    for (g, v) in e.grads.iter().zip(&e.values) {
        barrier_grad.axpy(1.0 / -v, g, 1.0);
    }
    let nn = e.obj_grad.norm_squared();
    let m = prog.constraints.len().max(1) as f64;
    if nn == 0.0 {
        return 1.0;
    }
    let t = -e.obj_grad.dot(&barrier_grad) / nn;
    if t.is_finite() && t > 0.0 {
        t.clamp(1e-3, 1e3 * m)
    } else {
        1.0
    }
}

/// Run the barrier method from a strictly feasible `z0`.
///
/// `stop` is checked after every Newton step; returning `true` ends the run
/// with [`BarrierStatus::Stopped`].
pub fn solve(
    prog: &Program,
    z0: DVector<f64>,
    opts: &BarrierOptions,
    stop: impl Fn(&DVector<f64>) -> bool,
) -> BarrierOutcome {
    debug_assert!(prog.strictly_feasible(&z0));
    let m = prog.constraints.len() as f64;
    let n = prog.dim();
    let mut z = z0;
    let mut t = initial_t(prog, &z);
    let mut steps = 0;
    let finish = |z: DVector<f64>, t: f64, steps, status| {
        let duals = prog
            .constraints
            .iter()
            .map(|g| 1.0 / (t * -g.value(&z)))
            .collect();
        BarrierOutcome {
            z,
            duals,
            t,
            newton_steps: steps,
            status,
        }
    };

    let mut hess = DMatrix::zeros(n, n);
    loop {
        // centering
        loop {
            let e = evaluate(prog, &z);
            let mut grad = &e.obj_grad * t;
            hess.fill(0.0);
            if let Some(h) = &prog.objective.hess {
                hess.zip_apply(h, |a, b| *a = t * b);
            }
            for ((g, gv), q) in e.grads.iter().zip(&e.values).zip(&prog.constraints) {
                let inv = 1.0 / -gv;
                grad.axpy(inv, g, 1.0);
                if let Some(h) = &q.hess {
                    hess.zip_apply(h, |a, b| *a += inv * b);
                }
                hess.ger(inv * inv, g, g, 1.0);
            }
            let Some(step) = solve_spd(&hess, &(-&grad)) else {
                return finish(z, t, steps, BarrierStatus::MaxNewton);
            };
            let slope = grad.dot(&step);
            if -slope / 2.0 <= opts.newton_tol {
                break;
            }

            // Backtracking on the change in the barrier objective, evaluated
            // from the exact quadratic expansions to avoid cancellation.
            let obj_d1 = e.obj_grad.dot(&step);
            let obj_d2 = prog.objective.curvature(&step);
            let cons: Vec<(f64, f64, f64)> = e
                .values
                .iter()
                .zip(&e.grads)
                .zip(&prog.constraints)
                .map(|((v, g), q)| (*v, g.dot(&step), q.curvature(&step)))
                .collect();
            let delta_at = |s: f64| -> Option<f64> {
                let mut acc = t * (s * obj_d1 + 0.5 * s * s * obj_d2);
                for &(v, d1, d2) in &cons {
                    let rel = (s * d1 + 0.5 * s * s * d2) / v;
                    if !(rel > -1.0) {
                        return None;
                    }
                    acc -= rel.ln_1p();
                }
                Some(acc)
            };
            let mut s = 1.0;
            let accepted = loop {
                match delta_at(s) {
                    Some(d) if d <= 0.01 * s * slope => break true,
                    _ => {}
                }
                s *= 0.5;
                if s < 1e-14 {
                    break false;
                }
            };
            // A negligible step means rounding noise dominates the model.
            if !accepted || s < MIN_STEP {
                break;
            }
            let candidate = &z + &step * s;
            if !prog.strictly_feasible(&candidate) {
                break;
            }
            z = candidate;
            steps += 1;
            if stop(&z) {
                return finish(z, t, steps, BarrierStatus::Stopped);
            }
            if steps >= opts.max_newton {
                return finish(z, t, steps, BarrierStatus::MaxNewton);
            }
        }
        if m / t <= opts.gap_tol {
            return finish(z, t, steps, BarrierStatus::Converged);
        }
        t *= opts.mu;
    }
}
