//! Convex precoder / common-rate subproblem solved at every alternating
//! optimization step.
//!
//! With the equalizers `f` and MSE weights `mu` held fixed, every augmented
//! WMSE is a convex quadratic in the real and imaginary parts of the
//! precoder. The subproblem
//!
//! ```text
//! minimize   sum_u v_u (x_u + zeta_u^u(P))
//! s.t.       x_1 + x_2 + 1 >= zeta_u^12(P)      u = 1, 2
//!            x_u + zeta_u^u(P) <= 1 - Rth_u     u with Rth_u > 0
//!            tr(P P^H) <= Pt
//!            x <= 0
//! ```
//!
//! is a small dense QCQP, solved here by a log-barrier method with a
//! phase-one start and certified by its KKT residual.

mod barrier;
mod nnls;
mod quad;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::USERS;
use crate::error::{Error, Result};
use crate::ratecore::{private_col, surrogate_awmse, Gains, Precoder, Streams, COMMON};

pub use barrier::BarrierOptions;
use barrier::{BarrierStatus, Program};
use quad::Quad;

/// Maximum constraint violation accepted for an `Optimal` solution.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Maximum KKT residual accepted for an `Optimal` solution.
pub const STATIONARITY_TOL: f64 = 1e-6;
/// Phase-one optimum above which the subproblem is declared infeasible.
pub const INFEASIBILITY_TOL: f64 = 1e-6;

/// Which decision variables a scheme may use. Inactive precoder columns are
/// pinned to zero and inactive common-rate variables to `x_u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLayout {
    pub common: bool,
    pub private: [bool; USERS],
    pub share: [bool; USERS],
}

impl StreamLayout {
    pub const RSMA: Self = Self {
        common: true,
        private: [true, true],
        share: [true, true],
    };

    pub const SDMA: Self = Self {
        common: false,
        private: [true, true],
        share: [false, false],
    };

    /// Superposition coding with SIC: the weak user's whole message rides
    /// on the common stream.
    pub const fn noma(weak: usize) -> Self {
        let mut private = [true, true];
        private[weak] = false;
        let mut share = [false, false];
        share[weak] = true;
        Self {
            common: true,
            private,
            share,
        }
    }

    pub fn column_active(&self, k: usize) -> bool {
        if k == COMMON {
            self.common
        } else {
            self.private[k - 1]
        }
    }

    /// The same layout with the common stream switched off.
    pub fn without_common(self) -> Self {
        Self {
            common: false,
            share: [false, false],
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.common && !self.share.iter().any(|&s| s) {
            return Err(Error::contract("an active common stream needs a share variable"));
        }
        if !self.common && self.share.iter().any(|&s| s) {
            return Err(Error::contract("share variables require the common stream"));
        }
        if !(self.common || self.private.iter().any(|&p| p)) {
            return Err(Error::contract("layout has no active stream"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemInput {
    pub gains: Gains,
    pub equalizers: Streams<Complex64>,
    pub mse_weights: Streams<f64>,
    pub user_weights: [f64; USERS],
    pub power_budget: f64,
    /// Per-user minimum total rate, bits/s/Hz.
    pub rate_floors: [f64; USERS],
    pub sigma2: f64,
    pub layout: StreamLayout,
    /// Starting precoder; scaled into the power ball if needed.
    pub hint: Option<Precoder>,
}

impl SubproblemInput {
    fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let n = self.gains[0].len();
        if n == 0 || self.gains[1].len() != n {
            return Err(Error::contract("channel vectors must share a nonzero length"));
        }
        if self.mse_weights.iter().any(|m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::contract("MSE weights must be positive and finite"));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return Err(Error::domain("power budget", self.power_budget));
        }
        if self.rate_floors.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::contract("rate floors must be nonnegative"));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::domain("sigma2", self.sigma2));
        }
        if self.user_weights.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::contract("user weights must be nonnegative"));
        }
        if let Some(h) = &self.hint {
            if h.antennas() != n {
                return Err(Error::contract("precoder hint has the wrong antenna count"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Common stream decodable at user `u`.
    CommonDecodable(usize),
    RateFloor(usize),
    Power,
    ShareNonPositive(usize),
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub precoder: Precoder,
    /// Negated common-rate shares, `x = -r`, in bits/s/Hz.
    pub x: [f64; USERS],
    pub objective: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub status: SolveStatus,
    /// Constraint multipliers, aligned with `constraints`.
    pub duals: Vec<f64>,
    pub constraints: Vec<ConstraintKind>,
    pub newton_steps: usize,
}

/// Maps the realified decision vector `z` to precoder columns and `x`.
#[derive(Debug, Clone)]
struct VarMap {
    antennas: usize,
    column: [Option<usize>; 3],
    share: [Option<usize>; USERS],
    dim: usize,
}

impl VarMap {
    fn new(antennas: usize, layout: &StreamLayout) -> Self {
        let mut next = 0;
        let mut column = [None; 3];
        for (k, slot) in column.iter_mut().enumerate() {
            if layout.column_active(k) {
                *slot = Some(next);
                next += 2 * antennas;
            }
        }
        let mut share = [None; USERS];
        for (u, slot) in share.iter_mut().enumerate() {
            if layout.share[u] {
                *slot = Some(next);
                next += 1;
            }
        }
        Self {
            antennas,
            column,
            share,
            dim: next,
        }
    }

    fn precoder_len(&self) -> usize {
        self.column.iter().flatten().count() * 2 * self.antennas
    }

    /// Gradient vectors of `Re(h^H p_k)` and `Im(h^H p_k)`.
    fn projection(&self, h: &DVector<Complex64>, k: usize) -> Option<(DVector<f64>, DVector<f64>)> {
        let base = self.column[k]?;
        let n = self.antennas;
        let mut re = DVector::zeros(self.dim);
        let mut im = DVector::zeros(self.dim);
        for i in 0..n {
            re[base + i] = h[i].re;
            re[base + n + i] = h[i].im;
            im[base + i] = -h[i].im;
            im[base + n + i] = h[i].re;
        }
        Some((re, im))
    }

    fn pack(&self, p: &Precoder, x: &[f64; USERS]) -> DVector<f64> {
        let mut z = DVector::zeros(self.dim);
        let n = self.antennas;
        for k in 0..3 {
            if let Some(base) = self.column[k] {
                for i in 0..n {
                    let c = p.matrix()[(i, k)];
                    z[base + i] = c.re;
                    z[base + n + i] = c.im;
                }
            }
        }
        for u in 0..USERS {
            if let Some(j) = self.share[u] {
                z[j] = x[u];
            }
        }
        z
    }

    fn unpack(&self, z: &DVector<f64>) -> (Precoder, [f64; USERS]) {
        let n = self.antennas;
        let mut m = DMatrix::zeros(n, 3);
        for k in 0..3 {
            if let Some(base) = self.column[k] {
                for i in 0..n {
                    m[(i, k)] = Complex64::new(z[base + i], z[base + n + i]);
                }
            }
        }
        let mut x = [0.0; USERS];
        for u in 0..USERS {
            if let Some(j) = self.share[u] {
                x[u] = z[j];
            }
        }
        (Precoder::new(m).expect("finite iterate"), x)
    }
}

/// `zeta` with fixed equalizer `f` and weight `mu` as a quadratic in `z`.
fn awmse_quad(
    map: &VarMap,
    h: &DVector<Complex64>,
    interferers: &[usize],
    desired: usize,
    f: Complex64,
    mu: f64,
    sigma2: f64,
) -> Quad {
    // The surrogate is affine in eps with slope mu / ln 2.
    let w = mu / std::f64::consts::LN_2;
    let mut q = Quad::zero(map.dim);
    let f2 = f.norm_sqr();
    for &k in interferers.iter().chain(std::iter::once(&desired)) {
        if let Some((re, im)) = map.projection(h, k) {
            q.add_abs2(w * f2, &re, &im);
        }
    }
    if let Some((re, im)) = map.projection(h, desired) {
        q.add_re(-2.0 * w, f, &re, &im);
    }
    q.c = w * (f2 * sigma2 + 1.0) + surrogate_awmse(0.0, mu);
    q
}

struct Built {
    map: VarMap,
    program: Program,
    kinds: Vec<ConstraintKind>,
}

fn build(input: &SubproblemInput) -> Built {
    let n = input.gains[0].len();
    let layout = input.layout;
    let map = VarMap::new(n, &layout);
    let mut objective = Quad::zero(map.dim);
    let mut constraints = Vec::new();
    let mut kinds = Vec::new();

    for u in 0..USERS {
        let h = &input.gains[u];
        let own = private_col(u);
        let other = private_col(1 - u);
        let private = awmse_quad(
            &map,
            h,
            &[other],
            own,
            input.equalizers.private[u],
            input.mse_weights.private[u],
            input.sigma2,
        );
        let v = input.user_weights[u];
        objective.lin.axpy(v, &private.lin, 1.0);
        objective.c += v * private.c;
        if let Some(hp) = &private.hess {
            match &mut objective.hess {
                Some(h) => *h += hp * v,
                None => objective.hess = Some(hp * v),
            }
        }
        if let Some(j) = map.share[u] {
            objective.lin[j] += v;
        }

        if layout.common {
            let mut common = awmse_quad(
                &map,
                h,
                &[own, other],
                COMMON,
                input.equalizers.common[u],
                input.mse_weights.common[u],
                input.sigma2,
            );
            common.c -= 1.0;
            for j in map.share.iter().flatten() {
                common.lin[*j] -= 1.0;
            }
            constraints.push(common);
            kinds.push(ConstraintKind::CommonDecodable(u));
        }

        // A zero floor only restates R_tot >= 0, which always holds.
        if input.rate_floors[u] > 0.0 {
            let mut floor = private;
            floor.c -= 1.0 - input.rate_floors[u];
            if let Some(j) = map.share[u] {
                floor.lin[j] += 1.0;
            }
            constraints.push(floor);
            kinds.push(ConstraintKind::RateFloor(u));
        }
    }

    let mut power = Quad::zero(map.dim);
    power.add_diag(1.0, 0..map.precoder_len());
    power.c = -input.power_budget;
    constraints.push(power);
    kinds.push(ConstraintKind::Power);

    for u in 0..USERS {
        if let Some(j) = map.share[u] {
            let mut q = Quad::zero(map.dim);
            q.lin[j] = 1.0;
            constraints.push(q);
            kinds.push(ConstraintKind::ShareNonPositive(u));
        }
    }

    Built {
        map,
        program: Program {
            objective,
            constraints,
        },
        kinds,
    }
}

/// Phase one stops once every constraint holds with this margin.
const PHASE_ONE_MARGIN: f64 = 1e-4;

/// Starting power as a fraction of the budget. Starting on the sphere
/// leaves the barrier crawling along it.
const START_POWER_FRACTION: f64 = 0.8;

/// Candidate start: the hint pulled inside the power ball, with `x` placed
/// midway inside its feasible interval when one exists.
fn starting_point(input: &SubproblemInput, built: &Built) -> DVector<f64> {
    let n = input.gains[0].len();
    let mut p = match &input.hint {
        Some(h) => h.clone(),
        None => {
            let cols = 3.0;
            let amp = (input.power_budget / (2.0 * cols * n as f64)).sqrt();
            Precoder::new(DMatrix::from_element(n, 3, Complex64::new(amp, 0.0))).expect("finite")
        }
    };
    for k in 0..3 {
        if !input.layout.column_active(k) {
            p.set_column_zero(k);
        }
    }
    let target = input.power_budget * START_POWER_FRACTION;
    let power = p.power();
    if power > target {
        p.scale((target / power).sqrt());
    }

    let z0 = built.map.pack(&p, &[0.0; USERS]);
    let prog = &built.program;
    let mut x = [0.0; USERS];
    if input.layout.common {
        // c = max_u zeta_u^12 - 1, evaluated with x = 0.
        let c = built
            .kinds
            .iter()
            .zip(&prog.constraints)
            .filter(|(k, _)| matches!(k, ConstraintKind::CommonDecodable(_)))
            .map(|(_, q)| q.value(&z0))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut bound = [0.0; USERS];
        for (kind, q) in built.kinds.iter().zip(&prog.constraints) {
            if let ConstraintKind::RateFloor(u) = *kind {
                if built.map.share[u].is_some() {
                    bound[u] = f64::min(0.0, -q.value(&z0));
                }
            }
        }
        let active: Vec<usize> = (0..USERS).filter(|&u| built.map.share[u].is_some()).collect();
        let room = active.iter().map(|&u| bound[u]).sum::<f64>() - c;
        if room > 0.0 {
            let margin = room / 2.0 / active.len() as f64;
            for &u in &active {
                x[u] = bound[u] - margin;
            }
        } else {
            for &u in &active {
                x[u] = bound[u].min(c / active.len() as f64) - 1e-3;
            }
        }
    }
    built.map.pack(&p, &x)
}

fn stationarity(prog: &Program, z: &DVector<f64>, duals: &[f64]) -> DVector<f64> {
    let mut r = prog.objective.grad(z);
    for (q, l) in prog.constraints.iter().zip(duals) {
        r.axpy(*l, &q.grad(z), 1.0);
    }
    r
}

fn residual(prog: &Program, z: &DVector<f64>, duals: &[f64]) -> f64 {
    let stat = stationarity(prog, z, duals).amax();
    let mut worst = stat;
    for (q, l) in prog.constraints.iter().zip(duals) {
        let g = q.value(z);
        worst = worst.max((l * g).abs()).max(g.max(0.0)).max((-l).max(0.0));
    }
    worst
}

/// Multipliers for a point off the central path: NNLS over the
/// near-active constraints.
fn recover_duals(prog: &Program, z: &DVector<f64>) -> Vec<f64> {
    let active: Vec<usize> = prog
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, q)| q.value(z) > -1e-6)
        .map(|(i, _)| i)
        .collect();
    let mut duals = vec![0.0; prog.constraints.len()];
    if active.is_empty() {
        return duals;
    }
    let n = prog.dim();
    let mut a = DMatrix::zeros(n, active.len());
    for (c, &i) in active.iter().enumerate() {
        a.set_column(c, &prog.constraints[i].grad(z));
    }
    let lam = nnls::nnls(&a, &(-prog.objective.grad(z)));
    for (c, &i) in active.iter().enumerate() {
        duals[i] = lam[c];
    }
    duals
}

fn finish(
    input: &SubproblemInput,
    built: &Built,
    z: DVector<f64>,
    duals: Vec<f64>,
    converged: bool,
    newton_steps: usize,
) -> SubproblemSolution {
    let prog = &built.program;
    let max_violation = prog.max_violation(&z);
    let mut duals = duals;
    let mut kkt = residual(prog, &z, &duals);
    {
        let refined = recover_duals(prog, &z);
        let r = residual(prog, &z, &refined);
        if r < kkt {
            duals = refined;
            kkt = r;
        }
    }
    let status = if converged && max_violation <= FEASIBILITY_TOL && kkt <= STATIONARITY_TOL {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    };
    let (precoder, x) = built.map.unpack(&z);
    debug_assert!(precoder.power() <= input.power_budget * (1.0 + 1e-9) || status != SolveStatus::Optimal);
    SubproblemSolution {
        precoder,
        x,
        objective: prog.objective.value(&z),
        max_violation,
        kkt_residual: kkt,
        status,
        duals,
        constraints: built.kinds.clone(),
        newton_steps,
    }
}

fn infeasible(built: &Built, z: DVector<f64>, newton_steps: usize) -> SubproblemSolution {
    let prog = &built.program;
    let (precoder, x) = built.map.unpack(&z);
    SubproblemSolution {
        precoder,
        x,
        objective: prog.objective.value(&z),
        max_violation: prog.max_violation(&z),
        kkt_residual: f64::INFINITY,
        status: SolveStatus::Infeasible,
        duals: vec![0.0; prog.constraints.len()],
        constraints: built.kinds.clone(),
        newton_steps,
    }
}

pub fn solve_subproblem(input: &SubproblemInput) -> Result<SubproblemSolution> {
    solve_subproblem_with(input, &BarrierOptions::default())
}

pub fn solve_subproblem_with(
    input: &SubproblemInput,
    opts: &BarrierOptions,
) -> Result<SubproblemSolution> {
    input.validate()?;
    let built = build(input);
    let prog = &built.program;
    let mut z = starting_point(input, &built);
    let mut steps = 0;

    if !prog.strictly_feasible(&z) {
        let n = prog.dim();
        let phase = prog.phase_one();
        let worst = prog
            .constraints
            .iter()
            .map(|q| q.value(&z))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z1 = DVector::zeros(n + 1);
        z1.rows_mut(0, n).copy_from(&z);
        z1[n] = worst + 1.0;
        let out = barrier::solve(&phase, z1, opts, |w| w[n] < -PHASE_ONE_MARGIN);
        steps += out.newton_steps;
        let s = out.z[n];
        let point = out.z.rows(0, n).into_owned();
        if s >= 0.0 {
            if out.lower_bound(&phase) > INFEASIBILITY_TOL {
                return Ok(infeasible(&built, point, steps));
            }
            // No strict interior: relax the rate constraints just past the
            // phase-one optimum and certify against the original ones. The
            // power ball always has an interior and stays exact.
            let mut relaxed = prog.clone();
            for (g, kind) in relaxed.constraints.iter_mut().zip(&built.kinds) {
                if *kind != ConstraintKind::Power {
                    g.c -= 2.0 * s + 1e-9;
                }
            }
            let out = barrier::solve(&relaxed, point, opts, |_| false);
            steps += out.newton_steps;
            let converged = out.status == BarrierStatus::Converged;
            return Ok(finish(input, &built, out.z, out.duals, converged, steps));
        }
        z = point;
    }

    let out = barrier::solve(prog, z, opts, |_| false);
    steps += out.newton_steps;
    let converged = out.status == BarrierStatus::Converged;
    Ok(finish(input, &built, out.z, out.duals, converged, steps))
}

/// KKT residual of `solution` for `input`: the largest of the Lagrangian
/// gradient norm, complementary-slackness products and constraint
/// violations, using the multipliers carried by the solution.
pub fn kkt_residual(input: &SubproblemInput, solution: &SubproblemSolution) -> Result<f64> {
    input.validate()?;
    let built = build(input);
    if solution.duals.len() != built.program.constraints.len() {
        return Err(Error::contract("solution multipliers do not match the input"));
    }
    let z = built.map.pack(&solution.precoder, &solution.x);
    Ok(residual(&built.program, &z, &solution.duals))
}

/// Subproblem objective and maximum constraint violation at `(P, x)`.
pub fn evaluate_point(input: &SubproblemInput, p: &Precoder, x: &[f64; USERS]) -> Result<(f64, f64)> {
    input.validate()?;
    let built = build(input);
    let z = built.map.pack(p, x);
    Ok((
        built.program.objective.value(&z),
        built.program.max_violation(&z),
    ))
}
