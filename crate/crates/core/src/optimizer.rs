//! Alternating WMMSE optimization of the precoder and common-rate split,
//! with SDMA and NOMA as restricted stream layouts of the same loop.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelRealization, USERS};
use crate::error::{Error, Result};
use crate::ratecore::{
    common_rate_cap, rate_report, Gains, Precoder, RateReport, RateSplit,
    WmmseState, COMMON,
};
use crate::rng::{Purpose, StreamKey};
use crate::solver::{self, SolveStatus, StreamLayout, SubproblemInput, FEASIBILITY_TOL};

/// Common-stream capacity (bits/s/Hz) below which the common stream is
/// treated as switched off. At that point the MMSE weights pin `x = 0` and
/// the common column can no longer influence the subproblem.
const COLLAPSE_CAP: f64 = 1e-10;

/// Fraction of the budget used to revive an all-zero active column of a
/// warm-start precoder.
const SEED_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Rsma,
    Sdma,
    Noma,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Rsma, Scheme::Sdma, Scheme::Noma];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Rsma => "RSMA",
            Scheme::Sdma => "SDMA",
            Scheme::Noma => "NOMA",
        }
    }

    /// Stream layout for channel `gains`.
    pub fn layout(self, gains: &Gains) -> StreamLayout {
        match self {
            Scheme::Rsma => StreamLayout::RSMA,
            Scheme::Sdma => StreamLayout::SDMA,
            Scheme::Noma => StreamLayout::noma(weak_user(gains)),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::contract(format!("unknown scheme `{s}`")))
    }
}

/// The user with the smaller channel norm; ties go to user 2.
pub fn weak_user(gains: &Gains) -> usize {
    if gains[0].norm() < gains[1].norm() {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    MrtSplit,
    /// Best final WSR over `restarts` random starting precoders.
    Random { restarts: usize, seed: u64 },
    WarmStart(Precoder),
}

#[derive(Debug, Clone)]
pub struct AoConfig {
    pub scheme: Scheme,
    /// Convergence threshold on the WSR change, bits/s/Hz.
    pub delta: f64,
    pub max_iterations: usize,
    pub init: Init,
    pub sigma2: f64,
    pub bandwidth: f64,
    pub weights: [f64; USERS],
    pub power_budget: f64,
    /// Minimum total rate per user, bits/s/Hz.
    pub rate_floors: [f64; USERS],
}

impl AoConfig {
    pub fn new(scheme: Scheme, power_budget: f64) -> Self {
        Self {
            scheme,
            delta: 1e-4,
            max_iterations: 300,
            init: Init::MrtSplit,
            sigma2: 1.0,
            bandwidth: 1.0,
            weights: [0.5, 0.5],
            power_budget,
            rate_floors: [0.0; USERS],
        }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self {
            scheme,
            ..self.clone()
        }
    }

    pub fn with_init(&self, init: Init) -> Self {
        Self {
            init,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::domain("convergence threshold", self.delta));
        }
        if self.max_iterations == 0 {
            return Err(Error::contract("max iterations must be at least 1"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::domain("sigma2", self.sigma2));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::domain("bandwidth", self.bandwidth));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return Err(Error::domain("power budget", self.power_budget));
        }
        if self.weights.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
            || !(self.weights.iter().sum::<f64>() > 0.0)
        {
            return Err(Error::contract(format!(
                "user weights {:?} must be nonnegative with a positive sum",
                self.weights
            )));
        }
        if self.rate_floors.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::contract(format!(
                "rate floors {:?} must be finite and nonnegative",
                self.rate_floors
            )));
        }
        if let Init::Random { restarts: 0, .. } = self.init {
            return Err(Error::contract("random initialization needs at least one restart"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

/// Why a run ended without converging.
#[derive(Debug, Clone, PartialEq)]
pub struct AoDiagnostics {
    /// Subproblem index (1-based) that stopped the loop.
    pub iteration: usize,
    pub solver_status: SolveStatus,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct AoResult {
    pub precoder: Precoder,
    /// Common-rate split in bits/s.
    pub split: RateSplit,
    pub report: RateReport,
    /// Number of subproblems solved and accepted.
    pub iterations: usize,
    /// WSR after every accepted iterate, starting with the initial point
    /// when it meets the rate floors.
    pub wsr_trace: Vec<f64>,
    pub status: AoStatus,
    pub layout: StreamLayout,
    pub diagnostics: Option<AoDiagnostics>,
}

impl AoResult {
    pub fn wsr(&self) -> f64 {
        self.report.wsr
    }

    pub fn is_feasible(&self) -> bool {
        self.status != AoStatus::Infeasible
    }
}

fn uniform_precoder(n: usize, power: f64) -> Precoder {
    let amp = (power / (3 * n) as f64).sqrt();
    Precoder::new(DMatrix::from_element(n, 3, Complex64::new(amp, 0.0))).expect("finite")
}

fn unit_or_none(v: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let norm = v.norm();
    (norm > 0.0 && norm.is_finite()).then(|| v / Complex64::new(norm, 0.0))
}

/// Principal eigenvector of `sum_u h_u h_u^H`, unit norm.
fn principal_direction(gains: &Gains) -> Option<DVector<Complex64>> {
    let n = gains[0].len();
    let mut cov = DMatrix::<Complex64>::zeros(n, n);
    for h in gains {
        cov += h * h.adjoint();
    }
    let eig = cov.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
    let v = eig.eigenvectors.column(idx).into_owned();
    // Fix the phase so the largest entry is real positive.
    let (_, lead) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()).then(b.0.cmp(&a.0)))?;
    let phase = lead.conj() / lead.norm();
    unit_or_none(&(v * phase))
}

/// Scale `p` down into the power ball if it exceeds `budget`.
fn into_ball(mut p: Precoder, budget: f64) -> Precoder {
    let power = p.power();
    if power > budget {
        p.scale((budget / power).sqrt());
    }
    p
}

fn mask(mut p: Precoder, layout: StreamLayout) -> Precoder {
    for k in 0..3 {
        if !layout.column_active(k) {
            p.set_column_zero(k);
        }
    }
    p
}

/// MRT-split starting precoder with every column populated.
pub fn mrt_split(gains: &Gains, power_budget: f64) -> Precoder {
    let n = gains[0].len();
    let private: Option<Vec<_>> = gains.iter().map(unit_or_none).collect();
    let (Some(private), Some(common)) = (private, principal_direction(gains)) else {
        return uniform_precoder(n, power_budget);
    };
    let c = |share: f64| Complex64::new((power_budget * share).sqrt(), 0.0);
    let cols = [common * c(0.5), &private[0] * c(0.25), &private[1] * c(0.25)];
    Precoder::from_columns(&cols).expect("finite")
}

/// Starting precoder for `layout`: inactive columns zeroed and the
/// remaining power rescaled to the full budget.
pub fn init_precoder(gains: &Gains, layout: StreamLayout, power_budget: f64) -> Precoder {
    let mut p = mask(mrt_split(gains, power_budget), layout);
    let power = p.power();
    if power > 0.0 {
        p.scale((power_budget / power).sqrt());
    }
    p
}

fn random_precoder(key: StreamKey, n: usize, layout: StreamLayout, power_budget: f64) -> Precoder {
    let mut rng = key.rng();
    let mut m = DMatrix::from_fn(n, 3, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    for k in 0..3 {
        if !layout.column_active(k) {
            m.column_mut(k).fill(Complex64::new(0.0, 0.0));
        }
    }
    let mut p = Precoder::new(m).expect("finite");
    p.scale((power_budget / p.power()).sqrt());
    p
}

/// Warm start: scale into the ball, zero inactive columns and revive
/// active columns that are identically zero along their MRT-split
/// direction.
fn warm_precoder(gains: &Gains, layout: StreamLayout, p0: &Precoder, power_budget: f64) -> Precoder {
    let mut p = mask(into_ball(p0.clone(), power_budget), layout);
    let seed = mrt_split(gains, power_budget);
    for k in 0..3 {
        if layout.column_active(k) && p.column_power(k) == 0.0 {
            let dir = seed.column(k);
            let s = (SEED_FRACTION * power_budget / dir.norm_squared()).sqrt();
            p.matrix_mut().set_column(k, &(dir * Complex64::new(s, 0.0)));
        }
    }
    into_ball(p, power_budget)
}

/// Clip `r` to the common-rate cap at `p` and hand the remaining capacity
/// to the user chosen by the layout.
fn complete_split(
    gains: &Gains,
    p: &Precoder,
    layout: StreamLayout,
    r: [f64; USERS],
    cfg: &AoConfig,
) -> Result<RateReport> {
    let mut r = r.map(|v| v.max(0.0));
    for u in 0..USERS {
        if !layout.share[u] {
            r[u] = 0.0;
        }
    }
    if layout.common {
        let cap = common_rate_cap(gains, p, cfg.sigma2, 1.0)?;
        let sum: f64 = r.iter().sum();
        if sum > cap {
            let s = if sum > 0.0 { cap / sum } else { 0.0 };
            r = r.map(|v| v * s);
        }
        let slack = (cap - r.iter().sum::<f64>()).max(0.0);
        let receiver = (0..USERS)
            .filter(|&u| layout.share[u])
            .max_by(|&a, &b| cfg.weights[a].total_cmp(&cfg.weights[b]).then(b.cmp(&a)))
            .expect("common stream has a share");
        r[receiver] += slack;
        let sum: f64 = r.iter().sum();
        if sum > cap {
            r[receiver] -= sum - cap;
            r[receiver] = r[receiver].max(0.0);
        }
    }
    let split = RateSplit(r.map(|v| v * cfg.bandwidth));
    rate_report(gains, p, &split, cfg.sigma2, cfg.bandwidth, cfg.weights)
}

fn meets_floors(report: &RateReport, cfg: &AoConfig) -> bool {
    (0..USERS).all(|u| report.total[u] / cfg.bandwidth >= cfg.rate_floors[u] - 1e-9)
}

fn check_channel(h: &ChannelRealization) -> Result<()> {
    let n = h.antennas();
    if n == 0 || h.gains.iter().any(|g| g.len() != n) {
        return Err(Error::contract("channel vectors must share a nonzero length"));
    }
    if h.gains.iter().flat_map(|g| g.iter()).any(|c| !c.is_finite()) {
        return Err(Error::contract("channel gains must be finite"));
    }
    Ok(())
}

/// Run the scheme selected by `cfg.scheme`.
pub fn ao_optimize(h: &ChannelRealization, cfg: &AoConfig) -> Result<AoResult> {
    cfg.validate()?;
    check_channel(h)?;
    let layout = cfg.scheme.layout(&h.gains);
    let n = h.antennas();
    match &cfg.init {
        Init::MrtSplit => {
            let p0 = init_precoder(&h.gains, layout, cfg.power_budget);
            run(&h.gains, layout, p0, cfg)
        }
        Init::WarmStart(p0) => {
            if p0.antennas() != n {
                return Err(Error::contract("warm-start precoder has the wrong antenna count"));
            }
            let p0 = warm_precoder(&h.gains, layout, p0, cfg.power_budget);
            run(&h.gains, layout, p0, cfg)
        }
        Init::Random { restarts, seed } => {
            let mut best: Option<AoResult> = None;
            for i in 0..*restarts {
                let key = StreamKey::new(*seed, 0, Purpose::Restart).with_element(0, i);
                let p0 = random_precoder(key, n, layout, cfg.power_budget);
                let res = run(&h.gains, layout, p0, cfg)?;
                let better = match &best {
                    None => true,
                    Some(b) => match (b.is_feasible(), res.is_feasible()) {
                        (false, true) => true,
                        (true, false) => false,
                        _ => res.wsr() > b.wsr(),
                    },
                };
                if better {
                    best = Some(res);
                }
            }
            Ok(best.expect("at least one restart"))
        }
    }
}

pub fn sdma_optimize(h: &ChannelRealization, cfg: &AoConfig) -> Result<AoResult> {
    ao_optimize(h, &cfg.with_scheme(Scheme::Sdma))
}

pub fn noma_optimize(h: &ChannelRealization, cfg: &AoConfig) -> Result<AoResult> {
    ao_optimize(h, &cfg.with_scheme(Scheme::Noma))
}

fn run(gains: &Gains, layout: StreamLayout, p0: Precoder, cfg: &AoConfig) -> Result<AoResult> {
    let mut layout = layout;
    let mut p = p0;
    // An empty split is completed to the full cap for the designated user.
    let mut current = complete_split(gains, &p, layout, [0.0; USERS], cfg)?;
    let mut trace = Vec::with_capacity(32);
    let mut feasible = meets_floors(&current, cfg);
    if feasible {
        trace.push(current.wsr);
    }
    let mut iterations = 0;
    let mut diagnostics = None;
    let mut status = AoStatus::MaxIterations;

    while iterations < cfg.max_iterations {
        if layout.common && common_rate_cap(gains, &p, cfg.sigma2, 1.0)? < COLLAPSE_CAP {
            layout = layout.without_common();
            p.set_column_zero(COMMON);
            current = complete_split(gains, &p, layout, [0.0; USERS], cfg)?;
        }
        let state = WmmseState::at(gains, &p, cfg.sigma2)?;
        let input = SubproblemInput {
            gains: gains.clone(),
            equalizers: state.equalizers,
            mse_weights: state.weights,
            user_weights: cfg.weights,
            power_budget: cfg.power_budget,
            rate_floors: cfg.rate_floors,
            sigma2: cfg.sigma2,
            layout,
            hint: Some(p.clone()),
        };
        let sol = solver::solve_subproblem(&input)?;
        let stop = |message: &str| AoDiagnostics {
            iteration: iterations + 1,
            solver_status: sol.status,
            max_violation: sol.max_violation,
            kkt_residual: sol.kkt_residual,
            message: message.to_owned(),
        };
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                if !feasible {
                    status = AoStatus::Infeasible;
                    diagnostics = Some(stop("rate floors cannot be met at this power budget"));
                } else {
                    diagnostics = Some(stop("subproblem reported infeasible at a feasible iterate"));
                }
                break;
            }
            SolveStatus::MaxIterations if sol.max_violation > FEASIBILITY_TOL => {
                if !feasible {
                    status = AoStatus::Infeasible;
                }
                diagnostics = Some(stop("subproblem stopped at an infeasible iterate"));
                break;
            }
            SolveStatus::MaxIterations => {}
        }

        let next_p = mask(into_ball(sol.precoder.clone(), cfg.power_budget), layout);
        let r = sol.x.map(|x| -x);
        let next = complete_split(gains, &next_p, layout, r, cfg)?;
        if sol.status != SolveStatus::Optimal
            && feasible
            && next.wsr < current.wsr
        {
            diagnostics = Some(stop("subproblem stalled without improving the WSR"));
            break;
        }
        iterations += 1;
        let previous = trace.last().copied();
        p = next_p;
        current = next;
        feasible = feasible || meets_floors(&current, cfg);
        trace.push(current.wsr);
        if let Some(prev) = previous {
            if (current.wsr - prev).abs() <= cfg.delta {
                status = AoStatus::Converged;
                break;
            }
        }
    }
    if !feasible && status != AoStatus::Infeasible {
        status = AoStatus::Infeasible;
    }
    Ok(AoResult {
        precoder: p,
        split: RateSplit(current.common_share),
        report: current,
        iterations,
        wsr_trace: trace,
        status,
        layout,
        diagnostics,
    })
}
