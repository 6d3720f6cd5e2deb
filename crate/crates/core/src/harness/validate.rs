//! Self-check suite run by `rsma-uav validate`.
//!
//! Each check draws its inputs from keyed substreams, so a run is
//! reproducible. The rate side of the rate/WMSE identity goes through a
//! replaceable SINR function, which lets a test inject a faulty SINR and
//! confirm the identity check catches it.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{plos, sample_small_scale, ChannelRealization, EnvironmentParams, USERS};
use crate::error::Result;
use crate::harness::oracle;
use crate::optimizer::{ao_optimize, AoConfig, AoStatus, Scheme};
use crate::placement::{laguerre_half, statistical_placement, Segment};
use crate::ratecore::{rate, sinr, Gains, Precoder, Streams, WmmseState};
use crate::rng::{Purpose, StreamKey};
use crate::solver::{solve_subproblem, StreamLayout, SubproblemInput, FEASIBILITY_TOL};

/// SINR of every stream for `(h, P, sigma^2)`.
pub type SinrFn = fn(&Gains, &Precoder, f64) -> Result<Streams<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    /// First failing case, if any.
    pub detail: Option<String>,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.ok() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<22} {}/{}", self.name, self.passed, self.total)?;
        if let Some(d) = &self.detail {
            write!(f, "  ({d})")?;
        }
        Ok(())
    }
}

/// Tally of a check: counts cases and keeps the first failure.
#[derive(Default)]
struct Tally {
    passed: usize,
    total: usize,
    detail: Option<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        } else if self.detail.is_none() {
            self.detail = Some(what());
        }
    }

    fn finish(self, name: &'static str) -> CheckOutcome {
        CheckOutcome {
            name,
            passed: self.passed,
            total: self.total,
            detail: self.detail,
        }
    }
}

pub struct Validator {
    sinr: SinrFn,
    seed: u64,
}

impl Default for Validator {
    fn default() -> Self {
        Self { sinr, seed: 2024 }
    }
}

type Check = fn(&Validator) -> Result<CheckOutcome>;

/// Every check, in report order.
pub const CHECKS: [(&str, Check); 6] = [
    ("rate_wmmse_identity", Validator::rate_wmmse_identity),
    ("ao_monotonicity", Validator::ao_monotonicity),
    ("solver_oracle", Validator::solver_oracle),
    ("channel_moments", Validator::channel_moments),
    ("laguerre_series", Validator::laguerre_series),
    ("placement_symmetry", Validator::placement_symmetry),
];

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gains(rng: &mut ChaCha8Rng, n: usize) -> Gains {
    [DVector::from_fn(n, |_, _| cn(rng)), DVector::from_fn(n, |_, _| cn(rng))]
}

impl Validator {
    pub fn with_sinr(sinr: SinrFn) -> Self {
        Self { sinr, ..Self::default() }
    }

    fn rng(&self, check: usize) -> ChaCha8Rng {
        StreamKey::new(self.seed, check as u64, Purpose::Validation).rng()
    }

    pub fn run(&self) -> Result<Vec<CheckOutcome>> {
        CHECKS.iter().map(|(_, check)| check(self)).collect()
    }

    /// `zeta = 1 - R` at the MMSE point for every stream of 1000 random
    /// instances, within 1e-9.
    pub fn rate_wmmse_identity(&self) -> Result<CheckOutcome> {
        let mut rng = self.rng(0);
        let mut tally = Tally::default();
        for _ in 0..1000 {
            let n = rng.random_range(1..=6);
            let h = gains(&mut rng, n);
            let scale = 10f64.powf(rng.random_range(-1.0..1.5));
            let p = Precoder::new(DMatrix::from_fn(n, 3, |_, _| cn(&mut rng) * scale))?;
            let sigma2 = 10f64.powf(rng.random_range(-2.0..2.0));
            let zeta = WmmseState::at(&h, &p, sigma2)?.awmse;
            let gamma = (self.sinr)(&h, &p, sigma2)?;
            for (z, g) in zeta.iter().zip(gamma.iter()) {
                let gap = (z - (1.0 - rate(g, 1.0))).abs();
                tally.record(gap <= 1e-9, || format!("gap {gap:e} at sigma2 {sigma2:e}"));
            }
        }
        Ok(tally.finish("rate_wmmse_identity"))
    }

    /// Non-decreasing WSR traces on unit-gain random channels.
    pub fn ao_monotonicity(&self) -> Result<CheckOutcome> {
        let mut rng = self.rng(1);
        let mut tally = Tally::default();
        for snr_db in [0.0, 10.0, 20.0, 30.0] {
            for _ in 0..5 {
                let h = ChannelRealization::from_gains(gains(&mut rng, 4))?;
                for scheme in Scheme::ALL {
                    let res = ao_optimize(&h, &AoConfig::new(scheme, 10f64.powf(snr_db / 10.0)))?;
                    let monotone = res.wsr_trace.windows(2).all(|w| w[1] >= w[0] - 1e-6);
                    tally.record(monotone && res.status != AoStatus::Infeasible, || {
                        format!("{scheme} at {snr_db} dB: {:?}", res.status)
                    });
                }
            }
        }
        Ok(tally.finish("ao_monotonicity"))
    }

    /// Single-antenna subproblems against the grid-plus-polish oracle.
    pub fn solver_oracle(&self) -> Result<CheckOutcome> {
        let mut rng = self.rng(2);
        let mut tally = Tally::default();
        for i in 0..8 {
            let h = gains(&mut rng, 1);
            let budget: f64 = rng.random_range(0.5..10.0);
            let p = Precoder::new(DMatrix::from_fn(1, 3, |_, _| cn(&mut rng) * (budget / 3.0).sqrt()))?;
            let state = WmmseState::at(&h, &p, 1.0)?;
            let w = rng.random::<f64>();
            let input = SubproblemInput {
                gains: h,
                equalizers: state.equalizers,
                mse_weights: state.weights,
                user_weights: [w, 1.0 - w],
                power_budget: budget,
                rate_floors: [0.0; USERS],
                sigma2: 1.0,
                layout: StreamLayout::RSMA,
                hint: None,
            };
            let sol = solve_subproblem(&input)?;
            let reference = oracle::brute_force(&input, 9, i);
            let gap = reference.map_or(f64::INFINITY, |r| (sol.objective - r.objective).abs());
            tally.record(gap <= 1e-3 && sol.max_violation <= FEASIBILITY_TOL, || {
                format!("objective gap {gap:e}, violation {:e}", sol.max_violation)
            });
        }
        Ok(tally.finish("solver_oracle"))
    }

    /// Unit mean power of Rician draws and a monotone LoS probability.
    pub fn channel_moments(&self) -> Result<CheckOutcome> {
        let mut rng = self.rng(3);
        let mut tally = Tally::default();
        for k in [0.0, 3.16, 31.6] {
            let samples = 100_000;
            let mut power = 0.0;
            for _ in 0..samples {
                power += sample_small_scale(k, &mut rng)?.norm_sqr();
            }
            let mean = power / samples as f64;
            tally.record((mean - 1.0).abs() <= 0.05, || format!("K={k}: E|g|^2 = {mean}"));
        }
        let env = EnvironmentParams::default();
        let grid: Vec<f64> = (0..1000)
            .map(|i| plos(std::f64::consts::FRAC_PI_2 * i as f64 / 999.0, env.plos_a, env.plos_b))
            .collect::<Result<_>>()?;
        let monotone = grid.windows(2).all(|w| w[1] >= w[0]);
        tally.record(monotone, || "P_LoS decreases somewhere".into());
        Ok(tally.finish("channel_moments"))
    }

    /// `L_{1/2}` against the Kummer-series reference on [-20, 0].
    pub fn laguerre_series(&self) -> Result<CheckOutcome> {
        let mut tally = Tally::default();
        for i in 0..=400 {
            let x = -20.0 * i as f64 / 400.0;
            let gap = (laguerre_half(x)? - oracle::laguerre_half_kummer(x)).abs();
            tally.record(gap <= 1e-9, || format!("x={x}: gap {gap:e}"));
        }
        Ok(tally.finish("laguerre_series"))
    }

    /// Statistical placement of arbitrary user pairs lands at the midpoint,
    /// and swapping the users does not move it.
    pub fn placement_symmetry(&self) -> Result<CheckOutcome> {
        let mut rng = self.rng(5);
        let env = EnvironmentParams::default();
        let mut tally = Tally::default();
        for _ in 0..50 {
            let mut user = || [rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0), 0.0];
            let users = [user(), user()];
            let z = rng.random_range(10.0..120.0);
            let s = Segment::new(users, z)?;
            let swapped = Segment::new([users[1], users[0]], z)?;
            let w = statistical_placement(&s, &env)?;
            let v = statistical_placement(&swapped, &env)?;
            let m = s.midpoint();
            let err = (w[0] - m[0]).hypot(w[1] - m[1]).max((w[0] - v[0]).hypot(w[1] - v[1]));
            tally.record(err <= 1e-9 && w[2] == z, || format!("off by {err:e} m"));
        }
        Ok(tally.finish("placement_symmetry"))
    }
}
