//! Acceptance suite. Prints one PASS, FAIL or VOID line per criterion and
//! exits nonzero when any criterion fails. VOID means every comparison of
//! the criterion fell in a cell with more than half of its realizations
//! infeasible.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rsma_uav::channel::{plos, sample_small_scale, ChannelRealization, EnvironmentParams, USERS};
use rsma_uav::harness::config::SweepSpec;
use rsma_uav::harness::oracle;
use rsma_uav::harness::sweep::{run_sweep, SweepRow};
use rsma_uav::harness::table;
use rsma_uav::optimizer::{ao_optimize, AoConfig, AoStatus, Scheme};
use rsma_uav::parallel::Execution;
use rsma_uav::placement::{laguerre_half, Strategy};
use rsma_uav::ratecore::{Gains, Precoder, WmmseState};
use rsma_uav::rng::{Purpose, StreamKey};
use rsma_uav::solver::{evaluate_point, solve_subproblem, StreamLayout, SubproblemInput, FEASIBILITY_TOL};

const SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    Void,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn judge(ok: bool, detail: impl Into<String>) -> Self {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        Self {
            verdict,
            detail: detail.into(),
        }
    }
}

/// Folds comparisons that may be void into one verdict.
#[derive(Default)]
struct Ledger {
    checked: usize,
    void: usize,
    failures: Vec<String>,
}

impl Ledger {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn skip(&mut self) {
        self.void += 1;
    }

    fn outcome(self) -> Outcome {
        let verdict = if !self.failures.is_empty() {
            Verdict::Fail
        } else if self.checked == 0 {
            Verdict::Void
        } else {
            Verdict::Pass
        };
        let mut detail = format!("{} comparisons, {} void", self.checked, self.void);
        if let Some(first) = self.failures.first() {
            detail.push_str(&format!(", {} failed, first: {first}", self.failures.len()));
        }
        Outcome { verdict, detail }
    }
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gains(rng: &mut ChaCha8Rng, n: usize) -> Gains {
    [DVector::from_fn(n, |_, _| cn(rng)), DVector::from_fn(n, |_, _| cn(rng))]
}

fn rng(criterion: u64) -> ChaCha8Rng {
    StreamKey::new(7_000 + criterion, 0, Purpose::Validation).rng()
}

/// `|sum_i conj(h_i) p_i|^2`, written out element by element.
fn gain_sq(h: &DVector<Complex64>, p: &DMatrix<Complex64>, col: usize) -> f64 {
    (0..h.len())
        .map(|i| h[i].conj() * p[(i, col)])
        .sum::<Complex64>()
        .norm_sqr()
}

fn identity() -> Outcome {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    let mut streams = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let h = gains(&mut rng, n);
        let scale = 10f64.powf(rng.random_range(-1.0..1.5));
        let m = DMatrix::from_fn(n, 3, |_, _| cn(&mut rng) * scale);
        let sigma2 = 10f64.powf(rng.random_range(-2.0..2.0));
        let zeta = WmmseState::at(&h, &Precoder::new(m.clone()).unwrap(), sigma2)
            .unwrap()
            .awmse;
        for u in 0..USERS {
            let (own, other) = (1 + u, 2 - u);
            let c = gain_sq(&h[u], &m, 0);
            let a = gain_sq(&h[u], &m, own);
            let b = gain_sq(&h[u], &m, other);
            let common_rate = (1.0 + c / (a + b + sigma2)).log2();
            let private_rate = (1.0 + a / (b + sigma2)).log2();
            worst = worst
                .max((zeta.common[u] - (1.0 - common_rate)).abs())
                .max((zeta.private[u] - (1.0 - private_rate)).abs());
            streams += 2;
        }
    }
    Outcome::judge(worst <= 1e-9, format!("{streams} streams, max |zeta - (1 - R)| = {worst:.2e}"))
}

fn monotonicity() -> Outcome {
    let mut rng = rng(2);
    let channels: Vec<ChannelRealization> = (0..100)
        .map(|_| ChannelRealization::from_gains(gains(&mut rng, 4)).unwrap())
        .collect();
    let (mut runs, mut monotone, mut converged) = (0, 0, 0);
    let mut first_break = None;
    for h in &channels {
        for snr_db in [0.0, 10.0, 20.0, 30.0] {
            for scheme in Scheme::ALL {
                let res = ao_optimize(h, &AoConfig::new(scheme, 10f64.powf(snr_db / 10.0))).unwrap();
                runs += 1;
                if res.wsr_trace.windows(2).all(|w| w[1] >= w[0] - SLACK) {
                    monotone += 1;
                } else if first_break.is_none() {
                    first_break = Some(format!("{scheme} at {snr_db} dB"));
                }
                if res.status == AoStatus::Converged && res.iterations <= 300 {
                    converged += 1;
                }
            }
        }
    }
    let mut detail = format!("{monotone}/{runs} monotone, {converged}/{runs} converged within 300");
    if let Some(b) = first_break {
        detail.push_str(&format!(", first break: {b}"));
    }
    Outcome::judge(monotone == runs && converged * 100 >= runs * 95, detail)
}

fn paper_spec() -> SweepSpec {
    SweepSpec {
        snr_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
        r_th: vec![0.0, 0.5],
        strategies: vec![Strategy::DistAvg],
        realizations: 100,
        ..SweepSpec::default()
    }
}

type Cells = BTreeMap<(u64, Scheme, Strategy, u64), SweepRow>;

fn cells(rows: &[SweepRow]) -> Cells {
    rows.iter()
        .map(|r| ((r.snr_db.to_bits(), r.scheme, r.strategy, r.r_th.to_bits()), r.clone()))
        .collect()
}

fn cell(cells: &Cells, snr: f64, scheme: Scheme, strategy: Strategy, r_th: f64) -> &SweepRow {
    &cells[&(snr.to_bits(), scheme, strategy, r_th.to_bits())]
}

/// Usable when at most half of the realizations were infeasible.
fn usable(row: &SweepRow, realizations: usize) -> bool {
    row.infeasible * 2 <= realizations && row.mean_wsr.is_finite()
}

fn orderings_at_zero_floor(spec: &SweepSpec, cells: &Cells) -> Outcome {
    let mut ledger = Ledger::default();
    let at = |snr, scheme| cell(cells, snr, scheme, Strategy::DistAvg, 0.0);
    let n = spec.realizations;
    for &snr in &spec.snr_db {
        let rsma = at(snr, Scheme::Rsma);
        for base in [Scheme::Sdma, Scheme::Noma] {
            let other = at(snr, base);
            if usable(rsma, n) && usable(other, n) {
                ledger.check(rsma.mean_wsr >= other.mean_wsr - SLACK, || {
                    format!("RSMA {} < {base} {} at {snr} dB", rsma.mean_wsr, other.mean_wsr)
                });
            } else {
                ledger.skip();
            }
        }
    }
    for snr in [25.0, 30.0] {
        let (sdma, noma) = (at(snr, Scheme::Sdma), at(snr, Scheme::Noma));
        if usable(sdma, n) && usable(noma, n) {
            ledger.check(sdma.mean_wsr >= noma.mean_wsr, || {
                format!("SDMA {} < NOMA {} at {snr} dB", sdma.mean_wsr, noma.mean_wsr)
            });
        } else {
            ledger.skip();
        }
    }
    let gap = |snr| at(snr, Scheme::Rsma).mean_wsr - at(snr, Scheme::Noma).mean_wsr;
    let (g5, g30) = (gap(5.0), gap(30.0));
    if g5.is_finite() && g30.is_finite() {
        ledger.check(g30 > g5, || format!("RSMA-NOMA gap {g30} at 30 dB <= {g5} at 5 dB"));
    } else {
        ledger.skip();
    }
    ledger.outcome()
}

fn orderings_at_floor(spec: &SweepSpec, cells: &Cells) -> Outcome {
    let mut ledger = Ledger::default();
    let n = spec.realizations;
    let at = |snr, scheme, r_th| cell(cells, snr, scheme, Strategy::DistAvg, r_th);
    for snr in [0.0, 5.0] {
        let (noma, sdma) = (at(snr, Scheme::Noma, 0.5), at(snr, Scheme::Sdma, 0.5));
        if usable(noma, n) && usable(sdma, n) {
            ledger.check(noma.mean_wsr >= sdma.mean_wsr, || {
                format!("NOMA {} < SDMA {} at {snr} dB", noma.mean_wsr, sdma.mean_wsr)
            });
        } else {
            ledger.skip();
        }
    }
    for &snr in &spec.snr_db {
        for scheme in Scheme::ALL {
            let (floor, free) = (at(snr, scheme, 0.5), at(snr, scheme, 0.0));
            if usable(floor, n) && usable(free, n) {
                ledger.check(floor.mean_wsr <= free.mean_wsr + SLACK, || {
                    format!("{scheme} at {snr} dB: {} with floor > {} without", floor.mean_wsr, free.mean_wsr)
                });
            } else {
                ledger.skip();
            }
        }
    }
    let infeasible: usize = spec
        .snr_db
        .iter()
        .flat_map(|&snr| Scheme::ALL.map(|s| at(snr, s, 0.5).infeasible))
        .sum();
    let mut out = ledger.outcome();
    out.detail
        .push_str(&format!(", {infeasible} infeasible realizations excluded at R_th=0.5"));
    out
}

fn placements() -> Outcome {
    let spec = SweepSpec {
        snr_db: vec![20.0],
        r_th: vec![0.0],
        strategies: Strategy::ALL.to_vec(),
        realizations: 100,
        grid_l: 100,
        ..SweepSpec::default()
    };
    let out = run_sweep(&spec, Execution::Parallel).unwrap();
    let cells = cells(&out.rows);
    let at = |scheme, strategy| cell(&cells, 20.0, scheme, strategy, 0.0);
    let n = spec.realizations;
    let mut ledger = Ledger::default();
    let compare = |ledger: &mut Ledger, hi: &SweepRow, lo: &SweepRow| {
        if usable(hi, n) && usable(lo, n) {
            ledger.check(hi.mean_wsr >= lo.mean_wsr - SLACK, || {
                format!(
                    "{}/{} {} < {}/{} {}",
                    hi.scheme, hi.strategy, hi.mean_wsr, lo.scheme, lo.strategy, lo.mean_wsr
                )
            });
        } else {
            ledger.skip();
        }
    };
    for scheme in Scheme::ALL {
        let random = at(scheme, Strategy::RandomOnSegment);
        compare(&mut ledger, at(scheme, Strategy::IterativeSearch), random);
        compare(&mut ledger, random, at(scheme, Strategy::DistAvg));
        compare(&mut ledger, random, at(scheme, Strategy::ChannelStat));
    }
    for strategy in Strategy::ALL {
        compare(&mut ledger, at(Scheme::Rsma, strategy), at(Scheme::Sdma, strategy));
        compare(&mut ledger, at(Scheme::Rsma, strategy), at(Scheme::Noma, strategy));
    }
    ledger.outcome()
}

fn solver_oracle() -> Outcome {
    let mut rng = rng(6);
    let mut worst_gap: f64 = 0.0;
    let mut worst_violation: f64 = 0.0;
    let mut consistent = true;
    for i in 0..50 {
        let h = gains(&mut rng, 1);
        let budget: f64 = rng.random_range(0.5..10.0);
        let p = Precoder::new(DMatrix::from_fn(1, 3, |_, _| cn(&mut rng) * (budget / 3.0).sqrt())).unwrap();
        let state = WmmseState::at(&h, &p, 1.0).unwrap();
        let w: f64 = rng.random_range(0.1..0.9);
        let layout = [StreamLayout::RSMA, StreamLayout::SDMA][i % 2];
        let input = SubproblemInput {
            gains: h,
            equalizers: state.equalizers,
            mse_weights: state.weights,
            user_weights: [w, 1.0 - w],
            power_budget: budget,
            rate_floors: [0.0; USERS],
            sigma2: 1.0,
            layout,
            hint: None,
        };
        let sol = solve_subproblem(&input).unwrap();
        let gap = oracle::brute_force(&input, 9, i as u64).map_or(f64::INFINITY, |r| (sol.objective - r.objective).abs());
        // Re-evaluate the returned point through the constraint set, and
        // check the power budget directly on the precoder.
        let (objective, violation) = evaluate_point(&input, &sol.precoder, &sol.x).unwrap();
        let power_excess = (sol.precoder.power() - budget).max(0.0);
        let share_excess = sol.x.iter().fold(0.0f64, |m, x| m.max(*x));
        consistent &= (objective - sol.objective).abs() <= 1e-9 * objective.abs().max(1.0);
        worst_gap = worst_gap.max(gap);
        worst_violation = worst_violation
            .max(sol.max_violation)
            .max(violation)
            .max(power_excess)
            .max(share_excess);
    }
    Outcome::judge(
        worst_gap <= 1e-3 && worst_violation <= FEASIBILITY_TOL && consistent,
        format!("50 instances, max objective gap {worst_gap:.2e}, max violation {worst_violation:.2e}"),
    )
}

fn channel_statistics() -> Outcome {
    let mut rng = rng(7);
    let mut failures = Vec::new();
    let mut moments = Vec::new();
    for k in [0.0, 3.16, 31.6] {
        let samples = 100_000;
        let power: f64 = (0..samples)
            .map(|_| sample_small_scale(k, &mut rng).unwrap().norm_sqr())
            .sum();
        let mean = power / samples as f64;
        moments.push(format!("K={k}: {mean:.4}"));
        if (mean - 1.0).abs() > 0.05 {
            failures.push(format!("E|g|^2 = {mean} at K={k}"));
        }
    }
    let env = EnvironmentParams::default();
    let curve: Vec<f64> = (0..1000)
        .map(|i| plos(std::f64::consts::FRAC_PI_2 * i as f64 / 999.0, env.plos_a, env.plos_b).unwrap())
        .collect();
    if !curve.windows(2).all(|w| w[1] >= w[0]) {
        failures.push("P_LoS not monotone".into());
    }
    let worst = (0..=2000)
        .map(|i| -20.0 * i as f64 / 2000.0)
        .map(|x| (laguerre_half(x).unwrap() - oracle::laguerre_half_kummer(x)).abs())
        .fold(0.0f64, f64::max);
    if worst > 1e-9 {
        failures.push(format!("laguerre gap {worst:e}"));
    }
    let mut detail = format!("{}, laguerre max gap {worst:.2e}", moments.join(", "));
    if let Some(f) = failures.first() {
        detail.push_str(&format!(", first failure: {f}"));
    }
    Outcome::judge(failures.is_empty(), detail)
}

fn determinism(spec: &SweepSpec, reference: &str) -> Outcome {
    let runs = [
        ("sequential", Execution::Sequential),
        ("all workers", Execution::Parallel),
        ("2 workers", Execution::ParallelWith(NonZeroUsize::new(2).unwrap())),
    ];
    let mut mismatched = Vec::new();
    for (name, exec) in runs {
        let csv = table::render(&run_sweep(spec, exec).unwrap().rows);
        if csv != reference {
            mismatched.push(name);
        }
    }
    let detail = if mismatched.is_empty() {
        format!("{} bytes identical across 4 runs", reference.len())
    } else {
        format!("differs under {}", mismatched.join(", "))
    };
    Outcome::judge(mismatched.is_empty(), detail)
}

fn report(id: u8, limit: Option<Duration>, run: impl FnOnce() -> Outcome) -> Verdict {
    let start = Instant::now();
    let mut out = run();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit && out.verdict != Verdict::Fail {
            out.verdict = Verdict::Fail;
            out.detail.push_str(&format!(", over the {limit:?} limit"));
        }
    }
    let tag = match out.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Void => "VOID",
    };
    println!("criterion {id}: {tag} ({}; {:.1} s)", out.detail, elapsed.as_secs_f64());
    out.verdict
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let spec = paper_spec();
    let mut verdicts = vec![
        report(1, Some(secs(10)), identity),
        report(2, Some(secs(300)), monotonicity),
    ];

    let start = Instant::now();
    let sweep = run_sweep(&spec, Execution::Sequential).unwrap();
    let sweep_time = start.elapsed();
    let reference = table::render(&sweep.rows);
    let cells = cells(&sweep.rows);
    verdicts.push(report(3, Some(secs(1200).saturating_sub(sweep_time)), || {
        let mut out = orderings_at_zero_floor(&spec, &cells);
        out.detail.push_str(&format!(", sweep {:.1} s single worker", sweep_time.as_secs_f64()));
        out
    }));
    verdicts.push(report(4, None, || orderings_at_floor(&spec, &cells)));
    verdicts.push(report(5, Some(secs(2700)), placements));
    verdicts.push(report(6, Some(secs(120)), solver_oracle));
    verdicts.push(report(7, None, channel_statistics));
    verdicts.push(report(8, None, || determinism(&spec, &reference)));

    if verdicts.contains(&Verdict::Fail) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
