//! Monte-Carlo sweep over SNR, scheme, placement strategy and rate floor.
//!
//! Realization `l` owns the substreams keyed by `(seed, l)`: its small-scale
//! draw is shared by every cell, and its random placement by every SNR and
//! scheme, so all curves are paired. Realizations run independently and
//! are folded in index order, so the output does not depend on the worker
//! count.

use std::collections::BTreeMap;

use crate::channel::{ChannelRealization, SmallScaleDraw};
use crate::error::Result;
use crate::harness::config::SweepSpec;
use crate::optimizer::{ao_optimize, AoConfig, AoResult, Init, Scheme};
use crate::parallel::{self, Execution};
use crate::placement::{
    argmax, candidate_grid, evaluate_grid, feasible_wsr, random_on_segment, statistical_placement,
    Point, Segment, Strategy,
};
use crate::rng::{Purpose, StreamKey};

/// One aggregated cell of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub strategy: Strategy,
    pub r_th: f64,
    /// Mean WSR over feasible realizations, bits/s/Hz; NaN when none were.
    pub mean_wsr: f64,
    pub stderr: f64,
    pub mean_iters: f64,
    pub infeasible: usize,
}

/// Outcome of one cell at one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub realization: usize,
    /// Fingerprint of the small-scale draw the cell was evaluated on.
    pub fingerprint: u64,
    pub snr_db: f64,
    pub scheme: Scheme,
    pub strategy: Strategy,
    pub r_th: f64,
    pub position: Point,
    /// WSR in bits/s/Hz when the rate floors were met.
    pub wsr: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Per-realization records ordered by realization index.
    pub records: Vec<Record>,
}

/// Results of every requested scheme on one channel.
type SchemeResults = Vec<(Scheme, AoResult)>;

/// Run each scheme in `schemes` on `h`. RSMA is the best of an MRT start
/// and warm starts from the SDMA and NOMA solutions.
pub fn evaluate_schemes(h: &ChannelRealization, base: &AoConfig, schemes: &[Scheme]) -> Result<SchemeResults> {
    let needs = |s: Scheme| schemes.contains(&s) || schemes.contains(&Scheme::Rsma);
    let sdma = needs(Scheme::Sdma)
        .then(|| ao_optimize(h, &base.with_scheme(Scheme::Sdma)))
        .transpose()?;
    let noma = needs(Scheme::Noma)
        .then(|| ao_optimize(h, &base.with_scheme(Scheme::Noma)))
        .transpose()?;
    let rsma = if schemes.contains(&Scheme::Rsma) {
        let cfg = base.with_scheme(Scheme::Rsma);
        let mut best = ao_optimize(h, &cfg)?;
        for warm in [&sdma, &noma].into_iter().flatten() {
            let run = ao_optimize(h, &cfg.with_init(Init::WarmStart(warm.precoder.clone())))?;
            if better(&run, &best) {
                best = run;
            }
        }
        Some(best)
    } else {
        None
    };
    let mut by_scheme = [(Scheme::Rsma, rsma), (Scheme::Sdma, sdma), (Scheme::Noma, noma)];
    Ok(schemes
        .iter()
        .filter_map(|s| {
            by_scheme
                .iter_mut()
                .find(|(k, _)| k == s)
                .and_then(|(_, r)| r.take().map(|r| (*s, r)))
        })
        .collect())
}

/// Feasible beats infeasible, then strictly higher WSR.
fn better(a: &AoResult, b: &AoResult) -> bool {
    match (feasible_wsr(a), feasible_wsr(b)) {
        (Some(x), Some(y)) => x > y,
        (Some(_), None) => true,
        _ => false,
    }
}

fn base_config(spec: &SweepSpec, snr_db: f64, r_th: f64) -> AoConfig {
    let mut cfg = AoConfig::new(Scheme::Rsma, spec.power_budget(snr_db));
    cfg.sigma2 = spec.sigma2;
    cfg.bandwidth = spec.bandwidth;
    cfg.weights = spec.weights;
    cfg.rate_floors = [r_th; 2];
    cfg
}

/// Where each fixed strategy puts the aBS for realization `l`.
fn fixed_position(spec: &SweepSpec, segment: &Segment, stat: Point, strategy: Strategy, l: usize) -> Point {
    match strategy {
        Strategy::DistAvg => segment.midpoint(),
        Strategy::ChannelStat => stat,
        Strategy::RandomOnSegment => {
            random_on_segment(segment, &mut StreamKey::new(spec.seed, l as u64, Purpose::Placement).rng())
        }
        Strategy::IterativeSearch => unreachable!("grid search has no fixed position"),
    }
}

/// All cells of realization `l`, ordered by (strategy, SNR, R_th, scheme)
/// in spec order.
pub fn run_realization(spec: &SweepSpec, l: usize) -> Result<Vec<Record>> {
    let segment = spec.segment();
    let stat = statistical_placement(&segment, &spec.env)?;
    let draw = SmallScaleDraw::sample(StreamKey::new(spec.seed, l as u64, Purpose::SmallScale), spec.antennas);
    let fingerprint = draw.fingerprint();
    let grid = if spec.strategies.contains(&Strategy::IterativeSearch) {
        candidate_grid(&segment, spec.grid_l)?
    } else {
        Vec::new()
    };

    let mut records = Vec::new();
    for &strategy in &spec.strategies {
        let fixed = (strategy != Strategy::IterativeSearch)
            .then(|| fixed_position(spec, &segment, stat, strategy, l));
        let h = fixed
            .map(|p| ChannelRealization::realize(&segment.geometry(p)?, &spec.env, &draw))
            .transpose()?;
        for &snr_db in &spec.snr_db {
            for &r_th in &spec.r_th {
                let base = base_config(spec, snr_db, r_th);
                let picks: Vec<(Scheme, Point, AoResult)> = match (&h, fixed) {
                    (Some(h), Some(p)) => evaluate_schemes(h, &base, &spec.schemes)?
                        .into_iter()
                        .map(|(s, r)| (s, p, r))
                        .collect(),
                    _ => {
                        let per_candidate = evaluate_grid(&segment, &spec.env, &grid, &draw, |h| {
                            evaluate_schemes(h, &base, &spec.schemes)
                        })?;
                        (0..spec.schemes.len())
                            .map(|i| {
                                let j = argmax(per_candidate.iter().map(|c| feasible_wsr(&c[i].1))).unwrap_or(0);
                                let (s, r) = &per_candidate[j][i];
                                (*s, grid[j], r.clone())
                            })
                            .collect()
                    }
                };
                records.extend(picks.into_iter().map(|(scheme, position, res)| Record {
                    realization: l,
                    fingerprint,
                    snr_db,
                    scheme,
                    strategy,
                    r_th,
                    position,
                    wsr: feasible_wsr(&res),
                    iterations: res.iterations,
                }));
            }
        }
    }
    Ok(records)
}

pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Result<SweepOutput> {
    spec.validate()?;
    let indices: Vec<usize> = (0..spec.realizations).collect();
    let per_realization = parallel::map(exec, &indices, |&l| run_realization(spec, l))?;
    let records: Vec<Record> = per_realization
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(SweepOutput {
        rows: aggregate(&records),
        records,
    })
}

/// Sort key of a row: SNR, scheme name, strategy name, rate floor.
pub fn row_order(a: &SweepRow, b: &SweepRow) -> std::cmp::Ordering {
    a.snr_db
        .total_cmp(&b.snr_db)
        .then_with(|| a.scheme.as_str().cmp(b.scheme.as_str()))
        .then_with(|| a.strategy.as_str().cmp(b.strategy.as_str()))
        .then_with(|| a.r_th.total_cmp(&b.r_th))
}

type CellKey = (u64, Scheme, Strategy, u64);

fn cell_key(r: &Record) -> CellKey {
    (r.snr_db.to_bits(), r.scheme, r.strategy, r.r_th.to_bits())
}

/// Mean, standard error and mean iterations over feasible records of each
/// cell, summed in record order.
pub fn aggregate(records: &[Record]) -> Vec<SweepRow> {
    let mut cells: BTreeMap<CellKey, Vec<&Record>> = BTreeMap::new();
    for r in records {
        cells.entry(cell_key(r)).or_default().push(r);
    }
    let mut rows: Vec<SweepRow> = cells
        .into_values()
        .map(|members| {
            let first = members[0];
            let solved: Vec<(f64, usize)> = members
                .iter()
                .filter_map(|r| r.wsr.map(|w| (w, r.iterations)))
                .collect();
            let n = solved.len() as f64;
            let mean = solved.iter().map(|s| s.0).sum::<f64>() / n;
            let stderr = if solved.len() > 1 {
                let var = solved.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else if solved.len() == 1 {
                0.0
            } else {
                f64::NAN
            };
            SweepRow {
                snr_db: first.snr_db,
                scheme: first.scheme,
                strategy: first.strategy,
                r_th: first.r_th,
                mean_wsr: mean,
                stderr,
                mean_iters: solved.iter().map(|s| s.1 as f64).sum::<f64>() / n,
                infeasible: members.len() - solved.len(),
            }
        })
        .collect();
    rows.sort_by(row_order);
    rows
}

/// One realization under every placement strategy: the chosen points and
/// the WSR of each scheme there.
pub fn placement_report(spec: &SweepSpec, realization: usize) -> Result<Vec<Record>> {
    let spec = SweepSpec {
        strategies: Strategy::ALL.to_vec(),
        snr_db: spec.snr_db[..1].to_vec(),
        r_th: spec.r_th[..1].to_vec(),
        ..spec.clone()
    };
    spec.validate()?;
    run_realization(&spec, realization)
}
