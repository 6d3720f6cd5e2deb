use std::collections::BTreeMap;

use rsma_uav::channel::{ChannelRealization, SmallScaleDraw};
use rsma_uav::harness::config::SweepSpec;
use rsma_uav::harness::sweep::{evaluate_schemes, run_sweep, Record};
use rsma_uav::harness::table;
use rsma_uav::optimizer::{AoConfig, Scheme};
use rsma_uav::parallel::Execution;
use rsma_uav::placement::Strategy;
use rsma_uav::rng::{Purpose, StreamKey};

fn small_spec() -> SweepSpec {
    SweepSpec {
        snr_db: vec![10.0, 25.0],
        r_th: vec![0.0, 0.01],
        strategies: vec![Strategy::DistAvg, Strategy::RandomOnSegment, Strategy::IterativeSearch],
        realizations: 4,
        grid_l: 5,
        seed: 99,
        ..SweepSpec::default()
    }
}

#[test]
fn cells_at_one_realization_share_a_draw() {
    let out = run_sweep(&small_spec(), Execution::Sequential).unwrap();
    let mut by_realization: BTreeMap<usize, Vec<&Record>> = BTreeMap::new();
    for r in &out.records {
        by_realization.entry(r.realization).or_default().push(r);
    }
    assert_eq!(by_realization.len(), 4);
    let spec = small_spec();
    for (l, records) in by_realization {
        let expected = SmallScaleDraw::sample(StreamKey::new(spec.seed, l as u64, Purpose::SmallScale), spec.antennas)
            .fingerprint();
        assert!(records.iter().all(|r| r.fingerprint == expected));
        // Random placement is drawn once per realization.
        let random: Vec<_> = records
            .iter()
            .filter(|r| r.strategy == Strategy::RandomOnSegment)
            .map(|r| r.position)
            .collect();
        assert!(random.windows(2).all(|w| w[0] == w[1]));
    }
    let prints: Vec<u64> = out.records.iter().map(|r| r.fingerprint).collect();
    assert!(prints.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn aggregates_match_independent_reaggregation_of_log() {
    let out = run_sweep(&small_spec(), Execution::Sequential).unwrap();
    let log = table::render_records(&out.records);
    let mut cells: BTreeMap<(String, String, String, String), Vec<Option<f64>>> = BTreeMap::new();
    for line in log.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let wsr = (!f[9].is_empty()).then(|| f[9].parse::<f64>().unwrap());
        cells
            .entry((f[2].into(), f[3].into(), f[4].into(), f[5].into()))
            .or_default()
            .push(wsr);
    }
    assert_eq!(cells.len(), out.rows.len());
    let mut checked = 0;
    for row in &out.rows {
        let key = (
            format!("{:?}", row.snr_db),
            row.scheme.to_string(),
            row.strategy.to_string(),
            format!("{:?}", row.r_th),
        );
        let values = &cells[&key];
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        assert_eq!(row.infeasible, values.len() - ok.len());
        if ok.len() < 2 {
            assert_eq!(row.mean_wsr.is_nan(), ok.is_empty());
            continue;
        }
        checked += 1;
        let n = ok.len() as f64;
        let mean = ok.iter().sum::<f64>() / n;
        let sd = (ok.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((row.mean_wsr - mean).abs() <= 1e-12, "{row:?}");
        assert!((row.stderr - sd / n.sqrt()).abs() <= 1e-12, "{row:?}");
    }
    assert!(checked * 2 > out.rows.len());
}

#[test]
fn worker_count_does_not_change_output() {
    let spec = small_spec();
    let seq = run_sweep(&spec, Execution::Sequential).unwrap();
    for exec in [Execution::Parallel, Execution::from_jobs(Some(3))] {
        let par = run_sweep(&spec, exec).unwrap();
        assert_eq!(table::render(&par.rows), table::render(&seq.rows));
        assert_eq!(par.records, seq.records);
    }
}

#[test]
fn single_realization_mean_is_that_run() {
    let spec = SweepSpec {
        snr_db: vec![20.0],
        schemes: vec![Scheme::Sdma],
        realizations: 1,
        seed: 5,
        ..SweepSpec::default()
    };
    let out = run_sweep(&spec, Execution::Sequential).unwrap();
    assert_eq!(out.rows.len(), 1);
    let segment = spec.segment();
    let draw = SmallScaleDraw::sample(StreamKey::new(5, 0, Purpose::SmallScale), spec.antennas);
    let h = ChannelRealization::realize(&segment.geometry(segment.midpoint()).unwrap(), &spec.env, &draw).unwrap();
    let mut cfg = AoConfig::new(Scheme::Sdma, spec.power_budget(20.0));
    cfg.weights = spec.weights;
    let runs = evaluate_schemes(&h, &cfg, &[Scheme::Sdma]).unwrap();
    assert_eq!(out.rows[0].mean_wsr, runs[0].1.wsr());
    assert_eq!(out.rows[0].stderr, 0.0);
    assert_eq!(out.rows[0].mean_iters, runs[0].1.iterations as f64);
}

#[test]
fn rsma_is_never_below_its_baselines() {
    let mut spec = SweepSpec {
        snr_db: vec![0.0, 30.0],
        realizations: 6,
        ..SweepSpec::default()
    };
    spec.env.beta0 = 5000.0;
    let out = run_sweep(&spec, Execution::Sequential).unwrap();
    for l in 0..spec.realizations {
        for snr in &spec.snr_db {
            let wsr = |s: Scheme| {
                out.records
                    .iter()
                    .find(|r| r.realization == l && r.snr_db == *snr && r.scheme == s)
                    .and_then(|r| r.wsr)
                    .unwrap()
            };
            let rsma = wsr(Scheme::Rsma);
            assert!(rsma >= wsr(Scheme::Sdma) - 1e-6 && rsma >= wsr(Scheme::Noma) - 1e-6);
        }
    }
}

#[test]
fn infeasible_floors_are_counted_not_fatal() {
    let spec = SweepSpec {
        snr_db: vec![0.0],
        r_th: vec![5.0],
        realizations: 3,
        ..SweepSpec::default()
    };
    let out = run_sweep(&spec, Execution::Sequential).unwrap();
    assert!(out.rows.iter().all(|r| r.infeasible == 3 && r.mean_wsr.is_nan()));
    let csv = table::render(&out.rows);
    assert!(csv.lines().skip(1).all(|l| l.contains(",nan,nan,nan,3")), "{csv}");
}
