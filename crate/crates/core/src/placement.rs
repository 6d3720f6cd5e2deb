//! aBS placement strategies on the segment between the two ground users.
//!
//! Fixed strategies (midpoint, channel statistics, uniform random point)
//! return one position per realization. The grid search evaluates `L`
//! equidistant candidates on a single small-scale draw and keeps the best.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::channel::{ChannelRealization, EnvironmentParams, Geometry, SmallScaleDraw, USERS};
use crate::error::{Error, Result};
use crate::optimizer::{ao_optimize, AoConfig, AoResult, AoStatus};
use crate::rng::{Purpose, StreamKey};

/// Largest Bessel argument evaluated by the power series; the asymptotic
/// expansion takes over beyond it.
const SERIES_LIMIT: f64 = 25.0;

const FIXED_POINT_TOL: f64 = 1e-6;
const FIXED_POINT_ITERS: usize = 50;

pub type Point = [f64; 3];

/// Placement strategy for the aBS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Midpoint of the two users.
    DistAvg,
    /// Fixed point of the channel-statistics weighted location.
    ChannelStat,
    /// Uniform point on the inter-user segment, redrawn per realization.
    RandomOnSegment,
    /// Best of `L` grid candidates for each realization.
    IterativeSearch,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::DistAvg,
        Strategy::ChannelStat,
        Strategy::RandomOnSegment,
        Strategy::IterativeSearch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::DistAvg => "dist_avg",
            Strategy::ChannelStat => "channel_stat",
            Strategy::RandomOnSegment => "random",
            Strategy::IterativeSearch => "iterative",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::contract(format!("unknown strategy '{s}'")))
    }
}

/// The two users' positions and the aBS flying altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub users: [Point; USERS],
    pub altitude: f64,
}

impl Segment {
    pub fn new(users: [Point; USERS], altitude: f64) -> Result<Self> {
        if !(altitude.is_finite() && altitude > 0.0) {
            return Err(Error::domain("abs altitude", altitude));
        }
        if users.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::contract("user positions must be finite"));
        }
        if users.iter().any(|p| p[2] != 0.0) {
            return Err(Error::contract("ground users must have z = 0"));
        }
        Ok(Self { users, altitude })
    }

    /// Point at fraction `t` from user 1 towards user 2, lifted to the
    /// flying altitude.
    pub fn at(&self, t: f64) -> Point {
        let [a, b] = self.users;
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), self.altitude]
    }

    pub fn midpoint(&self) -> Point {
        self.at(0.5)
    }

    pub fn geometry(&self, abs: Point) -> Result<Geometry> {
        Geometry::new(abs, self.users)
    }
}

/// Exponentially scaled modified Bessel function `e^{-z} I_nu(z)` for
/// `nu` in {0, 1} and `z >= 0`.
fn bessel_i_scaled(nu: u32, z: f64) -> f64 {
    if z <= SERIES_LIMIT {
        // sum_k (z/2)^{2k+nu} / (k! (k+nu)!)
        let q = 0.25 * z * z;
        let mut term = if nu == 0 { 1.0 } else { 0.5 * z };
        let mut sum = term;
        for k in 1..200 {
            term *= q / (k as f64 * (k + nu as usize) as f64);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        sum * (-z).exp()
    } else {
        // (2 pi z)^{-1/2} sum_k (-1)^k a_k(nu) / z^k
        let m = 4.0 * (nu * nu) as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let odd = (2 * k - 1) as f64;
            let next = -term * (m - odd * odd) / (k as f64 * 8.0 * z);
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * PI * z).sqrt()
    }
}

/// Laguerre function `L_{1/2}(x)` for `x <= 0`.
pub fn laguerre_half(x: f64) -> Result<f64> {
    if !(x <= 0.0) {
        return Err(Error::domain("laguerre argument", x));
    }
    if x == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let z = -0.5 * x;
    Ok((1.0 - x) * bessel_i_scaled(0, z) - x * bessel_i_scaled(1, z))
}

/// Statistical channel weight `sqrt(pi/2) d^{-alpha/2} L_{1/2}(-K)` of each
/// user seen from `abs`.
pub fn statistical_gains(segment: &Segment, env: &EnvironmentParams, abs: Point) -> Result<[f64; USERS]> {
    let geometry = segment.geometry(abs)?;
    let mut g = [0.0; USERS];
    for (u, slot) in g.iter_mut().enumerate() {
        let theta = geometry.elevation(u);
        let k = env.k_factor(theta)?;
        let alpha = env.exponent(theta, abs[2])?;
        let d = geometry.distance(u);
        *slot = (PI / 2.0).sqrt() * d.powf(-alpha / 2.0) * laguerre_half(-k)?;
    }
    Ok(g)
}

/// Ground location minimizing `sum_u lambda_u |w - w_u|^2`, lifted to the
/// flying altitude.
pub fn weighted_location(segment: &Segment, lambda: [f64; USERS]) -> Result<Point> {
    let total = lambda[0] + lambda[1];
    if !(lambda.iter().all(|l| *l >= 0.0) && total > 0.0 && total.is_finite()) {
        return Err(Error::contract("placement weights must be non-negative with a positive sum"));
    }
    Ok(segment.at(lambda[1] / total))
}

/// Channel-statistics placement: iterate the weighted location from the
/// midpoint until it moves less than 1e-6 m or 50 updates have run.
///
/// Both users see the midpoint at the same distance and elevation, so the
/// iteration starts on a fixed point and returns the midpoint unless the
/// environment breaks that symmetry.
pub fn statistical_placement(segment: &Segment, env: &EnvironmentParams) -> Result<Point> {
    statistical_placement_from(segment, env, segment.midpoint())
}

/// The same iteration started from an arbitrary point.
pub fn statistical_placement_from(
    segment: &Segment,
    env: &EnvironmentParams,
    start: Point,
) -> Result<Point> {
    let [a, b] = segment.users;
    if a == b {
        return Ok([a[0], a[1], segment.altitude]);
    }
    let mut w = [start[0], start[1], segment.altitude];
    for _ in 0..FIXED_POINT_ITERS {
        let g = statistical_gains(segment, env, w)?;
        let next = weighted_location(segment, g)?;
        let moved = (next[0] - w[0]).hypot(next[1] - w[1]);
        w = next;
        if moved < FIXED_POINT_TOL {
            break;
        }
    }
    Ok(w)
}

/// Uniform draw on the inter-user segment.
pub fn random_on_segment<R: Rng + ?Sized>(segment: &Segment, rng: &mut R) -> Point {
    segment.at(rng.random::<f64>())
}

/// `L` equidistant candidates on the segment: the midpoint for `L = 1`,
/// otherwise both endpoints and `L - 2` interior points.
pub fn candidate_grid(segment: &Segment, l: usize) -> Result<Vec<Point>> {
    match l {
        0 => Err(Error::contract("candidate count L must be at least 1")),
        1 => Ok(vec![segment.midpoint()]),
        _ => Ok((0..l)
            .map(|j| segment.at(j as f64 / (l - 1) as f64))
            .collect()),
    }
}

/// Realize the same small-scale draw at every candidate and evaluate each
/// with `eval`. Results are returned in candidate order.
pub fn evaluate_grid<T, F>(
    segment: &Segment,
    env: &EnvironmentParams,
    grid: &[Point],
    draw: &SmallScaleDraw,
    eval: F,
) -> Result<Vec<T>>
where
    F: Fn(&ChannelRealization) -> Result<T>,
{
    grid.iter()
        .map(|abs| eval(&ChannelRealization::realize(&segment.geometry(*abs)?, env, draw)?))
        .collect()
}

/// Index of the largest score; `None` entries are skipped and ties go to
/// the smallest index.
pub fn argmax(scores: impl IntoIterator<Item = Option<f64>>) -> Option<usize> {
    scores
        .into_iter()
        .enumerate()
        .filter_map(|(j, s)| s.map(|s| (j, s)))
        .fold(None, |best: Option<(usize, f64)>, (j, s)| match best {
            Some((_, b)) if s <= b => best,
            _ => Some((j, s)),
        })
        .map(|(j, _)| j)
}

/// Score used to rank candidates: the WSR of a run that met the rate floors.
pub fn feasible_wsr(res: &AoResult) -> Option<f64> {
    res.is_feasible().then(|| res.wsr())
}

/// Grid search over `L` candidates for one realization keyed by `key`.
///
/// Returns the winning point and its result. When every candidate is
/// infeasible the first candidate's result is returned with its
/// `Infeasible` status.
pub fn iterative_search(
    segment: &Segment,
    l: usize,
    env: &EnvironmentParams,
    cfg: &AoConfig,
    antennas: usize,
    key: StreamKey,
) -> Result<(Point, AoResult)> {
    let grid = candidate_grid(segment, l)?;
    let draw = SmallScaleDraw::sample(StreamKey { purpose: Purpose::SmallScale, ..key }, antennas);
    let mut results = evaluate_grid(segment, env, &grid, &draw, |h| ao_optimize(h, cfg))?;
    let best = argmax(results.iter().map(feasible_wsr)).unwrap_or(0);
    let res = results.swap_remove(best);
    debug_assert!(best == 0 || res.status != AoStatus::Infeasible);
    Ok((grid[best], res))
}
