//! Independent references used by tests and the self-check suite.
//!
//! The subproblem brute force evaluates the subproblem objective through the rate/MSE algebra (not the
//! solver's realified quadratics), eliminates the common-rate variables in
//! closed form, then grid-searches the six real precoder coordinates and
//! polishes the best grid point with a randomized pattern search.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::USERS;
use crate::ratecore::{mse_with, surrogate_awmse, Precoder};
use crate::solver::SubproblemInput;

/// Random directions tried per polish step on top of the coordinate axes.
/// The reduced objective has kinks where the common-rate split switches,
/// and a pattern search needs many directions to find descent there.
const POLISH_DIRECTIONS: usize = 128;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub precoder: Precoder,
}

/// Objective of the subproblem at precoder `p` after minimizing over the
/// common-rate variables; `None` when no admissible `x` exists.
pub fn reduced_objective(input: &SubproblemInput, p: &Precoder) -> Option<f64> {
    let eps = mse_with(&input.gains, p, input.sigma2, &input.equalizers).ok()?;
    let zeta = eps.zip_with(&input.mse_weights, surrogate_awmse);
    let layout = input.layout;
    let v = input.user_weights;
    let mut value: f64 = (0..USERS).map(|u| v[u] * zeta.private[u]).sum();

    // Upper bounds on each active x_u; floors on inactive users bind P.
    let mut bound = [0.0f64; USERS];
    for u in 0..USERS {
        if input.rate_floors[u] > 0.0 {
            let limit = 1.0 - input.rate_floors[u] - zeta.private[u];
            if layout.share[u] {
                bound[u] = bound[u].min(limit);
            } else if limit < 0.0 {
                return None;
            }
        }
    }
    if !layout.common {
        return Some(value);
    }
    let c = zeta.common[0].max(zeta.common[1]) - 1.0;
    let active: Vec<usize> = (0..USERS).filter(|&u| layout.share[u]).collect();
    let room: f64 = active.iter().map(|&u| bound[u]).sum::<f64>() - c;
    if room < 0.0 {
        return None;
    }
    // Every x_u at its bound, then the excess removed from the user with
    // the largest weight.
    let heaviest = active
        .iter()
        .copied()
        .max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a)))
        .expect("common stream has a share");
    for &u in &active {
        value += v[u] * bound[u];
    }
    value -= v[heaviest] * room;
    Some(value)
}

fn precoder_from(coords: &[f64; 6], budget: f64) -> Precoder {
    let mut m = DMatrix::zeros(1, 3);
    for k in 0..3 {
        m[(0, k)] = Complex64::new(coords[2 * k], coords[2 * k + 1]);
    }
    let mut p = Precoder::new(m).expect("finite");
    let power = p.power();
    if power > budget {
        p.scale((budget / power).sqrt());
    }
    p
}

fn score(input: &SubproblemInput, coords: &[f64; 6]) -> f64 {
    let mut c = *coords;
    for k in 0..3 {
        if !input.layout.column_active(k) {
            c[2 * k] = 0.0;
            c[2 * k + 1] = 0.0;
        }
    }
    let p = precoder_from(&c, input.power_budget);
    reduced_objective(input, &p).unwrap_or(f64::INFINITY)
}

/// Exhaustive minimization for `N = 1` inputs. `points` is the grid
/// resolution per coordinate.
pub fn brute_force(input: &SubproblemInput, points: usize, seed: u64) -> Option<OracleResult> {
    assert_eq!(input.gains[0].len(), 1, "oracle handles single-antenna inputs");
    let radius = input.power_budget.sqrt();
    let grid: Vec<f64> = (0..points)
        .map(|i| -radius + 2.0 * radius * i as f64 / (points - 1) as f64)
        .collect();

    let mut best = [0.0; 6];
    let mut best_val = score(input, &best);
    let mut idx = [0usize; 6];
    'grid: loop {
        let coords = idx.map(|i| grid[i]);
        let r2: f64 = coords.iter().map(|c| c * c).sum();
        if r2 <= input.power_budget {
            let val = score(input, &coords);
            if val < best_val {
                best_val = val;
                best = coords;
            }
        }
        for d in 0..6 {
            idx[d] += 1;
            if idx[d] < points {
                continue 'grid;
            }
            idx[d] = 0;
        }
        break;
    }
    if !best_val.is_finite() {
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = 2.0 * radius / (points - 1) as f64;
    while step > 1e-10 * radius.max(1.0) {
        let mut improved = false;
        let mut dirs: Vec<[f64; 6]> = Vec::with_capacity(12 + POLISH_DIRECTIONS);
        for d in 0..6 {
            let mut e = [0.0; 6];
            e[d] = 1.0;
            dirs.push(e);
            e[d] = -1.0;
            dirs.push(e);
        }
        for _ in 0..POLISH_DIRECTIONS {
            let mut r = [0.0; 6];
            for x in r.iter_mut() {
                *x = rng.random::<f64>() * 2.0 - 1.0;
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            dirs.push(r.map(|x| x / norm));
        }
        for dir in &dirs {
            let mut cand = best;
            for d in 0..6 {
                cand[d] += step * dir[d];
            }
            let r2: f64 = cand.iter().map(|c| c * c).sum();
            if r2 > input.power_budget {
                let s = (input.power_budget / r2).sqrt();
                cand = cand.map(|c| c * s);
            }
            let val = score(input, &cand);
            if val < best_val - 1e-15 {
                best_val = val;
                best = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let mut masked = best;
    for k in 0..3 {
        if !input.layout.column_active(k) {
            masked[2 * k] = 0.0;
            masked[2 * k + 1] = 0.0;
        }
    }
    Some(OracleResult {
        objective: best_val,
        precoder: precoder_from(&masked, input.power_budget),
    })
}

/// `L_{1/2}(x) = 1F1(-1/2; 1; x)` through Kummer's transformation
/// `e^x 1F1(3/2; 1; -x)`, a series of positive terms for `x <= 0`.
pub fn laguerre_half_kummer(x: f64) -> f64 {
    let y = -x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..5000 {
        let k = k as f64;
        term *= (k + 1.5) * y / ((k + 1.0) * (k + 1.0));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum * x.exp()
}
