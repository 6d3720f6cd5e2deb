//! SINR, rate, MSE and augmented weighted MSE algebra for two-user
//! rate splitting.
//!
//! Stream layout is fixed: column 0 of the precoder carries the common
//! stream decoded first by both users, column `u + 1` carries user `u`'s
//! private stream decoded after removing the common one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::USERS;
use crate::error::{Error, Result};

/// Per-user channel vectors `h_u`.
pub type Gains = [DVector<Complex64>; USERS];

pub const COMMON: usize = 0;

/// Column index of user `u`'s private stream.
pub const fn private_col(u: usize) -> usize {
    u + 1
}

/// Floor applied to MSEs before taking reciprocals.
pub const MSE_FLOOR: f64 = 1e-15;

/// One value per (stream kind, user).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Streams<T> {
    pub common: [T; USERS],
    pub private: [T; USERS],
}

impl<T: Copy> Streams<T> {
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Streams<U> {
        Streams {
            common: [f(self.common[0]), f(self.common[1])],
            private: [f(self.private[0]), f(self.private[1])],
        }
    }

    pub fn zip_with<S: Copy, U>(&self, other: &Streams<S>, f: impl Fn(T, S) -> U) -> Streams<U> {
        Streams {
            common: [
                f(self.common[0], other.common[0]),
                f(self.common[1], other.common[1]),
            ],
            private: [
                f(self.private[0], other.private[0]),
                f(self.private[1], other.private[1]),
            ],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.common.iter().chain(self.private.iter()).copied()
    }
}

/// Precoding matrix `[p_common, p_1, p_2]`, one row per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder(DMatrix<Complex64>);

impl Precoder {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.ncols() != 3 || m.nrows() == 0 {
            return Err(Error::contract(format!(
                "precoder must be N x 3, got {} x {}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|c| !c.is_finite()) {
            return Err(Error::contract("precoder entries must be finite"));
        }
        Ok(Self(m))
    }

    pub fn zeros(antennas: usize) -> Self {
        Self(DMatrix::zeros(antennas, 3))
    }

    pub fn from_columns(cols: &[DVector<Complex64>; 3]) -> Result<Self> {
        Self::new(DMatrix::from_columns(cols))
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.0
    }

    pub fn column(&self, k: usize) -> DVector<Complex64> {
        self.0.column(k).into_owned()
    }

    /// `tr(P P^H)`.
    pub fn power(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn column_power(&self, k: usize) -> f64 {
        self.0.column(k).iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.0 *= Complex64::new(s, 0.0);
    }

    pub fn set_column_zero(&mut self, k: usize) {
        self.0.column_mut(k).fill(Complex64::new(0.0, 0.0));
    }
}

/// Split of the common rate between the users; both entries nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSplit(pub [f64; USERS]);

impl RateSplit {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

fn check_dims(h: &Gains, p: &Precoder) -> Result<()> {
    let n = p.antennas();
    if h.iter().any(|g| g.len() != n) {
        return Err(Error::contract(format!(
            "channel length {} / {} does not match precoder rows {n}",
            h[0].len(),
            h[1].len()
        )));
    }
    Ok(())
}

fn check_noise(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("sigma2", sigma2))
    }
}

/// Effective scalar channels `h_u^H p_k` for every user and column.
pub fn projections(h: &Gains, p: &Precoder) -> Result<[[Complex64; 3]; USERS]> {
    check_dims(h, p)?;
    let m = p.matrix();
    let mut a = [[Complex64::new(0.0, 0.0); 3]; USERS];
    for u in 0..USERS {
        for k in 0..3 {
            a[u][k] = h[u].dotc(&m.column(k));
        }
    }
    Ok(a)
}

/// Received powers and interference terms seen by each decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerms {
    /// Total received power `T`.
    pub received: Streams<f64>,
    /// Interference plus noise `I`.
    pub interference: Streams<f64>,
    /// Desired-signal projections `h_u^H p_k` for each stream.
    pub desired: Streams<Complex64>,
}

pub fn power_terms(h: &Gains, p: &Precoder, sigma2: f64) -> Result<PowerTerms> {
    check_noise(sigma2)?;
    let a = projections(h, p)?;
    let mut out = PowerTerms {
        received: Streams::default(),
        interference: Streams::default(),
        desired: Streams::default(),
    };
    for u in 0..USERS {
        let own = private_col(u);
        let other = private_col(1 - u);
        let common = a[u][COMMON].norm_sqr();
        let own_p = a[u][own].norm_sqr();
        let other_p = a[u][other].norm_sqr();
        out.received.common[u] = common + own_p + other_p + sigma2;
        out.interference.common[u] = own_p + other_p + sigma2;
        out.received.private[u] = own_p + other_p + sigma2;
        out.interference.private[u] = other_p + sigma2;
        out.desired.common[u] = a[u][COMMON];
        out.desired.private[u] = a[u][own];
    }
    Ok(out)
}

/// SINRs of the common stream and of each private stream after SIC.
pub fn sinr(h: &Gains, p: &Precoder, sigma2: f64) -> Result<Streams<f64>> {
    let t = power_terms(h, p, sigma2)?;
    Ok(t.desired.zip_with(&t.interference, |d, i| d.norm_sqr() / i))
}

/// Shannon rate `B log2(1 + gamma)`.
pub fn rate(gamma: f64, bandwidth: f64) -> f64 {
    bandwidth * gamma.ln_1p() / std::f64::consts::LN_2
}

/// Largest common-stream rate decodable by both users.
pub fn common_rate_cap(h: &Gains, p: &Precoder, sigma2: f64, bandwidth: f64) -> Result<f64> {
    let g = sinr(h, p, sigma2)?;
    Ok(rate(g.common[0], bandwidth).min(rate(g.common[1], bandwidth)))
}

/// MMSE receive equalizers `f = a^* / T`.
pub fn mmse_equalizers(h: &Gains, p: &Precoder, sigma2: f64) -> Result<Streams<Complex64>> {
    let t = power_terms(h, p, sigma2)?;
    Ok(t.desired.zip_with(&t.received, |d, r| d.conj() / r))
}

/// MSE of every stream for arbitrary equalizers `f`.
pub fn mse_with(
    h: &Gains,
    p: &Precoder,
    sigma2: f64,
    f: &Streams<Complex64>,
) -> Result<Streams<f64>> {
    let t = power_terms(h, p, sigma2)?;
    let mut out = Streams::default();
    for u in 0..USERS {
        out.common[u] = mse_scalar(f.common[u], t.received.common[u], t.desired.common[u]);
        out.private[u] = mse_scalar(f.private[u], t.received.private[u], t.desired.private[u]);
    }
    Ok(out)
}

fn mse_scalar(f: Complex64, received: f64, desired: Complex64) -> f64 {
    f.norm_sqr() * received - 2.0 * (f * desired).re + 1.0
}

/// Minimum MSEs `I / T`.
pub fn mmse_values(h: &Gains, p: &Precoder, sigma2: f64) -> Result<Streams<f64>> {
    let t = power_terms(h, p, sigma2)?;
    Ok(t.interference.zip_with(&t.received, |i, r| i / r))
}

/// Optimal MSE weights, the reciprocal of the (floored) MMSEs.
pub fn optimal_weights(mmse: &Streams<f64>) -> Streams<f64> {
    mmse.map(|e| 1.0 / e.max(MSE_FLOOR))
}

/// Augmented weighted MSE `mu * eps - log2(mu)`.
pub fn awmse(eps: f64, mu: f64) -> f64 {
    mu * eps - mu.log2()
}

/// Natural-log AWMSE expressed in bits, `(mu eps - ln mu - 1) / ln 2 + 1`.
///
/// Agrees with [`awmse`] at `mu = 1 / eps`, where both equal `1 - R`, but
/// unlike it is minimized over `mu` exactly there. Block descent on this
/// surrogate is therefore monotone in the rates.
pub fn surrogate_awmse(eps: f64, mu: f64) -> f64 {
    (mu * eps - mu.ln() - 1.0) / std::f64::consts::LN_2 + 1.0
}

/// Equalizers, weights and the quantities they are built from, all
/// evaluated at the MMSE point of a given precoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseState {
    pub equalizers: Streams<Complex64>,
    pub weights: Streams<f64>,
    pub mse: Streams<f64>,
    pub received: Streams<f64>,
    pub interference: Streams<f64>,
    pub awmse: Streams<f64>,
}

impl WmmseState {
    pub fn at(h: &Gains, p: &Precoder, sigma2: f64) -> Result<Self> {
        let t = power_terms(h, p, sigma2)?;
        let equalizers = t.desired.zip_with(&t.received, |d, r| d.conj() / r);
        let mse = t.interference.zip_with(&t.received, |i, r| i / r);
        let weights = optimal_weights(&mse);
        let awmse = mse.zip_with(&weights, awmse);
        Ok(Self {
            equalizers,
            weights,
            mse,
            received: t.received,
            interference: t.interference,
            awmse,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub sinr: Streams<f64>,
    /// Achievable common-stream rate at each user, `R_u^12`.
    pub common_rate: [f64; USERS],
    /// Private-stream rate `R_u^u`.
    pub private_rate: [f64; USERS],
    /// Portion of the common rate assigned to each user.
    pub common_share: [f64; USERS],
    pub total: [f64; USERS],
    pub wsr: f64,
}

impl RateReport {
    pub fn common_cap(&self) -> f64 {
        self.common_rate[0].min(self.common_rate[1])
    }
}

/// Relative slack allowed when checking a split against the common-rate cap.
pub const CAP_TOLERANCE: f64 = 1e-9;

pub fn rate_report(
    h: &Gains,
    p: &Precoder,
    split: &RateSplit,
    sigma2: f64,
    bandwidth: f64,
    weights: [f64; USERS],
) -> Result<RateReport> {
    let g = sinr(h, p, sigma2)?;
    let common_rate = g.common.map(|x| rate(x, bandwidth));
    let private_rate = g.private.map(|x| rate(x, bandwidth));
    let cap = common_rate[0].min(common_rate[1]);
    if split.0.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::contract(format!(
            "common-rate split {:?} violates r >= 0",
            split.0
        )));
    }
    if split.total() > cap + CAP_TOLERANCE * cap.max(1.0) {
        return Err(Error::contract(format!(
            "common-rate split sums to {} which exceeds the common-rate cap R12 = {cap}",
            split.total()
        )));
    }
    let total = [
        split.0[0] + private_rate[0],
        split.0[1] + private_rate[1],
    ];
    Ok(RateReport {
        sinr: g,
        common_rate,
        private_rate,
        common_share: split.0,
        total,
        wsr: weights[0] * total[0] + weights[1] * total[1],
    })
}
