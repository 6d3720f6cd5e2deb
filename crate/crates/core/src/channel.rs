//! Air-to-ground channel models.
//!
//! Large-scale models (free-space, altitude-dependent exponent, probabilistic
//! LoS) and elevation-dependent Rician small-scale fading are exposed as pure
//! functions. [`sample_channel`] combines them into the per-antenna gains used
//! by the optimizers.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// Number of ground users served by the aerial base station.
pub const USERS: usize = 2;

const ANGLE_SLACK: f64 = 1e-12;

/// How the path-loss exponent is chosen for a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathLossExponent {
    /// Constant exponent in `[2, 6]`.
    Fixed(f64),
    /// `max(p1 - p2 log10(q), 2)` with `q` the aBS altitude.
    Altitude { p1: f64, p2: f64 },
    /// `slope * P_LoS(theta) + offset`, the elevation-dependent form used
    /// with the Rician air-to-ground channel.
    Elevation { slope: f64, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentParams {
    /// LoS-probability sigmoid offset `a` (degrees).
    pub plos_a: f64,
    /// LoS-probability sigmoid slope `b` (per degree).
    pub plos_b: f64,
    /// Rician K-factor at zero elevation, dB.
    pub k0_db: f64,
    /// Rician K-factor at vertical elevation, dB.
    pub k90_db: f64,
    /// Excess NLoS attenuation, `(0, 1]`.
    pub kappa: f64,
    /// Channel power at the 1 m reference distance.
    pub beta0: f64,
    pub path_loss: PathLossExponent,
}

impl Default for EnvironmentParams {
    /// Dense-urban constants with a free-space exponent of 2.
    fn default() -> Self {
        Self {
            plos_a: 9.61,
            plos_b: 0.16,
            k0_db: 5.0,
            k90_db: 15.0,
            kappa: 0.2,
            beta0: 1.0,
            path_loss: PathLossExponent::Fixed(2.0),
        }
    }
}

impl EnvironmentParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |what, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(what, v))
            }
        };
        positive("plos_a", self.plos_a)?;
        positive("plos_b", self.plos_b)?;
        positive("beta0", self.beta0)?;
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::domain("kappa", self.kappa));
        }
        if !(self.k0_db.is_finite() && self.k90_db.is_finite()) || self.k90_db < self.k0_db {
            return Err(Error::contract(format!(
                "k90_db ({}) must be >= k0_db ({})",
                self.k90_db, self.k0_db
            )));
        }
        match self.path_loss {
            PathLossExponent::Fixed(a) if !(2.0..=6.0).contains(&a) => {
                Err(Error::domain("alpha", a))
            }
            PathLossExponent::Altitude { p1, p2 } if !(p1.is_finite() && p2.is_finite()) => {
                Err(Error::domain("altitude_p1", p1))
            }
            PathLossExponent::Elevation { slope, offset }
                if !(slope.is_finite() && offset.is_finite()) =>
            {
                Err(Error::domain("alpha_slope", slope))
            }
            _ => Ok(()),
        }
    }

    /// Path-loss exponent for a link at elevation `theta` from an aBS at
    /// altitude `altitude`.
    pub fn exponent(&self, theta: f64, altitude: f64) -> Result<f64> {
        match self.path_loss {
            PathLossExponent::Fixed(a) => Ok(a),
            PathLossExponent::Altitude { p1, p2 } => altitude_alpha(altitude, p1, p2),
            PathLossExponent::Elevation { slope, offset } => {
                Ok(slope * plos(theta, self.plos_a, self.plos_b)? + offset)
            }
        }
    }

    pub fn k_factor(&self, theta: f64) -> Result<f64> {
        rician_k(theta, self.k0_db, self.k90_db)
    }
}

/// Free-space amplitude gain `sqrt(beta0 / d^2)`.
pub fn free_space_gain(d: f64, beta0: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain("distance", d));
    }
    if !(beta0 > 0.0) {
        return Err(Error::domain("beta0", beta0));
    }
    Ok((beta0 / (d * d)).sqrt())
}

/// Altitude-dependent path-loss exponent, floored at 2.
pub fn altitude_alpha(q: f64, p1: f64, p2: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::domain("altitude", q));
    }
    Ok((p1 - p2 * q.log10()).max(2.0))
}

fn check_elevation(theta: f64) -> Result<f64> {
    if theta.is_finite() && (-ANGLE_SLACK..=FRAC_PI_2 + ANGLE_SLACK).contains(&theta) {
        Ok(theta.clamp(0.0, FRAC_PI_2))
    } else {
        Err(Error::domain("elevation", theta))
    }
}

/// Probability of a line-of-sight link at elevation `theta` (radians).
///
/// The sigmoid constants are calibrated in degrees, so the angle is
/// converted before evaluation.
pub fn plos(theta: f64, a: f64, b: f64) -> Result<f64> {
    let theta = check_elevation(theta)?;
    let deg = theta.to_degrees();
    Ok(1.0 / (1.0 + a * (-b * (deg - a)).exp()))
}

/// Mixture of LoS and NLoS power for a given LoS probability, as an
/// amplitude gain.
pub fn mixed_los_gain(d: f64, alpha: f64, p_los: f64, beta0: f64, kappa: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain("distance", d));
    }
    if !(0.0..=1.0).contains(&p_los) {
        return Err(Error::domain("p_los", p_los));
    }
    let los = beta0 * d.powf(-alpha);
    let nlos = kappa * los;
    Ok((los * p_los + nlos * (1.0 - p_los)).sqrt())
}

/// Probabilistic-LoS amplitude gain for a link of length `d` at elevation
/// `theta`; the exponent comes from `env.path_loss`.
pub fn probabilistic_channel_gain(d: f64, theta: f64, env: &EnvironmentParams) -> Result<f64> {
    let p_los = plos(theta, env.plos_a, env.plos_b)?;
    let alpha = env.exponent(theta, d * theta.sin())?;
    mixed_los_gain(d, alpha, p_los, env.beta0, env.kappa)
}

/// Elevation-dependent Rician K-factor (linear), interpolating
/// exponentially between `K(0)` and `K(pi/2)`.
pub fn rician_k(theta: f64, k0_db: f64, k90_db: f64) -> Result<f64> {
    let theta = check_elevation(theta)?;
    let a1 = db_to_linear(k0_db);
    let b1 = (2.0 / PI) * db_to_linear(k90_db - k0_db).ln();
    Ok(a1 * (b1 * theta).exp())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Combine a unit-modulus LoS term and a CN(0,1) scattered term with
/// Rician factor `k`.
pub fn rician_combine(k: f64, los: Complex64, nlos: Complex64) -> Complex64 {
    if k.is_infinite() {
        return los;
    }
    los * (k / (k + 1.0)).sqrt() + nlos * (1.0 / (k + 1.0)).sqrt()
}

fn draw_los<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let phase: f64 = rng.random::<f64>() * 2.0 * PI;
    Complex64::from_polar(1.0, phase)
}

fn draw_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One Rician small-scale coefficient with unit mean power.
pub fn sample_small_scale<R: Rng + ?Sized>(k: f64, rng: &mut R) -> Result<Complex64> {
    if k.is_nan() || k < 0.0 {
        return Err(Error::domain("k_factor", k));
    }
    let los = draw_los(rng);
    let nlos = draw_cn(rng);
    Ok(rician_combine(k, los, nlos))
}

/// Location-independent part of one channel realization: a LoS phase and a
/// scattered component per user and antenna.
///
/// Drawn once and recombined with the large-scale gain and K-factor of any
/// candidate aBS position, so positions are compared on the same fading.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallScaleDraw {
    pub los: [Vec<Complex64>; USERS],
    pub nlos: [Vec<Complex64>; USERS],
}

impl SmallScaleDraw {
    /// Each (user, antenna) element comes from its own keyed substream.
    pub fn sample(key: StreamKey, antennas: usize) -> Self {
        let key = StreamKey {
            purpose: Purpose::SmallScale,
            ..key
        };
        let mut los: [Vec<Complex64>; USERS] = Default::default();
        let mut nlos: [Vec<Complex64>; USERS] = Default::default();
        for u in 0..USERS {
            for i in 0..antennas {
                let mut rng = key.with_element(u, i).rng();
                los[u].push(draw_los(&mut rng));
                nlos[u].push(draw_cn(&mut rng));
            }
        }
        Self { los, nlos }
    }

    pub fn antennas(&self) -> usize {
        self.los[0].len()
    }

    /// Stable 64-bit fingerprint of the draw, used to verify pairing.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for u in 0..USERS {
            for (l, n) in self.los[u].iter().zip(&self.nlos[u]) {
                eat(l.re);
                eat(l.im);
                eat(n.re);
                eat(n.im);
            }
        }
        h
    }
}

/// Positions of the aBS and of the two ground users, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub abs_position: [f64; 3],
    pub user_positions: [[f64; 3]; USERS],
}

impl Geometry {
    pub fn new(abs_position: [f64; 3], user_positions: [[f64; 3]; USERS]) -> Result<Self> {
        let finite = abs_position
            .iter()
            .chain(user_positions.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::contract("positions must be finite"));
        }
        if !(abs_position[2] > 0.0) {
            return Err(Error::domain("abs altitude", abs_position[2]));
        }
        if user_positions.iter().any(|p| p[2] != 0.0) {
            return Err(Error::contract("ground users must have z = 0"));
        }
        Ok(Self {
            abs_position,
            user_positions,
        })
    }

    pub fn check_altitude(&self, min: f64, max: f64) -> Result<()> {
        let z = self.abs_position[2];
        if (min..=max).contains(&z) {
            Ok(())
        } else {
            Err(Error::domain("abs altitude", z))
        }
    }

    pub fn distance(&self, user: usize) -> f64 {
        let w = self.abs_position;
        let p = self.user_positions[user];
        ((w[0] - p[0]).powi(2) + (w[1] - p[1]).powi(2) + (w[2] - p[2]).powi(2)).sqrt()
    }

    /// Elevation of the aBS seen from `user`; `pi/2` directly overhead.
    pub fn elevation(&self, user: usize) -> f64 {
        let w = self.abs_position;
        let p = self.user_positions[user];
        let horizontal = (w[0] - p[0]).hypot(w[1] - p[1]);
        w[2].atan2(horizontal)
    }
}

/// Per-user channel vectors plus the geometry they were generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: [DVector<Complex64>; USERS],
    pub distance: [f64; USERS],
    pub elevation: [f64; USERS],
    pub k_factor: [f64; USERS],
    pub alpha: [f64; USERS],
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.gains[0].len()
    }

    /// Build a realization directly from gain vectors (metadata left neutral).
    pub fn from_gains(gains: [DVector<Complex64>; USERS]) -> Result<Self> {
        if gains[0].len() != gains[1].len() || gains[0].is_empty() {
            return Err(Error::contract("gain vectors must share a nonzero length"));
        }
        if gains.iter().flat_map(|g| g.iter()).any(|c| !c.is_finite()) {
            return Err(Error::contract("channel gains must be finite"));
        }
        Ok(Self {
            gains,
            distance: [1.0; USERS],
            elevation: [FRAC_PI_2; USERS],
            k_factor: [f64::INFINITY; USERS],
            alpha: [2.0; USERS],
        })
    }

    /// Apply the large-scale model at `geometry` to a small-scale draw.
    pub fn realize(
        geometry: &Geometry,
        env: &EnvironmentParams,
        draw: &SmallScaleDraw,
    ) -> Result<Self> {
        let n = draw.antennas();
        if n == 0 {
            return Err(Error::contract("antenna count must be at least 1"));
        }
        let mut gains: [DVector<Complex64>; USERS] =
            [DVector::zeros(n), DVector::zeros(n)];
        let mut distance = [0.0; USERS];
        let mut elevation = [0.0; USERS];
        let mut k_factor = [0.0; USERS];
        let mut alpha = [0.0; USERS];
        for u in 0..USERS {
            let d = geometry.distance(u);
            if !(d > 0.0) {
                return Err(Error::domain("distance", d));
            }
            let theta = geometry.elevation(u);
            let k = env.k_factor(theta)?;
            let a = env.exponent(theta, geometry.abs_position[2])?;
            let amplitude = env.beta0.sqrt() * d.powf(-a / 2.0);
            for i in 0..n {
                gains[u][i] = rician_combine(k, draw.los[u][i], draw.nlos[u][i]) * amplitude;
            }
            distance[u] = d;
            elevation[u] = theta;
            k_factor[u] = k;
            alpha[u] = a;
        }
        Ok(Self {
            gains,
            distance,
            elevation,
            k_factor,
            alpha,
        })
    }
}

/// Draw a full channel realization for `antennas` aBS antennas.
pub fn sample_channel(
    geometry: &Geometry,
    env: &EnvironmentParams,
    antennas: usize,
    key: StreamKey,
) -> Result<ChannelRealization> {
    if antennas == 0 {
        return Err(Error::contract("antenna count must be at least 1"));
    }
    let draw = SmallScaleDraw::sample(key, antennas);
    ChannelRealization::realize(geometry, env, &draw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn free_space_examples() {
        assert_eq!(free_space_gain(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(free_space_gain(2.0, 1.0).unwrap(), 0.5);
        assert!(matches!(free_space_gain(0.0, 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn altitude_alpha_examples() {
        assert_eq!(altitude_alpha(37.0, 2.0, 0.0).unwrap(), 2.0);
        assert_relative_eq!(altitude_alpha(10.0, 4.0, 1.0).unwrap(), 3.0);
        assert_eq!(altitude_alpha(1e6, 4.0, 1.0).unwrap(), 2.0);
        assert!(altitude_alpha(0.0, 4.0, 1.0).is_err());
        assert!(altitude_alpha(-3.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn plos_examples() {
        let at_a = plos(9.61f64.to_radians(), 9.61, 0.16).unwrap();
        assert_relative_eq!(at_a, 1.0 / 10.61, epsilon = 1e-12);
        // 1 / (1 + 9.61 exp(-0.16 * 80.39))
        let vertical = plos(FRAC_PI_2, 9.61, 0.16).unwrap();
        let expected = 1.0 / (1.0 + 9.61 * (-0.16f64 * (90.0 - 9.61)).exp());
        assert_relative_eq!(vertical, expected, epsilon = 1e-15);
        assert!((vertical - 0.999975).abs() < 1e-6);
        assert!(plos(-0.1, 9.61, 0.16).is_err());
        assert!(plos(2.0, 9.61, 0.16).is_err());
    }

    #[test]
    fn probabilistic_gain_examples() {
        assert_relative_eq!(
            mixed_los_gain(10.0, 2.0, 0.5, 1.0, 0.2).unwrap(),
            0.006f64.sqrt(),
            epsilon = 1e-15
        );
        for p in [0.0, 0.3, 1.0] {
            assert_relative_eq!(
                mixed_los_gain(7.0, 2.5, p, 1.0, 1.0).unwrap(),
                7f64.powf(-2.5).sqrt(),
                epsilon = 1e-15
            );
        }
        assert_relative_eq!(
            mixed_los_gain(7.0, 2.5, 1.0, 1.0, 0.3).unwrap(),
            7f64.powf(-2.5).sqrt(),
            epsilon = 1e-15
        );
        let env = EnvironmentParams::default();
        assert!(probabilistic_channel_gain(0.0, 0.5, &env).is_err());
    }

    #[test]
    fn rician_k_examples() {
        assert_relative_eq!(rician_k(0.0, 5.0, 15.0).unwrap(), db_to_linear(5.0));
        assert_relative_eq!(
            rician_k(FRAC_PI_2, 5.0, 15.0).unwrap(),
            db_to_linear(15.0),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            rician_k(PI / 4.0, 5.0, 15.0).unwrap(),
            10.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn infinite_k_is_pure_los() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let g = sample_small_scale(f64::INFINITY, &mut rng).unwrap();
            assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-14);
        }
        assert!(sample_small_scale(-1.0, &mut rng).is_err());
    }

    #[test]
    fn rayleigh_power_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_small_scale(0.0, &mut rng).unwrap().norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn deterministic_los_channel_magnitude() {
        let env = EnvironmentParams {
            k0_db: f64::INFINITY,
            k90_db: f64::INFINITY,
            ..EnvironmentParams::default()
        };
        // K = inf makes the exponent formula degenerate; combine directly.
        let geo = Geometry::new([0.0, 0.0, 10.0], [[0.0, 0.0, 0.0], [0.0, 10.0, 0.0]]).unwrap();
        let draw = SmallScaleDraw::sample(StreamKey::new(3, 0, Purpose::SmallScale), 4);
        for i in 0..4 {
            let g = rician_combine(f64::INFINITY, draw.los[0][i], draw.nlos[0][i]);
            let h = g * env.beta0.sqrt() * geo.distance(0).powf(-1.0);
            assert_relative_eq!(h.norm(), 0.1, epsilon = 1e-14);
        }
    }

    #[test]
    fn same_key_same_realization() {
        let env = EnvironmentParams::default();
        let geo = Geometry::new([50.0, 0.0, 50.0], [[0.0; 3], [100.0, 0.0, 0.0]]).unwrap();
        let key = StreamKey::new(42, 9, Purpose::SmallScale);
        let a = sample_channel(&geo, &env, 4, key).unwrap();
        let b = sample_channel(&geo, &env, 4, key).unwrap();
        assert_eq!(a, b);
        let c = sample_channel(&geo, &env, 4, StreamKey::new(42, 10, Purpose::SmallScale)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn overhead_user_has_vertical_elevation() {
        let geo = Geometry::new([0.0, 0.0, 50.0], [[0.0; 3], [100.0, 0.0, 0.0]]).unwrap();
        assert_relative_eq!(geo.elevation(0), FRAC_PI_2);
        assert_relative_eq!(geo.elevation(1), (0.5f64).atan());
    }

    #[test]
    fn coincident_abs_rejected() {
        assert!(Geometry::new([0.0, 0.0, 0.0], [[0.0; 3], [1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn environment_validation() {
        assert!(EnvironmentParams::default().validate().is_ok());
        let bad = EnvironmentParams {
            kappa: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EnvironmentParams {
            path_loss: PathLossExponent::Fixed(7.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EnvironmentParams {
            k0_db: 20.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
