//! Sweep specification and its flat `key = value` file format.
//!
//! Lines are `key = value`; blank lines and `#` comments are ignored. Lists
//! are comma separated. Keys left out keep the reference configuration from
//! [`SweepSpec::default`]; unknown or repeated keys are errors.

use std::path::Path;
use std::str::FromStr;

use crate::channel::{EnvironmentParams, PathLossExponent, USERS};
use crate::error::{Error, Result};
use crate::optimizer::Scheme;
use crate::placement::{Point, Segment, Strategy};

pub const KEYS: [&str; 20] = [
    "n_antennas",
    "user1_xyz",
    "user2_xyz",
    "abs_altitude_m",
    "snr_db_list",
    "sigma2",
    "bandwidth_hz",
    "weights",
    "r_th_list",
    "schemes",
    "strategies",
    "realizations",
    "grid_l",
    "plos_a",
    "plos_b",
    "k0_db",
    "k90_db",
    "beta0",
    "alpha",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub antennas: usize,
    pub users: [Point; USERS],
    pub altitude: f64,
    /// Transmit SNR `P_t / sigma^2` in dB.
    pub snr_db: Vec<f64>,
    pub sigma2: f64,
    pub bandwidth: f64,
    pub weights: [f64; USERS],
    /// Per-user rate floors, bits/s/Hz.
    pub r_th: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub strategies: Vec<Strategy>,
    pub realizations: usize,
    pub grid_l: usize,
    pub env: EnvironmentParams,
    pub seed: u64,
}

impl Default for SweepSpec {
    /// Two users 100 m apart, aBS at 50 m with four antennas, dense-urban
    /// environment, 100 realizations.
    fn default() -> Self {
        Self {
            antennas: 4,
            users: [[0.0, 0.0, 0.0], [100.0, 0.0, 0.0]],
            altitude: 50.0,
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            sigma2: 1.0,
            bandwidth: 1.0,
            weights: [0.5, 0.5],
            r_th: vec![0.0],
            schemes: Scheme::ALL.to_vec(),
            strategies: vec![Strategy::DistAvg],
            realizations: 100,
            grid_l: 100,
            env: EnvironmentParams::default(),
            seed: 1,
        }
    }
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line, msg };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&key) = KEYS.iter().find(|k| **k == key) else {
                return Err(err(format!("unknown key '{key}'")));
            };
            if seen.contains(&key) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            seen.push(key);
            spec.set(key, value).map_err(err)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "n_antennas" => self.antennas = scalar(v)?,
            "user1_xyz" => self.users[0] = array(v)?,
            "user2_xyz" => self.users[1] = array(v)?,
            "abs_altitude_m" => self.altitude = scalar(v)?,
            "snr_db_list" => self.snr_db = list(v)?,
            "sigma2" => self.sigma2 = scalar(v)?,
            "bandwidth_hz" => self.bandwidth = scalar(v)?,
            "weights" => self.weights = array(v)?,
            "r_th_list" => self.r_th = list(v)?,
            "schemes" => self.schemes = list(v)?,
            "strategies" => self.strategies = list(v)?,
            "realizations" => self.realizations = scalar(v)?,
            "grid_l" => self.grid_l = scalar(v)?,
            "plos_a" => self.env.plos_a = scalar(v)?,
            "plos_b" => self.env.plos_b = scalar(v)?,
            "k0_db" => self.env.k0_db = scalar(v)?,
            "k90_db" => self.env.k90_db = scalar(v)?,
            "beta0" => self.env.beta0 = scalar(v)?,
            "alpha" => self.env.path_loss = PathLossExponent::Fixed(scalar(v)?),
            "seed" => self.seed = scalar(v)?,
            _ => unreachable!("key table and setter disagree on '{key}'"),
        }
        Ok(())
    }

    /// Checks that do not depend on a single line.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.antennas == 0 {
            return bad("n_antennas must be at least 1".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.grid_l == 0 {
            return bad("grid_l must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.r_th.is_empty() || self.schemes.is_empty() || self.strategies.is_empty() {
            return bad("snr_db_list, r_th_list, schemes and strategies must be non-empty".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite".into());
        }
        if self.r_th.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("rate thresholds must be finite and non-negative".into());
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return bad(format!("bandwidth_hz must be positive, got {}", self.bandwidth));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.weights.iter().sum::<f64>() <= 0.0 {
            return bad(format!("weights {:?} must be non-negative, not both zero", self.weights));
        }
        Segment::new(self.users, self.altitude).map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        self.env
            .validate()
            .map_err(|e| Error::Config { line: 0, msg: e.to_string() })
    }

    pub fn segment(&self) -> Segment {
        Segment::new(self.users, self.altitude).expect("validated spec")
    }

    /// Transmit power for an SNR in dB.
    pub fn power_budget(&self, snr_db: f64) -> f64 {
        self.sigma2 * 10f64.powf(snr_db / 10.0)
    }

    /// The spec in file form; parsing it back yields the same spec.
    pub fn to_text(&self) -> String {
        let join = |v: &[String]| v.join(", ");
        let nums = |v: &[f64]| join(&v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>());
        let alpha = match self.env.path_loss {
            PathLossExponent::Fixed(a) => a,
            _ => unreachable!("config files only express a fixed exponent"),
        };
        [
            format!("n_antennas = {}", self.antennas),
            format!("user1_xyz = {}", nums(&self.users[0])),
            format!("user2_xyz = {}", nums(&self.users[1])),
            format!("abs_altitude_m = {:?}", self.altitude),
            format!("snr_db_list = {}", nums(&self.snr_db)),
            format!("sigma2 = {:?}", self.sigma2),
            format!("bandwidth_hz = {:?}", self.bandwidth),
            format!("weights = {}", nums(&self.weights)),
            format!("r_th_list = {}", nums(&self.r_th)),
            format!("schemes = {}", join(&self.schemes.iter().map(|s| s.to_string()).collect::<Vec<_>>())),
            format!("strategies = {}", join(&self.strategies.iter().map(|s| s.to_string()).collect::<Vec<_>>())),
            format!("realizations = {}", self.realizations),
            format!("grid_l = {}", self.grid_l),
            format!("plos_a = {:?}", self.env.plos_a),
            format!("plos_b = {:?}", self.env.plos_b),
            format!("k0_db = {:?}", self.env.k0_db),
            format!("k90_db = {:?}", self.env.k90_db),
            format!("beta0 = {:?}", self.env.beta0),
            format!("alpha = {alpha:?}"),
            format!("seed = {}", self.seed),
        ]
        .map(|l| l + "\n")
        .concat()
    }
}

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(scalar)
        .collect()
}

fn array<const N: usize>(v: &str) -> std::result::Result<[f64; N], String> {
    let items: Vec<f64> = list(v)?;
    items
        .try_into()
        .map_err(|got: Vec<f64>| format!("expected {N} values, found {}", got.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_configuration() {
        assert_eq!(SweepSpec::parse("").unwrap(), SweepSpec::default());
    }

    #[test]
    fn round_trips_through_text() {
        let mut spec = SweepSpec::default();
        spec.snr_db = vec![-3.5, 12.25];
        spec.schemes = vec![Scheme::Noma];
        spec.strategies = vec![Strategy::IterativeSearch, Strategy::RandomOnSegment];
        spec.users[1] = [10.0, -4.5, 0.0];
        spec.seed = u64::MAX;
        assert_eq!(SweepSpec::parse(&spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn parses_lists_and_comments() {
        let text = "# header\n\nsnr_db_list = 0, 10 ,20\nschemes = RSMA,SDMA  # inline\nuser2_xyz = 3, 4, 0\n";
        let spec = SweepSpec::parse(text).unwrap();
        assert_eq!(spec.snr_db, vec![0.0, 10.0, 20.0]);
        assert_eq!(spec.schemes, vec![Scheme::Rsma, Scheme::Sdma]);
        assert_eq!(spec.users[1], [3.0, 4.0, 0.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match SweepSpec::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(line_of("seed = 3\nfoo = 1\n"), 2);
        assert_eq!(line_of("seed = 3\n\nseed = 4\n"), 3);
        assert_eq!(line_of("seed 3\n"), 1);
        assert_eq!(line_of("\nuser1_xyz = 1, 2\n"), 2);
        assert_eq!(line_of("schemes = OMA\n"), 1);
        assert_eq!(line_of("realizations = 0\n"), 0);
        assert_eq!(line_of("user1_xyz = 0, 0, 5\n"), 0);
        assert_eq!(line_of("alpha = 1.5\n"), 0);
    }
}
