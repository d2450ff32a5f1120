//! Scenario configuration and its flat `key = value` text format.
//!
//! One key per line, `#` starts a comment, blank lines are ignored and any
//! omitted key keeps its default. Ratios (`eta`, `kappa`) accept either a
//! linear value or a `dB` suffix (`kappa = 10dB`).
//!
//! | key         | meaning                                     | unit   | default    |
//! |-------------|---------------------------------------------|--------|------------|
//! | `T`         | slot length                                 | s      | 0.1        |
//! | `N`         | number of OBUs                              |        | 8          |
//! | `L`         | initial fleet length                        | m      | 800        |
//! | `N_max`     | subnetwork size cap                         |        | 8          |
//! | `K`         | splitting period                            | slots  | 10         |
//! | `D`         | RSU coverage diameter                       | m      | 250        |
//! | `alpha`     | utility pricing factor                      |        | 100        |
//! | `beta`      | coalition cost pricing factor               |        | 1          |
//! | `M`         | packets per file                            |        | 100        |
//! | `Ms`        | file size                                   | bit    | 1e8        |
//! | `v_min`     | minimum speed                               | m/s    | 20         |
//! | `v_max`     | maximum speed                               | m/s    | 40         |
//! | `d_min`     | security distance                           | m      | 100        |
//! | `d_max`     | catch-up distance                           | m      | 1000       |
//! | `a`         | speed change per slot                       | m/s    | 1          |
//! | `p`         | probability of each speed change direction  |        | 0.1        |
//! | `W`         | V2V bandwidth                               | Hz     | 3e7        |
//! | `c0`        | V2R rate                                    | bit/s  | 5e6        |
//! | `eta`       | transmit SNR                                |        | 1e6        |
//! | `kappa`     | Rician factor                               |        | 10dB       |
//! | `R_los`     | neighbour (line-of-sight) range             | m      | 300        |
//! | `t_max`     | slot horizon                                | slots  | 300        |
//! | `seed`      | base scenario seed                          |        | 1          |
//! | `scheme`    | `proposed` or `baseline`                    |        | proposed   |
//! | `warm_start`| seed formation with last slot's partition   |        | false      |
//! | `seeds`     | seeds per sweep point                       |        | 20         |

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("`{key}` violates {bound}")]
    OutOfBounds { key: &'static str, bound: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Proposed,
    Baseline,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "baseline" => Ok(Scheme::Baseline),
            _ => Err(ConfigError::InvalidValue { key: "scheme".into(), value: s.into() }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub slot_secs: f64,
    pub vehicles: usize,
    pub fleet_length: f64,
    pub max_subnet: usize,
    pub split_period: u64,
    pub rsu_diameter: f64,
    pub alpha: f64,
    pub beta: f64,
    pub packets: usize,
    pub file_bits: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub accel: f64,
    pub p_change: f64,
    pub bandwidth: f64,
    pub v2r_rate: f64,
    pub snr: f64,
    /// Linear Rician factor.
    pub rician_k: f64,
    pub los_range: f64,
    pub t_max: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub warm_start: bool,
    pub seeds: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            slot_secs: 0.1,
            vehicles: 8,
            fleet_length: 800.0,
            max_subnet: 8,
            split_period: 10,
            rsu_diameter: 250.0,
            alpha: 100.0,
            beta: 1.0,
            packets: 100,
            file_bits: 100e6,
            v_min: 20.0,
            v_max: 40.0,
            d_min: 100.0,
            d_max: 1000.0,
            accel: 1.0,
            p_change: 0.1,
            bandwidth: 30e6,
            v2r_rate: 5e6,
            snr: 1e6,
            rician_k: 10.0,
            los_range: 300.0,
            t_max: 300,
            seed: 1,
            scheme: Scheme::Proposed,
            warm_start: false,
            seeds: 20,
        }
    }
}

pub const KEYS: &[&str] = &[
    "T", "N", "L", "N_max", "K", "D", "alpha", "beta", "M", "Ms", "v_min", "v_max", "d_min",
    "d_max", "a", "p", "W", "c0", "eta", "kappa", "R_los", "t_max", "seed", "scheme",
    "warm_start", "seeds",
];

fn invalid(key: &str, value: &str) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), value: value.to_string() }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid(key, value))
}

fn parse_int<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| invalid(key, value))
}

/// Linear power ratio, or decibels with a `dB` suffix.
fn parse_ratio(key: &str, value: &str) -> Result<f64, ConfigError> {
    match value.strip_suffix("dB") {
        Some(db) => Ok(10f64.powf(parse_f64(key, db.trim())? / 10.0)),
        None => parse_f64(key, value),
    }
}

impl ScenarioConfig {
    /// Packet size `s = Ms / M` in bits.
    pub fn packet_bits(&self) -> f64 {
        self.file_bits / self.packets as f64
    }

    /// Total demand `N·M` in packets.
    pub fn demand(&self) -> u64 {
        (self.vehicles * self.packets) as u64
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "T" => self.slot_secs = parse_f64(key, v)?,
            "N" => self.vehicles = parse_int(key, v)?,
            "L" => self.fleet_length = parse_f64(key, v)?,
            "N_max" => self.max_subnet = parse_int(key, v)?,
            "K" => self.split_period = parse_int(key, v)?,
            "D" => self.rsu_diameter = parse_f64(key, v)?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "beta" => self.beta = parse_f64(key, v)?,
            "M" => self.packets = parse_int(key, v)?,
            "Ms" => self.file_bits = parse_f64(key, v)?,
            "v_min" => self.v_min = parse_f64(key, v)?,
            "v_max" => self.v_max = parse_f64(key, v)?,
            "d_min" => self.d_min = parse_f64(key, v)?,
            "d_max" => self.d_max = parse_f64(key, v)?,
            "a" => self.accel = parse_f64(key, v)?,
            "p" => self.p_change = parse_f64(key, v)?,
            "W" => self.bandwidth = parse_f64(key, v)?,
            "c0" => self.v2r_rate = parse_f64(key, v)?,
            "eta" => self.snr = parse_ratio(key, v)?,
            "kappa" => self.rician_k = parse_ratio(key, v)?,
            "R_los" => self.los_range = parse_f64(key, v)?,
            "t_max" => self.t_max = parse_int(key, v)?,
            "seed" => self.seed = parse_int(key, v)?,
            "scheme" => self.scheme = v.parse()?,
            "warm_start" => self.warm_start = parse_int(key, v)?,
            "seeds" => self.seeds = parse_int(key, v)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.to_string() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&'static str, f64); 15] = [
            ("T", self.slot_secs),
            ("L", self.fleet_length),
            ("D", self.rsu_diameter),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("Ms", self.file_bits),
            ("v_min", self.v_min),
            ("d_min", self.d_min),
            ("d_max", self.d_max),
            ("a", self.accel),
            ("W", self.bandwidth),
            ("c0", self.v2r_rate),
            ("eta", self.snr),
            ("R_los", self.los_range),
            ("v_max", self.v_max),
        ];
        for (key, value) in positive {
            if !(value > 0.0) {
                return Err(ConfigError::OutOfBounds { key, bound: "the bound > 0" });
            }
        }
        let counts: [(&'static str, u64); 6] = [
            ("N", self.vehicles as u64),
            ("N_max", self.max_subnet as u64),
            ("K", self.split_period),
            ("M", self.packets as u64),
            ("t_max", self.t_max),
            ("seeds", self.seeds as u64),
        ];
        for (key, value) in counts {
            if value == 0 {
                return Err(ConfigError::OutOfBounds { key, bound: "the bound >= 1" });
            }
        }
        if !(self.p_change > 0.0 && self.p_change < 0.5) {
            return Err(ConfigError::OutOfBounds { key: "p", bound: "0 < p < 1/2" });
        }
        if self.v_min > self.v_max {
            return Err(ConfigError::OutOfBounds { key: "v_min", bound: "v_min <= v_max" });
        }
        if !(self.rician_k >= 0.0) {
            return Err(ConfigError::OutOfBounds { key: "kappa", bound: "kappa >= 0" });
        }
        Ok(())
    }

    /// Renders every key so that [`parse_config`] reproduces `self` exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("T", self.slot_secs.to_string());
        line("N", self.vehicles.to_string());
        line("L", self.fleet_length.to_string());
        line("N_max", self.max_subnet.to_string());
        line("K", self.split_period.to_string());
        line("D", self.rsu_diameter.to_string());
        line("alpha", self.alpha.to_string());
        line("beta", self.beta.to_string());
        line("M", self.packets.to_string());
        line("Ms", self.file_bits.to_string());
        line("v_min", self.v_min.to_string());
        line("v_max", self.v_max.to_string());
        line("d_min", self.d_min.to_string());
        line("d_max", self.d_max.to_string());
        line("a", self.accel.to_string());
        line("p", self.p_change.to_string());
        line("W", self.bandwidth.to_string());
        line("c0", self.v2r_rate.to_string());
        line("eta", self.snr.to_string());
        line("kappa", self.rician_k.to_string());
        line("R_los", self.los_range.to_string());
        line("t_max", self.t_max.to_string());
        line("seed", self.seed.to_string());
        line("scheme", self.scheme.to_string());
        line("warm_start", self.warm_start.to_string());
        line("seeds", self.seeds.to_string());
        out
    }
}

/// Parses and validates a configuration, filling omitted keys with defaults.
pub fn parse_config(source: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut config = ScenarioConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: line_no, text: text.to_string() })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { line: line_no, key: key.to_string() });
        }
        if seen.contains(&key) {
            return Err(ConfigError::DuplicateKey { line: line_no, key: key.to_string() });
        }
        seen.push(key);
        config.set(key, value)?;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_source_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.packet_bits(), 1e6);
        assert_eq!(c.demand(), 800);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let c = parse_config("# header\n\nN = 12   # fleet\nL=1200\n").unwrap();
        assert_eq!(c.vehicles, 12);
        assert_eq!(c.fleet_length, 1200.0);
    }

    #[test]
    fn kappa_in_decibels() {
        let c = parse_config("kappa = 10dB").unwrap();
        assert_eq!(c.rician_k, 10.0);
        let c = parse_config("kappa = 0dB").unwrap();
        assert_eq!(c.rician_k, 1.0);
        let c = parse_config("kappa = 3.5").unwrap();
        assert_eq!(c.rician_k, 3.5);
    }

    #[test]
    fn p_bound_is_enforced() {
        let err = parse_config("p = 0.6").unwrap_err();
        assert_eq!(err, ConfigError::OutOfBounds { key: "p", bound: "0 < p < 1/2" });
        assert!(err.to_string().contains("0 < p < 1/2"));
        assert!(parse_config("p = 0").is_err());
    }

    #[test]
    fn named_diagnostics() {
        assert!(matches!(
            parse_config("bogus = 1"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("N = eight"),
            Err(ConfigError::InvalidValue { ref key, .. }) if key == "N"
        ));
        assert!(matches!(parse_config("N 8"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_config("N = 8\nN = 9"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("v_min = 50"),
            Err(ConfigError::OutOfBounds { key: "v_min", .. })
        ));
        assert!(matches!(parse_config("M = 0"), Err(ConfigError::OutOfBounds { key: "M", .. })));
        assert!(matches!(parse_config("scheme = random"), Err(ConfigError::InvalidValue { .. })));
    }

    #[test]
    fn defaults_round_trip() {
        let c = ScenarioConfig::default();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn odd_values_round_trip() {
        let mut c = ScenarioConfig::default();
        c.rician_k = 10f64.powf(0.73);
        c.slot_secs = 0.1 + 0.2;
        c.scheme = Scheme::Baseline;
        c.warm_start = true;
        c.seed = u64::MAX;
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }
}
