//! Server power model, DVFS slowdown, and resource-scaling profiles.
//!
//! Power draw at a frequency level follows `P = C * f * V^2 + P_static` with
//! `f` in MHz, `C` in W/(MHz*V^2), and voltage mapped linearly over the
//! frequency ladder. Slowdown under DVFS follows an Amdahl-style split into
//! a frequency-insensitive (I/O) share and a share that scales with the
//! normalized frequency.

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum PowerError {
    #[error("invalid server model: {0}")]
    BadModel(String),
    #[error("frequency {0} MHz is not a ladder level")]
    FrequencyNotOnLadder(f64),
    #[error("io_fraction {0} outside [0, 1]")]
    BadIoFraction(f64),
    #[error("normalized frequency {0} outside (0, 1]")]
    BadNormalizedFrequency(f64),
    #[error("invalid scalability profile: {0}")]
    BadProfile(String),
    #[error("scale k={k} outside [1, {max_nodes}]")]
    ScaleOutOfRange { k: u32, max_nodes: u32 },
    #[error("cannot read server config: {0}")]
    ConfigIo(#[from] std::io::Error),
    #[error("cannot parse server config: {0}")]
    ConfigParse(String),
}

/// Discrete-ladder DVFS power model for one server.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerPowerModel {
    /// Switching coefficient `C` in W/(MHz*V^2).
    pub capacitance_coeff: f64,
    /// Idle draw `P_static` in W.
    pub static_power: f64,
    /// Lowest ladder frequency in MHz.
    pub freq_min: f64,
    /// Highest ladder frequency in MHz.
    pub freq_max: f64,
    /// Ladder spacing in MHz.
    pub freq_step: f64,
    /// Voltage at `freq_min`, in V.
    pub volt_min: f64,
    /// Voltage at `freq_max`, in V.
    pub volt_max: f64,
}

const LEVEL_TOL: f64 = 1e-6;

impl ServerPowerModel {
    pub fn new(
        capacitance_coeff: f64,
        static_power: f64,
        freq_min: f64,
        freq_max: f64,
        freq_step: f64,
        volt_min: f64,
        volt_max: f64,
    ) -> Result<Self, PowerError> {
        let model = Self {
            capacitance_coeff,
            static_power,
            freq_min,
            freq_max,
            freq_step,
            volt_min,
            volt_max,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), PowerError> {
        let bad = |msg: &str| Err(PowerError::BadModel(msg.to_string()));
        let fields = [
            self.capacitance_coeff,
            self.static_power,
            self.freq_min,
            self.freq_max,
            self.freq_step,
            self.volt_min,
            self.volt_max,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("all fields must be finite and non-negative");
        }
        if self.freq_min <= 0.0 {
            return bad("freq_min must be positive");
        }
        if self.freq_min > self.freq_max {
            return bad("freq_min must not exceed freq_max");
        }
        if self.freq_step <= 0.0 {
            return bad("freq_step must be positive");
        }
        if self.volt_min > self.volt_max {
            return bad("volt_min must not exceed volt_max");
        }
        if self.freq_max > self.freq_min {
            let steps = (self.freq_max - self.freq_min) / self.freq_step;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return bad("freq_max - freq_min must be a whole number of freq_step");
            }
        }
        Ok(())
    }

    /// The reference ladder used throughout: Xeon E5-2620 v4, 900..2100 MHz in
    /// 100 MHz steps, 0.8..1.2 V, C = 0.03, P_static = 30 W.
    pub fn e5_2620v4() -> Self {
        Self::new(3e-2, 30.0, 900.0, 2100.0, 100.0, 0.8, 1.2).unwrap()
    }

    /// Looks up a built-in model by name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "e5-2620v4" => Some(Self::e5_2620v4()),
            _ => None,
        }
    }

    /// Parses a model from a TOML key-value config whose keys match the
    /// field names.
    pub fn from_config_str(text: &str) -> Result<Self, PowerError> {
        let model: Self =
            toml::from_str(text).map_err(|e| PowerError::ConfigParse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn from_config_path(path: &std::path::Path) -> Result<Self, PowerError> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    fn level_count(&self) -> usize {
        if self.freq_max == self.freq_min {
            1
        } else {
            ((self.freq_max - self.freq_min) / self.freq_step).round() as usize + 1
        }
    }

    /// All ladder frequencies, ascending. The degenerate `min == max` model
    /// has a single level.
    pub fn frequency_levels(&self) -> Vec<f64> {
        (0..self.level_count())
            .map(|i| self.freq_min + i as f64 * self.freq_step)
            .collect()
    }

    fn checked_level(&self, freq_mhz: f64) -> Result<f64, PowerError> {
        if !freq_mhz.is_finite() {
            return Err(PowerError::FrequencyNotOnLadder(freq_mhz));
        }
        let i = ((freq_mhz - self.freq_min) / self.freq_step).round();
        let level = self.freq_min + i * self.freq_step;
        if i < 0.0 || i as usize >= self.level_count() || (level - freq_mhz).abs() > LEVEL_TOL {
            return Err(PowerError::FrequencyNotOnLadder(freq_mhz));
        }
        Ok(level)
    }

    /// Voltage at a ladder frequency, interpolated linearly between
    /// `volt_min` and `volt_max`.
    pub fn voltage_for_frequency(&self, freq_mhz: f64) -> Result<f64, PowerError> {
        let level = self.checked_level(freq_mhz)?;
        if self.freq_max == self.freq_min {
            return Ok(self.volt_min);
        }
        let t = (level - self.freq_min) / (self.freq_max - self.freq_min);
        Ok(self.volt_min + t * (self.volt_max - self.volt_min))
    }

    /// Power draw in W while running at a ladder frequency.
    pub fn power_at(&self, freq_mhz: f64) -> Result<f64, PowerError> {
        let level = self.checked_level(freq_mhz)?;
        let v = self.voltage_for_frequency(level)?;
        Ok(self.capacitance_coeff * level * v * v + self.static_power)
    }
}

/// Execution-rate factor under DVFS: a job with frequency-insensitive share
/// `io_fraction` progresses at `1 / (io + (1 - io) / f_norm)` of its
/// full-frequency rate, where `f_norm = f / freq_max`.
pub fn slowdown(io_fraction: f64, f_norm: f64) -> Result<f64, PowerError> {
    if !(io_fraction.is_finite() && (0.0..=1.0).contains(&io_fraction)) {
        return Err(PowerError::BadIoFraction(io_fraction));
    }
    if !(f_norm.is_finite() && f_norm > 0.0 && f_norm <= 1.0) {
        return Err(PowerError::BadNormalizedFrequency(f_norm));
    }
    Ok(1.0 / (io_fraction + (1.0 - io_fraction) / f_norm))
}

/// Linear diminishing-returns scaling: running on `k` nodes yields total
/// throughput `s(k) = k * (1 - r * (k - 1))` relative to one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalabilityProfile {
    reduction_per_node: f64,
    max_nodes: u32,
}

pub const DEFAULT_MAX_NODES: u32 = 10;

impl ScalabilityProfile {
    /// Profile with the default node cap of 10.
    pub fn new(reduction_per_node: f64) -> Result<Self, PowerError> {
        Self::with_max_nodes(reduction_per_node, DEFAULT_MAX_NODES)
    }

    /// Fails if throughput would drop to zero or below anywhere within the
    /// cap, since the linear model goes negative for large `k`.
    pub fn with_max_nodes(reduction_per_node: f64, max_nodes: u32) -> Result<Self, PowerError> {
        if !(reduction_per_node.is_finite() && (0.0..1.0).contains(&reduction_per_node)) {
            return Err(PowerError::BadProfile(format!(
                "reduction_per_node {reduction_per_node} outside [0, 1)"
            )));
        }
        if max_nodes == 0 {
            return Err(PowerError::BadProfile("max_nodes must be >= 1".into()));
        }
        let profile = Self {
            reduction_per_node,
            max_nodes,
        };
        if profile.raw_throughput(max_nodes) <= 0.0 {
            let cap = max_feasible_nodes(reduction_per_node)
                .map(|n| n.to_string())
                .unwrap_or_else(|| "unbounded".into());
            return Err(PowerError::BadProfile(format!(
                "throughput non-positive at k={max_nodes} for r={reduction_per_node} \
                 (largest feasible max_nodes: {cap})"
            )));
        }
        Ok(profile)
    }

    pub fn reduction_per_node(&self) -> f64 {
        self.reduction_per_node
    }

    pub fn max_nodes(&self) -> u32 {
        self.max_nodes
    }

    fn raw_throughput(&self, k: u32) -> f64 {
        k as f64 * (1.0 - self.reduction_per_node * (k as f64 - 1.0))
    }

    /// Total throughput `s(k)` relative to a single node.
    pub fn throughput_at_scale(&self, k: u32) -> Result<f64, PowerError> {
        if k == 0 || k > self.max_nodes {
            return Err(PowerError::ScaleOutOfRange {
                k,
                max_nodes: self.max_nodes,
            });
        }
        Ok(self.raw_throughput(k))
    }

    /// Work per unit energy relative to one node: `s(k) / k`, since `k`
    /// nodes draw `k` times the power.
    pub fn energy_efficiency_at_scale(&self, k: u32) -> Result<f64, PowerError> {
        Ok(self.throughput_at_scale(k)? / k as f64)
    }
}

/// Largest node count with positive throughput under reduction `r`, or
/// `None` when `r == 0` (no cap).
pub fn max_feasible_nodes(reduction_per_node: f64) -> Option<u32> {
    if reduction_per_node <= 0.0 {
        return None;
    }
    let mut k = (1.0 + 1.0 / reduction_per_node).floor() as u32;
    while k > 1 && (k as f64) * (1.0 - reduction_per_node * (k as f64 - 1.0)) <= 0.0 {
        k -= 1;
    }
    Some(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_ladder_has_13_levels() {
        let m = ServerPowerModel::e5_2620v4();
        let levels = m.frequency_levels();
        assert_eq!(levels.len(), 13);
        assert_eq!(levels[0], 900.0);
        assert_eq!(levels[12], 2100.0);
        assert_eq!(levels[6], 1500.0);
    }

    #[test]
    fn three_level_ladder() {
        let m = ServerPowerModel::new(0.03, 30.0, 1000.0, 2000.0, 500.0, 0.8, 1.2).unwrap();
        assert_eq!(m.frequency_levels(), vec![1000.0, 1500.0, 2000.0]);
    }

    #[test]
    fn degenerate_single_level() {
        let m = ServerPowerModel::new(0.03, 30.0, 1500.0, 1500.0, 1500.0, 1.0, 1.0).unwrap();
        assert_eq!(m.frequency_levels(), vec![1500.0]);
        assert_eq!(m.voltage_for_frequency(1500.0).unwrap(), 1.0);
    }

    #[test]
    fn voltage_endpoints_and_midpoint() {
        let m = ServerPowerModel::e5_2620v4();
        assert_relative_eq!(m.voltage_for_frequency(900.0).unwrap(), 0.8, epsilon = 1e-12);
        assert_relative_eq!(m.voltage_for_frequency(2100.0).unwrap(), 1.2, epsilon = 1e-12);
        assert_relative_eq!(m.voltage_for_frequency(1500.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reference_power_at_extremes() {
        let m = ServerPowerModel::e5_2620v4();
        assert_relative_eq!(m.power_at(2100.0).unwrap(), 120.72, epsilon = 1e-9);
        assert_relative_eq!(m.power_at(900.0).unwrap(), 47.28, epsilon = 1e-9);
        let static_fraction = 30.0 / m.power_at(2100.0).unwrap();
        assert!((0.24..=0.26).contains(&static_fraction));
    }

    #[test]
    fn unit_cube_power_is_one_watt() {
        let m = ServerPowerModel::new(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(m.power_at(1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn off_ladder_frequency_rejected() {
        let m = ServerPowerModel::e5_2620v4();
        assert!(matches!(
            m.power_at(1050.0),
            Err(PowerError::FrequencyNotOnLadder(_))
        ));
        assert!(m.power_at(800.0).is_err());
        assert!(m.power_at(2200.0).is_err());
        assert!(m.power_at(f64::NAN).is_err());
    }

    #[test]
    fn non_divisible_ladder_rejected() {
        assert!(ServerPowerModel::new(0.03, 30.0, 900.0, 2100.0, 250.0, 0.8, 1.2).is_err());
    }

    #[test]
    fn negative_field_rejected() {
        assert!(ServerPowerModel::new(0.03, -1.0, 900.0, 2100.0, 100.0, 0.8, 1.2).is_err());
    }

    #[test]
    fn config_round_trip_matches_builtin() {
        let cfg = "\
            capacitance_coeff = 0.03\n\
            static_power = 30.0\n\
            freq_min = 900.0\n\
            freq_max = 2100.0\n\
            freq_step = 100.0\n\
            volt_min = 0.8\n\
            volt_max = 1.2\n";
        let m = ServerPowerModel::from_config_str(cfg).unwrap();
        assert_eq!(m, ServerPowerModel::e5_2620v4());
    }

    #[test]
    fn config_rejects_unknown_or_missing_keys() {
        assert!(ServerPowerModel::from_config_str("capacitance_coeff = 0.03").is_err());
        let cfg = "\
            capacitance_coeff = 0.03\n\
            static_power = 30.0\n\
            freq_min = 900.0\n\
            freq_max = 2100.0\n\
            freq_step = 100.0\n\
            volt_min = 0.8\n\
            volt_max = 1.2\n\
            turbo = true\n";
        assert!(matches!(
            ServerPowerModel::from_config_str(cfg),
            Err(PowerError::ConfigParse(_))
        ));
    }

    #[test]
    fn by_name_knows_the_builtin() {
        assert_eq!(
            ServerPowerModel::by_name("e5-2620v4"),
            Some(ServerPowerModel::e5_2620v4())
        );
        assert_eq!(ServerPowerModel::by_name("rx-9999"), None);
    }

    #[test]
    fn slowdown_spot_values() {
        assert_relative_eq!(slowdown(0.5, 0.5).unwrap(), 2.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(slowdown(0.0, 0.5).unwrap(), 0.5, epsilon = 1e-12);
        for f in [0.3, 0.5, 1.0] {
            assert_relative_eq!(slowdown(1.0, f).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(slowdown(0.25, 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn slowdown_rejects_out_of_range() {
        assert!(slowdown(-0.1, 0.5).is_err());
        assert!(slowdown(1.1, 0.5).is_err());
        assert!(slowdown(0.5, 0.0).is_err());
        assert!(slowdown(0.5, 1.5).is_err());
    }

    #[test]
    fn throughput_spot_values() {
        let p = ScalabilityProfile::new(0.05).unwrap();
        assert_relative_eq!(p.throughput_at_scale(1).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.throughput_at_scale(2).unwrap(), 1.9, epsilon = 1e-12);
        let p = ScalabilityProfile::with_max_nodes(0.15, 7).unwrap();
        assert_relative_eq!(p.throughput_at_scale(4).unwrap(), 2.2, epsilon = 1e-12);
    }

    #[test]
    fn energy_efficiency_spot_values() {
        let p = ScalabilityProfile::new(0.05).unwrap();
        assert_relative_eq!(
            p.energy_efficiency_at_scale(2).unwrap(),
            0.95,
            epsilon = 1e-12
        );
        let p = ScalabilityProfile::with_max_nodes(0.15, 7).unwrap();
        assert_relative_eq!(
            p.energy_efficiency_at_scale(5).unwrap(),
            0.40,
            epsilon = 1e-12
        );
    }

    #[test]
    fn profile_rejects_non_positive_throughput_window() {
        assert!(ScalabilityProfile::new(0.15).is_err());
        assert!(ScalabilityProfile::with_max_nodes(0.15, 7).is_ok());
        assert!(ScalabilityProfile::with_max_nodes(0.15, 8).is_err());
        assert!(ScalabilityProfile::with_max_nodes(0.5, 3).is_err());
        assert!(ScalabilityProfile::with_max_nodes(1.0, 2).is_err());
    }

    #[test]
    fn max_feasible_nodes_spot_values() {
        assert_eq!(max_feasible_nodes(0.15), Some(7));
        assert_eq!(max_feasible_nodes(0.10), Some(10));
        assert_eq!(max_feasible_nodes(0.05), Some(20));
        assert_eq!(max_feasible_nodes(0.0), None);
    }

    #[test]
    fn scale_out_of_range_rejected() {
        let p = ScalabilityProfile::new(0.05).unwrap();
        assert!(p.throughput_at_scale(0).is_err());
        assert!(p.throughput_at_scale(11).is_err());
    }

    #[test]
    fn most_energy_efficient_ladder_frequency_is_1300() {
        let m = ServerPowerModel::e5_2620v4();
        let best = m
            .frequency_levels()
            .into_iter()
            .min_by(|a, b| {
                let epw = |f: f64| {
                    m.power_at(f).unwrap() / slowdown(0.0, f / m.freq_max).unwrap()
                };
                epw(*a).partial_cmp(&epw(*b)).unwrap()
            })
            .unwrap();
        assert_eq!(best, 1300.0);
    }

    #[test]
    fn io_share_flattens_the_energy_per_work_curve() {
        let m = ServerPowerModel::e5_2620v4();
        let p_max = m.power_at(m.freq_max).unwrap();
        for (lo, hi) in [(0.0, 0.4), (0.4, 0.7)] {
            for f in m.frequency_levels() {
                if f == m.freq_max {
                    continue;
                }
                let norm_epw = |io: f64| {
                    m.power_at(f).unwrap() / slowdown(io, f / m.freq_max).unwrap() / p_max
                };
                assert!(
                    norm_epw(hi) < norm_epw(lo),
                    "f={f}: {} !< {}",
                    norm_epw(hi),
                    norm_epw(lo)
                );
            }
        }
    }

    proptest! {
        #[test]
        fn power_strictly_increasing_in_frequency(
            c in 1e-3f64..0.1,
            p_static in 0.0f64..100.0,
            fmin in 200.0f64..1000.0,
            steps in 1usize..20,
            step in 50.0f64..200.0,
            vmin in 0.5f64..1.0,
            vspan in 0.0f64..0.5,
        ) {
            let fmax = fmin + steps as f64 * step;
            let m = ServerPowerModel::new(c, p_static, fmin, fmax, step, vmin, vmin + vspan)
                .unwrap();
            let powers: Vec<f64> = m
                .frequency_levels()
                .iter()
                .map(|&f| m.power_at(f).unwrap())
                .collect();
            for pair in powers.windows(2) {
                prop_assert!(pair[1] > pair[0]);
            }
        }

        #[test]
        fn slowdown_monotone_in_frequency(
            io in 0.0f64..1.0,
            a in 0.01f64..1.0,
            b in 0.01f64..1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(slowdown(io, lo)? <= slowdown(io, hi)? + 1e-12);
        }

        #[test]
        fn throughput_gains_shrink_with_k(
            r in 0.0f64..0.3,
            max_nodes in 2u32..12,
        ) {
            prop_assume!(ScalabilityProfile::with_max_nodes(r, max_nodes).is_ok());
            let p = ScalabilityProfile::with_max_nodes(r, max_nodes).unwrap();
            let mut prev_gain = f64::INFINITY;
            for k in 1..max_nodes {
                let gain = p.throughput_at_scale(k + 1).unwrap()
                    - p.throughput_at_scale(k).unwrap();
                prop_assert!(gain <= prev_gain + 1e-12);
                prev_gain = gain;
            }
        }
    }
}
