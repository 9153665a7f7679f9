//! Run configuration: every knob of a simulation, readable from a flat
//! `key=value` text file and echoed back into each event log header for
//! provenance.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mpifa::MpifaParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("bad config line {line}: {text}")]
    BadLine { line: usize, text: String },
    #[error("unknown config key: {0}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value}")]
    BadValue { key: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which management layout a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// One central server holds fairness state for the whole network.
    Centralized,
    /// Virtual zones, each managed by its own zone server.
    Hybrid,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Centralized => "centralized",
            Scheme::Hybrid => "hybrid",
        }
    }
}

/// How a misbehaving node doctors the ledger it reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaliciousStrategy {
    /// Hide dropped packets by under-reporting input counters.
    MaskDrops,
    /// Additionally hide self-generated packets, dodging generation charges
    /// and inflating the forwarding reward.
    MaskDropsSkimGeneration,
}

impl MaliciousStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            MaliciousStrategy::MaskDrops => "mask_drops",
            MaliciousStrategy::MaskDropsSkimGeneration => "mask_drops_skim_generation",
        }
    }
}

/// Full configuration of a single simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    // topology
    pub n: usize,
    pub area_x: f64,
    pub area_y: f64,
    pub radio_range: f64,
    pub delay_index_min: f64,
    pub delay_index_max: f64,
    pub seed: u64,
    // management scheme
    pub scheme: Scheme,
    pub target_zone_size: usize,
    pub min_zone_size: usize,
    // adversary and channel
    pub malicious_ratio: f64,
    pub malicious_drop_prob: f64,
    pub link_failure_prob: f64,
    pub malicious_strategy: MaliciousStrategy,
    // traffic model
    pub flows_per_node: usize,
    pub packets_per_flow: usize,
    pub packet_size_bytes: u64,
    // timing
    pub update_interval: f64,
    pub run_length: u64,
    pub low_load_sync_period: u64,
    // fairness algorithm
    pub penalty_x: f64,
    pub decay_y: f64,
    pub nam_threshold: f64,
    pub forward_reward: f64,
    pub generation_cost: f64,
    pub min_credit: f64,
    pub initial_credit: f64,
    // wire model
    pub header_bytes: u64,
    pub report_per_neighbor_bytes: u64,
    pub notify_per_listed_bytes: u64,
    pub server_processing_per_report: f64,
    pub max_transmission_attempts: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 200,
            area_x: 1500.0,
            area_y: 1500.0,
            radio_range: 190.0,
            delay_index_min: 1.0,
            delay_index_max: 10.0,
            seed: 7,
            scheme: Scheme::Hybrid,
            target_zone_size: 40,
            min_zone_size: 20,
            malicious_ratio: 0.3,
            malicious_drop_prob: 0.8,
            link_failure_prob: 0.1,
            malicious_strategy: MaliciousStrategy::MaskDropsSkimGeneration,
            flows_per_node: 1,
            packets_per_flow: 1,
            packet_size_bytes: 8192,
            update_interval: 10.0,
            run_length: 30,
            low_load_sync_period: 10,
            penalty_x: 5.0,
            decay_y: 3.0,
            nam_threshold: 50.0,
            forward_reward: 1.0,
            generation_cost: 2.0,
            min_credit: 0.0,
            initial_credit: 100.0,
            header_bytes: 32,
            report_per_neighbor_bytes: 20,
            notify_per_listed_bytes: 8,
            server_processing_per_report: 0.25,
            max_transmission_attempts: 64,
        }
    }
}

impl SimConfig {
    pub fn mpifa_params(&self) -> MpifaParams {
        MpifaParams {
            penalty_x: self.penalty_x,
            decay_y: self.decay_y,
            nam_threshold: self.nam_threshold,
            forward_reward: self.forward_reward,
            generation_cost: self.generation_cost,
            min_credit: self.min_credit,
            initial_credit: self.initial_credit,
        }
    }

    pub fn node_density(&self) -> f64 {
        self.n as f64 / (self.area_x * self.area_y)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let frac = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must lie in [0,1], got {v}")))
            }
        };
        frac("malicious_ratio", self.malicious_ratio)?;
        frac("malicious_drop_prob", self.malicious_drop_prob)?;
        frac("link_failure_prob", self.link_failure_prob)?;
        if self.n < 2 {
            return Err(ConfigError::Invalid("n must be at least 2".into()));
        }
        if self.update_interval <= 0.0 {
            return Err(ConfigError::Invalid("update_interval must be positive".into()));
        }
        if self.low_load_sync_period == 0 {
            return Err(ConfigError::Invalid("low_load_sync_period must be at least 1".into()));
        }
        if self.link_failure_prob >= 1.0 {
            return Err(ConfigError::Invalid("link_failure_prob must be below 1".into()));
        }
        self.mpifa_params().validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// All settings as sorted `key=value` lines; the log header echoes this.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut kv: BTreeMap<&'static str, String> = BTreeMap::new();
        kv.insert("n", self.n.to_string());
        kv.insert("area_x", self.area_x.to_string());
        kv.insert("area_y", self.area_y.to_string());
        kv.insert("radio_range", self.radio_range.to_string());
        kv.insert("delay_index_min", self.delay_index_min.to_string());
        kv.insert("delay_index_max", self.delay_index_max.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("scheme", self.scheme.as_str().to_string());
        kv.insert("target_zone_size", self.target_zone_size.to_string());
        kv.insert("min_zone_size", self.min_zone_size.to_string());
        kv.insert("malicious_ratio", self.malicious_ratio.to_string());
        kv.insert("malicious_drop_prob", self.malicious_drop_prob.to_string());
        kv.insert("link_failure_prob", self.link_failure_prob.to_string());
        kv.insert("malicious_strategy", self.malicious_strategy.as_str().to_string());
        kv.insert("flows_per_node", self.flows_per_node.to_string());
        kv.insert("packets_per_flow", self.packets_per_flow.to_string());
        kv.insert("packet_size_bytes", self.packet_size_bytes.to_string());
        kv.insert("update_interval", self.update_interval.to_string());
        kv.insert("run_length", self.run_length.to_string());
        kv.insert("low_load_sync_period", self.low_load_sync_period.to_string());
        kv.insert("penalty_x", self.penalty_x.to_string());
        kv.insert("decay_y", self.decay_y.to_string());
        kv.insert("nam_threshold", self.nam_threshold.to_string());
        kv.insert("forward_reward", self.forward_reward.to_string());
        kv.insert("generation_cost", self.generation_cost.to_string());
        kv.insert("min_credit", self.min_credit.to_string());
        kv.insert("initial_credit", self.initial_credit.to_string());
        kv.insert("header_bytes", self.header_bytes.to_string());
        kv.insert("report_per_neighbor_bytes", self.report_per_neighbor_bytes.to_string());
        kv.insert("notify_per_listed_bytes", self.notify_per_listed_bytes.to_string());
        kv.insert("server_processing_per_report", self.server_processing_per_report.to_string());
        kv.insert("max_transmission_attempts", self.max_transmission_attempts.to_string());
        kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key {
            "n" => self.n = parse(key, value)?,
            "area_x" => self.area_x = parse(key, value)?,
            "area_y" => self.area_y = parse(key, value)?,
            "radio_range" => self.radio_range = parse(key, value)?,
            "delay_index_min" => self.delay_index_min = parse(key, value)?,
            "delay_index_max" => self.delay_index_max = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "scheme" => {
                self.scheme = match value {
                    "centralized" => Scheme::Centralized,
                    "hybrid" => Scheme::Hybrid,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                        })
                    }
                }
            }
            "target_zone_size" => self.target_zone_size = parse(key, value)?,
            "min_zone_size" => self.min_zone_size = parse(key, value)?,
            "malicious_ratio" => self.malicious_ratio = parse(key, value)?,
            "malicious_drop_prob" => self.malicious_drop_prob = parse(key, value)?,
            "link_failure_prob" => self.link_failure_prob = parse(key, value)?,
            "malicious_strategy" => {
                self.malicious_strategy = match value {
                    "mask_drops" => MaliciousStrategy::MaskDrops,
                    "mask_drops_skim_generation" => MaliciousStrategy::MaskDropsSkimGeneration,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                        })
                    }
                }
            }
            "flows_per_node" => self.flows_per_node = parse(key, value)?,
            "packets_per_flow" => self.packets_per_flow = parse(key, value)?,
            "packet_size_bytes" => self.packet_size_bytes = parse(key, value)?,
            "update_interval" => self.update_interval = parse(key, value)?,
            "run_length" => self.run_length = parse(key, value)?,
            "low_load_sync_period" => self.low_load_sync_period = parse(key, value)?,
            "penalty_x" => self.penalty_x = parse(key, value)?,
            "decay_y" => self.decay_y = parse(key, value)?,
            "nam_threshold" => self.nam_threshold = parse(key, value)?,
            "forward_reward" => self.forward_reward = parse(key, value)?,
            "generation_cost" => self.generation_cost = parse(key, value)?,
            "min_credit" => self.min_credit = parse(key, value)?,
            "initial_credit" => self.initial_credit = parse(key, value)?,
            "header_bytes" => self.header_bytes = parse(key, value)?,
            "report_per_neighbor_bytes" => self.report_per_neighbor_bytes = parse(key, value)?,
            "notify_per_listed_bytes" => self.notify_per_listed_bytes = parse(key, value)?,
            "server_processing_per_report" => {
                self.server_processing_per_report = parse(key, value)?
            }
            "max_transmission_attempts" => self.max_transmission_attempts = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses a flat `key=value` file on top of the defaults. Blank lines
    /// and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies `key=value` lines on top of the current settings.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Serializes as a loadable config file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_key_values() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}
