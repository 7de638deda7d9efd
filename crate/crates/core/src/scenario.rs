//! Scenario files: the JSON description of a network, its factor levels and
//! the run parameters.
//!
//! Every optional field has a default, and serialising a parsed config writes
//! all of them out, so the serialised form (the "effective config") fully
//! describes a run. Parsing that output again gives back an identical value.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::stochastic::check_support;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    /// Dotted path of the offending field, `.` for the document root.
    pub path: String,
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " (line {l}, column {c})")?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
            line: None,
            column: None,
        }
    }
}

/// A factor level: `-`, `0` or `+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Level {
    #[serde(rename = "-", alias = "minus")]
    Minus,
    #[default]
    #[serde(rename = "0", alias = "zero")]
    Zero,
    #[serde(rename = "+", alias = "plus")]
    Plus,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Minus, Level::Zero, Level::Plus];

    pub fn index(self) -> usize {
        match self {
            Level::Minus => 0,
            Level::Zero => 1,
            Level::Plus => 2,
        }
    }

    pub fn sign(self) -> &'static str {
        match self {
            Level::Minus => "-",
            Level::Zero => "0",
            Level::Plus => "+",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sign())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorLevels {
    #[serde(default)]
    pub demand_intensity: Level,
    #[serde(default)]
    pub demand_variability: Level,
    #[serde(default)]
    pub lead_time: Level,
}

impl FactorLevels {
    pub fn new(demand_intensity: Level, demand_variability: Level, lead_time: Level) -> Self {
        FactorLevels {
            demand_intensity,
            demand_variability,
            lead_time,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "({},{},{})",
            self.demand_intensity, self.demand_variability, self.lead_time
        )
    }
}

/// How intensity levels map onto the inter-arrival column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityMapping {
    /// `+` (high intensity) takes the shortest inter-arrival time.
    #[default]
    Inverse,
    /// `+` takes the last column as written.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityRange {
    pub min: u32,
    pub mode: u32,
    pub max: u32,
}

impl QuantityRange {
    pub fn symmetric(min: u32, max: u32) -> Self {
        QuantityRange {
            min,
            mode: (min + max) / 2,
            max,
        }
    }
}

/// Values taken by each factor at its three levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelValues {
    /// Mean customer inter-arrival time in working hours, in column order
    /// (minimum, medium, high).
    #[serde(default = "default_interarrival")]
    pub interarrival_hours: [f64; 3],
    #[serde(default = "default_variability")]
    pub demand_quantity: [QuantityRange; 3],
    #[serde(default = "default_lead_times")]
    pub lead_time_days: [u32; 3],
}

fn default_interarrival() -> [f64; 3] {
    [3.0, 5.0, 8.0]
}

fn default_variability() -> [QuantityRange; 3] {
    [
        QuantityRange::symmetric(18, 22),
        QuantityRange::symmetric(16, 24),
        QuantityRange::symmetric(14, 26),
    ]
}

fn default_lead_times() -> [u32; 3] {
    [2, 3, 4]
}

impl Default for LevelValues {
    fn default() -> Self {
        LevelValues {
            interarrival_hours: default_interarrival(),
            demand_quantity: default_variability(),
            lead_time_days: default_lead_times(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCounts {
    pub stores: u32,
    pub distribution_centers: u32,
    pub suppliers: u32,
    pub items: u32,
    /// Supplier `j` adds `(j + item) % (spread + 1)` days on top of the
    /// lead-time level, so suppliers differ and selection matters.
    #[serde(default = "default_spread")]
    pub supplier_lead_time_spread: u32,
}

fn default_spread() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandModel {
    /// Poisson arrivals and triangular quantities from the factor levels.
    #[default]
    Stochastic,
    /// One arrival every `interval_hours`, quantities cycling through the list.
    Fixed {
        interval_hours: f64,
        first_arrival_hours: f64,
        quantities: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "default_forecast_window")]
    pub forecast_window: u32,
    #[serde(default = "default_safety_window")]
    pub safety_stock_window: u32,
    #[serde(default = "default_store_s")]
    pub store_order_up_to: u64,
    #[serde(default = "default_dc_s")]
    pub dc_order_up_to: u64,
}

fn default_forecast_window() -> u32 {
    20
}
fn default_safety_window() -> u32 {
    60
}
fn default_store_s() -> u64 {
    200
}
fn default_dc_s() -> u64 {
    2000
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            forecast_window: default_forecast_window(),
            safety_stock_window: default_safety_window(),
            store_order_up_to: default_store_s(),
            dc_order_up_to: default_dc_s(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_run_length")]
    pub run_length_days: u32,
    #[serde(default = "default_reps")]
    pub replications: u32,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Common random numbers: streams depend on seed and replication only,
    /// not on the scenario.
    #[serde(default)]
    pub crn: bool,
    #[serde(default)]
    pub warmup_days: u32,
}

fn default_run_length() -> u32 {
    390
}
fn default_reps() -> u32 {
    3
}
fn default_seed() -> u64 {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_length_days: default_run_length(),
            replications: default_reps(),
            master_seed: default_seed(),
            crn: false,
            warmup_days: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemOverride {
    pub item: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_intensity: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_variability: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead_time: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_order_up_to: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc_order_up_to: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub network: NetworkCounts,
    #[serde(default)]
    pub factors: FactorLevels,
    #[serde(default)]
    pub level_values: LevelValues,
    #[serde(default)]
    pub intensity_mapping: IntensityMapping,
    #[serde(default)]
    pub demand: DemandModel,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub item_overrides: Vec<ItemOverride>,
}

/// Parameters of one item after factor levels and overrides are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemParams {
    pub interarrival_hours: f64,
    pub quantity: QuantityRange,
    pub lead_time_days: u32,
    pub store_order_up_to: u64,
    pub dc_order_up_to: u64,
}

impl ScenarioConfig {
    pub fn new(stores: u32, distribution_centers: u32, suppliers: u32, items: u32) -> Self {
        ScenarioConfig {
            name: String::new(),
            network: NetworkCounts {
                stores,
                distribution_centers,
                suppliers,
                items,
                supplier_lead_time_spread: default_spread(),
            },
            factors: FactorLevels::default(),
            level_values: LevelValues::default(),
            intensity_mapping: IntensityMapping::default(),
            demand: DemandModel::default(),
            policy: PolicyConfig::default(),
            run: RunConfig::default(),
            item_overrides: Vec::new(),
        }
    }

    /// 50 stores, 3 distribution centers, 10 suppliers, 30 items.
    pub fn full_network() -> Self {
        let mut c = ScenarioConfig::new(50, 3, 10, 30);
        c.policy.dc_order_up_to = 6000;
        c
    }

    /// Desk-scale network: 5 stores, 1 DC, 2 suppliers, 3 items.
    pub fn reduced() -> Self {
        ScenarioConfig::new(5, 1, 2, 3)
    }

    /// Parse and validate a scenario document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError {
                path,
                message: strip_position(&inner.to_string()),
                line: Some(inner.line()),
                column: Some(inner.column()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The effective config, pretty-printed with every default filled in.
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    /// Compact serialisation used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.network;
        for (name, v) in [
            ("stores", n.stores),
            ("distribution_centers", n.distribution_centers),
            ("suppliers", n.suppliers),
            ("items", n.items),
        ] {
            if v == 0 {
                return Err(ConfigError::field(format!("network.{name}"), "must be at least 1"));
            }
        }
        if n.distribution_centers > n.stores {
            return Err(ConfigError::field(
                "network.distribution_centers",
                "cannot exceed the number of stores",
            ));
        }
        let lv = &self.level_values;
        for (i, h) in lv.interarrival_hours.iter().enumerate() {
            if !(h.is_finite() && *h > 0.0) {
                return Err(ConfigError::field(
                    format!("level_values.interarrival_hours[{i}]"),
                    "must be a positive number of hours",
                ));
            }
        }
        for (i, q) in lv.demand_quantity.iter().enumerate() {
            if check_support(q.min, q.mode, q.max).is_err() {
                return Err(ConfigError::field(
                    format!("level_values.demand_quantity[{i}]"),
                    "needs 0 < min <= mode <= max",
                ));
            }
        }
        for (i, lt) in lv.lead_time_days.iter().enumerate() {
            if *lt == 0 {
                return Err(ConfigError::field(
                    format!("level_values.lead_time_days[{i}]"),
                    "must be at least 1 day",
                ));
            }
        }
        if let DemandModel::Fixed {
            interval_hours,
            first_arrival_hours,
            quantities,
        } = &self.demand
        {
            if !(interval_hours.is_finite() && *interval_hours > 0.0) {
                return Err(ConfigError::field("demand.interval_hours", "must be positive"));
            }
            if !(first_arrival_hours.is_finite() && *first_arrival_hours >= 0.0) {
                return Err(ConfigError::field(
                    "demand.first_arrival_hours",
                    "must be nonnegative",
                ));
            }
            if quantities.is_empty() || quantities.contains(&0) {
                return Err(ConfigError::field(
                    "demand.quantities",
                    "must be a nonempty list of positive quantities",
                ));
            }
        }
        let p = &self.policy;
        if p.forecast_window == 0 {
            return Err(ConfigError::field("policy.forecast_window", "must be at least 1"));
        }
        if p.safety_stock_window == 0 {
            return Err(ConfigError::field("policy.safety_stock_window", "must be at least 1"));
        }
        if p.store_order_up_to == 0 {
            return Err(ConfigError::field("policy.store_order_up_to", "must be positive"));
        }
        if p.dc_order_up_to == 0 {
            return Err(ConfigError::field("policy.dc_order_up_to", "must be positive"));
        }
        let r = &self.run;
        if r.run_length_days == 0 {
            return Err(ConfigError::field("run.run_length_days", "must be at least 1"));
        }
        if r.replications == 0 {
            return Err(ConfigError::field("run.replications", "must be at least 1"));
        }
        if r.warmup_days >= r.run_length_days {
            return Err(ConfigError::field(
                "run.warmup_days",
                "must be shorter than the run length",
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, o) in self.item_overrides.iter().enumerate() {
            if o.item >= n.items {
                return Err(ConfigError::field(
                    format!("item_overrides[{i}].item"),
                    format!("item {} does not exist ({} items)", o.item, n.items),
                ));
            }
            if !seen.insert(o.item) {
                return Err(ConfigError::field(
                    format!("item_overrides[{i}].item"),
                    format!("item {} overridden twice", o.item),
                ));
            }
            if o.store_order_up_to == Some(0) {
                return Err(ConfigError::field(
                    format!("item_overrides[{i}].store_order_up_to"),
                    "must be positive",
                ));
            }
            if o.dc_order_up_to == Some(0) {
                return Err(ConfigError::field(
                    format!("item_overrides[{i}].dc_order_up_to"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    pub fn interarrival_for(&self, level: Level) -> f64 {
        let column = match self.intensity_mapping {
            IntensityMapping::Inverse => 2 - level.index(),
            IntensityMapping::Direct => level.index(),
        };
        self.level_values.interarrival_hours[column]
    }

    pub fn item_params(&self, item: u32) -> ItemParams {
        let o = self.item_overrides.iter().find(|o| o.item == item);
        let intensity = o
            .and_then(|o| o.demand_intensity)
            .unwrap_or(self.factors.demand_intensity);
        let variability = o
            .and_then(|o| o.demand_variability)
            .unwrap_or(self.factors.demand_variability);
        let lead = o.and_then(|o| o.lead_time).unwrap_or(self.factors.lead_time);
        ItemParams {
            interarrival_hours: self.interarrival_for(intensity),
            quantity: self.level_values.demand_quantity[variability.index()],
            lead_time_days: self.level_values.lead_time_days[lead.index()],
            store_order_up_to: o
                .and_then(|o| o.store_order_up_to)
                .unwrap_or(self.policy.store_order_up_to),
            dc_order_up_to: o
                .and_then(|o| o.dc_order_up_to)
                .unwrap_or(self.policy.dc_order_up_to),
        }
    }
}

/// serde_json appends " at line L column C"; positions are kept separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
