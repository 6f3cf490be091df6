//! TOML configuration with `[filter]` and `[probe]` tables.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::filter::FilterConfig;
use crate::probe::{ProbeBudget, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub max_probes: usize,
    pub max_time_secs: f64,
    pub stages: Vec<Strategy>,
    pub unsafe_methods: bool,
    pub tau: f64,
    /// Path on the target origin hit before each stage replay.
    pub reset_path: Option<String>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        let b = ProbeBudget::default();
        ProbeConfig {
            max_probes: b.max_probes_executed,
            max_time_secs: b.max_wall_time.as_secs_f64(),
            stages: Strategy::ALL.to_vec(),
            unsafe_methods: b.unsafe_methods,
            tau: 0.0,
            reset_path: None,
        }
    }
}

impl ProbeConfig {
    pub fn budget(&self) -> ProbeBudget {
        ProbeBudget {
            max_probes_executed: self.max_probes,
            max_wall_time: Duration::from_secs_f64(self.max_time_secs.max(0.0)),
            stages_enabled: self.stages.iter().copied().collect(),
            unsafe_methods: self.unsafe_methods,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub filter: FilterConfig,
    pub probe: ProbeConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
