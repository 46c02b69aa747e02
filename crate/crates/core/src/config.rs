//! Scenario files: the world plus the episode settings, as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::EnvConfig;
use crate::error::{Result, SimError};
use crate::platoon::PlatoonSpec;
use crate::sim::world::WorldConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub world: WorldConfig,
    pub env: EnvConfig,
}

impl Default for ScenarioConfig {
    /// The experiment scenario: a subcritical mainline, a warmed-up road when
    /// the platoon arrives and congestion measured against the speed at
    /// which the car-following model carries its peak flow.
    fn default() -> Self {
        let mut world = WorldConfig::default();
        world.flow.mainline_rate = 2000.0;
        world.flow.ramp_rate = 600.0;
        world.platoons = vec![PlatoonSpec { scheduled_arrival_s: 120.0, ..Default::default() }];
        let mut env = EnvConfig::default();
        env.reward.l_segment = world.road.segment_length;
        let mean_length = 0.5 * (world.vehicle_length.0 + world.vehicle_length.1);
        env.reward.v_congestion = world.idm.with_desired_speed(world.road.speed_limit).capacity_speed(mean_length);
        Self { world, env }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.env.validate()?;
        if (self.env.reward.l_segment - self.world.road.segment_length).abs() > 1e-9 {
            return Err(SimError::Config {
                key: "env.reward.l_segment".into(),
                reason: format!("must equal road.segment_length ({})", self.world.road.segment_length),
            });
        }
        if let Some(p) = self.world.platoons.iter().find(|p| p.size > self.env.n_max) {
            return Err(SimError::PlatoonTooLarge { size: p.size, n_max: self.env.n_max });
        }
        Ok(())
    }

    /// Parse and validate. Keys missing from `text` keep the values of
    /// [`ScenarioConfig::default`]; entries of a list are patched onto the
    /// first default entry. Syntax and type errors carry the line, column and
    /// dotted key where they occurred.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize::<_, Self>(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            SimError::ConfigParse { key, line: inner.line(), column: inner.column(), message: inner.to_string() }
        })?;
        let mut merged = serde_json::to_value(Self::default())?;
        merge(&mut merged, serde_json::from_str(text)?);
        let config: Self = serde_json::from_value(merged)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(base), Value::Object(patch)) => {
            for (k, v) in patch {
                match base.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        base.insert(k, v);
                    }
                }
            }
        }
        (Value::Array(base), Value::Array(patch)) => {
            let template = base.first().cloned();
            *base = patch
                .into_iter()
                .map(|entry| match &template {
                    Some(t) if entry.is_object() => {
                        let mut item = t.clone();
                        merge(&mut item, entry);
                        item
                    }
                    _ => entry,
                })
                .collect();
        }
        (slot, patch) => *slot = patch,
    }
}
