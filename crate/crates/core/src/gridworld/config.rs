use serde::{Deserialize, Serialize};

use super::types::Achievement;
use super::GridError;

/// Fraction of generated cells per object kind. The remainder is grass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Densities {
    pub water: f64,
    pub tree: f64,
    pub stone: f64,
    pub coal: f64,
    pub iron: f64,
    pub sapling: f64,
    pub plant: f64,
}

impl Default for Densities {
    fn default() -> Self {
        Self {
            water: 0.05,
            tree: 0.12,
            stone: 0.16,
            coal: 0.05,
            iron: 0.04,
            sapling: 0.02,
            plant: 0.02,
        }
    }
}

impl Densities {
    fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("water", self.water),
            ("tree", self.tree),
            ("stone", self.stone),
            ("coal", self.coal),
            ("iron", self.iron),
            ("sapling", self.sapling),
            ("plant", self.plant),
        ]
    }

    /// Cumulative per-mille thresholds, in generation order.
    pub(crate) fn per_mille(&self) -> [u32; 7] {
        let mut acc = 0u32;
        let mut out = [0u32; 7];
        for (slot, (_, d)) in out.iter_mut().zip(self.entries()) {
            acc += (d * 1000.0).round() as u32;
            *slot = acc;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Paid once per achievement per episode.
    pub achievement: f64,
    pub death: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            achievement: 1.0,
            death: -0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VitalsConfig {
    pub food_decay_ticks: u32,
    pub drink_decay_ticks: u32,
    /// Health moves by one every this many ticks: down while starving or
    /// parched, up otherwise.
    pub health_ticks: u32,
}

impl Default for VitalsConfig {
    fn default() -> Self {
        Self {
            food_decay_ticks: 30,
            drink_decay_ticks: 25,
            health_ticks: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZombieConfig {
    pub count: u32,
    pub health: u8,
    /// Manhattan radius inside which a zombie walks toward the agent.
    pub chase_radius: u32,
    pub move_period: u32,
    pub damage: u8,
    pub cooldown: u8,
}

impl Default for ZombieConfig {
    fn default() -> Self {
        Self {
            count: 1,
            health: 3,
            chase_radius: 4,
            move_period: 2,
            damage: 2,
            cooldown: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub width: u32,
    pub height: u32,
    pub view_width: u32,
    pub view_height: u32,
    pub densities: Densities,
    pub horizon: u32,
    pub achievements: Vec<Achievement>,
    pub rewards: RewardConfig,
    /// Chebyshev radius for "nearby table/furnace" checks.
    pub nearby_radius: u32,
    pub vitals: VitalsConfig,
    pub zombies: ZombieConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            width: 12,
            height: 12,
            view_width: 7,
            view_height: 5,
            densities: Densities::default(),
            horizon: 1000,
            achievements: Achievement::ALL.to_vec(),
            rewards: RewardConfig::default(),
            nearby_radius: 2,
            vitals: VitalsConfig::default(),
            zombies: ZombieConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |msg: String| Err(GridError::InvalidConfig(msg));
        if self.view_width == 0 || self.view_height == 0 {
            return bad("view dimensions must be positive".into());
        }
        if self.view_width.is_multiple_of(2) || self.view_height.is_multiple_of(2) {
            return bad(format!(
                "view {}x{} must have odd dimensions to center the agent",
                self.view_width, self.view_height
            ));
        }
        if self.width < self.view_width || self.height < self.view_height {
            return bad(format!(
                "map {}x{} is smaller than view {}x{}",
                self.width, self.height, self.view_width, self.view_height
            ));
        }
        if self.width > 1024 || self.height > 1024 {
            return bad("map dimensions above 1024".into());
        }
        for (name, d) in self.densities.entries() {
            if !(0.0..=1.0).contains(&d) || d.is_nan() {
                return bad(format!("density `{name}` = {d} outside [0,1]"));
            }
        }
        let total = self.densities.per_mille()[6];
        if total > 1000 {
            return bad(format!("densities sum to {:.3} > 1", total as f64 / 1000.0));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        let mut seen = Vec::new();
        for a in &self.achievements {
            if seen.contains(a) {
                return bad(format!("achievement {a} listed twice"));
            }
            seen.push(*a);
        }
        if !self.rewards.achievement.is_finite() || !self.rewards.death.is_finite() {
            return bad("reward constants must be finite".into());
        }
        if self.vitals.food_decay_ticks == 0
            || self.vitals.drink_decay_ticks == 0
            || self.vitals.health_ticks == 0
            || self.zombies.move_period == 0
        {
            return bad("tick periods must be positive".into());
        }
        Ok(())
    }

    pub fn is_configured(&self, a: Achievement) -> bool {
        self.achievements.contains(&a)
    }
}
