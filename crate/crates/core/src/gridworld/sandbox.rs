//! Isolated worlds for testing one hypothesized cause-effect relation.

use super::config::EnvConfig;
use super::rules::{Channel, InputRole, Rule, RuleTable, Target};
use super::types::{Cell, Facing, Inventory, Vitals};
use super::world::{Agent, GridWorld, Pos, WorldState};
use super::GridError;

/// A fresh sandbox plus the action that constitutes the intervention.
#[derive(Debug, Clone)]
pub struct ValidEnv {
    pub env: GridWorld,
    pub required_action: super::types::Action,
    /// Cell the agent must face before acting, if any.
    pub facing_target: Option<Cell>,
    pub cause: &'static str,
    pub effect: &'static str,
    pub rule: &'static str,
}

impl ValidEnv {
    /// Observed value of the effect variable in the sandbox right now.
    pub fn effect_value(&self) -> u32 {
        let spec = RuleTable::standard()
            .variable(self.effect)
            .expect("effect was resolved at build time");
        self.env.state().channel_value(spec.channel)
    }

    pub fn effect_channel(&self) -> Channel {
        RuleTable::standard()
            .variable(self.effect)
            .expect("effect was resolved at build time")
            .channel
    }
}

fn diagonal_corners((x, y): Pos) -> [Pos; 4] {
    [(x - 1, y - 1), (x + 1, y - 1), (x - 1, y + 1), (x + 1, y + 1)]
}

/// Builds a world where `cause` is present and `required_action` exercises it.
///
/// Placeable objects go on the four diagonal cells around the agent; held
/// prerequisites are preloaded into the inventory.
pub fn build_valid_env(
    cause: &str,
    effect: &str,
    base: &EnvConfig,
    seed: u64,
) -> Result<ValidEnv, GridError> {
    let table = RuleTable::standard();
    let cause_spec = table
        .variable(cause)
        .ok_or_else(|| GridError::UnknownVariable(cause.to_string()))?;
    let effect_spec = table
        .variable(effect)
        .ok_or_else(|| GridError::UnknownVariable(effect.to_string()))?;
    let not_interventable = |reason: &str| GridError::NotInterventable {
        cause: cause.to_string(),
        effect: effect.to_string(),
        reason: reason.to_string(),
    };

    let readers = table.rules_reading(cause);
    let (rule, role): (&Rule, InputRole) = readers
        .iter()
        .find(|(r, _)| table.outputs(r).contains(&effect_spec.name))
        .or_else(|| readers.first())
        .copied()
        .ok_or_else(|| not_interventable("no action reads the cause"))?;
    if role != InputRole::Held && cause_spec.placeable().is_none() {
        return Err(not_interventable("the cause cannot be placed"));
    }
    let facing_target = match rule.target {
        Target::Cell(c) => Some(c),
        Target::Zombie => return Err(not_interventable("the cause cannot be placed")),
        Target::None | Target::Ground => None,
    };

    let mut config = base.clone();
    config.zombies.count = 0;
    let (w, h) = (config.width, config.height);
    let center = ((w / 2) as i32, (h / 2) as i32);
    let mut state = WorldState {
        width: w,
        height: h,
        cells: vec![Cell::Grass; (w * h) as usize],
        agent: Agent {
            pos: center,
            facing: Facing::Down,
            vitals: Vitals {
                food: 5,
                drink: 5,
                ..Vitals::default()
            },
        },
        inventory: Inventory::default(),
        zombies: Vec::new(),
        tick: 0,
        unlocked: Default::default(),
        seed,
    };
    for placed in facing_target.into_iter().chain(rule.nearby) {
        for p in diagonal_corners(center) {
            state.set_cell(p, placed);
        }
    }
    for &(item, n) in rule.requires.iter().chain(rule.consumes) {
        let have = state.inventory.get(item);
        state.inventory.set(item, have.max(n));
    }

    Ok(ValidEnv {
        env: GridWorld::from_state(config, state)?,
        required_action: rule.action,
        facing_target,
        cause: cause_spec.name,
        effect: effect_spec.name,
        rule: rule.name,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::types::{Action, Item};

    #[test]
    fn tree_wood_sandbox_has_four_corner_trees() {
        let v = build_valid_env("tree", "wood", &EnvConfig::default(), 0).unwrap();
        assert_eq!(v.required_action, Action::Interact);
        let s = v.env.state();
        for p in diagonal_corners(s.agent.pos) {
            assert_eq!(s.cell(p), Some(Cell::Tree));
        }
        assert_eq!(s.census(Cell::Tree), 4);
        assert!(s.zombies.is_empty());
    }

    #[test]
    fn wood_pickaxe_sandbox_preloads_wood_and_a_table() {
        let v = build_valid_env("wood", "wood_pickaxe", &EnvConfig::default(), 0).unwrap();
        assert_eq!(v.required_action, Action::CraftWoodPickaxe);
        let s = v.env.state();
        assert!(s.inventory.get(Item::Wood) >= 1);
        assert!(s.census(Cell::Table) >= 1);
        let mut env = v.env.clone();
        env.step(v.required_action).unwrap();
        assert_eq!(env.state().inventory.get(Item::WoodPickaxe), 1);
    }

    #[test]
    fn zombie_is_not_interventable() {
        let e = build_valid_env("zombie", "health", &EnvConfig::default(), 0).unwrap_err();
        assert!(matches!(e, GridError::NotInterventable { .. }));
    }

    #[test]
    fn effect_without_matching_rule_still_builds() {
        let v = build_valid_env("tree", "stone", &EnvConfig::default(), 0).unwrap();
        assert_eq!(v.rule, "collect_wood");
        assert_eq!(v.effect_value(), 0);
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(
            build_valid_env("dragon", "wood", &EnvConfig::default(), 0),
            Err(GridError::UnknownVariable(_))
        ));
    }
}
