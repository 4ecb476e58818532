//! The rule table: what each action does, under which preconditions, and the
//! causal variables those rules connect.
//!
//! Every causal variable is observed through one channel (an inventory count,
//! a cell census, a vital, or the zombie count). Rule inputs and outputs are
//! derived from the mechanics, and the ground-truth relation set is exactly
//! the cross product of inputs and outputs per rule.

use std::sync::OnceLock;

use crate::scm::{CausalGraph, CausalVariable, VariableKind};

use super::types::{Achievement, Action, Cell, Item, Stat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Inventory(Item),
    /// Census of this cell kind over the whole map.
    Cell(Cell),
    Stat(Stat),
    Zombies,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpec {
    pub name: &'static str,
    pub kind: VariableKind,
    pub channel: Channel,
    /// Canonical goal phrase when this variable is a sub-goal.
    pub goal_phrase: &'static str,
}

impl VariableSpec {
    /// Cell kind the sandbox builder may place for this variable.
    pub fn placeable(&self) -> Option<Cell> {
        match self.channel {
            Channel::Cell(c) => Some(c),
            _ => None,
        }
    }
}

/// What the agent must be facing for a rule to fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    None,
    Cell(Cell),
    /// Grass or path, free of zombies.
    Ground,
    Zombie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Gain(Item),
    Place(Cell),
    Restore(Stat, u8),
    DamageZombie,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: &'static str,
    pub action: Action,
    pub target: Target,
    /// Target cell after the rule fires (for `Target::Cell`).
    pub target_becomes: Option<Cell>,
    pub nearby: Option<Cell>,
    /// Held but not consumed.
    pub requires: &'static [(Item, u8)],
    pub consumes: &'static [(Item, u8)],
    pub effect: Effect,
    pub achievement: Option<Achievement>,
}

/// How a variable participates in a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputRole {
    Facing,
    Nearby,
    Held,
}

#[derive(Debug)]
pub struct RuleTable {
    variables: Vec<VariableSpec>,
    rules: Vec<Rule>,
}

const fn var(
    name: &'static str,
    kind: VariableKind,
    channel: Channel,
    goal_phrase: &'static str,
) -> VariableSpec {
    VariableSpec {
        name,
        kind,
        channel,
        goal_phrase,
    }
}

impl RuleTable {
    pub fn standard() -> &'static RuleTable {
        static TABLE: OnceLock<RuleTable> = OnceLock::new();
        TABLE.get_or_init(RuleTable::build_standard)
    }

    fn build_standard() -> RuleTable {
        use VariableKind::*;
        let variables = vec![
            var("tree", Resource, Channel::Cell(Cell::Tree), "find tree"),
            var("wood", Material, Channel::Inventory(Item::Wood), "obtaining wood"),
            var("table", Tool, Channel::Cell(Cell::Table), "place table"),
            var("wood_pickaxe", Tool, Channel::Inventory(Item::WoodPickaxe), "make wood_pickaxe"),
            var("stone", Material, Channel::Inventory(Item::Stone), "obtaining stone"),
            var("stone_pickaxe", Tool, Channel::Inventory(Item::StonePickaxe), "make stone_pickaxe"),
            var("coal", Material, Channel::Inventory(Item::Coal), "obtaining coal"),
            var("iron", Material, Channel::Inventory(Item::Iron), "obtaining iron"),
            var("furnace", Tool, Channel::Cell(Cell::Furnace), "place furnace"),
            var("iron_pickaxe", Tool, Channel::Inventory(Item::IronPickaxe), "make iron_pickaxe"),
            var("water", Resource, Channel::Cell(Cell::Water), "find water"),
            var("drink", PlayerStat, Channel::Stat(Stat::Drink), "drink water"),
            var("sapling", Material, Channel::Inventory(Item::Sapling), "obtaining sapling"),
            var("plant", Resource, Channel::Cell(Cell::Plant), "place plant"),
            var("food", PlayerStat, Channel::Stat(Stat::Food), "eat plant"),
            var("zombie", Entity, Channel::Zombies, "defeat zombie"),
            var("health", PlayerStat, Channel::Stat(Stat::Health), "restore health"),
        ];
        let rules = vec![
            Rule {
                name: "collect_wood",
                action: Action::Interact,
                target: Target::Cell(Cell::Tree),
                target_becomes: Some(Cell::Grass),
                nearby: None,
                requires: &[],
                consumes: &[],
                effect: Effect::Gain(Item::Wood),
                achievement: Some(Achievement::CollectWood),
            },
            Rule {
                name: "collect_stone",
                action: Action::Interact,
                target: Target::Cell(Cell::StoneBlock),
                target_becomes: Some(Cell::Path),
                nearby: None,
                requires: &[(Item::WoodPickaxe, 1)],
                consumes: &[],
                effect: Effect::Gain(Item::Stone),
                achievement: Some(Achievement::CollectStone),
            },
            Rule {
                name: "collect_coal",
                action: Action::Interact,
                target: Target::Cell(Cell::CoalBlock),
                target_becomes: Some(Cell::Path),
                nearby: None,
                requires: &[(Item::StonePickaxe, 1)],
                consumes: &[],
                effect: Effect::Gain(Item::Coal),
                achievement: Some(Achievement::CollectCoal),
            },
            Rule {
                name: "collect_iron",
                action: Action::Interact,
                target: Target::Cell(Cell::IronBlock),
                target_becomes: Some(Cell::Path),
                nearby: None,
                requires: &[(Item::StonePickaxe, 1)],
                consumes: &[],
                effect: Effect::Gain(Item::Iron),
                achievement: Some(Achievement::CollectIron),
            },
            Rule {
                name: "collect_sapling",
                action: Action::Interact,
                target: Target::Cell(Cell::Sapling),
                target_becomes: Some(Cell::Grass),
                nearby: None,
                requires: &[],
                consumes: &[],
                effect: Effect::Gain(Item::Sapling),
                achievement: None,
            },
            Rule {
                name: "place_sapling",
                action: Action::PlaceSapling,
                target: Target::Ground,
                target_becomes: None,
                nearby: None,
                requires: &[],
                consumes: &[(Item::Sapling, 1)],
                effect: Effect::Place(Cell::Plant),
                achievement: None,
            },
            Rule {
                name: "place_table",
                action: Action::PlaceTable,
                target: Target::Ground,
                target_becomes: None,
                nearby: None,
                requires: &[],
                consumes: &[(Item::Wood, 1)],
                effect: Effect::Place(Cell::Table),
                achievement: Some(Achievement::PlaceTable),
            },
            Rule {
                name: "place_furnace",
                action: Action::PlaceFurnace,
                target: Target::Ground,
                target_becomes: None,
                nearby: Some(Cell::Table),
                requires: &[],
                consumes: &[(Item::Stone, 1)],
                effect: Effect::Place(Cell::Furnace),
                achievement: None,
            },
            Rule {
                name: "make_wood_pickaxe",
                action: Action::CraftWoodPickaxe,
                target: Target::None,
                target_becomes: None,
                nearby: Some(Cell::Table),
                requires: &[],
                consumes: &[(Item::Wood, 1)],
                effect: Effect::Gain(Item::WoodPickaxe),
                achievement: Some(Achievement::MakeWoodPickaxe),
            },
            Rule {
                name: "make_stone_pickaxe",
                action: Action::CraftStonePickaxe,
                target: Target::None,
                target_becomes: None,
                nearby: Some(Cell::Table),
                requires: &[],
                consumes: &[(Item::Wood, 1), (Item::Stone, 1)],
                effect: Effect::Gain(Item::StonePickaxe),
                achievement: Some(Achievement::MakeStonePickaxe),
            },
            Rule {
                name: "make_iron_pickaxe",
                action: Action::CraftIronPickaxe,
                target: Target::None,
                target_becomes: None,
                nearby: Some(Cell::Furnace),
                requires: &[],
                consumes: &[(Item::Wood, 1), (Item::Coal, 1), (Item::Iron, 1)],
                effect: Effect::Gain(Item::IronPickaxe),
                achievement: Some(Achievement::MakeIronPickaxe),
            },
            Rule {
                name: "drink_water",
                action: Action::Drink,
                target: Target::Cell(Cell::Water),
                target_becomes: None,
                nearby: None,
                requires: &[],
                consumes: &[],
                effect: Effect::Restore(Stat::Drink, 1),
                achievement: Some(Achievement::CollectDrink),
            },
            Rule {
                name: "eat_plant",
                action: Action::Eat,
                target: Target::Cell(Cell::Plant),
                target_becomes: Some(Cell::Grass),
                nearby: None,
                requires: &[],
                consumes: &[],
                effect: Effect::Restore(Stat::Food, 4),
                achievement: None,
            },
            Rule {
                name: "attack_zombie",
                action: Action::Attack,
                target: Target::Zombie,
                target_becomes: None,
                nearby: None,
                requires: &[],
                consumes: &[],
                effect: Effect::DamageZombie,
                achievement: None,
            },
        ];
        RuleTable { variables, rules }
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn variable_id(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn vocabulary(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.to_string()).collect()
    }

    /// An edgeless causal graph over the table's variables.
    pub fn empty_graph(&self) -> CausalGraph {
        CausalGraph::new(
            self.variables
                .iter()
                .enumerate()
                .map(|(i, v)| CausalVariable::new(i, v.name, v.kind))
                .collect(),
        )
        .expect("standard variable table is well-formed")
    }

    fn variable_for(&self, channel: Channel) -> Option<&'static str> {
        self.variables
            .iter()
            .find(|v| v.channel == channel)
            .map(|v| v.name)
    }

    /// Variables a rule reads, with the role each one plays.
    pub fn inputs(&self, rule: &Rule) -> Vec<(&'static str, InputRole)> {
        let mut out = Vec::new();
        let mut push = |name: Option<&'static str>, role| {
            if let Some(n) = name {
                if !out.iter().any(|(m, _)| *m == n) {
                    out.push((n, role));
                }
            }
        };
        match rule.target {
            Target::Cell(c) => push(self.variable_for(Channel::Cell(c)), InputRole::Facing),
            Target::Zombie => push(self.variable_for(Channel::Zombies), InputRole::Facing),
            Target::Ground | Target::None => {}
        }
        if let Some(c) = rule.nearby {
            push(self.variable_for(Channel::Cell(c)), InputRole::Nearby);
        }
        for &(item, _) in rule.requires.iter().chain(rule.consumes) {
            push(self.variable_for(Channel::Inventory(item)), InputRole::Held);
        }
        out
    }

    /// Variables a rule increases.
    pub fn outputs(&self, rule: &Rule) -> Vec<&'static str> {
        let channel = match rule.effect {
            Effect::Gain(item) => Some(Channel::Inventory(item)),
            Effect::Place(cell) => Some(Channel::Cell(cell)),
            Effect::Restore(stat, _) => Some(Channel::Stat(stat)),
            Effect::DamageZombie => None,
        };
        channel
            .and_then(|c| self.variable_for(c))
            .into_iter()
            .collect()
    }

    /// Every `(cause, effect)` pair induced by the table, in rule order.
    pub fn ground_truth_relations(&self) -> Vec<(&'static str, &'static str)> {
        let mut out: Vec<(&'static str, &'static str)> = Vec::new();
        for rule in &self.rules {
            let outputs = self.outputs(rule);
            for (cause, _) in self.inputs(rule) {
                for &effect in &outputs {
                    if cause != effect && !out.contains(&(cause, effect)) {
                        out.push((cause, effect));
                    }
                }
            }
        }
        out
    }

    /// Rules that read `cause`, in table order.
    pub fn rules_reading(&self, cause: &str) -> Vec<(&Rule, InputRole)> {
        self.rules
            .iter()
            .filter_map(|r| {
                self.inputs(r)
                    .into_iter()
                    .find(|(n, _)| *n == cause)
                    .map(|(_, role)| (r, role))
            })
            .collect()
    }
}
