use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::types::{AchievementSet, Cell, Facing, Inventory, Vitals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewCell {
    OutOfBounds,
    Terrain(Cell),
    Zombie,
}

impl ViewCell {
    /// Number of distinct classes, for one-hot encodings.
    pub const CLASSES: usize = Cell::ALL.len() + 2;

    pub fn class(self) -> usize {
        match self {
            ViewCell::Terrain(c) => c.index(),
            ViewCell::Zombie => Cell::ALL.len(),
            ViewCell::OutOfBounds => Cell::ALL.len() + 1,
        }
    }

    /// Name used in text renderings; `None` for cells not worth mentioning.
    pub fn object_name(self) -> Option<&'static str> {
        match self {
            ViewCell::Terrain(c) => c.object_name(),
            ViewCell::Zombie => Some("zombie"),
            ViewCell::OutOfBounds => None,
        }
    }
}

/// What the agent perceives: a local window plus its own status.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub view_width: u32,
    pub view_height: u32,
    /// Row-major, agent at the center.
    pub view: Vec<ViewCell>,
    pub facing: Facing,
    pub inventory: Inventory,
    pub vitals: Vitals,
    pub unlocked: AchievementSet,
}

impl Observation {
    /// Cells with their offsets from the agent (`+x` right, `+y` down).
    pub fn cells_with_offsets(&self) -> impl Iterator<Item = ((i32, i32), ViewCell)> + '_ {
        let (w, h) = (self.view_width as i32, self.view_height as i32);
        self.view.iter().enumerate().map(move |(i, &c)| {
            let i = i as i32;
            ((i % w - w / 2, i / w - h / 2), c)
        })
    }

    /// True if an object with this name is anywhere in the view.
    pub fn sees(&self, name: &str) -> bool {
        self.view.iter().any(|c| c.object_name() == Some(name))
    }

    pub fn facing_cell(&self) -> ViewCell {
        let (dx, dy) = self.facing.delta();
        let (w, h) = (self.view_width as i32, self.view_height as i32);
        self.view[((h / 2 + dy) * w + w / 2 + dx) as usize]
    }
}

fn signed(v: i32) -> String {
    if v == 0 {
        "0".into()
    } else {
        format!("{v:+}")
    }
}

/// Canonical line-oriented text form of an observation.
pub fn render_text(obs: &Observation) -> String {
    let mut out = String::from("objects:\n");
    for ((dx, dy), cell) in obs.cells_with_offsets() {
        if let Some(name) = cell.object_name() {
            let _ = writeln!(out, "{name} at ({},{})", signed(dx), signed(dy));
        }
    }
    out.push_str("inventory:\n");
    for (item, n) in obs.inventory.held() {
        let _ = writeln!(out, "{}: {n}", item.name());
    }
    let v = obs.vitals;
    let _ = write!(
        out,
        "vitals:\nhealth: {}\nfood: {}\ndrink: {}\n",
        v.health, v.food, v.drink
    );
    out
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;
    use crate::gridworld::{Action, EnvConfig, GridWorld};

    fn small() -> EnvConfig {
        let mut c = EnvConfig::default();
        c.view_width = 3;
        c.view_height = 3;
        c.zombies.count = 0;
        c
    }

    #[test]
    fn one_tree_to_the_right() {
        let env = GridWorld::from_layout(small(), &["...", ".AT", "..."], 0).unwrap();
        let text = render_text(&env.observe());
        let lines: Vec<_> = text.lines().filter(|l| l.contains(" at ")).collect();
        assert_eq!(lines, vec!["tree at (+1,0)"]);
    }

    #[test]
    fn wood_after_chopping() {
        let mut env = GridWorld::from_layout(small(), &["...", ".AT", "..."], 0).unwrap();
        env.step(Action::MoveRight).unwrap();
        let t = env.step(Action::Interact).unwrap();
        let text = render_text(&t.observation);
        let inv = text.split("inventory:\n").nth(1).unwrap();
        assert!(inv.starts_with("wood: 1\n"), "{text}");
    }

    #[test]
    fn out_of_bounds_is_marked() {
        let env = GridWorld::from_layout(small(), &["A..", "...", "..."], 0).unwrap();
        let obs = env.observe();
        assert_eq!(obs.view[0], ViewCell::OutOfBounds);
        assert_eq!(obs.view[4], ViewCell::Terrain(Cell::Grass));
        assert_eq!(obs.facing_cell(), ViewCell::Terrain(Cell::Grass));
    }
}
