use std::fmt;

use serde::{Deserialize, Serialize};

/// Terrain and placed objects. `Path` is what mined blocks leave behind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Grass,
    Water,
    Tree,
    StoneBlock,
    CoalBlock,
    IronBlock,
    Sapling,
    Plant,
    Furnace,
    Table,
    Path,
}

impl Cell {
    pub const ALL: [Cell; 11] = [
        Cell::Grass,
        Cell::Water,
        Cell::Tree,
        Cell::StoneBlock,
        Cell::CoalBlock,
        Cell::IronBlock,
        Cell::Sapling,
        Cell::Plant,
        Cell::Furnace,
        Cell::Table,
        Cell::Path,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_walkable(self) -> bool {
        matches!(self, Cell::Grass | Cell::Path)
    }

    /// Name used in text renderings; `None` for background terrain.
    pub fn object_name(self) -> Option<&'static str> {
        match self {
            Cell::Grass | Cell::Path => None,
            Cell::Water => Some("water"),
            Cell::Tree => Some("tree"),
            Cell::StoneBlock => Some("stone"),
            Cell::CoalBlock => Some("coal"),
            Cell::IronBlock => Some("iron"),
            Cell::Sapling => Some("sapling"),
            Cell::Plant => Some("plant"),
            Cell::Furnace => Some("furnace"),
            Cell::Table => Some("table"),
        }
    }

    pub(crate) fn glyph(self) -> char {
        match self {
            Cell::Grass => '.',
            Cell::Water => 'W',
            Cell::Tree => 'T',
            Cell::StoneBlock => 'S',
            Cell::CoalBlock => 'C',
            Cell::IronBlock => 'I',
            Cell::Sapling => 'p',
            Cell::Plant => 'P',
            Cell::Furnace => 'F',
            Cell::Table => 'B',
            Cell::Path => '_',
        }
    }

    pub(crate) fn from_glyph(c: char) -> Option<Cell> {
        Cell::ALL.into_iter().find(|cell| cell.glyph() == c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facing {
    Left,
    Right,
    Up,
    Down,
}

impl Facing {
    pub const ALL: [Facing; 4] = [Facing::Left, Facing::Right, Facing::Up, Facing::Down];

    /// Unit offset; `+y` points down.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Facing::Left => (-1, 0),
            Facing::Right => (1, 0),
            Facing::Up => (0, -1),
            Facing::Down => (0, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Noop,
    MoveLeft,
    MoveRight,
    MoveUp,
    MoveDown,
    Interact,
    PlaceSapling,
    PlaceTable,
    PlaceFurnace,
    CraftWoodPickaxe,
    CraftStonePickaxe,
    CraftIronPickaxe,
    Eat,
    Drink,
    Attack,
}

impl Action {
    pub const COUNT: usize = 15;
    pub const ALL: [Action; Action::COUNT] = [
        Action::Noop,
        Action::MoveLeft,
        Action::MoveRight,
        Action::MoveUp,
        Action::MoveDown,
        Action::Interact,
        Action::PlaceSapling,
        Action::PlaceTable,
        Action::PlaceFurnace,
        Action::CraftWoodPickaxe,
        Action::CraftStonePickaxe,
        Action::CraftIronPickaxe,
        Action::Eat,
        Action::Drink,
        Action::Attack,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn movement(self) -> Option<Facing> {
        match self {
            Action::MoveLeft => Some(Facing::Left),
            Action::MoveRight => Some(Facing::Right),
            Action::MoveUp => Some(Facing::Up),
            Action::MoveDown => Some(Facing::Down),
            _ => None,
        }
    }

    pub fn toward(f: Facing) -> Action {
        match f {
            Facing::Left => Action::MoveLeft,
            Facing::Right => Action::MoveRight,
            Facing::Up => Action::MoveUp,
            Facing::Down => Action::MoveDown,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Noop => "noop",
            Action::MoveLeft => "move_left",
            Action::MoveRight => "move_right",
            Action::MoveUp => "move_up",
            Action::MoveDown => "move_down",
            Action::Interact => "interact",
            Action::PlaceSapling => "place_sapling",
            Action::PlaceTable => "place_table",
            Action::PlaceFurnace => "place_furnace",
            Action::CraftWoodPickaxe => "craft_wood_pickaxe",
            Action::CraftStonePickaxe => "craft_stone_pickaxe",
            Action::CraftIronPickaxe => "craft_iron_pickaxe",
            Action::Eat => "eat",
            Action::Drink => "drink",
            Action::Attack => "attack",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Wood,
    Stone,
    Coal,
    Iron,
    Sapling,
    WoodPickaxe,
    StonePickaxe,
    IronPickaxe,
}

impl Item {
    pub const COUNT: usize = 8;
    pub const ALL: [Item; Item::COUNT] = [
        Item::Wood,
        Item::Stone,
        Item::Coal,
        Item::Iron,
        Item::Sapling,
        Item::WoodPickaxe,
        Item::StonePickaxe,
        Item::IronPickaxe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Item::Wood => "wood",
            Item::Stone => "stone",
            Item::Coal => "coal",
            Item::Iron => "iron",
            Item::Sapling => "sapling",
            Item::WoodPickaxe => "wood_pickaxe",
            Item::StonePickaxe => "stone_pickaxe",
            Item::IronPickaxe => "iron_pickaxe",
        }
    }
}

/// Per-item cap, as in Crafter.
pub const MAX_ITEM_COUNT: u8 = 9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inventory([u8; Item::COUNT]);

impl Inventory {
    pub fn get(&self, item: Item) -> u8 {
        self.0[item as usize]
    }

    pub fn set(&mut self, item: Item, count: u8) {
        self.0[item as usize] = count.min(MAX_ITEM_COUNT);
    }

    pub(crate) fn add(&mut self, item: Item, n: u8) {
        let c = &mut self.0[item as usize];
        *c = c.saturating_add(n).min(MAX_ITEM_COUNT);
    }

    pub(crate) fn remove(&mut self, item: Item, n: u8) {
        let c = &mut self.0[item as usize];
        debug_assert!(*c >= n);
        *c -= n;
    }

    /// Non-zero entries in item order.
    pub fn held(&self) -> impl Iterator<Item = (Item, u8)> + '_ {
        Item::ALL
            .into_iter()
            .map(|i| (i, self.get(i)))
            .filter(|&(_, n)| n > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Health,
    Food,
    Drink,
}

pub const MAX_STAT: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vitals {
    pub health: u8,
    pub food: u8,
    pub drink: u8,
}

impl Default for Vitals {
    fn default() -> Self {
        Self {
            health: MAX_STAT,
            food: MAX_STAT,
            drink: MAX_STAT,
        }
    }
}

impl Vitals {
    pub fn get(&self, stat: Stat) -> u8 {
        match stat {
            Stat::Health => self.health,
            Stat::Food => self.food,
            Stat::Drink => self.drink,
        }
    }

    pub(crate) fn get_mut(&mut self, stat: Stat) -> &mut u8 {
        match stat {
            Stat::Health => &mut self.health,
            Stat::Food => &mut self.food,
            Stat::Drink => &mut self.drink,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Achievement {
    CollectWood,
    PlaceTable,
    MakeWoodPickaxe,
    CollectStone,
    MakeStonePickaxe,
    CollectCoal,
    CollectIron,
    MakeIronPickaxe,
    CollectDrink,
    DefeatZombie,
}

impl Achievement {
    pub const ALL: [Achievement; 10] = [
        Achievement::CollectWood,
        Achievement::PlaceTable,
        Achievement::MakeWoodPickaxe,
        Achievement::CollectStone,
        Achievement::MakeStonePickaxe,
        Achievement::CollectCoal,
        Achievement::CollectIron,
        Achievement::MakeIronPickaxe,
        Achievement::CollectDrink,
        Achievement::DefeatZombie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Achievement::CollectWood => "collect_wood",
            Achievement::PlaceTable => "place_table",
            Achievement::MakeWoodPickaxe => "make_wood_pickaxe",
            Achievement::CollectStone => "collect_stone",
            Achievement::MakeStonePickaxe => "make_stone_pickaxe",
            Achievement::CollectCoal => "collect_coal",
            Achievement::CollectIron => "collect_iron",
            Achievement::MakeIronPickaxe => "make_iron_pickaxe",
            Achievement::CollectDrink => "collect_drink",
            Achievement::DefeatZombie => "defeat_zombie",
        }
    }

    pub fn from_name(name: &str) -> Option<Achievement> {
        Achievement::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Variable whose production unlocks this achievement.
    pub fn target_variable(self) -> &'static str {
        match self {
            Achievement::CollectWood => "wood",
            Achievement::PlaceTable => "table",
            Achievement::MakeWoodPickaxe => "wood_pickaxe",
            Achievement::CollectStone => "stone",
            Achievement::MakeStonePickaxe => "stone_pickaxe",
            Achievement::CollectCoal => "coal",
            Achievement::CollectIron => "iron",
            Achievement::MakeIronPickaxe => "iron_pickaxe",
            Achievement::CollectDrink => "drink",
            Achievement::DefeatZombie => "zombie",
        }
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for Achievement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bitset of unlocked achievements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AchievementSet(u16);

impl AchievementSet {
    pub fn contains(self, a: Achievement) -> bool {
        self.0 & a.bit() != 0
    }

    pub fn insert(&mut self, a: Achievement) -> bool {
        let fresh = !self.contains(a);
        self.0 |= a.bit();
        fresh
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Achievement> {
        Achievement::ALL.into_iter().filter(move |a| self.contains(*a))
    }

    pub fn is_superset_of(self, other: AchievementSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn bits(self) -> u16 {
        self.0
    }
}

impl FromIterator<Achievement> for AchievementSet {
    fn from_iter<I: IntoIterator<Item = Achievement>>(iter: I) -> Self {
        let mut s = AchievementSet::default();
        for a in iter {
            s.insert(a);
        }
        s
    }
}
