use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use super::config::EnvConfig;
use super::observation::{Observation, ViewCell};
use super::rules::{Channel, Effect, Rule, RuleTable, Target};
use super::types::{
    Achievement, AchievementSet, Action, Cell, Facing, Inventory, Vitals, MAX_ITEM_COUNT, MAX_STAT,
};
use super::GridError;

pub type Pos = (i32, i32);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Agent {
    pub pos: Pos,
    pub facing: Facing,
    pub vitals: Vitals,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Zombie {
    pub pos: Pos,
    pub health: u8,
    pub cooldown: u8,
}

/// Full simulator state. Integer-only, so trajectories are bit-identical
/// across platforms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState {
    pub width: u32,
    pub height: u32,
    pub cells: Vec<Cell>,
    pub agent: Agent,
    pub inventory: Inventory,
    pub zombies: Vec<Zombie>,
    pub tick: u32,
    pub unlocked: AchievementSet,
    /// Seed of the counter-based zombie schedule.
    pub seed: u64,
}

impl WorldState {
    pub fn in_bounds(&self, (x, y): Pos) -> bool {
        x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height
    }

    fn idx(&self, (x, y): Pos) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn cell(&self, p: Pos) -> Option<Cell> {
        self.in_bounds(p).then(|| self.cells[self.idx(p)])
    }

    pub fn set_cell(&mut self, p: Pos, c: Cell) {
        let i = self.idx(p);
        self.cells[i] = c;
    }

    pub fn zombie_at(&self, p: Pos) -> Option<usize> {
        self.zombies.iter().position(|z| z.pos == p)
    }

    pub fn facing_pos(&self) -> Pos {
        let (dx, dy) = self.agent.facing.delta();
        (self.agent.pos.0 + dx, self.agent.pos.1 + dy)
    }

    pub fn facing_cell(&self) -> Option<Cell> {
        self.cell(self.facing_pos())
    }

    /// Walkable, in bounds and unoccupied.
    pub fn is_free(&self, p: Pos) -> bool {
        self.cell(p).is_some_and(Cell::is_walkable)
            && self.zombie_at(p).is_none()
            && self.agent.pos != p
    }

    pub fn census(&self, c: Cell) -> u32 {
        self.cells.iter().filter(|&&x| x == c).count() as u32
    }

    fn nearby(&self, c: Cell, radius: i32) -> bool {
        let (ax, ay) = self.agent.pos;
        (-radius..=radius).any(|dy| {
            (-radius..=radius).any(|dx| self.cell((ax + dx, ay + dy)) == Some(c))
        })
    }

    /// Current value of a causal variable's observation channel.
    pub fn channel_value(&self, channel: Channel) -> u32 {
        match channel {
            Channel::Inventory(item) => u32::from(self.inventory.get(item)),
            Channel::Cell(c) => self.census(c),
            Channel::Stat(s) => u32::from(self.agent.vitals.get(s)),
            Channel::Zombies => self.zombies.len() as u32,
        }
    }

    /// ASCII rendering of the full map, one row per line.
    pub fn to_layout(&self) -> Vec<String> {
        (0..self.height as i32)
            .map(|y| {
                (0..self.width as i32)
                    .map(|x| {
                        if self.agent.pos == (x, y) {
                            'A'
                        } else if self.zombie_at((x, y)).is_some() {
                            'Z'
                        } else {
                            self.cells[self.idx((x, y))].glyph()
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub unlocked: Vec<Achievement>,
}

/// The mini survival environment.
#[derive(Debug, Clone)]
pub struct GridWorld {
    config: EnvConfig,
    state: WorldState,
    done: bool,
}

const ZOMBIE_MIN_SPAWN_DISTANCE: i32 = 4;

impl GridWorld {
    /// Validates the config and generates the world for `seed`.
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, GridError> {
        config.validate()?;
        let state = generate(&config, seed);
        Ok(Self {
            config,
            state,
            done: false,
        })
    }

    /// Regenerates the world. Same `(seed, config)` always yields the same state.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.state = generate(&self.config, seed);
        self.done = false;
        self.observe()
    }

    /// Wraps an existing state, e.g. a sandbox or a hand-built scenario.
    pub fn from_state(config: EnvConfig, state: WorldState) -> Result<Self, GridError> {
        config.validate()?;
        if state.width != config.width || state.height != config.height {
            return Err(GridError::InvalidConfig(format!(
                "state is {}x{}, config says {}x{}",
                state.width, state.height, config.width, config.height
            )));
        }
        if state.cells.len() != (state.width * state.height) as usize || !state.in_bounds(state.agent.pos) {
            return Err(GridError::InvalidConfig("malformed world state".into()));
        }
        Ok(Self {
            config,
            state,
            done: false,
        })
    }

    /// Builds a world from ASCII rows (`A` agent, `Z` zombie, see [`Cell`] glyphs).
    /// The config's dimensions are overridden by the layout's.
    pub fn from_layout(mut config: EnvConfig, rows: &[&str], seed: u64) -> Result<Self, GridError> {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.chars().count()) as u32;
        config.width = width;
        config.height = height;
        let mut cells = Vec::with_capacity((width * height) as usize);
        let mut agent = None;
        let mut zombies = Vec::new();
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() as u32 != width {
                return Err(GridError::InvalidConfig(format!("layout row {y} is ragged")));
            }
            for (x, ch) in row.chars().enumerate() {
                let p = (x as i32, y as i32);
                let cell = match ch {
                    'A' => {
                        agent = Some(p);
                        Cell::Grass
                    }
                    'Z' => {
                        zombies.push(Zombie {
                            pos: p,
                            health: config.zombies.health,
                            cooldown: 0,
                        });
                        Cell::Grass
                    }
                    other => Cell::from_glyph(other).ok_or_else(|| {
                        GridError::InvalidConfig(format!("unknown layout glyph `{other}`"))
                    })?,
                };
                cells.push(cell);
            }
        }
        let pos = agent.ok_or_else(|| GridError::InvalidConfig("layout has no agent".into()))?;
        let state = WorldState {
            width,
            height,
            cells,
            agent: Agent {
                pos,
                facing: Facing::Down,
                vitals: Vitals::default(),
            },
            inventory: Inventory::default(),
            zombies,
            tick: 0,
            unlocked: AchievementSet::default(),
            seed,
        };
        Self::from_state(config, state)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Mutable access for scenario setup (sandboxes, tests).
    pub fn state_mut(&mut self) -> &mut WorldState {
        &mut self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn tick(&self) -> u32 {
        self.state.tick
    }

    /// Value of a named causal variable, if the name is in the rule table.
    pub fn variable_value(&self, name: &str) -> Option<u32> {
        RuleTable::standard()
            .variable(name)
            .map(|v| self.state.channel_value(v.channel))
    }

    pub fn observe(&self) -> Observation {
        let s = &self.state;
        let vw = self.config.view_width as i32;
        let vh = self.config.view_height as i32;
        let (ax, ay) = s.agent.pos;
        let mut view = Vec::with_capacity((vw * vh) as usize);
        for dy in -(vh / 2)..=vh / 2 {
            for dx in -(vw / 2)..=vw / 2 {
                let p = (ax + dx, ay + dy);
                view.push(match s.cell(p) {
                    None => ViewCell::OutOfBounds,
                    Some(_) if s.zombie_at(p).is_some() => ViewCell::Zombie,
                    Some(c) => ViewCell::Terrain(c),
                });
            }
        }
        Observation {
            view_width: self.config.view_width,
            view_height: self.config.view_height,
            view,
            facing: s.agent.facing,
            inventory: s.inventory,
            vitals: s.agent.vitals,
            unlocked: s.unlocked,
        }
    }

    pub fn step(&mut self, action: Action) -> Result<Transition, GridError> {
        if self.done {
            return Err(GridError::EpisodeFinished);
        }
        let mut fresh = Vec::new();
        if let Some(dir) = action.movement() {
            self.state.agent.facing = dir;
            let (dx, dy) = dir.delta();
            let target = (self.state.agent.pos.0 + dx, self.state.agent.pos.1 + dy);
            if self.state.is_free(target) {
                self.state.agent.pos = target;
            }
        } else if action != Action::Noop {
            let table = RuleTable::standard();
            if let Some(rule) = table
                .rules()
                .iter()
                .find(|r| r.action == action && self.can_fire(r))
            {
                self.fire(rule, &mut fresh);
            }
        }

        self.state.tick += 1;
        self.update_zombies();
        self.update_vitals();

        let mut reward = fresh.len() as f64 * self.config.rewards.achievement;
        let dead = self.state.agent.vitals.health == 0;
        if dead {
            reward += self.config.rewards.death;
        }
        self.done = dead || self.state.tick >= self.config.horizon;
        Ok(Transition {
            observation: self.observe(),
            reward,
            done: self.done,
            unlocked: fresh,
        })
    }

    fn can_fire(&self, rule: &Rule) -> bool {
        let s = &self.state;
        let front = s.facing_pos();
        let target_ok = match rule.target {
            Target::None => true,
            Target::Cell(c) => s.cell(front) == Some(c),
            Target::Ground => s.is_free(front),
            Target::Zombie => s.zombie_at(front).is_some(),
        };
        if !target_ok {
            return false;
        }
        if let Some(c) = rule.nearby {
            if !s.nearby(c, self.config.nearby_radius as i32) {
                return false;
            }
        }
        let holds = |items: &[(super::types::Item, u8)]| {
            items.iter().all(|&(item, n)| s.inventory.get(item) >= n)
        };
        if !holds(rule.requires) || !holds(rule.consumes) {
            return false;
        }
        match rule.effect {
            Effect::Gain(item) => s.inventory.get(item) < MAX_ITEM_COUNT,
            _ => true,
        }
    }

    fn fire(&mut self, rule: &Rule, fresh: &mut Vec<Achievement>) {
        let front = self.state.facing_pos();
        for &(item, n) in rule.consumes {
            self.state.inventory.remove(item, n);
        }
        let mut achieved = rule.achievement;
        match rule.effect {
            Effect::Gain(item) => self.state.inventory.add(item, 1),
            Effect::Place(cell) => self.state.set_cell(front, cell),
            Effect::Restore(stat, n) => {
                let v = self.state.agent.vitals.get_mut(stat);
                *v = (*v + n).min(MAX_STAT);
            }
            Effect::DamageZombie => {
                let i = self.state.zombie_at(front).expect("checked in can_fire");
                let z = &mut self.state.zombies[i];
                z.health = z.health.saturating_sub(1);
                if z.health == 0 {
                    self.state.zombies.remove(i);
                    achieved = Some(Achievement::DefeatZombie);
                }
            }
        }
        if let (Target::Cell(_), Some(after)) = (rule.target, rule.target_becomes) {
            self.state.set_cell(front, after);
        }
        if let Some(a) = achieved {
            if self.config.is_configured(a) && self.state.unlocked.insert(a) {
                fresh.push(a);
            }
        }
    }

    fn update_zombies(&mut self) {
        let cfg = self.config.zombies.clone();
        let tick = self.state.tick;
        for i in 0..self.state.zombies.len() {
            let agent = self.state.agent.pos;
            let z = self.state.zombies[i].clone();
            let (dx, dy) = (agent.0 - z.pos.0, agent.1 - z.pos.1);
            let dist = dx.unsigned_abs() + dy.unsigned_abs();
            if dist <= 1 {
                let z = &mut self.state.zombies[i];
                if z.cooldown == 0 {
                    let hp = &mut self.state.agent.vitals.health;
                    *hp = hp.saturating_sub(cfg.damage);
                    self.state.zombies[i].cooldown = cfg.cooldown;
                } else {
                    z.cooldown -= 1;
                }
                continue;
            }
            if !tick.is_multiple_of(cfg.move_period) {
                continue;
            }
            let candidates: Vec<Pos> = if dist <= cfg.chase_radius {
                let step_x = (z.pos.0 + dx.signum(), z.pos.1);
                let step_y = (z.pos.0, z.pos.1 + dy.signum());
                let mut c = Vec::new();
                if dx.abs() >= dy.abs() {
                    if dx != 0 {
                        c.push(step_x);
                    }
                    if dy != 0 {
                        c.push(step_y);
                    }
                } else {
                    if dy != 0 {
                        c.push(step_y);
                    }
                    if dx != 0 {
                        c.push(step_x);
                    }
                }
                c
            } else {
                let mut rng = SplitMix64::seed_from_u64(
                    self.state.seed ^ (u64::from(tick) << 16) ^ (i as u64).wrapping_mul(0x9E37_79B9),
                );
                match rng.next_u64() % 5 {
                    4 => Vec::new(),
                    k => {
                        let (mx, my) = Facing::ALL[k as usize].delta();
                        vec![(z.pos.0 + mx, z.pos.1 + my)]
                    }
                }
            };
            if let Some(p) = candidates.into_iter().find(|&p| self.state.is_free(p)) {
                self.state.zombies[i].pos = p;
            }
        }
    }

    fn update_vitals(&mut self) {
        let cfg = &self.config.vitals;
        let tick = self.state.tick;
        let v = &mut self.state.agent.vitals;
        if tick.is_multiple_of(cfg.food_decay_ticks) {
            v.food = v.food.saturating_sub(1);
        }
        if tick.is_multiple_of(cfg.drink_decay_ticks) {
            v.drink = v.drink.saturating_sub(1);
        }
        if tick.is_multiple_of(cfg.health_ticks) {
            if v.food == 0 || v.drink == 0 {
                v.health = v.health.saturating_sub(1);
            } else {
                v.health = (v.health + 1).min(MAX_STAT);
            }
        }
    }
}

fn generate(config: &EnvConfig, seed: u64) -> WorldState {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let thresholds = config.densities.per_mille();
    const ORDER: [Cell; 7] = [
        Cell::Water,
        Cell::Tree,
        Cell::StoneBlock,
        Cell::CoalBlock,
        Cell::IronBlock,
        Cell::Sapling,
        Cell::Plant,
    ];
    let (w, h) = (config.width, config.height);
    let mut cells = Vec::with_capacity((w * h) as usize);
    for _ in 0..w * h {
        let r = (rng.next_u64() % 1000) as u32;
        let cell = thresholds
            .iter()
            .position(|&t| r < t)
            .map_or(Cell::Grass, |k| ORDER[k]);
        cells.push(cell);
    }
    let spawn = ((w / 2) as i32, (h / 2) as i32);
    let mut state = WorldState {
        width: w,
        height: h,
        cells,
        agent: Agent {
            pos: spawn,
            facing: Facing::Down,
            vitals: Vitals::default(),
        },
        inventory: Inventory::default(),
        zombies: Vec::new(),
        tick: 0,
        unlocked: AchievementSet::default(),
        seed,
    };
    for dy in -1..=1 {
        for dx in -1..=1 {
            let p = (spawn.0 + dx, spawn.1 + dy);
            if state.in_bounds(p) {
                state.set_cell(p, Cell::Grass);
            }
        }
    }
    for _ in 0..config.zombies.count {
        for _ in 0..200 {
            let x = (rng.next_u64() % u64::from(w)) as i32;
            let y = (rng.next_u64() % u64::from(h)) as i32;
            let far = (x - spawn.0).abs() + (y - spawn.1).abs() >= ZOMBIE_MIN_SPAWN_DISTANCE;
            if far && state.cell((x, y)) == Some(Cell::Grass) && state.zombie_at((x, y)).is_none() {
                state.zombies.push(Zombie {
                    pos: (x, y),
                    health: config.zombies.health,
                    cooldown: 0,
                });
                break;
            }
        }
    }
    state
}
