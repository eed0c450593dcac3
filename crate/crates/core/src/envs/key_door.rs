use std::collections::VecDeque;
use std::path::Path;

use crate::envs::{EnvStep, Environment};
use crate::error::{Error, Result};

/// Default 7x9 layout: two rooms separated by a wall row with a single door.
/// The map edge acts as a wall.
pub const DEFAULT_MAP: &str = "\
A........
.........
........K
#######D#
.........
.........
T........
";

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

/// Static layout of a key-door-treasure grid. Cells are indexed `row * width + col`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start: usize,
    key: usize,
    door: usize,
    treasure: usize,
}

impl GridMap {
    /// Parses ASCII art: `#` wall, `K` key, `D` door, `T` treasure, `A` start, `.` floor.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let (first_line, first) = *rows.first().ok_or(Error::Parse { line: 1, msg: "empty map".into() })?;
        let width = first.chars().count();
        let height = rows.len();
        let mut walls = vec![false; width * height];
        let (mut start, mut key, mut door, mut treasure) = (None, None, None, None);
        for (r, &(line, row)) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Parse {
                    line,
                    msg: format!("row has {} cells, expected {width} (from line {first_line})", row.chars().count()),
                });
            }
            for (c, ch) in row.chars().enumerate() {
                let cell = r * width + c;
                let slot = match ch {
                    '#' => {
                        walls[cell] = true;
                        continue;
                    }
                    '.' => continue,
                    'A' => &mut start,
                    'K' => &mut key,
                    'D' => &mut door,
                    'T' => &mut treasure,
                    other => return Err(Error::Parse { line, msg: format!("unknown map symbol `{other}`") }),
                };
                if slot.replace(cell).is_some() {
                    return Err(Error::Parse { line, msg: format!("map has more than one `{ch}`") });
                }
            }
        }
        let missing = |what: &str| Error::Parse { line: first_line, msg: format!("map has no `{what}`") };
        Ok(Self {
            width,
            height,
            walls,
            start: start.ok_or_else(|| missing("A"))?,
            key: key.ok_or_else(|| missing("K"))?,
            door: door.ok_or_else(|| missing("D"))?,
            treasure: treasure.ok_or_else(|| missing("T"))?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn default_map() -> Self {
        Self::parse(DEFAULT_MAP).expect("default map is well-formed")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn key(&self) -> usize {
        self.key
    }

    pub fn door(&self) -> usize {
        self.door
    }

    pub fn treasure(&self) -> usize {
        self.treasure
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.walls[cell]
    }

    /// Cell reached by moving from `cell` in `action`'s direction, ignoring
    /// walls and the door; `None` when leaving the grid.
    fn neighbour(&self, cell: usize, action: usize) -> Option<usize> {
        let (r, c) = (cell / self.width, cell % self.width);
        match action {
            UP if r > 0 => Some(cell - self.width),
            DOWN if r + 1 < self.height => Some(cell + self.width),
            LEFT if c > 0 => Some(cell - 1),
            RIGHT if c + 1 < self.width => Some(cell + 1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyDoorConfig {
    pub step_limit: usize,
    pub key_reward: f64,
    pub door_reward: f64,
    pub treasure_reward: f64,
}

impl Default for KeyDoorConfig {
    fn default() -> Self {
        Self { step_limit: 300, key_reward: 1.0, door_reward: 1.0, treasure_reward: 5.0 }
    }
}

/// Dynamic part of the state; the observation is its integer encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub cell: usize,
    pub has_key: bool,
    pub door_open: bool,
}

/// Outcome of applying one action to a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: Configuration,
    pub reward: f64,
    pub reached_treasure: bool,
}

/// Grid world where the treasure lies behind a door that only opens once the
/// key has been picked up. Actions: up, down, left, right.
#[derive(Debug, Clone)]
pub struct KeyDoorTreasure {
    map: GridMap,
    config: KeyDoorConfig,
    state: Configuration,
    steps: usize,
    done: bool,
}

impl Default for KeyDoorTreasure {
    fn default() -> Self {
        Self::new(GridMap::default_map(), KeyDoorConfig::default())
    }
}

impl KeyDoorTreasure {
    pub fn new(map: GridMap, config: KeyDoorConfig) -> Self {
        let state = Self::initial(&map);
        Self { map, config, state, steps: 0, done: false }
    }

    fn initial(map: &GridMap) -> Configuration {
        Configuration { cell: map.start, has_key: false, door_open: false }
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn config(&self) -> &KeyDoorConfig {
        &self.config
    }

    pub fn configuration(&self) -> Configuration {
        self.state
    }

    pub fn initial_configuration(&self) -> Configuration {
        Self::initial(&self.map)
    }

    pub fn encode(&self, c: Configuration) -> usize {
        (c.cell * 2 + c.has_key as usize) * 2 + c.door_open as usize
    }

    pub fn decode(&self, id: usize) -> Configuration {
        Configuration { cell: id / 4, has_key: (id / 2) % 2 == 1, door_open: id % 2 == 1 }
    }

    /// Deterministic dynamics, shared by `step` and the planner.
    pub fn transition(&self, from: Configuration, action: usize) -> Transition {
        let mut next = from;
        let mut reward = 0.0;
        let target = self.map.neighbour(from.cell, action).filter(|&cell| !self.map.is_wall(cell));
        if let Some(cell) = target {
            if cell == self.map.door && !from.door_open {
                if from.has_key {
                    next.door_open = true;
                    next.cell = cell;
                    reward += self.config.door_reward;
                }
            } else {
                next.cell = cell;
            }
        }
        if next.cell == self.map.key && !next.has_key {
            next.has_key = true;
            reward += self.config.key_reward;
        }
        let reached_treasure = next.cell == self.map.treasure;
        if reached_treasure {
            reward += self.config.treasure_reward;
        }
        Transition { next, reward, reached_treasure }
    }

    /// Shortest action sequence from `from` to the treasure, if one exists.
    pub fn shortest_path(&self, from: Configuration) -> Option<Vec<usize>> {
        let mut parent: std::collections::HashMap<Configuration, (Configuration, usize)> = Default::default();
        let mut queue = VecDeque::from([from]);
        let mut seen = std::collections::HashSet::from([from]);
        while let Some(c) = queue.pop_front() {
            for action in 0..4 {
                let t = self.transition(c, action);
                if !seen.insert(t.next) {
                    continue;
                }
                parent.insert(t.next, (c, action));
                if t.reached_treasure {
                    let mut actions = vec![action];
                    let mut cur = c;
                    while cur != from {
                        let (prev, a) = parent[&cur];
                        actions.push(a);
                        cur = prev;
                    }
                    actions.reverse();
                    return Some(actions);
                }
                queue.push_back(t.next);
            }
        }
        None
    }
}

impl Environment for KeyDoorTreasure {
    fn n_states(&self) -> usize {
        self.map.cells() * 4
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, _seed: u64) -> usize {
        self.state = Self::initial(&self.map);
        self.steps = 0;
        self.done = false;
        self.encode(self.state)
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; reset first".into()));
        }
        if action >= 4 {
            return Err(Error::Usage(format!("action {action} out of range for a 4-action grid")));
        }
        let t = self.transition(self.state, action);
        self.state = t.next;
        self.steps += 1;
        let truncated = !t.reached_treasure && self.steps >= self.config.step_limit;
        self.done = t.reached_treasure || truncated;
        Ok(EnvStep {
            next_observation: self.encode(self.state),
            reward: t.reward,
            done: self.done,
            truncated,
            step_count: self.steps,
        })
    }

    fn planner_action(&self) -> usize {
        self.shortest_path(self.state).and_then(|p| p.first().copied()).unwrap_or(UP)
    }

    fn max_return(&self) -> f64 {
        self.config.key_reward + self.config.door_reward + self.config.treasure_reward
    }
}
