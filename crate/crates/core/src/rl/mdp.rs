use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, RlError};

const PROB_TOL: f64 = 1e-12;

/// Finite MDP with a step cap. Rewards are paid on the transition out of
/// `(s, a)`; entering a terminal state ends the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Sparse `P(·|s,a)` at index `s * n_actions + a`.
    transitions: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    start_dist: Vec<f64>,
    discount: f64,
    horizon: usize,
    terminal: Vec<bool>,
    goal: Vec<bool>,
}

impl TabularMdp {
    /// Validates stochasticity of `P` and `ρ`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        reward: Vec<f64>,
        start_dist: Vec<f64>,
        discount: f64,
        horizon: usize,
        terminal: Vec<bool>,
        goal: Vec<bool>,
    ) -> Result<Self> {
        let bad = |m: String| Err(RlError::InvalidMdp(m));
        if n_states == 0 || n_actions == 0 {
            return bad("need at least one state and one action".into());
        }
        let sa = n_states * n_actions;
        if transitions.len() != sa || reward.len() != sa {
            return bad(format!("transition and reward tables need {sa} entries"));
        }
        if start_dist.len() != n_states || terminal.len() != n_states || goal.len() != n_states {
            return bad("per-state tables must have n_states entries".into());
        }
        for (i, row) in transitions.iter().enumerate() {
            let mut total = 0.0;
            for &(s2, p) in row {
                if s2 >= n_states || !(p >= 0.0) {
                    return bad(format!("invalid transition entry at (s,a) index {i}"));
                }
                total += p;
            }
            if (total - 1.0).abs() > PROB_TOL {
                return bad(format!("P(·|s,a) at index {i} sums to {total}"));
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return bad("rewards must be finite".into());
        }
        if start_dist.iter().any(|p| !(*p >= 0.0))
            || (start_dist.iter().sum::<f64>() - 1.0).abs() > PROB_TOL
        {
            return bad("start distribution must be a probability vector".into());
        }
        if !(discount > 0.0 && discount < 1.0) {
            return bad(format!("discount {discount} outside (0, 1)"));
        }
        if horizon == 0 {
            return bad("horizon must be ≥ 1".into());
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            reward,
            start_dist,
            discount,
            horizon,
            terminal,
            goal,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn param_dim(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        assert!(horizon >= 1);
        self.horizon = horizon;
        self
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        assert!(discount > 0.0 && discount < 1.0);
        self.discount = discount;
        self
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn prob(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transitions(s, a)
            .iter()
            .filter(|(t, _)| *t == s2)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn start_dist(&self) -> &[f64] {
        &self.start_dist
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.goal[s]
    }

    pub fn check_state_action(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(RlError::IndexOutOfRange {
                state: s,
                action: a,
            });
        }
        Ok(())
    }

    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(self.start_dist.iter().copied(), rng)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let row = self.transitions(s, a);
        if row.len() == 1 {
            return row[0].0;
        }
        let k = sample_index(row.iter().map(|(_, p)| *p), rng);
        row[k].0
    }
}

/// Inverse-CDF draw from nonnegative weights summing to one. A single
/// uniform is consumed even for degenerate distributions.
pub(crate) fn sample_index<I, R>(weights: I, rng: &mut R) -> usize
where
    I: Iterator<Item = f64> + Clone,
    R: Rng + ?Sized,
{
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Cell of a grid world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Block,
    Start,
    Goal,
    Cliff,
}

impl Cell {
    fn to_char(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Block => '#',
            Cell::Start => 'S',
            Cell::Goal => 'G',
            Cell::Cliff => 'C',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '.' => Cell::Free,
            '#' => Cell::Block,
            'S' => Cell::Start,
            'G' => Cell::Goal,
            'C' => Cell::Cliff,
            _ => return None,
        })
    }
}

/// Rectangular grid with one start cell. Row 0 is the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

/// Moves in action order: up, right, down, left.
pub const GRID_MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

impl GridLayout {
    pub fn new(rows: usize, cols: usize, cells: Vec<Cell>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(RlError::InvalidLayout(format!(
                "{} cells do not fill a {rows}×{cols} grid",
                cells.len()
            )));
        }
        let starts = cells.iter().filter(|c| **c == Cell::Start).count();
        if starts != 1 {
            return Err(RlError::InvalidLayout(format!(
                "expected exactly one start cell, found {starts}"
            )));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell(&self, r: usize, c: usize) -> Cell {
        self.cells[r * self.cols + c]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s / self.cols, s % self.cols)
    }

    pub fn start(&self) -> usize {
        self.cells.iter().position(|c| *c == Cell::Start).unwrap()
    }

    /// Destination of `action` from `s`, or `None` when it leaves the grid.
    pub fn neighbor(&self, s: usize, action: usize) -> Option<usize> {
        let (r, c) = self.coords(s);
        let (dr, dc) = GRID_MOVES[action];
        let r2 = r.checked_add_signed(dr)?;
        let c2 = c.checked_add_signed(dc)?;
        (r2 < self.rows && c2 < self.cols).then(|| self.index(r2, c2))
    }

    /// Breadth-first search from the start through non-block, non-cliff
    /// cells; returns the shortest step count to a goal.
    pub fn shortest_path_to_goal(&self) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.cells.len()];
        let start = self.start();
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            if self.cells[s] == Cell::Goal {
                return Some(dist[s]);
            }
            for a in 0..4 {
                if let Some(n) = self.neighbor(s, a) {
                    let passable = !matches!(self.cells[n], Cell::Block | Cell::Cliff);
                    if passable && dist[n] == usize::MAX {
                        dist[n] = dist[s] + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        None
    }
}

impl fmt::Display for GridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let line: String = (0..self.cols).map(|c| self.cell(r, c).to_char()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for GridLayout {
    type Err = RlError;

    /// Parses `#` block, `S` start, `G` goal, `C` cliff, `.` free, one row
    /// per line. Blank lines and surrounding whitespace are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let lines: Vec<&str> = s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        let mut cells = Vec::with_capacity(rows * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(RlError::InvalidLayout(format!(
                    "row {r} has a different width"
                )));
            }
            for ch in line.chars() {
                cells.push(Cell::from_char(ch).ok_or_else(|| {
                    RlError::InvalidLayout(format!("unknown cell character {ch:?}"))
                })?);
            }
        }
        GridLayout::new(rows, cols, cells)
    }
}

/// Reward table of a grid world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRewards {
    /// Ordinary move, including moves into the goal's neighbours.
    pub step: f64,
    /// Attempt to enter a block cell; the agent stays.
    pub block: f64,
    /// Attempt to leave the grid; the agent stays.
    pub wall: f64,
    /// Entering a cliff cell; terminal.
    pub cliff: f64,
    /// Entering the goal; terminal.
    pub goal: f64,
}

impl GridRewards {
    pub const CLIFF_WALKING: GridRewards = GridRewards {
        step: -0.1,
        block: -0.1,
        wall: -0.1,
        cliff: -100.0,
        goal: 100.0,
    };

    pub const MAZE: GridRewards = GridRewards {
        step: -0.1,
        block: -1.0,
        wall: -1.0,
        cliff: -1.0,
        goal: 1.0,
    };
}

/// Deterministic four-action grid world. Every cell is a state; goal and
/// cliff cells are terminal.
pub fn build_grid_mdp(
    layout: &GridLayout,
    rewards: &GridRewards,
    discount: f64,
    horizon: usize,
) -> Result<TabularMdp> {
    let n = layout.cells.len();
    let mut transitions = Vec::with_capacity(n * 4);
    let mut reward = Vec::with_capacity(n * 4);
    for s in 0..n {
        for a in 0..4 {
            let (next, r) = match layout.neighbor(s, a) {
                None => (s, rewards.wall),
                Some(t) => match layout.cells[t] {
                    Cell::Block => (s, rewards.block),
                    Cell::Cliff => (t, rewards.cliff),
                    Cell::Goal => (t, rewards.goal),
                    Cell::Free | Cell::Start => (t, rewards.step),
                },
            };
            transitions.push(vec![(next, 1.0)]);
            reward.push(r);
        }
    }
    let mut start_dist = vec![0.0; n];
    start_dist[layout.start()] = 1.0;
    let terminal = layout
        .cells
        .iter()
        .map(|c| matches!(c, Cell::Goal | Cell::Cliff))
        .collect();
    let goal = layout.cells.iter().map(|c| *c == Cell::Goal).collect();
    TabularMdp::new(
        n,
        4,
        transitions,
        reward,
        start_dist,
        discount,
        horizon,
        terminal,
        goal,
    )
}

/// Default discount of the grid-world builders.
pub const GRID_DISCOUNT: f64 = 0.99;

/// 4×12 cliff walk: start bottom-left, goal bottom-right, cliff between.
pub fn cliff_walking_layout() -> GridLayout {
    let mut cells = vec![Cell::Free; 48];
    cells[36] = Cell::Start;
    cells[37..47].fill(Cell::Cliff);
    cells[47] = Cell::Goal;
    GridLayout::new(4, 12, cells).unwrap()
}

/// Cliff walking with step reward −0.1, cliff −100 (terminal), goal +100
/// (terminal) and a 100-step episode cap.
pub fn build_cliff_walking() -> TabularMdp {
    build_grid_mdp(
        &cliff_walking_layout(),
        &GridRewards::CLIFF_WALKING,
        GRID_DISCOUNT,
        100,
    )
    .expect("cliff walking layout is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MazeKind {
    /// Independent blocks at density 0.25.
    RandomMaze,
    /// Rectangular obstacles of 2 to 4 cells up to density 0.25.
    RandomShapeMaze,
}

pub const MAZE_SIZE: usize = 10;
pub const MAZE_DENSITY: f64 = 0.25;
pub const MAZE_ATTEMPTS: usize = 100;

/// 10×10 maze with start top-left and goal bottom-right, regenerated until
/// the goal is reachable.
pub fn random_maze_layout(kind: MazeKind, seed: u64) -> Result<GridLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = MAZE_SIZE;
    for _ in 0..MAZE_ATTEMPTS {
        let mut cells = vec![Cell::Free; n * n];
        match kind {
            MazeKind::RandomMaze => {
                for c in cells.iter_mut() {
                    if rng.random::<f64>() < MAZE_DENSITY {
                        *c = Cell::Block;
                    }
                }
            }
            MazeKind::RandomShapeMaze => {
                let target = (MAZE_DENSITY * (n * n) as f64).round() as usize;
                let mut placed = 0;
                let mut tries = 0;
                while placed < target && tries < 1000 {
                    tries += 1;
                    // shapes of area 2..=4: 1×2, 2×1, 1×3, 3×1, 2×2, 1×4, 4×1
                    const SHAPES: [(usize, usize); 7] =
                        [(1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (1, 4), (4, 1)];
                    let (h, w) = SHAPES[rng.random_range(0..SHAPES.len())];
                    let r0 = rng.random_range(0..=n - h);
                    let c0 = rng.random_range(0..=n - w);
                    for r in r0..r0 + h {
                        for c in c0..c0 + w {
                            if cells[r * n + c] == Cell::Free && placed < target {
                                cells[r * n + c] = Cell::Block;
                                placed += 1;
                            }
                        }
                    }
                }
            }
        }
        cells[0] = Cell::Start;
        cells[n * n - 1] = Cell::Goal;
        let layout = GridLayout::new(n, n, cells)?;
        if layout.shortest_path_to_goal().is_some() {
            return Ok(layout);
        }
    }
    Err(RlError::GenerationFailed(MAZE_ATTEMPTS))
}

/// Maze MDP: step −0.1, bumping into a block or the border −1 (agent stays),
/// goal +1 (terminal), 200-step episode cap.
pub fn build_random_maze(kind: MazeKind, seed: u64) -> Result<TabularMdp> {
    let layout = random_maze_layout(kind, seed)?;
    build_grid_mdp(&layout, &GridRewards::MAZE, GRID_DISCOUNT, 200)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cliff_walking_shape() {
        let mdp = build_cliff_walking();
        assert_eq!(mdp.n_states(), 48);
        assert_eq!(mdp.n_actions(), 4);
        assert_eq!(mdp.horizon(), 100);
        let layout = cliff_walking_layout();
        assert_eq!(layout.shortest_path_to_goal(), Some(13));
    }

    #[test]
    fn cliff_transition_rewards() {
        let mdp = build_cliff_walking();
        let start = 36;
        // right from the start falls into the cliff
        assert_eq!(mdp.reward(start, 1), -100.0);
        assert_eq!(mdp.transitions(start, 1), &[(37, 1.0)]);
        assert!(mdp.is_terminal(37));
        // up from the start is an ordinary step
        assert_eq!(mdp.reward(start, 0), -0.1);
        assert_eq!(mdp.transitions(start, 0), &[(24, 1.0)]);
        // down from the start hits the border
        assert_eq!(mdp.transitions(start, 2), &[(start, 1.0)]);
        assert_eq!(mdp.reward(35, 2), 100.0);
        assert!(mdp.is_goal(47) && mdp.is_terminal(47));
    }

    #[test]
    fn maze_block_bump() {
        let layout: GridLayout = "S#\n.G".parse().unwrap();
        let mdp = build_grid_mdp(&layout, &GridRewards::MAZE, 0.99, 200).unwrap();
        assert_eq!(mdp.reward(0, 1), -1.0);
        assert_eq!(mdp.transitions(0, 1), &[(0, 1.0)]);
        assert_eq!(mdp.reward(0, 2), -0.1);
        assert_eq!(mdp.reward(2, 1), 1.0);
        assert_eq!(mdp.reward(0, 0), -1.0);
    }

    #[test]
    fn ascii_round_trip() {
        let text = "S..#\n.C.G\n";
        let layout: GridLayout = text.parse().unwrap();
        assert_eq!(layout.to_string(), text);
        assert_eq!(layout.cell(1, 1), Cell::Cliff);
        assert!("S.\n.".parse::<GridLayout>().is_err());
        assert!("..\n.G".parse::<GridLayout>().is_err());
        assert!("SX".parse::<GridLayout>().is_err());
    }

    #[test]
    fn mazes_are_deterministic_and_connected() {
        for kind in [MazeKind::RandomMaze, MazeKind::RandomShapeMaze] {
            for seed in 0..50 {
                let a = random_maze_layout(kind, seed).unwrap();
                let b = random_maze_layout(kind, seed).unwrap();
                assert_eq!(a, b);
                assert!(a.shortest_path_to_goal().is_some());
                assert_eq!(a.cell(0, 0), Cell::Start);
                assert_eq!(a.cell(9, 9), Cell::Goal);
            }
        }
    }

    #[test]
    fn invalid_mdp_rejected() {
        let err = TabularMdp::new(
            1,
            1,
            vec![vec![(0, 0.5)]],
            vec![0.0],
            vec![1.0],
            0.9,
            3,
            vec![false],
            vec![false],
        );
        assert!(matches!(err, Err(RlError::InvalidMdp(_))));
    }
}
