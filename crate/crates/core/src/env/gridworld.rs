use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::ln;
use crate::mdp::{Dims, Kernel, RobustMdpSpec, UncertaintySet};

/// Layout used when a config names none. The agent starts in the upper-left
/// corner; the reward cell sits in the left-hand corridor formed by the
/// border and a four-cell wall.
pub const DEFAULT_LAYOUT: &str = "\
ooooo
oxooo
+xooo
oxooo
oxooo
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridCell {
    Road,
    Wall,
    Reward,
}

impl GridCell {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'o' => Some(GridCell::Road),
            'x' => Some(GridCell::Wall),
            '+' => Some(GridCell::Reward),
            _ => None,
        }
    }
}

/// Action indices are `Up = 0, Down = 1, Left = 2, Right = 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn opposite(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    /// Row-major, `width * height` cells; state `s` is cell `s`.
    pub layout: Vec<GridCell>,
    /// Probability of moving in the chosen direction.
    pub slip_success: f64,
    pub horizon: usize,
    /// Weight of the uniform mixture that makes every row strictly positive.
    pub smoothing: f64,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self::from_layout(DEFAULT_LAYOUT, 0.9, 20).expect("default layout parses")
    }
}

impl GridworldConfig {
    /// Parses a plain-text layout: one grid row per line, `o` road, `x`
    /// wall, `+` reward. Blank lines are ignored.
    pub fn from_layout(text: &str, slip_success: f64, horizon: usize) -> Result<Self> {
        let mut layout = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for (col, c) in line.chars().enumerate() {
                let cell = GridCell::from_char(c).ok_or_else(|| {
                    Error::config(format!(
                        "layout line {}, column {}: unknown cell {c:?}",
                        line_no + 1,
                        col + 1
                    ))
                })?;
                row.push(cell);
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::config(format!(
                        "layout line {} has {} cells, expected {w}",
                        line_no + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            layout.extend(row);
            height += 1;
        }
        let config = GridworldConfig {
            width: width.unwrap_or(0),
            height,
            layout,
            slip_success,
            horizon,
            smoothing: 1e-6,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("empty layout"));
        }
        if self.layout.len() != self.width * self.height {
            return Err(Error::config("layout size does not match width * height"));
        }
        if self.layout[0] == GridCell::Wall {
            return Err(Error::config("the start cell (upper left) is a wall"));
        }
        if !self.layout.contains(&GridCell::Reward) {
            return Err(Error::config("layout has no reward cell"));
        }
        if !(self.slip_success > 0.0 && self.slip_success <= 1.0) {
            return Err(Error::config(format!(
                "slip success must lie in (0, 1], got {}",
                self.slip_success
            )));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::config("smoothing weight must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.num_states(), 4, self.horizon)
    }

    /// Renders the layout back to text.
    pub fn layout_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(match self.layout[r * self.width + c] {
                    GridCell::Road => 'o',
                    GridCell::Wall => 'x',
                    GridCell::Reward => '+',
                });
            }
            out.push('\n');
        }
        out
    }

    /// Cell reached by moving from `s` in `dir`; walls and the border
    /// reflect back to `s`.
    pub fn destination(&self, s: usize, dir: Direction) -> usize {
        let (r, c) = (s / self.width, s % self.width);
        let target = match dir {
            Direction::Up if r > 0 => Some(s - self.width),
            Direction::Down if r + 1 < self.height => Some(s + self.width),
            Direction::Left if c > 0 => Some(s - 1),
            Direction::Right if c + 1 < self.width => Some(s + 1),
            _ => None,
        };
        match target {
            Some(t) if self.layout[t] != GridCell::Wall => t,
            _ => s,
        }
    }

    // Unsmoothed row of (s, dir): p to the intended cell, (1 - p)/3 to each
    // other direction. Wall cells loop on themselves.
    fn raw_row(&self, s: usize, dir: Direction, out: &mut [f64]) {
        out.fill(0.0);
        if self.layout[s] == GridCell::Wall {
            out[s] = 1.0;
            return;
        }
        let slip = (1.0 - self.slip_success) / 3.0;
        for d in Direction::ALL {
            let mass = if d == dir { self.slip_success } else { slip };
            out[self.destination(s, d)] += mass;
        }
    }
}

/// Spec of a gridworld. Reward mean is 1 for every action taken while
/// standing on a reward cell and 0 elsewhere.
pub fn build_gridworld(config: &GridworldConfig, uncertainty: UncertaintySet) -> Result<RobustMdpSpec> {
    config.validate()?;
    let dims = config.dims()?;
    let n = dims.states;
    let w = config.smoothing;
    let mut table = vec![0.0; n * 4 * n];
    for s in 0..n {
        for dir in Direction::ALL {
            let row = &mut table[(s * 4 + dir.index()) * n..(s * 4 + dir.index() + 1) * n];
            config.raw_row(s, dir, row);
            let mut total = 0.0;
            for p in row.iter_mut() {
                *p = (1.0 - w) * *p + w / n as f64;
                total += *p;
            }
            for p in row.iter_mut() {
                *p /= total;
            }
        }
    }
    let kernel = Kernel::stationary(dims, &table)?;
    let mut rewards = Vec::with_capacity(dims.num_cells());
    for _ in 0..dims.horizon {
        for s in 0..n {
            let r = if config.layout[s] == GridCell::Reward { 1.0 } else { 0.0 };
            rewards.extend_from_slice(&[r; 4]);
        }
    }
    RobustMdpSpec::new(kernel, rewards, uncertainty, 0)
}

/// Distance used to size the evaluation-time perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationMetric {
    L1,
    Kl,
}

impl core::str::FromStr for PerturbationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(PerturbationMetric::L1),
            "kl" => Ok(PerturbationMetric::Kl),
            _ => Err(Error::config(format!("unknown perturbation metric {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub kernel: Kernel,
    /// Rows where the requested distance could not be reached.
    pub clipped_rows: usize,
    /// Largest distance from the nominal row over all rows.
    pub max_distance: f64,
}

fn kl_after_transfer(p_from: f64, p_to: f64, t: f64) -> f64 {
    let a = p_from - t;
    let b = p_to + t;
    let term = |q: f64, p: f64| if q > 0.0 { q * ln(q / p) } else { 0.0 };
    term(a, p_from) + term(b, p_to)
}

/// Evaluation kernel: in every row, mass moves from the intended cell to the
/// cell in the opposite direction. The amount makes the L1 distance equal
/// `rho_eval` (moving `rho_eval / 2`), or the KL divergence equal `rho_eval`
/// (found by bisection). Rows where the two cells coincide, or where the
/// intended cell runs out of mass, are counted as clipped.
pub fn perturb_gridworld(
    config: &GridworldConfig,
    spec: &RobustMdpSpec,
    rho_eval: f64,
    metric: PerturbationMetric,
) -> Result<Perturbation> {
    config.validate()?;
    let dims = spec.dims();
    if dims != config.dims()? {
        return Err(Error::config("spec does not match the gridworld config"));
    }
    if !rho_eval.is_finite() || rho_eval < 0.0 {
        return Err(Error::domain(format!("perturbation size must be >= 0, got {rho_eval}")));
    }
    let mut kernel = spec.nominal().clone();
    if rho_eval == 0.0 {
        return Ok(Perturbation {
            kernel,
            clipped_rows: 0,
            max_distance: 0.0,
        });
    }
    let n = dims.states;
    let mut clipped_rows = 0;
    let mut max_distance: f64 = 0.0;
    let mut row = vec![0.0; n];
    for h in 0..dims.horizon {
        for s in 0..n {
            for dir in Direction::ALL {
                let a = dir.index();
                row.copy_from_slice(spec.nominal().row(h, s, a));
                let from = config.destination(s, dir);
                let to = config.destination(s, dir.opposite());
                if from == to || config.layout[s] == GridCell::Wall {
                    clipped_rows += 1;
                    continue;
                }
                let (p_from, p_to) = (row[from], row[to]);
                let (t, distance) = match metric {
                    PerturbationMetric::L1 => {
                        let t = (0.5 * rho_eval).min(p_from);
                        (t, 2.0 * t)
                    }
                    PerturbationMetric::Kl => {
                        if kl_after_transfer(p_from, p_to, p_from) <= rho_eval {
                            (p_from, kl_after_transfer(p_from, p_to, p_from))
                        } else {
                            let (mut lo, mut hi) = (0.0, p_from);
                            for _ in 0..200 {
                                let mid = 0.5 * (lo + hi);
                                if kl_after_transfer(p_from, p_to, mid) > rho_eval {
                                    hi = mid;
                                } else {
                                    lo = mid;
                                }
                            }
                            (lo, kl_after_transfer(p_from, p_to, lo))
                        }
                    }
                };
                if distance < rho_eval - 1e-9 {
                    clipped_rows += 1;
                }
                max_distance = max_distance.max(distance);
                row[from] = p_from - t;
                row[to] = p_to + t;
                kernel.set_row(h, s, a, &row)?;
            }
        }
    }
    Ok(Perturbation {
        kernel,
        clipped_rows,
        max_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal() -> UncertaintySet {
        UncertaintySet::nominal(crate::mdp::UncertaintyKind::L1Sa)
    }

    #[test]
    fn deterministic_move_right() {
        let config = GridworldConfig::from_layout("o+\n", 1.0, 3).unwrap();
        let spec = build_gridworld(&config, nominal()).unwrap();
        let row = spec.nominal().row(0, 0, Direction::Right.index());
        assert!((row[1] - 1.0).abs() < 1e-6);
        assert!(row[0] > 0.0);
    }

    #[test]
    fn enclosed_cell_loops() {
        let config = GridworldConfig::from_layout("oxo\nx+x\noxo\n", 0.9, 2).unwrap();
        let spec = build_gridworld(&config, nominal()).unwrap();
        for a in 0..4 {
            assert!((spec.nominal().row(0, 4, a)[4] - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn layout_errors() {
        assert!(GridworldConfig::from_layout("xo\no+\n", 0.9, 5).is_err());
        assert!(GridworldConfig::from_layout("oo\noo\n", 0.9, 5).is_err());
        assert!(GridworldConfig::from_layout("oo\no\n", 0.9, 5).is_err());
        let err = GridworldConfig::from_layout("o+\noq\n", 0.9, 5).unwrap_err();
        assert!(format!("{err}").contains("line 2, column 2"));
    }

    #[test]
    fn layout_round_trip() {
        let config = GridworldConfig::default();
        assert_eq!(config.layout_text(), DEFAULT_LAYOUT);
        assert_eq!((config.width, config.height, config.horizon), (5, 5, 20));
    }

    #[test]
    fn l1_transfer_arithmetic() {
        let config = GridworldConfig::from_layout("ooo\no+o\nooo\n", 0.9, 1).unwrap();
        let mut c = config.clone();
        c.smoothing = 0.0;
        let spec = build_gridworld(&c, nominal()).unwrap();
        let out = perturb_gridworld(&c, &spec, 0.2, PerturbationMetric::L1).unwrap();
        // centre cell, moving up
        let row = out.kernel.row(0, 4, Direction::Up.index());
        assert!((row[1] - 0.8).abs() < 1e-12);
        assert!((row[7] - (0.1 / 3.0 + 0.1)).abs() < 1e-12);
        let unchanged = perturb_gridworld(&c, &spec, 0.0, PerturbationMetric::L1).unwrap();
        assert_eq!(&unchanged.kernel, spec.nominal());
    }

    #[test]
    fn kl_transfer_hits_target() {
        let config = GridworldConfig::default();
        let spec = build_gridworld(&config, nominal()).unwrap();
        let out = perturb_gridworld(&config, &spec, 0.1, PerturbationMetric::Kl).unwrap();
        let p = spec.nominal().row(0, 12, 0);
        let q = out.kernel.row(0, 12, 0);
        let kl: f64 = q.iter().zip(p).map(|(q, p)| q * (q / p).ln()).sum();
        assert!((kl - 0.1).abs() < 1e-9);
    }
}
