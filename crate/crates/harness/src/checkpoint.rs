//! Plain-text learner checkpoints.
//!
//! ```text
//! ropo-checkpoint 1
//! dims <S> <A> <H>
//! seed <seed>
//! episode <completed episodes>
//! cumulative_regret <value or none>
//! policy
//! <one line of A probabilities per (h, s), h-major>
//! cells <number of visited cells>
//! <h> <s> <a> <count> <reward_sum> <s'>:<n> ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a restored
//! checkpoint holds bit-identical numbers.

use std::fmt::Write as _;
use std::path::Path;

use ropo_core::{Dims, EmpiricalModel, StochasticPolicy};

use crate::error::{HarnessError, Result};
use crate::runner::Checkpoint;

const MAGIC: &str = "ropo-checkpoint 1";

pub fn to_text(c: &Checkpoint) -> String {
    let d = c.policy.dims();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "dims {} {} {}", d.states, d.actions, d.horizon);
    let _ = writeln!(out, "seed {}", c.seed);
    let _ = writeln!(out, "episode {}", c.episode);
    match c.cumulative_regret {
        Some(r) => {
            let _ = writeln!(out, "cumulative_regret {r:?}");
        }
        None => out.push_str("cumulative_regret none\n"),
    }
    out.push_str("policy\n");
    for row in c.policy.as_slice().chunks(d.actions) {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    let visited: Vec<_> = c.model.visited_cells().collect();
    let _ = writeln!(out, "cells {}", visited.len());
    for (h, s, a) in visited {
        let _ = write!(
            out,
            "{h} {s} {a} {} {:?}",
            c.model.count(h, s, a),
            c.model.reward_sum(h, s, a)
        );
        for (next, &n) in c.model.transition_counts(h, s, a).iter().enumerate() {
            if n > 0 {
                let _ = write!(out, " {next}:{n}");
            }
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => Err(HarnessError::parse(self.path, "unexpected end of file")),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> HarnessError {
        HarnessError::parse(self.path, format!("line {}: {msg}", self.line))
    }

    // `key v1 v2 ...` with the key checked.
    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.collect())
    }

    fn parse<T: std::str::FromStr>(&self, field: &str, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad {field} {s:?}")))
    }
}

pub fn from_text(path: &Path, text: &str) -> Result<Checkpoint> {
    let mut lines = Lines {
        path,
        iter: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()? != MAGIC {
        return Err(lines.err(format!("expected `{MAGIC}`")));
    }
    let dims = lines.keyed("dims")?;
    if dims.len() != 3 {
        return Err(lines.err("dims needs S A H"));
    }
    let dims = Dims::new(
        lines.parse("S", dims[0])?,
        lines.parse("A", dims[1])?,
        lines.parse("H", dims[2])?,
    )?;
    let one = |lines: &mut Lines, key: &str| -> Result<String> {
        let v = lines.keyed(key)?;
        match v.as_slice() {
            [x] => Ok(x.to_string()),
            _ => Err(lines.err(format!("{key} takes one value"))),
        }
    };
    let seed = one(&mut lines, "seed")?;
    let seed = lines.parse("seed", &seed)?;
    let episode = one(&mut lines, "episode")?;
    let episode = lines.parse("episode", &episode)?;
    let regret = one(&mut lines, "cumulative_regret")?;
    let cumulative_regret = match regret.as_str() {
        "none" => None,
        r => Some(lines.parse::<f64>("cumulative_regret", r)?),
    };
    lines.keyed("policy")?;
    let mut probs = Vec::with_capacity(dims.horizon * dims.states * dims.actions);
    for _ in 0..dims.horizon * dims.states {
        let l = lines.next()?;
        let row: Vec<&str> = l.split_whitespace().collect();
        if row.len() != dims.actions {
            return Err(lines.err(format!("policy row needs {} entries", dims.actions)));
        }
        for p in row {
            probs.push(lines.parse::<f64>("probability", p)?);
        }
    }
    let policy = StochasticPolicy::from_probs(dims, probs).map_err(|e| lines.err(e))?;

    let n = one(&mut lines, "cells")?;
    let n: usize = lines.parse("cell count", &n)?;
    let mut model = EmpiricalModel::new(dims);
    let mut transitions = vec![0u64; dims.states];
    for _ in 0..n {
        let l = lines.next()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() < 5 {
            return Err(lines.err("cell record needs h s a count reward_sum and transitions"));
        }
        let h: usize = lines.parse("h", parts[0])?;
        let s: usize = lines.parse("s", parts[1])?;
        let a: usize = lines.parse("a", parts[2])?;
        let count: u64 = lines.parse("count", parts[3])?;
        let reward_sum: f64 = lines.parse("reward_sum", parts[4])?;
        transitions.iter_mut().for_each(|t| *t = 0);
        for t in &parts[5..] {
            let (next, k) = t.split_once(':').ok_or_else(|| lines.err(format!("bad transition {t:?}")))?;
            let next: usize = lines.parse("next state", next)?;
            if next >= dims.states {
                return Err(lines.err(format!("next state {next} out of range")));
            }
            transitions[next] = lines.parse("transition count", k)?;
        }
        if transitions.iter().sum::<u64>() != count {
            return Err(lines.err("transition counts do not sum to the cell count"));
        }
        model
            .set_cell(h, s, a, reward_sum, &transitions)
            .map_err(|e| lines.err(e))?;
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    Ok(Checkpoint {
        seed,
        episode,
        cumulative_regret,
        policy,
        model,
    })
}

pub fn write(path: &Path, c: &Checkpoint) -> Result<()> {
    std::fs::write(path, to_text(c)).map_err(|e| HarnessError::io(path, e))
}

pub fn read(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    from_text(path, &text)
}
