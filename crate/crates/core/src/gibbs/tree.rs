use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest ball accepted by [`TreeBall::new`].
pub const MAX_VERTICES: usize = 50_000_000;

/// The ball `V_n` of radius `n` around the root of the Cayley tree of
/// order `k`, numbered breadth-first.
///
/// The root has `k+1` children and every other internal vertex has `k`, so
/// the shell at distance `l >= 1` has `(k+1) k^(l-1)` vertices. Within a
/// shell, the children of a vertex are contiguous and ordered like their
/// parents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeBall {
    k: usize,
    radius: usize,
    /// `shell_start[l]` is the id of the first vertex at distance `l`;
    /// the last entry is the vertex count.
    shell_start: Vec<usize>,
}

impl TreeBall {
    pub fn new(k: usize, radius: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidInput(format!("branching k = {k} must be at least 1")));
        }
        let mut shell_start = vec![0, 1];
        let mut size = k + 1;
        for _ in 1..=radius {
            let next = shell_start.last().unwrap() + size;
            if next > MAX_VERTICES {
                return Err(Error::InvalidInput(format!(
                    "ball of radius {radius} for k = {k} exceeds {MAX_VERTICES} vertices"
                )));
            }
            shell_start.push(next);
            size *= k;
        }
        Ok(Self { k, radius, shell_start })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        *self.shell_start.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Vertex ids at distance `l` from the root.
    pub fn shell(&self, l: usize) -> Range<usize> {
        self.shell_start[l]..self.shell_start[l + 1]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.shell_start.partition_point(|&s| s <= v) - 1
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.depth(v) {
            0 => None,
            1 => Some(0),
            d => {
                let offset = v - self.shell_start[d];
                Some(self.shell_start[d - 1] + offset / self.k)
            }
        }
    }

    /// Children of `v` inside the ball.
    pub fn children(&self, v: usize) -> Range<usize> {
        let d = self.depth(v);
        if d == self.radius {
            return 0..0;
        }
        if d == 0 {
            return self.shell(1);
        }
        let start = self.shell_start[d + 1] + (v - self.shell_start[d]) * self.k;
        start..start + self.k
    }
}
