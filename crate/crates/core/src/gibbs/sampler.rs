use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::measure::MeasureHandle;
use super::tree::TreeBall;
use crate::error::Result;
use crate::par_map;

/// The uniform variate used by vertex `v` of sample `stream`.
///
/// Each sample is its own ChaCha8 stream of the seed; vertex `v` reads the
/// 64-bit word at position `v`, so the draw does not depend on traversal
/// order.
pub fn vertex_uniform(rng: &mut ChaCha8Rng, stream: u64, v: usize) -> f64 {
    rng.set_stream(stream);
    rng.set_word_pos(2 * v as u128);
    rng.random::<f64>()
}

/// Spins on a [`TreeBall`], in breadth-first vertex order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinConfiguration {
    pub ball: TreeBall,
    pub seed: u64,
    pub stream: u64,
    pub spins: Vec<f64>,
}

impl SpinConfiguration {
    /// CSV with columns `vertex_id,parent_id,depth,spin`; the root's parent
    /// is empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["vertex_id", "parent_id", "depth", "spin"])?;
        for (v, s) in self.spins.iter().enumerate() {
            let parent = self.ball.parent(v).map(|p| p.to_string()).unwrap_or_default();
            wtr.write_record([v.to_string(), parent, self.ball.depth(v).to_string(), s.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fills `spins` for one sample: root from `ρ`, then every child from
/// `p(· | parent)`, shell by shell.
///
/// Vertices are visited in id order, so reading the stream sequentially
/// gives vertex `v` exactly the word [`vertex_uniform`] assigns it.
pub(crate) fn fill_spins(handle: &MeasureHandle, ball: &TreeBall, seed: u64, stream: u64, spins: &mut Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(0);
    let mut coeffs = vec![0.0; handle.kernel().expansion_rank()];
    spins.clear();
    spins.resize(ball.len(), 0.0);
    spins[0] = handle.sample_root(rng.random::<f64>());
    if ball.radius() == 0 {
        return;
    }
    for p in 0..ball.shell(ball.radius() - 1).end {
        let z = handle.prepare_parent(spins[p], &mut coeffs);
        for v in ball.children(p) {
            spins[v] = handle.sample_prepared(&coeffs, z, rng.random::<f64>());
        }
    }
}

/// Samples one configuration on the ball of radius `radius`. The same
/// `(handle, radius, seed)` always yields the same spins.
pub fn sample_ball(handle: &MeasureHandle, radius: usize, seed: u64) -> Result<SpinConfiguration> {
    sample_ball_stream(handle, radius, seed, 0)
}

/// Like [`sample_ball`], drawing from stream `stream` of the seed.
pub fn sample_ball_stream(handle: &MeasureHandle, radius: usize, seed: u64, stream: u64) -> Result<SpinConfiguration> {
    let ball = TreeBall::new(handle.k() as usize, radius)?;
    let mut spins = Vec::new();
    fill_spins(handle, &ball, seed, stream, &mut spins);
    Ok(SpinConfiguration { ball, seed, stream, spins })
}

/// Samples per parallel task in [`sample_map`].
const CHUNK: usize = 512;

/// Draws `n_samples` independent configurations (streams `0..n_samples`)
/// and maps each through `f`, returning results in stream order.
pub fn sample_map<T, F>(handle: &MeasureHandle, radius: usize, n_samples: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&TreeBall, &[f64]) -> T + Sync + Send,
{
    let ball = TreeBall::new(handle.k() as usize, radius)?;
    let chunks = n_samples.div_ceil(CHUNK);
    let parts = par_map(chunks, |c| {
        let mut spins = Vec::new();
        (c * CHUNK..((c + 1) * CHUNK).min(n_samples))
            .map(|s| {
                fill_spins(handle, &ball, seed, s as u64, &mut spins);
                f(&ball, &spins)
            })
            .collect::<Vec<T>>()
    });
    Ok(parts.into_iter().flatten().collect())
}
