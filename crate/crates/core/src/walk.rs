//! Simple random walk on `Z^d` with reproducible, splittable randomness.
//!
//! Every random stream is a ChaCha8 generator keyed by `base_seed` and
//! positioned on the ChaCha stream `mix64(stream_id)`, where `mix64` is the
//! SplitMix64 finalizer (a bijection of `u64`). Distinct stream ids therefore
//! select distinct keystreams of the same key.

use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IdlaError, Result};
use crate::lattice::{Dim, Site};

/// Identifier recorded in output metadata.
pub const GENERATOR_ID: &str = "chacha8/splitmix64-streams/v1";

/// Default per-walk step cap.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// SplitMix64 finalizer; bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl RandomSource {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        RandomSource { base_seed, stream_id }
    }

    pub fn from_seed(base_seed: u64) -> Self {
        RandomSource { base_seed, stream_id: 0 }
    }

    /// An independent family of streams below this one, indexed by `index`.
    ///
    /// The child key is `mix64(base_seed ^ mix64(stream_id))`; its stream id is `index`.
    pub fn child(&self, index: u64) -> RandomSource {
        RandomSource { base_seed: mix64(self.base_seed ^ mix64(self.stream_id)), stream_id: index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(mix64(self.stream_id));
        rng
    }

    pub fn walker(&self, dim: Dim) -> StepRng {
        StepRng::new(self.rng(), dim)
    }
}

/// Random number generator specialised for drawing uniform neighbour
/// directions: directions are taken `ceil(log2 2d)` bits at a time from a
/// buffered word, rejecting values `>= 2d`.
#[derive(Clone, Debug)]
pub struct StepRng {
    rng: ChaCha8Rng,
    buf: u64,
    avail: u32,
    bits: u32,
    mask: u64,
    degree: u64,
}

impl StepRng {
    pub fn new(rng: ChaCha8Rng, dim: Dim) -> Self {
        let degree = dim.degree() as u64;
        let bits = 64 - (degree - 1).leading_zeros();
        StepRng { rng, buf: 0, avail: 0, bits, mask: (1u64 << bits) - 1, degree }
    }

    #[inline]
    pub fn direction(&mut self) -> usize {
        loop {
            if self.avail < self.bits {
                self.buf = self.rng.next_u64();
                self.avail = 64;
            }
            let v = self.buf & self.mask;
            self.buf >>= self.bits;
            self.avail -= self.bits;
            if v < self.degree {
                return v as usize;
            }
        }
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }

    #[inline]
    pub fn step_from(&mut self, site: &Site) -> Site {
        site.neighbor(self.direction())
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkState {
    pub position: Site,
    pub step_count: u64,
}

impl WalkState {
    pub fn at(position: Site) -> Self {
        WalkState { position, step_count: 0 }
    }
}

pub fn step(state: WalkState, rng: &mut StepRng) -> WalkState {
    WalkState { position: rng.step_from(&state.position), step_count: state.step_count + 1 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitKind {
    Target,
    Absorbing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hit {
    pub site: Site,
    pub kind: HitKind,
    pub steps: u64,
}

/// Walks until the first visit (at time `>= 0`) of `target ∪ absorbing`.
/// A site in both sets counts as a target hit.
pub fn run_until_hit(state: WalkState, target: &HashSet<Site>, absorbing: &HashSet<Site>, rng: &mut StepRng, step_cap: u64) -> Result<Hit> {
    run_until(state, rng, step_cap, |s| {
        if target.contains(s) {
            Some(HitKind::Target)
        } else if absorbing.contains(s) {
            Some(HitKind::Absorbing)
        } else {
            None
        }
    })
}

/// Walks until `stop` returns `Some`, checking the start position first.
pub fn run_until<F>(state: WalkState, rng: &mut StepRng, step_cap: u64, mut stop: F) -> Result<Hit>
where
    F: FnMut(&Site) -> Option<HitKind>,
{
    let mut pos = state.position;
    let mut elapsed = 0u64;
    loop {
        if let Some(kind) = stop(&pos) {
            return Ok(Hit { site: pos, kind, steps: elapsed });
        }
        if elapsed >= step_cap {
            return Err(IdlaError::StepCapExceeded { cap: step_cap });
        }
        pos = rng.step_from(&pos);
        elapsed += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Ball;

    fn d2() -> Dim {
        Dim::new(2).unwrap()
    }

    #[test]
    fn mix64_is_injective_on_a_sample() {
        let mut seen = HashSet::new();
        for i in 0..100_000u64 {
            assert!(seen.insert(mix64(i)));
        }
    }

    #[test]
    fn uniform_neighbor_law() {
        for dim in [2usize, 3, 5] {
            let dm = Dim::new(dim).unwrap();
            let mut rng = RandomSource::new(7, dim as u64).walker(dm);
            let draws = 100_000;
            let mut counts = vec![0u32; 2 * dim];
            for _ in 0..draws {
                counts[rng.direction()] += 1;
            }
            let p = 1.0 / (2 * dim) as f64;
            for c in counts {
                assert!((c as f64 / draws as f64 - p).abs() < 0.02 * (4.0 * p), "dim {dim}");
            }
        }
    }

    #[test]
    fn step_moves_to_a_neighbor() {
        let mut rng = RandomSource::from_seed(1).walker(d2());
        let s0 = WalkState::at(Site::origin(d2()));
        let s1 = step(s0, &mut rng);
        assert_eq!(s1.step_count, 1);
        assert_eq!(s1.position.norm2(), 1);
    }

    #[test]
    fn replay_is_deterministic() {
        let src = RandomSource::new(42, 3);
        let run = |src: RandomSource| {
            let mut rng = src.walker(d2());
            let mut s = WalkState::at(Site::origin(d2()));
            (0..1000)
                .map(|_| {
                    s = step(s, &mut rng);
                    s.position
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(src), run(src));
        assert_ne!(run(src), run(RandomSource::new(42, 4)));
        assert_ne!(run(src.child(0)), run(src.child(1)));
    }

    #[test]
    fn hit_at_time_zero() {
        let o = Site::origin(d2());
        let target: HashSet<Site> = [o].into_iter().collect();
        let mut rng = RandomSource::from_seed(0).walker(d2());
        let h = run_until_hit(WalkState::at(o), &target, &HashSet::new(), &mut rng, 10).unwrap();
        assert_eq!(h.steps, 0);
        assert_eq!(h.kind, HitKind::Target);
    }

    #[test]
    fn target_wins_ties() {
        let o = Site::origin(d2());
        let both: HashSet<Site> = [o].into_iter().collect();
        let mut rng = RandomSource::from_seed(0).walker(d2());
        let h = run_until_hit(WalkState::at(o), &both, &both, &mut rng, 10).unwrap();
        assert_eq!(h.kind, HitKind::Target);
    }

    #[test]
    fn exit_from_ball_lands_on_boundary() {
        let ball = Ball::centered(d2(), 6.0).unwrap();
        let boundary: HashSet<Site> = ball.boundary_sites().into_iter().collect();
        let mut rng = RandomSource::from_seed(5).walker(d2());
        for _ in 0..200 {
            let h = run_until_hit(WalkState::at(Site::origin(d2())), &HashSet::new(), &boundary, &mut rng, DEFAULT_STEP_CAP).unwrap();
            assert_eq!(h.kind, HitKind::Absorbing);
            assert!(ball.on_boundary(&h.site));
        }
    }

    #[test]
    fn step_cap_is_an_error() {
        let far: HashSet<Site> = [Site::on_axis(d2(), 1000)].into_iter().collect();
        let mut rng = RandomSource::from_seed(0).walker(d2());
        let r = run_until_hit(WalkState::at(Site::origin(d2())), &far, &HashSet::new(), &mut rng, 100);
        assert!(matches!(r, Err(IdlaError::StepCapExceeded { cap: 100 })));
    }
}
