//! Exact continuous-time simulation of the push-block dynamics on levels
//! `1..=M`.
//!
//! Positions are stored as `x2 = 2x`. Level `m` holds `m` particles and the
//! array interlaces: `x_{k-1}^m < x_{k-1}^{m-1} < x_k^m`. Every particle
//! carries two exponential clocks with total rate `ε + 1/ε`; on odd levels
//! the right clock has rate `1/ε`, on even levels `ε`.
//!
//! A right jump of `x_k^m` is blocked by `x_k^{m-1} = x_k^m + 1/2`; otherwise
//! it pushes the chain `x_{k+l}^{m+l} = x_k^m + l/2`. A left jump is blocked by
//! `x_{k-1}^{m-1} = x_k^m - 1/2` and pushes `x_k^{m+l} = x_k^m - l/2`.
//! Blocking looks down and pushing goes up, so levels `1..=M` evolve on
//! their own and truncating at `M` is exact.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use thiserror::Error;

use crate::finite::GridPoint;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("no particle ({m}, {k}) in a configuration with {levels} levels")]
    Index { m: usize, k: usize, levels: usize },
    #[error("target out of range: {0}")]
    TargetOutOfRange(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// `levels[m-1]` holds the sorted `x2` positions on level `m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParticleConfig {
    pub levels: Vec<Vec<i64>>,
}

impl ParticleConfig {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// `x2` of particle `k` on level `m`, both 1-based.
    pub fn get(&self, m: usize, k: usize) -> Option<i64> {
        if m == 0 || k == 0 {
            return None;
        }
        self.levels.get(m - 1)?.get(k - 1).copied()
    }

    fn set(&mut self, m: usize, k: usize, x2: i64) {
        self.levels[m - 1][k - 1] = x2;
    }

    pub fn is_occupied(&self, p: &GridPoint) -> bool {
        let m = p.m as usize;
        m >= 1
            && m <= self.levels.len()
            && self.levels[m - 1].binary_search(&p.x2).is_ok()
    }

    /// Checks level sizes, the grid parity and interlacing.
    pub fn validate(&self) -> Result<(), SimError> {
        for (i, lvl) in self.levels.iter().enumerate() {
            let m = i + 1;
            if lvl.len() != m {
                return Err(SimError::Invalid(format!("level {m} holds {} particles", lvl.len())));
            }
            for &x2 in lvl {
                if (x2 + m as i64 + 1).rem_euclid(2) != 0 {
                    return Err(SimError::Invalid(format!("x2 = {x2} is off-grid on level {m}")));
                }
            }
            if m >= 2 {
                let below = &self.levels[i - 1];
                for k in 0..m - 1 {
                    if !(lvl[k] < below[k] && below[k] < lvl[k + 1]) {
                        return Err(SimError::Invalid(format!(
                            "interlacing fails at level {m}, index {}",
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Packed start: `x_k^m = -(m+1)/2 + k`.
pub fn init_config(levels: usize) -> ParticleConfig {
    let levels = (1..=levels as i64)
        .map(|m| (1..=m).map(|k| 2 * k - (m + 1)).collect())
        .collect();
    ParticleConfig { levels }
}

/// Applies one clock ring to particle `k` of level `m` (1-based).
/// Blocked jumps leave the configuration unchanged.
pub fn apply_jump(
    cfg: &mut ParticleConfig,
    m: usize,
    k: usize,
    dir: Direction,
) -> Result<(), SimError> {
    let levels = cfg.num_levels();
    let x = cfg
        .get(m, k)
        .ok_or(SimError::Index { m, k, levels })?;
    match dir {
        Direction::Right => {
            if cfg.get(m - 1, k) == Some(x + 1) {
                return Ok(());
            }
            cfg.set(m, k, x + 2);
            let mut l = 1;
            while m + l <= levels && cfg.get(m + l, k + l) == Some(x + l as i64) {
                cfg.set(m + l, k + l, x + l as i64 + 2);
                l += 1;
            }
        }
        Direction::Left => {
            if k >= 2 && cfg.get(m - 1, k - 1) == Some(x - 1) {
                return Ok(());
            }
            cfg.set(m, k, x - 2);
            let mut l = 1;
            while m + l <= levels && cfg.get(m + l, k) == Some(x - l as i64) {
                cfg.set(m + l, k, x - l as i64 - 2);
                l += 1;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub levels: usize,
    pub eps: f64,
    pub t_end: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.levels == 0 {
            return Err(SimError::Invalid("levels must be ≥ 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(SimError::Invalid(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SimError::Invalid(format!("t must be finite and ≥ 0, got {}", self.t_end)));
        }
        if self.trials == 0 {
            return Err(SimError::Invalid("trials must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Generator for trial `trial`: the seed picks the key, the trial index the
/// stream, so trials are reproducible in any order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs the dynamics from `cfg` up to time `p.t_end`.
pub fn run<R: Rng>(cfg: &mut ParticleConfig, p: &SimConfig, rng: &mut R) {
    let levels = cfg.num_levels();
    let n = levels * (levels + 1) / 2;
    let per_particle = p.eps + 1.0 / p.eps;
    let total = per_particle * n as f64;
    if p.t_end <= 0.0 || n == 0 {
        return;
    }
    let wait = Exp::new(total).expect("positive rate");
    let fast_right = (1.0 / p.eps) / per_particle;
    let mut t = 0.0;
    loop {
        t += wait.sample(rng);
        if t > p.t_end {
            break;
        }
        let idx = rng.random_range(0..n);
        let (m, k) = triangular(idx);
        let right_prob = if m % 2 == 1 { fast_right } else { 1.0 - fast_right };
        let dir = if rng.random::<f64>() < right_prob {
            Direction::Right
        } else {
            Direction::Left
        };
        apply_jump(cfg, m, k, dir).expect("index in range");
    }
}

/// Maps `0..M(M+1)/2` onto `(m, k)` with `1 ≤ k ≤ m`.
fn triangular(idx: usize) -> (usize, usize) {
    let mut m = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while m * (m + 1) / 2 > idx {
        m -= 1;
    }
    while (m + 1) * (m + 2) / 2 <= idx {
        m += 1;
    }
    (m + 1, idx - m * (m + 1) / 2 + 1)
}

/// Terminal configuration of one trial.
pub fn run_trial(p: &SimConfig, trial: u64) -> ParticleConfig {
    let mut cfg = init_config(p.levels);
    let mut rng = trial_rng(p.seed, trial);
    run(&mut cfg, p, &mut rng);
    cfg
}

/// A frequency estimate from `trials` Bernoulli samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub count: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn freq(&self) -> f64 {
        self.count as f64 / self.trials as f64
    }

    /// `√(f(1-f)/trials)`
    pub fn stderr(&self) -> f64 {
        let f = self.freq();
        (f * (1.0 - f) / self.trials as f64).sqrt()
    }
}

/// Joint events estimated alongside the occupancies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Targets {
    pub pairs: Vec<(GridPoint, GridPoint)>,
    /// Odd-level sites `(x, m)`: particle at `(x, m)`, none at `(x, m+2)`.
    pub endpoints: Vec<GridPoint>,
}

impl Targets {
    pub fn validate(&self, levels: usize) -> Result<(), SimError> {
        let check = |p: &GridPoint| -> Result<(), SimError> {
            GridPoint::new(p.x2, p.m)
                .map_err(|e| SimError::TargetOutOfRange(e.to_string()))?;
            if p.m as usize > levels {
                return Err(SimError::TargetOutOfRange(format!(
                    "level {} exceeds {levels}",
                    p.m
                )));
            }
            Ok(())
        };
        for (a, b) in &self.pairs {
            check(a)?;
            check(b)?;
        }
        for e in &self.endpoints {
            check(e)?;
            if e.m % 2 == 0 {
                return Err(SimError::TargetOutOfRange(format!(
                    "endpoint level {} is even",
                    e.m
                )));
            }
            if e.m as usize + 2 > levels {
                return Err(SimError::TargetOutOfRange(format!(
                    "endpoint level {} needs level {} ≤ {levels}",
                    e.m,
                    e.m + 2
                )));
            }
        }
        Ok(())
    }
}

pub fn endpoint_event(cfg: &ParticleConfig, p: &GridPoint) -> bool {
    cfg.is_occupied(p) && !cfg.is_occupied(&GridPoint { m: p.m + 2, x2: p.x2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub trials: u64,
    /// Occupation counts per site, over every site that was ever occupied
    /// plus the packed sites.
    pub occupancy: BTreeMap<GridPoint, Estimate>,
    pub pairs: Vec<Estimate>,
    pub endpoints: Vec<Estimate>,
}

#[derive(Default)]
struct Counts {
    sites: BTreeMap<GridPoint, u64>,
    pairs: Vec<u64>,
    endpoints: Vec<u64>,
}

impl Counts {
    fn merge(mut self, other: Counts) -> Counts {
        for (k, v) in other.sites {
            *self.sites.entry(k).or_insert(0) += v;
        }
        add_into(&mut self.pairs, &other.pairs);
        add_into(&mut self.endpoints, &other.endpoints);
        self
    }
}

fn add_into(a: &mut Vec<u64>, b: &[u64]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Runs all trials in parallel and tallies the terminal occupancies and the
/// requested joint events. Counts are integers, so the result does not
/// depend on scheduling.
pub fn simulate_statistics(p: &SimConfig, targets: &Targets) -> Result<SimStats, SimError> {
    p.validate()?;
    targets.validate(p.levels)?;
    let counts = (0..p.trials as u64)
        .into_par_iter()
        .fold(Counts::default, |mut c, trial| {
            let cfg = run_trial(p, trial);
            for (i, lvl) in cfg.levels.iter().enumerate() {
                for &x2 in lvl {
                    *c.sites
                        .entry(GridPoint { m: i as u32 + 1, x2 })
                        .or_insert(0) += 1;
                }
            }
            let pairs: Vec<u64> = targets
                .pairs
                .iter()
                .map(|(a, b)| (cfg.is_occupied(a) && cfg.is_occupied(b)) as u64)
                .collect();
            let ends: Vec<u64> = targets
                .endpoints
                .iter()
                .map(|e| endpoint_event(&cfg, e) as u64)
                .collect();
            add_into(&mut c.pairs, &pairs);
            add_into(&mut c.endpoints, &ends);
            c
        })
        .reduce(Counts::default, Counts::merge);

    let trials = p.trials as u64;
    let mut occupancy: BTreeMap<GridPoint, Estimate> = BTreeMap::new();
    for lvl in init_config(p.levels).levels.iter().enumerate() {
        for &x2 in lvl.1 {
            occupancy.insert(
                GridPoint { m: lvl.0 as u32 + 1, x2 },
                Estimate { count: 0, trials },
            );
        }
    }
    for (site, count) in counts.sites {
        occupancy.insert(site, Estimate { count, trials });
    }
    let est = |v: &Vec<u64>, n: usize| -> Vec<Estimate> {
        (0..n)
            .map(|i| Estimate {
                count: v.get(i).copied().unwrap_or(0),
                trials,
            })
            .collect()
    };
    Ok(SimStats {
        trials,
        pairs: est(&counts.pairs, targets.pairs.len()),
        endpoints: est(&counts.endpoints, targets.endpoints.len()),
        occupancy,
    })
}

/// Occupancy estimates only.
pub fn estimate_occupancy(p: &SimConfig) -> Result<BTreeMap<GridPoint, Estimate>, SimError> {
    Ok(simulate_statistics(p, &Targets::default())?.occupancy)
}

/// Pair and endpoint frequencies for `targets`.
pub fn estimate_pair_and_endpoints(
    p: &SimConfig,
    targets: &Targets,
) -> Result<(Vec<Estimate>, Vec<Estimate>), SimError> {
    let s = simulate_statistics(p, targets)?;
    Ok((s.pairs, s.endpoints))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_start() {
        assert_eq!(init_config(1).levels, vec![vec![0]]);
        assert_eq!(init_config(2).levels[1], vec![-1, 1]);
        assert_eq!(init_config(3).levels[2], vec![-2, 0, 2]);
        init_config(7).validate().unwrap();
    }

    #[test]
    fn push_and_block_examples() {
        let mut c = init_config(2);
        apply_jump(&mut c, 1, 1, Direction::Right).unwrap();
        assert_eq!(c.levels, vec![vec![2], vec![-1, 3]]);

        let mut c = init_config(2);
        apply_jump(&mut c, 2, 1, Direction::Right).unwrap();
        assert_eq!(c, init_config(2));

        let mut c = init_config(3);
        apply_jump(&mut c, 1, 1, Direction::Left).unwrap();
        assert_eq!(c.levels, vec![vec![-2], vec![-3, 1], vec![-4, 0, 2]]);
        c.validate().unwrap();
    }

    #[test]
    fn index_errors() {
        let mut c = init_config(2);
        assert!(matches!(
            apply_jump(&mut c, 3, 1, Direction::Left),
            Err(SimError::Index { .. })
        ));
        assert!(apply_jump(&mut c, 2, 3, Direction::Left).is_err());
        assert!(apply_jump(&mut c, 0, 1, Direction::Left).is_err());
    }

    #[test]
    fn triangular_indexing() {
        let mut idx = 0;
        for m in 1..=30 {
            for k in 1..=m {
                assert_eq!(triangular(idx), (m, k));
                idx += 1;
            }
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let p = SimConfig {
            levels: 4,
            eps: 0.3,
            t_end: 0.0,
            trials: 1,
            seed: 1,
        };
        assert_eq!(run_trial(&p, 0), init_config(4));
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = SimConfig {
            levels: 5,
            eps: 0.4,
            t_end: 1.5,
            trials: 1,
            seed: 99,
        };
        assert_eq!(run_trial(&p, 3), run_trial(&p, 3));
        assert_ne!(run_trial(&p, 3), run_trial(&p, 4));
    }

    #[test]
    fn target_validation() {
        let t = Targets {
            pairs: vec![],
            endpoints: vec![GridPoint { m: 3, x2: 0 }],
        };
        assert!(t.validate(5).is_ok());
        assert!(t.validate(4).is_err());
        let t = Targets {
            pairs: vec![],
            endpoints: vec![GridPoint { m: 2, x2: 1 }],
        };
        assert!(t.validate(6).is_err());
    }
}
