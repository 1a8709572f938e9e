//! Block selection rules: which subset S^r of blocks is updated at
//! iteration r.
//!
//! The cyclic rule walks a fixed partition {T_0, …, T_{m−1}}; the
//! randomized rule includes each block independently with a stationary
//! probability p_j ≥ p_min > 0. Randomized draws come from a stateless
//! generator keyed by (seed, r, j, attempt), so the set drawn at iteration
//! r does not depend on thread count or on the order in which iterations
//! are evaluated.

use crate::error::{CoreError, Result};
use crate::rng::{mix64_absorb, unit_f64, SplitMix64};

/// Redraw attempts before falling back to forcing the most probable block.
/// With p_min > 0 the probability of ever reaching this is negligible; the
/// cap only guarantees select() terminates and never returns an empty set.
const EMPTY_REDRAW_CAP: u64 = 64;

/// Fixed partition cycled over groups: S^{mr+ℓ} = T_ℓ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicSchedule {
    groups: Vec<Vec<usize>>,
    n_blocks: usize,
}

impl CyclicSchedule {
    /// Contiguous groups of `group_size` blocks (the last group may be
    /// smaller). This is the make-partition rule used by the benchmark:
    /// each processor owns a fixed slab of coordinates.
    pub fn contiguous(n_blocks: usize, group_size: usize) -> Result<Self> {
        if group_size < 1 {
            return Err(CoreError::invalid("group size must be at least 1"));
        }
        if n_blocks < 1 {
            return Err(CoreError::invalid("need at least one block"));
        }
        if group_size > n_blocks {
            return Err(CoreError::invalid(format!(
                "group size {group_size} exceeds block count {n_blocks}"
            )));
        }
        let groups = (0..n_blocks)
            .collect::<Vec<_>>()
            .chunks(group_size)
            .map(|c| c.to_vec())
            .collect();
        Self::from_groups(groups)
    }

    /// Like [`CyclicSchedule::contiguous`] but over a seeded permutation of
    /// the blocks.
    pub fn shuffled(n_blocks: usize, group_size: usize, seed: u64) -> Result<Self> {
        let plain = Self::contiguous(n_blocks, group_size)?;
        let mut ids: Vec<usize> = (0..n_blocks).collect();
        let mut rng = SplitMix64::new(seed ^ 0x5848_55FF);
        for k in (1..n_blocks).rev() {
            let j = rng.next_index(k + 1);
            ids.swap(k, j);
        }
        let mut groups = Vec::with_capacity(plain.groups.len());
        let mut cursor = 0;
        for g in &plain.groups {
            let mut grp: Vec<usize> = ids[cursor..cursor + g.len()].to_vec();
            grp.sort_unstable();
            groups.push(grp);
            cursor += g.len();
        }
        Self::from_groups(groups)
    }

    /// Validates disjointness, coverage, and nonemptiness.
    pub fn from_groups(groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(CoreError::invalid("partition needs at least one group"));
        }
        let mut seen: Vec<bool> = Vec::new();
        let mut total = 0usize;
        for g in &groups {
            if g.is_empty() {
                return Err(CoreError::invalid("partition groups must be nonempty"));
            }
            for &i in g {
                if i >= seen.len() {
                    seen.resize(i + 1, false);
                }
                if seen[i] {
                    return Err(CoreError::invalid(format!("block {i} appears twice")));
                }
                seen[i] = true;
                total += 1;
            }
        }
        let n_blocks = seen.len();
        if total != n_blocks || seen.iter().any(|s| !s) {
            return Err(CoreError::invalid(
                "partition must cover every block exactly once",
            ));
        }
        Ok(CyclicSchedule { groups, n_blocks })
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }
}

/// Independent per-block inclusion with stationary probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedSchedule {
    probs: Vec<f64>,
    seed: u64,
}

impl RandomizedSchedule {
    pub fn new(probs: Vec<f64>, seed: u64) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoreError::invalid("need at least one block"));
        }
        if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(CoreError::invalid(
                "inclusion probabilities must lie in (0, 1]",
            ));
        }
        Ok(RandomizedSchedule { probs, seed })
    }

    pub fn uniform(n_blocks: usize, p: f64, seed: u64) -> Result<Self> {
        Self::new(vec![p; n_blocks], seed)
    }

    pub fn p_min(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_blocks(&self) -> usize {
        self.probs.len()
    }
}

#[derive(Clone, Debug)]
pub enum Schedule {
    Cyclic(CyclicSchedule),
    Randomized(RandomizedSchedule),
}

impl Schedule {
    pub fn n_blocks(&self) -> usize {
        match self {
            Schedule::Cyclic(c) => c.n_blocks(),
            Schedule::Randomized(r) => r.n_blocks(),
        }
    }

    /// Minimum inclusion probability: 1 for cyclic (each block appears once
    /// per sweep), p_min for randomized.
    pub fn p_min(&self) -> f64 {
        match self {
            Schedule::Cyclic(_) => 1.0,
            Schedule::Randomized(r) => r.p_min(),
        }
    }

    pub fn rule_name(&self) -> &'static str {
        match self {
            Schedule::Cyclic(_) => "cyclic",
            Schedule::Randomized(_) => "randomized",
        }
    }

    /// S^r, sorted ascending, never empty.
    pub fn select(&self, r: u64) -> Vec<usize> {
        match self {
            Schedule::Cyclic(c) => c.groups[(r % c.groups.len() as u64) as usize].clone(),
            Schedule::Randomized(rs) => {
                let base = mix64_absorb(rs.seed, 0x52414e44); // "RAND"
                for attempt in 0..EMPTY_REDRAW_CAP {
                    let key_r = mix64_absorb(mix64_absorb(base, r), attempt);
                    let mut set = Vec::new();
                    for (j, &p) in rs.probs.iter().enumerate() {
                        let u = unit_f64(mix64_absorb(key_r, j as u64));
                        if u < p {
                            set.push(j);
                        }
                    }
                    if !set.is_empty() {
                        return set;
                    }
                }
                // Deterministic fallback: the most probable block.
                let (argmax, _) = rs
                    .probs
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &p)| {
                        if p > bp {
                            (i, p)
                        } else {
                            (bi, bp)
                        }
                    });
                vec![argmax]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_partition_examples() {
        let s = CyclicSchedule::contiguous(6, 2).unwrap();
        assert_eq!(s.groups(), &[vec![0, 1], vec![2, 3], vec![4, 5]]);

        let s = CyclicSchedule::contiguous(5, 2).unwrap();
        assert_eq!(s.groups(), &[vec![0, 1], vec![2, 3], vec![4]]);

        let s = CyclicSchedule::contiguous(4, 4).unwrap();
        assert_eq!(s.groups(), &[vec![0, 1, 2, 3]]);

        assert!(CyclicSchedule::contiguous(4, 0).is_err());
        assert!(CyclicSchedule::contiguous(4, 5).is_err());
    }

    #[test]
    fn cyclic_select_walks_groups() {
        let s = Schedule::Cyclic(CyclicSchedule::contiguous(6, 2).unwrap());
        assert_eq!(s.select(7), vec![2, 3]); // 7 mod 3 = 1 → T_1
        assert_eq!(s.select(0), vec![0, 1]);
        assert_eq!(s.select(5), vec![4, 5]);
    }

    #[test]
    fn cyclic_covers_each_block_once_per_sweep() {
        let s = CyclicSchedule::shuffled(23, 5, 99).unwrap();
        let sched = Schedule::Cyclic(s.clone());
        for start in [0u64, 35] {
            let mut counts = vec![0usize; 23];
            for r in start..start + s.num_groups() as u64 {
                for i in sched.select(r) {
                    counts[i] += 1;
                }
            }
            assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn randomized_certain_inclusion() {
        let s = Schedule::Randomized(RandomizedSchedule::uniform(9, 1.0, 5).unwrap());
        for r in 0..20 {
            assert_eq!(s.select(r), (0..9).collect::<Vec<_>>());
        }
    }

    #[test]
    fn randomized_same_key_same_draw() {
        let s = Schedule::Randomized(RandomizedSchedule::uniform(50, 0.3, 11).unwrap());
        assert_eq!(s.select(1234), s.select(1234));
        let t = Schedule::Randomized(RandomizedSchedule::uniform(50, 0.3, 12).unwrap());
        assert_ne!(s.select(1234), t.select(1234));
    }

    #[test]
    fn randomized_never_empty() {
        let s = Schedule::Randomized(RandomizedSchedule::uniform(2, 1e-9, 3).unwrap());
        for r in 0..200 {
            assert!(!s.select(r).is_empty());
        }
    }

    /// Monte-Carlo check of the inclusion frequency: p = 0.3, n = 1000,
    /// 10^5 iterations, every block's frequency within 0.3 ± 0.01.
    #[test]
    fn randomized_inclusion_frequency() {
        let n = 1000;
        let iters = 100_000u64;
        let s = Schedule::Randomized(RandomizedSchedule::uniform(n, 0.3, 2024).unwrap());
        let mut counts = vec![0u32; n];
        for r in 0..iters {
            for i in s.select(r) {
                counts[i] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / iters as f64;
            assert!(
                (freq - 0.3).abs() <= 0.01,
                "block {i} frequency {freq} out of band"
            );
        }
    }

    /// Co-inclusion of distinct blocks across iterations should look
    /// independent: joint frequency ≈ p².
    #[test]
    fn randomized_pairwise_independence() {
        let s = Schedule::Randomized(RandomizedSchedule::uniform(16, 0.5, 77).unwrap());
        let iters = 40_000u64;
        let mut joint = 0u64;
        let mut lagged = 0u64;
        let mut prev_has_3 = false;
        for r in 0..iters {
            let set = s.select(r);
            let has_3 = set.contains(&3);
            let has_11 = set.contains(&11);
            if has_3 && has_11 {
                joint += 1;
            }
            if prev_has_3 && has_3 {
                lagged += 1;
            }
            prev_has_3 = has_3;
        }
        let joint_freq = joint as f64 / iters as f64;
        let lagged_freq = lagged as f64 / iters as f64;
        assert!((joint_freq - 0.25).abs() < 0.02, "joint {joint_freq}");
        assert!((lagged_freq - 0.25).abs() < 0.02, "lagged {lagged_freq}");
    }

    #[test]
    fn partition_validation_rejects_overlap_and_gaps() {
        assert!(CyclicSchedule::from_groups(vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(CyclicSchedule::from_groups(vec![vec![0], vec![2]]).is_err());
        assert!(CyclicSchedule::from_groups(vec![vec![0], vec![]]).is_err());
    }

    #[test]
    fn shuffled_partition_is_seeded_and_valid() {
        let a = CyclicSchedule::shuffled(40, 7, 1).unwrap();
        let b = CyclicSchedule::shuffled(40, 7, 1).unwrap();
        let c = CyclicSchedule::shuffled(40, 7, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
