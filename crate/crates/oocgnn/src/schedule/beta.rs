//! Greedy baseline on physical partitions: every swap immediately trains on
//! all newly available buckets, so each step's examples share the freshly
//! loaded partition.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::grouping::LogicalGrouping;
use super::{ExampleSet, Schedule};
use crate::error::{Error, Result};
use crate::graph::EdgeBucketStore;
use crate::seed::{self, TAG_SCHEDULE};

/// Unassigned nonempty buckets incident to partition `q` that are inside the
/// resident set, in row-major order.
fn claimable(
    q: u32,
    resident: &HashSet<u32>,
    assigned: &HashSet<(u32, u32)>,
    nonempty: &HashSet<(u32, u32)>,
) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut residents: Vec<u32> = resident.iter().copied().collect();
    residents.sort_unstable();
    for &r in &residents {
        for b in [(q, r), (r, q)] {
            if b.0 == b.1 && out.contains(&b) {
                continue;
            }
            if nonempty.contains(&b) && !assigned.contains(&b) {
                out.push(b);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Build the full greedy schedule: random initial set, then repeatedly evict
/// the resident partition with the fewest remaining unassigned buckets and
/// load the non-resident partition that unlocks the most, until every
/// nonempty bucket has been assigned exactly once.
pub fn beta_schedule(p: u32, c: u32, store: &EdgeBucketStore, seed: u64) -> Result<Schedule> {
    if c < 2 {
        return Err(Error::InvalidArgument("buffer must hold at least two partitions".into()));
    }
    if p != store.p {
        return Err(Error::InvalidArgument("p disagrees with the store".into()));
    }
    let grouping = LogicalGrouping::identity(p);
    let nonempty: HashSet<(u32, u32)> = store.nonempty_buckets().into_iter().collect();
    let mut rng = seed::rng(seed, &[TAG_SCHEDULE, 0xbe7a]);

    if c >= p {
        let mut all: Vec<(u32, u32)> = nonempty.iter().copied().collect();
        all.sort_unstable();
        return Ok(Schedule {
            grouping,
            sets: vec![(0..p).collect()],
            examples: vec![ExampleSet::Buckets(all)],
            swaps: vec![],
        });
    }

    let mut ids: Vec<u32> = (0..p).collect();
    ids.shuffle(&mut rng);
    let mut current: Vec<u32> = ids[..c as usize].to_vec();
    current.sort_unstable();
    let resident: HashSet<u32> = current.iter().copied().collect();

    let mut assigned: HashSet<(u32, u32)> = HashSet::new();
    let mut x1: Vec<(u32, u32)> = Vec::new();
    for &i in &current {
        for &j in &current {
            if nonempty.contains(&(i, j)) {
                x1.push((i, j));
                assigned.insert((i, j));
            }
        }
    }
    x1.sort_unstable();

    let mut sets = vec![current.clone()];
    let mut examples = vec![ExampleSet::Buckets(x1)];
    let mut swaps = Vec::new();
    let mut resident = resident;

    let step_limit = 8 * (p as usize) * (p as usize) + 16;
    while assigned.len() < nonempty.len() {
        if swaps.len() > step_limit {
            return Err(Error::ScheduleBug("bucket traversal did not terminate".into()));
        }
        // Evict the resident with the fewest remaining unassigned buckets.
        let remaining = |q: u32| {
            nonempty
                .iter()
                .filter(|&&(i, j)| (i == q || j == q) && !assigned.contains(&(i, j)))
                .count()
        };
        let min_remaining = current.iter().map(|&q| remaining(q)).min().unwrap();
        let evict_candidates: Vec<u32> =
            current.iter().copied().filter(|&q| remaining(q) == min_remaining).collect();
        let evict = evict_candidates[rng.gen_range(0..evict_candidates.len())];

        let mut after_evict = resident.clone();
        after_evict.remove(&evict);

        // Load the partition that unlocks the most new buckets.
        let mut best_gain = 0usize;
        let mut best: Vec<u32> = Vec::new();
        for q in 0..p {
            if resident.contains(&q) {
                continue;
            }
            let mut with_q = after_evict.clone();
            with_q.insert(q);
            let gain = claimable(q, &with_q, &assigned, &nonempty).len();
            if gain > best_gain {
                best_gain = gain;
                best.clear();
            }
            if gain == best_gain {
                best.push(q);
            }
        }
        if best_gain == 0 {
            // No single load claims anything: the open buckets sit entirely
            // between non-resident partitions. Load one of their endpoints so
            // the next swap can claim them.
            let endpoints: Vec<u32> = best
                .iter()
                .copied()
                .filter(|&q| {
                    nonempty
                        .iter()
                        .any(|&(i, j)| (i == q || j == q) && !assigned.contains(&(i, j)))
                })
                .collect();
            if !endpoints.is_empty() {
                best = endpoints;
            }
        }
        let load = best[rng.gen_range(0..best.len())];

        resident.remove(&evict);
        resident.insert(load);
        let claimed = claimable(load, &resident, &assigned, &nonempty);
        for &b in &claimed {
            assigned.insert(b);
        }
        current = resident.iter().copied().collect();
        current.sort_unstable();
        sets.push(current.clone());
        examples.push(ExampleSet::Buckets(claimed));
        swaps.push((evict, load));
    }

    Ok(Schedule { grouping, sets, examples, swaps })
}
