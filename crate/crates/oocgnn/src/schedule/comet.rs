//! Correlation-minimizing schedule: one-swap greedy pair cover over logical
//! partitions, followed by randomized deferred bucket assignment.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::grouping::LogicalGrouping;
use crate::error::{Error, Result};
use crate::graph::EdgeBucketStore;
use crate::seed::{self, TAG_ASSIGN, TAG_SCHEDULE};

fn pair(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Greedy one-swap cover: starting from a random set of `c_l` logical
/// partitions, each step evicts one and loads one so that the number of
/// newly co-resident logical pairs is maximal (ties uniform at random).
/// Stops once every unordered pair has co-resided. `c_l >= l` degenerates to
/// a single all-resident set.
pub fn comet_schedule(g: &LogicalGrouping, c_l: u32, seed: u64) -> Result<(Vec<Vec<u32>>, Vec<(u32, u32)>)> {
    let l = g.l;
    if c_l < 2 {
        return Err(Error::InvalidArgument("buffer must hold at least two logical partitions".into()));
    }
    if c_l >= l {
        return Ok((vec![(0..l).collect()], vec![]));
    }
    let mut rng = seed::rng(seed, &[TAG_SCHEDULE]);
    let mut ids: Vec<u32> = (0..l).collect();
    ids.shuffle(&mut rng);
    let mut current: Vec<u32> = ids[..c_l as usize].to_vec();
    current.sort_unstable();

    let mut covered: HashSet<(u32, u32)> = HashSet::new();
    for i in 0..current.len() {
        for j in i + 1..current.len() {
            covered.insert(pair(current[i], current[j]));
        }
    }
    let total_pairs = (l as usize * (l as usize - 1)) / 2;
    let mut sets = vec![current.clone()];
    let mut swaps = Vec::new();

    // One swap covers at most c_l - 1 new pairs, so a full cover needs at
    // least total_pairs / (c_l - 1) swaps; the bound below is generous.
    let step_limit = 4 * l as usize * l as usize + 16;
    while covered.len() < total_pairs {
        if swaps.len() > step_limit {
            return Err(Error::ScheduleBug(format!(
                "pair cover did not terminate within {step_limit} swaps"
            )));
        }
        let resident: HashSet<u32> = current.iter().copied().collect();
        let mut best_gain = 0usize;
        let mut best: Vec<(u32, u32)> = Vec::new();
        for &evict in &current {
            for load in 0..l {
                if resident.contains(&load) {
                    continue;
                }
                let gain = current
                    .iter()
                    .filter(|&&s| s != evict && !covered.contains(&pair(load, s)))
                    .count();
                if gain > best_gain {
                    best_gain = gain;
                    best.clear();
                }
                if gain == best_gain {
                    best.push((evict, load));
                }
            }
        }
        let (evict, load) = if best_gain == 0 {
            // Every single swap is gain-free: the uncovered pairs live
            // entirely among non-resident partitions. Pull in one endpoint
            // of an uncovered pair so the next step can cover it.
            let mut endpoints: Vec<u32> = Vec::new();
            for a in 0..l {
                if resident.contains(&a) {
                    continue;
                }
                let touches_uncovered = (0..l).any(|b| a != b && !covered.contains(&pair(a, b)));
                if touches_uncovered {
                    endpoints.push(a);
                }
            }
            if endpoints.is_empty() {
                return Err(Error::ScheduleBug("uncovered pairs but no candidate endpoints".into()));
            }
            let load = endpoints[rng.gen_range(0..endpoints.len())];
            let evict = current[rng.gen_range(0..current.len())];
            (evict, load)
        } else {
            best[rng.gen_range(0..best.len())]
        };
        current.retain(|&x| x != evict);
        for &s in &current {
            covered.insert(pair(load, s));
        }
        current.push(load);
        current.sort_unstable();
        sets.push(current.clone());
        swaps.push((evict, load));
    }
    Ok((sets, swaps))
}

/// Deferred random assignment: each nonempty physical bucket goes to one
/// uniformly chosen step among all steps where both its endpoints'
/// logical partitions are resident.
pub fn comet_assign(
    sets: &[Vec<u32>],
    store: &EdgeBucketStore,
    g: &LogicalGrouping,
    seed: u64,
) -> Result<Vec<Vec<(u32, u32)>>> {
    let mut rng = seed::rng(seed, &[TAG_ASSIGN]);
    let resident_sets: Vec<HashSet<u32>> = sets
        .iter()
        .map(|s| s.iter().copied().collect::<HashSet<u32>>())
        .collect();
    let mut x: Vec<Vec<(u32, u32)>> = vec![Vec::new(); sets.len()];
    for (i, j) in store.nonempty_buckets() {
        let li = g.physical_to_logical[i as usize];
        let lj = g.physical_to_logical[j as usize];
        let hits: Vec<usize> = resident_sets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(&li) && s.contains(&lj))
            .map(|(t, _)| t)
            .collect();
        if hits.is_empty() {
            return Err(Error::ScheduleBug(format!(
                "bucket ({i}, {j}) is never co-resident (logical {li}, {lj})"
            )));
        }
        let t = hits[rng.gen_range(0..hits.len())];
        x[t].push((i, j));
    }
    Ok(x)
}
