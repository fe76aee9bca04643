//! Node-classification schedule: keep the training-node partitions resident
//! for the whole epoch when they fit, otherwise rotate random partitions
//! through the buffer until every partition has appeared.

use rand::seq::SliceRandom;
use rand::Rng;

use super::grouping::LogicalGrouping;
use super::{ExampleSet, Schedule};
use crate::error::{Error, Result};
use crate::graph::{NodeId, PartitionMap};
use crate::seed::{self, TAG_SCHEDULE};

/// Requires a train-first partition layout (the map records how many leading
/// partitions hold the training nodes). With `k_train < c` the whole epoch
/// runs on a single partition set and zero swaps; otherwise partitions
/// rotate randomly, each training node assigned to the first set in which
/// its partition is resident.
pub fn nc_schedule(
    pm: &PartitionMap,
    train_nodes: &[NodeId],
    c: u32,
    seed: u64,
) -> Result<Schedule> {
    let k_train = pm
        .train_partitions
        .ok_or_else(|| Error::InvalidArgument("node-classification schedule needs a train-first partition map".into()))?;
    let p = pm.p;
    if c < 1 || c > p {
        return Err(Error::InvalidArgument(format!("buffer capacity {c} out of range for p={p}")));
    }
    let grouping = LogicalGrouping::identity(p);
    let mut rng = seed::rng(seed, &[TAG_SCHEDULE, 0x9c]);

    if k_train < c {
        // Static cache: training partitions plus random filler.
        let mut set: Vec<u32> = (0..k_train).collect();
        let mut others: Vec<u32> = (k_train..p).collect();
        others.shuffle(&mut rng);
        set.extend(others.into_iter().take((c - k_train) as usize));
        set.sort_unstable();
        let mut nodes = train_nodes.to_vec();
        nodes.sort_unstable();
        return Ok(Schedule {
            grouping,
            sets: vec![set],
            examples: vec![ExampleSet::Nodes(nodes)],
            swaps: vec![],
        });
    }

    // Rotation: start random, swap a random resident for a random partition
    // that has not yet been in memory; p - c swaps touch everything.
    let mut ids: Vec<u32> = (0..p).collect();
    ids.shuffle(&mut rng);
    let mut current: Vec<u32> = ids[..c as usize].to_vec();
    current.sort_unstable();
    let mut appeared: Vec<bool> = vec![false; p as usize];
    for &q in &current {
        appeared[q as usize] = true;
    }
    let mut sets = vec![current.clone()];
    let mut swaps = Vec::new();
    while appeared.iter().any(|&a| !a) {
        let unseen: Vec<u32> =
            (0..p).filter(|&q| !appeared[q as usize]).collect();
        let load = unseen[rng.gen_range(0..unseen.len())];
        let evict = current[rng.gen_range(0..current.len())];
        current.retain(|&q| q != evict);
        current.push(load);
        current.sort_unstable();
        appeared[load as usize] = true;
        sets.push(current.clone());
        swaps.push((evict, load));
    }

    // Each training node trains in the first set where its partition sits.
    let mut first_set_of_partition = vec![usize::MAX; p as usize];
    for (i, set) in sets.iter().enumerate() {
        for &q in set {
            if first_set_of_partition[q as usize] == usize::MAX {
                first_set_of_partition[q as usize] = i;
            }
        }
    }
    let mut examples: Vec<Vec<NodeId>> = vec![Vec::new(); sets.len()];
    let mut nodes = train_nodes.to_vec();
    nodes.sort_unstable();
    for node in nodes {
        let part = pm.partition_of(node);
        examples[first_set_of_partition[part as usize]].push(node);
    }
    Ok(Schedule {
        grouping,
        sets,
        examples: examples.into_iter().map(ExampleSet::Nodes).collect(),
        swaps,
    })
}
