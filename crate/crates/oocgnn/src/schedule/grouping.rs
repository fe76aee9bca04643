//! Random grouping of physical partitions into logical transfer units.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::{self, TAG_GROUPING};

/// Maps each of `p` physical partitions to one of `l` equal-sized logical
/// partitions. Pure bookkeeping: no data moves.
#[derive(Debug, Clone)]
pub struct LogicalGrouping {
    pub l: u32,
    pub p: u32,
    /// Logical id -> ascending physical ids.
    pub groups: Vec<Vec<u32>>,
    pub physical_to_logical: Vec<u32>,
    pub seed: u64,
}

impl LogicalGrouping {
    /// Physical members of a set of logical ids, ascending.
    pub fn expand(&self, logical: &[u32]) -> Vec<u32> {
        let mut out = Vec::new();
        for &g in logical {
            out.extend_from_slice(&self.groups[g as usize]);
        }
        out.sort_unstable();
        out
    }

    /// One logical partition per physical partition; the degenerate grouping
    /// policies that operate directly on physical partitions use.
    pub fn identity(p: u32) -> LogicalGrouping {
        LogicalGrouping {
            l: p,
            p,
            groups: (0..p).map(|i| vec![i]).collect(),
            physical_to_logical: (0..p).collect(),
            seed: 0,
        }
    }
}

/// Uniform random balanced grouping; requires `l | p`.
pub fn group_logical(p: u32, l: u32, seed: u64) -> Result<LogicalGrouping> {
    if l < 2 {
        return Err(Error::InvalidArgument("need at least two logical partitions".into()));
    }
    if l > p || p % l != 0 {
        let valid: Vec<u32> = (2..=p).filter(|x| p % x == 0).collect();
        return Err(Error::InvalidArgument(format!(
            "l={l} must divide p={p}; valid choices: {valid:?}"
        )));
    }
    let mut rng = seed::rng(seed, &[TAG_GROUPING]);
    let mut physical: Vec<u32> = (0..p).collect();
    physical.shuffle(&mut rng);
    let per = (p / l) as usize;
    let mut groups = Vec::with_capacity(l as usize);
    let mut physical_to_logical = vec![0u32; p as usize];
    for g in 0..l as usize {
        let mut members: Vec<u32> = physical[g * per..(g + 1) * per].to_vec();
        members.sort_unstable();
        for &m in &members {
            physical_to_logical[m as usize] = g as u32;
        }
        groups.push(members);
    }
    Ok(LogicalGrouping { l, p, groups, physical_to_logical, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn identity_like_when_l_equals_p() {
        let g = group_logical(4, 4, 0).unwrap();
        for grp in &g.groups {
            assert_eq!(grp.len(), 1);
        }
        let all: HashSet<u32> = g.groups.iter().flatten().copied().collect();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn balanced_groups() {
        let g = group_logical(8, 4, 7).unwrap();
        assert!(g.groups.iter().all(|grp| grp.len() == 2));
        let all: Vec<u32> = g.groups.iter().flatten().copied().collect();
        let distinct: HashSet<u32> = all.iter().copied().collect();
        assert_eq!(distinct.len(), 8);
        for (phys, &log) in g.physical_to_logical.iter().enumerate() {
            assert!(g.groups[log as usize].contains(&(phys as u32)));
        }
    }

    #[test]
    fn different_seeds_usually_differ() {
        // 8 partitions in 4 groups of 2 admit 105 distinct groupings, so two
        // seeds colliding across ten tries is essentially impossible.
        let base = group_logical(8, 4, 0).unwrap();
        let mut any_different = false;
        for s in 1..=10 {
            let other = group_logical(8, 4, s).unwrap();
            if other.groups != base.groups {
                any_different = true;
            }
        }
        assert!(any_different);
    }

    #[test]
    fn non_divisor_is_rejected_with_guidance() {
        match group_logical(8, 3, 0) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("valid choices")),
            other => panic!("expected InvalidArgument, got {other:?}"),
        }
    }
}
