//! Hyperparameter rules for disk-based training and the schedule IO model.
//!
//! The physical partition count is chosen so the smallest disk read stays at
//! or above the block size: p = min(NO/D, sqrt(EO/D)) where NO and EO are
//! the node and edge storage footprints. The buffer capacity c is then the
//! largest count satisfying c*PO + 2*c^2*EBO + F < CPU (two sorted edge
//! copies are resident), and the logical partition count is minimized at
//! l = 2p/c, rounded so that l | p and c_l = l*c/p is an integer >= 2.

use serde::Serialize;

use super::grouping::LogicalGrouping;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    InMemory,
    Disk,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuningPlan {
    pub mode: PlanMode,
    pub p: u32,
    pub l: u32,
    pub c: u32,
    pub c_l: u32,
    /// Node storage bytes (num_nodes * d * 4).
    pub no: u64,
    /// Edge storage bytes.
    pub eo: u64,
    /// Bytes per partition region.
    pub po: f64,
    /// Expected bytes per edge bucket.
    pub ebo: f64,
    pub alpha4: f64,
    pub fudge: u64,
    pub cpu: u64,
}

impl TuningPlan {
    /// The plan's own consistency rules; disk plans additionally satisfy the
    /// memory inequality they were derived from.
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PlanMode::InMemory => {
                if self.c != self.p {
                    return Err(Error::Integrity("in-memory plan must have c = p".into()));
                }
            }
            PlanMode::Disk => {
                if self.c_l < 2 {
                    return Err(Error::Integrity("disk plan needs c_l >= 2".into()));
                }
                if self.l < 2 || self.p % self.l != 0 {
                    return Err(Error::Integrity("l must divide p".into()));
                }
                if self.p as u64 * self.c_l as u64 != self.l as u64 * self.c as u64 {
                    return Err(Error::Integrity("p/c must equal l/c_l".into()));
                }
                if self.c_l >= self.l {
                    return Err(Error::Integrity("disk plan needs c_l < l".into()));
                }
                let lhs = self.c as f64 * self.po
                    + 2.0 * (self.c as f64) * (self.c as f64) * self.ebo
                    + self.fudge as f64;
                if lhs >= self.cpu as f64 {
                    return Err(Error::Integrity("memory inequality violated".into()));
                }
            }
        }
        Ok(())
    }
}

fn max_feasible_c(p: u32, no: u64, eo: u64, cpu: u64, fudge: u64) -> u32 {
    let po = no as f64 / p as f64;
    let ebo = eo as f64 / (p as f64 * p as f64);
    let mut best = 0;
    for c in 1..=p {
        let need = c as f64 * po + 2.0 * (c as f64) * (c as f64) * ebo + fudge as f64;
        if need < cpu as f64 {
            best = c;
        } else {
            break;
        }
    }
    best
}

/// Smallest l >= ceil(2p/c) dividing p with c_l = l*c/p an integer in
/// [2, l).
fn pick_l(p: u32, c: u32) -> Option<(u32, u32)> {
    let target = (2 * p).div_ceil(c);
    for l in target.max(2)..=p {
        if p % l != 0 {
            continue;
        }
        let lc = l as u64 * c as u64;
        if lc % p as u64 != 0 {
            continue;
        }
        let c_l = (lc / p as u64) as u32;
        if c_l >= 2 && c_l < l {
            return Some((l, c_l));
        }
    }
    None
}

/// Buffer capacity and logical partitioning for a fixed p. In-memory mode
/// when the whole graph fits.
pub fn tune_cl(p: u32, no: u64, eo: u64, cpu: u64, fudge: u64, alpha4: f64) -> Result<TuningPlan> {
    let po = no as f64 / p as f64;
    let ebo = eo as f64 / (p as f64 * p as f64);
    let c = max_feasible_c(p, no, eo, cpu, fudge);
    if c >= p {
        return Ok(TuningPlan {
            mode: PlanMode::InMemory,
            p,
            l: p,
            c: p,
            c_l: p,
            no,
            eo,
            po,
            ebo,
            alpha4,
            fudge,
            cpu,
        });
    }
    if c < 2 {
        // Larger p shrinks both terms; find the smallest p where a two
        // partition buffer fits.
        let mut suggested = p;
        for candidate in (p + 1)..=(1 << 20) {
            if max_feasible_c(candidate, no, eo, cpu, fudge) >= 2 {
                suggested = candidate;
                break;
            }
        }
        return Err(Error::InsufficientMemory { p, suggested_p: suggested });
    }
    match pick_l(p, c) {
        Some((l, c_l)) => Ok(TuningPlan {
            mode: PlanMode::Disk,
            p,
            l,
            c,
            c_l,
            no,
            eo,
            po,
            ebo,
            alpha4,
            fudge,
            cpu,
        }),
        None => Err(Error::InvalidArgument(format!(
            "no logical partitioning fits p={p}, c={c}"
        ))),
    }
}

/// Full auto-tuning: choose p from the disk-read model, then c and l.
/// When p admits no valid logical partitioning it is decremented until one
/// fits.
pub fn autotune(
    num_nodes: u64,
    num_edges: u64,
    d: usize,
    bytes_per_edge: u64,
    cpu: u64,
    block: u64,
    fudge: u64,
) -> Result<TuningPlan> {
    if num_nodes == 0 || num_edges == 0 || d == 0 || bytes_per_edge == 0 || block == 0 {
        return Err(Error::InvalidArgument("all sizes must be positive".into()));
    }
    if cpu <= fudge {
        return Err(Error::InvalidArgument("memory budget does not exceed the fudge reserve".into()));
    }
    let no = num_nodes * d as u64 * 4;
    let eo = num_edges * bytes_per_edge;
    let alpha4 = (no as f64 / block as f64).min((eo as f64 / block as f64).sqrt());
    let p0 = (alpha4.floor() as u64).clamp(1, num_nodes) as u32;

    let mut last_err = None;
    for p in (1..=p0).rev() {
        match tune_cl(p, no, eo, cpu, fudge, alpha4) {
            Ok(plan) => return Ok(plan),
            Err(e @ Error::InsufficientMemory { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::InvalidArgument("no feasible plan".into())))
}

#[derive(Debug, Clone, Serialize)]
pub struct IoReport {
    pub total_bytes: u64,
    pub swap_count: usize,
    pub num_sets: usize,
    /// Smallest single disk read: min over partition regions and nonempty
    /// buckets.
    pub smallest_read: u64,
}

/// Bytes a schedule moves from disk: the initial load plus, per swap, the
/// incoming logical partition's node regions and the buckets that become
/// newly resident. `bucket_bytes` is row-major (i, j).
pub fn io_report(
    sets: &[Vec<u32>],
    g: &LogicalGrouping,
    partition_bytes: &[u64],
    bucket_bytes: &[u64],
) -> IoReport {
    let p = g.p as usize;
    assert_eq!(partition_bytes.len(), p);
    assert_eq!(bucket_bytes.len(), p * p);
    let mut total = 0u64;

    let first = g.expand(&sets[0]);
    for &q in &first {
        total += partition_bytes[q as usize];
    }
    for &i in &first {
        for &j in &first {
            total += bucket_bytes[i as usize * p + j as usize];
        }
    }
    for w in sets.windows(2) {
        let prev: std::collections::HashSet<u32> = w[0].iter().copied().collect();
        let loaded: Vec<u32> = w[1].iter().copied().filter(|q| !prev.contains(q)).collect();
        let now = g.expand(&w[1]);
        let loaded_phys: std::collections::HashSet<u32> =
            g.expand(&loaded).into_iter().collect();
        for &q in &loaded_phys {
            total += partition_bytes[q as usize];
        }
        for &i in &now {
            for &j in &now {
                if loaded_phys.contains(&i) || loaded_phys.contains(&j) {
                    total += bucket_bytes[i as usize * p + j as usize];
                }
            }
        }
    }

    let mut smallest = u64::MAX;
    for &b in partition_bytes {
        smallest = smallest.min(b);
    }
    for &b in bucket_bytes {
        if b > 0 {
            smallest = smallest.min(b);
        }
    }
    IoReport {
        total_bytes: total,
        swap_count: sets.len() - 1,
        num_sets: sets.len(),
        smallest_read: if smallest == u64::MAX { 0 } else { smallest },
    }
}
