//! In-memory buffer of physical partitions: node embeddings, their
//! optimizer accumulators, the resident edge buckets, and the sampling
//! subgraph built over them.
//!
//! Swaps follow a schedule one logical partition at a time. Evicted
//! partitions write back to the embedding files only when dirty; the next
//! set's incoming partition can be prefetched on a background thread and is
//! committed between mini batches, so trainer-visible state is always a
//! whole set.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::engine::{EmbeddingGrad, ADAGRAD_EPS};
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeBucketStore, InMemorySubgraph, NodeId};
use crate::schedule::Schedule;


#[derive(Debug, Clone)]
pub struct BufferOptions {
    /// Physical partitions the buffer may hold. `c >= p` keeps the whole
    /// graph resident (a single load, no swaps).
    pub capacity: u32,
    /// Rebuild the sampling subgraph from scratch on every swap instead of
    /// merging incrementally; debugging aid.
    pub full_rebuild: bool,
    /// Injected per-read latency for IO experiments.
    pub read_delay: Option<Duration>,
}

impl BufferOptions {
    pub fn with_capacity(capacity: u32) -> BufferOptions {
        BufferOptions { capacity, full_rebuild: false, read_delay: None }
    }
}

/// One swap's IO accounting, emitted per `load_set`.
#[derive(Debug, Clone, Serialize)]
pub struct SwapStats {
    pub step: usize,
    /// Evicted/loaded logical partition ids; the initial load lists none.
    pub evicted: Option<u32>,
    pub loaded: Option<u32>,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub rebuild_ms: u64,
    pub prefetched: bool,
}

struct Block {
    emb: Vec<f32>,
    acc: Vec<f32>,
    dirty: bool,
    /// Bumped on every write while resident; diagnostic for write paths.
    version: u64,
}

struct Staged {
    for_step: usize,
    blocks: Vec<(u32, Vec<f32>, Vec<f32>)>,
    new_edges: Vec<Edge>,
    bytes_read: u64,
}

pub struct PartitionBuffer {
    store: Arc<EdgeBucketStore>,
    opts: BufferOptions,
    emb_path: PathBuf,
    acc_path: PathBuf,
    emb_file: File,
    acc_file: File,
    blocks: HashMap<u32, Block>,
    subgraph: Option<Arc<InMemorySubgraph>>,
    /// Logical set the subgraph currently reflects.
    current: Option<(usize, Vec<u32>)>,
    prefetch: Option<JoinHandle<Result<Staged>>>,
    prefetch_step: Option<usize>,
}

impl PartitionBuffer {
    /// Buffer over the store's own embedding files.
    pub fn new(store: Arc<EdgeBucketStore>, opts: BufferOptions) -> Result<PartitionBuffer> {
        let emb = store.embeddings_path();
        let acc = store.adagrad_path();
        Self::with_files(store, opts, emb, acc)
    }

    /// Buffer over explicit embedding/accumulator files (training runs work
    /// on copies so the preprocessed initialization stays pristine).
    pub fn with_files(
        store: Arc<EdgeBucketStore>,
        opts: BufferOptions,
        emb_path: PathBuf,
        acc_path: PathBuf,
    ) -> Result<PartitionBuffer> {
        if opts.capacity < 1 {
            return Err(Error::InvalidArgument("buffer capacity must be at least 1".into()));
        }
        let emb_file = OpenOptions::new().read(true).write(true).open(&emb_path)?;
        let acc_file = OpenOptions::new().read(true).write(true).open(&acc_path)?;
        Ok(PartitionBuffer {
            store,
            opts,
            emb_path,
            acc_path,
            emb_file,
            acc_file,
            blocks: HashMap::new(),
            subgraph: None,
            current: None,
            prefetch: None,
            prefetch_step: None,
        })
    }

    pub fn store(&self) -> &EdgeBucketStore {
        &self.store
    }

    pub fn subgraph(&self) -> Result<&InMemorySubgraph> {
        self.subgraph
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("no partition set loaded".into()))
    }

    /// Shared handle to the current subgraph; stays valid (for the old set)
    /// across a swap, so a sampling stage can overlap buffer mutation.
    pub fn subgraph_arc(&self) -> Result<Arc<InMemorySubgraph>> {
        self.subgraph
            .clone()
            .ok_or_else(|| Error::InvalidArgument("no partition set loaded".into()))
    }

    fn in_memory(&self) -> bool {
        self.opts.capacity >= self.store.p
    }

    fn delay(&self) {
        if let Some(d) = self.opts.read_delay {
            std::thread::sleep(d);
        }
    }

    fn read_block(
        store: &EdgeBucketStore,
        emb: &File,
        acc: &File,
        part: u32,
        delay: Option<Duration>,
    ) -> Result<(Vec<f32>, Vec<f32>, u64)> {
        if let Some(d) = delay {
            std::thread::sleep(d);
        }
        let (start_row, rows) = store.partition_region(part);
        let d = store.dim;
        let nbytes = rows as usize * d * 4;
        let offset = start_row * d as u64 * 4;
        let read_plane = |f: &File| -> Result<Vec<f32>> {
            let mut buf = vec![0u8; nbytes];
            f.read_exact_at(&mut buf, offset)?;
            Ok(buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect())
        };
        let emb_v = read_plane(emb)?;
        let acc_v = read_plane(acc)?;
        Ok((emb_v, acc_v, 2 * nbytes as u64))
    }

    fn write_block(&mut self, part: u32) -> Result<u64> {
        let block = self.blocks.get_mut(&part).expect("resident block");
        if !block.dirty {
            return Ok(0);
        }
        let (start_row, rows) = self.store.partition_region(part);
        let d = self.store.dim;
        let offset = start_row * d as u64 * 4;
        let mut bytes = vec![0u8; rows as usize * d * 4];
        for (i, v) in block.emb.iter().enumerate() {
            bytes[i * 4..(i + 1) * 4].copy_from_slice(&v.to_le_bytes());
        }
        self.emb_file.write_all_at(&bytes, offset)?;
        for (i, v) in block.acc.iter().enumerate() {
            bytes[i * 4..(i + 1) * 4].copy_from_slice(&v.to_le_bytes());
        }
        self.acc_file.write_all_at(&bytes, offset)?;
        block.dirty = false;
        Ok(2 * bytes.len() as u64)
    }

    /// Buckets that become resident when `loaded` physical partitions join
    /// `retained`: any bucket with an endpoint in `loaded` and both
    /// endpoints in the union.
    fn incoming_buckets(loaded: &[u32], retained: &[u32]) -> Vec<(u32, u32)> {
        let mut all: Vec<u32> = retained.iter().chain(loaded.iter()).copied().collect();
        all.sort_unstable();
        let loaded_set: HashSet<u32> = loaded.iter().copied().collect();
        let mut out = Vec::new();
        for &i in &all {
            for &j in &all {
                if loaded_set.contains(&i) || loaded_set.contains(&j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Bring the buffer to schedule step `i`. Step 0 is a full load; later
    /// steps write back the evicted logical partition (if dirty), install
    /// the loaded one (from the prefetch staging when available), and update
    /// the sampling subgraph.
    pub fn load_set(&mut self, schedule: &Schedule, i: usize) -> Result<SwapStats> {
        let logical = schedule.sets[i].clone();
        let expanded = schedule.expanded(i);
        if !self.in_memory() && expanded.len() > self.opts.capacity as usize {
            return Err(Error::InvalidArgument(format!(
                "set {i} needs {} partitions, capacity is {}",
                expanded.len(),
                self.opts.capacity
            )));
        }

        let started = Instant::now();
        let mut bytes_read = 0u64;
        let mut bytes_written = 0u64;
        let mut prefetched = false;

        if self.in_memory() {
            // Whole graph resident; only the subgraph view follows the
            // schedule.
            if self.blocks.is_empty() {
                self.delay();
                for part in 0..self.store.p {
                    let (emb, acc, nbytes) = Self::read_block(
                        &self.store,
                        &self.emb_file,
                        &self.acc_file,
                        part,
                        None,
                    )?;
                    self.blocks.insert(part, Block { emb, acc, dirty: false, version: 0 });
                    bytes_read += nbytes;
                }
            }
            let edges = self.read_buckets_direct(&Self::all_buckets(&expanded), &mut bytes_read)?;
            self.subgraph = Some(Arc::new(InMemorySubgraph::from_edges(
                self.store.num_nodes,
                self.store.num_relations,
                &self.store.partition_map,
                &expanded,
                edges,
            )?));
            self.current = Some((i, logical));
            return Ok(SwapStats {
                step: i,
                evicted: None,
                loaded: None,
                bytes_read,
                bytes_written: 0,
                rebuild_ms: started.elapsed().as_millis() as u64,
                prefetched: false,
            });
        }

        if i == 0 || self.current.is_none() {
            self.drop_prefetch();
            // Full load.
            for part in self.blocks.keys().copied().collect::<Vec<_>>() {
                bytes_written += self.write_block(part)?;
            }
            self.blocks.clear();
            for &part in &expanded {
                let (emb, acc, nbytes) = Self::read_block(
                    &self.store,
                    &self.emb_file,
                    &self.acc_file,
                    part,
                    self.opts.read_delay,
                )?;
                self.blocks.insert(part, Block { emb, acc, dirty: false, version: 0 });
                bytes_read += nbytes;
            }
            let edges = self.read_buckets_direct(&Self::all_buckets(&expanded), &mut bytes_read)?;
            self.subgraph = Some(Arc::new(InMemorySubgraph::from_edges(
                self.store.num_nodes,
                self.store.num_relations,
                &self.store.partition_map,
                &expanded,
                edges,
            )?));
            self.current = Some((i, logical));
            return Ok(SwapStats {
                step: i,
                evicted: None,
                loaded: None,
                bytes_read,
                bytes_written,
                rebuild_ms: started.elapsed().as_millis() as u64,
                prefetched: false,
            });
        }

        let (prev_step, prev) = self.current.clone().unwrap();
        if prev_step + 1 != i || schedule.sets[prev_step] != prev {
            return Err(Error::ScheduleBug(format!(
                "buffer holds set {prev_step}, cannot jump to set {i}"
            )));
        }
        let prev_set: HashSet<u32> = prev.iter().copied().collect();
        let now_set: HashSet<u32> = logical.iter().copied().collect();
        let evicted_logical: Vec<u32> = prev.iter().copied().filter(|q| !now_set.contains(q)).collect();
        let loaded_logical: Vec<u32> = logical.iter().copied().filter(|q| !prev_set.contains(q)).collect();
        if evicted_logical.len() != 1 || loaded_logical.len() != 1 {
            return Err(Error::ScheduleBug(format!(
                "consecutive sets must differ by exactly one logical partition, got -{evicted_logical:?} +{loaded_logical:?}"
            )));
        }
        let evicted_phys = schedule.grouping.expand(&evicted_logical);
        let loaded_phys = schedule.grouping.expand(&loaded_logical);
        let retained_phys: Vec<u32> = expanded
            .iter()
            .copied()
            .filter(|q| !loaded_phys.contains(q))
            .collect();

        // Write back and drop the outgoing partitions.
        for &part in &evicted_phys {
            bytes_written += self.write_block(part)?;
            self.blocks.remove(&part);
        }

        // Incoming blocks and buckets, prefetched or synchronous.
        let staged = self.take_prefetch(i);
        let (new_blocks, new_edges) = match staged {
            Some(s) => {
                prefetched = true;
                bytes_read += s.bytes_read;
                (s.blocks, s.new_edges)
            }
            None => {
                let mut blocks = Vec::new();
                for &part in &loaded_phys {
                    let (emb, acc, nbytes) = Self::read_block(
                        &self.store,
                        &self.emb_file,
                        &self.acc_file,
                        part,
                        self.opts.read_delay,
                    )?;
                    blocks.push((part, emb, acc));
                    bytes_read += nbytes;
                }
                let buckets = Self::incoming_buckets(&loaded_phys, &retained_phys);
                let edges = self.read_buckets_direct(&buckets, &mut bytes_read)?;
                (blocks, edges)
            }
        };
        for (part, emb, acc) in new_blocks {
            self.blocks.insert(part, Block { emb, acc, dirty: false, version: 0 });
        }

        let rebuild_started = Instant::now();
        let sub = self.subgraph.take().expect("subgraph present after initial load");
        let next = if self.opts.full_rebuild {
            let all = Self::all_buckets(&expanded);
            let mut ignored = 0u64;
            let edges = self.read_buckets_direct(&all, &mut ignored)?;
            InMemorySubgraph::from_edges(
                self.store.num_nodes,
                self.store.num_relations,
                &self.store.partition_map,
                &expanded,
                edges,
            )?
        } else {
            sub.apply_swap(&self.store.partition_map, &evicted_phys, &loaded_phys, new_edges)?
        };
        self.subgraph = Some(Arc::new(next));
        let rebuild_ms = rebuild_started.elapsed().as_millis() as u64;
        self.current = Some((i, logical));

        Ok(SwapStats {
            step: i,
            evicted: Some(evicted_logical[0]),
            loaded: Some(loaded_logical[0]),
            bytes_read,
            bytes_written,
            rebuild_ms,
            prefetched,
        })
    }

    fn all_buckets(parts: &[u32]) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for &i in parts {
            for &j in parts {
                out.push((i, j));
            }
        }
        out
    }

    fn read_buckets_direct(&self, buckets: &[(u32, u32)], bytes_read: &mut u64) -> Result<Vec<Edge>> {
        self.delay();
        let mut edges = Vec::new();
        for &(i, j) in buckets {
            *bytes_read += self.store.bucket_bytes(i, j);
            edges.extend(self.store.bucket_edges(i, j)?);
        }
        Ok(edges)
    }

    /// Begin reading step `i + 1`'s incoming logical partition on a
    /// background thread. The swap itself still happens in `load_set`, which
    /// consumes the staged data; a failed prefetch degrades to a synchronous
    /// load.
    pub fn start_prefetch(&mut self, schedule: &Schedule, next: usize) {
        if self.in_memory() || next >= schedule.num_sets() || next == 0 || self.prefetch.is_some() {
            return;
        }
        let Some((cur_step, _)) = &self.current else { return };
        if cur_step + 1 != next {
            return;
        }
        let (_, loaded_logical) = schedule.swaps[next - 1];
        let loaded_phys = schedule.grouping.expand(&[loaded_logical]);
        let expanded = schedule.expanded(next);
        let retained_phys: Vec<u32> =
            expanded.iter().copied().filter(|q| !loaded_phys.contains(q)).collect();
        let store = Arc::clone(&self.store);
        let emb_path = self.emb_path.clone();
        let acc_path = self.acc_path.clone();
        let delay = self.opts.read_delay;
        self.prefetch_step = Some(next);
        self.prefetch = Some(std::thread::spawn(move || {
            let emb = File::open(&emb_path)?;
            let acc = File::open(&acc_path)?;
            let mut bytes_read = 0u64;
            let mut blocks = Vec::new();
            for &part in &loaded_phys {
                let (e, a, nbytes) = Self::read_block(&store, &emb, &acc, part, delay)?;
                blocks.push((part, e, a));
                bytes_read += nbytes;
            }
            if let Some(d) = delay {
                std::thread::sleep(d);
            }
            let mut new_edges = Vec::new();
            for (i, j) in Self::incoming_buckets(&loaded_phys, &retained_phys) {
                bytes_read += store.bucket_bytes(i, j);
                new_edges.extend(store.bucket_edges(i, j)?);
            }
            Ok(Staged { for_step: next, blocks, new_edges, bytes_read })
        }));
    }

    fn take_prefetch(&mut self, step: usize) -> Option<Staged> {
        if self.prefetch_step != Some(step) {
            self.drop_prefetch();
            return None;
        }
        let handle = self.prefetch.take()?;
        self.prefetch_step = None;
        match handle.join() {
            Ok(Ok(staged)) if staged.for_step == step => Some(staged),
            _ => None,
        }
    }

    fn drop_prefetch(&mut self) {
        if let Some(h) = self.prefetch.take() {
            let _ = h.join();
        }
        self.prefetch_step = None;
    }

    fn locate(&self, node: NodeId) -> Result<(u32, usize)> {
        if node >= self.store.num_nodes {
            return Err(Error::NonResidentNode(node as u64));
        }
        let part = self.store.partition_map.partition_of(node);
        if !self.blocks.contains_key(&part) {
            return Err(Error::NonResidentNode(node as u64));
        }
        let row = self.store.row_of(node) - self.store.partition_region(part).0;
        Ok((part, row as usize))
    }

    /// Embedding rows in request order; duplicate ids repeat their row.
    pub fn gather(&self, nodes: &[NodeId]) -> Result<Vec<f32>> {
        let d = self.store.dim;
        let mut out = Vec::with_capacity(nodes.len() * d);
        for &node in nodes {
            let (part, row) = self.locate(node)?;
            let block = &self.blocks[&part];
            out.extend_from_slice(&block.emb[row * d..(row + 1) * d]);
        }
        Ok(out)
    }

    pub fn gather_acc(&self, nodes: &[NodeId]) -> Result<Vec<f32>> {
        let d = self.store.dim;
        let mut out = Vec::with_capacity(nodes.len() * d);
        for &node in nodes {
            let (part, row) = self.locate(node)?;
            let block = &self.blocks[&part];
            out.extend_from_slice(&block.acc[row * d..(row + 1) * d]);
        }
        Ok(out)
    }

    /// Write full rows back (request order), marking their partitions dirty.
    pub fn scatter(&mut self, nodes: &[NodeId], rows: &[f32]) -> Result<()> {
        let d = self.store.dim;
        if rows.len() != nodes.len() * d {
            return Err(Error::InvalidArgument("row block has the wrong shape".into()));
        }
        for (k, &node) in nodes.iter().enumerate() {
            let (part, row) = self.locate(node)?;
            let block = self.blocks.get_mut(&part).unwrap();
            block.emb[row * d..(row + 1) * d].copy_from_slice(&rows[k * d..(k + 1) * d]);
            block.dirty = true;
            block.version += 1;
        }
        Ok(())
    }

    pub fn scatter_acc(&mut self, nodes: &[NodeId], rows: &[f32]) -> Result<()> {
        let d = self.store.dim;
        if rows.len() != nodes.len() * d {
            return Err(Error::InvalidArgument("row block has the wrong shape".into()));
        }
        for (k, &node) in nodes.iter().enumerate() {
            let (part, row) = self.locate(node)?;
            let block = self.blocks.get_mut(&part).unwrap();
            block.acc[row * d..(row + 1) * d].copy_from_slice(&rows[k * d..(k + 1) * d]);
            block.dirty = true;
            block.version += 1;
        }
        Ok(())
    }

    /// Sparse Adagrad update: acc += g^2, emb -= lr * g / (sqrt(acc) + eps),
    /// computed in f64 and stored back as f32.
    pub fn apply_adagrad(&mut self, grads: &[EmbeddingGrad], lr: f64) -> Result<()> {
        let d = self.store.dim;
        for eg in grads {
            let (part, row) = self.locate(eg.node)?;
            let block = self.blocks.get_mut(&part).unwrap();
            let emb = &mut block.emb[row * d..(row + 1) * d];
            let acc = &mut block.acc[row * d..(row + 1) * d];
            for k in 0..d {
                let g = eg.grad[k];
                let a = acc[k] as f64 + g * g;
                acc[k] = a as f32;
                emb[k] = (emb[k] as f64 - lr * g / (a.sqrt() + ADAGRAD_EPS)) as f32;
            }
            block.dirty = true;
            block.version += 1;
        }
        Ok(())
    }

    /// Write every dirty partition back; end-of-epoch durability point.
    pub fn flush(&mut self) -> Result<u64> {
        let mut bytes = 0u64;
        let mut parts: Vec<u32> = self.blocks.keys().copied().collect();
        parts.sort_unstable();
        for part in parts {
            bytes += self.write_block(part)?;
        }
        Ok(bytes)
    }

    /// Resident node ids (ascending) usable as a negative-sampling pool.
    pub fn resident_nodes(&self) -> Result<Vec<NodeId>> {
        Ok(self.subgraph()?.nodes().to_vec())
    }

    /// Write count of a resident partition since it was loaded.
    pub fn slot_version(&self, part: u32) -> Option<u64> {
        self.blocks.get(&part).map(|b| b.version)
    }
}

impl Drop for PartitionBuffer {
    fn drop(&mut self) {
        self.drop_prefetch();
    }
}
