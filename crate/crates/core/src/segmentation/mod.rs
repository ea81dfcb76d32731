//! Superpixel over-segmentation by recursive normalized-cut bipartition.
//!
//! The largest remaining segment is repeatedly split at the sweep threshold
//! of its Fiedler vector that minimizes the normalized cut, until the target
//! superpixel count is reached. Each split is decomposed into connected
//! components and fragments below a minimum size are merged into the most
//! associated neighbouring piece, so every superpixel stays spatially
//! connected.

mod graph;
mod spectral;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use graph::{
    build_graph, build_graph_from_features, median_adjacent_distance, Connectivity, PixelGraph,
};

use crate::data::HsiCube;
use crate::error::{Error, Result};
use crate::linalg::pca_project;
use spectral::{fiedler_vector, LocalAdjacency};

/// Per-pixel superpixel labels in `0..count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl SuperpixelMap {
    /// Validates that labels are dense: every value in `0..max+1` is used.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height || labels.is_empty() {
            return Err(Error::Dimensions(format!(
                "label map of {width}x{height} needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        let count = *labels.iter().max().expect("non-empty") as usize + 1;
        let mut used = vec![false; count];
        for &l in &labels {
            used[l as usize] = true;
        }
        if let Some(missing) = used.iter().position(|&u| !u) {
            return Err(Error::Dimensions(format!("label {missing} has no pixels")));
        }
        Ok(Self {
            width,
            height,
            labels,
            count,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of superpixels.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Pixel indices of every superpixel, ascending within each.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (p, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(p);
        }
        out
    }

    /// True when each superpixel is a single connected component.
    pub fn is_spatially_connected(&self, connectivity: Connectivity) -> bool {
        let mut adj = vec![Vec::new(); self.labels.len()];
        connectivity.for_each_pair(self.width, self.height, |i, j| {
            if self.labels[i] == self.labels[j] {
                adj[i].push(j);
                adj[j].push(i);
            }
        });
        let mut seen = vec![false; self.labels.len()];
        let mut components = 0;
        for start in 0..self.labels.len() {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        components == self.count
    }

    /// SVG drawing of superpixel boundaries, `scale` user units per pixel.
    pub fn boundary_svg(&self, scale: usize) -> String {
        let s = scale.max(1);
        let (w, h) = (self.width, self.height);
        let mut path = String::new();
        for r in 0..h {
            for c in 0..w {
                let l = self.labels[r * w + c];
                if c + 1 < w && self.labels[r * w + c + 1] != l {
                    let x = (c + 1) * s;
                    path.push_str(&format!("M{x} {}V{}", r * s, (r + 1) * s));
                }
                if r + 1 < h && self.labels[(r + 1) * w + c] != l {
                    let y = (r + 1) * s;
                    path.push_str(&format!("M{} {y}H{}", c * s, (c + 1) * s));
                }
            }
        }
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <path d=\"{path}\" stroke=\"black\" stroke-width=\"1\" fill=\"none\"/>\n</svg>\n",
            w * s,
            h * s,
            w * s,
            h * s
        )
    }
}

/// Segmentation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    /// Requested superpixel count `S`.
    pub target_count: usize,
    /// Edge-weight scale; `None` uses the median adjacent distance.
    pub sigma_g: Option<f64>,
    pub connectivity: Connectivity,
    /// Principal components kept for edge weights; 0 keeps all bands.
    pub pca_components: usize,
    pub seed: u64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            target_count: 100,
            sigma_g: None,
            connectivity: Connectivity::Four,
            pca_components: 10,
            seed: 0,
        }
    }
}

/// Over-segments `cube` into approximately `params.target_count` connected
/// superpixels.
pub fn segment(cube: &HsiCube, params: &SegmentParams) -> Result<SuperpixelMap> {
    let n = cube.pixel_count();
    let s = params.target_count;
    if s < 2 || s > n {
        return Err(Error::InvalidParameter(format!(
            "superpixel count must be in [2, {n}], got {s}"
        )));
    }
    if s == n {
        return SuperpixelMap::new(cube.width(), cube.height(), (0..n as u32).collect());
    }
    let features = pca_project(cube.flatten().matrix(), params.pca_components);
    let sigma = match params.sigma_g {
        Some(v) => v,
        None => {
            let m = median_adjacent_distance(
                &features,
                cube.width(),
                cube.height(),
                params.connectivity,
            );
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let graph = build_graph_from_features(
        &features,
        cube.width(),
        cube.height(),
        params.connectivity,
        sigma,
    )?;
    let min_fragment = (n / (8 * s)).max(1);
    let segments = Partitioner::new(&graph, min_fragment, params.seed).run(s);

    let mut segments = segments;
    for seg in &mut segments {
        seg.sort_unstable();
    }
    segments.sort_by_key(|seg| seg[0]);
    let mut labels = vec![0u32; n];
    for (l, seg) in segments.iter().enumerate() {
        for &p in seg {
            labels[p] = l as u32;
        }
    }
    SuperpixelMap::new(cube.width(), cube.height(), labels)
}

struct Partitioner<'g> {
    graph: &'g PixelGraph,
    min_fragment: usize,
    rng: ChaCha8Rng,
    local: Vec<usize>,
}

impl<'g> Partitioner<'g> {
    fn new(graph: &'g PixelGraph, min_fragment: usize, seed: u64) -> Self {
        Self {
            graph,
            min_fragment,
            rng: ChaCha8Rng::seed_from_u64(seed),
            local: vec![usize::MAX; graph.node_count()],
        }
    }

    /// Returns the final segments, each sorted ascending.
    fn run(mut self, target: usize) -> Vec<Vec<usize>> {
        let n = self.graph.node_count();
        let mut store: Vec<Vec<usize>> = Vec::new();
        let mut finished: Vec<usize> = Vec::new();
        let mut heap = BinaryHeap::new();
        for comp in self.components_of(&(0..n).collect::<Vec<_>>()) {
            heap.push((comp.len(), Reverse(store.len())));
            store.push(comp);
        }
        let mut live = store.len();
        while live < target {
            let Some((_, Reverse(id))) = heap.pop() else {
                break;
            };
            let nodes = std::mem::take(&mut store[id]);
            match self.split(&nodes) {
                Some(pieces) => {
                    live += pieces.len() - 1;
                    for p in pieces {
                        heap.push((p.len(), Reverse(store.len())));
                        store.push(p);
                    }
                }
                None => {
                    store[id] = nodes;
                    finished.push(id);
                }
            }
        }
        finished.extend(heap.into_iter().map(|(_, Reverse(id))| id));
        finished
            .into_iter()
            .map(|id| std::mem::take(&mut store[id]))
            .filter(|s| !s.is_empty())
            .collect()
    }

    fn local_adjacency(&mut self, nodes: &[usize]) -> LocalAdjacency {
        for (k, &v) in nodes.iter().enumerate() {
            self.local[v] = k;
        }
        let adj = nodes
            .iter()
            .map(|&v| {
                self.graph
                    .neighbors(v)
                    .filter_map(|(u, w)| {
                        let k = self.local[u];
                        (k != usize::MAX).then_some((k, w))
                    })
                    .collect()
            })
            .collect();
        for &v in nodes {
            self.local[v] = usize::MAX;
        }
        adj
    }

    /// Connected components of the induced subgraph on `nodes`.
    fn components_of(&mut self, nodes: &[usize]) -> Vec<Vec<usize>> {
        let adj = self.local_adjacency(nodes);
        let side = vec![0u8; nodes.len()];
        components(&adj, &side)
            .into_iter()
            .map(|c| c.into_iter().map(|k| nodes[k]).collect())
            .collect()
    }

    /// Splits a connected segment; `None` when it cannot be split.
    fn split(&mut self, nodes: &[usize]) -> Option<Vec<Vec<usize>>> {
        if nodes.len() < 2 {
            return None;
        }
        let adj = self.local_adjacency(nodes);
        let y = fiedler_vector(&adj, &mut self.rng);
        let side = best_sweep_split(&adj, &y, self.min_fragment)?;
        let pieces = merge_fragments(&adj, components(&adj, &side), self.min_fragment);
        if pieces.len() < 2 {
            return None;
        }
        Some(
            pieces
                .into_iter()
                .map(|mut p| {
                    p.sort_unstable();
                    p.into_iter().map(|k| nodes[k]).collect()
                })
                .collect(),
        )
    }
}

/// Sweeps thresholds of `y` and returns the side assignment (1 = below or
/// at the threshold) with the smallest normalized cut. Both sides keep at
/// least `min_side` nodes when the segment is large enough.
fn best_sweep_split(adj: &LocalAdjacency, y: &[f64], min_side: usize) -> Option<Vec<u8>> {
    let n = adj.len();
    let min_side = if n >= 2 * min_side { min_side } else { 1 };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let deg: Vec<f64> = adj
        .iter()
        .map(|l| l.iter().map(|&(_, w)| w).sum())
        .collect();
    let total: f64 = deg.iter().sum();
    let mut in_a = vec![false; n];
    let (mut cut, mut assoc_a) = (0.0, 0.0);
    let mut best = (f64::INFINITY, 0usize);
    for (k, &v) in order.iter().enumerate().take(n - 1) {
        let to_a: f64 = adj[v].iter().filter(|&&(u, _)| in_a[u]).map(|&(_, w)| w).sum();
        cut += deg[v] - 2.0 * to_a;
        assoc_a += deg[v];
        in_a[v] = true;
        if k + 1 < min_side || n - k - 1 < min_side {
            continue;
        }
        let value = graph::ncut_from_parts(cut.max(0.0), assoc_a, total - assoc_a);
        if value < best.0 {
            best = (value, k + 1);
        }
    }
    if !best.0.is_finite() {
        // every split isolates a zero-degree side; fall back to the median
        best.1 = n / 2;
    }
    let mut side = vec![0u8; n];
    for &v in &order[..best.1] {
        side[v] = 1;
    }
    Some(side)
}

/// Connected components where edges only join nodes on the same side.
fn components(adj: &LocalAdjacency, side: &[u8]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &adj[v] {
                if comp[u] == usize::MAX && side[u] == side[v] {
                    comp[u] = id;
                    members.push(u);
                    queue.push_back(u);
                }
            }
        }
        out.push(members);
    }
    out
}

/// A small piece whose outside links carry less than this share of its
/// total association is a genuine region, not a fragment.
const ISOLATION_SHARE: f64 = 0.01;

/// Repeatedly merges the smallest piece below `min_size` into the adjacent
/// piece it shares the most edge weight with. Nearly isolated pieces are
/// left alone.
fn merge_fragments(
    adj: &LocalAdjacency,
    mut pieces: Vec<Vec<usize>>,
    min_size: usize,
) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut owner = vec![0usize; n];
    let mut kept = vec![false; pieces.len()];
    loop {
        if pieces.len() < 2 {
            return pieces;
        }
        let Some(small) = (0..pieces.len())
            .filter(|&p| !kept[p] && pieces[p].len() < min_size)
            .min_by_key(|&p| (pieces[p].len(), p))
        else {
            return pieces;
        };
        for (p, members) in pieces.iter().enumerate() {
            for &v in members {
                owner[v] = p;
            }
        }
        let mut link = vec![(0.0f64, false); pieces.len()];
        let (mut inside, mut outside) = (0.0, 0.0);
        for &v in &pieces[small] {
            for &(u, w) in &adj[v] {
                let o = owner[u];
                if o == small {
                    inside += w;
                } else {
                    link[o].0 += w;
                    link[o].1 = true;
                    outside += w;
                }
            }
        }
        if inside > 0.0 && outside < ISOLATION_SHARE * (inside + outside) {
            kept[small] = true;
            continue;
        }
        let Some(target) = (0..pieces.len())
            .filter(|&p| link[p].1)
            .max_by(|&a, &b| link[a].0.total_cmp(&link[b].0).then(b.cmp(&a)))
        else {
            kept[small] = true;
            continue;
        };
        let moved = std::mem::take(&mut pieces[small]);
        pieces[target].extend(moved);
        pieces.remove(small);
        kept.remove(small);
    }
}
