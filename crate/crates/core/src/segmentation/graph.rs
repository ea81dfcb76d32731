//! Weighted pixel-adjacency graphs and the normalized-cut criterion.

use nalgebra::DMatrix;

use crate::data::HsiCube;
use crate::error::{Error, Result};

/// Pixel neighbourhood used for graph edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    #[default]
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    /// Forward offsets `(drow, dcol)`; each undirected edge is produced once.
    fn forward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, 1), (1, 0)],
            Connectivity::Eight => &[(0, 1), (1, 0), (1, 1), (1, -1)],
        }
    }

    /// Calls `f(i, j)` for every undirected adjacent pixel pair on a
    /// `width x height` grid.
    pub fn for_each_pair(self, width: usize, height: usize, mut f: impl FnMut(usize, usize)) {
        for r in 0..height {
            for c in 0..width {
                for &(dr, dc) in self.forward_offsets() {
                    let (r2, c2) = (r as isize + dr, c as isize + dc);
                    if r2 < 0 || c2 < 0 || r2 >= height as isize || c2 >= width as isize {
                        continue;
                    }
                    f(r * width + c, r2 as usize * width + c2 as usize);
                }
            }
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::InvalidParameter(format!(
                "connectivity must be 4 or 8, got {v}"
            ))),
        }
    }
}

/// Undirected weighted graph in compressed adjacency form. Every edge is
/// stored in both directions.
#[derive(Debug, Clone)]
pub struct PixelGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    degree: Vec<f64>,
}

impl PixelGraph {
    /// Builds a graph from undirected edges `(i, j, w)`.
    ///
    /// Self-loops, negative or non-finite weights and out-of-range nodes are
    /// rejected. Repeated pairs have their weights summed.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
        for &(i, j, w) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for {node_count} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop on node {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < list.len() {
                let (j, mut w) = list[k];
                k += 1;
                while k < list.len() && list[k].0 == j {
                    w += list[k].1;
                    k += 1;
                }
                neighbors.push(j);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        let degree = (0..node_count)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        Ok(Self {
            offsets,
            neighbors,
            weights,
            degree,
        })
    }

    pub fn node_count(&self) -> usize {
        self.degree.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Sum of incident weights of `node`.
    pub fn degree(&self, node: usize) -> f64 {
        self.degree[node]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Neighbours of `node` with edge weights.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[node]..self.offsets[node + 1];
        self.neighbors[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Weight of edge `(i, j)`, if present.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let range = self.offsets[i]..self.offsets[i + 1];
        let slice = &self.neighbors[range.clone()];
        slice
            .binary_search(&j)
            .ok()
            .map(|k| self.weights[range.start + k])
    }

    /// Undirected edges with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| i < j)
                .map(move |(j, w)| (i, j, w))
        })
    }

    fn membership(&self, part_a: &[usize]) -> Result<Vec<bool>> {
        let n = self.node_count();
        let mut in_a = vec![false; n];
        let mut size = 0;
        for &i in part_a {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "node {i} out of range for {n} nodes"
                )));
            }
            if !in_a[i] {
                in_a[i] = true;
                size += 1;
            }
        }
        if size == 0 || size == n {
            return Err(Error::InvalidParameter(
                "partition side must be a non-empty proper subset".into(),
            ));
        }
        Ok(in_a)
    }

    fn cut_of(&self, in_a: &[bool]) -> f64 {
        self.edges()
            .filter(|&(i, j, _)| in_a[i] != in_a[j])
            .map(|(_, _, w)| w)
            .sum()
    }

    /// Total weight of edges crossing between `part_a` and its complement.
    pub fn cut_value(&self, part_a: &[usize]) -> Result<f64> {
        let in_a = self.membership(part_a)?;
        Ok(self.cut_of(&in_a))
    }

    /// `assoc(A) = cut(A, V)`, the summed degree of `part`.
    pub fn assoc(&self, part: &[usize]) -> f64 {
        part.iter().map(|&i| self.degree[i]).sum()
    }

    /// Normalized cut of the bipartition (`part_a`, complement).
    ///
    /// Returns `f64::INFINITY` when either side has zero association.
    pub fn ncut_value(&self, part_a: &[usize]) -> Result<f64> {
        let in_a = self.membership(part_a)?;
        let cut = self.cut_of(&in_a);
        let (mut assoc_a, mut assoc_b) = (0.0, 0.0);
        for (i, &a) in in_a.iter().enumerate() {
            if a {
                assoc_a += self.degree[i];
            } else {
                assoc_b += self.degree[i];
            }
        }
        Ok(ncut_from_parts(cut, assoc_a, assoc_b))
    }
}

pub(crate) fn ncut_from_parts(cut: f64, assoc_a: f64, assoc_b: f64) -> f64 {
    if assoc_a <= 0.0 || assoc_b <= 0.0 {
        return f64::INFINITY;
    }
    cut / assoc_a + cut / assoc_b
}

/// Builds the grid graph of `features` (`F x N`, one column per pixel) with
/// weights `exp(-|x_i - x_j|^2 / (2 sigma^2))`.
pub fn build_graph_from_features(
    features: &DMatrix<f64>,
    width: usize,
    height: usize,
    connectivity: Connectivity,
    sigma_g: f64,
) -> Result<PixelGraph> {
    if !(sigma_g > 0.0 && sigma_g.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma_g must be positive, got {sigma_g}"
        )));
    }
    if features.ncols() != width * height {
        return Err(Error::Mismatch(format!(
            "{} feature columns for a {width}x{height} grid",
            features.ncols()
        )));
    }
    let scale = 1.0 / (2.0 * sigma_g * sigma_g);
    let mut edges = Vec::new();
    connectivity.for_each_pair(width, height, |i, j| {
        let d2 = (features.column(i) - features.column(j)).norm_squared();
        edges.push((i, j, (-d2 * scale).exp()));
    });
    PixelGraph::from_edges(width * height, &edges)
}

/// Builds the pixel-adjacency graph of `cube` in its full spectral space.
pub fn build_graph(
    cube: &HsiCube,
    connectivity: Connectivity,
    sigma_g: f64,
) -> Result<PixelGraph> {
    let x = cube.flatten();
    build_graph_from_features(x.matrix(), cube.width(), cube.height(), connectivity, sigma_g)
}

/// Median spectral distance between adjacent pixels, the default `sigma_g`.
pub fn median_adjacent_distance(
    features: &DMatrix<f64>,
    width: usize,
    height: usize,
    connectivity: Connectivity,
) -> f64 {
    let mut d = Vec::new();
    connectivity.for_each_pair(width, height, |i, j| {
        d.push((features.column(i) - features.column(j)).norm());
    });
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}
