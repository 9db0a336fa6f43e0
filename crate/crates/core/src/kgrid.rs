//! Monkhorst-Pack meshes and piecewise-linear band paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// Default mesh for density-of-states runs.
pub const DOS_MESH: [usize; 3] = [22, 22, 1];

/// A uniform k-point mesh in fractional reciprocal coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMesh {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl KMesh {
    /// The Γ point alone.
    pub fn gamma() -> Self {
        KMesh {
            points: vec![[0.0; 3]],
            weights: vec![1.0],
        }
    }

    /// An explicit list of points with the given weights, renormalised to sum to 1.
    pub fn explicit(points: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::InvalidParameter(
                "k-point list and weight list must be non-empty and equal length".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "k-point weights must be >= 0".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "k-point weights sum to zero".into(),
            ));
        }
        Ok(KMesh {
            points,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn fold(u: f64) -> f64 {
    let mut v = u - u.round();
    if v <= -0.5 {
        v += 1.0;
    }
    v
}

/// The `q1 × q2 × q3` Monkhorst-Pack mesh, component values
/// `(2r - q - 1) / (2q)` for `r = 1..=q`, uniform weights, no symmetry reduction.
pub fn monkhorst_pack(q1: usize, q2: usize, q3: usize) -> Result<KMesh> {
    monkhorst_pack_shifted([q1, q2, q3], [false; 3])
}

/// Monkhorst-Pack mesh with optional half-step shifts per axis.
pub fn monkhorst_pack_shifted(q: [usize; 3], shift: [bool; 3]) -> Result<KMesh> {
    if q.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "Monkhorst-Pack divisions must be >= 1, got {q:?}"
        )));
    }
    let axis = |i: usize| -> Vec<f64> {
        let n = q[i] as f64;
        (1..=q[i])
            .map(|r| {
                let mut u = (2.0 * r as f64 - n - 1.0) / (2.0 * n);
                if shift[i] {
                    u += 0.5 / n;
                }
                fold(u)
            })
            .collect()
    };
    let (u1, u2, u3) = (axis(0), axis(1), axis(2));
    let total = q[0] * q[1] * q[2];
    let mut points = Vec::with_capacity(total);
    for &a in &u1 {
        for &b in &u2 {
            for &c in &u3 {
                points.push([a, b, c]);
            }
        }
    }
    let w = 1.0 / total as f64;
    Ok(KMesh {
        weights: vec![w; total],
        points,
    })
}

/// A labelled high-symmetry node of a band path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KNode {
    pub label: String,
    pub k: Vec3,
}

impl KNode {
    pub fn new(label: &str, k: Vec3) -> Self {
        KNode {
            label: label.to_string(),
            k,
        }
    }
}

/// The Γ–K–M–Γ path of a hexagonal lattice with `a2 = (-a/2, a√3/2, 0)`.
pub fn hexagonal_path_nodes() -> Vec<KNode> {
    vec![
        KNode::new("G", [0.0, 0.0, 0.0]),
        KNode::new("K", [1.0 / 3.0, 1.0 / 3.0, 0.0]),
        KNode::new("M", [0.0, 0.5, 0.0]),
        KNode::new("G", [0.0, 0.0, 0.0]),
    ]
}

/// A sampled band path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KPath {
    pub nodes: Vec<KNode>,
    pub points: Vec<Vec3>,
    pub node_indices: Vec<usize>,
    /// Arc length in Å⁻¹ at every point.
    pub cumulative_distance: Vec<f64>,
}

/// Samples a path through `nodes` with `points_per_segment` points per
/// segment, each segment excluding its end node; the final node is appended
/// once. `reciprocal` holds the reciprocal lattice rows (Å⁻¹) used for arc
/// lengths.
pub fn kpath(nodes: &[KNode], points_per_segment: usize, reciprocal: &Mat3) -> Result<KPath> {
    if nodes.len() < 2 {
        return Err(Error::InvalidParameter(
            "a k-path needs at least two nodes".into(),
        ));
    }
    if points_per_segment == 0 {
        return Err(Error::InvalidParameter(
            "points per segment must be >= 1".into(),
        ));
    }
    for (i, w) in nodes.windows(2).enumerate() {
        if w[0].k == w[1].k {
            return Err(Error::DegenerateSegment(i, i + 1));
        }
    }
    let n_seg = nodes.len() - 1;
    let mut points = Vec::with_capacity(n_seg * points_per_segment + 1);
    let mut node_indices = Vec::with_capacity(nodes.len());
    for w in nodes.windows(2) {
        node_indices.push(points.len());
        for j in 0..points_per_segment {
            let t = j as f64 / points_per_segment as f64;
            points.push([
                w[0].k[0] + t * (w[1].k[0] - w[0].k[0]),
                w[0].k[1] + t * (w[1].k[1] - w[0].k[1]),
                w[0].k[2] + t * (w[1].k[2] - w[0].k[2]),
            ]);
        }
    }
    node_indices.push(points.len());
    points.push(nodes[n_seg].k);

    let mut cumulative_distance = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    cumulative_distance.push(0.0);
    for w in points.windows(2) {
        let dk = linalg::sub(&w[1], &w[0]);
        acc += linalg::norm(&linalg::row_times(&dk, reciprocal));
        cumulative_distance.push(acc);
    }
    Ok(KPath {
        nodes: nodes.to_vec(),
        points,
        node_indices,
        cumulative_distance,
    })
}

impl KPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Node label at a point index, if the point is a node.
    pub fn node_label_at(&self, index: usize) -> Option<&str> {
        self.node_indices
            .iter()
            .position(|&i| i == index)
            .map(|n| self.nodes[n].label.as_str())
    }

    /// The segment `(start node, end node)` containing a point index.
    pub fn segment_of(&self, index: usize) -> (usize, usize) {
        let s = self
            .node_indices
            .windows(2)
            .position(|w| index >= w[0] && index < w[1])
            .unwrap_or(self.nodes.len() - 2);
        (s, s + 1)
    }

    /// Two-column text: cumulative distance and a node label (or `-`).
    pub fn to_text(&self) -> String {
        let mut s = String::from("# distance(1/A)\tlabel\n");
        for (i, d) in self.cumulative_distance.iter().enumerate() {
            let label = self.node_label_at(i).unwrap_or("-");
            s.push_str(&format!("{d:.10}\t{label}\n"));
        }
        s
    }
}
