use std::fmt;

use serde::{Deserialize, Serialize};

use super::BandStructure;
use crate::kgrid::KPath;
use crate::linalg::Vec3;
use crate::{Error, Result};

/// Separator between the two nodes of a segment in location labels.
pub const SEGMENT_SEPARATOR: &str = "--";

/// A band extremum on the sampled path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub index: usize,
    pub k: Vec3,
    /// Node letter, or `(B--C)` strictly inside the segment from B to C.
    pub label: String,
    /// eV relative to the Fermi level.
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapKind {
    Direct,
    Indirect,
    Metallic,
}

impl fmt::Display for GapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapKind::Direct => "Direct",
            GapKind::Indirect => "Indirect",
            GapKind::Metallic => "Metallic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// meV, zero when the bands overlap.
    pub gap: f64,
    pub vbm: GapPoint,
    pub cbm: GapPoint,
    pub direct: bool,
    pub metallic: bool,
}

impl GapReport {
    pub fn kind(&self) -> GapKind {
        if self.metallic {
            GapKind::Metallic
        } else if self.direct {
            GapKind::Direct
        } else {
            GapKind::Indirect
        }
    }

    /// Where the gap sits: one label when both extrema share a point,
    /// `A-B` for two nodes (VBM first), `A+(B--C)` for a node and an
    /// interior point (node first), `(A--B)+(C--D)` otherwise (VBM first).
    pub fn location(&self) -> String {
        if self.vbm.index == self.cbm.index {
            return self.vbm.label.clone();
        }
        let node = |p: &GapPoint| !p.label.starts_with('(');
        match (node(&self.vbm), node(&self.cbm)) {
            (true, true) => format!("{}-{}", self.vbm.label, self.cbm.label),
            (true, false) => format!("{}+{}", self.vbm.label, self.cbm.label),
            (false, true) => format!("{}+{}", self.cbm.label, self.vbm.label),
            (false, false) => format!("{}+{}", self.vbm.label, self.cbm.label),
        }
    }
}

/// Label of a path point: its node letter, or the bracketed segment.
pub fn point_label(path: &KPath, index: usize) -> String {
    match path.node_label_at(index) {
        Some(l) => l.to_string(),
        None => {
            let (a, b) = path.segment_of(index);
            format!(
                "({}{}{})",
                path.nodes[a].label, SEGMENT_SEPARATOR, path.nodes[b].label
            )
        }
    }
}

/// VBM and CBM over the sampled path for a spin-degenerate filling. Ties go
/// to the earlier path index.
pub fn analyze_gap(bands: &BandStructure) -> Result<GapReport> {
    let ne = bands.n_electrons;
    if (ne / 2.0).fract() != 0.0 || ne <= 0.0 {
        return Err(Error::Unsupported(format!(
            "gap analysis needs an even electron count, got {ne}"
        )));
    }
    let n_occ = (ne / 2.0) as usize;
    let n_bands = bands.n_bands();
    if n_occ >= n_bands {
        return Err(Error::InsufficientBands {
            bands: n_bands,
            electrons: ne,
        });
    }
    let (mut vi, mut vbm) = (0, f64::NEG_INFINITY);
    let (mut ci, mut cbm) = (0, f64::INFINITY);
    for (i, e) in bands.energies.iter().enumerate() {
        if e[n_occ - 1] > vbm {
            vbm = e[n_occ - 1];
            vi = i;
        }
        if e[n_occ] < cbm {
            cbm = e[n_occ];
            ci = i;
        }
    }
    let point = |i: usize, energy: f64| GapPoint {
        index: i,
        k: bands.path.points[i],
        label: point_label(&bands.path, i),
        energy,
    };
    let metallic = vbm >= cbm;
    Ok(GapReport {
        gap: if metallic { 0.0 } else { (cbm - vbm) * 1000.0 },
        vbm: point(vi, vbm),
        cbm: point(ci, cbm),
        direct: vi == ci,
        metallic,
    })
}
