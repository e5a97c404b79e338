use serde::{Deserialize, Serialize};

use super::FreeBoundaryError;
use crate::discretization::SpaceTimeField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Plus,
    Minus,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Plus => "plus",
            Phase::Minus => "minus",
        }
    }
}

/// A space-time cell: grid point `point` at snapshot `snapshot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub snapshot: usize,
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    pub phase: Phase,
    pub cells: usize,
    pub first_snapshot: usize,
    pub last_snapshot: usize,
}

/// Phase label and connected-component id for every space-time cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLabeling {
    snapshots: usize,
    points: usize,
    labels: Vec<Phase>,
    component_of: Vec<usize>,
    components: Vec<Component>,
}

impl PhaseLabeling {
    fn flat(&self, c: Cell) -> usize {
        c.snapshot * self.points + c.point
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn label(&self, c: Cell) -> Phase {
        self.labels[self.flat(c)]
    }

    pub fn component(&self, c: Cell) -> usize {
        self.component_of[self.flat(c)]
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.components.iter().filter(|c| c.phase == phase).count()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Labels cells by the sign of `h` and joins face-adjacent equal labels
/// (neighbours in time and along each space axis). Component ids follow the
/// order of first appearance in snapshot-major scan order.
pub fn extract_phases(h_hist: &SpaceTimeField) -> Result<PhaseLabeling, FreeBoundaryError> {
    let grid = h_hist.grid();
    let points = grid.len();
    let snapshots = h_hist.len();
    let mut labels = Vec::with_capacity(points * snapshots);
    for (i, &v) in h_hist.data().iter().enumerate() {
        labels.push(if v == 1.0 {
            Phase::Plus
        } else if v == -1.0 {
            Phase::Minus
        } else {
            return Err(FreeBoundaryError::NonBinaryField {
                snapshot: i / points,
                point: i % points,
                value: v,
            });
        });
    }
    let mut uf = UnionFind::new(labels.len());
    for k in 0..snapshots {
        for p in 0..points {
            let c = k * points + p;
            if k + 1 < snapshots && labels[c] == labels[c + points] {
                uf.union(c, c + points);
            }
            let idx = grid.multi_index(p);
            for a in 0..grid.dim() {
                if idx[a] + 1 < grid.axis(a).count {
                    let q = c + grid.stride(a);
                    if labels[c] == labels[q] {
                        uf.union(c, q);
                    }
                }
            }
        }
    }
    let mut root_to_id = std::collections::HashMap::new();
    let mut component_of = Vec::with_capacity(labels.len());
    let mut components: Vec<Component> = Vec::new();
    for c in 0..labels.len() {
        let root = uf.find(c);
        let k = c / points;
        let id = *root_to_id.entry(root).or_insert_with(|| {
            components.push(Component {
                id: components.len(),
                phase: labels[c],
                cells: 0,
                first_snapshot: k,
                last_snapshot: k,
            });
            components.len() - 1
        });
        let comp = &mut components[id];
        comp.cells += 1;
        comp.last_snapshot = comp.last_snapshot.max(k);
        component_of.push(id);
    }
    Ok(PhaseLabeling {
        snapshots,
        points,
        labels,
        component_of,
        components,
    })
}
