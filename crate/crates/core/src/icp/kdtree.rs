//! Exact nearest-neighbour search in 3-d.
//!
//! Ties on distance resolve to the lowest id so results never depend on
//! build order or thread scheduling.

use std::cmp::Ordering;

use nalgebra::Vector3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

/// `(squared distance, id)`, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist2: f64,
    pub id: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn build<'a>(items: impl IntoIterator<Item = (usize, &'a Vector3<f64>)>) -> Self {
        let (ids, points): (Vec<usize>, Vec<[f64; 3]>) = items
            .into_iter()
            .map(|(id, p)| (id, [p.x, p.y, p.z]))
            .unzip();
        let mut tree = KdTree {
            points,
            ids,
            nodes: Vec::new(),
        };
        let n = tree.points.len();
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let idx = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return idx;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|a, b| (hi[*a] - lo[*a]).total_cmp(&(hi[*b] - lo[*b])))
            .unwrap();
        let mid = start + (end - start) / 2;

        // select on a joint permutation of points and ids
        let mut order: Vec<usize> = (start..end).collect();
        order.select_nth_unstable_by(mid - start, |x, y| {
            self.points[*x][axis].total_cmp(&self.points[*y][axis])
        });
        let pts: Vec<[f64; 3]> = order.iter().map(|o| self.points[*o]).collect();
        let ids: Vec<usize> = order.iter().map(|o| self.ids[*o]).collect();
        self.points[start..end].copy_from_slice(&pts);
        self.ids[start..end].copy_from_slice(&ids);
        let value = self.points[mid][axis];

        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[idx] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        idx
    }

    #[inline]
    fn dist2(&self, slot: usize, q: &[f64; 3]) -> f64 {
        let p = &self.points[slot];
        let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
        dx * dx + dy * dy + dz * dz
    }

    pub fn nearest(&self, q: &Vector3<f64>) -> Option<Neighbor> {
        if self.is_empty() {
            return None;
        }
        let q = [q.x, q.y, q.z];
        let mut best = Neighbor {
            dist2: f64::INFINITY,
            id: usize::MAX,
        };
        self.nearest_in(0, &q, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: usize, q: &[f64; 3], best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let cand = Neighbor {
                        dist2: self.dist2(slot, q),
                        id: self.ids[slot],
                    };
                    if cand < *best {
                        *best = cand;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_in(near, q, best);
                if diff * diff <= best.dist2 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest neighbours in ascending order.
    pub fn knn(&self, q: &Vector3<f64>, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let q = [q.x, q.y, q.z];
        let mut best = Vec::with_capacity(k + 1);
        self.knn_in(0, &q, k, &mut best);
        best
    }

    /// `best` stays sorted ascending and holds at most `k` entries.
    fn knn_in(&self, node: usize, q: &[f64; 3], k: usize, best: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let cand = Neighbor {
                        dist2: self.dist2(slot, q),
                        id: self.ids[slot],
                    };
                    if best.len() == k && cand >= best[k - 1] {
                        continue;
                    }
                    let pos = best.partition_point(|b| *b < cand);
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_in(near, q, k, best);
                if best.len() < k || diff * diff <= best[k - 1].dist2 {
                    self.knn_in(far, q, k, best);
                }
            }
        }
    }
}
