//! Uniform-grid spatial hash over trajectory points, used to restrict kernel
//! sums to points inside the kernel support.

use std::collections::HashMap;

use crate::simulate::Trajectory;

/// Largest ambient dimension the index supports.
pub const MAX_DIM: usize = 8;

type CellKey = [i32; MAX_DIM];

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell: f64,
    dim: usize,
    cells: HashMap<CellKey, Vec<u32>>,
}

impl GridIndex {
    /// Indexes points `0..limit` of `t` with cells of side at least `radius`.
    pub fn new(t: &Trajectory, radius: f64, limit: usize) -> Self {
        assert!(t.dim() <= MAX_DIM, "ambient dimension above {MAX_DIM}");
        assert!(radius > 0.0 && radius.is_finite());
        let cell = radius * (1.0 + 1e-9);
        let mut index = Self {
            cell,
            dim: t.dim(),
            cells: HashMap::new(),
        };
        for k in 0..limit.min(t.len()) {
            let key = index.key(t.point(k));
            index.cells.entry(key).or_default().push(k as u32);
        }
        index
    }

    fn key(&self, x: &[f64]) -> CellKey {
        let mut key = [0i32; MAX_DIM];
        for (slot, v) in key.iter_mut().zip(x) {
            *slot = (v / self.cell)
                .floor()
                .clamp(i32::MIN as f64 + 2.0, i32::MAX as f64 - 2.0) as i32;
        }
        key
    }

    /// Indices of all points within one cell of `x`, ascending. Every point
    /// closer than `radius` to `x` is included.
    pub fn candidates(&self, x: &[f64], out: &mut Vec<usize>) {
        out.clear();
        let center = self.key(x);
        let combos = 3usize.pow(self.dim as u32);
        let mut key = center;
        for mut code in 0..combos {
            for i in 0..self.dim {
                key[i] = center[i] + (code % 3) as i32 - 1;
                code /= 3;
            }
            if let Some(ids) = self.cells.get(&key) {
                out.extend(ids.iter().map(|&k| k as usize));
            }
        }
        out.sort_unstable();
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldSpec;
    use crate::simulate::{simulate, SimConfig};

    #[test]
    fn finds_every_point_inside_the_radius() {
        let t = simulate(&SimConfig::new(ManifoldSpec::sphere(), 4000, 0.01, 9)).unwrap();
        let radius = 0.25;
        let index = GridIndex::new(&t, radius, t.len() - 1);
        let mut got = Vec::new();
        for b in [0usize, 17, 999, 3000] {
            let x = t.point(b).to_vec();
            index.candidates(&x, &mut got);
            let inside: Vec<usize> = (0..t.len() - 1)
                .filter(|&k| {
                    let d2: f64 = t.point(k).iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                    d2 < radius * radius
                })
                .collect();
            assert!(inside.iter().all(|k| got.binary_search(k).is_ok()));
            assert!(got.windows(2).all(|w| w[0] < w[1]));
            assert!(got.iter().all(|&k| k < t.len() - 1));
        }
    }

    #[test]
    fn far_point_has_no_candidates() {
        let t = simulate(&SimConfig::new(ManifoldSpec::sphere(), 100, 0.01, 9)).unwrap();
        let index = GridIndex::new(&t, 0.1, t.len());
        let mut got = vec![1, 2, 3];
        index.candidates(&[10.0, 10.0, 10.0], &mut got);
        assert!(got.is_empty());
    }
}
