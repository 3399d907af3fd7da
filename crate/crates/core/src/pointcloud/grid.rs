//! Uniform-cell spatial index over a window.

use super::Window;

/// Upper bound on the number of grid cells.
pub const MAX_CELLS: f64 = 1e8;

/// Compressed cell → particle-id index. Cell `c` holds `ids[start[c]..start[c + 1]]`,
/// ids ascending within a cell.
#[derive(Debug, Clone)]
pub struct Grid {
    origin: Vec<f64>,
    cell: f64,
    dims: Vec<usize>,
    strides: Vec<usize>,
    start: Vec<u32>,
    ids: Vec<u32>,
}

impl Grid {
    /// Builds the index with cell side `preferred_cell` (enlarged if the grid
    /// would exceed [`MAX_CELLS`]).
    pub fn build(window: &Window, preferred_cell: f64, coords: &[f64]) -> Self {
        let d = window.dim();
        let widths: Vec<f64> = (0..d).map(|j| window.upper()[j] - window.lower()[j]).collect();
        let mut cell = preferred_cell;
        loop {
            let count: f64 = widths.iter().map(|w| (w / cell).ceil().max(1.0)).product();
            if count <= MAX_CELLS {
                break;
            }
            cell *= (count / MAX_CELLS).powf(1.0 / d as f64) * 1.0001;
        }
        let dims: Vec<usize> = widths.iter().map(|w| ((w / cell).ceil() as usize).max(1)).collect();
        let mut strides = vec![1usize; d];
        for j in 1..d {
            strides[j] = strides[j - 1] * dims[j - 1];
        }
        let total: usize = dims.iter().product();
        let mut grid = Grid {
            origin: window.lower().to_vec(),
            cell,
            dims,
            strides,
            start: vec![0; total + 1],
            ids: Vec::new(),
        };
        let n = coords.len() / d;
        let cells: Vec<usize> = (0..n).map(|i| grid.flat_of(&coords[i * d..(i + 1) * d])).collect();
        for &c in &cells {
            grid.start[c + 1] += 1;
        }
        for c in 0..total {
            grid.start[c + 1] += grid.start[c];
        }
        let mut fill = grid.start.clone();
        grid.ids = vec![0; n];
        for (i, &c) in cells.iter().enumerate() {
            grid.ids[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.start.len() - 1
    }

    /// Clamped cell coordinate along axis `j`.
    fn axis_cell(&self, j: usize, x: f64) -> usize {
        let c = ((x - self.origin[j]) / self.cell).floor();
        if c <= 0.0 || c.is_nan() {
            0
        } else {
            (c as usize).min(self.dims[j] - 1)
        }
    }

    pub fn cell_of(&self, x: &[f64]) -> Vec<usize> {
        (0..self.dims.len()).map(|j| self.axis_cell(j, x[j])).collect()
    }

    pub fn flat_of(&self, x: &[f64]) -> usize {
        (0..self.dims.len()).map(|j| self.axis_cell(j, x[j]) * self.strides[j]).sum()
    }

    pub fn ids_in_flat(&self, flat: usize) -> &[u32] {
        &self.ids[self.start[flat] as usize..self.start[flat + 1] as usize]
    }

    /// Visits particle ids cell-shell by cell-shell around `x`, starting with the
    /// block of Chebyshev radius `start_rho` around the cell containing `x`.
    /// After each shell `stop(bound)` is asked whether to finish, where `bound`
    /// is a lower bound on the distance from `x` to any particle not yet visited.
    pub fn expanding_search<S>(
        &self,
        x: &[f64],
        start_rho: usize,
        state: &mut S,
        mut visit: impl FnMut(&mut S, u32),
        mut stop: impl FnMut(&mut S, f64) -> bool,
    ) {
        let d = self.dims.len();
        let center = self.cell_of(x);
        let mut prev: Option<(Vec<usize>, Vec<usize>)> = None;
        let mut rho = start_rho;
        loop {
            let lo: Vec<usize> = (0..d).map(|j| center[j].saturating_sub(rho)).collect();
            let hi: Vec<usize> = (0..d).map(|j| (center[j] + rho).min(self.dims[j] - 1)).collect();
            self.for_each_cell(&lo, &hi, prev.as_ref(), |flat| {
                for &id in self.ids_in_flat(flat) {
                    visit(state, id);
                }
            });
            let full = (0..d).all(|j| lo[j] == 0 && hi[j] == self.dims[j] - 1);
            if full || stop(state, self.unseen_bound(x, &lo, &hi)) {
                return;
            }
            prev = Some((lo, hi));
            rho += 1;
        }
    }

    /// Cells of the block `[lo, hi]` that are not inside `skip`.
    fn for_each_cell(
        &self,
        lo: &[usize],
        hi: &[usize],
        skip: Option<&(Vec<usize>, Vec<usize>)>,
        mut f: impl FnMut(usize),
    ) {
        let d = lo.len();
        let mut cur = lo.to_vec();
        loop {
            let inside_skip = match skip {
                Some((slo, shi)) => (0..d).all(|j| cur[j] >= slo[j] && cur[j] <= shi[j]),
                None => false,
            };
            if !inside_skip {
                f((0..d).map(|j| cur[j] * self.strides[j]).sum());
            }
            let mut j = 0;
            loop {
                if j == d {
                    return;
                }
                if cur[j] < hi[j] {
                    cur[j] += 1;
                    break;
                }
                cur[j] = lo[j];
                j += 1;
            }
        }
    }

    /// Lower bound on the distance from `x` to any point of the window outside
    /// the cell block `[lo, hi]`. Faces on the grid boundary are not crossable.
    fn unseen_bound(&self, x: &[f64], lo: &[usize], hi: &[usize]) -> f64 {
        let mut bound = f64::INFINITY;
        for j in 0..self.dims.len() {
            if lo[j] > 0 {
                bound = bound.min(x[j] - (self.origin[j] + lo[j] as f64 * self.cell));
            }
            if hi[j] + 1 < self.dims[j] {
                bound = bound.min(self.origin[j] + (hi[j] + 1) as f64 * self.cell - x[j]);
            }
        }
        bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_in_exactly_one_cell() {
        let w = Window::new(vec![0.0, 0.0], vec![3.0, 2.0]).unwrap();
        let coords = vec![0.1, 0.1, 2.9, 1.9, 1.5, 1.0, 3.0, 2.0, 0.0, 0.0];
        let g = Grid::build(&w, 1.0, &coords);
        let mut seen: Vec<u32> = (0..g.cell_count()).flat_map(|c| g.ids_in_flat(c).to_vec()).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert_eq!(g.dims(), &[3, 2]);
    }

    #[test]
    fn cell_budget_is_clamped() {
        let w = Window::new(vec![0.0, 0.0], vec![1e5, 1e5]).unwrap();
        let g = Grid::build(&w, 1.0, &[]);
        assert!(g.cell_count() as f64 <= MAX_CELLS);
    }
}
