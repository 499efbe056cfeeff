//! Block Rayleigh fading and composition with the large-scale gains.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::BetaTensor;
use crate::linalg::{complex_normal_matrix, CMatrix};

/// `K x N` matrix of i.i.d. `CN(0, 1)` entries.
pub fn draw_small_scale<R: Rng + ?Sized>(rng: &mut R, users: usize, antennas: usize) -> CMatrix {
    complex_normal_matrix(rng, users, antennas)
}

/// Small-scale blocks `H[l][j]` (BS `l` to the users of cell `j`) and the
/// full channels `G[l][j] = diag(beta_{l.j}^(1/2)) H[l][j]`, constant over one frame.
#[derive(Debug, Clone)]
pub struct FadingBlock {
    cells: usize,
    small: Vec<CMatrix>,
    full: Vec<CMatrix>,
}

impl FadingBlock {
    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.small[0].nrows()
    }

    pub fn antennas(&self) -> usize {
        self.small[0].ncols()
    }

    pub fn h(&self, bs: usize, cell: usize) -> &CMatrix {
        &self.small[bs * self.cells + cell]
    }

    pub fn g(&self, bs: usize, cell: usize) -> &CMatrix {
        &self.full[bs * self.cells + cell]
    }
}

/// Draw all `L x L` small-scale blocks, in `(bs, cell)` row-major order.
pub fn draw_block_small_scale<R: Rng + ?Sized>(
    rng: &mut R,
    cells: usize,
    users: usize,
    antennas: usize,
) -> Vec<CMatrix> {
    (0..cells * cells)
        .map(|_| draw_small_scale(rng, users, antennas))
        .collect()
}

/// Scale row `k` of each `H[l][j]` by `sqrt(beta[l][k][j])`.
pub fn compose_full_channel(small: Vec<CMatrix>, beta: &BetaTensor) -> Result<FadingBlock> {
    let cells = beta.num_cells();
    let users = beta.users_per_cell();
    if small.len() != cells * cells {
        return Err(Error::ShapeMismatch(format!(
            "{} small-scale blocks for {cells} cells",
            small.len()
        )));
    }
    let antennas = small[0].ncols();
    let mut full = Vec::with_capacity(small.len());
    for (idx, h) in small.iter().enumerate() {
        if h.nrows() != users || h.ncols() != antennas {
            return Err(Error::ShapeMismatch(format!(
                "block {idx} is {}x{}, expected {users}x{antennas}",
                h.nrows(),
                h.ncols()
            )));
        }
        let (l, j) = (idx / cells, idx % cells);
        let mut g = h.clone();
        for (k, mut row) in g.row_iter_mut().enumerate() {
            row *= Complex64::from(beta.get(l, k, j).sqrt());
        }
        full.push(g);
    }
    Ok(FadingBlock { cells, small, full })
}
