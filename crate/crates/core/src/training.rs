//! Uplink pilot training and pilot-correlation channel estimation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;

use crate::channel::FadingBlock;
use crate::error::{Error, Result};
use crate::geometry::BetaTensor;
use crate::linalg::{complex_normal, CMatrix};
use crate::sysmodel::CsiMode;

/// Uplink powers `rho[(k, j)]` or downlink powers `alpha[(k, j)]`, `K x L`.
pub type PowerGrid = DMatrix<f64>;

/// Orthogonal unit-modulus pilots; row `k` is the sequence of user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    psi: CMatrix,
}

impl PilotSet {
    pub fn matrix(&self) -> &CMatrix {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.nrows() == 0
    }
}

/// `K x K` DFT pilots, entry `(m, k) = exp(-2 pi i m k / K)`, so that
/// `Psi Psi^H = K I`.
pub fn pilot_matrix(users: usize) -> PilotSet {
    let k = users as f64;
    let psi = CMatrix::from_fn(users, users, |m, n| {
        // reduce the exponent first so large K keeps exact unit modulus
        let e = ((m * n) % users) as f64;
        Complex64::from_polar(1.0, -2.0 * PI * e / k)
    });
    PilotSet { psi }
}

/// Which cells transmit pilots during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotSources {
    AllCells,
    ServingOnly,
}

/// Received `N x K` training signal at BS `cell`:
/// `Y = sum_j G[cell][j]^T sqrt(rho_j) Psi + noise`, noise `CN(0, 1)` per entry.
pub fn uplink_training(
    block: &FadingBlock,
    rho: &PowerGrid,
    pilots: &PilotSet,
    cell: usize,
    sources: PilotSources,
    noise: Option<&mut dyn RngCore>,
) -> Result<CMatrix> {
    let (cells, users, antennas) = (block.num_cells(), block.users_per_cell(), block.antennas());
    if pilots.len() != users || rho.nrows() != users || rho.ncols() != cells || cell >= cells {
        return Err(Error::ShapeMismatch(format!(
            "pilots {0}x{0}, rho {1}x{2}, cell {cell} for K={users}, L={cells}",
            pilots.len(),
            rho.nrows(),
            rho.ncols()
        )));
    }
    // sum_j G^T sqrt(rho_j): column k is sum_j sqrt(rho_kj) g_{cell,k,j}^T
    let mut weighted = CMatrix::zeros(antennas, users);
    let senders: Vec<usize> = match sources {
        PilotSources::AllCells => (0..cells).collect(),
        PilotSources::ServingOnly => vec![cell],
    };
    for j in senders {
        let g = block.g(cell, j);
        for k in 0..users {
            let s = Complex64::from(rho[(k, j)].sqrt());
            for n in 0..antennas {
                weighted[(n, k)] += g[(k, n)] * s;
            }
        }
    }
    let mut y = weighted * pilots.matrix();
    if let Some(rng) = noise {
        for z in y.iter_mut() {
            *z += complex_normal(rng);
        }
    }
    Ok(y)
}

/// Pilot correlator: `G_hat^T = (1/K) Y Psi^H`, returned as the `K x N` matrix `G_hat`.
pub fn correlate(y: &CMatrix, pilots: &PilotSet) -> Result<CMatrix> {
    if y.ncols() != pilots.len() {
        return Err(Error::ShapeMismatch(format!(
            "Y has {} columns, pilots have length {}",
            y.ncols(),
            pilots.len()
        )));
    }
    let k = Complex64::from(pilots.len() as f64);
    Ok((y * pilots.matrix().adjoint() / k).transpose())
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub g_hat: CMatrix,
    pub h_hat: CMatrix,
    pub mode: CsiMode,
}

/// Remove the known large-scale gain and pilot power of each served user:
/// `H_hat = diag(rho_{k,cell}^(-1/2) beta_{cell,k,cell}^(-1/2)) G_hat`.
pub fn normalize_estimate(g_hat: &CMatrix, beta: &BetaTensor, rho: &PowerGrid, cell: usize) -> CMatrix {
    let mut h = g_hat.clone();
    for (k, mut row) in h.row_iter_mut().enumerate() {
        row /= Complex64::from((rho[(k, cell)] * beta.get(cell, k, cell)).sqrt());
    }
    h
}

/// Channel knowledge of BS `cell` about its own users under `mode`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_channel(
    block: &FadingBlock,
    pilots: &PilotSet,
    mode: CsiMode,
    beta: &BetaTensor,
    rho: &PowerGrid,
    cell: usize,
    noise: Option<&mut dyn RngCore>,
) -> Result<ChannelEstimate> {
    let sources = match mode {
        CsiMode::Perfect => {
            return Ok(ChannelEstimate {
                g_hat: block.g(cell, cell).clone(),
                h_hat: block.h(cell, cell).clone(),
                mode,
            })
        }
        CsiMode::NoisyNoContamination => PilotSources::ServingOnly,
        CsiMode::Contaminated => PilotSources::AllCells,
    };
    let y = uplink_training(block, rho, pilots, cell, sources, noise)?;
    let g_hat = correlate(&y, pilots)?;
    let h_hat = normalize_estimate(&g_hat, beta, rho, cell);
    Ok(ChannelEstimate { g_hat, h_hat, mode })
}
