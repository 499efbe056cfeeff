//! Large-array SINR limits under pilot contamination and the matching
//! BER reference line.

use std::io::Write;

use nalgebra::DMatrix;

use crate::geometry::BetaTensor;
use crate::training::PowerGrid;

/// Standard normal tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// `nu[(k, j)] = sum_i rho[(k, i)] beta[j][k][i] + 1/K`.
pub fn norm_factors(beta: &BetaTensor, rho: &PowerGrid) -> DMatrix<f64> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    DMatrix::from_fn(users, cells, |k, j| {
        (0..cells).map(|i| rho[(k, i)] * beta.get(j, k, i)).sum::<f64>() + 1.0 / users as f64
    })
}

fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Limit SINR of user `k` in cell `l` as the array grows, with per-user
/// normalization factors `nu`:
///
/// `alpha_kl beta_lkl^2 / nu_kl^2  /  sum_{j != l} alpha_kj beta_jkl^2 / nu_kj^2`.
///
/// A single cell has no interference and yields `+inf` for every user.
pub fn ultimate_sinr(beta: &BetaTensor, alpha: &PowerGrid, rho: &PowerGrid) -> DMatrix<f64> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let nu = norm_factors(beta, rho);
    let term = |k: usize, j: usize, l: usize| alpha[(k, j)] * beta.get(j, k, l).powi(2) / nu[(k, j)].powi(2);
    DMatrix::from_fn(users, cells, |k, l| {
        let interference: f64 = (0..cells).filter(|&j| j != l).map(|j| term(k, j, l)).sum();
        ratio_or_inf(term(k, l, l), interference)
    })
}

/// The equal-power simplification, `beta_lkl^2 / sum_{j != l} beta_jkl^2`.
pub fn ultimate_sinr_simplified(beta: &BetaTensor) -> DMatrix<f64> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    DMatrix::from_fn(users, cells, |k, l| {
        let interference: f64 = (0..cells).filter(|&j| j != l).map(|j| beta.get(j, k, l).powi(2)).sum();
        ratio_or_inf(beta.get(l, k, l).powi(2), interference)
    })
}

/// Gray-coded square M-QAM bit error rate at symbol SNR `sinr`, treating
/// residual interference as Gaussian. Exact for M = 4 (`Q(sqrt(sinr))`),
/// nearest-neighbour approximation otherwise.
pub fn ber_floor(sinr: f64, order: u32) -> f64 {
    if sinr.is_infinite() {
        return 0.0;
    }
    let m = order as f64;
    let factor = 2.0 * (1.0 - 1.0 / m.sqrt()) / (m.log2() / 2.0);
    factor * q_function((3.0 * sinr / (m - 1.0)).sqrt())
}

/// Per-user limit results for one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorRow {
    pub cell: usize,
    pub user: usize,
    pub sinr_full: f64,
    pub sinr_simplified: f64,
    pub ber_floor: f64,
}

/// Evaluate both limits and the BER reference (from the simplified limit)
/// for every user.
pub fn floor_rows(beta: &BetaTensor, alpha: &PowerGrid, rho: &PowerGrid, order: u32) -> Vec<FloorRow> {
    let full = ultimate_sinr(beta, alpha, rho);
    let simple = ultimate_sinr_simplified(beta);
    let mut rows = Vec::with_capacity(full.len());
    for cell in 0..beta.num_cells() {
        for user in 0..beta.users_per_cell() {
            rows.push(FloorRow {
                cell,
                user,
                sinr_full: full[(user, cell)],
                sinr_simplified: simple[(user, cell)],
                ber_floor: ber_floor(simple[(user, cell)], order),
            });
        }
    }
    rows
}

/// Mean BER reference over all users of the given drops.
pub fn mean_floor<'a>(rows: impl IntoIterator<Item = &'a FloorRow>) -> f64 {
    let (sum, n) = rows
        .into_iter()
        .fold((0.0, 0usize), |(s, n), r| (s + r.ber_floor, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Write `cell,user,sinr_eq9,sinr_eq10,ber_floor` rows.
pub fn write_floor_csv<W: Write>(out: W, rows: &[FloorRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell", "user", "sinr_eq9", "sinr_eq10", "ber_floor"])?;
    for r in rows {
        w.write_record([
            r.cell.to_string(),
            r.user.to_string(),
            r.sinr_full.to_string(),
            r.sinr_simplified.to_string(),
            r.ber_floor.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
