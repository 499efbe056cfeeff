//! Monte-Carlo BER experiment: power control, downlink transmission and
//! error accumulation over drops and frames.
//!
//! Randomness is keyed by `(seed, N, K)` for the point, then by drop and
//! frame, so every precoder sees the same channels, bits and noise, and the
//! result does not depend on the number of worker threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::asymptotics::{floor_rows, FloorRow};
use crate::channel::{compose_full_channel, draw_block_small_scale, FadingBlock};
use crate::error::{Error, Result};
use crate::geometry::{build_layout, large_scale_coeffs, BetaTensor, Placement};
use crate::linalg::{complex_normal, is_rank_deficient, outer_gram, CMatrix};
use crate::modem::{demap_into, map_symbol};
use crate::precoding::{build_precoder, Precoder, PrecoderParams};
use crate::rng::{Purpose, Streams};
use crate::sysmodel::{CsiMode, PrecoderKind, SystemConfig, NOISE_VAR_PER_DIM};
use crate::training::{estimate_channel, pilot_matrix, PilotSet, PowerGrid};

/// Consecutive singular frames tolerated before giving up on a drop.
const MAX_FRAME_REDRAWS: u64 = 1000;
/// Drops simulated per parallel batch after the first `num_drops`.
const EXTRA_DROP_BATCH: usize = 64;

/// Uplink (`rho`) and downlink (`alpha`) powers, both `K x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub rho: PowerGrid,
    pub alpha: PowerGrid,
}

/// Invert each user's serving-link gain so that `rho_kj beta_jkj = SNR_UL`
/// and `alpha_kj beta_jkj / log2 M = SNR_DL`.
pub fn power_control(beta: &BetaTensor, snr_dl_linear: f64, snr_ul_linear: f64, order: u32) -> PowerAllocation {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let bits = (order as f64).log2();
    PowerAllocation {
        rho: PowerGrid::from_fn(users, cells, |k, j| snr_ul_linear / beta.get(j, k, j)),
        alpha: PowerGrid::from_fn(users, cells, |k, j| snr_dl_linear * bits / beta.get(j, k, j)),
    }
}

/// `E[j][l] = diag(sqrt(alpha_.j)) G[j][l] P_j`, the `K x K` map from the
/// symbols of cell `j` to the users of cell `l`. Indexed `j * L + l`.
pub fn effective_channels(block: &FadingBlock, precoders: &[Precoder], alpha: &PowerGrid) -> Result<Vec<CMatrix>> {
    let cells = block.num_cells();
    if precoders.len() != cells || alpha.ncols() != cells || alpha.nrows() != block.users_per_cell() {
        return Err(Error::ShapeMismatch(format!(
            "{} precoders and {}x{} powers for {cells} cells",
            precoders.len(),
            alpha.nrows(),
            alpha.ncols()
        )));
    }
    let mut out = Vec::with_capacity(cells * cells);
    for (j, p) in precoders.iter().enumerate() {
        if p.matrix.nrows() != block.antennas() {
            return Err(Error::ShapeMismatch(format!(
                "precoder of cell {j} has {} rows for N={}",
                p.matrix.nrows(),
                block.antennas()
            )));
        }
        for l in 0..cells {
            let mut e = block.g(j, l) * &p.matrix;
            for (k, mut row) in e.row_iter_mut().enumerate() {
                row *= Complex64::from(alpha[(k, j)].sqrt());
            }
            out.push(e);
        }
    }
    Ok(out)
}

/// Signal received by the users of `cell` for one channel use:
/// `r = sum_j diag(sqrt(alpha_j)) G[j][cell] P_j x_j + n`, `n ~ CN(0, I)`.
pub fn downlink_transmit(
    block: &FadingBlock,
    precoders: &[Precoder],
    alpha: &PowerGrid,
    symbols: &[Vec<Complex64>],
    cell: usize,
    noise: Option<&mut dyn RngCore>,
) -> Result<Vec<Complex64>> {
    let (cells, users) = (block.num_cells(), block.users_per_cell());
    if symbols.len() != cells || symbols.iter().any(|x| x.len() != users) || cell >= cells {
        return Err(Error::ShapeMismatch(format!(
            "symbols for {} cells, cell {cell}, expected {cells} cells of {users} users",
            symbols.len()
        )));
    }
    let eff = effective_channels(block, precoders, alpha)?;
    let mut r = vec![Complex64::new(0.0, 0.0); users];
    for (j, x) in symbols.iter().enumerate() {
        let e = &eff[j * cells + cell];
        for (k, rk) in r.iter_mut().enumerate() {
            *rk += (0..users).map(|i| e[(k, i)] * x[i]).sum::<Complex64>();
        }
    }
    if let Some(rng) = noise {
        for rk in r.iter_mut() {
            *rk += complex_normal(rng);
        }
    }
    Ok(r)
}

/// How the user count follows the array size in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    NEqualsK,
    KFixed,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NEqualsK => "n-equals-k",
            Self::KFixed => "k-fixed",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n-equals-k" | "nequalsk" => Ok(Self::NEqualsK),
            "k-fixed" | "kfixed" => Ok(Self::KFixed),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

/// Accumulated BER of one technique at one array size.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub technique: PrecoderKind,
    pub antennas: usize,
    pub users: usize,
    pub csi_mode: CsiMode,
    pub bit_errors: u64,
    pub bits: u64,
    pub drops: u64,
    /// Frames discarded because some channel estimate was singular.
    pub rank_redraws: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    /// 3-sigma binomial half-width around the measured BER.
    pub fn ci3(&self) -> f64 {
        let p = self.ber();
        3.0 * (p * (1.0 - p) / self.bits.max(1) as f64).sqrt()
    }
}

/// Random substreams of one `(N, K)` point.
pub fn point_streams(cfg: &SystemConfig) -> Streams {
    Streams::new(cfg.rng_seed).child(((cfg.bs_antennas as u64) << 32) | cfg.users_per_cell as u64)
}

/// User placement and large-scale gains of drop `drop` for the point `cfg`.
pub fn drop_large_scale(cfg: &SystemConfig, drop: u64) -> Result<(Placement, BetaTensor)> {
    let streams = point_streams(cfg);
    let placement = build_layout(cfg, &mut streams.stream(Purpose::Layout, drop, 0));
    let beta = large_scale_coeffs(&placement, cfg, &mut streams.stream(Purpose::Shadowing, drop, 0))?;
    Ok((placement, beta))
}

/// Limit SINRs and BER reference for every user of drops `0..drops` of the
/// point `cfg`, i.e. for the same geometry a BER run of that point sees.
pub fn floor_reference(cfg: &SystemConfig, drops: u64) -> Result<Vec<FloorRow>> {
    let cfg = cfg.validate()?;
    let per_drop: Vec<Result<Vec<FloorRow>>> = (0..drops)
        .into_par_iter()
        .map(|d| {
            let (_, beta) = drop_large_scale(&cfg, d)?;
            let pw = power_control(&beta, cfg.snr_dl_linear(), cfg.snr_ul_linear(), cfg.modulation_order);
            Ok(floor_rows(&beta, &pw.alpha, &pw.rho, cfg.modulation_order))
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_drop {
        rows.extend(r?);
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
struct DropTally {
    errors: Vec<u64>,
    bits: u64,
    redraws: u64,
}

fn frame_key(frame: usize, attempt: u64) -> u64 {
    ((frame as u64) << 24) | attempt
}

/// Draw a fading block and per-cell estimates, redrawing while any estimate
/// is rank deficient.
fn draw_frame(
    cfg: &SystemConfig,
    streams: &Streams,
    drop: u64,
    frame: usize,
    beta: &BetaTensor,
    power: &PowerAllocation,
    pilots: &PilotSet,
) -> Result<(FadingBlock, Vec<CMatrix>, u64)> {
    let cells = cfg.num_cells;
    for attempt in 0..MAX_FRAME_REDRAWS {
        let key = frame_key(frame, attempt);
        let mut rng = streams.stream(Purpose::Fading, drop, key);
        let small = draw_block_small_scale(&mut rng, cells, cfg.users_per_cell, cfg.bs_antennas);
        let block = compose_full_channel(small, beta)?;
        let mut pilot_rng = streams.stream(Purpose::PilotNoise, drop, key);
        let mut estimates = Vec::with_capacity(cells);
        for l in 0..cells {
            let est = estimate_channel(&block, pilots, cfg.csi_mode, beta, &power.rho, l, Some(&mut pilot_rng))?;
            estimates.push(est.h_hat);
        }
        if estimates.iter().any(|h| is_rank_deficient(&outer_gram(h))) {
            continue;
        }
        return Ok((block, estimates, attempt));
    }
    Err(Error::RankDeficient)
}

fn simulate_drop(cfg: &SystemConfig, drop: u64, techniques: &[PrecoderKind], active: &[bool]) -> Result<DropTally> {
    let streams = point_streams(cfg);
    let (_, beta) = drop_large_scale(cfg, drop)?;
    let power = power_control(&beta, cfg.snr_dl_linear(), cfg.snr_ul_linear(), cfg.modulation_order);
    let pilots = pilot_matrix(cfg.users_per_cell);
    let spec = cfg.modulation();
    let params = PrecoderParams {
        rzf_zeta: cfg.resolved_zeta(),
        noise_var_per_dim: NOISE_VAR_PER_DIM,
        snr_dl_linear: cfg.snr_dl_linear(),
        modulation_order: cfg.modulation_order,
    };
    let (cells, users, symbols) = (cfg.num_cells, cfg.users_per_cell, cfg.symbols_per_frame);
    let bps = spec.bits_per_symbol as usize;

    let mut tally = DropTally {
        errors: vec![0; techniques.len()],
        bits: 0,
        redraws: 0,
    };
    let mut rx_bits = Vec::with_capacity(bps);
    let mut received = vec![Complex64::new(0.0, 0.0); users];

    for frame in 0..cfg.frames_per_drop {
        let (block, estimates, redraws) = draw_frame(cfg, &streams, drop, frame, &beta, &power, &pilots)?;
        tally.redraws += redraws;

        // bits[s][l][k] and the matching symbols, shared by all techniques
        let mut bit_rng = streams.stream(Purpose::Bits, drop, frame as u64);
        let tx_bits: Vec<u8> = (0..symbols * cells * users * bps)
            .map(|_| bit_rng.random_range(0..2u8))
            .collect();
        let tx_syms: Vec<Complex64> = tx_bits.chunks_exact(bps).map(|b| map_symbol(b, &spec)).collect();
        let mut noise_rng = streams.stream(Purpose::DownlinkNoise, drop, frame as u64);
        let noise: Vec<Complex64> = (0..symbols * cells * users)
            .map(|_| complex_normal(&mut noise_rng))
            .collect();
        tally.bits += tx_bits.len() as u64;

        for (t, &kind) in techniques.iter().enumerate() {
            if !active[t] {
                continue;
            }
            let precoders = estimates
                .iter()
                .map(|h| build_precoder(kind, h, &params))
                .collect::<Result<Vec<_>>>()?;
            let eff = effective_channels(&block, &precoders, &power.alpha)?;
            let mut errors = 0u64;
            for s in 0..symbols {
                let x_of = |j: usize| &tx_syms[(s * cells + j) * users..(s * cells + j + 1) * users];
                for l in 0..cells {
                    let base = (s * cells + l) * users;
                    received.copy_from_slice(&noise[base..base + users]);
                    for j in 0..cells {
                        let e = &eff[j * cells + l];
                        let x = x_of(j);
                        for (k, rk) in received.iter_mut().enumerate() {
                            for (i, xi) in x.iter().enumerate() {
                                *rk += e[(k, i)] * xi;
                            }
                        }
                    }
                    let own = &eff[l * cells + l];
                    for (k, &rk) in received.iter().enumerate() {
                        rx_bits.clear();
                        demap_into(rk, own[(k, k)], &spec, &mut rx_bits)?;
                        let sent = &tx_bits[(base + k) * bps..(base + k + 1) * bps];
                        errors += sent.iter().zip(&rx_bits).filter(|(a, b)| a != b).count() as u64;
                    }
                }
            }
            tally.errors[t] += errors;
        }
    }
    Ok(tally)
}

/// BER of several techniques at one `(N, K)` point on common random numbers.
///
/// Each technique accumulates drops in order until it has seen at least
/// `num_drops` drops and `min_bit_errors` errors, or `max_drops` drops.
pub fn run_techniques(
    cfg: &SystemConfig,
    techniques: &[PrecoderKind],
    antennas: usize,
    users: usize,
) -> Result<Vec<BerPoint>> {
    let cfg = cfg.with_dims(antennas, users)?;
    let mut points: Vec<BerPoint> = techniques
        .iter()
        .map(|&technique| BerPoint {
            technique,
            antennas,
            users,
            csi_mode: cfg.csi_mode,
            bit_errors: 0,
            bits: 0,
            drops: 0,
            rank_redraws: 0,
        })
        .collect();
    let done = |p: &BerPoint| {
        p.drops as usize >= cfg.max_drops || (p.drops as usize >= cfg.num_drops && p.bit_errors >= cfg.min_bit_errors)
    };
    let mut next = 0usize;
    while next < cfg.max_drops && !points.iter().all(done) {
        let batch = if next == 0 { cfg.num_drops } else { EXTRA_DROP_BATCH };
        let end = (next + batch).min(cfg.max_drops);
        let active: Vec<bool> = points.iter().map(|p| !done(p)).collect();
        let tallies: Vec<Result<DropTally>> = (next..end)
            .into_par_iter()
            .map(|d| simulate_drop(&cfg, d as u64, techniques, &active))
            .collect();
        for tally in tallies {
            let tally = tally?;
            for (t, p) in points.iter_mut().enumerate() {
                if done(p) {
                    continue;
                }
                p.bit_errors += tally.errors[t];
                p.bits += tally.bits;
                p.drops += 1;
                p.rank_redraws += tally.redraws;
            }
        }
        next = end;
    }
    for p in &points {
        if p.rank_redraws > 0 {
            log::warn!(
                "{} N={} K={}: {} singular frames redrawn",
                p.technique,
                antennas,
                users,
                p.rank_redraws
            );
        }
    }
    Ok(points)
}

/// BER of one technique at array size `antennas` with the configured `K`.
pub fn run_point(cfg: &SystemConfig, technique: PrecoderKind, antennas: usize) -> Result<BerPoint> {
    let mut v = run_techniques(cfg, &[technique], antennas, cfg.users_per_cell)?;
    Ok(v.remove(0))
}

/// One point per `(N, technique)` over the sweep.
pub fn run_scenario(
    cfg: &SystemConfig,
    scenario: Scenario,
    sweep: &[usize],
    techniques: &[PrecoderKind],
) -> Result<Vec<BerPoint>> {
    let mut out = Vec::with_capacity(sweep.len() * techniques.len());
    for &n in sweep {
        let users = match scenario {
            Scenario::NEqualsK => n,
            Scenario::KFixed => cfg.users_per_cell,
        };
        log::info!("{scenario} N={n} K={users} csi={}", cfg.csi_mode);
        out.extend(run_techniques(cfg, techniques, n, users)?);
    }
    Ok(out)
}

pub const BER_CSV_HEADER: [&str; 11] = [
    "technique",
    "scenario",
    "csi_mode",
    "N",
    "K",
    "snr_dl_db",
    "bits",
    "bit_errors",
    "ber",
    "drops",
    "seed",
];

/// Write BER rows in the shared schema.
pub fn write_ber_csv<W: Write>(out: W, scenario: Scenario, cfg: &SystemConfig, points: &[BerPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BER_CSV_HEADER)?;
    for p in points {
        w.write_record([
            p.technique.to_string(),
            scenario.to_string(),
            p.csi_mode.to_string(),
            p.antennas.to_string(),
            p.users.to_string(),
            cfg.snr_dl_db.to_string(),
            p.bits.to_string(),
            p.bit_errors.to_string(),
            p.ber().to_string(),
            p.drops.to_string(),
            cfg.rng_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoding::{mf_precoder, zf_precoder};
    use crate::sysmodel::modulation_spec;

    fn block(cells: usize, users: usize, antennas: usize, beta: &BetaTensor, seed: u64) -> FadingBlock {
        let mut rng = Streams::new(seed).stream(Purpose::Test, 0, 0);
        compose_full_channel(draw_block_small_scale(&mut rng, cells, users, antennas), beta).unwrap()
    }

    fn random_symbols(cells: usize, users: usize, rng: &mut impl Rng) -> Vec<Vec<Complex64>> {
        let spec = modulation_spec(4).unwrap();
        (0..cells)
            .map(|_| {
                (0..users)
                    .map(|_| map_symbol(&[rng.random_range(0..2), rng.random_range(0..2)], &spec))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn power_control_examples() {
        let beta = BetaTensor::filled(1, 1, 1.0);
        let p = power_control(&beta, 10.0, 10.0, 4);
        assert_eq!(p.alpha[(0, 0)], 20.0);
        let beta = BetaTensor::filled(1, 1, 0.5);
        let p = power_control(&beta, 10.0, 10.0, 4);
        assert_eq!(p.rho[(0, 0)], 20.0);

        let beta = BetaTensor::from_fn(3, 2, |l, k, j| 0.1 + 0.2 * (l + k + j) as f64);
        let a = power_control(&beta, 7.0, 3.0, 16);
        let b = power_control(&beta.scaled(2.0), 7.0, 3.0, 16);
        for k in 0..2 {
            for j in 0..3 {
                assert!((a.alpha[(k, j)] - 2.0 * b.alpha[(k, j)]).abs() < 1e-12);
                assert!((a.rho[(k, j)] - 2.0 * b.rho[(k, j)]).abs() < 1e-12);
                assert!((a.rho[(k, j)] * beta.get(j, k, j) - 3.0).abs() < 1e-12);
                assert!((a.alpha[(k, j)] * beta.get(j, k, j) / 4.0 - 7.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zf_single_cell_noiseless_reception() {
        let beta = BetaTensor::filled(1, 4, 1.0);
        let mut rng = Streams::new(3).stream(Purpose::Test, 1, 0);
        for antennas in [4, 32] {
            let b = block(1, 4, antennas, &beta, antennas as u64);
            let p = zf_precoder(b.h(0, 0)).unwrap();
            let alpha = PowerGrid::from_element(4, 1, 1.0);
            let x = random_symbols(1, 4, &mut rng);
            let r = downlink_transmit(&b, std::slice::from_ref(&p), &alpha, &x, 0, None).unwrap();
            for (rk, xk) in r.iter().zip(&x[0]) {
                assert!((rk - xk / p.gamma.sqrt()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn residual_is_awgn() {
        let beta = BetaTensor::filled(1, 2, 1.0);
        let b = block(1, 2, 6, &beta, 4);
        let p = zf_precoder(b.h(0, 0)).unwrap();
        let alpha = PowerGrid::from_element(2, 1, 1.0);
        let mut rng = Streams::new(5).stream(Purpose::Test, 0, 0);
        let mut noise_rng = Streams::new(5).stream(Purpose::Test, 1, 0);
        let (mut acc_re, mut acc_im, mut n) = (0.0, 0.0, 0usize);
        while n < 100_000 {
            let x = random_symbols(1, 2, &mut rng);
            let r = downlink_transmit(&b, std::slice::from_ref(&p), &alpha, &x, 0, Some(&mut noise_rng)).unwrap();
            for (rk, xk) in r.iter().zip(&x[0]) {
                let d = rk - xk / p.gamma.sqrt();
                acc_re += d.re * d.re;
                acc_im += d.im * d.im;
                n += 1;
            }
        }
        // each squared Gaussian component has variance 2 sigma^4 = 1/2
        let tol = 3.0 * (0.5 / n as f64).sqrt();
        assert!((acc_re / n as f64 - 0.5).abs() < tol);
        assert!((acc_im / n as f64 - 0.5).abs() < tol);
    }

    #[test]
    fn zero_power_leaves_only_noise() {
        let beta = BetaTensor::filled(2, 2, 1.0);
        let b = block(2, 2, 4, &beta, 6);
        let ps: Vec<Precoder> = (0..2).map(|l| mf_precoder(b.h(l, l)).unwrap()).collect();
        let alpha = PowerGrid::zeros(2, 2);
        let mut rng = Streams::new(6).stream(Purpose::Test, 0, 0);
        let x = random_symbols(2, 2, &mut rng);
        let r = downlink_transmit(
            &b,
            &ps,
            &alpha,
            &x,
            1,
            Some(&mut Streams::new(7).stream(Purpose::Test, 0, 0)),
        )
        .unwrap();
        let mut same = Streams::new(7).stream(Purpose::Test, 0, 0);
        for rk in r {
            assert_eq!(rk, complex_normal(&mut same));
        }
    }

    #[test]
    fn effective_channels_match_direct_formula() {
        let beta = BetaTensor::from_fn(3, 2, |l, k, j| 0.1 + 0.3 * ((l * 7 + k * 3 + j) % 5) as f64);
        let b = block(3, 2, 5, &beta, 8);
        let ps: Vec<Precoder> = (0..3).map(|l| zf_precoder(b.h(l, l)).unwrap()).collect();
        let alpha = PowerGrid::from_fn(2, 3, |k, j| 1.0 + (k * 3 + j) as f64);
        let mut rng = Streams::new(9).stream(Purpose::Test, 0, 0);
        let x = random_symbols(3, 2, &mut rng);
        for l in 0..3 {
            let r = downlink_transmit(&b, &ps, &alpha, &x, l, None).unwrap();
            for k in 0..2 {
                let mut direct = Complex64::new(0.0, 0.0);
                for j in 0..3 {
                    let gx = b.g(j, l).row(k) * &ps[j].matrix;
                    for i in 0..2 {
                        direct += alpha[(k, j)].sqrt() * gx[i] * x[j][i];
                    }
                }
                assert!((r[k] - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn transmit_energy_matches_precoder_trace() {
        let beta = BetaTensor::filled(1, 4, 1.0);
        let b = block(1, 4, 16, &beta, 10);
        let p = mf_precoder(b.h(0, 0)).unwrap();
        let mut rng = Streams::new(11).stream(Purpose::Test, 0, 0);
        let trials = 20_000;
        let mean = (0..trials)
            .map(|_| {
                let x = random_symbols(1, 4, &mut rng).remove(0);
                let s = &p.matrix * nalgebra::DVector::from_vec(x);
                s.norm_squared()
            })
            .sum::<f64>()
            / trials as f64;
        // unit-energy independent symbols: E||P x||^2 = trace(P^H P) = K
        assert!((mean - 4.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn shape_errors() {
        let beta = BetaTensor::filled(2, 2, 1.0);
        let b = block(2, 2, 4, &beta, 12);
        let p = mf_precoder(b.h(0, 0)).unwrap();
        let alpha = PowerGrid::from_element(2, 2, 1.0);
        let x = vec![vec![Complex64::new(1.0, 0.0); 2]; 2];
        assert!(downlink_transmit(&b, std::slice::from_ref(&p), &alpha, &x, 0, None).is_err());
        assert!(downlink_transmit(&b, &[p.clone(), p.clone()], &alpha, &x[..1], 0, None).is_err());
    }

    fn single_cell(antennas: usize, snr_db: f64) -> SystemConfig {
        SystemConfig {
            num_cells: 1,
            users_per_cell: 4,
            bs_antennas: antennas,
            snr_dl_db: snr_db,
            csi_mode: CsiMode::Perfect,
            frames_per_drop: 10,
            symbols_per_frame: 1,
            num_drops: 200,
            max_drops: 200,
            min_bit_errors: 0,
            rng_seed: 17,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn zf_single_cell_matches_semi_analytic_oracle() {
        // BER of 4-QAM with ZF is E_gamma[Q(sqrt(SNR log2 M / gamma))], where
        // gamma = trace((H H^H)^-1)/K for a K x N Gaussian H. The oracle draws
        // gamma with a plain matrix inverse, independent of the precoder code.
        let (users, antennas, snr_db) = (4usize, 8usize, 0.0);
        let snr = 10f64.powf(snr_db / 10.0);
        let mut rng = Streams::new(99).stream(Purpose::Test, 0, 0);
        let draws = 200_000;
        let mut oracle = 0.0;
        for _ in 0..draws {
            let h = crate::linalg::complex_normal_matrix(&mut rng, users, antennas);
            let inv = (&h * h.adjoint()).try_inverse().unwrap();
            let gamma = inv.trace().re / users as f64;
            oracle += crate::asymptotics::q_function((2.0 * snr / gamma).sqrt());
        }
        oracle /= draws as f64;

        let cfg = SystemConfig {
            num_drops: 10_000,
            max_drops: 10_000,
            ..single_cell(antennas, snr_db)
        };
        let p = run_point(&cfg, PrecoderKind::Zf, antennas).unwrap();
        let ci = 3.0 * (oracle * (1.0 - oracle) / p.bits as f64).sqrt();
        assert!((p.ber() - oracle).abs() < ci, "sim {} oracle {oracle} ci {ci}", p.ber());
    }

    #[test]
    fn zf_noise_free_limit_has_no_errors() {
        let cfg = SystemConfig {
            symbols_per_frame: 100,
            num_drops: 1250,
            max_drops: 1250,
            ..single_cell(8, 200.0)
        };
        let p = run_point(&cfg, PrecoderKind::Zf, 8).unwrap();
        assert!(p.bits >= 1_000_000);
        assert_eq!(p.bit_errors, 0);
    }

    #[test]
    fn stopping_rule_extends_until_error_target() {
        let cfg = SystemConfig {
            num_drops: 5,
            max_drops: 400,
            min_bit_errors: 500,
            ..single_cell(4, 0.0)
        };
        let p = run_point(&cfg, PrecoderKind::Mf, 4).unwrap();
        assert!(p.drops >= 5);
        assert!(p.bit_errors >= 500 || p.drops == 400);
        // one drop fewer would not have reached the target
        let fewer = SystemConfig {
            num_drops: p.drops as usize - 1,
            max_drops: p.drops as usize - 1,
            ..cfg.clone()
        };
        let q = run_point(&fewer, PrecoderKind::Mf, 4).unwrap();
        assert!(q.bit_errors < 500);
    }

    #[test]
    fn techniques_share_random_numbers() {
        let cfg = SystemConfig {
            num_cells: 2,
            csi_mode: CsiMode::Contaminated,
            num_drops: 6,
            max_drops: 6,
            ..single_cell(8, 10.0)
        };
        let all = run_techniques(&cfg, &PrecoderKind::ALL, 8, 4).unwrap();
        for (t, kind) in PrecoderKind::ALL.iter().enumerate() {
            let alone = run_point(&cfg, *kind, 8).unwrap();
            assert_eq!(alone, all[t]);
        }
        // RZF with zeta = 0 is ZF on the same channels
        let rzf0 = SystemConfig {
            rzf_zeta: crate::sysmodel::RzfZeta::Fixed(0.0),
            ..cfg.clone()
        };
        let a = run_point(&rzf0, PrecoderKind::Rzf, 8).unwrap();
        assert_eq!(a.bit_errors, all[1].bit_errors);
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let cfg = SystemConfig {
            num_cells: 2,
            csi_mode: CsiMode::Contaminated,
            num_drops: 12,
            max_drops: 40,
            min_bit_errors: 50,
            ..single_cell(8, 10.0)
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_scenario(&cfg, Scenario::KFixed, &[4, 8], &PrecoderKind::ALL).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn scenario_layouts() {
        let cfg = SystemConfig {
            num_drops: 1,
            max_drops: 1,
            ..single_cell(4, 10.0)
        };
        let pts = run_scenario(&cfg, Scenario::NEqualsK, &[4, 8], &[PrecoderKind::Mf]).unwrap();
        assert_eq!(
            pts.iter().map(|p| (p.antennas, p.users)).collect::<Vec<_>>(),
            vec![(4, 4), (8, 8)]
        );
        let pts = run_scenario(&cfg, Scenario::KFixed, &[4, 8, 16], &PrecoderKind::ALL).unwrap();
        assert_eq!(pts.len(), 12);
        assert!(pts.iter().all(|p| p.users == 4));
        assert!(run_scenario(&cfg, Scenario::KFixed, &[], &PrecoderKind::ALL)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn ber_csv_schema() {
        let cfg = single_cell(4, 10.0);
        let p = BerPoint {
            technique: PrecoderKind::Zf,
            antennas: 4,
            users: 4,
            csi_mode: CsiMode::Perfect,
            bit_errors: 3,
            bits: 12,
            drops: 1,
            rank_redraws: 0,
        };
        let mut buf = Vec::new();
        write_ber_csv(&mut buf, Scenario::KFixed, &cfg, &[p]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "technique,scenario,csi_mode,N,K,snr_dl_db,bits,bit_errors,ber,drops,seed\n\
             ZF,k-fixed,perfect,4,4,10,12,3,0.25,1,17\n"
        );
    }
}
