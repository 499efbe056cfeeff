//! Linear downlink precoders: MF, ZF, RZF and single-cell MMSE.
//!
//! Every precoder is the unnormalized matrix `B` scaled by `1/sqrt(gamma)`
//! with `gamma = trace(B^H B) / K`, so `trace(P^H P) = K` for all kinds.
//! For MF this is `trace(H^H H)/K`; for ZF it is `trace((H H^H)^-1)/K`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frob_sq, hermitian_solve, is_rank_deficient, outer_gram, CMatrix};
use crate::sysmodel::PrecoderKind;

#[derive(Debug, Clone)]
pub struct Precoder {
    /// `N x K` precoding matrix.
    pub matrix: CMatrix,
    pub gamma: f64,
    pub kind: PrecoderKind,
    /// Regularization, zero for MF and ZF.
    pub zeta: f64,
}

fn normalize(unnormalized: CMatrix, kind: PrecoderKind, zeta: f64) -> Result<Precoder> {
    let users = unnormalized.ncols() as f64;
    let gamma = frob_sq(&unnormalized) / users;
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(Precoder {
        matrix: unnormalized / Complex64::from(gamma.sqrt()),
        gamma,
        kind,
        zeta,
    })
}

/// Conjugate beamforming, `P = H^H / sqrt(gamma)`.
pub fn mf_precoder(h_hat: &CMatrix) -> Result<Precoder> {
    normalize(h_hat.adjoint(), PrecoderKind::Mf, 0.0)
}

/// `H^H (H H^H + zeta I)^-1`, via a Cholesky solve of the `K x K` system.
fn regularized_inverse(h_hat: &CMatrix, zeta: f64) -> Result<CMatrix> {
    let mut gram = outer_gram(h_hat);
    if zeta == 0.0 && is_rank_deficient(&gram) {
        return Err(Error::RankDeficient);
    }
    for i in 0..gram.nrows() {
        gram[(i, i)] += zeta;
    }
    // (A)^-1 H solved as A X = H, then B = X^H since A is Hermitian
    let x = hermitian_solve(&gram, h_hat).ok_or(Error::RankDeficient)?;
    Ok(x.adjoint())
}

/// Pseudo-inverse beamforming; `H P = I / sqrt(gamma)`.
pub fn zf_precoder(h_hat: &CMatrix) -> Result<Precoder> {
    normalize(regularized_inverse(h_hat, 0.0)?, PrecoderKind::Zf, 0.0)
}

pub fn rzf_precoder(h_hat: &CMatrix, zeta: f64) -> Result<Precoder> {
    rzf_with_kind(h_hat, zeta, PrecoderKind::Rzf)
}

fn rzf_with_kind(h_hat: &CMatrix, zeta: f64, kind: PrecoderKind) -> Result<Precoder> {
    if zeta.is_nan() || zeta < 0.0 {
        return Err(Error::InvalidParameter {
            name: "zeta",
            reason: format!("{zeta} is negative"),
        });
    }
    normalize(regularized_inverse(h_hat, zeta)?, kind, zeta)
}

/// Single-cell MMSE regularization `K sigma_n^2 / (2 SNR log2 M)`, SNR linear.
pub fn mmse_zeta(users: usize, noise_var_per_dim: f64, snr_dl_linear: f64, order: u32) -> f64 {
    users as f64 * noise_var_per_dim / (2.0 * snr_dl_linear * (order as f64).log2())
}

pub fn mmse_precoder(h_hat: &CMatrix, noise_var_per_dim: f64, snr_dl_linear: f64, order: u32) -> Result<Precoder> {
    let zeta = mmse_zeta(h_hat.nrows(), noise_var_per_dim, snr_dl_linear, order);
    rzf_with_kind(h_hat, zeta, PrecoderKind::Mmse)
}

/// Parameters that select the regularization of each precoder kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecoderParams {
    pub rzf_zeta: f64,
    pub noise_var_per_dim: f64,
    pub snr_dl_linear: f64,
    pub modulation_order: u32,
}

pub fn build_precoder(kind: PrecoderKind, h_hat: &CMatrix, params: &PrecoderParams) -> Result<Precoder> {
    match kind {
        PrecoderKind::Mf => mf_precoder(h_hat),
        PrecoderKind::Zf => zf_precoder(h_hat),
        PrecoderKind::Rzf => rzf_precoder(h_hat, params.rzf_zeta),
        PrecoderKind::Mmse => mmse_precoder(
            h_hat,
            params.noise_var_per_dim,
            params.snr_dl_linear,
            params.modulation_order,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_normal_matrix;
    use crate::rng::{Purpose, Streams};
    use proptest::prelude::*;

    fn random(users: usize, antennas: usize, seed: u64) -> CMatrix {
        complex_normal_matrix(&mut Streams::new(seed).stream(Purpose::Test, 0, 0), users, antennas)
    }

    fn power(p: &Precoder) -> f64 {
        frob_sq(&p.matrix)
    }

    fn direction(m: &CMatrix) -> CMatrix {
        m / Complex64::from(m.norm())
    }

    #[test]
    fn mf_identity_channel() {
        let eye = CMatrix::identity(3, 3);
        let p = mf_precoder(&eye).unwrap();
        assert_eq!(p.gamma, 1.0);
        assert!((&p.matrix - &eye).norm() < 1e-15);
        let p2 = mf_precoder(&(eye.clone() * Complex64::from(2.0))).unwrap();
        assert_eq!(p2.gamma, 4.0);
        assert!((&p2.matrix - &eye).norm() < 1e-15);
    }

    #[test]
    fn mf_random_is_normalized_conjugate() {
        let h = random(2, 3, 1);
        let p = mf_precoder(&h).unwrap();
        assert!((power(&p) - 2.0).abs() < 1e-9);
        let gamma = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0;
        assert!((&p.matrix * Complex64::from(gamma.sqrt()) - h.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn zf_examples() {
        let eye = CMatrix::identity(4, 4);
        let p = zf_precoder(&eye).unwrap();
        assert!((p.gamma - 1.0).abs() < 1e-15);
        assert!((&p.matrix - &eye).norm() < 1e-12);

        let h = random(4, 9, 2);
        let p = zf_precoder(&h).unwrap();
        let hp = &h * &p.matrix * Complex64::from(p.gamma.sqrt());
        assert!((hp - CMatrix::identity(4, 4)).norm() < 1e-9);
        // gamma equals trace((H H^H)^-1)/K
        let inv = (&h * h.adjoint()).try_inverse().unwrap();
        assert!((p.gamma - inv.trace().re / 4.0).abs() < 1e-10 * p.gamma);
    }

    #[test]
    fn zf_rank_deficient() {
        let mut h = random(3, 5, 3);
        let r = h.row(0).into_owned();
        h.row_mut(1).copy_from(&r);
        assert!(matches!(zf_precoder(&h), Err(Error::RankDeficient)));
        assert!(matches!(rzf_precoder(&h, 0.0), Err(Error::RankDeficient)));
        // regularization makes the same channel usable
        assert!(rzf_precoder(&h, 0.5).is_ok());
    }

    #[test]
    fn zero_channel() {
        assert!(matches!(mf_precoder(&CMatrix::zeros(2, 3)), Err(Error::ZeroChannel)));
    }

    #[test]
    fn rzf_limits() {
        let h = random(4, 8, 4);
        let zf = zf_precoder(&h).unwrap();
        let r0 = rzf_precoder(&h, 0.0).unwrap();
        assert!((&r0.matrix - &zf.matrix).norm() < 1e-10);
        assert!((r0.gamma - zf.gamma).abs() < 1e-10 * zf.gamma);

        let mf = mf_precoder(&h).unwrap();
        let big = rzf_precoder(&h, 1e8).unwrap();
        assert!((direction(&big.matrix) - direction(&mf.matrix)).norm() < 1e-3);
    }

    #[test]
    fn rzf_is_continuous_in_zeta() {
        let h = random(4, 6, 5);
        let a = rzf_precoder(&h, 1.0).unwrap();
        let b = rzf_precoder(&h, 1.0 + 1e-7).unwrap();
        assert!((&a.matrix - &b.matrix).norm() < 1e-5);
        let z = rzf_precoder(&h, 1e-12).unwrap();
        assert!((&z.matrix - &zf_precoder(&h).unwrap().matrix).norm() < 1e-6);
    }

    #[test]
    fn mmse_zeta_examples() {
        assert_eq!(mmse_zeta(4, 0.5, 10.0, 4), 0.05);
        assert_eq!(mmse_zeta(4, 0.5, 10.0, 16), mmse_zeta(4, 0.5, 10.0, 4) / 2.0);
        assert!(mmse_zeta(4, 0.5, 1e15, 4) < 1e-15);
        let h = random(4, 8, 6);
        let p = mmse_precoder(&h, 0.5, 10.0, 4).unwrap();
        assert_eq!(p.zeta, 0.05);
        assert_eq!(p.kind, PrecoderKind::Mmse);
    }

    #[test]
    fn negative_zeta_rejected() {
        let h = random(2, 4, 7);
        assert!(matches!(rzf_precoder(&h, -1.0), Err(Error::InvalidParameter { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_normalization(seed in 0u64..10_000, users in 1usize..6, extra in 0usize..8, zeta in 0.0f64..20.0) {
            let h = random(users, users + extra, seed);
            let params = PrecoderParams { rzf_zeta: zeta, noise_var_per_dim: 0.5, snr_dl_linear: 10.0, modulation_order: 4 };
            for kind in PrecoderKind::ALL {
                let p = build_precoder(kind, &h, &params).unwrap();
                prop_assert!((power(&p) - users as f64).abs() < 1e-9 * users as f64);
            }
        }

        #[test]
        fn mf_zf_scale_covariance(seed in 0u64..10_000, c in 0.01f64..100.0) {
            let h = random(3, 7, seed);
            let hc = &h * Complex64::from(c);
            for f in [mf_precoder, zf_precoder] {
                let a = f(&h).unwrap();
                let b = f(&hc).unwrap();
                prop_assert!((&a.matrix - &b.matrix).norm() < 1e-9);
            }
        }
    }
}
