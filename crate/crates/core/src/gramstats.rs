//! Channel hardening: empirical moments of `Q = (1/N) H H^H` against their
//! closed forms.
//!
//! For `H` with i.i.d. `CN(0, 1)` entries the exact moments are
//! `E[q_ii] = 1`, `E[q_ii^2] = (N + 1)/N`, `E[q_ij] = 0` and
//! `E[|q_ij|^2] = 1/N` for `i != j`, so both `var(q_ii)` and `var(q_ij)`
//! equal `1/N`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::draw_small_scale;
use crate::linalg::{outer_gram, CMatrix};
use crate::rng::{Purpose, Streams};

/// Trials per independent random substream.
const TRIALS_PER_CHUNK: usize = 256;

/// `(1/N) H H^H`, exactly Hermitian.
pub fn gram_matrix(h: &CMatrix) -> CMatrix {
    let n = h.ncols() as f64;
    outer_gram(h) / Complex64::from(n)
}

/// Running central moments up to order four, mergeable in any grouping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.merge(&Moments {
            n: 1.0,
            mean: x,
            ..Default::default()
        });
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n, o.n);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d_n = d / n;
        let m2 = self.m2 + o.m2 + d * d_n * na * nb;
        let m3 = self.m3 + o.m3 + d * d_n * d_n * na * nb * (na - nb) + 3.0 * d_n * (na * o.m2 - nb * self.m2);
        let m4 = self.m4
            + o.m4
            + d * d_n * d_n * d_n * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * o.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * o.m3 - nb * self.m3);
        *self = Moments {
            n,
            mean: self.mean + d_n * nb,
            m2,
            m3,
            m4,
        };
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        self.m2 / (self.n - 1.0)
    }

    /// Fourth central moment (biased).
    pub fn central4(&self) -> f64 {
        self.m4 / self.n
    }

    /// 3-sigma half-width of the sample mean.
    pub fn mean_ci3(&self) -> f64 {
        3.0 * (self.variance() / self.n).sqrt()
    }

    /// 3-sigma half-width of the sample variance, from the fourth moment.
    pub fn variance_ci3(&self) -> f64 {
        let m2 = self.m2 / self.n;
        3.0 * ((self.central4() - m2 * m2).max(0.0) / self.n).sqrt()
    }
}

/// An estimate together with its 3-sigma confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci3: f64,
}

impl Estimate {
    pub fn covers(&self, truth: f64) -> bool {
        (self.value - truth).abs() <= self.ci3
    }
}

/// Statistics of the off-diagonal entries, pooled over `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffDiagStats {
    pub mean_re: Estimate,
    pub mean_im: Estimate,
    pub mean_sqmag: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramStats {
    pub antennas: usize,
    pub users: usize,
    pub trials: usize,
    pub mean_diag: Estimate,
    pub mean_diag_sq: Estimate,
    pub var_diag: Estimate,
    /// `None` when there is a single user.
    pub offdiag: Option<OffDiagStats>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    diag: Moments,
    diag_sq: Moments,
    off_re: Moments,
    off_im: Moments,
    off_sq: Moments,
}

impl Accum {
    fn push_gram(&mut self, q: &CMatrix) {
        let k = q.nrows();
        for i in 0..k {
            let d = q[(i, i)].re;
            self.diag.push(d);
            self.diag_sq.push(d * d);
            for j in (i + 1)..k {
                let z = q[(i, j)];
                self.off_re.push(z.re);
                self.off_im.push(z.im);
                self.off_sq.push(z.norm_sqr());
            }
        }
    }

    fn merge(mut self, o: &Accum) -> Accum {
        self.diag.merge(&o.diag);
        self.diag_sq.merge(&o.diag_sq);
        self.off_re.merge(&o.off_re);
        self.off_im.merge(&o.off_im);
        self.off_sq.merge(&o.off_sq);
        self
    }
}

/// Merge partial accumulators pairwise in a fixed order.
fn pairwise_merge(parts: &[Accum]) -> Accum {
    match parts.len() {
        0 => Accum::default(),
        1 => parts[0],
        n => {
            let (a, b) = parts.split_at(n / 2);
            pairwise_merge(a).merge(&pairwise_merge(b))
        }
    }
}

fn estimate(m: &Moments) -> Estimate {
    Estimate {
        value: m.mean,
        ci3: m.mean_ci3(),
    }
}

/// Monte-Carlo moments of `Q` over `trials` independent `K x N` draws.
///
/// Trials are split into fixed chunks with their own substreams, so the result
/// is identical for any number of worker threads.
pub fn estimate_gram_moments(antennas: usize, users: usize, trials: usize, seed: u64) -> GramStats {
    let streams = Streams::new(seed);
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
    let parts: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = streams.stream(Purpose::Gram, c as u64, (antennas * 65_536 + users) as u64);
            let count = TRIALS_PER_CHUNK.min(trials - c * TRIALS_PER_CHUNK);
            let mut acc = Accum::default();
            for _ in 0..count {
                let h = draw_small_scale(&mut rng, users, antennas);
                acc.push_gram(&gram_matrix(&h));
            }
            acc
        })
        .collect();
    let acc = pairwise_merge(&parts);
    GramStats {
        antennas,
        users,
        trials,
        mean_diag: estimate(&acc.diag),
        mean_diag_sq: estimate(&acc.diag_sq),
        var_diag: Estimate {
            value: acc.diag.variance(),
            ci3: acc.diag.variance_ci3(),
        },
        offdiag: (users > 1).then(|| OffDiagStats {
            mean_re: estimate(&acc.off_re),
            mean_im: estimate(&acc.off_im),
            mean_sqmag: estimate(&acc.off_sq),
        }),
    }
}

/// Exact moments of `Q` for `N` antennas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormMoments {
    pub mean_diag: f64,
    pub mean_diag_sq: f64,
    pub mean_offdiag: f64,
    pub mean_offdiag_sqmag: f64,
    pub var_diag: f64,
    pub var_offdiag: f64,
}

pub fn closed_form_moments(antennas: usize) -> ClosedFormMoments {
    let n = antennas as f64;
    ClosedFormMoments {
        mean_diag: 1.0,
        mean_diag_sq: (n + 1.0) / n,
        mean_offdiag: 0.0,
        mean_offdiag_sqmag: 1.0 / n,
        var_diag: 1.0 / n,
        var_offdiag: 1.0 / n,
    }
}

impl GramStats {
    /// `(statistic, empirical, closed_form, ci3sigma)` rows.
    pub fn rows(&self) -> Vec<(&'static str, f64, f64, f64)> {
        let cf = closed_form_moments(self.antennas);
        let mut rows = vec![
            ("mean_diag", self.mean_diag.value, cf.mean_diag, self.mean_diag.ci3),
            (
                "mean_diag_sq",
                self.mean_diag_sq.value,
                cf.mean_diag_sq,
                self.mean_diag_sq.ci3,
            ),
            ("var_diag", self.var_diag.value, cf.var_diag, self.var_diag.ci3),
        ];
        if let Some(off) = &self.offdiag {
            rows.push(("mean_offdiag_re", off.mean_re.value, cf.mean_offdiag, off.mean_re.ci3));
            rows.push(("mean_offdiag_im", off.mean_im.value, cf.mean_offdiag, off.mean_im.ci3));
            rows.push((
                "mean_offdiag_sqmag",
                off.mean_sqmag.value,
                cf.mean_offdiag_sqmag,
                off.mean_sqmag.ci3,
            ));
        }
        rows
    }
}

/// Write `N,statistic,empirical,closed_form,ci3sigma` rows for each result.
pub fn write_gram_csv<W: Write>(out: W, stats: &[GramStats]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "statistic", "empirical", "closed_form", "ci3sigma"])?;
    for s in stats {
        for (name, emp, cf, ci) in s.rows() {
            w.write_record([
                s.antennas.to_string(),
                name.to_string(),
                emp.to_string(),
                cf.to_string(),
                ci.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
