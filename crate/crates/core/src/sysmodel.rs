//! Scenario configuration, its validation, and the square M-QAM alphabet.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Downlink noise variance per real dimension. Fixed: noise is `CN(0, 1)`.
pub const NOISE_VAR_PER_DIM: f64 = 0.5;

/// How each base station obtains channel knowledge of its own users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiMode {
    /// The BS knows the true small-scale fading of its users.
    Perfect,
    /// Uplink training with thermal noise, other cells silent during pilots.
    NoisyNoContamination,
    /// Synchronous pilot reuse in all cells plus thermal noise.
    Contaminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecoderKind {
    Mf,
    Zf,
    Rzf,
    Mmse,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 4] = [Self::Mf, Self::Zf, Self::Rzf, Self::Mmse];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mf => "MF",
            Self::Zf => "ZF",
            Self::Rzf => "RZF",
            Self::Mmse => "MMSE",
        }
    }
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Perfect => "perfect",
            Self::NoisyNoContamination => "noisy-no-contamination",
            Self::Contaminated => "contaminated",
        }
    }
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CsiMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "perfect" => Ok(Self::Perfect),
            "noisy" | "noisy-no-contamination" | "noisynocontamination" => Ok(Self::NoisyNoContamination),
            "contaminated" => Ok(Self::Contaminated),
            other => Err(format!("unknown csi mode `{other}`")),
        }
    }
}

impl FromStr for PrecoderKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mf" => Ok(Self::Mf),
            "zf" => Ok(Self::Zf),
            "rzf" => Ok(Self::Rzf),
            "mmse" => Ok(Self::Mmse),
            other => Err(format!("unknown precoder `{other}`")),
        }
    }
}

/// RZF regularization: a fixed value or `N / 20`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RzfZeta {
    Auto,
    Fixed(f64),
}

impl RzfZeta {
    pub fn resolve(self, antennas: usize) -> f64 {
        match self {
            Self::Auto => antennas as f64 / 20.0,
            Self::Fixed(z) => z,
        }
    }
}

impl fmt::Display for RzfZeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(z) => write!(f, "{z}"),
        }
    }
}

impl FromStr for RzfZeta {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .map(Self::Fixed)
            .map_err(|e| format!("bad zeta `{s}`: {e}"))
    }
}

/// Every scenario parameter of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub bs_antennas: usize,
    pub modulation_order: u32,
    pub snr_dl_db: f64,
    pub snr_ul_db: f64,
    pub cell_radius_m: f64,
    pub exclusion_radius_m: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub csi_mode: CsiMode,
    pub precoder_kind: PrecoderKind,
    pub rzf_zeta: RzfZeta,
    pub frames_per_drop: usize,
    /// Channel uses sharing one fading block.
    pub symbols_per_frame: usize,
    pub num_drops: usize,
    /// Hard cap on drops when the error target is not reached.
    pub max_drops: usize,
    pub min_bit_errors: u64,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_cells: 4,
            users_per_cell: 4,
            bs_antennas: 100,
            modulation_order: 4,
            snr_dl_db: 10.0,
            snr_ul_db: 10.0,
            cell_radius_m: 1600.0,
            exclusion_radius_m: 100.0,
            pathloss_exponent: 3.8,
            shadowing_sigma_db: 8.0,
            csi_mode: CsiMode::Contaminated,
            precoder_kind: PrecoderKind::Mf,
            rzf_zeta: RzfZeta::Auto,
            frames_per_drop: 10,
            symbols_per_frame: 16,
            num_drops: 500,
            max_drops: 5000,
            min_bit_errors: 200,
            rng_seed: 1,
        }
    }
}

/// Config keys accepted by [`SystemConfig::set`], in canonical order.
pub const CONFIG_KEYS: [&str; 19] = [
    "num_cells",
    "users_per_cell",
    "bs_antennas",
    "modulation_order",
    "snr_dl_db",
    "snr_ul_db",
    "cell_radius_m",
    "exclusion_radius_m",
    "pathloss_exponent",
    "shadowing_sigma_db",
    "csi_mode",
    "precoder_kind",
    "rzf_zeta",
    "frames_per_drop",
    "symbols_per_frame",
    "num_drops",
    "max_drops",
    "min_bit_errors",
    "rng_seed",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| format!("`{key}`: cannot parse `{}`: {e}", value.trim()))
}

fn positive(name: &'static str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameter {
            name,
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("{v} is not finite"),
        });
    }
    Ok(())
}

impl SystemConfig {
    /// Set one field from its textual key/value form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key.trim() {
            "num_cells" => self.num_cells = parse_value(key, value)?,
            "users_per_cell" => self.users_per_cell = parse_value(key, value)?,
            "bs_antennas" => self.bs_antennas = parse_value(key, value)?,
            "modulation_order" => self.modulation_order = parse_value(key, value)?,
            "snr_dl_db" => self.snr_dl_db = parse_value(key, value)?,
            "snr_ul_db" => self.snr_ul_db = parse_value(key, value)?,
            "cell_radius_m" => self.cell_radius_m = parse_value(key, value)?,
            "exclusion_radius_m" => self.exclusion_radius_m = parse_value(key, value)?,
            "pathloss_exponent" => self.pathloss_exponent = parse_value(key, value)?,
            "shadowing_sigma_db" => self.shadowing_sigma_db = parse_value(key, value)?,
            "csi_mode" => self.csi_mode = parse_value(key, value)?,
            "precoder_kind" => self.precoder_kind = parse_value(key, value)?,
            "rzf_zeta" => self.rzf_zeta = parse_value(key, value)?,
            "frames_per_drop" => self.frames_per_drop = parse_value(key, value)?,
            "symbols_per_frame" => self.symbols_per_frame = parse_value(key, value)?,
            "num_drops" => self.num_drops = parse_value(key, value)?,
            "max_drops" => self.max_drops = parse_value(key, value)?,
            "min_bit_errors" => self.min_bit_errors = parse_value(key, value)?,
            "rng_seed" => self.rng_seed = parse_value(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Apply `key = value` lines (with `#` comments) on top of `self`.
    pub fn apply_kv_str(mut self, text: &str) -> Result<Self> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: idx + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key, value)
                .map_err(|reason| Error::ConfigParse { line: idx + 1, reason })?;
        }
        Ok(self)
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        Self::default().apply_kv_str(text)
    }

    /// Render every key on one line, `key=value` separated by spaces.
    pub fn to_kv_line(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k}={}", self.get(k)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn get(&self, key: &str) -> String {
        match key {
            "num_cells" => self.num_cells.to_string(),
            "users_per_cell" => self.users_per_cell.to_string(),
            "bs_antennas" => self.bs_antennas.to_string(),
            "modulation_order" => self.modulation_order.to_string(),
            "snr_dl_db" => self.snr_dl_db.to_string(),
            "snr_ul_db" => self.snr_ul_db.to_string(),
            "cell_radius_m" => self.cell_radius_m.to_string(),
            "exclusion_radius_m" => self.exclusion_radius_m.to_string(),
            "pathloss_exponent" => self.pathloss_exponent.to_string(),
            "shadowing_sigma_db" => self.shadowing_sigma_db.to_string(),
            "csi_mode" => self.csi_mode.to_string(),
            "precoder_kind" => self.precoder_kind.to_string().to_ascii_lowercase(),
            "rzf_zeta" => self.rzf_zeta.to_string(),
            "frames_per_drop" => self.frames_per_drop.to_string(),
            "symbols_per_frame" => self.symbols_per_frame.to_string(),
            "num_drops" => self.num_drops.to_string(),
            "max_drops" => self.max_drops.to_string(),
            "min_bit_errors" => self.min_bit_errors.to_string(),
            "rng_seed" => self.rng_seed.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Check every scenario invariant; returns the config unchanged on success.
    pub fn validate(&self) -> Result<Self> {
        positive("num_cells", self.num_cells)?;
        positive("users_per_cell", self.users_per_cell)?;
        positive("bs_antennas", self.bs_antennas)?;
        positive("frames_per_drop", self.frames_per_drop)?;
        positive("symbols_per_frame", self.symbols_per_frame)?;
        positive("num_drops", self.num_drops)?;
        if self.bs_antennas < self.users_per_cell {
            return Err(Error::Underdetermined {
                antennas: self.bs_antennas,
                users: self.users_per_cell,
            });
        }
        ModulationSpec::new(self.modulation_order)?;
        for (name, v) in [
            ("snr_dl_db", self.snr_dl_db),
            ("snr_ul_db", self.snr_ul_db),
            ("cell_radius_m", self.cell_radius_m),
            ("exclusion_radius_m", self.exclusion_radius_m),
            ("pathloss_exponent", self.pathloss_exponent),
            ("shadowing_sigma_db", self.shadowing_sigma_db),
        ] {
            finite(name, v)?;
        }
        if self.cell_radius_m <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "cell_radius_m",
                reason: "must be positive".into(),
            });
        }
        if self.exclusion_radius_m < 0.0 || self.exclusion_radius_m >= self.cell_radius_m {
            return Err(Error::BadGeometry {
                radius_m: self.cell_radius_m,
                exclusion_m: self.exclusion_radius_m,
            });
        }
        if self.pathloss_exponent <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "pathloss_exponent",
                reason: "must be positive".into(),
            });
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err(Error::InvalidParameter {
                name: "shadowing_sigma_db",
                reason: "must be nonnegative".into(),
            });
        }
        if let RzfZeta::Fixed(z) = self.rzf_zeta {
            if !z.is_finite() || z < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "rzf_zeta",
                    reason: format!("{z} is not a finite nonnegative number"),
                });
            }
        }
        if self.max_drops < self.num_drops {
            return Err(Error::InvalidParameter {
                name: "max_drops",
                reason: format!("{} is below num_drops {}", self.max_drops, self.num_drops),
            });
        }
        Ok(self.clone())
    }

    /// RZF regularization for the configured antenna count.
    pub fn resolved_zeta(&self) -> f64 {
        self.rzf_zeta.resolve(self.bs_antennas)
    }

    /// Copy with a different array size and user count, revalidated.
    pub fn with_dims(&self, antennas: usize, users: usize) -> Result<Self> {
        let mut c = self.clone();
        c.bs_antennas = antennas;
        c.users_per_cell = users;
        c.validate()
    }

    pub fn snr_dl_linear(&self) -> f64 {
        db_to_linear(self.snr_dl_db)
    }

    pub fn snr_ul_linear(&self) -> f64 {
        db_to_linear(self.snr_ul_db)
    }

    pub fn modulation(&self) -> ModulationSpec {
        ModulationSpec::new(self.modulation_order).expect("validated modulation order")
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Square M-QAM with unit mean symbol energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSpec {
    pub order: u32,
    /// Spacing between adjacent amplitude levels, `sqrt(6 / (M - 1))`.
    pub amplitude_step: f64,
    pub bits_per_symbol: u32,
    /// Levels per real dimension, `sqrt(M)`.
    pub side: u32,
}

impl ModulationSpec {
    pub fn new(order: u32) -> Result<Self> {
        if order < 4 {
            return Err(Error::BadModulation(order));
        }
        let side = (order as f64).sqrt().round() as u32;
        if side * side != order || !side.is_power_of_two() {
            return Err(Error::BadModulation(order));
        }
        Ok(Self {
            order,
            amplitude_step: (6.0 / (order as f64 - 1.0)).sqrt(),
            bits_per_symbol: order.trailing_zeros(),
            side,
        })
    }

    pub fn bits_per_dim(&self) -> u32 {
        self.bits_per_symbol / 2
    }

    /// Real amplitude of level index `m`, ordered from the most positive.
    pub fn level(&self, m: u32) -> f64 {
        (self.side as f64 - 1.0 - 2.0 * m as f64) * self.amplitude_step / 2.0
    }

    /// The per-dimension alphabet, descending.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.side).map(|m| self.level(m)).collect()
    }

    /// All M points, I-major.
    pub fn constellation(&self) -> Vec<Complex64> {
        let lv = self.levels();
        lv.iter()
            .flat_map(|&i| lv.iter().map(move |&q| Complex64::new(i, q)))
            .collect()
    }
}

/// Validate the given modulation order and build its alphabet.
pub fn modulation_spec(order: u32) -> Result<ModulationSpec> {
    ModulationSpec::new(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_default() -> SystemConfig {
        SystemConfig {
            num_cells: 4,
            users_per_cell: 4,
            bs_antennas: 4,
            modulation_order: 4,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn accepts_default_scenario() {
        let cfg = paper_default();
        assert_eq!(cfg.validate().unwrap(), cfg);
    }

    #[test]
    fn rejects_underdetermined() {
        let cfg = SystemConfig {
            bs_antennas: 3,
            users_per_cell: 4,
            ..paper_default()
        };
        assert_eq!(cfg.validate(), Err(Error::Underdetermined { antennas: 3, users: 4 }));
    }

    #[test]
    fn rejects_bad_geometry_and_modulation() {
        let cfg = SystemConfig {
            exclusion_radius_m: 1600.0,
            ..paper_default()
        };
        assert!(matches!(cfg.validate(), Err(Error::BadGeometry { .. })));
        let cfg = SystemConfig {
            modulation_order: 8,
            ..paper_default()
        };
        assert_eq!(cfg.validate(), Err(Error::BadModulation(8)));
        let cfg = SystemConfig {
            num_drops: 0,
            ..paper_default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn auto_zeta_resolves_to_n_over_20() {
        let cfg = SystemConfig {
            bs_antennas: 100,
            rzf_zeta: RzfZeta::Auto,
            ..paper_default()
        };
        assert_eq!(cfg.validate().unwrap().resolved_zeta(), 5.0);
    }

    #[test]
    fn modulation_examples() {
        let m4 = modulation_spec(4).unwrap();
        assert!((m4.amplitude_step - 2f64.sqrt()).abs() < 1e-15);
        let pts = m4.constellation();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert!((p.re.abs() - 0.5f64.sqrt()).abs() < 1e-15);
            assert!((p.im.abs() - 0.5f64.sqrt()).abs() < 1e-15);
        }
        let m16 = modulation_spec(16).unwrap();
        assert!((m16.amplitude_step - 0.4f64.sqrt()).abs() < 1e-15);
        assert_eq!(modulation_spec(5), Err(Error::BadModulation(5)));
        assert_eq!(modulation_spec(1), Err(Error::BadModulation(1)));
    }

    #[test]
    fn kv_round_trip() {
        let cfg = SystemConfig {
            csi_mode: CsiMode::NoisyNoContamination,
            precoder_kind: PrecoderKind::Rzf,
            rzf_zeta: RzfZeta::Fixed(2.5),
            rng_seed: 99,
            ..SystemConfig::default()
        };
        let text = cfg.to_kv_line().replace(' ', "\n");
        let parsed = SystemConfig::from_kv_str(&format!("# header\n{text}\n")).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn kv_errors_carry_line_numbers() {
        let err = SystemConfig::from_kv_str("num_cells = 2\n\nbogus = 1").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 3, .. }));
        let err = SystemConfig::from_kv_str("num_cells 2").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 1, .. }));
    }

    proptest! {
        #[test]
        fn constellation_has_unit_energy(log_side in 1u32..=4) {
            let side = 1u32 << log_side;
            let spec = modulation_spec(side * side).unwrap();
            let pts = spec.constellation();
            prop_assert_eq!(pts.len() as u32, side * side);
            let n = pts.len() as f64;
            let mean: Complex64 = pts.iter().sum::<Complex64>() / n;
            let energy: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / n;
            prop_assert!(mean.norm() < 1e-12);
            prop_assert!((energy - 1.0).abs() < 1e-12);
        }

        #[test]
        fn validate_is_idempotent(n in 1usize..64, k in 1usize..64, l in 1usize..6) {
            let cfg = SystemConfig { bs_antennas: n, users_per_cell: k, num_cells: l, ..SystemConfig::default() };
            if let Ok(v) = cfg.validate() {
                prop_assert_eq!(v.validate().unwrap(), v);
            } else {
                prop_assert!(n < k);
            }
        }
    }
}
