//! A fully resolved run: config, experiment family, sweep and techniques.

use std::io::Write;

use chrono::{SecondsFormat, Utc};
use clap::ValueEnum;
use mmimo_core::asymptotics::write_floor_csv;
use mmimo_core::gramstats::{estimate_gram_moments, write_gram_csv};
use mmimo_core::harness::{floor_reference, run_scenario, write_ber_csv};
use mmimo_core::{CsiMode, PrecoderKind, Scenario, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    #[value(name = "single-cell-perfect")]
    SingleCellPerfect,
    #[value(name = "multicell-perfect")]
    MultiCellPerfect,
    #[value(name = "multicell-noisy-csi")]
    MultiCellNoisyCsi,
    #[value(name = "multicell-contaminated")]
    MultiCellContaminated,
    #[value(name = "gram-moments")]
    GramMoments,
    #[value(name = "asymptotic-floor")]
    AsymptoticFloor,
}

impl Experiment {
    fn name(self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }

    fn required_csi(self) -> Option<CsiMode> {
        match self {
            Self::SingleCellPerfect | Self::MultiCellPerfect => Some(CsiMode::Perfect),
            Self::MultiCellNoisyCsi => Some(CsiMode::NoisyNoContamination),
            Self::MultiCellContaminated => Some(CsiMode::Contaminated),
            Self::GramMoments | Self::AsymptoticFloor => None,
        }
    }

    fn is_multicell(self) -> bool {
        matches!(
            self,
            Self::MultiCellPerfect | Self::MultiCellNoisyCsi | Self::MultiCellContaminated
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: SystemConfig,
    pub experiment: Experiment,
    pub scenario: Scenario,
    pub sweep: Vec<usize>,
    pub techniques: Vec<PrecoderKind>,
    pub trials: usize,
    pub timestamp: String,
}

fn users_at(scenario: Scenario, cfg: &SystemConfig, n: usize) -> usize {
    match scenario {
        Scenario::NEqualsK => n,
        Scenario::KFixed => cfg.users_per_cell,
    }
}

impl RunManifest {
    /// Fill in what the experiment implies and reject contradictory settings.
    /// `explicit` lists config keys set by the user.
    pub fn new(
        mut config: SystemConfig,
        explicit: &[String],
        experiment: Experiment,
        scenario: Scenario,
        sweep: Vec<usize>,
        techniques: Vec<PrecoderKind>,
        trials: usize,
    ) -> Result<Self, String> {
        let is_explicit = |key: &str| explicit.iter().any(|k| k == key);
        if let Some(mode) = experiment.required_csi() {
            if is_explicit("csi_mode") && config.csi_mode != mode {
                return Err(format!(
                    "experiment {} requires csi_mode={mode}, got {}",
                    experiment.name(),
                    config.csi_mode
                ));
            }
            config.csi_mode = mode;
        }
        if experiment == Experiment::SingleCellPerfect {
            if is_explicit("num_cells") && config.num_cells != 1 {
                return Err(format!(
                    "single-cell-perfect requires num_cells=1, got {}",
                    config.num_cells
                ));
            }
            config.num_cells = 1;
        }
        if experiment.is_multicell() && config.num_cells < 2 {
            return Err(format!("{} requires num_cells > 1", experiment.name()));
        }
        if sweep.is_empty() {
            return Err("empty sweep".into());
        }
        if experiment == Experiment::GramMoments {
            if trials < 2 {
                return Err("gram-moments needs at least 2 trials".into());
            }
            config.validate().map_err(|e| e.to_string())?;
        } else {
            for &n in &sweep {
                config
                    .with_dims(n, users_at(scenario, &config, n))
                    .map_err(|e| format!("sweep point N={n}: {e}"))?;
            }
        }
        if techniques.is_empty() {
            return Err("no precoder selected".into());
        }
        Ok(Self {
            config,
            experiment,
            scenario,
            sweep,
            techniques,
            trials,
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        })
    }

    /// The comment line describing everything that determines the output.
    pub fn describe(&self) -> String {
        let sweep: Vec<String> = self.sweep.iter().map(|n| n.to_string()).collect();
        let techniques: Vec<&str> = self.techniques.iter().map(|t| t.as_str()).collect();
        format!(
            "experiment={} scenario={} precoder={} sweep={} trials={} {}",
            self.experiment.name(),
            self.scenario,
            techniques.join(","),
            sweep.join(","),
            self.trials,
            self.config.to_kv_line()
        )
    }

    /// Write the two header comment lines and the experiment's CSV.
    pub fn execute<W: Write>(&self, out: &mut W) -> Result<(), String> {
        writeln!(out, "# generated {}", self.timestamp).map_err(|e| e.to_string())?;
        writeln!(out, "# {}", self.describe()).map_err(|e| e.to_string())?;
        let cfg = &self.config;
        match self.experiment {
            Experiment::GramMoments => {
                let stats: Vec<_> = self
                    .sweep
                    .iter()
                    .map(|&n| estimate_gram_moments(n, cfg.users_per_cell, self.trials, cfg.rng_seed))
                    .collect();
                write_gram_csv(out, &stats).map_err(|e| e.to_string())
            }
            Experiment::AsymptoticFloor => {
                let n = *self.sweep.last().expect("nonempty sweep");
                let point = cfg
                    .with_dims(n, users_at(self.scenario, cfg, n))
                    .map_err(|e| e.to_string())?;
                let rows = floor_reference(&point, cfg.num_drops as u64).map_err(|e| e.to_string())?;
                write_floor_csv(out, &rows).map_err(|e| e.to_string())
            }
            _ => {
                let points =
                    run_scenario(cfg, self.scenario, &self.sweep, &self.techniques).map_err(|e| e.to_string())?;
                write_ber_csv(out, self.scenario, cfg, &points).map_err(|e| e.to_string())
            }
        }
    }
}
