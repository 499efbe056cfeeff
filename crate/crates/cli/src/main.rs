use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmimo_core::sysmodel::CONFIG_KEYS;
use mmimo_core::{PrecoderKind, Scenario, SystemConfig};

mod manifest;
mod sweep;

use manifest::{Experiment, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "mmimo", version, about = "Multi-cell massive MIMO downlink BER simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment family and write its CSV.
    Run(RunArgs),
    /// Write the user placement of one drop as CSV.
    Layout(LayoutArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    #[arg(long, default_value = "k-fixed")]
    scenario: Scenario,
    /// mf, zf, rzf, mmse or all; defaults to all unless precoder_kind is set.
    #[arg(long)]
    precoder: Option<String>,
    /// Array sizes, e.g. `4,16,64` or `4,8,...,512`.
    #[arg(long)]
    sweep: Option<String>,
    /// Gram-moment trials per array size.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct LayoutArgs {
    /// Drop index whose placement is written.
    #[arg(long, default_value_t = 0)]
    drop: u64,
    #[command(flatten)]
    common: CommonArgs,
}

/// Config file, output path and one flag per config key.
#[derive(Args, Debug)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "num_cells", visible_alias = "L")]
    num_cells: Option<String>,
    #[arg(long = "users_per_cell", visible_alias = "K")]
    users_per_cell: Option<String>,
    #[arg(long = "bs_antennas", visible_alias = "N")]
    bs_antennas: Option<String>,
    #[arg(long = "modulation_order", visible_alias = "M")]
    modulation_order: Option<String>,
    #[arg(long = "snr_dl_db")]
    snr_dl_db: Option<String>,
    #[arg(long = "snr_ul_db")]
    snr_ul_db: Option<String>,
    #[arg(long = "cell_radius_m")]
    cell_radius_m: Option<String>,
    #[arg(long = "exclusion_radius_m")]
    exclusion_radius_m: Option<String>,
    #[arg(long = "pathloss_exponent")]
    pathloss_exponent: Option<String>,
    #[arg(long = "shadowing_sigma_db")]
    shadowing_sigma_db: Option<String>,
    #[arg(long = "csi_mode")]
    csi_mode: Option<String>,
    #[arg(long = "precoder_kind")]
    precoder_kind: Option<String>,
    #[arg(long = "rzf_zeta")]
    rzf_zeta: Option<String>,
    #[arg(long = "frames_per_drop", visible_alias = "frames")]
    frames_per_drop: Option<String>,
    #[arg(long = "symbols_per_frame")]
    symbols_per_frame: Option<String>,
    #[arg(long = "num_drops", visible_alias = "drops")]
    num_drops: Option<String>,
    #[arg(long = "max_drops")]
    max_drops: Option<String>,
    #[arg(long = "min_bit_errors", visible_alias = "min-errors")]
    min_bit_errors: Option<String>,
    #[arg(long = "rng_seed", visible_alias = "seed")]
    rng_seed: Option<String>,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let values = [
            &self.num_cells,
            &self.users_per_cell,
            &self.bs_antennas,
            &self.modulation_order,
            &self.snr_dl_db,
            &self.snr_ul_db,
            &self.cell_radius_m,
            &self.exclusion_radius_m,
            &self.pathloss_exponent,
            &self.shadowing_sigma_db,
            &self.csi_mode,
            &self.precoder_kind,
            &self.rzf_zeta,
            &self.frames_per_drop,
            &self.symbols_per_frame,
            &self.num_drops,
            &self.max_drops,
            &self.min_bit_errors,
            &self.rng_seed,
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .filter_map(|(k, v)| v.as_deref().map(|v| (*k, v)))
            .collect()
    }

    /// Defaults, then the config file, then flags. Also returns the keys that
    /// were set explicitly by either source.
    fn resolve(&self) -> Result<(SystemConfig, Vec<String>), String> {
        let mut cfg = SystemConfig::default();
        let mut explicit = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg = cfg
                .apply_kv_str(&text)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            explicit.extend(config_file_keys(&text));
        }
        for (key, value) in self.overrides() {
            cfg.set(key, value).map_err(|e| format!("--{key}: {e}"))?;
            explicit.push(key.to_string());
        }
        Ok((cfg, explicit))
    }

    fn writer(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn config_file_keys(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.split('#').next()?.split_once('='))
        .map(|(k, _)| k.trim().to_string())
        .collect()
}

fn parse_techniques(arg: Option<&str>, cfg: &SystemConfig, explicit: &[String]) -> Result<Vec<PrecoderKind>, String> {
    match arg.map(|s| s.trim().to_ascii_lowercase()) {
        Some(s) if s == "all" => Ok(PrecoderKind::ALL.to_vec()),
        Some(s) => s.parse::<PrecoderKind>().map(|k| vec![k]).map_err(|e| e.to_string()),
        None if explicit.iter().any(|k| k == "precoder_kind") => Ok(vec![cfg.precoder_kind]),
        None => Ok(PrecoderKind::ALL.to_vec()),
    }
}

fn run(args: RunArgs) -> Result<(), String> {
    let (cfg, explicit) = args.common.resolve()?;
    let sweep = match &args.sweep {
        Some(s) => sweep::parse(s)?,
        None => vec![cfg.bs_antennas],
    };
    let techniques = parse_techniques(args.precoder.as_deref(), &cfg, &explicit)?;
    let manifest = RunManifest::new(
        cfg,
        &explicit,
        args.experiment,
        args.scenario,
        sweep,
        techniques,
        args.trials,
    )?;
    if let Some(n) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let mut out = args.common.writer().map_err(|e| e.to_string())?;
    manifest.execute(&mut out)?;
    out.flush().map_err(|e| e.to_string())?;
    if let Some(path) = &args.common.out {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn layout(args: LayoutArgs) -> Result<(), String> {
    let (cfg, _) = args.common.resolve()?;
    let cfg = cfg.validate().map_err(|e| e.to_string())?;
    let (placement, _) = mmimo_core::harness::drop_large_scale(&cfg, args.drop).map_err(|e| e.to_string())?;
    let mut out = args.common.writer().map_err(|e| e.to_string())?;
    placement.write_csv(&mut out).map_err(|e| e.to_string())?;
    out.flush().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Layout(a) => layout(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
