use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualpol_mimo::experiments::{
    run_cdf, run_m_sweep, run_xpd_sweep, sidecar_path, validate, write_outputs, RunMetadata, SystemConfig,
};
use dualpol_mimo::Result;

#[derive(Parser)]
#[command(name = "dualpol", version, about = "Dual-polarized massive MIMO downlink SE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sum SE against the number of BS ports.
    MSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated port counts.
        #[arg(long, value_delimiter = ',', default_values_t = [20, 30, 40, 50, 60, 70, 80, 90, 100])]
        m_values: Vec<usize>,
    },
    /// Per-UE SE samples across drops.
    Cdf {
        #[command(flatten)]
        common: Common,
    },
    /// Sum SE against XPD; `inf` removes polarization leakage.
    XpdSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [f64::INFINITY, 7.0, 0.0])]
        xpd_values: Vec<f64>,
        /// Comma-separated port counts; the configured M when absent.
        #[arg(long, value_delimiter = ',')]
        m_values: Vec<usize>,
    },
    /// Run the invariant battery and report pass/fail.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per drop.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    drops: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<SystemConfig> {
        let mut cfg = match &self.config {
            Some(p) => SystemConfig::load(p)?,
            None => SystemConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.mc_trials = t;
        }
        if let Some(d) = self.drops {
            cfg.drops = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (label, common, rows) = match &cli.command {
        Command::MSweep { common, m_values } => {
            let cfg = common.config()?;
            ("m_sweep", common, run_m_sweep(&cfg, m_values)?)
        }
        Command::Cdf { common } => {
            let cfg = common.config()?;
            ("cdf", common, run_cdf(&cfg)?)
        }
        Command::XpdSweep { common, xpd_values, m_values } => {
            let cfg = common.config()?;
            let ms = if m_values.is_empty() { vec![cfg.m] } else { m_values.clone() };
            ("xpd_sweep", common, run_xpd_sweep(&cfg, &ms, xpd_values)?)
        }
        Command::Validate { common } => {
            let cfg = common.config()?;
            let report = validate(&cfg);
            print!("{}", report.to_text());
            let out = common.out("validation.csv");
            report.write_csv(std::io::BufWriter::new(std::fs::File::create(&out)?))?;
            let meta = serde_json::to_string_pretty(&RunMetadata::new("validate", &cfg)).expect("metadata serializes");
            std::fs::write(sidecar_path(&out), meta + "\n")?;
            return Ok(report.passed());
        }
    };
    let cfg = common.config()?;
    let out = common.out(&format!("{label}.csv"));
    write_outputs(&rows, &out, &RunMetadata::new(label, &cfg))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
