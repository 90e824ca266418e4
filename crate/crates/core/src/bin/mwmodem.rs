use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mwmodem::config::ExperimentConfig;
use mwmodem::experiment::{self, ExperimentError};

#[derive(Parser)]
#[command(name = "mwmodem", version, about = "Matterwave modulation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; missing keys take reference values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Contrast versus Wien voltage.
    WienCurve,
    /// Send a message through the simulated link and decode it.
    Transmit {
        #[arg(long)]
        message: Option<String>,
    },
    /// Contrast profile above a decohering surface.
    SurfaceScan,
    /// Key distribution session with optional eavesdropper.
    Keydist,
    /// Print the shift combination table.
    Table,
    /// Fit the fringe model to an events file or a simulated frame.
    Fit {
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

// stdout may be a closed pipe (`mwmodem table | head`); that is not an error
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    match &cli.command {
        Command::Transmit { message: Some(m) } => cfg.transmit.message = m.clone(),
        Command::Fit { events: Some(e) } => cfg.fit.events = Some(e.clone()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(files: &[PathBuf]) {
    for f in files {
        say!("wrote {}", f.display());
    }
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    let cfg = load(cli)?;
    let dir = &cfg.output_dir;
    match &cli.command {
        Command::WienCurve => {
            let out = experiment::wien_curve(&cfg)?;
            let s = &out.summary;
            say!("matched voltage {:.2} V, FWHM {:.2} V", s.matched_voltage, s.fwhm_volts);
            say!(
                "high {:.1} V -> C = {:.3}, low {:.1} V -> C = {:.3}",
                s.high_voltage,
                s.high_contrast,
                s.low_voltage,
                s.low_contrast
            );
            report(&out.write(dir)?);
        }
        Command::Transmit { .. } => {
            let out = experiment::transmit(&cfg)?;
            report(&out.write(dir)?);
            say!("link: {:?}, {} bins", out.summary.link, out.summary.bins);
            let d = out.decoded?;
            say!("decoded: {}", d.text);
        }
        Command::SurfaceScan => {
            let out = experiment::surface_scan(&cfg)?;
            let f = &out.summary.fitted_profile;
            say!(
                "fitted h0 = {:.3} µm, p = {:.2}, max deviation {:.3}",
                f.scale_height * 1e6,
                f.exponent,
                out.summary.max_deviation
            );
            report(&out.write(dir)?);
        }
        Command::Keydist => {
            let out = experiment::keydist(&cfg)?;
            let r = &out.summary.result;
            say!(
                "{} rounds, {} sifted, {} disclosed, {} mismatches, eavesdropper detected: {}",
                r.rounds,
                r.sifted,
                r.disclosed,
                r.mismatches,
                r.eavesdropper_detected
            );
            report(&out.write(dir)?);
        }
        Command::Table => {
            let out = experiment::table();
            let _ = write!(std::io::stdout(), "{}", out.rendered);
            report(&out.write(dir)?);
        }
        Command::Fit { .. } => {
            let out = experiment::fit(&cfg)?;
            let f = &out.summary.fit;
            say!("C = {:.4}, period {:.4}, converged {}", f.contrast, f.period, f.converged);
            report(&out.write(dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 3 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
