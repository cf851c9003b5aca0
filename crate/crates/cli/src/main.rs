mod overrides;
mod plots;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use hydrodiag_core::error::from_json;
use hydrodiag_core::harness::{
    calibrate_all, calibration_scenario, calibration_seed, default_template, monte_carlo_false_alarms,
    monte_carlo_with_calibration, run_scenario, simulate,
};
use hydrodiag_core::io::{write_frames_csv, write_json, write_run_dir};
use hydrodiag_core::{Calibration, DetectionMode, DetectorSettings, Error, Scenario};
use hydrodiag_service::{serve, HostConfig, SessionHost};

use overrides::{apply, Override};

#[derive(Debug, Parser)]
#[command(name = "hydrodiag", version, about = "Fault detection for the three-tank benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write plant.csv.
    Simulate(Common),
    /// Learn thresholds and fuzzy partitions; writes calibration.json.
    Calibrate(Common),
    /// Run the diagnosis chain; writes logs, verdicts and plots.
    Detect(Common),
    /// Monte-Carlo false-alarm comparison of both detection modes.
    Experiment(Common),
    /// Run the session service (port from HYDRODIAG_PORT, default 8700).
    Serve(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON. Optional for `experiment` and `serve`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "hybrid", value_parser = parse_mode)]
    mode: DetectionMode,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Scenario seed, or the base seed for `experiment`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a scenario field (`params.r12=1400`) or a detector setting (`detector.k=1.2`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<Override>,
    #[arg(long)]
    no_plots: bool,
    /// Use a stored calibration instead of calibrating.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<DetectionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))
}

impl Common {
    /// `--seed` sets the scenario seed unless the caller uses it otherwise.
    fn scenario(&self, required: bool, seed_is_scenario: bool) -> Outcome<Scenario> {
        let mut doc = match &self.scenario {
            Some(path) => serde_json::from_str::<Value>(&read(path)?)
                .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?,
            None if required => return Err(Failure::Validation("--scenario is required".into())),
            None => serde_json::to_value(default_template::<f64>()).expect("template serializes"),
        };
        for o in self.set.iter().filter(|o| o.detector().is_none()) {
            apply(&mut doc, &o.path, o.value.clone()).map_err(Failure::Validation)?;
        }
        if let (Some(seed), true) = (self.seed, seed_is_scenario) {
            doc["seed"] = seed.into();
        }
        let scenario: Scenario = from_json(&doc.to_string())?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn settings(&self) -> Outcome<DetectorSettings> {
        let mut doc = serde_json::to_value(DetectorSettings::default()).expect("settings serialize");
        for o in &self.set {
            if let Some(path) = o.detector() {
                apply(&mut doc, path, o.value.clone()).map_err(Failure::Validation)?;
            }
        }
        let settings: DetectorSettings = from_json(&doc.to_string())?;
        settings.validate()?;
        Ok(settings)
    }

    fn stored_calibration(&self) -> Outcome<Option<Calibration>> {
        match &self.calibration {
            Some(path) => Ok(Some(Calibration::from_json(&read(path)?)?)),
            None => Ok(None),
        }
    }

    fn calibrate(&self, scenario: &Scenario, settings: &DetectorSettings) -> Outcome<Calibration> {
        if let Some(cal) = self.stored_calibration()? {
            return Ok(cal);
        }
        let run = calibration_scenario(scenario, settings, calibration_seed(scenario.seed));
        Ok(calibrate_all(&run, settings)?)
    }

    fn out_dir(&self) -> Outcome<&Path> {
        fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn simulate_cmd(c: &Common) -> Outcome {
    let scenario = c.scenario(true, true)?;
    let (frames, failure) = simulate(&scenario);
    let path = c.out_dir()?.join("plant.csv");
    let file = fs::File::create(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    write_frames_csv(file, &frames)?;
    println!("wrote {} samples to {}", frames.len(), path.display());
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn calibrate_cmd(c: &Common) -> Outcome {
    let scenario = c.scenario(true, true)?;
    let settings = c.settings()?;
    let cal = c.calibrate(&scenario, &settings)?;
    let path = c.out_dir()?.join("calibration.json");
    write_json(&path, &cal)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn detect_cmd(c: &Common) -> Outcome {
    let scenario = c.scenario(true, true)?;
    let settings = c.settings()?;
    let cal = c.calibrate(&scenario, &settings)?;
    let log = run_scenario(&scenario, &cal, &settings, c.mode)?;
    let dir = c.out_dir()?;
    write_run_dir(dir, &log)?;
    if !c.no_plots {
        write_text(&dir.join("residuals.svg"), &plots::residuals_svg(&log.outputs))?;
        if let (Some(vars), Some(last)) = (log.last_variables(), log.outputs.last()) {
            write_text(&dir.join("causal_graph.svg"), &plots::causal_graph_svg(&vars, last.t))?;
        }
    }
    println!("verdict: {}", log.verdict());
    match log.first_confirmation(c.mode) {
        Some(t) => println!("first confirmation at t = {t} s"),
        None => println!("no confirmed residual"),
    }
    match log.failure {
        Some(f) => Err(Failure::Runtime(f)),
        None => Ok(()),
    }
}

fn experiment_cmd(c: &Common) -> Outcome {
    let template = c.scenario(false, false)?;
    let settings = c.settings()?;
    let seed = c.seed.unwrap_or(0);
    let report = match c.stored_calibration()? {
        Some(cal) => monte_carlo_with_calibration(&template, &cal, &settings, c.runs, seed)?,
        None => monte_carlo_false_alarms(&template, &settings, c.runs, seed)?,
    };
    let dir = c.out_dir()?;
    write_json(&dir.join("report.json"), &report)?;
    if !c.no_plots {
        write_text(&dir.join("false_alarms.svg"), &plots::false_alarms_svg(&report))?;
    }
    println!(
        "false alarms over {} runs: threshold-only {:.1}%, hybrid {:.1}%, reduction {}",
        report.n_runs, report.p_threshold_only, report.p_hybrid, report.reduction
    );
    Ok(())
}

fn serve_cmd(c: &Common) -> Outcome {
    let settings = c.settings()?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    let host = SessionHost::new(HostConfig {
        settings,
        ..HostConfig::default()
    });
    runtime
        .block_on(serve(host))
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => simulate_cmd(c),
        Command::Calibrate(c) => calibrate_cmd(c),
        Command::Detect(c) => detect_cmd(c),
        Command::Experiment(c) => experiment_cmd(c),
        Command::Serve(c) => serve_cmd(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
