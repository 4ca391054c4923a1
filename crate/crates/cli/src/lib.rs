//! `tractfit` subcommands. [`run`] parses arguments, does the work and returns
//! the process exit code: 0 success, 1 internal failure, 2 input error,
//! 3 no voiced content.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tractfit::estimation::experiment::{run_indomain_experiment, ExperimentOptions};
use tractfit::estimation::{GaSettings, GdSettings, PsoSettings};
use tractfit::iaif::{IaifConfig, DEFAULT_TRACT_ORDER};
use tractfit::io::{read_track, read_wav, write_json, write_text_atomic, write_track, write_wav};
use tractfit::pipeline::{
    match_audio, resynthesize, MatchSettings, Optimizer, ParameterTrack, SmoothingSettings,
    BASELINE_SMOOTHING,
};
use tractfit::tract::{AreaFunction, SimulationConfig};
use tractfit::transfer::{controls_response, FrequencyGrid, LossConfig, DEFAULT_GRID_SIZE};
use tractfit::{Error, SAMPLE_RATE};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NO_VOICE: u8 = 3;

/// Environment variable read when `--seed` is not given.
pub const SEED_ENV: &str = "TRACTFIT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "tractfit",
    version,
    about = "Estimate vocal tract controls from vowel recordings and resynthesize them"
)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a parameter track to a WAV file.
    Match(MatchArgs),
    /// Render a parameter track to a WAV file.
    Synth(SynthArgs),
    /// Run the synthetic recovery experiment and print its table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Gd,
    Ga,
    Pso,
}

impl From<OptimizerArg> for Optimizer {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Gd => Optimizer::Gd,
            OptimizerArg::Ga => Optimizer::Ga,
            OptimizerArg::Pso => Optimizer::Pso,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Gradient descent steps per start.
    #[arg(long, default_value_t = GdSettings::default().steps)]
    pub steps: usize,
    /// Gradient descent step size in normalized control units.
    #[arg(long, default_value_t = GdSettings::default().step_size)]
    pub lr: f64,
    #[arg(long, default_value_t = GdSettings::default().momentum)]
    pub momentum: f64,
    /// Free constrictions in the fitted tract.
    #[arg(long, default_value_t = GdSettings::default().num_free_constrictions)]
    pub constrictions: usize,
    /// Descend only from the first start point.
    #[arg(long)]
    pub single_start: bool,
    /// Frequencies in the loss grid.
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    /// All-pole order of the inverse filter's tract model.
    #[arg(long, default_value_t = DEFAULT_TRACT_ORDER)]
    pub tract_order: usize,
    /// Seed for every random choice [env: TRACTFIT_SEED, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

impl FitArgs {
    fn gd(&self) -> GdSettings {
        GdSettings {
            steps: self.steps,
            step_size: self.lr,
            momentum: self.momentum,
            num_free_constrictions: self.constrictions,
            multi_start: !self.single_start,
        }
    }

    fn grid(&self) -> Result<FrequencyGrid, Failure> {
        FrequencyGrid::new(self.grid_size).map_err(Failure::input)
    }

    fn iaif(&self) -> IaifConfig {
        IaifConfig {
            tract_order: self.tract_order,
            ..IaifConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    /// Input WAV (PCM or float; any rate; channels are averaged).
    #[arg(long = "in", value_name = "WAV")]
    pub input: PathBuf,
    /// Where to write the parameter track (JSON).
    #[arg(long, value_name = "JSON")]
    pub out_params: PathBuf,
    /// Also write the resynthesized audio.
    #[arg(long, value_name = "WAV")]
    pub out_audio: Option<PathBuf>,
    /// Write area-function and frequency-response CSVs into this directory.
    #[arg(long, value_name = "DIR")]
    pub plot_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Gd)]
    pub optimizer: OptimizerArg,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 100.0)]
    pub frames_per_second: f64,
    /// Analysis window length.
    #[arg(long, default_value_t = 40.0)]
    pub window_ms: f64,
    /// Frames this far below the loudest frame count as silence.
    #[arg(long, default_value_t = -50.0, allow_negative_numbers = true)]
    pub silence_db: f64,
    /// Fit every frame from the usual start points only.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Smooth the track over time (default for ga and pso).
    #[arg(long, conflicts_with = "no_smooth")]
    pub smooth: bool,
    /// Never smooth the track (default for gd).
    #[arg(long)]
    pub no_smooth: bool,
    /// Savitzky-Golay window in frames (odd).
    #[arg(long, default_value_t = BASELINE_SMOOTHING.window)]
    pub smooth_window: usize,
    /// Savitzky-Golay polynomial order.
    #[arg(long, default_value_t = BASELINE_SMOOTHING.order)]
    pub smooth_order: usize,
    #[arg(long, default_value_t = GaSettings::default().population)]
    pub population: usize,
    #[arg(long, default_value_t = GaSettings::default().generations)]
    pub generations: usize,
    #[arg(long, default_value_t = GaSettings::default().tournament)]
    pub tournament: usize,
    #[arg(long, default_value_t = GaSettings::default().mutation_sigma)]
    pub mutation_sigma: f64,
    #[arg(long, default_value_t = GaSettings::default().elitism)]
    pub elitism: usize,
    #[arg(long, default_value_t = PsoSettings::default().particles)]
    pub particles: usize,
    #[arg(long, default_value_t = PsoSettings::default().iterations)]
    pub iterations: usize,
    #[arg(long, default_value_t = PsoSettings::default().inertia)]
    pub inertia: f64,
    #[arg(long, default_value_t = PsoSettings::default().cognitive)]
    pub cognitive: f64,
    #[arg(long, default_value_t = PsoSettings::default().social)]
    pub social: f64,
}

impl MatchArgs {
    pub fn settings(&self) -> Result<MatchSettings, Failure> {
        let optimizer = Optimizer::from(self.optimizer);
        let base = MatchSettings::for_optimizer(optimizer);
        let window = SmoothingSettings {
            window: self.smooth_window,
            order: self.smooth_order,
        };
        let smoothing = if self.smooth {
            Some(window)
        } else if self.no_smooth {
            None
        } else {
            base.smoothing.map(|_| window)
        };
        let settings = MatchSettings {
            frames_per_second: self.frames_per_second,
            window_s: self.window_ms / 1000.0,
            gd: self.fit.gd(),
            ga: GaSettings {
                population: self.population,
                generations: self.generations,
                tournament: self.tournament,
                mutation_sigma: self.mutation_sigma,
                elitism: self.elitism,
            },
            pso: PsoSettings {
                particles: self.particles,
                iterations: self.iterations,
                inertia: self.inertia,
                cognitive: self.cognitive,
                social: self.social,
            },
            smoothing,
            loss: LossConfig {
                grid: self.fit.grid()?,
                ..base.loss.clone()
            },
            iaif: self.fit.iaif(),
            silence_db: self.silence_db,
            warm_start: !self.no_warm_start,
            seed: seed(self.fit.seed)?,
            ..base
        };
        settings.validate().map_err(Failure::input)?;
        Ok(settings)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Parameter track (JSON) as written by `match`.
    #[arg(long, value_name = "JSON")]
    pub params: PathBuf,
    /// Output WAV (48 kHz float).
    #[arg(long, value_name = "WAV")]
    pub out: PathBuf,
    /// Write area-function and frequency-response CSVs into this directory.
    #[arg(long, value_name = "DIR")]
    pub plot_dir: Option<PathBuf>,
    /// Aspiration noise seed [env: TRACTFIT_SEED, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Random trials per constriction count.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Report (JSON) destination.
    #[arg(long, value_name = "JSON")]
    pub out_report: PathBuf,
    /// Also write the text table here; it is always printed.
    #[arg(long, value_name = "TXT")]
    pub out_table: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

/// Exit code plus the message printed for it.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    /// Errors from reading user files: bad content is an input error, a
    /// missing voice gets its own code.
    fn reading(e: Error) -> Self {
        match e {
            Error::NoVoicedFrames => Self::from(e),
            e => Self::input(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoVoicedFrames => EXIT_NO_VOICE,
            Error::InvalidInput(_) | Error::Schema { .. } | Error::Wav(_) => EXIT_INPUT,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::input(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn check_input(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::input(format!("{}: no such file", path.display())))
    }
}

fn check_output(path: &Path) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(Failure::input(format!(
            "{}: directory {} does not exist",
            path.display(),
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(Failure::input(format!(
            "{}: is a directory",
            path.display()
        )));
    }
    Ok(())
}

fn check_plot_dir(dir: &Path) -> Result<(), Failure> {
    if dir.exists() && !dir.is_dir() {
        return Err(Failure::input(format!(
            "{}: not a directory",
            dir.display()
        )));
    }
    Ok(())
}

/// `area.csv` (frame, segment, diameter) and `response.csv` (frame,
/// frequency, magnitude in dB) for every frame of the track.
pub fn write_plot_data(dir: &Path, track: &ParameterTrack) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(Error::from)?;
    let sim = SimulationConfig {
        sample_rate: track.header.sample_rate,
        ..SimulationConfig::default()
    };
    let grid = FrequencyGrid::default();
    let hz = grid.hz(sim.sample_rate);
    let csv_error = |e: csv::Error| Failure {
        code: EXIT_INTERNAL,
        message: e.to_string(),
    };
    let mut area = csv::Writer::from_writer(Vec::new());
    let mut response = csv::Writer::from_writer(Vec::new());
    area.write_record(["frame", "segment", "diameter_cm"])
        .map_err(csv_error)?;
    response
        .write_record(["frame", "frequency_hz", "magnitude_db"])
        .map_err(csv_error)?;
    for f in &track.frames {
        let controls = f.controls();
        let frame = f.frame_index.to_string();
        for (i, d) in AreaFunction::from_controls(&controls)
            .diameters()
            .iter()
            .enumerate()
        {
            area.write_record([frame.clone(), i.to_string(), d.to_string()])
                .map_err(csv_error)?;
        }
        let spectrum = controls_response(&controls, &grid, &sim);
        for (f_hz, m) in hz.iter().zip(spectrum.magnitudes()) {
            let db = 20.0 * m.log10();
            response
                .write_record([frame.clone(), f_hz.to_string(), db.to_string()])
                .map_err(csv_error)?;
        }
    }
    for (name, w) in [("area.csv", area), ("response.csv", response)] {
        let bytes = w.into_inner().map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        })?;
        let text = String::from_utf8(bytes).expect("csv of numbers is utf-8");
        write_text_atomic(&dir.join(name), &text)?;
    }
    Ok(())
}

fn loss_summary(track: &ParameterTrack) -> String {
    let mut losses: Vec<f64> = track.frames.iter().filter_map(|f| f.loss).collect();
    if losses.is_empty() {
        return format!("{} frames, none voiced", track.frames.len());
    }
    losses.sort_by(f64::total_cmp);
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    format!(
        "{} frames, {} voiced; loss mean {:.4}, median {:.4}, max {:.4}",
        track.frames.len(),
        losses.len(),
        mean,
        losses[losses.len() / 2],
        losses[losses.len() - 1]
    )
}

pub fn cmd_match(args: &MatchArgs) -> Result<(), Failure> {
    check_input(&args.input)?;
    check_output(&args.out_params)?;
    if let Some(p) = &args.out_audio {
        check_output(p)?;
    }
    if let Some(d) = &args.plot_dir {
        check_plot_dir(d)?;
    }
    let settings = args.settings()?;
    let audio = read_wav(&args.input, SAMPLE_RATE).map_err(Failure::reading)?;
    let track = match_audio(&audio, &settings)?;
    let resynth = match &args.out_audio {
        Some(_) => Some(resynthesize(
            &track,
            &settings.loss.simulation,
            settings.seed,
        )?),
        None => None,
    };
    write_track(&args.out_params, &track)?;
    if let (Some(p), Some(audio)) = (&args.out_audio, &resynth) {
        write_wav(p, audio)?;
    }
    if let Some(d) = &args.plot_dir {
        write_plot_data(d, &track)?;
    }
    println!("{}", loss_summary(&track));
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    check_input(&args.params)?;
    check_output(&args.out)?;
    if let Some(d) = &args.plot_dir {
        check_plot_dir(d)?;
    }
    let seed = seed(args.seed)?;
    let track = read_track(&args.params).map_err(Failure::reading)?;
    let sim = SimulationConfig {
        sample_rate: SAMPLE_RATE,
        ..SimulationConfig::default()
    };
    if track.header.sample_rate != SAMPLE_RATE {
        return Err(Failure::input(format!(
            "track at {} Hz; only {SAMPLE_RATE} Hz tracks can be rendered",
            track.header.sample_rate
        )));
    }
    let audio = resynthesize(&track, &sim, seed)?;
    write_wav(&args.out, &audio)?;
    if let Some(d) = &args.plot_dir {
        write_plot_data(d, &track)?;
    }
    println!(
        "{} frames, {:.3} s written to {}",
        track.frames.len(),
        audio.duration_s(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<(), Failure> {
    check_output(&args.out_report)?;
    if let Some(p) = &args.out_table {
        check_output(p)?;
    }
    if args.trials == 0 {
        return Err(Failure::input("--trials must be at least 1"));
    }
    let defaults = ExperimentOptions::default();
    let opts = ExperimentOptions {
        trials_per_condition: args.trials,
        seed: seed(args.fit.seed)?,
        gd: args.fit.gd(),
        loss: LossConfig {
            grid: args.fit.grid()?,
            ..defaults.loss.clone()
        },
        iaif: args.fit.iaif(),
        ..defaults
    };
    opts.gd.validate().map_err(Failure::input)?;
    let report = run_indomain_experiment(&opts)?;
    let table = report.table();
    write_json(&args.out_report, &report)?;
    if let Some(p) = &args.out_table {
        write_text_atomic(p, &table)?;
    }
    print!("{table}");
    Ok(())
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (_, 0) => log::LevelFilter::Warn,
        (_, 1) => log::LevelFilter::Info,
        (_, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    // a second call (tests running several commands) keeps the first logger
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("TRACTFIT_LOG")
        .try_init();
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let result = match &cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("tractfit: {}", f.message);
            f.code
        }
    }
}
