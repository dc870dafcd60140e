//! Command-line front end: protocol runs, robustness sweeps, Monte Carlo
//! noise estimates, and dense-oracle verification.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use photonloom::config::{parse_config, RunConfig};
use photonloom::detection::DetectorSemantics;
use photonloom::fock::CouplingParams;
use photonloom::noise::{estimate, NoiseParams};
use photonloom::oracle::verify_protocol;
use photonloom::protocols::{
    run, sweep_bs_imbalance, sweep_coupling_ratio, ProtocolParams, ProtocolReport, SweepRow,
    Variant,
};

#[derive(Parser)]
#[command(
    name = "photonloom",
    version,
    about = "Heralded GHZ/W preparation of three distant atoms: exact linear-optical simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Left-branch coupling constant.
    #[arg(long, global = true)]
    lambda_l: Option<f64>,

    /// Right-branch coupling constant.
    #[arg(long, global = true)]
    lambda_r: Option<f64>,

    /// Interaction phase in radians (default pi/2, the maximal-probability
    /// point).
    #[arg(long, global = true)]
    theta: Option<f64>,

    /// Detector model.
    #[arg(long, global = true, value_enum)]
    semantics: Option<SemanticsArg>,

    /// Keep the unemitted-vacuum branch of each atom.
    #[arg(long, global = true)]
    keep_vacuum: bool,

    /// Beam-splitter transmittance (default 0.5).
    #[arg(long, global = true)]
    bs_t: Option<f64>,

    /// Run-configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write CSV here instead of printing a table.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the GHZ heralding setup.
    Ghz,
    /// Run the direct W heralding setup.
    WDirect,
    /// Run the two-stage bunching W setup.
    WBunching {
        /// Also read out the second bunching output.
        #[arg(long)]
        f2: bool,
        /// Add the auxiliary atom branch on the unbunched port.
        #[arg(long = "f1-aux")]
        f1_aux: bool,
    },
    /// Sweep a parameter and report probability and fidelity extremes.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long)]
        values: String,
        #[arg(long, value_enum, default_value = "ghz")]
        variant: VariantArg,
    },
    /// Monte Carlo noise estimate.
    Mc {
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "ghz")]
        variant: VariantArg,
        #[arg(long)]
        p_excitation: Option<f64>,
        #[arg(long)]
        p_collect: Option<f64>,
        #[arg(long)]
        p_detect: Option<f64>,
        #[arg(long)]
        dark_rate: Option<f64>,
        #[arg(long)]
        p_window: Option<f64>,
    },
    /// Replay a protocol through the dense oracle and report deviations.
    Verify {
        #[arg(long, value_enum)]
        variant: VariantArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Exact1,
    Threshold,
}

impl From<SemanticsArg> for DetectorSemantics {
    fn from(s: SemanticsArg) -> Self {
        match s {
            SemanticsArg::Exact1 => DetectorSemantics::NumberResolvingExactlyOne,
            SemanticsArg::Threshold => DetectorSemantics::ThresholdAtLeastOne,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Ratio,
    BsT,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Ghz,
    WDirect,
    WBunching,
    WBunchingF2,
    WBunchingFull,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ghz => Variant::Ghz,
            VariantArg::WDirect => Variant::WDirect,
            VariantArg::WBunching => Variant::WBunching {
                f2: false,
                f1_aux: false,
            },
            VariantArg::WBunchingF2 => Variant::WBunching {
                f2: true,
                f1_aux: false,
            },
            VariantArg::WBunchingFull => Variant::WBunching {
                f2: true,
                f1_aux: true,
            },
        }
    }
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }

    let file_cfg = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => match parse_config(&text) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            },
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => RunConfig::default(),
    };

    match dispatch(&cli, &file_cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(AppError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

fn init_threads() -> Result<(), String> {
    if let Ok(raw) = std::env::var("PHOTONLOOM_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| format!("PHOTONLOOM_THREADS must be a non-negative integer, got `{raw}`"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("cannot configure worker pool: {e}"))?;
        }
    }
    Ok(())
}

enum AppError {
    Config(String),
    Internal(String),
}

fn effective_params(cli: &Cli, cfg: &RunConfig, variant: Variant) -> Result<ProtocolParams, AppError> {
    let lambda_l = cli.lambda_l.or(cfg.lambda_l).unwrap_or(1.0);
    let lambda_r = cli.lambda_r.or(cfg.lambda_r).unwrap_or(1.0);
    let theta = cli
        .theta
        .or(cfg.theta)
        .unwrap_or(std::f64::consts::FRAC_PI_2);
    let coupling = CouplingParams::new(lambda_l, lambda_r, theta)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let semantics = cli
        .semantics
        .map(DetectorSemantics::from)
        .or(cfg.semantics)
        .unwrap_or(DetectorSemantics::NumberResolvingExactlyOne);
    let keep_vacuum_term = cli.keep_vacuum || cfg.keep_vacuum.unwrap_or(false);
    let bs_transmittance = cli.bs_t.or(cfg.bs_transmittance).unwrap_or(0.5);
    if !(bs_transmittance > 0.0 && bs_transmittance < 1.0) {
        return Err(AppError::Config(format!(
            "bs transmittance must lie strictly between 0 and 1, got {bs_transmittance}"
        )));
    }
    Ok(ProtocolParams {
        coupling,
        semantics,
        keep_vacuum_term,
        bs_transmittance,
        variant,
    })
}

fn out_path<'a>(cli: &'a Cli, cfg: &'a RunConfig) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<(), AppError> {
    match &cli.command {
        Command::Ghz => run_protocol(cli, cfg, Variant::Ghz),
        Command::WDirect => run_protocol(cli, cfg, Variant::WDirect),
        Command::WBunching { f2, f1_aux } => run_protocol(
            cli,
            cfg,
            Variant::WBunching {
                f2: *f2,
                f1_aux: *f1_aux,
            },
        ),
        Command::Sweep {
            param,
            values,
            variant,
        } => run_sweep(cli, cfg, *param, values, (*variant).into()),
        Command::Mc {
            trials,
            seed,
            variant,
            p_excitation,
            p_collect,
            p_detect,
            dark_rate,
            p_window,
        } => run_mc(
            cli,
            cfg,
            *trials,
            *seed,
            (*variant).into(),
            [*p_excitation, *p_collect, *p_detect, *dark_rate, *p_window],
        ),
        Command::Verify { variant } => run_verify(cli, cfg, (*variant).into()),
    }
}

fn run_protocol(cli: &Cli, cfg: &RunConfig, variant: Variant) -> Result<(), AppError> {
    let params = effective_params(cli, cfg, variant)?;
    let report = run(&params).map_err(|e| AppError::Internal(e.to_string()))?;
    match out_path(cli, cfg) {
        Some(path) => {
            let csv = report_csv(&params, &report);
            fs::write(&path, csv)
                .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))?;
        }
        None => print_report(&params, &report),
    }
    Ok(())
}

fn report_csv(p: &ProtocolParams, report: &ProtocolReport) -> String {
    let mut out = String::from(
        "variant,lambda_l,lambda_r,theta,bs_t,pattern,probability,target,fidelity\n",
    );
    for o in &report.outcomes {
        let target = o.target.map(|t| t.label()).unwrap_or("");
        let fidelity = o
            .fidelity
            .map(|f| format!("{f:.16e}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{}\n",
            report.variant.label(),
            p.coupling.lambda_l,
            p.coupling.lambda_r,
            p.coupling.theta,
            p.bs_transmittance,
            o.pattern,
            o.probability,
            target,
            fidelity,
        ));
    }
    out
}

fn print_report(p: &ProtocolParams, report: &ProtocolReport) {
    println!("variant:               {}", report.variant.label());
    println!(
        "coupling:              lambda_l = {:.8}, lambda_r = {:.8}, theta = {:.8}",
        p.coupling.lambda_l, p.coupling.lambda_r, p.coupling.theta
    );
    println!("bs transmittance:      {:.8}", p.bs_transmittance);
    println!(
        "total probability:     {:.8}",
        report.total_success_probability
    );
    for (target, y) in &report.per_target_yield {
        println!("yield {:<16} {:.8}", format!("{}:", target.label()), y);
    }
    println!("discarded:             {:.8}", report.discarded_probability);
    println!("unheralded:            {:.8}", report.unheralded_probability);
    println!("ledger total:          {:.8}", report.ledger_total());
    println!();
    println!("{:<32} {:>12} {:>8} {:>12}", "pattern", "probability", "target", "fidelity");
    for o in report.outcomes.iter().filter(|o| o.heralded) {
        println!(
            "{:<32} {:>12.8} {:>8} {:>12.8}",
            o.pattern.to_string(),
            o.probability,
            o.target.map(|t| t.label()).unwrap_or(""),
            o.fidelity.unwrap_or(f64::NAN),
        );
    }
    if !report.notes.is_empty() {
        println!();
        for note in &report.notes {
            println!("note: {note}");
        }
    }
}

fn run_sweep(
    cli: &Cli,
    cfg: &RunConfig,
    param: SweepParam,
    values: &str,
    variant: Variant,
) -> Result<(), AppError> {
    let params = effective_params(cli, cfg, variant)?;
    let parsed: Result<Vec<f64>, _> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect();
    let parsed =
        parsed.map_err(|_| AppError::Config(format!("cannot parse sweep values `{values}`")))?;
    if parsed.is_empty() {
        return Err(AppError::Config("no sweep values given".to_string()));
    }
    let (label, rows) = match param {
        SweepParam::Ratio => (
            "ratio",
            sweep_coupling_ratio(&params, &parsed)
                .map_err(|e| AppError::Internal(e.to_string()))?,
        ),
        SweepParam::BsT => (
            "bs_t",
            sweep_bs_imbalance(&params, &parsed)
                .map_err(|e| AppError::Internal(e.to_string()))?,
        ),
    };
    let csv = sweep_csv(label, &rows);
    match out_path(cli, cfg) {
        Some(path) => fs::write(&path, csv)
            .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn sweep_csv(label: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{label},total_probability,min_fidelity,max_fidelity\n");
    for row in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            row.value, row.total_probability, row.min_fidelity, row.max_fidelity
        ));
    }
    out
}

fn run_mc(
    cli: &Cli,
    cfg: &RunConfig,
    trials: u64,
    seed: u64,
    variant: Variant,
    overrides: [Option<f64>; 5],
) -> Result<(), AppError> {
    let params = effective_params(cli, cfg, variant)?;
    let noise = NoiseParams {
        p_excitation: overrides[0].or(cfg.p_excitation).unwrap_or(1.0),
        p_collect: overrides[1].or(cfg.p_collect).unwrap_or(1.0),
        p_detect: overrides[2].or(cfg.p_detect).unwrap_or(1.0),
        dark_rate: overrides[3].or(cfg.dark_rate).unwrap_or(0.0),
        p_window: overrides[4].or(cfg.p_window).unwrap_or(1.0),
        seed: if seed != 0 { seed } else { cfg.seed.unwrap_or(0) },
    };
    noise
        .validate()
        .map_err(|e| AppError::Config(e.to_string()))?;
    let (est, records) =
        estimate(&params, &noise, trials).map_err(|e| AppError::Internal(e.to_string()))?;
    println!(
        "trials {}  heralds {}  yield {:.8}  mean_fidelity {:.8}  ci95 {:.8}  false_herald_rate {:.8}",
        est.trials, est.heralds, est.yield_rate, est.mean_fidelity, est.fidelity_ci95,
        est.false_herald_rate
    );
    if let Some(path) = out_path(cli, cfg) {
        let mut file = fs::File::create(&path)
            .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))?;
        writeln!(file, "trial,heralded,pattern,fidelity,false_herald")
            .map_err(|e| AppError::Internal(e.to_string()))?;
        for (i, r) in records.iter().enumerate() {
            let pattern = r
                .pattern
                .as_ref()
                .map(|p| p.to_string())
                .unwrap_or_default();
            let fidelity = r
                .fidelity
                .map(|f| format!("{f:.16e}"))
                .unwrap_or_default();
            writeln!(
                file,
                "{},{},{},{},{}",
                i, r.heralded, pattern, fidelity, r.false_herald
            )
            .map_err(|e| AppError::Internal(e.to_string()))?;
        }
    }
    Ok(())
}

fn run_verify(cli: &Cli, cfg: &RunConfig, variant: Variant) -> Result<(), AppError> {
    let params = effective_params(cli, cfg, variant)?;
    let tol = 1e-10;
    let report = verify_protocol(&params, tol).map_err(|e| AppError::Internal(e.to_string()))?;
    println!("variant: {}", report.variant.label());
    for (label, dev) in &report.steps {
        println!("step {:<28} max amplitude deviation {dev:.3e}", label);
    }
    println!(
        "max amplitude deviation:   {:.3e}",
        report.max_amplitude_deviation
    );
    println!(
        "max probability deviation: {:.3e}",
        report.max_probability_deviation
    );
    if let Some(pt) = report.p_t_prime {
        println!("dense P_t' = {pt:.10}");
    }
    if let Some(verdict) = &report.p_s_verdict {
        println!("{verdict}");
    }
    if report.passed(tol) {
        println!("verification PASSED (tolerance {tol:.1e})");
        Ok(())
    } else {
        Err(AppError::Internal(format!(
            "dense verification exceeded tolerance {tol:.1e}"
        )))
    }
}
