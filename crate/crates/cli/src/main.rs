use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use ionsq::chain::{ChainModel, Mode};
use ionsq::fockspace::{load_state, save_state, Axis, ObservableKind, ObservableSpec, Operator};
use ionsq::metrology::{self, DirectionGrid, QFI_SPIN_THETAS};
use ionsq::protocols::{self, Engine, Imprint, Protocol, ProtocolConfig, SaReadout};
use ionsq::runner::{
    self, AnalyticModel, Analyses, BenchTwaPlan, OptimizeOptions, SweepAxis, SweepPlan, SweepRecord,
};
use ionsq::{par, Error, Result};

#[derive(Parser)]
#[command(name = "ionsq", version, about = "Squeezed-motion metrology in trapped-ion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium positions, mode frequencies and couplings.
    Modes {
        #[arg(long, short = 'n')]
        n_ions: usize,
    },
    /// Evaluate one protocol configuration.
    Run(RunArgs),
    /// Sweep one parameter.
    Sweep(SweepArgs),
    /// Fit gain = a N^{-b} to optimal gains from a sweep CSV.
    Fit {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form large-N curves.
    Analytic(AnalyticArgs),
    /// Inspect a saved probe state.
    Analyze {
        state: PathBuf,
        #[arg(long)]
        cfi: bool,
    },
    /// Exact-vs-TWA comparison of quadrature curves and gains.
    BenchTwa(BenchArgs),
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

#[derive(Clone, Debug)]
struct List(Vec<f64>);

fn parse_list(s: &str) -> std::result::Result<List, String> {
    parse_values(s).map(List)
}

fn parse_values(s: &str) -> std::result::Result<Vec<f64>, String> {
    if let Some((range, count)) = s.split_once('/') {
        let (a, b) = range.split_once(':').ok_or("expected start:stop/count")?;
        let a: f64 = a.parse().map_err(|_| "bad start")?;
        let b: f64 = b.parse().map_err(|_| "bad stop")?;
        let k: usize = count.parse().map_err(|_| "bad count")?;
        return Ok(match k {
            0 => vec![],
            1 => vec![a],
            _ => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
        });
    }
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"))).collect()
}

/// Protocol fields; each flag overrides the config file.
#[derive(Args, Clone, Default)]
struct ConfigFlags {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_enum::<Protocol>)]
    protocol: Option<Protocol>,
    /// Also resets imprint and observable to the mode's defaults.
    #[arg(long, value_parser = parse_enum::<Mode>)]
    mode: Option<Mode>,
    #[arg(long, short = 'n')]
    n_ions: Option<usize>,
    #[arg(long, short = 'r')]
    r: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_parser = parse_enum::<Imprint>)]
    imprint: Option<Imprint>,
    #[arg(long, value_parser = parse_enum::<ObservableKind>)]
    observable: Option<ObservableKind>,
    /// `direct` or `beam_splitter_swap`.
    #[arg(long, value_parser = parse_enum::<SaReadout>)]
    sa_readout: Option<SaReadout>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    sigma_phase: Option<f64>,
    #[arg(long, value_parser = parse_enum::<Engine>)]
    engine: Option<Engine>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta_theta: Option<f64>,
}

impl ConfigFlags {
    fn apply(&self, cfg: &mut ProtocolConfig) {
        if let Some(m) = self.mode {
            let paired = ProtocolConfig::new(cfg.protocol, m, cfg.n_ions, cfg.r);
            cfg.mode = m;
            cfg.imprint = paired.imprint;
            cfg.observable = paired.observable;
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(protocol, n_ions, r, phi, theta, imprint, sa_readout, nbar, sigma_phase, engine, seed);
        if let Some(k) = self.observable {
            cfg.observable = ObservableSpec::new(k);
        } else if self.sa_readout == Some(SaReadout::BeamSplitterSwap) {
            cfg.observable = ObservableSpec::new(ObservableKind::SZPlus);
        }
        if self.n_ions.is_some() {
            cfg.observable.weights = None;
        }
        if self.n_max.is_some() {
            cfg.n_max = self.n_max;
        }
        if self.n_traj.is_some() {
            cfg.n_traj = self.n_traj;
        }
        if self.delta_theta.is_some() {
            cfg.delta_theta = self.delta_theta;
        }
    }
}

#[derive(Args)]
struct AnalysisFlags {
    /// Spin-only QFI.
    #[arg(long)]
    qfi_spin: bool,
    /// Spin-only classical Fisher information.
    #[arg(long)]
    cfi: bool,
    #[arg(long)]
    no_qfi: bool,
    #[arg(long)]
    no_renyi: bool,
}

impl AnalysisFlags {
    fn apply(&self, a: &mut Analyses) {
        a.qfi_spin |= self.qfi_spin;
        a.cfi |= self.cfi;
        a.qfi &= !self.no_qfi;
        a.renyi &= !self.no_renyi;
    }
}

#[derive(Args)]
struct OutputFlags {
    /// CSV output file (default stdout).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Also write the records as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Leave `wall_ms` at zero so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    analyses: AnalysisFlags,
    #[command(flatten)]
    output: OutputFlags,
    /// Search the optimal r instead of using --r.
    #[arg(long)]
    optimize_r: bool,
    /// Save the probe state (noiseless exact engine only).
    #[arg(long)]
    state_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    analyses: AnalysisFlags,
    #[command(flatten)]
    output: OutputFlags,
    #[arg(long, value_parser = parse_enum::<SweepAxis>)]
    axis: Option<SweepAxis>,
    /// Comma list `a,b,c` or range `start:stop/count`.
    #[arg(long, value_parser = parse_list)]
    values: Option<List>,
    #[arg(long)]
    optimize_r: bool,
    /// Optimisation bracket `lo,hi`.
    #[arg(long, value_parser = parse_list)]
    r_bracket: Option<List>,
    #[arg(long)]
    r_tol: Option<f64>,
    /// Emit only the configured observable for NR on the B mode.
    #[arg(long)]
    single_observable: bool,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, value_parser = parse_enum::<AnalyticModel>)]
    model: AnalyticModel,
    /// `r` values (phase models) or `n̄` values (thermal).
    #[arg(long, value_parser = parse_list)]
    values: List,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, short = 'n', default_value_t = 100)]
    n_ions: usize,
    /// Noiseless optimal gain to rescale (thermal).
    #[arg(long)]
    noiseless_gain: Option<f64>,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, short = 'n')]
    n_ions: Option<usize>,
    #[arg(long, value_parser = parse_list)]
    quadrature_r: Option<List>,
    #[arg(long)]
    times: Option<usize>,
    #[arg(long)]
    quadrature_traj: Option<usize>,
    #[arg(long, value_parser = parse_list)]
    gain_r: Option<List>,
    #[arg(long)]
    gain_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the gain comparison.
    #[arg(long)]
    no_gains: bool,
    /// JSON report file (default stdout).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(io::BufReader::new(File::open(path)?))?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn emit(records: &[SweepRecord], flags: &OutputFlags) -> Result<bool> {
    runner::write_csv(records, output(flags.out.as_deref())?)?;
    if let Some(p) = &flags.json {
        write_json(&records, Some(p))?;
    }
    for r in records.iter().filter(|r| !r.status.starts_with("ok")) {
        eprintln!("{} {:?} {:?} N={} r={}: {}", protocol_name(r.protocol), r.mode, r.engine, r.n_ions, r.r, r.status);
    }
    Ok(records.iter().all(SweepRecord::succeeded))
}

fn protocol_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Nr => "NR",
        Protocol::Sa => "SA",
    }
}

fn load_config(flags: &ConfigFlags) -> Result<ProtocolConfig> {
    let mut cfg = match &flags.config {
        Some(p) => read_json(p)?,
        None => ProtocolConfig::default(),
    };
    flags.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn modes(n_ions: usize) -> Result<bool> {
    let chain = ChainModel::new(n_ions)?;
    write_json(
        &json!({
            "n_ions": chain.n_ions,
            "positions": chain.positions,
            "mode_freqs": chain.mode_freqs,
            "mode_vectors": chain.mode_vectors,
            "couplings_cm": chain.couplings_cm,
            "couplings_b": chain.couplings_b,
        }),
        None,
    )?;
    Ok(true)
}

fn run(args: RunArgs) -> Result<bool> {
    let cfg = load_config(&args.config)?;
    let mut analyses = Analyses::default();
    args.analyses.apply(&mut analyses);
    let opts = OptimizeOptions::default();
    let mut rec = runner::evaluate_point(&cfg, &analyses, args.optimize_r.then_some(&opts));
    if args.output.no_timing {
        rec.wall_ms = 0.0;
    }
    if let Some(path) = &args.state_out {
        if rec.succeeded() {
            let at = ProtocolConfig { r: rec.r, ..cfg.clone() };
            let probe = protocols::probe_state(&at)?;
            save_state(path, &probe, serde_json::to_value(&at)?)?;
        }
    }
    emit(&[rec], &args.output)
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let mut plan: SweepPlan = match &args.config.config {
        Some(p) => read_json(p)?,
        None => SweepPlan::default(),
    };
    args.config.apply(&mut plan.base);
    args.analyses.apply(&mut plan.analyses);
    if let Some(a) = args.axis {
        plan.axis = a;
    }
    if let Some(v) = args.values {
        plan.values = v.0;
    }
    plan.optimize_r |= args.optimize_r;
    if let Some(b) = args.r_bracket {
        let [lo, hi] = b.0[..] else {
            return Err(Error::InvalidArgument("--r-bracket takes two values".into()));
        };
        plan.optimize.bracket = [lo, hi];
    }
    if let Some(t) = args.r_tol {
        plan.optimize.tol = t;
    }
    plan.both_b_observables &= !args.single_observable;
    plan.record_wall_time &= !args.output.no_timing;
    plan.base.validate()?;
    let records = runner::run_sweep(&plan)?;
    emit(&records, &args.output)
}

fn fit(input: &Path, out: Option<&Path>) -> Result<bool> {
    let records = runner::read_csv(File::open(input)?)?;
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.succeeded()) {
        let Some(g) = r.gain else { continue };
        let key = format!(
            "{}/{:?}/{:?}/{:?}/nbar={}/sigma={}",
            protocol_name(r.protocol),
            r.mode,
            r.engine,
            r.observable,
            r.nbar,
            r.sigma_phase
        );
        groups.entry(key).or_default().push((r.n_ions as f64, g));
    }
    let mut ok = !groups.is_empty();
    let mut report = serde_json::Map::new();
    for (key, pts) in groups {
        let entry = match runner::fit_scaling(&pts) {
            Ok(f) => {
                if f.poorly_conditioned {
                    eprintln!("{key}: poorly conditioned fit");
                }
                json!({ "points": pts.len(), "fit": f })
            }
            Err(e) => {
                ok = false;
                eprintln!("{key}: {e}");
                json!({ "points": pts.len(), "error": e.to_string() })
            }
        };
        report.insert(key, entry);
    }
    write_json(&report, out)?;
    Ok(ok)
}

fn analytic(args: AnalyticArgs) -> Result<bool> {
    let rows = runner::analytic_rows(args.model, &args.values.0, args.sigma, args.n_ions, args.noiseless_gain);
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    for r in &rows {
        w.serialize(r).map_err(Error::from)?;
    }
    w.flush()?;
    Ok(true)
}

fn analyze(path: &Path, cfi: bool) -> Result<bool> {
    let (state, header) = load_state(path)?;
    let cfg: Option<ProtocolConfig> = serde_json::from_value(header.metadata.clone()).ok();
    let n = state.n_ions();
    let weights = match &cfg {
        Some(c) => match protocols::imprint_generator(c)? {
            Operator::SpinSum { weights, .. } => weights,
            _ => vec![1.0; n],
        },
        None => vec![1.0; n],
    };
    let generator = Operator::SpinSum { axis: Axis::Z, weights: weights.clone() };
    let ens = [(1.0, state.clone())];
    let qfi = metrology::qfi_full(&state, &generator);
    let qfi_spin = metrology::qfi_spin(&ens, &weights, QFI_SPIN_THETAS)?;
    let mut report = json!({
        "format": header.format,
        "n_ions": n,
        "norm": state.norm_sqr(),
        "leakage": state.leakage(),
        "renyi": metrology::renyi_entropy(&state),
        "qfi": qfi,
        "qfi_spin": qfi_spin,
        "qcrb_gain": n as f64 / qfi,
        "fock_distributions": (0..header.spec.as_ref().map_or(0, |s| s.mode_ids.len()))
            .map(|k| state.fock_distribution(k))
            .collect::<Vec<_>>(),
        "config": header.metadata,
    });
    if cfi {
        let (f, dir) = metrology::cfi_spin(&ens, &weights, DirectionGrid::default())?;
        report["cfi_spin"] = json!(f);
        report["cfi_direction"] = json!(dir);
    }
    write_json(&report, None)?;
    Ok(true)
}

fn bench(args: BenchArgs) -> Result<bool> {
    let mut plan = BenchTwaPlan::default();
    macro_rules! set {
        ($($f:ident => $g:ident),*) => { $(if let Some(v) = args.$f { plan.$g = v; })* };
    }
    set!(n_ions => n_ions, times => quadrature_times, quadrature_traj => quadrature_traj,
         gain_traj => gain_traj, seed => seed);
    if let Some(v) = args.quadrature_r {
        plan.quadrature_r = v.0;
    }
    if let Some(v) = args.gain_r {
        plan.gain_r = v.0;
    }
    if args.no_gains {
        plan.gain_r.clear();
    }
    let report = runner::bench_twa(&plan)?;
    let mut worst = 0.0f64;
    for q in &report.quadratures {
        worst = worst.max(q.z_score().unwrap_or(0.0));
    }
    eprintln!("largest quadrature deviation: {worst:.2} standard errors");
    let ok = report.gains.iter().all(|g| g.exact_db.is_some() && g.twa_db.is_some());
    write_json(&report, args.out.as_deref())?;
    Ok(ok)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("IONSQ_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        par::init_threads(n);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Modes { n_ions } => modes(n_ions),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Fit { input, out } => fit(&input, out.as_deref()),
        Command::Analytic(a) => analytic(a),
        Command::Analyze { state, cfi } => analyze(&state, cfi),
        Command::BenchTwa(a) => bench(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
