use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use vqe_lab::harness::{read_jsonl, write_jsonl, ConfigAxes, MitigationSettings};
use vqe_lab::{
    build_mitigation, builtin_hamiltonian, diagonalize, run_sweep, run_trial, summarize_records,
    AnsatzForm, AnsatzSpec, ClassifyConfig, DeviceCalibration, EnergySource, ErrorClass,
    ExperimentConfig, Measure, NoiseConfig, PauliSum, ProbabilityVector, Recalc, ShotPolicy,
    SimilarityReport, SummaryStats, TrialRecord,
};

#[derive(Parser)]
#[command(name = "vqe-lab", version, about = "VQE simulations of the H2 molecule")]
struct Cli {
    /// Worker threads for sweeps [default: all cores]
    #[arg(long, global = true, env = "VQE_LAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact spectrum of a Hamiltonian
    Eig(EigArgs),
    /// Run a single VQE trial
    Vqe(ExperimentArgs),
    /// Run independent seeded trials and write them as JSON lines
    Sweep(ExperimentArgs),
    /// Summary statistics of a trials file
    Stats(StatsArgs),
    /// Probability-vector similarity and outcome classification
    Similarity(SimilarityArgs),
    /// Measure a calibration matrix and check mitigation on it
    MitigateTest(MitigateTestArgs),
}

#[derive(Args)]
struct EigArgs {
    #[arg(long, value_parser = parse_qubits, conflicts_with = "hamiltonian_file")]
    builtin: Option<usize>,
    #[arg(long)]
    hamiltonian_file: Option<PathBuf>,
    /// Write the spectrum as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Gates,
    Readout,
    All,
}

impl From<NoiseArg> for ErrorClass {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::None => ErrorClass::None,
            NoiseArg::Gates => ErrorClass::GatesOnly,
            NoiseArg::Readout => ErrorClass::ReadoutOnly,
            NoiseArg::All => ErrorClass::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AnsatzArg {
    Ry,
    Ryrz,
}

#[derive(Clone, Copy)]
struct Shots(ShotPolicy);

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "exact" {
            return Ok(Shots(ShotPolicy::Exact));
        }
        match s.parse::<u64>() {
            Ok(n) if n > 0 => Ok(Shots(ShotPolicy::Sampled(n))),
            _ => Err(format!("`{s}` is neither a positive shot count nor `exact`")),
        }
    }
}

fn parse_qubits(s: &str) -> Result<usize, String> {
    match s {
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("`{s}`: builtin Hamiltonians exist for 2 and 4 qubits")),
    }
}

#[derive(Args)]
struct HamiltonianArgs {
    #[arg(long, value_parser = parse_qubits, default_value = "2", conflicts_with = "hamiltonian_file")]
    qubits: usize,
    /// Text file with one `<coefficient> <label>` term per line
    #[arg(long)]
    hamiltonian_file: Option<PathBuf>,
}

impl HamiltonianArgs {
    fn load(&self) -> Result<(PauliSum, String)> {
        match &self.hamiltonian_file {
            Some(path) => Ok((load_hamiltonian(path)?, path.display().to_string())),
            None => Ok((builtin_hamiltonian(self.qubits)?, format!("builtin-{}", self.qubits))),
        }
    }
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value = "none")]
    noise: NoiseArg,
    /// Device calibration TOML [default: bundled synthetic calibration]
    #[arg(long)]
    calibration: Option<PathBuf>,
}

impl NoiseArgs {
    fn config(&self) -> Result<NoiseConfig> {
        let class = ErrorClass::from(self.noise);
        if class == ErrorClass::None {
            return Ok(NoiseConfig::noiseless());
        }
        let cal = match &self.calibration {
            Some(path) => DeviceCalibration::load(path)
                .with_context(|| format!("loading calibration {}", path.display()))?,
            None => DeviceCalibration::synthetic(),
        };
        Ok(NoiseConfig::new(class, Some(cal))?)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    hamiltonian: HamiltonianArgs,
    #[arg(long, value_enum, default_value = "ry")]
    ansatz: AnsatzArg,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// Shots per measurement group, or `exact`
    #[arg(long, default_value = "1024")]
    shots: Shots,
    #[arg(long, default_value_t = 1000)]
    maxiter: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Apply readout-error mitigation
    #[arg(long)]
    mitigate: bool,
    /// Shots per basis state for the mitigation calibration [default: --shots, or 8192 with exact shots]
    #[arg(long)]
    mitigation_shots: Option<u64>,
    /// Mitigate only the final energy measurement
    #[arg(long, requires = "mitigate")]
    mitigate_final_only: bool,
    /// none, exact or shots:<n>
    #[arg(long, default_value = "none")]
    recalc: Recalc,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed SPSA gain instead of calibrating it
    #[arg(long)]
    spsa_a: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    spsa_c: f64,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let (hamiltonian, label) = self.hamiltonian.load()?;
        let form = match self.ansatz {
            AnsatzArg::Ry => AnsatzForm::Ry,
            AnsatzArg::Ryrz => AnsatzForm::RyRz,
        };
        let ansatz = AnsatzSpec::new(form, hamiltonian.num_qubits(), self.depth)?;
        let config = ExperimentConfig {
            shots: self.shots.0,
            maxiter: self.maxiter,
            noise: self.noise.config()?,
            mitigation: MitigationSettings {
                enabled: self.mitigate,
                shots: self.mitigation_shots.unwrap_or(match self.shots.0 {
                    ShotPolicy::Sampled(n) => n,
                    ShotPolicy::Exact => MitigationSettings::default().shots,
                }),
                final_only: self.mitigate_final_only,
            },
            trials: self.trials,
            seed: self.seed,
            recalc: self.recalc,
            spsa_a: self.spsa_a,
            spsa_c: self.spsa_c,
            ..ExperimentConfig::new(hamiltonian, label, ansatz)
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Final,
    Recalculated,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Energy column to summarize
    #[arg(long, value_enum, default_value = "final")]
    source: SourceArg,
    /// Summary JSON [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a one-row CSV summary
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Jt,
    Scalar,
}

#[derive(Args)]
struct SimilarityArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Similarity used for classification
    #[arg(long, value_enum, default_value = "jt")]
    measure: MeasureArg,
    /// Measurement circuit whose probabilities are compared
    #[arg(long, default_value_t = 0)]
    circuit: usize,
    /// Hamiltonian the trials were run on [default: taken from the records]
    #[arg(long)]
    hamiltonian_file: Option<PathBuf>,
    /// Report JSON [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MitigateTestArgs {
    #[arg(long, value_parser = parse_qubits, default_value = "2")]
    qubits: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 8192)]
    mitigation_shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Eig(args) => eig(&args),
        Command::Vqe(args) => vqe(&args),
        Command::Sweep(args) => sweep(&args),
        Command::Stats(args) => stats(&args),
        Command::Similarity(args) => similarity(&args),
        Command::MitigateTest(args) => mitigate_test(&args),
    }
}

fn load_hamiltonian(path: &Path) -> Result<PauliSum> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    PauliSum::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct SpectrumReport {
    ground_energy: f64,
    eigenvalues: Vec<f64>,
}

fn eig(args: &EigArgs) -> Result<()> {
    let h = match (&args.hamiltonian_file, args.builtin) {
        (Some(path), _) => load_hamiltonian(path)?,
        (None, Some(q)) => builtin_hamiltonian(q)?,
        (None, None) => bail!("pass --builtin 2|4 or --hamiltonian-file"),
    };
    let spectrum = diagonalize(&h)?;
    if let Some(path) = &args.out {
        write_json(
            Some(path),
            &SpectrumReport {
                ground_energy: spectrum.ground_energy,
                eigenvalues: spectrum.eigenvalues.clone(),
            },
        )?;
    }
    println!("ground energy: {:.5}", spectrum.ground_energy);
    println!("spectrum:");
    for e in &spectrum.eigenvalues {
        println!("{e:.5}");
    }
    Ok(())
}

fn vqe(args: &ExperimentArgs) -> Result<()> {
    let config = args.config()?;
    let record = run_trial(&config, 0);
    if let Some(e) = &record.error {
        bail!("trial failed: {e}");
    }
    write_json(args.out.as_deref(), &record)?;
    if args.out.is_some() {
        eprintln!("final energy: {:.5}", record.final_energy.unwrap_or(f64::NAN));
        if let Some(r) = record.recalculated_energy {
            eprintln!("recalculated energy: {r:.5}");
        }
    }
    Ok(())
}

fn sweep(args: &ExperimentArgs) -> Result<()> {
    let config = args.config()?;
    let records = run_sweep(&config)?;
    write_jsonl(output(args.out.as_deref())?, &records)?;
    let failed = records.iter().filter(|r| r.failed()).count();
    if failed == records.len() {
        bail!("all {failed} trials failed: {}", records[0].error.as_deref().unwrap_or(""));
    }
    let s = summarize_records(&records, EnergySource::Final)?;
    eprintln!(
        "{} trials, {} failed: median {:.5}, {:.1}% within chemical accuracy",
        records.len(),
        failed,
        s.median,
        s.pct_in_accuracy
    );
    if config.recalc != Recalc::None {
        let r = summarize_records(&records, EnergySource::Recalculated)?;
        eprintln!("recalculated: median {:.5}, {:.1}% within chemical accuracy", r.median, r.pct_in_accuracy);
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    hamiltonian: &'a str,
    qubits: usize,
    ansatz: &'a str,
    depth: usize,
    shots: &'a str,
    maxiter: usize,
    noise: &'a str,
    mitigate: &'a str,
    recalc: &'a str,
    source: &'a str,
    n: usize,
    failed: usize,
    median: f64,
    q1: f64,
    q3: f64,
    pct_in_accuracy: f64,
    pct_stderr: f64,
    n_outliers: usize,
}

#[derive(Serialize)]
struct StatsReport {
    config: ConfigAxes,
    source: EnergySource,
    summary: SummaryStats,
}

fn stats(args: &StatsArgs) -> Result<()> {
    let records = read_records(&args.input)?;
    let first = records.first().ok_or_else(|| anyhow!("{} has no records", args.input.display()))?;
    let source = match args.source {
        SourceArg::Final => EnergySource::Final,
        SourceArg::Recalculated => EnergySource::Recalculated,
    };
    let summary = summarize_records(&records, source)?;
    let report = StatsReport {
        config: first.config.clone(),
        source,
        summary,
    };
    if let Some(path) = &args.csv {
        let c = &report.config;
        let s = &report.summary;
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.serialize(SummaryRow {
            hamiltonian: &c.hamiltonian,
            qubits: c.qubits,
            ansatz: &c.ansatz,
            depth: c.depth,
            shots: &c.shots,
            maxiter: c.maxiter,
            noise: &c.noise,
            mitigate: &c.mitigate,
            recalc: &c.recalc,
            source: match source {
                EnergySource::Final => "final",
                EnergySource::Recalculated => "recalculated",
            },
            n: s.n,
            failed: s.failed,
            median: s.median,
            q1: s.q1,
            q3: s.q3,
            pct_in_accuracy: s.pct_in_accuracy,
            pct_stderr: s.pct_stderr,
            n_outliers: s.n_outliers,
        })?;
        w.flush()?;
    }
    write_json(args.out.as_deref(), &report)
}

fn similarity(args: &SimilarityArgs) -> Result<()> {
    let records: Vec<TrialRecord> = read_records(&args.input)?
        .into_iter()
        .filter(|r| !r.failed())
        .collect();
    let first = records.first().ok_or_else(|| anyhow!("{} has no successful records", args.input.display()))?;
    let h = match &args.hamiltonian_file {
        Some(path) => load_hamiltonian(path)?,
        None => {
            let q = first
                .config
                .hamiltonian
                .strip_prefix("builtin-")
                .and_then(|q| q.parse().ok())
                .ok_or_else(|| anyhow!("records do not name a builtin Hamiltonian; pass --hamiltonian-file"))?;
            builtin_hamiltonian(q)?
        }
    };
    let ground = diagonalize(&h)?.ground_energy;

    let mut vectors = Vec::with_capacity(records.len());
    let mut energies = Vec::with_capacity(records.len());
    for r in &records {
        let group = r.group_probabilities.get(args.circuit).ok_or_else(|| {
            anyhow!("trial {} has no measurement circuit {}", r.index, args.circuit)
        })?;
        vectors.push(ProbabilityVector::new(group.probabilities.clone(), args.circuit)?);
        energies.push(r.final_energy.unwrap_or(f64::NAN));
    }
    let measure = match args.measure {
        MeasureArg::Jt => Measure::JaccardTanimoto,
        MeasureArg::Scalar => Measure::Scalar,
    };
    let mut report = SimilarityReport::build(&vectors, &energies, ClassifyConfig::for_ground_energy(ground), measure)?;
    for (entry, r) in report.entries.iter_mut().zip(&records) {
        entry.index = r.index;
    }
    eprintln!(
        "{} trials: {} ground-like, {} excited, {} erroneous",
        report.entries.len(),
        report.ground_like,
        report.excited,
        report.erroneous
    );
    write_json(args.out.as_deref(), &report)
}

#[derive(Serialize)]
struct MitigationCheck {
    qubits: usize,
    noise: String,
    shots_per_column: u64,
    /// Row-major, `matrix[i][j]` = P(read i | prepared j).
    matrix: Vec<Vec<f64>>,
    condition_number: f64,
    true_distribution: Vec<f64>,
    mitigated: Vec<f64>,
    max_abs_error: f64,
}

fn mitigate_test(args: &MitigateTestArgs) -> Result<()> {
    let noise = args.noise.config()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let model = build_mitigation(&noise, args.qubits, args.mitigation_shots, &mut rng)?;
    let a = model.calibration_matrix();
    let dim = a.dim();

    let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let truth: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let out = model.mitigate(&a.apply(&truth)?)?;
    let max_abs_error = truth
        .iter()
        .zip(&out.probabilities)
        .map(|(t, m)| (t - m).abs())
        .fold(0.0, f64::max);
    if let Some(c) = out.condition_warning {
        eprintln!("warning: calibration matrix is ill-conditioned (condition number {c:.3e})");
    }
    eprintln!("max |p_true - mitigated| = {max_abs_error:.3e}");
    write_json(
        args.out.as_deref(),
        &MitigationCheck {
            qubits: args.qubits,
            noise: noise.error_class().name().into(),
            shots_per_column: model.shots_per_column(),
            matrix: (0..dim).map(|i| (0..dim).map(|j| a.get(i, j)).collect()).collect(),
            condition_number: model.condition_number(),
            true_distribution: truth,
            mitigated: out.probabilities,
            max_abs_error,
        },
    )
}
