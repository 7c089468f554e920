//! `rbgp` command-line driver.
//!
//! Exit codes: 0 success, 1 domain failure (certification, verification,
//! exhausted sampling, bad shapes), 2 usage or parse failure.
//! Machine-readable reports go to stdout, progress notes to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use rbgp::chain_file::ChainFile;
use rbgp::lift::DEFAULT_MAX_ATTEMPTS;
use rbgp::product::{blocking_levels, compressed_edge_count, product_lambda2, Role};
use rbgp::rcubs::{deserialize_any, serialize, AnyRcubs};
use rbgp::sdmm::bench::{
    row_repetition_preset, run_sweep, sparsity_distribution_preset, Scale, SweepSpec,
};
use rbgp::sdmm::{
    default_workers, rbgp4mm, sdmm_reference, tiling_for_chain, DEFAULT_BN, DEFAULT_RN, DEFAULT_TN,
    WORKERS_ENV,
};
use rbgp::{
    check_ramanujan, generate_ramanujan, BipartiteGraph, DenseMatrix, LiftChainSpec, Precision,
    RcubsMatrix, Scalar,
};

#[derive(Parser)]
#[command(name = "rbgp", version, about = "Ramanujan bipartite graph products and RBGP4 sparse kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Ramanujan biregular graph by repeated 2-lifts.
    GenGraph(GenGraphArgs),
    /// Print the spectral report of a graph file; exit 0 iff it is Ramanujan.
    Check(CheckArgs),
    /// Build an RCUBS matrix with random values from a chain file.
    BuildChain(BuildChainArgs),
    /// Multiply an RCUBS matrix by a dense input with the tiled kernel.
    Multiply(MultiplyArgs),
    /// Run a benchmark sweep.
    Bench(BenchArgs),
    /// Convert an RCUBS matrix between binary, text and CSR forms.
    Convert(ConvertArgs),
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', ','])
        .ok_or_else(|| format!("expected LEFTxRIGHT, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad size {t:?}"));
    Ok((num(a)?, num(b)?))
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse().map_err(|e: rbgp::Error| e.to_string())
}

#[derive(Args, Serialize)]
struct GenGraphArgs {
    /// Left and right vertex counts, e.g. 64x64.
    #[arg(long, value_parser = parse_dims)]
    dims: (usize, usize),
    /// Fraction of absent edges, 1 − 2^-k.
    #[arg(long)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: usize,
    /// Graph text output.
    #[arg(long)]
    out: PathBuf,
    /// Spectral sidecar; defaults to `<out>.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CheckArgs {
    graph: PathBuf,
}

#[derive(Args, Serialize)]
struct BuildChainArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Binary RCUBS output.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the chain file's precision line (default f32).
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
    /// Half-width of the fan-in scaled uniform initialization.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Skip the Ramanujan check on sparse factors.
    #[arg(long)]
    no_certify: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize)]
struct MultiplyArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Dense input as CSV.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    input: Option<PathBuf>,
    /// Use a seeded uniform random input with this many columns.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TN)]
    tn: usize,
    #[arg(long, default_value_t = DEFAULT_RN)]
    rn: usize,
    #[arg(long, default_value_t = DEFAULT_BN)]
    bn: usize,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Compare against the unstructured reference in 64-bit.
    #[arg(long)]
    verify: bool,
    /// Output matrix as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    /// Sparsity split between G_o and G_i at 1024³.
    SparsityDesk,
    /// Sparsity split between G_o and G_i at 4096³.
    SparsityFull,
    /// Row repetition at fixed G_t, 1024³.
    RepetitionDesk,
    /// Row repetition at fixed G_t, 4096³.
    RepetitionFull,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    /// Sweep description as JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    sweep: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
    #[arg(long)]
    tn: Option<usize>,
    #[arg(long)]
    rn: Option<usize>,
    #[arg(long)]
    bn: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip timing the dense and unstructured baselines.
    #[arg(long)]
    no_baselines: bool,
    /// Print the resolved sweep description and exit.
    #[arg(long)]
    dump_spec: bool,
    /// Writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Target {
    /// Binary RCUBS file.
    Binary,
    /// Directory with chain.txt, one graph file per factor and values.csv.
    Text,
    /// JSON with row offsets, column indices and values.
    Csr,
}

#[derive(Args, Serialize)]
struct ConvertArgs {
    /// Binary file or text directory.
    input: PathBuf,
    #[arg(long, value_enum)]
    to: Target,
    #[arg(long)]
    out: PathBuf,
    /// Precision when reading a text directory without a precision line (default f64).
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn domain(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 1, error: error.into() }
    }

    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, error: error.into() }
    }
}

impl From<rbgp::Error> for Failure {
    fn from(e: rbgp::Error) -> Self {
        match e {
            rbgp::Error::Parse(_) | rbgp::Error::Io(_) => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::usage)
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

/// Flattens nested JSON into `key,value` lines with dotted keys.
fn to_key_value_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::String(s) => out.push_str(&format!("{prefix},{s}\n")),
            other => out.push_str(&format!("{prefix},{other}\n")),
        }
    }
    let mut out = String::from("key,value\n");
    walk("", v, &mut out);
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::Check(a) => check(a),
        Command::BuildChain(a) => build_chain(a),
        Command::Multiply(a) => multiply(a),
        Command::Bench(a) => bench(a),
        Command::Convert(a) => convert(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn gen_graph(args: GenGraphArgs) -> Outcome {
    let spec = LiftChainSpec::new(args.dims.0, args.dims.1, args.sparsity, args.seed)
        .with_max_attempts(args.max_attempts);
    spec.plan().map_err(Failure::usage)?;
    let sample = generate_ramanujan(&spec)?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.json", args.out.display())));
    let r = sample.report;
    let degrees = sample.graph.biregular_degrees();
    let sidecar = json!({
        "config": {
            "dims": args.dims,
            "sparsity": args.sparsity,
            "seed": args.seed,
            "max_attempts": args.max_attempts,
            "out": args.out,
            "report": report_path,
        },
        "lambda1": r.sigma1,
        "lambda2": r.sigma2,
        "bound": r.ramanujan_bound,
        "spectral_gap": r.spectral_gap,
        "degrees": degrees,
        "attempts": sample.attempts,
        "seed": args.seed,
    });
    write_file(&args.out, sample.graph.to_text())?;
    write_file(&report_path, to_json(&sidecar))?;
    print!("{}", to_json(&sidecar));
    eprintln!(
        "wrote {} ({} attempts, lambda2 {:.4} <= {:.4})",
        args.out.display(),
        sample.attempts,
        r.sigma2,
        r.ramanujan_bound
    );
    Ok(())
}

fn check(args: CheckArgs) -> Outcome {
    let graph = BipartiteGraph::from_text(&read_text(&args.graph)?)?;
    let report = check_ramanujan(&graph)?;
    let out = json!({
        "config": args,
        "num_left": graph.num_left(),
        "num_right": graph.num_right(),
        "degrees": graph.biregular_degrees(),
        "report": report,
    });
    print!("{}", to_json(&out));
    if report.is_ramanujan {
        eprintln!("Ramanujan: lambda2 {:.6} <= {:.6}", report.sigma2, report.ramanujan_bound);
        Ok(())
    } else {
        Err(Failure::domain(anyhow!(
            "not Ramanujan: lambda2 {:.6} > bound {:.6}",
            report.sigma2,
            report.ramanujan_bound
        )))
    }
}

fn build_chain(args: BuildChainArgs) -> Outcome {
    let file = ChainFile::parse(&read_text(&args.chain)?)?;
    let base = args.chain.parent().unwrap_or(Path::new("."));
    let resolved = file.resolve(base, args.seed, !args.no_certify)?;
    let precision = args.precision.or(file.precision).unwrap_or(Precision::F32);
    // Values draw from their own stream so adding a factor does not shift them.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x7261_6d61_6e75_6a61);
    let chain = resolved.chain;
    let (bytes, footprint) = match precision {
        Precision::F32 => {
            let m = RcubsMatrix::<f32>::init_random(chain.clone(), &mut rng, args.scale)?;
            (serialize(&m)?, m.memory_footprint(4, 4))
        }
        Precision::F64 => {
            let m = RcubsMatrix::<f64>::init_random(chain.clone(), &mut rng, args.scale)?;
            (serialize(&m)?, m.memory_footprint(8, 4))
        }
    };
    write_file(&args.out, &bytes)?;
    let (rows, cols) = chain.dims()?;
    let levels = blocking_levels(&chain);
    let summary = json!({
        "config": {
            "chain": args.chain,
            "seed": args.seed,
            "out": args.out,
            "precision": precision,
            "scale": args.scale,
            "certify": !args.no_certify,
            "entries": file.entries,
        },
        "rows": rows,
        "cols": cols,
        "row_nnz": chain.row_nnz(),
        "sparsity": chain.sparsity(),
        "levels": levels.levels,
        "compression": compressed_edge_count(&chain),
        "footprint": footprint,
        "product_lambda2": product_lambda2(&chain)?,
        "factors": resolved.factors,
        "bytes": bytes.len(),
    });
    print!("{}", to_json(&summary));
    eprintln!("wrote {} ({rows}x{cols}, {} bytes)", args.out.display(), bytes.len());
    Ok(())
}

fn read_matrix(path: &Path) -> Result<AnyRcubs, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)?;
    Ok(deserialize_any(&bytes)?)
}

fn multiply(args: MultiplyArgs) -> Outcome {
    match read_matrix(&args.matrix)? {
        AnyRcubs::F32(w) => multiply_with(w, &args),
        AnyRcubs::F64(w) => multiply_with(w, &args),
    }
}

fn multiply_with<T: Scalar>(w: RcubsMatrix<T>, args: &MultiplyArgs) -> Outcome {
    let workers = args.workers.unwrap_or_else(default_workers);
    let input: DenseMatrix<T> = match (&args.input, args.random) {
        (Some(path), _) => DenseMatrix::<T>::from_csv(&read_text(path)?)?,
        (None, Some(n)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            DenseMatrix::from_fn(w.cols(), n, |_, _| T::from_f64(rng.gen_range(-1.0..1.0)))
        }
        (None, None) => unreachable!("clap requires --input or --random"),
    };
    let params = tiling_for_chain(w.chain(), args.tn, args.rn, args.bn, workers)?;
    let start = Instant::now();
    let (out, work) = rbgp4mm(&w, &input, &params)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut verified = true;
    let verify = if args.verify {
        let reference = sdmm_reference(&w.cast::<f64>(), &input.cast::<f64>())?;
        let max_abs = out.cast::<f64>().max_abs_diff(&reference)?;
        let max_rel = max_abs / reference.max_abs().max(f64::MIN_POSITIVE);
        let tolerance = match T::PRECISION {
            Precision::F32 => 1e-5,
            Precision::F64 => 1e-12,
        };
        verified = max_rel <= tolerance;
        json!({ "max_abs_error": max_abs, "max_rel_error": max_rel, "tolerance": tolerance, "passed": verified })
    } else {
        Value::Null
    };
    if let Some(path) = &args.out {
        write_file(path, out.to_csv())?;
    }
    let report = json!({
        "config": {
            "matrix": args.matrix,
            "input": args.input,
            "random": args.random,
            "seed": args.seed,
            "precision": T::PRECISION,
            "tiling": params,
            "verify": args.verify,
            "out": args.out,
        },
        "rows": w.rows(),
        "inner": w.cols(),
        "cols": input.cols(),
        "nnz": w.nnz(),
        "elapsed_ms": elapsed_ms,
        "work": work,
        "verify": verify,
    });
    match args.format {
        Format::Json => print!("{}", to_json(&report)),
        Format::Csv => print!("{}", to_key_value_csv(&report)),
    }
    if verified {
        Ok(())
    } else {
        Err(Failure::domain(anyhow!("verification failed: {verify}")))
    }
}

fn bench(args: BenchArgs) -> Outcome {
    let mut spec: SweepSpec = match (&args.sweep, args.preset) {
        (Some(path), _) => serde_json::from_str(&read_text(path)?)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Failure::usage)?,
        (None, Some(p)) => match p {
            Preset::SparsityDesk => sparsity_distribution_preset(Scale::Desk),
            Preset::SparsityFull => sparsity_distribution_preset(Scale::Full),
            Preset::RepetitionDesk => row_repetition_preset(Scale::Desk),
            Preset::RepetitionFull => row_repetition_preset(Scale::Full),
        },
        (None, None) => unreachable!("clap requires --sweep or --preset"),
    };
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    if let Some(r) = args.runs {
        spec.runs = r;
    }
    if let Some(p) = args.precision {
        spec.precision = p;
    }
    spec.tn = args.tn.unwrap_or(spec.tn);
    spec.rn = args.rn.unwrap_or(spec.rn);
    spec.bn = args.bn.unwrap_or(spec.bn);
    spec.seed = args.seed.unwrap_or(spec.seed);
    spec.baselines &= !args.no_baselines;
    if args.dump_spec {
        print!("{}", to_json(&spec));
        return Ok(());
    }
    eprintln!("running {} ({} configs, {} workers)", spec.name, spec.configs.len(), spec.workers);
    let table = run_sweep(&spec).map_err(Failure::usage)?;
    let csv = table.to_csv()?;
    let json = table.to_json()? + "\n";
    if let Some(prefix) = &args.out {
        write_file(&PathBuf::from(format!("{}.csv", prefix.display())), &csv)?;
        write_file(&PathBuf::from(format!("{}.json", prefix.display())), &json)?;
    }
    match args.format {
        Format::Csv => print!("{csv}"),
        Format::Json => print!("{json}"),
    }
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed; see the errors column", table.rows.len());
    }
    Ok(())
}

fn read_text_dir(dir: &Path, precision: Option<Precision>) -> Result<AnyRcubs, Failure> {
    let file = ChainFile::parse(&read_text(&dir.join("chain.txt"))?)?;
    let chain = file.resolve(dir, 0, false)?.chain;
    let values = read_text(&dir.join("values.csv"))?;
    let precision = precision.or(file.precision).unwrap_or(Precision::F64);
    fn load<T: Scalar>(chain: rbgp::RbgpChain, values: &str) -> rbgp::Result<RcubsMatrix<T>> {
        let v = DenseMatrix::<T>::from_csv(values)?;
        if v.shape() != (chain.dims()?.0, chain.row_nnz()) {
            return Err(rbgp::Error::Shape(format!(
                "values.csv is {}x{}, chain needs {}x{}",
                v.rows(),
                v.cols(),
                chain.dims()?.0,
                chain.row_nnz()
            )));
        }
        RcubsMatrix::new(chain, v.into_vec())
    }
    Ok(match precision {
        Precision::F32 => AnyRcubs::F32(load(chain, &values)?),
        Precision::F64 => AnyRcubs::F64(load(chain, &values)?),
    })
}

fn write_text_dir<T: Scalar>(m: &RcubsMatrix<T>, dir: &Path) -> Outcome {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::usage)?;
    let mut chain_txt = format!("precision {}\n", T::PRECISION);
    for (i, (g, role)) in m.chain().graphs().iter().zip(m.chain().roles()).enumerate() {
        let name = format!("factor_{i}.txt");
        write_file(&dir.join(&name), g.to_text())?;
        let role = match role {
            Role::Sparse => "sparse",
            Role::Complete => "complete",
        };
        chain_txt.push_str(&format!("graph {name} role={role}\n"));
    }
    write_file(&dir.join("chain.txt"), chain_txt)?;
    let values = DenseMatrix::new(m.rows(), m.row_nnz(), m.values().to_vec())?;
    write_file(&dir.join("values.csv"), values.to_csv())
}

fn csr_json<T: Scalar>(m: &RcubsMatrix<T>) -> Value {
    let csr = m.to_unstructured();
    json!({
        "rows": csr.rows,
        "cols": csr.cols,
        "precision": T::PRECISION,
        "row_offsets": csr.row_offsets,
        "col_indices": csr.col_indices,
        "values": csr.values.iter().map(|v| v.widen()).collect::<Vec<f64>>(),
    })
}

fn convert(args: ConvertArgs) -> Outcome {
    let m = if args.input.is_dir() {
        read_text_dir(&args.input, args.precision)?
    } else {
        read_matrix(&args.input)?
    };
    match (args.to, &m) {
        (Target::Binary, AnyRcubs::F32(w)) => write_file(&args.out, serialize(w)?)?,
        (Target::Binary, AnyRcubs::F64(w)) => write_file(&args.out, serialize(w)?)?,
        (Target::Text, AnyRcubs::F32(w)) => write_text_dir(w, &args.out)?,
        (Target::Text, AnyRcubs::F64(w)) => write_text_dir(w, &args.out)?,
        (Target::Csr, AnyRcubs::F32(w)) => write_file(&args.out, csr_json(w).to_string())?,
        (Target::Csr, AnyRcubs::F64(w)) => write_file(&args.out, csr_json(w).to_string())?,
    }
    let (rows, cols) = m.chain().dims()?;
    let report = json!({ "config": args, "rows": rows, "cols": cols, "precision": m.precision() });
    print!("{}", to_json(&report));
    Ok(())
}
