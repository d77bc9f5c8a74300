//! Command implementations behind the `spdiv` binary.
//!
//! Every command produces a [`Report`]; `main` prints it as a table or, with
//! `--json`, as JSON with sorted keys. Point indices on the command line and
//! in reports are 1-based.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use spdiv::bounds::GapCertificate;
use spdiv::diversity::{sp_of_subset, DiversityError, SignedLog, SimilarityMatrix};
use spdiv::geometry::{margins, Backend, MarginReport};
use spdiv::pointfile::{format_rational, parse_point_file, write_point_file, ParseError};
use spdiv::reduction::{
    decide_via_sp, reduce, triangle_instance, triangle_scale, verify_instance, ReductionError,
    ReductionMode, ScalePlan, ScaleValue, VerificationReport, DEFAULT_SLACK,
};
use spdiv::solvers::{
    sp_select_exact, sp_select_greedy, SelectOptions, Selection, SolverError, DEFAULT_BUDGET,
};
use spdiv::{KernelParams, PointSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "spdiv",
    version,
    about = "Solow-Polasky diversity and the unit-disk reduction"
)]
pub struct Cli {
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for subset enumeration (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Input {
    /// Point file: two coordinates per line, decimals or p/q fractions.
    pub file: PathBuf,
    /// Read every coordinate as an exact rational.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Analytic,
    Bits,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate SP of one subset.
    Eval {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        theta0: f64,
        /// Comma-separated 1-based indices (default: all points).
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<usize>>,
    },
    /// Find the k-subset with maximum SP.
    Select {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        theta0: f64,
        #[arg(long)]
        k: usize,
        /// Use the greedy heuristic instead of enumeration.
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
    /// Report the margins delta, eta and (exact input) the bit margin.
    Margins {
        #[command(flatten)]
        input: Input,
    },
    /// Build the scaled instance and its gap certificate.
    Reduce {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        theta0: f64,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
        /// Write the scaled point set here (analytic mode).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the reduction exhaustively; exit 3 on mismatch.
    Verify {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        theta0: f64,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
    /// Run the built-in three-point example.
    Example,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse(_) => EXIT_USAGE,
            CliError::Diversity(DiversityError::InvalidTheta(_))
            | CliError::Diversity(DiversityError::RepeatedIndex(_))
            | CliError::Diversity(DiversityError::IndexOutOfRange { .. })
            | CliError::Diversity(DiversityError::EmptySubset)
            | CliError::Solver(SolverError::SizeOutOfRange { .. })
            | CliError::Reduction(ReductionError::SizeTooSmall(_))
            | CliError::Reduction(ReductionError::SizeTooLarge { .. })
            | CliError::Reduction(ReductionError::InvalidSlack(_))
            | CliError::Reduction(ReductionError::FloatingBackend) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        }
    }
}

/// Structured command output. Keys serialize in sorted order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub diagnostics: BTreeMap<String, Value>,
    pub inputs: BTreeMap<String, Value>,
    pub results: BTreeMap<String, Value>,
    #[serde(skip)]
    pub exit_code: i32,
}

impl Report {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    fn input(&mut self, key: &str, v: Value) -> &mut Self {
        self.inputs.insert(key.into(), sorted(v));
        self
    }

    fn result(&mut self, key: &str, v: Value) -> &mut Self {
        self.results.insert(key.into(), sorted(v));
        self
    }

    fn diag(&mut self, key: &str, v: Value) -> &mut Self {
        self.diagnostics.insert(key.into(), sorted(v));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("command: {}\n", self.command);
        for (title, section) in [
            ("inputs", &self.inputs),
            ("results", &self.results),
            ("diagnostics", &self.diagnostics),
        ] {
            if section.is_empty() {
                continue;
            }
            out.push_str(&format!("[{title}]\n"));
            let width = section.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, v) in section {
                let shown = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                out.push_str(&format!("  {k:<width$}  {shown}\n"));
            }
        }
        out
    }
}

/// Rebuilds objects with keys inserted in sorted order.
fn sorted(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let ordered: BTreeMap<String, Value> =
                map.into_iter().map(|(k, v)| (k, sorted(v))).collect();
            Value::Object(ordered.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// A float rounded to 12 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(format!("{x}"));
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    json!(rounded)
}

fn signed_log(v: &SignedLog) -> Value {
    json!({ "sign": v.sign, "ln_abs": num(v.ln_abs) })
}

fn one_based(indices: &[usize]) -> Value {
    json!(indices.iter().map(|i| i + 1).collect::<Vec<_>>())
}

fn selection(s: &Selection) -> Value {
    json!({
        "indices": one_based(&s.indices),
        "value": num(s.value),
        "deficit": signed_log(&s.deficit),
    })
}

fn load(input: &Input) -> Result<PointSet, CliError> {
    let text = std::fs::read_to_string(&input.file).map_err(|source| CliError::Io {
        path: input.file.clone(),
        source,
    })?;
    Ok(parse_point_file(&text, input.exact)?)
}

fn params(theta0: f64) -> Result<KernelParams, CliError> {
    Ok(KernelParams::new(theta0)?)
}

fn backend_name(p: &PointSet) -> &'static str {
    match p.backend() {
        Backend::Rational => "rational",
        Backend::Floating => "floating",
    }
}

fn file_inputs(report: &mut Report, input: &Input, points: &PointSet) {
    report
        .input("file", json!(input.file.display().to_string()))
        .input("backend", json!(backend_name(points)))
        .input("points", json!(points.len()));
}

fn to_zero_based(subset: &[usize], n: usize) -> Result<Vec<usize>, CliError> {
    let mut seen = vec![false; n];
    subset
        .iter()
        .map(|&i| {
            if i == 0 || i > n {
                return Err(CliError::Usage(format!("index {i} out of range 1..={n}")));
            }
            if std::mem::replace(&mut seen[i - 1], true) {
                return Err(CliError::Usage(format!("index {i} repeated in --subset")));
            }
            Ok(i - 1)
        })
        .collect()
}

pub fn cmd_eval(input: &Input, theta0: f64, subset: Option<&[usize]>) -> Result<Report, CliError> {
    let points = load(input)?;
    let params = params(theta0)?;
    let idx = match subset {
        Some(s) => to_zero_based(s, points.len())?,
        None => (0..points.len()).collect(),
    };
    let z = SimilarityMatrix::from_subset(&points, &idx, &params)?;
    let w = spdiv::diversity::solow_polasky(&z)?;
    let mut r = Report::new("eval");
    file_inputs(&mut r, input, &points);
    r.input("theta0", num(theta0))
        .input("subset", one_based(&idx));
    r.result("sp_value", num(w.sp_value))
        .result(
            "weights",
            json!(w.w.iter().map(|&v| num(v)).collect::<Vec<_>>()),
        )
        .result("deficit", signed_log(&w.deficit));
    r.diag("residual", num(w.residual))
        .diag("condition_estimate", num(w.condition_estimate))
        .diag("factorization", json!(format!("{:?}", w.factorization)))
        .diag("underflow", json!(z.underflow()));
    Ok(r)
}

pub fn cmd_select(
    input: &Input,
    theta0: f64,
    k: usize,
    greedy: bool,
    budget: u128,
) -> Result<Report, CliError> {
    let points = load(input)?;
    let params = params(theta0)?;
    let mut r = Report::new("select");
    file_inputs(&mut r, input, &points);
    r.input("theta0", num(theta0))
        .input("k", json!(k))
        .input("greedy", json!(greedy))
        .input("budget", json!(budget.to_string()));
    if greedy {
        let s = sp_select_greedy(&points, k, &params)?;
        r.result("best", selection(&s));
    } else {
        let opts = SelectOptions {
            budget,
            ..SelectOptions::default()
        };
        let res = sp_select_exact(&points, k, &params, &opts)?;
        r.result("best", selection(&res.best)).result(
            "all_optima",
            json!(res.all_optima.iter().map(selection).collect::<Vec<_>>()),
        );
        r.diag("evaluated_count", json!(res.evaluated_count.to_string()))
            .diag("tie_tolerance", num(opts.tie_tolerance));
    }
    Ok(r)
}

fn margin_results(r: &mut Report, m: &MarginReport) {
    r.result("delta", num(m.delta))
        .result("eta", num(m.eta))
        .result("eta_is_sentinel", json!(m.eta_is_sentinel))
        .result(
            "delta_pair",
            json!([m.delta_pair.0 + 1, m.delta_pair.1 + 1]),
        )
        .result(
            "eta_pair",
            m.eta_pair
                .map_or(Value::Null, |(a, b)| json!([a + 1, b + 1])),
        );
    if m.eta_is_sentinel {
        r.diag(
            "eta_note",
            json!("no pair exceeds distance 1; eta set to the sentinel value 1"),
        );
    }
    if let Some(e) = &m.exact {
        r.result("bit_length", json!(e.bit_length))
            .result("epsilon", json!(format_rational(&e.epsilon)))
            .result("delta_squared", json!(format_rational(&e.delta_squared)))
            .result("bit_margin_holds", json!(e.bit_margin_holds()));
    }
}

pub fn cmd_margins(input: &Input) -> Result<Report, CliError> {
    let points = load(input)?;
    let m = margins(&points).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut r = Report::new("margins");
    file_inputs(&mut r, input, &points);
    margin_results(&mut r, &m);
    Ok(r)
}

fn scale_value(plan: &ScalePlan) -> Value {
    match &plan.scale {
        ScaleValue::Real(v) => num(*v),
        ScaleValue::Exact(v) => json!(format_rational(v)),
        ScaleValue::Integer(v) => json!(v.to_string()),
    }
}

fn plan_json(plan: &ScalePlan) -> Value {
    let mut v = json!({
        "mode": match plan.mode {
            spdiv::reduction::ScaleMode::Analytic => "analytic",
            spdiv::reduction::ScaleMode::BitComplexity => "bits",
        },
        "scale": scale_value(plan),
        "theta0": num(plan.theta0),
        "k": plan.k,
        "delta": num(plan.delta),
        "eta": num(plan.eta),
        "eta_is_sentinel": plan.eta_is_sentinel,
        "threshold": num(plan.threshold),
        "slack": plan.slack.map_or(Value::Null, num),
        "log_rho": num(plan.log_rho),
        "log_r": num(plan.log_r),
        "log_q": num(plan.log_q),
        "log_q_over_r": num(plan.log_q_over_r),
        "rho_condition": plan.rho_condition,
        "ratio_condition": plan.ratio_condition,
    });
    if let Some(b) = &plan.bits {
        v["bits"] = json!({
            "bit_length": b.bit_length,
            "epsilon": format_rational(&b.epsilon),
            "m": b.m.to_string(),
            "c_theta0": b.c_theta0.to_string(),
            "log2_m_ceil": b.log2_m_ceil,
            "scale_times_epsilon": b.scale_times_epsilon.to_string(),
            "exponent_condition": b.exponent_condition,
            "margin_condition": b.margin_condition,
            "scale_bits": b.scale_bits,
            "scale_bits_bound": b.scale_bits_bound,
        });
    }
    v
}

fn certificate_json(c: &GapCertificate) -> Value {
    json!({
        "good_lower": num(c.good_lower),
        "bad_upper": num(c.bad_upper),
        "log_gap": c.log_gap.map_or(Value::Null, num),
        "log_good_deficit": num(c.log_good_deficit()),
        "log_bad_deficit": if c.bad_class_empty { Value::Null } else { num(c.log_bad_deficit()) },
        "separated": c.separated,
        "sufficient_condition": c.sufficient_condition,
        "log_domain": c.log_domain,
        "bad_class_empty": c.bad_class_empty,
    })
}

pub fn cmd_reduce(
    input: &Input,
    theta0: f64,
    k: usize,
    mode: ModeArg,
    slack: f64,
    output: Option<&Path>,
) -> Result<Report, CliError> {
    let points = load(input)?;
    let params = params(theta0)?;
    let reduction_mode = match mode {
        ModeArg::Analytic => ReductionMode::Analytic { slack },
        ModeArg::Bits => ReductionMode::BitComplexity,
    };
    let inst = reduce(&points, k, &params, reduction_mode)?;
    let mut r = Report::new("reduce");
    file_inputs(&mut r, input, &points);
    r.input("theta0", num(theta0)).input("k", json!(k)).input(
        "mode",
        json!(if mode == ModeArg::Analytic {
            "analytic"
        } else {
            "bits"
        }),
    );
    if mode == ModeArg::Analytic {
        r.input("slack", num(slack));
    }
    r.result("plan", plan_json(&inst.plan))
        .result("certificate", certificate_json(&inst.certificate))
        .result("edges", json!(inst.graph.edge_count()));
    match (&inst.image, output) {
        (Some(image), Some(path)) => {
            std::fs::write(path, write_point_file(image)).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            r.result("image_file", json!(path.display().to_string()));
        }
        (None, Some(_)) => {
            return Err(CliError::Usage(
                "--output needs --mode analytic; the bit-complexity image is symbolic".into(),
            ))
        }
        _ => {}
    }
    Ok(r)
}

fn verification_results(r: &mut Report, v: &VerificationReport) {
    let sets = |s: &[Vec<usize>]| json!(s.iter().map(|x| one_based(x)).collect::<Vec<_>>());
    r.result("plan", plan_json(&v.instance.plan))
        .result("certificate", certificate_json(&v.instance.certificate))
        .result("independent_sets", sets(&v.independent_sets))
        .result("optimal_class", sets(&v.optimal_class))
        .result("argmax", selection(&v.argmax))
        .result(
            "sp_optima",
            json!(v
                .selection
                .all_optima
                .iter()
                .map(selection)
                .collect::<Vec<_>>()),
        )
        .result(
            "min_good",
            v.min_good.as_ref().map_or(Value::Null, selection),
        )
        .result("max_bad", v.max_bad.as_ref().map_or(Value::Null, selection))
        .result("classes_match", json!(v.classes_match))
        .result("argmax_independent", json!(v.argmax_independent))
        .result("strict_separation", json!(v.strict_separation))
        .result("thresholds_respected", json!(v.thresholds_respected))
        .result("passed", json!(v.passed));
    r.diag("evaluated_count", json!(v.evaluated_count.to_string()));
}

pub fn cmd_verify(
    input: &Input,
    theta0: f64,
    k: usize,
    slack: f64,
    budget: u128,
) -> Result<Report, CliError> {
    let points = load(input)?;
    let params = params(theta0)?;
    let opts = SelectOptions {
        budget,
        ..SelectOptions::default()
    };
    let inst = reduce(&points, k, &params, ReductionMode::Analytic { slack })?;
    let v = verify_instance(inst, &opts)?;
    let mut r = Report::new("verify");
    file_inputs(&mut r, input, &points);
    r.input("theta0", num(theta0))
        .input("k", json!(k))
        .input("slack", num(slack))
        .input("budget", json!(budget.to_string()));
    verification_results(&mut r, &v);
    r.exit_code = if v.passed { EXIT_OK } else { EXIT_MISMATCH };
    Ok(r)
}

/// Reference values for the three pairs of the scaled triangle.
pub const EXAMPLE_VALUES: [([usize; 2], f64); 3] =
    [([0, 2], 1.809301), ([0, 1], 1.905148), ([1, 2], 1.954045)];
pub const EXAMPLE_TOLERANCE: f64 = 1e-6;

pub fn cmd_example() -> Result<Report, CliError> {
    let params = params(1.0)?;
    let source = triangle_instance();
    let inst = reduce(&source, 2, &params, ReductionMode::Fixed(triangle_scale()))?;
    let image = inst.image.clone().expect("analytic image");
    let mut r = Report::new("example");
    r.input("points", json!(["0 0", "1 0", "0 3/4"]))
        .input("theta0", num(1.0))
        .input("scale", json!("3"))
        .input("k", json!(2));
    let mut ok = true;
    let mut pairs = Vec::new();
    for (pair, expected) in EXAMPLE_VALUES {
        let got = sp_of_subset(&image, &pair, &params)?.sp_value;
        let close = (got - expected).abs() <= EXAMPLE_TOLERANCE;
        ok &= close;
        pairs.push(json!({
            "subset": one_based(&pair),
            "distance": num(image.distance(pair[0], pair[1])),
            "sp_value": num(got),
            "expected": num(expected),
            "matches": close,
        }));
    }
    let opts = SelectOptions::default();
    let selected = sp_select_exact(&image, 2, &params, &opts)?;
    let unique_winner = selected.all_optima.len() == 1 && selected.best.indices == [1, 2];
    ok &= unique_winner;
    let decision = decide_via_sp(&inst, &opts)?;
    ok &= decision.witness.as_deref() == Some(&[1, 2][..]);
    let v = verify_instance(inst, &opts)?;
    ok &= v.passed;
    r.result("pairs", json!(pairs))
        .result("best", selection(&selected.best))
        .result("unique_optimum", json!(unique_winner))
        .result("decision", json!(decision.accept))
        .result(
            "independent_sets",
            json!(v
                .independent_sets
                .iter()
                .map(|s| one_based(s))
                .collect::<Vec<_>>()),
        )
        .result("certificate", certificate_json(&v.instance.certificate))
        .result("passed", json!(ok));
    r.diag("tolerance", num(EXAMPLE_TOLERANCE));
    r.exit_code = if ok { EXIT_OK } else { EXIT_MISMATCH };
    Ok(r)
}

pub fn execute(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::Eval {
            input,
            theta0,
            subset,
        } => cmd_eval(input, *theta0, subset.as_deref()),
        Command::Select {
            input,
            theta0,
            k,
            greedy,
            budget,
        } => cmd_select(input, *theta0, *k, *greedy, *budget),
        Command::Margins { input } => cmd_margins(input),
        Command::Reduce {
            input,
            theta0,
            k,
            mode,
            slack,
            output,
        } => cmd_reduce(input, *theta0, *k, *mode, *slack, output.as_deref()),
        Command::Verify {
            input,
            theta0,
            k,
            slack,
            budget,
        } => cmd_verify(input, *theta0, *k, *slack, *budget),
        Command::Example => cmd_example(),
    }
}

/// Parses arguments, runs the command and writes its output. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot start thread pool: {e}"))),
        },
        None => execute(&cli.command),
    };
    match result {
        Ok(report) => {
            let text = if cli.json {
                report.to_json()
            } else {
                report.to_table()
            };
            let _ = out.write_all(text.as_bytes());
            report.exit_code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
