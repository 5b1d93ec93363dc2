//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code: 0 on success, 1 on usage or input
//! errors, 2 on numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::constraints::{smoothness_matrix, SplineSpace};
use crate::dimension::{dimension_report, schumaker_bounds, DimensionError, DEFAULT_SLOPE_TOL};
use crate::fit::{
    contours_csv, extract_contour, fit_penalized, fmt_real, grid_points, interpolate_min_energy, sample_grid,
    solve_levelset, FitError, LevelSetProblem, Spline, LEVELSET_LAMBDA,
};
use crate::functions::{benchmark_function, manufactured, Manufactured, TestFunction, BENCHMARK};
use crate::kst::{
    benchmark_suite, dls_fit, lkb_build, BenchmarkConfig, InnerFunctions, KBBasis, KstError, LKBBasis,
    DEFAULT_LAMBDA, DEFAULT_RESOLUTION, DEFAULT_STEP, DLS_TEST_N, DLS_TRAIN_N,
};
use crate::lsq::{LsqConfig, LsqError, ObjectiveTerm, QuadraticProgram, SolveReport};
use crate::mesh::{load_mesh, single_triangle, square_grid, two_triangle_square, MeshError, Point2, Triangulation};
use crate::pde::{
    convergence_study, error_norms, solve_elliptic, ConvergenceReport, ConvergenceRow, Coef, EdgeSites,
    EllipticOptions, EllipticProblem, PdeError,
};
use crate::constraints::{BlockLabel, ConstraintBlock, ConstraintError};
use crate::sparse::{SparseError, SparseMatrix};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<LsqError> for CliError {
    fn from(e: LsqError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Lsq(e) => e.into(),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::Lsq(e) => e.into(),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<KstError> for CliError {
    fn from(e: KstError) -> Self {
        match e {
            KstError::Fit(e) => e.into(),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DimensionError> for CliError {
    fn from(e: DimensionError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ConstraintError> for CliError {
    fn from(e: ConstraintError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SparseError> for CliError {
    fn from(e: SparseError) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "splinekit", version, about = "Bivariate splines over triangulations")]
struct Cli {
    /// Worker threads for parallel loops (default: all cores).
    #[arg(long, global = true, env = "SPLINEKIT_THREADS")]
    threads: Option<usize>,
    /// Print the resolved configuration and exit without computing.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimension bounds and the rank-based dimension of S^r_d.
    Dim(DimArgs),
    /// Penalized least-squares fit of scattered data.
    Fit(FitArgs),
    /// Minimal-energy interpolation of scattered data.
    Interp(InterpArgs),
    /// Implicit curve as the level-1 set of a penalized fit.
    Levelset(LevelsetArgs),
    /// Contour polylines of a saved spline.
    Contour(ContourArgs),
    /// Sample a saved spline on a uniform grid.
    Sample(SampleArgs),
    /// Collocation solve of -Δu = f with Dirichlet data.
    Poisson(PdeArgs),
    /// Collocation solve of a variable-coefficient elliptic problem.
    Elliptic(PdeArgs),
    /// Errors and rates over uniform refinements.
    Converge(ConvergeArgs),
    /// Build or apply a smoothed Kolmogorov spline basis.
    Lkb {
        #[command(subcommand)]
        action: LkbCommand,
    },
    /// RMSE table of the benchmark functions for several basis sizes.
    Bench(BenchArgs),
    /// Constrained least squares on Matrix Market input.
    Lsq(LsqArgs),
}

#[derive(Args, Debug, Clone)]
struct SpaceArgs {
    /// Mesh file, or square_grid:K, single_triangle, two_triangle_square.
    #[arg(long, default_value = "square_grid:4")]
    mesh: String,
    /// Polynomial degree.
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Smoothness order; -1 for discontinuous.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    r: i32,
}

#[derive(Args, Debug)]
struct DimArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Tolerance for equal edge slopes, in radians.
    #[arg(long, default_value_t = DEFAULT_SLOPE_TOL)]
    slope_tol: f64,
    /// Skip the rank computation.
    #[arg(long)]
    no_rank: bool,
    /// Write the smoothness matrix H in Matrix Market format.
    #[arg(long)]
    export_h: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV of x,y,z rows (an optional header line is skipped).
    #[arg(long, conflicts_with = "target")]
    data: Option<PathBuf>,
    /// Built-in function sampled on a grid instead of a data file.
    #[arg(long)]
    target: Option<String>,
    /// Grid size per side for --target samples.
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// Standard deviation of Gaussian noise added to --target samples.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Weight of the thin-plate energy.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Coefficient CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solve report output (key=value); stderr when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InterpArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LevelsetArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// CSV of x,y points on the curve (target 1).
    #[arg(long, required_unless_present = "circle")]
    cloud: Option<PathBuf>,
    /// CSV of x,y points on the outer boundary (target 0).
    #[arg(long, required_unless_present = "circle")]
    outer: Option<PathBuf>,
    /// CSV of x,y points on hole boundaries (target 2).
    #[arg(long)]
    holes: Option<PathBuf>,
    /// Use a circle of this radius centered in the mesh bounding box.
    #[arg(long, conflicts_with_all = ["cloud", "outer"])]
    circle: Option<f64>,
    #[arg(long, default_value_t = 200)]
    cloud_samples: usize,
    #[arg(long, default_value_t = 50)]
    boundary_samples: usize,
    #[arg(long, default_value_t = LEVELSET_LAMBDA)]
    lambda: f64,
    /// Grid size for contour extraction.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Coefficient CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Level-1 contour CSV output.
    #[arg(long)]
    contours: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ContourArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Coefficient CSV written by fit, interp or levelset.
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    level: f64,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SitesArg {
    PerTriangle,
    Deduplicated,
}

impl From<SitesArg> for EdgeSites {
    fn from(s: SitesArg) -> Self {
        match s {
            SitesArg::PerTriangle => EdgeSites::PerTriangle,
            SitesArg::Deduplicated => EdgeSites::Deduplicated,
        }
    }
}

#[derive(Args, Debug)]
struct PdeArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Collocation degree; 0 uses d.
    #[arg(long, default_value_t = 0)]
    dprime: usize,
    /// Manufactured exact solution; sets f and the boundary data.
    #[arg(long, required_unless_present = "rhs")]
    exact: Option<String>,
    /// Built-in right-hand side f (when no exact solution is given).
    #[arg(long, conflicts_with = "exact")]
    rhs: Option<String>,
    /// Built-in boundary data g for --rhs (default 0).
    #[arg(long, requires = "rhs")]
    bc: Option<String>,
    #[arg(long, value_enum, default_value_t = SitesArg::PerTriangle)]
    edge_sites: SitesArg,
    /// Grid size per side for the error evaluation.
    #[arg(long, default_value_t = 501)]
    grid: usize,
    /// Error row CSV (with --exact) or solve report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Coefficient CSV output.
    #[arg(long)]
    coeffs: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum OperatorArg {
    Poisson,
    Variable,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    /// Base mesh of the refinement sequence.
    #[arg(long, default_value = "square_grid:2")]
    mesh: String,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    r: i32,
    #[arg(long, default_value_t = 0)]
    dprime: usize,
    #[arg(long, default_value = "sinpi")]
    exact: String,
    #[arg(long, value_enum, default_value_t = OperatorArg::Poisson)]
    operator: OperatorArg,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, value_enum, default_value_t = SitesArg::PerTriangle)]
    edge_sites: SitesArg,
    #[arg(long, default_value_t = 201)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum LkbCommand {
    /// Smooth the KB functions and save their coefficients.
    Build(LkbBuildArgs),
    /// Least-squares fit of a built-in function in a saved basis.
    Fit(LkbFitArgs),
}

#[derive(Args, Debug, Clone)]
struct InnerArgs {
    /// Digit resolution of the inner functions.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Exponent step of the digit weights.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Inner weights as "l1,l2".
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = DEFAULT_LAMBDA)]
    weights: Vec<f64>,
    /// B-spline degree.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Thin-plate weight of the smoothing fits.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Training grid size per side.
    #[arg(long, default_value_t = DLS_TRAIN_N)]
    grid: usize,
}

#[derive(Args, Debug)]
struct LkbBuildArgs {
    /// Basis size parameter; the basis has 2n functions.
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    inner: InnerArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LkbFitArgs {
    #[arg(long)]
    basis: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = DLS_TEST_N)]
    test_grid: usize,
    /// Weights output, one per line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    sizes: Vec<usize>,
    /// Subset of f1..f10 (default all).
    #[arg(long, value_delimiter = ',')]
    functions: Vec<String>,
    #[command(flatten)]
    inner: InnerArgs,
    #[arg(long, default_value_t = DLS_TEST_N)]
    test_grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LsqArgs {
    /// Objective matrix A.
    #[arg(long)]
    matrix: PathBuf,
    /// Objective right-hand side f, one value per line.
    #[arg(long)]
    rhs: PathBuf,
    /// Equality constraint matrix C.
    #[arg(long, requires = "constraint_rhs")]
    constraints: Option<PathBuf>,
    /// Constraint right-hand side g.
    #[arg(long, requires = "constraints")]
    constraint_rhs: Option<PathBuf>,
    /// Solve through the KKT system instead of the augmented Lagrangian.
    #[arg(long)]
    direct: bool,
    /// Solution output, one value per line.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Resolved settings of one invocation, printed by `--dry-run`.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub command: String,
    pub mesh: Option<String>,
    pub d: Option<usize>,
    pub r: Option<i32>,
    pub dprime: Option<usize>,
    pub lambda: Option<f64>,
    pub grid_n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub extra: Vec<(String, String)>,
}

impl RunConfig {
    fn new(command: &str, threads: Option<usize>) -> Self {
        Self {
            command: command.to_string(),
            threads,
            ..Default::default()
        }
    }

    fn space(mut self, s: &SpaceArgs) -> Self {
        self.mesh = Some(s.mesh.clone());
        self.d = Some(s.d);
        self.r = Some(s.r);
        self
    }

    fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(CliError::Usage(format!("lambda must be finite and nonnegative, got {l}")));
            }
        }
        if let Some(n) = self.grid_n {
            if n < 2 {
                return Err(CliError::Usage(format!("grid needs at least 2 points per side, got {n}")));
            }
        }
        if let (Some(d), Some(r)) = (self.d, self.r) {
            if d == 0 || r < -1 || r > d as i32 {
                return Err(CliError::Usage(format!("need d >= 1 and -1 <= r <= d, got d={d}, r={r}")));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        if let Some(m) = &self.mesh {
            let _ = writeln!(s, "mesh={m}");
        }
        if let Some(d) = self.d {
            let _ = writeln!(s, "d={d}");
        }
        if let Some(r) = self.r {
            let _ = writeln!(s, "r={r}");
        }
        if let Some(d) = self.dprime {
            let _ = writeln!(s, "dprime={d}");
        }
        if let Some(l) = self.lambda {
            let _ = writeln!(s, "lambda={}", fmt_real(l));
        }
        if let Some(n) = self.grid_n {
            let _ = writeln!(s, "grid_n={n}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out={}", o.display());
        }
        if let Some(t) = self.threads {
            let _ = writeln!(s, "threads={t}");
        }
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        // only the first call in a process can size the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let t = cli.threads;
    let dry = cli.dry_run;
    match &cli.command {
        Command::Dim(a) => cmd_dim(a, t, dry),
        Command::Fit(a) => cmd_fit(a, t, dry),
        Command::Interp(a) => cmd_interp(a, t, dry),
        Command::Levelset(a) => cmd_levelset(a, t, dry),
        Command::Contour(a) => cmd_contour(a, t, dry),
        Command::Sample(a) => cmd_sample(a, t, dry),
        Command::Poisson(a) => cmd_pde(a, false, t, dry),
        Command::Elliptic(a) => cmd_pde(a, true, t, dry),
        Command::Converge(a) => cmd_converge(a, t, dry),
        Command::Lkb { action } => match action {
            LkbCommand::Build(a) => cmd_lkb_build(a, t, dry),
            LkbCommand::Fit(a) => cmd_lkb_fit(a, t, dry),
        },
        Command::Bench(a) => cmd_bench(a, t, dry),
        Command::Lsq(a) => cmd_lsq(a, t, dry),
    }
}

/// Validates `cfg`; with `dry` prints it and returns `false`.
fn proceed(cfg: &RunConfig, dry: bool) -> Result<bool> {
    cfg.validate()?;
    if dry {
        print!("{}", cfg.to_key_value());
        return Ok(false);
    }
    Ok(true)
}

/// Resolves a built-in mesh name or reads a mesh file.
pub fn builtin_mesh(spec: &str) -> Result<Triangulation> {
    let spec = spec.trim();
    let grid = spec
        .strip_prefix("square_grid:")
        .or_else(|| spec.strip_prefix("square_grid(").and_then(|s| s.strip_suffix(')')));
    if let Some(k) = grid {
        let k: usize = k
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| CliError::Usage(format!("bad grid size in `{spec}`")))?;
        return Ok(square_grid(k));
    }
    match spec {
        "single_triangle" => Ok(single_triangle()),
        "two_triangle_square" => Ok(two_triangle_square()),
        path => {
            let p = Path::new(path);
            if !p.exists() {
                return Err(CliError::Usage(format!("unknown mesh `{path}`")));
            }
            Ok(load_mesh(p)?)
        }
    }
}

fn space_of(a: &SpaceArgs) -> Result<SplineSpace> {
    Ok(SplineSpace::new(builtin_mesh(&a.mesh)?, a.d, a.r)?)
}

fn target_fn(name: &str) -> Result<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
    if let Some(t) = benchmark_function(name) {
        return Ok(Arc::new(t.f));
    }
    if let Some(m) = manufactured(name) {
        return Ok(Arc::new(m.u));
    }
    match name {
        "zero" => Ok(Arc::new(|_, _| 0.0)),
        _ => Err(CliError::Usage(format!("unknown function `{name}`"))),
    }
}

fn manufactured_by_name(name: &str) -> Result<Manufactured> {
    manufactured(name).ok_or_else(|| CliError::Usage(format!("unknown exact solution `{name}`")))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to `path` or stdout.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes to `path` or stderr.
fn emit_report(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

/// Numeric CSV rows with `width` columns; a non-numeric first line is taken
/// as a header.
fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let text = read_file(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match vals {
            Ok(v) if v.len() == width => rows.push(v),
            Err(_) if i == 0 => continue,
            _ => {
                return Err(CliError::Usage(format!(
                    "{}: record {} needs {width} numeric fields",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(rows)
}

fn read_points(path: &Path) -> Result<Vec<Point2>> {
    Ok(read_rows(path, 2)?.into_iter().map(|r| Point2::new(r[0], r[1])).collect())
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    Ok(read_rows(path, 1)?.into_iter().map(|r| r[0]).collect())
}

fn vector_text(v: &[f64]) -> String {
    let mut s = String::new();
    for x in v {
        s.push_str(&fmt_real(*x));
        s.push('\n');
    }
    s
}

/// Scattered data from a file, or grid samples of a built-in function
/// inside the mesh with optional seeded Gaussian noise.
fn load_data(a: &DataArgs, mesh: &Triangulation) -> Result<(Vec<Point2>, Vec<f64>)> {
    if let Some(path) = &a.data {
        let rows = read_rows(path, 3)?;
        return Ok(rows.iter().map(|r| (Point2::new(r[0], r[1]), r[2])).unzip());
    }
    let name = a
        .target
        .as_deref()
        .ok_or_else(|| CliError::Usage("either --data or --target is required".into()))?;
    let f = target_fn(name)?;
    if a.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let (lo, hi) = mesh.bbox();
    let pts: Vec<Point2> = grid_points(lo, hi, a.samples)
        .into_iter()
        .filter(|&p| mesh.locate(p).is_some())
        .collect();
    let mut z: Vec<f64> = pts.iter().map(|p| f(p.x, p.y)).collect();
    if a.noise > 0.0 {
        let normal = Normal::new(0.0, a.noise).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        for v in &mut z {
            *v += normal.sample(&mut rng);
        }
    }
    Ok((pts, z))
}

fn data_config(cfg: RunConfig, a: &DataArgs) -> RunConfig {
    let cfg = match (&a.data, &a.target) {
        (Some(p), _) => cfg.with("data", p.display()),
        (None, Some(t)) => cfg
            .with("target", t)
            .with("samples", a.samples)
            .with("noise", fmt_real(a.noise)),
        (None, None) => cfg,
    };
    RunConfig {
        seed: Some(a.seed),
        ..cfg
    }
}

fn cmd_dim(a: &DimArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = RunConfig::new("dim", threads)
        .space(&a.space)
        .with("slope_tol", fmt_real(a.slope_tol))
        .with("rank", !a.no_rank);
    cfg.out = a.out.clone();
    if let Some(p) = &a.export_h {
        cfg = cfg.with("export_h", p.display());
    }
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let space = space_of(&a.space)?;
    let rep = if a.no_rank {
        schumaker_bounds(&space, a.slope_tol)?
    } else {
        dimension_report(&space, a.slope_tol)?
    };
    if let Some(p) = &a.export_h {
        smoothness_matrix(&space).matrix.write_matrix_market(p)?;
    }
    emit(a.out.as_deref(), &rep.to_key_value())
}

fn finish_fit(s: &Spline, rep: &SolveReport, out: Option<&Path>, report: Option<&Path>) -> Result<()> {
    emit(out, &s.coeffs_csv())?;
    emit_report(report, &rep.to_text())
}

fn cmd_fit(a: &FitArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = data_config(RunConfig::new("fit", threads).space(&a.space), &a.data);
    cfg.lambda = Some(a.lambda);
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let space = space_of(&a.space)?;
    let (pts, z) = load_data(&a.data, space.mesh())?;
    let (s, rep) = fit_penalized(&space, &pts, &z, a.lambda, &LsqConfig::default())?;
    finish_fit(&s, &rep, a.out.as_deref(), a.report.as_deref())
}

fn cmd_interp(a: &InterpArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = data_config(RunConfig::new("interp", threads).space(&a.space), &a.data);
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let space = space_of(&a.space)?;
    let (pts, z) = load_data(&a.data, space.mesh())?;
    let (s, rep) = interpolate_min_energy(&space, &pts, &z, &LsqConfig::default())?;
    finish_fit(&s, &rep, a.out.as_deref(), a.report.as_deref())
}

fn cmd_levelset(a: &LevelsetArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = RunConfig::new("levelset", threads).space(&a.space);
    cfg.lambda = Some(a.lambda);
    cfg.grid_n = Some(a.grid);
    cfg.out = a.out.clone();
    cfg = match a.circle {
        Some(r) => cfg
            .with("circle", fmt_real(r))
            .with("cloud_samples", a.cloud_samples)
            .with("boundary_samples", a.boundary_samples),
        None => {
            let show = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
            cfg.with("cloud", show(&a.cloud))
                .with("outer", show(&a.outer))
                .with("holes", show(&a.holes))
        }
    };
    if let Some(c) = &a.contours {
        cfg = cfg.with("contours", c.display());
    }
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let space = space_of(&a.space)?;
    let mut problem = match a.circle {
        Some(r) => {
            let (lo, hi) = space.mesh().bbox();
            let center = Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
            LevelSetProblem::circle(center, r, a.cloud_samples, lo, hi, a.boundary_samples)
        }
        None => LevelSetProblem {
            cloud: read_points(a.cloud.as_deref().expect("required by clap"))?,
            outer: read_points(a.outer.as_deref().expect("required by clap"))?,
            holes: match &a.holes {
                Some(p) => read_points(p)?,
                None => Vec::new(),
            },
            lambda: a.lambda,
        },
    };
    problem.lambda = a.lambda;
    let (s, rep) = solve_levelset(&problem, &space, &LsqConfig::default())?;
    if let Some(p) = &a.contours {
        write_file(p, &contours_csv(&extract_contour(&s, 1.0, a.grid)))?;
    }
    finish_fit(&s, &rep, a.out.as_deref(), a.report.as_deref())
}

fn load_spline(space: &SpaceArgs, coeffs: &Path) -> Result<Spline> {
    let space = space_of(space)?;
    Ok(Spline::load_coeffs(space, coeffs)?)
}

fn cmd_contour(a: &ContourArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = RunConfig::new("contour", threads)
        .space(&a.space)
        .with("coeffs", a.coeffs.display())
        .with("level", fmt_real(a.level));
    cfg.grid_n = Some(a.grid);
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let s = load_spline(&a.space, &a.coeffs)?;
    emit(a.out.as_deref(), &contours_csv(&extract_contour(&s, a.level, a.grid)))
}

fn cmd_sample(a: &SampleArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = RunConfig::new("sample", threads)
        .space(&a.space)
        .with("coeffs", a.coeffs.display());
    cfg.grid_n = Some(a.grid);
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let s = load_spline(&a.space, &a.coeffs)?;
    emit(a.out.as_deref(), &sample_grid(&s, a.grid).to_csv())
}

fn coef(f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>) -> Coef {
    Arc::new(move |p: Point2| f(p.x, p.y))
}

fn row_csv(rows: &[ConvergenceRow]) -> String {
    let rep = ConvergenceReport {
        rows: rows.to_vec(),
        l2_rate: crate::pde::Rate::Exact,
        grad_rate: crate::pde::Rate::Exact,
    };
    // a single solve has no rate; keep only the table
    rep.to_csv().lines().filter(|l| !l.starts_with('#')).fold(String::new(), |mut s, l| {
        s.push_str(l);
        s.push('\n');
        s
    })
}

fn cmd_pde(a: &PdeArgs, variable: bool, threads: Option<usize>, dry: bool) -> Result<()> {
    let name = if variable { "elliptic" } else { "poisson" };
    let mut cfg = RunConfig::new(name, threads)
        .space(&a.space)
        .with("edge_sites", format!("{:?}", a.edge_sites));
    cfg.dprime = Some(if a.dprime == 0 { a.space.d } else { a.dprime });
    cfg.grid_n = Some(a.grid);
    cfg.out = a.out.clone();
    cfg = match (&a.exact, &a.rhs) {
        (Some(e), _) => cfg.with("exact", e),
        (None, Some(f)) => cfg.with("rhs", f).with("bc", a.bc.as_deref().unwrap_or("zero")),
        _ => cfg,
    };
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let space = space_of(&a.space)?;
    let exact = a.exact.as_deref().map(manufactured_by_name).transpose()?;
    let problem = match (exact, &a.rhs) {
        (Some(m), _) if variable => EllipticProblem::variable_for(m),
        (Some(m), _) => EllipticProblem::poisson_for(m),
        (None, Some(f)) => {
            let f = coef(target_fn(f)?);
            let g = coef(target_fn(a.bc.as_deref().unwrap_or("zero"))?);
            if variable {
                EllipticProblem::variable(f, g)
            } else {
                EllipticProblem::poisson(f, g)
            }
        }
        (None, None) => return Err(CliError::Usage("either --exact or --rhs is required".into())),
    };
    let opts = EllipticOptions {
        dprime: a.dprime,
        edge_sites: a.edge_sites.into(),
        ..Default::default()
    };
    let (s, rep) = solve_elliptic(&space, &problem, &opts)?;
    if let Some(p) = &a.coeffs {
        write_file(p, &s.coeffs_csv())?;
    }
    match exact {
        Some(m) => {
            let e = error_norms(&s, &m, a.grid);
            let mesh = space.mesh();
            let row = ConvergenceRow {
                level: 0,
                mesh_size: mesh.mesh_size(),
                num_triangles: mesh.num_triangles(),
                l2: e.l2,
                grad_l2: e.grad_l2,
                rmse: e.rmse,
                max: e.max,
                epsilon1: rep.epsilon1.unwrap_or(f64::NAN),
            };
            emit(a.out.as_deref(), &row_csv(&[row]))
        }
        None => emit(a.out.as_deref(), &rep.to_text()),
    }
}

fn cmd_converge(a: &ConvergeArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = RunConfig::new("converge", threads)
        .with("exact", &a.exact)
        .with("operator", format!("{:?}", a.operator))
        .with("levels", a.levels)
        .with("edge_sites", format!("{:?}", a.edge_sites));
    cfg.mesh = Some(a.mesh.clone());
    cfg.d = Some(a.d);
    cfg.r = Some(a.r);
    cfg.dprime = Some(if a.dprime == 0 { a.d } else { a.dprime });
    cfg.grid_n = Some(a.grid);
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let m = manufactured_by_name(&a.exact)?;
    let problem = match a.operator {
        OperatorArg::Poisson => EllipticProblem::poisson_for(m),
        OperatorArg::Variable => EllipticProblem::variable_for(m),
    };
    let opts = EllipticOptions {
        dprime: a.dprime,
        edge_sites: a.edge_sites.into(),
        ..Default::default()
    };
    let base = builtin_mesh(&a.mesh)?;
    let rep = convergence_study(&problem, &m, &base, a.d, a.r, a.levels, a.grid, &opts)?;
    emit(a.out.as_deref(), &rep.to_csv())
}

fn inner_config(cfg: RunConfig, a: &InnerArgs) -> RunConfig {
    let mut cfg = cfg
        .with("resolution", a.resolution)
        .with("step", fmt_real(a.step))
        .with(
            "weights",
            a.weights.iter().map(|w| fmt_real(*w)).collect::<Vec<_>>().join(","),
        )
        .with("k", a.k);
    cfg.lambda = Some(a.lambda);
    cfg.grid_n = Some(a.grid);
    cfg
}

fn inner_of(a: &InnerArgs) -> Result<InnerFunctions> {
    Ok(InnerFunctions::with_step(a.resolution, [a.weights[0], a.weights[1]], a.step)?)
}

fn cmd_lkb_build(a: &LkbBuildArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = inner_config(RunConfig::new("lkb build", threads), &a.inner).with("n", a.n);
    cfg.out = Some(a.out.clone());
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let kb = KBBasis::new(inner_of(&a.inner)?, a.n, a.inner.k)?;
    let lkb = lkb_build(&kb, a.inner.grid, a.inner.lambda, &LsqConfig::default())?;
    lkb.save(&a.out)?;
    println!("functions={}", lkb.len());
    Ok(())
}

fn cmd_lkb_fit(a: &LkbFitArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = RunConfig::new("lkb fit", threads)
        .with("basis", a.basis.display())
        .with("target", &a.target)
        .with("test_grid", a.test_grid);
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let f = benchmark_function(&a.target)
        .ok_or_else(|| CliError::Usage(format!("unknown benchmark function `{}`", a.target)))?;
    let lkb = LKBBasis::load(&a.basis)?;
    let fit = dls_fit(&lkb, f.f, lkb.grid_n, a.test_grid);
    if let Some(p) = &a.out {
        write_file(p, &vector_text(&fit.weights))?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "target={}", a.target);
    let _ = writeln!(s, "functions={}", lkb.len());
    let _ = writeln!(s, "rmse_train={}", fmt_real(fit.rmse_train));
    let _ = writeln!(s, "rmse_test={}", fmt_real(fit.rmse_test));
    let _ = writeln!(s, "rank_deficient={}", fit.rank_deficient);
    print!("{s}");
    Ok(())
}

fn cmd_bench(a: &BenchArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let sizes = a.sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
    let mut cfg = inner_config(RunConfig::new("bench", threads), &a.inner)
        .with("sizes", sizes)
        .with("test_grid", a.test_grid);
    if !a.functions.is_empty() {
        cfg = cfg.with("functions", a.functions.join(","));
    }
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let functions: Vec<TestFunction> = if a.functions.is_empty() {
        BENCHMARK.to_vec()
    } else {
        a.functions
            .iter()
            .map(|n| benchmark_function(n).ok_or_else(|| CliError::Usage(format!("unknown benchmark function `{n}`"))))
            .collect::<Result<_>>()?
    };
    let bc = BenchmarkConfig {
        resolution: a.inner.resolution,
        step: a.inner.step,
        lambda_inner: [a.inner.weights[0], a.inner.weights[1]],
        k: a.inner.k,
        smoothing_lambda: a.inner.lambda,
        train_n: a.inner.grid,
        test_n: a.test_grid,
    };
    let table = benchmark_suite(&functions, &a.sizes, &bc, &LsqConfig::default())?;
    emit(a.out.as_deref(), &table.to_csv())
}

fn cmd_lsq(a: &LsqArgs, threads: Option<usize>, dry: bool) -> Result<()> {
    let mut cfg = RunConfig::new("lsq", threads)
        .with("matrix", a.matrix.display())
        .with("rhs", a.rhs.display())
        .with("direct", a.direct);
    if let (Some(c), Some(g)) = (&a.constraints, &a.constraint_rhs) {
        cfg = cfg.with("constraints", c.display()).with("constraint_rhs", g.display());
    }
    cfg.out = a.out.clone();
    if !proceed(&cfg, dry)? {
        return Ok(());
    }
    let m = SparseMatrix::read_matrix_market(&a.matrix)?;
    let f = read_vector(&a.rhs)?;
    if f.len() != m.nrows() {
        return Err(CliError::Usage(format!(
            "rhs has {} values for {} matrix rows",
            f.len(),
            m.nrows()
        )));
    }
    let mut qp = QuadraticProgram::new(m.ncols());
    qp.terms.push(ObjectiveTerm {
        matrix: m,
        rhs: f,
        weight: 1.0,
    });
    if let (Some(cp), Some(gp)) = (&a.constraints, &a.constraint_rhs) {
        let c = SparseMatrix::read_matrix_market(cp)?;
        let g = read_vector(gp)?;
        if g.len() != c.nrows() {
            return Err(CliError::Usage(format!(
                "constraint rhs has {} values for {} rows",
                g.len(),
                c.nrows()
            )));
        }
        qp.equalities.push(ConstraintBlock {
            matrix: c,
            rhs: g,
            label: BlockLabel::Interp,
        });
    }
    let lsq = LsqConfig::default();
    let rep = if a.direct { qp.solve_direct(&lsq)? } else { qp.solve(&lsq)? };
    emit(a.out.as_deref(), &vector_text(&rep.c))?;
    emit_report(a.report.as_deref(), &rep.to_text())
}
