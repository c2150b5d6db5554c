//! Batch command-line surface for the folding-map solvers.
//!
//! Every subcommand reads meshes and sidecar files, runs one pipeline from
//! the `qcfold` library, and writes its outputs atomically (temp file plus
//! rename). Exit codes follow a fixed contract for scripting:
//!
//! - 0: success
//! - 1: input error (unreadable or malformed files, invalid problem setup)
//! - 2: numeric failure (factorization breakdown, residual above tolerance,
//!   degenerate geometry discovered mid-run)
//!
//! Geometry outputs are byte-identical across reruns on the same machine;
//! the `seconds` column of iteration logs is wall-clock time and is the one
//! exception. The `QCFOLD_THREADS` environment variable caps internal
//! parallelism (unset or 1 means sequential, which is bit-reproducible).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qcfold::coeff::CoeffError;
use qcfold::foldconfig::{
    classify_singular_vertices, kawasaki_defect, max_distortion, VertexClass,
};
use qcfold::mesh::{load_mesh, load_raw, save_embedding, save_mesh};
use qcfold::patterns::{miura_pattern, MiuraSpec, PatternError};
use qcfold::reinforce::{reinforce, IterationLog, ReinforceError, ReinforceProblem};
use qcfold::solver::{fold_edge_pins, lsqc_solve, SolveError};
use qcfold::{BeltramiField, FoldColoring, Mode, Mu, PinSet, TriMesh};

/// Version stamp written into every JSON report.
const FORMAT: u64 = 1;

const OBJ_HELP: &str = "\
Meshes are ASCII OBJ: `v x y z` lines (z must be 0) and `f i j k` lines \
with 1-based vertex indices. All sidecar files index vertices and faces \
0-based.";

#[derive(Parser)]
#[command(
    name = "qcfold",
    version,
    about = "Solvers for surface folding maps via alternating Beltrami equations",
    after_help = "Set QCFOLD_THREADS to cap internal parallelism; unset or 1 runs \
sequentially and is bit-reproducible."
)]
struct Cli {
    /// Label echoed into JSON reports. No command draws random numbers, so
    /// the seed only tags runs for bookkeeping.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one pin-constrained Beltrami problem and write the image mesh.
    Solve(SolveArgs),
    /// Recover a flat-foldable surface from partial data by alternating
    /// fold and unfold solves.
    Reinforce(ReinforceArgs),
    /// Generate a Miura-ori pattern mesh and its mountain/valley coloring.
    Miura(MiuraArgs),
    /// Check a colored mesh for flat-foldability: Kawasaki defects plus the
    /// distortion of a test fold.
    Check(CheckArgs),
    /// Measure the per-face Beltrami coefficient between two meshes with
    /// identical connectivity.
    Mu(MuArgs),
}

#[derive(Args)]
#[command(after_help = format!(
    "{OBJ_HELP}\n\nThe coefficient file is JSON: {{\"faces\": [{{\"face\": 0, \
\"mu\": [re, im]}}, {{\"face\": 3, \"mu\": \"inf\"}}]}}; omitted faces mean mu = 0. \
Pins are a JSON array of {{\"vertex\": int, \"x\": float, \"y\": float}} with at \
least two entries. The report JSON carries format, residual, energy, and \
coefficient statistics of the solved map."
))]
struct SolveArgs {
    /// Domain mesh (OBJ).
    #[arg(long)]
    mesh: PathBuf,
    /// Per-face Beltrami coefficients (JSON).
    #[arg(long)]
    mu: PathBuf,
    /// Pin constraints (JSON).
    #[arg(long)]
    pins: PathBuf,
    /// Energy convention for orientation-reversing faces.
    #[arg(long, value_enum, default_value_t = ModeArg::Signed)]
    mode: ModeArg,
    /// Output image mesh (OBJ).
    #[arg(long)]
    out: PathBuf,
    /// Output report (JSON); defaults to the image path with a
    /// `.report.json` extension.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Allow outputs to overwrite inputs.
    #[arg(long)]
    in_place: bool,
}

#[derive(Args)]
#[command(after_help = format!(
    "{OBJ_HELP}\n\nThe coloring file is JSON {{\"faces\": [1, -1, ...]}} with one \
label per face. Vis pins constrain visible vertices in fold solves; shape \
pins constrain boundary vertices in unfold solves; both are JSON pin arrays. \
Outputs: PREFIX.domain.obj (recovered flat domain), PREFIX.fold.obj (its \
folded image, when at least one iteration ran), PREFIX.log.csv \
(`iter,energy,loss,max_distortion,seconds` per iteration; seconds is \
wall-clock and not reproducible), PREFIX.report.json."
))]
struct ReinforceArgs {
    /// Initial flat domain mesh (OBJ).
    #[arg(long)]
    domain: PathBuf,
    /// Mountain/valley coloring (JSON).
    #[arg(long)]
    coloring: PathBuf,
    /// Pins for fold solves (JSON).
    #[arg(long)]
    vis_pins: PathBuf,
    /// Pins for unfold solves; every pinned vertex must lie on the boundary
    /// (JSON).
    #[arg(long)]
    shape_pins: PathBuf,
    /// Stop when the fold energy changes by at most this much per iteration.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    /// Iteration budget.
    #[arg(long, default_value_t = 200)]
    itermax: usize,
    /// Straighten recovered folding lines every K iterations; 0 disables.
    #[arg(long, value_name = "K", default_value_t = 25)]
    straighten_every: usize,
    /// Prefix for the output files.
    #[arg(long)]
    out_prefix: String,
    /// Allow outputs to overwrite inputs.
    #[arg(long)]
    in_place: bool,
}

#[derive(Args)]
#[command(after_help = format!(
    "{OBJ_HELP}\n\nThe coloring JSON labels each triangle +1 or -1; \
parallelogram cells alternate in a checkerboard. ROWS and COLS count unit \
cells of 2x2 parallelograms each."
))]
struct MiuraArgs {
    /// Unit cells along the pleat direction.
    rows: usize,
    /// Unit cells across the pleats.
    cols: usize,
    /// Parallelogram angle in degrees, strictly between 0 and 90.
    #[arg(long)]
    angle: f64,
    /// Parallelogram base width.
    #[arg(long, default_value_t = 1.0)]
    cell_width: f64,
    /// Parallelogram height.
    #[arg(long, default_value_t = 1.0)]
    cell_height: f64,
    /// Output pattern mesh (OBJ).
    #[arg(long)]
    out: PathBuf,
    /// Output coloring (JSON); defaults to the pattern path with a
    /// `.coloring.json` extension.
    #[arg(long)]
    coloring_out: Option<PathBuf>,
}

#[derive(Args)]
#[command(after_help = format!(
    "{OBJ_HELP}\n\nPrints one line per singular vertex of the coloring with \
its class and Kawasaki defect (interior vertices only; the defect is the \
alternating sum of sector angles, zero exactly when folds can flatten the \
vertex), then the max distortion of a test fold anchored at one boundary \
edge. The optional report repeats this in JSON."
))]
struct CheckArgs {
    /// Mesh to check (OBJ).
    #[arg(long)]
    mesh: PathBuf,
    /// Mountain/valley coloring (JSON).
    #[arg(long)]
    coloring: PathBuf,
    /// Optional JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
#[command(after_help = format!(
    "{OBJ_HELP}\n\nThe image mesh must have the same face list as the domain \
mesh; it is read without orientation validation so reflected or folded \
images are fine. The output is a coefficient JSON as consumed by `solve \
--mu`, with \"inf\" entries for orientation-reversing faces."
))]
struct MuArgs {
    /// Domain mesh (OBJ, validated).
    #[arg(long)]
    domain: PathBuf,
    /// Image mesh (OBJ, connectivity must match the domain).
    #[arg(long)]
    image: PathBuf,
    /// Output coefficient field (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Allow outputs to overwrite inputs.
    #[arg(long)]
    in_place: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Residual |f_zbar|^2 everywhere; reversing faces cost their area.
    Signed,
    /// Reversing faces cost |f_z|^2 instead, so exact folds have zero energy.
    Generalized,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Signed => Mode::Signed,
            ModeArg::Generalized => Mode::Generalized,
        }
    }
}

/// A command failure, split by which exit code it maps to.
enum Failure {
    /// Exit 1: the inputs are unreadable, malformed, or inconsistent.
    Input(String),
    /// Exit 2: the inputs parsed but the numerics did not go through.
    Numeric(String),
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Failure::Input(e.to_string())
    }

    fn numeric(e: impl std::fmt::Display) -> Self {
        Failure::Numeric(e.to_string())
    }
}

fn solve_failure(e: SolveError) -> Failure {
    match e {
        SolveError::Singular { .. }
        | SolveError::Residual { .. }
        | SolveError::LossDivergent { .. } => Failure::numeric(e),
        _ => Failure::input(e),
    }
}

fn reinforce_failure(e: &ReinforceError) -> Failure {
    match e {
        ReinforceError::Fold(_) | ReinforceError::Mesh(_) => Failure::input(e),
        _ => Failure::numeric(e),
    }
}

fn pattern_failure(e: PatternError) -> Failure {
    match e {
        PatternError::Solve { .. } | PatternError::Measure { .. } | PatternError::Domain { .. } => {
            Failure::numeric(e)
        }
        _ => Failure::input(e),
    }
}

/// Refuses to write over an input file. Paths are compared canonicalized
/// when they exist and lexically otherwise, so the guard is best-effort.
fn guard_clobber(inputs: &[&Path], outputs: &[&Path], in_place: bool) -> Result<(), Failure> {
    if in_place {
        return Ok(());
    }
    let canon = |p: &Path| p.canonicalize().unwrap_or_else(|_| p.to_path_buf());
    for out in outputs {
        let out_c = canon(out);
        for inp in inputs {
            if canon(inp) == out_c {
                return Err(Failure::Input(format!(
                    "output {} would overwrite an input; pass --in-place to allow it",
                    out.display()
                )));
            }
        }
    }
    Ok(())
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{name}.tmp"))
}

fn commit_tmp(tmp: &Path, path: &Path) -> Result<(), Failure> {
    std::fs::rename(tmp, path).map_err(|e| {
        Failure::Input(format!("renaming {} to {}: {e}", tmp.display(), path.display()))
    })
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let tmp = tmp_sibling(path);
    std::fs::write(&tmp, contents)
        .map_err(|e| Failure::Input(format!("writing {}: {e}", tmp.display())))?;
    commit_tmp(&tmp, path)
}

fn save_mesh_atomic(mesh: &TriMesh, path: &Path) -> Result<(), Failure> {
    let tmp = tmp_sibling(path);
    save_mesh(mesh, &tmp).map_err(Failure::input)?;
    commit_tmp(&tmp, path)
}

fn save_embedding_atomic(
    mesh: &TriMesh,
    positions: &[qcfold::Point],
    path: &Path,
) -> Result<(), Failure> {
    let tmp = tmp_sibling(path);
    save_embedding(mesh, positions, &tmp).map_err(Failure::input)?;
    commit_tmp(&tmp, path)
}

fn report_json(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    text
}

fn seed_value(seed: Option<u64>) -> serde_json::Value {
    match seed {
        Some(s) => json!(s),
        None => serde_json::Value::Null,
    }
}

/// Appends `.suffix` to a path's extension rather than replacing it, so
/// `image.obj` reports to `image.report.json` instead of `image.json`.
fn derived_path(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push('.');
    name.push_str(suffix);
    base.with_file_name(name)
}

fn cmd_solve(seed: Option<u64>, args: &SolveArgs) -> Result<(), Failure> {
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| derived_path(&args.out, "report.json"));
    guard_clobber(
        &[&args.mesh, &args.mu, &args.pins],
        &[&args.out, &report_path],
        args.in_place,
    )?;

    let mesh = load_mesh(&args.mesh).map_err(Failure::input)?;
    let field = BeltramiField::load(&args.mu, mesh.n_faces()).map_err(Failure::input)?;
    let pins = PinSet::load(&args.pins).map_err(Failure::input)?;

    let result = lsqc_solve(&mesh, &field, &pins, args.mode.into()).map_err(solve_failure)?;

    let finite_max = result
        .mu
        .iter()
        .filter(|m| !matches!(m, Mu::Infinite))
        .map(|m| m.modulus())
        .fold(0.0f64, f64::max);
    let n_infinite = result.mu.iter().filter(|m| matches!(m, Mu::Infinite)).count();
    let n_reversing = result.mu.iter().filter(|m| m.is_reversing()).count();

    save_embedding_atomic(&mesh, &result.image, &args.out)?;
    let report = json!({
        "format": FORMAT,
        "residual": result.residual,
        "energy": result.energy,
        "mu": {
            "max_abs_finite": finite_max,
            "reversing_faces": n_reversing,
            "infinite_faces": n_infinite,
        },
        "seed": seed_value(seed),
    });
    write_atomic(&report_path, &report_json(&report))?;

    println!(
        "solved {} faces: residual {:.3e}, energy {:.6e}",
        mesh.n_faces(),
        result.residual,
        result.energy
    );
    println!("wrote {} and {}", args.out.display(), report_path.display());
    Ok(())
}

fn cmd_reinforce(seed: Option<u64>, args: &ReinforceArgs) -> Result<(), Failure> {
    let domain_out = PathBuf::from(format!("{}.domain.obj", args.out_prefix));
    let fold_out = PathBuf::from(format!("{}.fold.obj", args.out_prefix));
    let log_out = PathBuf::from(format!("{}.log.csv", args.out_prefix));
    let report_out = PathBuf::from(format!("{}.report.json", args.out_prefix));
    guard_clobber(
        &[&args.domain, &args.coloring, &args.vis_pins, &args.shape_pins],
        &[&domain_out, &fold_out, &log_out, &report_out],
        args.in_place,
    )?;

    let domain = load_mesh(&args.domain).map_err(Failure::input)?;
    let coloring = FoldColoring::load(&args.coloring, &domain).map_err(Failure::input)?;
    let vis_pins = PinSet::load(&args.vis_pins).map_err(Failure::input)?;
    let shape_pins = PinSet::load(&args.shape_pins).map_err(Failure::input)?;

    let mut problem = ReinforceProblem::new(domain, coloring, vis_pins, shape_pins)
        .map_err(|e| reinforce_failure(&e))?;
    problem.epsilon = args.epsilon;
    problem.itermax = args.itermax;
    problem.straighten_every = args.straighten_every;

    let outcome = match reinforce(&problem) {
        Ok(o) => o,
        Err(e) => {
            // The log up to the failed iteration is still useful; save it
            // before reporting the failure.
            let partial: Option<&IterationLog> = match &e {
                ReinforceError::Solve { log, .. }
                | ReinforceError::Straighten { log, .. }
                | ReinforceError::Measure { log, .. }
                | ReinforceError::Domain { log, .. } => Some(log),
                _ => None,
            };
            if let Some(log) = partial {
                if log.save(&log_out).is_ok() {
                    eprintln!("wrote partial log to {}", log_out.display());
                }
            }
            return Err(reinforce_failure(&e));
        }
    };

    save_mesh_atomic(&outcome.domain, &domain_out)?;
    if let Some(fold) = &outcome.fold {
        save_embedding_atomic(&outcome.domain, &fold.image, &fold_out)?;
    }
    write_atomic(&log_out, &outcome.log.to_csv())?;

    let records = outcome.log.records();
    let report = json!({
        "format": FORMAT,
        "iterations": records.len(),
        "first_loss": records.first().map(|r| r.loss),
        "final_loss": records.last().map(|r| r.loss),
        "final_energy": records.last().map(|r| r.energy),
        "final_max_distortion": records.last().map(|r| r.max_distortion),
        "seed": seed_value(seed),
    });
    write_atomic(&report_out, &report_json(&report))?;

    match records.last() {
        Some(last) => {
            println!(
                "{} iterations: loss {:.6e}, max distortion {:.3e}",
                records.len(),
                last.loss,
                last.max_distortion
            );
            println!(
                "wrote {}.{{domain.obj,fold.obj,log.csv,report.json}}",
                args.out_prefix
            );
        }
        None => {
            println!("0 iterations: domain passed through unchanged");
            println!(
                "wrote {}.{{domain.obj,log.csv,report.json}}",
                args.out_prefix
            );
        }
    }
    Ok(())
}

fn cmd_miura(args: &MiuraArgs) -> Result<(), Failure> {
    let coloring_out = args
        .coloring_out
        .clone()
        .unwrap_or_else(|| derived_path(&args.out, "coloring.json"));

    let spec = MiuraSpec::new(
        args.rows,
        args.cols,
        args.cell_width,
        args.cell_height,
        args.angle.to_radians(),
    )
    .map_err(pattern_failure)?;
    let (mesh, coloring) = miura_pattern(&spec).map_err(pattern_failure)?;

    save_mesh_atomic(&mesh, &args.out)?;
    write_atomic(&coloring_out, &coloring.to_json())?;

    println!(
        "{}x{} cells: {} vertices, {} faces, {} crease edges",
        args.rows,
        args.cols,
        mesh.n_vertices(),
        mesh.n_faces(),
        coloring.singular_edges().len()
    );
    println!("wrote {} and {}", args.out.display(), coloring_out.display());
    Ok(())
}

fn class_name(class: VertexClass) -> String {
    match class {
        VertexClass::FoldingEndpoint => "folding endpoint".into(),
        VertexClass::Folding => "folding".into(),
        VertexClass::Cusp(k) => format!("cusp({k})"),
    }
}

fn cmd_check(seed: Option<u64>, args: &CheckArgs) -> Result<(), Failure> {
    if let Some(report_path) = &args.report {
        guard_clobber(&[&args.mesh, &args.coloring], &[report_path], false)?;
    }
    let mesh = load_mesh(&args.mesh).map_err(Failure::input)?;
    let coloring = FoldColoring::load(&args.coloring, &mesh).map_err(Failure::input)?;

    let classes = classify_singular_vertices(&mesh, &coloring).map_err(Failure::input)?;
    let mut rows = Vec::new();
    let mut max_defect = 0.0f64;
    for &(v, class) in &classes {
        let defect = if class == VertexClass::FoldingEndpoint {
            None
        } else {
            let d = kawasaki_defect(&mesh, &coloring, v).map_err(Failure::input)?;
            max_defect = max_defect.max(d.abs());
            Some(d)
        };
        match defect {
            Some(d) => println!("vertex {v}: {} defect {:+.3e}", class_name(class), d),
            None => println!("vertex {v}: {} (boundary)", class_name(class)),
        }
        rows.push((v, class, defect));
    }
    if classes.is_empty() {
        println!("no singular vertices: the coloring is constant");
    } else {
        println!("max Kawasaki defect: {max_defect:.3e}");
    }

    let pins = fold_edge_pins(&mesh).map_err(Failure::input)?;
    let fold = lsqc_solve(&mesh, &coloring.to_field(), &pins, Mode::Generalized)
        .map_err(solve_failure)?;
    let distortion = max_distortion(&mesh, &fold.image, &coloring).map_err(Failure::numeric)?;
    println!("test fold max distortion: {distortion:.3e}");

    if let Some(report_path) = &args.report {
        let report = json!({
            "format": FORMAT,
            "singular_vertices": rows
                .iter()
                .map(|&(v, class, defect)| {
                    json!({
                        "vertex": v,
                        "class": class_name(class),
                        "defect": defect,
                    })
                })
                .collect::<Vec<_>>(),
            "max_defect": max_defect,
            "max_distortion": distortion,
            "seed": seed_value(seed),
        });
        write_atomic(report_path, &report_json(&report))?;
        println!("wrote {}", report_path.display());
    }
    Ok(())
}

fn cmd_mu(args: &MuArgs) -> Result<(), Failure> {
    guard_clobber(&[&args.domain, &args.image], &[&args.out], args.in_place)?;

    let domain = load_mesh(&args.domain).map_err(Failure::input)?;
    let image = load_raw(&args.image).map_err(Failure::input)?;
    if image.faces != *domain.faces() {
        return Err(Failure::Input(format!(
            "{}: face list differs from the domain mesh; the coefficient is \
             only defined between meshes with identical connectivity",
            args.image.display()
        )));
    }
    if image.vertices.len() != domain.n_vertices() {
        return Err(Failure::Input(format!(
            "{}: {} vertices, domain has {}",
            args.image.display(),
            image.vertices.len(),
            domain.n_vertices()
        )));
    }

    let mus = domain
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            let dom = domain.face_points(f);
            let img = [
                image.vertices[face[0]],
                image.vertices[face[1]],
                image.vertices[face[2]],
            ];
            qcfold::coeff::mu_of_map(dom, img).map_err(|source| {
                Failure::input(CoeffError::AtFace {
                    face: f,
                    source: Box::new(source),
                })
            })
        })
        .collect::<Result<Vec<Mu>, Failure>>()?;

    let field = BeltramiField::from_mus(mus);
    write_atomic(&args.out, &field.to_json())?;

    let n_infinite = field.mus().iter().filter(|m| matches!(m, Mu::Infinite)).count();
    println!(
        "measured {} faces ({} orientation-reversing as \"inf\")",
        field.len(),
        n_infinite
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve(args) => cmd_solve(cli.seed, args),
        Command::Reinforce(args) => cmd_reinforce(cli.seed, args),
        Command::Miura(args) => cmd_miura(args),
        Command::Check(args) => cmd_check(cli.seed, args),
        Command::Mu(args) => cmd_mu(args),
    }
}

/// Restore the default SIGPIPE disposition so `qcfold check ... | head`
/// dies quietly like any other filter instead of panicking on EPIPE.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe { libc::signal(libc::SIGPIPE, libc::SIG_DFL) };
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive as "errors" but exit 0; real
            // usage errors are input errors under the exit-code contract.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
