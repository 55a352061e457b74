//! `vms` — simulate, validate, and inspect vehicle-manipulator system models.
//!
//! Three subcommands:
//!
//! * `simulate` integrates a model under one of the three formulations and
//!   writes the trajectory (configuration, momenta, energies, port power,
//!   transported momentum) as CSV. Runs are deterministic: the same inputs
//!   produce a byte-identical file.
//! * `validate` runs the randomized identity suite against a model and prints
//!   one `CHECK` line per identity; the exit status reflects the verdict.
//! * `inspect` prints the mass-matrix blocks, the mechanical connection, and
//!   the link poses at a given shape.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DVector, Matrix3, Vector3};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vms_core::checks::{random_state, run_all_checks};
use vms_core::inertia::{mass_blocks, mass_partials};
use vms_core::integrate::{
    full_mass_matrix, simulate, Formulation, InputSchedule, ScheduleEntry, TrajectoryRecord,
};
use vms_core::joints::{joint_pose, JointConfig, JointKind};
use vms_core::kinematics::forward_kinematics;
use vms_core::liegroup::{rotation_defect, Pose, Wrench};
use vms_core::model::{State, VmsModel};

#[derive(Parser)]
#[command(name = "vms", version, about = "Vehicle-manipulator system dynamics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a model forward in time and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Run the randomized identity suite against a model.
    Validate(ValidateArgs),
    /// Print mass blocks, mechanical connection, and poses at a shape.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Formulation to integrate: ph, ph-decoupled, or lagrangian.
    #[arg(long, default_value = "ph-decoupled")]
    formulation: Formulation,
    /// Integration step in seconds.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Simulated horizon in seconds.
    #[arg(long, default_value_t = 5.0)]
    duration: f64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    /// Draw the initial state at random with this seed instead of starting
    /// at rest.
    #[arg(long, conflicts_with = "initial")]
    seed: Option<u64>,
    /// JSON file with the initial state (see the README for the format).
    #[arg(long)]
    initial: Option<PathBuf>,
    /// JSON file with a piecewise-constant input schedule.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Disable gravity regardless of what the model or schedule says.
    #[arg(long)]
    no_gravity: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Random states per check.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Seed of the sample stream (reported failures reproduce with it).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InspectArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Shape coordinates, comma separated (defaults to zeros).
    #[arg(long, value_name = "q1,q2,…", allow_hyphen_values = true)]
    q: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate_command(args),
        Command::Validate(args) => validate_command(args),
        Command::Inspect(args) => inspect_command(args),
    }
}

fn load_model(path: &Path) -> Result<VmsModel> {
    VmsModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Initial-state file: the base configuration is either a pose (floating), a
/// `[theta, x, y]` chart (planar), or absent (fixed, or to start at the
/// identity). Missing vectors default to zeros.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialFile {
    #[serde(default)]
    base: Option<BaseConfigFile>,
    #[serde(default)]
    q: Vec<f64>,
    #[serde(default)]
    p: Vec<f64>,
    #[serde(default)]
    pi: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BaseConfigFile {
    Chart([f64; 3]),
    Pose {
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
    },
}

/// Schedule file: a global gravity switch plus piecewise-constant entries,
/// each active from its start time until the next entry. Missing vectors
/// default to zeros.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(default = "default_true")]
    gravity_enabled: bool,
    #[serde(default)]
    entries: Vec<ScheduleEntryFile>,
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleEntryFile {
    start: f64,
    #[serde(default)]
    w_act: Vec<f64>,
    #[serde(default)]
    tau_act: Vec<f64>,
    #[serde(default)]
    ee_wrench: Vec<f64>,
}

fn sized_vector(raw: &[f64], len: usize, what: &str) -> Result<DVector<f64>> {
    if raw.is_empty() {
        return Ok(DVector::zeros(len));
    }
    if raw.len() != len {
        bail!("{what} must have {len} entries, got {}", raw.len());
    }
    Ok(DVector::from_column_slice(raw))
}

fn initial_state(model: &VmsModel, path: &Path) -> Result<State> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading initial state {}", path.display()))?;
    let file: InitialFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing initial state {}", path.display()))?;
    let h = match (&model.base_kind, &file.base) {
        (JointKind::Floating, Some(BaseConfigFile::Pose { rotation, translation })) => {
            let r = Matrix3::from_fn(|i, j| rotation[i][j]);
            let defect = rotation_defect(&r);
            if defect > 1e-6 {
                bail!("initial base rotation is not orthonormal (defect {defect:.2e})");
            }
            JointConfig::Pose(Pose::new(r, Vector3::from_column_slice(translation)))
        }
        (JointKind::Planar, Some(BaseConfigFile::Chart([theta, x, y]))) => JointConfig::Planar {
            theta: *theta,
            x: *x,
            y: *y,
        },
        (_, None) => JointConfig::zero(&model.base_kind),
        (kind, Some(_)) => bail!(
            "initial base configuration does not match the model's {} base \
             (floating takes a pose, planar takes [theta, x, y], fixed takes none)",
            kind.name()
        ),
    };
    Ok(State {
        h,
        q: sized_vector(&file.q, model.n(), "q")?,
        p: sized_vector(&file.p, model.base_dof(), "p")?,
        pi: sized_vector(&file.pi, model.n(), "pi")?,
    })
}

fn load_schedule(model: &VmsModel, path: &Path) -> Result<InputSchedule> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading schedule {}", path.display()))?;
    let file: ScheduleFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing schedule {}", path.display()))?;
    let mut entries = Vec::with_capacity(file.entries.len());
    let mut previous = f64::NEG_INFINITY;
    for (index, entry) in file.entries.iter().enumerate() {
        if entry.start < previous {
            bail!("schedule entries must be sorted by start time (entry {index})");
        }
        previous = entry.start;
        let ee = sized_vector(&entry.ee_wrench, 6, "ee_wrench")?;
        entries.push(ScheduleEntry {
            start: entry.start,
            w_act: sized_vector(&entry.w_act, model.base_dof(), "w_act")?,
            tau_act: sized_vector(&entry.tau_act, model.n(), "tau_act")?,
            ee_wrench: Wrench::from_fn(|r, _| ee[r]),
        });
    }
    Ok(InputSchedule {
        gravity_enabled: file.gravity_enabled,
        entries,
    })
}

fn simulate_command(args: SimulateArgs) -> Result<ExitCode> {
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        bail!("--dt must be a positive number, got {}", args.dt);
    }
    if !(args.duration >= args.dt && args.duration.is_finite()) {
        bail!("--duration must be at least one step, got {}", args.duration);
    }
    let model = load_model(&args.model)?;

    let mut schedule = match &args.schedule {
        Some(path) => load_schedule(&model, path)?,
        None => InputSchedule::zero(&model),
    };
    if args.no_gravity {
        schedule.gravity_enabled = false;
    }

    let initial = match (&args.seed, &args.initial) {
        (Some(seed), _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            random_state(&model, &mut rng).context("sampling a random initial state")?
        }
        (None, Some(path)) => initial_state(&model, path)?,
        (None, None) => State::zero(&model),
    };

    let records = simulate(
        &model,
        args.formulation,
        &initial,
        &schedule,
        args.dt,
        args.duration,
    )
    .context("integration failed")?;
    write_csv(&args.out, &model, &records)
        .with_context(|| format!("writing {}", args.out.display()))?;

    let last = records.last().expect("simulate returns at least one record");
    println!(
        "simulated {:.6} s in {} steps ({}); wrote {} records to {}",
        last.t,
        records.len() - 1,
        args.formulation,
        records.len(),
        args.out.display()
    );
    println!(
        "final energy: kinetic {:.6e}, potential {:.6e}",
        last.h_kin, last.h_pot
    );
    Ok(ExitCode::SUCCESS)
}

/// One row per record: time, base pose (row-major rotation and translation),
/// shape, standard momenta, energies, supplied port power, and the
/// transported base momentum. All floats use `{:.16e}` so reruns are
/// byte-identical and parse back exactly.
fn write_csv(path: &Path, model: &VmsModel, records: &[TrajectoryRecord]) -> Result<()> {
    let b = model.base_dof();
    let n = model.n();
    let mut out = BufWriter::new(File::create(path)?);

    let mut columns: Vec<String> = vec!["t".into()];
    for i in 1..=3 {
        for j in 1..=3 {
            columns.push(format!("r{i}{j}"));
        }
    }
    columns.extend(["x", "y", "z"].map(String::from));
    columns.extend((1..=n).map(|k| format!("q{k}")));
    columns.extend((1..=b).map(|k| format!("p{k}")));
    columns.extend((1..=n).map(|k| format!("pi{k}")));
    columns.extend(["H_kin", "H_pot", "power_in"].map(String::from));
    columns.extend((1..=b).map(|k| format!("mu{k}")));
    writeln!(out, "{}", columns.join(","))?;

    let mut values = Vec::with_capacity(columns.len());
    for record in records {
        values.clear();
        values.push(record.t);
        let pose = joint_pose(&model.base_kind, &Pose::identity(), &record.state.h)
            .expect("trajectory states match the model");
        for i in 0..3 {
            for j in 0..3 {
                values.push(pose.rotation[(i, j)]);
            }
        }
        values.extend(pose.translation.iter());
        values.extend(record.state.q.iter());
        values.extend(record.state.p.iter());
        values.extend(record.state.pi.iter());
        values.push(record.h_kin);
        values.push(record.h_pot);
        values.push(record.power_in);
        values.extend(record.transported_momentum.iter());

        let mut line = String::with_capacity(columns.len() * 24);
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn validate_command(args: ValidateArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    println!(
        "validating {} with {} samples (seed {})",
        args.model.display(),
        args.samples,
        args.seed
    );
    let results = run_all_checks(&model, args.samples, args.seed)
        .context("the model's mass matrix is singular at a sampled shape")?;
    let mut failures = 0usize;
    for check in &results {
        println!(
            "CHECK {:<24} {:>13.3e} {:>9.0e} {}",
            check.name,
            check.max_residual,
            check.threshold,
            if check.passed() { "PASS" } else { "FAIL" }
        );
        if !check.passed() {
            failures += 1;
        }
    }
    if failures == 0 {
        println!("all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{failures} of {} checks failed", results.len());
        Ok(ExitCode::FAILURE)
    }
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

fn parse_shape(model: &VmsModel, raw: &Option<String>) -> Result<DVector<f64>> {
    let Some(raw) = raw else {
        return Ok(DVector::zeros(model.n()));
    };
    let parsed: Vec<f64> = raw
        .split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<f64>()
                .with_context(|| format!("bad shape coordinate {piece:?}"))
        })
        .collect::<Result<_>>()?;
    if parsed.len() != model.n() {
        bail!(
            "--q must have {} entries for this model, got {}",
            model.n(),
            parsed.len()
        );
    }
    Ok(DVector::from_vec(parsed))
}

fn inspect_command(args: InspectArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let q = parse_shape(&model, &args.q)?;

    println!(
        "model {}: {} base ({} DoF), {} chain joint(s)",
        args.model.display(),
        model.base_kind.name(),
        model.base_dof(),
        model.n()
    );
    for (i, link) in model.links.iter().enumerate() {
        println!("  link {}: {} ({} joint)", i + 1, link.name, link.joint.name());
    }
    println!("shape q = {:?}", q.as_slice());

    let blocks = mass_blocks(&model, &q).context("mass matrix is singular at this shape")?;
    let full = full_mass_matrix(&model, &q).context("mass matrix is singular at this shape")?;
    let b = model.base_dof();
    let n = model.n();
    if b > 0 {
        println!("\nlocked base inertia M_b ({b}×{b}):{:.6}", blocks.m_b);
    }
    if n > 0 {
        println!("manipulator inertia M_m ({n}×{n}):{:.6}", blocks.m_m);
    }
    if b > 0 && n > 0 {
        println!("coupling M_bm ({b}×{n}):{:.6}", blocks.m_bm);
        println!("mechanical connection A = M_b⁻¹M_bm:{:.6}", blocks.a);
        println!("decoupled manipulator inertia M̂_m = M_m − AᵀM_bm:{:.6}", blocks.m_m_hat);
    }
    let eigenvalues = full.symmetric_eigen().eigenvalues;
    let mut sorted: Vec<f64> = eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    println!(
        "full mass matrix eigenvalues: {}",
        sorted
            .iter()
            .map(|e| format!("{e:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    // Partial derivatives exist wherever the blocks do; surface that early.
    mass_partials(&model, &q).context("mass matrix is singular near this shape")?;

    let cache = forward_kinematics(&model, &JointConfig::zero(&model.base_kind), &q);
    for (i, link) in model.links.iter().enumerate() {
        let pose = &cache.link_poses[i];
        println!(
            "\nlink {} ({}) pose in base frame:{:.6}translation: [{:.6}, {:.6}, {:.6}]",
            i + 1,
            link.name,
            pose.rotation,
            pose.translation.x,
            pose.translation.y,
            pose.translation.z
        );
    }
    let ee = &cache.ee_pose;
    println!(
        "\nend effector pose in base frame:{:.6}translation: [{:.6}, {:.6}, {:.6}]",
        ee.rotation, ee.translation.x, ee.translation.y, ee.translation.z
    );
    Ok(ExitCode::SUCCESS)
}
