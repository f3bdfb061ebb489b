//! Command-line front end. Every subcommand maps onto one library call;
//! failures print `error[<kind>]: <message>` to stderr and exit with the
//! code listed in [`CliError::exit_code`].

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::evalkit::{bias_experiment, default_tau, evaluate_mesh, EvalError, Protocol};
use crate::fields::{FieldError, Fields};
use crate::fixtures::{make_fixture, FixtureError, FixtureKind, FixtureParams};
use crate::io::{self, IoError, RunConfig};
use crate::math::{Aabb, Vec3};
use crate::meshing::{mesh_mtet, mesh_pam, MeshingError, PivotScheme};
use crate::render::{depth_to_pseudo_normals, equivalence_check, render_maps};
use crate::scene::GaussianScene;
use crate::wrap::{optimize_normals, WrapError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Wrap(#[from] WrapError),
    #[error(transparent)]
    Meshing(#[from] MeshingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Io(IoError::Config(_)) => "config",
            Self::Io(IoError::Parse { .. }) | Self::Io(IoError::VersionMismatch { .. }) => "parse",
            Self::Io(_) => "io",
            Self::Field(_) => "field",
            Self::Wrap(_) => "wrap",
            Self::Meshing(_) => "meshing",
            Self::Eval(_) => "eval",
            Self::Fixture(_) => "fixture",
            Self::Verification(_) => "verification",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            "io" => 3,
            "parse" => 4,
            "config" => 5,
            "field" => 6,
            "wrap" => 7,
            "meshing" => 8,
            "eval" => 9,
            "fixture" => 10,
            _ => 11,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gwrap", version, about = "Oriented Gaussian fields, normal wrapping and meshing")]
pub struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides every stage seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to GWRAP_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Color, alpha, depth and normal maps of one training camera.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        camera_index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Vacancy, occupancy, vector and normal fields at query points.
    Fields {
        #[arg(long)]
        scene: PathBuf,
        /// Text file of `x y z` rows.
        #[arg(long, conflicts_with = "grid")]
        points: Option<PathBuf>,
        /// Regular lattice `NX,NY,NZ` over the scene bounds.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<[usize; 3]>,
        /// `.csv` for a table, anything else for raw little-endian f32.
        #[arg(long)]
        out: PathBuf,
    },
    /// Consistency checks with a nonzero exit on failure.
    Verify {
        #[command(subcommand)]
        check: VerifyCheck,
    },
    /// Optimize normal orientations and write the updated scene.
    Wrap {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Loss trace CSV; defaults to the output path with `.csv`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Extract a surface mesh (`.obj` or `.ply`).
    Mesh {
        method: MeshMethod,
        #[arg(long)]
        scene: PathBuf,
        /// `x0,y0,z0,x1,y1,z1`.
        #[arg(long, value_parser = parse_box)]
        roi: Option<Aabb>,
        #[arg(long)]
        pivots: Option<PivotArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a mesh against a ground-truth point cloud.
    Eval {
        protocol: ProtocolArg,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        /// Scene whose cameras drive the virtual scan.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Legacy vs uniform scores before and after 1-to-4 subdivision.
    Bias {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic scene.
    Fixture {
        #[arg(long)]
        kind: String,
        /// Comma-separated `key=value` overrides, e.g. `size=1,count=400`.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default run configuration.
    Config,
}

#[derive(Subcommand, Debug)]
pub enum VerifyCheck {
    /// Alpha compositing against ray marching on random rays.
    Equivalence {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 500)]
        rays: usize,
        #[arg(long, default_value_t = 5e-3)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MeshMethod {
    Mtet,
    Pam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PivotArg {
    Two,
    Nine,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProtocolArg {
    Uniform,
    Virtual,
    Legacy,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Uniform => Protocol::Uniform,
            ProtocolArg::Virtual => Protocol::VirtualScan,
            ProtocolArg::Legacy => Protocol::Legacy,
        }
    }
}

fn parse_list(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated values"));
    }
    Ok(v)
}

fn parse_grid(s: &str) -> Result<[usize; 3], String> {
    let v = parse_list(s, 3)?;
    if v.iter().any(|&x| x < 1.0 || x.fract() != 0.0) {
        return Err("grid sizes must be positive integers".into());
    }
    Ok([v[0] as usize, v[1] as usize, v[2] as usize])
}

fn parse_box(s: &str) -> Result<Aabb, String> {
    let v = parse_list(s, 6)?;
    if (0..3).any(|i| v[i] > v[i + 3]) {
        return Err("box minimum exceeds maximum".into());
    }
    Ok(Aabb::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])))
}

/// `key=value,key=value` as fixture parameters over the defaults.
pub fn parse_fixture_params(s: &str) -> Result<FixtureParams, CliError> {
    let mut doc = String::new();
    for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("fixture parameter {pair:?} is not key=value")))?;
        doc.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
    }
    toml::from_str(&doc).map_err(|e| CliError::Usage(format!("fixture parameters: {e}")))
}

fn grid_points(bbox: &Aabb, n: [usize; 3]) -> Vec<Vec3> {
    let (lo, hi) = (bbox.lo(), bbox.hi());
    let coord = |axis: usize, i: usize| {
        if n[axis] == 1 {
            0.5 * (lo[axis] + hi[axis])
        } else {
            lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (n[axis] - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                out.push(Vec3::new(coord(0, i), coord(1, j), coord(2, k)));
            }
        }
    }
    out
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(IoError::from)?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(IoError::from)?))
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    match out {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}").map_err(IoError::from)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => config.reseeded(s),
        None => config,
    })
}

fn configure_threads(cli: &Cli) {
    let n = cli.threads.or_else(|| {
        std::env::var("GWRAP_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    });
    if let Some(n) = n.filter(|&n| n > 0) {
        // Fails only if a pool already exists, e.g. when run twice in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_scene(path: &Path, config: &RunConfig) -> Result<GaussianScene, CliError> {
    Ok(io::load_scene_with(path, config.alpha_max)?)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    configure_threads(cli);
    let config = load_config(cli)?;
    match &cli.command {
        Command::Render { scene, camera_index, out } => {
            let scene = load_scene(scene, &config)?;
            let cam = scene.cameras.get(*camera_index).ok_or_else(|| {
                CliError::Usage(format!("camera index {camera_index} out of range ({} cameras)", scene.cameras.len()))
            })?;
            let maps = render_maps(&scene, cam, &config.render);
            fs::create_dir_all(out).map_err(IoError::from)?;
            let pseudo = depth_to_pseudo_normals(&maps.depth, cam);
            let finite = maps.depth.data.iter().copied().filter(|d| d.is_finite());
            let (dlo, dhi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d), b.max(d)));
            io::write_png(&maps.color, 0.0, 1.0, out.join("color.png"))?;
            io::write_png(&maps.alpha, 0.0, 1.0, out.join("alpha.png"))?;
            io::write_png(&maps.depth, dlo, dhi, out.join("depth.png"))?;
            io::write_png(&maps.normal, -1.0, 1.0, out.join("normal.png"))?;
            io::write_png(&pseudo, -1.0, 1.0, out.join("pseudo_normal.png"))?;
            for (name, img) in [
                ("color", &maps.color),
                ("alpha", &maps.alpha),
                ("depth", &maps.depth),
                ("normal", &maps.normal),
                ("pseudo_normal", &pseudo),
            ] {
                io::write_raw_map(img, create(&out.join(format!("{name}.gwmp")))?)?;
            }
        }
        Command::Fields { scene, points, grid, out } => {
            let scene = load_scene(scene, &config)?;
            let pts = match (points, grid) {
                (Some(p), _) => io::read_points_text(BufReader::new(fs::File::open(p).map_err(IoError::from)?))?,
                (None, Some(n)) => grid_points(&scene.bbox(), *n),
                (None, None) => return Err(CliError::Usage("give --points or --grid".into())),
            };
            let fields = Fields::new(&scene, config.field.clone());
            let samples = pts
                .par_iter()
                .map(|x| fields.sample(x))
                .collect::<Result<Vec<_>, _>>()?;
            let w = create(out)?;
            if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                io::write_field_samples_csv(&pts, &samples, w)?;
            } else {
                io::write_field_samples_raw(&pts, &samples, w)?;
            }
        }
        Command::Verify {
            check: VerifyCheck::Equivalence { scene, rays, tolerance },
        } => {
            let scene = load_scene(scene, &config)?;
            if scene.is_empty() {
                return Err(CliError::Usage("scene has no Gaussians".into()));
            }
            let report = equivalence_check(&scene, *rays, config.seed, &config.render);
            write_json(&report, None)?;
            if !(report.max_error < *tolerance) {
                return Err(CliError::Verification(format!(
                    "max color difference {:.3e} exceeds tolerance {tolerance:.3e}",
                    report.max_error
                )));
            }
        }
        Command::Wrap { scene, out, report } => {
            let scene = load_scene(scene, &config)?;
            let (wrapped, rep) = optimize_normals(scene, &config.wrap)?;
            io::save_scene(&wrapped, out)?;
            let csv = report.clone().unwrap_or_else(|| out.with_extension("csv"));
            io::write_wrap_report_csv(&rep, create(&csv)?)?;
            log::info!(
                "loss {:.6} -> {:.6}, {} clones",
                rep.initial_loss,
                rep.loss_trace.last().copied().unwrap_or(rep.initial_loss),
                rep.total_clones()
            );
        }
        Command::Mesh { method, scene, roi, pivots, out } => {
            let scene = load_scene(scene, &config)?;
            let scheme = pivots.map(|p| match p {
                PivotArg::Two => PivotScheme::Two,
                PivotArg::Nine => PivotScheme::Nine,
            });
            let mesh = match method {
                MeshMethod::Mtet => {
                    let mut mc = config.mtet.clone();
                    mc.pivots = scheme.unwrap_or(mc.pivots);
                    let mesh = mesh_mtet(&scene, &mc)?;
                    match roi {
                        Some(b) => crop_faces(&mesh, b),
                        None => mesh,
                    }
                }
                MeshMethod::Pam => {
                    let mut pc = config.pam.clone();
                    pc.roi = roi.or(pc.roi);
                    pc.mtet.pivots = scheme.unwrap_or(pc.mtet.pivots);
                    mesh_pam(&scene, &pc)?
                }
            };
            io::save_mesh(&mesh, out)?;
        }
        Command::Eval { protocol, pred, gt, tau, scene, out } => {
            let mesh = io::load_mesh(pred)?;
            let gt = io::load_points(gt)?;
            let cameras = match scene {
                Some(s) => load_scene(s, &config)?.cameras,
                None => Vec::new(),
            };
            let mut ec = config.eval.clone();
            ec.tau = tau.or(ec.tau);
            let result = evaluate_mesh(&mesh, &gt, (*protocol).into(), &cameras, &ec)?;
            write_json(&result, out.as_deref())?;
        }
        Command::Bias { pred, gt, tau, out } => {
            let mesh = io::load_mesh(pred)?;
            let gt = io::load_points(gt)?;
            if gt.is_empty() {
                return Err(EvalError::EmptyCloud.into());
            }
            let tau = tau.or(config.eval.tau).unwrap_or_else(|| default_tau(&gt));
            let report = bias_experiment(&mesh, &gt, tau, config.eval.uniform_count, config.eval.seed)?;
            write_json(&report, out.as_deref())?;
        }
        Command::Fixture { kind, params, out } => {
            let kind: FixtureKind = kind.parse()?;
            let params = parse_fixture_params(params)?;
            let (g, c) = make_fixture(kind, &params)?.into_parts();
            let scene = GaussianScene::with_support_sigma(g, c, config.support_sigma);
            io::save_scene(&scene, out)?;
        }
        Command::Config => {
            print!("{}", config.to_toml()?);
        }
    }
    Ok(())
}

/// Faces whose centroid lies inside `roi`, compacted.
fn crop_faces(mesh: &crate::mesh::TriangleMesh, roi: &Aabb) -> crate::mesh::TriangleMesh {
    let faces = (0..mesh.faces.len())
        .filter(|&f| roi.contains(&mesh.face_centroid(f)))
        .map(|f| mesh.faces[f])
        .collect();
    crate::mesh::TriangleMesh {
        vertices: mesh.vertices.clone(),
        faces,
    }
    .compacted()
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            e.exit_code()
        }
    }
}
