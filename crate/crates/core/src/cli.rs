//! Command-line front end: `fair`, `synth` and `report`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigentexture::{build_basis_with, coherence_residuals};
use crate::error::{Error, Result};
use crate::fairing::{fair_mesh, FairingConfig, FairingTrace, Scene};
use crate::geom::{face_image_triangle, CameraView, TriMesh};
use crate::io::{read_cameras, read_image, read_obj, write_atomic, write_cameras, write_obj, write_pgm};
use crate::raster::GrayImage;
use crate::synth::{make_cube_scene, perturb_vertex, SceneParams, CORNER_A, DEFAULT_SEED};
use crate::warp::{affine_map, extract_cell, CellImage, CellLayout};

#[derive(Debug, Parser)]
#[command(name = "fairmesh", version, about = "Refine mesh vertices by multi-view texture coherence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fair a mesh against calibrated images.
    Fair(FairArgs),
    /// Write the synthetic cube scene.
    Synth(SynthArgs),
    /// Turn a trace CSV into per-vertex plot tables.
    Report(ReportArgs),
}

/// Inputs, outputs and configuration overrides of a fairing run.
#[derive(Debug, Args)]
pub struct FairArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub cams: PathBuf,
    /// Directory of PGM (or PNG) images, matched to cameras in name order.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    /// Directory for basis and residual PGM dumps.
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    pub cell_size: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long, default_value_t = 6.0)]
    pub sigma_smooth_max: f64,
    #[arg(long, default_value_t = 1.2)]
    pub sigma_smooth_min: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 10)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub trust: f64,
    /// Accepted for manifest completeness; fairing itself is deterministic.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl FairArgs {
    pub fn config(&self) -> FairingConfig {
        FairingConfig {
            cell_size: self.cell_size,
            k: self.k,
            levels: self.levels,
            sigma_smooth_max: self.sigma_smooth_max,
            sigma_smooth_min: self.sigma_smooth_min,
            max_iters: self.max_iters,
            step_tol: self.tol,
            trust_fraction: self.trust,
            max_sweeps: self.sweeps,
            ..FairingConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub views: usize,
    #[arg(long, default_value_t = 512)]
    pub image_size: usize,
    /// `VERTEX:MAGNITUDE` (seeded direction) or `VERTEX:DX,DY,DZ`; VERTEX is
    /// `A` or a 0-based index. Writes `cube_perturbed.obj`.
    #[arg(long)]
    pub perturb: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Ground-truth mesh for the position-error series.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Fair(a) => cmd_fair(a, &mut stdout),
        Command::Synth(a) => cmd_synth(a, &mut stdout),
        Command::Report(a) => cmd_report(a, &mut stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error kind={} message={}", e.kind(), e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::InvalidConfig(_)
        | Error::InvalidMesh(_)
        | Error::InvalidView(_) => 2,
        _ => 1,
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Image files in `dir` with a `.pgm` or `.png` extension, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_scene(mesh: &Path, cams: &Path, images: &Path) -> Result<Scene> {
    let mesh = read_obj(mesh)?;
    let cameras = read_cameras(cams)?;
    let files = list_images(images)?;
    if files.len() != cameras.len() {
        return Err(Error::Validation(format!(
            "{} has {} cameras but {} contains {} images",
            cams.display(),
            cameras.len(),
            images.display(),
            files.len()
        )));
    }
    let views = cameras
        .into_iter()
        .zip(&files)
        .map(|(p, f)| Ok(CameraView::new(p, read_image(f)?)))
        .collect::<Result<Vec<_>>>()?;
    Scene::new(mesh, views)
}

pub fn cmd_fair(args: &FairArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let config = args.config();
    config.validate()?;
    let scene = load_scene(&args.mesh, &args.cams, &args.images)?;
    let (faired, trace) = fair_mesh(&scene, &config)?;
    write_obj(&args.out, &faired)?;
    write_atomic(&args.trace, trace.to_csv().as_bytes())?;
    writeln!(out, "# {}", trace.config).map_err(out_err)?;
    for s in &trace.sweeps {
        writeln!(out, "sweep {} max_motion={:.6e} total_E={:.6e}", s.sweep, s.max_motion, s.total_energy)
            .map_err(out_err)?;
    }
    for s in &trace.skips {
        writeln!(out, "skip sweep={} vertex={} reason={}", s.sweep, s.vertex, s.reason).map_err(out_err)?;
    }
    if let Some(dir) = &args.debug_dir {
        dump_debug(dir, &faired, &scene.views, &config)?;
    }
    Ok(())
}

/// Writes `values` (masked order) as a PGM, scaled affinely to 0..255.
/// Returns `(offset, scale)` with `value = offset + scale * byte`.
fn write_scaled_cell(path: &Path, cell: &CellImage) -> Result<(f64, f64)> {
    let values = cell.masked_values();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let size = cell.size();
    let layout = cell.layout();
    let img = GrayImage::from_fn(size, size, |x, y| {
        if layout.is_inside(x, y) {
            (cell.get(x, y) - lo) / span
        } else {
            0.0
        }
    })?;
    write_pgm(path, &img)?;
    Ok((lo, span / 255.0))
}

/// Basis images and per-view residuals of every face at the finest level.
fn dump_debug(dir: &Path, mesh: &TriMesh, views: &[CameraView], config: &FairingConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let layout = CellLayout::new(config.cell_size)?;
    let sigma = config.schedule().last().copied().unwrap_or(0.0);
    let mut sidecar = String::from("file offset scale\n");
    for f in 0..mesh.faces().len() {
        let cells: Vec<CellImage> = views
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                let patch = face_image_triangle(mesh, f, i, v, config.margin).ok()?;
                let map = affine_map(&patch, &layout).ok()?;
                extract_cell(&v.image, &map, &layout).ok()
            })
            .map(|c| crate::warp::smooth_cell(&c, sigma))
            .collect();
        if cells.is_empty() {
            continue;
        }
        let basis = build_basis_with(&cells, config.k.min(cells.len()), config.center_basis)?;
        for m in 0..basis.k() {
            let name = format!("face{f:03}_basis{m}.pgm");
            let (offset, scale) = write_scaled_cell(&dir.join(&name), &basis.basis_cell(m))?;
            let _ = writeln!(sidecar, "{name} {offset:e} {scale:e}");
        }
        let coherence = coherence_residuals(&basis, &cells)?;
        for (i, r) in coherence.residuals.iter().enumerate() {
            let name = format!("face{f:03}_view{i:02}_residual.pgm");
            let (offset, scale) = write_scaled_cell(&dir.join(&name), r)?;
            let _ = writeln!(sidecar, "{name} {offset:e} {scale:e}");
        }
    }
    write_atomic(&dir.join("scaling.txt"), sidecar.as_bytes())
}

fn parse_perturb(spec: &str, seed: u64) -> Result<(usize, Vector3<f64>)> {
    let bad = || Error::Validation(format!("invalid --perturb `{spec}`"));
    let (vertex, amount) = spec.split_once(':').ok_or_else(bad)?;
    let vertex = if vertex.eq_ignore_ascii_case("a") {
        CORNER_A
    } else {
        vertex.parse().map_err(|_| bad())?
    };
    let parts: Vec<f64> = amount
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let offset = match parts.as_slice() {
        [magnitude] => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0ff5e7);
            let dir = loop {
                let d = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n = d.norm();
                if n > 0.1 && n <= 1.0 {
                    break d / n;
                }
            };
            dir * *magnitude
        }
        [dx, dy, dz] => Vector3::new(*dx, *dy, *dz),
        _ => return Err(bad()),
    };
    if !offset.iter().all(|v| v.is_finite()) {
        return Err(bad());
    }
    Ok((vertex, offset))
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let scene = make_cube_scene(&SceneParams {
        seed: args.seed,
        n_views: args.views,
        image_size: args.image_size,
        ..Default::default()
    })?;
    let dir = &args.out_dir;
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    write_obj(&dir.join("cube.obj"), &scene.true_mesh)?;
    write_cameras(&dir.join("cams.txt"), &scene.cameras)?;
    for (i, view) in scene.views.iter().enumerate() {
        write_pgm(&images.join(format!("view_{i:02}.pgm")), &view.image)?;
    }
    if let Some(spec) = &args.perturb {
        let (vertex, offset) = parse_perturb(spec, args.seed)?;
        let perturbed = perturb_vertex(&scene, vertex, offset)?;
        write_obj(&dir.join("cube_perturbed.obj"), &perturbed.work_mesh)?;
        writeln!(out, "perturbed vertex {vertex} by ({}, {}, {})", offset.x, offset.y, offset.z)
            .map_err(out_err)?;
    }
    writeln!(out, "wrote {} views to {}", scene.views.len(), dir.display()).map_err(out_err)?;
    Ok(())
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let text = crate::io::read_text(&args.trace)?;
    let trace = FairingTrace::from_csv(&text, &args.trace)?;
    let truth = args.truth.as_deref().map(read_obj).transpose()?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    let mut by_vertex: BTreeMap<usize, Vec<&crate::fairing::TraceRow>> = BTreeMap::new();
    for row in &trace.rows {
        by_vertex.entry(row.vertex).or_default().push(row);
    }
    if truth.is_none() {
        writeln!(out, "notice: no ground truth given; position-error series omitted").map_err(out_err)?;
    }
    for (vertex, rows) in &by_vertex {
        let mut energy = String::from("step\tsweep\tlevel\titer\tsigma\tE\n");
        for (step, r) in rows.iter().enumerate() {
            let _ = writeln!(energy, "{step}\t{}\t{}\t{}\t{}\t{}", r.sweep, r.level, r.iter, r.sigma, r.energy);
        }
        write_atomic(&args.out_dir.join(format!("vertex{vertex}_energy.tsv")), energy.as_bytes())?;

        if let Some(truth) = &truth {
            let target = truth
                .vertices()
                .get(*vertex)
                .ok_or_else(|| Error::Validation(format!("truth mesh has no vertex {vertex}")))?;
            let mut pos = String::from("step\tsweep\tlevel\titer\terror\n");
            for (step, r) in rows.iter().enumerate() {
                let err = (nalgebra::Point3::new(r.x, r.y, r.z) - target).norm();
                let _ = writeln!(pos, "{step}\t{}\t{}\t{}\t{err}", r.sweep, r.level, r.iter);
            }
            write_atomic(&args.out_dir.join(format!("vertex{vertex}_position_error.tsv")), pos.as_bytes())?;
        }
        writeln!(out, "vertex {vertex}: {} rows", rows.len()).map_err(out_err)?;
    }
    Ok(())
}
