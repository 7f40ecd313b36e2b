use std::collections::{BTreeMap, HashMap};
use std::fmt::{Display, Write as _};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use ddgrasp::decode::extract_peaks;
use ddgrasp::io::{
    parse_cornell, parse_jacquard, read_ddhm, read_predictions, read_scene, write_ddhm, write_predictions, write_scene,
    AnnotationSet, PlateEdge, PredictionRecord,
};
use ddgrasp::metrics::evaluate;
use ddgrasp::pipeline::{run_roundtrip, RoundtripConfig};
use ddgrasp::sim::{run_trials, OracleSource, TrialReport};
use ddgrasp::{
    decode, grasp_to_rect, render_targets, DecodeConfig, Grasp, GripperModel, LabelConfig, Maps, Rect,
    RectMetricConfig, Scene, SceneParams,
};

/// Double-dot grasp detection tools: labeling, decoding, evaluation and simulation.
#[derive(Debug, Parser)]
#[command(name = "ddgrasp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render training target maps from an annotation file.
    Label(LabelArgs),
    /// Decode grasps from predicted maps.
    Decode(DecodeArgs),
    /// Score top predictions with the rectangle metric.
    Eval(EvalArgs),
    /// Execute grasps on generated polygon scenes.
    Sim(SimArgs),
    /// Label, decode and execute oracle grasps on generated scenes.
    Roundtrip(RoundtripArgs),
    /// Draw maps, grasps and scenes as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Cornell,
    Jacquard,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlateEdgeArg {
    #[value(name = "12")]
    V12,
    #[value(name = "23")]
    V23,
}

impl From<PlateEdgeArg> for PlateEdge {
    fn from(p: PlateEdgeArg) -> Self {
        match p {
            PlateEdgeArg::V12 => PlateEdge::V12,
            PlateEdgeArg::V23 => PlateEdge::V23,
        }
    }
}

#[derive(Debug, Args)]
struct AnnotationArgs {
    /// Annotation grammar.
    #[arg(long, value_enum)]
    format: Format,
    /// Cornell edge that lies along a gripper plate.
    #[arg(long, value_enum, default_value = "12")]
    plate_edge: PlateEdgeArg,
    /// Negate Jacquard angles (y-up annotations, y-down images).
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    theta_flip: bool,
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Annotation file.
    input: PathBuf,
    #[command(flatten)]
    annotations: AnnotationArgs,
    /// Input image size as HxW pixels.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    /// Input pixels per map cell.
    #[arg(long, default_value_t = 4)]
    stride: usize,
    /// Gaussian spread along the grasp axis, in cells.
    #[arg(long, default_value_t = 1.0)]
    sigma_x: f64,
    /// Gaussian spread along the plate, as a fraction of the jaw size.
    #[arg(long, default_value_t = 0.75)]
    sigma_y_factor: f64,
    /// Use exp(-d²/2) instead of exp(-d²).
    #[arg(long)]
    half_exponent: bool,
    /// Output DDHM file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// DDHM map file.
    #[arg(long)]
    maps: PathBuf,
    /// Fingertip and center candidates kept after suppression.
    #[arg(long, default_value_t = 70)]
    topk: usize,
    /// Orientation matching tolerance in degrees.
    #[arg(long, default_value_t = 30.0)]
    ori_tol_deg: f64,
    /// Smallest gripper opening in pixels.
    #[arg(long, default_value_t = 2.0)]
    min_open: f64,
    /// Largest gripper opening in pixels.
    #[arg(long, default_value_t = 70.0)]
    max_open: f64,
    /// Center region radius as a fraction of the opening (e.g. 1/3 or 0.25).
    #[arg(long, default_value = "1/3", value_parser = parse_fraction)]
    center_radius: f64,
    /// Non-maximum suppression window side.
    #[arg(long, default_value_t = 3)]
    nms: usize,
    /// Skip the orientation matching filter.
    #[arg(long)]
    no_orientation_match: bool,
    /// Skip the center matching filter.
    #[arg(long)]
    no_center_match: bool,
    /// Image id for the prediction record [default: maps file stem].
    #[arg(long)]
    id: Option<String>,
    /// Prediction file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Prediction file.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth annotation files; each file stem is an image id.
    #[arg(long, num_args = 1.., required = true)]
    gt: Vec<PathBuf>,
    #[command(flatten)]
    annotations: AnnotationArgs,
    /// Minimum IoU (exclusive).
    #[arg(long, default_value_t = 0.25)]
    iou: f64,
    /// Maximum axis angle difference in degrees.
    #[arg(long, default_value_t = 30.0)]
    angle_deg: f64,
    /// Jaw size given to predicted grasps [default: mean jaw size of the image's ground truth].
    #[arg(long)]
    plate_h: Option<f64>,
}

#[derive(Debug, Args)]
struct GripperArgs {
    /// Friction coefficient.
    #[arg(long, default_value_t = 0.4)]
    mu: f64,
    /// Smallest gripper opening in pixels.
    #[arg(long, default_value_t = 2.0)]
    min_open: f64,
    /// Largest gripper opening in pixels.
    #[arg(long, default_value_t = 70.0)]
    max_open: f64,
    /// Half-width of a gripper plate in pixels.
    #[arg(long, default_value_t = 5.0)]
    plate_halfwidth: f64,
}

impl GripperArgs {
    fn model(&self) -> GripperModel<f64> {
        GripperModel {
            min_opening: self.min_open,
            max_opening: self.max_open,
            plate_halfwidth: self.plate_halfwidth,
            friction_coefficient: self.mu,
        }
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Scene seeds as a half-open range a..b.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Range<u64>,
    /// Prediction file with ids scene_<seed>; the top grasp is executed.
    #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
    preds: Option<PathBuf>,
    /// Execute the best analytic grasp of each scene.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    gripper: GripperArgs,
    /// Write each scene as scene_<seed>.txt into this directory.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RoundtripArgs {
    /// Scene seeds as a half-open range a..b.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Range<u64>,
    /// Oracle grasps rendered per scene.
    #[arg(long, default_value_t = 1)]
    labels_per_scene: usize,
    /// Largest fingertip error in pixels that counts as recovered.
    #[arg(long, default_value_t = 1.0)]
    tolerance: f64,
    #[command(flatten)]
    gripper: GripperArgs,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// DDHM map file; the fingertip heatmap and its peaks are drawn.
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Prediction file; every grasp is drawn as a segment.
    #[arg(long)]
    preds: Option<PathBuf>,
    /// Scene vertex file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output SVG file.
    #[arg(long)]
    svg: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HxW")?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    if h == 0 || w == 0 {
        return Err("size must be positive".into());
    }
    Ok((h, w))
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator {a:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator {b:?}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|_| format!("bad number {s:?}"))?,
    };
    if !(v.is_finite() && v > 0.0) {
        return Err("must be a positive finite number".into());
    }
    Ok(v)
}

fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    if a >= b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

/// Exit status 2: bad usage or input. Exit status 3: processing failure.
enum Failure {
    Input(anyhow::Error),
    Processing(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(ctx: impl Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(e.into().context(ctx.to_string()))
}

fn processing<E: Into<anyhow::Error>>(ctx: impl Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Processing(e.into().context(ctx.to_string()))
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(input(format!("reading {}", path.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, bytes).map_err(processing(format!("writing {}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_annotations(path: &Path, args: &AnnotationArgs) -> Result<AnnotationSet<f64>, Failure> {
    let bytes = read_file(path)?;
    let id = stem(path);
    let set = match args.format {
        Format::Cornell => parse_cornell(&bytes, &id, args.plate_edge.into()),
        Format::Jacquard => parse_jacquard(&bytes, &id, args.theta_flip),
    }
    .map_err(input(path.display()))?;
    if set.skipped > 0 {
        eprintln!("warning: {}: skipped {} rectangle(s) with NaN vertices", path.display(), set.skipped);
    }
    Ok(set)
}

fn load_maps(path: &Path) -> Result<(Maps, u32), Failure> {
    read_ddhm(&read_file(path)?).map_err(input(path.display()))
}

fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord<f64>>, Failure> {
    read_predictions(&read_file(path)?).map_err(input(path.display()))
}

fn cmd_label(a: &LabelArgs) -> CmdResult {
    let set = load_annotations(&a.input, &a.annotations)?;
    if a.stride == 0 {
        return Err(Failure::Input(anyhow!("--stride must be >= 1")));
    }
    let cfg = LabelConfig {
        map_height: a.size.0.div_ceil(a.stride),
        map_width: a.size.1.div_ceil(a.stride),
        stride: a.stride,
        sigma_x: a.sigma_x,
        sigma_y_factor: a.sigma_y_factor,
        half_exponent: a.half_exponent,
        ..LabelConfig::default()
    };
    cfg.validate().map_err(input("label configuration"))?;
    let targets = render_targets(&set.grasps, &cfg).map_err(processing("rendering targets"))?;
    write_file(&a.out, write_ddhm(&targets.maps, a.stride as u32))?;
    println!(
        "wrote {} ({}x{} cells, stride {}, {} grasp(s))",
        a.out.display(),
        cfg.map_height,
        cfg.map_width,
        a.stride,
        set.grasps.len()
    );
    Ok(())
}

fn cmd_decode(a: &DecodeArgs) -> CmdResult {
    let (maps, stride) = load_maps(&a.maps)?;
    let cfg = DecodeConfig {
        top_k: a.topk,
        stride: stride as usize,
        min_opening: a.min_open,
        max_opening: a.max_open,
        orientation_tolerance: a.ori_tol_deg.to_radians(),
        center_radius_factor: a.center_radius,
        nms_window: a.nms,
        orientation_matching: !a.no_orientation_match,
        center_matching: !a.no_center_match,
    };
    cfg.validate().map_err(input("decode configuration"))?;
    let candidates = decode(&maps, &cfg).map_err(processing("decoding"))?;
    let record = PredictionRecord {
        image_id: a.id.clone().unwrap_or_else(|| stem(&a.maps)),
        grasps: candidates.iter().map(|c| (c.grasp, c.score)).collect(),
    };
    if let Some(out) = &a.out {
        write_file(out, write_predictions(std::slice::from_ref(&record)))?;
    }
    match record.top() {
        Some((g, s)) => println!(
            "best {:.6} {:.6} {:.6} {:.6} score={:.6} ({} candidate(s))",
            g.c1.x,
            g.c1.y,
            g.c2.x,
            g.c2.y,
            s,
            record.grasps.len()
        ),
        None => println!("no grasp found"),
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let records = load_predictions(&a.pred)?;
    let mut gts: BTreeMap<String, Vec<Rect>> = BTreeMap::new();
    for path in &a.gt {
        let set = load_annotations(path, &a.annotations)?;
        if set.grasps.is_empty() {
            return Err(Failure::Input(anyhow!("{}: no usable ground-truth rectangles", path.display())));
        }
        if gts.insert(set.image_id.clone(), set.grasps).is_some() {
            return Err(Failure::Input(anyhow!("duplicate ground-truth id {:?}", stem(path))));
        }
    }
    let mut preds: BTreeMap<String, Option<Rect>> = BTreeMap::new();
    for r in &records {
        let Some(gt) = gts.get(&r.image_id) else {
            return Err(Failure::Input(anyhow!("prediction id {:?} has no ground truth", r.image_id)));
        };
        let h = a.plate_h.unwrap_or_else(|| gt.iter().map(|g| g.h).sum::<f64>() / gt.len() as f64);
        let rect = match r.top() {
            Some((g, _)) => Some(grasp_to_rect(g, h).map_err(input(format!("prediction for {}", r.image_id)))?),
            None => None,
        };
        preds.insert(r.image_id.clone(), rect);
    }
    if let Some(id) = gts.keys().find(|id| !preds.contains_key(*id)) {
        return Err(Failure::Input(anyhow!("ground-truth id {id:?} has no prediction record")));
    }
    let cfg = RectMetricConfig { iou_threshold: a.iou, angle_threshold: a.angle_deg.to_radians() };
    let report = evaluate(&preds, &gts, &cfg).map_err(input("evaluation"))?;
    print!("{}", report.to_key_values());
    Ok(())
}

fn print_trials(report: &TrialReport) {
    println!("mu={:.6}", report.friction_coefficient);
    println!("n_scenes={}", report.n_scenes());
    println!("n_success={}", report.n_success);
    println!("success_rate={:.6}", report.success_rate());
    for (seed, outcome) in &report.outcomes {
        println!("seed={seed} outcome={outcome}");
    }
}

fn cmd_sim(a: &SimArgs) -> CmdResult {
    let gripper = a.gripper.model();
    gripper.validate().map_err(input("gripper parameters"))?;
    let params = SceneParams::default();
    if let Some(dir) = &a.export_dir {
        fs::create_dir_all(dir).map_err(processing(format!("creating {}", dir.display())))?;
        for seed in a.seeds.clone() {
            let scene: Scene = ddgrasp::generate_scene(seed, &params).map_err(processing("generating scene"))?;
            write_file(&dir.join(format!("scene_{seed}.txt")), write_scene(&scene))?;
        }
    }
    let report = match &a.preds {
        None => run_trials(a.seeds.clone(), &params, &OracleSource { gripper }, &gripper),
        Some(path) => {
            let mut top: HashMap<u64, Grasp> = HashMap::new();
            for r in load_predictions(path)? {
                let seed = r
                    .image_id
                    .strip_prefix("scene_")
                    .and_then(|s| s.parse::<u64>().ok())
                    .ok_or_else(|| Failure::Input(anyhow!("prediction id {:?} is not scene_<seed>", r.image_id)))?;
                if let Some((g, _)) = r.top() {
                    top.insert(seed, *g);
                }
            }
            let source = |scene: &Scene| top.get(&scene.seed).copied();
            run_trials(a.seeds.clone(), &params, &source, &gripper)
        }
    }
    .map_err(processing("running trials"))?;
    print_trials(&report);
    Ok(())
}

fn cmd_roundtrip(a: &RoundtripArgs) -> CmdResult {
    let gripper = a.gripper.model();
    gripper.validate().map_err(input("gripper parameters"))?;
    let cfg = RoundtripConfig {
        gripper,
        labels_per_scene: a.labels_per_scene,
        recovery_tolerance: a.tolerance,
        ..RoundtripConfig::default()
    };
    let report = run_roundtrip(a.seeds.clone(), &cfg).map_err(processing("roundtrip"))?;
    println!("n_scenes={}", report.scenes.len());
    println!("recovery_rate={:.6}", report.recovery_rate());
    println!("recovered_rect_match_rate={:.6}", report.recovered_rect_match_rate());
    println!("sim_success_rate={:.6}", report.sim_success_rate());
    for s in &report.scenes {
        let err = s.fingertip_error.map_or_else(|| "nan".into(), |e| format!("{e:.6}"));
        let outcome = match s.sim {
            None => "no_prediction".to_string(),
            Some(ddgrasp::GraspOutcome::Success) => "success".to_string(),
            Some(ddgrasp::GraspOutcome::Failure(r)) => r.as_str().to_string(),
        };
        println!(
            "seed={} recovered={} fingertip_error={err} rect_match={} outcome={outcome}",
            s.seed, s.recovered as u8, s.rect_match as u8
        );
    }
    Ok(())
}

struct Canvas {
    min: (f64, f64),
    max: (f64, f64),
}

impl Canvas {
    fn empty() -> Self {
        Self { min: (f64::INFINITY, f64::INFINITY), max: (f64::NEG_INFINITY, f64::NEG_INFINITY) }
    }

    fn include(&mut self, x: f64, y: f64) {
        self.min = (self.min.0.min(x), self.min.1.min(y));
        self.max = (self.max.0.max(x), self.max.1.max(y));
    }

    fn view_box(&self) -> (f64, f64, f64, f64) {
        if !self.min.0.is_finite() {
            return (0.0, 0.0, 1.0, 1.0);
        }
        (self.min.0, self.min.1, (self.max.0 - self.min.0).max(1.0), (self.max.1 - self.min.1).max(1.0))
    }
}

fn render_svg(maps: Option<&(Maps, u32)>, preds: &[PredictionRecord<f64>], scene: Option<&Scene>) -> String {
    let mut canvas = Canvas::empty();
    if let Some((m, n)) = maps {
        let n = *n as f64;
        canvas.include(0.0, 0.0);
        canvas.include(m.width() as f64 * n, m.height() as f64 * n);
    }
    const PAD: f64 = 8.0;
    for r in preds {
        for (g, _) in &r.grasps {
            for p in [g.c1, g.c2] {
                canvas.include(p.x - PAD, p.y - PAD);
                canvas.include(p.x + PAD, p.y + PAD);
            }
        }
    }
    if let Some(s) = scene {
        for p in s.vertices() {
            canvas.include(p.x - PAD, p.y - PAD);
            canvas.include(p.x + PAD, p.y + PAD);
        }
    }
    let (x0, y0, w, h) = canvas.view_box();
    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.3} {y0:.3} {w:.3} {h:.3}" width="{w:.0}" height="{h:.0}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect x="{x0:.3}" y="{y0:.3}" width="{w:.3}" height="{h:.3}" fill="black"/>"#).unwrap();

    if let Some((m, n)) = maps {
        let n = *n as usize;
        writeln!(svg, r#"<g id="heatmap">"#).unwrap();
        for row in 0..m.height() {
            for col in 0..m.width() {
                let v = m.fingertip_score.get(row, col);
                if v > 0.0 {
                    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                    writeln!(
                        svg,
                        r#"<rect x="{}" y="{}" width="{n}" height="{n}" fill="rgb({g},{g},{g})"/>"#,
                        col * n,
                        row * n
                    )
                    .unwrap();
                }
            }
        }
        writeln!(svg, "</g>").unwrap();
        let peaks = extract_peaks(&m.fingertip_score, (&m.fingertip_offset_x, &m.fingertip_offset_y), 70, n, 3)
            .unwrap_or_default();
        writeln!(svg, r#"<g id="peaks" fill="red">"#).unwrap();
        for p in peaks {
            writeln!(svg, r#"<circle cx="{:.3}" cy="{:.3}" r="1.5"/>"#, p.refined.x, p.refined.y).unwrap();
        }
        writeln!(svg, "</g>").unwrap();
    }

    if let Some(s) = scene {
        let mut d = String::new();
        for (i, p) in s.vertices().iter().enumerate() {
            write!(d, "{}{:.3} {:.3} ", if i == 0 { "M" } else { "L" }, p.x, p.y).unwrap();
        }
        d.push('Z');
        writeln!(svg, r#"<path d="{d}" fill="none" stroke="white" stroke-width="1"/>"#).unwrap();
    }

    if preds.iter().any(|r| !r.grasps.is_empty()) {
        writeln!(svg, r#"<g id="grasps" stroke="lime" stroke-width="1" fill="lime">"#).unwrap();
        for r in preds {
            for (g, _) in &r.grasps {
                writeln!(svg, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, g.c1.x, g.c1.y, g.c2.x, g.c2.y)
                    .unwrap();
                for p in [g.c1, g.c2] {
                    writeln!(svg, r#"<circle cx="{:.3}" cy="{:.3}" r="2"/>"#, p.x, p.y).unwrap();
                }
            }
        }
        writeln!(svg, "</g>").unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn cmd_render(a: &RenderArgs) -> CmdResult {
    if a.maps.is_none() && a.preds.is_none() && a.scene.is_none() {
        return Err(Failure::Input(anyhow!("nothing to render: give --maps, --preds or --scene")));
    }
    let maps = a.maps.as_deref().map(load_maps).transpose()?;
    let preds = match &a.preds {
        Some(p) => load_predictions(p)?,
        None => Vec::new(),
    };
    let scene = match &a.scene {
        Some(p) => Some(read_scene::<f64>(&read_file(p)?, 0).map_err(input(p.display()))?),
        None => None,
    };
    write_file(&a.svg, render_svg(maps.as_ref(), &preds, scene.as_ref()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Label(a) => cmd_label(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
        Command::Render(a) => cmd_render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Processing(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
