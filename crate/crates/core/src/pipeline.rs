//! End-to-end experiments built from the other modules.
//!
//! [`run_roundtrip`] renders labels for oracle grasps, pushes them through
//! the DDHM container, decodes them, and executes the result.
//! [`run_ablation`] measures how each grouping filter contributes when the
//! fingertip map is polluted with spurious peaks.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::decode::{decode, DecodeConfig, DecodeError, GraspCandidate};
use crate::geometry::{grasp_to_rect, DoubleDotGrasp, GeometryError, Point2};
use crate::io::{read_ddhm, write_ddhm, FormatError};
use crate::labeling::{render_targets, LabelConfig, LabelError};
use crate::metrics::{double_dot_error, rectangle_match, MetricsError, RectMetricConfig};
use crate::raster::GraspMaps;
use crate::sim::{
    execute_grasp, execute_in_clutter, generate_scene, gt_grasps, GraspOutcome, GripperModel, PolygonScene,
    SceneParams, SimError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no seeds given")]
    NoSeeds,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundtripConfig {
    pub scene: SceneParams,
    pub gripper: GripperModel<f64>,
    /// Input image height and width in pixels.
    pub image_size: (usize, usize),
    pub decode: DecodeConfig<f64>,
    pub metric: RectMetricConfig<f64>,
    /// How many top-ranked oracle grasps are rendered per scene.
    pub labels_per_scene: usize,
    /// Largest fingertip error (input pixels) that counts as recovered.
    pub recovery_tolerance: f64,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            gripper: GripperModel::default(),
            image_size: (256, 256),
            decode: DecodeConfig::default(),
            metric: RectMetricConfig::default(),
            labels_per_scene: 1,
            recovery_tolerance: 1.0,
        }
    }
}

impl RoundtripConfig {
    /// Label raster covering the whole input image.
    pub fn label_config(&self) -> LabelConfig<f64> {
        let n = self.decode.stride;
        LabelConfig {
            map_height: self.image_size.0.div_ceil(n),
            map_width: self.image_size.1.div_ceil(n),
            stride: n,
            ..LabelConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRoundtrip {
    pub seed: u64,
    pub labeled: Vec<DoubleDotGrasp<f64>>,
    pub decoded: Option<GraspCandidate<f64>>,
    /// Max fingertip error to the nearest labeled grasp.
    pub fingertip_error: Option<f64>,
    pub recovered: bool,
    /// Rectangle metric of the decoded grasp against that labeled grasp.
    pub rect_match: bool,
    pub sim: Option<GraspOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport {
    pub scenes: Vec<SceneRoundtrip>,
}

impl RoundtripReport {
    fn rate(&self, f: impl Fn(&SceneRoundtrip) -> bool) -> f64 {
        self.scenes.iter().filter(|s| f(s)).count() as f64 / self.scenes.len() as f64
    }

    pub fn recovery_rate(&self) -> f64 {
        self.rate(|s| s.recovered)
    }

    pub fn sim_success_rate(&self) -> f64 {
        self.rate(|s| s.sim.is_some_and(|o| o.is_success()))
    }

    /// Fraction of recovered scenes whose decoded grasp passes the
    /// rectangle metric; 1 when nothing was recovered.
    pub fn recovered_rect_match_rate(&self) -> f64 {
        let rec: Vec<_> = self.scenes.iter().filter(|s| s.recovered).collect();
        if rec.is_empty() {
            return 1.0;
        }
        rec.iter().filter(|s| s.rect_match).count() as f64 / rec.len() as f64
    }
}

/// Oracle grasps → labels → DDHM bytes → decode → simulated execution, for one scene.
pub fn roundtrip_scene(seed: u64, cfg: &RoundtripConfig) -> Result<SceneRoundtrip, PipelineError> {
    let scene = generate_scene::<f64>(seed, &cfg.scene)?;
    let labeled: Vec<_> = gt_grasps(&scene, &cfg.gripper).into_iter().take(cfg.labels_per_scene).collect();
    let jaw = cfg.gripper.jaw_size();
    let rects = labeled.iter().map(|g| grasp_to_rect(g, jaw)).collect::<Result<Vec<_>, _>>()?;
    let label_cfg = cfg.label_config();
    let targets = render_targets(&rects, &label_cfg)?;
    let bytes = write_ddhm(&targets.maps, label_cfg.stride as u32);
    let (maps, stride) = read_ddhm::<f64>(&bytes)?;
    let decode_cfg = DecodeConfig { stride: stride as usize, ..cfg.decode };
    let decoded = decode(&maps, &decode_cfg)?.into_iter().next();

    let mut out = SceneRoundtrip {
        seed,
        labeled: labeled.clone(),
        decoded,
        fingertip_error: None,
        recovered: false,
        rect_match: false,
        sim: None,
    };
    if let Some(top) = decoded {
        let nearest = labeled
            .iter()
            .zip(&rects)
            .map(|(g, r)| (double_dot_error(&top.grasp, g).0, r))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((err, rect)) = nearest {
            out.fingertip_error = Some(err);
            out.recovered = err <= cfg.recovery_tolerance;
            let pred = grasp_to_rect(&top.grasp, jaw)?;
            out.rect_match = rectangle_match(&pred, std::slice::from_ref(rect), &cfg.metric)?;
        }
        out.sim = Some(execute_grasp(&scene, &top.grasp, &cfg.gripper));
    }
    Ok(out)
}

pub fn run_roundtrip(seeds: Range<u64>, cfg: &RoundtripConfig) -> Result<RoundtripReport, PipelineError> {
    if seeds.is_empty() {
        return Err(PipelineError::NoSeeds);
    }
    let scenes = seeds.into_par_iter().map(|s| roundtrip_scene(s, cfg)).collect::<Result<Vec<_>, _>>()?;
    Ok(RoundtripReport { scenes })
}

/// Which grouping filters are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterSet {
    pub orientation: bool,
    pub center: bool,
}

impl FilterSet {
    pub const NONE: Self = Self { orientation: false, center: false };
    pub const CENTER: Self = Self { orientation: false, center: true };
    pub const ORIENTATION: Self = Self { orientation: true, center: false };
    pub const BOTH: Self = Self { orientation: true, center: true };

    pub fn label(&self) -> &'static str {
        match (self.orientation, self.center) {
            (false, false) => "no filters",
            (false, true) => "center only",
            (true, false) => "orientation only",
            (true, true) => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationConfig {
    pub scene: SceneParams,
    /// Object centers in input pixels.
    pub object_centers: [(f64, f64); 2],
    pub gripper: GripperModel<f64>,
    pub image_size: (usize, usize),
    pub decode: DecodeConfig<f64>,
    pub distractors: usize,
    /// Range of simulated detector confidence for true and spurious peaks.
    pub confidence: (f64, f64),
    /// Distractors land within this many pixels outside an object's radius.
    pub distractor_band: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            object_centers: [(80.0, 128.0), (176.0, 128.0)],
            gripper: GripperModel::default(),
            image_size: (256, 256),
            decode: DecodeConfig::default(),
            distractors: 10,
            confidence: (0.5, 1.0),
            distractor_band: 12.0,
        }
    }
}

/// Two objects and a synthetic detector output for them.
#[derive(Debug, Clone)]
pub struct ClutterScene {
    pub seed: u64,
    pub objects: Vec<PolygonScene<f64>>,
    pub labeled: Vec<DoubleDotGrasp<f64>>,
    pub maps: GraspMaps<f64>,
}

fn max_radius(scene: &PolygonScene<f64>) -> f64 {
    let c = scene.centroid();
    scene.vertices().iter().map(|v| v.distance(c)).fold(0.0, f64::max)
}

/// Builds a two-object scene and a simulated prediction: each object's
/// top oracle grasp rendered at a random confidence, plus spurious
/// fingertip peaks around the objects with random orientations.
pub fn clutter_scene(seed: u64, cfg: &AblationConfig) -> Result<ClutterScene, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03);
    let n = cfg.decode.stride;
    let label_cfg = LabelConfig {
        map_height: cfg.image_size.0.div_ceil(n),
        map_width: cfg.image_size.1.div_ceil(n),
        stride: n,
        ..LabelConfig::default()
    };
    let (h, w) = (label_cfg.map_height, label_cfg.map_width);
    let mut maps = GraspMaps::<f64>::zeros(h, w);
    let mut objects = Vec::with_capacity(2);
    let mut labeled = Vec::with_capacity(2);
    let mut occupied: Vec<(usize, usize)> = Vec::new();

    for (k, &center) in cfg.object_centers.iter().enumerate() {
        let params = SceneParams { center, ..cfg.scene };
        let obj = generate_scene::<f64>(seed.wrapping_mul(2).wrapping_add(k as u64), &params)?;
        if let Some(g) = gt_grasps(&obj, &cfg.gripper).into_iter().next() {
            let rect = grasp_to_rect(&g, cfg.gripper.jaw_size())?;
            let t = render_targets(&[rect], &label_cfg)?;
            let conf = rng.gen_range(cfg.confidence.0..=cfg.confidence.1);
            merge_object(&mut maps, &t.maps, &t.fingertip_mask, &t.center_mask, conf);
            for r in 0..h {
                for c in 0..w {
                    if t.fingertip_mask.get(r, c) {
                        occupied.push((r, c));
                    }
                }
            }
            labeled.push(g);
        }
        objects.push(obj);
    }

    let nf = n as f64;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < cfg.distractors && attempts < 10_000 {
        attempts += 1;
        let obj = &objects[rng.gen_range(0..objects.len())];
        let c = obj.centroid();
        let r = max_radius(obj);
        let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let d = rng.gen_range(0.5 * r..r + cfg.distractor_band);
        let p = c + Point2::from_angle(phi) * d;
        if !objects.iter().all(|o| o.strictly_outside(p)) {
            continue;
        }
        let (col, row) = ((p.x / nf).floor(), (p.y / nf).floor());
        if col < 0.0 || row < 0.0 || col >= w as f64 || row >= h as f64 {
            continue;
        }
        let (row, col) = (row as usize, col as usize);
        let near = occupied.iter().any(|&(r2, c2)| r2.abs_diff(row).max(c2.abs_diff(col)) < 3);
        if near {
            continue;
        }
        let score = rng.gen_range(cfg.confidence.0..=cfg.confidence.1);
        let orientation = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        maps.fingertip_score.set(row, col, score);
        maps.fingertip_offset_x.set(row, col, p.x / nf - col as f64);
        maps.fingertip_offset_y.set(row, col, p.y / nf - row as f64);
        maps.sin.set(row, col, orientation.sin());
        maps.cos.set(row, col, orientation.cos());
        occupied.push((row, col));
        placed += 1;
    }

    Ok(ClutterScene { seed, objects, labeled, maps })
}

fn merge_object(
    dst: &mut GraspMaps<f64>,
    src: &GraspMaps<f64>,
    tips: &crate::raster::Mask,
    centers: &crate::raster::Mask,
    confidence: f64,
) {
    let (h, w) = dst.shape();
    for r in 0..h {
        for c in 0..w {
            let f = src.fingertip_score.get(r, c) * confidence;
            if f > dst.fingertip_score.get(r, c) {
                dst.fingertip_score.set(r, c, f);
            }
            let s = src.center_score.get(r, c) * confidence;
            if s > dst.center_score.get(r, c) {
                dst.center_score.set(r, c, s);
            }
            if tips.get(r, c) {
                dst.fingertip_offset_x.set(r, c, src.fingertip_offset_x.get(r, c));
                dst.fingertip_offset_y.set(r, c, src.fingertip_offset_y.get(r, c));
                dst.sin.set(r, c, src.sin.get(r, c));
                dst.cos.set(r, c, src.cos.get(r, c));
            }
            if centers.get(r, c) {
                dst.center_offset_x.set(r, c, src.center_offset_x.get(r, c));
                dst.center_offset_y.set(r, c, src.center_offset_y.get(r, c));
            }
        }
    }
}

/// Whether the top decoded grasp succeeds among the scene's objects.
pub fn clutter_success(scene: &ClutterScene, filters: FilterSet, cfg: &AblationConfig) -> Result<bool, PipelineError> {
    let decode_cfg =
        DecodeConfig { orientation_matching: filters.orientation, center_matching: filters.center, ..cfg.decode };
    let Some(top) = decode(&scene.maps, &decode_cfg)?.into_iter().next() else {
        return Ok(false);
    };
    let objects: Vec<&PolygonScene<f64>> = scene.objects.iter().collect();
    Ok(execute_in_clutter(&objects, &top.grasp, &cfg.gripper).is_success())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub n_scenes: usize,
    /// `(filters, successes)` in the order none, center, orientation, both.
    pub results: Vec<(FilterSet, usize)>,
}

impl AblationReport {
    pub fn rate(&self, filters: FilterSet) -> f64 {
        let hits = self.results.iter().find(|(f, _)| *f == filters).map_or(0, |(_, n)| *n);
        hits as f64 / self.n_scenes as f64
    }
}

pub fn run_ablation(seeds: Range<u64>, cfg: &AblationConfig) -> Result<AblationReport, PipelineError> {
    if seeds.is_empty() {
        return Err(PipelineError::NoSeeds);
    }
    let variants = [FilterSet::NONE, FilterSet::CENTER, FilterSet::ORIENTATION, FilterSet::BOTH];
    let per_scene = seeds
        .clone()
        .into_par_iter()
        .map(|seed| {
            let scene = clutter_scene(seed, cfg)?;
            variants.iter().map(|&f| clutter_success(&scene, f, cfg)).collect::<Result<Vec<bool>, _>>()
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let results = variants.iter().enumerate().map(|(i, &f)| (f, per_scene.iter().filter(|v| v[i]).count())).collect();
    Ok(AblationReport { n_scenes: per_scene.len(), results })
}
