//! End-to-end runs over image directories: configuration, per-image
//! processing, the line-delimited manifest, evaluation and the component
//! ablation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backends::mock::{
    stable_hash, synthesize_corpus, MockDetector, MockNoise, MockScorer, MockSegmenter,
    SceneCorpus, SynthOptions,
};
use crate::backends::{BackendSet, CommandBackend};
use crate::clip_filter::{filter_traced, ExtendedPatch, FilterConfig};
use crate::detection::{detect_multiscale_traced, DetectionConfig, ScaleCount};
use crate::error::{Error, Result};
use crate::geometry::{BBox, ClassId, Detection};
use crate::mask::LabelMask;
use crate::metrics::{compute_report, ConfusionMatrix, EvalReport};
use crate::prompts::{ClassSpec, PromptSet};
use crate::raster::Image;
use crate::segmentation::{assemble_label_mask, segment_all};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const PATCH_DIR: &str = "patches";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    /// Scene-driven mocks; `scenes` is a scene corpus file.
    Mock {
        scenes: PathBuf,
        #[serde(default)]
        noise: MockNoise,
        /// Score mass the mock scorer moves to a wrong candidate.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        confusion: Option<f64>,
    },
    /// External program speaking the JSON protocol of [`CommandBackend`].
    Command {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub prompts: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    pub backend: BackendConfig,
}

impl RunConfig {
    /// Parse and validate; relative paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.prompts);
        match &mut cfg.backend {
            BackendConfig::Mock { scenes, .. } => resolve(scenes),
            BackendConfig::Command { program, .. } => {
                // bare program names are looked up on PATH
                if program.components().count() > 1 {
                    resolve(program)
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.filter.validate()?;
        if !self.prompts.is_file() {
            return Err(Error::Config(format!(
                "prompt file {} not found",
                self.prompts.display()
            )));
        }
        match &self.backend {
            BackendConfig::Mock {
                scenes,
                noise,
                confusion,
            } => {
                noise.validate()?;
                if !scenes.is_file() {
                    return Err(Error::Config(format!(
                        "scene file {} not found",
                        scenes.display()
                    )));
                }
                if matches!(confusion, Some(e) if !(0.0..0.5).contains(e)) {
                    return Err(Error::Config(
                        "mock confusion must be within [0, 0.5)".into(),
                    ));
                }
            }
            BackendConfig::Command { program, .. } => {
                if program.as_os_str().is_empty() {
                    return Err(Error::Config("command backend needs a program".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}

/// Creates the backends used for one image.
pub trait BackendProvider {
    fn backends_for(&self, stem: &str) -> Result<BackendSet>;
}

pub struct MockProvider {
    corpus: SceneCorpus,
    noise: MockNoise,
    confusion: Option<f64>,
    template: String,
    seed: u64,
}

impl MockProvider {
    pub fn new(
        corpus: SceneCorpus,
        noise: MockNoise,
        confusion: Option<f64>,
        template: impl Into<String>,
        seed: u64,
    ) -> Self {
        Self {
            corpus,
            noise,
            confusion,
            template: template.into(),
            seed,
        }
    }
}

impl BackendProvider for MockProvider {
    fn backends_for(&self, stem: &str) -> Result<BackendSet> {
        let scene = self
            .corpus
            .get(stem)
            .ok_or_else(|| Error::InvalidArgument(format!("no mock scene for image `{stem}`")))?;
        let mut scorer = MockScorer::new(self.corpus.palette()?, self.template.clone());
        if let Some(eps) = self.confusion {
            scorer = scorer.with_confusion(eps);
        }
        Ok(BackendSet {
            detector: Box::new(MockDetector::new(
                scene.clone(),
                self.noise,
                self.seed ^ stable_hash(stem),
            )),
            scorer: Box::new(scorer),
            segmenter: Box::new(MockSegmenter::new(scene.clone())),
        })
    }
}

pub struct CommandProvider {
    program: PathBuf,
    args: Vec<String>,
}

impl BackendProvider for CommandProvider {
    fn backends_for(&self, stem: &str) -> Result<BackendSet> {
        let make = || {
            CommandBackend::new(&self.program, self.args.clone()).map_err(|source| Error::Backend {
                image: stem.to_string(),
                source,
            })
        };
        Ok(BackendSet {
            detector: Box::new(make()?),
            scorer: Box::new(make()?),
            segmenter: Box::new(make()?),
        })
    }
}

pub fn provider_for(cfg: &RunConfig) -> Result<Box<dyn BackendProvider>> {
    Ok(match &cfg.backend {
        BackendConfig::Mock {
            scenes,
            noise,
            confusion,
        } => Box::new(MockProvider::new(
            SceneCorpus::load(scenes)?,
            *noise,
            *confusion,
            cfg.filter.template.clone(),
            cfg.seed,
        )),
        BackendConfig::Command { program, args } => Box::new(CommandProvider {
            program: program.clone(),
            args: args.clone(),
        }),
    })
}

/// Which stages run; the ablation varies these.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub detection: DetectionConfig,
    /// `None` skips the visual-prompt filter.
    pub filter: Option<FilterConfig>,
    pub keep_patches: bool,
}

impl PipelineOptions {
    pub fn full(cfg: &RunConfig) -> Self {
        Self {
            detection: cfg.detection.clone(),
            filter: Some(cfg.filter.clone()),
            keep_patches: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub kept: bool,
    pub argmax: usize,
    pub matched_class: Option<ClassId>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub bbox: BBox,
    pub raw_label: String,
    pub canonical_class: ClassId,
    pub confidence: f64,
    pub source_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterRecord>,
}

impl DetectionRecord {
    fn new(d: &Detection, filter: Option<FilterRecord>) -> Self {
        Self {
            bbox: d.bbox,
            raw_label: d.raw_label.clone(),
            canonical_class: d.canonical_class,
            confidence: d.confidence,
            source_scale: d.source_scale,
            filter,
        }
    }

    pub fn kept(&self) -> bool {
        self.filter.as_ref().is_none_or(|f| f.kept)
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub raw_per_scale: Vec<ScaleCount>,
    pub raw: usize,
    pub post_nms: usize,
    pub post_filter: usize,
    pub empty_masks: usize,
    /// Post-NMS detections with their filter decisions.
    pub detections: Vec<DetectionRecord>,
}

impl ImageRecord {
    fn failed(image: &str, err: &Error) -> Self {
        Self {
            image: image.to_string(),
            error: Some(err.to_string()),
            raw_per_scale: vec![],
            raw: 0,
            post_nms: 0,
            post_filter: 0,
            empty_masks: 0,
            detections: vec![],
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// `post_filter <= post_nms <= raw`.
    pub fn counts_consistent(&self) -> bool {
        self.post_filter <= self.post_nms && self.post_nms <= self.raw
    }
}

pub struct ImageOutcome {
    pub label_mask: LabelMask,
    pub record: ImageRecord,
    pub final_detections: Vec<Detection>,
    /// `(detection index, annotated patch)` when patches were requested.
    pub patches: Vec<(usize, ExtendedPatch)>,
}

/// Detection, filtering, point-prompted segmentation and assembly for one image.
pub fn process_image(
    stem: &str,
    img: &Image,
    ps: &PromptSet,
    backends: &mut BackendSet,
    opts: &PipelineOptions,
) -> Result<ImageOutcome> {
    let mut inner = || -> Result<ImageOutcome> {
        let det = detect_multiscale_traced(img, ps, backends.detector.as_mut(), &opts.detection)?;
        let post_nms = det.detections.len();

        let mut records = Vec::with_capacity(post_nms);
        let mut patches = Vec::new();
        let kept: Vec<Detection> = match &opts.filter {
            Some(fcfg) => {
                let decisions = filter_traced(
                    &det.detections,
                    img,
                    ps,
                    backends.scorer.as_mut(),
                    fcfg,
                    opts.keep_patches,
                )?;
                let mut kept = Vec::new();
                for (i, d) in decisions.into_iter().enumerate() {
                    records.push(DetectionRecord::new(
                        &d.detection,
                        Some(FilterRecord {
                            kept: d.kept,
                            argmax: d.similarity.argmax,
                            matched_class: d.similarity.matched_class,
                            probabilities: d.similarity.probabilities,
                        }),
                    ));
                    patches.extend(d.patches.into_iter().map(|p| (i, p)));
                    if d.kept {
                        kept.push(d.detection);
                    }
                }
                kept
            }
            None => {
                records.extend(det.detections.iter().map(|d| DetectionRecord::new(d, None)));
                det.detections.clone()
            }
        };

        let instances = segment_all(img, &kept, backends.segmenter.as_mut())?;
        let empty_masks = instances.iter().filter(|i| i.is_empty()).count();
        let label_mask =
            assemble_label_mask(&instances, img.height(), img.width(), ps.class_number())?;
        Ok(ImageOutcome {
            label_mask,
            record: ImageRecord {
                image: stem.to_string(),
                error: None,
                raw: det.raw_total(),
                raw_per_scale: det.raw_per_scale,
                post_nms,
                post_filter: kept.len(),
                empty_masks,
                detections: records,
            },
            final_detections: kept,
            patches,
        })
    };
    inner().map_err(|e| e.with_image(stem))
}

/// Readable images (`.png`, `.tif`, `.tiff`) sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    list_with_ext(dir, &["png", "tif", "tiff"])
}

fn list_with_ext(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn stem_of(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub debug_patches: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<ImageRecord>,
}

impl RunSummary {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Process every image in `images`, writing `<stem>.png` label maps, the
/// manifest and timings into `out`.
///
/// Configuration problems are returned as errors before anything is written;
/// per-image failures are recorded in the manifest and counted in the summary.
pub fn run(cfg: &RunConfig, images: &Path, out: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let ps = PromptSet::load(&cfg.prompts).map_err(|e| Error::Config(e.to_string()))?;
    let provider = provider_for(cfg).map_err(|e| Error::Config(e.to_string()))?;
    run_with_provider(cfg, &ps, provider.as_ref(), images, out, opts)
}

pub fn run_with_provider(
    cfg: &RunConfig,
    ps: &PromptSet,
    provider: &dyn BackendProvider,
    images: &Path,
    out: &Path,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let files = list_images(images)?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no PNG or TIFF images in {}",
            images.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if opts.debug_patches {
        let p = out.join(PATCH_DIR);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let pipeline = PipelineOptions {
        keep_patches: opts.debug_patches,
        ..PipelineOptions::full(cfg)
    };

    let mut records = Vec::with_capacity(files.len());
    let mut timing = String::new();
    for file in &files {
        let stem = stem_of(file);
        let start = Instant::now();
        let outcome = Image::load(file).and_then(|img| {
            let mut backends = provider.backends_for(&stem)?;
            process_image(&stem, &img, ps, &mut backends, &pipeline)
        });
        let record = match outcome {
            Ok(o) => {
                let written = o
                    .label_mask
                    .save_png(out.join(format!("{stem}.png")))
                    .and_then(|_| {
                        for (i, p) in &o.patches {
                            let name = format!("{stem}_d{i:03}_m{:.2}.png", p.magnification);
                            p.pixels.save_png(out.join(PATCH_DIR).join(name))?;
                        }
                        Ok(())
                    });
                match written {
                    Ok(()) => o.record,
                    Err(e) => ImageRecord::failed(&stem, &e),
                }
            }
            Err(e) => ImageRecord::failed(&stem, &e),
        };
        timing.push_str(
            &serde_json::json!({"image": stem, "elapsed_ms": start.elapsed().as_secs_f64() * 1e3})
                .to_string(),
        );
        timing.push('\n');
        records.push(record);
    }

    write_jsonl(&out.join(MANIFEST_FILE), &records)?;
    let tp = out.join(TIMING_FILE);
    fs::write(&tp, timing).map_err(|e| Error::io(&tp, e))?;
    Ok(RunSummary { records })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in rows {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ImageRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::parse(path, e)))
        .collect()
}

/// Accumulate every `<stem>.png` pair of `pred_dir` and `gt_dir`.
pub fn evaluate(pred_dir: &Path, gt_dir: &Path, class_number: ClassId) -> Result<EvalReport> {
    let gt = list_with_ext(gt_dir, &["png"])?;
    let pred = list_with_ext(pred_dir, &["png"])?;
    if gt.is_empty() {
        return Err(Error::Config(format!(
            "no ground-truth masks in {}",
            gt_dir.display()
        )));
    }
    let gt_stems: Vec<String> = gt.iter().map(|p| stem_of(p)).collect();
    let pred_stems: Vec<String> = pred.iter().map(|p| stem_of(p)).collect();
    let mut missing: Vec<String> = gt_stems
        .iter()
        .filter(|s| !pred_stems.contains(s))
        .map(|s| format!("{}", pred_dir.join(format!("{s}.png")).display()))
        .collect();
    missing.extend(
        pred_stems
            .iter()
            .filter(|s| !gt_stems.contains(s))
            .map(|s| format!("{}", gt_dir.join(format!("{s}.png")).display())),
    );
    if !missing.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "missing counterpart files: {}",
            missing.join(", ")
        )));
    }

    let mut cm = ConfusionMatrix::new(class_number);
    for (stem, gt_path) in gt_stems.iter().zip(&gt) {
        let pred_path = pred_dir.join(format!("{stem}.png"));
        let p = LabelMask::load_png(&pred_path, class_number)?;
        let g = LabelMask::load_png(gt_path, class_number)?;
        cm.accumulate(&p, &g).map_err(|e| match e {
            Error::Dimension(m) => Error::Dimension(format!("{stem}: {m}")),
            other => other,
        })?;
    }
    compute_report(&cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationStage {
    /// Single view, no suppression, no filter.
    DetectorSegmenter,
    /// Configured scales with NMS and oversized-box pruning.
    MultiScaleNms,
    /// Plus the visual-prompt filter at the first magnification only.
    SingleMagnificationFilter,
    /// Everything, all magnifications averaged.
    Full,
}

impl AblationStage {
    pub const ALL: [AblationStage; 4] = [
        AblationStage::DetectorSegmenter,
        AblationStage::MultiScaleNms,
        AblationStage::SingleMagnificationFilter,
        AblationStage::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationStage::DetectorSegmenter => "(a) detector + segmenter",
            AblationStage::MultiScaleNms => "(b) + multi-scale + NMS",
            AblationStage::SingleMagnificationFilter => "(c) + filter, one magnification",
            AblationStage::Full => "(d) full pipeline",
        }
    }

    pub fn options(self, cfg: &RunConfig) -> PipelineOptions {
        let passthrough = DetectionConfig {
            min_confidence: cfg.detection.min_confidence,
            ..DetectionConfig::passthrough()
        };
        let single = FilterConfig {
            magnifications: cfg.filter.magnifications[..1].to_vec(),
            ..cfg.filter.clone()
        };
        let (detection, filter) = match self {
            AblationStage::DetectorSegmenter => (passthrough, None),
            AblationStage::MultiScaleNms => (cfg.detection.clone(), None),
            AblationStage::SingleMagnificationFilter => (cfg.detection.clone(), Some(single)),
            AblationStage::Full => (cfg.detection.clone(), Some(cfg.filter.clone())),
        };
        PipelineOptions {
            detection,
            filter,
            keep_patches: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub stage: AblationStage,
    pub label: String,
    pub report: EvalReport,
    pub records: Vec<ImageRecord>,
}

/// Run the four ablation configurations in order and score each against `gt_dir`.
pub fn ablate(cfg: &RunConfig, images: &Path, gt_dir: &Path) -> Result<Vec<AblationRow>> {
    let ps = PromptSet::load(&cfg.prompts).map_err(|e| Error::Config(e.to_string()))?;
    let provider = provider_for(cfg).map_err(|e| Error::Config(e.to_string()))?;
    ablate_with_provider(cfg, &ps, provider.as_ref(), images, gt_dir)
}

pub fn ablate_with_provider(
    cfg: &RunConfig,
    ps: &PromptSet,
    provider: &dyn BackendProvider,
    images: &Path,
    gt_dir: &Path,
) -> Result<Vec<AblationRow>> {
    let files = list_images(images)?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no PNG or TIFF images in {}",
            images.display()
        )));
    }
    let mut loaded = Vec::with_capacity(files.len());
    for f in &files {
        let stem = stem_of(f);
        let gt_path = gt_dir.join(format!("{stem}.png"));
        if !gt_path.is_file() {
            return Err(Error::InvalidArgument(format!(
                "missing ground truth {}",
                gt_path.display()
            )));
        }
        let gt = LabelMask::load_png(&gt_path, ps.class_number())?;
        loaded.push((stem, Image::load(f)?, gt));
    }

    let mut rows = Vec::with_capacity(4);
    for stage in AblationStage::ALL {
        let opts = stage.options(cfg);
        let mut cm = ConfusionMatrix::new(ps.class_number());
        let mut records = Vec::with_capacity(loaded.len());
        for (stem, img, gt) in &loaded {
            let mut backends = provider.backends_for(stem)?;
            let o = process_image(stem, img, ps, &mut backends, &opts)?;
            cm.accumulate(&o.label_mask, gt)
                .map_err(|e| Error::Dimension(format!("{stem}: {e}")))?;
            records.push(o.record);
        }
        rows.push(AblationRow {
            stage,
            label: stage.label().to_string(),
            report: compute_report(&cm)?,
            records,
        });
    }
    Ok(rows)
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |v| format!("{:.2}", v * 100.0));
    let mut s = String::from(
        "# (c) scores patches at the first configured magnification only;\n\
         # (d) averages probabilities over every configured magnification.\n",
    );
    s.push_str(&format!(
        "{:<34} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "configuration", "MIoU", "PA", "PP", "PR", "Dice"
    ));
    for r in rows {
        let m = &r.report;
        s.push_str(&format!(
            "{:<34} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            r.label,
            pct(m.miou),
            pct(Some(m.pixel_accuracy)),
            pct(m.pixel_precision),
            pct(m.pixel_recall),
            pct(m.dice)
        ));
    }
    s
}

/// Files produced by [`write_mock_corpus`].
#[derive(Debug, Clone)]
pub struct MockCorpusLayout {
    pub config: PathBuf,
    pub prompts: PathBuf,
    pub scenes: PathBuf,
    pub images: PathBuf,
    pub ground_truth: PathBuf,
}

/// Write a self-contained mock corpus: rendered scenes, ground-truth masks,
/// scene file, prompt file and a run config.
///
/// `noisy` enables duplicate boxes, a missed-when-large detector, one large
/// object per scene and a planted whole-image box.
pub fn write_mock_corpus(
    dir: &Path,
    count: usize,
    seed: u64,
    noisy: bool,
) -> Result<MockCorpusLayout> {
    let layout = MockCorpusLayout {
        config: dir.join("config.toml"),
        prompts: dir.join("prompts.toml"),
        scenes: dir.join("scenes.toml"),
        images: dir.join("images"),
        ground_truth: dir.join("gt"),
    };
    for d in [&layout.images, &layout.ground_truth] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let ps = PromptSet::new(
        vec![
            ClassSpec {
                id: 1,
                name: "building".into(),
                synonyms: vec!["building".into(), "roof".into(), "house".into()],
            },
            ClassSpec {
                id: 2,
                name: "lake".into(),
                synonyms: vec!["lake".into(), "pond".into()],
            },
        ],
        ["ground", "car", "basketball court", "cropland"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    )?;
    fs::write(&layout.prompts, ps.to_toml_string()).map_err(|e| Error::io(&layout.prompts, e))?;

    let synth = SynthOptions {
        large_object_side: noisy.then_some((90, 110)),
        plant_full_image_box: noisy,
        ..SynthOptions::default()
    };
    let corpus = synthesize_corpus(count, seed, &synth)?;
    corpus.save(&layout.scenes)?;
    for scene in &corpus.scenes {
        scene
            .render()
            .save_png(layout.images.join(format!("{}.png", scene.stem)))?;
        scene
            .ground_truth(ps.class_number())?
            .save_png(layout.ground_truth.join(format!("{}.png", scene.stem)))?;
    }

    let noise = if noisy {
        MockNoise {
            duplicates: 3,
            jitter_px: 2.0,
            max_view_extent: Some(80.0),
        }
    } else {
        MockNoise::exact()
    };
    let cfg = RunConfig {
        prompts: PathBuf::from("prompts.toml"),
        seed,
        detection: DetectionConfig::default(),
        filter: FilterConfig::default(),
        backend: BackendConfig::Mock {
            scenes: PathBuf::from("scenes.toml"),
            noise,
            confusion: None,
        },
    };
    fs::write(&layout.config, cfg.to_toml_string()).map_err(|e| Error::io(&layout.config, e))?;
    Ok(layout)
}
