//! Config-driven, resumable end-to-end run.
//!
//! Stages and the files they write inside `work_dir`:
//!
//! | stage    | outputs                                        |
//! |----------|------------------------------------------------|
//! | generate | `targets.csv`                                  |
//! | cluster  | `clustered.csv`                                |
//! | samples  | `samples.jsonl`, `samples_augmented.jsonl`     |
//! | extract  | `features.csv`, `features_augmented.csv`       |
//! | select   | `ranking.json`, `sweep.json`                   |
//! | evaluate | `report.json`, `report.txt`                    |
//! | train    | `model.json`                                   |
//!
//! `manifest.json` records the resolved config, the versions that shape
//! the outputs and, per stage, a hash of its parameters plus the SHA-256 of
//! every input and output. A stage whose parameters and inputs are
//! unchanged is skipped, after its recorded outputs are re-hashed; a
//! changed output aborts the run with [`Error::HashMismatch`].
//!
//! The top-level `seed` overrides the seed fields of the scene, forest and
//! resampling sections.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{ForestConfig, ForestFactory, RandomForest, MODEL_FORMAT_VERSION};
use crate::clustering::{dbscan, DbscanParams, NOISE};
use crate::data_model::{
    augment_drop, read_samples_jsonl, read_targets_csv, window_samples, write_samples_jsonl, write_targets_csv,
    AugmentationTag, Augmented, ClassLabel, ClusterSample, ClusterTrack, LabeledTarget, DROP_FRACTION,
};
use crate::dataset::{LabeledData, Matrix};
use crate::ensemble::{train_binarized, BinarizedModel, Coupled, CouplingMethod};
use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate, grouped_holdout, nested_cv, report, Configuration, EvaluationReport, NestedCvReport,
};
use crate::features::{
    feature_table, read_feature_csv, write_feature_csv, FeatureParams, FeatureSubset, FeatureTable, REGISTRY_VERSION,
};
use crate::imbalance::ResampleSpec;
use crate::selection::{backward_eliminate, subset_sweep, FeatureRanking, SweepParams, SweepResult};
use crate::synthgen::SceneConfig;

/// Feature columns used for training: `"all"`, `"selected"` (the result
/// of the select stage) or an explicit list of registry names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureChoice {
    Named(String),
    List(Vec<String>),
}

impl Default for FeatureChoice {
    fn default() -> Self {
        FeatureChoice::Named("all".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub folds: usize,
    /// Run nested cross-validation over `evaluate` instead of a plain one.
    pub nested: bool,
    pub inner_folds: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            folds: 10,
            nested: false,
            inner_folds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    /// Keep the `top` best-ranked features instead of sweeping subset sizes.
    pub top: Option<usize>,
    pub sweep: SweepParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory for every stage output; relative paths resolve against
    /// the config file's directory.
    pub work_dir: PathBuf,
    /// Existing target CSV to use instead of generating a scene.
    pub targets: Option<PathBuf>,
    pub seed: u64,
    pub scene: SceneConfig,
    pub dbscan: DbscanParams,
    /// Add drop-augmented and uncorrected samples to the training data.
    pub augment: bool,
    pub feature_params: FeatureParams,
    pub features: FeatureChoice,
    pub method: CouplingMethod,
    pub resample: ResampleSpec,
    pub two_stage_thr: Option<f64>,
    pub forest: ForestConfig,
    pub cv: CvSettings,
    /// Configurations compared by the evaluate stage. Empty means the
    /// single configuration given by `method`, `resample` and
    /// `two_stage_thr`.
    pub evaluate: Vec<Configuration>,
    /// Name of the configuration the text report compares against.
    pub baseline: Option<String>,
    pub selection: Option<SelectionSettings>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            work_dir: PathBuf::from("work"),
            targets: None,
            seed: 0,
            scene: SceneConfig::default(),
            dbscan: DbscanParams::default(),
            augment: true,
            feature_params: FeatureParams::default(),
            features: FeatureChoice::default(),
            method: CouplingMethod::Multiclass,
            resample: ResampleSpec::default(),
            two_stage_thr: None,
            forest: ForestConfig::default(),
            cv: CvSettings::default(),
            evaluate: Vec::new(),
            baseline: None,
            selection: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`, resolves
    /// relative paths against the file's directory and applies the
    /// top-level seed.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.work_dir = base.join(&cfg.work_dir);
        cfg.targets = cfg.targets.map(|t| base.join(t));
        let seed = cfg.seed;
        let cfg = cfg.with_seed(seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copies the top-level seed into every seeded section.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.scene.seed = seed;
        self.forest.seed = seed;
        self.resample.seed = seed;
        for c in &mut self.evaluate {
            c.resample.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.scene.validate().map_err(wrap)?;
        self.dbscan.validate().map_err(wrap)?;
        self.resample.validate().map_err(wrap)?;
        for c in &self.evaluate {
            c.resample.validate().map_err(wrap)?;
        }
        if self.forest.n_trees == 0 {
            return Err(Error::Config("forest.n_trees must be >= 1".into()));
        }
        if self.cv.folds < 2 || (self.cv.nested && self.cv.inner_folds < 2) {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if self.cv.nested && self.evaluate.is_empty() {
            return Err(Error::Config("nested cross-validation needs an `evaluate` grid".into()));
        }
        let thresholds = self
            .two_stage_thr
            .iter()
            .chain(self.evaluate.iter().filter_map(|c| c.two_stage_thr.as_ref()));
        for t in thresholds {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::Config(format!("two_stage_thr {t} outside [0, 1]")));
            }
        }
        match &self.features {
            FeatureChoice::Named(n) if n == "all" => {}
            FeatureChoice::Named(n) if n == "selected" => {
                if self.selection.is_none() {
                    return Err(Error::Config("features = \"selected\" needs a [selection] section".into()));
                }
            }
            FeatureChoice::Named(n) => {
                return Err(Error::Config(format!("features must be \"all\", \"selected\" or a list, got {n:?}")))
            }
            FeatureChoice::List(names) => {
                FeatureSubset::new(names.clone()).map_err(wrap)?;
            }
        }
        Ok(())
    }

    fn main_configuration(&self) -> Configuration {
        Configuration {
            method: self.method,
            resample: self.resample.clone(),
            two_stage_thr: self.two_stage_thr,
        }
    }

    fn configurations(&self) -> Vec<Configuration> {
        if self.evaluate.is_empty() {
            vec![self.main_configuration()]
        } else {
            self.evaluate.clone()
        }
    }

    fn factory(&self) -> ForestFactory {
        ForestFactory::new(self.forest.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generate,
    Cluster,
    Samples,
    Extract,
    Select,
    Evaluate,
    Train,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Generate,
        Stage::Cluster,
        Stage::Samples,
        Stage::Extract,
        Stage::Select,
        Stage::Evaluate,
        Stage::Train,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Cluster => "cluster",
            Stage::Samples => "samples",
            Stage::Extract => "extract",
            Stage::Select => "select",
            Stage::Evaluate => "evaluate",
            Stage::Train => "train",
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Generate => &[TARGETS],
            Stage::Cluster => &[CLUSTERED],
            Stage::Samples => &[SAMPLES, SAMPLES_AUGMENTED],
            Stage::Extract => &[FEATURES, FEATURES_AUGMENTED],
            Stage::Select => &[RANKING, SWEEP],
            Stage::Evaluate => &[REPORT_JSON, REPORT_TEXT],
            Stage::Train => &[MODEL],
        }
    }
}

pub const TARGETS: &str = "targets.csv";
pub const CLUSTERED: &str = "clustered.csv";
pub const SAMPLES: &str = "samples.jsonl";
pub const SAMPLES_AUGMENTED: &str = "samples_augmented.jsonl";
pub const FEATURES: &str = "features.csv";
pub const FEATURES_AUGMENTED: &str = "features_augmented.csv";
pub const RANKING: &str = "ranking.json";
pub const SWEEP: &str = "sweep.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const MODEL: &str = "model.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub params_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub registry_version: String,
    pub model_format_version: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    fn new(cfg: &ExperimentConfig) -> Self {
        Manifest {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            registry_version: REGISTRY_VERSION.to_string(),
            model_format_version: MODEL_FORMAT_VERSION,
            seed: cfg.seed,
            config: cfg.clone(),
            stages: BTreeMap::new(),
        }
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn sha256_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub stages: Vec<(Stage, StageStatus)>,
}

/// Assigns DBSCAN cluster ids to `targets` in place.
pub fn cluster_targets(targets: &mut [LabeledTarget], params: &DbscanParams) -> Result<()> {
    let points: Vec<_> = targets.iter().map(|t| t.target).collect();
    let ids = dbscan(&points, params)?;
    for (t, id) in targets.iter_mut().zip(ids) {
        t.cluster_id = Some(id);
    }
    Ok(())
}

/// Cluster samples for evaluation plus the training-only augmentations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSets {
    pub original: Vec<ClusterSample>,
    pub augmented: Vec<ClusterSample>,
}

/// Builds cluster samples from clustered targets.
///
/// Each cluster takes the label of the object contributing most of its
/// targets (the smaller object id on ties). The evaluated samples keep
/// only that object's targets. With `augment`, the training-only set gets
/// a copy of every sample with 40 % of its targets dropped and, for
/// clusters that swallowed targets of other objects, the uncleaned
/// windows. Noise and unclustered targets are discarded.
pub fn build_samples(targets: &[LabeledTarget], augment: bool, seed: u64) -> SampleSets {
    let mut clusters: BTreeMap<i64, Vec<&LabeledTarget>> = BTreeMap::new();
    for t in targets {
        if let Some(id) = t.cluster_id.filter(|&c| c != NOISE) {
            clusters.entry(id).or_default().push(t);
        }
    }
    let mut out = SampleSets::default();
    for (id, members) in clusters {
        let mut votes: BTreeMap<i64, (usize, ClassLabel)> = BTreeMap::new();
        for m in &members {
            votes.entry(m.object_id).or_insert((0, m.label)).0 += 1;
        }
        let (&object_id, &(_, label)) = votes
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.0.cmp(a.0)))
            .expect("cluster has members");
        let track = |keep: &dyn Fn(&LabeledTarget) -> bool| ClusterTrack {
            cluster_id: id,
            object_id,
            label,
            targets: members.iter().filter(|m| keep(m)).map(|m| m.target).collect(),
        };
        out.original.extend(window_samples(&track(&|m| m.object_id == object_id)));
        if augment && votes.len() > 1 {
            out.augmented.extend(window_samples(&track(&|_| true)).into_iter().map(|s| ClusterSample {
                augmentation_tag: AugmentationTag::Uncorrected,
                ..s
            }));
        }
    }
    if augment {
        for (i, s) in out.original.iter().enumerate() {
            if let Augmented::Dropped(d) = augment_drop(s, DROP_FRACTION, seed.wrapping_add(i as u64)) {
                out.augmented.push(d);
            }
        }
    }
    out
}

/// Column positions of `names` in `table`.
fn columns_of(table: &FeatureTable, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            table
                .column(n)
                .ok_or_else(|| Error::data("feature table", format!("missing column {n:?}")))
        })
        .collect()
}

fn check_registry(table: &FeatureTable, context: &str) -> Result<()> {
    if table.registry_version != REGISTRY_VERSION {
        return Err(Error::VersionMismatch(format!(
            "{context} uses feature registry {:?}, this build uses {REGISTRY_VERSION:?}",
            table.registry_version
        )));
    }
    Ok(())
}

/// A trained coupler with the feature columns it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub registry_version: String,
    pub feature_names: Vec<String>,
    pub model: BinarizedModel<RandomForest>,
}

impl SavedModel {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = BufReader::new(open(path)?);
        let m: SavedModel = serde_json::from_reader(f)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch(format!(
                "model format {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}

/// Decision and coupler scores for one feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub cluster_id: i64,
    pub object_id: i64,
    pub window_start: f64,
    pub coupled: Coupled,
}

/// Scores every row of `table` in input order.
pub fn predict(model: &SavedModel, table: &FeatureTable) -> Result<Vec<Prediction>> {
    if table.registry_version != model.registry_version {
        return Err(Error::VersionMismatch(format!(
            "feature file registry {:?} differs from model registry {:?}",
            table.registry_version, model.registry_version
        )));
    }
    let cols = columns_of(table, &model.feature_names)?;
    let mut x = Matrix::with_cols(cols.len());
    for row in &table.rows {
        let picked: Vec<f64> = cols.iter().map(|&c| row.values[c]).collect();
        x.push_row(&picked)?;
    }
    let coupled = model.model.decide(&x)?;
    Ok(table
        .rows
        .iter()
        .zip(coupled)
        .map(|(r, c)| Prediction {
            cluster_id: r.cluster_id,
            object_id: r.object_id,
            window_start: r.window_start,
            coupled: c,
        })
        .collect())
}

pub fn write_predictions_csv<W: std::io::Write>(out: W, n_classes: usize, rows: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let class_name = |c: usize| match ClassLabel::from_code(c) {
        Some(l) if n_classes == ClassLabel::COUNT => l.name().to_string(),
        _ => format!("class{c}"),
    };
    let mut header = vec![
        "cluster_id".to_string(),
        "object_id".into(),
        "window_start".into(),
        "label".into(),
    ];
    header.extend((0..n_classes).map(|c| format!("score_{}", class_name(c))));
    w.write_record(&header)?;
    for p in rows {
        let mut rec = vec![
            p.cluster_id.to_string(),
            p.object_id.to_string(),
            p.window_start.to_string(),
            class_name(p.coupled.decision),
        ];
        rec.extend(p.coupled.scores.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    read_feature_csv(BufReader::new(open(path)?))
}

fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    write_feature_csv(std::io::BufWriter::new(std::fs::File::create(path)?), table)
}

fn read_samples(path: &Path) -> Result<Vec<ClusterSample>> {
    read_samples_jsonl(BufReader::new(open(path)?))
}

fn write_samples(path: &Path, samples: &[ClusterSample]) -> Result<()> {
    write_samples_jsonl(std::io::BufWriter::new(std::fs::File::create(path)?), samples)
}

fn read_targets(path: &Path) -> Result<Vec<LabeledTarget>> {
    read_targets_csv(BufReader::new(open(path)?))
}

fn write_targets(path: &Path, rows: &[LabeledTarget]) -> Result<()> {
    write_targets_csv(std::io::BufWriter::new(std::fs::File::create(path)?), rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

/// Stages needed to produce `targets`, in execution order.
pub fn plan(cfg: &ExperimentConfig, targets: &[Stage]) -> Vec<Stage> {
    let uses_selection = matches!(&cfg.features, FeatureChoice::Named(n) if n == "selected");
    let mut needed: BTreeSet<Stage> = BTreeSet::new();
    for &t in targets {
        needed.insert(t);
        let upstream: &[Stage] = match t {
            Stage::Generate => &[],
            Stage::Cluster => &[Stage::Generate],
            Stage::Samples => &[Stage::Generate, Stage::Cluster],
            Stage::Extract | Stage::Select => &[Stage::Generate, Stage::Cluster, Stage::Samples],
            Stage::Evaluate | Stage::Train => &[Stage::Generate, Stage::Cluster, Stage::Samples, Stage::Extract],
        };
        needed.extend(upstream);
        if t == Stage::Select {
            needed.insert(Stage::Extract);
        }
        if matches!(t, Stage::Evaluate | Stage::Train) && uses_selection {
            needed.insert(Stage::Select);
        }
    }
    if cfg.targets.is_some() {
        needed.remove(&Stage::Generate);
    }
    needed.into_iter().collect()
}

/// Runs the stages needed for `targets`, skipping those whose recorded
/// parameters, inputs and outputs are unchanged.
pub fn run(cfg: &ExperimentConfig, targets: &[Stage]) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.work_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let manifest_path = dir.join(MANIFEST);
    let previous: Option<Manifest> = if manifest_path.exists() {
        match read_json::<Manifest>(&manifest_path) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("ignoring unreadable manifest: {e}");
                None
            }
        }
    } else {
        None
    };
    let mut manifest = Manifest::new(cfg);
    if let Some(prev) = &previous {
        manifest.stages = prev.stages.clone();
    }

    let mut summary = RunSummary { stages: Vec::new() };
    for stage in plan(cfg, targets) {
        let inputs = stage_inputs(cfg, stage);
        let params = sha256_json(&stage_params(cfg, stage))?;
        let mut input_hashes = BTreeMap::new();
        for p in &inputs {
            input_hashes.insert(p.display().to_string(), sha256_file(p)?);
        }
        let outputs: Vec<PathBuf> = stage.outputs().iter().map(|o| dir.join(o)).collect();

        let up_to_date = match manifest.stages.get(stage.name()) {
            Some(rec) if rec.params_hash == params && rec.inputs == input_hashes => {
                verify_outputs(&dir, rec)?;
                rec.outputs.len() == outputs.len()
            }
            _ => false,
        };
        if up_to_date {
            log::info!("{}: up to date, skipped", stage.name());
            summary.stages.push((stage, StageStatus::Skipped));
            continue;
        }

        log::info!("{}: running", stage.name());
        run_stage(cfg, stage)?;
        let mut output_hashes = BTreeMap::new();
        for (name, p) in stage.outputs().iter().zip(&outputs) {
            output_hashes.insert(name.to_string(), sha256_file(p)?);
        }
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                params_hash: params,
                inputs: input_hashes,
                outputs: output_hashes,
            },
        );
        write_json(&manifest_path, &manifest)?;
        summary.stages.push((stage, StageStatus::Ran));
    }
    write_json(&manifest_path, &manifest)?;
    Ok(summary)
}

fn verify_outputs(dir: &Path, rec: &StageRecord) -> Result<()> {
    for (name, expected) in &rec.outputs {
        let path = dir.join(name);
        let actual = match sha256_file(&path) {
            Ok(h) => h,
            Err(Error::MissingInput(_)) => "<missing>".to_string(),
            Err(e) => return Err(e),
        };
        if &actual != expected {
            return Err(Error::HashMismatch {
                path,
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(())
}

fn targets_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.targets.clone().unwrap_or_else(|| cfg.work_dir.join(TARGETS))
}

fn stage_inputs(cfg: &ExperimentConfig, stage: Stage) -> Vec<PathBuf> {
    let d = &cfg.work_dir;
    let features = vec![d.join(FEATURES), d.join(FEATURES_AUGMENTED)];
    match stage {
        Stage::Generate => vec![],
        Stage::Cluster => vec![targets_path(cfg)],
        Stage::Samples => vec![d.join(CLUSTERED)],
        Stage::Extract => vec![d.join(SAMPLES), d.join(SAMPLES_AUGMENTED)],
        Stage::Select => features,
        Stage::Evaluate | Stage::Train => {
            let mut v = features;
            if matches!(&cfg.features, FeatureChoice::Named(n) if n == "selected") {
                v.extend([d.join(RANKING), d.join(SWEEP)]);
            }
            v
        }
    }
}

/// Everything a stage's outputs depend on besides its input files.
fn stage_params(cfg: &ExperimentConfig, stage: Stage) -> serde_json::Value {
    let versions = serde_json::json!({
        "crate": env!("CARGO_PKG_VERSION"),
        "registry": REGISTRY_VERSION,
        "model_format": MODEL_FORMAT_VERSION,
    });
    let specific = match stage {
        Stage::Generate => serde_json::json!({ "scene": cfg.scene }),
        Stage::Cluster => serde_json::json!({ "dbscan": cfg.dbscan }),
        Stage::Samples => serde_json::json!({ "augment": cfg.augment, "seed": cfg.seed }),
        Stage::Extract => serde_json::json!({ "feature_params": cfg.feature_params }),
        Stage::Select => serde_json::json!({
            "selection": cfg.selection.clone().unwrap_or_default(),
            "config": cfg.main_configuration(),
            "forest": cfg.forest,
            "seed": cfg.seed,
        }),
        Stage::Evaluate => serde_json::json!({
            "configurations": cfg.configurations(),
            "features": cfg.features,
            "forest": cfg.forest,
            "cv": cfg.cv,
            "baseline": cfg.baseline,
            "seed": cfg.seed,
        }),
        Stage::Train => serde_json::json!({
            "config": cfg.main_configuration(),
            "features": cfg.features,
            "forest": cfg.forest,
        }),
    };
    serde_json::json!({ "stage": stage.name(), "versions": versions, "params": specific })
}

/// Original and augmented rows with the configured feature columns.
pub fn load_training_data(cfg: &ExperimentConfig) -> Result<LabeledData> {
    let d = &cfg.work_dir;
    let original = read_features(&d.join(FEATURES))?;
    let augmented = read_features(&d.join(FEATURES_AUGMENTED))?;
    check_registry(&original, FEATURES)?;
    let data = LabeledData::from_tables(&original, Some(&augmented))?;
    let names: Vec<String> = match &cfg.features {
        FeatureChoice::Named(n) if n == "selected" => read_json::<SweepResult>(&d.join(SWEEP))?.best,
        FeatureChoice::Named(_) => return Ok(data),
        FeatureChoice::List(list) => list.clone(),
    };
    let cols = columns_of(&original, &names)?;
    Ok(data.subset_cols(&cols))
}

fn run_stage(cfg: &ExperimentConfig, stage: Stage) -> Result<()> {
    let d = &cfg.work_dir;
    match stage {
        Stage::Generate => {
            let rows = crate::synthgen::generate(&cfg.scene)?;
            write_targets(&d.join(TARGETS), &rows)?;
        }
        Stage::Cluster => {
            let mut rows = read_targets(&targets_path(cfg))?;
            cluster_targets(&mut rows, &cfg.dbscan)?;
            write_targets(&d.join(CLUSTERED), &rows)?;
        }
        Stage::Samples => {
            let rows = read_targets(&d.join(CLUSTERED))?;
            if rows.iter().any(|r| r.cluster_id.is_none()) {
                return Err(Error::data(CLUSTERED, "every target needs a cluster id"));
            }
            let sets = build_samples(&rows, cfg.augment, cfg.seed);
            if sets.original.is_empty() {
                return Err(Error::Empty("clustering produced no samples".into()));
            }
            write_samples(&d.join(SAMPLES), &sets.original)?;
            write_samples(&d.join(SAMPLES_AUGMENTED), &sets.augmented)?;
        }
        Stage::Extract => {
            for (src, dst) in [(SAMPLES, FEATURES), (SAMPLES_AUGMENTED, FEATURES_AUGMENTED)] {
                let samples = read_samples(&d.join(src))?;
                write_features(&d.join(dst), &feature_table(&samples, &cfg.feature_params)?)?;
            }
        }
        Stage::Select => {
            let settings = cfg.selection.clone().unwrap_or_default();
            let original = read_features(&d.join(FEATURES))?;
            let augmented = read_features(&d.join(FEATURES_AUGMENTED))?;
            check_registry(&original, FEATURES)?;
            let data = LabeledData::from_tables(&original, Some(&augmented))?;
            let factory = cfg.factory();
            let split = grouped_holdout(&data, cfg.seed)?;
            let ranking = backward_eliminate(&data, &factory, &split)?;
            let sweep = match settings.top {
                Some(m) => fixed_size(&ranking, m)?,
                None => {
                    let params = SweepParams {
                        seed: cfg.seed,
                        ..settings.sweep
                    };
                    subset_sweep(&ranking, &data, &cfg.main_configuration(), &factory, &params)?
                }
            };
            write_json(&d.join(RANKING), &ranking)?;
            write_json(&d.join(SWEEP), &sweep)?;
        }
        Stage::Evaluate => {
            let data = load_training_data(cfg)?;
            let factory = cfg.factory();
            let configs = cfg.configurations();
            let (json, reports) = if cfg.cv.nested {
                let r: NestedCvReport = nested_cv(&data, &configs, &factory, cfg.cv.folds, cfg.cv.inner_folds, cfg.seed)?;
                (serde_json::to_string_pretty(&r)?, r.per_config)
            } else {
                let r: Vec<EvaluationReport> = cross_validate(&data, &configs, &factory, cfg.cv.folds, cfg.seed)?;
                (report::render_json(&r)?, r)
            };
            std::fs::write(d.join(REPORT_JSON), json + "\n")?;
            std::fs::write(d.join(REPORT_TEXT), report::render_text(&reports, cfg.baseline.as_deref())?)?;
        }
        Stage::Train => {
            let data = load_training_data(cfg)?;
            let model = train_binarized(
                &data.x,
                &data.y,
                data.n_classes,
                cfg.method,
                cfg.two_stage_thr,
                &cfg.factory(),
                &cfg.resample,
            )?;
            SavedModel {
                format_version: MODEL_FORMAT_VERSION,
                registry_version: REGISTRY_VERSION.to_string(),
                feature_names: data.feature_names.clone(),
                model,
            }
            .save_json(&d.join(MODEL))?;
        }
    }
    Ok(())
}

/// A sweep result that simply keeps the top `m` ranked features.
fn fixed_size(ranking: &FeatureRanking, m: usize) -> Result<SweepResult> {
    if m == 0 || m > ranking.names.len() {
        return Err(Error::Config(format!(
            "selection.top must be in 1..={}",
            ranking.names.len()
        )));
    }
    Ok(SweepResult {
        scores: BTreeMap::new(),
        best_size: m,
        best_score: ranking.scores[m - 1],
        best: ranking.top(m).to_vec(),
    })
}
