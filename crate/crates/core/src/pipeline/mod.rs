//! Config-driven experiment: simulate faults, render and store R-X images,
//! extract features, cross-validate the model suite and write reports.
//!
//! Output layout under the output directory:
//!
//! ```text
//! images/{overhead,cable}/{train,test}/<scenario>.pgm
//! features/{overhead,cable}_train.csv
//! models/{overhead,cable}_cv.json      cross-validation results
//! models/{overhead,cable}_best.json    best variant refit on the full grid
//! reports/{overhead,cable}.{txt,json}
//! ```

mod config;
mod csvio;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evalkit::{build_report, EvalReport, EvalRow};
use crate::netmodel::{NetworkModel, SectionKind};
use crate::regress::{cross_validate, fit, predict, CvReport, Dataset, FittedModel, Variant};
use crate::relaysim::{simulate_trajectory, FaultScenario};
use crate::rxplot::{quantize_levels, read_pgm, render_rx_image, write_pgm, GrayImage};
use crate::texture::extract_features;

pub use config::{
    ExperimentConfig, FaultConfig, FeatureSettings, Grid, ImageConfig, ModelConfig, NetworkConfig,
    RelayConfig, ScenarioConfig, SectionConfig, SectionExperiment, Window,
};
pub use csvio::{read_dataset_csv, write_dataset_csv, CSV_COLUMNS};

pub const SECTIONS: [SectionKind; 2] = [SectionKind::Overhead, SectionKind::Cable];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Fault locations within one line section.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub section: SectionKind,
    pub split: Split,
    pub section_index: usize,
    /// Distance from the relay to the start of the section.
    pub section_offset_km: f64,
    pub section_length_km: f64,
    /// Locations relative to the section start, strictly increasing.
    pub locations_km: Vec<f64>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.locations_km.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations_km.is_empty()
    }

    pub fn absolute_km(&self, i: usize) -> f64 {
        config::round_km(self.section_offset_km + self.locations_km[i])
    }

    /// Normalized training target.
    pub fn target(&self, i: usize) -> f64 {
        self.locations_km[i] / self.section_length_km
    }

    pub fn id(&self, i: usize) -> String {
        format!(
            "{}_{}_{:07.3}km",
            self.section.as_str(),
            self.split.as_str(),
            self.locations_km[i]
        )
    }

    pub fn image_path(&self, out: &Path, i: usize) -> PathBuf {
        image_dir(out, self.section, self.split).join(format!("{}.pgm", self.id(i)))
    }
}

fn image_dir(out: &Path, kind: SectionKind, split: Split) -> PathBuf {
    out.join("images").join(kind.as_str()).join(split.as_str())
}

pub fn features_path(out: &Path, kind: SectionKind) -> PathBuf {
    out.join("features")
        .join(format!("{}_train.csv", kind.as_str()))
}

pub fn cv_path(out: &Path, kind: SectionKind) -> PathBuf {
    out.join("models")
        .join(format!("{}_cv.json", kind.as_str()))
}

pub fn model_path(out: &Path, kind: SectionKind) -> PathBuf {
    out.join("models")
        .join(format!("{}_best.json", kind.as_str()))
}

pub fn report_paths(out: &Path, kind: SectionKind) -> (PathBuf, PathBuf) {
    let dir = out.join("reports");
    (
        dir.join(format!("{}.txt", kind.as_str())),
        dir.join(format!("{}.json", kind.as_str())),
    )
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Tags errors that do not already carry a stage.
fn in_stage<T>(stage: &'static str, scenario: impl Into<String>, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::stage(stage, scenario, e),
    })
}

fn scenario_set(cfg: &ExperimentConfig, kind: SectionKind, split: Split) -> Result<ScenarioSet> {
    let exp = cfg.experiment(kind);
    let net = cfg.network()?;
    let section = net.line.sections.get(exp.section_index).ok_or_else(|| {
        Error::Config(format!(
            "{kind} experiment points at missing section {}",
            exp.section_index
        ))
    })?;
    if section.kind != kind {
        return Err(Error::Config(format!(
            "{kind} experiment points at section {} which is {}",
            exp.section_index, section.kind
        )));
    }
    let locations_km = match split {
        Split::Train => exp.grid.points(),
        Split::Test => exp.test_km.iter().map(|&v| config::round_km(v)).collect(),
    };
    if locations_km.is_empty() {
        return Err(Error::Config(format!(
            "{kind} {} grid is empty",
            split.as_str()
        )));
    }
    for (i, &d) in locations_km.iter().enumerate() {
        if !(d > 0.0 && d <= section.length_km) {
            return Err(Error::Config(format!(
                "{kind} {} location {d} km lies outside the {} km section",
                split.as_str(),
                section.length_km
            )));
        }
        if i > 0 && !(d > locations_km[i - 1]) {
            return Err(Error::Config(format!(
                "{kind} {} locations must increase",
                split.as_str()
            )));
        }
    }
    Ok(ScenarioSet {
        section: kind,
        split,
        section_index: exp.section_index,
        section_offset_km: net.line.section_offset(exp.section_index),
        section_length_km: section.length_km,
        locations_km,
    })
}

/// Training grids for the (overhead, cable) experiments.
pub fn generate_scenarios(cfg: &ExperimentConfig) -> Result<(ScenarioSet, ScenarioSet)> {
    Ok((
        scenario_set(cfg, SectionKind::Overhead, Split::Train)?,
        scenario_set(cfg, SectionKind::Cable, Split::Train)?,
    ))
}

/// Test locations for the (overhead, cable) experiments.
pub fn test_scenarios(cfg: &ExperimentConfig) -> Result<(ScenarioSet, ScenarioSet)> {
    Ok((
        scenario_set(cfg, SectionKind::Overhead, Split::Test)?,
        scenario_set(cfg, SectionKind::Cable, Split::Test)?,
    ))
}

fn all_sets(cfg: &ExperimentConfig) -> Result<Vec<ScenarioSet>> {
    let (a, b) = generate_scenarios(cfg)?;
    let (c, d) = test_scenarios(cfg)?;
    Ok(vec![a, c, b, d])
}

/// Simulates one scenario and returns the quantized R-X image.
pub fn render_scenario(
    cfg: &ExperimentConfig,
    net: &NetworkModel,
    set: &ScenarioSet,
    i: usize,
) -> Result<GrayImage> {
    let sc = FaultScenario::ag(
        set.absolute_km(i),
        cfg.faults.resistance_ohm,
        cfg.faults.inception_angle_deg,
    );
    let traj = simulate_trajectory(net, &sc, &cfg.relay_settings())?;
    let z1 = net.line.total_z1();
    let img = render_rx_image(
        &traj,
        cfg.relay.zone_reach_fraction * z1.norm(),
        z1.arg(),
        &cfg.canvas(set.section)?,
    )?;
    quantize_levels(&img, cfg.image.levels)
}

/// Writes every training and test image. Returns the number written.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<usize> {
    let net = cfg.network()?;
    let mut written = 0;
    for set in all_sets(cfg)? {
        let images: Vec<(PathBuf, Vec<u8>)> = (0..set.len())
            .into_par_iter()
            .map(|i| {
                let tag = |e| Error::stage("simulate", set.id(i), e);
                let img = render_scenario(cfg, &net, &set, i).map_err(tag)?;
                Ok((set.image_path(out, i), write_pgm(&img).map_err(tag)?))
            })
            .collect::<Result<_>>()?;
        for (k, (path, bytes)) in images.into_iter().enumerate() {
            in_stage("simulate", set.id(k), write_file(&path, &bytes))?;
            written += 1;
        }
    }
    Ok(written)
}

/// Features of the stored images of one scenario set, in scenario order.
pub fn set_features(
    cfg: &ExperimentConfig,
    set: &ScenarioSet,
    out: &Path,
) -> Result<Vec<Vec<f64>>> {
    let fc = cfg.feature_config();
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let tag = |e| Error::stage("featurize", set.id(i), e);
            let bytes = read_file(&set.image_path(out, i)).map_err(tag)?;
            let img = read_pgm(&bytes).map_err(tag)?;
            Ok(extract_features(&img, &fc).map_err(tag)?.values.to_vec())
        })
        .collect()
}

/// Labelled dataset for a scenario set: features, normalized targets, ids.
pub fn featurize_set(cfg: &ExperimentConfig, set: &ScenarioSet, out: &Path) -> Result<Dataset> {
    let rows = set_features(cfg, set, out)?;
    let y = (0..set.len()).map(|i| set.target(i)).collect();
    let ids = (0..set.len()).map(|i| set.id(i)).collect();
    Dataset::new(rows, y, ids).map_err(|e| {
        Error::stage(
            "featurize",
            format!("{} {}", set.section, set.split.as_str()),
            e,
        )
    })
}

/// Builds and writes the two training CSVs from the stored images.
pub fn featurize(cfg: &ExperimentConfig, out: &Path) -> Result<(Dataset, Dataset)> {
    let (oh, cb) = generate_scenarios(cfg)?;
    let mut result = Vec::new();
    for set in [oh, cb] {
        let ds = featurize_set(cfg, &set, out)?;
        ds.check_normalized_targets()
            .map_err(|e| Error::stage("featurize", format!("{} training set", set.section), e))?;
        let label = format!("{} training set", set.section);
        let csv = in_stage("featurize", label.clone(), write_dataset_csv(&ds))?;
        in_stage(
            "featurize",
            label,
            write_file(&features_path(out, set.section), &csv),
        )?;
        result.push(ds);
    }
    let cb = result.pop().expect("two sections");
    let oh = result.pop().expect("two sections");
    Ok((oh, cb))
}

/// Lowest CV RMSE; ties and NaN handled as in the report.
pub fn best_variant(cv: &CvReport) -> Variant {
    let mut best = 0;
    for i in 1..cv.rmse.len() {
        if cv.rmse[i] < cv.rmse[best] || (cv.rmse[best].is_nan() && !cv.rmse[i].is_nan()) {
            best = i;
        }
    }
    cv.variants[best]
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub section: SectionKind,
    pub cv: CvReport,
    pub best: FittedModel,
}

pub fn train_section(
    cfg: &ExperimentConfig,
    kind: SectionKind,
    ds: &Dataset,
) -> Result<TrainOutcome> {
    let tag = |e| Error::stage("train", format!("{kind} section"), e);
    ds.check_normalized_targets().map_err(tag)?;
    let specs = cfg.specs()?;
    let cv = cross_validate(ds, &specs, cfg.cv_k, cfg.seed).map_err(tag)?;
    let v = best_variant(&cv);
    let spec = specs
        .iter()
        .find(|s| s.variant == v)
        .expect("best variant comes from specs");
    let best = fit(ds, spec, cfg.seed).map_err(tag)?;
    Ok(TrainOutcome {
        section: kind,
        cv,
        best,
    })
}

/// Cross-validates every configured model on the stored CSVs and dumps
/// the CV results and the refit best model.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<TrainOutcome>> {
    let mut outcomes = Vec::new();
    for kind in SECTIONS {
        let label = format!("{kind} section");
        let ds = in_stage(
            "train",
            label.clone(),
            read_file(&features_path(out, kind)).and_then(|b| read_dataset_csv(&b)),
        )?;
        let o = train_section(cfg, kind, &ds)?;
        in_stage(
            "train",
            label,
            (|| {
                let cv_json = serde_json::to_string_pretty(&o.cv)
                    .map_err(|e| Error::Format(e.to_string()))?;
                write_file(&cv_path(out, kind), cv_json.as_bytes())?;
                write_file(&model_path(out, kind), o.best.to_json()?.as_bytes())
            })(),
        )?;
        outcomes.push(o);
    }
    Ok(outcomes)
}

pub const PROTOCOL_NOTE: &str =
    "Test protocol: the best cross-validated model is refit on the full \
training grid and evaluated on freshly simulated test scenarios.";

pub fn evaluate_section(
    set: &ScenarioSet,
    test_x: &[Vec<f64>],
    cv: &CvReport,
    model: &FittedModel,
) -> Result<EvalReport> {
    let tag = |e| Error::stage("evaluate", format!("{} section", set.section), e);
    if model.spec.variant != best_variant(cv) {
        return Err(tag(Error::Report(format!(
            "stored model is {} but cross-validation selected {}",
            model.spec.variant,
            best_variant(cv)
        ))));
    }
    let mut rows = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let est = predict(model, &test_x[i]).map_err(|e| Error::stage("evaluate", set.id(i), e))?;
        rows.push(EvalRow::new(
            set.locations_km[i],
            est * set.section_length_km,
            set.section_length_km,
        )?);
    }
    build_report(cv, rows, set.section, set.section_length_km).map_err(tag)
}

/// Scores the stored best models on the stored test images and writes reports.
pub fn evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<(EvalReport, EvalReport)> {
    let (oh, cb) = test_scenarios(cfg)?;
    let mut reports = Vec::new();
    for set in [oh, cb] {
        let kind = set.section;
        let label = format!("{kind} section");
        let (cv, model) = in_stage(
            "evaluate",
            label.clone(),
            (|| {
                let cv: CvReport = serde_json::from_slice(&read_file(&cv_path(out, kind))?)
                    .map_err(|e| Error::Format(format!("cross-validation results: {e}")))?;
                let text =
                    String::from_utf8_lossy(&read_file(&model_path(out, kind))?).into_owned();
                Ok((cv, FittedModel::from_json(&text)?))
            })(),
        )?;
        let test_x = set_features(cfg, &set, out)?;
        let report = evaluate_section(&set, &test_x, &cv, &model)?;
        let (txt, json) = report_paths(out, kind);
        in_stage(
            "evaluate",
            label,
            (|| {
                write_file(
                    &txt,
                    format!("{}\n{PROTOCOL_NOTE}\n", report.to_text()).as_bytes(),
                )?;
                write_file(&json, report.to_json()?.as_bytes())
            })(),
        )?;
        reports.push(report);
    }
    let cb = reports.pop().expect("two sections");
    let oh = reports.pop().expect("two sections");
    Ok((oh, cb))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutputs {
    pub overhead: EvalReport,
    pub cable: EvalReport,
    pub images_written: usize,
}

/// All four stages in order.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutputs> {
    cfg.validate()?;
    let images_written = simulate(cfg, out)?;
    featurize(cfg, out)?;
    train(cfg, out)?;
    let (overhead, cable) = evaluate(cfg, out)?;
    Ok(ExperimentOutputs {
        overhead,
        cable,
        images_written,
    })
}
