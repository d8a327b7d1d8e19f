//! Experiment configs, presets and CSV results.
//!
//! A config is a JSON document. Fields left out are filled from the preset of
//! the chosen experiment, so a file holding only `{"experiment": "spectrum"}`
//! is complete. Angles are in degrees.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{CorrelationModel, SphereSampling};
use crate::constellation::{Constellation, PowerMode};
use crate::detection::{DetectorModel, ScoringPath};
use crate::geometry::{logspace, ArrayGeometry, SphericalPoint, Trajectory, WAVELENGTH_30GHZ};
use crate::simulation::{
    estimate_ser, wilson_halfwidth, Detector, DetectorKind, DrawState, ErrorCounts, Scenario, UeSpec,
};
use crate::subspace::{chordal_distance, dominant_eigs};
use crate::{Error, Result};

pub const CSV_COLUMNS: [&str; 11] = [
    "experiment",
    "sweep_name",
    "sweep_value",
    "model",
    "detector",
    "metric",
    "value",
    "ci95",
    "seed",
    "draws",
    "trials",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Nonzero eigenvalues of the near- and far-field covariances.
    Spectrum,
    /// Normalized chordal distance between the two models along a trajectory.
    Chordal,
    /// SER of the exact and mismatched detectors along a trajectory.
    SerDistance,
    /// SER of single-user detection among several users versus array size.
    SerMultiuser,
    /// Any scenario, detector set and sweep.
    Custom,
}

impl ExperimentKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Chordal => "chordal",
            ExperimentKind::SerDistance => "ser_distance",
            ExperimentKind::SerMultiuser => "ser_multiuser",
            ExperimentKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub n_h: usize,
    pub n_v: usize,
    pub spacing: f64,
    pub wavelength: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            n_h: 16,
            n_v: 16,
            spacing: WAVELENGTH_30GHZ,
            wavelength: WAVELENGTH_30GHZ,
        }
    }
}

impl ArraySpec {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.n_h, self.n_v, self.spacing, self.wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub r: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl PointSpec {
    pub const fn new(r: f64, theta_deg: f64, phi_deg: f64) -> Self {
        Self { r, theta_deg, phi_deg }
    }

    pub fn point(&self) -> Result<SphericalPoint> {
        SphericalPoint::from_degrees(self.r, self.theta_deg, self.phi_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub r: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatterers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
}

impl UeConfig {
    pub fn at(p: PointSpec) -> Self {
        Self {
            r: p.r,
            theta_deg: p.theta_deg,
            phi_deg: p.phi_deg,
            cluster_radius: None,
            scatterers: None,
            gains: None,
        }
    }

    fn position(&self) -> PointSpec {
        PointSpec::new(self.r, self.theta_deg, self.phi_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstellationSpec {
    /// Equally spaced unipolar PAM.
    Pam { order: usize },
    /// Zero plus levels with geometrically growing energies.
    GeometricEnergy { order: usize, ratio: f64 },
    /// Explicit levels, rescaled to unit energy.
    Levels { levels: Vec<f64> },
}

impl Default for ConstellationSpec {
    fn default() -> Self {
        ConstellationSpec::GeometricEnergy { order: 4, ratio: 6.0 }
    }
}

impl ConstellationSpec {
    pub fn build(&self) -> Result<Constellation> {
        match self {
            ConstellationSpec::Pam { order } => Constellation::unipolar_pam(*order),
            ConstellationSpec::GeometricEnergy { order, ratio } => {
                Constellation::geometric_energy(*order, *ratio)
            }
            ConstellationSpec::Levels { levels } => Constellation::from_levels(levels.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    pub mode: PowerMode,
    pub target_db: f64,
}

impl Default for PowerSpec {
    fn default() -> Self {
        Self {
            mode: PowerMode::EqualSnr,
            target_db: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub scatterer: u64,
    pub symbol: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            scatterer: 1,
            symbol: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub draws: usize,
    pub trials_per_draw: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// UE distance in meters along the trajectory.
    Distance { values: Vec<f64> },
    /// Element count of a square array.
    Elements { values: Vec<usize> },
    /// Power-control target in dB.
    SnrDb { values: Vec<f64> },
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Distance { .. } => "distance",
            Sweep::Elements { .. } => "elements",
            Sweep::SnrDb { .. } => "snr_db",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::Distance { values } | Sweep::SnrDb { values } => values.clone(),
            Sweep::Elements { values } => values.iter().map(|&n| n as f64).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let values = self.values();
        if values.is_empty() {
            return Err(Error::ConfigValidation(format!("{} sweep is empty", self.name())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ConfigValidation(format!(
                "{} sweep has non-finite values",
                self.name()
            )));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ConfigValidation(format!(
                "{} sweep must be strictly increasing",
                self.name()
            )));
        }
        match self {
            Sweep::Distance { values } if values[0] <= 0.0 => Err(Error::ConfigValidation(
                "distance sweep values must be > 0".into(),
            )),
            Sweep::Elements { values } => match values.iter().find(|&&n| square_side(n).is_none()) {
                Some(n) => Err(Error::ConfigValidation(format!(
                    "element count {n} is not a positive perfect square"
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

fn square_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (n > 0 && side * side == n).then_some(side)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub start: PointSpec,
    pub end: PointSpec,
}

impl TrajectorySpec {
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::new(self.start.point()?, self.end.point()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorSpec {
    MultiuserMl,
    SingleUserExact,
    SingleUserMismatchedFf,
    /// Exact single-user detection with the other users switched off.
    SingleUserIsolated,
}

impl DetectorSpec {
    /// `(model, detector)` tags of the result rows.
    pub fn tags(&self) -> (&'static str, &'static str) {
        match self {
            DetectorSpec::MultiuserMl => ("nf", "multiuser_ml"),
            DetectorSpec::SingleUserExact => ("nf", "single_user"),
            DetectorSpec::SingleUserMismatchedFf => ("ff", "single_user"),
            DetectorSpec::SingleUserIsolated => ("nf", "single_user_isolated"),
        }
    }

    fn kind(&self) -> DetectorKind {
        match self {
            DetectorSpec::MultiuserMl => DetectorKind::MultiuserMl,
            DetectorSpec::SingleUserExact | DetectorSpec::SingleUserIsolated => {
                DetectorKind::SingleUser(DetectorModel::Exact)
            }
            DetectorSpec::SingleUserMismatchedFf => DetectorKind::SingleUser(DetectorModel::MismatchedFf),
        }
    }
}

pub const FIG2_UES: [PointSpec; 3] = [
    PointSpec::new(5.0, -30.0, -10.0),
    PointSpec::new(5.0, -20.0, 0.0),
    PointSpec::new(25.0, -10.0, 10.0),
];

pub const FIG5_UES: [PointSpec; 5] = [
    PointSpec::new(5.0, -30.0, -20.0),
    PointSpec::new(10.0, -25.0, -10.0),
    PointSpec::new(15.0, -20.0, 0.0),
    PointSpec::new(20.0, -15.0, 10.0),
    PointSpec::new(25.0, -10.0, 20.0),
];

pub const FIG5_ELEMENTS: [usize; 8] = [144, 400, 784, 1024, 1296, 1936, 2704, 3600];

pub const PRESET_TRAJECTORY: TrajectorySpec = TrajectorySpec {
    start: PointSpec::new(1.0, -30.0, -10.0),
    end: PointSpec::new(200.0, -0.15, -10.0),
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub array: ArraySpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ues: Vec<UeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_radius: Option<f64>,
    #[serde(default = "default_scatterers")]
    pub scatterers: usize,
    #[serde(default)]
    pub sampling: SphereSampling,
    #[serde(default)]
    pub constellation: ConstellationSpec,
    #[serde(default)]
    pub power: PowerSpec,
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub scoring: ScoringPath,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detectors: Vec<DetectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub apertures: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

fn default_scatterers() -> usize {
    10
}

fn default_noise_power() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// Unresolved config for `experiment`; [`ExperimentConfig::resolve`]
    /// fills in the preset.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            array: ArraySpec::default(),
            ues: Vec::new(),
            cluster_radius: None,
            scatterers: default_scatterers(),
            sampling: SphereSampling::default(),
            constellation: ConstellationSpec::default(),
            power: PowerSpec::default(),
            noise_power: default_noise_power(),
            seeds: Seeds::default(),
            budget: None,
            scoring: ScoringPath::default(),
            detectors: Vec::new(),
            sweep: None,
            trajectory: None,
            apertures: Vec::new(),
            output_path: None,
        }
    }

    /// Fills every field left empty with the experiment's preset, then
    /// validates.
    pub fn resolve(mut self) -> Result<Self> {
        use ExperimentKind::*;
        let kind = self.experiment;
        if self.cluster_radius.is_none() {
            self.cluster_radius = Some(if kind == SerMultiuser { 1.0 } else { 3.0 });
        }
        if matches!(kind, Chordal | SerDistance) && self.trajectory.is_none() {
            self.trajectory = Some(PRESET_TRAJECTORY);
        }
        if self.ues.is_empty() {
            self.ues = match kind {
                Spectrum => FIG2_UES.iter().map(|&p| UeConfig::at(p)).collect(),
                SerMultiuser => FIG5_UES.iter().map(|&p| UeConfig::at(p)).collect(),
                Chordal | SerDistance => {
                    vec![UeConfig::at(self.trajectory.unwrap_or(PRESET_TRAJECTORY).start)]
                }
                Custom => Vec::new(),
            };
        }
        let radius = self.cluster_radius;
        let count = self.scatterers;
        for ue in &mut self.ues {
            ue.cluster_radius = ue.cluster_radius.or(radius);
            ue.scatterers = ue.scatterers.or(Some(count));
        }
        if self.sweep.is_none() {
            self.sweep = match kind {
                Chordal => Some(Sweep::Distance {
                    values: logspace(1.0, 200.0, 10),
                }),
                SerDistance => Some(Sweep::Distance {
                    values: logspace(1.0, 200.0, 20),
                }),
                SerMultiuser => Some(Sweep::Elements {
                    values: FIG5_ELEMENTS.to_vec(),
                }),
                Spectrum | Custom => None,
            };
        }
        if kind == Chordal && self.apertures.is_empty() {
            self.apertures = vec![16, 24, 32];
        }
        if self.detectors.is_empty() {
            self.detectors = match kind {
                SerDistance => vec![DetectorSpec::SingleUserExact, DetectorSpec::SingleUserMismatchedFf],
                SerMultiuser => vec![
                    DetectorSpec::SingleUserExact,
                    DetectorSpec::SingleUserMismatchedFf,
                    DetectorSpec::SingleUserIsolated,
                ],
                Custom => vec![DetectorSpec::MultiuserMl],
                Spectrum | Chordal => Vec::new(),
            };
        }
        if self.budget.is_none() {
            self.budget = Some(match kind {
                Spectrum => Budget {
                    draws: 1,
                    trials_per_draw: 1,
                },
                Chordal => Budget {
                    draws: 20,
                    trials_per_draw: 1,
                },
                SerDistance | SerMultiuser | Custom => Budget {
                    draws: 20,
                    trials_per_draw: 50_000,
                },
            });
        }
        self.validate()?;
        Ok(self)
    }

    pub fn budget(&self) -> Budget {
        self.budget.unwrap_or(Budget {
            draws: 1,
            trials_per_draw: 1,
        })
    }

    /// Checks a resolved config.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let bad = |msg: String| Err(Error::ConfigValidation(msg));
        self.array.geometry()?;
        let budget = self.budget();
        if budget.draws == 0 || budget.trials_per_draw == 0 {
            return bad("budget draws and trials_per_draw must be >= 1".into());
        }
        if self.ues.is_empty() {
            return bad("at least one UE is required".into());
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        let sweep_name = self.sweep.as_ref().map(Sweep::name);
        match self.experiment {
            Spectrum => {}
            Chordal => {
                if sweep_name != Some("distance") {
                    return bad("chordal experiment needs a distance sweep".into());
                }
                if self.apertures.is_empty() || self.apertures.contains(&0) {
                    return bad("apertures must be nonempty array sides >= 1".into());
                }
                if self.apertures.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("apertures must be strictly increasing".into());
                }
            }
            SerDistance => {
                if sweep_name != Some("distance") {
                    return bad("ser_distance experiment needs a distance sweep".into());
                }
                if self.ues.len() != 1 {
                    return bad(format!("ser_distance takes one UE, got {}", self.ues.len()));
                }
            }
            SerMultiuser => {
                if sweep_name != Some("elements") {
                    return bad("ser_multiuser experiment needs an elements sweep".into());
                }
            }
            Custom => {}
        }
        if matches!(self.experiment, SerDistance | SerMultiuser | Custom) && self.detectors.is_empty() {
            return bad("at least one detector is required".into());
        }
        if sweep_name == Some("distance") {
            let t = self
                .trajectory
                .ok_or_else(|| Error::ConfigValidation("a distance sweep needs a trajectory".into()))?
                .trajectory()?;
            if let Some(Sweep::Distance { values }) = &self.sweep {
                for &d in values {
                    t.at_distance(d).map_err(|e| Error::ConfigValidation(e.to_string()))?;
                }
            }
        }
        // every sweep point must give a valid scenario
        for point in self.points() {
            self.scenario_at(point)?.validate()?;
        }
        Ok(())
    }

    fn points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values().into_iter().map(Some).collect(),
            None => vec![None],
        }
    }

    /// The scenario at one sweep point (the first UE follows the trajectory
    /// in distance sweeps).
    pub fn scenario_at(&self, point: Option<f64>) -> Result<Scenario> {
        let mut geometry = self.array.geometry()?;
        let mut ues = self
            .ues
            .iter()
            .map(|u| {
                let mut spec = UeSpec::new(
                    u.position().point()?,
                    u.cluster_radius.or(self.cluster_radius).unwrap_or(3.0),
                    u.scatterers.unwrap_or(self.scatterers),
                );
                spec.gains = u.gains.clone();
                Ok(spec)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut target_db = self.power.target_db;
        match (&self.sweep, point) {
            (Some(Sweep::Distance { .. }), Some(d)) => {
                let t = self
                    .trajectory
                    .ok_or_else(|| Error::ConfigValidation("a distance sweep needs a trajectory".into()))?
                    .trajectory()?;
                ues[0].position = t.at_distance(d)?;
            }
            (Some(Sweep::Elements { .. }), Some(n)) => {
                let side = square_side(n as usize).ok_or_else(|| {
                    Error::ConfigValidation(format!("{n} elements do not form a square array"))
                })?;
                geometry = ArrayGeometry::new(side, side, self.array.spacing, self.array.wavelength)?;
            }
            (Some(Sweep::SnrDb { .. }), Some(db)) => target_db = db,
            _ => {}
        }
        let budget = self.budget();
        let mut s = Scenario::new(geometry, ues, self.constellation.build()?);
        s.power_mode = self.power.mode;
        s.target_db = target_db;
        s.noise_power = self.noise_power;
        s.sampling = self.sampling;
        s.scatterer_seed = self.seeds.scatterer;
        s.symbol_seed = self.seeds.symbol;
        s.draws = budget.draws;
        s.trials_per_draw = budget.trials_per_draw;
        s.scoring = self.scoring;
        Ok(s)
    }

    /// Applies command-line overrides and revalidates.
    pub fn with_overrides(mut self, seed: Option<u64>, trials: Option<usize>) -> Result<Self> {
        if let Some(seed) = seed {
            self.seeds = Seeds {
                scatterer: seed,
                symbol: seed,
            };
        }
        if let Some(trials) = trials {
            let mut b = self.budget();
            b.trials_per_draw = trials;
            self.budget = Some(b);
        }
        self.validate()?;
        Ok(self)
    }
}

/// Parses and resolves a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.resolve()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn config_to_string(config: &ExperimentConfig) -> Result<String> {
    serde_json::to_string_pretty(config).map_err(|e| Error::ConfigValidation(e.to_string()))
}

pub fn write_config(config: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let mut text = config_to_string(config)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub model: String,
    pub detector: String,
    pub metric: String,
    pub value: f64,
    pub ci95: f64,
    pub seed: u64,
    pub draws: u64,
    pub trials: u64,
}

impl ResultRow {
    pub fn validate(&self) -> Result<()> {
        if !self.value.is_finite() || !self.sweep_value.is_finite() {
            return Err(Error::MalformedRow(format!("non-finite value in {self:?}")));
        }
        if !(self.ci95.is_finite() && self.ci95 >= 0.0) {
            return Err(Error::MalformedRow(format!("ci95 must be >= 0 in {self:?}")));
        }
        Ok(())
    }
}

struct RowContext<'a> {
    experiment: &'a str,
    sweep_name: &'a str,
    sweep_value: f64,
}

impl RowContext<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        model: &str,
        detector: &str,
        metric: String,
        value: f64,
        ci95: f64,
        seed: u64,
        draws: u64,
        trials: u64,
    ) -> ResultRow {
        ResultRow {
            experiment: self.experiment.into(),
            sweep_name: self.sweep_name.into(),
            sweep_value: self.sweep_value,
            model: model.into(),
            detector: detector.into(),
            metric,
            value,
            ci95,
            seed,
            draws,
            trials,
        }
    }
}

/// Runs the experiment and returns its rows in a fixed order.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<Vec<ResultRow>> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Spectrum => run_spectrum(config),
        ExperimentKind::Chordal => run_chordal(config),
        ExperimentKind::SerDistance | ExperimentKind::SerMultiuser | ExperimentKind::Custom => {
            run_ser(config, workers)
        }
    }
}

fn sweep_label(config: &ExperimentConfig) -> &'static str {
    config.sweep.as_ref().map_or("none", Sweep::name)
}

fn run_spectrum(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let scenario = config.scenario_at(None)?;
    let tag = config.experiment.tag();
    for d in 0..scenario.draws {
        for k in 0..scenario.users() {
            let draw = DrawState::prepare(&scenario.isolate(k)?, d)?;
            for model in [CorrelationModel::NearField, CorrelationModel::FarField] {
                let cov = &draw.covariances(model)[0];
                let basis = dominant_eigs(cov, scenario.ues[k].scatterers)?;
                for (i, &lambda) in basis.eigenvalues().iter().enumerate() {
                    let ctx = RowContext {
                        experiment: tag,
                        sweep_name: "eigen_index",
                        sweep_value: (i + 1) as f64,
                    };
                    rows.push(ctx.row(
                        model.tag(),
                        "none",
                        format!("eigenvalue_ue{}", k + 1),
                        lambda,
                        0.0,
                        draw.seed,
                        1,
                        0,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

/// Normalized chordal distance between the near- and far-field dominant
/// subspaces of draw `d`, one value per draw.
pub fn chordal_draws(scenario: &Scenario) -> Result<Vec<f64>> {
    let l = scenario.ues[0].scatterers;
    (0..scenario.draws)
        .map(|d| {
            let draw = DrawState::prepare(&scenario.isolate(0)?, d)?;
            let nf = dominant_eigs(&draw.near_field[0], l)?;
            let ff = dominant_eigs(&draw.far_field[0], l)?;
            Ok(chordal_distance(&nf, &ff)? / (l as f64).sqrt())
        })
        .collect()
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.959_963_984_540_054 * (var / n).sqrt())
}

fn run_chordal(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let tag = config.experiment.tag();
    for &side in &config.apertures {
        let mut sized = config.clone();
        sized.array.n_h = side;
        sized.array.n_v = side;
        for point in config.points() {
            let scenario = sized.scenario_at(point)?;
            let values = chordal_draws(&scenario)?;
            let ctx = RowContext {
                experiment: tag,
                sweep_name: sweep_label(config),
                sweep_value: point.unwrap_or(0.0),
            };
            let metric = format!("chordal_n{}", side * side);
            let (mean, ci) = mean_ci(&values);
            rows.push(ctx.row(
                "nf_vs_ff",
                "none",
                metric.clone(),
                mean,
                ci,
                scenario.scatterer_seed,
                values.len() as u64,
                0,
            ));
            for (d, v) in values.iter().enumerate() {
                rows.push(ctx.row("nf_vs_ff", "none", metric.clone(), *v, 0.0, scenario.draw_seed(d), 1, 0));
            }
        }
    }
    Ok(rows)
}

/// Error counts of one detector, pooled and per draw.
struct DetectorCounts {
    spec: DetectorSpec,
    joint: bool,
    pooled: ErrorCounts,
    per_draw: Vec<(u64, ErrorCounts)>,
}

fn ser_rows(ctx: &RowContext<'_>, counts: &DetectorCounts, base_seed: u64, draws: u64) -> Vec<ResultRow> {
    let (model, detector) = counts.spec.tags();
    let emit = |c: &ErrorCounts, seed: u64, draws: u64, out: &mut Vec<ResultRow>| {
        let users = c.per_user.len();
        let metric_row = |metric: String, errors: u64, trials: u64| {
            ctx.row(
                model,
                detector,
                metric,
                errors as f64 / trials as f64,
                wilson_halfwidth(errors, trials),
                seed,
                draws,
                c.trials,
            )
        };
        if users == 1 {
            out.push(metric_row("ser".into(), c.per_user[0], c.trials));
            return;
        }
        if counts.joint {
            out.push(metric_row("ser_joint".into(), c.joint, c.trials));
        }
        for (k, &e) in c.per_user.iter().enumerate() {
            out.push(metric_row(format!("ser_ue{}", k + 1), e, c.trials));
        }
        let total: u64 = c.per_user.iter().sum();
        out.push(metric_row("ser_mean".into(), total, c.trials * users as u64));
    };
    let mut rows = Vec::new();
    emit(&counts.pooled, base_seed, draws, &mut rows);
    for (seed, c) in &counts.per_draw {
        emit(c, *seed, 1, &mut rows);
    }
    rows
}

fn run_ser(config: &ExperimentConfig, workers: usize) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let tag = config.experiment.tag();
    for point in config.points() {
        let scenario = config.scenario_at(point)?;
        let users = scenario.users();
        let joint_specs: Vec<DetectorSpec> = config
            .detectors
            .iter()
            .copied()
            .filter(|d| *d != DetectorSpec::SingleUserIsolated)
            .collect();
        let kinds: Vec<DetectorKind> = joint_specs.iter().map(DetectorSpec::kind).collect();
        let dets: Vec<&dyn Detector> = kinds.iter().map(|k| k as &dyn Detector).collect();
        let estimates = if dets.is_empty() {
            Vec::new()
        } else {
            estimate_ser(&scenario, &dets, workers)?
        };
        let mut all: Vec<DetectorCounts> = joint_specs
            .iter()
            .zip(estimates)
            .map(|(&spec, est)| DetectorCounts {
                spec,
                joint: true,
                pooled: est.counts,
                per_draw: est.per_draw.into_iter().map(|d| (d.seed, d.counts)).collect(),
            })
            .collect();
        if config.detectors.contains(&DetectorSpec::SingleUserIsolated) {
            let mut pooled = ErrorCounts::new(users);
            let mut per_draw: Vec<(u64, ErrorCounts)> = (0..scenario.draws)
                .map(|d| (scenario.draw_seed(d), ErrorCounts::new(users)))
                .collect();
            for k in 0..users {
                let alone = scenario.isolate(k)?;
                let est = estimate_ser(&alone, &[&DetectorKind::SingleUser(DetectorModel::Exact)], workers)?;
                let est = &est[0];
                pooled.trials = est.counts.trials;
                pooled.per_user[k] = est.counts.per_user[0];
                for ((_, c), d) in per_draw.iter_mut().zip(&est.per_draw) {
                    c.trials = d.counts.trials;
                    c.per_user[k] = d.counts.per_user[0];
                }
            }
            all.push(DetectorCounts {
                spec: DetectorSpec::SingleUserIsolated,
                joint: false,
                pooled,
                per_draw,
            });
        }
        // rows follow the configured detector order
        let ctx = RowContext {
            experiment: tag,
            sweep_name: sweep_label(config),
            sweep_value: point.unwrap_or(0.0),
        };
        for spec in &config.detectors {
            if let Some(c) = all.iter().find(|c| c.spec == *spec) {
                rows.extend(ser_rows(&ctx, c, scenario.scatterer_seed, scenario.draws as u64));
            }
        }
    }
    Ok(rows)
}

/// Writes the provenance header and the rows as LF-terminated CSV.
pub fn write_results<W: Write>(config: &ExperimentConfig, rows: &[ResultRow], mut out: W) -> Result<()> {
    let json = serde_json::to_string(config).map_err(|e| Error::ConfigValidation(e.to_string()))?;
    writeln!(out, "# ncmimo {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# config: {json}")?;
    writeln!(
        out,
        "# seeds: scatterer={} symbol={}",
        config.seeds.scatterer, config.seeds.symbol
    )?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        row.validate()?;
        w.serialize(row).map_err(csv_error)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a results file written by [`write_results`].
pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = r.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::MalformedRow(format!("unexpected header {headers:?}")));
    }
    r.deserialize()
        .map(|row| {
            let row: ResultRow = row.map_err(csv_error)?;
            row.validate()?;
            Ok(row)
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::MalformedRow(format!("{other:?}")),
    }
}

/// Runs `config` and writes the CSV to `path`.
pub fn run_to_file(config: &ExperimentConfig, workers: usize, path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let rows = run_experiment(config, workers)?;
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_results(config, &rows, file)?;
    Ok(rows)
}
