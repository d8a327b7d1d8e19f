//! Seeded Monte Carlo estimation of joint and per-user symbol error rates.
//!
//! A run is a grid of `draws x trials_per_draw` work items. Draw `d` fixes the
//! scattering clusters (and so the covariances, power factors and hypothesis
//! banks) from seed `scatterer_seed + d`; trial `t` of that draw takes its
//! symbols, channels and noise from a stream keyed by the same draw seed and
//! `t`. Counters are integers merged associatively, so estimates do not depend
//! on the number of workers or on scheduling.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{
    build_covariance, check_clearance, draw_cluster, ChannelSampler, CorrelationModel, CovarianceMatrix,
    ScatteringCluster, SphereSampling,
};
use crate::constellation::{check_sinr_feasible, db_to_linear, power_control, Constellation, PowerMode};
use crate::detection::{DetectorModel, HypothesisBank, ScoringPath};
use crate::geometry::{ArrayGeometry, SphericalPoint};
use crate::rng::{complex_normal, keyed_rng, Domain};
use crate::{Error, Result, C64};

/// Largest joint hypothesis count `M^K` a scenario may ask for.
pub const MAX_HYPOTHESES: usize = 1 << 16;

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct UeSpec {
    pub position: SphericalPoint,
    pub cluster_radius: f64,
    pub scatterers: usize,
    /// Path gains; equal gains `1/L` when absent.
    pub gains: Option<Vec<f64>>,
    /// Random stream of this UE's cluster; the UE index when absent.
    pub cluster_stream: Option<u64>,
}

impl UeSpec {
    pub fn new(position: SphericalPoint, cluster_radius: f64, scatterers: usize) -> Self {
        Self {
            position,
            cluster_radius,
            scatterers,
            gains: None,
            cluster_stream: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub ues: Vec<UeSpec>,
    pub constellation: Constellation,
    pub power_mode: PowerMode,
    pub target_db: f64,
    /// Noise power per antenna, sigma^2.
    pub noise_power: f64,
    pub sampling: SphereSampling,
    pub scatterer_seed: u64,
    pub symbol_seed: u64,
    pub draws: usize,
    pub trials_per_draw: usize,
    pub scoring: ScoringPath,
}

impl Scenario {
    /// Scenario with unit noise power, 20 dB equal-SINR power control and a
    /// budget of 20 draws x 5e4 trials.
    pub fn new(geometry: ArrayGeometry, ues: Vec<UeSpec>, constellation: Constellation) -> Self {
        Self {
            geometry,
            ues,
            constellation,
            power_mode: PowerMode::EqualSinr,
            target_db: 20.0,
            noise_power: 1.0,
            sampling: SphereSampling::Surface,
            scatterer_seed: 1,
            symbol_seed: 2,
            draws: 20,
            trials_per_draw: 50_000,
            scoring: ScoringPath::LowRank,
        }
    }

    pub fn users(&self) -> usize {
        self.ues.len()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidScenario(msg));
        if self.ues.is_empty() {
            return invalid("at least one UE is required".into());
        }
        if self.draws == 0 || self.trials_per_draw == 0 {
            return invalid(format!(
                "draw and trial counts must be >= 1, got {} x {}",
                self.draws, self.trials_per_draw
            ));
        }
        if !self.target_db.is_finite() {
            return invalid(format!("target must be finite, got {} dB", self.target_db));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return invalid(format!("noise power must be > 0, got {}", self.noise_power));
        }
        for (k, ue) in self.ues.iter().enumerate() {
            if ue.scatterers == 0 {
                return invalid(format!("UE {k} has no scatterers"));
            }
            if !(ue.cluster_radius.is_finite() && ue.cluster_radius >= 0.0) {
                return invalid(format!("UE {k} has cluster radius {}", ue.cluster_radius));
            }
            check_clearance(&ue.position, ue.cluster_radius, self.sampling)?;
            if let Some(g) = &ue.gains {
                if g.len() != ue.scatterers {
                    return invalid(format!(
                        "UE {k} has {} gains for {} scatterers",
                        g.len(),
                        ue.scatterers
                    ));
                }
                if g.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                    return invalid(format!("UE {k} gains must be finite and > 0"));
                }
            }
        }
        let hypotheses = (self.constellation.order() as f64).powi(self.users() as i32);
        if hypotheses > MAX_HYPOTHESES as f64 {
            return invalid(format!(
                "{} users with {} levels give {hypotheses} joint hypotheses (limit {MAX_HYPOTHESES})",
                self.users(),
                self.constellation.order()
            ));
        }
        if self.power_mode == PowerMode::EqualSinr {
            check_sinr_feasible(db_to_linear(self.target_db), self.users())?;
        }
        Ok(())
    }

    /// Seed of scatterer draw `d`.
    pub fn draw_seed(&self, d: usize) -> u64 {
        self.scatterer_seed.wrapping_add(d as u64)
    }

    fn cluster_stream(&self, k: usize) -> u64 {
        self.ues[k].cluster_stream.unwrap_or(k as u64)
    }

    /// UE `k` alone with the same clusters and SNR target. Power factors
    /// match the full scenario when it uses equal-SNR control.
    pub fn isolate(&self, k: usize) -> Result<Scenario> {
        if k >= self.users() {
            return Err(Error::IndexOutOfRange {
                index: k,
                count: self.users(),
            });
        }
        let mut ue = self.ues[k].clone();
        ue.cluster_stream = Some(self.cluster_stream(k));
        Ok(Scenario {
            ues: vec![ue],
            power_mode: PowerMode::EqualSnr,
            ..self.clone()
        })
    }
}

/// Everything fixed by one scatterer draw.
#[derive(Debug, Clone)]
pub struct DrawState {
    pub index: usize,
    pub seed: u64,
    pub clusters: Vec<ScatteringCluster>,
    pub near_field: Vec<CovarianceMatrix>,
    pub far_field: Vec<CovarianceMatrix>,
    pub powers: Vec<f64>,
    pub sigma2: f64,
    samplers: Vec<ChannelSampler>,
}

impl DrawState {
    pub fn prepare(scenario: &Scenario, index: usize) -> Result<Self> {
        let seed = scenario.draw_seed(index);
        let geom = &scenario.geometry;
        let mut clusters = Vec::with_capacity(scenario.users());
        for (k, ue) in scenario.ues.iter().enumerate() {
            let mut rng = keyed_rng(seed, Domain::Scatterers, 0, scenario.cluster_stream(k));
            let mut cluster =
                draw_cluster(ue.position, ue.cluster_radius, ue.scatterers, scenario.sampling, &mut rng)?;
            if let Some(g) = &ue.gains {
                cluster = cluster.with_gains(g.clone())?;
            }
            clusters.push(cluster);
        }
        let near_field = clusters
            .iter()
            .map(|c| build_covariance(c, geom, CorrelationModel::NearField))
            .collect::<Result<Vec<_>>>()?;
        let far_field = clusters
            .iter()
            .map(|c| build_covariance(c, geom, CorrelationModel::FarField))
            .collect::<Result<Vec<_>>>()?;
        let traces: Vec<f64> = near_field.iter().map(CovarianceMatrix::trace).collect();
        let sigma2 = scenario.noise_power;
        let noise_trace = geom.num_elements() as f64 * sigma2;
        let powers = power_control(
            &traces,
            noise_trace,
            db_to_linear(scenario.target_db),
            scenario.power_mode,
        )?
        .powers;
        let samplers = near_field
            .iter()
            .map(ChannelSampler::from_covariance)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            index,
            seed,
            clusters,
            near_field,
            far_field,
            powers,
            sigma2,
            samplers,
        })
    }

    pub fn covariances(&self, model: CorrelationModel) -> &[CovarianceMatrix] {
        match model {
            CorrelationModel::NearField => &self.near_field,
            CorrelationModel::FarField => &self.far_field,
        }
    }
}

/// What a detector sees in one trial. `transmitted` is there for test stubs
/// and genie baselines; real detectors ignore it.
#[derive(Debug, Clone, Copy)]
pub struct TrialInput<'a> {
    pub y: &'a DVector<C64>,
    pub transmitted: &'a [usize],
    pub draw_seed: u64,
    pub trial_index: usize,
}

/// A detector specialised to one scatterer draw.
pub trait PreparedDetector: Send + Sync {
    /// Decided constellation index for every user.
    fn detect(&self, input: &TrialInput<'_>) -> Result<Vec<usize>>;
}

pub trait Detector: Sync {
    fn label(&self) -> String;
    fn prepare(&self, scenario: &Scenario, draw: &DrawState) -> Result<Box<dyn PreparedDetector>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    /// Joint ML over `X^K` with the exact covariances.
    MultiuserMl,
    /// Per-user detection that ignores the other users.
    SingleUser(DetectorModel),
}

impl Detector for DetectorKind {
    fn label(&self) -> String {
        match self {
            DetectorKind::MultiuserMl => "multiuser_ml".into(),
            DetectorKind::SingleUser(DetectorModel::Exact) => "single_user_exact".into(),
            DetectorKind::SingleUser(DetectorModel::MismatchedFf) => "single_user_mismatched_ff".into(),
        }
    }

    fn prepare(&self, scenario: &Scenario, draw: &DrawState) -> Result<Box<dyn PreparedDetector>> {
        let banks = match self {
            DetectorKind::MultiuserMl => vec![HypothesisBank::multiuser(
                &draw.near_field,
                &draw.powers,
                draw.sigma2,
                &scenario.constellation,
                scenario.scoring,
            )?],
            DetectorKind::SingleUser(model) => draw
                .covariances(model.correlation())
                .iter()
                .zip(&draw.powers)
                .map(|(cov, &p)| {
                    HypothesisBank::single_user(cov, p, draw.sigma2, &scenario.constellation, scenario.scoring)
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Box::new(BankDetector { banks }))
    }
}

/// Concatenates the decisions of its banks.
struct BankDetector {
    banks: Vec<HypothesisBank>,
}

impl PreparedDetector for BankDetector {
    fn detect(&self, input: &TrialInput<'_>) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(input.transmitted.len());
        for bank in &self.banks {
            out.extend(bank.detect(input.y, false)?.symbols);
        }
        Ok(out)
    }
}

/// Transmitted and detected symbol indices of one trial, one detection per
/// prepared detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub transmitted: Vec<usize>,
    pub detected: Vec<Vec<usize>>,
}

/// Draws the symbols, channels and noise of trial `trial_index` of `draw`,
/// forms `y` and runs every prepared detector on it.
pub fn run_trial(
    scenario: &Scenario,
    draw: &DrawState,
    detectors: &[Box<dyn PreparedDetector>],
    trial_index: usize,
) -> Result<TrialRecord> {
    let mut rng = keyed_rng(scenario.symbol_seed, Domain::Trial, draw.seed, trial_index as u64);
    let levels = scenario.constellation.levels();
    let transmitted: Vec<usize> = (0..scenario.users())
        .map(|_| rng.random_range(0..levels.len()))
        .collect();
    let mut y = DVector::<C64>::zeros(scenario.geometry.num_elements());
    // every channel is drawn, even for silent users, to keep streams aligned
    for ((sampler, &p), &x) in draw.samplers.iter().zip(&draw.powers).zip(&transmitted) {
        sampler.accumulate(&mut rng, C64::from(p.sqrt() * levels[x]), &mut y);
    }
    let sigma = draw.sigma2.sqrt();
    for v in y.iter_mut() {
        *v += complex_normal(&mut rng) * sigma;
    }
    let input = TrialInput {
        y: &y,
        transmitted: &transmitted,
        draw_seed: draw.seed,
        trial_index,
    };
    let detected = detectors
        .iter()
        .map(|d| {
            let x = d.detect(&input)?;
            if x.len() != transmitted.len() {
                return Err(Error::DimensionMismatch(format!(
                    "detector returned {} symbols for {} users",
                    x.len(),
                    transmitted.len()
                )));
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRecord {
        transmitted,
        detected,
    })
}

/// Error counters of one detector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ErrorCounts {
    pub trials: u64,
    pub joint: u64,
    pub per_user: Vec<u64>,
}

impl ErrorCounts {
    pub fn new(users: usize) -> Self {
        Self {
            trials: 0,
            joint: 0,
            per_user: vec![0; users],
        }
    }

    pub fn record(&mut self, transmitted: &[usize], detected: &[usize]) {
        self.trials += 1;
        let mut any = false;
        for ((e, t), d) in self.per_user.iter_mut().zip(transmitted).zip(detected) {
            if t != d {
                *e += 1;
                any = true;
            }
        }
        self.joint += u64::from(any);
    }

    pub fn merge(mut self, other: &ErrorCounts) -> Self {
        self.trials += other.trials;
        self.joint += other.joint;
        for (a, b) in self.per_user.iter_mut().zip(&other.per_user) {
            *a += b;
        }
        self
    }

    pub fn joint_ser(&self) -> f64 {
        rate(self.joint, self.trials)
    }

    pub fn per_user_ser(&self) -> Vec<f64> {
        self.per_user.iter().map(|&e| rate(e, self.trials)).collect()
    }
}

fn rate(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        0.0
    } else {
        errors as f64 / trials as f64
    }
}

/// Half-width of the 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_halfwidth(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.5;
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Estimate from one scatterer draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawEstimate {
    pub draw: usize,
    pub seed: u64,
    pub counts: ErrorCounts,
    pub joint_ser: f64,
    pub per_user_ser: Vec<f64>,
    pub wilson_95_halfwidth: f64,
}

impl DrawEstimate {
    fn new(draw: usize, seed: u64, counts: ErrorCounts) -> Self {
        Self {
            draw,
            seed,
            joint_ser: counts.joint_ser(),
            per_user_ser: counts.per_user_ser(),
            wilson_95_halfwidth: wilson_halfwidth(counts.joint, counts.trials),
            counts,
        }
    }
}

/// Pooled estimate over all draws, plus the per-draw breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct SerEstimate {
    pub detector: String,
    pub counts: ErrorCounts,
    pub joint_ser: f64,
    pub per_user_ser: Vec<f64>,
    pub trials: u64,
    pub wilson_95_halfwidth: f64,
    pub per_user_halfwidth: Vec<f64>,
    pub per_draw: Vec<DrawEstimate>,
}

impl SerEstimate {
    fn pool(detector: String, users: usize, per_draw: Vec<DrawEstimate>) -> Self {
        let counts = per_draw
            .iter()
            .fold(ErrorCounts::new(users), |acc, d| acc.merge(&d.counts));
        Self {
            detector,
            joint_ser: counts.joint_ser(),
            per_user_ser: counts.per_user_ser(),
            trials: counts.trials,
            wilson_95_halfwidth: wilson_halfwidth(counts.joint, counts.trials),
            per_user_halfwidth: counts
                .per_user
                .iter()
                .map(|&e| wilson_halfwidth(e, counts.trials))
                .collect(),
            per_draw,
            counts,
        }
    }

    /// Mean of the per-user error rates.
    pub fn mean_user_ser(&self) -> f64 {
        self.per_user_ser.iter().sum::<f64>() / self.per_user_ser.len().max(1) as f64
    }
}

/// Runs every draw and trial of `scenario` on `workers` threads and returns
/// one estimate per detector, in the order given.
pub fn estimate_ser(
    scenario: &Scenario,
    detectors: &[&dyn Detector],
    workers: usize,
) -> Result<Vec<SerEstimate>> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidScenario(format!("cannot start {workers} workers: {e}")))?;
    let users = scenario.users();
    let mut per_draw: Vec<Vec<DrawEstimate>> = vec![Vec::with_capacity(scenario.draws); detectors.len()];
    pool.install(|| -> Result<()> {
        for d in 0..scenario.draws {
            let draw = DrawState::prepare(scenario, d)?;
            let prepared = detectors
                .iter()
                .map(|det| det.prepare(scenario, &draw))
                .collect::<Result<Vec<_>>>()?;
            let empty = || vec![ErrorCounts::new(users); detectors.len()];
            let counts = (0..scenario.trials_per_draw)
                .into_par_iter()
                .try_fold(empty, |mut acc, t| {
                    let rec = run_trial(scenario, &draw, &prepared, t)?;
                    for (c, x) in acc.iter_mut().zip(&rec.detected) {
                        c.record(&rec.transmitted, x);
                    }
                    Ok::<_, Error>(acc)
                })
                .try_reduce(empty, |a, b| {
                    Ok(a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect())
                })?;
            for (slot, c) in per_draw.iter_mut().zip(counts) {
                slot.push(DrawEstimate::new(d, draw.seed, c));
            }
        }
        Ok(())
    })?;
    Ok(detectors
        .iter()
        .zip(per_draw)
        .map(|(det, draws)| SerEstimate::pool(det.label(), users, draws))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::make_unipolar_pam;

    fn small_scenario(order: usize, target_db: f64) -> Scenario {
        let geom = ArrayGeometry::square_30ghz(8).unwrap();
        let ue = UeSpec::new(SphericalPoint::from_degrees(5.0, -20.0, 10.0).unwrap(), 3.0, 10);
        let mut s = Scenario::new(geom, vec![ue], make_unipolar_pam(order).unwrap());
        s.target_db = target_db;
        s.draws = 2;
        s.trials_per_draw = 2000;
        s
    }

    struct Genie;
    struct GeniePrepared;

    impl PreparedDetector for GeniePrepared {
        fn detect(&self, input: &TrialInput<'_>) -> Result<Vec<usize>> {
            Ok(input.transmitted.to_vec())
        }
    }

    impl Detector for Genie {
        fn label(&self) -> String {
            "genie".into()
        }
        fn prepare(&self, _: &Scenario, _: &DrawState) -> Result<Box<dyn PreparedDetector>> {
            Ok(Box::new(GeniePrepared))
        }
    }

    struct Guess(usize);

    impl PreparedDetector for Guess {
        fn detect(&self, input: &TrialInput<'_>) -> Result<Vec<usize>> {
            let mut rng = keyed_rng(99, Domain::Channel, input.draw_seed, input.trial_index as u64);
            Ok(input.transmitted.iter().map(|_| rng.random_range(0..self.0)).collect())
        }
    }

    impl Detector for Guess {
        fn label(&self) -> String {
            "guess".into()
        }
        fn prepare(&self, s: &Scenario, _: &DrawState) -> Result<Box<dyn PreparedDetector>> {
            Ok(Box::new(Guess(s.constellation.order())))
        }
    }

    #[test]
    fn genie_has_no_errors() {
        let s = small_scenario(4, 20.0);
        let est = estimate_ser(&s, &[&Genie], 1).unwrap();
        assert_eq!(est[0].joint_ser, 0.0);
        assert_eq!(est[0].trials, 4000);
        assert_eq!(est[0].per_draw.len(), 2);
    }

    #[test]
    fn random_guess_rate() {
        let s = small_scenario(4, 20.0);
        let est = &estimate_ser(&s, &[&Guess(4)], 1).unwrap()[0];
        assert!((est.per_user_ser[0] - 0.75).abs() < 3.0 * est.per_user_halfwidth[0]);
    }

    #[test]
    fn single_user_and_joint_ml_agree_for_one_user() {
        let s = small_scenario(4, 10.0);
        let draw = DrawState::prepare(&s, 0).unwrap();
        let dets: Vec<Box<dyn PreparedDetector>> = vec![
            DetectorKind::MultiuserMl.prepare(&s, &draw).unwrap(),
            DetectorKind::SingleUser(DetectorModel::Exact).prepare(&s, &draw).unwrap(),
        ];
        let mut errors = 0;
        for t in 0..2000 {
            let rec = run_trial(&s, &draw, &dets, t).unwrap();
            assert_eq!(rec.detected[0], rec.detected[1]);
            errors += usize::from(rec.detected[0] != rec.transmitted);
        }
        assert!(errors > 0);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let mut s = small_scenario(4, 10.0);
        s.ues.push(UeSpec::new(SphericalPoint::from_degrees(8.0, 10.0, -5.0).unwrap(), 1.0, 4));
        s.power_mode = PowerMode::EqualSnr;
        let dets: [&dyn Detector; 2] = [
            &DetectorKind::MultiuserMl,
            &DetectorKind::SingleUser(DetectorModel::MismatchedFf),
        ];
        let one = estimate_ser(&s, &dets, 1).unwrap();
        let eight = estimate_ser(&s, &dets, 8).unwrap();
        assert_eq!(one, eight);

        let draw = DrawState::prepare(&s, 1).unwrap();
        let prepared: Vec<_> = dets.iter().map(|d| d.prepare(&s, &draw).unwrap()).collect();
        let serial: Vec<_> = (0..300).map(|t| run_trial(&s, &draw, &prepared, t).unwrap()).collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let parallel: Vec<_> = pool.install(|| {
            (0..300)
                .into_par_iter()
                .map(|t| run_trial(&s, &draw, &prepared, t).unwrap())
                .collect()
        });
        assert_eq!(serial, parallel);
    }

    #[test]
    fn joint_error_dominates_user_errors() {
        let mut s = small_scenario(2, 0.0);
        s.ues.push(UeSpec::new(SphericalPoint::from_degrees(6.0, 30.0, 20.0).unwrap(), 2.0, 3));
        s.power_mode = PowerMode::EqualSnr;
        let est = &estimate_ser(&s, &[&DetectorKind::MultiuserMl], 1).unwrap()[0];
        let max_user = est.per_user_ser.iter().cloned().fold(0.0, f64::max);
        assert!(est.joint_ser >= max_user - 1e-12);
        assert!(est.joint_ser <= est.per_user_ser.iter().sum::<f64>() + 1e-12);
    }

    #[test]
    fn isolate_keeps_clusters_and_power() {
        let mut s = small_scenario(4, 20.0);
        s.ues.push(UeSpec::new(SphericalPoint::from_degrees(8.0, 10.0, -5.0).unwrap(), 1.0, 4));
        s.power_mode = PowerMode::EqualSnr;
        let full = DrawState::prepare(&s, 3).unwrap();
        let alone = DrawState::prepare(&s.isolate(1).unwrap(), 3).unwrap();
        assert_eq!(full.clusters[1], alone.clusters[0]);
        assert_eq!(full.powers[1], alone.powers[0]);
        assert!(s.isolate(2).is_err());
    }

    #[test]
    fn validation() {
        let mut s = small_scenario(2, 20.0);
        assert!(s.validate().is_ok());
        s.noise_power = 0.0;
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));
        s.noise_power = 1.0;
        s.trials_per_draw = 0;
        assert!(s.validate().is_err());
        s.trials_per_draw = 1;
        s.ues = (0..5)
            .map(|i| UeSpec::new(SphericalPoint::from_degrees(10.0 + i as f64, 0.0, 0.0).unwrap(), 1.0, 2))
            .collect();
        assert!(matches!(s.validate(), Err(Error::InfeasibleSinr { users: 5, .. })));
        s.power_mode = PowerMode::EqualSnr;
        assert!(s.validate().is_ok());
        s.target_db = f64::NAN;
        assert!(s.validate().is_err());
    }

    #[test]
    fn wilson_interval() {
        // p = 0.5, n = 100: z/(1+z^2/n) * sqrt(1/400 + z^2/40000)
        let z = Z95;
        let expected = z / (1.0 + z * z / 100.0) * (0.0025 + z * z / 40000.0).sqrt();
        assert!((wilson_halfwidth(50, 100) - expected).abs() < 1e-15);
        // interval [0.40383, 0.59617]
        assert!((wilson_halfwidth(50, 100) - 0.0961685).abs() < 1e-6);
        assert!(wilson_halfwidth(0, 1000) > 0.0);
    }
}
