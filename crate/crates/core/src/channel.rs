//! Local scattering clusters, array responses and spatial covariance.
//!
//! A UE's channel is a zero-mean complex Gaussian vector whose covariance is a
//! gain-weighted sum of rank-one terms `a aᴴ`, one per scatterer. The
//! near-field model uses the exact distance from each scatterer to every
//! element (spherical wavefront); the far-field model keeps only the arrival
//! direction (planar wavefront).
//!
//! Covariances built from a cluster are kept in factored form `F Fᴴ` with
//! `F = [sqrt(b_1) a_1, ..., sqrt(b_L) a_L]`; the dense matrix is materialised
//! on request only.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::geometry::{ArrayGeometry, SphericalPoint};
use crate::rng::{complex_normal, keyed_rng, Domain};
use crate::subspace::{dominant_eigs, SubspaceBasis};
use crate::{Error, Result, C64};

/// How scatterers are placed around the UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereSampling {
    /// Uniform on the sphere surface of radius `rho_s`.
    #[default]
    Surface,
    /// Uniform inside the ball of radius `rho_s`.
    Volume,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringCluster {
    ue: SphericalPoint,
    radius: f64,
    scatterers: Vec<SphericalPoint>,
    gains: Vec<f64>,
}

impl ScatteringCluster {
    pub fn new(
        ue: SphericalPoint,
        radius: f64,
        scatterers: Vec<SphericalPoint>,
        gains: Vec<f64>,
    ) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidCluster(format!("radius must be >= 0, got {radius}")));
        }
        if gains.len() != scatterers.len() {
            return Err(Error::InvalidCluster(format!(
                "{} gains for {} scatterers",
                gains.len(),
                scatterers.len()
            )));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidCluster(format!(
                "path gains must be positive and finite, got {g}"
            )));
        }
        let centre = ue.to_cartesian();
        let slack = 1e-9 * (1.0 + radius + ue.r());
        for s in &scatterers {
            let d = (s.to_cartesian() - centre).norm();
            if d > radius + slack {
                return Err(Error::InvalidCluster(format!(
                    "scatterer at {d} m from the UE lies outside radius {radius} m"
                )));
            }
        }
        Ok(Self {
            ue,
            radius,
            scatterers,
            gains,
        })
    }

    pub fn ue(&self) -> SphericalPoint {
        self.ue
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn scatterers(&self) -> &[SphericalPoint] {
        &self.scatterers
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    /// Same scatterers with a different gain profile.
    pub fn with_gains(self, gains: Vec<f64>) -> Result<Self> {
        Self::new(self.ue, self.radius, self.scatterers, gains)
    }

    /// Same scatterers attributed to another UE position. The radius grows if
    /// needed so the cluster invariant still holds.
    pub fn reassigned_to(&self, ue: SphericalPoint) -> Self {
        let centre = ue.to_cartesian();
        let radius = self
            .scatterers
            .iter()
            .map(|s| (s.to_cartesian() - centre).norm())
            .fold(self.radius, f64::max);
        Self {
            ue,
            radius,
            scatterers: self.scatterers.clone(),
            gains: self.gains.clone(),
        }
    }
}

/// Equal gains `1/L`, so the covariance trace is N.
pub fn equal_gains(count: usize) -> Vec<f64> {
    vec![1.0 / count as f64; count]
}

/// Rejects clusters whose scatterers could sit on the array origin.
pub fn check_clearance(ue: &SphericalPoint, rho_s: f64, sampling: SphereSampling) -> Result<()> {
    let blocked = match sampling {
        // the surface passes through the origin only when r == rho_s
        SphereSampling::Surface => ue.r() == rho_s,
        SphereSampling::Volume => ue.r() <= rho_s,
    };
    if blocked {
        Err(Error::ClusterContainsArray {
            distance: ue.r(),
            radius: rho_s,
        })
    } else {
        Ok(())
    }
}

/// Draws `count` scatterers uniformly on the sphere surface of radius `rho_s`
/// around the UE, with equal gains. Deterministic in `seed`.
pub fn draw_scatterers(
    ue: SphericalPoint,
    rho_s: f64,
    count: usize,
    seed: u64,
) -> Result<ScatteringCluster> {
    let mut rng = keyed_rng(seed, Domain::Scatterers, 0, 0);
    draw_cluster(ue, rho_s, count, SphereSampling::Surface, &mut rng)
}

pub fn draw_cluster<R: Rng + ?Sized>(
    ue: SphericalPoint,
    rho_s: f64,
    count: usize,
    sampling: SphereSampling,
    rng: &mut R,
) -> Result<ScatteringCluster> {
    if !(rho_s.is_finite() && rho_s >= 0.0) {
        return Err(Error::InvalidCluster(format!("radius must be >= 0, got {rho_s}")));
    }
    check_clearance(&ue, rho_s, sampling)?;
    let centre = ue.to_cartesian();
    let scatterers = (0..count)
        .map(|_| {
            let dir = unit_vector(rng);
            let radius = match sampling {
                SphereSampling::Surface => rho_s,
                SphereSampling::Volume => rho_s * rng.random::<f64>().cbrt(),
            };
            SphericalPoint::from_cartesian(&(centre + dir * radius))
        })
        .collect();
    ScatteringCluster::new(ue, rho_s, scatterers, equal_gains(count))
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Spherical-wavefront response, `exp(-j 2pi/lambda ||s - u_n||)`.
pub fn nf_response(s: &SphericalPoint, geom: &ArrayGeometry) -> DVector<C64> {
    let k = geom.wavenumber();
    let sc = s.to_cartesian();
    let r = s.r();
    // exp(-j k r) with the phase reduced before scaling keeps far points exact
    let common = C64::from_polar(1.0, -(k * r).rem_euclid(std::f64::consts::TAU));
    DVector::from_iterator(
        geom.num_elements(),
        geom.positions().into_iter().map(|u| {
            let d = (sc - u).norm();
            // ||s-u|| - r without cancellation
            let excess = (u.norm_squared() - 2.0 * sc.dot(&u)) / (d + r);
            common * C64::from_polar(1.0, -k * excess)
        }),
    )
}

/// Planar-wavefront response for arrival direction `(theta, phi)`.
pub fn ff_response(theta: f64, phi: f64, geom: &ArrayGeometry) -> DVector<C64> {
    let kd = geom.wavenumber() * geom.spacing();
    let (h, v) = (theta.cos() * phi.sin(), theta.sin());
    DVector::from_iterator(
        geom.num_elements(),
        geom.indices()
            .map(|(i, j)| C64::from_polar(1.0, kd * (i as f64 * h + j as f64 * v))),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationModel {
    NearField,
    FarField,
}

impl CorrelationModel {
    pub fn tag(&self) -> &'static str {
        match self {
            CorrelationModel::NearField => "nf",
            CorrelationModel::FarField => "ff",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Factored(DMatrix<C64>),
    Dense(DMatrix<C64>),
}

/// Hermitian positive semidefinite spatial covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    repr: Repr,
    model: CorrelationModel,
}

impl CovarianceMatrix {
    /// Covariance `F Fᴴ`.
    pub fn from_factor(factor: DMatrix<C64>, model: CorrelationModel) -> Result<Self> {
        if factor.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidCovariance("non-finite factor entry".into()));
        }
        Ok(Self {
            repr: Repr::Factored(factor),
            model,
        })
    }

    /// Validates Hermitian symmetry (1e-12 relative) and positive
    /// semidefiniteness (eigenvalues >= -1e-10 of the largest).
    pub fn from_dense(entries: DMatrix<C64>, model: CorrelationModel) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidCovariance(format!(
                "{}x{} matrix is not square",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = entries.norm().max(f64::MIN_POSITIVE);
        if (&entries - entries.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::InvalidCovariance("matrix is not Hermitian".into()));
        }
        let eig = nalgebra::SymmetricEigen::try_new(entries.clone(), f64::EPSILON, 10_000)
            .ok_or(Error::ConvergenceFailure("Hermitian eigensolver"))?;
        let max = eig.eigenvalues.max();
        if eig.eigenvalues.min() < -1e-10 * max.max(0.0) {
            return Err(Error::InvalidCovariance("matrix is not positive semidefinite".into()));
        }
        Ok(Self {
            repr: Repr::Dense(entries),
            model,
        })
    }

    pub fn zeros(n: usize, model: CorrelationModel) -> Self {
        Self {
            repr: Repr::Factored(DMatrix::zeros(n, 0)),
            model,
        }
    }

    pub fn model(&self) -> CorrelationModel {
        self.model
    }

    /// Matrix dimension N.
    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Factored(f) => f.nrows(),
            Repr::Dense(m) => m.nrows(),
        }
    }

    /// Upper bound on the rank (number of factor columns, or N when dense).
    pub fn rank_bound(&self) -> usize {
        match &self.repr {
            Repr::Factored(f) => f.ncols(),
            Repr::Dense(m) => m.nrows(),
        }
    }

    pub fn factor(&self) -> Option<&DMatrix<C64>> {
        match &self.repr {
            Repr::Factored(f) => Some(f),
            Repr::Dense(_) => None,
        }
    }

    /// Dense N x N entries.
    pub fn entries(&self) -> DMatrix<C64> {
        match &self.repr {
            Repr::Factored(f) => f * f.adjoint(),
            Repr::Dense(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Factored(f) => f.iter().map(|z| z.norm_sqr()).sum(),
            Repr::Dense(m) => m.diagonal().iter().map(|z| z.re).sum(),
        }
    }

    /// A factor `F` with `F Fᴴ` equal to this covariance. Dense matrices are
    /// factored through their nonzero eigenpairs.
    pub fn low_rank_factor(&self) -> Result<DMatrix<C64>> {
        match &self.repr {
            Repr::Factored(f) => Ok(f.clone()),
            Repr::Dense(_) => Ok(dominant_eigs(self, self.dim())?.nonzero().coloring()),
        }
    }

    /// Row-major CSV, each entry written as a `re,im` pair.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let m = self.entries();
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols())
                .map(|j| format!("{},{}", m[(i, j)].re, m[(i, j)].im))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Response of one scatterer under the given model. Far-field responses use
/// the scatterer's own direction as seen from the array origin.
pub fn response(s: &SphericalPoint, geom: &ArrayGeometry, model: CorrelationModel) -> DVector<C64> {
    match model {
        CorrelationModel::NearField => nf_response(s, geom),
        CorrelationModel::FarField => ff_response(s.theta(), s.phi(), geom),
    }
}

/// `sum_i b_i a_i a_iᴴ` over the cluster's scatterers.
pub fn build_covariance(
    cluster: &ScatteringCluster,
    geom: &ArrayGeometry,
    model: CorrelationModel,
) -> Result<CovarianceMatrix> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if let Some(s) = cluster.scatterers().iter().find(|s| s.r() == 0.0) {
        return Err(Error::InvalidCluster(format!(
            "scatterer at the array origin: {s:?}"
        )));
    }
    let columns: Vec<DVector<C64>> = cluster
        .scatterers()
        .iter()
        .zip(cluster.gains())
        .map(|(s, &b)| response(s, geom, model) * C64::from(b.sqrt()))
        .collect();
    CovarianceMatrix::from_factor(DMatrix::from_columns(&columns), model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DVector<C64>,
}

/// Draws `h = U diag(sqrt(lambda)) w` from precomputed nonzero eigenpairs.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    coloring: DMatrix<C64>,
}

impl ChannelSampler {
    pub fn new(basis: &SubspaceBasis) -> Self {
        Self {
            coloring: basis.nonzero().coloring(),
        }
    }

    /// Colors white noise directly with the covariance factor, so the
    /// eigendecomposition is skipped for factored covariances.
    pub fn from_covariance(cov: &CovarianceMatrix) -> Result<Self> {
        Ok(Self {
            coloring: cov.low_rank_factor()?,
        })
    }

    pub fn dim(&self) -> usize {
        self.coloring.nrows()
    }

    pub fn rank(&self) -> usize {
        self.coloring.ncols()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<C64> {
        let mut h = DVector::zeros(self.dim());
        self.accumulate(rng, C64::new(1.0, 0.0), &mut h);
        h
    }

    /// `out += weight * h` for a fresh draw `h`.
    pub fn accumulate<R: Rng + ?Sized>(&self, rng: &mut R, weight: C64, out: &mut DVector<C64>) {
        let w = DVector::from_iterator(self.rank(), (0..self.rank()).map(|_| complex_normal(rng)));
        out.gemv(weight, &self.coloring, &w, C64::new(1.0, 0.0));
    }
}

/// One channel draw, deterministic in `seed`.
pub fn sample_channel(cov: &CovarianceMatrix, seed: u64) -> Result<ChannelRealization> {
    let mut rng = keyed_rng(seed, Domain::Channel, 0, 0);
    sample_channel_with(cov, &mut rng)
}

pub fn sample_channel_with<R: Rng + ?Sized>(
    cov: &CovarianceMatrix,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let basis = dominant_eigs(cov, cov.rank_bound().min(cov.dim()))?;
    Ok(ChannelRealization {
        h: ChannelSampler::new(&basis).sample(rng),
    })
}
