//! Dominant eigenspaces and Grassmannian distances between them.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::channel::CovarianceMatrix;
use crate::{Error, Result, C64};

const MAX_SWEEPS: usize = 10_000;

/// Orthonormal columns paired with their (descending, nonnegative) eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    columns: DMatrix<C64>,
    eigenvalues: Vec<f64>,
}

impl SubspaceBasis {
    pub fn new(columns: DMatrix<C64>, eigenvalues: Vec<f64>) -> Result<Self> {
        if columns.ncols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for {} eigenvalues",
                columns.ncols(),
                eigenvalues.len()
            )));
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidCovariance("eigenvalues must be >= 0".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidCovariance("eigenvalues must be descending".into()));
        }
        let gram = columns.adjoint() * &columns;
        let k = columns.ncols();
        if (gram - DMatrix::<C64>::identity(k, k)).camax() > 1e-10 {
            return Err(Error::InvalidCovariance("columns are not orthonormal".into()));
        }
        Ok(Self {
            columns,
            eigenvalues,
        })
    }

    /// Orthonormal basis of the column space of `m` (full column rank
    /// assumed), with zero eigenvalues attached.
    pub fn spanning(m: DMatrix<C64>) -> Result<Self> {
        let k = m.ncols();
        let q = m.qr().q();
        Self::new(q, vec![0.0; k])
    }

    pub fn columns(&self) -> &DMatrix<C64> {
        &self.columns
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Ambient dimension N.
    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Number of basis vectors.
    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    /// Pairs whose eigenvalue exceeds `1e-9` of the retained total.
    pub fn nonzero(&self) -> SubspaceBasis {
        let total: f64 = self.eigenvalues.iter().sum();
        let keep = self
            .eigenvalues
            .iter()
            .take_while(|&&l| l > 1e-9 * total)
            .count();
        SubspaceBasis {
            columns: self.columns.columns(0, keep).into_owned(),
            eigenvalues: self.eigenvalues[..keep].to_vec(),
        }
    }

    /// `U diag(sqrt(lambda))`, a factor of the rank-truncated covariance.
    pub fn coloring(&self) -> DMatrix<C64> {
        let mut c = self.columns.clone();
        for (mut col, &l) in c.column_iter_mut().zip(&self.eigenvalues) {
            col *= C64::from(l.sqrt());
        }
        c
    }

    /// `U diag(lambda) Uᴴ`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let c = self.coloring();
        &c * c.adjoint()
    }
}

/// Top-`count` eigenpairs of a covariance.
///
/// Factored covariances `F Fᴴ` go through a thin SVD of `F`, which costs
/// `O(N r^2)` and never forms the N x N matrix. When fewer than `count`
/// nonzero directions exist, the basis is completed with orthonormal vectors
/// carrying zero eigenvalues.
pub fn dominant_eigs(cov: &CovarianceMatrix, count: usize) -> Result<SubspaceBasis> {
    let n = cov.dim();
    if count > n {
        return Err(Error::DimensionMismatch(format!(
            "requested {count} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let (vectors, values) = match cov.factor() {
        Some(f) if f.ncols() == 0 => (DMatrix::zeros(n, 0), Vec::new()),
        Some(f) => {
            let svd = SVD::try_new(f.clone(), true, false, f64::EPSILON, MAX_SWEEPS)
                .ok_or(Error::ConvergenceFailure("thin SVD"))?;
            let u = svd.u.ok_or(Error::ConvergenceFailure("thin SVD"))?;
            let values: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
            (u, values)
        }
        None => {
            let eig = SymmetricEigen::try_new(cov.entries(), f64::EPSILON, MAX_SWEEPS)
                .ok_or(Error::ConvergenceFailure("Hermitian eigensolver"))?;
            (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
        }
    };

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order.truncate(count);
    let mut columns: Vec<_> = order.iter().map(|&i| vectors.column(i).into_owned()).collect();
    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();

    // complete with directions orthogonal to everything found so far
    let mut e = 0;
    while columns.len() < count {
        let mut v = nalgebra::DVector::<C64>::zeros(n);
        v[e] = C64::new(1.0, 0.0);
        e += 1;
        for _ in 0..2 {
            for c in &columns {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 0.5 {
            columns.push(v / C64::from(norm));
            eigenvalues.push(0.0);
        }
    }

    let columns = if columns.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    Ok(SubspaceBasis {
        columns,
        eigenvalues,
    })
}

fn check_pair(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<()> {
    if a.dim() != b.dim() || a.rank() != b.rank() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare a {}x{} basis with a {}x{} basis",
            a.dim(),
            a.rank(),
            b.dim(),
            b.rank()
        )));
    }
    Ok(())
}

/// Principal angles between the two column spaces, ascending, in `[0, pi/2]`.
///
/// Cosines are the singular values of `Aᴴ B` and sines those of
/// `B - A Aᴴ B`; each angle is recovered from whichever is better
/// conditioned, so angles near zero are not lost to `acos` roundoff.
pub fn principal_angles(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<Vec<f64>> {
    check_pair(a, b)?;
    if a.rank() == 0 {
        return Ok(Vec::new());
    }
    let cross = a.columns.adjoint() * &b.columns;
    let residual = &b.columns - &a.columns * &cross;

    let mut cosines: Vec<f64> = singular_values(cross)?
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    let mut sines: Vec<f64> = singular_values(residual)?
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    sines.sort_by(|x, y| x.total_cmp(y));
    // both lists hold L values because L <= N
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| if c * c >= 0.5 { s.asin() } else { c.acos() })
        .collect())
}

fn singular_values(m: DMatrix<C64>) -> Result<Vec<f64>> {
    SVD::try_new(m, false, false, f64::EPSILON, MAX_SWEEPS)
        .map(|svd| svd.singular_values.iter().copied().collect())
        .ok_or(Error::ConvergenceFailure("SVD"))
}

/// Chordal (projection Frobenius) distance `sqrt(sum sin^2)`, in `[0, sqrt(L)]`.
pub fn chordal_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    check_pair(a, b)?;
    let cross = a.columns.adjoint() * &b.columns;
    // ||(I - A Aᴴ) B||_F equals sqrt(L - ||Aᴴ B||_F^2) without the cancellation
    Ok((&b.columns - &a.columns * cross).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_covariance, draw_scatterers, nf_response, CorrelationModel};
    use crate::geometry::{ArrayGeometry, SphericalPoint};
    use crate::rng::{complex_normal, keyed_rng, Domain};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn random_matrix(n: usize, k: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = keyed_rng(seed, Domain::Channel, 1, 0);
        DMatrix::from_fn(n, k, |_, _| complex_normal(&mut rng))
    }

    fn random_basis(n: usize, k: usize, seed: u64) -> SubspaceBasis {
        SubspaceBasis::spanning(random_matrix(n, k, seed)).unwrap()
    }

    fn cluster_cov(side: usize, l: usize, seed: u64) -> CovarianceMatrix {
        let g = ArrayGeometry::square_30ghz(side).unwrap();
        let ue = SphericalPoint::from_degrees(5.0, -30.0, -10.0).unwrap();
        let c = draw_scatterers(ue, 3.0, l, seed).unwrap();
        build_covariance(&c, &g, CorrelationModel::NearField).unwrap()
    }

    #[test]
    fn rank_one_eigenpair() {
        let g = ArrayGeometry::square_30ghz(4).unwrap();
        let a = nf_response(&SphericalPoint::from_degrees(3.0, 10.0, 20.0).unwrap(), &g);
        let cov = CovarianceMatrix::from_factor(
            DMatrix::from_columns(std::slice::from_ref(&a)),
            CorrelationModel::NearField,
        )
        .unwrap();
        let b = dominant_eigs(&cov, 1).unwrap();
        assert_abs_diff_eq!(b.eigenvalues()[0], 16.0, epsilon = 1e-12);
        let u = b.columns().column(0);
        // equal up to a global phase
        let overlap = u.dotc(&a).norm() / 4.0;
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dense_diagonal_eigs() {
        let mut d = vec![C64::new(0.0, 0.0); 5];
        d[0] = C64::new(2.0, 0.0);
        d[3] = C64::new(1.0, 0.0);
        let m = DMatrix::from_diagonal(&DVector::from_vec(d));
        let cov = CovarianceMatrix::from_dense(m, CorrelationModel::NearField).unwrap();
        let b = dominant_eigs(&cov, 2).unwrap();
        assert_abs_diff_eq!(b.eigenvalues()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.eigenvalues()[1], 1.0, epsilon = 1e-12);
        assert!(dominant_eigs(&cov, 6).is_err());
    }

    #[test]
    fn reconstruction_and_residuals() {
        let cov = cluster_cov(16, 10, 4);
        let dense = cov.entries();
        let b = dominant_eigs(&cov, 10).unwrap();
        let rel = (b.reconstruct() - &dense).norm() / dense.norm();
        assert!(rel < 1e-8, "reconstruction error {rel}");
        let norm = dense.norm();
        for (u, &l) in b.columns().column_iter().zip(b.eigenvalues()) {
            let r = (&dense * u - u * C64::from(l)).norm();
            assert!(r <= 1e-8 * norm);
        }
        // factored and dense routes agree on the spectrum
        let via_dense = dominant_eigs(
            &CovarianceMatrix::from_dense(dense, CorrelationModel::NearField).unwrap(),
            10,
        )
        .unwrap();
        for (x, y) in b.eigenvalues().iter().zip(via_dense.eigenvalues()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-8 * b.eigenvalues()[0]);
        }
        assert!(chordal_distance(&b, &via_dense).unwrap() < 1e-6);
    }

    #[test]
    fn completion_beyond_rank() {
        let cov = cluster_cov(4, 2, 1);
        let b = dominant_eigs(&cov, 5).unwrap();
        assert_eq!(b.rank(), 5);
        assert_eq!(&b.eigenvalues()[2..], &[0.0, 0.0, 0.0]);
        SubspaceBasis::new(b.columns().clone(), b.eigenvalues().to_vec()).unwrap();
        assert_eq!(b.nonzero().rank(), 2);
    }

    #[test]
    fn distance_extremes() {
        let u = random_basis(16, 3, 1);
        assert_abs_diff_eq!(chordal_distance(&u, &u).unwrap(), 0.0, epsilon = 1e-12);
        assert!(principal_angles(&u, &u).unwrap().iter().all(|a| a.abs() < 1e-12));

        let e = DMatrix::<C64>::identity(16, 6);
        let a = SubspaceBasis::new(e.columns(0, 3).into_owned(), vec![0.0; 3]).unwrap();
        let b = SubspaceBasis::new(e.columns(3, 3).into_owned(), vec![0.0; 3]).unwrap();
        assert_abs_diff_eq!(chordal_distance(&a, &b).unwrap(), 3f64.sqrt(), epsilon = 1e-12);
        for angle in principal_angles(&a, &b).unwrap() {
            assert_abs_diff_eq!(angle, FRAC_PI_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_cross_gram_oracle() {
        for seed in 0..10 {
            let a = random_basis(16, 3, seed);
            let b = random_basis(16, 3, seed + 100);
            let cross = a.columns().adjoint() * b.columns();
            let svd = cross.svd(false, false);
            let oracle = (3.0 - svd.singular_values.iter().map(|s| s * s).sum::<f64>()).sqrt();
            let d = chordal_distance(&a, &b).unwrap();
            assert_abs_diff_eq!(d, oracle, epsilon = 1e-10);

            let angles = principal_angles(&a, &b).unwrap();
            assert!(angles.windows(2).all(|w| w[0] <= w[1]));
            let mut from_svd: Vec<f64> = svd
                .singular_values
                .iter()
                .map(|s| s.clamp(0.0, 1.0).acos())
                .collect();
            from_svd.sort_by(|x, y| x.total_cmp(y));
            for (x, y) in angles.iter().zip(&from_svd) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-8);
            }
            let via_angles = angles.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt();
            assert_abs_diff_eq!(via_angles, d, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = random_basis(16, 3, 1);
        let b = random_basis(16, 2, 2);
        let c = random_basis(8, 3, 3);
        assert!(matches!(chordal_distance(&a, &b), Err(Error::DimensionMismatch(_))));
        assert!(matches!(principal_angles(&a, &c), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn basis_validation() {
        let m = random_matrix(6, 2, 3);
        assert!(SubspaceBasis::new(m, vec![1.0, 0.5]).is_err());
        let q = random_basis(6, 2, 3).columns().clone();
        assert!(SubspaceBasis::new(q.clone(), vec![0.5, 1.0]).is_err());
        assert!(SubspaceBasis::new(q.clone(), vec![1.0, -0.5]).is_err());
        assert!(SubspaceBasis::new(q, vec![1.0, 0.5]).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn invariant_under_unitary_rotation(seed in 0u64..1000, rot_seed in 0u64..1000) {
            let a = random_basis(20, 4, seed);
            let b = random_basis(20, 4, seed + 7919);
            let q = random_basis(4, 4, rot_seed).columns().clone();
            let b_rot = SubspaceBasis::new(b.columns() * q, vec![0.0; 4]).unwrap();
            let d = chordal_distance(&a, &b).unwrap();
            let d_rot = chordal_distance(&a, &b_rot).unwrap();
            prop_assert!((d - d_rot).abs() < 1e-10);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
            let angles = principal_angles(&a, &b).unwrap();
            prop_assert!(angles.iter().all(|t| (0.0..=FRAC_PI_2 + 1e-15).contains(t)));
        }
    }
}
