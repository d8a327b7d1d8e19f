//! Uniform planar array layout and coordinate conventions.
//!
//! The array lies in the yz-plane with element 1 at the origin. Elements are
//! numbered row by row: element `n` (1-based) sits at horizontal index
//! `(n - 1) % n_h` and vertical index `(n - 1) / n_h`.
//!
//! Spherical coordinates measure the elevation `theta` from the xy-plane and
//! the azimuth `phi` from the x-axis, so boresight is the +x direction.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Wavelength at 30 GHz with c rounded to 3e8 m/s.
pub const WAVELENGTH_30GHZ: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    n_h: usize,
    n_v: usize,
    spacing: f64,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(n_h: usize, n_v: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::InvalidGeometry(format!(
                "array must have at least one row and column, got {n_h}x{n_v}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!("spacing must be > 0, got {spacing}")));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        Ok(Self {
            n_h,
            n_v,
            spacing,
            wavelength,
        })
    }

    /// Square array at 30 GHz with one-wavelength spacing.
    pub fn square_30ghz(side: usize) -> Result<Self> {
        Self::new(side, side, WAVELENGTH_30GHZ, WAVELENGTH_30GHZ)
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Total number of elements N.
    pub fn num_elements(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Horizontal and vertical indices of the 1-based element `n`.
    pub fn element_indices(&self, n: usize) -> Result<(usize, usize)> {
        if n == 0 || n > self.num_elements() {
            return Err(Error::IndexOutOfRange {
                index: n,
                count: self.num_elements(),
            });
        }
        Ok(((n - 1) % self.n_h, (n - 1) / self.n_h))
    }

    /// Position of the 1-based element `n`.
    pub fn antenna_position(&self, n: usize) -> Result<Vector3<f64>> {
        let (i, j) = self.element_indices(n)?;
        Ok(self.position_of(i, j))
    }

    fn position_of(&self, i: usize, j: usize) -> Vector3<f64> {
        Vector3::new(0.0, i as f64 * self.spacing, j as f64 * self.spacing)
    }

    /// Element indices in element order (0-based storage order).
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_elements()).map(move |m| (m % self.n_h, m / self.n_h))
    }

    /// All element positions in element order.
    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.indices().map(|(i, j)| self.position_of(i, j)).collect()
    }

    /// Aperture taken as the full diagonal `spacing * sqrt(n_h^2 + n_v^2)`.
    pub fn aperture(&self) -> f64 {
        let (h, v) = (self.n_h as f64, self.n_v as f64);
        self.spacing * (h * h + v * v).sqrt()
    }

    pub fn field_boundaries(&self) -> FieldBoundaries {
        FieldBoundaries::new(self.aperture(), self.wavelength)
    }
}

/// Point in the array's spherical frame: radius in meters, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    r: f64,
    theta: f64,
    phi: f64,
}

impl SphericalPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidPoint(format!("radius must be >= 0, got {r}")));
        }
        if !(theta.is_finite() && (-PI / 2.0..=PI / 2.0).contains(&theta)) {
            return Err(Error::InvalidPoint(format!(
                "elevation {theta} rad outside [-pi/2, pi/2]"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidPoint(format!("azimuth {phi} is not finite")));
        }
        Ok(Self {
            r,
            theta,
            phi: wrap_azimuth(phi),
        })
    }

    pub fn from_degrees(r: f64, theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(r, theta_deg.to_radians(), phi_deg.to_radians())
    }

    /// Inverse of [`spherical_to_cartesian`]; the origin maps to `(0, 0, 0)`.
    pub fn from_cartesian(p: &Vector3<f64>) -> Self {
        let r = p.norm();
        if r == 0.0 {
            return Self {
                r: 0.0,
                theta: 0.0,
                phi: 0.0,
            };
        }
        let theta = (p.z / r).clamp(-1.0, 1.0).asin();
        let phi = wrap_azimuth(p.y.atan2(p.x));
        Self { r, theta, phi }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }

    pub fn to_cartesian(&self) -> Vector3<f64> {
        spherical_to_cartesian(self)
    }
}

// (-pi, pi]
fn wrap_azimuth(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    let wrapped = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI {
        PI
    } else {
        wrapped
    }
}

/// `r * (cos(theta) cos(phi), cos(theta) sin(phi), sin(theta))`.
pub fn spherical_to_cartesian(p: &SphericalPoint) -> Vector3<f64> {
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    Vector3::new(p.r * ct * cp, p.r * ct * sp, p.r * st)
}

/// Reactive/radiative (Fresnel) and near/far (Fraunhofer) field boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldBoundaries {
    pub fresnel: f64,
    pub fraunhofer: f64,
    pub aperture: f64,
}

impl FieldBoundaries {
    pub fn new(aperture: f64, wavelength: f64) -> Self {
        Self {
            fresnel: 0.62 * (aperture.powi(3) / wavelength).sqrt(),
            fraunhofer: 2.0 * aperture * aperture / wavelength,
            aperture,
        }
    }
}

/// Straight-line UE path between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    start: SphericalPoint,
    end: SphericalPoint,
}

impl Trajectory {
    pub fn new(start: SphericalPoint, end: SphericalPoint) -> Result<Self> {
        if start.r() >= end.r() {
            return Err(Error::InvalidPoint(format!(
                "trajectory must move away from the array ({} m -> {} m)",
                start.r(),
                end.r()
            )));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> SphericalPoint {
        self.start
    }

    pub fn end(&self) -> SphericalPoint {
        self.end
    }

    /// The point of the segment at radial distance `distance` from the
    /// origin (the last one along the path if the segment dips inwards).
    pub fn at_distance(&self, distance: f64) -> Result<SphericalPoint> {
        let s = self.start.to_cartesian();
        let step = self.end.to_cartesian() - s;
        // |s + t step|^2 = d^2
        let a = step.norm_squared();
        let b = 2.0 * s.dot(&step);
        let c = s.norm_squared() - distance * distance;
        let disc = b * b - 4.0 * a * c;
        let tol = 1e-9 * self.end.r();
        if disc < 0.0 || distance > self.end.r() + tol {
            return Err(Error::InvalidPoint(format!(
                "no point of the trajectory lies {distance} m from the array"
            )));
        }
        let t = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
        if t == 0.0 && (distance - self.start.r()).abs() > tol {
            return Err(Error::InvalidPoint(format!(
                "no point of the trajectory lies {distance} m from the array"
            )));
        }
        Ok(SphericalPoint::from_cartesian(&(s + step * t)))
    }
}

/// `points` logarithmically spaced values from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (start.ln(), stop.ln());
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        stop
                    } else {
                        (a + (b - a) * i as f64 / (points - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}
