//! Unipolar PAM level sets and trace-based power control.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Real, nonnegative amplitude levels `0 = x_1 < x_2 < ... < x_M` with unit
/// average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    levels: Vec<f64>,
}

impl Constellation {
    /// Equally spaced levels `a * (0, 1, ..., M-1)` scaled to unit energy.
    pub fn unipolar_pam(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidConstellation(format!(
                "order must be at least 2, got {order}"
            )));
        }
        let m = order as f64;
        // sum_{i<M} i^2 = (M-1) M (2M-1) / 6
        let sum_sq = (m - 1.0) * m * (2.0 * m - 1.0) / 6.0;
        let a = (m / sum_sq).sqrt();
        Ok(Self {
            levels: (0..order).map(|i| a * i as f64).collect(),
        })
    }

    /// Zero plus `M-1` levels whose energies grow geometrically by `ratio`,
    /// scaled to unit energy. Spreading the energies this way approximates
    /// SER-optimised unipolar sets at moderate SNR.
    pub fn geometric_energy(order: usize, ratio: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidConstellation(format!(
                "order must be at least 2, got {order}"
            )));
        }
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::InvalidConstellation(format!(
                "energy ratio must be > 1, got {ratio}"
            )));
        }
        let mut levels = vec![0.0];
        levels.extend((0..order - 1).map(|i| ratio.powf(i as f64 / 2.0)));
        Self::from_levels(levels)
    }

    /// User-supplied levels. They must start at zero, increase strictly and
    /// be nonnegative; they are rescaled to unit average energy unless
    /// already within 1e-12 of it.
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidConstellation("need at least two levels".into()));
        }
        if levels.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConstellation("levels must be finite".into()));
        }
        if levels[0] != 0.0 {
            return Err(Error::InvalidConstellation(format!(
                "first level must be 0, got {}",
                levels[0]
            )));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConstellation(
                "levels must be strictly increasing and nonnegative".into(),
            ));
        }
        let energy = average_energy(&levels);
        let levels = if (energy - 1.0).abs() > 1e-12 {
            let s = energy.sqrt().recip();
            levels.into_iter().map(|x| x * s).collect()
        } else {
            levels
        };
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn order(&self) -> usize {
        self.levels.len()
    }

    /// `|x_m|^2` for each level.
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|x| x * x).collect()
    }

    pub fn average_energy(&self) -> f64 {
        average_energy(&self.levels)
    }
}

fn average_energy(levels: &[f64]) -> f64 {
    levels.iter().map(|x| x * x).sum::<f64>() / levels.len() as f64
}

pub fn make_unipolar_pam(order: usize) -> Result<Constellation> {
    Constellation::unipolar_pam(order)
}

/// True when all symbol energies are pairwise distinct, the condition under
/// which an energy detector can separate every pair of symbols.
pub fn check_identifiability(levels: &[f64]) -> bool {
    let mut energies: Vec<f64> = levels.iter().map(|x| x * x).collect();
    energies.sort_by(f64::total_cmp);
    energies.windows(2).all(|w| w[0] != w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Every user sees the same trace-based SINR.
    EqualSinr,
    /// Every user sees the same SNR, interference ignored.
    EqualSnr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerControl {
    pub powers: Vec<f64>,
    pub target: f64,
    pub mode: PowerMode,
}

/// Power factors that equalise the per-user SINR (or SNR) for the given
/// channel traces `tr(R_k)` and noise trace `tr(R_z)`.
pub fn power_control(
    channel_traces: &[f64],
    noise_trace: f64,
    target: f64,
    mode: PowerMode,
) -> Result<PowerControl> {
    if channel_traces.is_empty() {
        return Err(Error::InvalidPower("no users".into()));
    }
    if let Some(t) = channel_traces.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidPower(format!("channel trace must be > 0, got {t}")));
    }
    if !(noise_trace.is_finite() && noise_trace > 0.0) {
        return Err(Error::InvalidPower(format!("noise trace must be > 0, got {noise_trace}")));
    }
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidPower(format!("target must be > 0, got {target}")));
    }
    let users = channel_traces.len();
    let received = match mode {
        PowerMode::EqualSnr => target * noise_trace,
        PowerMode::EqualSinr => {
            check_sinr_feasible(target, users)?;
            // p_k tr(R_k) = s for all k solves s = target (noise + (K-1) s)
            target * noise_trace / (1.0 - target * (users as f64 - 1.0))
        }
    };
    Ok(PowerControl {
        powers: channel_traces.iter().map(|t| received / t).collect(),
        target,
        mode,
    })
}

/// Equal SINR across `users` is reachable only when `target * (K-1) < 1`.
pub fn check_sinr_feasible(target: f64, users: usize) -> Result<()> {
    let load = target * (users as f64 - 1.0);
    if load >= 1.0 {
        Err(Error::InfeasibleSinr {
            target,
            users,
            load,
        })
    } else {
        Ok(())
    }
}

/// Trace-based SINR of user `k`.
pub fn sinr(powers: &[f64], channel_traces: &[f64], noise_trace: f64, k: usize) -> f64 {
    let interference: f64 = powers
        .iter()
        .zip(channel_traces)
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, (p, t))| p * t)
        .sum();
    powers[k] * channel_traces[k] / (noise_trace + interference)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
