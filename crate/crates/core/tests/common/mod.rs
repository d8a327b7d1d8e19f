#![allow(dead_code)]

use ncmimo::channel::SphereSampling;
use ncmimo::experiment::{chordal_draws, ExperimentConfig, ExperimentKind, Sweep};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// The trajectory preset at aperture `side`, `draws` seeds.
pub fn chordal_config(side: usize, draws: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Chordal).resolve().unwrap();
    c.array.n_h = side;
    c.array.n_v = side;
    let mut b = c.budget();
    b.draws = draws;
    c.budget = Some(b);
    c
}

pub fn grid(config: &ExperimentConfig) -> Vec<f64> {
    match &config.sweep {
        Some(s @ Sweep::Distance { .. }) => s.values(),
        other => panic!("expected a distance sweep, got {other:?}"),
    }
}

/// Seed-mean normalized chordal distance at distance `r`.
pub fn chordal_mean(config: &ExperimentConfig, r: f64, sampling: SphereSampling) -> f64 {
    let mut s = config.scenario_at(Some(r)).unwrap();
    s.sampling = sampling;
    mean(&chordal_draws(&s).unwrap())
}
