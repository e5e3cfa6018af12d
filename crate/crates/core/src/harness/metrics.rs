use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::trace::EpisodeTrace;

pub const CURVES_HEADER: &str = "step,episode,score,aux_sum";

/// One completed episode, a row of curves.csv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodePoint {
    /// Global training step at which the episode ended.
    pub step: u64,
    pub episode: u64,
    pub score: f64,
    pub aux_sum: f64,
}

/// Completed episodes only; a run's trailing partial episode has no score.
pub fn episode_points(traces: &[EpisodeTrace]) -> Vec<EpisodePoint> {
    traces
        .iter()
        .filter(|t| t.complete)
        .map(|t| EpisodePoint {
            step: t.end_step(),
            episode: t.episode,
            score: t.native_return(),
            aux_sum: t.aux_sum(),
        })
        .collect()
}

pub fn write_curves(path: &Path, points: &[EpisodePoint]) -> Result<(), HarnessError> {
    let io = |e: csv::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    if points.is_empty() {
        w.write_record(CURVES_HEADER.split(',')).map_err(io)?;
    }
    for p in points {
        w.serialize(p).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn read_curves(path: &Path) -> Result<Vec<EpisodePoint>, HarnessError> {
    let io = |e: csv::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let header = r.headers().map_err(io)?.iter().collect::<Vec<_>>().join(",");
    if header != CURVES_HEADER {
        return Err(HarnessError::Io(format!("{}: unexpected header `{header}`", path.display())));
    }
    r.deserialize().collect::<Result<_, _>>().map_err(io)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and sample standard deviation; a single value has std 0.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let m = mean(xs);
    if xs.len() == 1 {
        return Some((m, 0.0));
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    Some((m, var.sqrt()))
}

/// Mean score of the last `window` episodes.
pub fn final_score(points: &[EpisodePoint], window: usize) -> Option<f64> {
    if points.is_empty() || window == 0 {
        return None;
    }
    let tail = &points[points.len().saturating_sub(window)..];
    Some(tail.iter().map(|p| p.score).sum::<f64>() / tail.len() as f64)
}

/// Pearson correlation; `None` when either column has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson r between per-window aux reward and game score, over
/// consecutive non-overlapping windows of `window` episodes. A trailing
/// partial window is dropped.
pub fn correlation(points: &[EpisodePoint], window: usize) -> Option<f64> {
    if window == 0 {
        return None;
    }
    let (aux, score): (Vec<f64>, Vec<f64>) = points
        .chunks_exact(window)
        .map(|w| (w.iter().map(|p| p.aux_sum).sum::<f64>(), w.iter().map(|p| p.score).sum::<f64>()))
        .unzip();
    if aux.len() < 2 {
        return None;
    }
    pearson(&aux, &score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub score: f64,
}

/// Trailing-window mean score sampled at `samples` evenly spaced steps.
/// Sample points with no finished episode yet are omitted.
pub fn learning_curve(points: &[EpisodePoint], total_steps: u64, samples: u64, window: usize) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    let mut end = 0;
    for k in 1..=samples {
        let step = total_steps * k / samples;
        while end < points.len() && points[end].step <= step {
            end += 1;
        }
        if let Some(score) = final_score(&points[..end], window) {
            out.push(CurvePoint { step, score });
        }
    }
    out
}

/// Pointwise mean over seeds, at steps every seed has reached.
pub fn mean_curve(curves: &[Vec<CurvePoint>]) -> Vec<CurvePoint> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    first
        .iter()
        .filter_map(|p| {
            let vals: Vec<f64> = curves
                .iter()
                .filter_map(|c| c.iter().find(|q| q.step == p.step).map(|q| q.score))
                .collect();
            (vals.len() == curves.len()).then(|| CurvePoint {
                step: p.step,
                score: mean(&vals),
            })
        })
        .collect()
}

/// First sampled step at which the curve reaches `target`.
pub fn steps_to_reach(curve: &[CurvePoint], target: f64) -> Option<u64> {
    let tol = 1e-9 * target.abs().max(1.0);
    curve.iter().find(|p| p.score >= target - tol).map(|p| p.step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(rows: &[(f64, f64)]) -> Vec<EpisodePoint> {
        rows.iter()
            .enumerate()
            .map(|(i, &(score, aux))| EpisodePoint {
                step: 10 * (i as u64 + 1),
                episode: i as u64,
                score,
                aux_sum: aux,
            })
            .collect()
    }

    #[test]
    fn perfect_correlations() {
        let rows: Vec<(f64, f64)> = (0..200).map(|i| ((i % 17) as f64, (i % 17) as f64)).collect();
        assert!((correlation(&pts(&rows), 5).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<(f64, f64)> = rows.iter().map(|&(s, _)| (s, -s)).collect();
        assert!((correlation(&pts(&neg), 5).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_noise_is_uncorrelated() {
        // Monte Carlo: 1000 windows of independent columns; sd of r is ~0.03
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<(f64, f64)> = (0..50_000).map(|_| (rng.gen(), rng.gen())).collect();
        let r = correlation(&pts(&rows), 50).unwrap();
        assert!(r.abs() < 0.1, "{r}");
    }

    #[test]
    fn zero_variance_is_undefined() {
        let rows: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 0.0)).collect();
        assert_eq!(correlation(&pts(&rows), 10), None);
        assert_eq!(correlation(&pts(&rows[..15]), 10), None); // one window
    }

    #[test]
    fn final_score_uses_tail() {
        let p = pts(&[(100.0, 0.0), (1.0, 0.0), (3.0, 0.0)]);
        assert_eq!(final_score(&p, 2), Some(2.0));
        assert_eq!(final_score(&p, 50), Some(104.0 / 3.0));
        assert_eq!(final_score(&[], 50), None);
    }

    #[test]
    fn std_over_seeds() {
        assert_eq!(mean_std(&[3.0]), Some((3.0, 0.0)));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_samples_trailing_means() {
        // episodes end at 10, 20, ..., 100
        let p = pts(&(1..=10).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        let c = learning_curve(&p, 100, 4, 2);
        assert_eq!(c.iter().map(|q| q.step).collect::<Vec<_>>(), vec![25, 50, 75, 100]);
        assert_eq!(c[0].score, 1.5);
        assert_eq!(c[3].score, 9.5);
        assert_eq!(c.last().unwrap().score, final_score(&p, 2).unwrap());
        assert_eq!(steps_to_reach(&c, 4.5), Some(50));
        assert_eq!(steps_to_reach(&c, 10.0), None);
    }

    #[test]
    fn csv_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let p = pts(&[(1.5, -2.0), (0.1, 0.0)]);
        write_curves(&path, &p).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next(), Some(CURVES_HEADER));
        assert_eq!(read_curves(&path).unwrap(), p);
        write_curves(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), CURVES_HEADER);
    }
}
