use std::f64::consts::TAU;

use crate::hash::Fnv64;

use super::ProjectionError;

pub const DEFAULT_MAX_ITERATIONS: usize = 300;

/// Pushes each violating pair slightly past `d_min` so the repaired pair
/// does not sit exactly on the boundary.
const OVERSHOOT: f64 = 1.0 + 1e-3;
/// Pairs closer than this are treated as coincident.
const COINCIDENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapResult {
    pub points: Vec<[f64; 2]>,
    /// Full sweeps performed.
    pub iterations: usize,
    pub converged: bool,
}

/// Unit direction for separating a coincident pair, derived from the seed and
/// the pair indices.
fn jitter_direction(seed: u64, i: usize, j: usize) -> [f64; 2] {
    let h = Fnv64::new().u64(seed).u64(i as u64).u64(j as u64).finish();
    let angle = (h >> 11) as f64 / (1u64 << 53) as f64 * TAU;
    [angle.cos(), angle.sin()]
}

fn has_violation(points: &[[f64; 2]], d_min: f64) -> bool {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if distance(points[i], points[j]) < d_min {
                return true;
            }
        }
    }
    false
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Repeatedly sweeps all pairs, moving both members of any pair closer than
/// `d_min` apart by equal amounts along their separation vector.
pub fn overlap_removal(
    points: &[[f64; 2]],
    d_min: f64,
    max_iter: usize,
    seed: u64,
) -> Result<OverlapResult, ProjectionError> {
    if !(d_min.is_finite() && d_min > 0.0) {
        return Err(ProjectionError::InvalidMinDistance(d_min));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }
    let mut pts = points.to_vec();
    let mut iterations = 0;
    while iterations < max_iter && has_violation(&pts, d_min) {
        iterations += 1;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let dist = distance(pts[i], pts[j]);
                if dist >= d_min {
                    continue;
                }
                let dir = if dist < COINCIDENT {
                    jitter_direction(seed, i, j)
                } else {
                    [(pts[j][0] - pts[i][0]) / dist, (pts[j][1] - pts[i][1]) / dist]
                };
                let shift = 0.5 * (d_min * OVERSHOOT - dist);
                pts[i][0] -= dir[0] * shift;
                pts[i][1] -= dir[1] * shift;
                pts[j][0] += dir[0] * shift;
                pts[j][1] += dir[1] * shift;
            }
        }
    }
    let converged = !has_violation(&pts, d_min);
    Ok(OverlapResult {
        points: pts,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_pair_separates() {
        let r = overlap_removal(&[[1.0, 1.0], [1.0, 1.0]], 10.0, 300, 7).unwrap();
        assert!(r.converged);
        assert!(distance(r.points[0], r.points[1]) >= 10.0);
        let mid = [
            (r.points[0][0] + r.points[1][0]) / 2.0,
            (r.points[0][1] + r.points[1][1]) / 2.0,
        ];
        assert!((mid[0] - 1.0).abs() < 1e-12 && (mid[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_points_are_untouched() {
        let pts = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
        let r = overlap_removal(&pts, 4.0, 300, 0).unwrap();
        assert_eq!(r.points, pts.to_vec());
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn zero_budget_reports_unconverged() {
        let r = overlap_removal(&[[0.0, 0.0], [0.5, 0.0]], 4.0, 0, 0).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn invalid_min_distance() {
        assert!(overlap_removal(&[], 0.0, 10, 0).is_err());
        assert!(overlap_removal(&[], f64::NAN, 10, 0).is_err());
    }
}
