use super::ProjectionError;

/// Target tolerance on `2^H` during the sigma search.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-4;
/// Upper bound on bisection steps.
pub const MAX_BISECTION_STEPS: usize = 64;

/// Outcome of calibrating one point's Gaussian bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSearch {
    pub sigma: f64,
    /// Conditional probabilities, aligned with the input distances.
    pub probabilities: Vec<f64>,
    /// `2^H` achieved at `sigma`.
    pub perplexity: f64,
    pub converged: bool,
    pub steps: usize,
}

/// Conditional distribution `p_j ∝ exp(-d_j² / 2σ²)` and its perplexity.
pub fn conditional_distribution(distances: &[f64], sigma: f64) -> (Vec<f64>, f64) {
    let sq: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let denom = 2.0 * sigma * sigma;
    let weights: Vec<f64> = sq.iter().map(|s| (-(s - min) / denom).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let entropy: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    (probs, entropy.exp2())
}

/// Bisects on `ln σ` until the conditional distribution reaches the target
/// perplexity. When the target is unreachable the closest sigma found is
/// returned with `converged == false`.
pub fn search_sigma(distances: &[f64], perplexity: f64) -> Result<SigmaSearch, ProjectionError> {
    if distances.len() < 2 {
        return Err(ProjectionError::TooFewDistances(distances.len()));
    }
    if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(ProjectionError::NonFinite);
    }
    if !(perplexity.is_finite() && perplexity > 0.0) {
        return Err(ProjectionError::BadPerplexity {
            perplexity,
            points: distances.len() + 1,
        });
    }
    let scale = distances
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE.sqrt());
    let mut lo = (scale * 1e-12).ln();
    let mut hi = (scale * 1e6).ln();

    let mut best: Option<SigmaSearch> = None;
    for step in 1..=MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let sigma = mid.exp();
        let (probabilities, achieved) = conditional_distribution(distances, sigma);
        let err = (achieved - perplexity).abs();
        let improves = best.as_ref().is_none_or(|b| err < (b.perplexity - perplexity).abs());
        let converged = err <= PERPLEXITY_TOLERANCE;
        if improves || converged {
            best = Some(SigmaSearch {
                sigma,
                probabilities,
                perplexity: achieved,
                converged,
                steps: step,
            });
        }
        if converged {
            break;
        }
        if achieved > perplexity {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(best.expect("at least one bisection step"))
}
