use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sigma::search_sigma;
use super::ProjectionError;

/// Smallest accepted point count.
pub const MIN_POINTS: usize = 5;
/// Smallest accepted iteration count (the exaggeration phase must complete).
pub const MIN_ITERATIONS: usize = 250;
/// How often the KL divergence is recorded.
pub const KL_CHECKPOINT_EVERY: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 750,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneParams {
    pub fn with_perplexity(perplexity: f64, seed: u64) -> TsneParams {
        TsneParams {
            perplexity,
            seed,
            ..TsneParams::default()
        }
    }

    /// Checks the parameters against a point count.
    pub fn validate(&self, n: usize) -> Result<(), ProjectionError> {
        if n < MIN_POINTS {
            return Err(ProjectionError::TooFewPoints(n));
        }
        if !(self.perplexity.is_finite() && self.perplexity > 0.0 && self.perplexity < (n - 1) as f64) {
            return Err(ProjectionError::BadPerplexity {
                perplexity: self.perplexity,
                points: n,
            });
        }
        if self.iterations < MIN_ITERATIONS {
            return Err(ProjectionError::BadParams(format!(
                "iterations must be at least {MIN_ITERATIONS}, got {}",
                self.iterations
            )));
        }
        let positive = [self.learning_rate, self.early_exaggeration];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ProjectionError::BadParams(
                "learning rate and exaggeration must be positive".into(),
            ));
        }
        let momenta = [self.initial_momentum, self.final_momentum];
        if momenta.iter().any(|m| !(0.0..1.0).contains(m)) {
            return Err(ProjectionError::BadParams("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// A perplexity that is valid for `n` points, capped at 30.
pub fn default_perplexity_for(n: usize) -> f64 {
    let cap = (n.saturating_sub(1) as f64 - 1.0) / 3.0;
    cap.clamp(1.0, 30.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlCheckpoint {
    pub iteration: usize,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOutput {
    pub coords: Vec<[f64; 2]>,
    /// KL(P‖Q) at the initial layout, every [`KL_CHECKPOINT_EVERY`] iterations
    /// and at the end, always against the unexaggerated P.
    pub kl_trace: Vec<KlCheckpoint>,
    /// Rows whose sigma search did not reach the target perplexity.
    pub unconverged_rows: usize,
}

impl TsneOutput {
    pub fn initial_kl(&self) -> f64 {
        self.kl_trace.first().map_or(f64::NAN, |c| c.kl)
    }

    pub fn final_kl(&self) -> f64 {
        self.kl_trace.last().map_or(f64::NAN, |c| c.kl)
    }
}

/// Row-major `n × n` symmetric joint probabilities with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProbabilities {
    pub n: usize,
    pub values: Vec<f64>,
    pub unconverged_rows: usize,
}

impl JointProbabilities {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

fn check_vectors<V: AsRef<[f64]>>(vectors: &[V]) -> Result<(), ProjectionError> {
    let Some(first) = vectors.first() else {
        return Ok(());
    };
    let dim = first.as_ref().len();
    for v in vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(ProjectionError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ProjectionError::NonFinite);
        }
    }
    Ok(())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Calibrates each row to `perplexity` and symmetrizes: `p_ij = (p_j|i + p_i|j) / 2n`.
pub fn joint_probabilities<V: AsRef<[f64]>>(
    vectors: &[V],
    perplexity: f64,
) -> Result<JointProbabilities, ProjectionError> {
    check_vectors(vectors)?;
    let n = vectors.len();
    let mut cond = vec![0.0; n * n];
    let mut unconverged_rows = 0;
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let distances: Vec<f64> = others
            .iter()
            .map(|&j| euclidean(vectors[i].as_ref(), vectors[j].as_ref()))
            .collect();
        let search = search_sigma(&distances, perplexity)?;
        if !search.converged {
            unconverged_rows += 1;
        }
        for (&j, p) in others.iter().zip(search.probabilities) {
            cond[i * n + j] = p;
        }
    }
    let mut values = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
        }
    }
    Ok(JointProbabilities {
        n,
        values,
        unconverged_rows,
    })
}

/// Unnormalized Student-t affinities `1 / (1 + |y_i - y_j|²)` and their sum.
fn student_t(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

/// KL(P‖Q) for the layout `y`.
pub fn kl_divergence(p: &JointProbabilities, y: &[[f64; 2]]) -> f64 {
    let (num, sum) = student_t(y);
    let mut kl = 0.0;
    for (idx, &pij) in p.values.iter().enumerate() {
        if pij > 0.0 {
            let q = (num[idx] / sum).max(f64::MIN_POSITIVE);
            kl += pij * (pij / q).ln();
        }
    }
    kl
}

/// Gradient of KL(αP‖Q) with respect to each point:
/// `4 Σ_j (α p_ij − q_ij) (y_i − y_j) / (1 + |y_i − y_j|²)`.
pub fn gradient(p: &JointProbabilities, y: &[[f64; 2]], exaggeration: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, sum) = student_t(y);
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let m = 4.0 * (exaggeration * p.get(i, j) - w / sum) * w;
            grad[i][0] += m * (y[i][0] - y[j][0]);
            grad[i][1] += m * (y[i][1] - y[j][1]);
        }
    }
    grad
}

/// Exact t-SNE into two dimensions.
pub fn tsne<V: AsRef<[f64]>>(vectors: &[V], params: &TsneParams) -> Result<TsneOutput, ProjectionError> {
    tsne_with_cancel(vectors, params, &|| false)
}

/// Like [`tsne`], polling `cancel` before every gradient iteration.
pub fn tsne_with_cancel<V: AsRef<[f64]>>(
    vectors: &[V],
    params: &TsneParams,
    cancel: &dyn Fn() -> bool,
) -> Result<TsneOutput, ProjectionError> {
    let n = vectors.len();
    params.validate(n)?;
    let p = joint_probabilities(vectors, params.perplexity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];
    let mut kl_trace = vec![KlCheckpoint {
        iteration: 0,
        kl: kl_divergence(&p, &y),
    }];

    for iter in 0..params.iterations {
        if cancel() {
            return Err(ProjectionError::Canceled);
        }
        let exaggeration = if iter < params.exaggeration_iterations {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < params.momentum_switch {
            params.initial_momentum
        } else {
            params.final_momentum
        };
        let grad = gradient(&p, &y, exaggeration);
        for i in 0..n {
            for d in 0..2 {
                let g = grad[i][d];
                let u = update[i][d];
                gains[i][d] = if (g > 0.0) != (u > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(0.01)
                };
                update[i][d] = momentum * u - params.learning_rate * gains[i][d] * g;
                y[i][d] += update[i][d];
            }
        }
        recenter(&mut y);
        let done = iter + 1;
        if done % KL_CHECKPOINT_EVERY == 0 || done == params.iterations {
            kl_trace.push(KlCheckpoint {
                iteration: done,
                kl: kl_divergence(&p, &y),
            });
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }
    Ok(TsneOutput {
        coords: y,
        kl_trace,
        unconverged_rows: p.unconverged_rows,
    })
}

fn recenter(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let cx = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = y.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in y.iter_mut() {
        p[0] -= cx;
        p[1] -= cy;
    }
}
