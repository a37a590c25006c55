//! Reference numerics for the training objectives.
//!
//! Two losses are implemented exactly as used during model adaptation: the
//! autoregressive cross-entropy over target tokens and the KL divergence
//! that keeps an adapted decoder's distribution near the pre-trained one.
//! Natural logarithms throughout. No parameters, no optimizer — these exist
//! so dataset experiments can sanity-check loss values, plus a
//! finite-difference harness that verifies the closed-form gradients of
//! both losses through softmax.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sampling::SplitMix64;

/// Output distribution over a vocabulary at one decoding step.
///
/// Entries must be strictly positive (callers holding hard zeros should mix
/// in a floor, e.g. 1e-12, before constructing) and sum to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    probabilities: Vec<f64>,
}

impl StepDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidInput("empty distribution".to_string()));
        }
        if let Some(&bad) = probabilities.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "probability {bad} outside (0, 1]"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(vocab_size: usize) -> Self {
        Self {
            probabilities: vec![1.0 / vocab_size as f64; vocab_size],
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn vocab_size(&self) -> usize {
        self.probabilities.len()
    }
}

/// A scored decoding: per-step output distributions and the target token at
/// each step. `context_id` stands in for the conditioning input, which
/// plays no computational role here.
#[derive(Debug, Clone)]
pub struct ObjectiveInput {
    pub context_id: String,
    pub step_distributions: Vec<StepDistribution>,
    pub targets: Vec<usize>,
}

impl ObjectiveInput {
    pub fn new(
        context_id: impl Into<String>,
        step_distributions: Vec<StepDistribution>,
        targets: Vec<usize>,
    ) -> Result<Self> {
        if step_distributions.len() != targets.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} step distributions vs {} targets",
                step_distributions.len(),
                targets.len()
            )));
        }
        for (t, (dist, &target)) in step_distributions.iter().zip(&targets).enumerate() {
            if target >= dist.vocab_size() {
                return Err(Error::InvalidInput(format!(
                    "step {t}: target {target} outside vocabulary of size {}",
                    dist.vocab_size()
                )));
            }
        }
        Ok(Self {
            context_id: context_id.into(),
            step_distributions,
            targets,
        })
    }
}

/// Autoregressive cross-entropy: `-Σ_t ln P_t(target_t)`.
///
/// Zero-probability targets cannot occur: [`StepDistribution`] rejects
/// non-positive mass at construction.
pub fn cross_entropy(input: &ObjectiveInput) -> f64 {
    input
        .step_distributions
        .iter()
        .zip(&input.targets)
        .map(|(dist, &target)| -dist.probabilities()[target].ln())
        .sum()
}

/// KL divergence summed over steps: `Σ_t Σ_y new_t(y)·ln(new_t(y)/old_t(y))`.
///
/// `new` is the adapted decoder's distribution, `old` the pre-trained one.
pub fn kl_divergence(new: &[StepDistribution], old: &[StepDistribution]) -> Result<f64> {
    if new.len() != old.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} new steps vs {} old steps",
            new.len(),
            old.len()
        )));
    }
    let mut total = 0.0;
    for (t, (n, o)) in new.iter().zip(old).enumerate() {
        if n.vocab_size() != o.vocab_size() {
            return Err(Error::ShapeMismatch(format!(
                "step {t}: vocabulary {} vs {}",
                n.vocab_size(),
                o.vocab_size()
            )));
        }
        total += n
            .probabilities()
            .iter()
            .zip(o.probabilities())
            .map(|(&p, &q)| p * (p / q).ln())
            .sum::<f64>();
    }
    Ok(total)
}

/// Weighted sum of named loss terms. Terms without an entry in `weights`
/// get weight 1.
pub fn combined_loss(terms: &[(&str, f64)], weights: &HashMap<String, f64>) -> f64 {
    terms
        .iter()
        .map(|(name, value)| weights.get(*name).copied().unwrap_or(1.0) * value)
        .sum()
}

/// Numerically stable (max-shifted) softmax.
pub fn softmax(logits: &[f64]) -> Result<StepDistribution> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("empty logits".to_string()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite logit".to_string()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    StepDistribution::new(exps.into_iter().map(|e| e / sum).collect())
}

/// Maximum componentwise relative error between `analytic_grad` and the
/// central-difference gradient of `loss_fn` at `logits`.
///
/// The relative error denominator is `max(|analytic|, |numeric|, 1e-12)`.
pub fn finite_diff_check(
    loss_fn: impl Fn(&[f64]) -> Result<f64>,
    logits: &[f64],
    analytic_grad: &[f64],
    eps: f64,
) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::InvalidInput(format!("eps {eps} must be positive")));
    }
    if analytic_grad.len() != logits.len() {
        return Err(Error::LengthMismatch {
            what: "analytic gradient",
            expected: logits.len(),
            actual: analytic_grad.len(),
        });
    }
    let mut probe = logits.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..logits.len() {
        probe[i] = logits[i] + eps;
        let plus = loss_fn(&probe)?;
        probe[i] = logits[i] - eps;
        let minus = loss_fn(&probe)?;
        probe[i] = logits[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = analytic_grad[i];
        let denom = analytic.abs().max(numeric.abs()).max(1e-12);
        max_rel = max_rel.max((analytic - numeric).abs() / denom);
    }
    Ok(max_rel)
}

/// Closed-form gradient of per-step `cross_entropy ∘ softmax` with respect
/// to the flattened logits: `softmax(logits) − onehot(target)` per step.
pub fn cross_entropy_softmax_grad(
    flat_logits: &[f64],
    vocab_size: usize,
    targets: &[usize],
) -> Result<Vec<f64>> {
    if flat_logits.len() != vocab_size * targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logits vs {} steps of vocabulary {}",
            flat_logits.len(),
            targets.len(),
            vocab_size
        )));
    }
    let mut grad = Vec::with_capacity(flat_logits.len());
    for (step, &target) in targets.iter().enumerate() {
        let dist = softmax(&flat_logits[step * vocab_size..(step + 1) * vocab_size])?;
        for (y, &p) in dist.probabilities().iter().enumerate() {
            grad.push(if y == target { p - 1.0 } else { p });
        }
    }
    Ok(grad)
}

/// Closed-form gradient of `kl_divergence(softmax(logits), old)` with
/// respect to the logits: `p_i · (ln(p_i/old_i) − KL)`.
pub fn kl_softmax_grad(new_logits: &[f64], old: &StepDistribution) -> Result<Vec<f64>> {
    if new_logits.len() != old.vocab_size() {
        return Err(Error::ShapeMismatch(format!(
            "{} logits vs vocabulary {}",
            new_logits.len(),
            old.vocab_size()
        )));
    }
    let new = softmax(new_logits)?;
    let kl = kl_divergence(std::slice::from_ref(&new), std::slice::from_ref(old))?;
    Ok(new
        .probabilities()
        .iter()
        .zip(old.probabilities())
        .map(|(&p, &q)| p * ((p / q).ln() - kl))
        .collect())
}

/// Cross-entropy of flattened per-step logits against targets, the loss
/// side of the gradient checks.
pub fn cross_entropy_from_logits(
    flat_logits: &[f64],
    vocab_size: usize,
    targets: &[usize],
) -> Result<f64> {
    if flat_logits.len() != vocab_size * targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logits vs {} steps of vocabulary {}",
            flat_logits.len(),
            targets.len(),
            vocab_size
        )));
    }
    let mut dists = Vec::with_capacity(targets.len());
    for step in 0..targets.len() {
        dists.push(softmax(
            &flat_logits[step * vocab_size..(step + 1) * vocab_size],
        )?);
    }
    let input = ObjectiveInput::new("grad-check", dists, targets.to_vec())?;
    Ok(cross_entropy(&input))
}

/// Worst relative errors seen by the finite-difference suite.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientSuiteReport {
    pub cross_entropy_max_rel_error: f64,
    pub kl_max_rel_error: f64,
    pub seeds_run: usize,
}

fn uniform_in(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + unit * (hi - lo)
}

/// Run the finite-difference checks for both losses at randomly drawn,
/// well-conditioned probe points (logits in [-2, 2], `T`=3, `V`=5), one
/// problem per seed, and report the worst relative errors.
pub fn run_gradient_suite(
    seeds: impl IntoIterator<Item = u64>,
    eps: f64,
) -> Result<GradientSuiteReport> {
    const TIME_STEPS: usize = 3;
    const VOCAB: usize = 5;

    let mut report = GradientSuiteReport::default();
    for seed in seeds {
        let mut rng = SplitMix64::new(seed);

        let flat_logits: Vec<f64> = (0..TIME_STEPS * VOCAB)
            .map(|_| uniform_in(&mut rng, -2.0, 2.0))
            .collect();
        let targets: Vec<usize> = (0..TIME_STEPS).map(|_| rng.next_index(VOCAB)).collect();
        let analytic = cross_entropy_softmax_grad(&flat_logits, VOCAB, &targets)?;
        let ce_err = finite_diff_check(
            |logits| cross_entropy_from_logits(logits, VOCAB, &targets),
            &flat_logits,
            &analytic,
            eps,
        )?;
        report.cross_entropy_max_rel_error = report.cross_entropy_max_rel_error.max(ce_err);

        let old_logits: Vec<f64> = (0..VOCAB)
            .map(|_| uniform_in(&mut rng, -2.0, 2.0))
            .collect();
        let old = softmax(&old_logits)?;
        let new_logits: Vec<f64> = (0..VOCAB)
            .map(|_| uniform_in(&mut rng, -2.0, 2.0))
            .collect();
        let analytic = kl_softmax_grad(&new_logits, &old)?;
        let kl_err = finite_diff_check(
            |logits| {
                kl_divergence(
                    std::slice::from_ref(&softmax(logits)?),
                    std::slice::from_ref(&old),
                )
            },
            &new_logits,
            &analytic,
            eps,
        )?;
        report.kl_max_rel_error = report.kl_max_rel_error.max(kl_err);
        report.seeds_run += 1;
    }
    Ok(report)
}
