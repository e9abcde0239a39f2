//! Monte Carlo support functions of `L_p` centroid bodies.
//!
//! For a direction `θ` the estimators use the batch's projections
//! `s_i = ⟨x_i, θ⟩`:
//!
//! * `h_{Z_p}(θ)   = (mean |s_i|^p)^{1/p}`
//! * `h_{Z_p^+}(θ) = (2 · mean (s_i)_+^p)^{1/p}`
//!
//! Power sums are evaluated as `p·ln M + ln mean((|s_i|/M)^p)` with
//! `M = max |s_i|`, i.e. a log-sum-exp with the max factored out, so orders up
//! to `p = 128` do not overflow.

use rayon::prelude::*;

use crate::error::{invalid, LabError, Result};
use crate::orthogonal::{dot, random_direction, uniform_directions, Direction};
use crate::rng::{RandomStream, CHUNK};
use crate::sampler::SampleBatch;
use crate::special::ln_gamma;
use crate::stats::mean_sd;

/// Relative slack granted to inequalities that hold exactly on any measure.
pub const FLOAT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    pub value: f64,
    /// Delta-method standard error, `h · se(m_p) / (p · m_p)`.
    pub stderr: f64,
    pub p: f64,
    pub direction: Direction,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiEstimate {
    pub alpha: f64,
    pub constant: f64,
    pub argmax_p: f64,
    pub argmax_direction: Direction,
}

/// `(E|G_1|^p)^{1/p} = √2 (Γ((p+1)/2) / Γ(1/2))^{1/p}`.
pub fn gaussian_moment(p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid("moment order must be at least 1");
    }
    Ok((0.5 * std::f64::consts::LN_2 + (ln_gamma((p + 1.0) / 2.0) - ln_gamma(0.5)) / p).exp())
}

/// Projections `⟨x_i, θ⟩` of every row, in row order.
pub fn projections(batch: &SampleBatch, theta: &Direction) -> Result<Vec<f64>> {
    if theta.dimension() != batch.dimension() {
        return invalid(format!(
            "direction has dimension {} but batch has {}",
            theta.dimension(),
            batch.dimension()
        ));
    }
    let n = batch.dimension();
    let t = theta.coords();
    let mut out = vec![0.0; batch.count()];
    out.par_chunks_mut(CHUNK)
        .zip(batch.data().par_chunks(CHUNK * n))
        .for_each(|(dst, src)| {
            for (o, row) in dst.iter_mut().zip(src.chunks_exact(n)) {
                *o = dot(row, t);
            }
        });
    Ok(out)
}

/// `ln mean(v_i^p)` and the relative standard error of `mean(v_i^p)`, for
/// non-negative `v`. `None` when every value is zero.
fn ln_power_mean(values: impl Iterator<Item = f64> + Clone, p: f64) -> Option<(f64, f64)> {
    let (count, max) = values.clone().fold((0usize, 0.0f64), |(c, m), v| (c + 1, m.max(v)));
    if max == 0.0 {
        return None;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for v in values {
        let t = (v / max).powf(p);
        s1 += t;
        s2 += t * t;
    }
    let c = count as f64;
    let mean = s1 / c;
    let var = ((s2 / c - mean * mean) * c / (c - 1.0)).max(0.0);
    Some((p * max.ln() + mean.ln(), (var / c).sqrt() / mean))
}

fn check_order(batch: &SampleBatch, p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("moment order {p} must be a finite number >= 1"));
    }
    if batch.count() < 2 {
        return invalid("support estimates need at least two rows");
    }
    Ok(())
}

fn from_projections(
    proj: &[f64],
    theta: &Direction,
    p: f64,
    one_sided: bool,
) -> Result<SupportEstimate> {
    let estimate = |value: f64, stderr: f64| SupportEstimate {
        value,
        stderr,
        p,
        direction: theta.clone(),
        count: proj.len(),
    };
    if proj.iter().all(|s| *s == 0.0) {
        return Err(LabError::DegenerateEstimate(
            "every projection onto the direction is zero".into(),
        ));
    }
    let moment = if one_sided {
        ln_power_mean(proj.iter().map(|s| s.max(0.0)), p)
            .map(|(ln_m, rel)| (ln_m + std::f64::consts::LN_2, rel))
    } else {
        ln_power_mean(proj.iter().map(|s| s.abs()), p)
    };
    Ok(match moment {
        Some((ln_m, rel)) => {
            let h = (ln_m / p).exp();
            estimate(h, h * rel / p)
        }
        // no positive mass on this side
        None => estimate(0.0, 0.0),
    })
}

/// Plug-in estimate of `h_{Z_p}(θ)`.
pub fn support_zp(batch: &SampleBatch, theta: &Direction, p: f64) -> Result<SupportEstimate> {
    check_order(batch, p)?;
    from_projections(&projections(batch, theta)?, theta, p, false)
}

/// Plug-in estimate of the one-sided `h_{Z_p^+}(θ)`.
pub fn support_zp_plus(batch: &SampleBatch, theta: &Direction, p: f64) -> Result<SupportEstimate> {
    check_order(batch, p)?;
    from_projections(&projections(batch, theta)?, theta, p, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperGaussianRatio {
    /// `h_{Z_p^+}(θ) / (E|G_1|^p)^{1/p}`
    pub ratio: f64,
    /// `h_{Z_p^+}(θ) / √p`
    pub ratio_sqrtp: f64,
    pub support: SupportEstimate,
}

pub fn super_gaussian_ratio(batch: &SampleBatch, theta: &Direction, p: f64) -> Result<SuperGaussianRatio> {
    let support = support_zp_plus(batch, theta, p)?;
    Ok(SuperGaussianRatio {
        ratio: support.value / gaussian_moment(p)?,
        ratio_sqrtp: support.value / p.sqrt(),
        support,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstDirection {
    pub direction: Direction,
    pub ratio_sqrtp: f64,
    pub estimate: SupportEstimate,
    pub evaluations: usize,
}

/// Initial step of the spherical perturbation search.
const SEARCH_STEP: f64 = 0.5;
/// Consecutive rejected proposals before the step is halved.
const SEARCH_PATIENCE: usize = 20;

/// Searches for the direction minimizing `h_{Z_p^+}(θ)/√p`.
///
/// Each of the `restarts` runs starts from a uniform direction drawn from
/// `stream.child(r)` and performs `steps` greedy perturbation proposals. The
/// result is the lowest value seen, hence an upper bound on the infimum.
pub fn worst_direction(
    batch: &SampleBatch,
    p: f64,
    restarts: usize,
    steps: usize,
    stream: RandomStream,
) -> Result<WorstDirection> {
    if restarts == 0 || steps == 0 {
        return invalid("restarts and steps must be positive");
    }
    check_order(batch, p)?;
    let n = batch.dimension();
    let sqrt_p = p.sqrt();
    let runs: Vec<Result<WorstDirection>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.child(r as u64).rng();
            let mut theta = random_direction(n, &mut rng);
            let mut best = support_zp_plus(batch, &theta, p)?;
            let mut step = SEARCH_STEP;
            let mut rejected = 0;
            for _ in 0..steps {
                let z = random_direction(n, &mut rng);
                let moved: Vec<f64> = theta
                    .coords()
                    .iter()
                    .zip(z.coords())
                    .map(|(t, d)| t + step * d)
                    .collect();
                let candidate = match Direction::normalized(moved) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                let est = support_zp_plus(batch, &candidate, p)?;
                if est.value < best.value {
                    theta = candidate;
                    best = est;
                    rejected = 0;
                } else {
                    rejected += 1;
                    if rejected == SEARCH_PATIENCE {
                        step /= 2.0;
                        rejected = 0;
                    }
                }
            }
            Ok(WorstDirection {
                direction: theta,
                ratio_sqrtp: best.value / sqrt_p,
                estimate: best,
                evaluations: steps + 1,
            })
        })
        .collect();
    let mut best: Option<WorstDirection> = None;
    let mut evaluations = 0;
    for run in runs {
        let run = run?;
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|b| run.ratio_sqrtp < b.ratio_sqrtp) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.evaluations = evaluations;
    Ok(best)
}

/// Largest observed `h_{Z_p}(θ) / (p^{1/α} h_{Z_2}(θ))` over the grid and
/// `direction_count` uniform directions; a lower bound on the `ψ_α` constant.
pub fn psi_alpha_estimate(
    batch: &SampleBatch,
    alpha: f64,
    p_grid: &[f64],
    direction_count: usize,
    stream: RandomStream,
) -> Result<PsiEstimate> {
    if p_grid.is_empty() {
        return invalid("empty p grid");
    }
    if let Some(p) = p_grid.iter().find(|p| !(**p >= 2.0)) {
        return invalid(format!("p grid value {p} below 2"));
    }
    if !(alpha > 0.0) || direction_count == 0 {
        return invalid("alpha and direction count must be positive");
    }
    check_order(batch, 2.0)?;
    let dirs = uniform_directions(batch.dimension(), direction_count, stream)?;
    let mut best: Option<PsiEstimate> = None;
    for theta in dirs {
        let proj = projections(batch, &theta)?;
        let h2 = from_projections(&proj, &theta, 2.0, false)?.value;
        for &p in p_grid {
            let hp = from_projections(&proj, &theta, p, false)?.value;
            let d = hp / (p.powf(1.0 / alpha) * h2);
            if best.as_ref().is_none_or(|b| d > b.constant) {
                best = Some(PsiEstimate {
                    alpha,
                    constant: d,
                    argmax_p: p,
                    argmax_direction: theta.clone(),
                });
            }
        }
    }
    Ok(best.expect("non-empty grid and directions"))
}

/// The dyadic orders `2, 4, …, 2^k` not exceeding `max_p`.
pub fn dyadic_grid(max_p: f64) -> Vec<f64> {
    std::iter::successors(Some(2.0), |p| Some(p * 2.0))
        .take_while(|p| *p <= max_p)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerwaldCheck {
    pub h_p: f64,
    pub h_q: f64,
    /// `h_p ≤ h_q` (power-mean inequality, exact on the empirical measure).
    pub mono_ok: bool,
    /// `h_q / (h_p · q/p)`, the reverse-inclusion constant.
    pub ratio: f64,
}

pub fn berwald_check(batch: &SampleBatch, theta: &Direction, p: f64, q: f64) -> Result<BerwaldCheck> {
    if !(p >= 1.0) || !(p <= q) {
        return invalid(format!("need 1 <= p <= q, got p={p}, q={q}"));
    }
    check_order(batch, q)?;
    let proj = projections(batch, theta)?;
    let h_p = from_projections(&proj, theta, p, false)?.value;
    let h_q = from_projections(&proj, theta, q, false)?.value;
    Ok(BerwaldCheck {
        h_p,
        h_q,
        mono_ok: h_p <= h_q * (1.0 + FLOAT_SLACK),
        ratio: h_q / (h_p * q / p),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanWidth {
    pub w: f64,
    pub stderr: f64,
}

/// `W(Z_p) ≈ 2 · mean_k h_{Z_p}(θ_k)` over uniform directions.
///
/// The standard error combines the spread across directions with the
/// per-direction sampling error, the latter treated as fully correlated
/// (all directions share the batch).
pub fn mean_width_zp(
    batch: &SampleBatch,
    p: f64,
    direction_count: usize,
    stream: RandomStream,
) -> Result<MeanWidth> {
    if direction_count < 10 {
        return invalid("mean width needs at least 10 directions");
    }
    check_order(batch, p)?;
    let dirs = uniform_directions(batch.dimension(), direction_count, stream)?;
    let mut values = Vec::with_capacity(dirs.len());
    let mut sample_se = 0.0;
    for theta in &dirs {
        let est = support_zp(batch, theta, p)?;
        values.push(est.value);
        sample_se += est.stderr;
    }
    let d = dirs.len() as f64;
    let (mean, sd) = mean_sd(&values);
    sample_se /= d;
    Ok(MeanWidth {
        w: 2.0 * mean,
        stderr: 2.0 * ((sd * sd) / d + sample_se * sample_se).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrivialInclusion {
    pub h: f64,
    pub h_plus: f64,
    pub h_plus_neg: f64,
    /// `h_{Z_p^+}(θ) ≤ 2^{1/p} h_{Z_p}(θ)`
    pub left_ok: bool,
    /// `2^{1/p} h_{Z_p}(θ) ≤ h_{Z_p^+}(θ) + h_{Z_p^+}(−θ)`
    pub right_ok: bool,
}

/// Checks `Z_p^+ ⊂ 2^{1/p} Z_p ⊂ Z_p^+ − Z_p^+` along `θ` on one batch.
/// Both inclusions hold for every probability measure, so only floating-point
/// slack is allowed.
pub fn trivial_inclusion_check(batch: &SampleBatch, theta: &Direction, p: f64) -> Result<TrivialInclusion> {
    check_order(batch, p)?;
    let proj = projections(batch, theta)?;
    let h = from_projections(&proj, theta, p, false)?.value;
    let h_plus = from_projections(&proj, theta, p, true)?.value;
    let neg: Vec<f64> = proj.iter().map(|s| -s).collect();
    let h_plus_neg = from_projections(&neg, &theta.neg(), p, true)?.value;
    let mid = 2f64.powf(1.0 / p) * h;
    Ok(TrivialInclusion {
        h,
        h_plus,
        h_plus_neg,
        left_ok: h_plus <= mid * (1.0 + FLOAT_SLACK),
        right_ok: mid <= (h_plus + h_plus_neg) * (1.0 + FLOAT_SLACK),
    })
}

/// Fraction of rows with `⟨x, θ⟩ ≥ 0`, with its binomial standard error.
pub fn marginal_positive_mass(batch: &SampleBatch, theta: &Direction) -> Result<(f64, f64)> {
    let proj = projections(batch, theta)?;
    let c = proj.len() as f64;
    let frac = proj.iter().filter(|s| **s >= 0.0).count() as f64 / c;
    Ok((frac, (frac * (1.0 - frac) / c).sqrt()))
}

/// Sample mean of `⟨x, θ⟩^k` with its standard error.
pub fn directional_moment(batch: &SampleBatch, theta: &Direction, k: i32) -> Result<(f64, f64)> {
    let proj = projections(batch, theta)?;
    let powers: Vec<f64> = proj.iter().map(|s| s.powi(k)).collect();
    let (mean, sd) = mean_sd(&powers);
    Ok((mean, sd / (powers.len() as f64).sqrt()))
}

/// `max_k h_{Z_p^+}(θ_k) / p^{1/α}` over the given directions.
pub fn support_envelope(batch: &SampleBatch, p: f64, alpha: f64, directions: &[Direction]) -> Result<f64> {
    let mut worst = 0.0f64;
    for theta in directions {
        worst = worst.max(support_zp_plus(batch, theta, p)?.value);
    }
    Ok(worst / p.powf(1.0 / alpha))
}
