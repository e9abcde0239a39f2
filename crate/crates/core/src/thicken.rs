//! The rotated self-convolution `Y^U_± = (X ± U X') / √2`, the Gaussian
//! convolution `(X + G) / √2`, and streaming tail probability estimation.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::centroid::{support_zp_plus, SupportEstimate};
use crate::error::{invalid, Result};
use crate::orthogonal::{haar, Direction, OrthogonalMatrix};
use crate::rng::{RandomStream, CHUNK};
use crate::sampler::{sample_law, DistributionSpec, SampleBatch};
use crate::stats::{clopper_pearson, ols_slope, POLICY_CONFIDENCE, POLICY_SIGMAS, REPORT_CONFIDENCE};

/// Upper limit on streamed trials per estimate.
pub const MAX_TRIALS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThickenedSpec {
    pub base: DistributionSpec,
    pub rotation: OrthogonalMatrix,
    pub sign: Sign,
}

impl ThickenedSpec {
    pub fn new(base: DistributionSpec, rotation: OrthogonalMatrix, sign: Sign) -> Result<Self> {
        if rotation.dimension() != base.dimension {
            return invalid(format!(
                "rotation of dimension {} applied to a law of dimension {}",
                rotation.dimension(),
                base.dimension
            ));
        }
        Ok(Self { base, rotation, sign })
    }
}

/// Any law the samplers can draw from.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Base(DistributionSpec),
    Thickened(ThickenedSpec),
    /// `(X + G_n) / √2` with an independent standard Gaussian `G_n`.
    GaussianConvolved(DistributionSpec),
}

impl Law {
    pub fn dimension(&self) -> usize {
        self.base().dimension
    }

    pub fn base(&self) -> DistributionSpec {
        match self {
            Law::Base(s) | Law::GaussianConvolved(s) => *s,
            Law::Thickened(t) => t.base,
        }
    }

    pub(crate) fn kind_tag(&self) -> u8 {
        match self {
            Law::Base(_) => 0,
            Law::Thickened(ThickenedSpec { sign: Sign::Plus, .. }) => 1,
            Law::Thickened(ThickenedSpec { sign: Sign::Minus, .. }) => 2,
            Law::GaussianConvolved(_) => 3,
        }
    }

    pub(crate) fn scratch(&self) -> Vec<f64> {
        vec![0.0; 2 * self.dimension()]
    }

    pub(crate) fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut [f64], out: &mut [f64]) {
        match self {
            Law::Base(spec) => spec.draw_into(rng, out),
            Law::Thickened(t) => {
                let n = t.base.dimension;
                let (x2, ux2) = scratch.split_at_mut(n);
                t.base.draw_into(rng, out);
                t.base.draw_into(rng, x2);
                t.rotation.apply_into(x2, ux2);
                let s = t.sign.factor();
                for (o, v) in out.iter_mut().zip(ux2.iter()) {
                    *o = (*o + s * v) * FRAC_1_SQRT_2;
                }
            }
            Law::GaussianConvolved(spec) => {
                spec.draw_into(rng, out);
                for o in out.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *o = (*o + g) * FRAC_1_SQRT_2;
                }
            }
        }
    }
}

pub fn sample_thickened(spec: &ThickenedSpec, count: usize, stream: RandomStream) -> Result<SampleBatch> {
    if spec.rotation.dimension() != spec.base.dimension {
        return invalid("rotation dimension does not match the base law");
    }
    sample_law(&Law::Thickened(spec.clone()), count, stream)
}

pub fn sample_gaussian_convolved(base: DistributionSpec, count: usize, stream: RandomStream) -> Result<SampleBatch> {
    sample_law(&Law::GaussianConvolved(base), count, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `|X| ≥ threshold`
    AtLeast,
    /// `|X| ≤ threshold`
    AtMost,
}

impl Side {
    fn holds(self, norm: f64, threshold: f64) -> bool {
        match self {
            Side::AtLeast => norm >= threshold,
            Side::AtMost => norm <= threshold,
        }
    }
}

/// Binomial estimate of a norm event, with its 95% Clopper–Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub threshold: f64,
    pub side: Side,
    pub hits: u64,
    pub trials: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TailEstimate {
    pub fn new(threshold: f64, side: Side, hits: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = clopper_pearson(hits, trials, REPORT_CONFIDENCE);
        Self {
            threshold,
            side,
            hits,
            trials,
            ci_low,
            ci_high,
        }
    }

    pub fn estimate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    pub fn stderr(&self) -> f64 {
        crate::stats::proportion_stderr(self.hits, self.trials)
    }

    /// Clopper–Pearson interval at an arbitrary confidence level.
    pub fn interval(&self, confidence: f64) -> (f64, f64) {
        clopper_pearson(self.hits, self.trials, confidence)
    }

    /// Interval used when deciding inequalities.
    pub fn policy_interval(&self) -> (f64, f64) {
        self.interval(POLICY_CONFIDENCE)
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 || trials > MAX_TRIALS {
        return invalid(format!("trials must lie in [1, {MAX_TRIALS}]"));
    }
    Ok(())
}

/// Streams `trials` draws of `law`, calling `tally(|x|, hits)` for each.
/// Block `b` of `CHUNK` trials uses `stream.child(b)`; counts are summed.
fn stream_norms(
    law: &Law,
    trials: u64,
    stream: RandomStream,
    slots: usize,
    tally: impl Fn(f64, &mut [u64]) + Sync,
) -> Vec<u64> {
    let n = law.dimension();
    let blocks = (trials as usize).div_ceil(CHUNK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = CHUNK.min(trials as usize - b * CHUNK);
            let mut rng = stream.child(b as u64).rng();
            let mut scratch = law.scratch();
            let mut x = vec![0.0; n];
            let mut hits = vec![0u64; slots];
            for _ in 0..len {
                law.draw_into(&mut rng, &mut scratch, &mut x);
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                tally(norm, &mut hits);
            }
            hits
        })
        .reduce(
            || vec![0; slots],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        )
}

/// Estimates `P(|X| ≥ r)` or `P(|X| ≤ r)` without materializing draws.
pub fn tail_estimate(law: &Law, threshold: f64, side: Side, trials: u64, stream: RandomStream) -> Result<TailEstimate> {
    Ok(tail_estimates(law, &[threshold], side, trials, stream)?.remove(0))
}

/// Several thresholds evaluated on the same stream of draws.
pub fn tail_estimates(
    law: &Law,
    thresholds: &[f64],
    side: Side,
    trials: u64,
    stream: RandomStream,
) -> Result<Vec<TailEstimate>> {
    check_trials(trials)?;
    if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0)) {
        return invalid(format!("threshold {t} must be non-negative"));
    }
    let hits = stream_norms(law, trials, stream, thresholds.len(), |norm, hits| {
        for (h, &t) in hits.iter_mut().zip(thresholds) {
            if side.holds(norm, t) {
                *h += 1;
            }
        }
    });
    Ok(thresholds
        .iter()
        .zip(hits)
        .map(|(&t, h)| TailEstimate::new(t, side, h, trials))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferenceCheck {
    pub lhs: TailEstimate,
    pub plus: TailEstimate,
    pub minus: TailEstimate,
    /// `(2 · max(upper_+, upper_−))^{1/2}` from the policy-level upper limits.
    pub rhs_bound: f64,
    pub ok_within_ci: bool,
}

/// Compares `P(|X| ≥ (1+t)√n)` (or `P(|X| ≤ (1−t)√n)`) with
/// `(2 max_± P(|Y^U_±| …))^{1/2}`. The three probabilities use streams
/// `child(0)`, `child(1)`, `child(2)`.
pub fn transference_check(
    base: DistributionSpec,
    rotation: &OrthogonalMatrix,
    t: f64,
    side: Side,
    trials: u64,
    stream: RandomStream,
) -> Result<TransferenceCheck> {
    let root_n = (base.dimension as f64).sqrt();
    let threshold = match side {
        Side::AtLeast if t >= 0.0 => (1.0 + t) * root_n,
        Side::AtMost if (0.0..=1.0).contains(&t) => (1.0 - t) * root_n,
        _ => return invalid(format!("t = {t} out of range for {side:?}")),
    };
    let plus = Law::Thickened(ThickenedSpec::new(base, rotation.clone(), Sign::Plus)?);
    let minus = Law::Thickened(ThickenedSpec::new(base, rotation.clone(), Sign::Minus)?);
    let lhs = tail_estimate(&Law::Base(base), threshold, side, trials, stream.child(0))?;
    let plus = tail_estimate(&plus, threshold, side, trials, stream.child(1))?;
    let minus = tail_estimate(&minus, threshold, side, trials, stream.child(2))?;
    let upper = plus.policy_interval().1.max(minus.policy_interval().1);
    let rhs_bound = (2.0 * upper).sqrt();
    Ok(TransferenceCheck {
        ok_within_ci: lhs.policy_interval().0 <= rhs_bound,
        lhs,
        plus,
        minus,
        rhs_bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationCurve {
    pub t: Vec<f64>,
    /// Estimates of `P(| |X| − √n | ≥ t√n)`.
    pub tails: Vec<TailEstimate>,
    /// `max_{j ≥ k}` of the estimates: non-increasing in `t`.
    pub envelope: Vec<f64>,
}

/// Two-sided thin-shell deviation probabilities, all grid points sharing one
/// stream of draws.
pub fn deviation_curve(law: &Law, t_grid: &[f64], trials: u64, stream: RandomStream) -> Result<DeviationCurve> {
    check_trials(trials)?;
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0)) {
        return invalid(format!("deviation level {t} must be non-negative"));
    }
    let root_n = (law.dimension() as f64).sqrt();
    let hits = stream_norms(law, trials, stream, t_grid.len(), |norm, hits| {
        let dev = (norm - root_n).abs();
        for (h, &t) in hits.iter_mut().zip(t_grid) {
            if dev >= t * root_n {
                *h += 1;
            }
        }
    });
    let tails: Vec<TailEstimate> = t_grid
        .iter()
        .zip(hits)
        .map(|(&t, h)| TailEstimate::new(t * root_n, Side::AtLeast, h, trials))
        .collect();
    let mut envelope = vec![0.0; tails.len()];
    let mut running = 0.0f64;
    for k in (0..tails.len()).rev() {
        running = running.max(tails[k].estimate());
        envelope[k] = running;
    }
    Ok(DeviationCurve {
        t: t_grid.to_vec(),
        tails,
        envelope,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallBallCurve {
    pub eps: Vec<f64>,
    /// Estimates of `P(|X| ≤ ε√n)`.
    pub tails: Vec<TailEstimate>,
    /// Least-squares slope of `ln P̂` against `ln ε` over points with hits.
    pub slope: Option<f64>,
}

pub fn small_ball_curve(law: &Law, eps_grid: &[f64], trials: u64, stream: RandomStream) -> Result<SmallBallCurve> {
    if let Some(e) = eps_grid.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return invalid(format!("small-ball radius {e} outside (0, 1]"));
    }
    let root_n = (law.dimension() as f64).sqrt();
    let thresholds: Vec<f64> = eps_grid.iter().map(|e| e * root_n).collect();
    let tails = tail_estimates(law, &thresholds, Side::AtMost, trials, stream)?;
    let (lx, ly): (Vec<f64>, Vec<f64>) = eps_grid
        .iter()
        .zip(&tails)
        .filter(|(_, t)| t.hits > 0)
        .map(|(e, t)| (e.ln(), t.estimate().ln()))
        .unzip();
    Ok(SmallBallCurve {
        eps: eps_grid.to_vec(),
        tails,
        slope: ols_slope(&lx, &ly),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorRow {
    pub t: f64,
    /// `P(|(X+G)/√2| ≤ √(((1−t)²+1)/2) √n)`, the Gaussian-convolution bound with constant 1.
    pub floor_bound: f64,
    pub floor: TailEstimate,
    /// `(2 max_± P(|Y^U_±| ≤ (1−t)√n))^{1/2}`
    pub thm1_bound: f64,
    pub plus: TailEstimate,
    pub minus: TailEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorTable {
    pub rotation_fingerprint: String,
    pub rows: Vec<FloorRow>,
}

/// Small-ball transfer bounds from Gaussian convolution versus rotated
/// self-convolution. The rotation comes from `stream.child(0)`; the three
/// laws are streamed from `child(1..=3)`.
pub fn gaussian_floor_demo(
    base: DistributionSpec,
    t_grid: &[f64],
    trials: u64,
    stream: RandomStream,
) -> Result<FloorTable> {
    if let Some(t) = t_grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return invalid(format!("t = {t} outside [0, 1]"));
    }
    let n = base.dimension;
    let root_n = (n as f64).sqrt();
    let rotation = haar(n, stream.child(0))?;
    let floor_thr: Vec<f64> = t_grid
        .iter()
        .map(|t| (((1.0 - t).powi(2) + 1.0) / 2.0).sqrt() * root_n)
        .collect();
    let thm_thr: Vec<f64> = t_grid.iter().map(|t| (1.0 - t) * root_n).collect();
    let floor = tail_estimates(&Law::GaussianConvolved(base), &floor_thr, Side::AtMost, trials, stream.child(1))?;
    let plus_law = Law::Thickened(ThickenedSpec::new(base, rotation.clone(), Sign::Plus)?);
    let minus_law = Law::Thickened(ThickenedSpec::new(base, rotation.clone(), Sign::Minus)?);
    let plus = tail_estimates(&plus_law, &thm_thr, Side::AtMost, trials, stream.child(2))?;
    let minus = tail_estimates(&minus_law, &thm_thr, Side::AtMost, trials, stream.child(3))?;
    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| FloorRow {
            t,
            floor_bound: floor[k].estimate(),
            floor: floor[k],
            thm1_bound: (2.0 * plus[k].estimate().max(minus[k].estimate())).sqrt(),
            plus: plus[k],
            minus: minus[k],
        })
        .collect();
    Ok(FloorTable {
        rotation_fingerprint: rotation.fingerprint(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiLowerBound {
    /// `h_{Z_p^+(Y)}(θ)`
    pub lhs: SupportEstimate,
    /// `(h_{Z_p^+(X)}(θ) + h_{Z_p^+(X)}(Uᵀθ)) / (2√2 e^{1/p})`
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// `lhs + 4·joint stderr ≥ rhs`
    pub ok_within_ci: bool,
}

/// Per-direction form of `Z_p^+(Y) ⊃ (Z_p^+(X) + U Z_p^+(X)) / (2√2 e^{1/p})`
/// for `Y = (X + U X')/√2`. `y_batch` must be drawn with the same `rotation`.
pub fn minkowski_lower_bound(
    y_batch: &SampleBatch,
    x_batch: &SampleBatch,
    rotation: &OrthogonalMatrix,
    theta: &Direction,
    p: f64,
) -> Result<MinkowskiLowerBound> {
    let lhs = support_zp_plus(y_batch, theta, p)?;
    let rotated = Direction::normalized(rotation.apply_transpose(theta.coords()))?;
    let a = support_zp_plus(x_batch, theta, p)?;
    let b = support_zp_plus(x_batch, &rotated, p)?;
    let c = 1.0 / (2.0 * std::f64::consts::SQRT_2 * (1.0 / p).exp());
    let rhs = c * (a.value + b.value);
    // a and b share a batch; add their errors linearly.
    let rhs_stderr = c * (a.stderr + b.stderr);
    let joint = (lhs.stderr.powi(2) + rhs_stderr.powi(2)).sqrt();
    Ok(MinkowskiLowerBound {
        ok_within_ci: lhs.value + POLICY_SIGMAS * joint >= rhs,
        lhs,
        rhs,
        rhs_stderr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeComparison {
    pub base: f64,
    pub thickened: f64,
    /// `thickened ≤ 2 · base`
    pub ok: bool,
}

/// Compares `max_θ h_{Z_p^+}(θ)/p^{1/α}` of a thickened batch with the base
/// batch's envelope over the same directions.
pub fn envelope_comparison(
    base_batch: &SampleBatch,
    thick_batch: &SampleBatch,
    p: f64,
    alpha: f64,
    directions: &[Direction],
) -> Result<EnvelopeComparison> {
    let base = crate::centroid::support_envelope(base_batch, p, alpha, directions)?;
    let thickened = crate::centroid::support_envelope(thick_batch, p, alpha, directions)?;
    Ok(EnvelopeComparison {
        base,
        thickened,
        ok: thickened <= 2.0 * base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{isotropy_report, Family};

    fn spec(f: Family, n: usize) -> DistributionSpec {
        DistributionSpec::new(f, n).unwrap()
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let u = OrthogonalMatrix::identity(3);
        assert!(ThickenedSpec::new(spec(Family::Cube, 4), u, Sign::Plus).is_err());
    }

    #[test]
    fn thickened_cube_on_the_line() {
        let t = ThickenedSpec::new(spec(Family::Cube, 1), OrthogonalMatrix::identity(1), Sign::Plus).unwrap();
        let b = sample_thickened(&t, 200_000, RandomStream::new(1, 0)).unwrap();
        let bound = 6f64.sqrt();
        assert!(b.data().iter().all(|v| v.abs() <= bound));
        let var = b.data().iter().map(|v| v * v).sum::<f64>() / b.count() as f64;
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn thickened_is_isotropic() {
        let base = spec(Family::LaplaceProduct, 4);
        let u = haar(4, RandomStream::new(2, 0)).unwrap();
        let t = ThickenedSpec::new(base, u, Sign::Minus).unwrap();
        let b = sample_thickened(&t, 200_000, RandomStream::new(2, 1)).unwrap();
        let rep = isotropy_report(&b).unwrap();
        assert!(rep.max_abs_mean < 0.015 && rep.max_cov_deviation < 0.03, "{rep:?}");
        assert!(matches!(b.law(), Some(Law::Thickened(_))));
    }

    #[test]
    fn convolved_cube_fourth_moment() {
        // E Y^4 = (E X^4 + 6 E X^2 E G^2 + E G^4) / 4 = (1.8 + 6 + 3) / 4 = 2.7
        let b = sample_gaussian_convolved(spec(Family::Cube, 1), 1_000_000, RandomStream::new(3, 0)).unwrap();
        let m4 = b.data().iter().map(|v| v.powi(4)).sum::<f64>() / b.count() as f64;
        assert!((m4 - 2.7).abs() < 0.05, "{m4}");
    }

    #[test]
    fn zero_threshold_is_certain() {
        let law = Law::Base(spec(Family::Ball, 3));
        let t = tail_estimate(&law, 0.0, Side::AtLeast, 1000, RandomStream::new(0, 0)).unwrap();
        assert_eq!(t.hits, 1000);
        assert_eq!(t.ci_high, 1.0);
        assert!(tail_estimate(&law, -1.0, Side::AtLeast, 10, RandomStream::new(0, 0)).is_err());
        assert!(tail_estimate(&law, 1.0, Side::AtLeast, 0, RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn tail_independent_of_thread_count() {
        let law = Law::Base(spec(Family::Gaussian, 5));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| tail_estimate(&law, 2.0, Side::AtMost, 50_000, RandomStream::new(8, 8)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn transference_argument_validation() {
        let u = OrthogonalMatrix::identity(2);
        let s = spec(Family::Cube, 2);
        assert!(transference_check(s, &u, 1.5, Side::AtMost, 10, RandomStream::new(0, 0)).is_err());
        assert!(transference_check(s, &u, -0.1, Side::AtLeast, 10, RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn deviation_curve_starts_at_one_and_is_monotone() {
        let law = Law::Base(spec(Family::Cube, 6));
        let c = deviation_curve(&law, &[0.0, 0.1, 0.2, 0.4], 20_000, RandomStream::new(1, 1)).unwrap();
        assert_eq!(c.tails[0].hits, 20_000);
        for w in c.tails.windows(2) {
            assert!(w[0].hits >= w[1].hits);
        }
        assert!(c.envelope.windows(2).all(|w| w[0] >= w[1]));
        assert!(deviation_curve(&law, &[-0.1], 10, RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn small_ball_rejects_bad_radius() {
        let law = Law::Base(spec(Family::Cube, 2));
        assert!(small_ball_curve(&law, &[0.0], 10, RandomStream::new(0, 0)).is_err());
        assert!(small_ball_curve(&law, &[1.1], 10, RandomStream::new(0, 0)).is_err());
        let c = small_ball_curve(&law, &[1e-9, 1.0], 1000, RandomStream::new(0, 0)).unwrap();
        assert_eq!(c.tails[0].hits, 0);
        assert_eq!(c.tails[0].ci_low, 0.0);
        assert!(c.slope.is_none());
    }

    #[test]
    fn floor_demo_zero_radius_row() {
        let table = gaussian_floor_demo(spec(Family::Gaussian, 4), &[1.0], 5000, RandomStream::new(0, 3)).unwrap();
        assert_eq!(table.rows[0].thm1_bound, 0.0);
        assert!(table.rows[0].floor_bound > 0.0);
        assert!(gaussian_floor_demo(spec(Family::Gaussian, 4), &[1.2], 10, RandomStream::new(0, 0)).is_err());
    }
}
