//! Haar-distributed rotations and spherical caps.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::{chunk_count, RandomStream, CHUNK};
use crate::special::beta_reg;
use crate::stats::{clopper_pearson, REPORT_CONFIDENCE};

/// A unit vector in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`; fails on the zero vector.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if v.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return invalid("cannot normalize a zero or non-finite vector");
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(Direction(v))
    }

    /// The `i`-th standard basis vector of `R^n`.
    pub fn axis(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return invalid(format!("axis {i} out of range for dimension {n}"));
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Ok(Direction(v))
    }

    /// Unit vector at `angle` radians in the plane.
    pub fn planar(angle: f64) -> Self {
        Direction(vec![angle.cos(), angle.sin()])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn neg(&self) -> Direction {
        Direction(self.0.iter().map(|x| -x).collect())
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        dot(&self.0, v)
    }

    /// Angle to `other`, in `[0, π]`.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.dot(&other.0).clamp(-1.0, 1.0).acos()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A random unit vector (normalized Gaussian).
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Direction {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(d) = Direction::normalized(v) {
            return d;
        }
    }
}

/// An `n × n` orthogonal matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl OrthogonalMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// Accepts row-major entries if they pass the orthogonality tolerance.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return invalid("entries must form a non-empty square matrix");
        }
        let m = Self { n, entries };
        if m.orthogonality_defect() > 1e-10 {
            return invalid("matrix is not orthogonal");
        }
        Ok(m)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// `out = U v`
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.n)) {
            *o = dot(row, v);
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(v, &mut out);
        out
    }

    /// `Uᵀ v`
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &vi) in self.entries.chunks_exact(self.n).zip(v) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += r * vi;
            }
        }
        out
    }

    pub fn transpose(&self) -> OrthogonalMatrix {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        OrthogonalMatrix { n, entries }
    }

    pub fn negated(&self) -> OrthogonalMatrix {
        OrthogonalMatrix {
            n: self.n,
            entries: self.entries.iter().map(|x| -x).collect(),
        }
    }

    /// `max |UᵀU − I|` over all entries.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.entries[k * n + i] * self.entries[k * n + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Determinant by LU with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.n;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .unwrap_or(col);
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
            }
        }
        det
    }

    /// FNV-1a digest of the entries, for logging which rotation was used.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.entries {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

/// Haar-distributed element of `O(n)`.
///
/// Gram–Schmidt (with one re-orthogonalization pass) applied to the columns
/// of a standard Gaussian matrix; the resulting `R` factor has a positive
/// diagonal, which is the sign convention that makes the law exactly Haar.
pub fn haar(n: usize, stream: RandomStream) -> Result<OrthogonalMatrix> {
    if n == 0 {
        return invalid("dimension must be positive");
    }
    let mut rng = stream.rng();
    Ok(haar_with(n, &mut rng))
}

pub(crate) fn haar_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> OrthogonalMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &cols {
                let proj = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // A rank-deficient Gaussian draw has probability zero; redraw if it happens.
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
    }
    let mut entries = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            entries[i * n + j] = *x;
        }
    }
    OrthogonalMatrix { n, entries }
}

/// `count` independent uniform directions on `S^{n-1}`.
pub fn uniform_directions(n: usize, count: usize, stream: RandomStream) -> Result<Vec<Direction>> {
    if n == 0 {
        return invalid("dimension must be positive");
    }
    Ok((0..chunk_count(count))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream.child(c as u64).rng();
            let len = CHUNK.min(count - c * CHUNK);
            (0..len).map(move |_| random_direction(n, &mut rng)).collect::<Vec<_>>()
        })
        .collect())
}

/// Normalized measure of `{x ∈ S^{n-1} : |x − pole| ≤ eps}`.
///
/// With polar angle `φ` (`eps = 2 sin(φ/2)`), the cap measure is
/// `½ I_{sin²φ}((n−1)/2, ½)` for `φ ≤ π/2` and one minus that otherwise.
pub fn cap_measure(n: usize, eps: f64) -> Result<f64> {
    if n < 2 {
        return invalid("cap measure needs n >= 2");
    }
    if !(eps > 0.0 && eps <= 2.0) {
        return invalid(format!("cap radius {eps} outside (0, 2]"));
    }
    let e2 = eps * eps;
    // sin²φ = eps² (1 − eps²/4)
    let s2 = (e2 * (1.0 - e2 / 4.0)).clamp(0.0, 1.0);
    let half = 0.5 * beta_reg((n as f64 - 1.0) / 2.0, 0.5, s2);
    Ok(if e2 <= 2.0 { half } else { 1.0 - half })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapBoundScan {
    /// `max_ε cap(n, ε)^{1/(n−1)} / ε` over the grid.
    pub empirical_c: f64,
    pub argmax_eps: f64,
}

pub fn cap_bound_scan(n: usize, eps_grid: &[f64]) -> Result<CapBoundScan> {
    if n < 2 {
        return invalid("cap bound scan needs n >= 2");
    }
    if eps_grid.is_empty() {
        return invalid("empty eps grid");
    }
    let mut best = CapBoundScan {
        empirical_c: f64::NEG_INFINITY,
        argmax_eps: f64::NAN,
    };
    for &eps in eps_grid {
        if !(eps > 0.0 && eps < 1.0) {
            return invalid(format!("cap bound grid value {eps} outside (0, 1)"));
        }
        let c = cap_measure(n, eps)?.powf(1.0 / (n as f64 - 1.0)) / eps;
        if c > best.empirical_c {
            best = CapBoundScan {
                empirical_c: c,
                argmax_eps: eps,
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRate {
    pub i: usize,
    pub j: usize,
    pub hits: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub trials: u64,
    pub separated: u64,
    pub p_all_separated: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Frequency of `|U x_i − x_j| ≤ 2` for each ordered pair of far centers.
    pub pair_rates: Vec<PairRate>,
    pub worst_pair_rate: f64,
}

/// Simulates how often a Haar rotation keeps the far unit balls
/// `x_i + B_2^n` (`|x_i| > radius`) of a ball union disjoint from their rotated
/// copies. Trial `t` uses rotation stream `stream.child(t)`.
pub fn rotation_separation_sim(
    centers: &[Vec<f64>],
    radius: f64,
    trials: u64,
    stream: RandomStream,
) -> Result<SeparationReport> {
    if centers.is_empty() {
        return invalid("no centers given");
    }
    let n = centers[0].len();
    if n < 2 || centers.iter().any(|c| c.len() != n) {
        return invalid("centers must share a dimension n >= 2");
    }
    if trials == 0 || !(radius > 0.0) {
        return invalid("trials and radius must be positive");
    }
    let far: Vec<&Vec<f64>> = centers
        .iter()
        .filter(|c| dot(c, c).sqrt() > radius)
        .collect();
    let pairs: Vec<(usize, usize)> = (0..far.len())
        .flat_map(|i| (0..far.len()).map(move |j| (i, j)))
        .collect();

    let blocks = (trials as usize).div_ceil(CHUNK);
    let (separated, pair_hits) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = (b * CHUNK) as u64;
            let end = (start + CHUNK as u64).min(trials);
            let mut sep = 0u64;
            let mut hits = vec![0u64; pairs.len()];
            let mut rotated: Vec<Vec<f64>> = vec![vec![0.0; n]; far.len()];
            for t in start..end {
                if far.is_empty() {
                    sep += 1;
                    continue;
                }
                let u = haar_with(n, &mut stream.child(t).rng());
                for (r, x) in rotated.iter_mut().zip(&far) {
                    u.apply_into(x, r);
                }
                let mut any = false;
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    let d2: f64 = rotated[i].iter().zip(far[j].iter()).map(|(a, b)| (a - b).powi(2)).sum();
                    if d2 <= 4.0 {
                        hits[k] += 1;
                        any = true;
                    }
                }
                if !any {
                    sep += 1;
                }
            }
            (sep, hits)
        })
        .reduce(
            || (0, vec![0; pairs.len()]),
            |(s1, h1), (s2, h2)| (s1 + s2, h1.iter().zip(&h2).map(|(a, b)| a + b).collect()),
        );

    let index_of: Vec<usize> = centers
        .iter()
        .enumerate()
        .filter(|(_, c)| dot(c, c).sqrt() > radius)
        .map(|(k, _)| k)
        .collect();
    let pair_rates: Vec<PairRate> = pairs
        .iter()
        .zip(&pair_hits)
        .map(|(&(i, j), &h)| PairRate {
            i: index_of[i],
            j: index_of[j],
            hits: h,
            rate: h as f64 / trials as f64,
        })
        .collect();
    let worst_pair_rate = pair_rates.iter().map(|p| p.rate).fold(0.0, f64::max);
    let (ci_low, ci_high) = clopper_pearson(separated, trials, REPORT_CONFIDENCE);
    Ok(SeparationReport {
        trials,
        separated,
        p_all_separated: separated as f64 / trials as f64,
        ci_low,
        ci_high,
        pair_rates,
        worst_pair_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn haar_is_orthogonal() {
        for n in [1, 2, 5, 16, 40] {
            let u = haar(n, RandomStream::new(3, n as u64)).unwrap();
            assert!(u.orthogonality_defect() < 1e-12, "n={n}");
            assert!((u.determinant().abs() - 1.0).abs() < 1e-8);
        }
        assert!(haar(0, RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn haar_in_dimension_one_is_a_fair_sign() {
        let s = RandomStream::new(11, 0);
        let plus = (0..10_000)
            .filter(|&k| haar(1, s.child(k)).unwrap().get(0, 0) > 0.0)
            .count();
        assert!((plus as f64 / 1e4 - 0.5).abs() < 0.02, "{plus}");
    }

    #[test]
    fn transpose_inverts() {
        let u = haar(6, RandomStream::new(5, 0)).unwrap();
        let v = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let back = u.apply_transpose(&u.apply(&v));
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(u.transpose().apply(&v), u.apply_transpose(&v));
    }

    #[test]
    fn from_entries_rejects_non_orthogonal() {
        assert!(OrthogonalMatrix::from_entries(2, vec![1.0, 1.0, 0.0, 1.0]).is_err());
        assert!(OrthogonalMatrix::from_entries(2, vec![0.0, 1.0, -1.0, 0.0]).is_ok());
    }

    #[test]
    fn directions_are_unit() {
        let dirs = uniform_directions(2, 1000, RandomStream::new(1, 1)).unwrap();
        assert_eq!(dirs.len(), 1000);
        for d in &dirs {
            let c = d.coords();
            assert!((c[0] * c[0] + c[1] * c[1] - 1.0).abs() < 1e-12);
        }
        assert!(uniform_directions(0, 3, RandomStream::new(1, 1)).is_err());
        assert!(Direction::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn cap_exact_values() {
        for n in [2, 3, 7, 50] {
            assert!((cap_measure(n, SQRT_2).unwrap() - 0.5).abs() < 1e-12);
            assert!((cap_measure(n, 2.0).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((cap_measure(2, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((cap_measure(3, 0.2).unwrap() - 0.01).abs() < 1e-12);
        assert!(cap_measure(3, 0.0).is_err());
        assert!(cap_measure(3, 2.01).is_err());
        assert!(cap_measure(1, 0.5).is_err());
    }

    #[test]
    fn cap_matches_low_dimensional_closed_forms() {
        for k in 1..200 {
            let eps = 2.0 * k as f64 / 200.0;
            let phi = 2.0 * (eps / 2.0).asin();
            let c2 = cap_measure(2, eps).unwrap();
            assert!((c2 - phi / PI).abs() < 1e-12, "n=2 eps={eps}");
            let c3 = cap_measure(3, eps).unwrap();
            assert!((c3 - eps * eps / 4.0).abs() < 1e-12, "n=3 eps={eps}");
            // S^3: (φ − sinφ cosφ)/π
            let c4 = cap_measure(4, eps).unwrap();
            assert!((c4 - (phi - phi.sin() * phi.cos()) / PI).abs() < 1e-12, "n=4 eps={eps}");
        }
    }

    #[test]
    fn cap_matches_angular_quadrature() {
        // ∫_0^φ sin^{n−2} / ∫_0^π sin^{n−2}, composite Simpson.
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let m = 20_000;
            let h = (b - a) / m as f64;
            let mut s = f(a) + f(b);
            for i in 1..m {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            s * h / 3.0
        };
        for n in [5usize, 8, 20] {
            let f = move |t: f64| t.sin().powi(n as i32 - 2);
            let total = simpson(&f, 0.0, PI);
            for &eps in &[0.1, 0.7, 1.3, 1.9] {
                let phi = 2.0 * (eps / 2.0_f64).asin();
                let want = simpson(&f, 0.0, phi) / total;
                assert!((cap_measure(n, eps).unwrap() - want).abs() < 1e-10, "n={n} eps={eps}");
            }
        }
    }

    #[test]
    fn cap_is_increasing() {
        let mut prev = 0.0;
        for k in 1..=400 {
            let c = cap_measure(8, k as f64 * 0.005).unwrap();
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn cap_scan_on_two_sphere_is_one_half() {
        let grid: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
        let scan = cap_bound_scan(3, &grid).unwrap();
        assert!((scan.empirical_c - 0.5).abs() < 1e-12);
        let scan2 = cap_bound_scan(2, &[0.5]).unwrap();
        let want = 2.0 * (0.25f64).asin() / PI / 0.5;
        assert!((scan2.empirical_c - want).abs() < 1e-12);
        assert!(cap_bound_scan(3, &[0.5, 1.5]).is_err());
        assert!(cap_bound_scan(1, &[0.5]).is_err());
    }

    #[test]
    fn separation_trivial_when_all_centers_near() {
        let centers = vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]];
        let rep = rotation_separation_sim(&centers, 5.0, 100, RandomStream::new(0, 0)).unwrap();
        assert_eq!(rep.p_all_separated, 1.0);
        assert!(rep.pair_rates.is_empty());
        assert!(rotation_separation_sim(&[], 5.0, 10, RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn separation_single_center_matches_cap() {
        let centers = vec![vec![10.0, 0.0, 0.0]];
        let trials = 20_000;
        let rep = rotation_separation_sim(&centers, 5.0, trials, RandomStream::new(4, 0)).unwrap();
        let p = 1.0 - cap_measure(3, 0.2).unwrap();
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((rep.p_all_separated - p).abs() < 4.0 * se, "{}", rep.p_all_separated);
        assert_eq!(rep.pair_rates.len(), 1);
    }
}
