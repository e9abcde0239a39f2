//! Exact samplers for a fixed menu of isotropic log-concave laws.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, LabError, Result};
use crate::rng::{RandomStream, CHUNK};
use crate::special::ln_gamma;
use crate::thicken::Law;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Standard normal.
    Gaussian,
    /// Uniform on `[-√3, √3]^n`.
    Cube,
    /// Uniform on `√(n+2) · B_2^n`.
    Ball,
    /// i.i.d. coordinates with density `e^{-√2|x|} / √2`.
    LaplaceProduct,
    /// i.i.d. coordinates with density `e^{-(x+1)}` on `[-1, ∞)`; not even.
    ShiftedExpProduct,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Gaussian,
        Family::Cube,
        Family::Ball,
        Family::LaplaceProduct,
        Family::ShiftedExpProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Cube => "cube",
            Family::Ball => "ball",
            Family::LaplaceProduct => "laplace_product",
            Family::ShiftedExpProduct => "shifted_exp_product",
        }
    }

    /// Marginal tail exponent: 2 for sub-gaussian laws, 1 for exponential tails.
    pub fn nominal_alpha(self) -> f64 {
        match self {
            Family::Gaussian | Family::Cube | Family::Ball => 2.0,
            Family::LaplaceProduct | Family::ShiftedExpProduct => 1.0,
        }
    }

    pub fn is_even(self) -> bool {
        !matches!(self, Family::ShiftedExpProduct)
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Family::Gaussian => 0,
            Family::Cube => 1,
            Family::Ball => 2,
            Family::LaplaceProduct => 3,
            Family::ShiftedExpProduct => 4,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == tag)
            .ok_or_else(|| LabError::Format(format!("unknown family tag {tag}")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Family::Gaussian),
            "cube" => Ok(Family::Cube),
            "ball" => Ok(Family::Ball),
            "laplace" | "laplace_product" => Ok(Family::LaplaceProduct),
            "shifted_exp" | "shifted_exp_product" => Ok(Family::ShiftedExpProduct),
            other => invalid(format!("unknown family {other:?}")),
        }
    }
}

/// A family together with its dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DistributionSpec {
    pub family: Family,
    pub dimension: usize,
}

impl DistributionSpec {
    pub fn new(family: Family, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return invalid("dimension must be positive");
        }
        Ok(Self { family, dimension })
    }

    pub fn nominal_alpha(&self) -> f64 {
        self.family.nominal_alpha()
    }

    /// Draws one vector into `out` (length `dimension`).
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension);
        match self.family {
            Family::Gaussian => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            Family::Cube => out
                .iter_mut()
                .for_each(|v| *v = SQRT3 * (2.0 * rng.random::<f64>() - 1.0)),
            Family::Ball => {
                let n = self.dimension as f64;
                let mut norm2 = 0.0;
                while norm2 == 0.0 {
                    for v in out.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    norm2 = out.iter().map(|v| v * v).sum();
                }
                let radius = (n + 2.0).sqrt() * rng.random::<f64>().powf(1.0 / n);
                let scale = radius / norm2.sqrt();
                out.iter_mut().for_each(|v| *v *= scale);
            }
            Family::LaplaceProduct => out.iter_mut().for_each(|v| {
                let e: f64 = rng.sample(Exp1);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *v = sign * e * std::f64::consts::FRAC_1_SQRT_2;
            }),
            Family::ShiftedExpProduct => out.iter_mut().for_each(|v| {
                let e: f64 = rng.sample(Exp1);
                *v = e - 1.0;
            }),
        }
    }
}

/// A `count × n` matrix of draws, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    data: Vec<f64>,
    dimension: usize,
    law: Option<Law>,
    provenance: Option<RandomStream>,
}

impl SampleBatch {
    /// Wraps externally produced rows. `data.len()` must be a positive multiple of `dimension`.
    pub fn from_rows(dimension: usize, data: Vec<f64>) -> Result<Self> {
        if dimension == 0 || data.is_empty() || !data.len().is_multiple_of(dimension) {
            return invalid("row data must be a non-empty multiple of the dimension");
        }
        Ok(Self {
            data,
            dimension,
            law: None,
            provenance: None,
        })
    }

    pub(crate) fn generated(dimension: usize, data: Vec<f64>, law: Law, stream: RandomStream) -> Self {
        Self {
            data,
            dimension,
            law: Some(law),
            provenance: Some(stream),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dimension
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dimension)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    /// The law the rows were drawn from, when known.
    pub fn law(&self) -> Option<&Law> {
        self.law.as_ref()
    }

    /// Base family spec of the generating law, when known.
    pub fn spec(&self) -> Option<DistributionSpec> {
        self.law.as_ref().map(Law::base)
    }

    pub fn provenance(&self) -> Option<RandomStream> {
        self.provenance
    }

    /// `λ · batch`, forgetting the generating law.
    pub fn scaled(&self, lambda: f64) -> SampleBatch {
        SampleBatch {
            data: self.data.iter().map(|v| v * lambda).collect(),
            dimension: self.dimension,
            law: None,
            provenance: self.provenance,
        }
    }

    /// Applies `f` to every row, forgetting the generating law.
    pub fn map_rows(&self, f: impl Fn(&[f64], &mut [f64]) + Sync) -> SampleBatch {
        let n = self.dimension;
        let mut out = vec![0.0; self.data.len()];
        out.par_chunks_mut(n)
            .zip(self.data.par_chunks(n))
            .for_each(|(dst, src)| f(src, dst));
        SampleBatch {
            data: out,
            dimension: n,
            law: None,
            provenance: self.provenance,
        }
    }

    /// Writes the batch as a little-endian binary blob:
    /// magic `LCMB`, u32 version, u32 n, u64 count, u8 family tag, u8 law kind,
    /// u16 zero, u64 root seed, u64 stream index, then `count·n` f64 values.
    ///
    /// Thickened batches store only the base family; the rotation itself is not
    /// persisted (it is reproducible from the experiment seed).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let (tag, kind) = match &self.law {
            Some(law) => (law.base().family.tag(), law.kind_tag()),
            None => (u8::MAX, u8::MAX),
        };
        let stream = self.provenance.unwrap_or(RandomStream::new(0, 0));
        w.write_all(BATCH_MAGIC)?;
        w.write_all(&BATCH_VERSION.to_le_bytes())?;
        w.write_all(&(self.dimension as u32).to_le_bytes())?;
        w.write_all(&(self.count() as u64).to_le_bytes())?;
        w.write_all(&[tag, kind, 0, 0])?;
        w.write_all(&stream.root_seed.to_le_bytes())?;
        w.write_all(&stream.stream_index.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a blob written by [`SampleBatch::write_to`]. Returns the batch and
    /// the recorded family (if any).
    pub fn read_from<R: Read>(mut r: R) -> Result<(SampleBatch, Option<Family>)> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BATCH_MAGIC {
            return Err(LabError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != BATCH_VERSION {
            return Err(LabError::Format(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        let mut tags = [0u8; 4];
        r.read_exact(&mut tags)?;
        let root_seed = read_u64(&mut r)?;
        let stream_index = read_u64(&mut r)?;
        if n == 0 || count == 0 {
            return Err(LabError::Format("empty batch".into()));
        }
        let len = n
            .checked_mul(count)
            .ok_or_else(|| LabError::Format("size overflow".into()))?;
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        let family = if tags[0] == u8::MAX {
            None
        } else {
            Some(Family::from_tag(tags[0])?)
        };
        let mut batch = SampleBatch::from_rows(n, data)?;
        batch.provenance = Some(RandomStream::new(root_seed, stream_index));
        Ok((batch, family))
    }
}

const BATCH_MAGIC: &[u8; 4] = b"LCMB";
const BATCH_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Draws `count` i.i.d. rows of `spec`'s law. Rows are generated in
/// `CHUNK`-sized blocks, block `i` from `stream.child(i)`.
pub fn sample(spec: DistributionSpec, count: usize, stream: RandomStream) -> Result<SampleBatch> {
    sample_law(&Law::Base(spec), count, stream)
}

pub(crate) fn sample_law(law: &Law, count: usize, stream: RandomStream) -> Result<SampleBatch> {
    if count == 0 {
        return invalid("count must be positive");
    }
    let n = law.dimension();
    if n == 0 {
        return invalid("dimension must be positive");
    }
    let mut data = vec![0.0; count * n];
    data.par_chunks_mut(CHUNK * n)
        .enumerate()
        .for_each(|(i, block)| {
            let mut rng = stream.child(i as u64).rng();
            let mut scratch = law.scratch();
            for row in block.chunks_exact_mut(n) {
                law.draw_into(&mut rng, &mut scratch, row);
            }
        });
    Ok(SampleBatch::generated(n, data, law.clone(), stream))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropyReport {
    pub max_abs_mean: f64,
    pub max_cov_deviation: f64,
}

/// Largest deviation of the empirical mean from 0 and of the empirical
/// covariance (divisor `count - 1`) from the identity.
pub fn isotropy_report(batch: &SampleBatch) -> Result<IsotropyReport> {
    let count = batch.count();
    if count < 2 {
        return invalid("isotropy report needs at least two rows");
    }
    let n = batch.dimension();
    // Per-chunk sums, merged in chunk order.
    let partial: Vec<(Vec<f64>, Vec<f64>)> = batch
        .data()
        .par_chunks(CHUNK * n)
        .map(|block| {
            let mut s = vec![0.0; n];
            let mut ss = vec![0.0; n * n];
            for row in block.chunks_exact(n) {
                for i in 0..n {
                    s[i] += row[i];
                    for j in i..n {
                        ss[i * n + j] += row[i] * row[j];
                    }
                }
            }
            (s, ss)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sumsq = vec![0.0; n * n];
    for (s, ss) in &partial {
        sum.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        sumsq.iter_mut().zip(ss).for_each(|(a, b)| *a += b);
    }
    let c = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
    let max_abs_mean = mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_cov_deviation = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let cov = (sumsq[i * n + j] - c * mean[i] * mean[j]) / (c - 1.0);
            let target = if i == j { 1.0 } else { 0.0 };
            max_cov_deviation = max_cov_deviation.max((cov - target).abs());
        }
    }
    Ok(IsotropyReport {
        max_abs_mean,
        max_cov_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSide {
    /// `E|X_1|^p`
    Absolute,
    /// `E (X_1)_+^p`
    Positive,
    /// `E (X_1)_-^p`
    Negative,
}

/// Closed-form `p`-th moment of the first coordinate.
pub fn axis_moment_oracle(family: Family, p: f64, side: MomentSide) -> Result<f64> {
    if !(p >= 1.0) {
        return invalid("moment order must be at least 1");
    }
    let absolute = match family {
        Family::Cube => 3f64.powf(p / 2.0) / (p + 1.0),
        Family::LaplaceProduct => (ln_gamma(p + 1.0) - p / 2.0 * std::f64::consts::LN_2).exp(),
        Family::Gaussian => {
            (p / 2.0 * std::f64::consts::LN_2 + ln_gamma((p + 1.0) / 2.0) - ln_gamma(0.5)).exp()
        }
        Family::ShiftedExpProduct => {
            let pos = shifted_exp_positive(p);
            let neg = shifted_exp_negative(p);
            return Ok(match side {
                MomentSide::Absolute => pos + neg,
                MomentSide::Positive => pos,
                MomentSide::Negative => neg,
            });
        }
        Family::Ball => {
            return Err(LabError::Unsupported(
                "ball marginals have no product structure along the axes".into(),
            ))
        }
    };
    Ok(match side {
        MomentSide::Absolute => absolute,
        MomentSide::Positive | MomentSide::Negative => absolute / 2.0,
    })
}

fn shifted_exp_positive(p: f64) -> f64 {
    (ln_gamma(p + 1.0) - 1.0).exp()
}

/// `∫_0^1 x^p e^{x-1} dx = e^{-1} Σ_k 1 / (k! (p + k + 1))`.
fn shifted_exp_negative(p: f64) -> f64 {
    let mut sum = 0.0;
    let mut inv_fact = 1.0;
    for k in 0..60 {
        let term = inv_fact / (p + k as f64 + 1.0);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        inv_fact /= (k + 1) as f64;
    }
    sum * (-1.0f64).exp()
}
