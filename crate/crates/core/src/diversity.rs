//! Exponential similarity matrices and the Solow-Polasky objective.
//!
//! `SP(S) = 1^T Z^{-1} 1` with `Z_ij = exp(-theta0 * d(x_i, x_j))`. The value
//! is obtained by solving `Z w = 1`; the inverse is never formed.
//!
//! Besides `SP = sum(w)` every weighting also carries the deficit
//! `k - SP = sum_{i != j} Z_ij w_j` (exact identity from `Z w = 1`) as a
//! signed logarithm. When all similarities are tiny, `SP` rounds to `k` in
//! floating point while the deficit keeps full relative precision, so
//! subsets of equal size are ranked by deficit.

use std::cmp::Ordering;

use thiserror::Error;

use crate::geometry::{GeometryError, PointSet};
use crate::linalg::{inverse_norm1_estimate, norm1, FactorKind, Factorization};

/// Largest accepted 1-norm condition estimate.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Per-row residual tolerance; the accepted residual is this times `k`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiversityError {
    #[error("theta0 must be positive and finite, got {0}")]
    InvalidTheta(f64),
    #[error("similarity matrix is singular")]
    Singular,
    #[error("similarity matrix is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("solve residual {residual:.3e} exceeds tolerance")]
    ResidualTooLarge { residual: f64 },
    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),
    #[error("gradient needs two distinct indices, got {0} twice")]
    SameIndex(usize),
    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("subset repeats index {0}")]
    RepeatedIndex(usize),
    #[error("subset is empty")]
    EmptySubset,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    theta0: f64,
}

impl KernelParams {
    pub fn new(theta0: f64) -> Result<Self, DiversityError> {
        if theta0 > 0.0 && theta0.is_finite() {
            Ok(Self { theta0 })
        } else {
            Err(DiversityError::InvalidTheta(theta0))
        }
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }
}

/// Natural log of the smallest positive normal `f64`; similarities whose
/// exponent falls below it are stored as 0.
pub const LOG_UNDERFLOW: f64 = -708.396_418_532_264_1;

/// Symmetric `k x k` matrix with unit diagonal and off-diagonals in `[0, 1)`.
///
/// The exponent `ln Z_ij` is kept next to every entry, so entries that
/// underflowed to 0 still contribute to the deficit.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    k: usize,
    entries: Vec<f64>,
    log_entries: Vec<f64>,
    underflow: bool,
}

impl SimilarityMatrix {
    pub fn from_points(points: &PointSet, params: &KernelParams) -> Self {
        let all: Vec<usize> = (0..points.len()).collect();
        Self::build(points, &all, params)
    }

    /// Similarity matrix of the points at `subset`, in that order.
    pub fn from_subset(
        points: &PointSet,
        subset: &[usize],
        params: &KernelParams,
    ) -> Result<Self, DiversityError> {
        check_subset(subset, points.len())?;
        Ok(Self::build(points, subset, params))
    }

    fn build(points: &PointSet, subset: &[usize], params: &KernelParams) -> Self {
        let k = subset.len();
        let mut log_entries = vec![0.0; k * k];
        for a in 0..k {
            for b in (a + 1)..k {
                let e = -params.theta0 * points.distance(subset[a], subset[b]);
                log_entries[a * k + b] = e;
                log_entries[b * k + a] = e;
            }
        }
        Self::from_log_entries(k, log_entries)
    }

    fn from_log_entries(k: usize, log_entries: Vec<f64>) -> Self {
        let mut underflow = false;
        let entries = log_entries
            .iter()
            .map(|&e| {
                if e < LOG_UNDERFLOW {
                    underflow = true;
                    0.0
                } else {
                    e.exp()
                }
            })
            .collect();
        Self {
            k,
            entries,
            log_entries,
            underflow,
        }
    }

    /// Builds a matrix from explicit row-major entries.
    pub fn from_entries(k: usize, entries: Vec<f64>) -> Result<Self, DiversityError> {
        if k == 0 || entries.len() != k * k {
            return Err(DiversityError::InvalidMatrix(format!(
                "expected {} entries for size {k}",
                k * k
            )));
        }
        for i in 0..k {
            if entries[i * k + i] != 1.0 {
                return Err(DiversityError::InvalidMatrix(format!(
                    "diagonal entry {i} is not 1"
                )));
            }
            for j in (i + 1)..k {
                let v = entries[i * k + j];
                if v != entries[j * k + i] {
                    return Err(DiversityError::InvalidMatrix(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
                if !(0.0..1.0).contains(&v) {
                    return Err(DiversityError::InvalidMatrix(format!(
                        "off-diagonal ({i}, {j}) = {v} outside [0, 1)"
                    )));
                }
            }
        }
        let log_entries = entries.iter().map(|v| v.ln()).collect();
        Ok(Self {
            k,
            entries,
            log_entries,
            underflow: false,
        })
    }

    /// `(1 - r) I + r J`.
    pub fn uniform(k: usize, r: f64) -> Result<Self, DiversityError> {
        let entries = (0..k * k)
            .map(|idx| if idx / k == idx % k { 1.0 } else { r })
            .collect();
        Self::from_entries(k, entries)
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    /// `ln Z_ij`, finite even where the entry itself underflowed.
    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        self.log_entries[i * self.k + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn underflow(&self) -> bool {
        self.underflow
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let k = self.k;
        (0..k * k)
            .filter(|idx| idx / k != idx % k)
            .map(|idx| self.entries[idx])
            .fold(0.0, f64::max)
    }

    /// Sets the symmetric pair `(a, b)` and `(b, a)` to `value`.
    pub fn set_off_diagonal(
        &mut self,
        a: usize,
        b: usize,
        value: f64,
    ) -> Result<(), DiversityError> {
        self.check_pair(a, b)?;
        if !(0.0..1.0).contains(&value) {
            return Err(DiversityError::InvalidMatrix(format!(
                "off-diagonal value {value} outside [0, 1)"
            )));
        }
        let k = self.k;
        for idx in [a * k + b, b * k + a] {
            self.entries[idx] = value;
            self.log_entries[idx] = value.ln();
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<(), DiversityError> {
        for index in [a, b] {
            if index >= self.k {
                return Err(DiversityError::IndexOutOfRange { index, len: self.k });
            }
        }
        if a == b {
            return Err(DiversityError::SameIndex(a));
        }
        Ok(())
    }
}

fn check_subset(subset: &[usize], len: usize) -> Result<(), DiversityError> {
    if subset.is_empty() {
        return Err(DiversityError::EmptySubset);
    }
    let mut seen = vec![false; len];
    for &index in subset {
        if index >= len {
            return Err(DiversityError::IndexOutOfRange { index, len });
        }
        if std::mem::replace(&mut seen[index], true) {
            return Err(DiversityError::RepeatedIndex(index));
        }
    }
    Ok(())
}

/// A real number stored as sign and log-magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    /// -1, 0 or 1.
    pub sign: i8,
    /// `ln |value|`; `-inf` when the value is zero.
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if v > 0.0 { 1 } else { -1 },
                ln_abs: v.abs().ln(),
            }
        }
    }

    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln_abs.exp(),
        }
    }

    /// Sum of `sign_i * exp(ln_i)` without leaving log space.
    pub fn sum(terms: impl IntoIterator<Item = (i8, f64)>) -> Self {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (s, l) in terms {
            match s {
                1 => pos.push(l),
                -1 => neg.push(l),
                _ => {}
            }
        }
        let lp = log_sum_exp(&pos);
        let ln = log_sum_exp(&neg);
        if lp == ln {
            return Self::ZERO;
        }
        let (sign, big, small) = if lp > ln { (1, lp, ln) } else { (-1, ln, lp) };
        Self {
            sign,
            ln_abs: big + (-(small - big).exp()).ln_1p(),
        }
    }

    /// Numeric order.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.ln_abs.total_cmp(&other.ln_abs),
                _ => other.ln_abs.total_cmp(&self.ln_abs),
            },
            o => o,
        }
    }

    /// `self - other` as a plain float.
    pub fn difference(&self, other: &Self) -> f64 {
        SignedLog::sum([(self.sign, self.ln_abs), (-other.sign, other.ln_abs)]).value()
    }
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Solution of `Z w = 1` and the derived objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Weighting {
    pub w: Vec<f64>,
    /// `SP = sum(w)`.
    pub sp_value: f64,
    /// `k - SP`, accurate even when it is far below machine epsilon.
    pub deficit: SignedLog,
    /// `max_i |(Z w)_i - 1|`.
    pub residual: f64,
    pub condition_estimate: f64,
    pub factorization: FactorKind,
}

impl Weighting {
    pub fn size(&self) -> usize {
        self.w.len()
    }

    /// Orders weightings of equal size by objective: `Greater` means a
    /// larger SP value (a smaller deficit).
    pub fn cmp_objective(&self, other: &Self) -> Ordering {
        other.deficit.total_cmp(&self.deficit)
    }
}

fn residual(z: &SimilarityMatrix, w: &[f64]) -> (Vec<f64>, f64) {
    let k = z.k;
    let r: Vec<f64> = (0..k)
        .map(|i| 1.0 - (0..k).map(|j| z.entries[i * k + j] * w[j]).sum::<f64>())
        .collect();
    let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (r, norm)
}

/// Evaluates the Solow-Polasky objective of `z`.
pub fn solow_polasky(z: &SimilarityMatrix) -> Result<Weighting, DiversityError> {
    let k = z.k;
    let factor = Factorization::new(&z.entries, k).map_err(|_| DiversityError::Singular)?;
    let condition = norm1(&z.entries, k) * inverse_norm1_estimate(&factor);
    if !(condition <= CONDITION_LIMIT) {
        return Err(DiversityError::IllConditioned { condition });
    }
    let mut w = factor.solve(&vec![1.0; k]);
    let (r, mut res) = residual(z, &w);
    let tolerance = RESIDUAL_TOLERANCE * k as f64;
    if res > tolerance {
        // one step of iterative refinement
        let dw = factor.solve(&r);
        w.iter_mut().zip(&dw).for_each(|(a, b)| *a += b);
        res = residual(z, &w).1;
        if res > tolerance {
            return Err(DiversityError::ResidualTooLarge { residual: res });
        }
    }
    let deficit = SignedLog::sum((0..k).flat_map(|i| {
        let z = &z;
        let w = &w;
        (0..k).filter(move |&j| j != i).filter_map(move |j| {
            let lz = z.log_entries[i * k + j];
            (lz > f64::NEG_INFINITY && w[j] != 0.0).then(|| {
                let sign = if w[j] > 0.0 { 1 } else { -1 };
                (sign, lz + w[j].abs().ln())
            })
        })
    }));
    Ok(Weighting {
        sp_value: w.iter().sum(),
        w,
        deficit,
        residual: res,
        condition_estimate: condition,
        factorization: factor.kind(),
    })
}

/// SP of the points at `subset` (any order, indices distinct).
pub fn sp_of_subset(
    points: &PointSet,
    subset: &[usize],
    params: &KernelParams,
) -> Result<Weighting, DiversityError> {
    solow_polasky(&SimilarityMatrix::from_subset(points, subset, params)?)
}

/// Partial derivative of SP with respect to the symmetric entry
/// `z_ab = z_ba`, which equals `-2 w_a w_b`.
pub fn sp_gradient(z: &SimilarityMatrix, a: usize, b: usize) -> Result<f64, DiversityError> {
    z.check_pair(a, b)?;
    let w = solow_polasky(z)?.w;
    Ok(-2.0 * w[a] * w[b])
}
