//! Extremal bounds on `1^T Z^{-1} 1` in the bounded-box regime and the
//! resulting separation certificate.
//!
//! In the regime where every off-diagonal similarity is at most
//! `rho < 1/(4k)`, a matrix with all off-diagonals `<= r` has value at least
//! `k / (1 + (k-1) r)` and a matrix with some off-diagonal `>= q` has value
//! at most `k - 2q / (1 + q)`. The two classes are strictly separated iff
//! `2q > (k-1) r (k + (k-2) q)`; `q > k(k-1) r` is a sufficient condition.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("subset size must be at least 2, got {0}")]
    SizeTooSmall(usize),
    #[error("similarity bound {value} outside [0, 1/(4k)) for k = {k}")]
    OutOfBox { k: usize, value: f64 },
    #[error("regime requires 0 <= r <= q <= rho, got r = {r}, q = {q}, rho = {rho}")]
    Unordered { r: f64, q: f64, rho: f64 },
}

/// Similarities at or below this are handled in log space only.
pub const DIRECT_EVALUATION_FLOOR: f64 = 1e-300;

fn box_limit(k: usize) -> f64 {
    1.0 / (4.0 * k as f64)
}

fn check_in_box(k: usize, value: f64) -> Result<(), BoundsError> {
    if k < 2 {
        return Err(BoundsError::SizeTooSmall(k));
    }
    if !(value >= 0.0 && value < box_limit(k)) {
        return Err(BoundsError::OutOfBox { k, value });
    }
    Ok(())
}

/// `k / (1 + (k-1) r)`: lower bound for matrices with all off-diagonals `<= r`.
pub fn good_lower_bound(k: usize, r: f64) -> Result<f64, BoundsError> {
    check_in_box(k, r)?;
    let k = k as f64;
    Ok(k / (1.0 + (k - 1.0) * r))
}

/// `k - 2q / (1 + q)`: upper bound for matrices with an off-diagonal `>= q`.
pub fn bad_upper_bound(k: usize, q: f64) -> Result<f64, BoundsError> {
    check_in_box(k, q)?;
    Ok(k as f64 - 2.0 * q / (1.0 + q))
}

/// Box regime given directly by similarity values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxRegime {
    pub k: usize,
    pub rho: f64,
    pub r: f64,
    pub q: f64,
}

impl BoxRegime {
    pub fn new(k: usize, rho: f64, r: f64, q: f64) -> Result<Self, BoundsError> {
        check_in_box(k, rho)?;
        if !(0.0 <= r && r <= q && q <= rho) {
            return Err(BoundsError::Unordered { r, q, rho });
        }
        Ok(Self { k, rho, r, q })
    }
}

/// Box regime given by exponents: `ln rho`, `ln q` and `ln(q / r)`.
///
/// The ratio is carried on its own because in the reduction `ln q` and
/// `ln r` can both be of order `10^29` while their difference is small.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogBoxRegime {
    pub k: usize,
    pub log_rho: f64,
    pub log_q: f64,
    pub log_q_over_r: f64,
}

impl LogBoxRegime {
    pub fn new(k: usize, log_rho: f64, log_q: f64, log_q_over_r: f64) -> Result<Self, BoundsError> {
        if k < 2 {
            return Err(BoundsError::SizeTooSmall(k));
        }
        if !(log_rho < -(4.0 * k as f64).ln()) {
            return Err(BoundsError::OutOfBox {
                k,
                value: log_rho.exp(),
            });
        }
        if !(log_q_over_r >= 0.0 && log_q <= log_rho) {
            return Err(BoundsError::Unordered {
                r: (log_q - log_q_over_r).exp(),
                q: log_q.exp(),
                rho: log_rho.exp(),
            });
        }
        Ok(Self {
            k,
            log_rho,
            log_q,
            log_q_over_r,
        })
    }

    pub fn log_r(&self) -> f64 {
        self.log_q - self.log_q_over_r
    }
}

/// Outcome of comparing the two extremal bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct GapCertificate {
    pub k: usize,
    pub log_rho: f64,
    pub log_r: f64,
    pub log_q: f64,
    pub log_q_over_r: f64,
    /// `k / (1 + (k-1) r)`; equals `k` in floating point when `r` is tiny.
    pub good_lower: f64,
    /// `k - 2q / (1 + q)`; equals `k` in floating point when `q` is tiny.
    pub bad_upper: f64,
    /// `ln(good_lower - bad_upper)` when the difference is positive.
    pub log_gap: Option<f64>,
    /// `good_lower > bad_upper`.
    pub separated: bool,
    /// `q > k(k-1) r`.
    pub sufficient_condition: bool,
    /// True when the bounds were compared in log space.
    pub log_domain: bool,
    /// True when no matrix can fall into the `>= q` class (the source has no
    /// adjacent pair); separation then holds vacuously.
    pub bad_class_empty: bool,
}

impl GapCertificate {
    /// `ln(k - good_lower)`: subsets meeting the lower bound have a deficit
    /// at most this.
    pub fn log_good_deficit(&self) -> f64 {
        let k = self.k as f64;
        let r = self.log_r.exp();
        (k * (k - 1.0)).ln() + self.log_r - ((k - 1.0) * r).ln_1p()
    }

    /// `ln(k - bad_upper)`: subsets in the `>= q` class have a deficit at
    /// least this.
    pub fn log_bad_deficit(&self) -> f64 {
        2f64.ln() + self.log_q - self.log_q.exp().ln_1p()
    }

    /// Certificate for a source without adjacent pairs: every k-subset is
    /// good, so there is nothing to separate from.
    pub fn vacuous(k: usize, log_rho: f64, log_r: f64) -> Self {
        let kf = k as f64;
        Self {
            k,
            log_rho,
            log_r,
            log_q: f64::NEG_INFINITY,
            log_q_over_r: f64::INFINITY,
            good_lower: kf / (1.0 + (kf - 1.0) * log_r.exp()),
            bad_upper: f64::NEG_INFINITY,
            log_gap: None,
            separated: true,
            sufficient_condition: true,
            log_domain: true,
            bad_class_empty: true,
        }
    }
}

/// Cancellation-free `good_lower - bad_upper` as `ln` of the positive part:
/// the numerator is `2q - (k-1) r (k + (k-2) q)`.
fn log_gap(k: usize, log_q: f64, log_q_over_r: f64) -> Option<f64> {
    let kf = k as f64;
    let q = log_q.exp();
    let r_over_q = (-log_q_over_r).exp();
    let inner = 2.0 - (kf - 1.0) * r_over_q * (kf + (kf - 2.0) * q);
    if inner > 0.0 {
        let log_r = log_q - log_q_over_r;
        Some(log_q + inner.ln() - ((kf - 1.0) * log_r.exp()).ln_1p() - q.ln_1p())
    } else {
        None
    }
}

fn sufficient(k: usize, log_q_over_r: f64) -> bool {
    let kf = k as f64;
    log_q_over_r > (kf * (kf - 1.0)).ln()
}

/// Certifies separation for a regime given by similarity values.
pub fn certify_gap(regime: &BoxRegime) -> GapCertificate {
    let k = regime.k;
    let (log_r, log_q) = (regime.r.ln(), regime.q.ln());
    // r = 0 gives an infinite ratio, which is the right limit
    let log_q_over_r = if regime.r == regime.q {
        0.0
    } else {
        log_q - log_r
    };
    let gap = log_gap(k, log_q, log_q_over_r);
    let kf = k as f64;
    GapCertificate {
        k,
        log_rho: regime.rho.ln(),
        log_r,
        log_q,
        log_q_over_r,
        good_lower: kf / (1.0 + (kf - 1.0) * regime.r),
        bad_upper: kf - 2.0 * regime.q / (1.0 + regime.q),
        log_gap: gap,
        separated: gap.is_some(),
        sufficient_condition: regime.q > kf * (kf - 1.0) * regime.r,
        log_domain: false,
        bad_class_empty: false,
    }
}

/// Certifies separation for a regime given by exponents. Falls back to
/// [`certify_gap`] when both similarities are large enough to evaluate.
pub fn certify_gap_log(regime: &LogBoxRegime) -> GapCertificate {
    let log_r = regime.log_r();
    let floor = DIRECT_EVALUATION_FLOOR.ln();
    if log_r > floor && regime.log_q > floor {
        let direct = BoxRegime {
            k: regime.k,
            rho: regime.log_rho.exp(),
            r: log_r.exp(),
            q: regime.log_q.exp(),
        };
        let mut cert = certify_gap(&direct);
        // keep the exponents as supplied; they are more precise than ln(exp(.))
        cert.log_rho = regime.log_rho;
        cert.log_r = log_r;
        cert.log_q = regime.log_q;
        cert.log_q_over_r = regime.log_q_over_r;
        cert.log_gap = log_gap(regime.k, regime.log_q, regime.log_q_over_r);
        cert.separated = cert.log_gap.is_some();
        cert.sufficient_condition = sufficient(regime.k, regime.log_q_over_r);
        return cert;
    }
    let k = regime.k;
    let kf = k as f64;
    let gap = log_gap(k, regime.log_q, regime.log_q_over_r);
    GapCertificate {
        k,
        log_rho: regime.log_rho,
        log_r,
        log_q: regime.log_q,
        log_q_over_r: regime.log_q_over_r,
        good_lower: kf / (1.0 + (kf - 1.0) * log_r.exp()),
        bad_upper: kf - 2.0 * regime.log_q.exp() / (1.0 + regime.log_q.exp()),
        log_gap: gap,
        separated: gap.is_some(),
        sufficient_condition: sufficient(k, regime.log_q_over_r),
        log_domain: true,
        bad_class_empty: false,
    }
}
