//! Finite planar point sets with exact-rational and floating backends.
//!
//! All threshold decisions (adjacency in the unit-disk graph, the strict
//! "distance > 1" test used by the margins) go through exact squared
//! distances when the rational backend is active. No square root is taken
//! on the exact path; floating distances are only derived for reporting and
//! for kernel evaluation.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point set needs at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("coordinate of point {index} is not finite")]
    NonFiniteCoordinate { index: usize },
    #[error("scale factor must be positive and finite")]
    InvalidScale,
    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
}

/// A point in the plane. The coordinate type selects the backend.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

impl Point2<BigRational> {
    /// Builds a rational point from integer fractions `xn/xd`, `yn/yd`.
    ///
    /// Panics if a denominator is zero.
    pub fn from_fractions(xn: i64, xd: i64, yn: i64, yd: i64) -> Self {
        Self {
            x: BigRational::new(xn.into(), xd.into()),
            y: BigRational::new(yn.into(), yd.into()),
        }
    }

    /// Exact squared Euclidean distance.
    pub fn squared_distance(&self, other: &Self) -> BigRational {
        let dx = &self.x - &other.x;
        let dy = &self.y - &other.y;
        &dx * &dx + &dy * &dy
    }

    pub fn distance(&self, other: &Self) -> f64 {
        sqrt_rational(&self.squared_distance(other))
    }

    pub fn to_f64(&self) -> Point2<f64> {
        Point2::new(rational_to_f64(&self.x), rational_to_f64(&self.y))
    }
}

impl Point2<f64> {
    pub fn distance(&self, other: &Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

pub(crate) fn rational_to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(if v.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

fn sqrt_rational(v: &BigRational) -> f64 {
    rational_to_f64(v).sqrt()
}

/// Bit-length of an integer: number of bits of `|v|`, at least 1.
pub fn bit_length(v: &BigInt) -> u64 {
    v.bits().max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Rational,
    Floating,
}

#[derive(Clone, Debug, PartialEq)]
enum Coords {
    Rational(Vec<Point2<BigRational>>),
    Floating(Vec<Point2<f64>>),
}

/// Ordered list of pairwise distinct planar points.
///
/// Indices are stable: every report, graph and selection refers to points by
/// their position in this list.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    coords: Coords,
}

/// Multiplier applied by [`PointSet::scale`].
#[derive(Clone, Debug, PartialEq)]
pub enum ScaleFactor {
    Exact(BigRational),
    Float(f64),
}

impl From<f64> for ScaleFactor {
    fn from(v: f64) -> Self {
        ScaleFactor::Float(v)
    }
}

impl From<BigRational> for ScaleFactor {
    fn from(v: BigRational) -> Self {
        ScaleFactor::Exact(v)
    }
}

impl From<BigInt> for ScaleFactor {
    fn from(v: BigInt) -> Self {
        ScaleFactor::Exact(BigRational::from_integer(v))
    }
}

impl ScaleFactor {
    fn to_exact(&self) -> Result<BigRational, GeometryError> {
        match self {
            ScaleFactor::Exact(v) => Ok(v.clone()),
            ScaleFactor::Float(v) => BigRational::from_float(*v).ok_or(GeometryError::InvalidScale),
        }
    }

    fn to_f64(&self) -> f64 {
        match self {
            ScaleFactor::Exact(v) => rational_to_f64(v),
            ScaleFactor::Float(v) => *v,
        }
    }
}

impl PointSet {
    /// Builds a rational point set, rejecting coincident points.
    pub fn rational(points: Vec<Point2<BigRational>>) -> Result<Self, GeometryError> {
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(GeometryError::DuplicatePoint {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(Self {
            coords: Coords::Rational(points),
        })
    }

    /// Builds a floating point set, rejecting non-finite and coincident points.
    pub fn floating(points: Vec<Point2<f64>>) -> Result<Self, GeometryError> {
        for (index, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(GeometryError::NonFiniteCoordinate { index });
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i].x == points[j].x && points[i].y == points[j].y {
                    return Err(GeometryError::DuplicatePoint {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(Self {
            coords: Coords::Floating(points),
        })
    }

    pub fn backend(&self) -> Backend {
        match self.coords {
            Coords::Rational(_) => Backend::Rational,
            Coords::Floating(_) => Backend::Floating,
        }
    }

    pub fn len(&self) -> usize {
        match &self.coords {
            Coords::Rational(p) => p.len(),
            Coords::Floating(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rational_points(&self) -> Option<&[Point2<BigRational>]> {
        match &self.coords {
            Coords::Rational(p) => Some(p),
            Coords::Floating(_) => None,
        }
    }

    pub fn floating_points(&self) -> Option<&[Point2<f64>]> {
        match &self.coords {
            Coords::Rational(_) => None,
            Coords::Floating(p) => Some(p),
        }
    }

    /// Floating coordinates of point `i`.
    pub fn point_f64(&self, i: usize) -> Point2<f64> {
        match &self.coords {
            Coords::Rational(p) => p[i].to_f64(),
            Coords::Floating(p) => p[i].clone(),
        }
    }

    /// Euclidean distance between points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match &self.coords {
            Coords::Rational(p) => p[i].distance(&p[j]),
            Coords::Floating(p) => p[i].distance(&p[j]),
        }
    }

    /// Exact squared distance, rational backend only.
    pub fn squared_distance_exact(&self, i: usize, j: usize) -> Option<BigRational> {
        match &self.coords {
            Coords::Rational(p) => Some(p[i].squared_distance(&p[j])),
            Coords::Floating(_) => None,
        }
    }

    /// Compares the distance between `i` and `j` with `radius`. Exact on the
    /// rational backend (via `sigma` against `radius^2`).
    pub fn compare_distance(&self, i: usize, j: usize, radius: &BigRational) -> Ordering {
        match &self.coords {
            Coords::Rational(p) => p[i].squared_distance(&p[j]).cmp(&(radius * radius)),
            Coords::Floating(p) => {
                let d = p[i].distance(&p[j]);
                d.total_cmp(&rational_to_f64(radius))
            }
        }
    }

    /// Compares the distances of two pairs. Exact on the rational backend.
    pub fn compare_pair_distances(&self, a: (usize, usize), b: (usize, usize)) -> Ordering {
        match &self.coords {
            Coords::Rational(p) => p[a.0]
                .squared_distance(&p[a.1])
                .cmp(&p[b.0].squared_distance(&p[b.1])),
            Coords::Floating(p) => p[a.0]
                .distance(&p[a.1])
                .total_cmp(&p[b.0].distance(&p[b.1])),
        }
    }

    /// Multiplies every coordinate by `factor`. The backend is preserved; a
    /// floating factor applied to a rational set is converted exactly.
    pub fn scale(&self, factor: impl Into<ScaleFactor>) -> Result<PointSet, GeometryError> {
        let factor = factor.into();
        let as_f64 = factor.to_f64();
        if !(as_f64 > 0.0) || !as_f64.is_finite() {
            return Err(GeometryError::InvalidScale);
        }
        match &self.coords {
            Coords::Rational(p) => {
                let l = factor.to_exact()?;
                if !l.is_positive() {
                    return Err(GeometryError::InvalidScale);
                }
                let scaled = p
                    .iter()
                    .map(|pt| Point2::new(&pt.x * &l, &pt.y * &l))
                    .collect();
                Ok(PointSet {
                    coords: Coords::Rational(scaled),
                })
            }
            Coords::Floating(p) => {
                let scaled = p
                    .iter()
                    .map(|pt| Point2::new(pt.x * as_f64, pt.y * as_f64))
                    .collect();
                PointSet::floating(scaled)
            }
        }
    }

    /// Restricts to the points at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<PointSet, GeometryError> {
        let len = self.len();
        if let Some(&index) = indices.iter().find(|&&i| i >= len) {
            return Err(GeometryError::IndexOutOfRange { index, len });
        }
        match &self.coords {
            Coords::Rational(p) => {
                PointSet::rational(indices.iter().map(|&i| p[i].clone()).collect())
            }
            Coords::Floating(p) => {
                PointSet::floating(indices.iter().map(|&i| p[i].clone()).collect())
            }
        }
    }

    /// Maximum bit-length over all numerators and denominators (lowest
    /// terms), rational backend only.
    pub fn bit_length(&self) -> Option<u64> {
        let p = self.rational_points()?;
        Some(
            p.iter()
                .flat_map(|pt| [&pt.x, &pt.y])
                .flat_map(|c| [bit_length(c.numer()), bit_length(c.denom())])
                .max()
                .unwrap_or(1),
        )
    }
}

/// Exact margin data available on the rational backend.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMargins {
    /// Squared minimum pairwise distance.
    pub delta_squared: BigRational,
    /// Squared distance of the pair realizing `eta`, if any pair exceeds 1.
    pub eta_pair_squared: Option<BigRational>,
    pub bit_length: u64,
    /// `2^(-12 B)`.
    pub epsilon: BigRational,
}

impl ExactMargins {
    /// Checks `delta >= epsilon` and, when some pair exceeds 1,
    /// `eta >= epsilon`, both exactly on squared quantities.
    pub fn bit_margin_holds(&self) -> bool {
        let eps_sq = &self.epsilon * &self.epsilon;
        let delta_ok = self.delta_squared >= eps_sq;
        let eta_ok = match &self.eta_pair_squared {
            Some(sigma) => {
                let one_plus = BigRational::one() + &self.epsilon;
                *sigma >= &one_plus * &one_plus
            }
            None => true,
        };
        delta_ok && eta_ok
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginReport {
    /// Minimum pairwise distance.
    pub delta: f64,
    /// Minimum of `d - 1` over pairs with `d > 1`, or 1 when there is none.
    pub eta: f64,
    pub eta_is_sentinel: bool,
    pub delta_pair: (usize, usize),
    pub eta_pair: Option<(usize, usize)>,
    pub exact: Option<ExactMargins>,
}

/// `2^(-12 B)` as an exact rational.
pub fn bit_margin_epsilon(bit_length: u64) -> BigRational {
    let denom = BigInt::one() << (12 * bit_length as usize);
    BigRational::new(BigInt::one(), denom)
}

/// Finite-set margins `delta` and `eta`, plus the bit-complexity margin on
/// the rational backend.
pub fn margins(points: &PointSet) -> Result<MarginReport, GeometryError> {
    let n = points.len();
    if n < 2 {
        return Err(GeometryError::TooFewPoints {
            needed: 2,
            found: n,
        });
    }
    match &points.coords {
        Coords::Rational(p) => {
            let one = BigRational::one();
            let mut min_sq: Option<(BigRational, (usize, usize))> = None;
            let mut eta_sq: Option<(BigRational, (usize, usize))> = None;
            for i in 0..n {
                for j in (i + 1)..n {
                    let sigma = p[i].squared_distance(&p[j]);
                    if sigma.is_zero() {
                        return Err(GeometryError::DuplicatePoint {
                            first: i,
                            second: j,
                        });
                    }
                    if min_sq.as_ref().is_none_or(|(m, _)| sigma < *m) {
                        min_sq = Some((sigma.clone(), (i, j)));
                    }
                    if sigma > one && eta_sq.as_ref().is_none_or(|(m, _)| sigma < *m) {
                        eta_sq = Some((sigma, (i, j)));
                    }
                }
            }
            let (delta_squared, delta_pair) = min_sq.expect("n >= 2");
            let delta = sqrt_rational(&delta_squared);
            let (eta, eta_pair, eta_pair_squared) = match eta_sq {
                // d - 1 = (sigma - 1) / (d + 1), which keeps precision when d is close to 1
                Some((sigma, pair)) => {
                    let excess = rational_to_f64(&(&sigma - &one));
                    (
                        excess / (sqrt_rational(&sigma) + 1.0),
                        Some(pair),
                        Some(sigma),
                    )
                }
                None => (1.0, None, None),
            };
            let bits = points.bit_length().expect("rational backend");
            Ok(MarginReport {
                delta,
                eta,
                eta_is_sentinel: eta_pair.is_none(),
                delta_pair,
                eta_pair,
                exact: Some(ExactMargins {
                    delta_squared,
                    eta_pair_squared,
                    bit_length: bits,
                    epsilon: bit_margin_epsilon(bits),
                }),
            })
        }
        Coords::Floating(p) => {
            let mut delta = (f64::INFINITY, (0, 1));
            let mut eta: Option<(f64, (usize, usize))> = None;
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = p[i].distance(&p[j]);
                    if d == 0.0 {
                        return Err(GeometryError::DuplicatePoint {
                            first: i,
                            second: j,
                        });
                    }
                    if d < delta.0 {
                        delta = (d, (i, j));
                    }
                    if d > 1.0 && eta.is_none_or(|(e, _)| d - 1.0 < e) {
                        eta = Some((d - 1.0, (i, j)));
                    }
                }
            }
            Ok(MarginReport {
                delta: delta.0,
                eta: eta.map_or(1.0, |e| e.0),
                eta_is_sentinel: eta.is_none(),
                delta_pair: delta.1,
                eta_pair: eta.map(|e| e.1),
                exact: None,
            })
        }
    }
}

/// Graph on the points of a set, with an edge between every pair at
/// distance at most the radius.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitDiskGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<FixedBitSet>,
}

impl UnitDiskGraph {
    /// Builds a graph directly from an edge list (pairs in any order).
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = UnitDiskGraph {
            n,
            edges: BTreeSet::new(),
            adjacency: vec![FixedBitSet::with_capacity(n); n],
        };
        for (a, b) in edges {
            assert!(a < n && b < n && a != b, "invalid edge ({a}, {b})");
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            g.edges.insert((i, j));
            g.adjacency[i].insert(j);
            g.adjacency[j].insert(i);
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adjacency[i].contains(j)
    }

    pub fn neighbors(&self, i: usize) -> &FixedBitSet {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].count_ones(..)
    }

    pub fn is_independent(&self, indices: &[usize]) -> bool {
        indices
            .iter()
            .enumerate()
            .all(|(a, &i)| indices[a + 1..].iter().all(|&j| !self.has_edge(i, j)))
    }
}

/// Unit-disk graph `G(P)`: edges between points at distance at most 1.
pub fn unit_disk_graph(points: &PointSet) -> UnitDiskGraph {
    unit_disk_graph_at(points, &BigRational::one())
}

/// Disk graph with an arbitrary radius; boundary pairs are adjacent.
pub fn unit_disk_graph_at(points: &PointSet, radius: &BigRational) -> UnitDiskGraph {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if points.compare_distance(i, j, radius) != Ordering::Greater {
                edges.push((i, j));
            }
        }
    }
    UnitDiskGraph::from_edges(n, edges)
}
