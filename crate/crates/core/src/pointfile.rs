//! Plain-text point files.
//!
//! One point per line, two whitespace-separated coordinates. A coordinate is
//! a decimal literal (`0.75`, `-1e-3`) or an exact fraction `p/q`. Lines
//! starting with `#` and blank lines are ignored. If any coordinate is a
//! fraction, or the caller forces exact parsing, every coordinate is read
//! as an exact rational (decimal literals included).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::geometry::{GeometryError, Point2, PointSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid point set: {0}")]
    Geometry(#[from] GeometryError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses a decimal literal exactly, e.g. `-12.5e-3` becomes `-1/80`.
pub fn parse_decimal_exact(s: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = all_digits.parse().ok()?;
    if negative {
        numer = -numer;
    }
    let shift = exponent.checked_sub(frac_part.len() as i64)?;
    if shift.unsigned_abs() > 100_000 {
        return None;
    }
    let ten_pow = num_traits::pow(BigInt::from(10), shift.unsigned_abs() as usize);
    Some(if shift >= 0 {
        BigRational::from_integer(numer * ten_pow)
    } else {
        BigRational::new(numer, ten_pow)
    })
}

fn parse_fraction(s: &str) -> Option<Result<BigRational, &'static str>> {
    let (p, q) = s.split_once('/')?;
    let parsed = (|| {
        let p: BigInt = p.parse().map_err(|_| "bad numerator")?;
        let q: BigInt = q.parse().map_err(|_| "bad denominator")?;
        if q.is_zero() {
            return Err("zero denominator");
        }
        Ok(BigRational::new(p, q))
    })();
    Some(parsed)
}

/// Parses a point file. `force_exact` selects the rational backend even
/// when no fraction is present.
pub fn parse_point_file(text: &str, force_exact: bool) -> Result<PointSet, ParseError> {
    let mut rows: Vec<(usize, [&str; 2])> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(syntax(
                line,
                format!("expected 2 coordinates, found {}", fields.len()),
            ));
        }
        rows.push((line, [fields[0], fields[1]]));
    }
    let exact = force_exact || rows.iter().any(|(_, f)| f.iter().any(|c| c.contains('/')));
    if exact {
        let mut points = Vec::with_capacity(rows.len());
        for (line, fields) in rows {
            let mut coords = [BigRational::zero(), BigRational::zero()];
            for (slot, field) in coords.iter_mut().zip(fields) {
                *slot = match parse_fraction(field) {
                    Some(Ok(v)) => v,
                    Some(Err(msg)) => return Err(syntax(line, format!("{msg} in '{field}'"))),
                    None => parse_decimal_exact(field)
                        .ok_or_else(|| syntax(line, format!("invalid number '{field}'")))?,
                };
            }
            let [x, y] = coords;
            points.push(Point2::new(x, y));
        }
        Ok(PointSet::rational(points)?)
    } else {
        let mut points = Vec::with_capacity(rows.len());
        for (line, fields) in rows {
            let mut coords = [0.0f64; 2];
            for (slot, field) in coords.iter_mut().zip(fields) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| syntax(line, format!("invalid number '{field}'")))?;
                if !v.is_finite() {
                    return Err(syntax(line, format!("non-finite coordinate '{field}'")));
                }
                *slot = v;
            }
            points.push(Point2::new(coords[0], coords[1]));
        }
        Ok(PointSet::floating(points)?)
    }
}

pub fn format_rational(v: &BigRational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Writes a point set in the format read by [`parse_point_file`]. Rational
/// coordinates are written as exact fractions, so the round trip is lossless
/// on both backends.
pub fn write_point_file(points: &PointSet) -> String {
    let mut out = String::new();
    if let Some(p) = points.rational_points() {
        for pt in p {
            out.push_str(&format!(
                "{} {}\n",
                format_rational(&pt.x),
                format_rational(&pt.y)
            ));
        }
    } else if let Some(p) = points.floating_points() {
        for pt in p {
            out.push_str(&format!("{:?} {:?}\n", pt.x, pt.y));
        }
    }
    out
}
