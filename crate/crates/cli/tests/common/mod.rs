#![allow(dead_code)]

use std::collections::HashSet;

use rand::Rng;
use spdiv::geometry::Point2;
use spdiv::PointSet;

/// `n` distinct rational points with coordinates `a / den`, `0 <= a <= max_num`.
pub fn random_rational_points<R: Rng>(rng: &mut R, n: usize, max_num: i64, den: i64) -> PointSet {
    let mut seen = HashSet::new();
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let (a, b) = (rng.gen_range(0..=max_num), rng.gen_range(0..=max_num));
        if seen.insert((a, b)) {
            pts.push(Point2::from_fractions(a, den, b, den));
        }
    }
    PointSet::rational(pts).unwrap()
}

/// Rational points whose numerators and denominators all fit in `bits` bits.
pub fn random_bit_points<R: Rng>(rng: &mut R, n: usize, bits: u32) -> PointSet {
    let top = (1i64 << bits) - 1;
    let mut seen = HashSet::new();
    let mut pts = Vec::with_capacity(n);
    let mut attempts = 0;
    while pts.len() < n && attempts < 10_000 {
        attempts += 1;
        let p = Point2::from_fractions(
            rng.gen_range(0..=top),
            rng.gen_range(1..=top),
            rng.gen_range(0..=top),
            rng.gen_range(1..=top),
        );
        if seen.insert(p.clone()) {
            pts.push(p);
        }
    }
    PointSet::rational(pts).unwrap()
}

pub fn write_points(dir: &std::path::Path, name: &str, points: &PointSet) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, spdiv::pointfile::write_point_file(points)).unwrap();
    path
}

/// Runs the CLI in process; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("spdiv").chain(args.iter().copied());
    let code = spdiv_cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}
