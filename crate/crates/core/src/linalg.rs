//! Small dense symmetric solves.
//!
//! Cholesky first; if the matrix is not numerically positive definite we fall
//! back to a Bunch-Kaufman `L D L^T` factorization with 1x1 and 2x2 pivots.
//! Matrices are stored row-major in full.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    BunchKaufman,
}

#[derive(Clone, Copy, Debug)]
enum Block {
    One(usize),
    Two(usize),
}

#[derive(Clone, Debug)]
pub struct Factorization {
    n: usize,
    kind: FactorKind,
    // Cholesky: lower factor. Bunch-Kaufman: multipliers below the block
    // diagonal and the D blocks on it.
    factor: Vec<f64>,
    perm: Vec<usize>,
    blocks: Vec<Block>,
}

/// Returned when no usable pivot exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingularMatrix;

impl Factorization {
    pub fn new(a: &[f64], n: usize) -> Result<Self, SingularMatrix> {
        assert_eq!(a.len(), n * n);
        match cholesky(a, n) {
            Some(factor) => Ok(Self {
                n,
                kind: FactorKind::Cholesky,
                factor,
                perm: (0..n).collect(),
                blocks: Vec::new(),
            }),
            None => bunch_kaufman(a, n),
        }
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        match self.kind {
            FactorKind::Cholesky => self.solve_cholesky(b),
            FactorKind::BunchKaufman => self.solve_ldlt(b),
        }
    }

    fn solve_cholesky(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let l = &self.factor;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }

    fn solve_ldlt(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let a = &self.factor;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // L y = P b
        for block in &self.blocks {
            match *block {
                Block::One(k) => {
                    for i in (k + 1)..n {
                        y[i] -= a[i * n + k] * y[k];
                    }
                }
                Block::Two(k) => {
                    for i in (k + 2)..n {
                        y[i] -= a[i * n + k] * y[k] + a[i * n + k + 1] * y[k + 1];
                    }
                }
            }
        }
        // D
        for block in &self.blocks {
            match *block {
                Block::One(k) => y[k] /= a[k * n + k],
                Block::Two(k) => {
                    let (d11, d21, d22) =
                        (a[k * n + k], a[(k + 1) * n + k], a[(k + 1) * n + k + 1]);
                    let det = d11 * d22 - d21 * d21;
                    let (b1, b2) = (y[k], y[k + 1]);
                    y[k] = (d22 * b1 - d21 * b2) / det;
                    y[k + 1] = (d11 * b2 - d21 * b1) / det;
                }
            }
        }
        // L^T
        for block in self.blocks.iter().rev() {
            match *block {
                Block::One(k) => {
                    let mut s = y[k];
                    for i in (k + 1)..n {
                        s -= a[i * n + k] * y[i];
                    }
                    y[k] = s;
                }
                Block::Two(k) => {
                    let (mut s1, mut s2) = (y[k], y[k + 1]);
                    for i in (k + 2)..n {
                        s1 -= a[i * n + k] * y[i];
                        s2 -= a[i * n + k + 1] * y[i];
                    }
                    y[k] = s1;
                    y[k + 1] = s2;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

/// Lower Cholesky factor, or `None` if a pivot is not strictly positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

fn swap_symmetric(a: &mut [f64], n: usize, i: usize, j: usize) {
    if i == j {
        return;
    }
    for c in 0..n {
        a.swap(i * n + c, j * n + c);
    }
    for r in 0..n {
        a.swap(r * n + i, r * n + j);
    }
}

fn bunch_kaufman(input: &[f64], n: usize) -> Result<Factorization, SingularMatrix> {
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let mut a = input.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        let absakk = a[k * n + k].abs();
        let (imax, colmax) =
            ((k + 1)..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold(
                    (k, 0.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if absakk.max(colmax) == 0.0 || !absakk.is_finite() || !colmax.is_finite() {
            return Err(SingularMatrix);
        }
        let (kp, two) = if absakk >= alpha * colmax {
            (k, false)
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| a[imax * n + j].abs())
                .fold(0.0, f64::max);
            if absakk * rowmax >= alpha * colmax * colmax {
                (k, false)
            } else if a[imax * n + imax].abs() >= alpha * rowmax {
                (imax, false)
            } else {
                (imax, true)
            }
        };
        let kk = if two { k + 1 } else { k };
        swap_symmetric(&mut a, n, kk, kp);
        perm.swap(kk, kp);
        if two {
            let (d11, d21, d22) = (a[k * n + k], a[(k + 1) * n + k], a[(k + 1) * n + k + 1]);
            let det = d11 * d22 - d21 * d21;
            if det == 0.0 || !det.is_finite() {
                return Err(SingularMatrix);
            }
            let rows = (k + 2)..n;
            let mult: Vec<(f64, f64)> = rows
                .clone()
                .map(|i| {
                    let (c1, c2) = (a[i * n + k], a[i * n + k + 1]);
                    ((d22 * c1 - d21 * c2) / det, (d11 * c2 - d21 * c1) / det)
                })
                .collect();
            for (ri, i) in rows.clone().enumerate() {
                for j in rows.clone() {
                    a[i * n + j] -= mult[ri].0 * a[k * n + j] + mult[ri].1 * a[(k + 1) * n + j];
                }
            }
            for (ri, i) in rows.enumerate() {
                a[i * n + k] = mult[ri].0;
                a[i * n + k + 1] = mult[ri].1;
            }
            blocks.push(Block::Two(k));
            k += 2;
        } else {
            let d = a[k * n + k];
            if d == 0.0 {
                return Err(SingularMatrix);
            }
            let mult: Vec<f64> = ((k + 1)..n).map(|i| a[i * n + k] / d).collect();
            for (ri, i) in ((k + 1)..n).enumerate() {
                for j in (k + 1)..n {
                    a[i * n + j] -= mult[ri] * a[k * n + j];
                }
            }
            for (ri, i) in ((k + 1)..n).enumerate() {
                a[i * n + k] = mult[ri];
            }
            blocks.push(Block::One(k));
            k += 1;
        }
    }
    Ok(Factorization {
        n,
        kind: FactorKind::BunchKaufman,
        factor: a,
        perm,
        blocks,
    })
}

pub fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager/Higham estimate of `||A^{-1}||_1` for symmetric `A`, using only
/// solves with the factorization.
pub fn inverse_norm1_estimate(f: &Factorization) -> f64 {
    let n = f.n;
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = f.solve(&x);
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi: Vec<f64> = y
            .iter()
            .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let z = f.solve(&xi);
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if zmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = vec![0.0; n];
        x[j] = 1.0;
    }
    // Higham's alternating vector guards against the rare underestimate.
    let alt: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
        })
        .collect();
    let y = f.solve(&alt);
    let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
    est.max(alt_est)
}
