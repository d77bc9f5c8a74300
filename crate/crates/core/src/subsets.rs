//! Lexicographic k-subset enumeration, split into chunks that can be folded
//! sequentially or on the rayon pool.
//!
//! Chunk boundaries depend only on `(n, k)`, never on the thread count, and
//! callers merge with commutative, associative reducers, so results do not
//! depend on how the work was scheduled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How subset enumeration is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs on the current rayon pool. Without the `parallel` feature this
    /// behaves like `Sequential`.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
pub fn unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        let mut c = next;
        loop {
            let count = binomial(n - c - 1, remaining).expect("rank fits");
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}

/// Advances `c` to the next k-subset of `0..n`; returns false after the last.
pub fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

const TARGET_CHUNKS: u128 = 512;

fn chunks(total: u128) -> Vec<(u128, u128)> {
    if total == 0 {
        return Vec::new();
    }
    let size = total.div_ceil(TARGET_CHUNKS).max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let len = size.min(total - start);
        out.push((start, len));
        start += len;
    }
    out
}

fn fold_chunk<A, F>(n: usize, k: usize, (start, len): (u128, u128), init: A, fold: &F) -> A
where
    F: Fn(A, &[usize]) -> A,
{
    let mut c = unrank(n, k, start);
    let mut acc = fold(init, &c);
    for _ in 1..len {
        next_combination(&mut c, n);
        acc = fold(acc, &c);
    }
    acc
}

/// Folds every k-subset of `0..n` (indices sorted ascending). `reduce` must
/// be associative and commutative for results to be schedule-independent.
pub fn fold_subsets<A, I, F, R>(
    n: usize,
    k: usize,
    execution: Execution,
    init: I,
    fold: F,
    reduce: R,
) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &[usize]) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    let total = binomial(n, k).expect("subset count overflows u128");
    let parts = chunks(total);
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => parts
            .into_par_iter()
            .map(|part| fold_chunk(n, k, part, init(), &fold))
            .reduce(&init, &reduce),
        _ => parts
            .into_iter()
            .map(|part| fold_chunk(n, k, part, init(), &fold))
            .fold(init(), &reduce),
    }
}
