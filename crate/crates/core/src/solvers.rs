//! Exhaustive solvers: Solow-Polasky subset selection, unit-disk independent
//! set, and a greedy baseline.
//!
//! Selection is NP-hard, so the exact solver enumerates and refuses inputs
//! whose subset count exceeds a budget.

use std::cmp::Ordering;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::diversity::{sp_of_subset, DiversityError, KernelParams, SignedLog, Weighting};
use crate::geometry::{PointSet, UnitDiskGraph};
use crate::subsets::{binomial, fold_subsets, Execution};

pub const DEFAULT_BUDGET: u128 = 10_000_000;
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("enumeration needs {required} steps, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("subset size {k} out of range for {n} points")]
    SizeOutOfRange { k: usize, n: usize },
    #[error("evaluating subset {indices:?}: {source}")]
    Subset {
        indices: Vec<usize>,
        #[source]
        source: DiversityError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectOptions {
    /// Maximum number of subsets (or search nodes) to visit.
    pub budget: u128,
    /// Absolute tolerance on SP for a subset to count as optimal.
    pub tie_tolerance: f64,
    pub execution: Execution,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            execution: Execution::default(),
        }
    }
}

/// A subset (sorted indices) with its objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub value: f64,
    /// `k - value`, see [`Weighting::deficit`].
    pub deficit: SignedLog,
}

impl Selection {
    fn from_weighting(indices: Vec<usize>, w: &Weighting) -> Self {
        Self {
            indices,
            value: w.sp_value,
            deficit: w.deficit,
        }
    }

    /// `Greater` when `self` has the larger objective.
    pub fn cmp_objective(&self, other: &Self) -> Ordering {
        other.deficit.total_cmp(&self.deficit)
    }

    /// `|SP(self) - SP(other)|`, computed from the deficits.
    pub fn value_gap(&self, other: &Self) -> f64 {
        self.deficit.difference(&other.deficit).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    /// Lexicographically smallest member of `all_optima`.
    pub best: Selection,
    /// Every subset within the tie tolerance of the maximum, sorted.
    pub all_optima: Vec<Selection>,
    pub evaluated_count: u128,
}

enum Acc {
    Ok {
        optima: Vec<Selection>,
        count: u128,
    },
    Failed {
        indices: Vec<usize>,
        error: DiversityError,
    },
}

fn top(optima: &[Selection]) -> Option<&Selection> {
    optima.iter().max_by(|a, b| a.cmp_objective(b))
}

fn merge(a: Acc, b: Acc, tol: f64) -> Acc {
    match (a, b) {
        (
            Acc::Failed {
                indices: ia,
                error: ea,
            },
            Acc::Failed {
                indices: ib,
                error: eb,
            },
        ) => {
            if ia <= ib {
                Acc::Failed {
                    indices: ia,
                    error: ea,
                }
            } else {
                Acc::Failed {
                    indices: ib,
                    error: eb,
                }
            }
        }
        (f @ Acc::Failed { .. }, _) | (_, f @ Acc::Failed { .. }) => f,
        (
            Acc::Ok {
                optima: mut oa,
                count: ca,
            },
            Acc::Ok {
                optima: ob,
                count: cb,
            },
        ) => {
            oa.extend(ob);
            let best = top(&oa).cloned();
            if let Some(best) = best {
                oa.retain(|s| s.value_gap(&best) <= tol);
            }
            Acc::Ok {
                optima: oa,
                count: ca + cb,
            }
        }
    }
}

fn check_size(k: usize, n: usize, min: usize) -> Result<(), SolverError> {
    if k < min || k > n {
        Err(SolverError::SizeOutOfRange { k, n })
    } else {
        Ok(())
    }
}

fn check_budget(required: Option<u128>, budget: u128) -> Result<u128, SolverError> {
    match required {
        Some(r) if r <= budget => Ok(r),
        Some(r) => Err(SolverError::BudgetExceeded {
            required: r,
            budget,
        }),
        None => Err(SolverError::BudgetExceeded {
            required: u128::MAX,
            budget,
        }),
    }
}

/// Exact maximizer of SP over all k-subsets, by enumeration.
pub fn sp_select_exact(
    points: &PointSet,
    k: usize,
    params: &KernelParams,
    options: &SelectOptions,
) -> Result<SelectionResult, SolverError> {
    let n = points.len();
    check_size(k, n, 2)?;
    check_budget(binomial(n, k), options.budget)?;
    let tol = options.tie_tolerance;
    let acc = fold_subsets(
        n,
        k,
        options.execution,
        || Acc::Ok {
            optima: Vec::new(),
            count: 0,
        },
        |acc, subset| match acc {
            failed @ Acc::Failed { .. } => failed,
            Acc::Ok { mut optima, count } => match sp_of_subset(points, subset, params) {
                Err(error) => Acc::Failed {
                    indices: subset.to_vec(),
                    error,
                },
                Ok(w) => {
                    let cand = Selection::from_weighting(subset.to_vec(), &w);
                    match top(&optima).map(|b| (cand.cmp_objective(b), cand.value_gap(b))) {
                        Some((Ordering::Greater, _)) => {
                            optima.retain(|s| s.value_gap(&cand) <= tol);
                            optima.push(cand);
                        }
                        Some((_, gap)) if gap > tol => {}
                        _ => optima.push(cand),
                    }
                    Acc::Ok {
                        optima,
                        count: count + 1,
                    }
                }
            },
        },
        |a, b| merge(a, b, tol),
    );
    match acc {
        Acc::Failed { indices, error } => Err(SolverError::Subset {
            indices,
            source: error,
        }),
        Acc::Ok { mut optima, count } => {
            optima.sort_by(|a, b| a.indices.cmp(&b.indices));
            Ok(SelectionResult {
                best: optima[0].clone(),
                all_optima: optima,
                evaluated_count: count,
            })
        }
    }
}

/// Greedy baseline: start from the farthest pair, then repeatedly add the
/// point giving the largest SP. Ties go to the smallest index.
pub fn sp_select_greedy(
    points: &PointSet,
    k: usize,
    params: &KernelParams,
) -> Result<Selection, SolverError> {
    let n = points.len();
    check_size(k, n, 2)?;
    let mut pair = (0, 1);
    for i in 0..n {
        for j in (i + 1)..n {
            if points.compare_pair_distances((i, j), pair) == Ordering::Greater {
                pair = (i, j);
            }
        }
    }
    let eval = |indices: Vec<usize>| -> Result<Selection, SolverError> {
        sp_of_subset(points, &indices, params)
            .map(|w| Selection::from_weighting(indices.clone(), &w))
            .map_err(|source| SolverError::Subset { indices, source })
    };
    let mut current = eval(vec![pair.0, pair.1])?;
    while current.indices.len() < k {
        let mut best: Option<Selection> = None;
        for c in 0..n {
            if current.indices.contains(&c) {
                continue;
            }
            let mut indices = current.indices.clone();
            indices.push(c);
            indices.sort_unstable();
            let cand = eval(indices)?;
            if best
                .as_ref()
                .is_none_or(|b| cand.cmp_objective(b) == Ordering::Greater)
            {
                best = Some(cand);
            }
        }
        current = best.expect("k <= n leaves a candidate");
    }
    Ok(current)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependentSetAnswer {
    /// Lexicographically smallest independent set of size exactly `k`.
    pub witness: Option<Vec<usize>>,
    pub nodes: u128,
}

impl IndependentSetAnswer {
    pub fn exists(&self) -> bool {
        self.witness.is_some()
    }
}

struct Search<'a> {
    graph: &'a UnitDiskGraph,
    nodes: u128,
    budget: u128,
}

impl Search<'_> {
    fn induced_degree(&self, v: usize, cand: &FixedBitSet) -> usize {
        self.graph.neighbors(v).intersection(cand).count()
    }

    /// Is there an independent set of size `need` inside `cand`?
    fn exists(&mut self, cand: &FixedBitSet, need: usize) -> Result<bool, SolverError> {
        if need == 0 {
            return Ok(true);
        }
        if cand.count_ones(..) < need {
            return Ok(false);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(SolverError::BudgetExceeded {
                required: self.nodes,
                budget: self.budget,
            });
        }
        // isolated vertices can always be taken
        let mut rest = cand.clone();
        let mut need = need;
        let mut pick: Option<(usize, usize)> = None;
        for v in cand.ones() {
            let d = self.induced_degree(v, cand);
            if d == 0 {
                rest.remove(v);
                need = need.saturating_sub(1);
            } else if pick.is_none_or(|(_, best)| d > best) {
                pick = Some((v, d));
            }
        }
        if need == 0 {
            return Ok(true);
        }
        let Some((v, _)) = pick else {
            return Ok(false);
        };
        if rest.count_ones(..) < need {
            return Ok(false);
        }
        let mut with_v = rest.clone();
        with_v.remove(v);
        with_v.difference_with(self.graph.neighbors(v));
        if self.exists(&with_v, need - 1)? {
            return Ok(true);
        }
        rest.remove(v);
        self.exists(&rest, need)
    }
}

/// Decides whether the graph has an independent set of exactly `k`
/// vertices (equivalently, at least `k`), by branch and bound on the
/// highest-degree vertex. `budget` bounds the number of search nodes.
pub fn max_independent_set(
    graph: &UnitDiskGraph,
    k: usize,
    budget: u128,
) -> Result<IndependentSetAnswer, SolverError> {
    let n = graph.n();
    check_size(k, n, 0)?;
    let mut search = Search {
        graph,
        nodes: 0,
        budget,
    };
    let mut cand = FixedBitSet::with_capacity(n);
    cand.insert_range(..);
    if !search.exists(&cand, k)? {
        return Ok(IndependentSetAnswer {
            witness: None,
            nodes: search.nodes,
        });
    }
    // Fix vertices in increasing order while a completion still exists.
    let mut chosen = Vec::with_capacity(k);
    for v in 0..n {
        if chosen.len() == k {
            break;
        }
        if !cand.contains(v) {
            continue;
        }
        cand.remove(v);
        let mut with_v = cand.clone();
        with_v.difference_with(graph.neighbors(v));
        if search.exists(&with_v, k - chosen.len() - 1)? {
            chosen.push(v);
            cand = with_v;
        }
    }
    debug_assert_eq!(chosen.len(), k);
    Ok(IndependentSetAnswer {
        witness: Some(chosen),
        nodes: search.nodes,
    })
}
