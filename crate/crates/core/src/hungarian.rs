//! Maximum-reward square assignment.
//!
//! [`solve_max`] runs the O(n³) shortest-augmenting-path form of the Hungarian
//! method on the cost matrix `max_entry - a`. Among equally optimal matchings
//! the lexicographically smallest permutation is returned, which is also the
//! rule used by the exhaustive [`solve_brute_force`] oracle.

use itertools::Itertools;

use crate::error::{Error, Result};

/// Largest order accepted by [`solve_brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Relative width of the band in which two objective values count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Square matrix of nonnegative, finite rewards stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RewardMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(n * n);
        for (row, entries) in rows.into_iter().enumerate() {
            if entries.len() != n {
                return Err(Error::NotSquare {
                    row,
                    len: entries.len(),
                    expected: n,
                });
            }
            data.extend(entries);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(Error::NotSquare {
                row: data.len() / n,
                len: data.len() % n,
                expected: n,
            });
        }
        for (idx, &value) in data.iter().enumerate() {
            let (row, col) = (idx / n, idx % n);
            if !value.is_finite() {
                return Err(Error::NonFiniteReward { row, col, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeReward { row, col, value });
            }
        }
        Ok(RewardMatrix { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let data = (0..n * n).map(|idx| f(idx / n, idx % n)).collect();
        Self::from_row_major(n, data)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplies every entry by a positive constant. The set of optimal
    /// permutations is unchanged.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidScale(factor));
        }
        Self::from_row_major(self.n, self.data.iter().map(|v| v * factor).collect())
    }

    /// Sum of `a[row][perm[row]]`, accumulated in row order.
    pub fn objective(&self, perm: &[usize]) -> f64 {
        perm.iter()
            .enumerate()
            .map(|(row, &col)| self.get(row, col))
            .sum()
    }

    fn tie_band(&self) -> f64 {
        TIE_TOLERANCE * self.max_entry().max(f64::MIN_POSITIVE)
    }
}

/// A perfect matching: row `r` is matched to column `perm[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub value: f64,
}

impl Assignment {
    fn new(matrix: &RewardMatrix, perm: Vec<usize>) -> Self {
        let value = matrix.objective(&perm);
        Assignment { perm, value }
    }
}

/// Solves `max Σ a[r][perm[r]]` over all permutations in O(n³).
pub fn solve_max(matrix: &RewardMatrix) -> Assignment {
    let n = matrix.order();
    let top = matrix.max_entry();
    let cost: Vec<f64> = matrix.data.iter().map(|a| top - a).collect();

    // 1-based potentials; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let slack = cost[(r0 - 1) * n + col - 1] - u[r0] - v[col];
                if slack < min_slack[col] {
                    min_slack[col] = slack;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of_col[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            row_of_col[col0] = row_of_col[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    for col in 1..=n {
        col_of[row_of_col[col] - 1] = col - 1;
    }

    // Every optimal matching lives in the equality subgraph of the final duals.
    let band = matrix.tie_band();
    let tight: Vec<bool> = (0..n * n)
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            cost[idx] - u[r + 1] - v[c + 1] <= band
        })
        .collect();
    lexicographic_refine(n, &tight, &mut col_of);

    Assignment::new(matrix, col_of)
}

/// Rewrites a perfect matching inside the `tight` graph into the
/// lexicographically smallest perfect matching of that graph.
fn lexicographic_refine(n: usize, tight: &[bool], col_of: &mut [usize]) {
    const FREE: usize = usize::MAX;
    let mut row_of = vec![FREE; n];
    for (r, &c) in col_of.iter().enumerate() {
        row_of[c] = r;
    }

    fn reroute(
        row: usize,
        n: usize,
        tight: &[bool],
        blocked: &[bool],
        visited: &mut [bool],
        row_of: &mut [usize],
        col_of: &mut [usize],
    ) -> bool {
        for c in 0..n {
            if !tight[row * n + c] || blocked[c] || visited[c] {
                continue;
            }
            visited[c] = true;
            let owner = row_of[c];
            if owner == FREE || reroute(owner, n, tight, blocked, visited, row_of, col_of) {
                row_of[c] = row;
                col_of[row] = c;
                return true;
            }
        }
        false
    }

    let mut blocked = vec![false; n];
    for r in 0..n {
        let current = col_of[r];
        for c in 0..current {
            if !tight[r * n + c] || blocked[c] {
                continue;
            }
            let displaced = row_of[c];
            row_of[current] = FREE;
            row_of[c] = r;
            col_of[r] = c;
            blocked[c] = true;
            let mut visited = vec![false; n];
            if reroute(
                displaced,
                n,
                tight,
                &blocked,
                &mut visited,
                &mut row_of,
                col_of,
            ) {
                break;
            }
            blocked[c] = false;
            row_of[c] = displaced;
            col_of[displaced] = c;
            row_of[current] = r;
            col_of[r] = current;
        }
        blocked[col_of[r]] = true;
    }
}

/// Exhaustive maximum over all `n!` permutations, for `n <= 10`.
pub fn solve_brute_force(matrix: &RewardMatrix) -> Result<Assignment> {
    let n = matrix.order();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::BruteForceTooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let best = (0..n)
        .permutations(n)
        .map(|perm| matrix.objective(&perm))
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - n as f64 * matrix.tie_band();
    // itertools yields permutations of a sorted range in lexicographic order
    let perm = (0..n)
        .permutations(n)
        .find(|perm| matrix.objective(perm) >= threshold)
        .expect("at least one permutation reaches the maximum");
    Ok(Assignment::new(matrix, perm))
}
