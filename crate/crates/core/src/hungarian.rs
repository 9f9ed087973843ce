//! Maximum-weight perfect matching on a square matrix (Hungarian method).
//!
//! Entries may be `-inf` to mark forbidden pairs. Among optimal
//! permutations the lexicographically smallest one is returned, so results
//! do not depend on floating-point tie order inside the solver.

use crate::error::AllocError;

/// Returns `perm` with `perm[row] = column` maximizing `sum weights[row][perm[row]]`.
pub fn assign_subchannels(weights: &[Vec<f64>]) -> Result<Vec<usize>, AllocError> {
    let n = weights.len();
    if n == 0 || weights.iter().any(|r| r.len() != n) {
        return Err(AllocError::NotSquare);
    }
    let finite_max = weights.iter().flatten().filter(|w| w.is_finite()).fold(0.0f64, |a, w| a.max(w.abs()));
    let big = (finite_max + 1.0) * (n as f64 + 1.0) * 4.0;
    // Hungarian below minimizes; forbidden entries get a cost no finite
    // matching can be worse than.
    let cost: Vec<Vec<f64>> = weights
        .iter()
        .map(|r| r.iter().map(|&w| if w.is_finite() { -w } else { big }).collect())
        .collect();

    let rows: Vec<usize> = (0..n).collect();
    let cols: Vec<usize> = (0..n).collect();
    let (best, perm) = min_cost(&cost, &rows, &cols);
    if perm.iter().enumerate().any(|(r, &c)| !weights[r][c].is_finite()) {
        return Err(AllocError::NoFeasibleMatching);
    }

    // Lexicographic tie-break: fix rows in order to the smallest column that
    // still admits an optimal completion.
    let tol = 1e-9 * best.abs().max(1.0);
    let mut result = vec![usize::MAX; n];
    let mut fixed = 0.0;
    let mut free_cols: Vec<usize> = cols;
    for r in 0..n {
        let rest_rows: Vec<usize> = (r + 1..n).collect();
        let mut chosen = None;
        for (idx, &c) in free_cols.iter().enumerate() {
            if cost[r][c] >= big {
                continue;
            }
            let remaining: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
            let (sub, _) = min_cost(&cost, &rest_rows, &remaining);
            if fixed + cost[r][c] + sub <= best + tol {
                chosen = Some((idx, c));
                break;
            }
        }
        let (idx, c) = chosen.unwrap_or_else(|| {
            // numerical fallback: keep the solver's own choice
            let c = perm[r];
            (free_cols.iter().position(|&x| x == c).expect("column still free"), c)
        });
        result[r] = c;
        fixed += cost[r][c];
        free_cols.remove(idx);
    }
    Ok(result)
}

/// Min-cost assignment of `rows` to `cols` (equal lengths) using row/column
/// potentials. Returns the total cost and `perm[i]` = column for `rows[i]`.
fn min_cost(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> (f64, Vec<usize>) {
    let n = rows.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let a = |i: usize, j: usize| cost[rows[i - 1]][cols[j - 1]];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = cols[j - 1];
    }
    let total = (0..n).map(|i| cost[rows[i]][perm[i]]).sum();
    (total, perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out.sort();
        out
    }

    fn brute_force(w: &[Vec<f64>]) -> Vec<usize> {
        let mut best = f64::NEG_INFINITY;
        let mut arg = Vec::new();
        for p in permutations(w.len()) {
            let s: f64 = p.iter().enumerate().map(|(r, &c)| w[r][c]).sum();
            if s > best {
                best = s;
                arg = p;
            }
        }
        arg
    }

    #[test]
    fn diagonal_dominant_gives_identity() {
        let w = vec![vec![10.0, 1.0, 2.0], vec![0.5, 9.0, 1.0], vec![2.0, 3.0, 8.0]];
        assert_eq!(assign_subchannels(&w).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn random_4x4_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..50 {
            let w: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            assert_eq!(assign_subchannels(&w).unwrap(), brute_force(&w));
        }
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let w = vec![vec![1.0; 3]; 3];
        assert_eq!(assign_subchannels(&w).unwrap(), vec![0, 1, 2]);
        let w = vec![vec![0.0, 5.0, 5.0], vec![5.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]];
        assert_eq!(assign_subchannels(&w).unwrap(), brute_force(&w));
    }

    #[test]
    fn forbidden_entries_are_avoided() {
        let ninf = f64::NEG_INFINITY;
        let w = vec![vec![ninf, 1.0], vec![5.0, 100.0]];
        assert_eq!(assign_subchannels(&w).unwrap(), vec![1, 0]);
        let w = vec![vec![ninf, ninf], vec![1.0, 2.0]];
        assert_eq!(assign_subchannels(&w), Err(AllocError::NoFeasibleMatching));
        assert_eq!(assign_subchannels(&[]), Err(AllocError::NotSquare));
        assert_eq!(assign_subchannels(&[vec![1.0, 2.0]]), Err(AllocError::NotSquare));
    }
}
