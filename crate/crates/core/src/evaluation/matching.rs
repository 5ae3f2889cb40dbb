//! Maximum-weight bipartite matching (Hungarian algorithm with potentials).

/// Assignment of rows to distinct columns maximizing the total weight.
///
/// `weights[r][c]` must be finite and non-negative, so a matching that covers
/// the smaller side is always among the optimal ones. Returns, for every row,
/// its matched column (`None` when there are more rows than columns and the
/// row is left over).
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| weights[r][c]).collect())
            .collect();
        let by_col = min_cost_assignment(&negate(&transposed));
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            out[r] = Some(c);
        }
        return out;
    }
    min_cost_assignment(&negate(weights))
        .into_iter()
        .map(Some)
        .collect()
}

fn negate(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    w.iter().map(|r| r.iter().map(|x| -x).collect()).collect()
}

/// Minimum-cost assignment for an `n x m` matrix with `n <= m`; returns the
/// column of every row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    debug_assert!(n <= m);
    // 1-based arrays; column 0 is a virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_v = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for c in 1..=m {
                if used[c] {
                    continue;
                }
                let cur = cost[r0 - 1][c - 1] - u[r0] - v[c];
                if cur < min_v[c] {
                    min_v[c] = cur;
                    way[c] = col0;
                }
                if min_v[c] < delta {
                    delta = min_v[c];
                    col1 = c;
                }
            }
            for c in 0..=m {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_v[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for c in 1..=m {
        if owner[c] != 0 {
            assignment[owner[c] - 1] = c - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(w: &[Vec<f64>], m: &[Option<usize>]) -> f64 {
        m.iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| w[r][c]))
            .sum()
    }

    #[test]
    fn prefers_global_optimum_over_greedy() {
        // Greedy would take (0,0)=0.9 and then (1,1)=0.1.
        let w = vec![vec![0.9, 0.8], vec![0.7, 0.1]];
        let m = max_weight_matching(&w);
        assert_eq!(m, vec![Some(1), Some(0)]);
        assert!((total(&w, &m) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rectangular_shapes() {
        let wide = vec![vec![0.1, 0.5, 0.2]];
        assert_eq!(max_weight_matching(&wide), vec![Some(1)]);
        let tall = vec![vec![0.1], vec![0.5], vec![0.2]];
        assert_eq!(max_weight_matching(&tall), vec![None, Some(0), None]);
        assert_eq!(max_weight_matching(&[vec![], vec![]]), vec![None, None]);
        assert!(max_weight_matching(&[]).is_empty());
    }
}
