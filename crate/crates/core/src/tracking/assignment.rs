/// Costs at or above this value mark a pairing as forbidden.
pub const FORBIDDEN: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row, if any.
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the costs of the assigned pairs.
    pub cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    pub fn matched_count(&self) -> usize {
        self.row_to_col.iter().flatten().count()
    }
}

fn allowed(c: f64) -> bool {
    c < FORBIDDEN && !c.is_nan()
}

/// Minimum-cost rectangular assignment (Kuhn-Munkres with potentials).
///
/// Forbidden pairs are never returned. Among assignments that pair as many
/// rows as possible through allowed entries, the one with the least total
/// cost is chosen.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    debug_assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    if n == 0 || m == 0 {
        return Assignment {
            row_to_col: vec![None; n],
            cost: 0.0,
        };
    }

    // Forbidden entries get a penalty larger than any difference of allowed
    // sums, so the solver maximizes allowed matches first.
    let k = n.min(m) as f64;
    let max_abs = cost
        .iter()
        .flatten()
        .filter(|c| allowed(**c))
        .fold(0.0f64, |a, c| a.max(c.abs()));
    let penalty = (2.0 * max_abs + 1.0) * (k + 1.0);

    let transpose = n > m;
    let (rows, cols) = if transpose { (m, n) } else { (n, m) };
    let at = |r: usize, c: usize| -> f64 {
        let v = if transpose { cost[c][r] } else { cost[r][c] };
        if allowed(v) {
            v
        } else {
            penalty
        }
    };

    // 1-indexed potentials formulation; column 0 is a virtual start.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
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

    let mut row_to_col = vec![None; n];
    let mut total = 0.0;
    for j in 1..=cols {
        if p[j] == 0 {
            continue;
        }
        let (r, c) = if transpose {
            (j - 1, p[j] - 1)
        } else {
            (p[j] - 1, j - 1)
        };
        if allowed(cost[r][c]) {
            row_to_col[r] = Some(c);
            total += cost[r][c];
        }
    }
    Assignment {
        row_to_col,
        cost: total,
    }
}
