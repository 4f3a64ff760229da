//! Sparse LU factorization of a square basis with product-form updates.
//!
//! Columns of the basis are indexed by basis position, rows by constraint row.
//! The factorization records the row operations of a Markowitz elimination
//! (`M B = U`) and the pivot rows of `U`; later column replacements append eta
//! vectors instead of refactoring.

const PIVOT_THRESHOLD: f64 = 0.01;
const SINGULAR_TOL: f64 = 1e-11;
/// Columns examined per Markowitz search.
const SEARCH_COLUMNS: usize = 4;

#[derive(Debug, Clone, Default)]
pub(crate) struct Factor {
    m: usize,
    /// Elimination step `k`: pivot row and the rows it updates with their multipliers.
    l_pivot: Vec<usize>,
    l_start: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    /// Step `k` of `U`: pivot row, pivot column, pivot value and the row's
    /// entries in columns eliminated later.
    u_row: Vec<usize>,
    u_col: Vec<usize>,
    u_pivot: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// Product-form updates: position, pivot value and the other entries.
    eta_pos: Vec<usize>,
    eta_pivot: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

/// Positions that could not be pivoted and the rows left without a pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

impl Factor {
    /// Factorizes the `m x m` matrix whose column `i` has entries `columns[i]`.
    pub fn new(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Factor, Singular> {
        let mut f = Factor {
            m,
            l_start: vec![0],
            u_start: vec![0],
            eta_start: vec![0],
            ..Default::default()
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((c, v));
                    cols[c].push(r);
                }
            }
        }
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut singles: Vec<usize> = (0..m).filter(|&c| cols[c].len() == 1).collect();
        let mut active: Vec<usize> = (0..m).collect();
        let mut steps = 0;
        while steps < m {
            let pick = loop {
                match singles.pop() {
                    Some(c) if !col_done[c] && cols[c].len() == 1 => {
                        let r = cols[c][0];
                        let v = rows[r].iter().find(|e| e.0 == c).map_or(0.0, |e| e.1);
                        if v.abs() > SINGULAR_TOL {
                            break Some((r, c));
                        }
                    }
                    Some(_) => continue,
                    None => break None,
                }
            };
            let pick = match pick {
                Some(p) => Some(p),
                None => {
                    active.retain(|&c| !col_done[c]);
                    markowitz(&rows, &cols, &active)
                }
            };
            let Some((r, c)) = pick else { break };
            let pivot = rows[r].iter().find(|e| e.0 == c).expect("pivot entry").1;
            let pivot_entries: Vec<(usize, f64)> =
                rows[r].iter().copied().filter(|e| e.0 != c).collect();
            f.l_pivot.push(r);
            for i in std::mem::take(&mut cols[c]) {
                if i == r {
                    continue;
                }
                let at = rows[i]
                    .iter()
                    .position(|e| e.0 == c)
                    .expect("column pattern matches rows");
                let l = rows[i].swap_remove(at).1 / pivot;
                f.l_row.push(i);
                f.l_val.push(l);
                for &(j, v) in &pivot_entries {
                    match rows[i].iter_mut().find(|e| e.0 == j) {
                        Some(e) => e.1 -= l * v,
                        None => {
                            rows[i].push((j, -l * v));
                            cols[j].push(i);
                        }
                    }
                }
            }
            f.l_start.push(f.l_row.len());
            f.u_row.push(r);
            f.u_col.push(c);
            f.u_pivot.push(pivot);
            for &(j, v) in &pivot_entries {
                f.u_idx.push(j);
                f.u_val.push(v);
                let list = &mut cols[j];
                if let Some(at) = list.iter().position(|&x| x == r) {
                    list.swap_remove(at);
                }
                if list.len() == 1 {
                    singles.push(j);
                }
            }
            f.u_start.push(f.u_idx.len());
            rows[r].clear();
            row_done[r] = true;
            col_done[c] = true;
            steps += 1;
        }
        if steps < m {
            return Err(Singular {
                positions: (0..m).filter(|&c| !col_done[c]).collect(),
                rows: (0..m).filter(|&r| !row_done[r]).collect(),
            });
        }
        Ok(f)
    }

    /// Entries held by the factors and updates.
    pub fn size(&self) -> usize {
        self.l_row.len() + self.u_idx.len() + self.eta_idx.len()
    }

    pub fn updates(&self) -> usize {
        self.eta_pos.len()
    }

    /// Solves `B x = rhs` in place: `rhs` is indexed by row on entry and by
    /// basis position on return.
    pub fn ftran(&self, rhs: &mut Vec<f64>) {
        for k in 0..self.l_pivot.len() {
            let a = rhs[self.l_pivot[k]];
            if a != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_row[e]] -= self.l_val[e] * a;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for k in (0..self.u_row.len()).rev() {
            let mut v = rhs[self.u_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_val[e] * x[self.u_idx[e]];
            }
            x[self.u_col[k]] = v / self.u_pivot[k];
        }
        for t in 0..self.eta_pos.len() {
            let p = self.eta_pos[t];
            let xp = x[p] / self.eta_pivot[t];
            if xp != 0.0 {
                for e in self.eta_start[t]..self.eta_start[t + 1] {
                    x[self.eta_idx[e]] -= self.eta_val[e] * xp;
                }
            }
            x[p] = xp;
        }
        *rhs = x;
    }

    /// Solves `B^T y = c` in place: `c` is indexed by basis position on entry
    /// and by row on return.
    pub fn btran(&self, c: &mut Vec<f64>) {
        for t in (0..self.eta_pos.len()).rev() {
            let p = self.eta_pos[t];
            let mut v = c[p];
            for e in self.eta_start[t]..self.eta_start[t + 1] {
                v -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[p] = v / self.eta_pivot[t];
        }
        let mut z = vec![0.0; self.m];
        for k in 0..self.u_row.len() {
            let zk = c[self.u_col[k]] / self.u_pivot[k];
            z[self.u_row[k]] = zk;
            if zk != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * zk;
                }
            }
        }
        for k in (0..self.l_pivot.len()).rev() {
            let mut v = 0.0;
            for e in self.l_start[k]..self.l_start[k + 1] {
                v += self.l_val[e] * z[self.l_row[e]];
            }
            z[self.l_pivot[k]] -= v;
        }
        *c = z;
    }

    /// Replaces the column at position `p`; `alpha` is the new column after
    /// [`Factor::ftran`].
    pub fn update(&mut self, p: usize, alpha: &[f64]) {
        self.eta_pos.push(p);
        self.eta_pivot.push(alpha[p]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != p && a != 0.0 {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

/// Pivot of small Markowitz count among the sparsest active columns whose
/// value passes the row-wise threshold.
fn markowitz(
    rows: &[Vec<(usize, f64)>],
    cols: &[Vec<usize>],
    active: &[usize],
) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&c| !cols[c].is_empty())
        .collect();
    if order.len() > SEARCH_COLUMNS {
        order.select_nth_unstable_by_key(SEARCH_COLUMNS - 1, |&c| (cols[c].len(), c));
        order.truncate(SEARCH_COLUMNS);
    }
    order.sort_unstable_by_key(|&c| (cols[c].len(), c));
    let mut best: Option<(usize, f64, usize, usize)> = None;
    for &c in &order {
        let cc = cols[c].len() - 1;
        for &r in &cols[c] {
            let row = &rows[r];
            let v = row.iter().find(|e| e.0 == c).map_or(0.0, |e| e.1).abs();
            let max = row.iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
            if v <= SINGULAR_TOL || v < PIVOT_THRESHOLD * max {
                continue;
            }
            let count = cc * (row.len() - 1);
            let better = match best {
                None => true,
                Some((bc, bv, br, bcol)) => {
                    count < bc || (count == bc && (v > bv || (v == bv && (r, c) < (br, bcol))))
                }
            };
            if better {
                best = Some((count, v, r, c));
            }
        }
    }
    best.map(|(_, _, r, c)| (r, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (c, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out[r] += v * x[c];
            }
        }
        out
    }

    fn random_matrix(rng: &mut impl Rng, m: usize) -> Vec<Vec<(usize, f64)>> {
        (0..m)
            .map(|c| {
                let mut col = vec![(c, rng.gen_range(1.0..3.0))];
                for _ in 0..2 {
                    let r = rng.gen_range(0..m);
                    if r != c {
                        col.push((r, rng.gen_range(-2.0..2.0)));
                    }
                }
                col.sort_by_key(|e| e.0);
                col.dedup_by_key(|e| e.0);
                col
            })
            .collect()
    }

    #[test]
    fn solves_and_transposes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in [1, 2, 5, 20, 60] {
            let cols = random_matrix(&mut rng, m);
            let f = Factor::new(m, &cols).unwrap();
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut b = dense_mul(&cols, &x, m);
            f.ftran(&mut b);
            for i in 0..m {
                assert!((b[i] - x[i]).abs() < 1e-9, "ftran m={m}");
            }
            // B^T y = c  <=>  y . col_i = c_i
            let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = c.clone();
            f.btran(&mut y);
            for (i, col) in cols.iter().enumerate() {
                let v: f64 = col.iter().map(|&(r, a)| a * y[r]).sum();
                assert!((v - c[i]).abs() < 1e-9, "btran m={m}");
            }
        }
    }

    #[test]
    fn updates_replace_columns() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = 30;
        let mut cols = random_matrix(&mut rng, m);
        let mut f = Factor::new(m, &cols).unwrap();
        for _ in 0..20 {
            let p = rng.gen_range(0..m);
            let new: Vec<(usize, f64)> = vec![
                (p, rng.gen_range(1.0..2.0)),
                ((p + 7) % m, rng.gen_range(-1.0..1.0)),
            ];
            let mut alpha = vec![0.0; m];
            for &(r, v) in &new {
                alpha[r] = v;
            }
            f.ftran(&mut alpha);
            if alpha[p].abs() < 1e-3 {
                continue;
            }
            f.update(p, &alpha);
            cols[p] = new;
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut b = dense_mul(&cols, &x, m);
            f.ftran(&mut b);
            for i in 0..m {
                assert!((b[i] - x[i]).abs() < 1e-8);
            }
            let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = c.clone();
            f.btran(&mut y);
            for (i, col) in cols.iter().enumerate() {
                let v: f64 = col.iter().map(|&(r, a)| a * y[r]).sum();
                assert!((v - c[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn reports_singular_columns() {
        let cols = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 2.0), (1, 2.0)],
            vec![(2, 1.0)],
        ];
        let err = Factor::new(3, &cols).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
