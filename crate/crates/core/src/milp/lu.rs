//! Sparse LU factorization of the square simplex kernel.
//!
//! Left-looking elimination: kernel columns are processed in ascending
//! order of their nonzero count, and each column picks its pivot among the
//! rows passing a relative threshold, preferring rows with few nonzeros.
//! `L` is unit lower triangular in pivot order, `U` upper triangular.

/// Kernel positions left without a pivot.
#[derive(Clone, Debug, PartialEq)]
pub struct Singular {
    /// Kernel columns found linearly dependent.
    pub cols: Vec<usize>,
    /// Kernel rows left unpivoted.
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct KernelLu {
    k: usize,
    /// Factor step `c` pivots kernel row `prow[c]`...
    prow: Vec<usize>,
    /// ...in kernel column `pcol[c]`.
    pcol: Vec<usize>,
    /// Sub-diagonal part of `L` per step, over kernel rows.
    l: Vec<Vec<(usize, f64)>>,
    /// Above-diagonal part of `U` per step, over earlier steps.
    u: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

const THRESHOLD: f64 = 0.01;

impl KernelLu {
    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn nnz(&self) -> usize {
        self.k + self.l.iter().map(Vec::len).sum::<usize>() + self.u.iter().map(Vec::len).sum::<usize>()
    }

    /// Factors the `k x k` kernel given by columns of `(row, value)`.
    pub fn factor(k: usize, cols: &[Vec<(usize, f64)>], pivot_tol: f64) -> Result<Self, Singular> {
        assert_eq!(cols.len(), k);
        let mut row_count = vec![0usize; k];
        for col in cols {
            for &(i, _) in col {
                row_count[i] += 1;
            }
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&a| (cols[a].len(), a));

        let mut lu = KernelLu { k, ..Default::default() };
        let mut step_of_row = vec![usize::MAX; k];
        let mut work = vec![0.0; k];
        let mut nz: Vec<usize> = Vec::new();
        let mut in_nz = vec![false; k];
        let mut bad_cols = Vec::new();
        for &a in &order {
            for &(i, v) in &cols[a] {
                work[i] += v;
                if !in_nz[i] {
                    in_nz[i] = true;
                    nz.push(i);
                }
            }
            // Eliminate with earlier steps, in order.
            let mut ucol = Vec::new();
            for c in 0..lu.prow.len() {
                let v = work[lu.prow[c]];
                if v == 0.0 {
                    continue;
                }
                ucol.push((c, v));
                for &(i, l) in &lu.l[c] {
                    work[i] -= l * v;
                    if !in_nz[i] {
                        in_nz[i] = true;
                        nz.push(i);
                    }
                }
            }
            let mut max = 0.0f64;
            for &i in &nz {
                if step_of_row[i] == usize::MAX {
                    max = max.max(work[i].abs());
                }
            }
            if max <= pivot_tol {
                bad_cols.push(a);
                for &i in &nz {
                    work[i] = 0.0;
                    in_nz[i] = false;
                }
                nz.clear();
                continue;
            }
            let mut piv: Option<usize> = None;
            for &i in &nz {
                if step_of_row[i] != usize::MAX || work[i].abs() < THRESHOLD * max {
                    continue;
                }
                let better = match piv {
                    None => true,
                    Some(p) => (row_count[i], std::cmp::Reverse(work[i].abs().to_bits()), i)
                        < (row_count[p], std::cmp::Reverse(work[p].abs().to_bits()), p),
                };
                if better {
                    piv = Some(i);
                }
            }
            let p = piv.expect("a row passes the threshold");
            let d = work[p];
            let mut lcol = Vec::new();
            for &i in &nz {
                if step_of_row[i] == usize::MAX && i != p && work[i] != 0.0 {
                    lcol.push((i, work[i] / d));
                }
                work[i] = 0.0;
                in_nz[i] = false;
            }
            nz.clear();
            let step = lu.prow.len();
            step_of_row[p] = step;
            lu.prow.push(p);
            lu.pcol.push(a);
            lu.l.push(lcol);
            lu.u.push(ucol);
            lu.diag.push(d);
        }
        if !bad_cols.is_empty() {
            let rows = (0..k).filter(|&i| step_of_row[i] == usize::MAX).collect();
            bad_cols.sort_unstable();
            return Err(Singular { cols: bad_cols, rows });
        }
        Ok(lu)
    }

    /// Solves `K x = b`. `b` is over kernel rows and is consumed; the result
    /// is over kernel columns.
    pub fn solve(&self, b: &mut [f64], x: &mut [f64]) {
        let k = self.k;
        let mut y = vec![0.0; k];
        for c in 0..k {
            let v = b[self.prow[c]];
            y[c] = v;
            if v != 0.0 {
                for &(i, l) in &self.l[c] {
                    b[i] -= l * v;
                }
            }
        }
        for c in (0..k).rev() {
            let z = y[c] / self.diag[c];
            x[self.pcol[c]] = z;
            if z != 0.0 {
                for &(c2, u) in &self.u[c] {
                    y[c2] -= u * z;
                }
            }
        }
    }

    /// Solves `K^T y = g`. `g` is over kernel columns; the result is over
    /// kernel rows.
    pub fn solve_t(&self, g: &[f64], y: &mut [f64]) {
        let k = self.k;
        let mut t = vec![0.0; k];
        for c in 0..k {
            let mut v = g[self.pcol[c]];
            for &(c2, u) in &self.u[c] {
                v -= u * t[c2];
            }
            t[c] = v / self.diag[c];
        }
        for c in (0..k).rev() {
            let mut v = t[c];
            for &(i, l) in &self.l[c] {
                v -= l * y[i];
            }
            y[self.prow[c]] = v;
        }
    }
}
