//! Compressed sparse rows, ILU(0) and preconditioned BiCGSTAB.

use crate::error::{Error, Result};

/// Square CSR matrix with sorted column indices in each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists. Columns are sorted and
    /// duplicates summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if c >= n {
                    return Err(Error::Oracle(format!("column {c} out of range {n}")));
                }
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, a)| a * x[j]).sum();
        }
    }

    /// `A - shift I`. Every row must already hold its diagonal.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..self.n {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let k = self.cols[r.clone()]
                .binary_search(&i)
                .map_err(|_| Error::Oracle(format!("row {i} has no diagonal")))?;
            out.vals[r.start + k] -= shift;
        }
        Ok(out)
    }
}

/// Incomplete LU with the sparsity pattern of the matrix itself.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    #[allow(clippy::needless_range_loop)]
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![0; n];
        for i in 0..n {
            let r = lu.row_ptr[i]..lu.row_ptr[i + 1];
            diag[i] = r.start
                + lu.cols[r.clone()]
                    .binary_search(&i)
                    .map_err(|_| Error::Oracle(format!("row {i} has no diagonal")))?;
        }
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for kk in start..diag[i] {
                let k = lu.cols[kk];
                let pivot = lu.vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Oracle(format!("zero pivot in row {k}")));
                }
                let factor = lu.vals[kk] / pivot;
                lu.vals[kk] = factor;
                // row_i[j] -= factor * row_k[j] for j > k in both patterns
                let (mut p, mut q) = (kk + 1, diag[k] + 1);
                let q_end = lu.row_ptr[k + 1];
                while p < end && q < q_end {
                    match lu.cols[p].cmp(&lu.cols[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            lu.vals[p] -= factor * lu.vals[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
            }
            if lu.vals[diag[i]] == 0.0 {
                return Err(Error::Oracle(format!("zero pivot in row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `L U z = r` in place.
    pub fn apply(&self, z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = z[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s / lu.vals[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub max_iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB. `x` holds the initial guess on entry.
/// Returns the iteration count.
pub fn bicgstab(
    a: &CsrMatrix,
    precond: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
) -> Result<usize> {
    let n = a.n;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let target = cfg.rel_tol * b_norm;
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut restarts = 0;
    let mut it = 0;
    'restart: loop {
        a.mul_vec(x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        if norm(&r) <= target {
            return Ok(it);
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut p_hat = vec![0.0; n];
        let mut s_hat = vec![0.0; n];
        let mut t = vec![0.0; n];
        while it < cfg.max_iterations {
            it += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 || omega == 0.0 {
                restarts += 1;
                if restarts > 10 {
                    break 'restart;
                }
                continue 'restart;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            p_hat.copy_from_slice(&p);
            precond.apply(&mut p_hat);
            a.mul_vec(&p_hat, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 {
                restarts += 1;
                if restarts > 10 {
                    break 'restart;
                }
                continue 'restart;
            }
            alpha = rho / denom;
            // s overwrites r
            for i in 0..n {
                r[i] -= alpha * v[i];
            }
            if norm(&r) <= target {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                return Ok(it);
            }
            s_hat.copy_from_slice(&r);
            precond.apply(&mut s_hat);
            a.mul_vec(&s_hat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] -= omega * t[i];
            }
            if norm(&r) <= target {
                return Ok(it);
            }
        }
        break;
    }
    a.mul_vec(x, &mut tmp);
    let res: f64 = b
        .iter()
        .zip(&tmp)
        .map(|(b, ax)| (b - ax).powi(2))
        .sum::<f64>()
        .sqrt();
    Err(Error::Oracle(format!(
        "BiCGSTAB stalled after {it} iterations, relative residual {:e}",
        res / b_norm
    )))
}
