//! Small dense/banded kernels used by the mesh operators.

use crate::error::{KirchhoffError, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Thomas algorithm for a tridiagonal system with sub-diagonal `lower`,
/// diagonal `diag` and super-diagonal `upper` (both off-diagonals have
/// length `n - 1`). No pivoting; intended for diagonally dominant systems.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(KirchhoffError::SingularOperator);
    }
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(KirchhoffError::SingularOperator);
        }
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, LU-factorized
/// with partial pivoting (fill-in widens the upper band to `kl + ku`).
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major storage: row `i` holds columns `i - kl ..= i + kl + ku`.
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * width],
            pivots: Vec::new(),
            factored: false,
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        // column offset relative to i - kl
        if j + self.kl < i || j > i + self.kl + self.ku {
            return None;
        }
        Some(i * self.width() + (j + self.kl - i))
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(!self.factored);
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[s] += value;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    fn set(&mut self, i: usize, j: usize, value: f64) {
        if let Some(s) = self.slot(i, j) {
            self.data[s] = value;
        }
    }

    /// In-place LU with row partial pivoting restricted to the band.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.pivots = (0..n).collect();
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 || best <= scale * 1e-15 {
                return Err(KirchhoffError::SingularOperator);
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
                self.pivots[k] = p;
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let factor = self.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.set(i, k, factor);
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - factor * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert!(self.factored, "band matrix must be factored before solving");
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.get(i, k) * xk;
            }
        }
        let reach = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.get(k, j) * x[j];
            }
            x[k] = s / self.get(k, k);
        }
        x
    }
}

/// Preconditioned conjugate gradients with a Jacobi preconditioner.
/// Returns the solution and the final relative residual.
pub(crate) fn pcg<F>(
    apply: F,
    diag: &[f64],
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    let rhs_norm = norm2(rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return (x, 0.0);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= rel_tol * rhs_norm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // true residual, not the recursively updated one
    let ax = apply(&x);
    let res: f64 = ax
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    (x, res / rhs_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_hand_solution() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let x = solve_tridiagonal(&[-1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0], &[1.0, 0.0, 1.0])
            .unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn band_lu_handles_indefinite_tridiagonal() {
        // zero leading pivot forces a row swap
        let n = 4;
        let mut m = BandMatrix::zeros(n, 1, 1);
        let dense = [
            [0.0, 1.0, 0.0, 0.0],
            [1.0, -1.0, 2.0, 0.0],
            [0.0, 2.0, 1.0, -1.0],
            [0.0, 0.0, -1.0, 3.0],
        ];
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.add(i, j, v);
                }
            }
        }
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let b: Vec<f64> = dense.iter().map(|row| dot(row, &x_true)).collect();
        m.factor().unwrap();
        let x = m.solve(&b);
        for (a, e) in x.iter().zip(x_true) {
            assert!((a - e).abs() < 1e-13, "{a} vs {e}");
        }
    }

    #[test]
    fn band_lu_rejects_singular() {
        let mut m = BandMatrix::zeros(2, 1, 1);
        m.add(0, 0, 1.0);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 1, 1.0);
        assert_eq!(m.factor(), Err(KirchhoffError::SingularOperator));
    }

    #[test]
    fn pcg_solves_spd_system() {
        let diag = [4.0, 4.0, 4.0];
        let apply = |x: &[f64]| {
            vec![
                4.0 * x[0] - x[1],
                -x[0] + 4.0 * x[1] - x[2],
                -x[1] + 4.0 * x[2],
            ]
        };
        let (x, rel) = pcg(apply, &diag, &[3.0, 2.0, 3.0], 1e-14, 100);
        assert!(rel < 1e-13);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
