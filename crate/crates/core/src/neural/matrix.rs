use rand::Rng;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Entries drawn from `U(−1/√cols, 1/√cols)`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self · x + bias`.
    pub fn affine(&self, x: &[f64], bias: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.cols);
        out.clear();
        out.extend(self.data.chunks_exact(self.cols).zip(bias).map(|(row, b)| b + dot(row, x)));
    }

    /// `dx += selfᵀ · dy`.
    pub fn transpose_matvec_acc(&self, dy: &[f64], dx: &mut [f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        for (row, &g) in self.data.chunks_exact(self.cols).zip(dy) {
            if g != 0.0 {
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
    }

    /// `self += dy · xᵀ`.
    pub fn outer_acc(&mut self, dy: &[f64], x: &[f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (row, &g) in self.data.chunks_exact_mut(self.cols).zip(dy) {
            if g != 0.0 {
                for (w, xi) in row.iter_mut().zip(x) {
                    *w += g * xi;
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_transpose() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let mut out = Vec::new();
        m.affine(&[1.0, -1.0], &[0.5, 0.0, 1.0], &mut out);
        assert_eq!(out, vec![-0.5, -1.0, 0.0]);
        let mut dx = vec![0.0; 2];
        m.transpose_matvec_acc(&[1.0, 0.0, 1.0], &mut dx);
        assert_eq!(dx, vec![6.0, 8.0]);
        let mut g = Matrix::zeros(3, 2);
        g.outer_acc(&[1.0, 2.0, 0.0], &[3.0, 4.0]);
        assert_eq!(g.data, vec![3.0, 4.0, 6.0, 8.0, 0.0, 0.0]);
    }
}
