//! Packed lower-triangular Cholesky factor that can grow one row at a time.

/// Lower-triangular `L` with `L Lᵀ = A`, stored row by row (row `i` holds
/// `i + 1` entries).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cholesky {
    n: usize,
    packed: Vec<f64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl Cholesky {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Factor a symmetric `n * n` row-major matrix. `None` if a pivot is not
    /// strictly positive.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut packed = vec![0.0; row_start(n)];
        for i in 0..n {
            let ri = row_start(i);
            for j in 0..=i {
                let rj = row_start(j);
                // same summation order as forward_solve, so that bordering a
                // factor reproduces this one bit for bit
                let dot: f64 = packed[rj..rj + j].iter().zip(&packed[ri..ri + j]).map(|(l, v)| l * v).sum();
                let s = a[i * n + j] - dot;
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    packed[ri + i] = s.sqrt();
                } else {
                    packed[ri + j] = s / packed[rj + j];
                }
            }
        }
        Some(Self { n, packed })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_start(i)..row_start(i + 1)]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.packed[row_start(i) + i]
    }

    /// Solve `L x = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in 0..self.n {
            let row = self.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solve `Lᵀ x = b`.
    pub fn backward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            x[i] /= self.diag(i);
            let xi = x[i];
            let row = self.row(i);
            for k in 0..i {
                x[k] -= row[k] * xi;
            }
        }
        x
    }

    /// `log |A| = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.diag(i).ln()).sum::<f64>()
    }

    /// New last row for the bordered matrix `[[A, k], [kᵀ, c]]`: returns
    /// `(v, δ)` with `v = L⁻¹ k` and `δ = sqrt(c - vᵀv)`, or `None` when the
    /// bordered matrix is not numerically positive definite.
    pub fn extension_row(&self, k: &[f64], c: f64) -> Option<(Vec<f64>, f64)> {
        let v = self.forward_solve(k);
        let d2 = c - v.iter().map(|x| x * x).sum::<f64>();
        if !(d2 > 0.0) || !d2.is_finite() {
            return None;
        }
        Some((v, d2.sqrt()))
    }

    /// Factor of the bordered matrix, given the row from [`Self::extension_row`].
    pub fn extended(&self, v: &[f64], delta: f64) -> Self {
        debug_assert_eq!(v.len(), self.n);
        let mut packed = Vec::with_capacity(row_start(self.n + 1));
        packed.extend_from_slice(&self.packed);
        packed.extend_from_slice(v);
        packed.push(delta);
        Self { n: self.n + 1, packed }
    }
}
