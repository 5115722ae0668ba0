use ndarray::Array2;

/// Unpivoted LU factors of a transposed Laplacian, unit lower part below
/// the diagonal.
pub(super) struct Lu {
    lu: Array2<f64>,
}

impl Lu {
    /// Factors the transposed Laplacian of an arc weight matrix `[n + 1, n]`
    /// (row 0 holds root weights). Pivots are rebuilt from row excesses, so
    /// no step subtracts nearly equal quantities and the determinant keeps
    /// full relative accuracy however small the root weights are.
    pub fn factor_laplacian(weights: &Array2<f64>) -> Self {
        let n = weights.ncols();
        // Row j holds minus the weights of the heads of token j.
        let a = Array2::from_shape_fn((n, n), |(j, i)| if i == j { 0.0 } else { -weights[[i + 1, j]] });
        let excess = (0..n).map(|j| weights[[0, j]]).collect();
        Self::factor(a, excess)
    }

    /// Root absorption probabilities with token `m` (0-based) made
    /// absorbing: entry `h` is the chance that a walk from `h` that picks
    /// heads in proportion to `weights` reaches the root before `m`. The
    /// entry for `m` itself is zero.
    pub fn absorption(weights: &Array2<f64>, m: usize) -> Vec<f64> {
        let n = weights.ncols();
        let rest: Vec<usize> = (0..n).filter(|&j| j != m).collect();
        let k = rest.len();
        let a = Array2::from_shape_fn(
            (k, k),
            |(r, c)| {
                if r == c {
                    0.0
                } else {
                    -weights[[rest[c] + 1, rest[r]]]
                }
            },
        );
        // Reaching m counts as excess (the walk leaves the system) but
        // contributes nothing to the right-hand side.
        let excess = rest.iter().map(|&j| weights[[0, j]] + weights[[m + 1, j]]).collect();
        let roots: Vec<f64> = rest.iter().map(|&j| weights[[0, j]]).collect();
        let solved = Self::factor(a, excess).solve(&roots);
        let mut out = vec![0.0; n];
        for (r, &j) in rest.iter().enumerate() {
            out[j] = solved[r];
        }
        out
    }

    /// Unpivoted elimination of a matrix with nonpositive off-diagonals
    /// whose rows sum to the nonnegative `excess`.
    fn factor(mut a: Array2<f64>, mut excess: Vec<f64>) -> Self {
        let n = a.nrows();
        for k in 0..n {
            let pivot = excess[k] - (k + 1..n).map(|j| a[[k, j]]).sum::<f64>();
            a[[k, k]] = pivot;
            if pivot == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = a[[i, k]] / pivot;
                a[[i, k]] = f;
                if f == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    if j != i {
                        a[[i, j]] -= f * a[[k, j]];
                    }
                }
                excess[i] -= f * excess[k];
            }
        }
        Lu { lu: a }
    }

    /// Solves `A x = b` for the factored matrix.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut x = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[[i, j]] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[[i, j]] * x[j];
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }

    fn n(&self) -> usize {
        self.lu.nrows()
    }

    /// True when every pivot is strictly positive and finite.
    pub fn is_regular(&self) -> bool {
        (0..self.n()).all(|k| {
            let d = self.lu[[k, k]];
            d > 0.0 && d.is_finite()
        })
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n()).map(|k| self.lu[[k, k]].ln()).sum()
    }

    /// Inverse of the Laplacian (not of its transpose).
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.n();
        let mut inv = Array2::zeros((n, n));
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.fill(0.0);
            e[c] = 1.0;
            // Column c of the transposed inverse is row c of the inverse.
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[[c, i]] = v;
            }
        }
        inv
    }
}
