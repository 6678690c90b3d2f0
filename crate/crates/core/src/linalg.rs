//! Small dense helpers on top of nalgebra for symmetric information matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Default relative eigenvalue threshold for numerical rank.
pub const DEFAULT_EPS_RANK: f64 = 1e-9;

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: DVector<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(matrix: &DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        if n == 0 {
            return Spectrum {
                values: DVector::zeros(0),
                vectors: DMatrix::zeros(0, 0),
            };
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Spectrum { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Eigenvalue cut-off below which a direction counts as unexcited.
    pub fn rank_threshold(&self, eps_rank: f64) -> f64 {
        eps_rank * self.max().max(1.0)
    }

    pub fn rank(&self, eps_rank: f64) -> usize {
        let cut = self.rank_threshold(eps_rank);
        self.values.iter().filter(|&&v| v > cut).count()
    }

    /// Squared norm of the part of `v` orthogonal to the numerical column space.
    pub fn orthogonal_residual_sq(&self, v: &DVector<f64>, eps_rank: f64) -> f64 {
        let cut = self.rank_threshold(eps_rank);
        let mut residual = v.clone();
        for (i, &lambda) in self.values.iter().enumerate() {
            if lambda > cut {
                let basis = self.vectors.column(i);
                let coeff = basis.dot(v);
                residual.axpy(-coeff, &basis, 1.0);
            }
        }
        residual.norm_squared()
    }

    /// λ_min/λ_max, zero for a rank-deficient or zero matrix.
    pub fn inverse_condition(&self, eps_rank: f64) -> f64 {
        let hi = self.max();
        if self.values.is_empty() || hi <= 0.0 || self.rank(eps_rank) < self.values.len() {
            return 0.0;
        }
        self.min().max(0.0) / hi
    }
}

/// ‖A − Aᵀ‖_F.
pub fn symmetry_residual(matrix: &DMatrix<f64>) -> f64 {
    (matrix - matrix.transpose()).norm()
}

/// Outer product `a·bᵀ / scale`.
pub fn outer_scaled(a: &DVector<f64>, b: &DVector<f64>, scale: f64) -> DMatrix<f64> {
    (a * b.transpose()) / scale
}
