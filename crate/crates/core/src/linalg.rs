//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// One eigenvector per row, aligned with `values`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Frobenius norm of the strictly off-diagonal part.
pub fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            acc += a[p * n + q] * a[p * n + q];
        }
    }
    (2.0 * acc).sqrt()
}

/// Diagonalizes the symmetric row-major `n × n` matrix `a`.
///
/// Sweeps run until the off-diagonal Frobenius norm drops below `tolerance`
/// or `max_sweeps` is reached. Equal eigenvalues keep their original
/// (diagonal-position) order, and every eigenvector is sign-normalized so
/// its largest-magnitude entry is positive.
pub fn jacobi_eigen(a: &[f64], n: usize, tolerance: f64, max_sweeps: usize) -> SymmetricEigen {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    // v holds eigenvectors as columns
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    while sweeps < max_sweeps && off_diagonal_norm(&m, n) >= tolerance {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the original index order on ties
    order.sort_by(|&i, &j| m[j * n + j].partial_cmp(&m[i * n + i]).unwrap_or(std::cmp::Ordering::Equal));

    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|k| v[k * n + col]).collect();
            let pivot = vec
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (k, x)| if x.abs() > best.1 { (k, x.abs()) } else { best })
                .0;
            if vec[pivot] < 0.0 {
                vec.iter_mut().for_each(|x| *x = -*x);
            }
            vec
        })
        .collect();

    SymmetricEigen { values, vectors, sweeps }
}
