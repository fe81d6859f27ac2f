//! Small dense symmetric eigenproblems and subspace comparisons.
//!
//! Matrices here are at most 8×8, so a cyclic Jacobi sweep is both fast
//! enough and bit-stable across runs.

use crate::{Error, Matrix, Result};

pub const MAX_SWEEPS: usize = 50;

/// Eigenpairs of a symmetric matrix, eigenvalues nonincreasing, column `j`
/// of `eigenvectors` paired with `eigenvalues[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// Rank-`d` orthogonal projector together with a flag raised when the
/// spectrum has no clear gap after position `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub matrix: Matrix,
    pub small_gap: bool,
}

pub fn sym_eig(a: &Matrix) -> Result<SymEigResult> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let norm = a.norm();
    let asym = (a - a.transpose()).norm();
    if asym >= 1e-8 * norm.max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }

    // Row-major working copy of the symmetrized matrix.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let threshold = 1e-14 * norm;
    let mut converged = false;
    for _ in 0..=MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q].abs())
            .fold(0.0, f64::max);
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + q] = new_kq;
                    m[q * n + k] = new_kq;
                }
                m[p * n + p] -= t * apq;
                m[q * n + q] += t * apq;
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
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep Jacobi's output order
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let eigenvalues = order.iter().map(|&i| m[i * n + i]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// First `d` eigenvector columns.
pub fn top_d_basis(r: &SymEigResult, d: usize) -> Result<Matrix> {
    let p = r.eigenvalues.len();
    if d == 0 || d > p {
        return Err(Error::InvalidInput(format!("need 1 <= d <= {p}, got {d}")));
    }
    Ok(r.eigenvectors.columns(0, d).into_owned())
}

/// `Û_d Û_dᵀ` from the leading `d` eigenvectors.
pub fn top_d_projector(r: &SymEigResult, d: usize) -> Result<Projector> {
    let u = top_d_basis(r, d)?;
    let matrix = &u * u.transpose();
    let lam = &r.eigenvalues;
    let scale = lam.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let small_gap = d < lam.len() && lam[d - 1] - lam[d] <= 1e-8 * scale;
    Ok(Projector { matrix, small_gap })
}

fn check_orthonormal(u: &Matrix) -> Result<()> {
    let defect = (u.transpose() * u - Matrix::identity(u.ncols(), u.ncols())).norm();
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal(defect));
    }
    Ok(())
}

/// Cosines of the principal angles between `span(U)` and `span(V)`: the
/// singular values of `UᵀV`, clamped to `[0, 1]`, nonincreasing.
pub fn principal_cosines(u: &Matrix, v: &Matrix) -> Result<Vec<f64>> {
    if u.nrows() != v.nrows() {
        return Err(Error::LengthMismatch(u.nrows(), v.nrows()));
    }
    if u.ncols() != v.ncols() {
        return Err(Error::LengthMismatch(u.ncols(), v.ncols()));
    }
    check_orthonormal(u)?;
    check_orthonormal(v)?;
    let m = u.transpose() * v;
    let gram = m.transpose() * &m;
    let eig = sym_eig(&gram)?;
    Ok(eig
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt().clamp(0.0, 1.0))
        .collect())
}

/// `‖sin Θ(U, V)‖_F = sqrt(d − Σ cos²θᵢ)`, evaluated as `‖(I − UUᵀ)V‖_F`
/// to avoid cancellation for nearly equal subspaces.
pub fn sin_theta_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    // validates shapes and orthonormality
    principal_cosines(u, v)?;
    Ok((v - u * (u.transpose() * v)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vector;

    fn reconstruction_error(a: &Matrix, r: &SymEigResult) -> f64 {
        let lam = Matrix::from_diagonal(&Vector::from_vec(r.eigenvalues.clone()));
        (&r.eigenvectors * lam * r.eigenvectors.transpose() - a).norm()
    }

    #[test]
    fn diagonal_input() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let r = sym_eig(&a).unwrap();
        assert_eq!(r.eigenvalues, vec![2.0, 1.0]);
        assert_eq!(r.eigenvectors[(1, 0)].abs(), 1.0);
        assert_eq!(r.eigenvectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn swap_matrix() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = sym_eig(&a).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-15);
        assert!((r.eigenvalues[1] + 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = r.eigenvectors.column(0);
        let v1 = r.eigenvectors.column(1);
        assert!((v0[0].abs() - h).abs() < 1e-15 && (v0[0] - v0[1]).abs() < 1e-15);
        assert!((v1[0].abs() - h).abs() < 1e-15 && (v1[0] + v1[1]).abs() < 1e-15);
    }

    #[test]
    fn random_4x4_reconstructs() {
        let vals = [
            0.3, -1.2, 0.5, 2.0, -0.7, 0.1, 1.1, 0.4, 0.9, -0.3, 0.6, 1.7, -2.2, 0.8, 0.05, -0.4,
        ];
        let b = Matrix::from_row_slice(4, 4, &vals);
        let a = &b + b.transpose();
        let r = sym_eig(&a).unwrap();
        assert!(reconstruction_error(&a, &r) < 1e-10);
        let vtv = r.eigenvectors.transpose() * &r.eigenvectors;
        assert!((vtv - Matrix::identity(4, 4)).norm() < 1e-10);
        assert!(r.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn zero_matrix() {
        let r = sym_eig(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(r.eigenvalues, vec![0.0; 3]);
        let p = top_d_projector(&r, 2).unwrap();
        assert!(p.small_gap);
        assert!((p.matrix.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projector_examples() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 1.0, 0.01]));
        let p = top_d_projector(&sym_eig(&a).unwrap(), 2).unwrap();
        assert!(!p.small_gap);
        assert!((p.matrix - Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1.0, 0.0]))).norm() < 1e-15);

        let p = top_d_projector(&sym_eig(&Matrix::identity(3, 3)).unwrap(), 2).unwrap();
        assert!(p.small_gap);
        assert!((&p.matrix * &p.matrix - &p.matrix).norm() < 1e-12);
        assert!((p.matrix.trace() - 2.0).abs() < 1e-12);
        assert!(top_d_projector(&sym_eig(&Matrix::identity(3, 3)).unwrap(), 4).is_err());
    }

    fn cols(p: usize, vecs: &[&[f64]]) -> Matrix {
        Matrix::from_columns(
            &vecs
                .iter()
                .map(|v| Vector::from_column_slice(&v[..p]))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn principal_cosine_examples() {
        let u = cols(4, &[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
        let c = principal_cosines(&u, &u).unwrap();
        assert!(c.iter().all(|x| (x - 1.0).abs() < 1e-14));
        let w = cols(4, &[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        let c = principal_cosines(&u, &w).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-14));
        assert!((sin_theta_distance(&u, &w).unwrap() - 2f64.sqrt()).abs() < 1e-14);

        let th: f64 = 0.7;
        let u3 = cols(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let v3 = cols(3, &[&[1.0, 0.0, 0.0], &[0.0, th.cos(), th.sin()]]);
        let c = principal_cosines(&u3, &v3).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - th.cos()).abs() < 1e-14);
    }

    #[test]
    fn principal_cosines_reject_non_orthonormal() {
        let u = cols(3, &[&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]]);
        assert!(matches!(principal_cosines(&u, &u), Err(Error::NotOrthonormal(_))));
    }
}
