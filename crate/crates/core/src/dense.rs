//! Small dense symmetric linear algebra: a cyclic Jacobi eigensolver and
//! random orthogonal matrices. Sized for desk-scale problems (dims in the
//! low hundreds); the sparse/HVP machinery never calls into this module,
//! so it stays an independent route for cross-checking spectra.

use ndarray::{Array1, Array2};
use rand::Rng;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending and
/// eigenvectors as columns, so `a ≈ V diag(w) V^T`.
pub fn sym_eig(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eig needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::eye(n);

    let off = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[[i, j]] * m[[i, j]];
            }
        }
        s
    };
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(1e-300);
    let tol = 1e-28 * scale;

    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let w = Array1::from_iter(idx.iter().map(|&i| m[[i, i]]));
    let mut vecs = Array2::zeros((n, n));
    for (col, &i) in idx.iter().enumerate() {
        for r in 0..n {
            vecs[[r, col]] = v[[r, i]];
        }
    }
    (w, vecs)
}

/// Largest eigenvalue by absolute value of a symmetric matrix.
pub fn sym_lambda_abs_max(a: &Array2<f64>) -> f64 {
    let (w, _) = sym_eig(a);
    w.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Random orthogonal matrix via modified Gram-Schmidt on a Gaussian draw.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Array2<f64> {
    loop {
        let mut q = Array2::from_shape_fn((n, n), |_| {
            // Box-Muller keeps us off rand_distr for one sampler.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let mut ok = true;
        for j in 0..n {
            for i in 0..j {
                let dot = (0..n).map(|r| q[[r, i]] * q[[r, j]]).sum::<f64>();
                for r in 0..n {
                    let qi = q[[r, i]];
                    q[[r, j]] -= dot * qi;
                }
            }
            let norm = (0..n).map(|r| q[[r, j]] * q[[r, j]]).sum::<f64>().sqrt();
            if norm < 1e-10 {
                ok = false;
                break;
            }
            for r in 0..n {
                q[[r, j]] /= norm;
            }
        }
        if ok {
            return q;
        }
    }
}
