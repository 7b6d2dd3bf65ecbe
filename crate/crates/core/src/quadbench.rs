//! Synthetic two-block quadratic problems with explicit symmetric PSD
//! Hessians. Gradients and block spectra are exact here, which makes this
//! module both the ground-truth oracle for the finite-difference machinery
//! in `hessian` and the controlled setting where the conditioning theorem
//! and the GPNR bound are literally checkable.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{random_orthogonal, sym_eig};
use crate::error::{Error, Result};
use crate::hessian::BlockSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticProblem {
    pub d_theta: usize,
    pub d_w: usize,
    /// Explicit symmetric PSD Hessian, (d_theta+d_w) square.
    pub h: Array2<f64>,
    pub psi_star: Array1<f64>,
    /// Achieved block maxima after PSD projection, from the dense oracle.
    pub lambda_theta: f64,
    pub lambda_w: f64,
}

impl QuadraticProblem {
    pub fn dim(&self) -> usize {
        self.d_theta + self.d_w
    }

    /// `L(psi) = 1/2 (psi - psi*)^T H (psi - psi*)`.
    pub fn loss(&self, psi: &Array1<f64>) -> f64 {
        let d = psi - &self.psi_star;
        0.5 * d.dot(&self.h.dot(&d))
    }

    /// Exact gradient `H (psi - psi*)`.
    pub fn grad(&self, psi: &Array1<f64>) -> Array1<f64> {
        self.h.dot(&(psi - &self.psi_star))
    }

    /// Dense-oracle dominant eigenvalue of a symmetric diagonal block.
    pub fn block_lambda_oracle(&self, spec: BlockSpec) -> f64 {
        let r = spec.range(self.d_theta, self.dim());
        let sub = self.h.slice(s![r.start..r.end, r.start..r.end]).to_owned();
        let (w, _) = sym_eig(&sub);
        w.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m })
    }

    pub fn kappa_prime(&self) -> f64 {
        self.lambda_theta.max(self.lambda_w) / self.lambda_theta.min(self.lambda_w)
    }
}

/// Build a problem whose diagonal blocks have prescribed maximum
/// eigenvalues (random orthogonal conjugation of prescribed spectra), with
/// an off-diagonal block of magnitude `cross_coupling * sqrt(lt * lw)`,
/// PSD-projected by flooring negative eigenvalues at zero. The achieved
/// block maxima (which the projection can perturb) are recomputed with the
/// dense oracle and stored.
pub fn synth_quadratic(
    d_theta: usize,
    d_w: usize,
    lambda_theta_max: f64,
    lambda_w_max: f64,
    cross_coupling: f64,
    seed: u64,
) -> Result<QuadraticProblem> {
    if d_theta == 0 || d_w == 0 {
        return Err(Error::parameter("both block dimensions must be positive"));
    }
    if lambda_theta_max <= 0.0 || lambda_w_max <= 0.0 {
        return Err(Error::parameter("target block eigenvalues must be positive"));
    }
    if !(0.0..1.0).contains(&cross_coupling) {
        return Err(Error::parameter("cross_coupling must lie in [0, 1)"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dim = d_theta + d_w;

    let block = |d: usize, lam: f64, rng: &mut ChaCha20Rng| -> Array2<f64> {
        let mut spectrum = Array1::from_shape_fn(d, |_| rng.gen_range(0.05 * lam..lam));
        spectrum[0] = lam;
        let q = random_orthogonal(d, rng);
        q.dot(&Array2::from_diag(&spectrum)).dot(&q.t())
    };
    let h_tt = block(d_theta, lambda_theta_max, &mut rng);
    let h_ww = block(d_w, lambda_w_max, &mut rng);

    let mut h = Array2::zeros((dim, dim));
    h.slice_mut(s![..d_theta, ..d_theta]).assign(&h_tt);
    h.slice_mut(s![d_theta.., d_theta..]).assign(&h_ww);
    if cross_coupling > 0.0 {
        let mut c = Array2::from_shape_fn((d_theta, d_w), |_| rng.gen_range(-1.0..1.0f64));
        let fro = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if fro > 0.0 {
            c *= cross_coupling * (lambda_theta_max * lambda_w_max).sqrt() / fro;
        }
        h.slice_mut(s![..d_theta, d_theta..]).assign(&c);
        h.slice_mut(s![d_theta.., ..d_theta]).assign(&c.t());
    }

    // PSD projection: eigenvalue floor at zero.
    let (w, v) = sym_eig(&h);
    if w.iter().any(|&x| x < 0.0) {
        let clipped = w.mapv(|x| x.max(0.0));
        h = v.dot(&Array2::from_diag(&clipped)).dot(&v.t());
        // Re-symmetrize against roundoff from the reconstruction.
        h = 0.5 * (&h + &h.t());
    }

    let norm = rng.gen_range(1.0..3.0);
    let dir = Array1::from_shape_fn(dim, |_| rng.gen_range(-1.0..1.0f64));
    let psi_star = &dir / dir.dot(&dir).sqrt() * norm;

    let mut q = QuadraticProblem {
        d_theta,
        d_w,
        h,
        psi_star,
        lambda_theta: 0.0,
        lambda_w: 0.0,
    };
    q.lambda_theta = q.block_lambda_oracle(BlockSpec::Theta);
    q.lambda_w = q.block_lambda_oracle(BlockSpec::W);
    Ok(q)
}

fn block_norm(v: &Array1<f64>, start: usize, end: usize) -> f64 {
    v.slice(s![start..end]).iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremRecord {
    pub iter: usize,
    pub rho_theta: f64,
    pub rho_w: f64,
    pub s_theta: f64,
    pub s_w: f64,
    pub kappa_h: f64,
    pub kappa_rh: f64,
    /// Proportional-GPNR predicate: the GPNR ordering between the blocks
    /// matches the block-eigenvalue ordering at this iterate. Consecutive
    /// GD iterates serve as the near-critical point pair.
    pub gpnr_aligned: bool,
    /// Mild-scaling predicate: the scale ratio of the dominant block to
    /// the other is at least the inverse eigenvalue ratio.
    pub mild_scaling: bool,
    /// Both predicates hold, so the theorem's hypotheses are satisfied.
    pub applicable: bool,
    /// kappa'(RH) <= kappa'(H).
    pub holds: bool,
    /// |kappa'(RH) - (s_theta/s_w)^(+-1) kappa'(H)|, checkable when the
    /// scaled theta block still dominates.
    pub identity_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremTrial {
    pub records: Vec<TheoremRecord>,
    pub diverged: bool,
}

/// Run asymmetric gradient descent (beta = 0, exact gradients) from
/// `start` and per iteration evaluate the conditioning theorem: scales
/// from the direct parameter/gradient norm ratios, kappa'(RH) from the
/// scaled symmetric diagonal blocks `s_theta H_tt`, `s_w H_ww`.
pub fn theorem_trial(
    q: &QuadraticProblem,
    start: &Array1<f64>,
    eta: f64,
    iters: usize,
) -> Result<TheoremTrial> {
    if start.len() != q.dim() {
        return Err(Error::input("start point has wrong dimension"));
    }
    if start == &q.psi_star {
        return Err(Error::parameter("start must differ from the minimizer"));
    }
    let dt = q.d_theta;
    let dim = q.dim();
    let (lt, lw) = (q.lambda_theta, q.lambda_w);
    let kappa_h = q.kappa_prime();

    let mut psi = start.clone();
    let mut records = Vec::with_capacity(iters);
    let mut diverged = false;

    for t in 0..iters {
        let g = q.grad(&psi);
        if !g.iter().all(|x| x.is_finite()) || psi.iter().map(|x| x * x).sum::<f64>() > 1e18 {
            diverged = true;
            break;
        }
        let pt = block_norm(&psi, 0, dt);
        let pw = block_norm(&psi, dt, dim);
        let gt = block_norm(&g, 0, dt);
        let gw = block_norm(&g, dt, dim);
        if gt == 0.0 || gw == 0.0 || pt == 0.0 || pw == 0.0 {
            // Degenerate block; the scale definition breaks down. Stop the
            // trial rather than divide by zero.
            break;
        }
        let (rho_t, rho_w) = (gt / pt, gw / pw);
        let (s_t, s_w) = (pt / gt, pw / gw);

        let lam_rt = s_t * lt;
        let lam_rw = s_w * lw;
        let kappa_rh = lam_rt.max(lam_rw) / lam_rt.min(lam_rw);

        let theta_dominates = lt >= lw;
        let gpnr_aligned = if theta_dominates {
            rho_t >= rho_w
        } else {
            rho_w >= rho_t
        };
        let mild_scaling = if theta_dominates {
            s_t / s_w >= lw / lt
        } else {
            s_w / s_t >= lt / lw
        };
        let identity_err = if lam_rt >= lam_rw && theta_dominates {
            Some((kappa_rh - (s_t / s_w) * kappa_h).abs())
        } else if lam_rw >= lam_rt && !theta_dominates {
            Some((kappa_rh - (s_w / s_t) * kappa_h).abs())
        } else {
            None
        };

        records.push(TheoremRecord {
            iter: t,
            rho_theta: rho_t,
            rho_w,
            s_theta: s_t,
            s_w,
            kappa_h,
            kappa_rh,
            gpnr_aligned,
            mild_scaling,
            applicable: gpnr_aligned && mild_scaling,
            holds: kappa_rh <= kappa_h,
            identity_err,
        });

        // Preconditioned step psi -= eta * R g.
        for i in 0..dim {
            let s = if i < dt { s_t } else { s_w };
            psi[i] -= eta * s * g[i];
        }
    }

    Ok(TheoremTrial { records, diverged })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpnrBoundReport {
    pub n_points: usize,
    /// Points satisfying the proximity condition ||psi - psi*|| <= ||psi||.
    pub n_valid: usize,
    /// Valid points with rho <= lambda_max(H).
    pub n_satisfied: usize,
    pub lambda_max: f64,
}

/// Sample points around the minimizer and check the GPNR bound
/// `rho = ||H(psi - psi*)|| / ||psi|| <= lambda_max(H)` on every
/// proximity-valid point.
pub fn gpnr_bound_trial(
    q: &QuadraticProblem,
    noise_scale: f64,
    n_points: usize,
    seed: u64,
) -> GpnrBoundReport {
    let (w, _) = sym_eig(&q.h);
    let lambda_max = w.iter().cloned().fold(0.0f64, f64::max);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dim = q.dim();

    let mut n_valid = 0;
    let mut n_satisfied = 0;
    for _ in 0..n_points {
        let noise = Array1::from_shape_fn(dim, |_| rng.gen_range(-1.0..1.0) * noise_scale);
        let psi = &q.psi_star + &noise;
        let psi_norm = psi.dot(&psi).sqrt();
        let dist = noise.dot(&noise).sqrt();
        if dist > psi_norm {
            continue;
        }
        n_valid += 1;
        let g = q.grad(&psi);
        let rho = g.dot(&g).sqrt() / psi_norm;
        if rho <= lambda_max {
            n_satisfied += 1;
        }
    }
    GpnrBoundReport {
        n_points,
        n_valid,
        n_satisfied,
        lambda_max,
    }
}
