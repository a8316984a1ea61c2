use super::{DriftError, LimitSde};

/// Relative tolerance for `F = -grad U` at the checked point.
const CONSERVATIVE_TOLERANCE: f64 = 1e-9;

/// Probability current divided by the density,
/// `psi_i = b_i - 1/2 sum_j (d_j a_ij - a_ij d_j U / kT)` with `a = h h^T`.
fn reduced_flux(
    sde: &LimitSde,
    x: &[f64],
    grad_u: &[f64],
    kbt: f64,
) -> Result<Vec<f64>, DriftError> {
    let d = sde.dim();
    let p = sde.point(x)?;
    let b = p.ito_drift();
    let h = &p.diffusion;
    let a = h * &h.transpose();
    let mut psi = b;
    for j in 0..d {
        let dh = sde.dh(x, &p, j)?;
        let da = &(&dh * &h.transpose()) + &(h * &dh.transpose());
        for (i, v) in psi.iter_mut().enumerate() {
            *v -= 0.5 * (da[(i, j)] - a[(i, j)] * grad_u[j] / kbt);
        }
    }
    Ok(psi)
}

/// Absolute stationary Fokker-Planck residual of the Itô limit at `x`
/// against `rho = exp(-U/kT)`:
/// `sum_i [-d_i(b_i rho) + 1/2 d_i d_j (a_ij rho)]`.
///
/// The flux uses exact coefficient derivatives; its divergence is taken by
/// Richardson-extrapolated central differences.
pub fn gibbs_drift_check(sde: &LimitSde, x: &[f64]) -> Result<f64, DriftError> {
    let model = sde.model();
    let (u, kbt) = model.potential().ok_or(DriftError::MissingPotential)?;
    let d = model.dim();
    let grad = |y: &[f64]| -> Result<Vec<f64>, DriftError> {
        (0..d)
            .map(|i| {
                u.deriv(i).eval(y).map_err(|e| {
                    DriftError::Model(crate::model::ModelError::Invalid(format!("potential: {e}")))
                })
            })
            .collect()
    };

    let gu = grad(x)?;
    let f = model.force(x)?;
    let scale = f.iter().fold(1f64, |m, v| m.max(v.abs()));
    let mismatch = f
        .iter()
        .zip(&gu)
        .fold(0f64, |m, (fi, gi)| m.max((fi + gi).abs()));
    if mismatch > CONSERVATIVE_TOLERANCE * scale {
        return Err(DriftError::NonConservative {
            point: x.to_vec(),
            mismatch,
        });
    }

    let psi = reduced_flux(sde, x, &gu, kbt)?;
    let mut div = 0.0;
    for i in 0..d {
        let h = 1e-3 * x[i].abs().max(1.0);
        let central = |step: f64| -> Result<f64, DriftError> {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            let fp = reduced_flux(sde, &xp, &grad(&xp)?, kbt)?[i];
            let fm = reduced_flux(sde, &xm, &grad(&xm)?, kbt)?[i];
            Ok((fp - fm) / (2.0 * step))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        div += (4.0 * fine - coarse) / 3.0 - psi[i] * gu[i] / kbt;
    }
    let u0 = u.eval(x).map_err(|e| {
        DriftError::Model(crate::model::ModelError::Invalid(format!("potential: {e}")))
    })?;
    Ok((div * (-u0 / kbt).exp()).abs())
}
