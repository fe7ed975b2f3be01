use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::SpatialKernel;

/// Sample a planar offset with radial density proportional to `r f(r)` on
/// (0, radius_bound] and a uniform angle.
///
/// The radius comes from numeric inversion of the kernel's antiderivative
/// `F(r) = int_0^r x f(x) dx`; an infinite bound needs an integrable kernel.
pub fn sample_kernel_location<R: Rng>(
    kernel: &SpatialKernel,
    params: &[f64],
    radius_bound: f64,
    rng: &mut R,
) -> Result<[f64; 2]> {
    if !(radius_bound > 0.0) {
        return Err(Error::Invalid("radius bound must be positive".into()));
    }
    let (mass, hi0) = if radius_bound.is_finite() {
        (kernel.antider(radius_bound, params), radius_bound)
    } else {
        let total = kernel.antider_inf(params).ok_or_else(|| {
            Error::Invalid(
                "kernel mass diverges: an infinite radius bound needs an integrable tail"
                    .into(),
            )
        })?;
        // find a finite upper bracket containing virtually all the mass
        let mut hi = 1.0;
        while kernel.antider(hi, params) < total * (1.0 - 1e-13) && hi < 1e300 {
            hi *= 2.0;
        }
        (total, hi)
    };
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::Numeric(format!(
            "kernel mass {mass} on (0, {radius_bound}]"
        )));
    }
    let u: f64 = rng.gen::<f64>();
    let target = u * mass;
    // bisection on the monotone antiderivative
    let mut lo = 0.0;
    let mut hi = hi0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kernel.antider(mid, params) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    let theta = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    Ok([r * theta.cos(), r * theta.sin()])
}
