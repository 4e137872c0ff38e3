//! Transmural angle laws.

use super::AngleSet;

/// Linear helical/sheetlet angle laws, in degrees:
/// `alpha(phi) = alpha_endo (1 - phi) + alpha_epi phi` and likewise for
/// `beta`. `phi` is clamped to `[0, 1]` first, so solver noise just outside
/// the range cannot extrapolate the angles.
///
/// When both `w_ot` and [`AngleSet::ot`] are present (complete left
/// ventricle), each endpoint angle is itself blended toward its
/// outflow-tract variant before the transmural law:
/// `alpha_endo_eff = w alpha_endo + (1 - w) alpha_endo_OT`, with `w` clamped
/// to `[0, 1]`.
pub fn angle_laws(phi: f64, angles: &AngleSet, w_ot: Option<f64>) -> (f64, f64) {
    let phi = phi.clamp(0.0, 1.0);
    let (a_endo, a_epi, b_endo, b_epi) = match (w_ot, angles.ot) {
        (Some(w), Some(ot)) => {
            let w = w.clamp(0.0, 1.0);
            (
                w * angles.alpha_endo + (1.0 - w) * ot.alpha_endo,
                w * angles.alpha_epi + (1.0 - w) * ot.alpha_epi,
                w * angles.beta_endo + (1.0 - w) * ot.beta_endo,
                w * angles.beta_epi + (1.0 - w) * ot.beta_epi,
            )
        }
        _ => (
            angles.alpha_endo,
            angles.alpha_epi,
            angles.beta_endo,
            angles.beta_epi,
        ),
    };
    (
        a_endo * (1.0 - phi) + a_epi * phi,
        b_endo * (1.0 - phi) + b_epi * phi,
    )
}
