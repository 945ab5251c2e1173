use super::tape::BCE_EPS;
use super::tensor::{dot, norm};
use crate::error::{Error, Result};

pub const DEFAULT_TRIPLET_MARGIN: f64 = 0.2;

/// Binary cross-entropy with `p` clamped to `[1e-7, 1 − 1e-7]`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let c = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * c.ln() + (1.0 - y) * (1.0 - c).ln())
}

/// `1 − cos(a, b)`, or 1 when either vector is zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine distance between {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - dot(a, b) / (na * nb))
}

/// `max(0, d(a, p) − d(a, n) + margin)` over cosine distance.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<f64> {
    let dp = cosine_distance(anchor, positive)?;
    let dn = cosine_distance(anchor, negative)?;
    Ok(hinge(dp, dn, margin))
}

/// Triplet hinge from precomputed distances.
pub fn hinge(d_pos: f64, d_neg: f64, margin: f64) -> f64 {
    (d_pos - d_neg + margin).max(0.0)
}
