//! Central finite differences for gradient verification.
//!
//! This path is independent of the recorded-graph adjoints: it only ever
//! evaluates the forward function. Comparisons use a norm-relative error
//! so near-zero buffers do not inflate the ratio.

use super::Elem;

/// Central-difference gradient of `f` at `x`, perturbing one coordinate
/// at a time: (f(x+h) - f(x-h)) / 2h.
pub fn finite_difference<F>(mut f: F, x: &[Elem], h: Elem) -> Vec<Elem>
where
    F: FnMut(&[Elem]) -> Elem,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Norm-relative disagreement between an analytic and a finite-difference
/// gradient: ||a - b|| / max(||a||, ||b||, floor).
pub fn relative_error(analytic: &[Elem], numeric: &[Elem]) -> Elem {
    assert_eq!(analytic.len(), numeric.len());
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&a, &b) in analytic.iter().zip(numeric) {
        diff += (a - b) * (a - b);
        na += a * a;
        nb += b * b;
    }
    let denom = na.sqrt().max(nb.sqrt()).max(1e-12);
    diff.sqrt() / denom
}
