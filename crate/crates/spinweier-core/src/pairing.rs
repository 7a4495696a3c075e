//! The Clifford-valued Hermitian pairing ⟨⟨ξ₁,ξ₂⟩⟩ = τ(ξ₂)·ξ₁, its scalar
//! restriction to a minimal left ideal, and the lemma-level properties as
//! callable residual checks.

use crate::clifford::{Multivector, C64};
use crate::error::{Error, Result};
use crate::matrix_rep::{Ideal, MatrixRep};
use crate::spin::SpinCElement;

const IDEAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PairingResult {
    /// τ(y)·x
    pub full: Multivector,
    /// the coefficient c with full = c·f, defined when both arguments lie in
    /// a common minimal ideal with idempotent f
    pub scalar: Option<C64>,
}

pub fn pair(x: &Multivector, y: &Multivector) -> Result<PairingResult> {
    Ok(PairingResult {
        full: y.tau().gp(x)?,
        scalar: None,
    })
}

/// Pairing of two elements of one minimal ideal, with the scalar extracted
/// from the (i,i) entry of the matrix image — the one-dimensional space
/// f·ℂl_n·f read off robustly.
pub fn pair_in_ideal(
    rep: &MatrixRep,
    ideal: &Ideal,
    x: &Multivector,
    y: &Multivector,
) -> Result<PairingResult> {
    for z in [x, y] {
        let zf = z.gp(&ideal.idempotent)?;
        let residual = (&zf - z).norm_inf();
        if residual > IDEAL_TOL {
            return Err(Error::NotInIdeal(residual));
        }
    }
    let full = y.tau().gp(x)?;
    let mats = rep.to_matrix(&full)?;
    let scalar = mats[ideal.lambda][(ideal.index, ideal.index)];
    Ok(PairingResult {
        full,
        scalar: Some(scalar),
    })
}

/// ‖⟨⟨u·x, u·y⟩⟩ − ⟨⟨x, y⟩⟩‖∞ for u ∈ Spin^ℂ acting by its carrier.
pub fn check_spinc_invariance(
    x: &Multivector,
    y: &Multivector,
    u: &SpinCElement,
) -> Result<f64> {
    let c = u.carrier();
    let ux = c.gp(x)?;
    let uy = c.gp(y)?;
    let lhs = pair(&ux, &uy)?.full;
    let rhs = pair(x, y)?.full;
    Ok((&lhs - &rhs).norm_inf())
}

/// ‖⟨⟨v·x, y⟩⟩ + ⟨⟨x, v·y⟩⟩‖∞ for a grade-1 v (skew-adjointness of Clifford
/// multiplication by vectors).
pub fn check_vector_skew(x: &Multivector, y: &Multivector, v: &Multivector) -> Result<f64> {
    if !v.is_vector(crate::clifford::TOL_ZERO) {
        return Err(Error::NotAVector);
    }
    let lhs = pair(&v.gp(x)?, y)?.full;
    let rhs = pair(x, &v.gp(y)?)?.full;
    Ok((&lhs + &rhs).norm_inf())
}

/// ‖τ⟨⟨x, y⟩⟩ − ⟨⟨y, x⟩⟩‖∞.
pub fn check_tau_symmetry(x: &Multivector, y: &Multivector) -> Result<f64> {
    let lhs = pair(x, y)?.full.tau();
    let rhs = pair(y, x)?.full;
    Ok((&lhs - &rhs).norm_inf())
}
