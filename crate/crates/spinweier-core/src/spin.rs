//! Spin_n inside the even Clifford algebra, the double cover λ onto SO(n),
//! its Spin^ℂ extension, and lifting of rotations back through the cover.

use nalgebra::DMatrix;

use crate::clifford::{Multivector, C64};
use crate::error::{Error, Result};

pub type RMatrix = DMatrix<f64>;

const UNIT_TOL: f64 = 1e-9;

/// An element of Spin_n: even, real, with τ(g)·g = 1.
#[derive(Debug, Clone)]
pub struct SpinElement {
    g: Multivector,
}

impl SpinElement {
    pub fn new(g: Multivector) -> Result<SpinElement> {
        for (mask, c) in g.coeffs().iter().enumerate() {
            if (mask as u16).count_ones() % 2 == 1 && c.norm() > UNIT_TOL {
                return Err(Error::NotASpinElement("odd-grade support".into()));
            }
            if c.im.abs() > UNIT_TOL {
                return Err(Error::NotASpinElement("non-real coefficient".into()));
            }
        }
        let unit = &g.tau().gp(&g)? - &Multivector::one(g.dim());
        if unit.norm_inf() > UNIT_TOL {
            return Err(Error::NotASpinElement(format!(
                "tau(g)g != 1 (residual {:.3e})",
                unit.norm_inf()
            )));
        }
        Ok(SpinElement { g })
    }

    pub fn identity(dim: u32) -> SpinElement {
        SpinElement {
            g: Multivector::one(dim),
        }
    }

    pub fn mv(&self) -> &Multivector {
        &self.g
    }

    pub fn dim(&self) -> u32 {
        self.g.dim()
    }

    /// Group inverse: τ(g).
    pub fn inverse(&self) -> SpinElement {
        SpinElement { g: self.g.tau() }
    }

    pub fn compose(&self, other: &SpinElement) -> Result<SpinElement> {
        Ok(SpinElement {
            g: self.g.gp(&other.g)?,
        })
    }

    pub fn negate(&self) -> SpinElement {
        SpinElement { g: -&self.g }
    }

    /// Flips the overall sign so the scalar part is positive, falling back to
    /// the first canonical-order coefficient above 1e−6 when the scalar part
    /// is near zero. This is the reproducibility contract for lifts.
    pub fn normalize_sign(self) -> SpinElement {
        let s = self.g.coeff(0).re;
        let flip = if s.abs() >= 1e-6 {
            s < 0.0
        } else {
            match self
                .g
                .coeffs()
                .iter()
                .find(|c| c.re.abs() > 1e-6)
            {
                Some(c) => c.re < 0.0,
                None => false,
            }
        };
        if flip {
            self.negate()
        } else {
            self
        }
    }
}

/// The double cover: λ(g) has columns the grade-1 coefficients of g·e_i·g⁻¹.
pub fn lambda(g: &SpinElement) -> RMatrix {
    let n = g.dim();
    let inv = g.mv().tau();
    let mut r = RMatrix::zeros(n as usize, n as usize);
    for i in 0..n {
        let ei = Multivector::basis_vector(n, i);
        let im = &(g.mv() * &ei) * &inv;
        let (col, _residual) = im.vector_part();
        for (j, &v) in col.iter().enumerate() {
            r[(j, i as usize)] = v;
        }
    }
    r
}

fn so_residual(r: &RMatrix) -> f64 {
    let n = r.nrows();
    let eye = RMatrix::identity(n, n);
    let ortho = (r.transpose() * r - eye).abs().max();
    let det = r.clone().determinant();
    ortho.max((det - 1.0).abs())
}

/// Unit-vector Clifford factor for the Householder reflection along u.
fn vector_factor(u: &[f64], n: u32) -> Multivector {
    Multivector::from_real_vector(n, u)
}

/// Lifts R ∈ SO(n) through the double cover. R is factored into an even
/// number of reflections by column reduction; each reflection maps to its
/// unit vector and residual axis flips map to bivectors e_a·e_b. The sign of
/// the result follows `normalize_sign`.
pub fn spin_lift(r: &RMatrix) -> Result<SpinElement> {
    let n = r.nrows() as u32;
    if r.ncols() as u32 != n || n == 0 || n > crate::clifford::MAX_DIM {
        return Err(Error::ShapeMismatch);
    }
    let res = so_residual(r);
    if res > 1e-8 {
        return Err(Error::NotARotation(res));
    }
    let mut a = r.clone();
    let mut g = Multivector::one(n);
    let nn = n as usize;
    for j in 0..nn {
        // Reflect column j onto ±e_j, picking the sign that avoids
        // cancellation (target opposite the current diagonal entry).
        let sign = if a[(j, j)] >= 0.0 { -1.0 } else { 1.0 };
        let mut u: Vec<f64> = (0..nn).map(|i| a.column(j)[i]).collect();
        u[j] -= sign;
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut u {
                *x /= norm;
            }
            // apply H_u to every remaining column
            for c in 0..nn {
                let dot: f64 = (0..nn).map(|i| u[i] * a[(i, c)]).sum();
                for i in 0..nn {
                    a[(i, c)] -= 2.0 * dot * u[i];
                }
            }
            g = &g * &vector_factor(&u, n);
        }
    }
    // a is now diag(±1); each −1 axis is one more reflection (across the
    // coordinate hyperplane), so the total number of vector factors is even
    // exactly because det R = +1.
    for i in 0..nn {
        if a[(i, i)] < 0.0 {
            g = &g * &Multivector::basis_vector(n, i as u32);
        }
    }
    // Drop the tiny odd/imaginary round-off before validating.
    let lift = SpinElement::new(g)?.normalize_sign();
    Ok(lift)
}

/// An element of Spin_n^ℂ = (Spin_n × S¹)/ℤ₂, stored as a representative
/// pair; the carrier s·g is the class invariant.
#[derive(Debug, Clone)]
pub struct SpinCElement {
    pub g: SpinElement,
    pub s: C64,
}

impl SpinCElement {
    pub fn new(g: SpinElement, s: C64) -> Result<SpinCElement> {
        if (s.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotASpinElement("|s| != 1".into()));
        }
        Ok(SpinCElement { g, s })
    }

    pub fn carrier(&self) -> Multivector {
        self.g.mv().scale(self.s)
    }

    /// The other representative of the same ℤ₂ class.
    pub fn flipped(&self) -> SpinCElement {
        SpinCElement {
            g: self.g.negate(),
            s: -self.s,
        }
    }
}

/// The three §2.1 homomorphisms evaluated at once: λ^ℂ = λ(g), l^ℂ = s²,
/// and their pair. All are invariant under the ℤ₂ identification.
pub fn spinc_hom_suite(x: &SpinCElement) -> (RMatrix, C64) {
    (lambda(&x.g), x.s * x.s)
}

/// Embeds Spin_p × Spin_q into Spin_{p+q}: the tangent factor keeps
/// generators e_1..e_p, the normal factor is re-indexed onto e_{p+1}..e_n,
/// and the product is taken in Cl_n.
pub fn adapted_embed(g_tan: &SpinElement, g_nor: &SpinElement) -> Result<SpinElement> {
    let p = g_tan.dim();
    let q = g_nor.dim();
    let n = p + q;
    if n > crate::clifford::MAX_DIM {
        return Err(Error::DimensionRange(n));
    }
    let mut xt = Multivector::zero(n);
    for (mask, &c) in g_tan.mv().coeffs().iter().enumerate() {
        if c.norm_sqr() > 0.0 {
            xt.set(mask as u16, c);
        }
    }
    let mut xn = Multivector::zero(n);
    for (mask, &c) in g_nor.mv().coeffs().iter().enumerate() {
        if c.norm_sqr() > 0.0 {
            xn.set((mask << p) as u16, c);
        }
    }
    SpinElement::new(&xt * &xn)
}

/// Haar-ish random rotation via QR of a Gaussian matrix, determinant fixed
/// to +1. Test and scenario utility.
pub fn random_rotation(n: usize, rng: &mut impl rand::Rng) -> RMatrix {
    use rand::distributions::Distribution;
    let normal = rand::distributions::Uniform::new(-1.0f64, 1.0);
    loop {
        let m = RMatrix::from_fn(n, n, |_, _| normal.sample(rng));
        let qr = m.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        if q.clone().determinant() < 0.0 {
            for i in 0..n {
                q[(i, 0)] = -q[(i, 0)];
            }
        }
        if so_residual(&q) < 1e-12 {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn lambda_identity() {
        let g = SpinElement::identity(3);
        let r = lambda(&g);
        assert!((r - RMatrix::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn lambda_bivector_is_pi_rotation() {
        // e1e2 conjugates e1 ↦ −e1, e2 ↦ −e2
        let g = SpinElement::new(Multivector::basis_blade(2, 0b11)).unwrap();
        let r = lambda(&g);
        let expect = RMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!((r - expect).abs().max() < 1e-14);
    }

    #[test]
    fn lambda_kernel_z2() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for n in 2..=5usize {
            let r = random_rotation(n, &mut rng);
            let g = spin_lift(&r).unwrap();
            assert!((lambda(&g) - lambda(&g.negate())).abs().max() < 1e-12);
        }
    }

    #[test]
    fn lambda_homomorphism() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(32);
        for n in 2..=6usize {
            for _ in 0..20 {
                let r1 = random_rotation(n, &mut rng);
                let r2 = random_rotation(n, &mut rng);
                let g1 = spin_lift(&r1).unwrap();
                let g2 = spin_lift(&r2).unwrap();
                let lhs = lambda(&g1.compose(&g2).unwrap());
                let rhs = lambda(&g1) * lambda(&g2);
                assert!((lhs - rhs).abs().max() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn spin_lift_identity() {
        let g = spin_lift(&RMatrix::identity(4, 4)).unwrap();
        assert!((g.mv() - &Multivector::one(4)).norm_inf() < 1e-12);
    }

    #[test]
    fn spin_lift_planar_rotation() {
        // rotation by θ in the (1,2)-plane lifts to ±(cos(θ/2) − sin(θ/2) e1e2);
        // the contract is λ(lift) = R with the documented sign choice.
        let theta = 0.7f64;
        let r = RMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        let g = spin_lift(&r).unwrap();
        assert!((lambda(&g) - &r).abs().max() < 1e-12);
        assert!(g.mv().coeff(0).re > 0.0);
        let c0 = g.mv().coeff(0).re;
        assert!((c0 - (theta / 2.0).cos()).abs() < 1e-12);
        assert!((g.mv().coeff(0b11).re.abs() - (theta / 2.0).sin().abs()).abs() < 1e-12);
    }

    #[test]
    fn spin_lift_roundtrip_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for n in 2..=6usize {
            for _ in 0..100 {
                let r = random_rotation(n, &mut rng);
                let g = spin_lift(&r).unwrap();
                assert!((lambda(&g) - &r).abs().max() < 1e-8, "n={n}");
            }
        }
    }

    #[test]
    fn spin_lift_half_turn() {
        // diag(−1,−1,1): |scalar(g)| = 0, exercising the sign fallback
        let r = RMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        let g = spin_lift(&r).unwrap();
        assert!((lambda(&g) - &r).abs().max() < 1e-12);
        let first = g
            .mv()
            .coeffs()
            .iter()
            .find(|c| c.re.abs() > 1e-6)
            .unwrap();
        assert!(first.re > 0.0);
    }

    #[test]
    fn spin_lift_rejects_non_rotation() {
        let m = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(spin_lift(&m), Err(Error::NotARotation(_))));
        let m2 = RMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert!(spin_lift(&m2).is_err());
    }

    #[test]
    fn lift_sign_idempotent_under_lambda() {
        // λ ∘ spin_lift ∘ λ = λ
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(34);
        for _ in 0..20 {
            let r = random_rotation(4, &mut rng);
            let g = spin_lift(&r).unwrap();
            let g2 = spin_lift(&lambda(&g)).unwrap();
            assert!((lambda(&g2) - lambda(&g)).abs().max() < 1e-9);
        }
    }

    #[test]
    fn spinc_suite() {
        let one = SpinElement::identity(2);
        let x = SpinCElement::new(one, C64::new(0.0, 1.0)).unwrap();
        let (r, l) = spinc_hom_suite(&x);
        assert!((r - RMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert!((l - C64::new(-1.0, 0.0)).norm() < 1e-14);
        // same outputs on the other representative
        let (r2, l2) = spinc_hom_suite(&x.flipped());
        assert!((r2 - RMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert!((l2 - l).norm() < 1e-14);

        let g = SpinElement::new(Multivector::basis_blade(2, 0b11)).unwrap();
        let y = SpinCElement::new(g, C64::new(1.0, 0.0)).unwrap();
        let (ry, ly) = spinc_hom_suite(&y);
        assert!((ry + RMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert!((ly - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn adapted_embed_blocks() {
        // trivial pair
        let g = adapted_embed(&SpinElement::identity(2), &SpinElement::identity(1)).unwrap();
        assert!((g.mv() - &Multivector::one(3)).norm_inf() < 1e-14);

        // e1e2 in Cl_2 embeds unchanged; λ is block-diag(π-rotation, 1)
        let gt = SpinElement::new(Multivector::basis_blade(2, 0b11)).unwrap();
        let g = adapted_embed(&gt, &SpinElement::identity(1)).unwrap();
        let r = lambda(&g);
        let expect =
            RMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((r - expect).abs().max() < 1e-12);
    }

    #[test]
    fn adapted_embed_random_blockdiag() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(35);
        for (p, q) in [(2usize, 2usize), (2, 1), (3, 2)] {
            let rt = random_rotation(p, &mut rng);
            let rn = random_rotation(q, &mut rng);
            let gt = spin_lift(&rt).unwrap();
            let gn = spin_lift(&rn).unwrap();
            let g = adapted_embed(&gt, &gn).unwrap();
            let r = lambda(&g);
            let n = p + q;
            let mut expect = RMatrix::zeros(n, n);
            expect.view_mut((0, 0), (p, p)).copy_from(&rt);
            expect.view_mut((p, p), (q, q)).copy_from(&rn);
            assert!((r - expect).abs().max() < 1e-10, "p={p} q={q}");
        }
    }

    #[test]
    fn spin_element_validation() {
        // odd element rejected
        assert!(SpinElement::new(Multivector::basis_vector(3, 0)).is_err());
        // non-unit rejected
        let two = Multivector::scalar(3, C64::new(2.0, 0.0));
        assert!(SpinElement::new(two).is_err());
        // complex scalar rejected
        let i = Multivector::scalar(3, C64::new(0.0, 1.0));
        assert!(SpinElement::new(i).is_err());
    }
}
