//! Selfadjoint linearizations `L_P = γ₀ ⊗ 1 + γ₁ ⊗ t₁ + γ₂ ⊗ t₂` of
//! selfadjoint polynomials, and a numerical check of the resolvent corner
//! identity `[(z e₁₁ − L_P(A,B))⁻¹]₁₁ = (z − P(A,B))⁻¹`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::ncpoly::{Letter, NcPolynomial, Word};

/// Coefficient matrices of a selfadjoint linear pencil of size `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    gamma0: CMat,
    gamma1: CMat,
    gamma2: CMat,
}

impl Linearization {
    /// Wraps three Hermitian `m × m` matrices. Hermiticity is checked exactly.
    pub fn new(gamma0: CMat, gamma1: CMat, gamma2: CMat) -> Result<Self> {
        let m = gamma0.nrows();
        for g in [&gamma0, &gamma1, &gamma2] {
            if g.nrows() != m || g.ncols() != m || m == 0 {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "linearization matrices must all be m x m with m >= 1, got {}x{}",
                    g.nrows(),
                    g.ncols()
                )));
            }
            if !linalg::is_hermitian_exact(g) {
                return Err(Error::InvalidInput("linearization matrices must be Hermitian".into()));
            }
        }
        Ok(Self { gamma0, gamma1, gamma2 })
    }

    pub fn dim(&self) -> usize {
        self.gamma0.nrows()
    }

    pub fn gamma0(&self) -> &CMat {
        &self.gamma0
    }

    pub fn gamma1(&self) -> &CMat {
        &self.gamma1
    }

    pub fn gamma2(&self) -> &CMat {
        &self.gamma2
    }

    /// `β = z e₁₁ − γ₀`
    pub fn beta(&self, z: Complex64) -> CMat {
        let mut b = -&self.gamma0;
        b[(0, 0)] += z;
        b
    }

    /// `γ₀ ⊗ I + γ₁ ⊗ A + γ₂ ⊗ B`, with the m×m structure as the outer block index.
    pub fn pencil(&self, a: &CMat, b: &CMat) -> Result<CMat> {
        let n = a.nrows();
        if !a.is_square() || !b.is_square() || b.nrows() != n {
            return Err(Error::DimensionMismatch("pencil arguments must be square and of equal size".into()));
        }
        Ok(linalg::kron(&self.gamma0, &CMat::identity(n, n))
            + linalg::kron(&self.gamma1, a)
            + linalg::kron(&self.gamma2, b))
    }
}

/// How monomials are paired with their adjoints before symmetrization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Each adjoint pair `c·w + c̄·w*` is stacked once (with coefficient
    /// `2c`) and palindromes once; the smaller pencil of the two.
    #[default]
    Paired,
    /// Every monomial is stacked on its own.
    Unpaired,
}

/// A degree-≤1 entry `c₀ + c₁ t₁ + c₂ t₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine([Complex64; 3]);

impl Affine {
    const ZERO: Affine = Affine([ZERO; 3]);

    fn constant(c: Complex64) -> Self {
        Affine([c, ZERO, ZERO])
    }

    fn letter(c: Complex64, l: Letter) -> Self {
        match l {
            Letter::X => Affine([ZERO, c, ZERO]),
            Letter::Y => Affine([ZERO, ZERO, c]),
        }
    }

    /// Adjoint; the letters are selfadjoint.
    fn adjoint(self) -> Self {
        Affine([self.0[0].conj(), self.0[1].conj(), self.0[2].conj()])
    }

    fn half(self) -> Self {
        Affine([self.0[0] * 0.5, self.0[1] * 0.5, self.0[2] * 0.5])
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == ZERO)
    }
}

/// Builds a selfadjoint linearization with the default [`Strategy::Paired`].
pub fn build_linearization(p: &NcPolynomial) -> Result<Linearization> {
    build_linearization_with(p, Strategy::Paired)
}

/// Builds a selfadjoint linearization of `p`.
///
/// Degree ≤ 1 polynomials give `m = 1`. Otherwise a pencil `[[0, u], [v, Q]]`
/// with `H = −u Q⁻¹ v` is assembled by monomial stacking and symmetrized to
/// `[[0, u/2, v*], [u*/2, 0, Q*], [v, Q, 0]]`, which linearizes `(H + H*)/2 = p`.
pub fn build_linearization_with(p: &NcPolynomial, strategy: Strategy) -> Result<Linearization> {
    if !p.is_selfadjoint() {
        return Err(Error::NotSelfadjoint);
    }
    let mut affine = Affine::ZERO;
    let mut high: Vec<(Complex64, &Word)> = Vec::new();
    for (w, c) in p.terms() {
        match w.letters() {
            [] => affine.0[0] += *c,
            [l] => {
                let a = Affine::letter(*c, *l);
                for k in 0..3 {
                    affine.0[k] += a.0[k];
                }
            }
            _ => match strategy {
                Strategy::Unpaired => high.push((*c, w)),
                Strategy::Paired => {
                    let rev = w.reversed();
                    if *w < rev {
                        high.push((*c * 2.0, w));
                    } else if *w == rev {
                        high.push((*c, w));
                    }
                }
            },
        }
    }

    if high.is_empty() {
        let re = |c: Complex64| CMat::from_element(1, 1, Complex64::new(c.re, 0.0));
        return Linearization::new(re(affine.0[0]), re(affine.0[1]), re(affine.0[2]));
    }

    let inner: usize = high.iter().map(|(_, w)| w.len() - 1).sum::<usize>() + usize::from(!affine.is_zero());
    let mut u = vec![Affine::ZERO; inner];
    let mut v = vec![Affine::ZERO; inner];
    let mut q = vec![vec![Affine::ZERO; inner]; inner];
    let mut off = 0;
    for (c, w) in &high {
        let letters = w.letters();
        let k = letters.len();
        let b = k - 1;
        u[off] = Affine::letter(*c, letters[0]);
        v[off + b - 1] = Affine::letter(ONE, letters[k - 1]);
        for i in 0..b {
            q[off + i][off + i] = Affine::constant(-ONE);
            if i + 1 < b {
                q[off + i][off + i + 1] = Affine::letter(ONE, letters[i + 1]);
            }
        }
        off += b;
    }
    if !affine.is_zero() {
        u[off] = affine;
        v[off] = Affine::constant(ONE);
        q[off][off] = Affine::constant(-ONE);
    }

    let n = inner;
    let m = 1 + 2 * n;
    let mut entries = vec![vec![Affine::ZERO; m]; m];
    for i in 0..n {
        entries[0][1 + i] = u[i].half();
        entries[1 + i][0] = u[i].adjoint().half();
        entries[0][1 + n + i] = v[i].adjoint();
        entries[1 + n + i][0] = v[i];
        for j in 0..n {
            entries[1 + i][1 + n + j] = q[j][i].adjoint();
            entries[1 + n + i][1 + j] = q[i][j];
        }
    }
    let coeff = |k: usize| CMat::from_fn(m, m, |r, s| entries[r][s].0[k]);
    Linearization::new(coeff(0), coeff(1), coeff(2))
}

/// Operator-norm distance between the top-left `N × N` block of
/// `(z(e₁₁ ⊗ I_N) − L_P(A,B))⁻¹` and `(z I_N − P(A,B))⁻¹`.
pub fn verify_corner(lin: &Linearization, p: &NcPolynomial, a: &CMat, b: &CMat, z: Complex64) -> Result<f64> {
    if z.im == 0.0 {
        return Err(Error::InvalidInput("verify_corner needs Im z != 0".into()));
    }
    let n = a.nrows();
    let pencil = lin.pencil(a, b)?;
    let mut shifted = -pencil;
    for i in 0..n {
        shifted[(i, i)] += z;
    }
    let big = linalg::inverse(&shifted).ok_or(Error::Singular("linearized resolvent"))?;
    let corner = big.view((0, 0), (n, n)).into_owned();

    let x = p.evaluate(a, b)?;
    let mut zx = -x;
    for i in 0..n {
        zx[(i, i)] += z;
    }
    let res = linalg::inverse(&zx).ok_or(Error::Singular("resolvent"))?;
    linalg::spectral_norm(&(corner - res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::parse;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn herm(n: usize, seed: u64) -> CMat {
        // small deterministic LCG so the module tests need no RNG crate
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a = CMat::from_fn(n, n, |_, _| c(next(), next()));
        (&a + a.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn affine_polynomials_shortcut_to_scalars() {
        let lin = build_linearization(&parse("x").unwrap()).unwrap();
        assert_eq!(lin.dim(), 1);
        assert_eq!(lin.gamma0()[(0, 0)], ZERO);
        assert_eq!(lin.gamma1()[(0, 0)], ONE);
        assert_eq!(lin.gamma2()[(0, 0)], ZERO);

        let lin = build_linearization(&parse("2 - x + 0.5*y").unwrap()).unwrap();
        assert_eq!(lin.dim(), 1);
        assert_eq!(lin.gamma0()[(0, 0)], c(2.0, 0.0));
        assert_eq!(lin.gamma1()[(0, 0)], c(-1.0, 0.0));
        assert_eq!(lin.gamma2()[(0, 0)], c(0.5, 0.0));
    }

    #[test]
    fn anticommutator_gives_the_three_by_three_pencil() {
        let lin = build_linearization(&parse("x*y+y*x").unwrap()).unwrap();
        assert_eq!(lin.dim(), 3);
        let e = |i, j| linalg::unit(3, i, j);
        assert_eq!(*lin.gamma1(), e(0, 1) + e(1, 0));
        assert_eq!(*lin.gamma2(), e(0, 2) + e(2, 0));
        assert_eq!(*lin.gamma0(), -(e(1, 2) + e(2, 1)));
    }

    #[test]
    fn structural_invariants() {
        for text in ["x^2", "x*y*x", "x*y+y*x+x^2", "(1+2i)*x*y*y + (1-2i)*y*y*x - 3*x + 1", "y*x*x*y*y*x + x*y*y*x*x*y"] {
            let p = parse(text).unwrap();
            for strategy in [Strategy::Paired, Strategy::Unpaired] {
                let lin = build_linearization_with(&p, strategy).unwrap();
                let m = lin.dim();
                assert!(m >= 2);
                assert!(m <= 2 * p.letter_count() + 3, "{} has m = {}", text, m);
                for g in [lin.gamma0(), lin.gamma1(), lin.gamma2()] {
                    assert!(linalg::is_hermitian_exact(g));
                    assert_eq!(g[(0, 0)], ZERO);
                }
            }
        }
    }

    #[test]
    fn non_selfadjoint_input_is_rejected() {
        assert_eq!(build_linearization(&parse("x*y").unwrap()), Err(Error::NotSelfadjoint));
    }

    #[test]
    fn scalar_corner_is_exact() {
        let p = parse("x").unwrap();
        let lin = build_linearization(&p).unwrap();
        let a = herm(4, 3);
        let r = verify_corner(&lin, &p, &a, &herm(4, 4), c(0.3, 1.0)).unwrap();
        assert!(r < 1e-14);
    }

    #[test]
    fn square_corner_on_swap_matrix() {
        let p = parse("x^2").unwrap();
        let lin = build_linearization(&p).unwrap();
        let swap = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let r = verify_corner(&lin, &p, &swap, &CMat::zeros(2, 2), c(0.0, 1.0)).unwrap();
        assert!(r < 1e-12);

        // the minimal 2x2 pencil [[0, x], [x, -1]] passes the same check
        let e = |i, j| linalg::unit(2, i, j);
        let small = Linearization::new(-e(1, 1), e(0, 1) + e(1, 0), CMat::zeros(2, 2)).unwrap();
        let r = verify_corner(&small, &p, &swap, &CMat::zeros(2, 2), c(0.0, 1.0)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn both_strategies_pass_the_corner_check() {
        let q = parse("(0.5+1i)*x*y").unwrap();
        let p = &parse("x*y*x + 2*y^3 + x*x*y*y + y*y*x*x - y").unwrap() + &(&q + &q.adjoint());
        assert!(p.is_selfadjoint());
        for strategy in [Strategy::Paired, Strategy::Unpaired] {
            let lin = build_linearization_with(&p, strategy).unwrap();
            let r = verify_corner(&lin, &p, &herm(5, 11), &herm(5, 12), c(0.0, 2.0)).unwrap();
            assert!(r < 1e-10, "{:?}: residual {}", strategy, r);
        }
    }

    #[test]
    fn real_z_is_rejected() {
        let p = parse("x").unwrap();
        let lin = build_linearization(&p).unwrap();
        let a = herm(2, 1);
        assert!(matches!(verify_corner(&lin, &p, &a, &a, c(1.0, 0.0)), Err(Error::InvalidInput(_))));
    }
}
