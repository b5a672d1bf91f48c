//! Exact polynomial arithmetic in the complex amplitudes, used to check the
//! normal-form coefficients independently of the library's derivation.

use std::collections::BTreeMap;

use kinklab::normalform::{ExactCoeffs, QOmega, QOmegaC};
use num_rational::Rational64;

/// Polynomial in (P, M) with exact coefficients: (p, q) ↦ coefficient of P^p M^q.
#[derive(Clone, Debug, Default)]
pub struct Poly(pub BTreeMap<(u32, u32), QOmegaC>);

impl Poly {
    pub fn term(p: u32, q: u32, c: QOmegaC) -> Self {
        let mut m = BTreeMap::new();
        m.insert((p, q), c);
        Poly(m)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = self.0.clone();
        for (k, v) in &o.0 {
            let e = out.entry(*k).or_insert_with(QOmegaC::zero);
            *e = e.add(*v);
        }
        Poly(out)
    }

    pub fn scale(&self, c: QOmegaC) -> Poly {
        Poly(self.0.iter().map(|(k, v)| (*k, v.mul(c))).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = Poly::default();
        for ((p1, q1), a) in &self.0 {
            for ((p2, q2), b) in &o.0 {
                out = out.add(&Poly::term(p1 + p2, q1 + q2, a.mul(*b)));
            }
        }
        out
    }

    /// P ∂_P - M ∂_M, the weight operator of the free flow P' = iωP, M' = -iωM
    /// divided by iω.
    pub fn weight(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .map(|((p, q), v)| {
                    let w = QOmega::int(*p as i64 - *q as i64);
                    ((*p, *q), v.mul(QOmegaC::real(w)))
                })
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|v| v.is_zero())
    }
}

pub fn real(a: i64, b: i64) -> QOmegaC {
    QOmegaC::real(QOmega::new(Rational64::from_integer(a), Rational64::from_integer(b)))
}

pub fn ratio(n: i64, d: i64) -> QOmegaC {
    QOmegaC::real(QOmega::new(Rational64::new(n, d), Rational64::from_integer(0)))
}

/// Coefficient of T⁻¹ in (±i∂_T + ω)A₁± for A₁± = A± + B±(A₊, A₋)/T, at unit
/// coupling.  Along the flow, A₊' = iωA₊ and A₋' = -iωA₋ up to O(1/T), and
/// (±i∂_T + ω)A± = -(1/2T)(A₊ + A₋)².  The chain rule gives
/// ±i(∂_T B) = ∓ω (P∂_P - M∂_M)B, so the residual is
/// -(1/2)(P + M)² + ωB ∓ ω(P∂_P - M∂_M)B.
pub fn quadratic_residual(b: &Poly, sign: i64) -> Poly {
    let w = QOmegaC::real(QOmega::omega());
    let pm = Poly::term(1, 0, real(1, 0)).add(&Poly::term(0, 1, real(1, 0)));
    let forcing = pm.mul(&pm).scale(ratio(-1, 2));
    forcing
        .add(&b.scale(w))
        .add(&b.weight().scale(w.mul(real(-sign, 0))))
}

pub fn plus_map(e: &ExactCoeffs) -> Poly {
    Poly::term(2, 0, e.alpha_p)
        .add(&Poly::term(1, 1, e.beta_p))
        .add(&Poly::term(0, 2, e.gamma_p))
}

pub fn minus_map(e: &ExactCoeffs) -> Poly {
    Poly::term(0, 2, e.alpha_m)
        .add(&Poly::term(1, 1, e.beta_m))
        .add(&Poly::term(2, 0, e.gamma_m))
}
