//! Residue number system: decomposition, CRT reconstruction and the fast
//! basis conversion (BConv) kernel.
//!
//! Only decomposition and reconstruction touch arbitrary-precision integers;
//! [`BasisConverter`] works on word-sized precomputed constants.

use crate::modarith::{ArithError, Modulus};
use crate::ntt::{ntt_forward, ntt_inverse, NttError, NttPlan};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RnsError {
    #[error("an RNS basis needs at least one modulus")]
    EmptyBasis,
    #[error("moduli {0} and {1} are not co-prime")]
    NotCoprime(u32, u32),
    #[error("coefficient {index} is not below the basis product")]
    CoefficientOutOfRange { index: usize },
    #[error("basis conversion needs coefficient form, polynomial is in NTT form")]
    WrongDomain,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Ntt(#[from] NttError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// Ordered list of pairwise co-prime word-sized moduli.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsBasis {
    moduli: Vec<Modulus>,
}

impl RnsBasis {
    pub fn new(moduli: Vec<Modulus>) -> Result<Self, RnsError> {
        if moduli.is_empty() {
            return Err(RnsError::EmptyBasis);
        }
        for (i, a) in moduli.iter().enumerate() {
            for b in &moduli[i + 1..] {
                if gcd(a.value(), b.value()) != 1 {
                    return Err(RnsError::NotCoprime(a.value(), b.value()));
                }
            }
        }
        Ok(Self { moduli })
    }

    pub fn from_values(values: &[u32]) -> Result<Self, RnsError> {
        let moduli = values
            .iter()
            .map(|&q| Modulus::new(q).map_err(RnsError::from))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(moduli)
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    /// `Q = Π q_i`.
    pub fn product(&self) -> BigUint {
        self.moduli.iter().fold(BigUint::from(1u32), |acc, m| acc * m.value())
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// A polynomial held residue-wise: one row of `n` coefficients per modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsPolynomial {
    basis: RnsBasis,
    rows: Vec<Vec<u32>>,
    domain: Domain,
}

impl RnsPolynomial {
    pub fn new(basis: RnsBasis, rows: Vec<Vec<u32>>, domain: Domain) -> Result<Self, RnsError> {
        if rows.len() != basis.len() {
            return Err(RnsError::ShapeMismatch(format!(
                "{} rows for {} moduli",
                rows.len(),
                basis.len()
            )));
        }
        let n = rows[0].len();
        if !n.is_power_of_two() {
            return Err(RnsError::ShapeMismatch(format!("row length {n} is not a power of two")));
        }
        for (row, m) in rows.iter().zip(basis.moduli()) {
            if row.len() != n {
                return Err(RnsError::ShapeMismatch("rows differ in length".into()));
            }
            if let Some(i) = row.iter().position(|&v| v >= m.value()) {
                return Err(RnsError::ShapeMismatch(format!(
                    "coefficient {i} not canonical modulo {}",
                    m.value()
                )));
            }
        }
        Ok(Self { basis, rows, domain })
    }

    pub fn basis(&self) -> &RnsBasis {
        &self.basis
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn degree(&self) -> usize {
        self.rows[0].len()
    }

    fn check_plans(&self, plans: &[NttPlan]) -> Result<(), RnsError> {
        if plans.len() != self.basis.len()
            || plans
                .iter()
                .zip(self.basis.moduli())
                .any(|(p, m)| p.modulus() != m || p.n() != self.degree())
        {
            return Err(RnsError::ShapeMismatch("one NTT plan per modulus required".into()));
        }
        Ok(())
    }

    /// Row-wise forward NTT. A polynomial already in NTT form is returned
    /// unchanged.
    pub fn to_ntt(&self, plans: &[NttPlan]) -> Result<Self, RnsError> {
        if self.domain == Domain::Ntt {
            return Ok(self.clone());
        }
        self.check_plans(plans)?;
        let rows = self
            .rows
            .iter()
            .zip(plans)
            .map(|(row, plan)| ntt_forward(row, plan))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            basis: self.basis.clone(),
            rows,
            domain: Domain::Ntt,
        })
    }

    pub fn to_coefficients(&self, plans: &[NttPlan]) -> Result<Self, RnsError> {
        if self.domain == Domain::Coefficient {
            return Ok(self.clone());
        }
        self.check_plans(plans)?;
        let rows = self
            .rows
            .iter()
            .zip(plans)
            .map(|(row, plan)| ntt_inverse(row, plan))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            basis: self.basis.clone(),
            rows,
            domain: Domain::Coefficient,
        })
    }
}

/// Splits each coefficient in `[0, Q)` into its residues.
pub fn rns_decompose(big_coeffs: &[BigUint], basis: &RnsBasis) -> Result<RnsPolynomial, RnsError> {
    let big_q = basis.product();
    if let Some(index) = big_coeffs.iter().position(|x| *x >= big_q) {
        return Err(RnsError::CoefficientOutOfRange { index });
    }
    let rows = basis
        .moduli()
        .iter()
        .map(|m| {
            big_coeffs
                .iter()
                .map(|x| (x % m.value()).to_u32().expect("residue fits a word"))
                .collect()
        })
        .collect();
    RnsPolynomial::new(basis.clone(), rows, Domain::Coefficient)
}

/// Chinese-remainder reconstruction of every coefficient.
pub fn crt_reconstruct(poly: &RnsPolynomial) -> Result<Vec<BigUint>, RnsError> {
    if poly.domain() != Domain::Coefficient {
        return Err(RnsError::WrongDomain);
    }
    let basis = poly.basis();
    let big_q = basis.product();
    let weights: Vec<BigUint> = basis
        .moduli()
        .iter()
        .map(|m| {
            let q_hat = &big_q / m.value();
            let q_hat_mod = (&q_hat % m.value()).to_u32().unwrap();
            let inv = m.inv(q_hat_mod).expect("co-prime basis");
            (q_hat * inv) % &big_q
        })
        .collect();
    Ok((0..poly.degree())
        .map(|k| {
            let sum = poly
                .rows()
                .iter()
                .zip(&weights)
                .fold(BigUint::default(), |acc, (row, w)| acc + w * row[k]);
            sum % &big_q
        })
        .collect())
}

/// Precomputed fast basis conversion from `{q_i}` to `{p_j}`.
///
/// Output residue at `p_j` is `Σ_i [x_i · q̂_i^{-1}]_{q_i} · q̂_i mod p_j`,
/// which is `x + e·Q` for some `0 ≤ e < |{q_i}|`.
#[derive(Debug, Clone)]
pub struct BasisConverter {
    source: RnsBasis,
    target: RnsBasis,
    // (Q/q_i)^{-1} mod q_i
    q_hat_inv: Vec<u32>,
    // (Q/q_i) mod p_j, indexed [j][i]
    q_hat_mod_p: Vec<Vec<u32>>,
}

impl BasisConverter {
    pub fn new(source: &RnsBasis, target: &RnsBasis) -> Self {
        let src = source.moduli();
        let q_hat_mod = |i: usize, m: &Modulus| {
            src.iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .fold(1 % m.value(), |acc, (_, qk)| m.mul(acc, m.reduce(qk.value() as u64)))
        };
        let q_hat_inv = src
            .iter()
            .enumerate()
            .map(|(i, qi)| qi.inv(q_hat_mod(i, qi)).expect("co-prime basis"))
            .collect();
        let q_hat_mod_p = target
            .moduli()
            .iter()
            .map(|p| (0..src.len()).map(|i| q_hat_mod(i, p)).collect())
            .collect();
        Self {
            source: source.clone(),
            target: target.clone(),
            q_hat_inv,
            q_hat_mod_p,
        }
    }

    pub fn convert(&self, poly: &RnsPolynomial) -> Result<RnsPolynomial, RnsError> {
        if poly.domain() != Domain::Coefficient {
            return Err(RnsError::WrongDomain);
        }
        if poly.basis() != &self.source {
            return Err(RnsError::ShapeMismatch(
                "polynomial basis differs from converter source".into(),
            ));
        }
        let n = poly.degree();
        let src = self.source.moduli();
        // y_i = [x_i · q̂_i^{-1}]_{q_i}, shared by every target modulus
        let scaled: Vec<Vec<u32>> = poly
            .rows()
            .iter()
            .zip(src)
            .zip(&self.q_hat_inv)
            .map(|((row, qi), &inv)| row.iter().map(|&x| qi.mul(x, inv)).collect())
            .collect();
        let rows = self
            .target
            .moduli()
            .iter()
            .zip(&self.q_hat_mod_p)
            .map(|(p, weights)| {
                (0..n)
                    .map(|k| {
                        scaled
                            .iter()
                            .zip(weights)
                            .fold(0u32, |acc, (y, &w)| p.add(acc, p.mul(p.reduce(y[k] as u64), w)))
                    })
                    .collect()
            })
            .collect();
        RnsPolynomial::new(self.target.clone(), rows, Domain::Coefficient)
    }
}

/// One-shot fast basis conversion of `poly` onto `target`.
pub fn bconv(poly: &RnsPolynomial, target: &RnsBasis) -> Result<RnsPolynomial, RnsError> {
    if poly.domain() != Domain::Coefficient {
        return Err(RnsError::WrongDomain);
    }
    BasisConverter::new(poly.basis(), target).convert(poly)
}
