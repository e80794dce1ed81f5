//! Slow, independent reference computations used by the self-check suites
//! and tests. Nothing here shares code with the transforms it checks.

use crate::modarith::Modulus;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// Direct O(n²) evaluation `X_k = Σ_j x_j ψ^{j(2k+1)}`.
pub fn negacyclic_dft(x: &[u32], psi: u32, m: &Modulus) -> Vec<u32> {
    let n = x.len() as u64;
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold(0u32, |acc, (j, &xj)| {
                let e = (j as u64 * (2 * k + 1)) % (2 * n);
                m.add(acc, m.mul(xj, m.pow(psi, e)))
            })
        })
        .collect()
}

/// Schoolbook product in `Z_q[x]/(x^n + 1)`.
pub fn negacyclic_convolution(a: &[u32], b: &[u32], m: &Modulus) -> Vec<u32> {
    let n = a.len();
    assert_eq!(n, b.len());
    let mut out = vec![0u32; n];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let p = m.mul(x, y);
            let k = i + j;
            if k < n {
                out[k] = m.add(out[k], p);
            } else {
                out[k - n] = m.sub(out[k - n], p);
            }
        }
    }
    out
}

pub fn product(moduli: &[u32]) -> BigUint {
    moduli.iter().fold(BigUint::from(1u32), |acc, &q| acc * q)
}

/// Exact fast-basis-conversion sum `Σ_i [x_i · q̂_i^{-1}]_{q_i} · q̂_i` as
/// an integer (not yet reduced modulo any target).
pub fn bconv_exact_sum(residues: &[u32], moduli: &[u32]) -> BigUint {
    let big_q = product(moduli);
    let mut sum = BigUint::zero();
    for (&x, &q) in residues.iter().zip(moduli) {
        let q_hat = &big_q / q;
        let q_hat_mod = (&q_hat % q).to_u64().unwrap();
        let inv = BigUint::from(q_hat_mod).modpow(&BigUint::from(q - 2), &BigUint::from(q));
        let term = (BigUint::from(x) * inv) % q;
        sum += term * q_hat;
    }
    sum
}

/// Smallest `e ≥ 0` with `bconv_exact_sum = x + e·Q`, found by search.
pub fn bconv_overflow(x: &BigUint, residues: &[u32], moduli: &[u32]) -> Option<u64> {
    let big_q = product(moduli);
    let sum = bconv_exact_sum(residues, moduli);
    (0..=moduli.len() as u64).find(|&e| x + &big_q * e == sum)
}
