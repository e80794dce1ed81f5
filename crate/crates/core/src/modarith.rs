//! Word-sized prime moduli and the butterfly primitives every NTT variant is
//! built from.
//!
//! Residues are plain `u32` values kept canonical (`< q`). Products are formed
//! in 64 bits and reduced with a Barrett constant.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("no primitive root of order {order} modulo {q}")]
    NoSuchRoot { order: u64, q: u32 },
    #[error("{value} is not invertible modulo {q}")]
    NotInvertible { value: u32, q: u32 },
}

/// A prime modulus `q < 2^32` with its Barrett reduction constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus {
    q: u32,
    // floor(2^64 / q)
    barrett: u64,
}

impl Modulus {
    pub fn new(q: u32) -> Result<Self, ArithError> {
        if !is_prime(q as u64) {
            return Err(ArithError::NotPrime(q as u64));
        }
        Ok(Self {
            q,
            barrett: (u128::from(u64::MAX) + 1).div_euclid(q as u128) as u64,
        })
    }

    #[inline]
    pub const fn value(&self) -> u32 {
        self.q
    }

    /// Reduces any 64-bit value into `[0, q)`.
    #[inline]
    pub fn reduce(&self, x: u64) -> u32 {
        let quot = ((x as u128 * self.barrett as u128) >> 64) as u64;
        let mut r = x - quot * self.q as u64;
        // the Barrett estimate is off by at most two
        while r >= self.q as u64 {
            r -= self.q as u64;
        }
        r as u32
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a as u64 + b as u64;
        if s >= self.q as u64 {
            (s - self.q as u64) as u32
        } else {
            s as u32
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            (a as u64 + self.q as u64 - b as u64) as u32
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 * b as u64)
    }

    pub fn pow(&self, base: u32, mut exp: u64) -> u32 {
        let mut result = self.reduce(1);
        let mut b = self.reduce(base as u64);
        while exp > 0 {
            if exp & 1 == 1 {
                result = self.mul(result, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        result
    }

    pub fn inv(&self, a: u32) -> Result<u32, ArithError> {
        let a = self.reduce(a as u64);
        if a == 0 {
            return Err(ArithError::NotInvertible { value: a, q: self.q });
        }
        // Fermat: q is prime.
        Ok(self.pow(a, self.q as u64 - 2))
    }
}

/// `(a·b) mod q`.
#[inline]
pub fn mod_mul(a: u32, b: u32, m: &Modulus) -> u32 {
    m.mul(a, b)
}

/// Cooley–Tukey butterfly: `(a + w·b, a − w·b)`.
#[inline]
pub fn butterfly_ct(a: u32, b: u32, w: u32, m: &Modulus) -> (u32, u32) {
    let t = m.mul(w, b);
    (m.add(a, t), m.sub(a, t))
}

/// Gentleman–Sande butterfly: `(a + b, (a − b)·w)`.
#[inline]
pub fn butterfly_gs(a: u32, b: u32, w: u32, m: &Modulus) -> (u32, u32) {
    (m.add(a, b), m.mul(m.sub(a, b), w))
}

/// Returns an element of exact multiplicative order `order`.
///
/// The result is `g^((q-1)/order)` for the smallest generator `g` of `Z_q^*`,
/// so it is deterministic for a given `(order, q)`.
pub fn primitive_root_of_unity(order: u64, m: &Modulus) -> Result<u32, ArithError> {
    let q = m.value();
    let group = q as u64 - 1;
    if order == 0 || !group.is_multiple_of(order) {
        return Err(ArithError::NoSuchRoot { order, q });
    }
    let g = generator(m);
    Ok(m.pow(g, group / order))
}

/// Smallest generator of the multiplicative group modulo `m`.
pub fn generator(m: &Modulus) -> u32 {
    let q = m.value();
    if q == 2 {
        return 1;
    }
    let group = q as u64 - 1;
    let factors = prime_factors(group);
    (2..q)
        .find(|&g| factors.iter().all(|&p| m.pow(g, group / p) != 1))
        .expect("a prime modulus always has a generator")
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Deterministic Miller–Rabin, exact for every `n < 2^32`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u128;
        let mut bb = b as u128 % n as u128;
        while e > 0 {
            if e & 1 == 1 {
                r = r * bb % n as u128;
            }
            bb = bb * bb % n as u128;
            e >>= 1;
        }
        b = r as u64;
        b
    };
    'witness: for a in [2u64, 7, 61] {
        if a % n == 0 {
            continue;
        }
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = (x as u128 * x as u128 % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest `count` primes below 2^32 with `q ≡ 1 (mod 2^two_adicity)`,
/// in descending order.
pub fn ntt_friendly_primes(two_adicity: u32, count: usize) -> Vec<Modulus> {
    let step = 1u64 << two_adicity;
    let mut out = Vec::with_capacity(count);
    let mut k = ((1u64 << 32) - 1) / step;
    while out.len() < count && k > 0 {
        let q = k * step + 1;
        if q < (1u64 << 32) && is_prime(q) {
            out.push(Modulus::new(q as u32).expect("checked prime"));
        }
        k -= 1;
    }
    out
}

/// Default NTT modulus: the largest 32-bit prime with `q ≡ 1 (mod 2^17)`,
/// enough for negacyclic transforms up to `n = 2^16`.
pub fn default_modulus() -> Modulus {
    ntt_friendly_primes(17, 1)[0]
}
