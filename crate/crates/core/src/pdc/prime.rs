//! Prime ratios and the harmonic distance on a log-frequency axis.
//!
//! Every prime `p` is folded into the octave `(1, 2]` as
//! `r(p) = p / 2^s` with `s` the largest integer such that `2^s < p`.
//! Since `r(2) = 2`, every integer `n >= 2` factors uniquely as a product
//! of prime-ratio powers, so the bin distance from a fundamental to its
//! `n`-th harmonic is a sum of the per-prime distances `B log2 r(p)`.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::{BigRational, Ratio};
use num::{One, Zero};

use crate::{Error, Result};

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// The `l` smallest primes.
pub fn first_primes(l: usize) -> Vec<u64> {
    (2u64..).filter(|&n| is_prime(n)).take(l).collect()
}

/// `s = max { s : 2^s < p }`.
pub fn octave_shift(p: u64) -> u32 {
    debug_assert!(p >= 2);
    63 - (p - 1).leading_zeros()
}

/// `r(p) = p / 2^s`, exactly.
pub fn prime_ratio(p: u64) -> Result<Ratio<u64>> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    Ok(Ratio::new(p, 1u64 << octave_shift(p)))
}

/// `r(p)` in floating point, for distances.
pub fn prime_ratio_f64(p: u64) -> f64 {
    p as f64 / (1u64 << octave_shift(p)) as f64
}

/// `|B log2(m / n)|`: bins between the `n`-th and `m`-th harmonic of any
/// fundamental on an axis with `B` bins per octave.
pub fn harmonic_distance(n: u64, m: u64, bins_per_octave: usize) -> f64 {
    assert!(n >= 1 && m >= 1, "harmonic numbers start at 1");
    (bins_per_octave as f64 * ((m as f64).log2() - (n as f64).log2())).abs()
}

/// `B log2 r(p)`, the distance from a fundamental to `r(p)` times it.
pub fn prime_distance(p: u64, bins_per_octave: usize) -> f64 {
    bins_per_octave as f64 * prime_ratio_f64(p).log2()
}

/// `n = prod r(p)^alpha_p` with positive exponents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeRatioDecomposition {
    pub n: u64,
    pub exponents: BTreeMap<u64, u32>,
}

impl PrimeRatioDecomposition {
    /// Product of the prime-ratio powers in exact rational arithmetic.
    pub fn reconstruct(&self) -> BigRational {
        let mut acc = BigRational::one();
        for (&p, &a) in &self.exponents {
            let r = Ratio::new(BigInt::from(p), BigInt::from(1u64 << octave_shift(p)));
            for _ in 0..a {
                acc *= &r;
            }
        }
        acc
    }

    /// `sum alpha_p * B log2 r(p)`.
    pub fn distance(&self, bins_per_octave: usize) -> f64 {
        self.exponents
            .iter()
            .map(|(&p, &a)| f64::from(a) * prime_distance(p, bins_per_octave))
            .sum()
    }
}

/// Rewrite the prime factorization `n = prod p^a` as prime-ratio powers:
/// every factor `p^a` contributes `a` to `alpha_p` and `a * s(p)` to
/// `alpha_2`.
pub fn prime_ratio_decompose(n: u64) -> Result<PrimeRatioDecomposition> {
    if n < 2 {
        return Err(Error::BelowTwo(n));
    }
    let mut exponents = BTreeMap::new();
    let mut rest = n;
    let mut p = 2;
    while rest > 1 {
        if p * p > rest {
            p = rest;
        }
        let mut a = 0u32;
        while rest % p == 0 {
            rest /= p;
            a += 1;
        }
        if a > 0 {
            *exponents.entry(p).or_insert(0) += a;
            let s = octave_shift(p);
            if s > 0 {
                *exponents.entry(2).or_insert(0) += a * s;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    exponents.retain(|_, a| !a.is_zero());
    Ok(PrimeRatioDecomposition { n, exponents })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(prime_ratio(2).unwrap(), Ratio::new(2, 1));
        assert_eq!(prime_ratio(3).unwrap(), Ratio::new(3, 2));
        assert_eq!(prime_ratio(11).unwrap(), Ratio::new(11, 8));
        assert!(matches!(prime_ratio(9), Err(Error::NotPrime(9))));
        assert!(prime_ratio(1).is_err());
    }

    #[test]
    fn decompositions() {
        let six = prime_ratio_decompose(6).unwrap();
        assert_eq!(six.exponents, BTreeMap::from([(2, 2), (3, 1)]));
        assert_eq!(
            prime_ratio_decompose(2).unwrap().exponents,
            BTreeMap::from([(2, 1)])
        );
        let twelve = prime_ratio_decompose(12).unwrap();
        assert_eq!(twelve.exponents, BTreeMap::from([(2, 3), (3, 1)]));
        assert_eq!(twelve.reconstruct(), BigRational::from_integer(12.into()));
        assert!(prime_ratio_decompose(1).is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(harmonic_distance(1, 2, 12), 12.0);
        assert_eq!(harmonic_distance(3, 3, 12), 0.0);
        assert!((harmonic_distance(4, 5, 12) - 3.863_137_138_648_348).abs() < 1e-12);
        assert_eq!(harmonic_distance(5, 4, 12), harmonic_distance(4, 5, 12));
    }

    #[test]
    fn shift_matches_definition() {
        for p in first_primes(200) {
            let s = octave_shift(p);
            assert!(1u64 << s < p);
            assert!(1u64 << (s + 1) >= p);
        }
    }
}
