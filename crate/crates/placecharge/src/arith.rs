//! Small integer number theory shared across the crate: trial-division
//! factoring, Euler's totient, multiplicative orders, and the fixed
//! enumeration of rational places (infinity first, then the primes in
//! increasing order).

/// Prime factorization by trial division, ascending. Panics on 0.
pub(crate) fn factor(mut n: u64) -> Vec<(u64, u32)> {
    assert!(n > 0, "cannot factor 0");
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0u32;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub(crate) fn phi(n: u64) -> u64 {
    factor(n).iter().fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    num_integer::lcm(a, b)
}

pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Multiplicative order of `a` modulo `m`. Requires gcd(a, m) = 1; the
/// trivial modulus m = 1 gives order 1.
pub(crate) fn mult_order(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 1;
    }
    debug_assert_eq!(gcd(a % m, m), 1, "order of a non-unit");
    let a = a % m;
    let mut x = a;
    let mut k = 1u64;
    while x != 1 {
        x = mul_mod(x, a, m);
        k += 1;
    }
    k
}

/// All divisors of n, ascending.
pub(crate) fn divisors(n: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for (p, e) in factor(n) {
        let prev = out.clone();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            out.extend(prev.iter().map(|d| d * pk));
        }
    }
    out.sort_unstable();
    out
}

/// 1-indexed position of a prime among the primes: 2 -> 1, 3 -> 2, 5 -> 3.
pub(crate) fn prime_position(p: u64) -> u64 {
    debug_assert!(is_prime(p));
    (2..=p).filter(|&q| is_prime(q)).count() as u64
}

/// Ascending iterator over the primes.
pub(crate) fn primes() -> impl Iterator<Item = u64> {
    (2u64..).filter(|&n| is_prime(n))
}
