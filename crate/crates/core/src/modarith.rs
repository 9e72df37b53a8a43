//! Modular arithmetic helpers shared by the group-exploration and guessing
//! stages: 64-bit prime fields, deterministic primality testing, and the
//! 15-bit prime table used by the counting kernel.

/// The Mersenne prime 2^61 - 1, the default field for rational-map
/// fingerprinting.
pub const P61: u64 = (1 << 61) - 1;

/// a * b mod m without overflow.
#[inline]
pub fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// a + b mod m.
#[inline]
pub fn addmod(a: u64, b: u64, m: u64) -> u64 {
    let s = a as u128 + b as u128;
    (if s >= m as u128 { s - m as u128 } else { s }) as u64
}

/// a - b mod m.
#[inline]
pub fn submod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + (m - b)
    }
}

/// a^e mod m by binary exponentiation.
pub fn powmod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, a, m);
        }
        a = mulmod(a, a, m);
        e >>= 1;
    }
    acc
}

/// Multiplicative inverse of a modulo a prime p. Panics if a == 0 mod p.
pub fn invmod(a: u64, p: u64) -> u64 {
    assert!(a % p != 0, "inverse of zero");
    powmod(a, p - 2, p)
}

/// Deterministic Miller-Rabin for u64. The 12-prime base set is a proven
/// witness set for all n < 3.3 * 10^24.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest prime strictly below `n`.
pub fn prev_prime(n: u64) -> u64 {
    let mut k = n - 1;
    while !is_prime_u64(k) {
        k -= 1;
    }
    k
}

/// All primes p with lo < p < hi, ascending, via a sieve. Both bounds must
/// fit comfortably in memory; this is only used for the 15-bit prime table.
pub fn primes_between(lo: u32, hi: u32) -> Vec<u32> {
    let hi = hi as usize;
    let mut composite = vec![false; hi];
    let mut out = Vec::new();
    for p in 2..hi {
        if !composite[p] {
            if p as u32 > lo {
                out.push(p as u32);
            }
            let mut q = p * p;
            while q < hi {
                composite[q] = true;
                q += p;
            }
        }
    }
    out
}
