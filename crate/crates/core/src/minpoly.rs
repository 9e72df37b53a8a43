//! Integer-relation recognition of algebraic numbers: an exact LLL
//! reduction over the lattice spanned by (e_i | C * x^i) proposes integer
//! polynomials annihilating a high-precision estimate; candidates are
//! verified by rational root refinement before being returned.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// An integer polynomial whose real root matches the input estimate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinPolyCandidate {
    /// c_0 + c_1 x + ... + c_d x^d, content-free, positive leading
    /// coefficient.
    pub coefficients: Vec<BigInt>,
    /// The nearby real root, refined well beyond the input precision.
    pub root: BigRational,
    /// |P(estimate)|.
    pub residual: BigRational,
    pub height_bound: BigInt,
}

impl MinPolyCandidate {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn height(&self) -> BigInt {
        self.coefficients
            .iter()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    /// Text form like "x^2 - 12*x - 36".
    pub fn polynomial_string(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.coefficients.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if out.is_empty() {
                if c.is_negative() {
                    out.push('-');
                }
            } else {
                out.push_str(if c.is_negative() { " - " } else { " + " });
            }
            let show_coeff = !mag.is_one() || i == 0;
            if show_coeff {
                out.push_str(&mag.to_string());
            }
            if i > 0 {
                if show_coeff {
                    out.push('*');
                }
                out.push('x');
                if i > 1 {
                    out.push_str(&format!("^{i}"));
                }
            }
        }
        if out.is_empty() {
            out.push('0');
        }
        out
    }
}

fn eval(coeffs: &[BigInt], x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + BigRational::from(c.clone());
    }
    acc
}

/// Search for the lowest-degree, lowest-height integer polynomial with a
/// real root matching `estimate` to the usable precision (the declared
/// digits minus a guard band). None when nothing within the degree and
/// height bounds survives verification.
pub fn recognize(
    estimate: &BigRational,
    digits: u32,
    d_max: u32,
    height_bound: &BigInt,
) -> Option<MinPolyCandidate> {
    assert!(digits >= 15, "need at least 15 digits");
    assert!(d_max >= 1);
    let guard = 6u32;
    let usable = digits - guard;
    let scale = BigInt::from(10u32).pow(usable);
    let tol = BigRational::new(BigInt::one(), scale.clone());

    for d in 1..=d_max as usize {
        // lattice rows: identity part plus the scaled power column
        let mut basis: Vec<Vec<BigInt>> = Vec::with_capacity(d + 1);
        let mut power = BigRational::one();
        for i in 0..=d {
            let mut row = vec![BigInt::zero(); d + 2];
            row[i] = BigInt::one();
            row[d + 1] = (&power * BigRational::from(scale.clone())).round().to_integer();
            basis.push(row);
            power *= estimate;
        }
        lll_reduce(&mut basis);

        let mut best: Option<MinPolyCandidate> = None;
        for vec in &basis {
            let mut coeffs = vec[..=d].to_vec();
            while coeffs.len() > 1 && coeffs.last().map_or(false, Zero::is_zero) {
                coeffs.pop();
            }
            if coeffs.len() < 2 || coeffs.iter().all(Zero::is_zero) {
                continue;
            }
            // content-free, positive leading coefficient
            let mut content = BigInt::zero();
            for c in &coeffs {
                content = num_integer::Integer::gcd(&content, c);
            }
            if !content.is_zero() && !content.is_one() {
                for c in coeffs.iter_mut() {
                    *c /= &content;
                }
            }
            if coeffs.last().unwrap().is_negative() {
                for c in coeffs.iter_mut() {
                    *c = -c.clone();
                }
            }
            let height = coeffs.iter().map(|c| c.abs()).max().unwrap();
            if height > *height_bound {
                continue;
            }
            let Some(root) = refine_root(&coeffs, estimate, &tol, digits + 12) else {
                continue;
            };
            if (&root - estimate).abs() > tol {
                continue;
            }
            let cand = MinPolyCandidate {
                residual: eval(&coeffs, estimate).abs(),
                coefficients: coeffs,
                root,
                height_bound: height_bound.clone(),
            };
            match &best {
                Some(b) if b.height() <= cand.height() => {}
                _ => best = Some(cand),
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// Find a simple real root of P near x0 (within `radius`) by bisection on a
/// sign change, refined to `digits` decimals. None when no sign change
/// brackets x0.
fn refine_root(
    coeffs: &[BigInt],
    x0: &BigRational,
    radius: &BigRational,
    digits: u32,
) -> Option<BigRational> {
    let mut lo = x0 - radius;
    let mut hi = x0 + radius;
    let flo = eval(coeffs, &lo);
    let fhi = eval(coeffs, &hi);
    if flo.is_zero() {
        return Some(lo);
    }
    if fhi.is_zero() {
        return Some(hi);
    }
    if flo.is_positive() == fhi.is_positive() {
        return None;
    }
    let positive_at_hi = fhi.is_positive();
    let eps = BigRational::new(BigInt::one(), BigInt::from(10u32).pow(digits));
    while (&hi - &lo) > eps {
        let mid = (&lo + &hi) / BigRational::from(BigInt::from(2));
        let fm = eval(coeffs, &mid);
        if fm.is_zero() {
            return Some(mid);
        }
        if fm.is_positive() == positive_at_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some((&lo + &hi) / BigRational::from(BigInt::from(2)))
}

/// In-place LLL reduction (delta = 3/4) with exact rational Gram-Schmidt.
fn lll_reduce(basis: &mut Vec<Vec<BigInt>>) {
    let n = basis.len();
    if n <= 1 {
        return;
    }
    let dot = |a: &[BigInt], b: &[BigInt]| -> BigInt {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    };

    // Gram-Schmidt data recomputed from scratch; dimensions here are tiny.
    let gram = |basis: &Vec<Vec<BigInt>>| -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
        let mut mu = vec![vec![BigRational::zero(); n]; n];
        let mut b_star: Vec<Vec<BigRational>> = Vec::with_capacity(n);
        let mut norms = vec![BigRational::zero(); n];
        for i in 0..n {
            let mut v: Vec<BigRational> = basis[i]
                .iter()
                .map(|x| BigRational::from(x.clone()))
                .collect();
            for j in 0..i {
                let num: BigRational = basis[i]
                    .iter()
                    .zip(&b_star[j])
                    .map(|(x, y)| BigRational::from(x.clone()) * y)
                    .sum();
                mu[i][j] = if norms[j].is_zero() {
                    BigRational::zero()
                } else {
                    num / &norms[j]
                };
                for (vc, sc) in v.iter_mut().zip(&b_star[j]) {
                    *vc -= &mu[i][j] * sc;
                }
            }
            norms[i] = v.iter().map(|x| x * x).sum();
            b_star.push(v);
        }
        (mu, norms)
    };

    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let delta = BigRational::new(BigInt::from(3), BigInt::from(4));
    let (mut mu, mut norms) = gram(basis);
    let mut k = 1usize;
    let mut rounds = 0u32;
    while k < n {
        rounds += 1;
        assert!(rounds < 100_000, "reduction failed to terminate");
        for j in (0..k).rev() {
            if mu[k][j].abs() > half {
                let r = mu[k][j].round().to_integer();
                let bj = basis[j].clone();
                for (x, y) in basis[k].iter_mut().zip(&bj) {
                    *x -= &r * y;
                }
                let (m2, n2) = gram(basis);
                mu = m2;
                norms = n2;
            }
        }
        let lhs = norms[k].clone();
        let rhs = (&delta - &mu[k][k - 1] * &mu[k][k - 1]) * &norms[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            let (m2, n2) = gram(basis);
            mu = m2;
            norms = n2;
            k = k.max(2) - 1;
            if k == 0 {
                k = 1;
            }
        }
        let _ = dot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::nth_root_decimal;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn recognizes_one_half() {
        let c = recognize(&rational(1, 2), 20, 3, &BigInt::from(1000)).unwrap();
        assert_eq!(c.coefficients, vec![BigInt::from(-1), BigInt::from(2)]);
        assert_eq!(c.polynomial_string(), "2*x - 1");
    }

    #[test]
    fn recognizes_sqrt_two() {
        let sqrt2 = nth_root_decimal(&rational(2, 1), 2, 30);
        let c = recognize(&sqrt2, 30, 4, &BigInt::from(1000)).unwrap();
        assert_eq!(
            c.coefficients,
            vec![BigInt::from(-2), BigInt::from(0), BigInt::from(1)]
        );
        assert_eq!(c.polynomial_string(), "x^2 - 2");
    }

    #[test]
    fn recognizes_quadratic_surd() {
        // 6 (1 + sqrt 2), a root of x^2 - 12x - 36
        let sqrt2 = nth_root_decimal(&rational(2, 1), 2, 40);
        let x = BigRational::from(BigInt::from(6)) * (BigRational::one() + sqrt2);
        let c = recognize(&x, 40, 3, &BigInt::from(10_000)).unwrap();
        assert_eq!(
            c.coefficients,
            vec![BigInt::from(-36), BigInt::from(-12), BigInt::from(1)]
        );
    }

    #[test]
    fn planted_polynomial_recovered() {
        // root of x^3 - 3x - 1 in [1.8, 1.9], bisected independently
        let poly = |x: &BigRational| x * x * x - rational(3, 1) * x - BigRational::one();
        let mut lo = rational(18, 10);
        let mut hi = rational(19, 10);
        for _ in 0..120 {
            let mid = (&lo + &hi) / rational(2, 1);
            if poly(&mid).is_negative() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = recognize(&lo, 28, 4, &BigInt::from(100)).unwrap();
        let want: Vec<BigInt> = [-1i64, -3, 0, 1].iter().map(|&c| BigInt::from(c)).collect();
        assert_eq!(c.coefficients, want);

        let sqrt7 = nth_root_decimal(&rational(7, 1), 2, 35);
        let c = recognize(&sqrt7, 28, 4, &BigInt::from(100)).unwrap();
        let want: Vec<BigInt> = [-7i64, 0, 1].iter().map(|&c| BigInt::from(c)).collect();
        assert_eq!(c.coefficients, want);
    }

    #[test]
    fn garbage_input_yields_none() {
        // digits of a number with no small algebraic relation
        let x = rational(7238917466432101, 10_000_000_000_000_000);
        assert!(recognize(&x, 16, 3, &BigInt::from(50)).is_none());
    }

    #[test]
    fn root_is_refined_beyond_input() {
        let sqrt2 = nth_root_decimal(&rational(2, 1), 2, 30);
        let c = recognize(&sqrt2, 30, 2, &BigInt::from(10)).unwrap();
        let sq = &c.root * &c.root;
        let err = (sq - rational(2, 1)).abs();
        assert!(err < BigRational::new(BigInt::one(), BigInt::from(10u64).pow(25)));
    }
}
