//! Guessing of P-recurrences and linear differential equations satisfied by
//! a counting sequence modulo a prime: dense nullspace computation over F_p
//! on a fitting window, with every candidate re-verified on a held-out
//! fraction of the series before being reported. A clean "nothing found
//! within budget" is a first-class result.

use crate::countkernel::ModSeries;
use crate::modarith::{invmod, mulmod};
use crate::stepset::StepSet;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuessError {
    #[error("series of length {have} too short for budget: need {needed}")]
    TooShort { have: usize, needed: usize },
}

/// A recurrence sum_{i<=r} (sum_{j<=d} c[i][j] n^j) a_{n+i} = 0 mod p that
/// annihilates every available term beyond the fitting window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecurrenceCandidate {
    pub order: usize,
    pub degree: usize,
    /// c[i][j]: coefficient of n^j attached to a_{n+i}.
    pub coefficients: Vec<Vec<u64>>,
    pub prime: u64,
    /// Number of trailing terms excluded from the fit and used only for
    /// verification.
    pub holdout: usize,
}

/// A differential equation sum_{i<=r} p_i(t) F^(i)(t) = 0 mod (p, t^N),
/// with p_i of degree <= d.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OdeCandidate {
    pub order: usize,
    pub degree: usize,
    /// p[i][j]: coefficient of t^j in p_i(t).
    pub coefficients: Vec<Vec<u64>>,
    pub prime: u64,
    pub truncation: usize,
    pub holdout: usize,
}

/// Search report with the exact budget; `found` stays None for a genuine
/// negative result.
#[derive(Clone, Debug, Serialize)]
pub struct GuessReport<C> {
    pub model: StepSet,
    pub budget: Budget,
    pub found: Option<C>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Budget {
    pub r: usize,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Candidates found modulo two different primes strengthen each other when
/// order, degree and the support pattern of nonzero coefficients agree.
pub fn double_prime_consistent(a: &RecurrenceCandidate, b: &RecurrenceCandidate) -> bool {
    a.prime != b.prime
        && a.order == b.order
        && a.degree == b.degree
        && a.coefficients.len() == b.coefficients.len()
        && a.coefficients
            .iter()
            .zip(&b.coefficients)
            .all(|(x, y)| x.iter().zip(y).all(|(u, v)| (*u == 0) == (*v == 0)))
}

fn holdout_size(len: usize) -> usize {
    len.div_ceil(5)
}

/// Scan (order, degree) pairs by increasing unknown count; for each, solve
/// the homogeneous fit system over F_p and accept the first nullspace
/// vector that annihilates every term of the series, holdout included.
pub fn guess_recurrence(
    series: &ModSeries,
    r_max: usize,
    d_max: usize,
) -> Result<GuessReport<RecurrenceCandidate>, GuessError> {
    let len = series.terms.len();
    let holdout = holdout_size(len);
    let needed = (r_max + 1) * (d_max + 1) + holdout + r_max;
    if len < needed {
        return Err(GuessError::TooShort { have: len, needed });
    }
    let p = series.prime as u64;
    let a: Vec<u64> = series.terms.iter().map(|&t| t as u64).collect();

    let mut pairs: Vec<(usize, usize)> = (1..=r_max)
        .flat_map(|r| (0..=d_max).map(move |d| (r, d)))
        .collect();
    pairs.sort_by_key(|&(r, d)| ((r + 1) * (d + 1), r, d));

    for (r, d) in pairs {
        let unknowns = (r + 1) * (d + 1);
        let fit_rows = len - holdout - r;
        if fit_rows < unknowns {
            continue;
        }
        let row_of = |n: usize| -> Vec<u64> {
            let mut row = Vec::with_capacity(unknowns);
            for i in 0..=r {
                let mut npow = 1u64;
                for _ in 0..=d {
                    row.push(mulmod(npow, a[n + i], p));
                    npow = mulmod(npow, n as u64 % p, p);
                }
            }
            row
        };
        let matrix: Vec<Vec<u64>> = (0..fit_rows).map(row_of).collect();
        for vec in nullspace(matrix, unknowns, p) {
            let cand = RecurrenceCandidate {
                order: r,
                degree: d,
                coefficients: (0..=r).map(|i| vec[i * (d + 1)..(i + 1) * (d + 1)].to_vec()).collect(),
                prime: p,
                holdout,
            };
            if recurrence_annihilates(&cand, &a, p) {
                return Ok(GuessReport {
                    model: series.model,
                    budget: Budget { r: r_max, d: d_max, n: len },
                    found: Some(cand),
                });
            }
        }
    }
    Ok(GuessReport {
        model: series.model,
        budget: Budget { r: r_max, d: d_max, n: len },
        found: None,
    })
}

fn recurrence_annihilates(c: &RecurrenceCandidate, a: &[u64], p: u64) -> bool {
    let r = c.order;
    for n in 0..a.len() - r {
        let mut acc = 0u64;
        for i in 0..=r {
            let mut poly = 0u64;
            let mut npow = 1u64;
            for j in 0..=c.degree {
                poly = (poly + mulmod(c.coefficients[i][j], npow, p)) % p;
                npow = mulmod(npow, n as u64 % p, p);
            }
            acc = (acc + mulmod(poly, a[n + i], p)) % p;
        }
        if acc != 0 {
            return false;
        }
    }
    true
}

/// Same protocol for a differential equation on F(t) = sum a_n t^n: the
/// coefficient of t^m in t^j F^(i) is a_{m-j+i} * (m-j+i)...(m-j+1).
pub fn guess_ode(
    series: &ModSeries,
    r_max: usize,
    d_max: usize,
) -> Result<GuessReport<OdeCandidate>, GuessError> {
    let len = series.terms.len();
    let holdout = holdout_size(len);
    let needed = (r_max + 1) * (d_max + 1) + holdout + r_max;
    if len < needed {
        return Err(GuessError::TooShort { have: len, needed });
    }
    let p = series.prime as u64;
    let a: Vec<u64> = series.terms.iter().map(|&t| t as u64).collect();
    let falling = |q: usize, i: usize| -> u64 {
        let mut acc = 1u64;
        for t in 0..i {
            acc = mulmod(acc, (q - t) as u64 % p, p);
        }
        acc
    };
    // coefficient entry for t^j p F^{(i)} at t^m
    let entry = |m: usize, i: usize, j: usize| -> u64 {
        if m + i < j || m + i - j >= a.len() || m + i - j < i {
            return 0;
        }
        let q = m + i - j;
        mulmod(a[q], falling(q, i), p)
    };

    let mut pairs: Vec<(usize, usize)> = (1..=r_max)
        .flat_map(|r| (0..=d_max).map(move |d| (r, d)))
        .collect();
    pairs.sort_by_key(|&(r, d)| ((r + 1) * (d + 1), r, d));

    for (r, d) in pairs {
        let unknowns = (r + 1) * (d + 1);
        let check_rows = len - r; // coefficients of t^m valid up to here
        let fit_rows = check_rows - holdout;
        if fit_rows < unknowns {
            continue;
        }
        let row_of = |m: usize| -> Vec<u64> {
            let mut row = Vec::with_capacity(unknowns);
            for i in 0..=r {
                for j in 0..=d {
                    row.push(entry(m, i, j));
                }
            }
            row
        };
        let matrix: Vec<Vec<u64>> = (0..fit_rows).map(row_of).collect();
        'cand: for vec in nullspace(matrix, unknowns, p) {
            for m in 0..check_rows {
                let mut acc = 0u64;
                for i in 0..=r {
                    for j in 0..=d {
                        acc = (acc + mulmod(vec[i * (d + 1) + j], entry(m, i, j), p)) % p;
                    }
                }
                if acc != 0 {
                    continue 'cand;
                }
            }
            return Ok(GuessReport {
                model: series.model,
                budget: Budget { r: r_max, d: d_max, n: len },
                found: Some(OdeCandidate {
                    order: r,
                    degree: d,
                    coefficients: (0..=r)
                        .map(|i| vec[i * (d + 1)..(i + 1) * (d + 1)].to_vec())
                        .collect(),
                    prime: p,
                    truncation: len,
                    holdout,
                }),
            });
        }
    }
    Ok(GuessReport {
        model: series.model,
        budget: Budget { r: r_max, d: d_max, n: len },
        found: None,
    })
}

/// Basis of the nullspace of a dense matrix over F_p, via reduced row
/// echelon form. Solutions are normalized with a unit pivot-free entry.
fn nullspace(mut rows: Vec<Vec<u64>>, cols: usize, p: u64) -> Vec<Vec<u64>> {
    let mut pivot_col_of_row: Vec<usize> = Vec::new();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..cols {
        let Some(pr) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pr);
        let inv = invmod(rows[rank][col], p);
        for c in col..cols {
            rows[rank][c] = mulmod(rows[rank][c], inv, p);
        }
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != 0 {
                let f = rows[r][col];
                for c in col..cols {
                    let sub = mulmod(f, rows[rank][c], p);
                    rows[r][c] = (rows[r][c] + p - sub) % p;
                }
            }
        }
        pivot_col_of_row.push(col);
        pivot_cols.push(col);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![0u64; cols];
        v[free] = 1;
        for (row, &pc) in pivot_col_of_row.iter().enumerate() {
            let coeff = rows[row][free];
            if coeff != 0 {
                v[pc] = p - coeff;
            }
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countkernel::Target;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const P: u16 = 16381;

    fn series_of(terms: Vec<u16>) -> ModSeries {
        ModSeries {
            model: StepSet::from_mask(1).unwrap(),
            target: Target::AllEndpoints,
            prime: P,
            terms,
        }
    }

    fn catalan_mod(n: usize, p: u64) -> Vec<u16> {
        // C_0 = 1, C_{k+1} = C_k * 2(2k+1)/(k+2)
        let mut out = vec![1u16];
        let mut c = 1u64;
        for k in 0..n - 1 {
            c = mulmod(c, 2 * (2 * k as u64 + 1) % p, p);
            c = mulmod(c, invmod((k as u64 + 2) % p, p), p);
            out.push(c as u16);
        }
        out
    }

    #[test]
    fn powers_of_two_give_order_one() {
        let mut terms = vec![1u16];
        for _ in 0..99 {
            terms.push(((*terms.last().unwrap() as u32 * 2) % P as u32) as u16);
        }
        let rep = guess_recurrence(&series_of(terms), 2, 2).unwrap();
        let c = rep.found.unwrap();
        assert_eq!((c.order, c.degree), (1, 0));
        // a_{n+1} - 2 a_n = 0 up to scale
        let scale = c.coefficients[1][0];
        assert_eq!(c.coefficients[0][0], (P as u64 - mulmod(2, scale, P as u64)) % P as u64);
    }

    #[test]
    fn catalan_recurrence_recovered() {
        let series = series_of(catalan_mod(200, P as u64));
        let rep = guess_recurrence(&series, 4, 4).unwrap();
        let c = rep.found.unwrap();
        assert_eq!((c.order, c.degree), (1, 1));
        // proportional to (n+2) a_{n+1} - (4n+2) a_n
        let want = [[2u64, 4], [2, 1]]; // c[0] = -(4n+2) -> sign-flipped below
        let p = P as u64;
        // normalize both to c[1][1] = 1
        let s = invmod(c.coefficients[1][1], p);
        let got: Vec<Vec<u64>> = c
            .coefficients
            .iter()
            .map(|row| row.iter().map(|&v| mulmod(v, s, p)).collect())
            .collect();
        assert_eq!(got[1], vec![2, 1]); // n + 2
        assert_eq!(got[0], vec![p - want[0][0], p - want[0][1]]); // -(4n + 2)
    }

    #[test]
    fn random_sequences_give_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let terms: Vec<u16> = (0..120).map(|_| rng.gen_range(0..P)).collect();
            let rep = guess_recurrence(&series_of(terms), 3, 3).unwrap();
            assert!(rep.found.is_none());
        }
    }

    #[test]
    fn too_short_is_refused() {
        let terms = vec![1u16; 30];
        match guess_recurrence(&series_of(terms), 5, 5) {
            Err(GuessError::TooShort { needed, .. }) => assert!(needed > 30),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn geometric_ode_recovered() {
        // F = 1/(1-2t): (1-2t) F' - 2 F = 0
        let mut terms = vec![1u16];
        for _ in 0..79 {
            terms.push(((*terms.last().unwrap() as u32 * 2) % P as u32) as u16);
        }
        let rep = guess_ode(&series_of(terms), 2, 2).unwrap();
        let c = rep.found.unwrap();
        assert_eq!(c.order, 1);
        assert!(c.degree <= 1);
        let p = P as u64;
        // normalize to p_1(t) = 1 - 2t
        let s = invmod(c.coefficients[1][0], p);
        let norm: Vec<Vec<u64>> = c
            .coefficients
            .iter()
            .map(|row| row.iter().map(|&v| mulmod(v, s, p)).collect())
            .collect();
        assert_eq!(norm[1], vec![1, p - 2]);
        assert_eq!(norm[0], vec![p - 2, 0]);
    }

    #[test]
    fn catalan_ode_recovered() {
        let series = series_of(catalan_mod(200, P as u64));
        let rep = guess_ode(&series, 2, 3).unwrap();
        let c = rep.found.unwrap();
        assert!(c.order <= 2);
    }

    #[test]
    fn double_prime_flagging() {
        let a = RecurrenceCandidate {
            order: 1,
            degree: 1,
            coefficients: vec![vec![5, 3], vec![2, 1]],
            prime: 16381,
            holdout: 40,
        };
        let mut b = a.clone();
        b.prime = 32749;
        b.coefficients = vec![vec![9, 1], vec![4, 7]];
        assert!(double_prime_consistent(&a, &b));
        b.coefficients[0][1] = 0;
        assert!(!double_prime_consistent(&a, &b));
    }

    #[test]
    fn negative_report_serializes_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let terms: Vec<u16> = (0..100).map(|_| rng.gen_range(0..P)).collect();
        let rep = guess_recurrence(&series_of(terms), 2, 2).unwrap();
        let js = serde_json::to_string(&rep).unwrap();
        assert!(js.contains("\"found\":null"));
        assert!(js.contains("\"N\":100"));
    }
}
