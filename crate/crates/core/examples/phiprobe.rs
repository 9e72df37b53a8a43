// Probe: growth-constant estimates for the 15-step benchmark model from
// exact terms to N=300 under several Richardson variants.
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use octawalk_core::countkernel::{count_layers, Target};
use octawalk_core::exactify::{crt_reconstruct, select_primes, ExactSeries};
use octawalk_core::stepset::StepSet;
use std::io::BufReader;

fn binom(n: u64, k: u64) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

// nodes n, n-d, ..., n-jd
fn richardson(u: &dyn Fn(usize) -> BigRational, n: usize, j: u64, d: usize) -> BigRational {
    let mut acc = BigRational::zero();
    for k in 0..=j {
        let c = binom(j, k) * BigInt::from((n - k as usize * d) as u64).pow(j as u32);
        let signed = if k % 2 == 0 { c } else { -c };
        acc += BigRational::from(signed) * u(n - k as usize * d);
    }
    let mut fact = BigInt::one();
    for i in 1..=j {
        fact *= BigInt::from(i);
    }
    acc / BigRational::from(fact * BigInt::from(d as u64).pow(j as u32))
}

fn decimal(x: &BigRational, digits: u32) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let v = (x * BigRational::from(scale.clone())).round().to_integer();
    let neg = v.is_negative();
    let s = v.abs().to_string();
    let s = format!("{:0>width$}", s, width = digits as usize + 1);
    let (int, frac) = s.split_at(s.len() - digits as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, int, frac)
}

fn isqrt(x: &BigRational, digits: u32) -> BigRational {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = x * BigRational::from(scale.clone() * scale.clone());
    let r = scaled.to_integer().to_biguint().unwrap().sqrt();
    BigRational::new(BigInt::from(r), scale)
}

fn main() {
    let path = "/tmp/mdagger_300.txt";
    let exact = if let Ok(f) = std::fs::File::open(path) {
        ExactSeries::read_from(&mut BufReader::new(f)).unwrap()
    } else {
        let model = StepSet::from_diagram("110111000 11100110 000110111").unwrap();
        let n_max = 300u32;
        let plan = select_primes(model.len(), n_max).unwrap();
        eprintln!("{} primes", plan.primes.len());
        let images: Vec<_> = plan
            .primes
            .iter()
            .map(|&p| count_layers(&model, n_max, p, Target::AllEndpoints, 1).unwrap())
            .collect();
        let exact =
            crt_reconstruct(&images, Some(&num_bigint::BigUint::from(15u32).pow(n_max))).unwrap();
        let mut f = std::fs::File::create(path).unwrap();
        exact.write_to(&mut f, &plan.primes).unwrap();
        exact
    };
    let terms: Vec<BigInt> = exact.terms.iter().map(|t| BigInt::from(t.clone())).collect();

    for m in [1usize, 2, 3] {
        let t = &terms;
        let u = move |n: usize| BigRational::new(t[n].clone(), t[n - m].clone());
        for d in [1usize, 2, 5, 10] {
            if 300 - 6 * d < m {
                continue;
            }
            let r300 = richardson(&u, 300, 6, d);
            let r290 = richardson(&u, 290, 6, d);
            let (phi300, phi290) = if m == 1 {
                (r300.clone(), r290.clone())
            } else if m == 2 {
                (isqrt(&r300, 25), isqrt(&r290, 25))
            } else {
                continue;
            };
            let diff = (&phi300 - &phi290).abs();
            println!(
                "m={m} d={d:2}  phi(300) = {}  |diff| = {}",
                decimal(&phi300, 16),
                decimal(&diff, 12)
            );
        }
    }
}
