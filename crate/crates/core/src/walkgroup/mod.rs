//! The group of the walk: the three birational involutions fixing the
//! characteristic polynomial, breadth-first closure of the group they
//! generate with probabilistic element identification, recognition of the
//! finite groups that occur, and the orbit-sum zero test.

mod refgroups;

pub use refgroups::{candidate_groups, GroupInvariants};

use crate::modarith::{invmod, mulmod, prev_prime, P61};
use crate::stepset::{Axis, StepSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("rational map undefined: axis {0:?} has an empty slice")]
    MapUndefined(Axis),
    #[error("degenerate evaluation points persisted after {0} retries")]
    DegeneratePoints(u32),
    #[error("odd-length relator found: group sign undefined")]
    SignUndefined,
    #[error("operation requires a finite group result")]
    NotFinite,
    #[error("exact orbit sum only supported for monomial maps")]
    NotMonomial,
}

/// Supports of the characteristic polynomial sliced by each axis exponent:
/// for axis a, the (b, c)-supports of the steps with a-component -1, 0, +1,
/// where (b, c) are the other two axes in coordinate order.
#[derive(Clone, Debug)]
pub struct CharPoly {
    pub model: StepSet,
    slices: [[Vec<(i8, i8)>; 3]; 3],
}

impl CharPoly {
    pub fn new(model: &StepSet) -> Self {
        let mut slices: [[Vec<(i8, i8)>; 3]; 3] = Default::default();
        for s in model.steps() {
            for (ai, axis) in Axis::ALL.into_iter().enumerate() {
                let (b, c) = axis.others();
                slices[ai][(s.coord(axis) + 1) as usize].push((s.coord(b), s.coord(c)));
            }
        }
        for a in &mut slices {
            for sl in a.iter_mut() {
                sl.sort_unstable();
            }
        }
        CharPoly {
            model: *model,
            slices,
        }
    }

    pub fn slice(&self, axis: Axis, exponent: i8) -> &[(i8, i8)] {
        let ai = Axis::ALL.iter().position(|a| *a == axis).unwrap();
        &self.slices[ai][(exponent + 1) as usize]
    }

    /// Evaluate the full Laurent polynomial at a point of the prime field.
    pub fn eval(&self, pt: [u64; 3], p: u64) -> Result<u64, GroupError> {
        let mut acc = 0u64;
        for s in self.model.steps() {
            let mut term = 1u64;
            for (c, e) in [s.x, s.y, s.z].into_iter().enumerate() {
                term = mulmod(term, power(pt[c], e, p)?, p);
            }
            acc = (acc + term) % p;
        }
        Ok(acc)
    }
}

fn power(v: u64, e: i8, p: u64) -> Result<u64, GroupError> {
    match e {
        0 => Ok(1),
        1 => Ok(v),
        _ => {
            if v == 0 {
                Err(GroupError::DegeneratePoints(0))
            } else {
                Ok(invmod(v, p))
            }
        }
    }
}

/// One of the generators: the involution acting on `axis`, replacing that
/// coordinate by axis^{-1} * N(b,c) / D(b,c) with N the slice at -1 and D
/// the slice at +1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMap {
    pub axis: Axis,
    pub numerator_support: Vec<(i8, i8)>,
    pub denominator_support: Vec<(i8, i8)>,
}

impl RationalMap {
    /// Apply to a point over F_p. Fails on zero denominators or coordinates.
    pub fn apply(&self, pt: [u64; 3], p: u64) -> Result<[u64; 3], GroupError> {
        let ai = Axis::ALL.iter().position(|a| *a == self.axis).unwrap();
        let (b, c) = self.axis.others();
        let bi = Axis::ALL.iter().position(|a| *a == b).unwrap();
        let ci = Axis::ALL.iter().position(|a| *a == c).unwrap();
        let eval_support = |sup: &[(i8, i8)]| -> Result<u64, GroupError> {
            let mut acc = 0u64;
            for &(ev, ew) in sup {
                let t = mulmod(power(pt[bi], ev, p)?, power(pt[ci], ew, p)?, p);
                acc = (acc + t) % p;
            }
            Ok(acc)
        };
        let num = eval_support(&self.numerator_support)?;
        let den = eval_support(&self.denominator_support)?;
        if den == 0 || pt[ai] == 0 {
            return Err(GroupError::DegeneratePoints(0));
        }
        let new = mulmod(mulmod(invmod(pt[ai], p), num, p), invmod(den, p), p);
        if new == 0 {
            return Err(GroupError::DegeneratePoints(0));
        }
        let mut out = pt;
        out[ai] = new;
        Ok(out)
    }

    /// True when both supports are single monomials; the map then sends
    /// every coordinate to a Laurent monomial.
    pub fn is_monomial(&self) -> bool {
        self.numerator_support.len() == 1 && self.denominator_support.len() == 1
    }
}

/// The three generator maps. Undefined when a slice is empty on some axis;
/// such models are lower-dimensional and are filtered out earlier.
pub fn generator_maps(model: &StepSet) -> Result<[RationalMap; 3], GroupError> {
    let cp = CharPoly::new(model);
    let mut out = Vec::with_capacity(3);
    for axis in Axis::ALL {
        let num = cp.slice(axis, -1).to_vec();
        let den = cp.slice(axis, 1).to_vec();
        if num.is_empty() || den.is_empty() {
            return Err(GroupError::MapUndefined(axis));
        }
        out.push(RationalMap {
            axis,
            numerator_support: num,
            denominator_support: den,
        });
    }
    Ok(out.try_into().unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupStatus {
    Finite,
    /// More distinct elements than the cap; the paper only ever claims
    /// "presumably infinite" for these.
    PresumedInfinite,
}

/// Result of the breadth-first group exploration. Elements are identified
/// by the images of k random points under the word (right-to-left
/// application); identity of fingerprints is re-verified on three extra
/// points before two words are declared equal.
#[derive(Clone, Debug)]
pub struct GroupResult {
    pub status: GroupStatus,
    pub order: Option<u32>,
    /// Shortest-word normal forms, breadth-first order; generators encoded
    /// 0 = phi_x, 1 = phi_y, 2 = phi_z.
    pub elements: Vec<Vec<u8>>,
    /// Words equal to the identity, as discovered; always of even length.
    pub relators: Vec<Vec<u8>>,
    /// Per-element images of the k primary evaluation points.
    pub fingerprints: Vec<Vec<[u64; 3]>>,
    pub seed: u64,
    pub prime: u64,
    points: Vec<[u64; 3]>,
}

const VERIFY_POINTS: usize = 3;
const MAX_POINT_RETRIES: u32 = 24;

/// Breadth-first closure of the group generated by the three maps, stopping
/// as Finite when a level adds no new element, or PresumedInfinite once
/// more than `cap` distinct elements are seen.
pub fn explore_group(
    model: &StepSet,
    cap: u32,
    k_points: usize,
    seed: u64,
) -> Result<GroupResult, GroupError> {
    assert!(cap >= 2 && k_points >= 3);
    let maps = generator_maps(model)?;
    let p = P61;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..MAX_POINT_RETRIES {
        let points: Vec<[u64; 3]> = (0..k_points + VERIFY_POINTS)
            .map(|_| std::array::from_fn(|_| rng.gen_range(2..p - 1)))
            .collect();
        match explore_once(model, &maps, cap, k_points, &points, p) {
            Ok(mut res) => {
                res.seed = seed;
                return Ok(res);
            }
            Err(GroupError::DegeneratePoints(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(GroupError::DegeneratePoints(MAX_POINT_RETRIES))
}

fn explore_once(
    model: &StepSet,
    maps: &[RationalMap; 3],
    cap: u32,
    k: usize,
    points: &[[u64; 3]],
    p: u64,
) -> Result<GroupResult, GroupError> {
    let cp = CharPoly::new(model);
    // the defining invariant must hold at the chosen points
    for g in maps {
        for &pt in points {
            let moved = g.apply(pt, p)?;
            if cp.eval(moved, p)? != cp.eval(pt, p)? {
                return Err(GroupError::DegeneratePoints(0));
            }
        }
    }

    let key_of = |fps: &[[u64; 3]]| -> Vec<u64> { fps[..k].iter().flatten().copied().collect() };

    let mut words: Vec<Vec<u8>> = vec![Vec::new()];
    let mut fps: Vec<Vec<[u64; 3]>> = vec![points.to_vec()];
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    index.insert(key_of(&fps[0]), 0);
    let mut relators: Vec<Vec<u8>> = Vec::new();
    let mut frontier: Vec<usize> = vec![0];

    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &ei in &frontier {
            for (gi, map) in maps.iter().enumerate() {
                if words[ei].first() == Some(&(gi as u8)) {
                    continue; // g . g . w = w
                }
                let mut imgs = Vec::with_capacity(fps[ei].len());
                for &pt in &fps[ei] {
                    imgs.push(map.apply(pt, p)?);
                }
                let mut word = Vec::with_capacity(words[ei].len() + 1);
                word.push(gi as u8);
                word.extend_from_slice(&words[ei]);
                let key = key_of(&imgs);
                match index.get(&key) {
                    None => {
                        if words.len() as u32 >= cap + 1 {
                            return Ok(GroupResult {
                                status: GroupStatus::PresumedInfinite,
                                order: None,
                                elements: words,
                                relators,
                                fingerprints: fps.into_iter().map(|f| f[..k].to_vec()).collect(),
                                seed: 0,
                                prime: p,
                                points: points.to_vec(),
                            });
                        }
                        index.insert(key, words.len());
                        next.push(words.len());
                        words.push(word);
                        fps.push(imgs);
                    }
                    Some(&other) => {
                        if fps[other] != imgs {
                            // primary fingerprints collided but the extra
                            // points disagree: bad luck with the points
                            return Err(GroupError::DegeneratePoints(0));
                        }
                        if let Some(rel) = relator_of(&words[other], &word) {
                            if !relators.contains(&rel) && relators.len() < 512 {
                                relators.push(rel);
                            }
                        }
                    }
                }
            }
        }
        frontier = next;
    }

    relators.sort_by_key(|r| (r.len(), r.clone()));
    Ok(GroupResult {
        status: GroupStatus::Finite,
        order: Some(words.len() as u32),
        elements: words,
        relators,
        fingerprints: fps.into_iter().map(|f| f[..k].to_vec()).collect(),
        seed: 0,
        prime: p,
        points: points.to_vec(),
    })
}

/// reverse(known) . candidate, freely reduced: a word equal to the identity.
fn relator_of(known: &[u8], candidate: &[u8]) -> Option<Vec<u8>> {
    let mut rel: Vec<u8> = known.iter().rev().copied().collect();
    for &g in candidate {
        if rel.last() == Some(&g) {
            rel.pop();
        } else {
            rel.push(g);
        }
    }
    (!rel.is_empty()).then_some(rel)
}

impl GroupResult {
    /// Apply a word (right-to-left) to a point.
    fn apply_word(
        &self,
        maps: &[RationalMap; 3],
        word: &[u8],
        pt: [u64; 3],
        p: u64,
    ) -> Result<[u64; 3], GroupError> {
        let mut v = pt;
        for &g in word.iter().rev() {
            v = maps[g as usize].apply(v, p)?;
        }
        Ok(v)
    }

    /// Multiplicative order of an element, via its action on the points.
    fn element_order(
        &self,
        maps: &[RationalMap; 3],
        word: &[u8],
        cap: u32,
    ) -> Result<u32, GroupError> {
        if word.is_empty() {
            return Ok(1);
        }
        let mut cur: Vec<[u64; 3]> = self.points.clone();
        for t in 1..=cap {
            for v in cur.iter_mut() {
                *v = self.apply_word(maps, word, *v, self.prime)?;
            }
            if cur == self.points {
                return Ok(t);
            }
        }
        Err(GroupError::NotFinite)
    }

    /// All relators have even length; required for the orbit-sum sign.
    pub fn relators_all_even(&self) -> bool {
        self.relators.iter().all(|r| r.len() % 2 == 0)
    }
}

/// The groups the classification distinguishes by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GroupName {
    #[serde(rename = "Z2xZ2xZ2")]
    Z2Cubed,
    #[serde(rename = "D12")]
    D12,
    #[serde(rename = "Z2xD8")]
    Z2D8,
    #[serde(rename = "S4")]
    S4,
    #[serde(rename = "Z2xS4")]
    Z2S4,
    #[serde(rename = "other")]
    Other(u32),
}

impl std::fmt::Display for GroupName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupName::Z2Cubed => write!(f, "Z2xZ2xZ2"),
            GroupName::D12 => write!(f, "D12"),
            GroupName::Z2D8 => write!(f, "Z2xD8"),
            GroupName::S4 => write!(f, "S4"),
            GroupName::Z2S4 => write!(f, "Z2xS4"),
            GroupName::Other(n) => write!(f, "order-{n}"),
        }
    }
}

/// Match a finite group against the candidate invariant tables by order,
/// abelianness and element-order multiset.
pub fn identify_group(model: &StepSet, group: &GroupResult) -> Result<GroupName, GroupError> {
    let order = group.order.ok_or(GroupError::NotFinite)?;
    assert!(order <= 400, "identification is specified for order <= 400");
    let maps = generator_maps(model)?;
    let candidates = candidate_groups();
    if !candidates.iter().any(|(_, inv)| inv.order == order) {
        return Ok(GroupName::Other(order));
    }
    let mut orders: Vec<u32> = Vec::with_capacity(group.elements.len());
    for w in &group.elements {
        orders.push(group.element_order(&maps, w, order)?);
    }
    orders.sort_unstable();
    let mut multiset: Vec<(u32, u32)> = Vec::new();
    for o in orders {
        match multiset.last_mut() {
            Some((v, c)) if *v == o => *c += 1,
            _ => multiset.push((o, 1)),
        }
    }
    let abelian = {
        let mut ok = true;
        'outer: for i in 0..3u8 {
            for j in (i + 1)..3 {
                for &pt in &group.points {
                    let ij = group.apply_word(&maps, &[i, j], pt, group.prime)?;
                    let ji = group.apply_word(&maps, &[j, i], pt, group.prime)?;
                    if ij != ji {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        ok
    };
    for (name, inv) in &candidates {
        if inv.order == order && inv.abelian == abelian && inv.element_orders == multiset {
            return Ok(match *name {
                "Z2xZ2xZ2" => GroupName::Z2Cubed,
                "D12" => GroupName::D12,
                "Z2xD8" => GroupName::Z2D8,
                "S4" => GroupName::S4,
                "Z2xS4" => GroupName::Z2S4,
                _ => unreachable!(),
            });
        }
    }
    Ok(GroupName::Other(order))
}

/// Verdict of the orbit-sum zero test with the evaluations that support it.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitSumVerdict {
    pub is_zero: bool,
    /// (prime, point, value) triples; empty when the exact expansion was
    /// used instead of evaluation.
    pub evaluation_evidence: Vec<(u64, [u64; 3], u64)>,
    pub exact: bool,
}

/// Evaluate sum over g of (-1)^len(g) * g(x)g(y)g(z) at k fresh points over
/// two distinct large primes; zero verdict iff every evaluation vanishes.
pub fn orbit_sum_zero(
    model: &StepSet,
    group: &GroupResult,
    seed: u64,
) -> Result<OrbitSumVerdict, GroupError> {
    if group.status != GroupStatus::Finite {
        return Err(GroupError::NotFinite);
    }
    if !group.relators_all_even() {
        return Err(GroupError::SignUndefined);
    }
    let maps = generator_maps(model)?;
    let primes = [P61, prev_prime(P61)];
    let k = group.fingerprints[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f72_6269);
    let mut evidence = Vec::new();
    for &p in &primes {
        let mut done = 0usize;
        let mut retries = 0u32;
        while done < k {
            let pt: [u64; 3] = std::array::from_fn(|_| rng.gen_range(2..p - 1));
            match orbit_sum_at(&maps, group, pt, p) {
                Ok(v) => {
                    evidence.push((p, pt, v));
                    done += 1;
                }
                Err(GroupError::DegeneratePoints(_)) => {
                    retries += 1;
                    if retries > MAX_POINT_RETRIES {
                        return Err(GroupError::DegeneratePoints(retries));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(OrbitSumVerdict {
        is_zero: evidence.iter().all(|&(_, _, v)| v == 0),
        evaluation_evidence: evidence,
        exact: false,
    })
}

fn orbit_sum_at(
    maps: &[RationalMap; 3],
    group: &GroupResult,
    pt: [u64; 3],
    p: u64,
) -> Result<u64, GroupError> {
    let mut acc = 0u64;
    for w in &group.elements {
        let img = group.apply_word(maps, w, pt, p)?;
        let prod = mulmod(mulmod(img[0], img[1], p), img[2], p);
        acc = if w.len() % 2 == 0 {
            (acc + prod) % p
        } else {
            (acc + p - prod) % p
        };
    }
    Ok(acc)
}

/// Deterministic orbit-sum test for groups whose generators are monomial
/// maps: each element then sends xyz to a signed Laurent monomial and the
/// sum is expanded exactly.
pub fn orbit_sum_zero_exact(
    model: &StepSet,
    group: &GroupResult,
) -> Result<OrbitSumVerdict, GroupError> {
    if group.status != GroupStatus::Finite {
        return Err(GroupError::NotFinite);
    }
    if !group.relators_all_even() {
        return Err(GroupError::SignUndefined);
    }
    let maps = generator_maps(model)?;
    if !maps.iter().all(|m| m.is_monomial()) {
        return Err(GroupError::NotMonomial);
    }
    // exponent matrix per generator: row a of the acting axis becomes
    // -e_a + exponents of num/den in the other two variables
    let mat_of = |m: &RationalMap| -> [[i64; 3]; 3] {
        let mut mat = [[0i64; 3], [0, 0, 0], [0, 0, 0]];
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = 1;
        }
        let ai = Axis::ALL.iter().position(|a| *a == m.axis).unwrap();
        let (b, c) = m.axis.others();
        let bi = Axis::ALL.iter().position(|a| *a == b).unwrap();
        let ci = Axis::ALL.iter().position(|a| *a == c).unwrap();
        let (nb, nc) = (m.numerator_support[0].0, m.numerator_support[0].1);
        let (db, dc) = (m.denominator_support[0].0, m.denominator_support[0].1);
        let mut row = [0i64; 3];
        row[ai] = -1;
        row[bi] = (nb - db) as i64;
        row[ci] = (nc - dc) as i64;
        mat[ai] = row;
        mat
    };
    let gen_mats: Vec<[[i64; 3]; 3]> = maps.iter().map(mat_of).collect();
    let mat_mul = |a: &[[i64; 3]; 3], b: &[[i64; 3]; 3]| -> [[i64; 3]; 3] {
        let mut out = [[0i64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    };
    let mut acc: std::collections::BTreeMap<[i64; 3], i64> = Default::default();
    for w in &group.elements {
        let mut mat = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        for &g in w {
            mat = mat_mul(&gen_mats[g as usize], &mat);
        }
        // exponents of g(xyz) = g(x) g(y) g(z): column sums
        let expo: [i64; 3] = std::array::from_fn(|j| (0..3).map(|i| mat[i][j]).sum());
        let sign = if w.len() % 2 == 0 { 1 } else { -1 };
        let e = acc.entry(expo).or_insert(0);
        *e += sign;
        if *e == 0 {
            acc.remove(&expo);
        }
    }
    Ok(OrbitSumVerdict {
        is_zero: acc.is_empty(),
        evaluation_evidence: Vec::new(),
        exact: true,
    })
}
