//! Modular counting kernel: the number q_{i,j,k,n} of octant walks is
//! computed layer by layer modulo a 15-bit prime, over a pruned index box,
//! with a branch-free 16-bit modular addition in the innermost loop. Also
//! houses the support lattice of (i,j,k,n) tuples and the brute-force
//! enumeration oracle used for testing.

use crate::exactify::ExactSeries;
use crate::modarith::is_prime_u64;
use crate::stepset::StepSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

/// Which coefficient sum a series tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Walks returning to the origin.
    Excursions,
    /// Walks with arbitrary endpoint.
    AllEndpoints,
}

impl Target {
    pub fn token(self) -> &'static str {
        match self {
            Target::Excursions => "excursions",
            Target::AllEndpoints => "all",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "excursions" => Some(Target::Excursions),
            "all" | "all_endpoints" => Some(Target::AllEndpoints),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("modulus {0} is not a prime below 2^15")]
    BadPrime(u32),
    #[error("layer storage would need {needed} bytes, limit is {limit}")]
    MemoryBudget { needed: u64, limit: u64 },
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed series file: {0}")]
    BadFile(String),
}

/// Sublattice of Z^4 generated by the vectors (s, 1) for s in S, kept in
/// row Hermite normal form. Every (i,j,k,n) with a nonzero walk count lies
/// in this lattice, so tuples outside it can be skipped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportLattice {
    /// Echelon basis rows with positive pivots, pivot columns increasing.
    basis: Vec<[i64; 4]>,
}

impl SupportLattice {
    pub fn for_model(model: &StepSet) -> Self {
        let rows: Vec<[i64; 4]> = model
            .steps()
            .iter()
            .map(|s| [s.x as i64, s.y as i64, s.z as i64, 1])
            .collect();
        SupportLattice {
            basis: hermite_normal_form(rows),
        }
    }

    pub fn basis(&self) -> &[[i64; 4]] {
        &self.basis
    }

    /// Membership test for a tuple (i, j, k, n).
    pub fn contains(&self, mut v: [i64; 4]) -> bool {
        for row in &self.basis {
            let piv = row.iter().position(|&x| x != 0).unwrap();
            if v[piv] != 0 {
                if v[piv] % row[piv] != 0 {
                    return false;
                }
                let q = v[piv] / row[piv];
                for c in 0..4 {
                    v[c] -= q * row[c];
                }
            }
        }
        v == [0; 4]
    }

    /// Smallest d > 0 with (0,0,0,d) in the lattice: excursion lengths are
    /// multiples of this. None when only the empty excursion can exist.
    pub fn excursion_period(&self) -> Option<u64> {
        self.basis
            .iter()
            .find(|row| row[0] == 0 && row[1] == 0 && row[2] == 0 && row[3] != 0)
            .map(|row| row[3].unsigned_abs())
    }
}

/// Row Hermite normal form (echelon, positive pivots, entries above a pivot
/// reduced) of an integer matrix given as rows.
fn hermite_normal_form(mut rows: Vec<[i64; 4]>) -> Vec<[i64; 4]> {
    let mut out: Vec<[i64; 4]> = Vec::new();
    for col in 0..4 {
        loop {
            let mut nz: Vec<usize> = (0..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nz.is_empty() {
                break;
            }
            nz.sort_by_key(|&r| rows[r][col].unsigned_abs());
            let pivot_row = nz[0];
            if nz.len() == 1 {
                let mut piv = rows.swap_remove(pivot_row);
                if piv[col] < 0 {
                    piv.iter_mut().for_each(|x| *x = -*x);
                }
                out.push(piv);
                break;
            }
            for &r in &nz[1..] {
                let q = rows[r][col] / rows[pivot_row][col];
                for c in 0..4 {
                    rows[r][c] -= q * rows[pivot_row][c];
                }
            }
        }
        rows.retain(|r| r.iter().any(|&x| x != 0));
    }
    // reduce entries above each pivot
    for i in (0..out.len()).rev() {
        let piv_col = out[i].iter().position(|&x| x != 0).unwrap();
        for j in 0..i {
            let v = out[j][piv_col];
            let q = v.div_euclid(out[i][piv_col]);
            if q != 0 {
                for c in 0..4 {
                    out[j][c] -= q * out[i][c];
                }
            }
        }
    }
    out
}

/// Conservative per-coordinate bounds on the support of q_{i,j,k,n}: a
/// coordinate can reach at most n (and 0 when no step raises it), and for
/// excursions it must still be able to return within the remaining steps.
#[derive(Clone, Copy, Debug)]
pub struct ReachBounds {
    up: [bool; 3],
    down: [bool; 3],
    horizon: u32,
    target: Target,
}

impl ReachBounds {
    pub fn new(model: &StepSet, horizon: u32, target: Target) -> Self {
        let steps = model.steps();
        let mut up = [false; 3];
        let mut down = [false; 3];
        for s in &steps {
            for (c, v) in [s.x, s.y, s.z].into_iter().enumerate() {
                up[c] |= v > 0;
                down[c] |= v < 0;
            }
        }
        ReachBounds {
            up,
            down,
            horizon,
            target,
        }
    }

    /// Largest value coordinate c can take at time n.
    pub fn hi(&self, c: usize, n: u32) -> u32 {
        let fwd = if self.up[c] { n } else { 0 };
        match self.target {
            Target::AllEndpoints => fwd,
            Target::Excursions => {
                let back = if self.down[c] { self.horizon - n } else { 0 };
                fwd.min(back)
            }
        }
    }

    /// True for every (i,j,k,n) that can hold a nonzero count (and, for
    /// excursions, lie on an excursion of length <= horizon).
    pub fn contains(&self, i: u32, j: u32, k: u32, n: u32) -> bool {
        n <= self.horizon && i <= self.hi(0, n) && j <= self.hi(1, n) && k <= self.hi(2, n)
    }
}

/// A counting sequence reduced modulo one prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModSeries {
    pub model: StepSet,
    pub target: Target,
    pub prime: u16,
    pub terms: Vec<u16>,
}

const MAGIC: &[u8; 4] = b"OW3S";
const FORMAT_VERSION: u16 = 1;

impl ModSeries {
    /// Series file: magic "OW3S", version u16, mask u32, target u8,
    /// prime u16, N u32, then N+1 u16 residues; all little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), KernelError> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.model.mask().to_le_bytes())?;
        w.write_all(&[match self.target {
            Target::Excursions => 0u8,
            Target::AllEndpoints => 1,
        }])?;
        w.write_all(&self.prime.to_le_bytes())?;
        let n = (self.terms.len() - 1) as u32;
        w.write_all(&n.to_le_bytes())?;
        for t in &self.terms {
            w.write_all(&t.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, KernelError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(KernelError::BadFile("bad magic".into()));
        }
        let mut b2 = [0u8; 2];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != FORMAT_VERSION {
            return Err(KernelError::BadFile("unsupported version".into()));
        }
        r.read_exact(&mut b4)?;
        let model = StepSet::from_mask(u32::from_le_bytes(b4))
            .map_err(|e| KernelError::BadFile(e.to_string()))?;
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let target = match b1[0] {
            0 => Target::Excursions,
            1 => Target::AllEndpoints,
            t => return Err(KernelError::BadFile(format!("bad target byte {t}"))),
        };
        r.read_exact(&mut b2)?;
        let prime = u16::from_le_bytes(b2);
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut terms = vec![0u16; n + 1];
        let mut buf = [0u8; 2];
        for t in terms.iter_mut() {
            r.read_exact(&mut buf)?;
            *t = u16::from_le_bytes(buf);
        }
        Ok(ModSeries {
            model,
            target,
            prime,
            terms,
        })
    }
}

/// rem(a+b, p) = min(a+b, rem(a+b-p, 2^16)) for residues a, b < p <= 2^15.
/// Branch-free, and the compiler turns the loop into packed 16-bit adds and
/// mins.
#[inline]
fn mod_add_rows(dst: &mut [u16], src: &[u16], p: u16) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        let t = d.wrapping_add(*s);
        *d = t.min(t.wrapping_sub(p));
    }
}

pub const DEFAULT_MEMORY_LIMIT: u64 = 6 << 30;

/// Compute the counting sequence of `model` modulo `prime` up to length
/// `n_max` by layered dynamic programming.
///
/// The output is independent of `partitions` (the output cells of each
/// layer are split into that many disjoint slabs, each computed from the
/// read-only previous layer), bit for bit.
pub fn count_layers(
    model: &StepSet,
    n_max: u32,
    prime: u16,
    target: Target,
    partitions: usize,
) -> Result<ModSeries, KernelError> {
    count_layers_with_limit(model, n_max, prime, target, partitions, DEFAULT_MEMORY_LIMIT)
}

pub fn count_layers_with_limit(
    model: &StepSet,
    n_max: u32,
    prime: u16,
    target: Target,
    partitions: usize,
    memory_limit: u64,
) -> Result<ModSeries, KernelError> {
    if prime > (1 << 15) || !is_prime_u64(prime as u64) {
        return Err(KernelError::BadPrime(prime as u32));
    }
    let bounds = ReachBounds::new(model, n_max, target);
    // fixed strides sized for the largest layer
    let dims: [usize; 3] = std::array::from_fn(|c| {
        (0..=n_max).map(|n| bounds.hi(c, n)).max().unwrap_or(0) as usize + 1
    });
    let cells = dims[0] * dims[1] * dims[2];
    let needed = 2 * 2 * cells as u64;
    if needed > memory_limit {
        return Err(KernelError::MemoryBudget {
            needed,
            limit: memory_limit,
        });
    }
    let stride_j = dims[2];
    let stride_i = dims[1] * dims[2];

    let steps = model.steps();
    let mut cur = vec![0u16; cells];
    let mut next = vec![0u16; cells];
    cur[0] = 1 % prime;
    let mut terms = Vec::with_capacity(n_max as usize + 1);
    let mut hi_prev = [0u32; 3];

    let extract = |layer: &[u16], hi: &[u32; 3]| -> u16 {
        match target {
            Target::Excursions => layer[0],
            Target::AllEndpoints => {
                let mut acc = 0u64;
                for i in 0..=hi[0] as usize {
                    for j in 0..=hi[1] as usize {
                        let row = i * stride_i + j * stride_j;
                        acc += layer[row..row + hi[2] as usize + 1]
                            .iter()
                            .map(|&v| v as u64)
                            .sum::<u64>();
                        if acc >= u64::MAX / 2 {
                            acc %= prime as u64;
                        }
                    }
                }
                (acc % prime as u64) as u16
            }
        }
    };
    terms.push(extract(&cur, &hi_prev));

    for n in 0..n_max {
        let hi_next: [u32; 3] = std::array::from_fn(|c| bounds.hi(c, n + 1));
        // Partition output rows (i-slabs) among workers; each slab is a
        // disjoint &mut region, the previous layer is shared read-only.
        let out_rows = hi_next[0] as usize + 1;
        let chunk = out_rows.div_ceil(partitions.max(1));
        let cur_ref = &cur;
        next[..cells].fill(0);
        next.par_chunks_mut(chunk * stride_i)
            .enumerate()
            .for_each(|(ci, slab)| {
                let i0 = ci * chunk;
                for (di, islab) in slab.chunks_mut(stride_i).enumerate() {
                    let i = i0 + di;
                    if i > hi_next[0] as usize {
                        break;
                    }
                    for s in &steps {
                        let si = i as i64 - s.x as i64;
                        if si < 0 || si > hi_prev[0] as i64 {
                            continue;
                        }
                        let (j_lo, j_hi) = shift_range(s.y, hi_next[1], hi_prev[1]);
                        let (k_lo, k_hi) = shift_range(s.z, hi_next[2], hi_prev[2]);
                        if j_lo > j_hi || k_lo > k_hi {
                            continue;
                        }
                        for j in j_lo..=j_hi {
                            let d0 = j as usize * stride_j + k_lo as usize;
                            let klen = (k_hi - k_lo + 1) as usize;
                            let s0 = si as usize * stride_i
                                + (j as i64 - s.y as i64) as usize * stride_j
                                + (k_lo as i64 - s.z as i64) as usize;
                            mod_add_rows(
                                &mut islab[d0..d0 + klen],
                                &cur_ref[s0..s0 + klen],
                                prime,
                            );
                        }
                    }
                }
            });
        std::mem::swap(&mut cur, &mut next);
        hi_prev = hi_next;
        terms.push(extract(&cur, &hi_prev));
    }

    Ok(ModSeries {
        model: *model,
        target,
        prime,
        terms,
    })
}

/// Valid destination range [lo, hi] along one axis for a step component d:
/// the destination must lie in the new layer's bounds and the source in the
/// previous layer's.
#[inline]
fn shift_range(d: i8, hi_new: u32, hi_old: u32) -> (u32, u32) {
    let lo = if d > 0 { d as u32 } else { 0 };
    let hi = if d < 0 {
        hi_old.saturating_sub((-d) as u32).min(hi_new)
    } else {
        (hi_old + d as u32).min(hi_new)
    };
    (lo, hi)
}

/// Exact walk counts by depth-first enumeration of every walk, one at a
/// time. Ground truth for the kernel; only feasible while the total number
/// of walks stays modest.
pub fn brute_force_walks(model: &StepSet, n_max: u32, target: Target) -> ExactSeries {
    let steps: Vec<[i64; 3]> = model
        .steps()
        .iter()
        .map(|s| [s.x as i64, s.y as i64, s.z as i64])
        .collect();
    let mut counts = vec![0u64; n_max as usize + 1];
    fn dfs(pos: [i64; 3], depth: u32, n_max: u32, steps: &[[i64; 3]], counts: &mut [u64], target: Target) {
        match target {
            Target::AllEndpoints => counts[depth as usize] += 1,
            Target::Excursions => {
                if pos == [0, 0, 0] {
                    counts[depth as usize] += 1;
                }
            }
        }
        if depth == n_max {
            return;
        }
        for s in steps {
            let q = [pos[0] + s[0], pos[1] + s[1], pos[2] + s[2]];
            if q[0] >= 0 && q[1] >= 0 && q[2] >= 0 {
                dfs(q, depth + 1, n_max, steps, counts, target);
            }
        }
    }
    dfs([0, 0, 0], 0, n_max, &steps, &mut counts, target);
    ExactSeries {
        model: *model,
        target,
        terms: counts.into_iter().map(Into::into).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepset::Step;
    use num_bigint::BigUint;

    fn set(steps: &[(i8, i8, i8)]) -> StepSet {
        StepSet::from_steps(steps.iter().map(|&(x, y, z)| Step::new(x, y, z).unwrap()))
    }

    fn s_star() -> StepSet {
        set(&[(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
    }

    #[test]
    fn diagonal_lattice_constraints() {
        let all_diag = set(&[
            (1, 1, 1),
            (1, 1, -1),
            (1, -1, 1),
            (1, -1, -1),
            (-1, 1, 1),
            (-1, 1, -1),
            (-1, -1, 1),
            (-1, -1, -1),
        ]);
        let lat = SupportLattice::for_model(&all_diag);
        for (v, expect) in [
            ([0, 0, 0, 0], true),
            ([1, 1, 1, 1], true),
            ([1, 0, 0, 1], false),
            ([2, 0, 0, 2], true),
            ([1, 1, 0, 2], false),
            ([0, 0, 0, 2], true),
            ([0, 0, 0, 1], false),
        ] {
            assert_eq!(lat.contains(v), expect, "{v:?}");
        }
    }

    #[test]
    fn full_model_lattice_is_everything() {
        let lat = SupportLattice::for_model(&StepSet::FULL);
        for v in [[0, 0, 0, 1], [1, 0, 0, 0], [5, 3, 2, 7], [1, 1, 1, 0]] {
            assert!(lat.contains(v));
        }
    }

    #[test]
    fn s_star_excursion_period_is_four() {
        let lat = SupportLattice::for_model(&s_star());
        assert_eq!(lat.excursion_period(), Some(4));
        assert!(lat.contains([0, 0, 0, 4]));
        assert!(!lat.contains([0, 0, 0, 2]));
    }

    #[test]
    fn lattice_is_conservative_for_brute_force() {
        for model in [s_star(), set(&[(1, 0, 0), (-1, 0, 0), (0, 1, 1)])] {
            let lat = SupportLattice::for_model(&model);
            let steps = model.steps();
            // walk all positions to depth 6 and check lattice membership
            let mut layer = std::collections::HashMap::new();
            layer.insert([0i64; 3], 1u64);
            for n in 0..6i64 {
                let mut next = std::collections::HashMap::new();
                for (p, c) in &layer {
                    for s in &steps {
                        let q = [p[0] + s.x as i64, p[1] + s.y as i64, p[2] + s.z as i64];
                        if q.iter().all(|&v| v >= 0) {
                            *next.entry(q).or_insert(0) += c;
                        }
                    }
                }
                for (p, _) in &next {
                    assert!(lat.contains([p[0], p[1], p[2], n + 1]));
                }
                layer = next;
            }
        }
    }

    #[test]
    fn reach_bounds_basics() {
        let b = ReachBounds::new(&s_star(), 10, Target::AllEndpoints);
        assert!(b.contains(0, 0, 0, 0));
        assert!(!b.contains(5, 0, 0, 4));
        let e = ReachBounds::new(&set(&[(1, 0, 0), (0, 1, 0)]), 8, Target::Excursions);
        // no step lowers x: for excursions x must stay 0
        assert_eq!(e.hi(0, 3), 0);
    }

    #[test]
    fn excursion_bounds_conservative() {
        // support of excursion-feasible positions vs the predicate
        let model = s_star();
        let n_max = 8u32;
        let b = ReachBounds::new(&model, n_max, Target::Excursions);
        let steps = model.steps();
        // enumerate all walks to n_max, record positions on walks that
        // return to the origin by time n_max
        let mut layers = vec![std::collections::HashSet::new(); n_max as usize + 1];
        fn go(
            pos: [i64; 3],
            depth: u32,
            n_max: u32,
            steps: &[Step],
            trail: &mut Vec<[i64; 3]>,
            layers: &mut [std::collections::HashSet<[i64; 3]>],
        ) {
            if pos == [0, 0, 0] {
                for (d, p) in trail.iter().enumerate() {
                    layers[d].insert(*p);
                }
            }
            if depth == n_max {
                return;
            }
            for s in steps {
                let q = [pos[0] + s.x as i64, pos[1] + s.y as i64, pos[2] + s.z as i64];
                if q.iter().all(|&v| v >= 0) {
                    trail.push(q);
                    go(q, depth + 1, n_max, steps, trail, layers);
                    trail.pop();
                }
            }
        }
        let mut trail = vec![[0i64; 3]];
        go([0, 0, 0], 0, n_max, &steps, &mut trail, &mut layers);
        for (n, set) in layers.iter().enumerate() {
            for p in set {
                assert!(
                    b.contains(p[0] as u32, p[1] as u32, p[2] as u32, n as u32),
                    "{p:?} at {n}"
                );
            }
        }
    }

    #[test]
    fn mod_add_matches_reference() {
        for p in [3u16, 16381, 32749] {
            for a in (0..p).step_by((p as usize / 97).max(1)) {
                for b in (0..p).step_by((p as usize / 89).max(1)) {
                    let mut d = [a];
                    mod_add_rows(&mut d, &[b], p);
                    assert_eq!(d[0] as u32, (a as u32 + b as u32) % p as u32);
                }
            }
        }
    }

    #[test]
    fn s_star_first_terms() {
        let m = s_star();
        let exc = count_layers(&m, 4, 16381, Target::Excursions, 1).unwrap();
        assert_eq!(exc.terms, vec![1, 0, 0, 0, 6]);
        let all = count_layers(&m, 1, 16381, Target::AllEndpoints, 1).unwrap();
        assert_eq!(all.terms, vec![1, 3]);
    }

    #[test]
    fn dyck_excursions() {
        let m = set(&[(1, 0, 0), (-1, 0, 0)]);
        let exc = brute_force_walks(&m, 8, Target::Excursions);
        let expect: Vec<BigUint> = [1u32, 0, 1, 0, 2, 0, 5, 0, 14]
            .iter()
            .map(|&v| v.into())
            .collect();
        assert_eq!(exc.terms, expect);
    }

    #[test]
    fn single_step_walks() {
        let m = set(&[(1, 0, 0)]);
        let s = brute_force_walks(&m, 6, Target::AllEndpoints);
        assert!(s.terms.iter().all(|t| *t == 1u32.into()));
    }

    #[test]
    fn kernel_matches_brute_force() {
        let models = [
            s_star(),
            set(&[(1, 0, 0), (-1, 0, 0)]),
            set(&[(1, 1, 0), (-1, 0, 1), (0, -1, -1), (0, 1, 0)]),
        ];
        for m in models {
            for target in [Target::Excursions, Target::AllEndpoints] {
                let exact = brute_force_walks(&m, 8, target);
                for p in [16381u16, 32749] {
                    let modp = count_layers(&m, 8, p, target, 1).unwrap();
                    for n in 0..=8usize {
                        let r = (&exact.terms[n] % p).to_u64_digits();
                        let r = if r.is_empty() { 0 } else { r[0] };
                        assert_eq!(modp.terms[n] as u64, r, "{m:?} {target:?} n={n} p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn partition_count_does_not_change_results() {
        let m = s_star();
        let base = count_layers(&m, 12, 32749, Target::AllEndpoints, 1).unwrap();
        for parts in [2, 4, 16, 64] {
            let other = count_layers(&m, 12, 32749, Target::AllEndpoints, parts).unwrap();
            assert_eq!(base, other);
        }
    }

    #[test]
    fn pruning_does_not_change_results() {
        // excursion run must agree with the all-endpoints run's origin cell
        let m = s_star();
        let p = 16381;
        let exc = count_layers(&m, 10, p, Target::Excursions, 1).unwrap();
        let exact = brute_force_walks(&m, 10, Target::Excursions);
        for n in 0..=10usize {
            let r = (&exact.terms[n] % p).to_u64_digits();
            let r = if r.is_empty() { 0 } else { r[0] };
            assert_eq!(exc.terms[n] as u64, r);
        }
    }

    #[test]
    fn bad_prime_rejected() {
        assert!(matches!(
            count_layers(&s_star(), 4, 32767, Target::Excursions, 1),
            Err(KernelError::BadPrime(_))
        ));
    }

    #[test]
    fn memory_budget_enforced() {
        let err = count_layers_with_limit(&StepSet::FULL, 400, 16381, Target::AllEndpoints, 1, 1 << 20);
        assert!(matches!(err, Err(KernelError::MemoryBudget { .. })));
    }

    #[test]
    fn series_file_roundtrip() {
        let m = s_star();
        let s = count_layers(&m, 16, 16381, Target::Excursions, 1).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"OW3S");
        let back = ModSeries::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }
}
