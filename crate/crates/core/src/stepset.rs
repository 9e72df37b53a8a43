//! Step sets of 3D octant walk models: the 26-bit mask encoding, coordinate
//! permutations, removal of steps that can never be used, canonical forms,
//! and enumeration of the canonical symmetry classes.
//!
//! A model is a set S of steps from {-1,0,1}^3 minus the zero step. Walks
//! start at the origin and must keep all three coordinates nonnegative.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::OnceLock;
use thiserror::Error;

/// Number of encodable steps, hence bits in a mask.
pub const STEP_COUNT: usize = 26;

/// Upper bound (exclusive) for valid masks.
pub const MASK_LIMIT: u32 = 1 << STEP_COUNT;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepSetError {
    #[error("mask {0:#x} out of range (must be < 2^26)")]
    MaskOutOfRange(u64),
    #[error("invalid step ({0},{1},{2})")]
    InvalidStep(i8, i8, i8),
    #[error("malformed step-set literal: {0}")]
    BadLiteral(String),
}

/// A single step, each coordinate in {-1, 0, 1}, not all zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub x: i8,
    pub y: i8,
    pub z: i8,
}

impl Step {
    pub fn new(x: i8, y: i8, z: i8) -> Result<Self, StepSetError> {
        let ok = |c: i8| (-1..=1).contains(&c);
        if !ok(x) || !ok(y) || !ok(z) || (x == 0 && y == 0 && z == 0) {
            return Err(StepSetError::InvalidStep(x, y, z));
        }
        Ok(Step { x, y, z })
    }

    pub fn coord(&self, axis: Axis) -> i8 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    /// Bit position of this step. Steps are grouped in three blocks by the
    /// z-component (-1, 0, +1); inside a block they are ordered
    /// lexicographically by (y, x), and the zero step is skipped in the
    /// middle block.
    pub fn index(&self) -> usize {
        let in_block = (3 * (self.y + 1) + (self.x + 1)) as usize;
        match self.z {
            -1 => in_block,
            0 => {
                debug_assert!(in_block != 4);
                9 + if in_block < 4 { in_block } else { in_block - 1 }
            }
            _ => 17 + in_block,
        }
    }

    /// Inverse of [`Step::index`].
    pub fn from_index(i: usize) -> Self {
        debug_assert!(i < STEP_COUNT);
        let (z, q) = match i {
            0..=8 => (-1, i),
            9..=16 => (0, if i - 9 < 4 { i - 9 } else { i - 8 }),
            _ => (1, i - 17),
        };
        Step {
            x: (q % 3) as i8 - 1,
            y: (q / 3) as i8 - 1,
            z,
        }
    }
}

impl fmt::Debug for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// One of the three coordinate axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// The other two axes, in coordinate order.
    pub fn others(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// A permutation of the coordinate axes. `map[i]` is the image of axis i,
/// so applying `[1,0,2]` to (1,0,0) yields (0,1,0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisPerm(pub [usize; 3]);

impl AxisPerm {
    pub const IDENTITY: AxisPerm = AxisPerm([0, 1, 2]);

    /// All six coordinate permutations, identity first.
    pub const ALL: [AxisPerm; 6] = [
        AxisPerm([0, 1, 2]),
        AxisPerm([0, 2, 1]),
        AxisPerm([1, 0, 2]),
        AxisPerm([1, 2, 0]),
        AxisPerm([2, 0, 1]),
        AxisPerm([2, 1, 0]),
    ];

    pub fn apply(&self, s: Step) -> Step {
        let src = [s.x, s.y, s.z];
        let mut dst = [0i8; 3];
        for i in 0..3 {
            dst[self.0[i]] = src[i];
        }
        Step {
            x: dst[0],
            y: dst[1],
            z: dst[2],
        }
    }
}

/// A set of steps encoded as a 26-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepSet(u32);

impl StepSet {
    pub const EMPTY: StepSet = StepSet(0);

    /// The full model with all 26 steps.
    pub const FULL: StepSet = StepSet(MASK_LIMIT - 1);

    pub fn from_mask(mask: u32) -> Result<Self, StepSetError> {
        if mask >= MASK_LIMIT {
            return Err(StepSetError::MaskOutOfRange(mask as u64));
        }
        Ok(StepSet(mask))
    }

    pub fn from_steps<I: IntoIterator<Item = Step>>(steps: I) -> Self {
        let mut mask = 0u32;
        for s in steps {
            mask |= 1 << s.index();
        }
        StepSet(mask)
    }

    pub fn mask(&self) -> u32 {
        self.0
    }

    pub fn len(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, s: Step) -> bool {
        self.0 & (1 << s.index()) != 0
    }

    pub fn is_subset_of(&self, other: &StepSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Decode the mask into its steps, in block order (ascending bit index).
    pub fn steps(&self) -> Vec<Step> {
        (0..STEP_COUNT)
            .filter(|i| self.0 & (1 << i) != 0)
            .map(Step::from_index)
            .collect()
    }

    /// Seven-digit lowercase hex form used in the model list files.
    pub fn hex(&self) -> String {
        format!("{:07x}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, StepSetError> {
        let mask =
            u32::from_str_radix(s.trim(), 16).map_err(|_| StepSetError::BadLiteral(s.into()))?;
        StepSet::from_mask(mask)
    }

    /// Parse the three-block 0/1 diagram notation, e.g.
    /// `"000100000 10100010 000000000"`. Whitespace between blocks is
    /// optional; exactly 26 binary digits are required.
    pub fn from_diagram(s: &str) -> Result<Self, StepSetError> {
        let bits: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if bits.len() != STEP_COUNT || bits.iter().any(|&c| c != '0' && c != '1') {
            return Err(StepSetError::BadLiteral(s.into()));
        }
        let mut mask = 0u32;
        for (i, &c) in bits.iter().enumerate() {
            if c == '1' {
                mask |= 1 << i;
            }
        }
        Ok(StepSet(mask))
    }

    /// Inverse of [`StepSet::from_diagram`].
    pub fn diagram(&self) -> String {
        let mut out = String::with_capacity(28);
        for i in 0..STEP_COUNT {
            if i == 9 || i == 17 {
                out.push(' ');
            }
            out.push(if self.0 & (1 << i) != 0 { '1' } else { '0' });
        }
        out
    }

    /// Apply a coordinate permutation to every step.
    pub fn apply_permutation(&self, perm: AxisPerm) -> StepSet {
        let tables = perm_tables();
        let idx = AxisPerm::ALL.iter().position(|p| *p == perm).unwrap();
        let t = &tables[idx];
        StepSet(
            t.0[(self.0 & 0x1ff) as usize]
                | t.1[((self.0 >> 9) & 0xff) as usize]
                | t.2[((self.0 >> 17) & 0x1ff) as usize],
        )
    }

    /// The subset of steps that occur in at least one octant walk of the
    /// model. Walk counts of S and of its usable closure agree for every
    /// length; the operation is idempotent.
    ///
    /// Exact breadth-first search over the positions reachable inside the
    /// box [0,N]^3, with N doubling from 4 until the answer is stable for
    /// two consecutive box sizes. A plain "remove steps with an unmatched
    /// negative coordinate" fixpoint would misclassify mutually blocking
    /// step pairs such as {(1,-1,0),(-1,1,0)}.
    pub fn usable_closure(&self) -> StepSet {
        if self.0 == 0 {
            return StepSet::EMPTY;
        }
        // If the nonnegative steps of S alone reach a strictly positive
        // point, every step applies from there, so S is its own closure.
        let plus = nonneg_plus_masks();
        if (0..3).all(|c| self.0 & plus[c] != 0) {
            return *self;
        }
        let steps = self.steps();
        let mut prev: Option<u32> = None;
        let mut n = 4usize;
        loop {
            let usable = usable_in_box(&steps, n);
            if prev == Some(usable) {
                return StepSet(usable);
            }
            prev = Some(usable);
            n *= 2;
            assert!(n <= 256, "usable-step search failed to stabilize");
        }
    }

    /// The minimum mask over the six coordinate permutations of the usable
    /// closure. Idempotent and constant on each equivalence class.
    pub fn canonical_form(&self) -> StepSet {
        let closed = self.usable_closure();
        StepSet(
            AxisPerm::ALL
                .iter()
                .map(|p| closed.apply_permutation(*p).0)
                .min()
                .unwrap(),
        )
    }

    /// True iff this mask is its own canonical form.
    pub fn is_canonical(&self) -> bool {
        // Cheap pre-check: the canonical form is a subset of every permuted
        // image, so numerically it cannot exceed any of them.
        for p in &AxisPerm::ALL[1..] {
            if self.apply_permutation(*p).0 < self.0 {
                return false;
            }
        }
        self.usable_closure() == *self
    }
}

impl fmt::Debug for StepSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StepSet({})", self.hex())
    }
}

impl fmt::Display for StepSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

/// Masks of the all-nonnegative steps having +1 in each axis.
fn nonneg_plus_masks() -> &'static [u32; 3] {
    static MASKS: OnceLock<[u32; 3]> = OnceLock::new();
    MASKS.get_or_init(|| {
        let mut m = [0u32; 3];
        for i in 0..STEP_COUNT {
            let s = Step::from_index(i);
            if s.x >= 0 && s.y >= 0 && s.z >= 0 {
                for (c, v) in [s.x, s.y, s.z].into_iter().enumerate() {
                    if v == 1 {
                        m[c] |= 1 << i;
                    }
                }
            }
        }
        m
    })
}

type BlockTables = (Vec<u32>, Vec<u32>, Vec<u32>);

fn perm_tables() -> &'static [BlockTables; 6] {
    static TABLES: OnceLock<[BlockTables; 6]> = OnceLock::new();
    TABLES.get_or_init(|| {
        std::array::from_fn(|pi| {
            let perm = AxisPerm::ALL[pi];
            let bit_image: Vec<u32> = (0..STEP_COUNT)
                .map(|i| 1u32 << perm.apply(Step::from_index(i)).index())
                .collect();
            let expand = |offset: usize, width: usize| -> Vec<u32> {
                (0u32..1 << width)
                    .map(|chunk| {
                        (0..width)
                            .filter(|b| chunk & (1 << b) != 0)
                            .map(|b| bit_image[offset + b])
                            .fold(0, |acc, m| acc | m)
                    })
                    .collect()
            };
            (expand(0, 9), expand(9, 8), expand(17, 9))
        })
    })
}

/// Steps of `steps` usable within reach of the box [0,n]^3.
///
/// The reachable-position set is kept as a bitset over the (n+1)^3 grid and
/// grown to a fixpoint by shifted word-parallel ORs, one shift per step.
fn usable_in_box(steps: &[Step], n: usize) -> u32 {
    let side = n + 1;
    let cells = side * side * side;
    let words = cells.div_ceil(64);
    // Positions whose coordinate c is >= 1 (so a -1 move stays in the
    // octant) and <= n-1 (so a +1 move stays in the box).
    let coord_of = |i: usize, c: usize| match c {
        0 => i / (side * side),
        1 => (i / side) % side,
        _ => i % side,
    };
    let build = |pred: &dyn Fn(usize) -> bool| -> Vec<u64> {
        let mut m = vec![0u64; words];
        for i in 0..cells {
            if pred(i) {
                m[i / 64] |= 1 << (i % 64);
            }
        }
        m
    };
    let ge1: Vec<Vec<u64>> = (0..3).map(|c| build(&|i| coord_of(i, c) >= 1)).collect();
    let le_top: Vec<Vec<u64>> = (0..3).map(|c| build(&|i| coord_of(i, c) <= n - 1)).collect();

    // source-position validity mask and linear offset per step
    let strides = [side * side, side, 1];
    let step_info: Vec<(i64, Vec<u64>)> = steps
        .iter()
        .map(|s| {
            let d = [s.x, s.y, s.z];
            let mut mask = vec![u64::MAX; words];
            let tail = cells % 64;
            if tail != 0 {
                mask[words - 1] = (1u64 << tail) - 1;
            }
            let mut off = 0i64;
            for c in 0..3 {
                off += d[c] as i64 * strides[c] as i64;
                let m = match d[c] {
                    -1 => &ge1[c],
                    1 => &le_top[c],
                    _ => continue,
                };
                for w in 0..words {
                    mask[w] &= m[w];
                }
            }
            (off, mask)
        })
        .collect();

    let mut reach = vec![0u64; words];
    reach[0] = 1;
    let mut scratch = vec![0u64; words];
    loop {
        let mut grew = false;
        for (off, mask) in &step_info {
            for w in 0..words {
                scratch[w] = reach[w] & mask[w];
            }
            shift_bits(&mut scratch, *off);
            for w in 0..words {
                let new = reach[w] | scratch[w];
                if new != reach[w] {
                    reach[w] = new;
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }

    // A step is usable if some reachable position admits it with the target
    // in the octant; the target may leave the box.
    let mut usable = 0u32;
    for s in steps {
        let d = [s.x, s.y, s.z];
        let mut ok = false;
        'words: for w in 0..words {
            let mut bits = reach[w];
            for c in 0..3 {
                if d[c] == -1 {
                    bits &= ge1[c][w];
                }
            }
            if bits != 0 {
                ok = true;
                break 'words;
            }
        }
        if ok {
            usable |= 1 << s.index();
        }
    }
    usable
}

/// In-place left (positive) or right (negative) shift of a bitset.
fn shift_bits(bits: &mut [u64], offset: i64) {
    if offset == 0 {
        return;
    }
    let words = bits.len();
    let (word_off, bit_off) = (offset.unsigned_abs() as usize / 64, offset.unsigned_abs() as u32 % 64);
    if offset > 0 {
        for w in (0..words).rev() {
            let mut v = 0u64;
            if w >= word_off {
                v = bits[w - word_off] << bit_off;
                if bit_off > 0 && w > word_off {
                    v |= bits[w - word_off - 1] >> (64 - bit_off);
                }
            }
            bits[w] = v;
        }
    } else {
        for w in 0..words {
            let mut v = 0u64;
            if w + word_off < words {
                v = bits[w + word_off] >> bit_off;
                if bit_off > 0 && w + word_off + 1 < words {
                    v |= bits[w + word_off + 1] << (64 - bit_off);
                }
            }
            bits[w] = v;
        }
    }
}

/// Where a model stands in the filtering cascade. Transitions along the
/// pipeline only ever move to a strictly later status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStatus {
    Unprocessed,
    EliminatedUnusedDuplicate,
    Projectible,
    Hadamard,
    GroupLarge,
    FiniteGroupNonzeroOs,
    FiniteGroupZeroOs,
}

impl FilterStatus {
    /// Position in the cascade; statuses may only advance.
    pub fn rank(self) -> u8 {
        match self {
            FilterStatus::Unprocessed => 0,
            FilterStatus::EliminatedUnusedDuplicate => 1,
            FilterStatus::Projectible => 2,
            FilterStatus::Hadamard => 3,
            FilterStatus::GroupLarge => 4,
            FilterStatus::FiniteGroupNonzeroOs => 5,
            FilterStatus::FiniteGroupZeroOs => 6,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FilterStatus::Unprocessed => "unprocessed",
            FilterStatus::EliminatedUnusedDuplicate => "eliminated",
            FilterStatus::Projectible => "projectible",
            FilterStatus::Hadamard => "hadamard",
            FilterStatus::GroupLarge => "group_large",
            FilterStatus::FiniteGroupNonzeroOs => "finite_nonzero_os",
            FilterStatus::FiniteGroupZeroOs => "finite_zero_os",
        }
    }

    pub fn from_token(s: &str) -> Option<FilterStatus> {
        Some(match s {
            "unprocessed" => FilterStatus::Unprocessed,
            "eliminated" => FilterStatus::EliminatedUnusedDuplicate,
            "projectible" => FilterStatus::Projectible,
            "hadamard" => FilterStatus::Hadamard,
            "group_large" => FilterStatus::GroupLarge,
            "finite_nonzero_os" => FilterStatus::FiniteGroupNonzeroOs,
            "finite_zero_os" => FilterStatus::FiniteGroupZeroOs,
            _ => return None,
        })
    }
}

impl fmt::Display for FilterStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One enumerated model class and its classification state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: StepSet,
    pub size: u32,
    pub status: FilterStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_info: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl ModelRecord {
    pub fn new(id: StepSet) -> Self {
        debug_assert!(id.is_canonical());
        ModelRecord {
            size: id.len(),
            id,
            status: FilterStatus::Unprocessed,
            group_info: None,
            notes: String::new(),
        }
    }

    /// Move to a later status; statuses are monotone along the cascade.
    pub fn advance(&mut self, status: FilterStatus) {
        assert!(
            status.rank() > self.status.rank(),
            "status may not move backwards: {} -> {}",
            self.status,
            status
        );
        self.status = status;
    }

    /// The `hex(mask),size,status` line of the model list file.
    pub fn to_line(&self) -> String {
        format!("{},{},{}", self.id.hex(), self.size, self.status)
    }

    pub fn from_line(line: &str) -> Result<Self, StepSetError> {
        let mut parts = line.trim().split(',');
        let id = StepSet::from_hex(parts.next().unwrap_or(""))?;
        let size: u32 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| StepSetError::BadLiteral(line.into()))?;
        let status = parts
            .next()
            .and_then(FilterStatus::from_token)
            .ok_or_else(|| StepSetError::BadLiteral(line.into()))?;
        if size != id.len() {
            return Err(StepSetError::BadLiteral(line.into()));
        }
        Ok(ModelRecord {
            id,
            size,
            status,
            group_info: None,
            notes: String::new(),
        })
    }
}

/// Emit every canonical class of genuine octant models exactly once, sorted
/// by mask. A mask qualifies when it is its own canonical form and its
/// walks do not reduce to a problem in fewer than two dimensions: classes
/// whose walks are in bijection with (colored) half-line or unconstrained
/// walks are not counted as models at all, which is what makes the class
/// counts by size match the published generating function. With a size
/// filter only masks of the requested popcounts are visited; the full sweep
/// visits all 2^26 - 1 masks.
pub fn enumerate_classes(
    size_filter: Option<std::ops::RangeInclusive<u32>>,
) -> impl Iterator<Item = ModelRecord> {
    let (lo, hi) = match &size_filter {
        Some(r) => (*r.start(), (*r.end()).min(26)),
        None => (1, 26),
    };
    ClassIter {
        heads: (lo..=hi).map(|k| first_mask_with_popcount(k)).collect(),
        done: lo > hi,
    }
}

/// True iff this mask is the canonical representative of an emitted class:
/// its own canonical form, of dimension at least two.
pub fn is_class_representative(s: &StepSet) -> bool {
    s.is_canonical() && crate::reduce::lp_dimension(s) >= 2
}

/// Class records with masks in [lo, hi), optionally filtered by size.
/// Disjoint mask ranges can be processed in parallel and concatenated; the
/// result is sorted by mask either way.
pub fn canonical_records_in_mask_range(
    lo: u32,
    hi: u32,
    size_filter: Option<std::ops::RangeInclusive<u32>>,
) -> Vec<ModelRecord> {
    (lo.max(1)..hi.min(MASK_LIMIT))
        .filter(|&m| {
            size_filter
                .as_ref()
                .map_or(true, |r| r.contains(&m.count_ones()))
        })
        .filter_map(|m| {
            let s = StepSet(m);
            is_class_representative(&s).then(|| ModelRecord::new(s))
        })
        .collect()
}

struct ClassIter {
    /// Next candidate mask for each popcount stream (Gosper order).
    heads: Vec<Option<u32>>,
    done: bool,
}

fn first_mask_with_popcount(k: u32) -> Option<u32> {
    (k >= 1 && k <= 26).then(|| (1u32 << k) - 1)
}

fn next_mask_same_popcount(m: u32) -> Option<u32> {
    // Gosper's hack.
    let c = m & m.wrapping_neg();
    let r = m + c;
    let next = (((r ^ m) >> 2) / c) | r;
    (next < MASK_LIMIT).then_some(next)
}

impl Iterator for ClassIter {
    type Item = ModelRecord;

    fn next(&mut self) -> Option<ModelRecord> {
        if self.done {
            return None;
        }
        loop {
            // Smallest current candidate over the popcount streams keeps the
            // merged output sorted by mask.
            let (slot, &mask) = self
                .heads
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.as_ref().map(|m| (i, m)))
                .min_by_key(|&(_, m)| m)?;
            self.heads[slot] = next_mask_same_popcount(mask);
            let s = StepSet(mask);
            if is_class_representative(&s) {
                return Some(ModelRecord::new(s));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(steps: &[(i8, i8, i8)]) -> StepSet {
        StepSet::from_steps(steps.iter().map(|&(x, y, z)| Step::new(x, y, z).unwrap()))
    }

    #[test]
    fn decode_empty() {
        assert!(StepSet::EMPTY.steps().is_empty());
    }

    #[test]
    fn decode_block_order() {
        let s = StepSet::from_diagram("000100000 10100010 000000000").unwrap();
        assert_eq!(s, set(&[(-1, 0, -1), (-1, -1, 0), (0, 1, 0), (1, -1, 0)]));
        let s = StepSet::from_diagram("100000000 00001010 000010000").unwrap();
        assert_eq!(s, set(&[(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]));
    }

    #[test]
    fn mask_roundtrip() {
        for mask in [0u32, 1, 0x155_5555, MASK_LIMIT - 1, 0x0040f2a] {
            let s = StepSet::from_mask(mask).unwrap();
            assert_eq!(StepSet::from_steps(s.steps()), s);
            assert_eq!(StepSet::from_hex(&s.hex()).unwrap(), s);
            assert_eq!(StepSet::from_diagram(&s.diagram()).unwrap(), s);
        }
        assert!(StepSet::from_mask(MASK_LIMIT).is_err());
    }

    #[test]
    fn permutation_examples() {
        let s = set(&[(1, 0, 0)]);
        assert_eq!(s.apply_permutation(AxisPerm::IDENTITY), s);
        assert_eq!(s.apply_permutation(AxisPerm([1, 0, 2])), set(&[(0, 1, 0)]));
        for p in AxisPerm::ALL {
            assert_eq!(StepSet::FULL.apply_permutation(p), StepSet::FULL);
        }
    }

    #[test]
    fn permutation_is_bijective() {
        let s = StepSet::from_mask(0x2a5_11f3).unwrap_or(StepSet::FULL);
        for p in AxisPerm::ALL {
            assert_eq!(s.apply_permutation(p).len(), s.len());
        }
    }

    #[test]
    fn unused_step_removal() {
        let with_unused = StepSet::from_diagram("000100000 10100010 000000000").unwrap();
        let without = StepSet::from_diagram("000000000 10100010 000000000").unwrap();
        assert_eq!(with_unused.usable_closure(), without);
        assert_eq!(without.usable_closure(), without);

        let single = set(&[(1, 0, 0)]);
        assert_eq!(single.usable_closure(), single);

        // Mutually blocking pair: neither step is ever applicable.
        let blocked = set(&[(1, -1, 0), (-1, 1, 0)]);
        assert_eq!(blocked.usable_closure(), StepSet::EMPTY);
    }

    #[test]
    fn closure_is_monotone_and_idempotent() {
        for mask in [0x155_5555u32, 0x000_1234, 0x3ff_ffff, 0x0a0_0c11] {
            let s = StepSet::from_mask(mask).unwrap();
            let c = s.usable_closure();
            assert!(c.is_subset_of(&s));
            assert_eq!(c.usable_closure(), c);
        }
    }

    #[test]
    fn canonical_form_examples() {
        let a = StepSet::from_diagram("000100000 10100010 000000000").unwrap();
        let b = StepSet::from_diagram("000000000 10100010 000000000").unwrap();
        assert_eq!(a.canonical_form(), b.canonical_form());
        assert_eq!(StepSet::FULL.canonical_form(), StepSet::FULL);
        for s in [a, b, StepSet::FULL, set(&[(1, 0, 0)])] {
            assert_eq!(s.canonical_form().canonical_form(), s.canonical_form());
        }
    }

    #[test]
    fn canonical_commutes_with_permutation() {
        let models = [
            StepSet::from_diagram("100000000 00001010 000010000").unwrap(),
            StepSet::from_diagram("101000101 01000010 101000101").unwrap(),
            set(&[(1, -1, 0), (-1, 1, 0), (0, 0, 1)]),
        ];
        for s in models {
            let c = s.canonical_form();
            for p in AxisPerm::ALL {
                assert_eq!(s.apply_permutation(p).canonical_form(), c);
            }
        }
    }

    #[test]
    fn enumeration_small_sizes() {
        let mut by_size = [0u32; 5];
        for rec in enumerate_classes(Some(1..=4)) {
            by_size[rec.size as usize] += 1;
            assert!(rec.id.is_canonical());
        }
        // Coefficients of the symmetry-class generating function. One- and
        // two-step models always reduce to at most one dimension, so no
        // classes exist there.
        assert_eq!(by_size[1], 0);
        assert_eq!(by_size[2], 0);
        assert_eq!(by_size[3], 73);
        assert_eq!(by_size[4], 979);
    }

    #[test]
    fn enumeration_sorted_and_matches_range_scan() {
        let via_iter: Vec<u32> = enumerate_classes(Some(1..=3)).map(|r| r.id.mask()).collect();
        let mut sorted = via_iter.clone();
        sorted.sort_unstable();
        assert_eq!(via_iter, sorted);

        let via_scan: Vec<u32> = canonical_records_in_mask_range(0, MASK_LIMIT, Some(1..=3))
            .into_iter()
            .map(|r| r.id.mask())
            .collect();
        assert_eq!(via_iter, via_scan);
    }

    #[test]
    fn full_set_is_single_class_of_size_26() {
        let found: Vec<_> = enumerate_classes(Some(26..=26)).collect();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].id, StepSet::FULL);
    }

    #[test]
    fn record_line_roundtrip() {
        let mut rec = ModelRecord::new(set(&[(1, 0, 0), (0, 1, 0)]).canonical_form());
        rec.advance(FilterStatus::Projectible);
        let line = rec.to_line();
        let back = ModelRecord::from_line(&line).unwrap();
        assert_eq!(back.id, rec.id);
        assert_eq!(back.status, rec.status);
        assert!(line.starts_with(&rec.id.hex()));
    }

    #[test]
    #[should_panic(expected = "status may not move backwards")]
    fn status_is_monotone() {
        let mut rec = ModelRecord::new(StepSet::FULL);
        rec.advance(FilterStatus::Hadamard);
        rec.advance(FilterStatus::Projectible);
    }
}
