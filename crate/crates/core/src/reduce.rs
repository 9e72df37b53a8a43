//! Filters that reduce models to lower-dimensional problems: detection of
//! models in bijection with quarter-plane models (an exact rational LP) and
//! of models splitting as a Hadamard product of lower-dimensional models.

use crate::stepset::{Axis, Step, StepSet};
use num_rational::Rational64;
use num_traits::Zero;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// Witness that the octant constraint on one coordinate is implied by the
/// other two: s_c >= l1*s_a + l2*s_b for every step s, with l1, l2 >= 0.
/// Walks of the model are then in bijection with quadrant walks on (a, b).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionCertificate {
    pub dropped_coordinate: Axis,
    pub multipliers: (Rational64, Rational64),
}

impl ProjectionCertificate {
    /// Re-check the defining inequalities against every step.
    pub fn is_valid_for(&self, model: &StepSet) -> bool {
        let (l1, l2) = self.multipliers;
        if l1 < Rational64::zero() || l2 < Rational64::zero() {
            return false;
        }
        let (a, b) = self.dropped_coordinate.others();
        model.steps().iter().all(|s| {
            let lhs = l1 * Rational64::from_integer(s.coord(a) as i64)
                + l2 * Rational64::from_integer(s.coord(b) as i64);
            lhs <= Rational64::from_integer(s.coord(self.dropped_coordinate) as i64)
        })
    }
}

impl Serialize for ProjectionCertificate {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        fn rat(r: &Rational64) -> String {
            if r.is_integer() {
                r.numer().to_string()
            } else {
                format!("{}/{}", r.numer(), r.denom())
            }
        }
        let mut st = ser.serialize_struct("ProjectionCertificate", 2)?;
        st.serialize_field("drop", self.dropped_coordinate.name())?;
        st.serialize_field("lambda", &[rat(&self.multipliers.0), rat(&self.multipliers.1)])?;
        st.end()
    }
}

/// Decide whether some octant constraint is implied by the other two.
///
/// The two-variable system is solved exactly over the rationals by vertex
/// enumeration: the feasible set {l >= 0, A l <= b} is pointed, so it is
/// nonempty iff one of the pairwise intersections of constraint boundaries
/// (including the axes) satisfies every constraint. The third coordinate is
/// tried first, matching the usual reduction to quarter-plane models.
pub fn projectible(model: &StepSet) -> Option<ProjectionCertificate> {
    let steps = model.steps();
    if steps.is_empty() {
        return None;
    }
    for axis in [Axis::Z, Axis::Y, Axis::X] {
        if let Some(multipliers) = implied_axis(&steps, axis) {
            let cert = ProjectionCertificate {
                dropped_coordinate: axis,
                multipliers,
            };
            debug_assert!(cert.is_valid_for(model));
            return Some(cert);
        }
    }
    None
}

/// Feasibility of { l1, l2 >= 0 : l1*s_a + l2*s_b <= s_c for all s }.
fn implied_axis(steps: &[Step], c: Axis) -> Option<(Rational64, Rational64)> {
    let (a, b) = c.others();
    let cons: Vec<(i64, i64, i64)> = steps
        .iter()
        .map(|s| (s.coord(a) as i64, s.coord(b) as i64, s.coord(c) as i64))
        .collect();
    feasible_point(&cons)
}

/// A point of { l1,l2 >= 0 : l1*A + l2*B <= C } for rows (A, B, C), if any.
///
/// The feasible set is a pointed polyhedron, so when nonempty it has a
/// vertex among pairwise intersections of boundary lines and axes. The
/// origin is tried first, so models with no negative step in the dropped
/// coordinate get lambda = (0, 0).
fn feasible_point(cons: &[(i64, i64, i64)]) -> Option<(Rational64, Rational64)> {
    let zero = Rational64::zero();
    let sat = |l1: Rational64, l2: Rational64| {
        cons.iter().all(|&(a, b, c)| {
            l1 * Rational64::from_integer(a) + l2 * Rational64::from_integer(b)
                <= Rational64::from_integer(c)
        })
    };
    if sat(zero, zero) {
        return Some((zero, zero));
    }
    let mut lines: Vec<(i64, i64, i64)> = cons.to_vec();
    lines.push((1, 0, 0));
    lines.push((0, 1, 0));
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (a1, b1, c1) = lines[i];
            let (a2, b2, c2) = lines[j];
            let det = a1 * b2 - a2 * b1;
            if det == 0 {
                continue;
            }
            let l1 = Rational64::new(c1 * b2 - c2 * b1, det);
            let l2 = Rational64::new(a1 * c2 - a2 * c1, det);
            if l1 >= zero && l2 >= zero && sat(l1, l2) {
                return Some((l1, l2));
            }
        }
    }
    None
}

/// Smallest dimension the model's walks can be reduced to by repeatedly
/// dropping coordinates whose octant constraint is implied by the others
/// (minimized over drop choices). Inherently three-dimensional models give
/// 3; quarter-plane-reducible ones 2; models whose walks are in bijection
/// with walks on a (colored) half-line or are unconstrained give 1 or 0.
pub fn lp_dimension(model: &StepSet) -> u8 {
    let support: Vec<[i64; 3]> = model
        .steps()
        .iter()
        .map(|s| [s.x as i64, s.y as i64, s.z as i64])
        .collect();
    if support.is_empty() {
        return 0;
    }
    let mut best = 3u8;
    for c in 0..3 {
        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
        if implied_general(&support.iter().map(|v| (v[a], v[b], v[c])).collect::<Vec<_>>()) {
            let mut plane: Vec<(i64, i64)> = support.iter().map(|v| (v[a], v[b])).collect();
            plane.sort_unstable();
            plane.dedup();
            best = best.min(dim_of_plane(&plane));
        }
    }
    best
}

fn dim_of_plane(support: &[(i64, i64)]) -> u8 {
    let mut best = 2u8;
    for c in 0..2 {
        let cons: Vec<(i64, i64)> = support
            .iter()
            .map(|&(a, b)| if c == 0 { (b, a) } else { (a, b) })
            .collect();
        if implied_line(&cons) {
            let line: Vec<i64> = cons.iter().map(|&(other, _)| other).collect();
            best = best.min(if line.iter().any(|&v| v < 0) { 1 } else { 0 });
        }
    }
    best
}

fn implied_general(cons: &[(i64, i64, i64)]) -> bool {
    feasible_point(cons).is_some()
}

/// Feasibility of { l >= 0 : l*other <= c } for rows (other, c).
fn implied_line(cons: &[(i64, i64)]) -> bool {
    let mut lo = Rational64::zero();
    let mut hi: Option<Rational64> = None;
    for &(a, c) in cons {
        match a.cmp(&0) {
            std::cmp::Ordering::Equal => {
                if c < 0 {
                    return false;
                }
            }
            std::cmp::Ordering::Greater => {
                let h = Rational64::new(c, a);
                hi = Some(hi.map_or(h, |x: Rational64| x.min(h)));
            }
            std::cmp::Ordering::Less => {
                lo = lo.max(Rational64::new(c, a));
            }
        }
    }
    hi.map_or(true, |h| lo <= h)
}

/// Which side of the decomposition is one-dimensional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HadamardKind {
    /// P = U(x_c) + V(x_c) * W(a, b)
    OnePlusTwo,
    /// P = U(a, b) + V(a, b) * W(x_c)
    TwoPlusOne,
}

/// A splitting P_S = U + V*W with all coefficients in {0,1}. The
/// distinguished coordinate carries the one-dimensional factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HadamardDecomposition {
    pub kind: HadamardKind,
    pub distinguished_coordinate: Axis,
    /// Additive part: axis exponents for OnePlusTwo, plane shifts otherwise.
    pub u_axis: Vec<i8>,
    pub u_plane: Vec<(i8, i8)>,
    /// First product factor, in the same variables as U.
    pub v_axis: Vec<i8>,
    pub v_plane: Vec<(i8, i8)>,
    /// Second product factor, in the complementary variables.
    pub w_axis: Vec<i8>,
    pub w_plane: Vec<(i8, i8)>,
}

impl HadamardDecomposition {
    /// Rebuild the step set U + V*W; valid decompositions reproduce the
    /// model exactly, with no support overlap.
    pub fn reassemble(&self) -> Option<StepSet> {
        let c = self.distinguished_coordinate;
        let (a, b) = c.others();
        let mk = |e: i8, p: (i8, i8)| -> Option<Step> {
            let mut coords = [0i8; 3];
            let idx = |ax: Axis| match ax {
                Axis::X => 0,
                Axis::Y => 1,
                Axis::Z => 2,
            };
            coords[idx(c)] = e;
            coords[idx(a)] = p.0;
            coords[idx(b)] = p.1;
            Step::new(coords[0], coords[1], coords[2]).ok()
        };
        let mut acc: Vec<Step> = Vec::new();
        match self.kind {
            HadamardKind::OnePlusTwo => {
                for &e in &self.u_axis {
                    acc.push(mk(e, (0, 0))?);
                }
                for &e in &self.v_axis {
                    for &p in &self.w_plane {
                        acc.push(mk(e, p)?);
                    }
                }
            }
            HadamardKind::TwoPlusOne => {
                for &p in &self.u_plane {
                    acc.push(mk(0, p)?);
                }
                for &p in &self.v_plane {
                    for &e in &self.w_axis {
                        acc.push(mk(e, p)?);
                    }
                }
            }
        }
        // coefficient >= 2 (overlap) is not a step set
        let set = StepSet::from_steps(acc.iter().copied());
        (set.len() as usize == acc.len()).then_some(set)
    }
}

/// Slice the model by the exponent of one axis: supports of the other two
/// coordinates for axis value -1, 0, +1.
fn slices(model: &StepSet, c: Axis) -> [Vec<(i8, i8)>; 3] {
    let (a, b) = c.others();
    let mut out: [Vec<(i8, i8)>; 3] = Default::default();
    for s in model.steps() {
        out[(s.coord(c) + 1) as usize].push((s.coord(a), s.coord(b)));
    }
    for v in &mut out {
        v.sort_unstable();
    }
    out
}

/// Search for a Hadamard decomposition. The natural orientations x | (y,z)
/// and (x,y) | z are tried first, then the relabeled ones.
pub fn hadamard_decompose(model: &StepSet) -> Option<HadamardDecomposition> {
    if model.is_empty() {
        return None;
    }
    const ORDER: [(HadamardKind, Axis); 6] = [
        (HadamardKind::OnePlusTwo, Axis::X),
        (HadamardKind::TwoPlusOne, Axis::Z),
        (HadamardKind::OnePlusTwo, Axis::Y),
        (HadamardKind::OnePlusTwo, Axis::Z),
        (HadamardKind::TwoPlusOne, Axis::Y),
        (HadamardKind::TwoPlusOne, Axis::X),
    ];
    for (kind, axis) in ORDER {
        let found = match kind {
            HadamardKind::OnePlusTwo => one_plus_two(model, axis),
            HadamardKind::TwoPlusOne => two_plus_one(model, axis),
        };
        if let Some(d) = found {
            debug_assert_eq!(d.reassemble(), Some(*model));
            return Some(d);
        }
    }
    None
}

fn one_plus_two(model: &StepSet, axis: Axis) -> Option<HadamardDecomposition> {
    let sl = slices(model, axis);
    // choose which axis exponents belong to V (the factor multiplying W)
    'pattern: for pat in 1u8..8 {
        let v_has = |e: usize| pat & (1 << e) != 0;
        let mut w: Option<Vec<(i8, i8)>> = None;
        let mut u_axis = Vec::new();
        let mut v_axis = Vec::new();
        for e in 0..3 {
            let slice = &sl[e];
            let has_origin = slice.binary_search(&(0, 0)).is_ok();
            if v_has(e) {
                let rest: Vec<(i8, i8)> =
                    slice.iter().copied().filter(|&p| p != (0, 0)).collect();
                if rest.is_empty() {
                    continue 'pattern;
                }
                match &w {
                    None => w = Some(rest),
                    Some(prev) if *prev == rest => {}
                    _ => continue 'pattern,
                }
                v_axis.push(e as i8 - 1);
                if has_origin {
                    u_axis.push(e as i8 - 1);
                }
            } else {
                // slice must be empty or exactly the origin shift
                if slice.len() > 1 || (slice.len() == 1 && !has_origin) {
                    continue 'pattern;
                }
                if has_origin {
                    u_axis.push(e as i8 - 1);
                }
            }
        }
        let w = w?;
        let d = HadamardDecomposition {
            kind: HadamardKind::OnePlusTwo,
            distinguished_coordinate: axis,
            u_axis,
            u_plane: Vec::new(),
            v_axis,
            v_plane: Vec::new(),
            w_axis: Vec::new(),
            w_plane: w,
        };
        if d.reassemble() == Some(*model) {
            return Some(d);
        }
    }
    None
}

fn two_plus_one(model: &StepSet, axis: Axis) -> Option<HadamardDecomposition> {
    let sl = slices(model, axis);
    let minus = &sl[0];
    let zero = &sl[1];
    let plus = &sl[2];
    let (v_plane, w_axis): (Vec<(i8, i8)>, Vec<i8>) = match (minus.is_empty(), plus.is_empty()) {
        (false, false) => {
            if minus != plus {
                return None;
            }
            (minus.clone(), vec![-1, 1])
        }
        (false, true) => (minus.clone(), vec![-1]),
        (true, false) => (plus.clone(), vec![1]),
        (true, true) => return None,
    };
    let d = HadamardDecomposition {
        kind: HadamardKind::TwoPlusOne,
        distinguished_coordinate: axis,
        u_axis: Vec::new(),
        u_plane: zero.clone(),
        v_axis: Vec::new(),
        v_plane,
        w_axis,
        w_plane: Vec::new(),
    };
    (d.reassemble() == Some(*model)).then_some(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(steps: &[(i8, i8, i8)]) -> StepSet {
        StepSet::from_steps(steps.iter().map(|&(x, y, z)| Step::new(x, y, z).unwrap()))
    }

    #[test]
    fn planar_model_is_projectible() {
        let s = StepSet::from_diagram("000000000 10100010 000000000").unwrap();
        let cert = projectible(&s).unwrap();
        assert_eq!(cert.dropped_coordinate, Axis::Z);
        assert_eq!(
            cert.multipliers,
            (Rational64::zero(), Rational64::zero())
        );
        assert!(cert.is_valid_for(&s));
    }

    #[test]
    fn single_up_step_is_projectible() {
        let s = set(&[(0, 0, 1)]);
        let cert = projectible(&s).unwrap();
        assert_eq!(cert.dropped_coordinate, Axis::Z);
        assert_eq!(cert.multipliers, (Rational64::zero(), Rational64::zero()));
    }

    #[test]
    fn diagonal_model_is_not_projectible() {
        let s = set(&[(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]);
        assert!(projectible(&s).is_none());
    }

    #[test]
    fn nonzero_multiplier_detected() {
        // z >= x on every step, so z is implied with lambda = (1, 0)
        let s = set(&[(1, 1, 1), (-1, -1, -1), (-1, -1, 0), (1, 0, 1)]);
        let cert = projectible(&s).unwrap();
        assert!(cert.is_valid_for(&s));
    }

    #[test]
    fn projectibility_commutes_with_permutation() {
        use crate::stepset::AxisPerm;
        let models = [
            set(&[(1, 1, 1), (-1, -1, -1), (-1, -1, 0), (1, 0, 1)]),
            set(&[(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]),
            StepSet::from_diagram("000000000 10100010 000000000").unwrap(),
        ];
        for m in models {
            let base = projectible(&m).is_some();
            for p in AxisPerm::ALL {
                assert_eq!(projectible(&m.apply_permutation(p)).is_some(), base);
            }
        }
    }

    #[test]
    fn hadamard_two_plus_one_example() {
        let s = StepSet::from_diagram("101000101 01000010 101000101").unwrap();
        let d = hadamard_decompose(&s).unwrap();
        assert_eq!(d.kind, HadamardKind::TwoPlusOne);
        assert_eq!(d.distinguished_coordinate, Axis::Z);
        assert_eq!(d.u_plane, vec![(0, -1), (0, 1)]);
        assert_eq!(d.v_plane, vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]);
        assert_eq!(d.w_axis, vec![-1, 1]);
        assert_eq!(d.reassemble(), Some(s));
    }

    #[test]
    fn hadamard_full_model_is_one_plus_two() {
        let d = hadamard_decompose(&StepSet::FULL).unwrap();
        assert_eq!(d.kind, HadamardKind::OnePlusTwo);
        assert_eq!(d.distinguished_coordinate, Axis::X);
        assert_eq!(d.u_axis, vec![-1, 1]);
        assert_eq!(d.v_axis, vec![-1, 0, 1]);
        assert_eq!(d.w_plane.len(), 8);
        assert_eq!(d.reassemble(), Some(StepSet::FULL));
    }

    #[test]
    fn diagonal_model_has_no_decomposition() {
        let s = set(&[(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]);
        assert!(hadamard_decompose(&s).is_none());
    }

    #[test]
    fn hadamard_commutes_with_permutation() {
        use crate::stepset::AxisPerm;
        let models = [
            StepSet::from_diagram("101000101 01000010 101000101").unwrap(),
            set(&[(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]),
            StepSet::FULL,
        ];
        for m in models {
            let base = hadamard_decompose(&m).is_some();
            for p in AxisPerm::ALL {
                assert_eq!(hadamard_decompose(&m.apply_permutation(p)).is_some(), base);
            }
        }
    }

    #[test]
    fn certificate_serialization() {
        let cert = ProjectionCertificate {
            dropped_coordinate: Axis::Z,
            multipliers: (Rational64::zero(), Rational64::new(1, 2)),
        };
        let js = serde_json::to_string(&cert).unwrap();
        assert_eq!(js, r#"{"drop":"z","lambda":["0","1/2"]}"#);
    }
}
