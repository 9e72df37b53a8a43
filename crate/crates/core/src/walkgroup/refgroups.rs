//! Reference tables for the finite groups that occur in the classification,
//! built by brute-force closure of permutation generators.

/// Invariants used to tell the candidate groups apart: order, abelianness,
/// and the multiset of element orders as (order, count) pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupInvariants {
    pub order: u32,
    pub abelian: bool,
    pub element_orders: Vec<(u32, u32)>,
}

fn compose(a: &[u8], b: &[u8]) -> Vec<u8> {
    // (a . b)(i) = a(b(i))
    b.iter().map(|&i| a[i as usize]).collect()
}

fn perm_order(p: &[u8]) -> u32 {
    let id: Vec<u8> = (0..p.len() as u8).collect();
    let mut q = p.to_vec();
    let mut n = 1;
    while q != id {
        q = compose(p, &q);
        n += 1;
    }
    n
}

/// Closure of a generating set of permutations under composition.
fn generate(gens: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n = gens[0].len() as u8;
    let id: Vec<u8> = (0..n).collect();
    let mut elems = vec![id];
    let mut frontier = elems.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for e in &frontier {
            for g in gens {
                let h = compose(g, e);
                if !elems.contains(&h) {
                    elems.push(h.clone());
                    next.push(h);
                }
            }
        }
        frontier = next;
    }
    elems
}

fn invariants_of(gens: &[Vec<u8>]) -> GroupInvariants {
    let elems = generate(gens);
    let mut orders: Vec<u32> = elems.iter().map(|e| perm_order(e)).collect();
    orders.sort_unstable();
    let mut element_orders: Vec<(u32, u32)> = Vec::new();
    for o in orders {
        match element_orders.last_mut() {
            Some((v, c)) if *v == o => *c += 1,
            _ => element_orders.push((o, 1)),
        }
    }
    let abelian = gens.iter().enumerate().all(|(i, a)| {
        gens[i..]
            .iter()
            .all(|b| compose(a, b) == compose(b, a))
    });
    GroupInvariants {
        order: elems.len() as u32,
        abelian,
        element_orders,
    }
}

/// The five candidate groups of the classification with their invariants.
pub fn candidate_groups() -> Vec<(&'static str, GroupInvariants)> {
    let z2cubed = vec![
        vec![1, 0, 2, 3, 4, 5],
        vec![0, 1, 3, 2, 4, 5],
        vec![0, 1, 2, 3, 5, 4],
    ];
    let d12 = vec![vec![1, 2, 3, 4, 5, 0], vec![0, 5, 4, 3, 2, 1]];
    let z2_d8 = vec![
        vec![1, 0, 2, 3, 4, 5],
        vec![0, 1, 3, 4, 5, 2],
        vec![0, 1, 5, 4, 3, 2],
    ];
    let s4 = vec![vec![1, 0, 2, 3], vec![1, 2, 3, 0]];
    let z2_s4 = vec![
        vec![1, 0, 2, 3, 4, 5],
        vec![0, 1, 3, 2, 4, 5],
        vec![0, 1, 3, 4, 5, 2],
    ];
    vec![
        ("Z2xZ2xZ2", invariants_of(&z2cubed)),
        ("D12", invariants_of(&d12)),
        ("Z2xD8", invariants_of(&z2_d8)),
        ("S4", invariants_of(&s4)),
        ("Z2xS4", invariants_of(&z2_s4)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_invariants() {
        let cands = candidate_groups();
        let get = |name: &str| cands.iter().find(|(n, _)| *n == name).unwrap().1.clone();

        let z2c = get("Z2xZ2xZ2");
        assert_eq!(z2c.order, 8);
        assert!(z2c.abelian);
        assert_eq!(z2c.element_orders, vec![(1, 1), (2, 7)]);

        let d12 = get("D12");
        assert_eq!(d12.order, 12);
        assert!(!d12.abelian);
        assert_eq!(d12.element_orders, vec![(1, 1), (2, 7), (3, 2), (6, 2)]);

        let z2d8 = get("Z2xD8");
        assert_eq!(z2d8.order, 16);
        assert!(!z2d8.abelian);
        assert_eq!(z2d8.element_orders, vec![(1, 1), (2, 11), (4, 4)]);

        let s4 = get("S4");
        assert_eq!(s4.order, 24);
        assert!(!s4.abelian);
        assert_eq!(s4.element_orders, vec![(1, 1), (2, 9), (3, 8), (4, 6)]);

        let z2s4 = get("Z2xS4");
        assert_eq!(z2s4.order, 48);
        assert!(!z2s4.abelian);
        assert_eq!(
            z2s4.element_orders,
            vec![(1, 1), (2, 19), (3, 8), (4, 12), (6, 8)]
        );
    }

    #[test]
    fn invariants_distinguish_all_candidates() {
        let cands = candidate_groups();
        for i in 0..cands.len() {
            for j in (i + 1)..cands.len() {
                assert_ne!(cands[i].1, cands[j].1, "{} vs {}", cands[i].0, cands[j].0);
            }
        }
    }
}
