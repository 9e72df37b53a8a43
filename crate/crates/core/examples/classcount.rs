// Probe: verify the class generating function and the survivor counts of
// the projectibility and Hadamard filters over the full 2^26 mask space.
use octawalk_core::reduce::{hadamard_decompose, projectible};
use octawalk_core::stepset::{is_class_representative, StepSet, MASK_LIMIT};

fn main() {
    let expected_classes: [u64; 24] = [
        73, 979, 6425, 28071, 91372, 234716, 492168, 860382, 1271488, 1603184, 1734396, 1614372,
        1293402, 890395, 524638, 263008, 111251, 39256, 11390, 2676, 500, 73, 9, 1,
    ];
    let expected_3d: [u64; 24] = [
        1, 220, 2852, 17731, 70590, 203965, 457650, 830571, 1251613, 1593013, 1730461, 1613252,
        1293178, 890366, 524636, 263008, 111251, 39256, 11390, 2676, 500, 73, 9, 1,
    ];
    let expected_nonhad: [u64; 24] = [
        1, 193, 2680, 17238, 69542, 202072, 454485, 826005, 1245615, 1585989, 1722891, 1605940,
        1286692, 885048, 520725, 260374, 109625, 38377, 10960, 2488, 436, 54, 4, 0,
    ];
    let mut classes = [0u64; 27];
    let mut three_d = [0u64; 27];
    let mut nonhad = [0u64; 27];
    let t0 = std::time::Instant::now();
    for mask in 1..MASK_LIMIT {
        let s = StepSet::from_mask(mask).unwrap();
        if !is_class_representative(&s) {
            continue;
        }
        let k = s.len() as usize;
        classes[k] += 1;
        if projectible(&s).is_none() {
            three_d[k] += 1;
            if hadamard_decompose(&s).is_none() {
                nonhad[k] += 1;
            }
        }
    }
    println!("sweep took {:?}", t0.elapsed());
    let mut ok = true;
    for k in 3..=26 {
        let e = (
            expected_classes[k - 3],
            expected_3d[k - 3],
            expected_nonhad[k - 3],
        );
        let g = (classes[k], three_d[k], nonhad[k]);
        let m = if (g.0, g.1, g.2) == e { "ok" } else { ok = false; "MISMATCH" };
        println!("k={k:2}  classes {:8} (exp {:8})  3d {:8} (exp {:8})  nonHad {:8} (exp {:8})  {m}",
            g.0, e.0, g.1, e.1, g.2, e.2);
    }
    println!("totals: classes {}  3d {}  nonHad {}",
        classes.iter().sum::<u64>(), three_d.iter().sum::<u64>(), nonhad.iter().sum::<u64>());
    println!("{}", if ok { "ALL MATCH" } else { "MISMATCHES PRESENT" });
}
