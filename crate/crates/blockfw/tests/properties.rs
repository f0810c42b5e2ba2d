//! Property tests for the structural invariants: partition algebra, PSD
//! projection geometry, decomposition round trips, and SDPA serialization.

use blockfw::cone::FwDecomposition;
use blockfw::io;
use blockfw::linalg::{dist_psd, project_psd, SymMatrix};
use blockfw::partition::{block_permute, invert_perm, is_sub_partition, Partition};
use blockfw::solver::ConicProgram;
use proptest::prelude::*;

fn sym_from_seed(n: usize, vals: &[f64]) -> SymMatrix {
    let mut k = 0;
    SymMatrix::from_fn(n, |_, _| {
        let v = vals[k % vals.len()];
        k += 1;
        v
    })
}

prop_compose! {
    fn arb_sizes()(p in 1usize..6, extra in proptest::collection::vec(1usize..4, 6)) -> Vec<usize> {
        extra.into_iter().take(p).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balanced_partition_invariants(n in 1usize..40, p_raw in 1usize..40) {
        let p = p_raw.min(n);
        let part = Partition::balanced(n, p).unwrap();
        prop_assert_eq!(part.block_count(), p);
        prop_assert_eq!(part.sizes().iter().sum::<usize>(), n);
        let lo = n / p;
        let hi = lo + usize::from(n % p != 0);
        for w in part.sizes().windows(2) {
            prop_assert!(w[0] <= w[1], "smaller blocks first");
        }
        for &k in part.sizes() {
            prop_assert!(k == lo || k == hi);
        }
        // The trivial partition refines every balanced one.
        let trivial = Partition::trivial(n).unwrap();
        prop_assert!(is_sub_partition(&trivial, &part).unwrap().is_some());
    }

    #[test]
    fn pair_ranges_cover_blocks_p_minus_one_times(sizes in arb_sizes()) {
        let part = Partition::new(sizes).unwrap();
        let p = part.block_count();
        if p >= 2 {
            let mut count = vec![0usize; part.n()];
            for (i, j) in part.pairs() {
                for t in part.pair_indices(i, j) {
                    count[t] += 1;
                }
            }
            prop_assert!(count.iter().all(|&c| c == p - 1));
        }
    }

    #[test]
    fn projection_distance_consistency(vals in proptest::collection::vec(-2.0f64..2.0, 36)) {
        let a = sym_from_seed(6, &vals);
        let proj = project_psd(&a).unwrap();
        // Projection is PSD and realizes the distance.
        prop_assert!(proj.min_eig().unwrap() >= -1e-9 * (1.0 + proj.fro_norm()));
        let d = dist_psd(&a).unwrap();
        prop_assert!((d - a.sub(&proj).fro_norm()).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn dist_psd_is_lipschitz(
        va in proptest::collection::vec(-2.0f64..2.0, 25),
        vb in proptest::collection::vec(-2.0f64..2.0, 25),
    ) {
        let a = sym_from_seed(5, &va);
        let b = sym_from_seed(5, &vb);
        let da = dist_psd(&a).unwrap();
        let db = dist_psd(&b).unwrap();
        prop_assert!((da - db).abs() <= a.sub(&b).fro_norm() + 1e-10);
    }

    #[test]
    fn recompose_of_psd_lifts_is_psd(
        sizes in arb_sizes(),
        vals in proptest::collection::vec(-1.0f64..1.0, 128),
    ) {
        let part = Partition::new(sizes).unwrap();
        if part.block_count() >= 2 {
            let mut dec = FwDecomposition::new(part.clone());
            let mut cursor = 0usize;
            for (i, j) in part.pairs() {
                let d = part.sizes()[i] + part.sizes()[j];
                let g = SymMatrix::from_fn(d, |_, _| {
                    let v = vals[cursor % vals.len()];
                    cursor += 1;
                    v
                });
                let psd = SymMatrix::from_fn(d, |r, c| {
                    (0..d).map(|k| g.get(r, k) * g.get(c, k)).sum()
                });
                dec.insert_block(i, j, psd).unwrap();
            }
            let m = dec.recompose();
            prop_assert!(m.min_eig().unwrap() >= -1e-8 * (1.0 + m.fro_norm()));
            // The decomposition validates against its own recomposition.
            let report = dec.validate(&m, 1e-9 * (1.0 + m.fro_norm())).unwrap();
            prop_assert!(report.passes);
        }
    }

    #[test]
    fn block_permutation_round_trip(
        sizes in arb_sizes(),
        vals in proptest::collection::vec(-2.0f64..2.0, 64),
        seed in 0u64..1000,
    ) {
        let part = Partition::new(sizes).unwrap();
        let a = sym_from_seed(part.n(), &vals);
        let p = part.block_count();
        let mut perm: Vec<usize> = (0..p).collect();
        // Cheap deterministic shuffle.
        for i in (1..p).rev() {
            perm.swap(i, (seed as usize + 7 * i) % (i + 1));
        }
        let (b, beta) = block_permute(&part, &perm, &a).unwrap();
        let (back, gamma) = block_permute(&beta, &invert_perm(&perm), &b).unwrap();
        prop_assert_eq!(gamma, part);
        prop_assert!(back.sub(&a).fro_norm() == 0.0);
    }

    #[test]
    fn sdpa_serialization_round_trips(
        vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 20),
        rhs in proptest::num::f64::NORMAL,
    ) {
        let c0 = sym_from_seed(3, &vals);
        let mut prog = ConicProgram::new(vec![3, 1], vec![c0, SymMatrix::from_diag(&[vals[0]])])
            .unwrap();
        let a0 = sym_from_seed(3, &vals[5..]);
        prog.add_constraint(vec![a0, SymMatrix::from_diag(&[vals[1]])], rhs).unwrap();
        let text = io::serialize_sdpa(&prog);
        let back = io::parse_sdpa(&text).unwrap().to_program().unwrap();
        for (x, y) in prog.objective().iter().zip(back.objective()) {
            prop_assert!(x.sub(y).fro_norm() == 0.0);
        }
        for (cx, cy) in prog.constraints().iter().zip(back.constraints()) {
            prop_assert_eq!(cx.rhs.to_bits(), cy.rhs.to_bits());
            for (x, y) in cx.data.iter().zip(&cy.data) {
                prop_assert!(x.sub(y).fro_norm() == 0.0);
            }
        }
    }
}
