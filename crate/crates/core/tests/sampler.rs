use ghost_ising::estimators::mean_estimate;
use ghost_ising::exact::{enumerate_fk_ghost, enumerate_ising};
use ghost_ising::fk::{run_chain, sample_chain, sw_step, Algorithm, BurnIn, Observable, Schedule};
use ghost_ising::lattice::EdgeRef;
use ghost_ising::{build_graph, Boundary, ChainState, FieldParams, GhostGraph, LatticeSpec};
use proptest::prelude::*;

fn graph(w: usize, h: usize, b: Boundary) -> GhostGraph {
    build_graph(LatticeSpec::new(w, h, b).unwrap()).unwrap()
}

fn spin(bits: u64, i: usize) -> f64 {
    if bits >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Chain means of magnetization, one spin product and the energy against
/// exact enumeration, within `z` standard errors.
fn check_against_exact(g: &GhostGraph, p: &FieldParams, algorithm: Algorithm, sweeps: u64, seed: u64, z: f64) {
    let n = g.num_sites();
    let exact = enumerate_ising(g, p).unwrap();
    let mag = exact.expectation(|b| (0..n).map(|i| spin(b, i)).sum::<f64>() / n as f64);
    let corner = exact.expectation(|b| spin(b, 0) * spin(b, n - 1));
    let energy = exact.expectation(|b| {
        -g.internal_edges()
            .iter()
            .map(|&[u, v]| spin(b, u as usize) * spin(b, v as usize))
            .sum::<f64>()
            / n as f64
    });
    let schedule = Schedule {
        sweeps,
        burn_in: BurnIn::Fixed(100),
        thin: 1,
        algorithm,
    };
    let obs = [Observable::Magnetization, Observable::SpinProduct(0, n - 1), Observable::Energy];
    let out = sample_chain(g, p, &schedule, seed, &obs).unwrap();
    for (col, target) in out.columns.iter().zip([mag, corner, energy]) {
        let est = mean_estimate(col).unwrap();
        assert!(
            est.deviation(target) < z,
            "{:?} {algorithm:?}: {} +- {} vs {target}",
            g.spec(),
            est.mean,
            est.std_error
        );
    }
}

#[test]
fn swendsen_wang_matches_enumeration_on_every_boundary() {
    let specs = [
        (2, 2, Boundary::Free),
        (3, 3, Boundary::Free),
        (3, 2, Boundary::Periodic),
        (3, 3, Boundary::PlusSpin),
        (3, 3, Boundary::WiredFk),
        (3, 3, Boundary::Cylinder),
    ];
    for (i, (w, h, b)) in specs.into_iter().enumerate() {
        for big_h in [0.0, 0.1, 0.5] {
            let g = graph(w, h, b);
            check_against_exact(&g, &FieldParams::critical(big_h).unwrap(), Algorithm::SwendsenWang, 40_000, 100 + i as u64, 4.0);
        }
    }
}

#[test]
fn wolff_matches_enumeration_at_zero_field() {
    for (w, h, b) in [(3, 3, Boundary::Free), (3, 3, Boundary::Periodic), (4, 2, Boundary::Cylinder)] {
        let g = graph(w, h, b);
        check_against_exact(&g, &FieldParams::critical(0.0).unwrap(), Algorithm::Wolff, 60_000, 7, 4.0);
    }
}

#[test]
fn bond_frequencies_match_the_fk_marginal() {
    let g = graph(3, 2, Boundary::Free);
    let p = FieldParams::critical(0.2).unwrap();
    let fk = enumerate_fk_ghost(&g, &p).unwrap();
    let (m, n) = (g.num_internal(), g.num_sites());
    let order = g.canonical_edges();
    let mut counts = vec![0u64; m + n];
    let mut total = 0u64;
    run_chain(&g, &p, &Schedule::sw(50_000, 100, 1), 3, |state, _| {
        total += 1;
        for (e, &open) in state.bonds.internal.iter().enumerate() {
            counts[e] += u64::from(open);
        }
        for (v, &open) in state.bonds.external.iter().enumerate() {
            counts[m + v] += u64::from(open);
        }
    })
    .unwrap();
    for (k, edge) in order.iter().enumerate() {
        let idx = match *edge {
            EdgeRef::Internal(e) => e as usize,
            EdgeRef::External(v) => m + v as usize,
        };
        let freq = counts[idx] as f64 / total as f64;
        let p_exact = fk.event_probability(|b| b >> k & 1 == 1);
        // generous binomial bound; consecutive sweeps are correlated
        let se = (p_exact * (1.0 - p_exact) / total as f64).sqrt() * 4.0;
        assert!((freq - p_exact).abs() < 5.0 * se + 1e-3, "edge {edge:?}: {freq} vs {p_exact}");
    }
}

#[test]
fn bonds_stay_consistent_with_spins() {
    let g = graph(6, 5, Boundary::Free);
    let p = FieldParams::critical(0.3).unwrap();
    let mut state = ChainState::new(&g, 9);
    for _ in 0..200 {
        sw_step(&mut state, &g, &p).unwrap();
        assert_eq!(state.consistency_violation(&g), None);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn checkpoint_bytes_round_trip(seed: u64, steps in 0usize..20, w in 1usize..6, h in 1usize..6, big_h in 0.0f64..1.0) {
        let g = graph(w, h, Boundary::Free);
        let p = FieldParams::critical(big_h).unwrap();
        let mut state = ChainState::new(&g, seed);
        for _ in 0..steps {
            sw_step(&mut state, &g, &p).unwrap();
        }
        let bytes = state.to_bytes(&g).unwrap();
        let (spec, mut restored) = ChainState::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&spec, g.spec());
        prop_assert_eq!(restored.to_bytes(&g).unwrap(), bytes);
        // the restored chain continues identically
        sw_step(&mut state, &g, &p).unwrap();
        sw_step(&mut restored, &g, &p).unwrap();
        prop_assert_eq!(state.to_bytes(&g).unwrap(), restored.to_bytes(&g).unwrap());
    }

    #[test]
    fn truncated_checkpoints_are_rejected(seed: u64, cut in 1usize..16) {
        let g = graph(3, 3, Boundary::Free);
        let bytes = ChainState::new(&g, seed).to_bytes(&g).unwrap();
        prop_assert!(ChainState::from_bytes(&bytes[..bytes.len().saturating_sub(cut)]).is_err());
    }
}
