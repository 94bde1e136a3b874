mod common;

use common::*;
use ghost_ising::events::{
    block_good, connected, connected_to_ghost, detect_event_f, detect_event_g, detect_necklace, necklace,
    validate_report, EventKind, NecklaceQuery,
};
use ghost_ising::{build_graph, Boundary, FkConfig, GhostGraph, LatticeSpec, Region, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(w: usize, h: usize) -> GhostGraph {
    build_graph(LatticeSpec::new(w, h, Boundary::Free).unwrap()).unwrap()
}

/// Annuli whose hole keeps a one-site margin from the lattice edge; the
/// outer square may be clipped.
fn random_annulus(spec: &LatticeSpec, rng: &mut impl Rng) -> Region {
    loop {
        let inner = rng.gen_range(1..=3i64);
        let outer = inner + rng.gen_range(1..=4i64);
        let cx = rng.gen_range(0..spec.width as i64);
        let cy = rng.gen_range(0..spec.height as i64);
        let fits = cx - inner >= 0 && cy - inner >= 0 && cx + inner < spec.width as i64 && cy + inner < spec.height as i64;
        if fits {
            return Region::annulus((cx, cy), inner, outer).unwrap();
        }
    }
}

#[test]
fn connected_matches_dfs() {
    let g = graph(5, 5);
    let spec = *g.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let full = Region::full(&spec);
    for _ in 0..200 {
        let fk = random_fk(&g, 0.45, 0.15, &mut rng);
        let label = dfs_clusters(&g, &fk, &full);
        let ghost = ghost_connected_sites(&g, &fk, &full);
        let x = rng.gen_range(0..25);
        let y = rng.gen_range(0..25);
        assert_eq!(
            connected(&g, &fk, spec.site(x), spec.site(y), &full).unwrap(),
            label[x] == label[y]
        );
        assert_eq!(connected_to_ghost(&g, &fk, spec.site(x), &full).unwrap(), ghost[x]);
    }
}

#[test]
fn event_f_matches_cluster_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut hits = 0;
    for case in 0..300 {
        let (w, h) = (rng.gen_range(5..=11), rng.gen_range(5..=11));
        let g = graph(w, h);
        let region = random_annulus(g.spec(), &mut rng);
        let fk = random_fk(&g, rng.gen_range(0.4..0.8), rng.gen_range(0.0..0.1), &mut rng);
        let report = detect_event_f(&g, &fk, &region).unwrap();
        assert_eq!(report.occurred, brute_f(&g, &fk, &region), "case {case}");
        validate_report(&g, &fk, &region, EventKind::F, &report).unwrap();
        hits += usize::from(report.occurred);
    }
    assert!(hits > 30 && hits < 270, "{hits} occurrences is not a useful mix");
}

#[test]
fn event_g_matches_star_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut hits = 0;
    for case in 0..300 {
        let (w, h) = (rng.gen_range(5..=11), rng.gen_range(5..=11));
        let g = graph(w, h);
        let region = random_annulus(g.spec(), &mut rng);
        let fk = random_fk(&g, rng.gen_range(0.3..0.8), rng.gen_range(0.05..0.5), &mut rng);
        let report = detect_event_g(&g, &fk, &region).unwrap();
        assert_eq!(report.occurred, brute_g(&g, &fk, &region), "case {case}");
        validate_report(&g, &fk, &region, EventKind::G, &report).unwrap();
        hits += usize::from(report.occurred);
    }
    assert!(hits > 30 && hits < 270, "{hits} occurrences is not a useful mix");
}

#[test]
fn event_g_duality_exhaustive_on_twelve_free_edges() {
    // 5x5 annulus around the centre site; 12 edges vary, the rest are fixed
    let g = graph(5, 5);
    let region = Region::annulus((2, 2), 1, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..3 {
        let base = random_fk(&g, 0.5, 0.2, &mut rng);
        let total = g.num_internal() + g.num_sites();
        let mut free: Vec<usize> = (0..total).collect();
        for i in 0..12 {
            let j = rng.gen_range(i..total);
            free.swap(i, j);
        }
        free.truncate(12);
        for bits in 0u32..1 << 12 {
            let mut fk = base.clone();
            for (k, &e) in free.iter().enumerate() {
                let open = bits >> k & 1 == 1;
                if e < g.num_internal() {
                    fk.internal[e] = open;
                } else {
                    fk.external[e - g.num_internal()] = open;
                }
            }
            let report = detect_event_g(&g, &fk, &region).unwrap();
            assert_eq!(report.occurred, brute_g(&g, &fk, &region));
        }
    }
}

#[test]
fn necklace_matches_subset_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let g = graph(12, 12);
    let (mut checked, mut hits) = (0, 0);
    while checked < 200 {
        let inner = rng.gen_range(1..=3);
        let region = Region::annulus((rng.gen_range(4..8), rng.gen_range(4..8)), inner, inner + rng.gen_range(2..=4)).unwrap();
        let fk = random_fk(&g, rng.gen_range(0.45..0.75), 0.2, &mut rng);
        let k = rng.gen_range(1..=4);
        let min_mass = rng.gen_range(2..=8) as f64;
        let ghost_only = rng.gen_bool(0.3);
        let Some(expected) = brute_necklace(&g, &fk, &region, k, min_mass, ghost_only, 12) else {
            continue;
        };
        let q = NecklaceQuery {
            max_clusters: k,
            min_mass,
            ghost_only,
        };
        let report = necklace(&g, &fk, &region, &q).unwrap();
        assert_eq!(report.occurred, expected, "case {checked}: k={k} mass={min_mass} ghost={ghost_only}");
        validate_report(&g, &fk, &region, EventKind::Necklace(q), &report).unwrap();
        checked += 1;
        hits += usize::from(expected);
    }
    assert!(hits > 20 && hits < 180, "{hits} occurrences is not a useful mix");
}

#[test]
fn necklace_trivial_examples() {
    let g = graph(9, 9);
    let region = Region::annulus((4, 4), 2, 4).unwrap();
    let open = FkConfig::open(&g);
    let r = detect_necklace(&g, &open, &region, 1, 10.0).unwrap();
    assert!(r.occurred);
    let closed = FkConfig::closed(&g);
    assert!(!detect_necklace(&g, &closed, &region, 5, 2.0).unwrap().occurred);
    assert!(detect_necklace(&g, &closed, &region, 0, 2.0).is_err());
}

#[test]
fn block_good_is_a_ghost_necklace_without_mass_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let g = graph(12, 12);
    let mut hits = 0;
    for _ in 0..100 {
        let fk = random_fk(&g, rng.gen_range(0.4..0.8), rng.gen_range(0.05..0.4), &mut rng);
        let n = rng.gen_range(1..=3usize);
        let corner = Site::new(rng.gen_range(0..12 - 3 * n), rng.gen_range(0..12 - 3 * n));
        let region = Region::block_annulus((corner.col as i64, corner.row as i64), n as i64).unwrap();
        let q = NecklaceQuery {
            max_clusters: usize::MAX,
            min_mass: f64::NEG_INFINITY,
            ghost_only: true,
        };
        let good = block_good(&g, &fk, corner, n).unwrap();
        assert_eq!(good, necklace(&g, &fk, &region, &q).unwrap().occurred);
        assert_eq!(good, brute_g(&g, &fk, &region));
        hits += usize::from(good);
    }
    assert!(hits > 5 && hits < 95, "{hits}");
}

#[test]
fn ghost_circuit_blocks_ghost_free_crossings() {
    // a G circuit in A(L, 2L) cuts every F crossing of A(1, 2L)
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let g = graph(13, 13);
    let mut both_checked = 0;
    for _ in 0..400 {
        let fk = random_fk(&g, rng.gen_range(0.5..0.8), rng.gen_range(0.0..0.3), &mut rng);
        let l = rng.gen_range(2..=3);
        let ring = Region::annulus((6, 6), l, 2 * l).unwrap();
        let wide = Region::annulus((6, 6), 1, 2 * l).unwrap();
        if detect_event_g(&g, &fk, &ring).unwrap().occurred {
            both_checked += 1;
            assert!(!detect_event_f(&g, &fk, &wide).unwrap().occurred);
        }
    }
    assert!(both_checked > 10);
}
