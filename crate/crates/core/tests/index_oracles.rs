use nrchain_core::st_index::{
    neighbor_pairs, read_pairs_bin, write_pairs_bin, Box3, PairLimits, RTree3, RTreeParams, STPoint,
};
use nrchain_testkit::{pairs_double_loop, range_linear, Pt};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clustered(n: usize, seed: u64) -> Vec<STPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<[f64; 3]> = (0..n / 20 + 1)
        .map(|_| [rng.gen_range(0.0..5_000.0), rng.gen_range(0.0..5_000.0), rng.gen_range(0.0..200.0)])
        .collect();
    (0..n)
        .map(|i| {
            let c = centres[rng.gen_range(0..centres.len())];
            STPoint {
                event_id: i as u32,
                x: c[0] + rng.gen_range(-150.0..150.0),
                y: c[1] + rng.gen_range(-150.0..150.0),
                t: c[2] + rng.gen_range(-15.0..15.0),
            }
        })
        .collect()
}

fn plain(points: &[STPoint]) -> Vec<Pt> {
    points
        .iter()
        .map(|p| Pt {
            id: p.event_id,
            x: p.x,
            y: p.y,
            t: p.t,
        })
        .collect()
}

#[test]
fn range_queries_match_linear_scan() {
    let points = clustered(3_000, 11);
    let flat = plain(&points);
    for fanout in [4, 9, 16, 33] {
        let tree = RTree3::build(&points, RTreeParams::with_fanout(fanout)).unwrap();
        tree.check_invariants().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(fanout as u64);
        for _ in 0..200 {
            let lo = [rng.gen_range(-100.0..5_000.0), rng.gen_range(-100.0..5_000.0), rng.gen_range(-10.0..200.0)];
            let span = [rng.gen_range(0.0..800.0), rng.gen_range(0.0..800.0), rng.gen_range(0.0..40.0)];
            let hi = [lo[0] + span[0], lo[1] + span[1], lo[2] + span[2]];
            assert_eq!(tree.range_query(&Box3::new(lo, hi)), range_linear(&flat, lo, hi));
        }
    }
}

#[test]
fn pairs_match_double_loop_on_clustered_data() {
    let points = clustered(2_000, 12);
    let tree = RTree3::build(&points, RTreeParams::default()).unwrap();
    for (rx, ry, rt) in [(100.0, 100.0, 10.0), (50.0, 200.0, 3.0), (1.0, 1.0, 0.5)] {
        let got = neighbor_pairs(&tree, &points, PairLimits::new(rx, ry, rt).unwrap());
        assert_eq!(got, pairs_double_loop(&plain(&points), rx, ry, rt));
    }
}

#[test]
fn pairs_on_boundary_are_included() {
    // Offsets exactly equal to the limits, on a grid that makes them exact.
    let points: Vec<STPoint> = (0..50)
        .map(|i| STPoint {
            event_id: i,
            x: (i % 5) as f64 * 25.0,
            y: (i / 5 % 5) as f64 * 25.0,
            t: (i / 25) as f64 * 2.0,
        })
        .collect();
    let tree = RTree3::build(&points, RTreeParams::default()).unwrap();
    let got = neighbor_pairs(&tree, &points, PairLimits::new(25.0, 25.0, 2.0).unwrap());
    assert_eq!(got, pairs_double_loop(&plain(&points), 25.0, 25.0, 2.0));
}

#[test]
fn inserted_tree_answers_like_bulk_tree() {
    let points = clustered(1_500, 13);
    let bulk = RTree3::build(&points, RTreeParams::default()).unwrap();
    let mut grown = RTree3::empty(RTreeParams::default()).unwrap();
    for p in &points {
        grown.insert(*p);
    }
    grown.check_invariants().unwrap();
    let limits = PairLimits::new(100.0, 100.0, 10.0).unwrap();
    assert_eq!(neighbor_pairs(&grown, &points, limits), neighbor_pairs(&bulk, &points, limits));
}

#[test]
fn pairs_bin_round_trip() {
    let points = clustered(500, 14);
    let tree = RTree3::build(&points, RTreeParams::default()).unwrap();
    let pairs = neighbor_pairs(&tree, &points, PairLimits::new(100.0, 100.0, 10.0).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.bin");
    write_pairs_bin(std::fs::File::create(&path).unwrap(), &pairs).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 + 8 * pairs.len() as u64);
    assert_eq!(read_pairs_bin(std::fs::File::open(&path).unwrap()).unwrap(), pairs);
}

fn arb_points() -> impl Strategy<Value = Vec<STPoint>> {
    prop::collection::vec((0.0..300.0f64, 0.0..300.0f64, 0.0..30.0f64), 1..250).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (x, y, t))| STPoint {
                event_id: i as u32,
                x,
                y,
                t,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn bulk_tree_invariants_hold(points in arb_points(), fanout in 4usize..20) {
        let tree = RTree3::build(&points, RTreeParams::with_fanout(fanout)).unwrap();
        prop_assert_eq!(tree.len(), points.len());
        prop_assert!(tree.check_invariants().is_ok());
    }

    #[test]
    fn pair_set_equals_double_loop(points in arb_points(), r in (1.0..80.0f64, 1.0..80.0f64, 0.5..8.0f64)) {
        let tree = RTree3::build(&points, RTreeParams::default()).unwrap();
        let got = neighbor_pairs(&tree, &points, PairLimits::new(r.0, r.1, r.2).unwrap());
        prop_assert_eq!(got, pairs_double_loop(&plain(&points), r.0, r.1, r.2));
    }
}
