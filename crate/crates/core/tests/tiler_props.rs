use std::collections::BTreeMap;

use latile_core::kernels::tiles::for_each_tile;
use latile_core::tiler::{AccessMode, AffineExpr, ArrayAccess, Loop, PlanOptions, TileError, TileLevel};
use latile_core::{footprint, plan_tiles, tile_nest, CacheProfile, LoopNest, PatternKind, TilePlan};
use proptest::prelude::*;

fn gemm(n: i64) -> LoopNest {
    let v = AffineExpr::var;
    LoopNest {
        loops: vec![Loop::new("i", 0, n), Loop::new("j", 0, n), Loop::new("k", 0, n)],
        accesses: vec![
            ArrayAccess::new("C", vec![v("i"), v("j")], AccessMode::ReadWrite),
            ArrayAccess::new("A", vec![v("i"), v("k")], AccessMode::Read),
            ArrayAccess::new("B", vec![v("k"), v("j")], AccessMode::Read),
        ],
        body_flops: 2,
    }
}

fn profile(l1: usize) -> CacheProfile {
    CacheProfile {
        l1_bytes: l1,
        l2_bytes: l1 * 16,
        l3_bytes: l1 * 512,
        confidences: [0.4, 0.3, 0.3],
        source_pattern: PatternKind::Cyclic,
        created_at: 0,
        host_label: String::new(),
    }
}

fn plan(nest: &LoopNest, l1: usize, safety: f64) -> TilePlan {
    plan_tiles(nest, &profile(l1), safety, &PlanOptions::default()).unwrap()
}

/// Multiset of iteration vectors over the original loops.
fn iterations(nest: &LoopNest, names: &[String]) -> Vec<Vec<i64>> {
    let mut v = nest.iteration_points(names).unwrap();
    v.sort();
    v
}

#[test]
fn gemm_at_32k_half_gets_26() {
    let nest = gemm(1000);
    let p = plan(&nest, 32 << 10, 0.5);
    assert_eq!(p.levels[0].tile, 26);
    let t27: BTreeMap<String, i64> = ["i", "j", "k"].iter().map(|n| (n.to_string(), 27)).collect();
    assert!(footprint(&nest, &t27).unwrap() > 16384);
}

#[test]
fn no_tile_fits_gives_untiled_plan() {
    let p = plan(&gemm(100), 16, 0.5);
    assert!(!p.is_tiled());
    assert!(p.diagnostic.is_some());
}

#[test]
fn override_rejects_unknown_loop() {
    let nest = gemm(100);
    let mut p = plan(&nest, 32 << 10, 0.5);
    assert_eq!(p.override_tile(&nest, "z", 4), Err(TileError::UnknownLoop("z".into())));
    assert!(p.override_tile(&nest, "i", 101).is_err());
    p.override_tile(&nest, "i", 36).unwrap();
    assert_eq!(p.levels[0].tile_sizes["i"], 36);
}

#[test]
fn tiled_nest_runs_tiles_in_helper_order() {
    let v = AffineExpr::var;
    let nest = LoopNest {
        loops: vec![Loop::new("i", 0, 11), Loop::new("j", 0, 7)],
        accesses: vec![ArrayAccess::new("A", vec![v("i"), v("j")], AccessMode::Read)],
        body_flops: 1,
    };
    let p = TilePlan {
        levels: vec![TileLevel {
            cache_level: 1,
            tile: 3,
            tile_sizes: [("i".to_string(), 3), ("j".to_string(), 3)].into(),
            footprint_bytes: 72,
            capacity_bytes: 1 << 20,
        }],
        ..TilePlan::untiled(0.5, "")
    };
    let tiled = tile_nest(&nest, &p).unwrap();
    let got = tiled.iteration_points(&["i".into(), "j".into()]).unwrap();
    let mut want = Vec::new();
    for_each_tile([0..11, 0..7], &[[3, 3]], &mut |[ri, rj]| {
        for i in ri {
            for j in rj.clone() {
                want.push(vec![i as i64, j as i64]);
            }
        }
    });
    assert_eq!(got, want);
}

fn random_nest() -> impl Strategy<Value = LoopNest> {
    (1usize..=4)
        .prop_flat_map(|depth| prop::collection::vec((-3i64..3, 1i64..12), depth))
        .prop_map(|bounds| {
            let names = ["a", "b", "c", "d"];
            let loops: Vec<Loop> = bounds
                .iter()
                .enumerate()
                .map(|(i, &(lo, ext))| Loop::new(names[i], lo, lo + ext))
                .collect();
            let v = AffineExpr::var;
            let mut accesses = vec![ArrayAccess::new(
                "X",
                loops.iter().map(|l| v(&l.name)).collect(),
                AccessMode::ReadWrite,
            )];
            if loops.len() > 1 {
                accesses.push(ArrayAccess::new(
                    "Y",
                    vec![AffineExpr::offset(&loops[1].name, 1)],
                    AccessMode::Read,
                ));
            }
            LoopNest {
                loops,
                accesses,
                body_flops: 1,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn plan_is_largest_feasible_uniform_tile(cap in 1024usize..(8 << 20), safety in 0.05f64..=1.0) {
        let nest = gemm(2000);
        let p = plan(&nest, cap, safety);
        let budget = safety * cap as f64;
        let mut best = 0i64;
        for t in 1..=2000i64 {
            if (24 * t * t) as f64 <= budget {
                best = t;
            }
        }
        if best == 0 {
            prop_assert!(!p.is_tiled());
        } else {
            prop_assert_eq!(p.levels[0].tile, best);
            prop_assert!((p.levels[0].footprint_bytes as f64) <= budget);
            prop_assert!(p.verify(&nest).is_ok());
        }
    }

    #[test]
    fn tiling_preserves_iterations(
        nest in random_nest(),
        sizes in prop::collection::vec(1i64..13, 4),
        extra in prop::collection::vec(0i64..13, 4),
        two in any::<bool>(),
    ) {
        let names = nest.loop_names();
        let inner: BTreeMap<String, i64> = nest
            .loops
            .iter()
            .zip(&sizes)
            .map(|(l, &t)| (l.name.clone(), t.min(l.extent())))
            .collect();
        let mut levels = vec![TileLevel {
            cache_level: 1,
            tile: 1,
            tile_sizes: inner.clone(),
            footprint_bytes: 0,
            capacity_bytes: 0,
        }];
        if two {
            levels.push(TileLevel {
                cache_level: 2,
                tile: 2,
                tile_sizes: inner.iter().zip(&extra).map(|((n, &t), &e)| (n.clone(), t + e)).collect(),
                footprint_bytes: 0,
                capacity_bytes: 0,
            });
        }
        let p = TilePlan { levels, ..TilePlan::untiled(0.5, "") };
        let tiled = tile_nest(&nest, &p).unwrap();
        prop_assert_eq!(tiled.accesses.clone(), nest.accesses.clone());
        prop_assert_eq!(iterations(&tiled, &names), iterations(&nest, &names));
    }

    #[test]
    fn plans_and_nests_round_trip(nest in random_nest(), cap in 4096usize..(1 << 22), levels in 1usize..=3) {
        let opts = PlanOptions { levels, ..PlanOptions::default() };
        let p = plan_tiles(&nest, &profile(cap), 0.5, &opts).unwrap();
        let back: TilePlan = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(back, p);
        let back: LoopNest = serde_json::from_str(&serde_json::to_string(&nest).unwrap()).unwrap();
        prop_assert_eq!(back, nest);
    }
}
