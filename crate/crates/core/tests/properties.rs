//! Property-based checks of the invariants the rest of the system leans on:
//! storage round-trips, threshold monotonicity of the rule taxonomy,
//! divergence symmetry, histogram-preserving augmentation, and the one-hot
//! structure of flattened features.

use std::collections::BTreeSet;

use proptest::prelude::*;

use advpath::gridworld::{Cell, GridMap, Path, PathPair};
use advpath::imaging::{self, AugmentOp, PixelClass};
use advpath::storage::{self, Manifest, Record};
use advpath::taxonomy::{attack_verdict, classify_rule, divergence, Label, TaxonomyConfig};

const GRID: usize = 28;

/// Builds an in-bounds 8-connected walk from a start cell and a move list;
/// moves that would leave the grid are skipped.
fn walk_from(start: (i32, i32), moves: &[usize]) -> Path {
    const OFFSETS: [(i32, i32); 8] =
        [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    let mut steps = vec![Cell::new(start.0, start.1)];
    let mut cur = steps[0];
    for &m in moves {
        let (dx, dy) = OFFSETS[m];
        let next = Cell::new(cur.x + dx, cur.y + dy);
        if next.x < 0 || next.y < 0 || next.x >= GRID as i32 || next.y >= GRID as i32 {
            continue;
        }
        steps.push(next);
        cur = next;
    }
    Path::new(steps)
}

fn start_strategy() -> impl Strategy<Value = (i32, i32)> {
    (0..GRID as i32, 0..GRID as i32)
}

fn moves_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..8usize, 0..60)
}

/// Two walks sharing a start; the flavor occasionally makes them identical
/// or turns the second into a strict prefix of the first.
fn pair_strategy() -> impl Strategy<Value = PathPair> {
    (start_strategy(), moves_strategy(), moves_strategy(), 0..10u32, 0.0..1.0f64).prop_map(
        |(start, first, second, flavor, cut)| {
            let original = walk_from(start, &first);
            let adversarial = match flavor {
                0 | 1 => original.clone(),
                2 | 3 => {
                    let keep = ((original.steps.len() as f64 * cut) as usize)
                        .clamp(1, original.steps.len());
                    Path::new(original.steps[..keep].to_vec())
                }
                _ => walk_from(start, &second),
            };
            PathPair { original, adversarial }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn storage_roundtrip_preserves_every_record(
        pairs in prop::collection::vec(pair_strategy(), 1..12),
        with_maps in prop::collection::vec(any::<bool>(), 12),
        label_picks in prop::collection::vec(0..5usize, 12),
        obstacle_bits in prop::collection::vec(any::<u64>(), 12),
    ) {
        let records: Vec<Record> = pairs
            .iter()
            .enumerate()
            .map(|(i, pp)| {
                let maps = with_maps[i].then(|| map_pair_from_bits(obstacle_bits[i], pp));
                let record = Record::new(i as u64 * 2 + 1, maps, pp.clone());
                match label_picks[i] {
                    4 => record,
                    k => record.with_label(Label::ALL[k]),
                }
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.records");
        let template = Manifest {
            dataset_id: "prop".to_string(),
            ..Manifest::template(GRID, GRID, 1_700_000_000)
        };
        storage::write_records(&path, &records, &template).unwrap();
        let (reread, manifest) = storage::read_records(&path).unwrap();
        prop_assert_eq!(reread, records);
        prop_assert_eq!(manifest.record_count as usize, pairs.len());
    }

    #[test]
    fn attack_verdict_follows_the_label(pp in pair_strategy(), threshold in 0..10u32) {
        let goal = pp.original.last().unwrap();
        let label = classify_rule(&pp, &TaxonomyConfig { threshold, goal });
        prop_assert_eq!(
            attack_verdict(label),
            matches!(label, Label::Unreached | Label::Fork)
        );
    }

    #[test]
    fn raising_the_threshold_never_creates_a_fork(
        pp in pair_strategy(),
        threshold in 0..10u32,
    ) {
        let goal = pp.original.last().unwrap();
        let tight = classify_rule(&pp, &TaxonomyConfig { threshold, goal });
        let loose = classify_rule(&pp, &TaxonomyConfig { threshold: threshold + 1, goal });
        match tight {
            // Unreached and unchanged are decided before divergence and so
            // cannot move with the threshold.
            Label::Unreached | Label::Unchanged => prop_assert_eq!(loose, tight),
            // A detour within a tight threshold stays a detour in a looser one.
            Label::Detour => prop_assert_eq!(loose, Label::Detour),
            // A fork may relax into a detour but never into anything else.
            Label::Fork => prop_assert!(loose == Label::Fork || loose == Label::Detour),
        }
    }

    #[test]
    fn divergence_ignores_which_side_is_which(pp in pair_strategy()) {
        let swapped = PathPair {
            original: pp.adversarial.clone(),
            adversarial: pp.original.clone(),
        };
        prop_assert_eq!(divergence(&pp), divergence(&swapped));
    }

    #[test]
    fn augmentation_preserves_class_histograms(pp in pair_strategy(), op_pick in 0..6usize) {
        let ops = [
            AugmentOp::Identity,
            AugmentOp::FlipH,
            AugmentOp::FlipV,
            AugmentOp::Rot90,
            AugmentOp::Rot180,
            AugmentOp::Rot270,
        ];
        let image = imaging::rasterize(&pp, GRID, GRID).unwrap();
        let augmented = imaging::apply_augment(&image, ops[op_pick]).unwrap();
        prop_assert_eq!(augmented.class_counts(), image.class_counts());
    }

    #[test]
    fn flattened_features_are_two_one_hot_channels(pp in pair_strategy()) {
        let image = imaging::rasterize(&pp, GRID, GRID).unwrap();
        let features = imaging::flatten(&image);
        prop_assert_eq!(features.len(), 2 * GRID * GRID);
        let (original_channel, adversarial_channel) = features.split_at(GRID * GRID);
        for (i, (&o, &a)) in original_channel.iter().zip(adversarial_channel).enumerate() {
            prop_assert!(o == 0.0 || o == 1.0);
            prop_assert!(a == 0.0 || a == 1.0);
            prop_assert!(o * a == 0.0, "pixel {i} is hot in both channels");
            let expected = match image.pixels[i] {
                PixelClass::Background => (0.0, 0.0),
                PixelClass::Original => (1.0, 0.0),
                PixelClass::AdversarialOnly => (0.0, 1.0),
            };
            prop_assert_eq!((o, a), expected);
        }
    }
}

/// Deterministic pseudo-random map pair derived from one u64: obstacles from
/// the bit pattern, plus one added obstacle on a cell that is free in the
/// original and not the paths' start.
fn map_pair_from_bits(bits: u64, pp: &PathPair) -> (GridMap, GridMap) {
    let mut obstacles = BTreeSet::new();
    for i in 0..64u64 {
        if bits & (1 << i) != 0 {
            let flat = (bits.rotate_left(i as u32) ^ i.wrapping_mul(0x9e37_79b9)) as usize
                % (GRID * GRID);
            obstacles.insert(Cell::new((flat % GRID) as i32, (flat / GRID) as i32));
        }
    }
    let start = pp.original.steps[0];
    let added = GridMap::new(GRID, GRID)
        .cells()
        .find(|c| !obstacles.contains(c) && *c != start)
        .expect("a 28x28 grid always has a free non-start cell");
    let original = GridMap { width: GRID, height: GRID, obstacles: obstacles.clone() };
    obstacles.insert(added);
    (original, GridMap { width: GRID, height: GRID, obstacles })
}
