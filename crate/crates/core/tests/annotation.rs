mod common;

use aes3d_core::annotation::{
    build_label_file, parse_annotation_csv, score_gap_stats, write_annotation_csv, AnnotationStats, LabelVariant,
    ViewLevelAnnotation,
};
use aes3d_core::synth::{generate_dataset, synth_annotations, SynthConfig};
use common::oracle;
use proptest::prelude::*;

fn synth_csv(scenes: usize) -> String {
    let data = generate_dataset(&SynthConfig { scenes, points: 16, cameras: 9, seed: 4 });
    let mut buf = Vec::new();
    write_annotation_csv(&mut buf, &synth_annotations(&data, 8)).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn statistics_match_the_brute_force_oracle() {
    let text = synth_csv(30);
    let (rows, rejected) = parse_annotation_csv(text.as_bytes()).unwrap();
    assert!(rejected.is_empty());
    let stats = AnnotationStats::compute(&rows).unwrap();
    let bad = oracle::mismatches(&stats, &oracle::from_csv(&text));
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn csv_round_trip_preserves_rows() {
    let text = synth_csv(5);
    let (rows, _) = parse_annotation_csv(text.as_bytes()).unwrap();
    let mut again = Vec::new();
    write_annotation_csv(&mut again, &rows).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), text);
}

fn row(scene: u8, view: usize, total: f64, attrs: [f64; 8]) -> ViewLevelAnnotation {
    ViewLevelAnnotation {
        scene_id: format!("s{scene}"),
        view_id: format!("v{view}"),
        total,
        attributes: attrs,
        text: None,
    }
}

fn rows_strategy() -> impl Strategy<Value = Vec<ViewLevelAnnotation>> {
    prop::collection::vec((0u8..6, 0.0f64..100.0, prop::array::uniform8(0.0f64..100.0)), 1..60).prop_map(|v| {
        v.into_iter().enumerate().map(|(i, (s, t, a))| row(s, i, t, a)).collect()
    })
}

proptest! {
    #[test]
    fn labels_ignore_view_order(rows in rows_strategy(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        let a = build_label_file(&rows);
        let b = build_label_file(&shuffled);
        prop_assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
        for (k, x) in &a {
            prop_assert!((x.total - b[k].total).abs() < 1e-12);
            prop_assert!((x.attr8 - b[k].attr8).abs() < 1e-12);
            prop_assert_eq!(x.view_count, b[k].view_count);
        }
    }

    #[test]
    fn raw_scale_round_trip_is_identity(label in 0.0f64..1.0) {
        let r = row(0, 0, label * 100.0, [label * 100.0; 8]);
        prop_assert!((r.normalized(LabelVariant::Total) - label).abs() < 1e-12);
        prop_assert!((r.normalized(LabelVariant::Attr8) - label).abs() < 1e-12);
    }

    #[test]
    fn gap_fractions_are_nested(scenes in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..10), 1..30)) {
        let g = score_gap_stats(&scenes);
        prop_assert!(g.frac_above_030 <= g.frac_above_020);
        prop_assert!(g.median <= g.p90 && g.p90 <= g.max);
    }

    #[test]
    fn summary_matches_oracle_on_random_rows(rows in rows_strategy()) {
        prop_assume!(build_label_file(&rows).len() >= 3);
        let mut buf = Vec::new();
        write_annotation_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let (parsed, _) = parse_annotation_csv(text.as_bytes()).unwrap();
        let stats = AnnotationStats::compute(&parsed).unwrap();
        let bad = oracle::mismatches(&stats, &oracle::from_csv(&text));
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }
}
