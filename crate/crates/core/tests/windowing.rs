mod oracles;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regimen::corpus::SchemaProfile;
use regimen::windowing::{build_pair_targets, make_segments, tokenize, window_ranges, RelationClasses, WindowConfig};

use oracles::windows::{brute_tally, brute_windows, random_document};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn windows_match_character_scan(seed in any::<u64>(), window in 1usize..120, stride_frac in 0.05f64..=1.0) {
        let doc = random_document(&mut ChaCha8Rng::seed_from_u64(seed), "d");
        let stride = ((window as f64 * stride_frac) as usize).clamp(1, window);
        let cfg = WindowConfig::with_stride(window, stride);
        let got = window_ranges(doc.char_len(), &tokenize(&doc.text), &cfg);
        prop_assert_eq!(got, brute_windows(&doc.text, window, stride));
    }

    #[test]
    fn segments_match_enumerator(seed in any::<u64>(), window in 5usize..200) {
        let doc = random_document(&mut ChaCha8Rng::seed_from_u64(seed), "d");
        let cfg = WindowConfig::new(window);
        let (segments, report) = make_segments(&doc, &cfg).unwrap();
        let tally = brute_tally(&doc, cfg.window_chars, cfg.stride_chars);
        prop_assert_eq!(report.segments_emitted, tally.emitted.len());
        prop_assert_eq!(report.segments_excluded, tally.excluded);
        prop_assert_eq!(report.unreachable_relations, tally.unreachable);
        let classes = RelationClasses::new(&SchemaProfile::corp_hus(), false);
        let mut typed = BTreeSet::new();
        for (seg, (range, ids)) in segments.iter().zip(&tally.emitted) {
            prop_assert_eq!((seg.window_start, seg.window_end), *range);
            let seg_ids: Vec<&String> = seg.entities.iter().map(|e| &e.id).collect();
            prop_assert_eq!(seg_ids, ids.iter().collect::<Vec<_>>());
            let m = seg.entities.len();
            prop_assert!(m >= 2);
            let targets = build_pair_targets(seg, &doc.relations, &classes).unwrap();
            prop_assert_eq!(targets.len(), m * (m - 1));
            for (k, t) in targets.iter().enumerate() {
                prop_assert_eq!((t.source, t.target), (k / (m - 1), k % (m - 1) + usize::from(k % (m - 1) >= k / (m - 1))));
                if t.class_id != 0 {
                    typed.insert((seg.entities[t.source].id.clone(), seg.entities[t.target].id.clone()));
                }
            }
        }
        // every gold relation lands in some segment unless it is unreachable
        prop_assert_eq!(typed.len(), doc.relations.len() - tally.unreachable);
    }
}
