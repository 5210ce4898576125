mod oracles;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regimen::corpus::{corpus_stats, SchemaProfile, SAME_FRAME};
use regimen::frames::{build_frames, decode_frames, frames_to_relations};
use regimen::synthgen::{generate_corpus, GenConfig};

use oracles::frames::{random_frameset, tocilizumab};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn decoding_inverts_the_edge_encoding(seed in any::<u64>()) {
        let schema = SchemaProfile::corp_hus();
        let (entities, fs) = random_frameset(&mut ChaCha8Rng::seed_from_u64(seed), "d");
        let relations = frames_to_relations(&fs, &entities, true);
        prop_assert_eq!(decode_frames("d", &entities, &relations, &schema), fs);
    }
}

#[test]
fn tocilizumab_decodes_to_two_frames() {
    let doc = tocilizumab();
    let fs = build_frames(&doc, &SchemaProfile::corp_hus());
    assert_eq!(fs.frames.len(), 2);
    let attrs: Vec<Vec<&str>> = fs
        .frames
        .iter()
        .map(|f| f.links.iter().map(|l| l.attribute.as_str()).collect())
        .collect();
    assert_eq!(attrs, [vec!["T2", "T3", "T4", "T5"], vec!["T2", "T5", "T6", "T7"]]);
}

#[test]
fn generated_corpus_matches_target_shares() {
    let cfg = GenConfig {
        seed: 5,
        doc_count: 200,
        ..GenConfig::default()
    };
    let corpus = generate_corpus(&cfg).unwrap();
    let schema = SchemaProfile::corp_hus();
    let stats = corpus_stats(&corpus.docs, &schema);
    assert!(
        (0.01..=0.08).contains(&stats.multi_frame_drug_fraction),
        "{}",
        stats.multi_frame_drug_fraction
    );
    let same_frame = stats.relation_counts.get(SAME_FRAME).copied().unwrap_or(0);
    let refer_to = stats.relation_counts["Refer_to"] as f64 / (stats.relation_total - same_frame) as f64;
    assert!(refer_to > 0.5, "{refer_to}");
    for (doc, fs) in corpus.docs.iter().zip(&corpus.frames) {
        assert_eq!(&build_frames(doc, &schema), fs, "{}", doc.doc_id);
    }
}
