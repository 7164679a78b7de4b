//! Property tests for the invariants the modules promise.

use proptest::prelude::*;

use corpusprep::assembly::split_sentence_spans;
use corpusprep::clean::{normalize, quality_check, scrub_pii, structural_check, CleaningConfig, FunctionWords};
use corpusprep::dedup::{dedup_stream, estimate_jaccard, minhash_signature, DedupDecision, MinHashParams};
use corpusprep::model::{count_words, DocId, Lang};
use corpusprep::tokenizer::{pretokenize, train_bpe, BASE_VOCAB};

proptest! {
    #[test]
    fn normalize_is_idempotent(text in "\\PC{0,300}") {
        let once = normalize(&text);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn normalize_output_has_no_markup_noise(text in "\\PC{0,200}") {
        let out = normalize(&text);
        // No control characters survive.
        let clean = out.chars().all(|c| {
            let v = c as u32;
            !(v < 0x20 && c != '\n') && !(0x7F..=0x9F).contains(&v)
        });
        prop_assert!(clean, "control characters in {:?}", out);
        // Whitespace is collapsed: no double spaces, no triple newlines.
        prop_assert!(!out.contains("  "));
        prop_assert!(!out.contains("\n\n\n"));
        prop_assert_eq!(out.trim(), &out);
    }

    #[test]
    fn count_words_invariant_under_whitespace_normalization(text in "\\PC{0,200}") {
        let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
        prop_assert_eq!(count_words(&text), count_words(&collapsed));
    }

    #[test]
    fn scrub_is_idempotent_and_bounded(text in "\\PC{0,300}") {
        let (once, n1) = scrub_pii(&text);
        let (twice, n2) = scrub_pii(&once);
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(n2, 0);
        // Length never grows by more than redactions x the longest
        // placeholder ("[EMAIL]" is 7 bytes).
        prop_assert!(once.len() <= text.len() + n1 as usize * 7);
    }

    #[test]
    fn scrubbed_text_has_no_email_shape(user in "[a-z]{1,8}", host in "[a-z]{1,8}") {
        let text = format!("skryf aan {user}@{host}.co.za of {user}.{user}@{host}.org nou");
        let (out, n) = scrub_pii(&text);
        prop_assert!(n >= 2);
        prop_assert!(!out.contains('@'));
    }

    #[test]
    fn pretokenize_partitions_exactly(text in "\\PC{0,300}") {
        prop_assert_eq!(pretokenize(&text).concat(), text);
    }

    #[test]
    fn sentence_spans_reconstruct_exactly(text in "\\PC{0,300}") {
        let mut rebuilt = String::new();
        for span in split_sentence_spans(&text) {
            rebuilt.push_str(&text[span.sentence.0..span.sentence.1]);
            rebuilt.push_str(&text[span.separator.0..span.separator.1]);
        }
        prop_assert_eq!(rebuilt, text);
    }

    #[test]
    fn signatures_are_deterministic_and_estimates_bounded(
        a in "[a-z ]{0,200}",
        b in "[a-z ]{0,200}",
    ) {
        let params = MinHashParams::default();
        let sa1 = minhash_signature(&a, &params);
        let sa2 = minhash_signature(&a, &params);
        prop_assert_eq!(&sa1, &sa2);
        let sb = minhash_signature(&b, &params);
        let est = estimate_jaccard(&sa1, &sb).unwrap();
        prop_assert!((0.0..=1.0).contains(&est));
        if a == b {
            prop_assert_eq!(est, 1.0);
        }
    }

    #[test]
    fn loosening_thresholds_never_rejects_a_passing_document(
        words in prop::collection::vec("[a-z]{2,9}", 6..60),
        min_words_delta in 0u64..5,
        symbol_ratio_bump in 0.0f64..2.0,
    ) {
        let text = words.join(" ");
        let strict = CleaningConfig::default();
        let mut loose = strict.clone();
        loose.min_words = strict.min_words.saturating_sub(min_words_delta);
        loose.max_symbol_word_ratio = strict.max_symbol_word_ratio + symbol_ratio_bump;
        loose.max_duplicate_line_fraction = 1.0;
        loose.mean_word_len_bounds = [0.0, 1000.0];
        loose.max_pii_density = strict.max_pii_density * 10.0;

        let fw = FunctionWords::builtin();
        if structural_check(&text, &strict).is_none() {
            prop_assert_eq!(structural_check(&text, &loose), None);
        }
        if quality_check(&text, Lang::Eng, 0, &strict, &fw).is_none() {
            prop_assert_eq!(quality_check(&text, Lang::Eng, 0, &loose, &fw), None);
        }
    }

    #[test]
    fn dedup_is_idempotent_on_retained_output(
        seeds in prop::collection::vec(0u64..50, 5..40),
    ) {
        // Small vocabulary forces genuine duplicates and near-misses.
        let docs: Vec<(DocId, String)> = seeds
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let words: Vec<String> =
                    (0..30).map(|k| format!("w{}", (s + k * 7) % 40)).collect();
                (DocId(i as u64), words.join(" "))
            })
            .collect();
        let params = MinHashParams::default();
        let (retained, _) = dedup_stream(docs, |d| (d.1.as_str(), d.0), &params, 0.8).unwrap();
        let (again, decisions) =
            dedup_stream(retained.clone(), |d| (d.1.as_str(), d.0), &params, 0.8).unwrap();
        prop_assert_eq!(again.len(), retained.len());
        prop_assert!(decisions.iter().all(|(_, d)| *d == DedupDecision::Retained));
    }
}

proptest! {
    // Tokenizer round trips cost more per case; fewer cases suffice.
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenizer_round_trips_arbitrary_text(text in "\\PC{0,200}") {
        let model = train_bpe(
            ["die kinders leer elke dag nuwe dinge by die skool en hulle lees baie boeke"],
            BASE_VOCAB + 30,
        )
        .unwrap();
        let round = model.decode(&model.encode(&text)).unwrap();
        prop_assert_eq!(round, text);
    }

    #[test]
    fn token_count_bounded_by_byte_count(text in "\\PC{1,200}") {
        let model = train_bpe(["one two three four five six"], BASE_VOCAB + 10).unwrap();
        let count = model.count_tokens(&text);
        prop_assert!(count >= 1);
        prop_assert!(count <= text.len() as u64);
    }
}
