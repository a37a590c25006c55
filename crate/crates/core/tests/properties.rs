//! Property tests over the public API.

mod common;

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use maskeval::corpus::{
    build_masked_reference, parse_corpus, serialize_record, AnnotatorLabel, MaskedSentence,
    RecordSource, UtteranceRecord,
};
use maskeval::curation::{
    build_curriculum, mask_by_attribution, select_keywords, BinaryLabel, CandidateRecord,
    EnsembleVerdict, LevelSampling, PlanSpec, StageSpec,
};
use maskeval::metrics::{align, evaluate_pair, mar, umwer, wer, ScoringPair};
use maskeval::objectives::{cross_entropy, kl_divergence, ObjectiveInput, StepDistribution};
use maskeval::MASK_TOKEN;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}"
}

fn label() -> impl Strategy<Value = AnnotatorLabel> {
    prop_oneof![
        Just(AnnotatorLabel::Hateful),
        Just(AnnotatorLabel::Offensive),
        Just(AnnotatorLabel::Normal),
        Just(AnnotatorLabel::Undecided),
    ]
}

prop_compose! {
    fn record()(
        pairs in prop::collection::vec((word(), 0u8..=3), 1..20),
        labels in [label(), label(), label()],
        target in prop::option::of("[A-Z][a-z]{2,8}"),
        generated in any::<bool>(),
        id in "[a-z0-9]{4,12}",
    ) -> UtteranceRecord {
        let (tokens, rationale_votes): (Vec<String>, Vec<u8>) = pairs.into_iter().unzip();
        UtteranceRecord {
            id,
            tokens,
            annotator_labels: labels,
            target,
            rationale_votes,
            source: if generated { RecordSource::Generated } else { RecordSource::Original },
        }
    }
}

fn token_seq(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![3 => word(), 1 => Just(MASK_TOKEN.to_string())],
        0..max_len,
    )
}

proptest! {
    // -- corpus ------------------------------------------------------------

    #[test]
    fn masked_position_count_matches_vote_rule(rec in record(), threshold in 1u8..=3) {
        let masked = build_masked_reference(&rec, threshold).unwrap();
        let expected = rec.rationale_votes.iter().filter(|&&v| v >= threshold).count();
        prop_assert_eq!(masked.mask_count(), expected);
    }

    #[test]
    fn raising_the_threshold_never_masks_more(rec in record(), threshold in 1u8..3) {
        let low = build_masked_reference(&rec, threshold).unwrap();
        let high = build_masked_reference(&rec, threshold + 1).unwrap();
        let low_set: HashSet<&usize> = low.mask_positions().iter().collect();
        prop_assert!(high.mask_positions().iter().all(|p| low_set.contains(p)));
    }

    #[test]
    fn masking_is_idempotent_in_effect(rec in record(), threshold in 1u8..=3) {
        let masked = build_masked_reference(&rec, threshold).unwrap();
        // feed the masked tokens back through with all-zero votes:
        // nothing new may be masked and nothing may change
        let again = UtteranceRecord {
            tokens: masked.tokens().to_vec(),
            rationale_votes: vec![0; masked.tokens().len()],
            ..rec
        };
        let remasked = build_masked_reference(&again, threshold).unwrap();
        prop_assert_eq!(remasked.tokens(), masked.tokens());
        prop_assert_eq!(remasked.mask_positions(), masked.mask_positions());
    }

    #[test]
    fn parse_is_inverse_of_serialize(rec in record()) {
        let line = serialize_record(&rec);
        let parsed = parse_corpus(line.as_bytes()).unwrap();
        prop_assert!(parsed.line_errors.is_empty());
        prop_assert_eq!(&parsed.records[0], &rec);
    }

    // -- curation ----------------------------------------------------------

    #[test]
    fn keyword_vote_boundaries(hateful_counts in prop::collection::vec(0usize..=5, 1..20)) {
        let terms: Vec<String> = (0..hateful_counts.len()).map(|i| format!("t{i}")).collect();
        let verdicts: HashMap<String, EnsembleVerdict> = terms
            .iter()
            .zip(&hateful_counts)
            .map(|(term, &h)| {
                let ids = (0..5).map(|i| format!("m{i}")).collect();
                let labels = (0..5)
                    .map(|i| if i < h { BinaryLabel::Hateful } else { BinaryLabel::Normal })
                    .collect();
                (term.clone(), EnsembleVerdict::new(ids, labels).unwrap())
            })
            .collect();
        prop_assert_eq!(select_keywords(&terms, &verdicts, 0).unwrap().len(), terms.len());
        prop_assert_eq!(select_keywords(&terms, &verdicts, 6).unwrap().len(), 0);
    }

    #[test]
    fn attribution_mask_set_is_antitone_in_threshold(
        scores in prop::collection::vec(0.0f64..1.0, 1..30),
        low in 0.0f64..0.5,
        bump in 0.0f64..0.5,
    ) {
        let tokens: Vec<String> = (0..scores.len()).map(|i| format!("w{i}")).collect();
        let at_low = mask_by_attribution("x", &tokens, &scores, low).unwrap();
        let at_high = mask_by_attribution("x", &tokens, &scores, low + bump).unwrap();
        let low_set: HashSet<&usize> = at_low.mask_positions().iter().collect();
        prop_assert!(at_high.mask_positions().iter().all(|p| low_set.contains(p)));
    }

    #[test]
    fn equal_seeds_give_equal_manifests(seed in any::<u64>(), pool_size in 30usize..120) {
        let candidates: Vec<CandidateRecord> = (0..pool_size)
            .map(|i| {
                let level = i % 6;
                let ids = (0..5).map(|m| format!("m{m}")).collect();
                let labels = (0..5)
                    .map(|m| if m < level { BinaryLabel::Hateful } else { BinaryLabel::Normal })
                    .collect();
                CandidateRecord::new(
                    format!("c{i}"),
                    vec!["w".to_string()],
                    "w",
                    EnsembleVerdict::new(ids, labels).unwrap(),
                    None,
                    None,
                )
                .unwrap()
            })
            .collect();
        let plan = PlanSpec {
            name: "prop".to_string(),
            stages: vec![StageSpec { levels: vec![3, 4, 5], count: 10 }],
        };
        let a = build_curriculum(&candidates, &plan, seed, LevelSampling::UniformOverUnion).unwrap();
        let b = build_curriculum(&candidates, &plan, seed, LevelSampling::UniformOverUnion).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        a.validate_against(&candidates).unwrap();
    }

    // -- metrics -----------------------------------------------------------

    #[test]
    fn align_cost_matches_brute_force_on_random_pairs(
        r in prop::collection::vec("[abc]", 0..7),
        h in prop::collection::vec("[abc]", 0..7),
    ) {
        let alignment = align(&r, &h);
        prop_assert_eq!(alignment.cost(), common::brute_edit_distance(&r, &h));
    }

    #[test]
    fn alignment_op_sequence_is_deterministic(
        r in token_seq(8),
        h in token_seq(8),
    ) {
        prop_assert_eq!(align(&r, &h), align(&r, &h));
    }

    #[test]
    fn self_scoring_is_perfect(tokens in token_seq(12)) {
        // ensure at least one mask and one content word
        let mut tokens = tokens;
        tokens.push(MASK_TOKEN.to_string());
        tokens.push("anchor".to_string());
        let reference = MaskedSentence::new("u", tokens);
        prop_assert_eq!(wer(&reference, reference.tokens()).unwrap(), 0.0);
        prop_assert_eq!(mar(&reference, reference.tokens()), Some(100.0));
        prop_assert_eq!(umwer(&reference, reference.tokens()).unwrap(), 0.0);
    }

    #[test]
    fn umwer_is_blind_to_inserted_masks(
        tokens in token_seq(10),
        insert_at in prop::collection::vec(any::<prop::sample::Index>(), 1..6),
    ) {
        let mut tokens = tokens;
        tokens.push("anchor".to_string());
        let reference = MaskedSentence::new("u", tokens.clone());
        let baseline = umwer(&reference, &tokens).unwrap();
        let mut hyp = tokens;
        for idx in insert_at {
            let at = idx.index(hyp.len() + 1);
            hyp.insert(at, MASK_TOKEN.to_string());
        }
        prop_assert_eq!(umwer(&reference, &hyp).unwrap(), baseline);
    }

    #[test]
    fn inserting_an_unknown_word_strictly_raises_wer(
        tokens in token_seq(10),
        idx in any::<prop::sample::Index>(),
    ) {
        let mut tokens = tokens;
        tokens.push("anchor".to_string());
        let reference = MaskedSentence::new("u", tokens.clone());
        let mut hyp = tokens;
        // "zzzzzzz" cannot be generated by the token strategy
        hyp.insert(idx.index(hyp.len() + 1), "zzzzzzz".to_string());
        prop_assert!(wer(&reference, &hyp).unwrap() > 0.0);
    }

    #[test]
    fn mar_stays_within_percent_bounds(
        tokens in token_seq(12),
        hyp in token_seq(12),
    ) {
        let mut tokens = tokens;
        tokens.push(MASK_TOKEN.to_string());
        let reference = MaskedSentence::new("u", tokens);
        let value = mar(&reference, &hyp).unwrap();
        prop_assert!((0.0..=100.0).contains(&value));
    }

    #[test]
    fn pair_evaluation_matches_the_standalone_metrics(
        tokens in token_seq(10),
        hyp in token_seq(10),
    ) {
        let mut tokens = tokens;
        tokens.push("anchor".to_string());
        let pair = ScoringPair {
            id: "u".to_string(),
            reference: MaskedSentence::new("u", tokens),
            hypothesis: hyp,
        };
        let result = evaluate_pair(&pair).unwrap();
        prop_assert_eq!(result.wer, wer(&pair.reference, &pair.hypothesis).unwrap());
        prop_assert_eq!(result.umwer, umwer(&pair.reference, &pair.hypothesis).unwrap());
        prop_assert_eq!(result.mar, mar(&pair.reference, &pair.hypothesis));
    }

    // -- objectives ---------------------------------------------------------

    #[test]
    fn kl_is_nonnegative_and_zero_iff_equal(
        raw_p in prop::collection::vec(0.01f64..1.0, 2..8),
        raw_q in prop::collection::vec(0.01f64..1.0, 2..8),
    ) {
        let normalize = |raw: &[f64]| {
            let sum: f64 = raw.iter().sum();
            StepDistribution::new(raw.iter().map(|x| x / sum).collect()).unwrap()
        };
        let p = normalize(&raw_p);
        let same = kl_divergence(std::slice::from_ref(&p), std::slice::from_ref(&p)).unwrap();
        prop_assert!(same.abs() <= 1e-12);

        if raw_q.len() == raw_p.len() {
            let q = normalize(&raw_q);
            let kl = kl_divergence(std::slice::from_ref(&p), std::slice::from_ref(&q)).unwrap();
            prop_assert!(kl >= -1e-12, "kl = {}", kl);
            let max_gap = p
                .probabilities()
                .iter()
                .zip(q.probabilities())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if kl.abs() <= 1e-12 {
                prop_assert!(max_gap <= 1e-6, "zero divergence but gap {}", max_gap);
            }
        }
    }

    #[test]
    fn cross_entropy_is_nonnegative(
        raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 1..5),
        target_picks in prop::collection::vec(any::<prop::sample::Index>(), 1..5),
    ) {
        let dists: Vec<StepDistribution> = raw
            .iter()
            .map(|step| {
                let sum: f64 = step.iter().sum();
                StepDistribution::new(step.iter().map(|x| x / sum).collect()).unwrap()
            })
            .collect();
        let steps = dists.len().min(target_picks.len());
        let targets: Vec<usize> = target_picks[..steps].iter().map(|i| i.index(4)).collect();
        let input = ObjectiveInput::new("ctx", dists[..steps].to_vec(), targets).unwrap();
        prop_assert!(cross_entropy(&input) >= 0.0);
    }
}
