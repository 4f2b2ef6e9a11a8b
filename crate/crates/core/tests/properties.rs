use honest_rag::corpus::{segment_text, Domain};
use honest_rag::embedding::{cosine_similarity, hash_embed, EmbeddingVector};
use honest_rag::gateway::{canonical_answer, classify_answer, extract_first_json, AnswerDomain, StructuredAnswer};
use honest_rag::scorer::{score_batch, Outcome, ScoringMode, Verdict};
use honest_rag::text::normalize_answer;
use proptest::prelude::*;

fn non_ws(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, dim).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-6))
}

fn domain() -> impl Strategy<Value = AnswerDomain> {
    prop::sample::select(AnswerDomain::ALL.to_vec())
}

fn outcome() -> impl Strategy<Value = Outcome> {
    prop::sample::select(vec![
        Outcome::Perfect,
        Outcome::Acceptable,
        Outcome::Missing,
        Outcome::Incorrect,
    ])
}

fn corpus_domain() -> impl Strategy<Value = Domain> {
    prop::sample::select(Domain::ALL.to_vec())
}

proptest! {
    #[test]
    fn segmentation_conserves_text(text in "([A-Za-z]{1,6}[ .!?\n]{1,3}|Dr\\. |e\\.g\\. |\n\n){0,40}") {
        let units = segment_text(&text, 0);
        let joined: String = units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ");
        prop_assert_eq!(non_ws(&joined), non_ws(&text));
        prop_assert!(units.iter().all(|u| !u.text.trim().is_empty()));
        prop_assert_eq!(&units, &segment_text(&text, 0));
        let mut keys: Vec<_> = units.iter().map(|u| u.key()).collect();
        keys.dedup();
        prop_assert_eq!(keys.len(), units.len());
    }

    #[test]
    fn sentences_stay_inside_blank_line_blocks(text in "([a-z]{1,5}[.!? ]{0,2}|\n|\n\n){0,40}") {
        let blocks: Vec<String> = text
            .split('\n')
            .collect::<Vec<_>>()
            .split(|l| l.trim().is_empty())
            .filter(|b| !b.is_empty())
            .map(|b| b.join("\n"))
            .collect();
        let units = segment_text(&text, 0);
        for u in &units {
            prop_assert!(non_ws(&blocks[u.para_index]).contains(&non_ws(&u.text)));
        }
    }

    #[test]
    fn cosine_self_is_one(a in vector(8)) {
        let a = EmbeddingVector::new(a).unwrap();
        prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn cosine_symmetric_and_scale_free(a in vector(6), b in vector(6), k in 1e-3f64..1e3) {
        let (a, b) = (EmbeddingVector::new(a).unwrap(), EmbeddingVector::new(b).unwrap());
        let ab = cosine_similarity(&a, &b).unwrap();
        prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
        prop_assert!((-1.0..=1.0).contains(&ab));
        let scaled = a.scaled(k).unwrap();
        prop_assert!((cosine_similarity(&scaled, &b).unwrap() - ab).abs() <= 1e-9);
    }

    #[test]
    fn hash_embed_unit_or_zero(text in "\\PC{0,60}") {
        let e = hash_embed(&text, 64);
        prop_assert_eq!(e.dimension(), 64);
        prop_assert!(e.is_zero() || (e.norm() - 1.0).abs() < 1e-9);
        prop_assert_eq!(e, hash_embed(&text, 64));
    }

    #[test]
    fn extraction_round_trips_through_noise(
        d in domain(),
        answer in "[a-z0-9][a-z0-9 ,.'\"{}\\\\-]{0,20}[a-z0-9]",
        prefix in "[^{}]{0,40}",
        suffix in "\\PC{0,40}",
    ) {
        let original = StructuredAnswer { domain: d, answer };
        let raw = format!("{prefix}{}{suffix}", serde_json::to_string(&original).unwrap());
        prop_assert_eq!(extract_first_json(&raw).unwrap(), original);
    }

    #[test]
    fn classification_stable_under_renormalization(s in "\\PC{0,30}") {
        let once = canonical_answer(&s);
        prop_assert_eq!(classify_answer(&once), classify_answer(&s));
        prop_assert_eq!(canonical_answer(&once), once);
        let n = normalize_answer(&s);
        prop_assert_eq!(normalize_answer(&n), n);
    }

    #[test]
    fn full_weight_identities(items in prop::collection::vec((outcome(), corpus_domain()), 1..200)) {
        let batch: Vec<_> = items.iter().map(|&(o, d)| (Verdict::new(o, ScoringMode::FullWeight), d)).collect();
        let s = score_batch(&batch, ScoringMode::FullWeight).unwrap();
        let m = s.micro;
        prop_assert!((m.total_score - (m.accuracy - m.hallucination)).abs() <= 1e-9);
        prop_assert!((m.accuracy + m.hallucination + m.missing - 1.0).abs() <= 1e-9);
        prop_assert!((-1.0..=1.0).contains(&m.total_score));
        prop_assert!((-1.0..=1.0).contains(&s.macro_total_score));
        for dm in s.per_domain.values() {
            prop_assert!((dm.total_score - (dm.accuracy - dm.hallucination)).abs() <= 1e-9);
        }

        let mut reversed = batch.clone();
        reversed.reverse();
        let r = score_batch(&reversed, ScoringMode::FullWeight).unwrap();
        prop_assert!((r.micro.total_score - m.total_score).abs() <= 1e-12);
        prop_assert!((r.macro_total_score - s.macro_total_score).abs() <= 1e-12);
    }

    #[test]
    fn modes_agree_without_acceptable(items in prop::collection::vec(
        (prop::sample::select(vec![Outcome::Perfect, Outcome::Missing, Outcome::Incorrect]), corpus_domain()), 1..100)
    ) {
        let score = |mode| {
            let b: Vec<_> = items.iter().map(|&(o, d)| (Verdict::new(o, mode), d)).collect();
            score_batch(&b, mode).unwrap()
        };
        let (half, full) = (score(ScoringMode::CragHalf), score(ScoringMode::FullWeight));
        prop_assert_eq!(half.micro, full.micro);
        prop_assert_eq!(half.per_domain, full.per_domain);
    }
}
