//! Property tests for the contracts that hold over arbitrary inputs.

use proptest::prelude::*;

use linnaeus_core::features::SemanticContext;
use linnaeus_core::llm::batch_contexts;
use linnaeus_core::taxonomy::{builtin, TagSet};

fn context(asn: u32) -> SemanticContext {
    SemanticContext {
        asn,
        as_name: Some(format!("AS-{asn}")),
        org_name: None,
        as_country: None,
        org_country: None,
        website: None,
    }
}

proptest! {
    /// Gating is monotone: opening more top-level gates never removes an
    /// admissible sub-tag.
    #[test]
    fn admissible_subtags_is_monotone(mask_a in 0u32..(1 << 18), mask_b in 0u32..(1 << 18)) {
        let tax = builtin::default_taxonomy();
        let tops = tax.top_tags();
        let set_for = |mask: u32| -> TagSet {
            tops.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t.clone())
                .collect()
        };
        let a = set_for(mask_a & mask_b); // a is a subset of b
        let b = set_for(mask_b);
        let subs_a = tax.admissible_subtags(&a).unwrap();
        let subs_b = tax.admissible_subtags(&b).unwrap();
        prop_assert!(subs_a.is_subset(&subs_b));
    }

    /// Batching partitions the input: concatenation restores it and no group
    /// exceeds the cap.
    #[test]
    fn batching_is_a_partition(n in 0usize..200, k in 1usize..=20) {
        let contexts: Vec<SemanticContext> = (0..n as u32).map(|i| context(i + 1)).collect();
        let groups = batch_contexts(&contexts, k);
        prop_assert!(groups.iter().all(|g| g.len() <= k && !g.is_empty()));
        let rebuilt: Vec<SemanticContext> = groups.into_iter().flatten().collect();
        prop_assert_eq!(rebuilt, contexts);
    }

    /// Any tag set that validates stays valid after removing all sub-level
    /// tags (parents never depend on children).
    #[test]
    fn dropping_sub_tags_preserves_validity(mask in 0u32..(1 << 18)) {
        let tax = builtin::default_taxonomy();
        let tops: TagSet = tax
            .top_tags()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << *i) != 0)
            .map(|(_, t)| t)
            .collect();
        prop_assert!(tax.validate_tagset(&tops).unwrap().is_empty());
    }
}
