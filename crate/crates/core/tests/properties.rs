use std::collections::HashSet;

use proptest::prelude::*;

use hetqa::entity::{merge, parse_mentions, EntityMode, EntitySet, LinkedEntity, Mention, MAX_DESCRIPTION_WORDS};
use hetqa::eval::{categorize_errors, exact_match, superset_match};
use hetqa::fusion::{assemble, EvidenceItem, EvidenceKind, Prediction};
use hetqa::index::{Index, Passage, PassageKind};
use hetqa::wikitext::{expand_spans, linearize_page, parse_page, RawCell, RecordKind, MAX_COLSPAN, MAX_ROWSPAN};

fn wikiish() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "{|", "|}", "|-", "\n", "| ", "||", "!", "!!", "[[", "]]", "{{", "}}", "==", "=", "<ref>", "</ref>",
        "<!--", "-->", "colspan=\"3\"", "rowspan=\"99\"", "Infobox", "text", "é", "'''", "''", " ", ".", "x",
    ]);
    prop::collection::vec(pieces, 0..60).prop_map(|v| v.concat())
}

fn cell() -> impl Strategy<Value = RawCell> {
    ("[a-z]{0,3}", 1usize..4, 1usize..4).prop_map(|(t, c, r)| RawCell::spanning(t, c, r))
}

proptest! {
    #[test]
    fn parser_never_panics_and_tables_stay_consistent(text in wikiish()) {
        let page = parse_page(&text, "P", 1);
        for record in linearize_page(&page) {
            if record.kind == RecordKind::Table && !record.skip {
                prop_assert!(record.body.ends_with("<tr>"));
            }
        }
    }

    #[test]
    fn expanded_grid_is_rectangular_and_covers_cells(rows in prop::collection::vec(prop::collection::vec(cell(), 0..5), 0..6)) {
        let expanded = expand_spans(&rows);
        let width = expanded.grid.first().map_or(0, Vec::len);
        prop_assert!(expanded.grid.iter().all(|r| r.len() == width));
        prop_assert_eq!(expanded.grid.len(), rows.len());
        let flat: HashSet<&str> = expanded.grid.iter().flatten().map(String::as_str).collect();
        for c in rows.iter().flatten() {
            prop_assert!(c.colspan <= MAX_COLSPAN && c.rowspan <= MAX_ROWSPAN);
            prop_assert!(flat.contains(c.text.as_str()), "cell {:?} lost", c.text);
        }
    }

    #[test]
    fn search_results_are_prefixes(docs in prop::collection::vec("[abcde][abcde ]{0,29}", 1..12), query in "[abcde ]{1,8}", k in 0usize..6) {
        let index = Index::build(docs.iter().enumerate().map(|(i, t)| Passage {
            doc_id: format!("d{i}"),
            title: String::new(),
            text: t.clone(),
            kind: PassageKind::Text,
        })).unwrap();
        let short = index.search(&query, k);
        let long = index.search(&query, k + 3);
        prop_assert!(short.len() <= k);
        prop_assert_eq!(&long[..short.len()], &short[..]);
        prop_assert!(long.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn more_occurrences_never_lower_the_score(filler in 1usize..8, extra in 1usize..5) {
        // Same length, more occurrences of the query term.
        let doc = |hits: usize| {
            let mut words = vec!["grunge"; hits];
            words.extend(std::iter::repeat_n("filler", filler + extra - hits.min(filler + extra)));
            words.join(" ")
        };
        let index = Index::build([1, 1 + extra].into_iter().enumerate().map(|(i, n)| Passage {
            doc_id: format!("d{i}"),
            title: String::new(),
            text: doc(n),
            kind: PassageKind::Text,
        }).chain(std::iter::once(Passage { doc_id: "other".into(), title: String::new(), text: "unrelated words".into(), kind: PassageKind::Text }))).unwrap();
        let hits = index.search("grunge", 3);
        let score = |id: &str| hits.iter().find(|h| h.doc_id == id).map(|h| h.score).unwrap();
        prop_assert!(score("d1") >= score("d0"));
    }

    #[test]
    fn merge_is_idempotent_and_bounded(a in entities(), b in entities()) {
        let a = EntitySet::dedup(a, EntityMode::LinkerOnly);
        let b = EntitySet::dedup(b, EntityMode::LinkerOnly);
        let m = merge(&a, &b);
        prop_assert!(m.len() <= a.len() + b.len());
        prop_assert!(m.len() >= a.len().max(b.len()));
        prop_assert_eq!(&merge(&m, &b), &m);
        prop_assert_eq!(merge(&a, &a).entities, a.entities.clone());
        let ids: HashSet<&str> = m.entities.iter().map(|e| e.kb_id.as_str()).collect();
        prop_assert_eq!(ids.len(), m.len());
        for e in &b.entities {
            prop_assert_eq!(m.get(&e.kb_id), Some(e));
        }
    }

    #[test]
    fn mention_descriptions_stay_within_ten_words(reply in "(([0-9]{1,2}[.)] )?[A-Za-z ]{0,12}( is )?[a-z ,]{0,80}\n?){0,6}", surface in "[A-Za-z ]{0,10}", desc in "[a-z ]{0,120}") {
        for m in parse_mentions(&reply) {
            prop_assert!(m.description.split_whitespace().count() <= MAX_DESCRIPTION_WORDS);
            prop_assert!(!m.surface.is_empty());
        }
        if let Some(m) = Mention::new(&surface, &desc) {
            prop_assert!(m.description.split_whitespace().count() <= MAX_DESCRIPTION_WORDS);
        }
    }

    #[test]
    fn exact_match_implies_superset(gold in "\\PC{0,20}", pred in "\\PC{0,20}") {
        prop_assert!(!exact_match(&gold, &pred) || superset_match(&gold, &pred));
        let quoted = format!("\"{gold}\"");
        prop_assert!(exact_match(&gold, &quoted));
    }

    #[test]
    fn pool_is_ordered_and_grows_with_sources(kb in prop::option::of("[a-c]{0,3}"), text in items(), tables in items(), claims in items()) {
        let kb = kb.map(|t| EvidenceItem::new(EvidenceKind::Kb, t));
        let tables: Vec<EvidenceItem> = tables.into_iter().map(|i| EvidenceItem::new(EvidenceKind::Table, i.text)).collect();
        let claims: Vec<EvidenceItem> = claims.into_iter().map(|i| EvidenceItem::new(EvidenceKind::LlmClaim, i.text)).collect();
        let full = assemble("q", kb.clone(), text.clone(), tables.clone(), claims);
        prop_assert!(full.items.windows(2).all(|w| w[0].kind.rank() <= w[1].kind.rank()));
        let texts: HashSet<&str> = full.items.iter().map(|i| i.text.as_str()).collect();
        prop_assert_eq!(texts.len(), full.len());
        let only_text = assemble("q", None, text.clone(), Vec::new(), Vec::new());
        let text_tables = assemble("q", None, text.clone(), tables.clone(), Vec::new());
        let with_kb = assemble("q", kb, text, tables, Vec::new());
        prop_assert!(only_text.len() <= text_tables.len());
        prop_assert!(text_tables.len() <= with_kb.len());
        prop_assert!(with_kb.len() <= full.len());
    }

    #[test]
    fn predictions_round_trip(q in "\\PC{0,40}", gold in prop::option::of("\\PC{0,20}"), answer in "\\PC{0,20}", ev in prop::collection::vec((0u8..5, "\\PC{0,30}"), 0..5)) {
        let kinds = [EvidenceKind::Kb, EvidenceKind::Text, EvidenceKind::Table, EvidenceKind::Infobox, EvidenceKind::LlmClaim];
        let p = Prediction {
            question: q,
            gold,
            answer_generated: answer,
            evidences: ev.into_iter().map(|(k, t)| (kinds[k as usize], t)).collect(),
        };
        prop_assert_eq!(&serde_json::from_str::<Prediction>(&p.to_json_line()).unwrap(), &p);
        prop_assert_eq!(&serde_json::from_str::<Prediction>(&p.to_pretty_json()).unwrap(), &p);
        prop_assert!(!p.to_json_line().contains('\n'));
    }

    #[test]
    fn breakdown_counts_are_consistent(preds in prop::collection::vec(prediction(), 0..20)) {
        let b = categorize_errors(&preds);
        prop_assert!(b.gold_in_evidence <= b.total_errors);
        let max = b.gold_in_kb.max(b.gold_in_text).max(b.gold_in_tables);
        prop_assert!(b.gold_in_evidence >= max);
    }
}

fn entities() -> impl Strategy<Value = Vec<LinkedEntity>> {
    prop::collection::vec(
        (1u32..8, 0.0f64..=1.0, "[a-z]{1,5}").prop_map(|(n, score, s)| LinkedEntity {
            surface: s.clone(),
            kb_id: format!("Q{n}"),
            label: s,
            score,
        }),
        0..6,
    )
}

fn items() -> impl Strategy<Value = Vec<EvidenceItem>> {
    prop::collection::vec("[a-c ]{0,3}".prop_map(|t| EvidenceItem::new(EvidenceKind::Text, t)), 0..6)
}

fn prediction() -> impl Strategy<Value = Prediction> {
    let kind = prop::sample::select(vec![EvidenceKind::Kb, EvidenceKind::Text, EvidenceKind::Table, EvidenceKind::Infobox, EvidenceKind::LlmClaim]);
    ("[ab]{0,2}", prop::collection::vec((kind, "[ab ]{0,6}"), 0..4)).prop_map(|(gold, evidences)| Prediction {
        question: "q".into(),
        gold: Some(gold),
        answer_generated: "x".into(),
        evidences,
    })
}
