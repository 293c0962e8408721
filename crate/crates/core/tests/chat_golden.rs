mod common;

use aphasr::chat::{clean_document, clean_files, clean_text, parse_chat, LAUGHTER_TOKEN};
use proptest::prelude::*;

fn golden() -> (String, String) {
    let cha = std::fs::read_to_string(common::fixture("golden.cha")).unwrap();
    let expected = std::fs::read_to_string(common::fixture("golden.expected.jsonl")).unwrap();
    (cha, expected)
}

#[test]
fn golden_transcript_matches_expected_jsonl() {
    let (cha, expected) = golden();
    let actual = common::clean_to_jsonl(&cha);
    for (i, (a, e)) in actual.lines().zip(expected.lines()).enumerate() {
        assert_eq!(a, e, "line {}", i + 1);
    }
    assert_eq!(actual, expected);
    assert!(expected.lines().count() >= 25);
}

#[test]
fn golden_output_is_identical_across_runs_and_thread_counts() {
    let (cha, expected) = golden();
    let inputs: Vec<String> = (0..12).map(|_| cha.clone()).collect();
    let run = |threads: usize| -> Vec<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| clean_files(&inputs))
            .unwrap()
            .iter()
            .map(|(_, clean)| aphasr::io::to_jsonl(clean).unwrap())
            .collect()
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert!(one.iter().all(|s| *s == expected));
    assert_eq!(run(4), four);
}

#[test]
fn documented_examples() {
    let doc =
        parse_chat("@Participants:\tPAR Participant\n*PAR:\thello . \u{2022}100_900\u{2022}\n")
            .unwrap();
    assert_eq!(doc.utterances.len(), 1);
    let u = &doc.utterances[0];
    assert_eq!(
        (u.speaker_code.as_str(), u.text.as_str()),
        ("PAR", "hello .")
    );
    assert_eq!((u.start_ms, u.end_ms), (Some(100), Some(900)));

    assert_eq!(
        clean_text("<I want> [/] I want coffee ."),
        ["I", "want", "I", "want", "coffee"]
    );
    assert_eq!(
        clean_text("&=laughs that was &-um funny ."),
        ["<LAU>", "that", "was", "um", "funny"]
    );
    assert!(clean_text("xxx [% unclear] .").is_empty());

    let header_only = parse_chat("@Begin\n@Participants:\tPAR Participant\n@End\n").unwrap();
    assert!(header_only.utterances.is_empty());
    assert!(clean_document(&header_only).is_empty());
}

const PIECES: &[&str] = &[
    "dog",
    "cat",
    "I",
    "want",
    "don't",
    "ice-cream",
    "[/]",
    "[//]",
    "[x 2]",
    "<the",
    "big>",
    "&-um",
    "&-uh",
    "&+fr",
    "&+b",
    "bɪg@u",
    "mama@f",
    "&=laughs",
    "&=coughs",
    "&=giggles",
    "[+ gram]",
    "[- spa]",
    "[% comment here]",
    "[= explanation]",
    "[: target]",
    "[* p:w]",
    "(.)",
    "(..)",
    "(...)",
    "[<]",
    "[>]",
    "xxx",
    "yyy",
    "www",
    ".",
    "?",
    "!",
    ",",
    "+...",
    "+/.",
    "+//.",
    "0is",
    "sh(e)",
    "&*INV:yeah",
    "[!]",
    "[?]",
    "„",
    "‡",
    "&~ga",
    "<LAU>",
];

fn utterance() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(PIECES), 0..12).prop_map(|p| p.join(" "))
}

fn marker_free(token: &str) -> bool {
    token == LAUGHTER_TOKEN || !token.contains(['[', ']', '<', '>', '&', '%', '@'])
}

proptest! {
    #[test]
    fn cleaning_is_idempotent(text in utterance()) {
        let once = clean_text(&text);
        prop_assert_eq!(clean_text(&once.join(" ")), once);
    }

    #[test]
    fn no_marker_survives(text in utterance()) {
        for t in clean_text(&text) {
            prop_assert!(marker_free(&t), "token {:?} from {:?}", t, text);
            prop_assert!(!t.is_empty());
        }
    }

    #[test]
    fn documents_only_shrink_and_are_deterministic(lines in prop::collection::vec(utterance(), 0..8)) {
        let mut doc = String::from("@Participants:\tPAR Participant\n");
        for (i, l) in lines.iter().enumerate() {
            doc.push_str(&format!("*PAR:\t{l} \u{2022}{}_{}\u{2022}\n", i * 1000, i * 1000 + 500));
        }
        let parsed = parse_chat(&doc).unwrap();
        let clean = clean_document(&parsed);
        prop_assert!(clean.len() <= parsed.utterances.len());
        prop_assert!(clean.iter().all(|u| !u.tokens.is_empty()));
        prop_assert_eq!(common::clean_to_jsonl(&doc), common::clean_to_jsonl(&doc));
    }
}
