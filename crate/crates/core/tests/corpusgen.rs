use std::collections::{BTreeSet, HashSet};
use std::fs;

use rand::RngCore;
use repdecode::corpusgen::*;
use repdecode::rng::{below_usize, seeded};

/// Fine-grained English tags of a common statistical tagger, without its
/// whitespace tag.
const TAGSET: [&str; 49] = [
    "$", "``", "''", ",", "-LRB-", "-RRB-", ".", ":", "ADD", "AFX", "CC", "CD", "DT", "EX", "FW",
    "HYPH", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NFP", "NN", "NNP", "NNPS", "NNS", "PDT", "POS",
    "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "WDT", "WP", "WP$", "WRB", "XX",
];

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn random_sentence(rng: &mut impl RngCore, len: usize) -> Vec<String> {
    (0..len).map(|_| format!("w{}", below_usize(rng, 50))).collect()
}

fn sorted(v: &[String]) -> Vec<String> {
    let mut v = v.to_vec();
    v.sort();
    v
}

#[test]
fn golden_shuffle_seed_42() {
    // the raw stream pins the generator, the permutation pins the shuffle
    let mut rng = seeded(42);
    let raw: Vec<u64> = (0..5).map(|_| rng.next_u64()).collect();
    assert_eq!(
        raw,
        [
            4178418447715145737,
            4410739922618931473,
            14034899209665866285,
            9736923071240364268,
            17902128262962705724
        ]
    );
    assert_eq!(scramble_sentence(&words("a b c d e f"), 42), words("c a e f d b"));
}

#[test]
fn scrambling_preserves_multisets() {
    let mut rng = seeded(7);
    for seed in 0..1000u64 {
        let len = 1 + below_usize(&mut rng, 30);
        let s = random_sentence(&mut rng, len);
        assert_eq!(sorted(&scramble_sentence(&s, seed)), sorted(&s));

        let para: Vec<Vec<String>> = (0..1 + below_usize(&mut rng, 5))
            .map(|_| {
                let len = 1 + below_usize(&mut rng, 12);
                random_sentence(&mut rng, len)
            })
            .collect();
        let out = scramble_paragraph(&para, seed);
        let lens: Vec<usize> = out.iter().map(Vec::len).collect();
        assert_eq!(lens, para.iter().map(Vec::len).collect::<Vec<_>>());
        assert_eq!(sorted(&out.concat()), sorted(&para.concat()));
    }
}

#[test]
fn one_sentence_paragraph_equals_sentence_scramble() {
    let s = words("one two three four five");
    assert_eq!(scramble_paragraph(&[s.clone()], 9), vec![scramble_sentence(&s, 9)]);
}

#[test]
fn empirical_mask_rate() {
    let cfg = MaskConfig::default();
    let vocab = words("x y z");
    let mut rng = seeded(11);
    let mut selected = 0usize;
    for seed in 0..10_000u64 {
        let s = random_sentence(&mut rng, 20);
        let ex = mask_cloze(&s, seed, &cfg, &vocab).unwrap();
        for (&p, t) in ex.positions.iter().zip(&ex.targets) {
            assert_eq!(t, &s[p]);
        }
        selected += ex.positions.len();
    }
    let rate = selected as f64 / 200_000.0;
    assert!((rate - 0.15).abs() < 0.01, "rate {rate}");
}

#[test]
fn replacement_split() {
    let cfg = MaskConfig::default();
    let vocab = words("RANDOM");
    let s = words("a b c d e f g h i j");
    let (mut masked, mut random, mut kept) = (0usize, 0usize, 0usize);
    for seed in 0..5000u64 {
        let ex = mask_cloze(&s, seed, &cfg, &vocab).unwrap();
        for &p in &ex.positions {
            match ex.input[p].as_str() {
                MASK_TOKEN => masked += 1,
                "RANDOM" => random += 1,
                w => {
                    assert_eq!(w, s[p]);
                    kept += 1
                }
            }
        }
        for (i, w) in ex.input.iter().enumerate() {
            if !ex.positions.contains(&i) {
                assert_eq!(w, &s[i]);
            }
        }
    }
    let total = (masked + random + kept) as f64;
    assert!((masked as f64 / total - 0.8).abs() < 0.02);
    assert!((random as f64 / total - 0.1).abs() < 0.02);
    assert!((kept as f64 / total - 0.1).abs() < 0.02);
}

#[test]
fn mask_only_targets_hold_the_mask_token() {
    let s = words("a b c d e f g h");
    for seed in 0..200 {
        let ex = mask_cloze(&s, seed, &MaskConfig::mask_only(0.3), &[]).unwrap();
        assert!(ex.positions.iter().all(|&p| ex.input[p] == MASK_TOKEN));
    }
}

/// First seed whose selection is exactly `want`.
fn seed_selecting(tokens: &[String], tags: &[String], want: &[usize]) -> ClozeExample {
    let cfg = MaskConfig::mask_only(0.15);
    (0..10_000)
        .map(|seed| pos_targets(tokens, tags, seed, &cfg, &[]).unwrap())
        .find(|ex| ex.positions == want)
        .expect("some seed selects the position alone")
}

#[test]
fn tag_targets_for_table_examples() {
    let tokens = words("a couple of lordlings went .");
    let tags = words("DT NN IN NNS VBD .");
    let ex = seed_selecting(&tokens, &tags, &[4]);
    assert_eq!(ex.input.join(" "), "a couple of lordlings [MASK] .");
    assert_eq!(ex.targets, ["VBD"]);

    let tokens = words("the blond boy , who at fourteen was so much taller than anderra");
    let tags = words("DT JJ NN , WP IN CD VBD RB RB JJR IN NNP");
    let ex = seed_selecting(&tokens, &tags, &[8]);
    assert!(ex.input.join(" ").contains("was [MASK] much taller"));
    assert_eq!(ex.targets, ["RB"]);
}

#[test]
fn missing_tag_is_an_error() {
    let tokens = words("a b c");
    let tags = words("X");
    let cfg = MaskConfig::mask_only(0.99);
    assert!(pos_targets(&tokens, &tags, 1, &cfg, &[]).is_err());
}

fn docs_from(text: &str) -> Vec<Document> {
    parse_corpus(text).unwrap()
}

#[test]
fn adjacent_draw_from_two_sentence_document() {
    let docs = docs_from("s1 x\ns2 y\n\n\nother z\n");
    let pair = nsp_pairs(&docs, 3).unwrap().find(|p| p.adjacent).unwrap();
    assert_eq!(pair.a.tokens, words("s1 x"));
    assert_eq!(pair.b.tokens, words("s2 y"));
}

#[test]
fn nsp_adjacency_rate_and_provenance() {
    let mut text = String::new();
    for d in 0..20 {
        for p in 0..3 {
            for s in 0..4 {
                text.push_str(&format!("d{d} p{p} s{s}\n"));
            }
            text.push('\n');
        }
        text.push('\n');
    }
    let docs = docs_from(&text);
    assert_eq!(docs.len(), 20);
    let mut adjacent = 0;
    for pair in nsp_pairs(&docs, 5).unwrap().take(10_000) {
        let doc_a = &pair.a.tokens[0];
        let doc_b = &pair.b.tokens[0];
        if pair.adjacent {
            adjacent += 1;
            assert_eq!(doc_a, doc_b);
        } else {
            assert_ne!(doc_a, doc_b);
        }
    }
    let rate = adjacent as f64 / 10_000.0;
    assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
}

/// 20 distinct tagged sentences in 4 documents.
fn fixture_corpus(tagged: bool) -> String {
    let mut rng = seeded(99);
    let mut text = String::new();
    for d in 0..4 {
        for p in 0..2 {
            for s in 0..(2 + (d + p) % 2) {
                let len = 4 + below_usize(&mut rng, 6);
                let toks: Vec<String> = (0..len).map(|i| format!("d{d}p{p}s{s}t{i}")).collect();
                text.push_str(&toks.join(" "));
                if tagged {
                    let tags: Vec<&str> =
                        (0..len).map(|_| TAGSET[below_usize(&mut rng, TAGSET.len())]).collect();
                    text.push('\t');
                    text.push_str(&tags.join(" "));
                }
                text.push('\n');
            }
            text.push('\n');
        }
        text.push('\n');
    }
    text
}

#[test]
fn fixture_has_twenty_sentences() {
    let docs = docs_from(&fixture_corpus(false));
    assert_eq!(docs.iter().map(Document::sentence_count).sum::<usize>(), 20);
}

fn build(task: Task, seed: u64) -> (tempfile::TempDir, Dataset) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, fixture_corpus(true)).unwrap();
    let sizes = SplitSizes {
        train: 10,
        dev: 2,
        test: 2,
    };
    let data = build_dataset(&corpus, task, sizes, seed, &MaskConfig::default(), dir.path().join("out")).unwrap();
    (dir, data)
}

#[test]
fn requested_sizes_are_written() {
    for task in Task::ALL {
        let (dir, _) = build(task, 1);
        for (name, n) in [("train", 10), ("dev", 2), ("test", 2)] {
            let text = fs::read_to_string(dir.path().join("out").join(format!("{name}.jsonl"))).unwrap();
            assert_eq!(text.lines().count(), n, "{task} {name}");
            for line in text.lines() {
                let ex: ClozeExample = serde_json::from_str(line).unwrap();
                assert_eq!(serde_json::to_string(&ex).unwrap(), line);
                assert!(ex.nsp.is_some());
            }
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    for task in Task::ALL {
        let (a, _) = build(task, 17);
        let (b, _) = build(task, 17);
        for name in ["train", "dev", "test"] {
            let f = format!("out/{name}.jsonl");
            assert_eq!(
                fs::read(a.path().join(&f)).unwrap(),
                fs::read(b.path().join(&f)).unwrap(),
                "{task} {name}"
            );
        }
    }
    let (a, _) = build(Task::LmScrambled, 17);
    let (b, _) = build(Task::LmScrambled, 18);
    assert_ne!(
        fs::read(a.path().join("out/train.jsonl")).unwrap(),
        fs::read(b.path().join("out/train.jsonl")).unwrap()
    );
}

/// Original sentence an example came from, recovered from its unmasked
/// tokens (every fixture token names its sentence).
fn origin(ex: &ClozeExample) -> String {
    let tok = ex
        .input
        .iter()
        .enumerate()
        .find(|(i, _)| !ex.positions.contains(i))
        .map(|(_, t)| t.clone())
        .unwrap_or_else(|| ex.targets[0].clone());
    tok.split('t').next().unwrap().to_string()
}

#[test]
fn splits_are_disjoint() {
    let (_, data) = build(Task::Lm, 4);
    let sets: Vec<HashSet<String>> = data
        .splits()
        .iter()
        .map(|(_, exs)| exs.iter().map(origin).collect())
        .collect();
    assert_eq!(sets[0].len(), 10);
    assert!(sets[0].is_disjoint(&sets[1]));
    assert!(sets[0].is_disjoint(&sets[2]));
    assert!(sets[1].is_disjoint(&sets[2]));
}

#[test]
fn scrambled_pairs_are_scrambled_independently() {
    // both members are token permutations of real sentences
    let docs = docs_from(&fixture_corpus(false));
    let originals: HashSet<Vec<String>> = docs
        .iter()
        .flat_map(|d| d.sentences().map(|s| sorted(&s.tokens)))
        .collect();
    let data = build_examples(&docs, Task::LmScrambled, SplitSizes { train: 14, dev: 3, test: 3 }, 2, &MaskConfig::default()).unwrap();
    for ex in &data.train {
        assert!(originals.contains(&sorted(&ex.nsp.as_ref().unwrap().b)));
    }
}

#[test]
fn pos_dataset_stays_within_tagset() {
    let (_, data) = build(Task::LmPos, 6);
    let tags: BTreeSet<&str> = data
        .splits()
        .iter()
        .flat_map(|(_, exs)| exs.iter().flat_map(|e| e.targets.iter().map(String::as_str)))
        .collect();
    assert!(tags.len() <= 49);
    assert!(tags.iter().all(|t| TAGSET.contains(t)));
}

#[test]
fn oversized_request_fails() {
    let docs = docs_from(&fixture_corpus(false));
    let sizes = SplitSizes {
        train: 20,
        dev: 1,
        test: 0,
    };
    assert!(build_examples(&docs, Task::Lm, sizes, 0, &MaskConfig::default()).is_err());
    // part-of-speech targets need a tag column
    let sizes = SplitSizes {
        train: 5,
        dev: 1,
        test: 1,
    };
    assert!(build_examples(&docs, Task::LmPos, sizes, 0, &MaskConfig::default()).is_err());
}
