//! Byte-exact prompt snapshots. Set `AERKIT_BLESS=1` to rewrite them.

mod common;

use common::{data, golden_prompts};

#[test]
fn prompts_match_golden_files() {
    let bless = std::env::var_os("AERKIT_BLESS").is_some();
    let (cases, _) = golden_prompts();
    for (name, rendered) in cases {
        let path = data("golden").join(&name);
        if bless {
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(rendered, expected, "{name} drifted; rerun with AERKIT_BLESS=1 if intended");
    }
}

#[test]
fn aer_rounds_change_only_the_retrieved_line() {
    let (_, rounds) = golden_prompts();
    let base: Vec<&str> = rounds[0].lines().collect();
    for (i, round) in rounds.iter().enumerate().skip(1) {
        let lines: Vec<&str> = round.lines().collect();
        assert_eq!(lines.len(), base.len());
        let changed: Vec<usize> = (0..base.len()).filter(|&j| base[j] != lines[j]).collect();
        assert_eq!(changed.len(), 1, "round {i}");
        assert!(lines[changed[0]].ends_with("-> Emotion: sad"), "{}", lines[changed[0]]);
    }
}
