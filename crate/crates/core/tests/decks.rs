use std::path::Path;

use pwdft::pipeline::{deck_cell, load_deck, scf_options};

#[test]
fn bundled_decks_parse_cleanly() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../decks");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension() != Some("in".as_ref()) {
            continue;
        }
        let (deck, _) = load_deck(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(
            deck.warnings.is_empty(),
            "{}: {:?}",
            path.display(),
            deck.warnings
        );
        deck_cell(&deck).unwrap();
        scf_options(&deck, &mut Vec::new()).unwrap();
        n += 1;
    }
    assert!(n >= 5);
}
