use std::path::PathBuf;

use floodlense_core::evaluation::reference;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Set FLOODLENSE_BLESS=1 to rewrite the stored renderings.
#[test]
fn reference_tables_match_golden_files() {
    let bless = std::env::var_os("FLOODLENSE_BLESS").is_some();
    for (name, table) in reference::all() {
        let path = golden_dir().join(format!("{name}.txt"));
        let rendered = table.render();
        if bless {
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        let stored = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(rendered, stored, "{name} drifted from its golden file");
    }
}

#[test]
fn json_and_text_carry_the_same_numbers() {
    for (name, table) in reference::all() {
        let text = table.render();
        let json = table.to_json();
        for row in json.as_object().unwrap().values() {
            for v in row.as_object().unwrap().values() {
                let v = v.as_f64().unwrap();
                assert!(text.contains(&format!("{v:.5}")), "{name}: {v} missing from text");
            }
        }
    }
}
