use satfuse::features::catalog;

fn doc() -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/feature_catalog.md");
    std::fs::read_to_string(path).unwrap()
}

/// Backticked names from table rows whose first cell is a number.
fn table_names(text: &str) -> Vec<(usize, String)> {
    text.lines()
        .filter_map(|l| {
            let cells: Vec<&str> = l.split('|').map(str::trim).collect();
            let idx = cells.get(1)?.parse().ok()?;
            let name = cells.get(2)?.strip_prefix('`')?.strip_suffix('`')?;
            Some((idx, name.to_string()))
        })
        .collect()
}

#[test]
fn doc_lists_catalog_in_order() {
    let text = doc();
    assert!(text.contains(&format!("Catalog version {}", catalog::CATALOG_VERSION)));
    let (full, selected) = text.split_once("## Selected features").unwrap();
    let full = table_names(full);
    assert_eq!(full.len(), catalog::CATALOG_LEN);
    for (i, ((idx, name), code)) in full.iter().zip(catalog::names()).enumerate() {
        assert_eq!((*idx, name), (i, code));
    }
    let selected = table_names(selected);
    assert_eq!(selected.len(), catalog::SELECTED_LEN);
    for (i, ((rank, name), code)) in selected.iter().zip(catalog::SELECTED).enumerate() {
        assert_eq!((*rank, name.as_str()), (i + 1, code));
    }
}
