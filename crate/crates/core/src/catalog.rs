//! Built-in model files.

const ENTRIES: [(&str, &str); 3] = [
    ("bubble", include_str!("../catalog/bubble.toml")),
    ("chiral", include_str!("../catalog/chiral.toml")),
    ("geodesic", include_str!("../catalog/geodesic.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|(n, _)| *n)
}

/// Model-file text for a catalog entry.
pub fn source(name: &str) -> Option<&'static str> {
    ENTRIES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffineModel;

    #[test]
    fn every_entry_loads() {
        for name in names() {
            let m = AffineModel::load(source(name).unwrap()).unwrap();
            assert_eq!(m.name(), name);
        }
        assert!(source("nosuch").is_none());
    }
}
