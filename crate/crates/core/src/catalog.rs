//! App marketplace model: categories, apps with keyword multisets, the
//! interest taxonomy, and keyword-based similarity between apps.
//!
//! Keyword vectors use tf-idf with a smoothed idf, `ln(1 + N/df)`, so a term
//! present in every app of the catalog still carries weight.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Lowercases, folds to ASCII, strips punctuation and collapses whitespace.
///
/// Returns `None` when nothing survives normalization.
pub fn normalize_term(raw: &str) -> Option<String> {
    let folded: String = raw
        .nfkd()
        .filter(char::is_ascii)
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    let term = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    (!term.is_empty()).then_some(term)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppCategory {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct App {
    pub id: String,
    pub category: String,
    /// Normalized keyword multiset, in document order.
    pub keywords: Vec<String>,
    pub refresh_rate_s: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interest {
    pub id: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestCategory {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub interests: Vec<Interest>,
}

/// On-disk catalog layout. Apps and categories are required; the interest
/// taxonomy and the static app-category to interest-category table are optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CatalogDocument {
    #[serde(default = "default_true")]
    pub include_category_term: bool,
    #[serde(default)]
    pub categories: Vec<AppCategory>,
    #[serde(default)]
    pub apps: Vec<App>,
    #[serde(default)]
    pub interest_categories: Vec<InterestCategory>,
    #[serde(default)]
    pub category_map: BTreeMap<String, Vec<String>>,
}

fn default_true() -> bool {
    true
}

impl CatalogDocument {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("catalog", e))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn catalog(&self) -> Result<AppCatalog> {
        AppCatalog::new(
            self.categories.clone(),
            self.apps.clone(),
            self.include_category_term,
        )
    }

    pub fn taxonomy(&self, catalog: &AppCatalog) -> Result<InterestTaxonomy> {
        InterestTaxonomy::new(
            self.interest_categories.clone(),
            self.category_map.clone(),
            catalog,
        )
    }
}

/// Parses and validates a TOML catalog document.
pub fn load_catalog(source: &str) -> Result<AppCatalog> {
    CatalogDocument::from_toml_str(source)?.catalog()
}

/// Sparse non-negative term weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TermWeightVector(BTreeMap<String, f64>);

impl TermWeightVector {
    pub fn weight(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(t, w)| (t.as_str(), *w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|w| *w == 0.0)
    }

    pub fn dot(&self, other: &TermWeightVector) -> f64 {
        // iterate over the shorter map
        let (small, large) = if self.0.len() <= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.0.iter().map(|(term, w)| w * large.weight(term)).sum()
    }
}

/// Immutable, validated app catalog with precomputed tf-idf vectors.
#[derive(Debug, Clone)]
pub struct AppCatalog {
    categories: Vec<AppCategory>,
    apps: Vec<App>,
    index: BTreeMap<String, usize>,
    include_category_term: bool,
    vectors: Vec<TermWeightVector>,
    term_sets: Vec<BTreeSet<String>>,
}

impl AppCatalog {
    pub fn new(categories: Vec<AppCategory>, apps: Vec<App>, include_category_term: bool) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::Empty("category list"));
        }
        if apps.is_empty() {
            return Err(Error::Empty("app list"));
        }
        let mut category_ids = BTreeSet::new();
        for c in &categories {
            if !category_ids.insert(c.id.as_str()) {
                return Err(Error::invalid("categories", format!("duplicate id `{}`", c.id)));
            }
        }

        let mut index = BTreeMap::new();
        let mut normalized = Vec::with_capacity(apps.len());
        for (i, mut app) in apps.into_iter().enumerate() {
            if !category_ids.contains(app.category.as_str()) {
                return Err(Error::UnknownCategory(app.category));
            }
            if index.insert(app.id.clone(), i).is_some() {
                return Err(Error::DuplicateApp(app.id));
            }
            if app.refresh_rate_s == 0 {
                return Err(Error::invalid(
                    format!("apps.{}.refresh_rate_s", app.id),
                    "must be > 0",
                ));
            }
            app.keywords = app.keywords.iter().filter_map(|k| normalize_term(k)).collect();
            if app.keywords.is_empty() {
                return Err(Error::invalid(
                    format!("apps.{}.keywords", app.id),
                    "no keywords left after normalization",
                ));
            }
            normalized.push(app);
        }

        let mut catalog = AppCatalog {
            categories,
            apps: normalized,
            index,
            include_category_term,
            vectors: Vec::new(),
            term_sets: Vec::new(),
        };
        catalog.build_vectors();
        Ok(catalog)
    }

    fn build_vectors(&mut self) {
        let bags: Vec<Vec<String>> = self.apps.iter().map(|a| self.term_bag(a)).collect();
        let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
        for bag in &bags {
            let unique: BTreeSet<&str> = bag.iter().map(String::as_str).collect();
            for term in unique {
                *doc_freq.entry(term).or_default() += 1;
            }
        }
        let n = self.apps.len() as f64;
        let vectors = bags
            .iter()
            .map(|bag| {
                let len = bag.len() as f64;
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for term in bag {
                    *counts.entry(term).or_default() += 1;
                }
                TermWeightVector(
                    counts
                        .into_iter()
                        .map(|(term, count)| {
                            let idf = (1.0 + n / doc_freq[term] as f64).ln();
                            (term.to_string(), count as f64 / len * idf)
                        })
                        .collect(),
                )
            })
            .collect();
        self.term_sets = bags.iter().map(|bag| bag.iter().cloned().collect()).collect();
        self.vectors = vectors;
    }

    /// Keyword multiset used for tf-idf, including the category name when enabled.
    fn term_bag(&self, app: &App) -> Vec<String> {
        let mut bag = app.keywords.clone();
        if self.include_category_term {
            if let Some(term) = self.category(&app.category).and_then(|c| normalize_term(&c.name)) {
                bag.push(term);
            }
        }
        bag
    }

    pub fn apps(&self) -> &[App] {
        &self.apps
    }

    pub fn categories(&self) -> &[AppCategory] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }

    pub fn include_category_term(&self) -> bool {
        self.include_category_term
    }

    pub fn app(&self, id: &str) -> Result<&App> {
        self.index
            .get(id)
            .map(|&i| &self.apps[i])
            .ok_or_else(|| Error::UnknownApp(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn category(&self, id: &str) -> Option<&AppCategory> {
        self.categories.iter().find(|c| c.id == id)
    }

    /// Distinct normalized terms of an app (category term included when enabled).
    pub fn term_set(&self, app_id: &str) -> Result<&BTreeSet<String>> {
        let i = self.position(app_id)?;
        Ok(&self.term_sets[i])
    }

    pub fn keyword_vector(&self, app_id: &str) -> Result<&TermWeightVector> {
        let i = self.position(app_id)?;
        Ok(&self.vectors[i])
    }

    fn position(&self, app_id: &str) -> Result<usize> {
        self.index
            .get(app_id)
            .copied()
            .ok_or_else(|| Error::UnknownApp(app_id.to_string()))
    }
}

/// tf-idf weights of `app`'s keywords against the whole catalog.
pub fn keyword_vector(app: &App, catalog: &AppCatalog) -> Result<TermWeightVector> {
    catalog.keyword_vector(&app.id).cloned()
}

/// A similarity measure between two catalog apps, valued in `[0, 1]`.
pub trait SimilarityMetric {
    fn similarity(&self, catalog: &AppCatalog, a: &str, b: &str) -> Result<f64>;
}

/// Cosine of the tf-idf vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cosine;

impl SimilarityMetric for Cosine {
    fn similarity(&self, catalog: &AppCatalog, a: &str, b: &str) -> Result<f64> {
        let va = catalog.keyword_vector(a)?;
        let vb = catalog.keyword_vector(b)?;
        let denom = va.norm() * vb.norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        if a == b {
            return Ok(1.0);
        }
        Ok((va.dot(vb) / denom).clamp(0.0, 1.0))
    }
}

/// Jaccard index of the distinct term sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct Jaccard;

impl SimilarityMetric for Jaccard {
    fn similarity(&self, catalog: &AppCatalog, a: &str, b: &str) -> Result<f64> {
        let sa = catalog.term_set(a)?;
        let sb = catalog.term_set(b)?;
        let union = sa.union(sb).count();
        if union == 0 {
            return Ok(0.0);
        }
        Ok(sa.intersection(sb).count() as f64 / union as f64)
    }
}

/// Config-selectable metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Jaccard,
}

impl SimilarityMetric for Metric {
    fn similarity(&self, catalog: &AppCatalog, a: &str, b: &str) -> Result<f64> {
        match self {
            Metric::Cosine => Cosine.similarity(catalog, a, b),
            Metric::Jaccard => Jaccard.similarity(catalog, a, b),
        }
    }
}

/// Cosine similarity over tf-idf keyword vectors.
pub fn similarity(a: &App, b: &App, catalog: &AppCatalog) -> Result<f64> {
    Cosine.similarity(catalog, &a.id, &b.id)
}

/// Interest categories with keyword-bearing interests, plus the static
/// app-category to interest-category table.
#[derive(Debug, Clone)]
pub struct InterestTaxonomy {
    categories: Vec<InterestCategory>,
    category_map: BTreeMap<String, Vec<String>>,
}

impl InterestTaxonomy {
    pub fn new(
        mut categories: Vec<InterestCategory>,
        category_map: BTreeMap<String, Vec<String>>,
        catalog: &AppCatalog,
    ) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::Empty("interest taxonomy"));
        }
        let mut ids = BTreeSet::new();
        for cat in &mut categories {
            if !ids.insert(cat.id.clone()) {
                return Err(Error::invalid(
                    "interest_categories",
                    format!("duplicate id `{}`", cat.id),
                ));
            }
            let mut interest_ids = BTreeSet::new();
            for interest in &mut cat.interests {
                if !interest_ids.insert(interest.id.clone()) {
                    return Err(Error::invalid(
                        format!("interest_categories.{}", cat.id),
                        format!("duplicate interest `{}`", interest.id),
                    ));
                }
                interest.keywords = interest
                    .keywords
                    .iter()
                    .filter_map(|k| normalize_term(k))
                    .collect();
            }
        }
        for (app_category, targets) in &category_map {
            if catalog.category(app_category).is_none() {
                return Err(Error::UnknownCategory(app_category.clone()));
            }
            if let Some(bad) = targets.iter().find(|t| !ids.contains(*t)) {
                return Err(Error::UnknownCategory(bad.clone()));
            }
        }
        Ok(InterestTaxonomy {
            categories,
            category_map,
        })
    }

    pub fn categories(&self) -> &[InterestCategory] {
        &self.categories
    }

    pub fn contains(&self, id: &str) -> bool {
        self.categories.iter().any(|c| c.id == id)
    }

    /// Interest categories statically mapped from an app category.
    pub fn mapped(&self, app_category: &str) -> &[String] {
        self.category_map
            .get(app_category)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn app(id: &str, category: &str, keywords: &[&str]) -> App {
        App {
            id: id.into(),
            category: category.into(),
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
            refresh_rate_s: 30,
        }
    }

    fn cats(ids: &[&str]) -> Vec<AppCategory> {
        ids.iter()
            .map(|id| AppCategory {
                id: id.to_string(),
                name: id.to_string(),
            })
            .collect()
    }

    fn toy() -> AppCatalog {
        AppCatalog::new(
            cats(&["photo", "music"]),
            vec![
                app("a", "photo", &["photo", "editor", "filter"]),
                app("b", "photo", &["photo", "camera"]),
                app("c", "music", &["music", "player"]),
            ],
            false,
        )
        .unwrap()
    }

    #[test]
    fn normalizes_case_accents_and_punctuation() {
        assert_eq!(normalize_term("  Café-Racer!! ").as_deref(), Some("cafe racer"));
        assert_eq!(normalize_term("ÉDITEUR"), Some("editeur".into()));
        assert_eq!(normalize_term("?!"), None);
    }

    #[test]
    fn loads_three_app_document() {
        let doc = r#"
            [[categories]]
            id = "photo"
            name = "Photography"
            [[categories]]
            id = "music"
            name = "Music"

            [[apps]]
            id = "a"
            category = "photo"
            keywords = ["photo", "editor"]
            refresh_rate_s = 20
            [[apps]]
            id = "b"
            category = "photo"
            keywords = ["camera"]
            refresh_rate_s = 30
            [[apps]]
            id = "c"
            category = "music"
            keywords = ["player"]
            refresh_rate_s = 60
        "#;
        let catalog = load_catalog(doc).unwrap();
        assert_eq!(catalog.len(), 3);
        assert!(catalog.include_category_term());
        // category name joins the keyword multiset
        assert!(catalog.term_set("b").unwrap().contains("photography"));
    }

    #[test]
    fn rejects_unknown_category() {
        let doc = r#"
            [[categories]]
            id = "photo"
            name = "Photo"
            [[apps]]
            id = "a"
            category = "casino"
            keywords = ["dice"]
            refresh_rate_s = 20
        "#;
        let err = load_catalog(doc).unwrap_err();
        assert!(err.to_string().contains("unknown category"), "{err}");
    }

    #[test]
    fn rejects_empty_app_list_and_duplicates() {
        let empty = "[[categories]]\nid = \"x\"\nname = \"x\"\n";
        assert!(matches!(load_catalog(empty), Err(Error::Empty(_))));

        let dup = AppCatalog::new(
            cats(&["x"]),
            vec![app("a", "x", &["k"]), app("a", "x", &["j"])],
            false,
        );
        assert!(matches!(dup, Err(Error::DuplicateApp(id)) if id == "a"));
    }

    #[test]
    fn smoothed_tf_idf_weights() {
        // κ = {x, x, y}; x appears in every app of the catalog
        let catalog = AppCatalog::new(
            cats(&["c"]),
            vec![app("a", "c", &["x", "x", "y"]), app("b", "c", &["x", "z"])],
            false,
        )
        .unwrap();
        let v = catalog.keyword_vector("a").unwrap();
        assert!((v.weight("x") - 0.46209812037329684).abs() < 1e-15);
        assert_eq!(v.weight("absent"), 0.0);
    }

    #[test]
    fn single_app_vector_is_not_zero() {
        let catalog = AppCatalog::new(cats(&["c"]), vec![app("a", "c", &["x"])], false).unwrap();
        let v = catalog.keyword_vector("a").unwrap();
        assert_eq!(v.weight("x"), std::f64::consts::LN_2);
        assert!(!v.is_zero());
    }

    #[test]
    fn cosine_matches_hand_computed_value() {
        let catalog = toy();
        let s = Cosine.similarity(&catalog, "a", "b").unwrap();
        assert!((s - 0.23346937495974898).abs() < 1e-12, "{s}");
        assert_eq!(Cosine.similarity(&catalog, "a", "c").unwrap(), 0.0);
        assert_eq!(Cosine.similarity(&catalog, "b", "b").unwrap(), 1.0);
    }

    #[test]
    fn jaccard_alternative() {
        let catalog = toy();
        // {photo, editor, filter} vs {photo, camera}
        assert_eq!(Jaccard.similarity(&catalog, "a", "b").unwrap(), 0.25);
        assert_eq!(Metric::Jaccard.similarity(&catalog, "a", "c").unwrap(), 0.0);
    }

    #[test]
    fn unknown_app_is_an_error() {
        let catalog = toy();
        assert!(matches!(
            Cosine.similarity(&catalog, "a", "nope"),
            Err(Error::UnknownApp(_))
        ));
    }

    #[test]
    fn taxonomy_rejects_dangling_map_entries() {
        let catalog = toy();
        let interests = vec![InterestCategory {
            id: "arts".into(),
            name: "Arts".into(),
            interests: vec![],
        }];
        let mut map = BTreeMap::new();
        map.insert("photo".to_string(), vec!["nope".to_string()]);
        assert!(InterestTaxonomy::new(interests.clone(), map, &catalog).is_err());

        let mut map = BTreeMap::new();
        map.insert("photo".to_string(), vec!["arts".to_string()]);
        let tax = InterestTaxonomy::new(interests, map, &catalog).unwrap();
        assert_eq!(tax.mapped("photo"), ["arts".to_string()]);
        assert!(tax.mapped("music").is_empty());
    }
}
