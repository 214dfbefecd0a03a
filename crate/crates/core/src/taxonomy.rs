//! The animal-category universe.
//!
//! Two data files describe it. The category table is a UTF-8 CSV with header
//! `id,name,species_id,is_dog,is_insect`, one row per generator class. The
//! recipe cores are a JSON object mapping each of the five core names to an
//! array of category ids; an optional reserved key `pair_weights` maps
//! `"<core>+<core>"` to a relative weight for the recipe sampler's core-pair
//! draw (pairs not listed weigh 1).
//!
//! The bundled default covers ImageNet classes 0-397 minus the two extinct
//! ones (triceratops, trilobite). Species are one-per-category except for the
//! domestic dog (118 breeds), domestic cat, domestic chicken and grey wolf.
//! Core membership is a curated stand-in; it is data, not code.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CategoryId = u16;

pub const BUNDLED_CATEGORIES_CSV: &str = include_str!("../data/imagenet_animals.csv");
pub const BUNDLED_CORES_JSON: &str = include_str!("../data/recipe_cores.json");

const CSV_HEADER: [&str; 5] = ["id", "name", "species_id", "is_dog", "is_insect"];
const PAIR_WEIGHTS_KEY: &str = "pair_weights";
const MAX_CLASS_ID: CategoryId = 999;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid taxonomy: {0}")]
    Validation(String),
    #[error("unknown core `{0}`")]
    UnknownCore(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
    pub species_id: String,
    pub is_dog: bool,
    pub is_insect: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreName {
    Aquatic,
    Canine,
    Bird,
    Megafauna,
    Wildcard,
}

impl CoreName {
    pub const ALL: [CoreName; 5] = [
        CoreName::Aquatic,
        CoreName::Canine,
        CoreName::Bird,
        CoreName::Megafauna,
        CoreName::Wildcard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CoreName::Aquatic => "aquatic",
            CoreName::Canine => "canine",
            CoreName::Bird => "bird",
            CoreName::Megafauna => "megafauna",
            CoreName::Wildcard => "wildcard",
        }
    }
}

impl fmt::Display for CoreName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoreName {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoreName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| TaxonomyError::UnknownCore(s.to_string()))
    }
}

/// Recipe cores plus the optional core-pair weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecipeCores {
    pub members: BTreeMap<CoreName, BTreeSet<CategoryId>>,
    pub pair_weights: BTreeMap<(CoreName, CoreName), f64>,
}

impl RecipeCores {
    pub fn from_json(json: &str) -> Result<Self, TaxonomyError> {
        let value: serde_json::Value =
            serde_json::from_str(json).map_err(|e| TaxonomyError::Parse {
                line: e.line() as u64,
                message: e.to_string(),
            })?;
        let object = value
            .as_object()
            .ok_or_else(|| TaxonomyError::Validation("cores file must be a JSON object".into()))?;

        let mut cores = RecipeCores::default();
        for (key, entry) in object {
            if key == PAIR_WEIGHTS_KEY {
                let weights: BTreeMap<String, f64> = serde_json::from_value(entry.clone())
                    .map_err(|e| TaxonomyError::Validation(format!("{PAIR_WEIGHTS_KEY}: {e}")))?;
                for (pair, weight) in weights {
                    let (a, b) = pair.split_once('+').ok_or_else(|| {
                        TaxonomyError::Validation(format!("core pair `{pair}` is not `a+b`"))
                    })?;
                    let (a, b) = (a.parse::<CoreName>()?, b.parse::<CoreName>()?);
                    cores.pair_weights.insert(ordered(a, b), weight);
                }
                continue;
            }
            let core: CoreName = key.parse()?;
            let ids: Vec<CategoryId> = serde_json::from_value(entry.clone())
                .map_err(|e| TaxonomyError::Validation(format!("core `{key}`: {e}")))?;
            cores.members.insert(core, ids.into_iter().collect());
        }
        Ok(cores)
    }

    pub fn to_json(&self) -> String {
        let mut object = serde_json::Map::new();
        for (core, ids) in &self.members {
            object.insert(
                core.as_str().to_string(),
                serde_json::to_value(ids.iter().collect::<Vec<_>>()).expect("ids serialize"),
            );
        }
        if !self.pair_weights.is_empty() {
            let weights: serde_json::Map<String, serde_json::Value> = self
                .pair_weights
                .iter()
                .map(|((a, b), w)| (format!("{a}+{b}"), serde_json::json!(w)))
                .collect();
            object.insert(PAIR_WEIGHTS_KEY.to_string(), weights.into());
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(object)).expect("json")
    }
}

fn ordered(a: CoreName, b: CoreName) -> (CoreName, CoreName) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Which whole-taxonomy counts to enforce. The shipped universe must match
/// the generator's 396 animal classes and 118 dog breeds; toy taxonomies in
/// tests and simulations only need the structural invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expectations {
    pub categories: Option<usize>,
    pub dogs: Option<usize>,
    pub require_all_cores: bool,
}

impl Expectations {
    pub const STANDARD: Expectations = Expectations {
        categories: Some(Taxonomy::EXPECTED_CATEGORIES),
        dogs: Some(Taxonomy::EXPECTED_DOGS),
        require_all_cores: true,
    };

    pub const STRUCTURAL: Expectations = Expectations {
        categories: None,
        dogs: None,
        require_all_cores: false,
    };
}

/// Immutable after construction; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    categories: Vec<Category>,
    position: HashMap<CategoryId, usize>,
    cores: RecipeCores,
    species_index: BTreeMap<String, Vec<CategoryId>>,
}

impl Taxonomy {
    pub const EXPECTED_CATEGORIES: usize = 396;
    pub const EXPECTED_DOGS: usize = 118;

    pub fn bundled() -> Taxonomy {
        Taxonomy::parse(BUNDLED_CATEGORIES_CSV, BUNDLED_CORES_JSON)
            .expect("bundled taxonomy is valid")
    }

    pub fn load(categories_path: &Path, cores_path: &Path) -> Result<Taxonomy, TaxonomyError> {
        let read = |path: &Path| {
            std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
                path: path.to_path_buf(),
                source,
            })
        };
        Taxonomy::parse(&read(categories_path)?, &read(cores_path)?)
    }

    pub fn parse(categories_csv: &str, cores_json: &str) -> Result<Taxonomy, TaxonomyError> {
        let categories = parse_categories(categories_csv)?;
        let cores = RecipeCores::from_json(cores_json)?;
        Taxonomy::build(categories, cores, Expectations::STANDARD)
    }

    pub fn build(
        mut categories: Vec<Category>,
        cores: RecipeCores,
        expect: Expectations,
    ) -> Result<Taxonomy, TaxonomyError> {
        let invalid = |msg: String| Err(TaxonomyError::Validation(msg));

        categories.sort_by_key(|c| c.id);
        let mut position = HashMap::with_capacity(categories.len());
        for (i, category) in categories.iter().enumerate() {
            if category.id > MAX_CLASS_ID {
                return invalid(format!(
                    "category id {} exceeds {MAX_CLASS_ID}",
                    category.id
                ));
            }
            if category.name.trim().is_empty() || category.species_id.trim().is_empty() {
                return invalid(format!(
                    "category {} has an empty name or species",
                    category.id
                ));
            }
            if position.insert(category.id, i).is_some() {
                return invalid(format!("duplicate category id {}", category.id));
            }
        }
        if let Some(n) = expect.categories {
            if categories.len() != n {
                return invalid(format!(
                    "expected {n} categories, found {}",
                    categories.len()
                ));
            }
        }

        let mut species_index: BTreeMap<String, Vec<CategoryId>> = BTreeMap::new();
        for category in &categories {
            species_index
                .entry(category.species_id.clone())
                .or_default()
                .push(category.id);
        }

        let dogs: Vec<&Category> = categories.iter().filter(|c| c.is_dog).collect();
        if let Some(n) = expect.dogs {
            if dogs.len() != n {
                return invalid(format!("expected {n} dog categories, found {}", dogs.len()));
            }
        }
        if let Some(first) = dogs.first() {
            if dogs.iter().any(|d| d.species_id != first.species_id) {
                return invalid("dog categories span more than one species".into());
            }
            if species_index[&first.species_id].len() != dogs.len() {
                return invalid("the dog species contains non-dog categories".into());
            }
        }

        for (core, ids) in &cores.members {
            if ids.is_empty() {
                return invalid(format!("core `{core}` is empty"));
            }
            if let Some(missing) = ids.iter().find(|id| !position.contains_key(id)) {
                return invalid(format!("core `{core}` lists unknown category {missing}"));
            }
        }
        if expect.require_all_cores {
            if let Some(core) = CoreName::ALL
                .iter()
                .find(|c| !cores.members.contains_key(c))
            {
                return invalid(format!("core `{core}` is missing"));
            }
        }
        for (&(a, b), &w) in &cores.pair_weights {
            if a == b {
                return invalid(format!("core pair `{a}+{b}` repeats one core"));
            }
            if !w.is_finite() || w < 0.0 {
                return invalid(format!("core pair `{a}+{b}` has weight {w}"));
            }
        }

        Ok(Taxonomy {
            categories,
            position,
            cores,
            species_index,
        })
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Categories in ascending id order.
    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn get(&self, id: CategoryId) -> Option<&Category> {
        self.position.get(&id).map(|&i| &self.categories[i])
    }

    pub fn contains(&self, id: CategoryId) -> bool {
        self.position.contains_key(&id)
    }

    pub fn is_dog(&self, id: CategoryId) -> bool {
        self.get(id).is_some_and(|c| c.is_dog)
    }

    pub fn is_insect(&self, id: CategoryId) -> bool {
        self.get(id).is_some_and(|c| c.is_insect)
    }

    pub fn dog_count(&self) -> usize {
        self.categories.iter().filter(|c| c.is_dog).count()
    }

    /// Species id → member categories (ascending). Partitions the universe.
    pub fn species_index(&self) -> &BTreeMap<String, Vec<CategoryId>> {
        &self.species_index
    }

    pub fn species_count(&self) -> usize {
        self.species_index.len()
    }

    pub fn cores(&self) -> &RecipeCores {
        &self.cores
    }

    pub fn core(&self, core: CoreName) -> Option<&BTreeSet<CategoryId>> {
        self.cores.members.get(&core)
    }

    pub fn categories_in_core(
        &self,
        core_name: &str,
    ) -> Result<&BTreeSet<CategoryId>, TaxonomyError> {
        let core: CoreName = core_name.parse()?;
        self.core(core)
            .ok_or_else(|| TaxonomyError::UnknownCore(core_name.to_string()))
    }

    /// Relative weight of drawing the unordered core pair `{a, b}`.
    pub fn core_pair_weight(&self, a: CoreName, b: CoreName) -> f64 {
        self.cores
            .pair_weights
            .get(&ordered(a, b))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        writer.write_record(CSV_HEADER).expect("in-memory write");
        for category in &self.categories {
            writer
                .write_record([
                    category.id.to_string(),
                    category.name.clone(),
                    category.species_id.clone(),
                    category.is_dog.to_string(),
                    category.is_insect.to_string(),
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn cores_to_json(&self) -> String {
        self.cores.to_json()
    }
}

pub fn parse_categories(text: &str) -> Result<Vec<Category>, TaxonomyError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader.headers().map_err(|e| TaxonomyError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(TaxonomyError::Parse {
            line: 1,
            message: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }

    reader
        .deserialize::<Category>()
        .map(|row| {
            row.map_err(|e| TaxonomyError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundled_rows() -> Vec<String> {
        BUNDLED_CATEGORIES_CSV.lines().map(str::to_string).collect()
    }

    #[test]
    fn bundled_universe_has_expected_counts() {
        let t = Taxonomy::bundled();
        assert_eq!(t.len(), 396);
        assert_eq!(t.dog_count(), 118);
        let dog_species: BTreeSet<_> = t
            .categories()
            .iter()
            .filter(|c| c.is_dog)
            .map(|c| c.species_id.as_str())
            .collect();
        assert_eq!(dog_species.len(), 1);
        let dog_species = dog_species.into_iter().next().unwrap();
        assert_eq!(t.species_index()[dog_species].len(), 118);
    }

    #[test]
    fn species_index_partitions_categories() {
        let t = Taxonomy::bundled();
        let total: usize = t.species_index().values().map(Vec::len).sum();
        assert_eq!(total, 396);
        let mut seen = BTreeSet::new();
        for ids in t.species_index().values() {
            for id in ids {
                assert!(seen.insert(*id), "category {id} in two species");
            }
        }
    }

    #[test]
    fn removing_a_row_fails_count_check() {
        let rows = bundled_rows();
        let text = [&rows[..10], &rows[11..]].concat().join("\n");
        let err = Taxonomy::parse(&text, BUNDLED_CORES_JSON).unwrap_err();
        assert!(matches!(err, TaxonomyError::Validation(_)), "{err}");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let mut rows = bundled_rows();
        // Replace the last row with a copy of the first data row so the count stays 396.
        let last = rows.len() - 1;
        rows[last] = rows[1].clone();
        let err = Taxonomy::parse(&rows.join("\n"), BUNDLED_CORES_JSON).unwrap_err();
        match err {
            TaxonomyError::Validation(msg) => assert!(msg.contains("duplicate"), "{msg}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_row_is_a_parse_error() {
        let text = "id,name,species_id,is_dog,is_insect\n0,tench,tench,maybe,false\n";
        let err = Taxonomy::parse(text, BUNDLED_CORES_JSON).unwrap_err();
        assert!(matches!(err, TaxonomyError::Parse { line: 2, .. }), "{err}");
        let err = Taxonomy::parse("id,name\n0,tench\n", BUNDLED_CORES_JSON).unwrap_err();
        assert!(matches!(err, TaxonomyError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn cores_file_errors() {
        let unknown = r#"{"feline": [281]}"#;
        assert!(matches!(
            Taxonomy::parse(BUNDLED_CATEGORIES_CSV, unknown),
            Err(TaxonomyError::UnknownCore(_))
        ));
        let mut cores: serde_json::Value = serde_json::from_str(BUNDLED_CORES_JSON).unwrap();
        cores["bird"]
            .as_array_mut()
            .unwrap()
            .push(serde_json::json!(51));
        assert!(matches!(
            Taxonomy::parse(BUNDLED_CATEGORIES_CSV, &cores.to_string()),
            Err(TaxonomyError::Validation(_))
        ));
        let mut cores: serde_json::Value = serde_json::from_str(BUNDLED_CORES_JSON).unwrap();
        cores.as_object_mut().unwrap().remove("wildcard");
        assert!(matches!(
            Taxonomy::parse(BUNDLED_CATEGORIES_CSV, &cores.to_string()),
            Err(TaxonomyError::Validation(_))
        ));
    }

    #[test]
    fn canine_core_holds_only_dogs() {
        let t = Taxonomy::bundled();
        let canine = t.categories_in_core("canine").unwrap();
        assert!(!canine.is_empty());
        assert!(canine.iter().all(|&id| t.is_dog(id)));
        assert!(!t.categories_in_core("wildcard").unwrap().is_empty());
        assert!(matches!(
            t.categories_in_core("feline"),
            Err(TaxonomyError::UnknownCore(_))
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let t = Taxonomy::bundled();
        let again = Taxonomy::parse(&t.to_csv(), &t.cores_to_json()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn pair_weights_parse_and_default() {
        let mut cores: serde_json::Value = serde_json::from_str(BUNDLED_CORES_JSON).unwrap();
        cores["pair_weights"] = serde_json::json!({"canine+aquatic": 3.0});
        let t = Taxonomy::parse(BUNDLED_CATEGORIES_CSV, &cores.to_string()).unwrap();
        assert_eq!(t.core_pair_weight(CoreName::Aquatic, CoreName::Canine), 3.0);
        assert_eq!(t.core_pair_weight(CoreName::Canine, CoreName::Aquatic), 3.0);
        assert_eq!(t.core_pair_weight(CoreName::Bird, CoreName::Wildcard), 1.0);
        let again = Taxonomy::parse(&t.to_csv(), &t.cores_to_json()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn load_reads_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("categories.csv");
        let cores_path = dir.path().join("cores.json");
        std::fs::write(&csv_path, BUNDLED_CATEGORIES_CSV).unwrap();
        std::fs::write(&cores_path, BUNDLED_CORES_JSON).unwrap();
        assert_eq!(Taxonomy::load(&csv_path, &cores_path).unwrap().len(), 396);
        assert!(matches!(
            Taxonomy::load(&dir.path().join("missing.csv"), &cores_path),
            Err(TaxonomyError::Io { .. })
        ));
    }
}
