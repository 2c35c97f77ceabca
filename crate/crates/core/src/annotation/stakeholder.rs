use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stakeholder groups for extracted entities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StakeholderCategory {
    #[serde(rename = "GOVERNMENTS_POLITICIANS_POLIT.ORGS")]
    Governments,
    #[serde(rename = "INDUSTRY_EMISSIONS")]
    Industry,
    #[serde(rename = "LEGISLATION_POLICIES_RESPONSES")]
    Legislation,
    #[serde(rename = "GENERAL PUBLIC")]
    GeneralPublic,
    #[serde(rename = "ANIMALS_NATURE_ENVIRONMENT")]
    Environment,
    #[serde(rename = "ENV.ORGS_ACTIVISTS")]
    Activists,
    #[serde(rename = "SCIENCE_EXPERTS_SCI.REPORTS")]
    Science,
    #[serde(rename = "CLIMATE CHANGE")]
    ClimateChange,
    #[serde(rename = "OTHER")]
    Other,
    #[serde(rename = "AMBIGUOUS")]
    Ambiguous,
    #[serde(rename = "GREEN TECHNOLOGY_INNOVATION")]
    GreenTechnology,
    #[serde(rename = "MEDIA_JOURNALISTS")]
    Media,
}

impl StakeholderCategory {
    pub const ALL: [StakeholderCategory; 12] = [
        StakeholderCategory::Governments,
        StakeholderCategory::Industry,
        StakeholderCategory::Legislation,
        StakeholderCategory::GeneralPublic,
        StakeholderCategory::Environment,
        StakeholderCategory::Activists,
        StakeholderCategory::Science,
        StakeholderCategory::ClimateChange,
        StakeholderCategory::Other,
        StakeholderCategory::Ambiguous,
        StakeholderCategory::GreenTechnology,
        StakeholderCategory::Media,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StakeholderCategory::Governments => "GOVERNMENTS_POLITICIANS_POLIT.ORGS",
            StakeholderCategory::Industry => "INDUSTRY_EMISSIONS",
            StakeholderCategory::Legislation => "LEGISLATION_POLICIES_RESPONSES",
            StakeholderCategory::GeneralPublic => "GENERAL PUBLIC",
            StakeholderCategory::Environment => "ANIMALS_NATURE_ENVIRONMENT",
            StakeholderCategory::Activists => "ENV.ORGS_ACTIVISTS",
            StakeholderCategory::Science => "SCIENCE_EXPERTS_SCI.REPORTS",
            StakeholderCategory::ClimateChange => "CLIMATE CHANGE",
            StakeholderCategory::Other => "OTHER",
            StakeholderCategory::Ambiguous => "AMBIGUOUS",
            StakeholderCategory::GreenTechnology => "GREEN TECHNOLOGY_INNOVATION",
            StakeholderCategory::Media => "MEDIA_JOURNALISTS",
        }
    }

    /// File-name friendly identifier.
    pub fn slug(self) -> String {
        self.label()
            .to_lowercase()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect()
    }
}

impl fmt::Display for StakeholderCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StakeholderCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        StakeholderCategory::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown stakeholder category `{s}`")))
    }
}

const LEADING_ARTICLES: [&str; 3] = ["the ", "a ", "an "];

fn is_terminal_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '"'
            | '\''
            | '\u{201c}'
            | '\u{201d}'
            | '\u{2018}'
            | '\u{2019}'
    )
}

/// Entity normalization: lowercase, collapse whitespace, strip leading
/// articles (`the`, `a`, `an`) and trailing punctuation, repeated until
/// nothing changes.
pub fn normalize_entity(entity: &str) -> String {
    let mut s = entity
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    loop {
        let before = s.len();
        for art in LEADING_ARTICLES {
            if let Some(rest) = s.strip_prefix(art) {
                s = rest.trim_start().to_string();
            }
        }
        s = s.trim_end_matches(is_terminal_punct).trim_end().to_string();
        if s.len() == before {
            return s;
        }
    }
}

/// Mapping from normalized entity strings to stakeholder categories.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StakeholderLexicon {
    entries: BTreeMap<String, StakeholderCategory>,
}

#[derive(Deserialize)]
struct LexiconRow {
    normalized_entity: String,
    category: String,
}

impl StakeholderLexicon {
    /// Insert an entity; the key is normalized. Re-assigning an entity to a
    /// different category is an error.
    pub fn insert(&mut self, entity: &str, category: StakeholderCategory) -> Result<()> {
        let key = normalize_entity(entity);
        if key.is_empty() {
            return Err(Error::invalid("empty lexicon entity"));
        }
        match self.entries.get(&key) {
            Some(existing) if *existing != category => Err(Error::invalid(format!(
                "entity `{key}` mapped to both {existing} and {category}"
            ))),
            _ => {
                self.entries.insert(key, category);
                Ok(())
            }
        }
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut lexicon = StakeholderLexicon::default();
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize() {
            let row: LexiconRow = row?;
            lexicon.insert(&row.normalized_entity, row.category.parse()?)?;
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    /// Lexicon seeded with the example entities of each stakeholder group.
    pub fn bundled() -> Self {
        Self::from_csv_reader(include_str!("../../data/stakeholders.csv").as_bytes())
            .expect("bundled lexicon is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn categorize(&self, entity: &str) -> StakeholderCategory {
        map_stakeholder(entity, self)
    }
}

/// Category of an entity after normalization; unmapped entities fall into
/// [`StakeholderCategory::Other`].
pub fn map_stakeholder(entity: &str, lexicon: &StakeholderLexicon) -> StakeholderCategory {
    lexicon
        .entries
        .get(&normalize_entity(entity))
        .copied()
        .unwrap_or(StakeholderCategory::Other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_examples_map_to_their_groups() {
        let lex = StakeholderLexicon::bundled();
        assert_eq!(
            map_stakeholder("the EPA", &lex),
            StakeholderCategory::Governments
        );
        assert_eq!(
            map_stakeholder("Greta Thunberg", &lex),
            StakeholderCategory::Activists
        );
        assert_eq!(
            map_stakeholder("zorblax industries", &lex),
            StakeholderCategory::Other
        );
        assert_eq!(
            map_stakeholder("Paris Agreement.", &lex),
            StakeholderCategory::Legislation
        );
        assert_eq!(
            map_stakeholder("deniers", &lex),
            StakeholderCategory::Ambiguous
        );
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_entity("  The   EPA "), "epa");
        assert_eq!(normalize_entity("god."), "god");
        assert_eq!(normalize_entity("the the earth!!"), "earth");
        assert_eq!(normalize_entity("An"), "an");
        assert_eq!(normalize_entity("theory"), "theory");
    }

    #[test]
    fn conflicting_lexicon_rows_are_rejected() {
        let csv = "normalized_entity,category\nepa,OTHER\nthe EPA,MEDIA_JOURNALISTS\n";
        assert!(StakeholderLexicon::from_csv_reader(csv.as_bytes()).is_err());
        let csv = "normalized_entity,category\nepa,NOT_A_GROUP\n";
        assert!(StakeholderLexicon::from_csv_reader(csv.as_bytes()).is_err());
    }

    #[test]
    fn categories_parse_from_labels() {
        for c in StakeholderCategory::ALL {
            assert_eq!(c.label().parse::<StakeholderCategory>().unwrap(), c);
        }
        assert_eq!(
            "Other".parse::<StakeholderCategory>().unwrap(),
            StakeholderCategory::Other
        );
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "[ a-zA-Z.!?,'\"]{0,30}") {
            let once = normalize_entity(&s);
            prop_assert_eq!(normalize_entity(&once), once.clone());
            let lex = StakeholderLexicon::bundled();
            prop_assert_eq!(map_stakeholder(&once, &lex), map_stakeholder(&s, &lex));
        }
    }
}
