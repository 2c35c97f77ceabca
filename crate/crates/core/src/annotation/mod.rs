//! Indicator codebook, per-annotator answer records, frame aggregation and
//! role-entity extraction.

mod codebook;
mod stakeholder;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use codebook::{Codebook, Question, DEFAULT_FRAME_MINIMUM};
pub use stakeholder::{map_stakeholder, normalize_entity, StakeholderCategory, StakeholderLexicon};

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSet, Role};
use crate::jsonl;

/// Number of annotators who must answer `yes` for an indicator to count.
pub const MAJORITY_YES: usize = 2;

/// Free-text entities an annotator attached to the narrative roles.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleEntities {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hero: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub villain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub victim: Option<String>,
}

impl RoleEntities {
    /// The entity for `role`, ignoring blank strings.
    pub fn get(&self, role: Role) -> Option<&str> {
        let slot = match role {
            Role::Hero => &self.hero,
            Role::Villain => &self.villain,
            Role::Victim => &self.victim,
        };
        slot.as_deref().map(str::trim).filter(|s| !s.is_empty())
    }

    pub fn set(&mut self, role: Role, entity: Option<String>) {
        let slot = match role {
            Role::Hero => &mut self.hero,
            Role::Villain => &mut self.villain,
            Role::Victim => &mut self.victim,
        };
        *slot = entity;
    }
}

/// One annotator's answers for one article.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub article_id: String,
    pub annotator_id: String,
    pub answers: BTreeMap<String, bool>,
    #[serde(default)]
    pub role_entities: RoleEntities,
}

impl AnnotationRecord {
    /// Every answered question must exist in the codebook, and a role entity
    /// may only be present when its trigger question was answered `yes`.
    pub fn validate(&self, codebook: &Codebook) -> Result<()> {
        for qid in self.answers.keys() {
            if codebook.question(qid).is_none() {
                return Err(Error::UnknownQuestion(qid.clone()));
            }
        }
        for role in Role::ALL {
            if self.role_entities.get(role).is_none() {
                continue;
            }
            let trigger = codebook.role_trigger(role).ok_or_else(|| {
                Error::invalid(format!("codebook has no trigger question for role {role}"))
            })?;
            if self.answers.get(&trigger.qid) != Some(&true) {
                return Err(Error::invalid(format!(
                    "article `{}`, annotator `{}`: {role} entity given but {} not answered yes",
                    self.article_id, self.annotator_id, trigger.qid
                )));
            }
        }
        Ok(())
    }
}

/// Load annotation records and validate each against the codebook.
pub fn load_annotations(path: &Path, codebook: &Codebook) -> Result<Vec<AnnotationRecord>> {
    let records: Vec<AnnotationRecord> = jsonl::read_jsonl(path)?;
    for (i, r) in records.iter().enumerate() {
        r.validate(codebook).map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(records)
}

/// Records grouped per article, in order of first appearance.
pub fn group_by_article(records: &[AnnotationRecord]) -> Vec<(String, Vec<AnnotationRecord>)> {
    let mut order: Vec<(String, Vec<AnnotationRecord>)> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        match index.get(r.article_id.as_str()) {
            Some(&i) => order[i].1.push(r.clone()),
            None => {
                index.insert(&r.article_id, order.len());
                order.push((r.article_id.clone(), vec![r.clone()]));
            }
        }
    }
    order
}

fn yes_count(qid: &str, records: &[AnnotationRecord]) -> (usize, usize) {
    let mut yes = 0;
    let mut answered = 0;
    for r in records {
        if let Some(&a) = r.answers.get(qid) {
            answered += 1;
            yes += a as usize;
        }
    }
    (yes, answered)
}

/// `true` iff at least two annotators answered `yes` to `qid`.
pub fn majority_answer(
    codebook: &Codebook,
    qid: &str,
    records: &[AnnotationRecord],
) -> Result<bool> {
    if codebook.question(qid).is_none() {
        return Err(Error::UnknownQuestion(qid.to_string()));
    }
    let (yes, answered) = yes_count(qid, records);
    if answered == 0 {
        return Err(Error::invalid(format!("no record answers `{qid}`")));
    }
    Ok(yes >= MAJORITY_YES)
}

/// Aggregated multi-label frame assignment for one article.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLabelSet {
    pub article_id: String,
    pub frames: FrameSet,
}

/// A frame is present when the number of its retained indicators with a
/// majority `yes` reaches the codebook's minimum for that frame. Unanswered
/// indicators count as `no`.
pub fn aggregate_frames(
    records: &[AnnotationRecord],
    codebook: &Codebook,
) -> Result<FrameLabelSet> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty record list"))?;
    if let Some(other) = records.iter().find(|r| r.article_id != first.article_id) {
        return Err(Error::invalid(format!(
            "records span articles `{}` and `{}`",
            first.article_id, other.article_id
        )));
    }
    let mut frames = FrameSet::EMPTY;
    for frame in Frame::ALL {
        let positive = codebook
            .retained_for(frame)
            .filter(|q| yes_count(&q.qid, records).0 >= MAJORITY_YES)
            .count();
        frames.set(frame, positive >= codebook.frame_minimum(frame));
    }
    Ok(FrameLabelSet {
        article_id: first.article_id.clone(),
        frames,
    })
}

/// An entity string attached to a role by one annotator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoleEntity {
    pub annotator_id: String,
    pub entity: String,
}

/// All non-empty role entities, without deduplication. Roles nobody filled
/// are absent from the map.
pub fn extract_role_entities(records: &[AnnotationRecord]) -> BTreeMap<Role, Vec<RoleEntity>> {
    let mut out: BTreeMap<Role, Vec<RoleEntity>> = BTreeMap::new();
    for r in records {
        for role in Role::ALL {
            if let Some(entity) = r.role_entities.get(role) {
                out.entry(role).or_default().push(RoleEntity {
                    annotator_id: r.annotator_id.clone(),
                    entity: entity.to_string(),
                });
            }
        }
    }
    out
}

/// One line of the aggregated labels file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub article_id: String,
    pub frames: FrameSet,
    #[serde(default)]
    pub n_annotators: usize,
    #[serde(default)]
    pub role_entities: BTreeMap<Role, Vec<RoleEntity>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

/// Aggregate every article in `records` (first-appearance order).
pub fn aggregate_all(
    records: &[AnnotationRecord],
    codebook: &Codebook,
) -> Result<Vec<LabelRecord>> {
    group_by_article(records)
        .into_iter()
        .map(|(article_id, group)| {
            let labels = aggregate_frames(&group, codebook)?;
            let mut annotators: Vec<&str> = group.iter().map(|r| r.annotator_id.as_str()).collect();
            annotators.sort_unstable();
            annotators.dedup();
            Ok(LabelRecord {
                article_id,
                frames: labels.frames,
                n_annotators: annotators.len(),
                role_entities: extract_role_entities(&group),
                config_digest: None,
            })
        })
        .collect()
}

pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let labels: Vec<LabelRecord> = jsonl::read_jsonl(path)?;
    let mut seen = std::collections::HashSet::new();
    for l in &labels {
        if !seen.insert(l.article_id.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate label for article `{}`",
                l.article_id
            )));
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(annotator: &str, yes: &[&str], no: &[&str]) -> AnnotationRecord {
        let mut answers = BTreeMap::new();
        for q in yes {
            answers.insert(q.to_string(), true);
        }
        for q in no {
            answers.insert(q.to_string(), false);
        }
        AnnotationRecord {
            article_id: "a1".into(),
            annotator_id: annotator.into(),
            answers,
            role_entities: RoleEntities::default(),
        }
    }

    #[test]
    fn majority_needs_two_yes_answers() {
        let cb = Codebook::bundled();
        let rs = [
            record("x", &["CO1"], &[]),
            record("y", &["CO1"], &[]),
            record("z", &[], &["CO1"]),
        ];
        assert!(majority_answer(&cb, "CO1", &rs).unwrap());
        let rs = [
            record("x", &["CO1"], &[]),
            record("y", &[], &["CO1"]),
            record("z", &[], &["CO1"]),
        ];
        assert!(!majority_answer(&cb, "CO1", &rs).unwrap());
        let rs = [record("x", &["CO1"], &[])];
        assert!(!majority_answer(&cb, "CO1", &rs).unwrap());
        assert!(matches!(
            majority_answer(&cb, "ZZ9", &rs),
            Err(Error::UnknownQuestion(_))
        ));
    }

    #[test]
    fn resolution_needs_both_indicators() {
        let cb = Codebook::bundled();
        let rs = [
            record("x", &["RE1", "RE5"], &[]),
            record("y", &["RE1", "RE5"], &[]),
        ];
        assert!(aggregate_frames(&rs, &cb)
            .unwrap()
            .frames
            .contains(Frame::Resolution));
    }

    #[test]
    fn moral_needs_only_one_indicator() {
        let cb = Codebook::bundled();
        let rs = [
            record("x", &["MO1"], &["MO2"]),
            record("y", &["MO1"], &["MO2"]),
        ];
        assert_eq!(
            aggregate_frames(&rs, &cb).unwrap().frames,
            FrameSet::from_frames([Frame::Moral])
        );
    }

    #[test]
    fn conflict_with_one_indicator_is_absent() {
        let cb = Codebook::bundled();
        let rs = [
            record("x", &["CO1"], &["CO2", "CO3"]),
            record("y", &["CO1"], &["CO2", "CO3"]),
            record("z", &["CO1"], &["CO2", "CO3"]),
        ];
        assert!(aggregate_frames(&rs, &cb).unwrap().frames.is_empty());
    }

    #[test]
    fn non_retained_questions_do_not_count() {
        let cb = Codebook::bundled();
        let rs = [
            record("x", &["RE1", "RE2"], &[]),
            record("y", &["RE1", "RE2"], &[]),
        ];
        assert!(aggregate_frames(&rs, &cb).unwrap().frames.is_empty());
    }

    #[test]
    fn aggregation_errors() {
        let cb = Codebook::bundled();
        assert!(aggregate_frames(&[], &cb).is_err());
        let mut other = record("y", &[], &[]);
        other.article_id = "a2".into();
        assert!(aggregate_frames(&[record("x", &[], &[]), other], &cb).is_err());
    }

    #[test]
    fn role_entities_are_not_deduplicated() {
        let mut a = record("x", &["RE6"], &[]);
        a.role_entities.villain = Some("Trump".into());
        let mut b = record("y", &["RE6"], &[]);
        b.role_entities.villain = Some("Trump".into());
        let roles = extract_role_entities(&[a, b]);
        assert_eq!(roles[&Role::Villain].len(), 2);
        assert_eq!(roles.len(), 1);

        assert!(extract_role_entities(&[record("x", &[], &[])]).is_empty());

        let mut h = record("x", &["RE5"], &[]);
        h.role_entities.hero = Some("EPA".into());
        let mut v = record("y", &["HI3"], &[]);
        v.role_entities.victim = Some("farmers".into());
        let roles = extract_role_entities(&[h, v]);
        assert!(roles.contains_key(&Role::Hero) && roles.contains_key(&Role::Victim));
    }

    #[test]
    fn validation_checks_role_triggers_and_qids() {
        let cb = Codebook::bundled();
        let mut r = record("x", &[], &["RE5"]);
        r.role_entities.hero = Some("EPA".into());
        assert!(r.validate(&cb).is_err());
        r.answers.insert("RE5".into(), true);
        assert!(r.validate(&cb).is_ok());
        r.role_entities.hero = Some("   ".into());
        r.answers.insert("RE5".into(), false);
        assert!(r.validate(&cb).is_ok());
        let r = record("x", &["NOPE"], &[]);
        assert!(matches!(r.validate(&cb), Err(Error::UnknownQuestion(_))));
    }

    fn arb_records() -> impl Strategy<Value = Vec<AnnotationRecord>> {
        let qids: Vec<String> = Codebook::bundled()
            .retained()
            .map(|q| q.qid.clone())
            .collect();
        prop::collection::vec(
            prop::collection::vec(prop::option::of(any::<bool>()), qids.len()),
            1..5,
        )
        .prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, row)| AnnotationRecord {
                    article_id: "a".into(),
                    annotator_id: format!("ann{i}"),
                    answers: qids
                        .iter()
                        .zip(row)
                        .filter_map(|(q, v)| v.map(|v| (q.clone(), v)))
                        .collect(),
                    role_entities: RoleEntities::default(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn aggregation_is_monotone(records in arb_records(), pick in any::<prop::sample::Index>()) {
            let cb = Codebook::bundled();
            let before = aggregate_frames(&records, &cb).unwrap().frames;
            let mut flipped = records.clone();
            let slots: Vec<(usize, String)> = flipped.iter().enumerate()
                .flat_map(|(i, r)| r.answers.iter().filter(|(_, v)| !**v).map(move |(q, _)| (i, q.clone())))
                .collect();
            if !slots.is_empty() {
                let (i, q) = &slots[pick.index(slots.len())];
                flipped[*i].answers.insert(q.clone(), true);
            }
            let after = aggregate_frames(&flipped, &cb).unwrap().frames;
            for f in before.iter() {
                prop_assert!(after.contains(f));
            }
        }

        #[test]
        fn aggregation_is_order_invariant(records in arb_records()) {
            let cb = Codebook::bundled();
            let mut rev = records.clone();
            rev.reverse();
            prop_assert_eq!(aggregate_frames(&records, &cb).unwrap(), aggregate_frames(&rev, &cb).unwrap());
        }

        #[test]
        fn frames_need_their_minimum_indicators(records in arb_records()) {
            let cb = Codebook::bundled();
            let frames = aggregate_frames(&records, &cb).unwrap().frames;
            for f in Frame::ALL {
                let majority = cb.retained_for(f)
                    .filter(|q| records.iter().filter(|r| r.answers.get(&q.qid) == Some(&true)).count() >= 2)
                    .count();
                let needed = if f == Frame::Moral { 1 } else { 2 };
                prop_assert_eq!(frames.contains(f), majority >= needed);
            }
        }
    }
}
