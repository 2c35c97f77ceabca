use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, Role};

/// A binary indicator question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub qid: String,
    /// `None` for questions that evidence no frame (the pre-screening item).
    pub frame: Option<Frame>,
    pub text: String,
    pub retained: bool,
    /// Role whose entity is requested when this question is answered `yes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
}

#[derive(Deserialize)]
struct RawCodebook {
    questions: Vec<Question>,
    #[serde(default)]
    frame_rule: BTreeMap<Frame, usize>,
}

/// Indicator questionnaire plus the per-frame aggregation rule: a frame is
/// assigned when at least `frame_rule[frame]` of its retained indicators are
/// majority-yes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCodebook")]
pub struct Codebook {
    questions: Vec<Question>,
    frame_rule: BTreeMap<Frame, usize>,
}

impl TryFrom<RawCodebook> for Codebook {
    type Error = Error;

    fn try_from(raw: RawCodebook) -> Result<Self> {
        Codebook::new(raw.questions, raw.frame_rule)
    }
}

pub const DEFAULT_FRAME_MINIMUM: usize = 2;

impl Codebook {
    /// Frames missing from `frame_rule` get the default minimum of 2
    /// (1 for Moral).
    pub fn new(questions: Vec<Question>, mut frame_rule: BTreeMap<Frame, usize>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut role_triggers = HashSet::new();
        for q in &questions {
            if !seen.insert(q.qid.as_str()) {
                return Err(Error::invalid(format!("duplicate question id `{}`", q.qid)));
            }
            if q.retained && q.frame.is_none() {
                return Err(Error::invalid(format!(
                    "retained question `{}` has no frame",
                    q.qid
                )));
            }
            if let Some(role) = q.role {
                if !role_triggers.insert(role) {
                    return Err(Error::invalid(format!(
                        "role {role} has two trigger questions"
                    )));
                }
            }
        }
        for frame in Frame::ALL {
            let retained = questions
                .iter()
                .filter(|q| q.retained && q.frame == Some(frame))
                .count();
            if retained == 0 {
                return Err(Error::invalid(format!(
                    "frame {frame} has no retained indicator"
                )));
            }
            let rule = *frame_rule.entry(frame).or_insert(match frame {
                Frame::Moral => 1,
                _ => DEFAULT_FRAME_MINIMUM,
            });
            if rule == 0 || rule > retained {
                return Err(Error::invalid(format!(
                    "frame rule for {frame} is {rule}, but it has {retained} retained indicators"
                )));
            }
        }
        Ok(Codebook {
            questions,
            frame_rule,
        })
    }

    /// The shipped 22-question codebook with the 13 retained indicators.
    pub fn bundled() -> Self {
        serde_json::from_str(include_str!("../../data/codebook.json"))
            .expect("bundled codebook is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn question(&self, qid: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.qid == qid)
    }

    pub fn retained(&self) -> impl Iterator<Item = &Question> {
        self.questions.iter().filter(|q| q.retained)
    }

    pub fn retained_for(&self, frame: Frame) -> impl Iterator<Item = &Question> {
        self.retained().filter(move |q| q.frame == Some(frame))
    }

    pub fn frame_minimum(&self, frame: Frame) -> usize {
        self.frame_rule[&frame]
    }

    pub fn role_trigger(&self, role: Role) -> Option<&Question> {
        self.questions.iter().find(|q| q.role == Some(role))
    }
}
