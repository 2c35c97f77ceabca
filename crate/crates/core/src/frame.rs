//! Frame, role and leaning vocabularies shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// One of the five narrative frames. The declaration order is the canonical
/// reporting order (RE, CO, HI, MO, EC).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Frame {
    #[serde(rename = "RE")]
    Resolution,
    #[serde(rename = "CO")]
    Conflict,
    #[serde(rename = "HI")]
    HumanInterest,
    #[serde(rename = "MO")]
    Moral,
    #[serde(rename = "EC")]
    Economic,
}

impl Frame {
    pub const ALL: [Frame; 5] = [
        Frame::Resolution,
        Frame::Conflict,
        Frame::HumanInterest,
        Frame::Moral,
        Frame::Economic,
    ];

    pub const COUNT: usize = 5;

    pub fn code(self) -> &'static str {
        match self {
            Frame::Resolution => "RE",
            Frame::Conflict => "CO",
            Frame::HumanInterest => "HI",
            Frame::Moral => "MO",
            Frame::Economic => "EC",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Frame::Resolution => "Resolution",
            Frame::Conflict => "Conflict",
            Frame::HumanInterest => "Human Interest",
            Frame::Moral => "Moral",
            Frame::Economic => "Economic",
        }
    }

    /// Position in [`Frame::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Frame::ALL
            .into_iter()
            .find(|f| f.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown frame `{s}`")))
    }
}

/// A subset of the five frames, stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameSet(u8);

impl FrameSet {
    pub const EMPTY: FrameSet = FrameSet(0);

    pub fn from_frames(frames: impl IntoIterator<Item = Frame>) -> Self {
        let mut set = FrameSet::EMPTY;
        for f in frames {
            set.insert(f);
        }
        set
    }

    pub fn contains(self, frame: Frame) -> bool {
        self.0 & (1 << frame.index()) != 0
    }

    pub fn insert(&mut self, frame: Frame) {
        self.0 |= 1 << frame.index();
    }

    pub fn remove(&mut self, frame: Frame) {
        self.0 &= !(1 << frame.index());
    }

    pub fn set(&mut self, frame: Frame, present: bool) {
        if present {
            self.insert(frame)
        } else {
            self.remove(frame)
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Frames in canonical order.
    pub fn iter(self) -> impl Iterator<Item = Frame> {
        Frame::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Inverse of [`bits`](Self::bits); bits above the fifth are dropped.
    pub fn from_bits(bits: u8) -> Self {
        FrameSet(bits & 0b1_1111)
    }
}

impl fmt::Display for FrameSet {
    /// `RE;CO;EC`, or `NONE` for the empty set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("NONE");
        }
        let codes: Vec<&str> = self.iter().map(Frame::code).collect();
        f.write_str(&codes.join(";"))
    }
}

impl fmt::Debug for FrameSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FrameSet({self})")
    }
}

impl FromIterator<Frame> for FrameSet {
    fn from_iter<I: IntoIterator<Item = Frame>>(iter: I) -> Self {
        FrameSet::from_frames(iter)
    }
}

impl Serialize for FrameSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FrameSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let frames = Vec::<Frame>::deserialize(deserializer)?;
        Ok(FrameSet::from_frames(frames))
    }
}

/// Narrative role assigned to an entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hero,
    Villain,
    Victim,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Hero, Role::Villain, Role::Victim];

    pub fn name(self) -> &'static str {
        match self {
            Role::Hero => "Hero",
            Role::Villain => "Villain",
            Role::Victim => "Victim",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outlet political leaning (MBFC categories; center-right merged into right).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leaning {
    Left,
    LeftCenter,
    Right,
    Questionable,
}

impl Leaning {
    pub const ALL: [Leaning; 4] = [
        Leaning::Left,
        Leaning::LeftCenter,
        Leaning::Right,
        Leaning::Questionable,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Leaning::Left => "left",
            Leaning::LeftCenter => "left_center",
            Leaning::Right => "right",
            Leaning::Questionable => "questionable",
        }
    }
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Leaning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Leaning::ALL
            .into_iter()
            .find(|l| l.code() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown leaning `{s}`")))
    }
}
