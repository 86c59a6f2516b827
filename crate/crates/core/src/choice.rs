use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Highest letter any universe may contain (MMLU-Pro style items go up to J).
pub const MAX_CHOICE: char = 'J';

/// An uppercase answer letter such as `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChoiceLabel(char);

impl ChoiceLabel {
    pub fn new(letter: char) -> Result<Self> {
        let upper = letter.to_ascii_uppercase();
        if ('A'..=MAX_CHOICE).contains(&upper) {
            Ok(ChoiceLabel(upper))
        } else {
            Err(Error::usage(format!(
                "choice label must be a letter A-{MAX_CHOICE}, got {letter:?}"
            )))
        }
    }

    pub fn letter(self) -> char {
        self.0
    }

    /// Zero-based position (`A` = 0).
    pub fn index(self) -> usize {
        (self.0 as u8 - b'A') as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index > (MAX_CHOICE as u8 - b'A') as usize {
            return Err(Error::usage(format!("choice index {index} out of range")));
        }
        Ok(ChoiceLabel((b'A' + index as u8) as char))
    }
}

impl fmt::Display for ChoiceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ChoiceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => ChoiceLabel::new(c),
            _ => Err(Error::usage(format!("invalid choice label {s:?}"))),
        }
    }
}

impl Serialize for ChoiceLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut buf = [0u8; 4];
        serializer.serialize_str(self.0.encode_utf8(&mut buf))
    }
}

impl<'de> Deserialize<'de> for ChoiceLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The set of answer letters a question set may use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ChoiceLabel>", into = "Vec<ChoiceLabel>")]
pub struct ChoiceUniverse(BTreeSet<ChoiceLabel>);

impl ChoiceUniverse {
    pub fn new(labels: impl IntoIterator<Item = ChoiceLabel>) -> Result<Self> {
        let set: BTreeSet<_> = labels.into_iter().collect();
        if set.is_empty() {
            return Err(Error::usage("choice universe must not be empty"));
        }
        Ok(ChoiceUniverse(set))
    }

    /// `A` through `last` inclusive.
    pub fn through(last: char) -> Result<Self> {
        let last = ChoiceLabel::new(last)?;
        Self::new((0..=last.index()).map(|i| ChoiceLabel::from_index(i).unwrap()))
    }

    pub fn contains(&self, label: ChoiceLabel) -> bool {
        self.0.contains(&label)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ChoiceLabel> + '_ {
        self.0.iter().copied()
    }
}

impl Default for ChoiceUniverse {
    fn default() -> Self {
        ChoiceUniverse::through('D').unwrap()
    }
}

impl TryFrom<Vec<ChoiceLabel>> for ChoiceUniverse {
    type Error = Error;

    fn try_from(v: Vec<ChoiceLabel>) -> Result<Self> {
        ChoiceUniverse::new(v)
    }
}

impl From<ChoiceUniverse> for Vec<ChoiceLabel> {
    fn from(u: ChoiceUniverse) -> Self {
        u.0.into_iter().collect()
    }
}
