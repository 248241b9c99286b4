//! FDI two-digit tooth notation restricted to the 28 permanent teeth
//! (third molars excluded).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of permanent teeth handled (third molars excluded).
pub const NUM_TEETH: usize = 28;

/// Linearized order alternating maxillary and mandibular teeth, used as the
/// index space for inter-tooth relative positions.
pub const ZIGZAG_ORDER: [u8; NUM_TEETH] = [
    17, 47, 16, 46, 15, 45, 14, 44, 13, 43, 12, 42, 11, 41, 21, 31, 22, 32, 23, 33, 24, 34, 25, 35,
    26, 36, 27, 37,
];

/// A validated FDI code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Fdi(u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Maxillary,
    Mandibular,
}

/// Functional grouping used to stratify evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToothGroup {
    Anterior,
    Premolar,
    Molar,
}

impl ToothGroup {
    pub fn name(self) -> &'static str {
        match self {
            ToothGroup::Anterior => "anterior",
            ToothGroup::Premolar => "premolar",
            ToothGroup::Molar => "molar",
        }
    }

    pub const ALL: [ToothGroup; 3] = [ToothGroup::Anterior, ToothGroup::Premolar, ToothGroup::Molar];
}

impl Fdi {
    pub fn new(code: u32) -> Result<Self> {
        let quadrant = code / 10;
        let position = code % 10;
        if (1..=4).contains(&quadrant) && (1..=7).contains(&position) {
            Ok(Fdi(code as u8))
        } else {
            Err(Error::InvalidFdi(code))
        }
    }

    pub fn code(self) -> u32 {
        self.0 as u32
    }

    pub fn quadrant(self) -> u8 {
        self.0 / 10
    }

    /// Position digit, 1 (central incisor) through 7 (second molar).
    pub fn position(self) -> u8 {
        self.0 % 10
    }

    pub fn arch(self) -> Arch {
        match self.quadrant() {
            1 | 2 => Arch::Maxillary,
            _ => Arch::Mandibular,
        }
    }

    /// True for quadrants 1 and 4, which sit on the +x side of the
    /// standardized frame.
    pub fn is_right(self) -> bool {
        matches!(self.quadrant(), 1 | 4)
    }

    pub fn group(self) -> ToothGroup {
        match self.position() {
            1..=3 => ToothGroup::Anterior,
            4 | 5 => ToothGroup::Premolar,
            _ => ToothGroup::Molar,
        }
    }

    /// Position in [`ZIGZAG_ORDER`].
    pub fn zigzag_index(self) -> usize {
        let q = self.quadrant();
        let p = self.position() as usize;
        // Right side runs 7..1 towards the midline, left side 1..7 away from it.
        let pair = match q {
            1 | 4 => 7 - p,
            _ => 6 + p,
        };
        2 * pair + usize::from(self.arch() == Arch::Mandibular)
    }

    pub fn from_zigzag_index(index: usize) -> Result<Self> {
        ZIGZAG_ORDER
            .get(index)
            .map(|&c| Fdi(c))
            .ok_or_else(|| Error::InvalidInput(format!("zig-zag index {index} out of range")))
    }

    /// Bilateral counterpart: quadrant 1<->2, 4<->3, position preserved.
    pub fn mirrored(self) -> Self {
        let q = match self.quadrant() {
            1 => 2,
            2 => 1,
            3 => 4,
            _ => 3,
        };
        Fdi(q * 10 + self.position())
    }

    /// Dense index 0..28 ordered by code (11..17, 21..27, 31..37, 41..47).
    pub fn ordinal(self) -> usize {
        (self.quadrant() as usize - 1) * 7 + self.position() as usize - 1
    }

    pub fn from_ordinal(ordinal: usize) -> Result<Self> {
        if ordinal >= NUM_TEETH {
            return Err(Error::InvalidInput(format!("tooth ordinal {ordinal} out of range")));
        }
        Ok(Fdi(((ordinal / 7 + 1) * 10 + ordinal % 7 + 1) as u8))
    }

    /// All 28 codes in ascending order.
    pub fn all() -> impl Iterator<Item = Fdi> {
        (0..NUM_TEETH).map(|o| Fdi::from_ordinal(o).unwrap())
    }
}

/// Free-function form of [`Fdi::zigzag_index`] accepting a raw code.
pub fn zigzag_index(code: u32) -> Result<usize> {
    Ok(Fdi::new(code)?.zigzag_index())
}

impl TryFrom<u32> for Fdi {
    type Error = Error;

    fn try_from(code: u32) -> Result<Self> {
        Fdi::new(code)
    }
}

impl From<Fdi> for u32 {
    fn from(f: Fdi) -> u32 {
        f.code()
    }
}

impl fmt::Display for Fdi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
