use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The four HEXACO traits this model regresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Trait {
    H,
    E,
    A,
    C,
}

impl Trait {
    pub const ALL: [Trait; 4] = [Trait::H, Trait::E, Trait::A, Trait::C];

    pub fn letter(self) -> char {
        match self {
            Trait::H => 'H',
            Trait::E => 'E',
            Trait::A => 'A',
            Trait::C => 'C',
        }
    }

    pub fn full_name(self) -> &'static str {
        match self {
            Trait::H => "Honesty-Humility",
            Trait::E => "Extraversion",
            Trait::A => "Agreeableness",
            Trait::C => "Conscientiousness",
        }
    }

    /// Name of the per-trait text feature in dataset files.
    pub fn text_feature(self) -> &'static str {
        match self {
            Trait::H => "text_H",
            Trait::E => "text_E",
            Trait::A => "text_A",
            Trait::C => "text_C",
        }
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Trait {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "H" | "h" | "Honesty-Humility" => Ok(Trait::H),
            "E" | "e" | "Extraversion" => Ok(Trait::E),
            "A" | "a" | "Agreeableness" => Ok(Trait::A),
            "C" | "c" | "Conscientiousness" => Ok(Trait::C),
            other => Err(Error::UnknownTrait(other.to_string())),
        }
    }
}

/// Parses `"H,E"` or `"all"`.
pub fn parse_trait_list(s: &str) -> Result<Vec<Trait>, Error> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Trait::ALL.to_vec());
    }
    s.split(',').map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for t in Trait::ALL {
            assert_eq!(t.to_string().parse::<Trait>().unwrap(), t);
            assert_eq!(t.full_name().parse::<Trait>().unwrap(), t);
        }
        assert!(matches!("X".parse::<Trait>(), Err(Error::UnknownTrait(_))));
        assert_eq!(parse_trait_list("all").unwrap().len(), 4);
        assert_eq!(parse_trait_list("H,C").unwrap(), vec![Trait::H, Trait::C]);
    }
}
