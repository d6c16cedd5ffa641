use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Per-dimension distribution scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistScheme {
    /// Everything on a single rank.
    Circ,
    /// Every rank holds the whole dimension.
    Star,
    /// Round-robin down each column of the process grid.
    Mc,
    /// Round-robin along each row of the process grid.
    Mr,
    /// Round-robin over the column-major ordering of the whole grid.
    Vc,
    /// Round-robin over the row-major ordering of the whole grid.
    Vr,
}

impl DistScheme {
    pub const ALL: [DistScheme; 6] =
        [DistScheme::Circ, DistScheme::Star, DistScheme::Mc, DistScheme::Mr, DistScheme::Vc, DistScheme::Vr];

    pub fn code(self) -> u8 {
        match self {
            DistScheme::Circ => 0,
            DistScheme::Star => 1,
            DistScheme::Mc => 2,
            DistScheme::Mr => 3,
            DistScheme::Vc => 4,
            DistScheme::Vr => 5,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.code() == code)
            .ok_or_else(|| Error::InvalidLayout(format!("unknown distribution scheme code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            DistScheme::Circ => "CIRC",
            DistScheme::Star => "STAR",
            DistScheme::Mc => "MC",
            DistScheme::Mr => "MR",
            DistScheme::Vc => "VC",
            DistScheme::Vr => "VR",
        }
    }
}

impl fmt::Display for DistScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CIRC" | "O" => Ok(DistScheme::Circ),
            "STAR" | "*" => Ok(DistScheme::Star),
            "MC" => Ok(DistScheme::Mc),
            "MR" => Ok(DistScheme::Mr),
            "VC" => Ok(DistScheme::Vc),
            "VR" => Ok(DistScheme::Vr),
            other => Err(Error::InvalidLayout(format!("unknown distribution scheme {other:?}"))),
        }
    }
}

/// A `(column scheme, row scheme)` layout tag.
///
/// The column scheme says how each matrix column is spread over the ranks,
/// i.e. it governs the row index; the row scheme governs the column index.
/// Only layouts that store every element on exactly one rank are legal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DistPair {
    col: DistScheme,
    row: DistScheme,
}

impl DistPair {
    pub const MC_MR: DistPair = DistPair { col: DistScheme::Mc, row: DistScheme::Mr };
    pub const MR_MC: DistPair = DistPair { col: DistScheme::Mr, row: DistScheme::Mc };
    pub const VC_STAR: DistPair = DistPair { col: DistScheme::Vc, row: DistScheme::Star };
    pub const VR_STAR: DistPair = DistPair { col: DistScheme::Vr, row: DistScheme::Star };
    pub const STAR_VC: DistPair = DistPair { col: DistScheme::Star, row: DistScheme::Vc };
    pub const STAR_VR: DistPair = DistPair { col: DistScheme::Star, row: DistScheme::Vr };
    pub const CIRC_CIRC: DistPair = DistPair { col: DistScheme::Circ, row: DistScheme::Circ };

    /// Every legal non-redundant pair.
    pub const LEGAL: [DistPair; 7] = [
        Self::MC_MR,
        Self::MR_MC,
        Self::VC_STAR,
        Self::VR_STAR,
        Self::STAR_VC,
        Self::STAR_VR,
        Self::CIRC_CIRC,
    ];

    pub fn new(col: DistScheme, row: DistScheme) -> Result<Self> {
        let pair = DistPair { col, row };
        if Self::LEGAL.contains(&pair) {
            Ok(pair)
        } else {
            Err(Error::InvalidLayout(format!("[{col},{row}] is not a legal non-redundant distribution pair")))
        }
    }

    pub fn col_scheme(self) -> DistScheme {
        self.col
    }

    pub fn row_scheme(self) -> DistScheme {
        self.row
    }
}

impl fmt::Display for DistPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.col, self.row)
    }
}

/// Accepts `[VC,STAR]`, `VC,STAR`, `VC:STAR` and `[VC,*]`.
impl FromStr for DistPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let mut parts = inner.split([',', ':']);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(r), None) => DistPair::new(c.parse()?, r.parse()?),
            _ => Err(Error::InvalidLayout(format!("cannot parse distribution pair {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_non_redundant_pairs_are_legal() {
        let mut legal = 0;
        for c in DistScheme::ALL {
            for r in DistScheme::ALL {
                if DistPair::new(c, r).is_ok() {
                    legal += 1;
                }
            }
        }
        assert_eq!(legal, 7);
        assert!(DistPair::new(DistScheme::Star, DistScheme::Star).is_err());
        assert!(DistPair::new(DistScheme::Mc, DistScheme::Star).is_err());
        assert!(DistPair::new(DistScheme::Vc, DistScheme::Vc).is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("[VC,STAR]".parse::<DistPair>().unwrap(), DistPair::VC_STAR);
        assert_eq!("star:vc".parse::<DistPair>().unwrap(), DistPair::STAR_VC);
        assert_eq!("[MC, MR]".parse::<DistPair>().unwrap(), DistPair::MC_MR);
        assert_eq!("[VR,*]".parse::<DistPair>().unwrap(), DistPair::VR_STAR);
        assert!("[*,*]".parse::<DistPair>().is_err());
        assert!("VC".parse::<DistPair>().is_err());
        for p in DistPair::LEGAL {
            assert_eq!(p.to_string().parse::<DistPair>().unwrap(), p);
        }
    }

    #[test]
    fn scheme_codes_round_trip() {
        for s in DistScheme::ALL {
            assert_eq!(DistScheme::from_code(s.code()).unwrap(), s);
        }
        assert!(DistScheme::from_code(6).is_err());
    }
}
