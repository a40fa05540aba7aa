//! Frame address register (FAR) fields.
//!
//! Layout of the 32-bit FAR word:
//!
//! ```text
//!  31..26    25..23      22        21..17   16..7    6..0
//! reserved | block | top/bottom |  row   | column | minor
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

const BLOCK_SHIFT: u32 = 23;
const HALF_SHIFT: u32 = 22;
const ROW_SHIFT: u32 = 17;
const COLUMN_SHIFT: u32 = 7;

const BLOCK_MASK: u32 = 0x7;
const ROW_MASK: u32 = 0x1F;
const COLUMN_MASK: u32 = 0x3FF;
const MINOR_MASK: u32 = 0x7F;
const RESERVED_MASK: u32 = 0xFC00_0000;

pub const MAX_ROW: u8 = ROW_MASK as u8;
pub const MAX_COLUMN: u16 = COLUMN_MASK as u16;
pub const MAX_MINOR: u8 = MINOR_MASK as u8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FarError {
    #[error("FAR field `{field}` value {value} exceeds maximum {max}")]
    FieldOutOfRange {
        field: &'static str,
        value: u32,
        max: u32,
    },
    #[error("reserved FAR bits [31:26] set in {0:#010x}")]
    ReservedBitsSet(u32),
    #[error("unknown FAR block type {0:#05b}")]
    UnknownBlockType(u8),
    #[error("cannot parse FAR `{0}`")]
    Parse(String),
}

/// Configuration block targeted by a frame address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockType {
    /// CLB, IO and CLK interconnect/configuration.
    Clb = 0b000,
    /// Block RAM content.
    Bram = 0b001,
    /// CFG_CLB frames, present with reset-after-reconfiguration enabled.
    CfgClb = 0b010,
}

impl BlockType {
    pub const ALL: [BlockType; 3] = [BlockType::Clb, BlockType::Bram, BlockType::CfgClb];

    pub fn from_bits(bits: u8) -> Result<Self, FarError> {
        match bits {
            0b000 => Ok(BlockType::Clb),
            0b001 => Ok(BlockType::Bram),
            0b010 => Ok(BlockType::CfgClb),
            other => Err(FarError::UnknownBlockType(other)),
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockType::Clb => "CLB",
            BlockType::Bram => "BRAM",
            BlockType::CfgClb => "CFG_CLB",
        }
    }
}

/// Decoded frame address.
///
/// Field order matches the encoded bit significance, so the derived `Ord`
/// agrees with numeric order of the encoded word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameAddress {
    pub block_type: BlockType,
    pub bottom_half: bool,
    pub row: u8,
    pub column: u16,
    pub minor: u8,
}

impl FrameAddress {
    /// Builds an address, checking every field against its bit width.
    pub fn new(
        block_type: BlockType,
        bottom_half: bool,
        row: u8,
        column: u16,
        minor: u8,
    ) -> Result<Self, FarError> {
        let fa = FrameAddress {
            block_type,
            bottom_half,
            row,
            column,
            minor,
        };
        fa.check()?;
        Ok(fa)
    }

    fn check(&self) -> Result<(), FarError> {
        if self.row > MAX_ROW {
            return Err(FarError::FieldOutOfRange {
                field: "row",
                value: self.row.into(),
                max: ROW_MASK,
            });
        }
        if self.column > MAX_COLUMN {
            return Err(FarError::FieldOutOfRange {
                field: "column",
                value: self.column.into(),
                max: COLUMN_MASK,
            });
        }
        if self.minor > MAX_MINOR {
            return Err(FarError::FieldOutOfRange {
                field: "minor",
                value: self.minor.into(),
                max: MINOR_MASK,
            });
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<u32, FarError> {
        self.check()?;
        Ok(u32::from(self.block_type.bits()) << BLOCK_SHIFT
            | u32::from(self.bottom_half) << HALF_SHIFT
            | u32::from(self.row) << ROW_SHIFT
            | u32::from(self.column) << COLUMN_SHIFT
            | u32::from(self.minor))
    }

    /// Encodes an address already known to be in range (anything built by
    /// [`FrameAddress::new`] or [`FrameAddress::decode`]).
    pub fn word(&self) -> u32 {
        self.encode()
            .expect("FrameAddress fields validated at construction")
    }

    pub fn decode(word: u32) -> Result<Self, FarError> {
        if word & RESERVED_MASK != 0 {
            return Err(FarError::ReservedBitsSet(word));
        }
        let block_type = BlockType::from_bits(((word >> BLOCK_SHIFT) & BLOCK_MASK) as u8)?;
        Ok(FrameAddress {
            block_type,
            bottom_half: (word >> HALF_SHIFT) & 1 == 1,
            row: ((word >> ROW_SHIFT) & ROW_MASK) as u8,
            column: ((word >> COLUMN_SHIFT) & COLUMN_MASK) as u16,
            minor: (word & MINOR_MASK) as u8,
        })
    }

    /// Same major column, different minor.
    pub fn with_minor(&self, minor: u8) -> Result<Self, FarError> {
        FrameAddress::new(
            self.block_type,
            self.bottom_half,
            self.row,
            self.column,
            minor,
        )
    }

    pub fn is_bram(&self) -> bool {
        self.block_type == BlockType::Bram
    }
}

pub fn far_encode(fa: &FrameAddress) -> Result<u32, FarError> {
    fa.encode()
}

pub fn far_decode(word: u32) -> Result<FrameAddress, FarError> {
    FrameAddress::decode(word)
}

impl fmt::Display for FrameAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#010x}", self.word())
    }
}

impl FromStr for FrameAddress {
    type Err = FarError;

    /// Accepts `0x`-prefixed or bare hexadecimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let word = parse_hex_word(s).ok_or_else(|| FarError::Parse(s.to_string()))?;
        FrameAddress::decode(word)
    }
}

pub(crate) fn parse_hex_word(s: &str) -> Option<u32> {
    let t = s.trim();
    let digits = t
        .strip_prefix("0x")
        .or_else(|| t.strip_prefix("0X"))
        .unwrap_or(t);
    if digits.is_empty() || digits.len() > 8 {
        return None;
    }
    u32::from_str_radix(digits, 16).ok()
}

/// Which slice of a CLB a LUT frame targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceParity {
    /// Slice-L in odd-numbered slices (e.g. SLICE_X1Y0).
    OddSliceL,
    /// Slice-M in even-numbered slices (e.g. SLICE_X0Y0).
    EvenSliceM,
}

/// Minor addresses holding the four 16-bit quarters of each slice's LUT
/// initialization bits.
pub fn lut_far_minors(parity: SliceParity) -> [u8; 4] {
    match parity {
        SliceParity::OddSliceL => [26, 27, 28, 29],
        SliceParity::EvenSliceM => [32, 33, 34, 35],
    }
}

/// Minor addresses carrying flip-flop state.
pub fn ff_far_minors() -> [u8; 2] {
    [30, 31]
}

pub fn is_lut_minor(minor: u8) -> bool {
    lut_far_minors(SliceParity::OddSliceL).contains(&minor)
        || lut_far_minors(SliceParity::EvenSliceM).contains(&minor)
}

pub fn is_ff_minor(minor: u8) -> bool {
    ff_far_minors().contains(&minor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Field-by-field composition written independently of `encode`.
    fn compose(block: u32, bottom: u32, row: u32, col: u32, minor: u32) -> u32 {
        let mut w = 0u32;
        for (value, lsb, width) in [
            (minor, 0, 7),
            (col, 7, 10),
            (row, 17, 5),
            (bottom, 22, 1),
            (block, 23, 3),
        ] {
            for bit in 0..width {
                if value >> bit & 1 == 1 {
                    w |= 1 << (lsb + bit);
                }
            }
        }
        w
    }

    #[test]
    fn encode_known_addresses() {
        let fa = FrameAddress::new(BlockType::Clb, true, 1, 2, 30).unwrap();
        assert_eq!(far_encode(&fa).unwrap(), 0x0042_011E);
        assert_eq!(compose(0, 1, 1, 2, 30), 0x0042_011E);

        let zero = FrameAddress::new(BlockType::Clb, false, 0, 0, 0).unwrap();
        assert_eq!(far_encode(&zero).unwrap(), 0);

        let bram = FrameAddress::new(BlockType::Bram, false, 0, 4, 0).unwrap();
        assert_eq!(compose(1, 0, 0, 4, 0), 0x0080_0200);
        assert_eq!(far_encode(&bram).unwrap(), 0x0080_0200);
    }

    #[test]
    fn decode_known_words() {
        let fa = far_decode(0x0042_011E).unwrap();
        assert_eq!(fa.block_type, BlockType::Clb);
        assert!(fa.bottom_half);
        assert_eq!((fa.row, fa.column, fa.minor), (1, 2, 30));

        assert_eq!(far_decode(0x0042_0120).unwrap().minor, 32);
        assert_eq!(far_decode(0x0042_011A).unwrap().minor, 26);
        assert_eq!(far_decode(0x0042_0123).unwrap().minor, 35);

        assert_eq!(
            far_decode(0xFC00_0000),
            Err(FarError::ReservedBitsSet(0xFC00_0000))
        );
        assert_eq!(
            far_decode(0x0180_0000),
            Err(FarError::UnknownBlockType(0b011))
        );
    }

    #[test]
    fn bram_third_byte_pattern() {
        // BRAM, bottom half, row 1: the third byte reads 0xC2.
        let fa = far_decode(0x00C2_0200).unwrap();
        assert!(fa.is_bram());
        assert!(fa.bottom_half);
        assert_eq!(fa.row, 1);
    }

    #[test]
    fn out_of_range_fields_rejected() {
        let mut fa = FrameAddress::new(BlockType::Clb, false, 0, 0, 0).unwrap();
        fa.minor = 128;
        assert!(matches!(
            fa.encode(),
            Err(FarError::FieldOutOfRange { field: "minor", .. })
        ));
        assert!(FrameAddress::new(BlockType::Clb, false, 32, 0, 0).is_err());
        assert!(FrameAddress::new(BlockType::Clb, false, 0, 1024, 0).is_err());
    }

    #[test]
    fn minor_tables() {
        assert_eq!(lut_far_minors(SliceParity::OddSliceL), [26, 27, 28, 29]);
        assert_eq!(lut_far_minors(SliceParity::EvenSliceM), [32, 33, 34, 35]);
        assert_eq!(ff_far_minors(), [30, 31]);
    }

    #[test]
    fn parse_from_str() {
        let fa: FrameAddress = "0x0042011E".parse().unwrap();
        assert_eq!(fa.minor, 30);
        assert!("0xZZ".parse::<FrameAddress>().is_err());
        assert!("".parse::<FrameAddress>().is_err());
    }

    proptest! {
        #[test]
        fn decode_matches_composition(
            block in 0u32..3, bottom in 0u32..2, row in 0u32..32, col in 0u32..1024, minor in 0u32..128
        ) {
            let w = compose(block, bottom, row, col, minor);
            let fa = far_decode(w).unwrap();
            prop_assert_eq!(fa.encode().unwrap(), w);
            prop_assert_eq!(u32::from(fa.block_type.bits()), block);
            prop_assert_eq!(fa.bottom_half, bottom == 1);
            prop_assert_eq!(u32::from(fa.row), row);
            prop_assert_eq!(u32::from(fa.column), col);
            prop_assert_eq!(u32::from(fa.minor), minor);
        }
    }
}
