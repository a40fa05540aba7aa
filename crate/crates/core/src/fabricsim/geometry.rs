//! Device geometry: rows, major columns and how many minor frames each
//! column holds. Loaded from TOML:
//!
//! ```toml
//! idcode = 0x03727093
//! rows_top = 2
//! rows_bottom = 2
//! slcr_unlock_key = 0x0000DF0D     # optional
//! bram_content_minors = 128        # optional
//! min_readback_gap_us = 0.0        # optional, 0 disables the freeze check
//!
//! [[columns]]
//! kind = "CLB"
//! minors = 36
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitcodec::{BlockType, FrameAddress};

pub const DEFAULT_SLCR_UNLOCK_KEY: u32 = 0x0000_DF0D;
pub const ZYNQ_7020_IDCODE: u32 = 0x0372_7093;

const DEMO_GEOMETRY: &str = include_str!("../../fixtures/demo_geometry.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("cannot parse geometry: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ColumnKind {
    Clb,
    Bram,
    Dsp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub kind: ColumnKind,
    #[serde(rename = "minors")]
    pub minors_per_column: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub idcode: u32,
    pub rows_top: u8,
    pub rows_bottom: u8,
    pub columns: Vec<ColumnSpec>,
    #[serde(default = "default_bram_minors")]
    pub bram_content_minors: u8,
    #[serde(default = "default_unlock_key")]
    pub slcr_unlock_key: u32,
    #[serde(default)]
    pub min_readback_gap_us: f64,
}

fn default_bram_minors() -> u8 {
    128
}

fn default_unlock_key() -> u32 {
    DEFAULT_SLCR_UNLOCK_KEY
}

impl DeviceGeometry {
    pub fn new(idcode: u32, rows_top: u8, rows_bottom: u8, columns: Vec<ColumnSpec>) -> Self {
        DeviceGeometry {
            idcode,
            rows_top,
            rows_bottom,
            columns,
            bram_content_minors: default_bram_minors(),
            slcr_unlock_key: DEFAULT_SLCR_UNLOCK_KEY,
            min_readback_gap_us: 0.0,
        }
    }

    /// The bundled two-slot demonstration device.
    pub fn demo() -> Self {
        DeviceGeometry::from_toml_str(DEMO_GEOMETRY).expect("bundled demo geometry is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, GeometryError> {
        let geometry: DeviceGeometry =
            toml::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("geometry serializes")
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let invalid = |m: String| Err(GeometryError::Invalid(m));
        if self.columns.is_empty() {
            return invalid("at least one column is required".into());
        }
        if self.columns.len() > 1024 {
            return invalid(format!(
                "{} columns exceed the 10-bit field",
                self.columns.len()
            ));
        }
        if self.rows_top > 32 || self.rows_bottom > 32 {
            return invalid("row counts exceed the 5-bit field".into());
        }
        if self.rows_top == 0 && self.rows_bottom == 0 {
            return invalid("at least one row is required".into());
        }
        for (i, c) in self.columns.iter().enumerate() {
            if c.minors_per_column == 0 || c.minors_per_column > 128 {
                return invalid(format!(
                    "column {i} has {} minors, expected 1..=128",
                    c.minors_per_column
                ));
            }
        }
        if self.bram_content_minors == 0 || self.bram_content_minors > 128 {
            return invalid("bram_content_minors must be 1..=128".into());
        }
        if !(self.min_readback_gap_us >= 0.0 && self.min_readback_gap_us.is_finite()) {
            return invalid("min_readback_gap_us must be a non-negative number".into());
        }
        Ok(())
    }

    pub fn column_kind(&self, column: u16) -> Option<ColumnKind> {
        self.columns.get(usize::from(column)).map(|c| c.kind)
    }

    fn rows(&self, bottom_half: bool) -> u8 {
        if bottom_half {
            self.rows_bottom
        } else {
            self.rows_top
        }
    }

    fn column_minors(&self, block: BlockType, column: u16) -> Option<u8> {
        let spec = self.columns.get(usize::from(column))?;
        match block {
            BlockType::Clb => Some(spec.minors_per_column),
            BlockType::Bram if spec.kind == ColumnKind::Bram => Some(self.bram_content_minors),
            _ => None,
        }
    }

    /// Number of minor frames at this address's major column, if the
    /// address lies inside the device.
    pub fn minors_at(&self, far: &FrameAddress) -> Option<u8> {
        if far.row >= self.rows(far.bottom_half) {
            return None;
        }
        self.column_minors(far.block_type, far.column)
            .filter(|&m| far.minor < m)
    }

    pub fn contains(&self, far: &FrameAddress) -> bool {
        self.minors_at(far).is_some()
    }

    fn first_column(&self, block: BlockType, from: u16) -> Option<u16> {
        (from..self.columns.len() as u16).find(|&c| self.column_minors(block, c).is_some())
    }

    fn first_in_block(&self, block: BlockType) -> Option<FrameAddress> {
        let column = self.first_column(block, 0)?;
        let bottom_half = self.rows_top == 0;
        Some(FrameAddress {
            block_type: block,
            bottom_half,
            row: 0,
            column,
            minor: 0,
        })
    }

    /// First frame address in canonical order.
    pub fn first_far(&self) -> Option<FrameAddress> {
        BlockType::ALL.iter().find_map(|&b| self.first_in_block(b))
    }

    /// Canonical next frame: minor, then column, then row, then top/bottom
    /// half, then block type. `None` past the last frame or for addresses
    /// outside the device.
    pub fn successor(&self, far: &FrameAddress) -> Option<FrameAddress> {
        let minors = self.minors_at(far)?;
        if far.minor + 1 < minors {
            return Some(FrameAddress {
                minor: far.minor + 1,
                ..*far
            });
        }
        if let Some(column) = self.first_column(far.block_type, far.column + 1) {
            return Some(FrameAddress {
                column,
                minor: 0,
                ..*far
            });
        }
        let first_col = self.first_column(far.block_type, 0)?;
        if far.row + 1 < self.rows(far.bottom_half) {
            return Some(FrameAddress {
                row: far.row + 1,
                column: first_col,
                minor: 0,
                ..*far
            });
        }
        if !far.bottom_half && self.rows_bottom > 0 {
            return Some(FrameAddress {
                bottom_half: true,
                row: 0,
                column: first_col,
                minor: 0,
                ..*far
            });
        }
        BlockType::ALL
            .iter()
            .filter(|&&b| b > far.block_type)
            .find_map(|&b| self.first_in_block(b))
    }

    /// Every frame address of the device in canonical order.
    pub fn frames(&self) -> impl Iterator<Item = FrameAddress> + '_ {
        std::iter::successors(self.first_far(), move |f| self.successor(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DeviceGeometry {
        DeviceGeometry::new(
            0x1234,
            1,
            1,
            vec![
                ColumnSpec {
                    kind: ColumnKind::Clb,
                    minors_per_column: 2,
                },
                ColumnSpec {
                    kind: ColumnKind::Bram,
                    minors_per_column: 1,
                },
            ],
        )
    }

    #[test]
    fn demo_geometry_loads() {
        let g = DeviceGeometry::demo();
        assert_eq!(g.idcode, ZYNQ_7020_IDCODE);
        assert_eq!(g.slcr_unlock_key, DEFAULT_SLCR_UNLOCK_KEY);
        assert!(g.contains(&FrameAddress::decode(0x0042_011E).unwrap()));
        assert!(g.contains(&FrameAddress::decode(0x00C2_0200).unwrap()));
    }

    #[test]
    fn successor_order_matches_brute_force() {
        let mut g = tiny();
        g.bram_content_minors = 2;
        // Brute force: every valid address, sorted by (block, half, row, col, minor).
        let mut expected = Vec::new();
        for word in 0u32..(1 << 26) {
            if word & 0x7F >= 4 || (word >> 7) & 0x3FF >= 4 || (word >> 17) & 0x1F >= 2 {
                continue;
            }
            if let Ok(fa) = FrameAddress::decode(word) {
                if g.contains(&fa) {
                    expected.push(fa);
                }
            }
        }
        expected.sort();
        let walked: Vec<_> = g.frames().collect();
        assert_eq!(walked, expected);
        // CLB: 2 halves * 1 row * (2 + 1 minors); BRAM: 2 halves * 2 minors.
        assert_eq!(walked.len(), 6 + 4);
    }

    #[test]
    fn successor_rejects_outside_addresses() {
        let g = tiny();
        let outside = FrameAddress::decode(0x0000_0500).unwrap();
        assert!(!g.contains(&outside));
        assert_eq!(g.successor(&outside), None);
    }

    #[test]
    fn validation() {
        let mut g = tiny();
        g.columns.clear();
        assert!(g.validate().is_err());
        let mut g = tiny();
        g.columns[0].minors_per_column = 0;
        assert!(g.validate().is_err());
        assert!(DeviceGeometry::from_toml_str("idcode = 1").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let g = DeviceGeometry::demo();
        let again = DeviceGeometry::from_toml_str(&g.to_toml_string()).unwrap();
        assert_eq!(again, g);
    }
}
