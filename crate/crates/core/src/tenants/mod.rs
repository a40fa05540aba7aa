//! Reference tenant designs whose state lives in mapped fabric cells, plus
//! an independent software oracle for each.

mod oracle;
mod resident;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitcodec::ElementKind;
use crate::fabricsim::DeviceModel;

pub use oracle::{initial_state, oracle_replay, CHAIN_INCREMENT, CHAIN_ROTATE};
pub use resident::{ResidentTenant, LUT_PATTERN, LUT_PATTERN_BITS};

/// Flip-flops holding the BramChain ring index.
pub const CHAIN_INDEX_BITS: usize = 3;
pub const MAX_CHAIN_LEN: usize = 1 << CHAIN_INDEX_BITS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TenantError {
    #[error("slot `{0}` has no cells in the cell map")]
    UnknownSlot(String),
    #[error("no design loaded in slot `{0}`")]
    NotLoaded(String),
    #[error("cell {cell} is already bound to a design in slot `{owner}`")]
    SlotOverlap { cell: usize, owner: String },
    #[error("slot `{slot}` needs {needed} {kind} cells, found {found}")]
    BindingMismatch {
        slot: String,
        kind: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cannot parse tenant fixture: {0}")]
    Fixture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TenantKind {
    UpCounter4,
    DownCounter4,
    Lfsr8,
    Lfsr32,
    BramChain,
}

impl TenantKind {
    pub const ALL: [TenantKind; 5] = [
        TenantKind::UpCounter4,
        TenantKind::DownCounter4,
        TenantKind::Lfsr8,
        TenantKind::Lfsr32,
        TenantKind::BramChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TenantKind::UpCounter4 => "UpCounter4",
            TenantKind::DownCounter4 => "DownCounter4",
            TenantKind::Lfsr8 => "Lfsr8",
            TenantKind::Lfsr32 => "Lfsr32",
            TenantKind::BramChain => "BramChain",
        }
    }

    /// Width of the register state in bits (the chain's ring index width
    /// for BramChain).
    pub fn state_bits(self) -> u32 {
        match self {
            TenantKind::UpCounter4 | TenantKind::DownCounter4 => 4,
            TenantKind::Lfsr8 => 8,
            TenantKind::Lfsr32 => 32,
            TenantKind::BramChain => CHAIN_INDEX_BITS as u32,
        }
    }

    /// Counters only move while their update line is asserted.
    pub fn uses_update(self) -> bool {
        matches!(self, TenantKind::UpCounter4 | TenantKind::DownCounter4)
    }
}

impl fmt::Display for TenantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TenantKind {
    type Err = TenantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "upcounter4" | "up4" | "up" => Ok(TenantKind::UpCounter4),
            "downcounter4" | "down4" | "down" => Ok(TenantKind::DownCounter4),
            "lfsr8" => Ok(TenantKind::Lfsr8),
            "lfsr32" => Ok(TenantKind::Lfsr32),
            "bramchain" | "chain" => Ok(TenantKind::BramChain),
            _ => Err(TenantError::InvalidParams(format!(
                "unknown tenant kind `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantParams {
    pub seed: u32,
    /// Feedback taps as polynomial exponents, highest first.
    pub taps: Vec<u8>,
    pub chain_len: usize,
}

impl TenantParams {
    pub fn defaults(kind: TenantKind) -> Self {
        let (seed, taps) = match kind {
            TenantKind::Lfsr8 => (0x01, vec![8, 6, 5, 4]),
            TenantKind::Lfsr32 => (0x01, vec![32, 22, 2, 1]),
            TenantKind::BramChain => (0x1234_5678, Vec::new()),
            _ => (0, Vec::new()),
        };
        TenantParams {
            seed,
            taps,
            chain_len: if kind == TenantKind::BramChain {
                MAX_CHAIN_LEN
            } else {
                0
            },
        }
    }

    pub fn validate(&self, kind: TenantKind) -> Result<(), TenantError> {
        let bad = |m: String| Err(TenantError::InvalidParams(m));
        match kind {
            TenantKind::Lfsr8 | TenantKind::Lfsr32 => {
                let width = kind.state_bits();
                if self.taps.is_empty() || self.taps.iter().any(|&t| t == 0 || u32::from(t) > width)
                {
                    return bad(format!("taps {:?} must lie in 1..={width}", self.taps));
                }
                if !self.taps.contains(&(width as u8)) {
                    return bad(format!("taps {:?} must include {width}", self.taps));
                }
                let mask = if width == 32 {
                    u32::MAX
                } else {
                    (1 << width) - 1
                };
                if self.seed & mask == 0 {
                    return bad("an all-zero LFSR seed never leaves zero".into());
                }
            }
            TenantKind::BramChain => {
                if self.chain_len == 0 || self.chain_len > MAX_CHAIN_LEN {
                    return bad(format!("chain_len must be 1..={MAX_CHAIN_LEN}"));
                }
            }
            TenantKind::UpCounter4 | TenantKind::DownCounter4 => {}
        }
        Ok(())
    }
}

/// Architectural state of a tenant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TenantState {
    Register(u32),
    Chain {
        index: usize,
        words: Vec<u32>,
        acc: u32,
    },
}

impl TenantState {
    /// Register value, or the accumulator of a chain.
    pub fn value(&self) -> u32 {
        match self {
            TenantState::Register(v) => *v,
            TenantState::Chain { acc, .. } => *acc,
        }
    }
}

impl fmt::Display for TenantState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TenantState::Register(v) => write!(f, "0x{v:X}"),
            TenantState::Chain { index, words, acc } => {
                write!(f, "chain[idx={index} acc=0x{acc:08X} words=")?;
                for (i, w) in words.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{w:08X}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantDesign {
    pub kind: TenantKind,
    pub slot_id: String,
    pub params: TenantParams,
    /// Net names to bind, taken in cell-map order. Empty binds the first
    /// cells of each kind in the slot.
    pub bindings: Vec<String>,
}

impl TenantDesign {
    pub fn new(kind: TenantKind, slot_id: &str) -> Self {
        TenantDesign {
            kind,
            slot_id: slot_id.to_string(),
            params: TenantParams::defaults(kind),
            bindings: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u32) -> Self {
        self.params.seed = seed;
        self
    }

    pub fn with_chain_len(mut self, len: usize) -> Self {
        self.params.chain_len = len;
        self
    }

    pub fn with_taps(mut self, taps: Vec<u8>) -> Self {
        self.params.taps = taps;
        self
    }

    /// Cells the design needs per element kind: (FF, BRAM, DSP).
    fn requirements(&self) -> (usize, usize, usize) {
        match self.kind {
            TenantKind::BramChain => (CHAIN_INDEX_BITS, self.params.chain_len, 1),
            k => (k.state_bits() as usize, 0, 0),
        }
    }
}

#[derive(Deserialize)]
struct FixtureFile {
    #[serde(default)]
    tenant: Vec<FixtureEntry>,
}

#[derive(Deserialize)]
struct FixtureEntry {
    slot: String,
    kind: String,
    seed: Option<u32>,
    taps: Option<Vec<u8>>,
    chain_len: Option<usize>,
    #[serde(default)]
    cells: Vec<String>,
}

/// Parses a tenant fixture:
///
/// ```toml
/// [[tenant]]
/// slot = "slot0"
/// kind = "Lfsr8"
/// seed = 0x5A
/// taps = [8, 6, 5, 4]
/// cells = ["state_reg[0]", "state_reg[1]"]   # optional
/// ```
pub fn parse_tenant_fixture(text: &str) -> Result<Vec<TenantDesign>, TenantError> {
    let file: FixtureFile =
        toml::from_str(text).map_err(|e| TenantError::Fixture(e.to_string()))?;
    file.tenant
        .into_iter()
        .map(|e| {
            let kind: TenantKind = e.kind.parse()?;
            let mut design = TenantDesign::new(kind, &e.slot);
            if let Some(seed) = e.seed {
                design.params.seed = seed;
            }
            if let Some(taps) = e.taps {
                design.params.taps = taps;
            }
            if let Some(len) = e.chain_len {
                design.params.chain_len = len;
            }
            design.bindings = e.cells;
            design.params.validate(kind)?;
            Ok(design)
        })
        .collect()
}

/// Cells of one element kind for the design, in cell-map order. `None`
/// takes every candidate.
fn pick(
    dev: &DeviceModel,
    design: &TenantDesign,
    kind: ElementKind,
    needed: Option<usize>,
) -> Result<Vec<usize>, TenantError> {
    let candidates = dev
        .slot_cells(&design.slot_id)
        .into_iter()
        .filter(|&c| dev.cells()[c].element_kind == kind)
        .filter(|&c| {
            design.bindings.is_empty() || design.bindings.contains(&dev.cells()[c].design_path)
        });
    let Some(needed) = needed else {
        return Ok(candidates.collect());
    };
    let found: Vec<usize> = candidates.collect();
    if found.len() < needed {
        return Err(TenantError::BindingMismatch {
            slot: design.slot_id.clone(),
            kind: kind.as_str(),
            needed,
            found: found.len(),
        });
    }
    Ok(found[..needed].to_vec())
}

/// Binds a design to its slot's cells, writes its initial state into both
/// planes and attaches it to the fabric.
pub fn load_design(dev: &mut DeviceModel, design: &TenantDesign) -> Result<(), TenantError> {
    design.params.validate(design.kind)?;
    if dev.slot_cells(&design.slot_id).is_empty() {
        return Err(TenantError::UnknownSlot(design.slot_id.clone()));
    }
    let (ff, bram, dsp) = design.requirements();
    let ff = pick(dev, design, ElementKind::Ff, Some(ff))?;
    let mut lut = pick(dev, design, ElementKind::LutRam, None)?;
    lut.truncate(LUT_PATTERN_BITS);
    let bram = pick(dev, design, ElementKind::Bram, Some(bram))?;
    let dsp = pick(dev, design, ElementKind::Dsp, Some(dsp))?;

    let owned: HashSet<usize> = ff
        .iter()
        .chain(&lut)
        .chain(&bram)
        .chain(&dsp)
        .copied()
        .collect();
    for logic in dev.logic() {
        if let Some(&cell) = logic.cells().iter().find(|c| owned.contains(c)) {
            return Err(TenantError::SlotOverlap {
                cell,
                owner: logic.slot_id().to_string(),
            });
        }
    }

    let tenant = ResidentTenant::new(design.clone(), ff, lut, bram, dsp.first().copied());
    tenant.write_state(dev, &initial_state(design.kind, &design.params));
    tenant.write_lut_pattern(dev);
    dev.attach_logic(Box::new(tenant))
        .map_err(|cell| TenantError::SlotOverlap {
            cell,
            owner: design.slot_id.clone(),
        })
}

/// Drives the slot's update line.
pub fn set_update(dev: &mut DeviceModel, slot: &str, asserted: bool) -> Result<(), TenantError> {
    if find(dev, slot).is_none() {
        return Err(TenantError::NotLoaded(slot.to_string()));
    }
    dev.set_input(slot, asserted);
    Ok(())
}

fn find<'a>(dev: &'a DeviceModel, slot: &str) -> Option<&'a ResidentTenant> {
    dev.logic()
        .filter_map(|l| l.as_any().downcast_ref::<ResidentTenant>())
        .find(|t| t.design().slot_id == slot)
}

/// The design loaded in `slot`.
pub fn loaded_design(dev: &DeviceModel, slot: &str) -> Option<TenantDesign> {
    find(dev, slot).map(|t| t.design().clone())
}

/// Current architectural state of the design in `slot`, read from the
/// user plane.
pub fn read_state(dev: &DeviceModel, slot: &str) -> Result<TenantState, TenantError> {
    find(dev, slot)
        .map(|t| t.read_state(dev))
        .ok_or_else(|| TenantError::NotLoaded(slot.to_string()))
}

/// True when the design in `slot` stopped on corrupted LUT contents.
pub fn is_halted(dev: &DeviceModel, slot: &str) -> bool {
    find(dev, slot).is_some_and(|t| t.halted())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running_demo() -> DeviceModel {
        let mut dev = DeviceModel::demo();
        dev.slcr_write(
            crate::fabricsim::SlcrRegister::Unlock,
            dev.geometry().slcr_unlock_key,
        );
        dev.slcr_write(crate::fabricsim::SlcrRegister::Throttle, 1);
        dev
    }

    #[test]
    fn counters_follow_update_line() {
        let mut dev = running_demo();
        load_design(
            &mut dev,
            &TenantDesign::new(TenantKind::UpCounter4, "slot0"),
        )
        .unwrap();
        load_design(
            &mut dev,
            &TenantDesign::new(TenantKind::DownCounter4, "slot1"),
        )
        .unwrap();
        assert_eq!(read_state(&dev, "slot0").unwrap().value(), 0x0);
        assert_eq!(read_state(&dev, "slot1").unwrap().value(), 0xF);
        dev.step_clock(5);
        assert_eq!(read_state(&dev, "slot0").unwrap().value(), 0x0);
        set_update(&mut dev, "slot0", true).unwrap();
        set_update(&mut dev, "slot1", true).unwrap();
        dev.step_clock(3);
        assert_eq!(read_state(&dev, "slot0").unwrap().value(), 0x3);
        assert_eq!(read_state(&dev, "slot1").unwrap().value(), 0xC);
        dev.step_clock(4);
        assert_eq!(read_state(&dev, "slot0").unwrap().value(), 0x7);
        assert_eq!(read_state(&dev, "slot1").unwrap().value(), 0x8);
        for _ in 0..40 {
            dev.step_clock(1);
            let up = read_state(&dev, "slot0").unwrap().value();
            let down = read_state(&dev, "slot1").unwrap().value();
            assert_eq!((up + down) % 16, 0xF);
        }
    }

    #[test]
    fn stopped_clock_freezes_state() {
        let mut dev = running_demo();
        load_design(&mut dev, &TenantDesign::new(TenantKind::Lfsr8, "slot0")).unwrap();
        dev.slcr_write(crate::fabricsim::SlcrRegister::Throttle, 0);
        dev.step_clock(100);
        assert_eq!(read_state(&dev, "slot0").unwrap().value(), 0x01);
    }

    #[test]
    fn resident_designs_match_oracle() {
        for kind in TenantKind::ALL {
            let mut dev = running_demo();
            let design = TenantDesign::new(kind, "slot1").with_seed(0xACE1_2B3D);
            load_design(&mut dev, &design).unwrap();
            set_update(&mut dev, "slot1", true).unwrap();
            let start = read_state(&dev, "slot1").unwrap();
            assert_eq!(start, initial_state(kind, &design.params));
            dev.step_clock(300);
            assert_eq!(
                read_state(&dev, "slot1").unwrap(),
                oracle_replay(kind, &design.params, &start, 300, true),
                "{kind}"
            );
        }
    }

    #[test]
    fn chain_writes_one_bram_word_per_tick() {
        let mut dev = running_demo();
        load_design(&mut dev, &TenantDesign::new(TenantKind::BramChain, "slot0")).unwrap();
        let before = dev.effects().len();
        dev.step_clock(17);
        let writes = dev.effects()[before..]
            .iter()
            .filter(|e| matches!(e, crate::fabricsim::Effect::BramWrite { .. }))
            .count();
        assert_eq!(writes, 17);
    }

    #[test]
    fn overlapping_designs_are_rejected() {
        let mut dev = running_demo();
        load_design(
            &mut dev,
            &TenantDesign::new(TenantKind::UpCounter4, "slot0"),
        )
        .unwrap();
        assert!(matches!(
            load_design(&mut dev, &TenantDesign::new(TenantKind::Lfsr8, "slot0")),
            Err(TenantError::SlotOverlap { .. })
        ));
        assert!(matches!(
            load_design(&mut dev, &TenantDesign::new(TenantKind::Lfsr8, "slot9")),
            Err(TenantError::UnknownSlot(_))
        ));
        assert!(matches!(
            set_update(&mut dev, "slot1", true),
            Err(TenantError::NotLoaded(_))
        ));
    }

    #[test]
    fn explicit_bindings_and_params() {
        let mut dev = running_demo();
        let design = TenantDesign {
            bindings: vec!["state_reg[0]".into()],
            ..TenantDesign::new(TenantKind::UpCounter4, "slot0")
        };
        assert!(matches!(
            load_design(&mut dev, &design),
            Err(TenantError::BindingMismatch {
                needed: 4,
                found: 1,
                ..
            })
        ));
        let bad = TenantDesign::new(TenantKind::Lfsr8, "slot0").with_seed(0x100);
        assert!(matches!(
            load_design(&mut dev, &bad),
            Err(TenantError::InvalidParams(_))
        ));
        let bad = TenantDesign::new(TenantKind::BramChain, "slot0").with_chain_len(9);
        assert!(load_design(&mut dev, &bad).is_err());
    }

    #[test]
    fn fixture_parsing() {
        let designs = parse_tenant_fixture(
            "[[tenant]]\nslot = \"slot0\"\nkind = \"Lfsr8\"\nseed = 0x5A\n\n\
             [[tenant]]\nslot = \"slot1\"\nkind = \"chain\"\nchain_len = 4\n",
        )
        .unwrap();
        assert_eq!(designs[0].kind, TenantKind::Lfsr8);
        assert_eq!(designs[0].params.seed, 0x5A);
        assert_eq!(designs[0].params.taps, vec![8, 6, 5, 4]);
        assert_eq!(designs[1].params.chain_len, 4);
        assert!(parse_tenant_fixture("[[tenant]]\nslot = \"s\"\nkind = \"xor\"\n").is_err());
    }
}
