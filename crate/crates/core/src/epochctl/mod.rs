//! The preemption controller: command sequences for the configuration
//! port, clock-gated context save and restore, and saved-context storage.

pub mod controller;
pub mod diff;
pub mod dram;
pub mod fixup;
pub mod sequence;
pub mod snapshot;
pub mod timing;

use thiserror::Error;

use crate::bitcodec::{FarError, PacketError};
use crate::fabricsim::FabricError;

pub use controller::{
    blank_slot, clock_disable, clock_enable, context_restore, context_save, read_frame,
    restore_from_store, restore_many, ControllerOptions,
};
pub use diff::{diff_snapshots, WordDiff};
pub use dram::{DramStore, Region, DEMO_REGION_BASES};
pub use fixup::{apply_bram_fixup, bram_fixup_words, has_readback_flags, BRAM_FIXUP_BIT};
pub use sequence::{
    build_capture_sequence, build_readback_sequence, build_write_sequence, golden_check,
    CommandSequence, TemplateItem,
};
pub use snapshot::Snapshot;
pub use timing::{estimate_timing, TimedOp, TimingModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpochError {
    #[error("a sequence needs at least one frame")]
    EmptySequence,
    #[error("word count {count} exceeds the {max} limit of the header field")]
    CountOverflow { count: u64, max: u32 },
    #[error("frame {0:#010x} is not a BRAM frame")]
    NotABramFrame(u32),
    #[error("slot `{slot}` needs {frames} frames, its region holds {capacity}")]
    RegionOverflow {
        slot: String,
        frames: usize,
        capacity: usize,
    },
    #[error("no region allocated for slot `{0}`")]
    UnknownRegion(String),
    #[error("{0}")]
    RegionConflict(String),
    #[error("slot `{0}` has no frames")]
    UnknownSlot(String),
    #[error("snapshot IDCODE {found:#010x} does not match device {expected:#010x}")]
    IdcodeMismatch { expected: u32, found: u32 },
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("{context}: {source}")]
    Fabric {
        context: String,
        source: FabricError,
    },
    #[error("golden mismatch at line {line}: expected {expected}, found {found}")]
    GoldenMismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Far(#[from] FarError),
    #[error("packet error: {0}")]
    Packet(PacketError),
}

impl From<PacketError> for EpochError {
    fn from(e: PacketError) -> Self {
        match e {
            PacketError::CountOverflow { count, max } => EpochError::CountOverflow { count, max },
            other => EpochError::Packet(other),
        }
    }
}

impl EpochError {
    /// Prefixes the context of a fabric error.
    pub fn in_context(self, outer: &str) -> Self {
        match self {
            EpochError::Fabric { context, source } => EpochError::Fabric {
                context: format!("{outer}: {context}"),
                source,
            },
            other => other,
        }
    }

    /// The underlying device error, if any.
    pub fn fabric_error(&self) -> Option<&FabricError> {
        match self {
            EpochError::Fabric { source, .. } => Some(source),
            _ => None,
        }
    }
}
