//! Behavioural model of a configuration fabric: configuration memory, the
//! configuration port, user-visible state and clock control.

pub mod device;
pub mod effect;
pub mod geometry;

pub use device::{
    ClockControl, ConfigState, DeviceModel, FabricError, FabricIo, FrameChecksum, ResidentLogic,
    SlcrRegister, BRAM_READBACK_FLAG_BIT, BRAM_READBACK_FLAG_WORDS,
};
pub use effect::{format_trace, Effect};
pub use geometry::{ColumnKind, ColumnSpec, DeviceGeometry, GeometryError, ZYNQ_7020_IDCODE};

/// Cell map of the bundled two-slot demo design.
pub const DEMO_CELLMAP: &str = include_str!("../../fixtures/demo_cellmap.ll");
