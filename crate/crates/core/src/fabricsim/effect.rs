use std::fmt;

use crate::bitcodec::{Command, FrameAddress, Register};

/// Observable side effect of driving the device model. The `Display` form
/// is the line-oriented trace vocabulary used by golden-trace tests.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Synced,
    Desynced,
    /// Port dropped back to unsynchronised after an error.
    Aborted,
    Command(Command),
    IdcodeVerified(u32),
    FarSet(u32),
    MaskSet(u32),
    Ctl0Set(u32),
    GlutMask(bool),
    RegisterIgnored {
        register: Register,
        value: u32,
    },
    FramesStaged {
        far: FrameAddress,
        count: usize,
    },
    FrameWritten(FrameAddress),
    /// BRAM frame carrying readback-only bits: accepted on the port, but the
    /// block keeps its previous content.
    FrameReverted(FrameAddress),
    CrcReset,
    ReadbackArmed {
        far: u32,
        words: u32,
    },
    RegisterQueued {
        register: Register,
        value: u32,
    },
    ReadbackServed {
        far: FrameAddress,
        words: usize,
    },
    Captured {
        cells: usize,
    },
    GsrPulse {
        cells: usize,
    },
    SlcrUnlocked,
    SlcrUnlockRejected,
    ClockStopped,
    ClockStarted,
    ThrottleIgnored,
    Tick {
        cycles: u64,
    },
    TickBlocked {
        cycles: u64,
        reason: &'static str,
    },
    BramWrite {
        cell: usize,
        value: u32,
    },
    TenantLoaded {
        slot: String,
        kind: String,
    },
    TenantHalted {
        slot: String,
    },
    TenantResumed {
        slot: String,
    },
    FabricFreeze {
        gap_us: f64,
    },
    PortIdle {
        us: f64,
    },
}

impl Effect {
    /// True for effects that change configuration memory.
    pub fn touches_config_memory(&self) -> bool {
        matches!(
            self,
            Effect::FrameWritten(_) | Effect::Captured { .. } | Effect::BramWrite { .. }
        )
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Synced => f.write_str("sync"),
            Effect::Desynced => f.write_str("desync"),
            Effect::Aborted => f.write_str("abort"),
            Effect::Command(c) => write!(f, "cmd {}", c.name()),
            Effect::IdcodeVerified(id) => write!(f, "idcode ok 0x{id:08X}"),
            Effect::FarSet(w) => write!(f, "far 0x{w:08X}"),
            Effect::MaskSet(w) => write!(f, "mask 0x{w:08X}"),
            Effect::Ctl0Set(w) => write!(f, "ctl0 0x{w:08X}"),
            Effect::GlutMask(on) => write!(f, "glutmask {}", if *on { "on" } else { "off" }),
            Effect::RegisterIgnored { register, value } => {
                write!(f, "reg-ignored {register} 0x{value:08X}")
            }
            Effect::FramesStaged { far, count } => {
                write!(f, "stage 0x{:08X} frames={count}", far.word())
            }
            Effect::FrameWritten(far) => write!(f, "frame-write 0x{:08X}", far.word()),
            Effect::FrameReverted(far) => write!(f, "frame-revert 0x{:08X}", far.word()),
            Effect::CrcReset => f.write_str("crc-reset"),
            Effect::ReadbackArmed { far, words } => {
                write!(f, "readback-armed 0x{far:08X} words={words}")
            }
            Effect::RegisterQueued { register, value } => {
                write!(f, "reg-read {register} 0x{value:08X}")
            }
            Effect::ReadbackServed { far, words } => {
                write!(f, "readback 0x{:08X} words={words}", far.word())
            }
            Effect::Captured { cells } => write!(f, "capture cells={cells}"),
            Effect::GsrPulse { cells } => write!(f, "gsr cells={cells}"),
            Effect::SlcrUnlocked => f.write_str("slcr unlock"),
            Effect::SlcrUnlockRejected => f.write_str("slcr unlock-rejected"),
            Effect::ClockStopped => f.write_str("clock stop"),
            Effect::ClockStarted => f.write_str("clock start"),
            Effect::ThrottleIgnored => f.write_str("throttle ignored locked"),
            Effect::Tick { cycles } => write!(f, "tick {cycles}"),
            Effect::TickBlocked { cycles, reason } => write!(f, "tick-blocked {cycles} {reason}"),
            Effect::BramWrite { cell, value } => write!(f, "bram-write cell={cell} 0x{value:08X}"),
            Effect::TenantLoaded { slot, kind } => write!(f, "tenant-load {slot} {kind}"),
            Effect::TenantHalted { slot } => write!(f, "tenant-halt {slot}"),
            Effect::TenantResumed { slot } => write!(f, "tenant-resume {slot}"),
            Effect::FabricFreeze { gap_us } => write!(f, "fabric-freeze gap_us={gap_us:.3}"),
            Effect::PortIdle { us } => write!(f, "port-idle us={us:.3}"),
        }
    }
}

/// Renders effects one per line.
pub fn format_trace(effects: &[Effect]) -> String {
    effects.iter().map(|e| format!("{e}\n")).collect()
}
