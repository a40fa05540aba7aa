//! Latency model for save and restore, calibrated per frame.

use serde::{Deserialize, Serialize};

pub const DEFAULT_PORT_CLOCK_HZ: f64 = 50_000_000.0;
pub const DEFAULT_SAVE_US_PER_FRAME: f64 = 62.2;
pub const DEFAULT_RESTORE_US_PER_FRAME: f64 = 67.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimedOp {
    Save,
    Restore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub port_clock_hz: f64,
    pub save_us_per_frame: f64,
    pub restore_us_per_frame: f64,
    pub interframe_gap_us: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            port_clock_hz: DEFAULT_PORT_CLOCK_HZ,
            save_us_per_frame: DEFAULT_SAVE_US_PER_FRAME,
            restore_us_per_frame: DEFAULT_RESTORE_US_PER_FRAME,
            interframe_gap_us: 0.0,
        }
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("port_clock_hz", self.port_clock_hz),
            ("save_us_per_frame", self.save_us_per_frame),
            ("restore_us_per_frame", self.restore_us_per_frame),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.interframe_gap_us.is_finite() && self.interframe_gap_us >= 0.0) {
            return Err("interframe_gap_us must be non-negative".into());
        }
        Ok(())
    }

    /// What-if: per-frame costs scaled by the ratio of port clocks.
    pub fn at_clock(&self, hz: f64) -> TimingModel {
        let scale = self.port_clock_hz / hz;
        TimingModel {
            port_clock_hz: hz,
            save_us_per_frame: self.save_us_per_frame * scale,
            restore_us_per_frame: self.restore_us_per_frame * scale,
            interframe_gap_us: self.interframe_gap_us,
        }
    }

    pub fn per_frame_us(&self, op: TimedOp) -> f64 {
        match op {
            TimedOp::Save => self.save_us_per_frame,
            TimedOp::Restore => self.restore_us_per_frame,
        }
    }
}

/// Modelled latency in microseconds.
pub fn estimate_timing(tm: &TimingModel, n_frames: usize, op: TimedOp) -> f64 {
    let n = n_frames as f64;
    n * tm.per_frame_us(op) + n_frames.saturating_sub(1) as f64 * tm.interframe_gap_us
}
