//! Clock-gated context save and restore of fabric slots.

use super::dram::DramStore;
use super::fixup::apply_bram_fixup;
use super::sequence::{build_capture_sequence, build_readback_sequence, build_write_sequence};
use super::snapshot::Snapshot;
use super::timing::TimingModel;
use super::EpochError;
use crate::bitcodec::{Frame, FrameAddress, FRAME_WORDS};
use crate::fabricsim::{DeviceModel, FabricError, SlcrRegister};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOptions {
    /// Clear readback-only bits in BRAM frames before storing them.
    pub bram_fixup: bool,
    /// Pulse global set/reset after writing frames.
    pub pulse_gsr: bool,
    /// Write all-zero frames over the slot before restoring it.
    pub blank_before_restore: bool,
    /// Set GLUTMASK so LUT contents read back unmasked.
    pub unmask_luts: bool,
    pub timing: TimingModel,
}

impl Default for ControllerOptions {
    fn default() -> Self {
        ControllerOptions {
            bram_fixup: true,
            pulse_gsr: true,
            blank_before_restore: false,
            unmask_luts: true,
            timing: TimingModel::default(),
        }
    }
}

fn fabric(context: String) -> impl FnOnce(FabricError) -> EpochError {
    move |source| EpochError::Fabric { context, source }
}

pub fn clock_disable(dev: &mut DeviceModel) {
    let key = dev.geometry().slcr_unlock_key;
    dev.slcr_write(SlcrRegister::Unlock, key);
    dev.slcr_write(SlcrRegister::Throttle, 0);
}

pub fn clock_enable(dev: &mut DeviceModel) {
    let key = dev.geometry().slcr_unlock_key;
    dev.slcr_write(SlcrRegister::Unlock, key);
    dev.slcr_write(SlcrRegister::Throttle, 1);
}

/// Runs `f` with the fabric clock stopped; the clock restarts even when
/// `f` fails.
fn with_clock_stopped<T>(
    dev: &mut DeviceModel,
    f: impl FnOnce(&mut DeviceModel) -> Result<T, EpochError>,
) -> Result<T, EpochError> {
    clock_disable(dev);
    let out = f(dev);
    clock_enable(dev);
    out
}

/// Reads one frame through the port, padding frame discarded.
pub fn read_frame(
    dev: &mut DeviceModel,
    far: &FrameAddress,
    unmask: bool,
    capture: bool,
) -> Result<Frame, EpochError> {
    let seq = build_readback_sequence(far, 1, unmask, capture)?;
    let ctx = || format!("readback of frame {far}");
    dev.pcap_write(&seq.header()).map_err(fabric(ctx()))?;
    let data = dev.pcap_read(seq.read_words()).map_err(fabric(ctx()))?;
    dev.pcap_write(&seq.footer()).map_err(fabric(ctx()))?;
    Ok(Frame::from_words(&data[FRAME_WORDS..]).expect("one frame after padding"))
}

/// Saves every frame of `slot` into its region of `store`.
pub fn context_save(
    dev: &mut DeviceModel,
    slot: &str,
    store: &mut DramStore,
    opts: &ControllerOptions,
) -> Result<Snapshot, EpochError> {
    let fars = dev.slot_frames(slot);
    if fars.is_empty() {
        return Err(EpochError::UnknownSlot(slot.to_string()));
    }
    store.check_fits(slot, fars.len())?;
    let snapshot = with_clock_stopped(dev, |dev| {
        let mut frames = Vec::with_capacity(fars.len());
        for (i, far) in fars.iter().enumerate() {
            if i > 0 {
                dev.idle_port(opts.timing.interframe_gap_us);
            }
            let mut frame = read_frame(dev, far, opts.unmask_luts, true)
                .map_err(|e| e.in_context(&format!("save {slot}")))?;
            if far.is_bram() && opts.bram_fixup {
                frame = apply_bram_fixup(far, &frame)?;
            }
            frames.push((*far, frame));
        }
        let has_bram = fars.iter().any(FrameAddress::is_bram);
        let cycle = dev.cycle();
        let snapshot = if opts.bram_fixup || !has_bram {
            Snapshot::new(
                slot,
                dev.idcode(),
                cycle,
                frames,
                opts.bram_fixup && has_bram,
            )?
        } else {
            Snapshot::new_uncorrected(slot, dev.idcode(), cycle, frames, false)?
        };
        store.write_snapshot(&snapshot)?;
        Ok(snapshot)
    })?;
    Ok(snapshot)
}

fn write_frames(
    dev: &mut DeviceModel,
    frames: &[(FrameAddress, Frame)],
    context: &str,
) -> Result<(), EpochError> {
    let idcode = dev.idcode();
    for (i, (far, frame)) in frames.iter().enumerate() {
        let next = frames.get(i + 1).map_or(*far, |(n, _)| *n);
        let seq = build_write_sequence(far, std::slice::from_ref(frame), &next, idcode)?;
        dev.pcap_write(&seq.words())
            .map_err(fabric(format!("{context}: write of frame {far}")))?;
    }
    Ok(())
}

fn capture_all(dev: &mut DeviceModel) -> Result<(), EpochError> {
    dev.pcap_write(&build_capture_sequence().words())
        .map_err(fabric("pre-restore capture".into()))?;
    Ok(())
}

fn check_snapshot(dev: &DeviceModel, snapshot: &Snapshot) -> Result<(), EpochError> {
    if snapshot.idcode() != dev.idcode() {
        return Err(EpochError::IdcodeMismatch {
            expected: dev.idcode(),
            found: snapshot.idcode(),
        });
    }
    if let Some((far, _)) = snapshot
        .frames()
        .iter()
        .find(|(f, _)| !dev.geometry().contains(f))
    {
        return Err(EpochError::GeometryMismatch(format!(
            "frame {far} is outside the device"
        )));
    }
    Ok(())
}

/// Writes the snapshot back and reloads user state from it.
pub fn context_restore(
    dev: &mut DeviceModel,
    snapshot: &Snapshot,
    opts: &ControllerOptions,
) -> Result<(), EpochError> {
    restore_many(dev, std::slice::from_ref(snapshot), opts)
}

/// Restores several slots behind a single global set/reset.
pub fn restore_many(
    dev: &mut DeviceModel,
    snapshots: &[Snapshot],
    opts: &ControllerOptions,
) -> Result<(), EpochError> {
    for s in snapshots {
        check_snapshot(dev, s)?;
    }
    with_clock_stopped(dev, |dev| {
        // Global set/reset reloads every slot from configuration memory, so
        // bring the other slots' flip-flop bits up to date first.
        capture_all(dev)?;
        for s in snapshots {
            let context = format!("restore {}", s.slot_id());
            if opts.blank_before_restore {
                let zeros: Vec<_> = s
                    .frames()
                    .iter()
                    .map(|(f, _)| (*f, Frame::zeroed()))
                    .collect();
                write_frames(dev, &zeros, &context)?;
            }
            write_frames(dev, s.frames(), &context)?;
        }
        if opts.pulse_gsr {
            dev.gsr_pulse();
        }
        Ok(())
    })
}

/// Restores `slot` from its region of `store`.
pub fn restore_from_store(
    dev: &mut DeviceModel,
    slot: &str,
    store: &DramStore,
    opts: &ControllerOptions,
) -> Result<Snapshot, EpochError> {
    let snapshot = store.read_snapshot(slot)?;
    context_restore(dev, &snapshot, opts)?;
    Ok(snapshot)
}

/// Overwrites every frame of `slot` with zeros.
pub fn blank_slot(
    dev: &mut DeviceModel,
    slot: &str,
    opts: &ControllerOptions,
) -> Result<(), EpochError> {
    let fars = dev.slot_frames(slot);
    if fars.is_empty() {
        return Err(EpochError::UnknownSlot(slot.to_string()));
    }
    with_clock_stopped(dev, |dev| {
        capture_all(dev)?;
        let zeros: Vec<_> = fars.iter().map(|f| (*f, Frame::zeroed())).collect();
        write_frames(dev, &zeros, &format!("blank {slot}"))?;
        if opts.pulse_gsr {
            dev.gsr_pulse();
        }
        Ok(())
    })
}
