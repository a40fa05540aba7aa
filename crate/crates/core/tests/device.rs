use epoch_core::bitcodec::packet::SYNC_WORD;
use epoch_core::bitcodec::parse_logic_location;
use epoch_core::bitcodec::{ElementKind, Frame, FrameAddress, CRC_WORD, FRAME_WORDS};
use epoch_core::epochctl::{
    build_readback_sequence, build_write_sequence, clock_disable, clock_enable, read_frame,
};
use epoch_core::fabricsim::{
    DeviceGeometry, DeviceModel, Effect, FabricError, SlcrRegister, DEMO_CELLMAP,
};
use epoch_core::tenants::{load_design, read_state, TenantDesign, TenantKind};
use proptest::prelude::*;

const CMD: u32 = 0x3000_8001;
const FAR: u32 = 0x3000_2001;
const FDRI: u32 = 0x3000_4000;

fn far(w: u32) -> FrameAddress {
    FrameAddress::decode(w).unwrap()
}

fn ff_frame() -> FrameAddress {
    far(0x0042_011E)
}

fn write(
    dev: &mut DeviceModel,
    at: FrameAddress,
    frames: &[Frame],
) -> Result<Vec<Effect>, FabricError> {
    let seq = build_write_sequence(&at, frames, &at, dev.idcode()).unwrap();
    dev.pcap_write(&seq.words())
}

fn marked(word: usize, value: u32) -> Frame {
    let mut f = Frame::zeroed();
    f.set_word(word, value);
    f
}

/// Sync, WCFG, FAR, FDRI and DESYNC with no CRC reset in between, so the
/// staged frames are only committed by the checksum check at DESYNC.
fn unchecked_write(at: FrameAddress, frame: &Frame) -> Vec<u32> {
    let mut w = vec![SYNC_WORD, CMD, 1, FAR, at.word(), FDRI, 0x5000_0000 | 202];
    w.extend_from_slice(frame.words());
    w.extend(std::iter::repeat_n(0, FRAME_WORDS));
    w.extend([CMD, 0x0D]);
    w
}

#[test]
fn write_then_readback_is_verbatim() {
    let mut dev = DeviceModel::demo();
    let frame = marked(3, 0xDEAD_BEEF);
    let effects = write(&mut dev, ff_frame(), std::slice::from_ref(&frame)).unwrap();
    assert!(effects.contains(&Effect::IdcodeVerified(0x0372_7093)));
    assert!(effects.contains(&Effect::FrameWritten(ff_frame())));
    assert_eq!(dev.config_frame(&ff_frame()), frame);
    assert!(!dev.config_state().synced);
    assert_eq!(
        read_frame(&mut dev, &ff_frame(), false, false).unwrap(),
        frame
    );
}

#[test]
fn wrong_idcode_aborts_without_writing() {
    let mut dev = DeviceModel::demo();
    let seq = build_write_sequence(&ff_frame(), &[marked(3, 1)], &ff_frame(), 0x0372_7094).unwrap();
    let err = dev.pcap_write(&seq.words()).unwrap_err();
    assert_eq!(
        err,
        FabricError::IdcodeMismatch {
            expected: 0x0372_7093,
            found: 0x0372_7094
        }
    );
    assert!(dev.config_memory().is_empty());
    assert!(!dev.config_state().synced);
    assert_eq!(dev.effects().last(), Some(&Effect::Aborted));
}

#[test]
fn fdri_auto_increments_far() {
    let mut dev = DeviceModel::demo();
    let start = ff_frame();
    let frames: Vec<Frame> = (0..3).map(|i| marked(7, 0x100 + i)).collect();
    write(&mut dev, start, &frames).unwrap();
    let mut at = start;
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(&dev.config_frame(&at), f, "frame {i}");
        at = dev.geometry().successor(&at).unwrap();
    }
    assert!(dev.config_frame(&at).is_zero());
}

#[test]
fn words_before_sync_are_ignored() {
    let mut dev = DeviceModel::demo();
    let mut stream = unchecked_write(ff_frame(), &marked(3, 5));
    stream.remove(0);
    assert!(dev.pcap_write(&stream).unwrap().is_empty());
    assert!(dev.config_memory().is_empty());
    assert_eq!(dev.pcap_read(1), Err(FabricError::NotSynced));
}

#[test]
fn frame_payload_must_be_whole_frames() {
    let mut dev = DeviceModel::demo();
    let mut stream = unchecked_write(ff_frame(), &marked(3, 5));
    stream[6] = 0x5000_0000 | 201;
    stream.truncate(7 + 201);
    assert_eq!(
        dev.pcap_write(&stream),
        Err(FabricError::FdriLengthNotFrameMultiple(201))
    );
}

#[test]
fn checksum_hook_gates_commit_at_desync() {
    let xor = |f: &Frame| {
        f.words()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != CRC_WORD)
            .fold(0, |a, (_, w)| a ^ w)
    };
    let mut good = marked(3, 0xDEAD_BEEF);
    good.set_word(CRC_WORD, 0xDEAD_BEEF);
    let bad = marked(3, 0xDEAD_BEEF);

    let mut dev = DeviceModel::demo();
    assert_eq!(
        dev.pcap_write(&unchecked_write(ff_frame(), &good)),
        Err(FabricError::CrcMismatch { far: 0x0042_011E })
    );
    dev.set_frame_checksum(Some(Box::new(xor)));
    assert!(dev.pcap_write(&unchecked_write(ff_frame(), &bad)).is_err());
    assert!(dev.config_memory().is_empty());
    dev.pcap_write(&unchecked_write(ff_frame(), &good)).unwrap();
    assert_eq!(dev.config_frame(&ff_frame()), good);
}

#[test]
fn slcr_unlock_gates_the_throttle() {
    let mut dev = DeviceModel::demo();
    assert!(!dev.clock_running());
    assert_eq!(
        dev.slcr_write(SlcrRegister::Throttle, 1),
        Effect::ThrottleIgnored
    );
    assert_eq!(
        dev.slcr_write(SlcrRegister::Unlock, 0x1234),
        Effect::SlcrUnlockRejected
    );
    assert_eq!(
        dev.slcr_write(SlcrRegister::Unlock, 0xDF0D),
        Effect::SlcrUnlocked
    );
    assert_eq!(
        dev.slcr_write(SlcrRegister::Throttle, 1),
        Effect::ClockStarted
    );
    assert!(dev.clock_running());
}

#[test]
fn stopped_clock_freezes_tenants() {
    let mut dev = DeviceModel::demo();
    clock_enable(&mut dev);
    load_design(&mut dev, &TenantDesign::new(TenantKind::Lfsr8, "slot0")).unwrap();
    dev.step_clock(5);
    let before = read_state(&dev, "slot0").unwrap();
    clock_disable(&mut dev);
    dev.step_clock(100);
    assert_eq!(read_state(&dev, "slot0").unwrap(), before);
    assert_eq!(dev.cycle(), 5);
    assert!(matches!(
        dev.effects().last(),
        Some(Effect::TickBlocked {
            reason: "clock-stopped",
            ..
        })
    ));
}

#[test]
fn lut_frames_read_zero_unless_unmasked() {
    let mut dev = DeviceModel::demo();
    clock_enable(&mut dev);
    load_design(
        &mut dev,
        &TenantDesign::new(TenantKind::UpCounter4, "slot0"),
    )
    .unwrap();
    let lut = dev
        .slot_cells("slot0")
        .into_iter()
        .find(|&c| dev.cells()[c].element_kind == ElementKind::LutRam)
        .unwrap();
    let at = dev.cells()[lut].far;
    let stored = dev.config_frame(&at);
    assert!(!stored.is_zero());
    assert!(read_frame(&mut dev, &at, false, false).unwrap().is_zero());
    assert_eq!(read_frame(&mut dev, &at, true, false).unwrap(), stored);
}

#[test]
fn back_to_back_readbacks_freeze_the_fabric() {
    let mut geometry = DeviceGeometry::demo();
    geometry.min_readback_gap_us = 50.0;
    let cells = parse_logic_location(DEMO_CELLMAP).unwrap();
    let mut dev = DeviceModel::new(geometry, cells).unwrap();
    read_frame(&mut dev, &ff_frame(), false, false).unwrap();
    assert!(!dev
        .effects()
        .iter()
        .any(|e| matches!(e, Effect::FabricFreeze { .. })));
    read_frame(&mut dev, &ff_frame(), false, false).unwrap();
    assert!(dev
        .effects()
        .iter()
        .any(|e| matches!(e, Effect::FabricFreeze { .. })));

    let before = dev.effects().len();
    dev.idle_port(60.0);
    read_frame(&mut dev, &ff_frame(), false, false).unwrap();
    assert!(!dev.effects()[before..]
        .iter()
        .any(|e| matches!(e, Effect::FabricFreeze { .. })));
}

#[test]
fn readback_of_unarmed_port_is_rejected() {
    let mut dev = DeviceModel::demo();
    dev.pcap_write(&[SYNC_WORD]).unwrap();
    assert_eq!(dev.pcap_read(202), Err(FabricError::ReadbackNotArmed));
    // An FDRO read without RCFG in the command register does not arm.
    let seq = build_readback_sequence(&ff_frame(), 1, false, false).unwrap();
    let header: Vec<u32> = seq.header().into_iter().filter(|&w| w != 4).collect();
    dev.pcap_write(&header).unwrap();
    assert_eq!(dev.pcap_read(202), Err(FabricError::ReadbackNotArmed));
}

proptest! {
    #[test]
    fn gsr_is_idempotent(values in prop::collection::vec(any::<u32>(), 1..64), ticks in 0u64..40) {
        let mut dev = DeviceModel::demo();
        clock_enable(&mut dev);
        load_design(&mut dev, &TenantDesign::new(TenantKind::Lfsr32, "slot0").with_seed(values[0] | 1)).unwrap();
        load_design(&mut dev, &TenantDesign::new(TenantKind::BramChain, "slot1")).unwrap();
        for (i, v) in values.iter().enumerate().skip(1) {
            let c = i % dev.cells().len();
            if dev.cells()[c].element_kind != ElementKind::LutRam {
                dev.preload_cell(c, *v);
            }
        }
        dev.step_clock(ticks);
        dev.gsr_pulse();
        let once: Vec<u32> = (0..dev.cells().len()).map(|c| dev.user_value(c)).collect();
        dev.gsr_pulse();
        let twice: Vec<u32> = (0..dev.cells().len()).map(|c| dev.user_value(c)).collect();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn written_ff_frames_read_back_verbatim(words in prop::collection::vec(any::<u32>(), FRAME_WORDS)) {
        let mut dev = DeviceModel::demo();
        let frame = Frame::from_words(&words).unwrap();
        write(&mut dev, ff_frame(), std::slice::from_ref(&frame)).unwrap();
        prop_assert_eq!(read_frame(&mut dev, &ff_frame(), false, false).unwrap(), frame);
    }
}
