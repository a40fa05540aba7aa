use std::any::Any;
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use super::effect::Effect;
use super::geometry::{ColumnKind, DeviceGeometry, GeometryError};
use crate::bitcodec::far::{is_ff_minor, is_lut_minor};
use crate::bitcodec::packet::{decode_header, Header, PacketKind, SYNC_WORD};
use crate::bitcodec::{
    BlockType, Command, ElementKind, FarError, Frame, FrameAddress, LogicLocationEntry, Opcode,
    Register, CRC_WORD, FRAME_WORDS,
};

/// Words of a BRAM frame whose bit 18 the readback path forces high.
/// Writing a BRAM frame with any of these bits set makes the block keep
/// its previous content.
pub const BRAM_READBACK_FLAG_WORDS: [usize; 10] = [4, 14, 24, 34, 44, 55, 65, 75, 85, 95];
pub const BRAM_READBACK_FLAG_BIT: u8 = 18;

/// Value the CRC register takes after RCRC.
pub const CRC_RESET_VALUE: u32 = 0;

const GLUTMASK_BIT: u32 = 1 << 8;
const DEFAULT_PORT_CLOCK_HZ: f64 = 50_000_000.0;

pub type FrameChecksum = Box<dyn Fn(&Frame) -> u32 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FabricError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cell {seq} ({net}) at {far:#010x} lies outside the device geometry")]
    CellOutsideGeometry { seq: u64, net: String, far: u32 },
    #[error("cell {seq} ({net}): {reason}")]
    CellPlacement {
        seq: u64,
        net: String,
        reason: String,
    },
    #[error("IDCODE mismatch: device is {expected:#010x}, stream carries {found:#010x}")]
    IdcodeMismatch { expected: u32, found: u32 },
    #[error("configuration port is not synchronised")]
    NotSynced,
    #[error("frames staged at {far:#010x} were not covered by RCRC or a valid CRC before DESYNC")]
    CrcMismatch { far: u32 },
    #[error("FDRI payload lacks the trailing all-zero padding frame")]
    MissingPaddingFrame,
    #[error("FDRI payload of {0} words is not a whole number of frames")]
    FdriLengthNotFrameMultiple(usize),
    #[error("FDRI write while the command register is not WCFG")]
    WriteWhileNotWcfg,
    #[error("no readback armed")]
    ReadbackNotArmed,
    #[error("readback armed for {armed} words, {requested} requested")]
    CountMismatch { armed: usize, requested: usize },
    #[error("frame address {0:#010x} is outside the device")]
    FarOutsideGeometry(u32),
    #[error(transparent)]
    BadFar(#[from] FarError),
    #[error("unrecognised packet header {0:#010x}")]
    BadHeader(u32),
    #[error("type-2 packet without a preceding type-1 packet")]
    OrphanType2,
}

/// Configuration-logic registers and port state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigState {
    pub synced: bool,
    pub cmd_reg: u32,
    pub far_reg: u32,
    pub ctl0: u32,
    pub mask: u32,
    pub crc_reg: u32,
    pub idcode_checked: bool,
    pub shutdown: bool,
    pub glutmask_enabled: bool,
    pub capture_pending: bool,
    pub readback_queue: VecDeque<u32>,
}

/// System-level clock control feeding the fabric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockControl {
    pub slcr_locked: bool,
    /// Clock running when true.
    pub throttle_enabled: bool,
    pub unlock_key: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlcrRegister {
    Unlock,
    Throttle,
}

/// Design logic resident in the fabric. Ticks operate on the user planes
/// through [`FabricIo`].
pub trait ResidentLogic: Send + Sync {
    fn slot_id(&self) -> &str;
    fn kind_name(&self) -> String;
    /// Cells this design owns.
    fn cells(&self) -> Vec<usize>;
    fn tick(&mut self, io: &mut FabricIo<'_>);
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// Live view of the fabric handed to resident logic on each tick.
pub struct FabricIo<'a> {
    cells: &'a [LogicLocationEntry],
    config_mem: &'a mut BTreeMap<FrameAddress, Frame>,
    user: &'a mut [u32],
    inputs: &'a BTreeMap<String, bool>,
    log: &'a mut Vec<Effect>,
}

impl FabricIo<'_> {
    pub fn ff(&self, cell: usize) -> bool {
        self.user[cell] & 1 == 1
    }

    pub fn set_ff(&mut self, cell: usize, value: bool) {
        self.user[cell] = u32::from(value);
    }

    pub fn word(&self, cell: usize) -> u32 {
        self.user[cell]
    }

    /// DSP registers live in the user plane only, like flip-flops.
    pub fn set_register_word(&mut self, cell: usize, value: u32) {
        self.user[cell] = value;
    }

    /// Block RAM writes land in the user plane and the BRAM content frame.
    pub fn write_bram(&mut self, cell: usize, value: u32) {
        self.user[cell] = value;
        let e = &self.cells[cell];
        self.config_mem
            .entry(e.far)
            .or_default()
            .set_word(e.frame_word_offset, value);
        self.log.push(Effect::BramWrite { cell, value });
    }

    /// Configuration bit backing a cell (used for LUT contents).
    pub fn config_bit(&self, cell: usize) -> bool {
        let e = &self.cells[cell];
        self.config_mem
            .get(&e.far)
            .is_some_and(|f| f.bit(e.frame_word_offset, e.bit_offset))
    }

    pub fn input(&self, slot: &str) -> bool {
        self.inputs.get(slot).copied().unwrap_or(false)
    }

    pub fn log(&mut self, effect: Effect) {
        self.log.push(effect);
    }
}

#[derive(Debug, Clone)]
enum PortState {
    Unsynced,
    Idle,
    Payload {
        register: Register,
        remaining: usize,
        buf: Vec<u32>,
    },
}

#[derive(Debug, Clone, Copy)]
struct ArmedReadback {
    far: u32,
    words: usize,
}

/// Simulated configuration fabric: configuration memory, the configuration
/// port state machine, user-visible storage and clock control.
///
/// Single owner; callers serialise access.
pub struct DeviceModel {
    geometry: DeviceGeometry,
    cells: Vec<LogicLocationEntry>,
    config: ConfigState,
    clock: ClockControl,
    config_mem: BTreeMap<FrameAddress, Frame>,
    user: Vec<u32>,
    logic: Vec<Box<dyn ResidentLogic>>,
    inputs: BTreeMap<String, bool>,
    log: Vec<Effect>,
    cycle: u64,
    gsr_pulsed: bool,
    port: PortState,
    last_type1: Option<Register>,
    pending: Vec<(FrameAddress, Frame)>,
    armed: Option<ArmedReadback>,
    checksum: Option<FrameChecksum>,
    port_clock_hz: f64,
    port_time_us: f64,
    last_readback_end_us: Option<f64>,
}

impl std::fmt::Debug for DeviceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeviceModel")
            .field("idcode", &format_args!("{:#010x}", self.geometry.idcode))
            .field("cells", &self.cells.len())
            .field("config", &self.config)
            .field("clock", &self.clock)
            .field("cycle", &self.cycle)
            .finish_non_exhaustive()
    }
}

impl DeviceModel {
    pub fn new(
        geometry: DeviceGeometry,
        cell_map: Vec<LogicLocationEntry>,
    ) -> Result<Self, FabricError> {
        geometry.validate()?;
        validate_cells(&geometry, &cell_map)?;
        let clock = ClockControl {
            slcr_locked: true,
            throttle_enabled: false,
            unlock_key: geometry.slcr_unlock_key,
        };
        let user = vec![0; cell_map.len()];
        Ok(DeviceModel {
            geometry,
            cells: cell_map,
            config: ConfigState::default(),
            clock,
            config_mem: BTreeMap::new(),
            user,
            logic: Vec::new(),
            inputs: BTreeMap::new(),
            log: Vec::new(),
            cycle: 0,
            gsr_pulsed: false,
            port: PortState::Unsynced,
            last_type1: None,
            pending: Vec::new(),
            armed: None,
            checksum: None,
            port_clock_hz: DEFAULT_PORT_CLOCK_HZ,
            port_time_us: 0.0,
            last_readback_end_us: None,
        })
    }

    /// The bundled demo device with its two-slot cell map.
    pub fn demo() -> Self {
        let cells = crate::bitcodec::parse_logic_location(super::DEMO_CELLMAP)
            .expect("bundled cell map parses");
        DeviceModel::new(DeviceGeometry::demo(), cells).expect("bundled demo device is valid")
    }

    pub fn geometry(&self) -> &DeviceGeometry {
        &self.geometry
    }

    pub fn idcode(&self) -> u32 {
        self.geometry.idcode
    }

    pub fn cells(&self) -> &[LogicLocationEntry] {
        &self.cells
    }

    pub fn config_state(&self) -> &ConfigState {
        &self.config
    }

    pub fn clock(&self) -> &ClockControl {
        &self.clock
    }

    pub fn clock_running(&self) -> bool {
        self.clock.throttle_enabled
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn gsr_pulsed(&self) -> bool {
        self.gsr_pulsed
    }

    /// Everything logged since construction.
    pub fn effects(&self) -> &[Effect] {
        &self.log
    }

    pub fn port_time_us(&self) -> f64 {
        self.port_time_us
    }

    pub fn port_clock_hz(&self) -> f64 {
        self.port_clock_hz
    }

    pub fn set_port_clock_hz(&mut self, hz: f64) {
        assert!(hz > 0.0, "port clock must be positive");
        self.port_clock_hz = hz;
    }

    /// Installs a per-frame checksum used when frames arrive without an
    /// RCRC bypass. Without one, such frames are rejected.
    pub fn set_frame_checksum(&mut self, hook: Option<FrameChecksum>) {
        self.checksum = hook;
    }

    /// Distinct slot ids in cell-map order.
    pub fn slots(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.cells
            .iter()
            .filter(|c| seen.insert(c.slot_id.as_str()))
            .map(|c| c.slot_id.clone())
            .collect()
    }

    pub fn slot_cells(&self, slot: &str) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.slot_id == slot)
            .map(|(i, _)| i)
            .collect()
    }

    /// Frames holding any of the slot's cells, in canonical order.
    pub fn slot_frames(&self, slot: &str) -> Vec<FrameAddress> {
        self.cells
            .iter()
            .filter(|c| c.slot_id == slot)
            .map(|c| c.far)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Frames that have ever been written; absent frames read as zero.
    pub fn config_memory(&self) -> &BTreeMap<FrameAddress, Frame> {
        &self.config_mem
    }

    pub fn config_frame(&self, far: &FrameAddress) -> Frame {
        self.config_mem.get(far).cloned().unwrap_or_default()
    }

    /// Current user-plane value of a cell: 0/1 for flip-flops, the word for
    /// BRAM and DSP cells, the configuration bit for LUT cells.
    pub fn user_value(&self, cell: usize) -> u32 {
        let e = &self.cells[cell];
        match e.element_kind {
            ElementKind::LutRam => u32::from(
                self.config_mem
                    .get(&e.far)
                    .is_some_and(|f| f.bit(e.frame_word_offset, e.bit_offset)),
            ),
            _ => self.user[cell],
        }
    }

    /// Value a cell holds in configuration memory.
    pub fn config_value(&self, cell: usize) -> u32 {
        let e = &self.cells[cell];
        let frame = self.config_mem.get(&e.far);
        if e.element_kind.is_word_cell() {
            frame.map_or(0, |f| f.word(e.frame_word_offset))
        } else {
            u32::from(frame.is_some_and(|f| f.bit(e.frame_word_offset, e.bit_offset)))
        }
    }

    /// Sets a cell in both planes, as a full-device bitstream load would.
    pub fn preload_cell(&mut self, cell: usize, value: u32) {
        let e = self.cells[cell].clone();
        let frame = self.config_mem.entry(e.far).or_default();
        if e.element_kind.is_word_cell() {
            frame.set_word(e.frame_word_offset, value);
            self.user[cell] = value;
        } else {
            frame.set_bit(e.frame_word_offset, e.bit_offset, value & 1 == 1);
            if e.element_kind != ElementKind::LutRam {
                self.user[cell] = value & 1;
            }
        }
    }

    pub fn set_input(&mut self, slot: &str, asserted: bool) {
        self.inputs.insert(slot.to_string(), asserted);
    }

    pub fn input(&self, slot: &str) -> bool {
        self.inputs.get(slot).copied().unwrap_or(false)
    }

    /// Attaches design logic. Fails with the first cell already owned by
    /// another design.
    pub fn attach_logic(&mut self, logic: Box<dyn ResidentLogic>) -> Result<(), usize> {
        let owned: HashSet<usize> = self.logic.iter().flat_map(|l| l.cells()).collect();
        if let Some(c) = logic.cells().into_iter().find(|c| owned.contains(c)) {
            return Err(c);
        }
        self.log.push(Effect::TenantLoaded {
            slot: logic.slot_id().to_string(),
            kind: logic.kind_name(),
        });
        self.logic.push(logic);
        Ok(())
    }

    pub fn logic(&self) -> impl Iterator<Item = &dyn ResidentLogic> {
        self.logic.iter().map(|l| l.as_ref())
    }

    pub fn logic_mut(&mut self) -> impl Iterator<Item = &mut Box<dyn ResidentLogic>> {
        self.logic.iter_mut()
    }

    pub fn slcr_write(&mut self, register: SlcrRegister, value: u32) -> Effect {
        let effect = match register {
            SlcrRegister::Unlock => {
                if value == self.clock.unlock_key {
                    self.clock.slcr_locked = false;
                    Effect::SlcrUnlocked
                } else {
                    Effect::SlcrUnlockRejected
                }
            }
            SlcrRegister::Throttle => {
                if self.clock.slcr_locked {
                    Effect::ThrottleIgnored
                } else {
                    self.clock.throttle_enabled = value != 0;
                    if value != 0 {
                        Effect::ClockStarted
                    } else {
                        Effect::ClockStopped
                    }
                }
            }
        };
        self.log.push(effect.clone());
        effect
    }

    /// Global set/reset: loads every flip-flop, DSP and BRAM cell from
    /// configuration memory. Clock state is untouched.
    pub fn gsr_pulse(&mut self) -> usize {
        let mut loaded = 0;
        for (i, e) in self.cells.iter().enumerate() {
            if e.element_kind == ElementKind::LutRam {
                continue;
            }
            let frame = self.config_mem.get(&e.far);
            self.user[i] = if e.element_kind.is_word_cell() {
                frame.map_or(0, |f| f.word(e.frame_word_offset))
            } else {
                u32::from(frame.is_some_and(|f| f.bit(e.frame_word_offset, e.bit_offset)))
            };
            loaded += 1;
        }
        self.gsr_pulsed = true;
        self.log.push(Effect::GsrPulse { cells: loaded });
        loaded
    }

    fn capture(&mut self) {
        let mut captured = 0;
        for (i, e) in self.cells.iter().enumerate() {
            match e.element_kind {
                ElementKind::Ff => {
                    self.config_mem.entry(e.far).or_default().set_bit(
                        e.frame_word_offset,
                        e.bit_offset,
                        self.user[i] & 1 == 1,
                    );
                }
                ElementKind::Dsp => {
                    self.config_mem
                        .entry(e.far)
                        .or_default()
                        .set_word(e.frame_word_offset, self.user[i]);
                }
                ElementKind::LutRam | ElementKind::Bram => continue,
            }
            captured += 1;
        }
        self.config.capture_pending = true;
        self.log.push(Effect::Captured { cells: captured });
    }

    /// Advances resident logic by `cycles` clock edges when the clock runs
    /// and the fabric is not shut down.
    pub fn step_clock(&mut self, cycles: u64) {
        if cycles == 0 {
            return;
        }
        if !self.clock.throttle_enabled {
            self.log.push(Effect::TickBlocked {
                cycles,
                reason: "clock-stopped",
            });
            return;
        }
        if self.config.shutdown {
            self.log.push(Effect::TickBlocked {
                cycles,
                reason: "shutdown",
            });
            return;
        }
        self.log.push(Effect::Tick { cycles });
        let mut logic = std::mem::take(&mut self.logic);
        for _ in 0..cycles {
            let mut io = FabricIo {
                cells: &self.cells,
                config_mem: &mut self.config_mem,
                user: &mut self.user,
                inputs: &self.inputs,
                log: &mut self.log,
            };
            for l in logic.iter_mut() {
                l.tick(&mut io);
            }
        }
        self.logic = logic;
        self.cycle += cycles;
    }

    /// Host-side delay on the configuration port.
    pub fn idle_port(&mut self, us: f64) {
        if us > 0.0 {
            self.port_time_us += us;
            self.log.push(Effect::PortIdle { us });
        }
    }

    fn word_time_us(&self) -> f64 {
        1e6 / self.port_clock_hz
    }

    /// Feeds words into the configuration port. Returns the effects this
    /// call produced. On error the port drops out of sync and staged frames
    /// are discarded.
    pub fn pcap_write(&mut self, words: &[u32]) -> Result<Vec<Effect>, FabricError> {
        let start = self.log.len();
        for &w in words {
            self.port_time_us += self.word_time_us();
            if let Err(e) = self.feed(w) {
                self.abort();
                return Err(e);
            }
        }
        Ok(self.log[start..].to_vec())
    }

    fn abort(&mut self) {
        self.port = PortState::Unsynced;
        self.config.synced = false;
        self.pending.clear();
        self.armed = None;
        self.last_type1 = None;
        self.log.push(Effect::Aborted);
    }

    fn feed(&mut self, word: u32) -> Result<(), FabricError> {
        match &mut self.port {
            PortState::Unsynced => {
                if word == SYNC_WORD {
                    self.port = PortState::Idle;
                    self.config.synced = true;
                    self.config.idcode_checked = false;
                    self.last_type1 = None;
                    self.log.push(Effect::Synced);
                }
                Ok(())
            }
            PortState::Payload {
                register,
                remaining,
                buf,
            } => {
                buf.push(word);
                *remaining -= 1;
                if *remaining == 0 {
                    let register = *register;
                    let buf = std::mem::take(buf);
                    self.port = PortState::Idle;
                    self.execute_write(register, buf)?;
                }
                Ok(())
            }
            PortState::Idle => {
                let header = decode_header(word).ok_or(FabricError::BadHeader(word))?;
                match header {
                    Header::Special(PacketKind::SyncWord) | Header::Noop | Header::Special(_) => {
                        Ok(())
                    }
                    Header::Type1 {
                        opcode,
                        register,
                        count,
                    } => {
                        self.last_type1 = Some(register);
                        self.start_packet(opcode, register, count as usize)
                    }
                    Header::Type2 { opcode, count } => {
                        let register = self.last_type1.ok_or(FabricError::OrphanType2)?;
                        self.last_type1 = None;
                        self.start_packet(opcode, register, count as usize)
                    }
                }
            }
        }
    }

    fn start_packet(
        &mut self,
        opcode: Opcode,
        register: Register,
        count: usize,
    ) -> Result<(), FabricError> {
        match opcode {
            Opcode::Nop => Ok(()),
            Opcode::Write => {
                if count > 0 {
                    self.port = PortState::Payload {
                        register,
                        remaining: count,
                        buf: Vec::with_capacity(count),
                    };
                }
                Ok(())
            }
            Opcode::Read => {
                self.start_read(register, count);
                Ok(())
            }
        }
    }

    fn start_read(&mut self, register: Register, count: usize) {
        let value = match register {
            Register::Fdro => {
                if count == 0 || self.config.cmd_reg != Command::Rcfg.code() {
                    return;
                }
                match &mut self.armed {
                    // A type-2 header refines the count of the type-1 read.
                    Some(armed) if armed.far == self.config.far_reg => armed.words = count,
                    _ => {
                        if let Some(end) = self.last_readback_end_us {
                            let gap = self.port_time_us - end;
                            if gap < self.geometry.min_readback_gap_us {
                                self.log.push(Effect::FabricFreeze { gap_us: gap });
                            }
                        }
                        self.armed = Some(ArmedReadback {
                            far: self.config.far_reg,
                            words: count,
                        });
                    }
                }
                self.log.push(Effect::ReadbackArmed {
                    far: self.config.far_reg,
                    words: count as u32,
                });
                return;
            }
            Register::Idcode => self.geometry.idcode,
            Register::Far => self.config.far_reg,
            Register::Cmd => self.config.cmd_reg,
            Register::Ctl0 => self.config.ctl0,
            Register::Mask => self.config.mask,
            Register::Fdri | Register::Unknown(_) => 0,
        };
        for _ in 0..count.max(1) {
            self.config.readback_queue.push_back(value);
        }
        self.log.push(Effect::RegisterQueued { register, value });
    }

    fn execute_write(&mut self, register: Register, payload: Vec<u32>) -> Result<(), FabricError> {
        match register {
            Register::Cmd => {
                for w in payload {
                    self.run_command(Command::from_code(w))?;
                }
            }
            Register::Far => {
                let w = *payload.last().expect("non-empty payload");
                self.config.far_reg = w;
                self.log.push(Effect::FarSet(w));
            }
            Register::Mask => {
                let w = *payload.last().expect("non-empty payload");
                self.config.mask = w;
                self.log.push(Effect::MaskSet(w));
            }
            Register::Ctl0 => {
                let w = *payload.last().expect("non-empty payload");
                self.config.ctl0 = (self.config.ctl0 & !self.config.mask) | (w & self.config.mask);
                self.log.push(Effect::Ctl0Set(self.config.ctl0));
                let enabled = self.config.ctl0 & GLUTMASK_BIT != 0;
                if enabled != self.config.glutmask_enabled {
                    self.config.glutmask_enabled = enabled;
                    self.log.push(Effect::GlutMask(enabled));
                }
            }
            Register::Idcode => {
                let found = *payload.last().expect("non-empty payload");
                if found != self.geometry.idcode {
                    return Err(FabricError::IdcodeMismatch {
                        expected: self.geometry.idcode,
                        found,
                    });
                }
                self.config.idcode_checked = true;
                self.log.push(Effect::IdcodeVerified(found));
            }
            Register::Fdri => self.stage_frames(payload)?,
            Register::Fdro | Register::Unknown(_) => {
                for value in payload {
                    self.log.push(Effect::RegisterIgnored { register, value });
                }
            }
        }
        Ok(())
    }

    fn run_command(&mut self, cmd: Command) -> Result<(), FabricError> {
        self.config.cmd_reg = cmd.code();
        self.log.push(Effect::Command(cmd));
        match cmd {
            Command::Shutdown => self.config.shutdown = true,
            Command::Start => self.config.shutdown = false,
            Command::Rcrc => {
                self.config.crc_reg = CRC_RESET_VALUE;
                self.log.push(Effect::CrcReset);
                self.commit_pending();
            }
            Command::Gcapture => self.capture(),
            Command::Grestore => {
                self.gsr_pulse();
            }
            Command::Desync => {
                if !self.pending.is_empty() {
                    let ok = self.checksum.as_ref().is_some_and(|hook| {
                        self.pending
                            .iter()
                            .all(|(_, f)| f.word(CRC_WORD) == hook(f))
                    });
                    if !ok {
                        let far = self.pending[0].0.word();
                        return Err(FabricError::CrcMismatch { far });
                    }
                    self.commit_pending();
                }
                self.port = PortState::Unsynced;
                self.config.synced = false;
                self.armed = None;
                self.last_type1 = None;
                self.log.push(Effect::Desynced);
            }
            Command::Null | Command::Wcfg | Command::Rcfg | Command::Other(_) => {}
        }
        Ok(())
    }

    fn stage_frames(&mut self, payload: Vec<u32>) -> Result<(), FabricError> {
        if self.config.cmd_reg != Command::Wcfg.code() {
            return Err(FabricError::WriteWhileNotWcfg);
        }
        if !payload.len().is_multiple_of(FRAME_WORDS) {
            return Err(FabricError::FdriLengthNotFrameMultiple(payload.len()));
        }
        let n = payload.len() / FRAME_WORDS;
        if n < 2 || payload[(n - 1) * FRAME_WORDS..].iter().any(|&w| w != 0) {
            return Err(FabricError::MissingPaddingFrame);
        }
        let start = FrameAddress::decode(self.config.far_reg)?;
        let mut far = start;
        let mut staged = Vec::with_capacity(n - 1);
        for (i, chunk) in payload.chunks_exact(FRAME_WORDS).take(n - 1).enumerate() {
            if i > 0 {
                far = self
                    .geometry
                    .successor(&far)
                    .ok_or(FabricError::FarOutsideGeometry(far.word()))?;
            }
            if !self.geometry.contains(&far) {
                return Err(FabricError::FarOutsideGeometry(far.word()));
            }
            staged.push((far, Frame::from_words(chunk).expect("exact chunk")));
        }
        self.config.far_reg = self.geometry.successor(&far).unwrap_or(far).word();
        self.log.push(Effect::FramesStaged {
            far: start,
            count: staged.len(),
        });
        self.pending.extend(staged);
        Ok(())
    }

    fn commit_pending(&mut self) {
        for (far, frame) in std::mem::take(&mut self.pending) {
            let flagged = far.is_bram()
                && BRAM_READBACK_FLAG_WORDS
                    .iter()
                    .any(|&w| frame.bit(w, BRAM_READBACK_FLAG_BIT));
            if flagged {
                self.log.push(Effect::FrameReverted(far));
            } else {
                self.config_mem.insert(far, frame);
                self.log.push(Effect::FrameWritten(far));
            }
        }
    }

    fn readback_frame(&self, far: &FrameAddress) -> Frame {
        let mut frame = self.config_frame(far);
        let lut_frame = far.block_type == BlockType::Clb
            && self.geometry.column_kind(far.column) == Some(ColumnKind::Clb)
            && is_lut_minor(far.minor);
        if lut_frame && !self.config.glutmask_enabled {
            frame = Frame::zeroed();
        }
        if far.is_bram() {
            for &w in &BRAM_READBACK_FLAG_WORDS {
                frame.set_bit(w, BRAM_READBACK_FLAG_BIT, true);
            }
        }
        frame
    }

    /// Reads `n` words from the port: a padding frame followed by the
    /// armed frames, or queued register values.
    pub fn pcap_read(&mut self, n: usize) -> Result<Vec<u32>, FabricError> {
        if !self.config.synced {
            return Err(FabricError::NotSynced);
        }
        let Some(armed) = self.armed else {
            if self.config.readback_queue.is_empty() {
                return Err(FabricError::ReadbackNotArmed);
            }
            let queued = self.config.readback_queue.len();
            if n != queued {
                return Err(FabricError::CountMismatch {
                    armed: queued,
                    requested: n,
                });
            }
            self.port_time_us += n as f64 * self.word_time_us();
            return Ok(self.config.readback_queue.drain(..).collect());
        };
        if n != armed.words || armed.words % FRAME_WORDS != 0 || armed.words < 2 * FRAME_WORDS {
            return Err(FabricError::CountMismatch {
                armed: armed.words,
                requested: n,
            });
        }
        let start = FrameAddress::decode(armed.far)?;
        let frames = armed.words / FRAME_WORDS - 1;
        let mut out = vec![0u32; FRAME_WORDS];
        out.reserve(frames * FRAME_WORDS);
        let mut far = start;
        for i in 0..frames {
            if i > 0 {
                far = self
                    .geometry
                    .successor(&far)
                    .ok_or(FabricError::FarOutsideGeometry(far.word()))?;
            }
            if !self.geometry.contains(&far) {
                return Err(FabricError::FarOutsideGeometry(far.word()));
            }
            out.extend_from_slice(self.readback_frame(&far).words());
        }
        self.armed = None;
        self.config.capture_pending = false;
        self.config.far_reg = self.geometry.successor(&far).unwrap_or(far).word();
        self.port_time_us += out.len() as f64 * self.word_time_us();
        self.last_readback_end_us = Some(self.port_time_us);
        self.log.push(Effect::ReadbackServed {
            far: start,
            words: out.len(),
        });
        Ok(out)
    }
}

fn validate_cells(
    geometry: &DeviceGeometry,
    cells: &[LogicLocationEntry],
) -> Result<(), FabricError> {
    let mut bits = HashSet::new();
    let mut names = HashSet::new();
    for e in cells {
        if !geometry.contains(&e.far) {
            return Err(FabricError::CellOutsideGeometry {
                seq: e.seq,
                net: e.design_path.clone(),
                far: e.far.word(),
            });
        }
        let placement = |reason: &str| FabricError::CellPlacement {
            seq: e.seq,
            net: e.design_path.clone(),
            reason: reason.to_string(),
        };
        if e.frame_word_offset == CRC_WORD {
            return Err(placement("word 50 is the frame CRC slot"));
        }
        let column = geometry.column_kind(e.far.column);
        let clb_block = e.far.block_type == BlockType::Clb;
        match e.element_kind {
            ElementKind::Ff => {
                if !(clb_block && column == Some(ColumnKind::Clb) && is_ff_minor(e.far.minor)) {
                    return Err(placement("flip-flops live in CLB minors 30-31"));
                }
            }
            ElementKind::LutRam => {
                if !(clb_block && column == Some(ColumnKind::Clb) && is_lut_minor(e.far.minor)) {
                    return Err(placement("LUT bits live in CLB minors 26-29 or 32-35"));
                }
            }
            ElementKind::Bram => {
                if !e.far.is_bram() {
                    return Err(placement("BRAM cells need a BRAM block-type address"));
                }
                if BRAM_READBACK_FLAG_WORDS.contains(&e.frame_word_offset) {
                    return Err(placement("word carries readback flag bits"));
                }
            }
            ElementKind::Dsp => {
                if !(clb_block && column == Some(ColumnKind::Dsp)) {
                    return Err(placement("DSP cells need a DSP column"));
                }
            }
        }
        if e.element_kind.is_word_cell() {
            if e.bit_offset != 0 {
                return Err(placement("word cells start at bit 0"));
            }
            for b in 0..32u8 {
                if !bits.insert((e.far, e.frame_word_offset, b)) {
                    return Err(placement("overlaps another cell"));
                }
            }
        } else if !bits.insert((e.far, e.frame_word_offset, e.bit_offset)) {
            return Err(placement("overlaps another cell"));
        }
        if !names.insert((e.slot_id.as_str(), e.design_path.as_str())) {
            return Err(placement("duplicate net name within slot"));
        }
    }
    Ok(())
}
