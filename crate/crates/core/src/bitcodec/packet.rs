//! Configuration packets.
//!
//! Header layout:
//!
//! ```text
//! Type 1:  31..29 = 001 | 28..27 opcode | 26..13 register | 12..11 reserved | 10..0 count
//! Type 2:  31..29 = 010 | 28..27 opcode | 26..0 count
//! ```
//!
//! A Type-2 header carries no register; it extends the Type-1 packet
//! immediately before it. Write packets carry `count` payload words in the
//! stream; read packets carry none (the count is what the port returns).

use std::fmt;

use thiserror::Error;

pub const DUMMY_WORD: u32 = 0xFFFF_FFFF;
pub const SYNC_WORD: u32 = 0xAA99_5566;
pub const BUS_WIDTH_SYNC: u32 = 0x0000_00BB;
pub const BUS_WIDTH_DETECT: u32 = 0x1122_0044;
pub const NOOP_WORD: u32 = 0x2000_0000;

pub const TYPE1_MAX_COUNT: u32 = (1 << 11) - 1;
pub const TYPE2_MAX_COUNT: u32 = (1 << 27) - 1;
const REGISTER_MASK: u32 = (1 << 14) - 1;
const TYPE1_RESERVED: u32 = 0b11 << 11;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("packet at word {offset} needs {needed} payload words, only {available} remain")]
    TruncatedPayload {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("type-2 packet at word {offset} does not follow a type-1 packet")]
    OrphanType2 { offset: usize },
    #[error("unrecognised header {word:#010x} at word {offset}")]
    UnknownHeader { offset: usize, word: u32 },
    #[error("packet declares {declared} words but carries {actual}")]
    PayloadCountMismatch { declared: u32, actual: usize },
    #[error("word count {count} exceeds the {max} limit of the header field")]
    CountOverflow { count: u64, max: u32 },
    #[error("malformed packet: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Type1,
    Type2,
    Noop,
    Dummy,
    SyncWord,
    BusWidthSync,
    BusWidthDetect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    Nop = 0,
    Read = 1,
    Write = 2,
}

impl Opcode {
    fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            0 => Some(Opcode::Nop),
            1 => Some(Opcode::Read),
            2 => Some(Opcode::Write),
            _ => None,
        }
    }
}

/// Configuration register addressed by a Type-1 header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Register {
    Far,
    Fdri,
    Fdro,
    Cmd,
    Ctl0,
    Mask,
    Idcode,
    /// Any other address; never holds the id of a named register.
    Unknown(u16),
}

impl Register {
    pub fn id(self) -> u16 {
        match self {
            Register::Far => 0x01,
            Register::Fdri => 0x02,
            Register::Fdro => 0x03,
            Register::Cmd => 0x04,
            Register::Ctl0 => 0x05,
            Register::Mask => 0x06,
            Register::Idcode => 0x0C,
            Register::Unknown(id) => id,
        }
    }

    pub fn from_id(id: u16) -> Self {
        match id {
            0x01 => Register::Far,
            0x02 => Register::Fdri,
            0x03 => Register::Fdro,
            0x04 => Register::Cmd,
            0x05 => Register::Ctl0,
            0x06 => Register::Mask,
            0x0C => Register::Idcode,
            other => Register::Unknown(other),
        }
    }

    fn is_canonical(self) -> bool {
        Register::from_id(self.id()) == self && u32::from(self.id()) <= REGISTER_MASK
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Register::Far => f.write_str("FAR"),
            Register::Fdri => f.write_str("FDRI"),
            Register::Fdro => f.write_str("FDRO"),
            Register::Cmd => f.write_str("CMD"),
            Register::Ctl0 => f.write_str("CTL0"),
            Register::Mask => f.write_str("MASK"),
            Register::Idcode => f.write_str("IDCODE"),
            Register::Unknown(id) => write!(f, "REG{id:#x}"),
        }
    }
}

/// Values written to the CMD register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Null,
    Wcfg,
    Rcfg,
    Start,
    Rcrc,
    Grestore,
    Shutdown,
    Gcapture,
    Desync,
    Other(u32),
}

impl Command {
    pub fn code(self) -> u32 {
        match self {
            Command::Null => 0x00,
            Command::Wcfg => 0x01,
            Command::Rcfg => 0x04,
            Command::Start => 0x05,
            Command::Rcrc => 0x07,
            Command::Grestore => 0x0A,
            Command::Shutdown => 0x0B,
            Command::Gcapture => 0x0C,
            Command::Desync => 0x0D,
            Command::Other(c) => c,
        }
    }

    pub fn from_code(code: u32) -> Self {
        match code {
            0x00 => Command::Null,
            0x01 => Command::Wcfg,
            0x04 => Command::Rcfg,
            0x05 => Command::Start,
            0x07 => Command::Rcrc,
            0x0A => Command::Grestore,
            0x0B => Command::Shutdown,
            0x0C => Command::Gcapture,
            0x0D => Command::Desync,
            other => Command::Other(other),
        }
    }

    pub fn name(self) -> String {
        match self {
            Command::Null => "NULL".into(),
            Command::Wcfg => "WCFG".into(),
            Command::Rcfg => "RCFG".into(),
            Command::Start => "START".into(),
            Command::Rcrc => "RCRC".into(),
            Command::Grestore => "GRESTORE".into(),
            Command::Shutdown => "SHUTDOWN".into(),
            Command::Gcapture => "GCAPTURE".into(),
            Command::Desync => "DESYNC".into(),
            Command::Other(c) => format!("CMD{c:#x}"),
        }
    }
}

/// One decoded header word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Header {
    Special(PacketKind),
    Noop,
    Type1 {
        opcode: Opcode,
        register: Register,
        count: u32,
    },
    Type2 {
        opcode: Opcode,
        count: u32,
    },
}

impl Header {
    /// Number of payload words following this header in a write stream.
    pub fn payload_len(&self) -> u32 {
        match *self {
            Header::Type1 {
                opcode: Opcode::Write,
                count,
                ..
            }
            | Header::Type2 {
                opcode: Opcode::Write,
                count,
            } => count,
            _ => 0,
        }
    }
}

pub fn decode_header(word: u32) -> Option<Header> {
    match word {
        DUMMY_WORD => return Some(Header::Special(PacketKind::Dummy)),
        SYNC_WORD => return Some(Header::Special(PacketKind::SyncWord)),
        BUS_WIDTH_SYNC => return Some(Header::Special(PacketKind::BusWidthSync)),
        BUS_WIDTH_DETECT => return Some(Header::Special(PacketKind::BusWidthDetect)),
        NOOP_WORD => return Some(Header::Noop),
        _ => {}
    }
    let opcode = Opcode::from_bits(word >> 27 & 0b11)?;
    match word >> 29 {
        0b001 => {
            if word & TYPE1_RESERVED != 0 {
                return None;
            }
            Some(Header::Type1 {
                opcode,
                register: Register::from_id((word >> 13 & REGISTER_MASK) as u16),
                count: word & TYPE1_MAX_COUNT,
            })
        }
        0b010 => Some(Header::Type2 {
            opcode,
            count: word & TYPE2_MAX_COUNT,
        }),
        _ => None,
    }
}

pub fn type1_header(opcode: Opcode, register: Register, count: u32) -> Result<u32, PacketError> {
    if count > TYPE1_MAX_COUNT {
        return Err(PacketError::CountOverflow {
            count: count.into(),
            max: TYPE1_MAX_COUNT,
        });
    }
    if !register.is_canonical() {
        return Err(PacketError::Malformed(format!(
            "register {register:?} is not a canonical address"
        )));
    }
    Ok(0b001 << 29 | (opcode as u32) << 27 | u32::from(register.id()) << 13 | count)
}

pub fn type2_header(opcode: Opcode, count: u64) -> Result<u32, PacketError> {
    if count > u64::from(TYPE2_MAX_COUNT) {
        return Err(PacketError::CountOverflow {
            count,
            max: TYPE2_MAX_COUNT,
        });
    }
    Ok(0b010 << 29 | (opcode as u32) << 27 | count as u32)
}

/// A decoded configuration packet.
///
/// Non-header kinds (`Noop`, `Dummy`, sync words) carry `Opcode::Nop`,
/// `Register::Unknown(0)` and an empty payload. A Type-2 packet reports the
/// register of the Type-1 packet it extends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigPacket {
    pub kind: PacketKind,
    pub opcode: Opcode,
    pub register: Register,
    pub word_count: u32,
    pub payload: Vec<u32>,
}

impl ConfigPacket {
    fn bare(kind: PacketKind) -> Self {
        ConfigPacket {
            kind,
            opcode: Opcode::Nop,
            register: Register::Unknown(0),
            word_count: 0,
            payload: Vec::new(),
        }
    }

    pub fn noop() -> Self {
        Self::bare(PacketKind::Noop)
    }

    pub fn dummy() -> Self {
        Self::bare(PacketKind::Dummy)
    }

    pub fn sync() -> Self {
        Self::bare(PacketKind::SyncWord)
    }

    pub fn bus_width_sync() -> Self {
        Self::bare(PacketKind::BusWidthSync)
    }

    pub fn bus_width_detect() -> Self {
        Self::bare(PacketKind::BusWidthDetect)
    }

    pub fn type1_write(register: Register, payload: Vec<u32>) -> Self {
        ConfigPacket {
            kind: PacketKind::Type1,
            opcode: Opcode::Write,
            register,
            word_count: payload.len() as u32,
            payload,
        }
    }

    pub fn type1_read(register: Register, count: u32) -> Self {
        ConfigPacket {
            kind: PacketKind::Type1,
            opcode: Opcode::Read,
            register,
            word_count: count,
            payload: Vec::new(),
        }
    }

    pub fn type2_write(register: Register, payload: Vec<u32>) -> Self {
        ConfigPacket {
            kind: PacketKind::Type2,
            opcode: Opcode::Write,
            register,
            word_count: payload.len() as u32,
            payload,
        }
    }

    pub fn type2_read(register: Register, count: u32) -> Self {
        ConfigPacket {
            kind: PacketKind::Type2,
            opcode: Opcode::Read,
            register,
            word_count: count,
            payload: Vec::new(),
        }
    }

    pub fn command(cmd: Command) -> Self {
        Self::type1_write(Register::Cmd, vec![cmd.code()])
    }

    fn expected_payload(&self) -> usize {
        if self.opcode == Opcode::Write {
            self.word_count as usize
        } else {
            0
        }
    }
}

pub fn packet_decode(words: &[u32]) -> Result<Vec<ConfigPacket>, PacketError> {
    let mut out: Vec<ConfigPacket> = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let offset = i;
        let word = words[i];
        i += 1;
        let header = decode_header(word).ok_or(PacketError::UnknownHeader { offset, word })?;
        let mut packet = match header {
            Header::Special(kind) => ConfigPacket::bare(kind),
            Header::Noop => ConfigPacket::noop(),
            Header::Type1 {
                opcode,
                register,
                count,
            } => ConfigPacket {
                kind: PacketKind::Type1,
                opcode,
                register,
                word_count: count,
                payload: Vec::new(),
            },
            Header::Type2 { opcode, count } => {
                let register = match out.last() {
                    Some(prev) if prev.kind == PacketKind::Type1 => prev.register,
                    _ => return Err(PacketError::OrphanType2 { offset }),
                };
                ConfigPacket {
                    kind: PacketKind::Type2,
                    opcode,
                    register,
                    word_count: count,
                    payload: Vec::new(),
                }
            }
        };
        let needed = header.payload_len() as usize;
        let available = words.len() - i;
        if needed > available {
            return Err(PacketError::TruncatedPayload {
                offset,
                needed,
                available,
            });
        }
        packet.payload.extend_from_slice(&words[i..i + needed]);
        i += needed;
        out.push(packet);
    }
    Ok(out)
}

pub fn packet_encode(packets: &[ConfigPacket]) -> Result<Vec<u32>, PacketError> {
    let mut out = Vec::new();
    let mut prev: Option<&ConfigPacket> = None;
    for p in packets {
        if p.payload.len() != p.expected_payload() {
            return Err(PacketError::PayloadCountMismatch {
                declared: p.word_count,
                actual: p.payload.len(),
            });
        }
        match p.kind {
            PacketKind::Type1 => {
                if p.opcode == Opcode::Nop && p.register.id() == 0 && p.word_count == 0 {
                    return Err(PacketError::Malformed(
                        "type-1 NOP with no register or count must be written as Noop".into(),
                    ));
                }
                out.push(type1_header(p.opcode, p.register, p.word_count)?);
            }
            PacketKind::Type2 => {
                match prev {
                    Some(q) if q.kind == PacketKind::Type1 && q.register == p.register => {}
                    _ => return Err(PacketError::OrphanType2 { offset: out.len() }),
                }
                out.push(type2_header(p.opcode, p.word_count.into())?);
            }
            kind => {
                if p.word_count != 0 {
                    return Err(PacketError::PayloadCountMismatch {
                        declared: p.word_count,
                        actual: 0,
                    });
                }
                out.push(match kind {
                    PacketKind::Noop => NOOP_WORD,
                    PacketKind::Dummy => DUMMY_WORD,
                    PacketKind::SyncWord => SYNC_WORD,
                    PacketKind::BusWidthSync => BUS_WIDTH_SYNC,
                    PacketKind::BusWidthDetect => BUS_WIDTH_DETECT,
                    PacketKind::Type1 | PacketKind::Type2 => unreachable!(),
                });
            }
        }
        out.extend_from_slice(&p.payload);
        prev = Some(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_command_write() {
        let pkts = packet_decode(&[0x3000_8001, 0x0000_000B]).unwrap();
        assert_eq!(pkts, vec![ConfigPacket::command(Command::Shutdown)]);
        assert_eq!(pkts[0].register, Register::Cmd);
        assert_eq!(pkts[0].payload, vec![0x0B]);
    }

    #[test]
    fn decodes_noop() {
        assert_eq!(
            packet_decode(&[0x2000_0000]).unwrap(),
            vec![ConfigPacket::noop()]
        );
    }

    #[test]
    fn decodes_fdri_type2() {
        let mut words = vec![0x3000_4000, 0x5000_00CA];
        words.extend(std::iter::repeat_n(0xAB, 202));
        let pkts = packet_decode(&words).unwrap();
        assert_eq!(pkts.len(), 2);
        assert_eq!(pkts[0].kind, PacketKind::Type1);
        assert_eq!(pkts[0].register, Register::Fdri);
        assert_eq!(pkts[0].word_count, 0);
        assert_eq!(pkts[1].kind, PacketKind::Type2);
        assert_eq!(pkts[1].register, Register::Fdri);
        assert_eq!(pkts[1].word_count, 202);
        assert_eq!(pkts[1].payload.len(), 202);
    }

    #[test]
    fn register_ids_match_command_words() {
        let regs: Vec<_> = [
            0x3000_8001u32,
            0x3000_2001,
            0x3000_4000,
            0x3001_8001,
            0x3000_C001,
            0x3000_A001,
        ]
        .iter()
        .map(|&w| match decode_header(w) {
            Some(Header::Type1 { register, .. }) => register,
            other => panic!("{w:#x} decoded to {other:?}"),
        })
        .collect();
        assert_eq!(
            regs,
            [
                Register::Cmd,
                Register::Far,
                Register::Fdri,
                Register::Idcode,
                Register::Mask,
                Register::Ctl0
            ]
        );
        assert_eq!(
            decode_header(0x2800_60CA),
            Some(Header::Type1 {
                opcode: Opcode::Read,
                register: Register::Fdro,
                count: 202
            })
        );
        assert_eq!(
            decode_header(0x4800_00CA),
            Some(Header::Type2 {
                opcode: Opcode::Read,
                count: 202
            })
        );
    }

    #[test]
    fn encodes_far_write() {
        let words =
            packet_encode(&[ConfigPacket::type1_write(Register::Far, vec![0x0042_011E])]).unwrap();
        assert_eq!(words, vec![0x3000_2001, 0x0042_011E]);
        assert_eq!(
            packet_encode(&[ConfigPacket::noop()]).unwrap(),
            vec![0x2000_0000]
        );
    }

    #[test]
    fn special_words() {
        let pkts = [
            ConfigPacket::dummy(),
            ConfigPacket::bus_width_sync(),
            ConfigPacket::bus_width_detect(),
            ConfigPacket::sync(),
        ];
        let words = packet_encode(&pkts).unwrap();
        assert_eq!(words, vec![DUMMY_WORD, 0xBB, 0x1122_0044, 0xAA99_5566]);
        assert_eq!(packet_decode(&words).unwrap(), pkts);
    }

    #[test]
    fn truncated_payload() {
        assert_eq!(
            packet_decode(&[0x3000_8002, 0x1]),
            Err(PacketError::TruncatedPayload {
                offset: 0,
                needed: 2,
                available: 1
            })
        );
    }

    #[test]
    fn orphan_type2() {
        assert_eq!(
            packet_decode(&[0x5000_0000]),
            Err(PacketError::OrphanType2 { offset: 0 })
        );
        assert_eq!(
            packet_decode(&[NOOP_WORD, 0x5000_0000]),
            Err(PacketError::OrphanType2 { offset: 1 })
        );
        let bad = [
            ConfigPacket::type1_write(Register::Far, vec![]),
            ConfigPacket::type2_write(Register::Fdri, vec![]),
        ];
        assert!(matches!(
            packet_encode(&bad),
            Err(PacketError::OrphanType2 { .. })
        ));
    }

    #[test]
    fn unknown_registers_preserved() {
        let pkts = packet_decode(&[0x3000_0001, 0x1234]).unwrap();
        assert_eq!(pkts[0].register, Register::Unknown(0));
        let pkts = packet_decode(&[0x3002_2001, 0x1234]).unwrap();
        assert_eq!(pkts[0].register, Register::Unknown(0x11));
    }

    #[test]
    fn payload_count_mismatch() {
        let mut p = ConfigPacket::type1_write(Register::Cmd, vec![1]);
        p.word_count = 2;
        assert_eq!(
            packet_encode(&[p]),
            Err(PacketError::PayloadCountMismatch {
                declared: 2,
                actual: 1
            })
        );
        let mut r = ConfigPacket::type1_read(Register::Fdro, 3);
        r.payload.push(9);
        assert!(packet_encode(&[r]).is_err());
    }

    #[test]
    fn count_overflow() {
        assert!(matches!(
            type2_header(Opcode::Write, 1 << 27),
            Err(PacketError::CountOverflow { .. })
        ));
        assert!(type1_header(Opcode::Write, Register::Cmd, 2048).is_err());
    }

    fn arb_register() -> impl Strategy<Value = Register> {
        prop_oneof![
            Just(Register::Far),
            Just(Register::Fdri),
            Just(Register::Fdro),
            Just(Register::Cmd),
            Just(Register::Ctl0),
            Just(Register::Mask),
            Just(Register::Idcode),
        ]
    }

    fn arb_packets() -> impl Strategy<Value = Vec<ConfigPacket>> {
        let single = prop_oneof![
            Just(vec![ConfigPacket::noop()]),
            Just(vec![ConfigPacket::dummy()]),
            Just(vec![ConfigPacket::sync()]),
            Just(vec![ConfigPacket::bus_width_sync()]),
            Just(vec![ConfigPacket::bus_width_detect()]),
            (arb_register(), prop::collection::vec(any::<u32>(), 0..8))
                .prop_map(|(r, p)| vec![ConfigPacket::type1_write(r, p)]),
            (arb_register(), 0u32..=TYPE1_MAX_COUNT)
                .prop_map(|(r, c)| vec![ConfigPacket::type1_read(r, c)]),
            (arb_register(), prop::collection::vec(any::<u32>(), 0..40)).prop_map(|(r, p)| vec![
                ConfigPacket::type1_write(r, vec![]),
                ConfigPacket::type2_write(r, p)
            ]),
            (arb_register(), 0u32..=TYPE2_MAX_COUNT).prop_map(|(r, c)| vec![
                ConfigPacket::type1_read(r, 0),
                ConfigPacket::type2_read(r, c)
            ]),
        ];
        prop::collection::vec(single, 0..12).prop_map(|v| v.into_iter().flatten().collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(pkts in arb_packets()) {
            let words = packet_encode(&pkts).unwrap();
            prop_assert_eq!(packet_decode(&words).unwrap(), pkts);
        }
    }
}
