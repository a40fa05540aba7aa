//! Saved slot context and its binary form.
//!
//! Layout, all fields big-endian:
//!
//! ```text
//! "EPOC"  version:u16  flags:u16  idcode:u32
//! slot_len:u16  slot bytes
//! captured_at_cycle:u64  frame_count:u32
//! frame_count x ( far:u32  101 x word:u32 )
//! ```
//!
//! Flag bit 0 records that BRAM frames were corrected before storage.

use super::fixup::has_readback_flags;
use super::EpochError;
use crate::bitcodec::{Frame, FrameAddress, LogicLocationEntry, FRAME_WORDS};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"EPOC";
pub const SNAPSHOT_VERSION: u16 = 1;
const FLAG_FIXUP: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    slot_id: String,
    idcode: u32,
    captured_at_cycle: u64,
    frames: Vec<(FrameAddress, Frame)>,
    fixup_applied: bool,
}

impl Snapshot {
    /// A snapshot fit for restoring: BRAM frames must already be corrected.
    pub fn new(
        slot_id: &str,
        idcode: u32,
        captured_at_cycle: u64,
        frames: Vec<(FrameAddress, Frame)>,
        fixup_applied: bool,
    ) -> Result<Self, EpochError> {
        let s = Self::new_uncorrected(slot_id, idcode, captured_at_cycle, frames, fixup_applied)?;
        for (far, frame) in &s.frames {
            if far.is_bram() && !(s.fixup_applied && !has_readback_flags(frame)) {
                return Err(EpochError::InvalidSnapshot(format!(
                    "BRAM frame {far} is not corrected"
                )));
            }
        }
        Ok(s)
    }

    /// Diagnostic constructor that keeps BRAM frames exactly as read back.
    pub fn new_uncorrected(
        slot_id: &str,
        idcode: u32,
        captured_at_cycle: u64,
        frames: Vec<(FrameAddress, Frame)>,
        fixup_applied: bool,
    ) -> Result<Self, EpochError> {
        if frames.is_empty() {
            return Err(EpochError::InvalidSnapshot("no frames".into()));
        }
        if slot_id.len() > usize::from(u16::MAX) {
            return Err(EpochError::InvalidSnapshot("slot id too long".into()));
        }
        if let Some(w) = frames.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(EpochError::InvalidSnapshot(format!(
                "frame {} does not follow {}",
                w[1].0, w[0].0
            )));
        }
        Ok(Snapshot {
            slot_id: slot_id.to_string(),
            idcode,
            captured_at_cycle,
            frames,
            fixup_applied,
        })
    }

    pub fn slot_id(&self) -> &str {
        &self.slot_id
    }

    pub fn idcode(&self) -> u32 {
        self.idcode
    }

    pub fn captured_at_cycle(&self) -> u64 {
        self.captured_at_cycle
    }

    pub fn frames(&self) -> &[(FrameAddress, Frame)] {
        &self.frames
    }

    pub fn fixup_applied(&self) -> bool {
        self.fixup_applied
    }

    pub fn frame(&self, far: &FrameAddress) -> Option<&Frame> {
        self.frames
            .binary_search_by(|(f, _)| f.cmp(far))
            .ok()
            .map(|i| &self.frames[i].1)
    }

    /// Value of a mapped cell as stored in this snapshot.
    pub fn cell_value(&self, cell: &LogicLocationEntry) -> Option<u32> {
        let frame = self.frame(&cell.far)?;
        Some(if cell.element_kind.is_word_cell() {
            frame.word(cell.frame_word_offset)
        } else {
            u32::from(frame.bit(cell.frame_word_offset, cell.bit_offset))
        })
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.slot_id.len(), self.frames.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_be_bytes());
        let flags = if self.fixup_applied { FLAG_FIXUP } else { 0 };
        out.extend_from_slice(&flags.to_be_bytes());
        out.extend_from_slice(&self.idcode.to_be_bytes());
        out.extend_from_slice(&(self.slot_id.len() as u16).to_be_bytes());
        out.extend_from_slice(self.slot_id.as_bytes());
        out.extend_from_slice(&self.captured_at_cycle.to_be_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_be_bytes());
        for (far, frame) in &self.frames {
            out.extend_from_slice(&far.word().to_be_bytes());
            for w in frame.words() {
                out.extend_from_slice(&w.to_be_bytes());
            }
        }
        out
    }

    /// Parses a snapshot from the start of `bytes`; trailing bytes are
    /// ignored.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EpochError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(EpochError::InvalidSnapshot("bad magic".into()));
        }
        let version = r.u16()?;
        if version != SNAPSHOT_VERSION {
            return Err(EpochError::InvalidSnapshot(format!(
                "unsupported version {version}"
            )));
        }
        let flags = r.u16()?;
        if flags & !FLAG_FIXUP != 0 {
            return Err(EpochError::InvalidSnapshot(format!(
                "unknown flags {flags:#06x}"
            )));
        }
        let idcode = r.u32()?;
        let slot_len = usize::from(r.u16()?);
        let slot = std::str::from_utf8(r.take(slot_len)?)
            .map_err(|_| EpochError::InvalidSnapshot("slot id is not UTF-8".into()))?
            .to_string();
        let cycle = r.u64()?;
        let count = r.u32()? as usize;
        let mut frames = Vec::with_capacity(count.min(bytes.len() / (4 * (FRAME_WORDS + 1))));
        for _ in 0..count {
            let far = FrameAddress::decode(r.u32()?)
                .map_err(|e| EpochError::InvalidSnapshot(e.to_string()))?;
            let mut frame = Frame::zeroed();
            for w in frame.words_mut() {
                *w = r.u32()?;
            }
            frames.push((far, frame));
        }
        let fixup = flags & FLAG_FIXUP != 0;
        // Uncorrected BRAM frames are kept so that diagnostic snapshots
        // survive storage.
        Self::new_uncorrected(&slot, idcode, cycle, frames, fixup)
    }
}

/// Encoded size of a snapshot with the given slot id length and frame count.
pub fn encoded_len(slot_len: usize, n_frames: usize) -> usize {
    4 + 2 + 2 + 4 + 2 + slot_len + 8 + 4 + n_frames * 4 * (1 + FRAME_WORDS)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EpochError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| EpochError::InvalidSnapshot("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, EpochError> {
        Ok(u16::from_be_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, EpochError> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, EpochError> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
