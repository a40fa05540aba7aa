//! Bit-level comparison of two snapshots of the same slot.

use super::snapshot::Snapshot;
use super::EpochError;
use crate::bitcodec::{FrameAddress, CRC_WORD, FRAME_WORDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordDiff {
    pub far: FrameAddress,
    pub word: usize,
    /// Set bits mark differing positions.
    pub bits: u32,
}

impl WordDiff {
    pub fn bit_positions(&self) -> Vec<u8> {
        (0..32).filter(|b| self.bits >> b & 1 == 1).collect()
    }
}

/// Differing (frame, word, bits), excluding the CRC word unless asked.
pub fn diff_snapshots(
    a: &Snapshot,
    b: &Snapshot,
    include_crc_word: bool,
) -> Result<Vec<WordDiff>, EpochError> {
    if a.slot_id() != b.slot_id() {
        return Err(EpochError::GeometryMismatch(format!(
            "slots `{}` and `{}` differ",
            a.slot_id(),
            b.slot_id()
        )));
    }
    let fars_a: Vec<_> = a.frames().iter().map(|(f, _)| *f).collect();
    let fars_b: Vec<_> = b.frames().iter().map(|(f, _)| *f).collect();
    if fars_a != fars_b {
        return Err(EpochError::GeometryMismatch("frame sets differ".into()));
    }
    let mut out = Vec::new();
    for ((far, fa), (_, fb)) in a.frames().iter().zip(b.frames()) {
        for word in 0..FRAME_WORDS {
            if word == CRC_WORD && !include_crc_word {
                continue;
            }
            let bits = fa.word(word) ^ fb.word(word);
            if bits != 0 {
                out.push(WordDiff {
                    far: *far,
                    word,
                    bits,
                });
            }
        }
    }
    Ok(out)
}
