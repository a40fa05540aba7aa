use std::fmt;

use thiserror::Error;

/// Words per configuration frame.
pub const FRAME_WORDS: usize = 101;

/// Word index reserved for the per-frame CRC.
pub const CRC_WORD: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("frame must hold exactly {FRAME_WORDS} words, got {0}")]
pub struct FrameLengthError(pub usize);

/// One configuration frame: 101 words of 32 bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    words: [u32; FRAME_WORDS],
}

impl Frame {
    pub fn zeroed() -> Self {
        Frame {
            words: [0; FRAME_WORDS],
        }
    }

    pub fn from_words(words: &[u32]) -> Result<Self, FrameLengthError> {
        let words: [u32; FRAME_WORDS] = words
            .try_into()
            .map_err(|_| FrameLengthError(words.len()))?;
        Ok(Frame { words })
    }

    pub fn words(&self) -> &[u32; FRAME_WORDS] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u32; FRAME_WORDS] {
        &mut self.words
    }

    pub fn word(&self, index: usize) -> u32 {
        self.words[index]
    }

    pub fn set_word(&mut self, index: usize, value: u32) {
        self.words[index] = value;
    }

    pub fn bit(&self, word: usize, bit: u8) -> bool {
        self.words[word] >> bit & 1 == 1
    }

    pub fn set_bit(&mut self, word: usize, bit: u8, value: bool) {
        if value {
            self.words[word] |= 1 << bit;
        } else {
            self.words[word] &= !(1 << bit);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn crc_word(&self) -> u32 {
        self.words[CRC_WORD]
    }

    /// Equality ignoring the CRC slot.
    pub fn eq_ignoring_crc(&self, other: &Frame) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .enumerate()
            .all(|(i, (a, b))| i == CRC_WORD || a == b)
    }
}

impl Default for Frame {
    fn default() -> Self {
        Frame::zeroed()
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero: Vec<_> = self
            .words
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0)
            .map(|(i, w)| format!("{i}:{w:#010x}"))
            .collect();
        write!(f, "Frame[{}]", nonzero.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_lengths() {
        assert_eq!(Frame::from_words(&[0; 100]), Err(FrameLengthError(100)));
        assert_eq!(Frame::from_words(&[0; 102]), Err(FrameLengthError(102)));
        assert_eq!(Frame::from_words(&[]), Err(FrameLengthError(0)));
        assert!(Frame::from_words(&[7; 101]).is_ok());
    }

    #[test]
    fn bit_access() {
        let mut f = Frame::zeroed();
        f.set_bit(12, 5, true);
        assert_eq!(f.word(12), 1 << 5);
        assert!(f.bit(12, 5));
        f.set_bit(12, 5, false);
        assert!(f.is_zero());
    }

    #[test]
    fn crc_slot_ignored_in_comparison() {
        let a = Frame::zeroed();
        let mut b = Frame::zeroed();
        b.set_word(CRC_WORD, 0xDEAD_BEEF);
        assert!(a.eq_ignoring_crc(&b));
        b.set_word(49, 1);
        assert!(!a.eq_ignoring_crc(&b));
    }
}
