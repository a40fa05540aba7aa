//! BRAM readback correction. Readback sets bit 18 in a fixed set of words
//! of every BRAM content frame; a frame written back with those bits set is
//! ignored by the device.

use std::collections::BTreeSet;

use super::EpochError;
use crate::bitcodec::{Frame, FrameAddress, FRAME_WORDS};

pub const BRAM_FIXUP_BIT: u8 = 18;

fn needs_fixup(w: usize) -> bool {
    (4..=95).contains(&w) && ((w < 54 && w % 10 == 4) || (w > 54 && w % 10 == 5))
}

/// Word indices whose bit 18 must be cleared before a BRAM frame is
/// written back.
pub fn bram_fixup_words() -> BTreeSet<usize> {
    (0..FRAME_WORDS).filter(|&w| needs_fixup(w)).collect()
}

pub fn apply_bram_fixup(far: &FrameAddress, frame: &Frame) -> Result<Frame, EpochError> {
    if !far.is_bram() {
        return Err(EpochError::NotABramFrame(far.word()));
    }
    let mut out = frame.clone();
    for w in bram_fixup_words() {
        out.set_bit(w, BRAM_FIXUP_BIT, false);
    }
    Ok(out)
}

/// True when any fixup bit is still set.
pub fn has_readback_flags(frame: &Frame) -> bool {
    bram_fixup_words()
        .into_iter()
        .any(|w| frame.bit(w, BRAM_FIXUP_BIT))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bram() -> FrameAddress {
        FrameAddress::decode(0x00C2_0200).unwrap()
    }

    #[test]
    fn enumeration() {
        let brute: BTreeSet<usize> = (4..=95)
            .filter(|w| (*w < 54 && w % 10 == 4) || (*w > 54 && w % 10 == 5))
            .collect();
        assert_eq!(bram_fixup_words(), brute);
        assert_eq!(
            bram_fixup_words().into_iter().collect::<Vec<_>>(),
            vec![4, 14, 24, 34, 44, 55, 65, 75, 85, 95]
        );
        assert!(!bram_fixup_words().contains(&54));
    }

    #[test]
    fn clears_bit_18_only_at_listed_words() {
        let mut f = Frame::zeroed();
        f.set_word(4, 0x0004_0000);
        f.set_word(5, 0x0004_0000);
        f.set_word(14, 0xFFFF_FFFF);
        let g = apply_bram_fixup(&bram(), &f).unwrap();
        assert_eq!(g.word(4), 0);
        assert_eq!(g.word(5), 0x0004_0000);
        assert_eq!(g.word(14), 0xFFFB_FFFF);
        assert!(!has_readback_flags(&g));
    }

    #[test]
    fn rejects_non_bram_frames() {
        let clb = FrameAddress::decode(0x0042_011E).unwrap();
        assert_eq!(
            apply_bram_fixup(&clb, &Frame::zeroed()),
            Err(EpochError::NotABramFrame(0x0042_011E))
        );
    }

    proptest! {
        #[test]
        fn idempotent_and_local(words in prop::collection::vec(any::<u32>(), FRAME_WORDS)) {
            let f = Frame::from_words(&words).unwrap();
            let once = apply_bram_fixup(&bram(), &f).unwrap();
            prop_assert_eq!(&apply_bram_fixup(&bram(), &once).unwrap(), &once);
            for w in 0..FRAME_WORDS {
                let mask = if needs_fixup(w) { !(1u32 << 18) } else { u32::MAX };
                prop_assert_eq!(once.word(w), f.word(w) & mask);
            }
        }
    }
}
