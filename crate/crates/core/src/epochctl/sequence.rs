//! Readback and frame-write command sequences for the configuration port,
//! and their annotated template dump.

use std::fmt::Write as _;

use super::EpochError;
use crate::bitcodec::packet::{
    type1_header, type2_header, BUS_WIDTH_DETECT, BUS_WIDTH_SYNC, DUMMY_WORD, NOOP_WORD, SYNC_WORD,
};
use crate::bitcodec::{Command, Frame, FrameAddress, Opcode, Register, FRAME_WORDS};

/// CTL0 / MASK value selecting the GLUTMASK bit.
pub const GLUTMASK_VALUE: u32 = 0x0000_0100;

const HEADER_DUMMIES: usize = 8;
const READBACK_TAIL_NOOPS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateItem {
    Word {
        word: u32,
        label: &'static str,
    },
    /// Words the host reads back at this point.
    ReadBack {
        words: usize,
        frames: usize,
    },
}

/// An annotated command sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandSequence {
    items: Vec<TemplateItem>,
}

impl CommandSequence {
    fn push(&mut self, word: u32, label: &'static str) {
        self.items.push(TemplateItem::Word { word, label });
    }

    fn repeat(&mut self, word: u32, label: &'static str, n: usize) {
        for _ in 0..n {
            self.push(word, label);
        }
    }

    fn command(&mut self, cmd: Command, header_label: &'static str, label: &'static str) {
        self.push(cmd_header(), header_label);
        self.push(cmd.code(), label);
    }

    fn preamble(&mut self) {
        self.repeat(DUMMY_WORD, "Dummy Word", HEADER_DUMMIES);
        self.push(BUS_WIDTH_SYNC, "Bus Width Sync Word");
        self.push(BUS_WIDTH_DETECT, "Bus Width Detect");
        self.push(DUMMY_WORD, "Dummy Word");
        self.push(SYNC_WORD, "Synchronization Word");
    }

    pub fn items(&self) -> &[TemplateItem] {
        &self.items
    }

    fn split_at_readback(&self) -> usize {
        self.items
            .iter()
            .position(|i| matches!(i, TemplateItem::ReadBack { .. }))
            .unwrap_or(self.items.len())
    }

    fn collect(items: &[TemplateItem]) -> Vec<u32> {
        items
            .iter()
            .filter_map(|i| match i {
                TemplateItem::Word { word, .. } => Some(*word),
                TemplateItem::ReadBack { .. } => None,
            })
            .collect()
    }

    /// Every word the host sends, in order.
    pub fn words(&self) -> Vec<u32> {
        Self::collect(&self.items)
    }

    /// Words sent before the readback point (all words for a write).
    pub fn header(&self) -> Vec<u32> {
        Self::collect(&self.items[..self.split_at_readback()])
    }

    /// Words sent after the readback point.
    pub fn footer(&self) -> Vec<u32> {
        Self::collect(&self.items[self.split_at_readback()..])
    }

    /// Words read back, padding frame included.
    pub fn read_words(&self) -> usize {
        self.items
            .iter()
            .map(|i| match i {
                TemplateItem::ReadBack { words, .. } => *words,
                TemplateItem::Word { .. } => 0,
            })
            .sum()
    }

    /// One `0xHHHHHHHH  # label` line per word.
    pub fn template(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            match item {
                TemplateItem::Word { word, label } => {
                    let _ = writeln!(out, "0x{word:08X}  # {label}");
                }
                TemplateItem::ReadBack { words, frames } => {
                    let _ = writeln!(
                        out,
                        "# read {words} words: one padding frame, then {frames} frame(s)"
                    );
                }
            }
        }
        out
    }
}

fn cmd_header() -> u32 {
    type1_header(Opcode::Write, Register::Cmd, 1).expect("constant header")
}

fn write1(register: Register) -> u32 {
    type1_header(Opcode::Write, register, 1).expect("constant header")
}

fn padded_count(n_frames: usize) -> Result<u64, EpochError> {
    if n_frames == 0 {
        return Err(EpochError::EmptySequence);
    }
    Ok((n_frames as u64 + 1) * FRAME_WORDS as u64)
}

/// Readback of `n_frames` frames starting at `far`.
pub fn build_readback_sequence(
    far: &FrameAddress,
    n_frames: usize,
    glut_unmask: bool,
    capture_ffs: bool,
) -> Result<CommandSequence, EpochError> {
    let count = padded_count(n_frames)?;
    let count_word = type2_header(Opcode::Read, count)?;
    // The type-1 read keeps the one-frame count; the type-2 word carries
    // the real length.
    let fdro = type1_header(Opcode::Read, Register::Fdro, 2 * FRAME_WORDS as u32)?;

    let mut s = CommandSequence::default();
    s.preamble();
    s.repeat(NOOP_WORD, "NOOP", 2);
    s.command(Command::Shutdown, "Type-1 Command Word", "Fabric shutdown");
    s.repeat(NOOP_WORD, "NOOP", 2);
    s.command(Command::Rcrc, "Type-1 Command Word", "Reset CRC Register");
    s.repeat(NOOP_WORD, "NOOP", 6);
    if glut_unmask {
        s.push(write1(Register::Mask), "Global LUT Mask");
        s.push(GLUTMASK_VALUE, "Set GLUTMASK bit");
        s.push(write1(Register::Ctl0), "Global LUT Mask");
        s.push(GLUTMASK_VALUE, "Set GLUTMASK bit");
    }
    if capture_ffs {
        s.command(Command::Gcapture, "Type-1 Command Word", "Global capture");
        s.push(NOOP_WORD, "NOOP");
    }
    s.command(
        Command::Rcfg,
        "Type-1 Command Word",
        "Read configuration register command",
    );
    s.repeat(NOOP_WORD, "NOOP", 3);
    s.push(write1(Register::Far), "Write FAR");
    s.push(far.encode()?, "FAR Address");
    s.push(fdro, "Write FDRO Reg Command");
    s.push(count_word, "Number of Words");
    s.repeat(NOOP_WORD, "NOOP", READBACK_TAIL_NOOPS);
    s.items.push(TemplateItem::ReadBack {
        words: count as usize,
        frames: n_frames,
    });
    s.push(NOOP_WORD, "NOOP");
    s.command(Command::Start, "Write CMD Reg Command", "Start Command");
    s.push(NOOP_WORD, "NOOP");
    s.command(Command::Rcrc, "Write CMD Reg Command", "Reset CRC Register");
    s.push(NOOP_WORD, "NOOP");
    s.command(
        Command::Desync,
        "Type-1 Command Word",
        "De-Synchronization Command",
    );
    Ok(s)
}

/// Writes `frames` starting at `far`, then points FAR at `next_far`.
pub fn build_write_sequence(
    far: &FrameAddress,
    frames: &[Frame],
    next_far: &FrameAddress,
    idcode: u32,
) -> Result<CommandSequence, EpochError> {
    let count = padded_count(frames.len())?;
    let count_word = type2_header(Opcode::Write, count)?;

    let mut s = CommandSequence::default();
    s.preamble();
    s.repeat(NOOP_WORD, "NOOP", 2);
    s.command(Command::Rcrc, "Type-1 Command Word", "Reset CRC Register");
    s.repeat(NOOP_WORD, "NOOP", 2);
    s.push(write1(Register::Idcode), "Write IDCODE Reg Command");
    s.push(idcode, "FPGA IDCODE");
    s.push(NOOP_WORD, "NOOP");
    s.push(write1(Register::Far), "Write FAR Command");
    s.push(far.encode()?, "FAR Address");
    s.push(NOOP_WORD, "NOOP");
    s.command(
        Command::Wcfg,
        "Write CMD Reg Command",
        "Write Configuration Data",
    );
    s.push(NOOP_WORD, "NOOP");
    s.push(
        type1_header(Opcode::Write, Register::Fdri, 0)?,
        "Write FDRI Reg Command",
    );
    s.push(count_word, "Number of Words");
    for frame in frames {
        for &w in frame.words() {
            s.push(w, "Frame Words");
        }
    }
    s.repeat(0, "Padding Words", FRAME_WORDS);
    s.command(Command::Rcrc, "Write CMD Reg Command", "Reset CRC Register");
    s.repeat(NOOP_WORD, "NOOP", 2);
    s.push(write1(Register::Far), "Write FAR Command Word");
    s.push(next_far.encode()?, "Next FAR Address");
    s.command(Command::Rcrc, "Type-1 Command Word", "Reset CRC Register");
    s.repeat(NOOP_WORD, "NOOP", 2);
    s.command(
        Command::Desync,
        "Type-1 Command Word",
        "De-Synchronization Command",
    );
    s.push(DUMMY_WORD, "Dummy Word");
    s.repeat(NOOP_WORD, "NOOP", 2);
    Ok(s)
}

/// Synchronises, pulses global capture and desynchronises.
pub fn build_capture_sequence() -> CommandSequence {
    let mut s = CommandSequence::default();
    s.preamble();
    s.repeat(NOOP_WORD, "NOOP", 2);
    s.command(Command::Gcapture, "Type-1 Command Word", "Global capture");
    s.push(NOOP_WORD, "NOOP");
    s.command(
        Command::Desync,
        "Type-1 Command Word",
        "De-Synchronization Command",
    );
    s
}

fn word_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let content = l.split('#').next().unwrap_or("").trim();
            (!content.is_empty()).then_some((i + 1, content))
        })
        .collect()
}

fn parse_word(s: &str) -> Option<u32> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"))?;
    u32::from_str_radix(digits, 16).ok()
}

/// Compares the word lines of a template dump against a golden file,
/// ignoring comments and blank lines. Reports the first differing line of
/// the golden file.
pub fn golden_check(template: &str, golden: &str) -> Result<(), EpochError> {
    let ours = word_lines(template);
    let theirs = word_lines(golden);
    for i in 0..ours.len().max(theirs.len()) {
        let (line, expected) = match theirs.get(i) {
            Some(&(n, w)) => (n, w.to_string()),
            None => (
                theirs.last().map_or(0, |l| l.0) + 1,
                "<end of file>".to_string(),
            ),
        };
        let found = ours
            .get(i)
            .map_or("<end of template>".to_string(), |l| l.1.to_string());
        let same = match (parse_word(&expected), parse_word(&found)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        };
        if !same {
            return Err(EpochError::GoldenMismatch {
                line,
                expected,
                found,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn far() -> FrameAddress {
        FrameAddress::decode(0x0042_011E).unwrap()
    }

    #[test]
    fn count_words() {
        let rb = build_readback_sequence(&far(), 1, true, true).unwrap();
        assert!(rb.header().contains(&0x4800_00CA));
        assert_eq!(rb.read_words(), 202);
        let wr = build_write_sequence(&far(), &[Frame::zeroed()], &far(), 0x0372_7093).unwrap();
        assert!(wr.words().contains(&0x5000_00CA));
        assert_eq!(wr.read_words(), 0);
        assert_eq!(wr.header(), wr.words());
    }

    #[test]
    fn unmask_rows_are_optional() {
        let with = build_readback_sequence(&far(), 1, true, false)
            .unwrap()
            .words();
        let without = build_readback_sequence(&far(), 1, false, false)
            .unwrap()
            .words();
        assert_eq!(with.len(), without.len() + 4);
        assert!(!without.contains(&0x3000_C001));
        assert!(!without.contains(&0x3000_A001));
    }

    #[test]
    fn count_overflow() {
        // Largest n with (n + 1) * 101 <= 2^27 - 1.
        let max_n = 1_328_887;
        assert!((max_n + 1) * 101 < (1 << 27) && (max_n + 2) * 101 > (1 << 27) - 1);
        assert!(matches!(
            build_readback_sequence(&far(), max_n + 1, true, true),
            Err(EpochError::CountOverflow { .. })
        ));
        assert!(build_readback_sequence(&far(), max_n, true, true).is_ok());
        assert!(matches!(
            build_readback_sequence(&far(), 0, true, true),
            Err(EpochError::EmptySequence)
        ));
    }

    #[test]
    fn golden_check_reports_first_difference() {
        let t = "0x00000001  # a\n# note\n0x00000002\n";
        assert!(golden_check(t, "0x1\n\n0x00000002 # b\n").is_ok());
        let err = golden_check(t, "# header\n0x00000001\n0x00000003\n").unwrap_err();
        assert_eq!(
            err,
            EpochError::GoldenMismatch {
                line: 3,
                expected: "0x00000003".into(),
                found: "0x00000002".into()
            }
        );
        assert!(golden_check(t, "0x00000001\n").is_err());
        assert!(golden_check("0x1\n", "0x1\n0x2\n").is_err());
    }
}
