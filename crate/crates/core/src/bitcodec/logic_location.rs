//! Logic location records: where each stateful element of a design lives in
//! configuration memory.
//!
//! One record per line:
//!
//! ```text
//! Bit <seq> <FAR:0xHEX8> <word:0..100> <bit:0..31> Block=<site> Kind=<FF|LUTRAM|BRAM|DSP> Net=<path> Slot=<id>
//! ```
//!
//! `#` starts a comment that runs to the end of the line. This is the
//! toolkit's own canonical form; vendor `.ll` files need translating first.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::far::FrameAddress;
use super::frame::FRAME_WORDS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line_no}: {reason}: `{content}`")]
pub struct MalformedLine {
    pub line_no: usize,
    pub reason: String,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Ff,
    LutRam,
    Bram,
    Dsp,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Ff => "FF",
            ElementKind::LutRam => "LUTRAM",
            ElementKind::Bram => "BRAM",
            ElementKind::Dsp => "DSP",
        }
    }

    /// BRAM and DSP cells occupy a whole frame word.
    pub fn is_word_cell(self) -> bool {
        matches!(self, ElementKind::Bram | ElementKind::Dsp)
    }
}

impl FromStr for ElementKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FF" => Ok(ElementKind::Ff),
            "LUTRAM" => Ok(ElementKind::LutRam),
            "BRAM" => Ok(ElementKind::Bram),
            "DSP" => Ok(ElementKind::Dsp),
            other => Err(format!("unknown element kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicLocationEntry {
    pub seq: u64,
    pub element_kind: ElementKind,
    pub far: FrameAddress,
    pub frame_word_offset: usize,
    pub bit_offset: u8,
    pub site: String,
    pub design_path: String,
    pub slot_id: String,
}

impl fmt::Display for LogicLocationEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Bit {} 0x{:08X} {} {} Block={} Kind={} Net={} Slot={}",
            self.seq,
            self.far.word(),
            self.frame_word_offset,
            self.bit_offset,
            self.site,
            self.element_kind.as_str(),
            self.design_path,
            self.slot_id
        )
    }
}

pub fn parse_logic_location(text: &str) -> Result<Vec<LogicLocationEntry>, MalformedLine> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                None
            } else {
                Some(parse_line(i + 1, content))
            }
        })
        .collect()
}

pub fn format_logic_location(entries: &[LogicLocationEntry]) -> String {
    entries.iter().map(|e| format!("{e}\n")).collect()
}

fn parse_line(line_no: usize, content: &str) -> Result<LogicLocationEntry, MalformedLine> {
    let bad = |reason: String| MalformedLine {
        line_no,
        reason,
        content: content.to_string(),
    };
    let tokens: Vec<&str> = content.split_whitespace().collect();
    if tokens.len() != 9 {
        return Err(bad(format!("expected 9 fields, found {}", tokens.len())));
    }
    if tokens[0] != "Bit" {
        return Err(bad("record must start with `Bit`".into()));
    }
    let seq: u64 = tokens[1]
        .parse()
        .map_err(|_| bad(format!("bad sequence number `{}`", tokens[1])))?;

    let far_tok = tokens[2];
    let digits = far_tok
        .strip_prefix("0x")
        .or_else(|| far_tok.strip_prefix("0X"))
        .filter(|d| d.len() == 8 && d.chars().all(|c| c.is_ascii_hexdigit()))
        .ok_or_else(|| bad(format!("bad FAR `{far_tok}`")))?;
    let far_word = u32::from_str_radix(digits, 16).map_err(|e| bad(e.to_string()))?;
    let far = FrameAddress::decode(far_word).map_err(|e| bad(e.to_string()))?;

    let word: usize = tokens[3]
        .parse()
        .map_err(|_| bad(format!("bad word offset `{}`", tokens[3])))?;
    if word >= FRAME_WORDS {
        return Err(bad(format!("word offset {word} exceeds 100")));
    }
    let bit: u8 = tokens[4]
        .parse()
        .map_err(|_| bad(format!("bad bit offset `{}`", tokens[4])))?;
    if bit > 31 {
        return Err(bad(format!("bit offset {bit} exceeds 31")));
    }

    let mut site = None;
    let mut kind = None;
    let mut net = None;
    let mut slot = None;
    for tok in &tokens[5..] {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found `{tok}`")))?;
        if value.is_empty() {
            return Err(bad(format!("empty value for `{key}`")));
        }
        let target = match key {
            "Block" => &mut site,
            "Kind" => &mut kind,
            "Net" => &mut net,
            "Slot" => &mut slot,
            other => return Err(bad(format!("unknown key `{other}`"))),
        };
        if target.replace(value).is_some() {
            return Err(bad(format!("duplicate key `{key}`")));
        }
    }
    let missing = |k: &str| bad(format!("missing `{k}=`"));
    let element_kind = kind
        .ok_or_else(|| missing("Kind"))?
        .parse::<ElementKind>()
        .map_err(bad)?;
    Ok(LogicLocationEntry {
        seq,
        element_kind,
        far,
        frame_word_offset: word,
        bit_offset: bit,
        site: site.ok_or_else(|| missing("Block"))?.to_string(),
        design_path: net.ok_or_else(|| missing("Net"))?.to_string(),
        slot_id: slot.ok_or_else(|| missing("Slot"))?.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Bit 0 0x0042011E 12 5 Block=SLICE_X0Y0 Kind=FF Net=ctr_reg[0] Slot=slot0";

    #[test]
    fn parses_sample_record() {
        let entries = parse_logic_location(SAMPLE).unwrap();
        assert_eq!(entries.len(), 1);
        let e = &entries[0];
        assert_eq!(e.element_kind, ElementKind::Ff);
        assert_eq!(e.far.word(), 0x0042_011E);
        assert_eq!(e.frame_word_offset, 12);
        assert_eq!(e.bit_offset, 5);
        assert_eq!(e.site, "SLICE_X0Y0");
        assert_eq!(e.design_path, "ctr_reg[0]");
        assert_eq!(e.slot_id, "slot0");
    }

    #[test]
    fn empty_and_comments() {
        assert!(parse_logic_location("").unwrap().is_empty());
        assert!(parse_logic_location("# header\n\n   # indented\n")
            .unwrap()
            .is_empty());
        let with_trailing = format!("{SAMPLE}  # trailing note");
        assert_eq!(parse_logic_location(&with_trailing).unwrap().len(), 1);
    }

    #[test]
    fn preserves_order_and_round_trips() {
        let text = format!(
            "{SAMPLE}\nBit 1 0x00C20200 3 0 Block=RAMB36_X0Y0 Kind=BRAM Net=mem[0] Slot=slot0\n"
        );
        let entries = parse_logic_location(&text).unwrap();
        assert_eq!(entries[1].element_kind, ElementKind::Bram);
        let again = parse_logic_location(&format_logic_location(&entries)).unwrap();
        assert_eq!(again, entries);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let text = format!("# c\n{SAMPLE}\nBit 1 0xZZ 12 5 Block=S Kind=FF Net=n Slot=s\n");
        let err = parse_logic_location(&text).unwrap_err();
        assert_eq!(err.line_no, 3);
        assert!(err.content.contains("0xZZ"));

        for line in [
            "Bit 0 0x0042011E 101 5 Block=S Kind=FF Net=n Slot=s",
            "Bit 0 0x0042011E 12 32 Block=S Kind=FF Net=n Slot=s",
            "Bit 0 0x0042011E 12 5 Block=S Kind=XX Net=n Slot=s",
            "Bit 0 0x0042011E 12 5 Block=S Kind=FF Net=n",
            "Bit 0 0x0042011E 12 5 Block=S Kind=FF Net=n Slot=s Extra=1",
            "Bit 0 0x0042011E 12 5 Block=S Kind=FF Kind=FF Slot=s",
            "Bat 0 0x0042011E 12 5 Block=S Kind=FF Net=n Slot=s",
            "Bit 0 0xFC000000 12 5 Block=S Kind=FF Net=n Slot=s",
            "Bit 0 0x42011E 12 5 Block=S Kind=FF Net=n Slot=s",
        ] {
            assert!(parse_logic_location(line).is_err(), "{line}");
        }
    }
}
