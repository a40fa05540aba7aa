//! `.bit` / `.bin` bitstream containers. Words are big-endian on disk.

use thiserror::Error;

use super::packet::BUS_WIDTH_SYNC;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    /// Vendor metadata header followed by the configuration words.
    BitFile,
    /// Raw configuration words.
    BinFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContainerError {
    #[error("bus-width sync preamble 0x000000BB not found")]
    SyncNotFound,
    #[error("container length {0} is not a multiple of 4 bytes")]
    LengthNotWordMultiple(usize),
}

pub fn parse_container(bytes: &[u8], kind: ContainerKind) -> Result<Vec<u32>, ContainerError> {
    match kind {
        ContainerKind::BinFile => words_from_bytes(bytes),
        ContainerKind::BitFile => {
            let preamble = BUS_WIDTH_SYNC.to_be_bytes();
            let start = bytes
                .windows(4)
                .position(|w| w == preamble)
                .ok_or(ContainerError::SyncNotFound)?;
            // Trailing bytes past the last whole word are padding in .bit files.
            let body = &bytes[start..];
            let whole = body.len() - body.len() % 4;
            words_from_bytes(&body[..whole])
        }
    }
}

pub fn words_from_bytes(bytes: &[u8]) -> Result<Vec<u32>, ContainerError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(ContainerError::LengthNotWordMultiple(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn words_to_bytes(words: &[u32]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_be_bytes()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bin_file_groups_words() {
        let bytes = [0xFF, 0xFF, 0xFF, 0xFF, 0xAA, 0x99, 0x55, 0x66];
        assert_eq!(
            parse_container(&bytes, ContainerKind::BinFile).unwrap(),
            vec![0xFFFF_FFFF, 0xAA99_5566]
        );
    }

    #[test]
    fn bin_file_rejects_partial_word() {
        assert_eq!(
            parse_container(&[1, 2, 3], ContainerKind::BinFile),
            Err(ContainerError::LengthNotWordMultiple(3))
        );
    }

    #[test]
    fn bit_file_skips_metadata() {
        let mut bytes: Vec<u8> = (0u8..13).map(|b| b.wrapping_mul(37) | 0x40).collect();
        bytes.extend_from_slice(&[
            0, 0, 0, 0xBB, 0x11, 0x22, 0x00, 0x44, 0xAA, 0x99, 0x55, 0x66,
        ]);
        let words = parse_container(&bytes, ContainerKind::BitFile).unwrap();
        assert_eq!(words, vec![0xBB, 0x1122_0044, 0xAA99_5566]);
    }

    #[test]
    fn bit_file_without_preamble() {
        assert_eq!(
            parse_container(&[1, 2, 3, 4, 5, 6, 7, 8], ContainerKind::BitFile),
            Err(ContainerError::SyncNotFound)
        );
    }

    proptest! {
        #[test]
        fn bin_file_is_length_preserving(words in prop::collection::vec(any::<u32>(), 0..64)) {
            let bytes = words_to_bytes(&words);
            let parsed = parse_container(&bytes, ContainerKind::BinFile).unwrap();
            prop_assert_eq!(bytes.len(), 4 * parsed.len());
            prop_assert_eq!(parsed, words);
        }
    }
}
