//! Bit-exact encoding and decoding of configuration data: frame addresses,
//! frames, packets, bitstream containers and logic location records.

pub mod container;
pub mod far;
pub mod frame;
pub mod logic_location;
pub mod packet;

pub use container::{parse_container, words_to_bytes, ContainerError, ContainerKind};
pub use far::{
    far_decode, far_encode, ff_far_minors, lut_far_minors, BlockType, FarError, FrameAddress,
    SliceParity,
};
pub use frame::{Frame, FrameLengthError, CRC_WORD, FRAME_WORDS};
pub use logic_location::{
    format_logic_location, parse_logic_location, ElementKind, LogicLocationEntry, MalformedLine,
};
pub use packet::{
    packet_decode, packet_encode, Command, ConfigPacket, Opcode, PacketError, PacketKind, Register,
};
