//! Software reference model of each tenant kind, written against plain
//! integers so it shares no code with the fabric-resident versions.

use super::{TenantKind, TenantParams, TenantState};

pub const CHAIN_INCREMENT: u32 = 0x9E37_79B9;
pub const CHAIN_ROTATE: u32 = 7;

/// Initial state of a freshly loaded design.
pub fn initial_state(kind: TenantKind, params: &TenantParams) -> TenantState {
    match kind {
        TenantKind::UpCounter4 => TenantState::Register(0x0),
        TenantKind::DownCounter4 => TenantState::Register(0xF),
        TenantKind::Lfsr8 => TenantState::Register(params.seed & 0xFF),
        TenantKind::Lfsr32 => TenantState::Register(params.seed),
        TenantKind::BramChain => TenantState::Chain {
            index: 0,
            words: (0..params.chain_len)
                .map(|i| params.seed.rotate_left(8 * i as u32) ^ i as u32)
                .collect(),
            acc: 0,
        },
    }
}

/// State after `n_ticks` clock edges with the update line held at `update`.
pub fn oracle_replay(
    kind: TenantKind,
    params: &TenantParams,
    start: &TenantState,
    n_ticks: u64,
    update: bool,
) -> TenantState {
    match (kind, start) {
        (TenantKind::UpCounter4, TenantState::Register(v)) => {
            let steps = if update { n_ticks % 16 } else { 0 } as u32;
            TenantState::Register((v + steps) % 16)
        }
        (TenantKind::DownCounter4, TenantState::Register(v)) => {
            let steps = if update { n_ticks % 16 } else { 0 } as u32;
            TenantState::Register((v + 16 - steps) % 16)
        }
        (TenantKind::Lfsr8 | TenantKind::Lfsr32, TenantState::Register(v)) => {
            let width = kind.state_bits();
            let mut s = u64::from(*v);
            for _ in 0..n_ticks {
                let feedback = params
                    .taps
                    .iter()
                    .map(|&t| (s >> (width - u32::from(t))) & 1)
                    .fold(0, |a, b| a ^ b);
                s = (s >> 1) | (feedback << (width - 1));
            }
            TenantState::Register(s as u32)
        }
        (TenantKind::BramChain, TenantState::Chain { index, words, acc }) => {
            let mut index = *index;
            let mut words = words.clone();
            let mut acc = *acc;
            let len = words.len();
            for _ in 0..n_ticks {
                let prev = words[(index + len - 1) % len];
                let next = prev
                    .rotate_left(CHAIN_ROTATE)
                    .wrapping_add(words[index])
                    .wrapping_add(CHAIN_INCREMENT);
                words[index] = next;
                acc = acc.wrapping_add(next.wrapping_mul(params.seed | 1));
                index = (index + 1) % len;
            }
            TenantState::Chain { index, words, acc }
        }
        _ => panic!("state {start:?} does not belong to {kind:?}"),
    }
}
