//! Fabric-resident tenant logic. Registers are stepped bit by bit on the
//! flip-flop cells, the way the synthesized netlist would.

use std::any::Any;

use super::{TenantDesign, TenantKind, TenantState};
use crate::fabricsim::{DeviceModel, Effect, FabricIo, ResidentLogic};

/// Contents every tenant expects in its LUT cells, bit i in LUT cell i.
pub const LUT_PATTERN: u16 = 0xB4E1;
pub const LUT_PATTERN_BITS: usize = 16;

fn lut_bit(i: usize) -> bool {
    (LUT_PATTERN >> i) & 1 == 1
}

#[derive(Debug, Clone)]
pub struct ResidentTenant {
    design: TenantDesign,
    ff: Vec<usize>,
    lut: Vec<usize>,
    bram: Vec<usize>,
    dsp: Option<usize>,
    halted: bool,
}

impl ResidentTenant {
    pub(super) fn new(
        design: TenantDesign,
        ff: Vec<usize>,
        lut: Vec<usize>,
        bram: Vec<usize>,
        dsp: Option<usize>,
    ) -> Self {
        ResidentTenant {
            design,
            ff,
            lut,
            bram,
            dsp,
            halted: false,
        }
    }

    pub fn design(&self) -> &TenantDesign {
        &self.design
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    /// Writes `state` into both planes of the bound cells.
    pub fn write_state(&self, dev: &mut DeviceModel, state: &TenantState) {
        match state {
            TenantState::Register(v) => {
                for (i, &c) in self.ff.iter().enumerate() {
                    dev.preload_cell(c, (v >> i) & 1);
                }
            }
            TenantState::Chain { index, words, acc } => {
                for (i, &c) in self.ff.iter().enumerate() {
                    dev.preload_cell(c, ((index >> i) & 1) as u32);
                }
                for (&c, &w) in self.bram.iter().zip(words) {
                    dev.preload_cell(c, w);
                }
                if let Some(c) = self.dsp {
                    dev.preload_cell(c, *acc);
                }
            }
        }
    }

    pub fn write_lut_pattern(&self, dev: &mut DeviceModel) {
        for (i, &c) in self.lut.iter().enumerate() {
            dev.preload_cell(c, u32::from(lut_bit(i)));
        }
    }

    pub fn read_state(&self, dev: &DeviceModel) -> TenantState {
        let bits = self
            .ff
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &c)| acc | (dev.user_value(c) & 1) << i);
        match self.design.kind {
            TenantKind::BramChain => TenantState::Chain {
                index: bits as usize,
                words: self.bram.iter().map(|&c| dev.user_value(c)).collect(),
                acc: self.dsp.map_or(0, |c| dev.user_value(c)),
            },
            _ => TenantState::Register(bits),
        }
    }

    fn lut_intact(&self, io: &FabricIo<'_>) -> bool {
        self.lut
            .iter()
            .enumerate()
            .all(|(i, &c)| io.config_bit(c) == lut_bit(i))
    }

    fn ripple(&self, io: &mut FabricIo<'_>, up: bool) {
        let mut carry = true;
        for &c in &self.ff {
            let b = io.ff(c);
            io.set_ff(c, b ^ carry);
            carry = if up { b && carry } else { !b && carry };
        }
    }

    fn shift_lfsr(&self, io: &mut FabricIo<'_>) {
        let n = self.ff.len();
        let feedback = self
            .design
            .params
            .taps
            .iter()
            .fold(false, |fb, &t| fb ^ io.ff(self.ff[n - usize::from(t)]));
        for i in 0..n - 1 {
            let next = io.ff(self.ff[i + 1]);
            io.set_ff(self.ff[i], next);
        }
        io.set_ff(self.ff[n - 1], feedback);
    }

    fn step_chain(&self, io: &mut FabricIo<'_>) {
        let len = self.bram.len();
        let index = self
            .ff
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &c)| acc | usize::from(io.ff(c)) << i)
            % len;
        let prev = io.word(self.bram[(index + len - 1) % len]);
        let next = prev
            .rotate_left(super::CHAIN_ROTATE)
            .wrapping_add(io.word(self.bram[index]))
            .wrapping_add(super::CHAIN_INCREMENT);
        io.write_bram(self.bram[index], next);
        if let Some(dsp) = self.dsp {
            let acc = io
                .word(dsp)
                .wrapping_add(next.wrapping_mul(self.design.params.seed | 1));
            io.set_register_word(dsp, acc);
        }
        let index = (index + 1) % len;
        for (i, &c) in self.ff.iter().enumerate() {
            io.set_ff(c, (index >> i) & 1 == 1);
        }
    }
}

impl ResidentLogic for ResidentTenant {
    fn slot_id(&self) -> &str {
        &self.design.slot_id
    }

    fn kind_name(&self) -> String {
        self.design.kind.name().to_string()
    }

    fn cells(&self) -> Vec<usize> {
        self.ff
            .iter()
            .chain(&self.lut)
            .chain(&self.bram)
            .chain(&self.dsp)
            .copied()
            .collect()
    }

    fn tick(&mut self, io: &mut FabricIo<'_>) {
        let intact = self.lut_intact(io);
        if intact == self.halted {
            self.halted = !intact;
            let slot = self.design.slot_id.clone();
            io.log(if intact {
                Effect::TenantResumed { slot }
            } else {
                Effect::TenantHalted { slot }
            });
        }
        if self.halted {
            return;
        }
        let update = io.input(&self.design.slot_id);
        match self.design.kind {
            TenantKind::UpCounter4 if update => self.ripple(io, true),
            TenantKind::DownCounter4 if update => self.ripple(io, false),
            TenantKind::UpCounter4 | TenantKind::DownCounter4 => {}
            TenantKind::Lfsr8 | TenantKind::Lfsr32 => self.shift_lfsr(io),
            TenantKind::BramChain => self.step_chain(io),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
