//! Scenario scripts: a line-oriented list of steps run against a device,
//! with every tenant tracked by its software oracle.
//!
//! ```text
//! load <slot> <kind> [seed=0x..] [taps=8,6,5,4] [len=N]
//! tick <n> [update=0|1]        # update line is shared and persists
//! save <slot>
//! restore <slot> [<slot>...]   # several slots share one GSR
//! blank <slot>
//! assert <slot> <0xVALUE|oracle>
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::bitcodec::ElementKind;
use crate::epochctl::{
    blank_slot, clock_enable, context_save, estimate_timing, restore_many, ControllerOptions,
    DramStore, TimedOp,
};
use crate::fabricsim::{DeviceModel, Effect};
use crate::tenants::{
    initial_state, load_design, oracle_replay, read_state, set_update, TenantDesign, TenantKind,
    TenantParams, TenantState,
};

pub const DEMO_COUNTERS_SCRIPT: &str = "\
# Two counters share the update line; both are saved at 0x3/0xC and
# restored after running on to 0x7/0x8.
load slot0 UpCounter4
load slot1 DownCounter4
assert slot0 0x0
assert slot1 0xF
tick 3 update=1
assert slot0 0x3
assert slot1 0xC
save slot0
save slot1
tick 4
assert slot0 0x7
assert slot1 0x8
restore slot0 slot1
assert slot0 0x3
assert slot1 0xC
";

pub const DEMO_BRAM_SCRIPT: &str = "\
# A BRAM/DSP chain and a 32-bit LFSR are saved, disturbed and restored.
load slot0 BramChain seed=0x1234ABCD len=8
load slot1 Lfsr32 seed=0xC0FFEE01
tick 50
save slot0
save slot1
tick 37
restore slot0
restore slot1
assert slot0 oracle
assert slot1 oracle
tick 20
assert slot0 oracle
assert slot1 oracle
";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expect {
    Value(u32),
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Load(TenantDesign),
    Tick { cycles: u64, update: Option<bool> },
    Save(String),
    Restore(Vec<String>),
    Blank(String),
    Assert { slot: String, expect: Expect },
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Load(_) => "load",
            Step::Tick { .. } => "tick",
            Step::Save(_) => "save",
            Step::Restore(_) => "restore",
            Step::Blank(_) => "blank",
            Step::Assert { .. } => "assert",
        }
    }

    fn slot(&self) -> Option<String> {
        match self {
            Step::Load(d) => Some(d.slot_id.clone()),
            Step::Save(s) | Step::Blank(s) | Step::Assert { slot: s, .. } => Some(s.clone()),
            Step::Restore(slots) => Some(slots.join(",")),
            Step::Tick { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioScript {
    pub steps: Vec<(usize, Step)>,
}

fn parse_u32(s: &str) -> Option<u32> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u32::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

fn parse_line(tokens: &[&str]) -> Result<Step, String> {
    let arity = |n: usize| {
        if tokens.len() == n {
            Ok(())
        } else {
            Err(format!("`{}` takes {} argument(s)", tokens[0], n - 1))
        }
    };
    match tokens[0] {
        "load" => {
            if tokens.len() < 3 {
                return Err("usage: load <slot> <kind> [seed=..] [taps=..] [len=..]".into());
            }
            let kind: TenantKind = tokens[2]
                .parse()
                .map_err(|e: crate::tenants::TenantError| e.to_string())?;
            let mut design = TenantDesign::new(kind, tokens[1]);
            for opt in &tokens[3..] {
                let (key, value) = opt
                    .split_once('=')
                    .ok_or_else(|| format!("expected key=value, found `{opt}`"))?;
                let bad = || format!("bad value for `{key}`: `{value}`");
                match key {
                    "seed" => design.params.seed = parse_u32(value).ok_or_else(bad)?,
                    "len" => design.params.chain_len = value.parse().map_err(|_| bad())?,
                    "taps" => {
                        design.params.taps = value
                            .split(',')
                            .map(|t| t.parse().map_err(|_| bad()))
                            .collect::<Result<_, _>>()?
                    }
                    _ => return Err(format!("unknown load option `{key}`")),
                }
            }
            design.params.validate(kind).map_err(|e| e.to_string())?;
            Ok(Step::Load(design))
        }
        "tick" => {
            if !(2..=3).contains(&tokens.len()) {
                return Err("usage: tick <n> [update=0|1]".into());
            }
            let cycles = tokens[1]
                .parse()
                .map_err(|_| format!("bad tick count `{}`", tokens[1]))?;
            let update = match tokens.get(2) {
                None => None,
                Some(&"update=1") => Some(true),
                Some(&"update=0") => Some(false),
                Some(other) => return Err(format!("expected update=0|1, found `{other}`")),
            };
            Ok(Step::Tick { cycles, update })
        }
        "save" => arity(2).map(|_| Step::Save(tokens[1].into())),
        "blank" => arity(2).map(|_| Step::Blank(tokens[1].into())),
        "restore" => {
            if tokens.len() < 2 {
                return Err("usage: restore <slot> [<slot>...]".into());
            }
            Ok(Step::Restore(
                tokens[1..].iter().map(|s| s.to_string()).collect(),
            ))
        }
        "assert" => {
            arity(3)?;
            let expect = if tokens[2] == "oracle" {
                Expect::Oracle
            } else {
                Expect::Value(
                    parse_u32(tokens[2]).ok_or_else(|| format!("bad value `{}`", tokens[2]))?,
                )
            };
            Ok(Step::Assert {
                slot: tokens[1].into(),
                expect,
            })
        }
        other => Err(format!("unknown step `{other}`")),
    }
}

/// Parses a script. Slots must be loaded before other steps refer to them.
pub fn parse_script(text: &str) -> Result<ScenarioScript, ScriptError> {
    let mut steps = Vec::new();
    let mut loaded = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let step = parse_line(&tokens).map_err(|message| ScriptError { line, message })?;
        let refs: Vec<String> = match &step {
            Step::Load(d) => {
                loaded.insert(d.slot_id.clone());
                Vec::new()
            }
            Step::Restore(slots) => slots.clone(),
            Step::Save(s) | Step::Blank(s) | Step::Assert { slot: s, .. } => vec![s.clone()],
            Step::Tick { .. } => Vec::new(),
        };
        if let Some(s) = refs.iter().find(|s| !loaded.contains(*s)) {
            return Err(ScriptError {
                line,
                message: format!("slot `{s}` is used before it is loaded"),
            });
        }
        steps.push((line, step));
    }
    Ok(ScenarioScript { steps })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum StepResult {
    Ok,
    AssertionFailed(String),
    DeviceError(String),
}

impl fmt::Display for StepResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepResult::Ok => f.write_str("ok"),
            StepResult::AssertionFailed(d) => write!(f, "FAIL {d}"),
            StepResult::DeviceError(d) => write!(f, "ERROR {d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub line: usize,
    pub step: String,
    pub slot: Option<String>,
    pub cycle: u64,
    pub result: StepResult,
    pub modeled_us: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub steps: Vec<StepReport>,
    pub effects: Vec<Effect>,
}

impl ScenarioReport {
    pub fn assertion_failures(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s.result, StepResult::AssertionFailed(_)))
            .count()
    }

    pub fn device_errors(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s.result, StepResult::DeviceError(_)))
            .count()
    }

    pub fn passed(&self) -> bool {
        self.assertion_failures() == 0 && self.device_errors() == 0
    }

    pub fn first_failure(&self) -> Option<&StepReport> {
        self.steps.iter().find(|s| s.result != StepResult::Ok)
    }

    pub fn total_modeled_us(&self) -> f64 {
        self.steps.iter().filter_map(|s| s.modeled_us).sum()
    }

    /// One line per step.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let timing = s
                .modeled_us
                .map_or(String::new(), |us| format!(" modeled_us={us:.1}"));
            let note = if s.note.is_empty() {
                String::new()
            } else {
                format!(" ({})", s.note)
            };
            out.push_str(&format!(
                "line {:>3}  {:<8} {:<12} cycle={:<6} {}{}{}\n",
                s.line,
                s.step,
                s.slot.as_deref().unwrap_or("-"),
                s.cycle,
                s.result,
                timing,
                note
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Tracked {
    kind: TenantKind,
    params: TenantParams,
    state: TenantState,
    halted: bool,
    has_lut: bool,
}

/// Runs scenario steps on a device, keeping oracle expectations for every
/// loaded tenant across save, restore and blank.
pub struct ScenarioRunner {
    dev: DeviceModel,
    store: DramStore,
    opts: ControllerOptions,
    update: bool,
    tracked: BTreeMap<String, Tracked>,
    saved: BTreeMap<String, TenantState>,
}

impl ScenarioRunner {
    /// Takes a freshly configured device and starts its clock.
    pub fn new(mut dev: DeviceModel, opts: ControllerOptions) -> Self {
        clock_enable(&mut dev);
        let store = DramStore::for_device(&dev);
        ScenarioRunner {
            dev,
            store,
            opts,
            update: false,
            tracked: BTreeMap::new(),
            saved: BTreeMap::new(),
        }
    }

    pub fn device(&self) -> &DeviceModel {
        &self.dev
    }

    pub fn store(&self) -> &DramStore {
        &self.store
    }

    /// Oracle expectation for a slot.
    pub fn expected(&self, slot: &str) -> Option<&TenantState> {
        self.tracked.get(slot).map(|t| &t.state)
    }

    pub fn run(&mut self, script: &ScenarioScript) -> ScenarioReport {
        let start = self.dev.effects().len();
        let steps = script
            .steps
            .iter()
            .map(|(line, step)| self.run_step(*line, step))
            .collect();
        ScenarioReport {
            steps,
            effects: self.dev.effects()[start..].to_vec(),
        }
    }

    fn run_step(&mut self, line: usize, step: &Step) -> StepReport {
        let before = self.dev.effects().len();
        let (mut result, modeled_us, note) = match self.execute(step) {
            Ok((us, note)) => (StepResult::Ok, us, note),
            Err(r) => (r, None, String::new()),
        };
        let freezes: Vec<String> = self.dev.effects()[before..]
            .iter()
            .filter(|e| matches!(e, Effect::FabricFreeze { .. }))
            .map(|e| e.to_string())
            .collect();
        if result == StepResult::Ok && !freezes.is_empty() {
            result = StepResult::DeviceError(freezes.join("; "));
        }
        StepReport {
            line,
            step: step.name().to_string(),
            slot: step.slot(),
            cycle: self.dev.cycle(),
            result,
            modeled_us,
            note,
        }
    }

    fn execute(&mut self, step: &Step) -> Result<(Option<f64>, String), StepResult> {
        let device_err = |e: &dyn fmt::Display| StepResult::DeviceError(e.to_string());
        match step {
            Step::Load(design) => {
                load_design(&mut self.dev, design).map_err(|e| device_err(&e))?;
                set_update(&mut self.dev, &design.slot_id, self.update)
                    .map_err(|e| device_err(&e))?;
                let has_lut = self
                    .dev
                    .slot_cells(&design.slot_id)
                    .iter()
                    .any(|&c| self.dev.cells()[c].element_kind == ElementKind::LutRam);
                let state = initial_state(design.kind, &design.params);
                let note = state.to_string();
                self.tracked.insert(
                    design.slot_id.clone(),
                    Tracked {
                        kind: design.kind,
                        params: design.params.clone(),
                        state,
                        halted: false,
                        has_lut,
                    },
                );
                Ok((None, note))
            }
            Step::Tick { cycles, update } => {
                if let Some(u) = update {
                    self.update = *u;
                    for slot in self.tracked.keys() {
                        set_update(&mut self.dev, slot, *u).map_err(|e| device_err(&e))?;
                    }
                }
                let running = self.dev.clock_running();
                self.dev.step_clock(*cycles);
                if running {
                    for t in self.tracked.values_mut().filter(|t| !t.halted) {
                        t.state = oracle_replay(t.kind, &t.params, &t.state, *cycles, self.update);
                    }
                }
                Ok((None, String::new()))
            }
            Step::Save(slot) => {
                let snapshot = context_save(&mut self.dev, slot, &mut self.store, &self.opts)
                    .map_err(|e| device_err(&e))?;
                let n = snapshot.frames().len();
                self.saved
                    .insert(slot.clone(), self.tracked[slot].state.clone());
                Ok((
                    Some(estimate_timing(&self.opts.timing, n, TimedOp::Save)),
                    format!("{n} frames"),
                ))
            }
            Step::Restore(slots) => {
                let mut snapshots = Vec::with_capacity(slots.len());
                for slot in slots {
                    if !self.saved.contains_key(slot) {
                        return Err(StepResult::DeviceError(format!(
                            "no saved context for `{slot}`"
                        )));
                    }
                    snapshots.push(self.store.read_snapshot(slot).map_err(|e| device_err(&e))?);
                }
                restore_many(&mut self.dev, &snapshots, &self.opts).map_err(|e| device_err(&e))?;
                for slot in slots {
                    let t = self.tracked.get_mut(slot).expect("loaded slot");
                    t.state = self.saved[slot].clone();
                    t.halted = false;
                }
                let n: usize = snapshots.iter().map(|s| s.frames().len()).sum();
                Ok((
                    Some(estimate_timing(&self.opts.timing, n, TimedOp::Restore)),
                    format!("{n} frames"),
                ))
            }
            Step::Blank(slot) => {
                blank_slot(&mut self.dev, slot, &self.opts).map_err(|e| device_err(&e))?;
                let t = self.tracked.get_mut(slot).expect("loaded slot");
                t.state = zero_state(&t.state);
                t.halted = t.has_lut;
                Ok((None, String::new()))
            }
            Step::Assert { slot, expect } => {
                let actual = read_state(&self.dev, slot).map_err(|e| device_err(&e))?;
                let tracked = &self.tracked[slot];
                match expect {
                    Expect::Value(v) if actual.value() == *v => Ok((None, actual.to_string())),
                    Expect::Value(v) => Err(StepResult::AssertionFailed(format!(
                        "expected 0x{v:X}, found {actual}"
                    ))),
                    Expect::Oracle if actual == tracked.state => Ok((None, actual.to_string())),
                    Expect::Oracle => Err(StepResult::AssertionFailed(format!(
                        "expected {}, found {actual}",
                        tracked.state
                    ))),
                }
            }
        }
    }
}

fn zero_state(like: &TenantState) -> TenantState {
    match like {
        TenantState::Register(_) => TenantState::Register(0),
        TenantState::Chain { words, .. } => TenantState::Chain {
            index: 0,
            words: vec![0; words.len()],
            acc: 0,
        },
    }
}

/// Parses and runs `text` on `dev`.
pub fn run_script(
    text: &str,
    dev: DeviceModel,
    opts: ControllerOptions,
) -> Result<ScenarioReport, ScriptError> {
    let script = parse_script(text)?;
    Ok(ScenarioRunner::new(dev, opts).run(&script))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_script("# c\nload slot0 up4\nfrobnicate slot0\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("unknown step"));
        let err = parse_script("save slot0\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(parse_script("load slot0 lfsr8 seed=0\n").is_err());
        assert!(parse_script("load slot0 up4\ntick x\n").is_err());
        assert!(parse_script("load slot0 up4\nassert slot0\n").is_err());
    }

    #[test]
    fn parses_all_steps() {
        let s = parse_script(
            "load s lfsr8 seed=0x5A taps=8,6,5,4\ntick 3 update=1\nsave s\nblank s\nrestore s\nassert s oracle\nassert s 0x10\n",
        )
        .unwrap();
        assert_eq!(s.steps.len(), 7);
        assert_eq!(
            s.steps[1].1,
            Step::Tick {
                cycles: 3,
                update: Some(true)
            }
        );
        assert_eq!(
            s.steps[6].1,
            Step::Assert {
                slot: "s".into(),
                expect: Expect::Value(0x10)
            }
        );
    }

    #[test]
    fn demo_counters_pass() {
        let report = run_script(
            DEMO_COUNTERS_SCRIPT,
            DeviceModel::demo(),
            ControllerOptions::default(),
        )
        .unwrap();
        assert!(report.passed(), "{}", report.render());
    }

    #[test]
    fn demo_counters_need_gsr() {
        let opts = ControllerOptions {
            pulse_gsr: false,
            ..ControllerOptions::default()
        };
        let report = run_script(DEMO_COUNTERS_SCRIPT, DeviceModel::demo(), opts).unwrap();
        assert!(!report.passed());
        let restore_line = DEMO_COUNTERS_SCRIPT
            .lines()
            .position(|l| l.starts_with("restore"))
            .unwrap()
            + 1;
        assert_eq!(report.first_failure().unwrap().line, restore_line + 1);
    }

    #[test]
    fn demo_bram_needs_fixup() {
        let report = run_script(
            DEMO_BRAM_SCRIPT,
            DeviceModel::demo(),
            ControllerOptions::default(),
        )
        .unwrap();
        assert!(report.passed(), "{}", report.render());
        let opts = ControllerOptions {
            bram_fixup: false,
            ..ControllerOptions::default()
        };
        let report = run_script(DEMO_BRAM_SCRIPT, DeviceModel::demo(), opts).unwrap();
        assert_eq!(
            report.first_failure().unwrap().slot.as_deref(),
            Some("slot0")
        );
        assert!(report
            .effects
            .iter()
            .any(|e| matches!(e, Effect::FrameReverted(_))));
    }

    #[test]
    fn blank_then_restore() {
        let script = "load slot0 lfsr8 seed=0x5A\ntick 10\nsave slot0\ntick 5\nblank slot0\nassert slot0 0x0\ntick 9\nassert slot0 oracle\nrestore slot0\nassert slot0 oracle\ntick 4\nassert slot0 oracle\n";
        let report = run_script(script, DeviceModel::demo(), ControllerOptions::default()).unwrap();
        assert!(report.passed(), "{}", report.render());
    }
}
