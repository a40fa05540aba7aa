//! Python bindings: device model, tenants, save/restore and the FAR codec.

use epoch_core::bitcodec::{self, Frame};
use epoch_core::epochctl::{
    self, blank_slot, build_readback_sequence, build_write_sequence, clock_enable, context_save,
    restore_many, ControllerOptions, DramStore, TimedOp, TimingModel,
};
use epoch_core::fabricsim::{format_trace, DeviceGeometry, DeviceModel, DEMO_CELLMAP};
use epoch_core::scenario;
use epoch_core::tenants::{self, TenantDesign, TenantKind};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(name = "FrameAddress", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyFrameAddress(bitcodec::FrameAddress);

#[pymethods]
impl PyFrameAddress {
    #[new]
    #[pyo3(signature = (block, bottom, row, column, minor))]
    fn new(block: &str, bottom: bool, row: u8, column: u16, minor: u8) -> PyResult<Self> {
        let block_type = bitcodec::BlockType::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(block))
            .ok_or_else(|| value_err(format!("unknown block type `{block}`")))?;
        let fa = bitcodec::FrameAddress {
            block_type,
            bottom_half: bottom,
            row,
            column,
            minor,
        };
        fa.encode().map_err(value_err)?;
        Ok(Self(fa))
    }

    #[staticmethod]
    fn decode(word: u32) -> PyResult<Self> {
        bitcodec::far_decode(word).map(Self).map_err(value_err)
    }

    fn encode(&self) -> PyResult<u32> {
        bitcodec::far_encode(&self.0).map_err(value_err)
    }

    #[getter]
    fn block(&self) -> &'static str {
        self.0.block_type.name()
    }

    #[getter]
    fn bottom(&self) -> bool {
        self.0.bottom_half
    }

    #[getter]
    fn row(&self) -> u8 {
        self.0.row
    }

    #[getter]
    fn column(&self) -> u16 {
        self.0.column
    }

    #[getter]
    fn minor(&self) -> u8 {
        self.0.minor
    }

    fn __repr__(&self) -> String {
        format!(
            "FrameAddress(block={}, bottom={}, row={}, column={}, minor={})",
            self.0.block_type.name(),
            self.0.bottom_half,
            self.0.row,
            self.0.column,
            self.0.minor
        )
    }
}

#[pyclass(name = "Snapshot", frozen, from_py_object)]
#[derive(Clone)]
struct PySnapshot(epochctl::Snapshot);

#[pymethods]
impl PySnapshot {
    #[getter]
    fn slot(&self) -> &str {
        self.0.slot_id()
    }

    #[getter]
    fn idcode(&self) -> u32 {
        self.0.idcode()
    }

    #[getter]
    fn cycle(&self) -> u64 {
        self.0.captured_at_cycle()
    }

    #[getter]
    fn frame_addresses(&self) -> Vec<u32> {
        self.0.frames().iter().map(|(f, _)| f.word()).collect()
    }

    fn frame(&self, far: u32) -> PyResult<Option<Vec<u32>>> {
        let far = bitcodec::far_decode(far).map_err(value_err)?;
        Ok(self.0.frame(&far).map(|f| f.words().to_vec()))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        epochctl::Snapshot::from_bytes(data)
            .map(Self)
            .map_err(value_err)
    }

    /// (far, word, bit) triples where the two snapshots differ.
    #[pyo3(signature = (other, include_crc_word=false))]
    fn diff(&self, other: &PySnapshot, include_crc_word: bool) -> PyResult<Vec<(u32, usize, u8)>> {
        let diffs =
            epochctl::diff_snapshots(&self.0, &other.0, include_crc_word).map_err(value_err)?;
        Ok(diffs
            .iter()
            .flat_map(|d| {
                d.bit_positions()
                    .into_iter()
                    .map(move |b| (d.far.word(), d.word, b))
            })
            .collect())
    }

    fn __len__(&self) -> usize {
        self.0.frames().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Snapshot(slot={:?}, cycle={}, frames={})",
            self.0.slot_id(),
            self.0.captured_at_cycle(),
            self.0.frames().len()
        )
    }
}

/// A modelled device with its DRAM store and controller options.
#[pyclass(name = "Device")]
struct PyDevice {
    dev: DeviceModel,
    store: DramStore,
    opts: ControllerOptions,
}

#[pymethods]
impl PyDevice {
    #[new]
    #[pyo3(signature = (geometry_toml=None, cellmap=None, bram_fixup=true, pulse_gsr=true))]
    fn new(
        geometry_toml: Option<&str>,
        cellmap: Option<&str>,
        bram_fixup: bool,
        pulse_gsr: bool,
    ) -> PyResult<Self> {
        let geometry = match geometry_toml {
            Some(t) => DeviceGeometry::from_toml_str(t).map_err(value_err)?,
            None => DeviceGeometry::demo(),
        };
        let cells =
            bitcodec::parse_logic_location(cellmap.unwrap_or(DEMO_CELLMAP)).map_err(value_err)?;
        let mut dev = DeviceModel::new(geometry, cells).map_err(value_err)?;
        clock_enable(&mut dev);
        let store = DramStore::for_device(&dev);
        Ok(Self {
            dev,
            store,
            opts: ControllerOptions {
                bram_fixup,
                pulse_gsr,
                ..ControllerOptions::default()
            },
        })
    }

    #[getter]
    fn idcode(&self) -> u32 {
        self.dev.idcode()
    }

    #[getter]
    fn cycle(&self) -> u64 {
        self.dev.cycle()
    }

    #[getter]
    fn slots(&self) -> Vec<String> {
        self.dev.slots()
    }

    #[pyo3(signature = (slot, kind, seed=None, chain_len=None))]
    fn load(
        &mut self,
        slot: &str,
        kind: &str,
        seed: Option<u32>,
        chain_len: Option<usize>,
    ) -> PyResult<()> {
        let kind: TenantKind = kind.parse().map_err(value_err)?;
        let mut design = TenantDesign::new(kind, slot);
        if let Some(s) = seed {
            design = design.with_seed(s);
        }
        if let Some(n) = chain_len {
            design = design.with_chain_len(n);
        }
        tenants::load_design(&mut self.dev, &design).map_err(value_err)
    }

    fn set_update(&mut self, slot: &str, asserted: bool) -> PyResult<()> {
        tenants::set_update(&mut self.dev, slot, asserted).map_err(value_err)
    }

    fn step(&mut self, cycles: u64) {
        self.dev.step_clock(cycles);
    }

    /// Register value of a tenant; for the chain, its accumulator.
    fn state(&self, slot: &str) -> PyResult<u32> {
        tenants::read_state(&self.dev, slot)
            .map(|s| s.value())
            .map_err(value_err)
    }

    fn halted(&self, slot: &str) -> bool {
        tenants::is_halted(&self.dev, slot)
    }

    fn save(&mut self, slot: &str) -> PyResult<PySnapshot> {
        context_save(&mut self.dev, slot, &mut self.store, &self.opts)
            .map(PySnapshot)
            .map_err(runtime_err)
    }

    /// Restores one or more snapshots behind a single global set/reset.
    fn restore(&mut self, snapshots: Vec<PySnapshot>) -> PyResult<()> {
        let snaps: Vec<_> = snapshots.into_iter().map(|s| s.0).collect();
        restore_many(&mut self.dev, &snaps, &self.opts).map_err(runtime_err)
    }

    fn blank(&mut self, slot: &str) -> PyResult<()> {
        blank_slot(&mut self.dev, slot, &self.opts).map_err(runtime_err)
    }

    fn gsr_pulse(&mut self) -> usize {
        self.dev.gsr_pulse()
    }

    fn write_frame(&mut self, far: u32, words: Vec<u32>) -> PyResult<()> {
        let far = bitcodec::far_decode(far).map_err(value_err)?;
        let frame = Frame::from_words(&words).map_err(value_err)?;
        let seq =
            build_write_sequence(&far, &[frame], &far, self.dev.idcode()).map_err(value_err)?;
        self.dev
            .pcap_write(&seq.words())
            .map(|_| ())
            .map_err(runtime_err)
    }

    #[pyo3(signature = (far, unmask_luts=true, capture=true))]
    fn read_frame(&mut self, far: u32, unmask_luts: bool, capture: bool) -> PyResult<Vec<u32>> {
        let far = bitcodec::far_decode(far).map_err(value_err)?;
        epochctl::read_frame(&mut self.dev, &far, unmask_luts, capture)
            .map(|f| f.words().to_vec())
            .map_err(runtime_err)
    }

    fn pcap_write(&mut self, words: Vec<u32>) -> PyResult<()> {
        self.dev.pcap_write(&words).map(|_| ()).map_err(runtime_err)
    }

    fn config_frame(&self, far: u32) -> PyResult<Vec<u32>> {
        let far = bitcodec::far_decode(far).map_err(value_err)?;
        Ok(self.dev.config_frame(&far).words().to_vec())
    }

    fn trace(&self) -> String {
        format_trace(self.dev.effects())
    }
}

/// Template dump of a readback or write sequence starting at `far`.
#[pyfunction]
#[pyo3(signature = (kind, far, frames=1))]
fn template(kind: &str, far: u32, frames: usize) -> PyResult<String> {
    let fa = bitcodec::far_decode(far).map_err(value_err)?;
    let seq = match kind {
        "readback" => build_readback_sequence(&fa, frames, true, true),
        "write" => build_write_sequence(
            &fa,
            &vec![Frame::zeroed(); frames],
            &fa,
            DeviceGeometry::demo().idcode,
        ),
        other => return Err(value_err(format!("unknown template kind `{other}`"))),
    }
    .map_err(value_err)?;
    Ok(seq.template())
}

#[pyfunction]
fn golden_check(template: &str, golden: &str) -> PyResult<()> {
    epochctl::golden_check(template, golden).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (frames, op, clock_hz=None))]
fn estimate_timing(frames: usize, op: &str, clock_hz: Option<f64>) -> PyResult<f64> {
    let op = match op {
        "save" => TimedOp::Save,
        "restore" => TimedOp::Restore,
        other => return Err(value_err(format!("unknown operation `{other}`"))),
    };
    let tm = clock_hz.map_or_else(TimingModel::default, |hz| {
        TimingModel::default().at_clock(hz)
    });
    tm.validate().map_err(value_err)?;
    Ok(epochctl::estimate_timing(&tm, frames, op))
}

#[pyfunction]
fn bram_fixup_words() -> Vec<usize> {
    epochctl::bram_fixup_words().into_iter().collect()
}

/// Runs a scenario script on a fresh demo device; returns (passed, report).
#[pyfunction]
#[pyo3(signature = (text, bram_fixup=true, pulse_gsr=true, blank_before_restore=false))]
fn run_script(
    text: &str,
    bram_fixup: bool,
    pulse_gsr: bool,
    blank_before_restore: bool,
) -> PyResult<(bool, String)> {
    let opts = ControllerOptions {
        bram_fixup,
        pulse_gsr,
        blank_before_restore,
        ..ControllerOptions::default()
    };
    let report = scenario::run_script(text, DeviceModel::demo(), opts).map_err(value_err)?;
    Ok((report.passed(), report.render()))
}

#[pymodule]
fn epoch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrameAddress>()?;
    m.add_class::<PySnapshot>()?;
    m.add_class::<PyDevice>()?;
    m.add_function(wrap_pyfunction!(template, m)?)?;
    m.add_function(wrap_pyfunction!(golden_check, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_timing, m)?)?;
    m.add_function(wrap_pyfunction!(bram_fixup_words, m)?)?;
    m.add_function(wrap_pyfunction!(run_script, m)?)?;
    m.add("DEMO_COUNTERS_SCRIPT", scenario::DEMO_COUNTERS_SCRIPT)?;
    Ok(())
}
