use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use epoch_core::bitcodec::packet::type2_header;
use epoch_core::bitcodec::{parse_logic_location, Frame, FrameAddress, Opcode, FRAME_WORDS};
use epoch_core::epochctl::{
    build_readback_sequence, build_write_sequence, golden_check, ControllerOptions, TimingModel,
};
use epoch_core::fabricsim::{format_trace, DeviceGeometry, DeviceModel, DEMO_CELLMAP};
use epoch_core::scenario::{run_script, ScenarioReport, DEMO_BRAM_SCRIPT, DEMO_COUNTERS_SCRIPT};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "epoch",
    version,
    about = "Save and restore tenant context on a modelled fabric"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Device geometry TOML (defaults to the bundled demo device).
    #[arg(long, global = true)]
    geometry: Option<PathBuf>,
    /// Logic location file mapping cells to frame bits.
    #[arg(long, global = true)]
    cellmap: Option<PathBuf>,
    /// Configuration port clock in Hz.
    #[arg(long, global = true)]
    clock_hz: Option<f64>,
    /// Store BRAM frames exactly as read back.
    #[arg(long, global = true)]
    no_bram_fixup: bool,
    /// Write frames back without pulsing global set/reset.
    #[arg(long, global = true)]
    skip_gsr: bool,
    /// Zero a slot's frames before restoring it.
    #[arg(long, global = true)]
    blank_before_restore: bool,
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Leave the wall-clock start time out of reports.
    #[arg(long, global = true)]
    no_timestamps: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the two-counter save/restore scenario.
    DemoCounters,
    /// Run the BRAM chain and LFSR scenario.
    DemoBram,
    /// Print the fields of a frame address word.
    DecodeFar { word: String },
    /// Print the command sequence for reading or writing frames.
    GenTemplate {
        #[arg(long, value_enum)]
        kind: TemplateKind,
        #[arg(long, default_value = "0x0042011E")]
        far: String,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        /// Compare against a golden file; exit non-zero on any mismatch.
        #[arg(long)]
        golden_check: Option<PathBuf>,
    },
    /// Run a scenario script.
    RunScript { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateKind {
    Readback,
    Write,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Cmd::DemoCounters => scenario(cli, DEMO_COUNTERS_SCRIPT),
        Cmd::DemoBram => scenario(cli, DEMO_BRAM_SCRIPT),
        Cmd::RunScript { path } => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            scenario(cli, &text)
        }
        Cmd::DecodeFar { word } => decode_far(cli, word),
        Cmd::GenTemplate {
            kind,
            far,
            frames,
            golden_check,
        } => gen_template(*kind, far, *frames, golden_check.as_deref()),
    }
}

fn device(cli: &Cli) -> Result<DeviceModel> {
    let geometry = match &cli.geometry {
        Some(p) => DeviceGeometry::from_toml_str(&read(p)?)?,
        None => DeviceGeometry::demo(),
    };
    let cells_text = match &cli.cellmap {
        Some(p) => read(p)?,
        None => DEMO_CELLMAP.to_string(),
    };
    let cells = parse_logic_location(&cells_text)?;
    let mut dev = DeviceModel::new(geometry, cells)?;
    if let Some(hz) = cli.clock_hz {
        dev.set_port_clock_hz(hz);
    }
    Ok(dev)
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn options(cli: &Cli) -> Result<ControllerOptions> {
    let mut timing = TimingModel::default();
    if let Some(hz) = cli.clock_hz {
        timing = timing.at_clock(hz);
    }
    timing.validate().map_err(anyhow::Error::msg)?;
    Ok(ControllerOptions {
        bram_fixup: !cli.no_bram_fixup,
        pulse_gsr: !cli.skip_gsr,
        blank_before_restore: cli.blank_before_restore,
        timing,
        ..ControllerOptions::default()
    })
}

fn started_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn scenario(cli: &Cli, script: &str) -> Result<bool> {
    let opts = options(cli)?;
    let report = run_script(script, device(cli)?, opts)?;
    let started = (!cli.no_timestamps).then(started_unix);
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report_json(&report, started))?
        );
    } else {
        print!("{}", render_text(&report, started));
    }
    if let Some(step) = report.first_failure() {
        eprintln!(
            "first failure at line {}: {} {}",
            step.line, step.step, step.result
        );
    }
    Ok(report.passed())
}

fn render_text(report: &ScenarioReport, started: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(t) = started {
        out.push_str(&format!("started_unix={t}\n"));
    }
    out.push_str(&report.render());
    out.push_str(&format!(
        "assertion_failures={} device_errors={} modeled_us={:.1}\n",
        report.assertion_failures(),
        report.device_errors(),
        report.total_modeled_us()
    ));
    out.push_str("trace:\n");
    for line in format_trace(&report.effects).lines() {
        out.push_str(&format!("  {line}\n"));
    }
    out
}

fn report_json(report: &ScenarioReport, started: Option<u64>) -> serde_json::Value {
    let mut v = json!({
        "steps": report.steps,
        "assertion_failures": report.assertion_failures(),
        "device_errors": report.device_errors(),
        "passed": report.passed(),
        "modeled_us": report.total_modeled_us(),
        "trace": format_trace(&report.effects).lines().collect::<Vec<_>>(),
    });
    if let Some(t) = started {
        v["started_unix"] = json!(t);
    }
    v
}

fn decode_far(cli: &Cli, word: &str) -> Result<bool> {
    let far: FrameAddress = word.parse()?;
    if cli.json {
        let v = json!({
            "word": format!("0x{:08X}", far.word()),
            "block": far.block_type.name(),
            "bottom": far.bottom_half,
            "row": far.row,
            "column": far.column,
            "minor": far.minor,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("word=0x{:08X}", far.word());
        println!("block={}", far.block_type.name());
        println!("bottom={}", u8::from(far.bottom_half));
        println!("row={}", far.row);
        println!("column={}", far.column);
        println!("minor={}", far.minor);
    }
    Ok(true)
}

fn gen_template(kind: TemplateKind, far: &str, n: usize, golden: Option<&Path>) -> Result<bool> {
    let far: FrameAddress = far.parse()?;
    if n == 0 {
        bail!("--frames must be at least 1");
    }
    let seq = match kind {
        TemplateKind::Readback => build_readback_sequence(&far, n, true, true)?,
        TemplateKind::Write => {
            // Check the count before allocating the frames.
            type2_header(Opcode::Write, (n as u64 + 1) * FRAME_WORDS as u64)?;
            let frames = vec![Frame::zeroed(); n];
            build_write_sequence(&far, &frames, &far, DeviceGeometry::demo().idcode)?
        }
    };
    let template = seq.template();
    match golden {
        None => {
            print!("{template}");
            Ok(true)
        }
        Some(p) => match golden_check(&template, &read(p)?) {
            Ok(()) => {
                println!("golden match: {}", p.display());
                Ok(true)
            }
            Err(e) => {
                println!("golden mismatch: {e}");
                Ok(false)
            }
        },
    }
}
