//! TOML run configuration.
//!
//! Quantities accept either a bare number in the documented unit or a string
//! with an explicit unit: times `"85 fs"`, `"0.2 ps"`; energies `"7 meV"`,
//! `"0.007 eV"`; angles `"1.1 pi"`, `"0.5 rad"` (bare numbers are rad).
//! Omitted system fields take the reference-model defaults. Unknown keys are
//! rejected.

use std::f64::consts::PI;
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};
use vlevel_core::analysis::PeakLabel;
use vlevel_core::phase_cycle::PhaseCycleScheme;
use vlevel_core::twodcs::{DelayGrid, Detection, RephasingSetup};
use vlevel_core::{DurationConvention, FieldMode, RateConvention, SolverOptions, SystemParams};

use crate::error::{Error, Result};
use crate::spectrum::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Time,
    Energy,
    Angle,
    Rate,
}

fn parse_quantity(s: &str, dim: Dim) -> std::result::Result<f64, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(s.len());
    // "1e" would swallow the unit's leading letter in "1eV"
    let (num, unit) = s.split_at(split);
    let unit = unit.trim();
    let value: f64 = if num.is_empty() && matches!(unit, "pi" | "π") {
        1.0
    } else {
        num.parse().map_err(|_| format!("cannot parse {s:?} as a number with unit"))?
    };
    let factor = match (dim, unit) {
        (Dim::Time, "fs" | "") => 1.0,
        (Dim::Time, "ps") => 1e3,
        (Dim::Energy, "meV" | "") => 1.0,
        (Dim::Energy, "eV") => 1e3,
        (Dim::Angle, "rad" | "") => 1.0,
        (Dim::Angle, "pi" | "π") => PI,
        (Dim::Rate, "1/fs" | "") => 1.0,
        (Dim::Rate, "1/ps") => 1e-3,
        (d, u) => {
            let expected = match d {
                Dim::Time => "fs or ps",
                Dim::Energy => "meV or eV",
                Dim::Angle => "rad or pi",
                Dim::Rate => "1/fs or 1/ps",
            };
            return Err(format!("unit violation: {u:?} is not a unit of {d:?} (expected {expected})"));
        }
    };
    Ok(value * factor)
}

struct QuantityVisitor(Dim);

impl<'de> Visitor<'de> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number or a string with a {:?} unit", self.0)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

macro_rules! quantity {
    ($name:ident, $dim:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq, Serialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                d.deserialize_any(QuantityVisitor($dim)).map($name)
            }
        }
    };
}

quantity!(Fs, Dim::Time);
quantity!(MeV, Dim::Energy);
quantity!(Rad, Dim::Angle);
quantity!(PerFs, Dim::Rate);

/// Either an explicit list of angles or `{ start, stop, step }` (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AngleGrid(pub Vec<f64>);

impl AngleGrid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        AngleGrid(vlevel_core::single_pulse::area_grid(start, stop, step))
    }
}

impl<'de> Deserialize<'de> for AngleGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = AngleGrid;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of angles or a table {start, stop, step}")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<AngleGrid, A::Error> {
                let mut v = Vec::new();
                while let Some(Rad(x)) = seq.next_element()? {
                    v.push(x);
                }
                Ok(AngleGrid(v))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<AngleGrid, A::Error> {
                let (mut start, mut stop, mut step) = (None, None, None);
                while let Some(key) = map.next_key::<String>()? {
                    let slot = match key.as_str() {
                        "start" => &mut start,
                        "stop" => &mut stop,
                        "step" => &mut step,
                        other => return Err(de::Error::unknown_field(other, &["start", "stop", "step"])),
                    };
                    *slot = Some(map.next_value::<Rad>()?.0);
                }
                let start = start.ok_or_else(|| de::Error::missing_field("start"))?;
                let stop = stop.ok_or_else(|| de::Error::missing_field("stop"))?;
                let step = step.ok_or_else(|| de::Error::missing_field("step"))?;
                if !(step > 0.0) || stop < start {
                    return Err(de::Error::custom("grid needs step > 0 and stop >= start"));
                }
                Ok(AngleGrid::range(start, stop, step))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub delta: MeV,
    pub gamma01: MeV,
    pub gamma02: MeV,
    pub gamma12: MeV,
    pub gamma1: MeV,
    pub gamma2: MeV,
    pub mu01: f64,
    pub mu_ratio: f64,
    pub laser_detuning1: MeV,
    pub rate_convention: RateName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateName {
    Angular,
    Cyclic,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            delta: MeV(p.delta),
            gamma01: MeV(p.gamma01),
            gamma02: MeV(p.gamma02),
            gamma12: MeV(p.gamma12),
            gamma1: MeV(p.gamma1),
            gamma2: MeV(p.gamma2),
            mu01: p.mu01,
            mu_ratio: p.mu_ratio,
            laser_detuning1: MeV(p.laser_detuning1),
            rate_convention: match p.rate_convention {
                RateConvention::Angular => RateName::Angular,
                RateConvention::Cyclic => RateName::Cyclic,
            },
        }
    }
}

impl SystemSection {
    pub fn params(&self) -> SystemParams {
        SystemParams {
            delta: self.delta.0,
            gamma01: self.gamma01.0,
            gamma02: self.gamma02.0,
            gamma12: self.gamma12.0,
            gamma1: self.gamma1.0,
            gamma2: self.gamma2.0,
            mu01: self.mu01,
            mu_ratio: self.mu_ratio,
            laser_detuning1: self.laser_detuning1.0,
            rate_convention: match self.rate_convention {
                RateName::Angular => RateConvention::Angular,
                RateName::Cyclic => RateConvention::Cyclic,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldName {
    RotatingWave,
    FullField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: Option<Fs>,
    /// Pulse windows extend this many envelope FWHMs either side of the centre.
    pub pulse_padding: f64,
    pub field: FieldName,
    /// Laser carrier photon energy, required for `full_field`.
    pub carrier: Option<MeV>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            abs_tol: o.abs_tol,
            rel_tol: o.rel_tol,
            max_step: o.max_step.map(Fs),
            pulse_padding: o.pulse_padding,
            field: FieldName::RotatingWave,
            carrier: None,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> Result<SolverOptions> {
        let mode = match (self.field, self.carrier) {
            (FieldName::RotatingWave, _) => FieldMode::RotatingWave,
            (FieldName::FullField, Some(c)) => FieldMode::FullField { carrier: c.0 },
            (FieldName::FullField, None) => {
                return Err(Error::config("solver.carrier", "required when field = \"full_field\""))
            }
        };
        Ok(SolverOptions {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_step: self.max_step.map(|s| s.0),
            pulse_padding: self.pulse_padding,
            mode,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DurationName {
    FieldFwhm,
    IntensityFwhm,
    #[default]
    FieldHwhm,
}

impl From<DurationName> for DurationConvention {
    fn from(d: DurationName) -> Self {
        match d {
            DurationName::FieldFwhm => DurationConvention::FieldFwhm,
            DurationName::IntensityFwhm => DurationConvention::IntensityFwhm,
            DurationName::FieldHwhm => DurationConvention::FieldHwhm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectionName {
    #[default]
    Population,
    EmissionWeighted,
}

/// Settings shared by every two-dimensional experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoDSection {
    pub fwhm: Fs,
    pub duration_convention: DurationName,
    pub population_time: Fs,
    pub points: usize,
    pub step: Fs,
    pub zero_pad: usize,
    /// Exponential apodisation rate; absent means no window.
    pub window_rate: Option<PerFs>,
    pub detection: DetectionName,
    pub phase_steps: [usize; 4],
    pub signature: [i32; 4],
    /// Peak search half-width; absent means Δ/3.
    pub peak_halfwidth: Option<MeV>,
}

impl Default for TwoDSection {
    fn default() -> Self {
        let s = PhaseCycleScheme::default();
        Self {
            fwhm: Fs(DEFAULT_FWHM),
            duration_convention: DurationName::default(),
            population_time: Fs(DEFAULT_POPULATION_TIME),
            points: 64,
            step: Fs(40.0),
            zero_pad: 2,
            window_rate: None,
            detection: DetectionName::Population,
            phase_steps: s.steps,
            signature: s.signature,
            peak_halfwidth: None,
        }
    }
}

/// Nominal pulse duration of the reference experiments, fs.
pub const DEFAULT_FWHM: f64 = 85.0;

/// Population time of the reference experiments, fs; close to one beat
/// period `h/Δ` of the excited-state coherence for Δ = 7 meV.
pub const DEFAULT_POPULATION_TIME: f64 = 600.0;

impl TwoDSection {
    pub fn grid(&self) -> DelayGrid {
        DelayGrid::square(self.points, self.step.0, self.population_time.0)
    }

    pub fn window(&self) -> Window {
        self.window_rate.map_or(Window::None, |r| Window::Exponential { rate: r.0 })
    }

    pub fn setup(&self, areas: [f64; 4]) -> RephasingSetup {
        let mut s = RephasingSetup::new(areas, self.fwhm.0, self.population_time.0);
        s.duration = self.duration_convention.into();
        s.scheme = PhaseCycleScheme {
            steps: self.phase_steps,
            signature: self.signature,
        };
        s.detection = match self.detection {
            DetectionName::Population => Detection::Population,
            DetectionName::EmissionWeighted => Detection::EmissionWeighted,
        };
        s
    }

    /// Integrations needed for one spectrum.
    pub fn integrations_per_spectrum(&self) -> u64 {
        let combos: usize = self.phase_steps.iter().product();
        (self.points * self.points * combos) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingleSweep {
    pub fwhm: Fs,
    pub duration_convention: DurationName,
    pub theta: AngleGrid,
}

impl Default for SingleSweep {
    fn default() -> Self {
        Self {
            fwhm: Fs(DEFAULT_FWHM),
            duration_convention: DurationName::default(),
            theta: AngleGrid::range(0.0, 2.5 * PI, 0.01 * PI),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumExperiment {
    pub areas: [Rad; 4],
}

impl Default for SpectrumExperiment {
    fn default() -> Self {
        Self { areas: [Rad(0.1 * PI); 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Theta1Scan {
    pub theta1: AngleGrid,
    /// Θ2, Θ3, Θ4.
    pub fixed: [Rad; 3],
}

impl Default for Theta1Scan {
    fn default() -> Self {
        Self {
            theta1: AngleGrid::range(0.1 * PI, 2.5 * PI, 0.1 * PI),
            fixed: [Rad(0.1 * PI); 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSearch {
    pub theta1: AngleGrid,
    pub theta2: AngleGrid,
    pub theta3: AngleGrid,
    pub theta4: Rad,
    /// Upper bound on single-train integrations.
    pub budget: u64,
}

impl Default for ControlSearch {
    fn default() -> Self {
        let g = AngleGrid::range(0.5 * PI, 2.1 * PI, 0.1 * PI);
        Self {
            theta1: g.clone(),
            theta2: g.clone(),
            theta3: g,
            theta4: Rad(0.1 * PI),
            budget: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseMapExperiment {
    pub peak: String,
    pub theta1: AngleGrid,
    pub theta2: Rad,
    pub theta3: Rad,
    pub theta4: Rad,
    pub threshold: f64,
}

impl Default for PhaseMapExperiment {
    fn default() -> Self {
        Self {
            peak: "P4".into(),
            theta1: AngleGrid::range(0.5 * PI, 2.1 * PI, 0.1 * PI),
            theta2: Rad(0.9 * PI),
            theta3: Rad(0.9 * PI),
            theta4: Rad(0.1 * PI),
            threshold: 0.7,
        }
    }
}

impl PhaseMapExperiment {
    pub fn label(&self) -> Result<PeakLabel> {
        PeakLabel::parse(&self.peak).ok_or_else(|| Error::config("experiment.phase_map.peak", "must be one of P1, P2, P3, P4"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SingleSweep(SingleSweep),
    Spectrum(SpectrumExperiment),
    Theta1Scan(Theta1Scan),
    ControlSearch(ControlSearch),
    PhaseMap(PhaseMapExperiment),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SingleSweep(_) => "single_sweep",
            Experiment::Spectrum(_) => "spectrum",
            Experiment::Theta1Scan(_) => "theta1_scan",
            Experiment::ControlSearch(_) => "control_search",
            Experiment::PhaseMap(_) => "phase_map",
        }
    }

    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "single_sweep" => Experiment::SingleSweep(Default::default()),
            "spectrum" => Experiment::Spectrum(Default::default()),
            "theta1_scan" => Experiment::Theta1Scan(Default::default()),
            "control_search" => Experiment::ControlSearch(Default::default()),
            "phase_map" => Experiment::PhaseMap(Default::default()),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Grid,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn grid(self) -> bool {
        matches!(self, OutputFormat::Grid | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "vlevel-out".into(),
            format: OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Worker threads; absent means available parallelism.
    pub workers: Option<usize>,
    pub system: SystemSection,
    pub solver: SolverSection,
    pub twod: TwoDSection,
    pub experiment: Option<Experiment>,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn params(&self) -> SystemParams {
        self.system.params()
    }

    /// Checks everything that can be checked without computing. Errors name
    /// the offending key.
    pub fn validate(&self) -> Result<()> {
        let params = self.params();
        params.validate().map_err(|e| core_key("system", e))?;
        self.solver.options()?.validate().map_err(|e| core_key("solver", e))?;
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be >= 1"));
        }
        let Some(exp) = &self.experiment else {
            return Ok(());
        };
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be > 0, got {v}")))
            }
        };
        let areas_ok = |key: &str, g: &[f64]| {
            if g.is_empty() {
                return Err(Error::config(key, "grid is empty"));
            }
            if g.iter().any(|a| !(*a >= 0.0 && *a <= 4.0 * PI)) {
                return Err(Error::config(key, "pulse areas must lie in [0, 4 pi]"));
            }
            if g.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config(key, "grid must be strictly increasing"));
            }
            Ok(())
        };
        if let Experiment::SingleSweep(s) = exp {
            positive("experiment.single_sweep.fwhm", s.fwhm.0)?;
            areas_ok("experiment.single_sweep.theta", &s.theta.0)?;
            return Ok(());
        }
        let t = &self.twod;
        positive("twod.fwhm", t.fwhm.0)?;
        positive("twod.step", t.step.0)?;
        if t.population_time.0 < 0.0 {
            return Err(Error::config("twod.population_time", "must be >= 0"));
        }
        if t.points < 2 {
            return Err(Error::config("twod.points", "need at least 2 points per axis"));
        }
        if t.zero_pad == 0 {
            return Err(Error::config("twod.zero_pad", "must be >= 1"));
        }
        if let Some(r) = t.window_rate {
            if !(r.0 >= 0.0) {
                return Err(Error::config("twod.window_rate", "must be >= 0"));
            }
        }
        t.grid().validate(&params).map_err(|e| match e {
            vlevel_core::Error::InvalidParameter { reason, .. } => Error::config("twod.step", reason),
            other => core_key("twod", other),
        })?;
        t.setup([0.0; 4]).scheme.validate().map_err(|e| core_key("twod.phase_steps", e))?;
        let hw = t.peak_halfwidth.map_or(params.delta / 3.0, |h| h.0);
        if !(hw > 0.0) || 2.0 * hw >= params.delta {
            return Err(Error::config(
                "twod.peak_halfwidth",
                format!("{hw} meV windows overlap for delta = {} meV", params.delta),
            ));
        }
        let span = vlevel_core::PLANCK / (2.0 * t.step.0);
        if span <= params.delta + hw {
            return Err(Error::config(
                "twod.step",
                format!("spectral range ±{span:.1} meV does not contain the peak windows"),
            ));
        }
        let area = |key: &str, a: f64| areas_ok(key, &[a]);
        match exp {
            Experiment::SingleSweep(_) => unreachable!(),
            Experiment::Spectrum(s) => {
                for a in s.areas {
                    area("experiment.spectrum.areas", a.0)?;
                }
            }
            Experiment::Theta1Scan(s) => {
                areas_ok("experiment.theta1_scan.theta1", &s.theta1.0)?;
                for a in s.fixed {
                    area("experiment.theta1_scan.fixed", a.0)?;
                }
            }
            Experiment::ControlSearch(s) => {
                areas_ok("experiment.control_search.theta1", &s.theta1.0)?;
                areas_ok("experiment.control_search.theta2", &s.theta2.0)?;
                areas_ok("experiment.control_search.theta3", &s.theta3.0)?;
                area("experiment.control_search.theta4", s.theta4.0)?;
            }
            Experiment::PhaseMap(s) => {
                s.label()?;
                areas_ok("experiment.phase_map.theta1", &s.theta1.0)?;
                area("experiment.phase_map.theta2", s.theta2.0)?;
                area("experiment.phase_map.theta3", s.theta3.0)?;
                area("experiment.phase_map.theta4", s.theta4.0)?;
                if !(s.threshold > 0.0 && s.threshold <= 1.0) {
                    return Err(Error::config("experiment.phase_map.threshold", "must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

fn core_key(section: &str, e: vlevel_core::Error) -> Error {
    match e {
        vlevel_core::Error::InvalidParameter { name, reason } => Error::config(format!("{section}.{name}"), reason),
        other => Error::config(section, other.to_string()),
    }
}

/// Parses and validates a configuration. Errors carry the offending key and,
/// when it appears in `text`, its line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| 1 + text[..s.start.min(text.len())].matches('\n').count());
        let message = e.message().to_string();
        let key = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
            .map(String::from);
        Error::Config { key, line, message }
    })?;
    cfg.validate().map_err(|e| match e {
        Error::Config { key: Some(key), line: None, message } => {
            let line = locate_key(text, &key);
            Error::Config {
                key: Some(key),
                line,
                message,
            }
        }
        other => other,
    })?;
    Ok(cfg)
}

/// Line (1-based) where a dotted key is assigned, for the common layouts
/// `[a.b]\nkey = …` and `[a]\nb.key = …`.
pub fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        let k = k.trim().trim_matches('"');
        let full = if table.is_empty() { k.to_string() } else { format!("{table}.{k}") };
        if full == dotted {
            return Some(i + 1);
        }
    }
    // fall back to the table header itself
    let (parent, _) = dotted.rsplit_once('.')?;
    text.lines()
        .position(|l| l.trim() == format!("[{parent}]"))
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_reference_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.params(), SystemParams::default());
        let c = parse_config("[system]\n").unwrap();
        assert_eq!(c.params(), SystemParams::default());
    }

    #[test]
    fn quantities_with_units() {
        assert_eq!(parse_quantity("85 fs", Dim::Time).unwrap(), 85.0);
        assert_eq!(parse_quantity("0.2ps", Dim::Time).unwrap(), 200.0);
        assert_eq!(parse_quantity("0.007 eV", Dim::Energy).unwrap(), 7.0);
        assert!((parse_quantity("1.1 pi", Dim::Angle).unwrap() - 1.1 * PI).abs() < 1e-15);
        assert_eq!(parse_quantity("pi", Dim::Angle).unwrap(), PI);
        let e = parse_quantity("85 meV", Dim::Time).unwrap_err();
        assert!(e.contains("unit violation"), "{e}");
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let err = parse_config("[system]\ndelta = 7.0\ndelat = 3\n").unwrap_err();
        match err {
            Error::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("delat"));
                assert_eq!(line, Some(3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_fwhm_names_field() {
        let err = parse_config("[experiment.single_sweep]\nfwhm = -85\n").unwrap_err();
        match err {
            Error::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("experiment.single_sweep.fwhm"));
                assert_eq!(line, Some(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nyquist_violation() {
        let err = parse_config("[twod]\nstep = \"400 fs\"\n[experiment.spectrum]\n").unwrap_err();
        match &err {
            Error::Config { key, line, message } => {
                assert_eq!(key.as_deref(), Some("twod.step"));
                assert_eq!(*line, Some(2));
                assert!(message.contains("295"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn angle_grids() {
        let c = parse_config("[experiment.phase_map]\ntheta1 = { start = \"0.5 pi\", stop = \"2.1 pi\", step = \"0.1 pi\" }\n").unwrap();
        let Some(Experiment::PhaseMap(p)) = c.experiment else { panic!() };
        assert_eq!(p.theta1.0.len(), 17);
        let c = parse_config("[experiment.theta1_scan]\ntheta1 = [\"0.1 pi\", 1.0]\n").unwrap();
        let Some(Experiment::Theta1Scan(p)) = c.experiment else { panic!() };
        assert_eq!(p.theta1.0, vec![0.1 * PI, 1.0]);
    }

    #[test]
    fn full_field_needs_carrier() {
        let err = parse_config("[solver]\nfield = \"full_field\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { key: Some(k), .. } if k == "solver.carrier"));
    }
}
