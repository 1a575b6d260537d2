//! Binary grid files.
//!
//! Layout: the magic line `VLEVELGRID\n`, an 8-byte little-endian header
//! length, a JSON header of that many bytes, then the payload of
//! little-endian f64 values. Complex elements are interleaved `(re, im)`.
//! Row-major with the first axis slow.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use vlevel_core::twodcs::{DelayGrid, Excitation, Spectrum2D, TimeDomainGrid};
use vlevel_core::{DurationConvention, RateConvention, SystemParams};

use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"VLEVELGRID\n";
pub const SCHEMA_VERSION: &str = "vlevel-grid/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    /// Interleaved little-endian (re, im) f64 pairs.
    Complex128,
    Float64,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::Complex128 => 16,
            ElementType::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    TimeDomain,
    Spectrum,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemRecord {
    pub delta_mev: f64,
    pub gamma01_mev: f64,
    pub gamma02_mev: f64,
    pub gamma12_mev: f64,
    pub gamma1_mev: f64,
    pub gamma2_mev: f64,
    pub mu01: f64,
    pub mu_ratio: f64,
    pub laser_detuning1_mev: f64,
    pub rate_convention: String,
}

impl From<&SystemParams> for SystemRecord {
    fn from(p: &SystemParams) -> Self {
        Self {
            delta_mev: p.delta,
            gamma01_mev: p.gamma01,
            gamma02_mev: p.gamma02,
            gamma12_mev: p.gamma12,
            gamma1_mev: p.gamma1,
            gamma2_mev: p.gamma2,
            mu01: p.mu01,
            mu_ratio: p.mu_ratio,
            laser_detuning1_mev: p.laser_detuning1,
            rate_convention: match p.rate_convention {
                RateConvention::Angular => "angular",
                RateConvention::Cyclic => "cyclic",
            }
            .into(),
        }
    }
}

impl SystemRecord {
    fn to_params(&self) -> Option<SystemParams> {
        Some(SystemParams {
            delta: self.delta_mev,
            gamma01: self.gamma01_mev,
            gamma02: self.gamma02_mev,
            gamma12: self.gamma12_mev,
            gamma1: self.gamma1_mev,
            gamma2: self.gamma2_mev,
            mu01: self.mu01,
            mu_ratio: self.mu_ratio,
            laser_detuning1: self.laser_detuning1_mev,
            rate_convention: match self.rate_convention.as_str() {
                "angular" => RateConvention::Angular,
                "cyclic" => RateConvention::Cyclic,
                _ => return None,
            },
        })
    }
}

/// Pulse areas, duration and system of the experiment behind a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationRecord {
    pub areas_rad: [f64; 4],
    pub fwhm_fs: f64,
    pub duration_convention: String,
    pub population_time_fs: Option<f64>,
    pub system: SystemRecord,
}

impl ExcitationRecord {
    pub fn new(e: &Excitation, population_time: Option<f64>) -> Self {
        Self {
            areas_rad: e.areas,
            fwhm_fs: e.fwhm,
            duration_convention: match e.duration {
                DurationConvention::FieldFwhm => "field_fwhm",
                DurationConvention::IntensityFwhm => "intensity_fwhm",
                DurationConvention::FieldHwhm => "field_hwhm",
            }
            .into(),
            population_time_fs: population_time,
            system: (&e.params).into(),
        }
    }

    pub fn to_excitation(&self) -> Option<Excitation> {
        Some(Excitation {
            areas: self.areas_rad,
            fwhm: self.fwhm_fs,
            duration: match self.duration_convention.as_str() {
                "field_fwhm" => DurationConvention::FieldFwhm,
                "intensity_fwhm" => DurationConvention::IntensityFwhm,
                "field_hwhm" => DurationConvention::FieldHwhm,
                _ => return None,
            },
            params: self.system.to_params()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub schema_version: String,
    pub kind: GridKind,
    pub element_type: ElementType,
    /// Slow axis first.
    pub axes: [Axis; 2],
    pub excitation: Option<ExcitationRecord>,
    /// Deterministic provenance (generator, configuration digest). No clocks.
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::Complex(v) => v.len(),
            Payload::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn element_type(&self) -> ElementType {
        match self {
            Payload::Complex(_) => ElementType::Complex128,
            Payload::Real(_) => ElementType::Float64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub header: GridHeader,
    pub payload: Payload,
}

impl GridFile {
    pub fn shape(&self) -> (usize, usize) {
        (self.header.axes[0].values.len(), self.header.axes[1].values.len())
    }

    pub fn from_time_domain(g: &TimeDomainGrid) -> Self {
        Self {
            header: GridHeader {
                schema_version: SCHEMA_VERSION.into(),
                kind: GridKind::TimeDomain,
                element_type: ElementType::Complex128,
                axes: [
                    axis("tau", "fs", &g.axes.tau_axis),
                    axis("t", "fs", &g.axes.t_axis),
                ],
                excitation: Some(ExcitationRecord::new(&g.excitation, Some(g.axes.population_time))),
                metadata: generator_metadata(),
            },
            payload: Payload::Complex(g.values.clone()),
        }
    }

    pub fn from_spectrum(s: &Spectrum2D, population_time: Option<f64>) -> Self {
        Self {
            header: GridHeader {
                schema_version: SCHEMA_VERSION.into(),
                kind: GridKind::Spectrum,
                element_type: ElementType::Complex128,
                axes: [
                    axis("omega_tau", "meV", &s.omega_tau_axis),
                    axis("omega_t", "meV", &s.omega_t_axis),
                ],
                excitation: s.excitation.as_ref().map(|e| ExcitationRecord::new(e, population_time)),
                metadata: generator_metadata(),
            },
            payload: Payload::Complex(s.values.clone()),
        }
    }

    pub fn to_time_domain(&self) -> Option<TimeDomainGrid> {
        let (Payload::Complex(v), GridKind::TimeDomain) = (&self.payload, self.header.kind) else {
            return None;
        };
        let exc = self.header.excitation.as_ref()?;
        let axes = DelayGrid {
            tau_axis: self.header.axes[0].values.clone(),
            population_time: exc.population_time_fs?,
            t_axis: self.header.axes[1].values.clone(),
        };
        TimeDomainGrid::new(v.clone(), axes, exc.to_excitation()?).ok()
    }

    pub fn to_spectrum(&self) -> Option<Spectrum2D> {
        let (Payload::Complex(v), GridKind::Spectrum) = (&self.payload, self.header.kind) else {
            return None;
        };
        let mut s = Spectrum2D::new(
            v.clone(),
            self.header.axes[0].values.clone(),
            self.header.axes[1].values.clone(),
        )
        .ok()?;
        s.excitation = self.header.excitation.as_ref().and_then(|e| e.to_excitation());
        Some(s)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serialises");
        let mut out = Vec::with_capacity(MAGIC.len() + 8 + header.len() + 16 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        match &self.payload {
            Payload::Complex(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            Payload::Real(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let malformed = |message: String| Error::Malformed {
            path: path.to_owned(),
            message,
        };
        if !bytes.starts_with(MAGIC) {
            return Err(malformed("not a vlevel grid file (bad magic)".into()));
        }
        let rest = &bytes[MAGIC.len()..];
        if rest.len() < 8 {
            return Err(Error::Truncated {
                path: path.to_owned(),
                expected: (MAGIC.len() + 8) as u64,
                actual: bytes.len() as u64,
            });
        }
        let hlen = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
        let rest = &rest[8..];
        if rest.len() < hlen {
            return Err(Error::Truncated {
                path: path.to_owned(),
                expected: (MAGIC.len() + 8 + hlen) as u64,
                actual: bytes.len() as u64,
            });
        }
        let raw: serde_json::Value =
            serde_json::from_slice(&rest[..hlen]).map_err(|e| malformed(format!("header: {e}")))?;
        match raw.get("schema_version").and_then(|v| v.as_str()) {
            Some(SCHEMA_VERSION) => {}
            Some(other) => {
                return Err(Error::UnsupportedVersion {
                    path: path.to_owned(),
                    found: other.into(),
                    supported: SCHEMA_VERSION,
                })
            }
            None => return Err(malformed("header lacks schema_version".into())),
        }
        let header: GridHeader = serde_json::from_value(raw).map_err(|e| malformed(format!("header: {e}")))?;
        let count = header.axes[0].values.len() * header.axes[1].values.len();
        let data = &rest[hlen..];
        let expected = count * header.element_type.size();
        let start = MAGIC.len() + 8 + hlen;
        if data.len() != expected {
            if data.len() < expected {
                return Err(Error::Truncated {
                    path: path.to_owned(),
                    expected: (start + expected) as u64,
                    actual: bytes.len() as u64,
                });
            }
            return Err(malformed(format!(
                "payload has {} trailing bytes beyond the declared {expected}",
                data.len() - expected
            )));
        }
        let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
        let payload = match header.element_type {
            ElementType::Complex128 => {
                Payload::Complex(data.chunks_exact(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect())
            }
            ElementType::Float64 => Payload::Real(data.chunks_exact(8).map(f).collect()),
        };
        if payload.element_type() != header.element_type {
            return Err(malformed("element type mismatch".into()));
        }
        Ok(Self { header, payload })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn axis(name: &str, unit: &str, values: &[f64]) -> Axis {
    Axis {
        name: name.into(),
        unit: unit.into(),
        values: values.to_vec(),
    }
}

fn generator_metadata() -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("generator".into(), format!("vlevel {}", env!("CARGO_PKG_VERSION")).into());
    m
}

/// Writes through a sibling temporary file so readers never see a partial
/// artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let io = |e| Error::io(path, e);
    let mut f = File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
