//! Run configuration: an optional TOML file with one table per concern,
//! overridden field by field by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use magflow_core::torus::BandWidths;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    #[default]
    Cover,
    Bolza,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Field strength.
    #[arg(long = "B", global = true)]
    pub b: Option<f64>,
    /// Energy.
    #[arg(long = "E", global = true)]
    pub e: Option<f64>,
    /// Semiclassical index for the spectrum.
    #[arg(long, global = true)]
    pub k: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub surface: Option<Surface>,
    /// Grid cells per side.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Hyperbolic radius covered by the density grid.
    #[arg(long, global = true)]
    pub extent: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Singular-band widths, `center,boundary` or a single width for both.
    #[arg(long, global = true)]
    pub bands: Option<String>,
    /// TOML configuration file; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run only these verification criteria (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Integrate the flow oracle with the wrong orientation of `j`.
    #[arg(long, global = true, hide = true)]
    pub inject_j_flip: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    model: ModelSection,
    density: DensitySection,
    flow: FlowSection,
    sample: SampleSection,
    spectrum: SpectrumSection,
    equidist: EquidistSection,
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelSection {
    #[serde(rename = "B")]
    b: Option<f64>,
    #[serde(rename = "E")]
    e: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DensitySection {
    surface: Option<Surface>,
    grid: Option<usize>,
    extent: Option<f64>,
    bands: Option<[f64; 2]>,
    mass_resolution: Option<usize>,
    surface_mass_resolution: Option<[usize; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlowSection {
    t_end: Option<f64>,
    stride: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SampleSection {
    n: Option<u64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SpectrumSection {
    k: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EquidistSection {
    starts: Option<usize>,
    horizon: Option<f64>,
    observable: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub b: f64,
    pub e: Option<f64>,
    pub k: Option<u64>,
    pub surface: Surface,
    pub grid: usize,
    pub extent: Option<f64>,
    pub bands: BandWidths,
    pub mass_resolution: usize,
    /// Radial cells and rays per sixteenth for the surface mass quadrature.
    pub surface_mass_resolution: [usize; 2],
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub t_end: Option<f64>,
    pub stride: Option<f64>,
    pub dt: f64,
    pub starts: usize,
    pub horizon: f64,
    pub observable: Option<PathBuf>,
    pub only: Vec<String>,
    pub inject_j_flip: bool,
}

fn parse_bands(s: &str) -> Result<[f64; 2], Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Config(format!("cannot parse band widths {s:?}")))?;
    match nums[..] {
        [w] => Ok([w, w]),
        [c, b] => Ok([c, b]),
        _ => Err(Failure::Config(format!(
            "expected one or two band widths, got {s:?}"
        ))),
    }
}

fn read_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn positive(name: &str, x: f64) -> Result<f64, Failure> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Failure::Config(format!("{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, Failure> {
        let file = match &flags.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let bands = match &flags.bands {
            Some(s) => parse_bands(s)?,
            None => file.density.bands.unwrap_or([1e-3, 1e-3]),
        };
        let cfg = RunConfig {
            b: flags.b.or(file.model.b).unwrap_or(1.0),
            e: flags.e.or(file.model.e),
            k: flags.k.or(file.spectrum.k),
            surface: flags.surface.or(file.density.surface).unwrap_or_default(),
            grid: flags.grid.or(file.density.grid).unwrap_or(200),
            extent: flags.extent.or(file.density.extent),
            bands: BandWidths {
                center: positive("center band width", bands[0])?,
                boundary: positive("boundary band width", bands[1])?,
            },
            mass_resolution: file.density.mass_resolution.unwrap_or(512),
            surface_mass_resolution: file.density.surface_mass_resolution.unwrap_or([300, 12]),
            n: flags.n.or(file.sample.n),
            seed: flags.seed.or(file.sample.seed),
            out: flags
                .out
                .clone()
                .or(file.output.dir)
                .unwrap_or_else(|| PathBuf::from("magflow-out")),
            t_end: file.flow.t_end,
            stride: file.flow.stride,
            dt: file.flow.dt.unwrap_or(1e-3),
            starts: file.equidist.starts.unwrap_or(3),
            horizon: file.equidist.horizon.unwrap_or(2000.0),
            observable: file.equidist.observable,
            only: flags.only.clone(),
            inject_j_flip: flags.inject_j_flip,
        };
        positive("B", cfg.b)?;
        positive("dt", cfg.dt)?;
        positive("horizon", cfg.horizon)?;
        if let Some(x) = cfg.extent {
            positive("extent", x)?;
        }
        if let Some(x) = cfg.t_end {
            positive("t_end", x)?;
        }
        if let Some(x) = cfg.stride {
            positive("stride", x)?;
        }
        if cfg.grid == 0 {
            return Err(Failure::Config("grid must have at least one cell".into()));
        }
        if cfg.surface_mass_resolution.contains(&0) {
            return Err(Failure::Config("surface mass resolution must be positive".into()));
        }
        if cfg.starts == 0 {
            return Err(Failure::Config("need at least one starting point".into()));
        }
        Ok(cfg)
    }

    pub fn energy(&self) -> Result<f64, Failure> {
        self.e
            .ok_or_else(|| Failure::Config("this command needs an energy (--E)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[model]\nB = 2.0\nE = 0.5\n[density]\ngrid = 50\n").unwrap();
        let flags = Flags {
            e: Some(0.25),
            config: Some(path),
            ..Flags::default()
        };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!((cfg.b, cfg.e, cfg.grid), (2.0, Some(0.25), 50));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_bands() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[model]\nbee = 1\n").unwrap();
        let flags = Flags {
            config: Some(path),
            ..Flags::default()
        };
        assert!(RunConfig::resolve(&flags).is_err());
        assert_eq!(parse_bands("1e-3").unwrap(), [1e-3, 1e-3]);
        assert!(parse_bands("1,2,3").is_err());
    }
}
