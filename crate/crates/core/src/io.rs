//! Surface input files (TOML).
//!
//! ```toml
//! kind = "preset"            # or "grid"
//! kappa = 1.0                # optional default for the run
//!
//! [preset]
//! name = "spheroid"          # round_sphere | spheroid | band
//! params = { a = 1.0, c = 0.8 }
//!
//! [hsource]
//! type = "reference_scaled"  # riemannian | spacetime | reference_scaled | euclidean
//! scale = 0.9
//! ```
//!
//! A `grid` file carries `[grid] ntheta, npsi, g_tt, g_tp, g_pp` with arrays
//! stored row-major, θ-major. `H` and `trp` may be arrays of the grid size or a
//! single number for a constant field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LatLonGrid;
use crate::surface::{HSource, Preset, SurfaceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Field {
    Constant(f64),
    Values(Vec<f64>),
}

impl Field {
    fn expand(&self, n: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            Field::Constant(v) => Ok(vec![*v; n]),
            Field::Values(v) if v.len() == n => Ok(v.clone()),
            Field::Values(v) => {
                Err(Error::InvalidInput(format!("{name} has {} entries, expected {n}", v.len())))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Preset,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub ntheta: usize,
    pub npsi: usize,
    pub g_tt: Vec<f64>,
    pub g_tp: Vec<f64>,
    pub g_pp: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HSourceType {
    Riemannian,
    Spacetime,
    ReferenceScaled,
    /// Mean curvature of the standard Euclidean embedding of a preset.
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSourceSection {
    #[serde(rename = "type")]
    pub kind: HSourceType,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trp: Option<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    pub hsource: HSourceSection,
}

fn param(p: &PresetSection, key: &str) -> Result<f64> {
    p.params
        .get(key)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("preset {} needs parameter `{key}`", p.name)))
}

impl PresetSection {
    pub fn to_preset(&self) -> Result<Preset> {
        let allowed: &[&str] = match self.name.as_str() {
            "round_sphere" => &["radius"],
            "spheroid" => &["a", "c"],
            "band" => &["depth", "scale"],
            other => return Err(Error::InvalidInput(format!("unknown preset `{other}`"))),
        };
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidInput(format!("preset {} has no parameter `{k}`", self.name)));
        }
        let p = match self.name.as_str() {
            "round_sphere" => Preset::RoundSphere { radius: param(self, "radius")? },
            "spheroid" => Preset::Spheroid { a: param(self, "a")?, c: param(self, "c")? },
            _ => Preset::Band { depth: param(self, "depth")?, scale: param(self, "scale")? },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_preset(p: &Preset) -> Self {
        let (name, params): (&str, Vec<(&str, f64)>) = match *p {
            Preset::RoundSphere { radius } => ("round_sphere", vec![("radius", radius)]),
            Preset::Spheroid { a, c } => ("spheroid", vec![("a", a), ("c", c)]),
            Preset::Band { depth, scale } => ("band", vec![("depth", depth), ("scale", scale)]),
        };
        PresetSection {
            name: name.into(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl SurfaceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: SurfaceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        match f.kind {
            Kind::Preset if f.preset.is_none() => {
                Err(Error::Parse("kind = \"preset\" needs a [preset] table".into()))
            }
            Kind::Grid if f.grid.is_none() => Err(Error::Parse("kind = \"grid\" needs a [grid] table".into())),
            _ => Ok(f),
        }
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Grid dimensions stored in the file, if any.
    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.grid.as_ref().map(|g| (g.ntheta, g.npsi))
    }

    /// Build the spec. Presets are sampled on `dims`; grid files must match
    /// `dims` when it is given.
    pub fn to_spec(&self, dims: Option<(usize, usize)>) -> Result<SurfaceSpec> {
        let (grid, preset) = match self.kind {
            Kind::Preset => {
                let (nt, np) = dims.unwrap_or((32, 32));
                (LatLonGrid::new(nt, np)?, Some(self.preset.as_ref().unwrap().to_preset()?))
            }
            Kind::Grid => {
                let g = self.grid.as_ref().unwrap();
                if let Some(d) = dims {
                    if d != (g.ntheta, g.npsi) {
                        return Err(Error::InvalidInput(format!(
                            "grid file is {}x{} but {}x{} was requested",
                            g.ntheta, g.npsi, d.0, d.1
                        )));
                    }
                }
                (LatLonGrid::new(g.ntheta, g.npsi)?, None)
            }
        };
        let n = grid.len();
        let h = &self.hsource;
        let need = |f: &Option<Field>, name: &str| -> Result<Vec<f64>> {
            f.as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("hsource needs `{name}`")))?
                .expand(n, name)
        };
        let hsource = match h.kind {
            HSourceType::Riemannian => HSource::Riemannian { h: need(&h.h, "H")? },
            HSourceType::Spacetime => HSource::Spacetime { h: need(&h.h, "H")?, trp: need(&h.trp, "trp")? },
            HSourceType::ReferenceScaled => HSource::ReferenceScaled { scale: h.scale.unwrap_or(1.0) },
            HSourceType::Euclidean => {
                let p = preset.ok_or_else(|| {
                    Error::InvalidInput("euclidean mean curvature is only defined for presets".into())
                })?;
                let hh = SurfaceSpec::preset_euclidean_h(&p, &grid).ok_or_else(|| {
                    Error::InvalidInput(format!("preset {p:?} has no Euclidean embedding"))
                })?;
                HSource::Riemannian { h: hh }
            }
        };
        match (self.kind, preset) {
            (Kind::Preset, Some(p)) => SurfaceSpec::from_preset(p, grid, hsource),
            _ => {
                let g = self.grid.as_ref().unwrap();
                SurfaceSpec::from_grid(grid, g.g_tt.clone(), g.g_tp.clone(), g.g_pp.clone(), hsource)
            }
        }
    }

    /// A grid file holding the sampled metric and ℋ data of `spec`.
    pub fn from_spec(spec: &SurfaceSpec, kappa: Option<f64>) -> Self {
        let hsource = match &spec.hsource {
            HSource::Riemannian { h } => HSourceSection {
                kind: HSourceType::Riemannian,
                h: Some(Field::Values(h.clone())),
                trp: None,
                scale: None,
            },
            HSource::Spacetime { h, trp } => HSourceSection {
                kind: HSourceType::Spacetime,
                h: Some(Field::Values(h.clone())),
                trp: Some(Field::Values(trp.clone())),
                scale: None,
            },
            HSource::ReferenceScaled { scale } => {
                HSourceSection { kind: HSourceType::ReferenceScaled, h: None, trp: None, scale: Some(*scale) }
            }
        };
        SurfaceFile {
            kind: Kind::Grid,
            kappa,
            preset: None,
            grid: Some(GridSection {
                ntheta: spec.grid.ntheta,
                npsi: spec.grid.npsi,
                g_tt: spec.g_tt.clone(),
                g_tp: spec.g_tp.clone(),
                g_pp: spec.g_pp.clone(),
            }),
            hsource,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_file() {
        let f = SurfaceFile::parse(
            r#"
kind = "preset"
kappa = 0.5
[preset]
name = "round_sphere"
params = { radius = 1.0 }
[hsource]
type = "riemannian"
H = 2.0
"#,
        )
        .unwrap();
        let spec = f.to_spec(Some((8, 12))).unwrap();
        assert_eq!(spec.grid.npsi, 12);
        assert_eq!(f.kappa, Some(0.5));
        match spec.hsource {
            HSource::Riemannian { h } => assert!(h.iter().all(|v| *v == 2.0) && h.len() == 96),
            _ => panic!(),
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let base = "kind = \"preset\"\n[preset]\nname = \"cube\"\n[hsource]\ntype = \"reference_scaled\"\n";
        assert!(SurfaceFile::parse(base).unwrap().to_spec(None).is_err());
        assert!(SurfaceFile::parse("kind = \"grid\"\n[hsource]\ntype = \"riemannian\"\n").is_err());
        let extra = "kind = \"preset\"\n[preset]\nname = \"spheroid\"\nparams = { a = 1.0, c = 0.8, b = 2.0 }\n[hsource]\ntype = \"euclidean\"\n";
        assert!(SurfaceFile::parse(extra).unwrap().to_spec(None).is_err());
    }

    #[test]
    fn grid_round_trip() {
        let grid = LatLonGrid::new(8, 8).unwrap();
        let spec = SurfaceSpec::from_preset(
            Preset::Spheroid { a: 1.0, c: 0.7 },
            grid,
            HSource::Spacetime { h: vec![2.0; 64], trp: vec![0.5; 64] },
        )
        .unwrap();
        let text = SurfaceFile::from_spec(&spec, Some(1.0)).to_toml().unwrap();
        let back = SurfaceFile::parse(&text).unwrap().to_spec(None).unwrap();
        assert_eq!(back.g_tt, spec.g_tt);
        assert_eq!(back.g_pp, spec.g_pp);
        assert_eq!(back.hsource, spec.hsource);
        assert!(SurfaceFile::parse(&text).unwrap().to_spec(Some((16, 16))).is_err());
    }
}
