//! Instance-file schema: JSON in, validated model types out.
//!
//! One document describes exactly one model. Matrices are row-major arrays
//! of arrays; scalar and parallel variants carry variance lists instead.
//! `normalized()` re-emits the canonical form, which re-parses to an
//! identical in-memory instance.

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use ceo_region_core::matkernel::{GenMatrix, SymMatrix};
use ceo_region_core::model::{
    CeoInstance, DistortionTarget, GeneralCeoInstance, ParallelCeoInstance, ScalarCeoInstance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Aligned,
    General,
    Scalar,
    Parallel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseVars {
    PerSensor(Vec<f64>),
    PerSensorComponent(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distortion {
    Scalar(f64),
    PerComponent(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// The on-disk schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kx: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensors: Option<Vec<SensorSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_vars: Option<NoiseVars>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_vars: Option<Vec<f64>>,
    pub distortion: Distortion,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

/// A fully validated instance of exactly one model type.
#[derive(Debug, Clone)]
pub enum ParsedInstance {
    Aligned {
        inst: CeoInstance,
        target: DistortionTarget,
    },
    General {
        inst: GeneralCeoInstance,
        target: DistortionTarget,
    },
    Scalar {
        inst: ScalarCeoInstance,
        d: f64,
    },
    Parallel(ParallelCeoInstance),
}

fn sym(rows: &[Vec<f64>], what: &str) -> anyhow::Result<SymMatrix> {
    SymMatrix::from_rows(rows).with_context(|| format!("{what} is not a valid symmetric matrix"))
}

fn gen(rows: &[Vec<f64>]) -> anyhow::Result<GenMatrix> {
    let r = rows.len();
    if r == 0 {
        bail!("channel matrix must have at least one row");
    }
    let c = rows[0].len();
    if c == 0 || rows.iter().any(|row| row.len() != c) {
        bail!("channel matrix rows must be non-empty and equally long");
    }
    Ok(GenMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl InstanceFile {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).context("instance file does not match the schema")
    }

    pub fn parse(&self) -> anyhow::Result<ParsedInstance> {
        match self.model {
            ModelKind::Aligned => {
                let kx = sym(self.kx.as_ref().ok_or_else(|| anyhow!("aligned model needs `kx`"))?, "kx")?;
                let sensors = self
                    .sensors
                    .as_ref()
                    .ok_or_else(|| anyhow!("aligned model needs `sensors`"))?;
                let noises = sensors
                    .iter()
                    .enumerate()
                    .map(|(i, s)| match (&s.sigma, &s.h) {
                        (Some(rows), None) => sym(rows, &format!("sensors[{i}].sigma")),
                        _ => bail!("aligned sensors carry exactly a `sigma` matrix"),
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                let d = match &self.distortion {
                    Distortion::Matrix(rows) => sym(rows, "distortion")?,
                    Distortion::Scalar(v) if kx.dim() == 1 => SymMatrix::from_diagonal(&[*v]),
                    _ => bail!("aligned model needs a matrix distortion"),
                };
                self.forbid(&["var_x", "noise_vars", "source_vars"])?;
                Ok(ParsedInstance::Aligned {
                    inst: CeoInstance::new(kx, noises)?,
                    target: DistortionTarget::new(d)?,
                })
            }
            ModelKind::General => {
                let kx = sym(self.kx.as_ref().ok_or_else(|| anyhow!("general model needs `kx`"))?, "kx")?;
                let sensors = self
                    .sensors
                    .as_ref()
                    .ok_or_else(|| anyhow!("general model needs `sensors`"))?;
                let channels = sensors
                    .iter()
                    .enumerate()
                    .map(|(i, s)| match (&s.sigma, &s.h) {
                        (None, Some(rows)) => gen(rows),
                        _ => bail!("general sensors carry exactly an `h` matrix (sensor {i})"),
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                let d = match &self.distortion {
                    Distortion::Matrix(rows) => sym(rows, "distortion")?,
                    Distortion::Scalar(v) if kx.dim() == 1 => SymMatrix::from_diagonal(&[*v]),
                    _ => bail!("general model needs a matrix distortion"),
                };
                self.forbid(&["var_x", "noise_vars", "source_vars"])?;
                Ok(ParsedInstance::General {
                    inst: GeneralCeoInstance::new(kx, channels)?,
                    target: DistortionTarget::new(d)?,
                })
            }
            ModelKind::Scalar => {
                let var_x = self.var_x.ok_or_else(|| anyhow!("scalar model needs `var_x`"))?;
                let noise = match &self.noise_vars {
                    Some(NoiseVars::PerSensor(v)) => v.clone(),
                    _ => bail!("scalar model needs `noise_vars` as a flat list"),
                };
                let d = match &self.distortion {
                    Distortion::Scalar(v) => *v,
                    _ => bail!("scalar model needs a scalar distortion"),
                };
                self.forbid(&["kx", "sensors", "source_vars"])?;
                Ok(ParsedInstance::Scalar {
                    inst: ScalarCeoInstance::new(var_x, noise)?,
                    d,
                })
            }
            ModelKind::Parallel => {
                let source = self
                    .source_vars
                    .clone()
                    .ok_or_else(|| anyhow!("parallel model needs `source_vars`"))?;
                let noise = match &self.noise_vars {
                    Some(NoiseVars::PerSensorComponent(v)) => v.clone(),
                    _ => bail!("parallel model needs `noise_vars` as a list of per-sensor rows"),
                };
                let targets = match &self.distortion {
                    Distortion::PerComponent(v) => v.clone(),
                    Distortion::Scalar(v) if source.len() == 1 => vec![*v],
                    _ => bail!("parallel model needs a per-component distortion list"),
                };
                self.forbid(&["kx", "sensors", "var_x"])?;
                Ok(ParsedInstance::Parallel(ParallelCeoInstance::new(
                    source, noise, targets,
                )?))
            }
        }
    }

    fn forbid(&self, fields: &[&str]) -> anyhow::Result<()> {
        for f in fields {
            let present = match *f {
                "kx" => self.kx.is_some(),
                "sensors" => self.sensors.is_some(),
                "var_x" => self.var_x.is_some(),
                "noise_vars" => self.noise_vars.is_some(),
                "source_vars" => self.source_vars.is_some(),
                _ => false,
            };
            if present {
                bail!("field `{f}` does not belong to the `{:?}` model", self.model);
            }
        }
        Ok(())
    }
}

fn matrix_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect())
        .collect()
}

fn gen_rows(m: &GenMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Canonical re-emission of a parsed instance.
pub fn normalized(parsed: &ParsedInstance, mu: Option<&[f64]>) -> InstanceFile {
    let mu = mu.map(|m| m.to_vec());
    match parsed {
        ParsedInstance::Aligned { inst, target } => InstanceFile {
            model: ModelKind::Aligned,
            kx: Some(matrix_rows(inst.kx())),
            sensors: Some(
                inst.noises()
                    .iter()
                    .map(|s| SensorSpec {
                        sigma: Some(matrix_rows(s)),
                        h: None,
                    })
                    .collect(),
            ),
            var_x: None,
            noise_vars: None,
            source_vars: None,
            distortion: Distortion::Matrix(matrix_rows(target.matrix())),
            mu,
        },
        ParsedInstance::General { inst, target } => InstanceFile {
            model: ModelKind::General,
            kx: Some(matrix_rows(inst.kx())),
            sensors: Some(
                inst.channels()
                    .iter()
                    .map(|h| SensorSpec {
                        sigma: None,
                        h: Some(gen_rows(h)),
                    })
                    .collect(),
            ),
            var_x: None,
            noise_vars: None,
            source_vars: None,
            distortion: Distortion::Matrix(matrix_rows(target.matrix())),
            mu,
        },
        ParsedInstance::Scalar { inst, d } => InstanceFile {
            model: ModelKind::Scalar,
            kx: None,
            sensors: None,
            var_x: Some(inst.var_x),
            noise_vars: Some(NoiseVars::PerSensor(inst.noise_vars.clone())),
            source_vars: None,
            distortion: Distortion::Scalar(*d),
            mu,
        },
        ParsedInstance::Parallel(inst) => InstanceFile {
            model: ModelKind::Parallel,
            kx: None,
            sensors: None,
            var_x: None,
            noise_vars: Some(NoiseVars::PerSensorComponent(inst.noise_vars.clone())),
            source_vars: Some(inst.source_vars.clone()),
            distortion: Distortion::PerComponent(inst.targets.clone()),
            mu,
        },
    }
}
