//! Declarative experiment configuration (TOML). Unknown keys are rejected
//! so configs stay self-describing.

use serde::{Deserialize, Serialize};

use crate::kernels::{ExternalPotential, PlaneKernel, TorusDensity, TorusKernel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    UniformWave,
    UniformHierarchy,
    CumulantScaling,
    GaussianCase,
    NongaussianFp,
    CoeffsOnly,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// torus kernel: [k1, k2, amplitude] cosine triples
    #[serde(default)]
    pub torus_modes: Option<Vec<[f64; 3]>>,
    /// plane kernel by analytic family
    #[serde(default)]
    pub plane: Option<PlaneKernelSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneKernelSpec {
    /// "gaussian" (amplitude, width) or "bump" (amplitude, radius)
    pub family: String,
    pub amplitude: f64,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// "zero", "harmonic" (a) or "quartic" (c2, c4)
    pub kind: String,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub c4: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// tagged initial density: cosine triples [k1, k2, amplitude] over 1
    #[serde(default)]
    pub tagged_density: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub n_particles: Option<Vec<usize>>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda: Option<i64>,
    #[serde(default)]
    pub m_max: Option<usize>,
    #[serde(default)]
    pub k_ang: Option<usize>,
    #[serde(default)]
    pub eps_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub n_panels: Option<usize>,
    #[serde(default)]
    pub quad_order: Option<usize>,
    pub output_dir: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn torus_kernel(&self) -> Result<TorusKernel> {
        let modes = self
            .kernel
            .torus_modes
            .as_ref()
            .ok_or_else(|| Error::Config("scenario needs kernel.torus_modes".into()))?;
        let table: Vec<([i64; 2], f64)> =
            modes.iter().map(|m| ([m[0] as i64, m[1] as i64], m[2])).collect();
        TorusKernel::new(&table)
    }

    pub fn plane_kernel(&self) -> Result<PlaneKernel> {
        let spec = self
            .kernel
            .plane
            .as_ref()
            .ok_or_else(|| Error::Config("scenario needs kernel.plane".into()))?;
        match spec.family.as_str() {
            "gaussian" => PlaneKernel::gaussian(
                spec.amplitude,
                spec.width.ok_or_else(|| Error::Config("gaussian family needs width".into()))?,
            ),
            "bump" => PlaneKernel::bump(
                spec.amplitude,
                spec.radius.ok_or_else(|| Error::Config("bump family needs radius".into()))?,
            ),
            other => Err(Error::Config(format!("unknown plane kernel family \"{other}\""))),
        }
    }

    pub fn external_potential(&self) -> Result<ExternalPotential> {
        match &self.potential {
            None => Ok(ExternalPotential::Zero),
            Some(p) => match p.kind.as_str() {
                "zero" => Ok(ExternalPotential::Zero),
                "harmonic" => Ok(ExternalPotential::Harmonic {
                    a: p.a.ok_or_else(|| Error::Config("harmonic potential needs a".into()))?,
                }),
                "quartic" => Ok(ExternalPotential::Quartic {
                    c2: p.c2.ok_or_else(|| Error::Config("quartic potential needs c2".into()))?,
                    c4: p.c4.ok_or_else(|| Error::Config("quartic potential needs c4".into()))?,
                }),
                other => Err(Error::Config(format!("unknown potential kind \"{other}\""))),
            },
        }
    }

    pub fn tagged(&self) -> Result<TorusDensity> {
        match &self.tagged_density {
            None => TorusDensity::new(&[([1, 0], 0.5)]),
            Some(t) => {
                let table: Vec<([i64; 2], f64)> =
                    t.iter().map(|m| ([m[0] as i64, m[1] as i64], m[2])).collect();
                TorusDensity::new(&table)
            }
        }
    }
}
