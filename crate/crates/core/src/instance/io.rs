use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Instance, InstanceError};

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    #[serde(flatten)]
    instance: Instance,
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    let file = InstanceFile { version: 1, instance: instance.clone() };
    let text = serde_json::to_string_pretty(&file).map_err(|source| json_err(path, source))?;
    fs::write(path, text).map_err(|source| io_err(path, source))
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|source| json_err(path, source))?;
    if file.version != 1 {
        return Err(InstanceError::Version(file.version));
    }
    file.instance.validate()?;
    Ok(file.instance)
}

/// On-disk solution. `server` uses -1 for unserved testpoints,
/// `power_level` is 1-based. Continuous-power solutions (the BM model) carry
/// no `power_level`/`power_set_db` and are audited from `power_mw`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub version: u32,
    pub formulation: String,
    pub server: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_level: Option<Vec<usize>>,
    pub power_db: Vec<f64>,
    pub power_mw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_set_db: Option<Vec<f64>>,
    pub nominal_revenue: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified_revenue: Option<f64>,
}

impl SolutionFile {
    pub fn servers(&self) -> Result<Vec<Option<usize>>, InstanceError> {
        self.server
            .iter()
            .map(|&s| match s {
                -1 => Ok(None),
                s if s >= 0 => Ok(Some(s as usize)),
                s => Err(InstanceError::Solution(format!("invalid server index {s}"))),
            })
            .collect()
    }
}

pub fn write_solution(solution: &SolutionFile, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(solution).map_err(|source| json_err(path, source))?;
    fs::write(path, text).map_err(|source| io_err(path, source))
}

pub fn read_solution(path: impl AsRef<Path>) -> Result<SolutionFile, InstanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    serde_json::from_str(&text).map_err(|source| json_err(path, source))
}

fn io_err(path: &Path, source: std::io::Error) -> InstanceError {
    InstanceError::Io { path: path.display().to_string(), source }
}

fn json_err(path: &Path, source: serde_json::Error) -> InstanceError {
    InstanceError::Json { path: path.display().to_string(), source }
}
