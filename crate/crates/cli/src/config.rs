//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use kpairs::example::{BottProfile, SymbolPair, COMPACT_BOTT, WIDE_BOTT};
use kpairs::group::GroupSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Cap on the dimension of any truncated space.
    pub max_dim: Option<usize>,
    pub group: GroupConfig,
    pub cover: CoverConfig,
    pub symbols: SymbolConfig,
    pub truncation: TruncationConfig,
    pub kclass: KClassConfig,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    FreeAbelian,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupConfig {
    pub kind: GroupKind,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverConfig {
    /// Points per axis of the torus grid.
    pub grid: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    /// Bott projection against the constant `e11`.
    Bott,
    /// Both symbols equal to the identity.
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolConfig {
    pub kind: SymbolKind,
    pub core_radius: f64,
    pub exponent: f64,
    pub winding: i32,
    /// Fiber dimension for `equal` symbols; Bott symbols always use 2.
    pub fiber_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub radii: Vec<usize>,
    pub f_radius: usize,
    pub reference_radius: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KClassConfig {
    pub radius: usize,
    pub grids: Vec<usize>,
    pub symbols: SymbolConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest allowed final value of the convergence curve.
    pub convergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_dim: None,
            group: GroupConfig::default(),
            cover: CoverConfig::default(),
            symbols: SymbolConfig::from_profile(WIDE_BOTT),
            truncation: TruncationConfig::default(),
            kclass: KClassConfig::default(),
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Default for GroupConfig {
    fn default() -> Self {
        Self {
            kind: GroupKind::FreeAbelian,
            rank: 2,
        }
    }
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self { grid: 16 }
    }
}

impl Default for SymbolConfig {
    fn default() -> Self {
        Self::from_profile(WIDE_BOTT)
    }
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            radii: vec![4, 6, 8, 12],
            f_radius: 1,
            reference_radius: 16,
        }
    }
}

impl Default for KClassConfig {
    fn default() -> Self {
        Self {
            radius: 12,
            grids: vec![24, 48],
            symbols: SymbolConfig::from_profile(COMPACT_BOTT),
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { convergence: 0.1 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl SymbolConfig {
    fn from_profile(p: BottProfile) -> Self {
        Self {
            kind: SymbolKind::Bott,
            core_radius: p.core_radius,
            exponent: p.exponent,
            winding: p.winding,
            fiber_dim: 2,
        }
    }

    pub fn profile(&self) -> BottProfile {
        BottProfile {
            core_radius: self.core_radius,
            exponent: self.exponent,
            winding: self.winding,
        }
    }

    pub fn build(&self, group: GroupSpec) -> SymbolPair {
        match self.kind {
            SymbolKind::Bott => SymbolPair::bott(self.profile()),
            SymbolKind::Equal => SymbolPair::identity(group, self.fiber_dim),
        }
    }

    fn validate(&self, path: &str, group: GroupSpec) -> Result<(), ConfigError> {
        match self.kind {
            SymbolKind::Bott => {
                if group != GroupSpec::FreeAbelian(2) {
                    return Err(ConfigError::field(
                        format!("{path}.kind"),
                        "bott symbols need group kind `free_abelian` with rank 2",
                    ));
                }
                positive(&format!("{path}.core_radius"), self.core_radius)?;
                positive(&format!("{path}.exponent"), self.exponent)?;
            }
            SymbolKind::Equal => {
                if self.fiber_dim == 0 {
                    return Err(ConfigError::field(format!("{path}.fiber_dim"), "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

impl GroupConfig {
    pub fn spec(&self) -> GroupSpec {
        match self.kind {
            GroupKind::FreeAbelian => GroupSpec::FreeAbelian(self.rank),
            GroupKind::Free => GroupSpec::Free(self.rank),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Field { field: String, message: String },
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            Self::Parse(m) => write!(f, "{m}"),
            Self::Field { field, message } => write!(f, "field `{field}`: {message}"),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::field(field, format!("must be positive, got {v}")))
    }
}

fn increasing(field: &str, v: &[usize]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(ConfigError::field(field, "must not be empty"));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::field(field, format!("must be strictly increasing, got {v:?}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.into(), e))?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.group.rank == 0 {
            return Err(ConfigError::field("group.rank", "must be at least 1"));
        }
        let group = self.group.spec();
        if self.cover.grid < 2 {
            return Err(ConfigError::field("cover.grid", "must be at least 2"));
        }
        self.symbols.validate("symbols", group)?;
        self.kclass.symbols.validate("kclass.symbols", group)?;
        increasing("truncation.radii", &self.truncation.radii)?;
        if self.truncation.radii.last().is_some_and(|&r| r >= self.truncation.reference_radius) {
            return Err(ConfigError::field(
                "truncation.reference_radius",
                "must exceed every radius in truncation.radii",
            ));
        }
        increasing("kclass.grids", &self.kclass.grids)?;
        if self.kclass.grids[0] < 2 {
            return Err(ConfigError::field("kclass.grids", "grids need at least 2 points per axis"));
        }
        positive("tolerances.convergence", self.tolerances.convergence)?;
        if self.max_dim == Some(0) {
            return Err(ConfigError::field("max_dim", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        let text = toml::to_string(&ExperimentConfig::default()).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_field_reports_its_line() {
        let err = ExperimentConfig::parse("seed = 1\n\n[truncation]\nradi = [1, 2]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4") && msg.contains("radi"), "{msg}");
    }

    #[test]
    fn decreasing_radii_are_rejected() {
        let err = ExperimentConfig::parse("[truncation]\nradii = [4, 2]\n").unwrap_err();
        assert!(err.to_string().contains("truncation.radii"));
    }

    #[test]
    fn bott_needs_the_plane_lattice() {
        let err = ExperimentConfig::parse("[group]\nkind = \"free\"\n").unwrap_err();
        assert!(err.to_string().contains("symbols.kind"));
    }
}
