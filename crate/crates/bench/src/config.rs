//! Scenario description shared by the CLI flags and JSON config files.

use std::path::{Path, PathBuf};

use blws::synth::mc_sample_count;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    /// Robust PCA solved by ADM.
    Rpca,
    /// Matrix completion solved by SVT.
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Dense SVD of the whole iterate.
    Full,
    /// Single-vector Lanczos, the baseline.
    Lanczos,
    /// Block Lanczos with warm start.
    Blws,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Full, Backend::Lanczos, Backend::Blws];

    /// Name of the host algorithm with this backend, as printed in reports.
    pub fn method(self, problem: Problem) -> &'static str {
        match (problem, self) {
            (Problem::Rpca, Backend::Full) => "ADM-exact",
            (Problem::Rpca, Backend::Lanczos) => "ADM",
            (Problem::Rpca, Backend::Blws) => "BLWS-ADM",
            (Problem::Mc, Backend::Full) => "SVT-exact",
            (Problem::Mc, Backend::Lanczos) => "SVT",
            (Problem::Mc, Backend::Blws) => "BLWS-SVT",
        }
    }

    pub fn from_method(problem: Problem, method: &str) -> Option<Backend> {
        Self::ALL.into_iter().find(|b| b.method(problem) == method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Markdown,
}

/// One solver run on one generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: Problem,
    pub m: usize,
    /// Rank of the low-rank part as a fraction of `m` (robust PCA).
    pub rank_frac: f64,
    /// Fraction of corrupted entries (robust PCA).
    pub corrupt_frac: f64,
    /// Rank of the matrix to complete.
    pub rank: usize,
    /// Samples per degree of freedom, `s / (r(2m − r))` (completion).
    pub ratio: f64,
    pub backend: Backend,
    /// Block Lanczos steps per call.
    pub k: usize,
    pub seed: u64,
    /// Outer stopping tolerance; the solver default when absent.
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Rpca,
            m: 500,
            rank_frac: 0.1,
            corrupt_frac: 0.1,
            rank: 10,
            ratio: 6.0,
            backend: Backend::Blws,
            k: 2,
            seed: 0,
            tol: None,
            max_iter: None,
            out: None,
            format: Format::Csv,
        }
    }
}

impl ScenarioConfig {
    pub fn rpca(m: usize, backend: Backend) -> Self {
        Self { problem: Problem::Rpca, m, backend, ..Self::default() }
    }

    pub fn mc(m: usize, rank: usize, ratio: f64, backend: Backend) -> Self {
        Self { problem: Problem::Mc, m, rank, ratio, backend, ..Self::default() }
    }

    /// Reads a JSON object whose keys are a subset of the field names.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
    }

    pub fn method(&self) -> &'static str {
        self.backend.method(self.problem)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        let m = self.m;
        if m < 2 {
            return bad(format!("m = {m} must be at least 2"));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return bad(format!("tol = {tol} must be positive"));
            }
        }
        if self.max_iter == Some(0) {
            return bad("max-iter must be at least 1".into());
        }
        match self.problem {
            Problem::Rpca => {
                if !(self.rank_frac > 0.0 && self.rank_frac < 1.0) {
                    return bad(format!("rank-frac = {} outside (0, 1)", self.rank_frac));
                }
                let r = (self.rank_frac * m as f64).round().max(1.0) as usize;
                if r >= m {
                    return bad(format!("rank {r} must be below m = {m}"));
                }
                if !(0.0..1.0).contains(&self.corrupt_frac) {
                    return bad(format!("corrupt-frac = {} outside [0, 1)", self.corrupt_frac));
                }
            }
            Problem::Mc => {
                if self.rank == 0 || self.rank >= m {
                    return bad(format!("rank = {} must lie in [1, m)", self.rank));
                }
                if !(self.ratio > 0.0 && self.ratio.is_finite()) {
                    return bad(format!("ratio = {} must be positive", self.ratio));
                }
                let s = mc_sample_count(m, self.rank, self.ratio);
                if s > m * m || s == 0 {
                    return bad(format!("{s} samples do not fit a {m}x{m} matrix"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
        ScenarioConfig::mc(1000, 10, 6.0, Backend::Lanczos).validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let bad = [
            ScenarioConfig { m: 1, ..Default::default() },
            ScenarioConfig { rank_frac: 1.0, ..Default::default() },
            ScenarioConfig { corrupt_frac: -0.1, ..Default::default() },
            ScenarioConfig { k: 0, ..Default::default() },
            ScenarioConfig { tol: Some(0.0), ..Default::default() },
            ScenarioConfig::mc(10, 10, 6.0, Backend::Blws),
            ScenarioConfig::mc(20, 5, 4.0, Backend::Blws),
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(BenchError::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for problem in [Problem::Rpca, Problem::Mc] {
            for b in Backend::ALL {
                assert_eq!(Backend::from_method(problem, b.method(problem)), Some(b));
            }
        }
        assert_eq!(Backend::from_method(Problem::Mc, "ADM"), None);
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"problem": "mc", "m": 300, "backend": "full"}"#).unwrap();
        assert_eq!(cfg.problem, Problem::Mc);
        assert_eq!(cfg.m, 300);
        assert_eq!(cfg.backend, Backend::Full);
        assert_eq!(cfg.rank, 10);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"size": 3}"#).is_err());
    }
}
