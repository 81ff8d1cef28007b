//! Run configuration: the TOML schema, its defaults, and conversion into
//! core types. Command line flags are applied on top of the parsed file
//! before anything is derived from it, so the stamped config hash always
//! reflects the effective settings.

use anyhow::{bail, Context, Result};
use pottsfit_core::engine::{InitStrategy, McmcConfig, SamplerKind};
use pottsfit_core::model::PottsSpec;
use pottsfit_core::prior::Hyperparams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub data: Option<DataBlock>,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub hyper: HyperBlock,
    #[serde(default)]
    pub mcmc: Option<McmcBlock>,
    #[serde(default)]
    pub output: OutputBlock,
    /// Reference coupling matrix; when present, fit also writes metrics.
    #[serde(default)]
    pub truth: Option<TruthBlock>,
    #[serde(default)]
    pub generate: Option<GenerateBlock>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("config: cannot read {}", path.display()))?;
        let cfg: RunConfigFile = toml::from_str(&text)
            .with_context(|| format!("config: cannot parse {}", path.display()))?;
        Ok(cfg)
    }

    /// Stable hash of the effective configuration, stamped into every
    /// output file so artifacts can be traced back to their settings.
    /// Output locations are excluded: writing the same run elsewhere must
    /// not change its provenance.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.output.directory = PathBuf::new();
        if let Some(generate) = &mut canon.generate {
            generate.directory = PathBuf::new();
        }
        let canonical = toml::to_string(&canon).context("config: cannot serialize for hashing")?;
        Ok(fnv1a_hex(canonical.as_bytes()))
    }

    pub fn data(&self) -> Result<&DataBlock> {
        self.data.as_ref().context("config: missing [data] block")
    }

    pub fn mcmc(&self) -> Result<&McmcBlock> {
        self.mcmc.as_ref().context("config: missing [mcmc] block")
    }

    pub fn generate(&self) -> Result<&GenerateBlock> {
        self.generate
            .as_ref()
            .context("config: missing [generate] block")
    }
}

fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub path: PathBuf,
    /// Raw value marking a missing cell, matched before the origin shift.
    #[serde(default)]
    pub missing_code: Option<i64>,
    /// Subtracted from every raw value (Likert 1..m becomes 0..m-1 with 1).
    #[serde(default)]
    pub origin_shift: i64,
    /// Raw column indices kept as model variables; all columns when absent.
    #[serde(default)]
    pub columns: Option<Vec<usize>>,
    /// Row predicates on raw columns; rows failing any filter are dropped.
    #[serde(default)]
    pub filters: Vec<FilterRule>,
    #[serde(default)]
    pub impute_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRule {
    pub column: usize,
    pub op: FilterOp,
    pub value: i64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl FilterRule {
    pub fn keeps(&self, raw: i64) -> bool {
        match self.op {
            FilterOp::Eq => raw == self.value,
            FilterOp::Ne => raw != self.value,
            FilterOp::Lt => raw < self.value,
            FilterOp::Le => raw <= self.value,
            FilterOp::Gt => raw > self.value,
            FilterOp::Ge => raw >= self.value,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub coupling: CouplingId,
    /// Explicit statistic tables, used only with coupling = "tables".
    #[serde(default)]
    pub node_stat: Option<Vec<f64>>,
    #[serde(default)]
    pub pair_stat: Option<Vec<Vec<f64>>>,
}

fn default_m() -> usize {
    2
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            m: 2,
            coupling: CouplingId::Ising,
            node_stat: None,
            pair_stat: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingId {
    #[default]
    Ising,
    ScaledQuadratic,
    Tables,
}

impl ModelBlock {
    pub fn to_spec(&self, p: usize) -> Result<PottsSpec> {
        let spec = match self.coupling {
            CouplingId::Ising => PottsSpec::ising_identity(p, self.m),
            CouplingId::ScaledQuadratic => PottsSpec::scaled_quadratic(p, self.m),
            CouplingId::Tables => {
                let node = self
                    .node_stat
                    .clone()
                    .context("config: coupling = \"tables\" needs model.node_stat")?;
                let rows = self
                    .pair_stat
                    .clone()
                    .context("config: coupling = \"tables\" needs model.pair_stat")?;
                if rows.len() != self.m || rows.iter().any(|r| r.len() != self.m) {
                    bail!("config: model.pair_stat must be an {0} x {0} table", self.m);
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                PottsSpec::explicit(p, self.m, node, flat)
            }
        };
        spec.context("config: invalid model block")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperBlock {
    pub u: f64,
    pub c0: f64,
    pub c1: f64,
    pub sigma: Option<f64>,
    pub grad_cap: Option<f64>,
    pub fix_diagonal_active: Option<bool>,
    /// Explicit values win over the (u, c0, c1) scaling rules.
    pub q: Option<f64>,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
}

impl Default for HyperBlock {
    fn default() -> Self {
        HyperBlock {
            u: 2.0,
            c0: 0.1,
            c1: 1.0,
            sigma: None,
            grad_cap: None,
            fix_diagonal_active: None,
            q: None,
            gamma: None,
            rho: None,
        }
    }
}

impl HyperBlock {
    pub fn to_hyperparams(&self, n: usize, p: usize) -> Result<Hyperparams> {
        let mut hp = Hyperparams::from_scaling(n, p, self.u, self.c0, self.c1)
            .context("config: hyperparameter scaling failed")?;
        if let Some(q) = self.q {
            hp = hp.with_q(q).context("config: invalid hyper.q")?;
        }
        if let Some(gamma) = self.gamma {
            hp = hp.with_gamma(gamma).context("config: invalid hyper.gamma")?;
        }
        if let Some(rho) = self.rho {
            hp = hp.with_rho(rho).context("config: invalid hyper.rho")?;
        }
        if let Some(sigma) = self.sigma {
            hp = hp.with_sigma(sigma).context("config: invalid hyper.sigma")?;
        }
        if let Some(c) = self.grad_cap {
            hp = hp.with_grad_cap(c).context("config: invalid hyper.grad_cap")?;
        }
        if let Some(fix) = self.fix_diagonal_active {
            hp = hp.with_fix_diagonal_active(fix);
        }
        Ok(hp)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcBlock {
    pub sampler: SamplerKind,
    pub iterations: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub init: InitId,
    pub lasso_lambda: Option<f64>,
}

fn default_thin() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitId {
    #[default]
    Lasso,
    Zero,
}

impl McmcBlock {
    pub fn to_mcmc_config(&self) -> McmcConfig {
        let mut cfg = McmcConfig::new(
            self.sampler,
            self.iterations,
            self.burn_in,
            self.thin,
            self.master_seed,
        );
        cfg.init = match self.init {
            InitId::Lasso => InitStrategy::Lasso,
            InitId::Zero => InitStrategy::Zero,
        };
        cfg.lasso_lambda = self.lasso_lambda;
        cfg
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub ci_level: f64,
    /// Node index sets for group-averaged edge probabilities; enables the
    /// phi and clustering outputs.
    pub groups: Option<Vec<Vec<usize>>>,
    /// Also persist every retained sample as a binary stream.
    pub save_samples: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: PathBuf::from("out"),
            ci_level: 0.95,
            groups: None,
            save_samples: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthBlock {
    pub theta: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateBlock {
    /// Built-in design; alternatively point `theta` at an explicit matrix.
    #[serde(default)]
    pub topology: Option<TopologyId>,
    #[serde(default)]
    pub theta: Option<PathBuf>,
    #[serde(default)]
    pub p: Option<usize>,
    /// Number of coupled pairs for the built-in designs.
    #[serde(default)]
    pub edges: Option<usize>,
    #[serde(default = "default_diagonal")]
    pub diagonal: f64,
    #[serde(default = "default_off_diagonal")]
    pub off_diagonal: f64,
    pub n: usize,
    #[serde(default = "default_gen_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gen_dir")]
    pub directory: PathBuf,
}

fn default_diagonal() -> f64 {
    -2.0
}

fn default_off_diagonal() -> f64 {
    4.0
}

fn default_gen_burn_in() -> usize {
    1000
}

fn default_gen_dir() -> PathBuf {
    PathBuf::from("generated")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyId {
    /// Uniformly chosen distinct node pairs.
    Random,
    /// Disjoint consecutive pairs (2b, 2b+1) along the diagonal.
    PairBlocks,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_fit_config_parses_with_defaults() {
        let cfg: RunConfigFile = toml::from_str(
            r#"
            [data]
            path = "survey.tsv"
            [mcmc]
            sampler = "pg-gibbs"
            iterations = 100
            "#,
        )
        .unwrap();
        let data = cfg.data().unwrap();
        assert_eq!(data.origin_shift, 0);
        assert!(data.missing_code.is_none());
        let mcmc = cfg.mcmc().unwrap();
        assert_eq!(mcmc.thin, 1);
        assert_eq!(mcmc.burn_in, 0);
        assert_eq!(mcmc.init, InitId::Lasso);
        assert_eq!(cfg.model.m, 2);
        assert_eq!(cfg.model.coupling, CouplingId::Ising);
        assert_eq!(cfg.output.ci_level, 0.95);
        assert_eq!(cfg.output.directory, PathBuf::from("out"));
        assert!(!cfg.output.save_samples);
    }

    #[test]
    fn explicit_hyper_overrides_beat_scaling_rules() {
        let block: HyperBlock = toml::from_str(
            r#"
            u = 2.0
            gamma = 0.005
            sigma = 0.3
            "#,
        )
        .unwrap();
        let hp = block.to_hyperparams(600, 20).unwrap();
        assert_eq!(hp.gamma, 0.005);
        assert_eq!(hp.sigma, 0.3);
        // Untouched fields still follow the scaling formulas.
        let base = Hyperparams::from_defaults(600, 20).unwrap();
        assert_eq!(hp.q, base.q);
        assert_eq!(hp.rho, base.rho);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let text = r#"
            [data]
            path = "x.tsv"
            [mcmc]
            sampler = "mala"
            iterations = 50
        "#;
        let a: RunConfigFile = toml::from_str(text).unwrap();
        let b: RunConfigFile = toml::from_str(text).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let mut c: RunConfigFile = toml::from_str(text).unwrap();
        c.mcmc.as_mut().unwrap().iterations = 51;
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
        // Moving the output elsewhere keeps the provenance hash.
        let mut d: RunConfigFile = toml::from_str(text).unwrap();
        d.output.directory = PathBuf::from("elsewhere");
        assert_eq!(a.hash().unwrap(), d.hash().unwrap());
    }

    #[test]
    fn tables_coupling_requires_both_tables() {
        let block: ModelBlock = toml::from_str(
            r#"
            m = 3
            coupling = "tables"
            node_stat = [0.0, 1.0, 2.0]
            "#,
        )
        .unwrap();
        let err = block.to_spec(4).unwrap_err();
        assert!(err.to_string().contains("pair_stat"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let parsed: std::result::Result<RunConfigFile, _> = toml::from_str(
            r#"
            [data]
            path = "x.tsv"
            typo_field = 3
            [mcmc]
            sampler = "mala"
            iterations = 50
            "#,
        );
        assert!(parsed.is_err());
    }
}
