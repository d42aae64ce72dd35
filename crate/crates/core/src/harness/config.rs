use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hermite::Link;
use crate::kernel::{Bandwidth, KernelSpec, Profile};
use crate::model::{InputDist, SubspaceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    Laplace,
    ExpInner,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Laplace => "laplace",
            KernelKind::ExpInner => "exp_inner",
        }
    }

    pub fn default_bandwidth(self) -> Option<Bandwidth> {
        match self {
            KernelKind::Gaussian => Some(Bandwidth::Dim),
            KernelKind::Laplace => Some(Bandwidth::SqrtDim),
            KernelKind::ExpInner => None,
        }
    }

    /// Identity-metric kernel for dimension `d`.
    pub fn spec(self, bandwidth: Option<Bandwidth>, d: usize) -> Result<KernelSpec> {
        let h = bandwidth.or(self.default_bandwidth()).map(|b| b.resolve(d));
        match self {
            KernelKind::Gaussian => KernelSpec::gaussian(h.unwrap_or(d as f64)),
            KernelKind::Laplace => KernelSpec::laplace(h.unwrap_or((d as f64).sqrt())),
            KernelKind::ExpInner if bandwidth.is_some() => {
                Err(Error::InvalidArgument("exp_inner takes no bandwidth".into()))
            }
            KernelKind::ExpInner => Ok(KernelSpec::inner_product(Profile::Exp)),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Bandwidth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Value(h) => s.serialize_f64(*h),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Number(h) => Bandwidth::Value(h).to_string().parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// One experiment grid: every `alpha × trial` cell runs a full RFM history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub d: usize,
    pub link: Link,
    pub input: InputDist,
    pub subspace: SubspaceKind,
    pub kernel: KernelKind,
    /// Kernel-specific default when absent: `d` for gaussian, `sqrt_d` for laplace.
    pub bandwidth: Option<Bandwidth>,
    /// Sample-size exponents; `n = ⌊d^α⌋`.
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub iterations: usize,
    pub ridge: f64,
    /// `η = eta_scale · d`.
    pub eta_scale: f64,
    pub noise_var: f64,
    pub n_test: usize,
    pub base_seed: u64,
    pub max_n: usize,
    pub allow_large_n: bool,
    /// Write wall-clock seconds per fit; when false the column is 0 and the
    /// CSV is a pure function of the configuration.
    pub record_runtime: bool,
    pub out_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 100,
            link: Link::L1,
            input: InputDist::Hypercube,
            subspace: SubspaceKind::Haar,
            kernel: KernelKind::Gaussian,
            bandwidth: None,
            alphas: vec![1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7],
            trials: 10,
            iterations: 5,
            ridge: 1e-6,
            eta_scale: 0.01,
            noise_var: 0.01,
            n_test: 5000,
            base_seed: 0,
            max_n: 5000,
            allow_large_n: false,
            record_runtime: true,
            out_path: None,
        }
    }
}

/// `⌊d^α⌋`, robust to `d^α` landing a hair below an integer.
pub fn sample_size(d: usize, alpha: f64) -> usize {
    let v = (d as f64).powf(alpha);
    (v + 1e-9 * v.max(1.0)).floor() as usize
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`, and validates.
    pub fn from_path(path: &Path) -> Result<Self> {
        let cfg = Self::load(path)?;
        cfg.validate_at(path)?;
        Ok(cfg)
    }

    /// Parses without validating, so callers can apply overrides first.
    pub fn load(path: &Path) -> Result<Self> {
        let config_err = |message: String| Error::Config { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| config_err(e.to_string()))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| config_err(e.to_string().trim_end().to_string()))
        }
    }

    /// [`validate`](Self::validate), reporting failures against `path`.
    pub fn validate_at(&self, path: &Path) -> Result<()> {
        self.validate()
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eta(&self) -> f64 {
        self.eta_scale * self.d as f64
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel.spec(self.bandwidth, self.d)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidArgument(m));
        if self.d < 2 {
            return invalid(format!("d = {} must be at least 2", self.d));
        }
        if self.link.latent_dim() > self.d {
            return Err(Error::RankTooLarge { r: self.link.latent_dim(), d: self.d });
        }
        if self.alphas.is_empty() {
            return invalid("alphas is empty".into());
        }
        if self.trials == 0 || self.iterations == 0 || self.n_test == 0 {
            return invalid("trials, iterations and n_test must be at least 1".into());
        }
        if !(self.ridge >= 0.0) || !(self.eta_scale > 0.0) || !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return invalid("ridge and noise_var must be finite and non-negative, eta_scale positive".into());
        }
        for &a in &self.alphas {
            if !(a.is_finite() && a >= 0.0) {
                return invalid(format!("alpha {a} is not a non-negative number"));
            }
            let n = sample_size(self.d, a);
            if n == 0 {
                return invalid(format!("alpha {a} gives an empty training set"));
            }
            if n > self.max_n && !self.allow_large_n {
                return invalid(format!(
                    "alpha {a} gives n = {n} > max_n = {}; raise max_n or pass --allow-large-n",
                    self.max_n
                ));
            }
        }
        self.kernel_spec().map(|_| ())
    }
}
