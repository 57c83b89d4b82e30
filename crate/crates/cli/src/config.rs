//! Pipeline settings: built-in defaults, overridden by a TOML file, overridden
//! by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use svsprep::dsp::{F0Config, VocoderConfig, DEFAULT_HOP, DEFAULT_SAMPLE_RATE};
use svsprep::lexicon::Lexicon;
use svsprep::metrics::McepConfig;
use svsprep::pseudo::{MelodyBank, PseudoConfig};

use crate::InputError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Average,
    Proportional,
}

impl FromStr for Strategy {
    type Err = InputError;

    fn from_str(s: &str) -> Result<Self, InputError> {
        match s.to_ascii_lowercase().as_str() {
            "average" => Ok(Strategy::Average),
            "proportional" => Ok(Strategy::Proportional),
            _ => Err(InputError(format!("unknown strategy `{s}` (expected average or proportional)"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Average => "average",
            Strategy::Proportional => "proportional",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub sample_rate: u32,
    /// Analysis hop in seconds.
    pub hop: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    pub mcep_order: usize,
    pub melody_bank: Option<PathBuf>,
    pub cmu_dict: Option<PathBuf>,
    pub pinyin_map: Option<PathBuf>,
    pub hanzi_table: Option<PathBuf>,
    pub strategy: Strategy,
    pub seed: u64,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let f0 = F0Config::default();
        PipelineConfig {
            sample_rate: DEFAULT_SAMPLE_RATE,
            hop: DEFAULT_HOP,
            f0_min: f0.fmin,
            f0_max: f0.fmax,
            mcep_order: McepConfig::default().order,
            melody_bank: None,
            cmu_dict: None,
            pinyin_map: None,
            hanzi_table: None,
            strategy: Strategy::default(),
            seed: 0,
            workers: 1,
        }
    }
}

/// The file layer: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub sample_rate: Option<u32>,
    pub hop: Option<f64>,
    pub f0_min: Option<f64>,
    pub f0_max: Option<f64>,
    pub mcep_order: Option<usize>,
    pub melody_bank: Option<PathBuf>,
    pub cmu_dict: Option<PathBuf>,
    pub pinyin_map: Option<PathBuf>,
    pub hanzi_table: Option<PathBuf>,
    pub strategy: Option<Strategy>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    /// Parse a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("config {}: {e}", path.display())))?;
        let mut file: ConfigFile =
            toml::from_str(&text).map_err(|e| InputError(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut file.melody_bank, &mut file.cmu_dict, &mut file.pinyin_map, &mut file.hanzi_table]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

/// Values given on the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub strategy: Option<Strategy>,
}

impl PipelineConfig {
    pub fn resolve(file: Option<ConfigFile>, flags: &Overrides) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        if let Some(f) = file {
            macro_rules! take {
                ($($field:ident),*) => { $(if let Some(v) = f.$field { cfg.$field = v; })* };
            }
            take!(sample_rate, hop, f0_min, f0_max, mcep_order, strategy, seed, workers);
            cfg.melody_bank = f.melody_bank;
            cfg.cmu_dict = f.cmu_dict;
            cfg.pinyin_map = f.pinyin_map;
            cfg.hanzi_table = f.hanzi_table;
        }
        if let Some(s) = flags.seed {
            cfg.seed = s;
        }
        if let Some(w) = flags.workers {
            cfg.workers = w;
        }
        if let Some(s) = flags.strategy {
            cfg.strategy = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.sample_rate < 8000 {
            problems.push(format!("sample_rate {} is below 8000", self.sample_rate));
        }
        if !(self.hop > 0.0 && self.hop.is_finite()) {
            problems.push(format!("hop {} must be positive", self.hop));
        }
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max && self.f0_max.is_finite()) {
            problems.push(format!("f0 bounds {}..{} must satisfy 0 < min < max", self.f0_min, self.f0_max));
        }
        if self.mcep_order == 0 {
            problems.push("mcep_order must be positive".into());
        }
        if self.workers == 0 {
            problems.push("workers must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(InputError(format!("invalid configuration: {}", problems.join("; "))).into())
        }
    }

    pub fn f0(&self) -> F0Config {
        F0Config { hop: self.hop, fmin: self.f0_min, fmax: self.f0_max, ..F0Config::default() }
    }

    pub fn pseudo(&self) -> PseudoConfig {
        PseudoConfig { vocoder: VocoderConfig { f0: self.f0(), ..VocoderConfig::default() }, ..PseudoConfig::default() }
    }

    pub fn mcep(&self) -> McepConfig {
        McepConfig { order: self.mcep_order, ..McepConfig::default() }
    }

    pub fn melody_bank(&self) -> Result<MelodyBank> {
        match &self.melody_bank {
            None => Ok(MelodyBank::default_bank()),
            Some(path) => MelodyBank::load(path)
                .map_err(|e| InputError(format!("melody bank {}: {e}", path.display())).into()),
        }
    }

    /// The bundled lexicon with any configured tables merged over it;
    /// entries from the files win.
    pub fn lexicon(&self) -> Result<Lexicon> {
        let mut lex = Lexicon::bundled().clone();
        let open = |p: &Path| -> Result<std::io::BufReader<std::fs::File>> {
            let f = std::fs::File::open(p).map_err(|e| InputError(format!("lexicon {}: {e}", p.display())))?;
            Ok(std::io::BufReader::new(f))
        };
        let bad = |p: &Path, e: svsprep::lexicon::LexiconError| InputError(format!("lexicon {}: {e}", p.display()));
        if let Some(p) = &self.cmu_dict {
            lex.merge(Lexicon::load_cmu_dict(open(p)?).map_err(|e| bad(p, e))?);
        }
        if let Some(p) = &self.pinyin_map {
            lex.merge(Lexicon::load_pinyin_map(open(p)?).map_err(|e| bad(p, e))?);
        }
        if let Some(p) = &self.hanzi_table {
            lex.merge(Lexicon::load_hanzi_table(open(p)?).map_err(|e| bad(p, e))?);
        }
        Ok(lex)
    }
}
