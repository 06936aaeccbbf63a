//! Line-oriented `key = value` run configuration with dotted keys.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub is_path: bool,
    pub help: &'static str,
}

const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        key,
        default,
        is_path: false,
        help,
    }
}

const fn path(key: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        key,
        default: "",
        is_path: true,
        help,
    }
}

pub const KEYS: &[KeySpec] = &[
    key("seed", "0", "seed for single-run commands"),
    key("seeds", "0,1,2,3,4", "seed list for multi-seed commands"),
    path("networks.dir", "directory of association network TSV files"),
    path(
        "topo.drug",
        "precomputed drug topology embedding (EMB1 + .ids), instead of networks.dir",
    ),
    path(
        "topo.protein",
        "precomputed protein topology embedding (EMB1 + .ids)",
    ),
    path("text.drug", "drug text embeddings (TSV or EMB1 + .ids)"),
    path("text.protein", "protein text embeddings"),
    path(
        "text.alt_drug",
        "replacement drug text for the wo_llm_text variant",
    ),
    path(
        "text.alt_protein",
        "replacement protein text for the wo_llm_text variant",
    ),
    path(
        "data.interactions",
        "interaction pairs: drug, protein, label[, split]",
    ),
    key(
        "data.neg_ratio",
        "1",
        "negatives sampled per positive when the data has none",
    ),
    key(
        "data.fractions",
        "0.7,0.1,0.2",
        "train,valid,test fractions",
    ),
    key("dca.dim.drug", "100", "drug topology embedding width"),
    key("dca.dim.protein", "100", "protein topology embedding width"),
    key(
        "features.standardize",
        "true",
        "centre and scale every input matrix",
    ),
    key("rwr.restart", "0.5", "restart probability"),
    key("rwr.max_iter", "1000", "power-iteration cap"),
    key("rwr.tol", "1e-12", "max-norm step tolerance"),
    key("train.epochs", "100", ""),
    key("train.batch_size", "64", ""),
    key("train.lr", "0.001", ""),
    key("train.weight_decay", "0.000001", ""),
    key("train.hidden_dim", "128", ""),
    key("train.loss", "bce", "bce or focal"),
    key("train.focal_gamma", "2", ""),
    key("train.focal_alpha", "0.25", ""),
    key(
        "train.variant",
        "full",
        "full, wo_llm_text, wo_cra or wo_tsfusion",
    ),
    path("model.checkpoint", "checkpoint to evaluate"),
    key("evaluate.split", "test", "train, valid or test"),
    key(
        "evaluate.dump_representations",
        "false",
        "write fused pair vectors",
    ),
    key("ablate.variants", "full,wo_llm_text,wo_cra,wo_tsfusion", ""),
    key("coldstart.side", "drug", "drug or protein"),
    key(
        "coldstart.fractions",
        "0.1,0.2,0.3,0.4,0.5",
        "visible entity fractions",
    ),
    key(
        "casestudy.holdout",
        "",
        "comma-separated entity ids held out",
    ),
    key("sweep.neg_ratio", "", "grid of negative ratios"),
    key("sweep.loss", "", "grid of losses"),
    key("sweep.batch_size", "", "grid of batch sizes"),
    key("sweep.lr", "", "grid of learning rates"),
    key("sweep.hidden_dim", "", "grid of hidden widths"),
    key("synth.n_drugs", "100", ""),
    key("synth.n_proteins", "150", ""),
    key("synth.text_clusters", "6", ""),
    key("synth.struct_clusters", "6", ""),
    key("synth.text_dim", "32", ""),
    key("synth.text_noise", "0.5", ""),
    key("synth.terms_per_cluster", "10", ""),
    key("synth.p_in", "0.5", ""),
    key("synth.p_out", "0.02", ""),
    key("synth.sim_p_in", "0.3", ""),
    key("synth.sim_p_out", "0.01", ""),
    key("synth.seed", "2024", ""),
    path(
        "output.dir",
        "run directory (default: $DTI_OUTPUT_ROOT or ./runs, plus a generated name)",
    ),
];

/// Short flags accepted in place of their dotted keys.
const ALIASES: &[(&str, &str)] = &[
    ("side", "coldstart.side"),
    ("fractions", "coldstart.fractions"),
    ("holdout", "casestudy.holdout"),
    ("checkpoint", "model.checkpoint"),
    ("out", "output.dir"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Features,
    Train,
    Evaluate,
    Ablate,
    Coldstart,
    Casestudy,
    Sweep,
    Synth,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Features,
        Command::Train,
        Command::Evaluate,
        Command::Ablate,
        Command::Coldstart,
        Command::Casestudy,
        Command::Sweep,
        Command::Synth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Features => "features",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Ablate => "ablate",
            Command::Coldstart => "coldstart",
            Command::Casestudy => "casestudy",
            Command::Sweep => "sweep",
            Command::Synth => "synth",
        }
    }

    /// Whether the command fans out over `seeds` rather than using `seed`.
    pub fn multi_seed(self) -> bool {
        matches!(self, Command::Ablate | Command::Coldstart | Command::Sweep)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command `{s}`; run `dti help`")))
    }
}

fn spec(key: &str) -> CliResult<&'static KeySpec> {
    KEYS.iter()
        .find(|k| k.key == key)
        .ok_or_else(|| CliError::Config(format!("unknown config key `{key}`")))
}

/// Effective configuration: every known key with its current value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|k| (k.key, k.default.to_owned())).collect(),
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let spec = spec(key)?;
        self.values.insert(spec.key, value.trim().to_owned());
        Ok(())
    }

    /// Applies a config file. Relative paths in it resolve against the
    /// file's directory.
    pub fn apply_file(&mut self, file: &Path) -> CliResult<()> {
        let text = fs::read_to_string(file)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", file.display())))?;
        let base = file.parent().unwrap_or(Path::new(""));
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected `key = value`",
                    file.display(),
                    n + 1
                ))
            })?;
            let (k, v) = (k.trim(), v.trim());
            let spec = spec(k)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", file.display(), n + 1)))?;
            if spec.is_path && !v.is_empty() && Path::new(v).is_relative() {
                self.set(k, &base.join(v).to_string_lossy())?;
            } else {
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        v.parse()
            .map_err(|e| CliError::Config(format!("`{key}` = `{v}`: {e}")))
    }

    /// Comma-separated list; empty when the value is empty.
    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| CliError::Config(format!("`{key}` item `{}`: {e}", s.trim())))
            })
            .collect()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn require_path(&self, key: &str) -> CliResult<PathBuf> {
        self.path(key)
            .ok_or_else(|| CliError::Config(format!("`{key}` must be set")))
    }

    /// `key = value` lines in key order.
    pub fn snapshot(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Parses `<command> [--config FILE] [--key value | --key=value]...`.
/// Flags override the config file regardless of their position.
pub fn parse_args<S: AsRef<str>>(args: &[S]) -> CliResult<(Command, RunConfig)> {
    let mut it = args.iter().map(AsRef::as_ref);
    let command: Command = it
        .next()
        .ok_or_else(|| CliError::Config("missing command; run `dti help`".into()))?
        .parse()?;
    let mut config_file = None;
    let mut overrides = Vec::new();
    while let Some(arg) = it.next() {
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Config(format!("unexpected argument `{arg}`")))?;
        let (name, value) = match flag.split_once('=') {
            Some((n, v)) => (n, v.to_owned()),
            None => (
                flag,
                it.next()
                    .ok_or_else(|| CliError::Config(format!("flag `--{flag}` needs a value")))?
                    .to_owned(),
            ),
        };
        if name == "config" {
            config_file = Some(PathBuf::from(value));
            continue;
        }
        let name = ALIASES
            .iter()
            .find(|(a, _)| *a == name)
            .map_or(name, |(_, k)| *k);
        spec(name)?;
        overrides.push((name.to_owned(), value));
    }
    let mut cfg = RunConfig::default();
    if let Some(f) = config_file {
        cfg.apply_file(&f)?;
    }
    for (k, v) in overrides {
        cfg.set(&k, &v)?;
    }
    Ok((command, cfg))
}

pub fn usage() -> String {
    let mut s = String::from(
        "usage: dti <command> [--config FILE] [--key value]...\n\n\
         commands: features train evaluate ablate coldstart casestudy sweep synth\n\n\
         keys (default):\n",
    );
    for k in KEYS {
        s.push_str(&format!(
            "  --{:<30} {:<38} {}\n",
            k.key,
            format!("[{}]", k.default),
            k.help
        ));
    }
    s.push_str("\naliases: --side --fractions --holdout --checkpoint --out\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.conf");
        fs::write(
            &f,
            "# comment\ntrain.epochs = 5\ntext.drug = t/drug.tsv\nseed = 3 # trailing\n",
        )
        .unwrap();
        let args = [
            "train",
            "--train.epochs",
            "7",
            "--config",
            f.to_str().unwrap(),
            "--side=protein",
        ];
        let (cmd, cfg) = parse_args(&args).unwrap();
        assert_eq!(cmd, Command::Train);
        assert_eq!(cfg.get::<usize>("train.epochs").unwrap(), 7);
        assert_eq!(cfg.get::<u64>("seed").unwrap(), 3);
        assert_eq!(cfg.raw("coldstart.side"), "protein");
        assert_eq!(
            cfg.path("text.drug").unwrap(),
            dir.path().join("t/drug.tsv")
        );
    }

    #[test]
    fn rejects_unknown_keys_and_commands() {
        assert!(matches!(
            parse_args(&["train", "--nope", "1"]),
            Err(CliError::Config(_))
        ));
        assert!(matches!(parse_args(&["fly"]), Err(CliError::Config(_))));
        assert!(matches!(
            parse_args(&["train", "--seed"]),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse_args(&["train", "stray"]),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn lists_and_snapshot() {
        let (_, cfg) = parse_args(&["coldstart", "--fractions", "0.1, 0.3,0.5"]).unwrap();
        assert_eq!(
            cfg.list::<f64>("coldstart.fractions").unwrap(),
            vec![0.1, 0.3, 0.5]
        );
        assert!(cfg.list::<usize>("sweep.neg_ratio").unwrap().is_empty());
        assert!(cfg.list::<usize>("seeds").is_ok());
        let snap = cfg.snapshot();
        assert_eq!(snap.lines().count(), KEYS.len());
        assert!(snap.contains("coldstart.fractions = 0.1, 0.3,0.5\n"));
        let mut again = RunConfig::default();
        for line in snap.lines() {
            let (k, v) = line.split_once(" = ").unwrap();
            again.set(k, v).unwrap();
        }
        assert_eq!(again, cfg);
    }

    #[test]
    fn typed_errors_name_the_key() {
        let (_, cfg) = parse_args(&["train", "--train.epochs", "many"]).unwrap();
        let e = cfg.get::<usize>("train.epochs").unwrap_err().to_string();
        assert!(e.contains("train.epochs"), "{e}");
    }
}
