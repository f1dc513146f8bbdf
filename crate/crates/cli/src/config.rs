//! Command-line flags and the equivalent JSON run configuration.

use crate::error::{CliError, CliResult};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gffcube::IncrementModel;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "gffcube",
    version,
    about = "Gaussian free fields on the hypercube: Green functions, samplers and limits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Green function table, with a dense oracle comparison for N <= 12.
    Green(Opts),
    /// Draw fields, level-set sums or the limiting process.
    Sample {
        #[arg(value_enum)]
        target: SampleTarget,
        #[command(flatten)]
        opts: Opts,
    },
    /// Moments, transforms and signs of the killed spin product Y.
    Ylaw(Opts),
    /// Level-set CLT gaps, transform covariance, Parseval and inversion.
    Limits(Opts),
    /// Run the command named in a JSON config file.
    Run {
        #[arg(value_name = "CONFIG", id = "config_file")]
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Green,
    Sample,
    Ylaw,
    Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SampleTarget {
    Field,
    Levelset,
    Kappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Opts {
    /// JSON config file; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Increment model, e.g. single-flip, mflip, iid-bernoulli, de-finetti-beta, limit-linear.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub atoms: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Markov initial law `p0,p1`.
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<f64>>,
    /// Markov transition matrix `p00,p01,p10,p11`.
    #[arg(long, value_delimiter = ',')]
    pub transition: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    /// Initial spin `ξ_0` (a point mass) for the Y law.
    #[arg(long, allow_hyphen_values = true)]
    pub initial_spin: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Compare Monte Carlo estimates with analytic values.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON file in csv mode (stderr when absent).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Table written in csv mode (the first when absent).
    #[arg(long)]
    pub table: Option<String>,
    /// t-grid as `start:stop:step` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// θ-grid as `start:stop:step` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_grid: Option<String>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Dimensions for the level-set CLT check.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Single Green row from this vertex.
    #[arg(long)]
    pub from: Option<u64>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Tolerance in standard errors for verify reports.
    #[arg(long)]
    pub n_se: Option<f64>,
    /// Worker threads (output does not depend on this).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A grid given either as `start:stop:step` / comma list or as numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Text(String),
    Values(Vec<f64>),
}

impl GridSpec {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        match self {
            GridSpec::Values(v) => Ok(v.clone()),
            GridSpec::Text(s) => parse_grid(s),
        }
    }
}

pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || {
        CliError::Usage(format!(
            "bad grid {s:?}; use start:stop:step or a comma list"
        ))
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + i as f64 * step).collect()
    } else {
        s.split(',').map(num).collect::<CliResult<Vec<f64>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

/// Every setting of a run. Paths and the thread count do not affect results
/// and are not echoed into reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<SampleTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<IncrementModel>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_spin: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub verify: bool,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub summary: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_se: Option<f64>,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Flags from the command line on top of an optional config file.
    pub fn from_opts(
        command: Option<CommandName>,
        target: Option<SampleTarget>,
        opts: &Opts,
    ) -> CliResult<Self> {
        let mut cfg = match &opts.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if command.is_some() {
            cfg.command = command;
        }
        if target.is_some() {
            cfg.target = target;
        }
        if let Some(m) = model_from_flags(opts)? {
            cfg.model = Some(m);
        }
        macro_rules! overlay {
            ($($f:ident),*) => { $( if opts.$f.is_some() { cfg.$f = opts.$f.clone(); } )* };
        }
        overlay!(
            n,
            alpha,
            phi,
            initial_spin,
            replicates,
            out,
            summary,
            table,
            kmax,
            dims,
            from,
            bins,
            n_se,
            threads
        );
        if let Some(s) = opts.seed {
            cfg.seed = s;
        }
        if opts.verify {
            cfg.verify = true;
        }
        if let Some(f) = opts.format {
            cfg.format = f;
        }
        if let Some(g) = &opts.grid {
            cfg.grid = Some(GridSpec::Text(g.clone()));
        }
        if let Some(g) = &opts.theta_grid {
            cfg.theta_grid = Some(GridSpec::Text(g.clone()));
        }
        if cfg.command.is_none() {
            return Err(CliError::Usage("no command given".into()));
        }
        Ok(cfg)
    }

    pub fn require_n(&self) -> CliResult<usize> {
        match self.n {
            Some(0) => Err(CliError::Usage("--N must be at least 1".into())),
            Some(n) => Ok(n),
            None => Err(CliError::Usage("--N is required".into())),
        }
    }

    pub fn require_alpha(&self) -> CliResult<f64> {
        match self.alpha {
            Some(a) if (0.0..1.0).contains(&a) => Ok(a),
            Some(a) => {
                Err(gffcube::Error::Domain(format!("alpha must lie in [0, 1), got {a}")).into())
            }
            None => Err(CliError::Usage("--alpha is required".into())),
        }
    }

    pub fn require_model(&self) -> CliResult<&IncrementModel> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Usage("--model is required".into()))
    }

    pub fn n_se(&self) -> f64 {
        self.n_se.unwrap_or(3.0)
    }
}

/// Builds the model from `--model` and its parameter flags through the
/// model's own JSON schema, so unknown or missing parameters are reported
/// the same way as in config files.
fn model_from_flags(opts: &Opts) -> CliResult<Option<IncrementModel>> {
    let name = match (&opts.model, opts.gamma, opts.kappa) {
        (Some(m), _, _) => m.clone(),
        (None, Some(_), None) => "limit-linear".into(),
        (None, None, Some(_)) => "limit-poisson-dirichlet".into(),
        (None, None, None) => return Ok(None),
        (None, Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--gamma and --kappa select different models".into(),
            ))
        }
    };
    let mut obj = Map::new();
    obj.insert("model".into(), Value::from(name.clone()));
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(k.into(), v);
        }
    };
    put("p", opts.p.map(Value::from));
    put("atoms", opts.atoms.clone().map(Value::from));
    put("weights", opts.weights.clone().map(Value::from));
    put("a", opts.a.map(Value::from));
    put("b", opts.b.map(Value::from));
    put("M", opts.m.map(Value::from));
    put("initial", opts.initial.clone().map(Value::from));
    put("gamma", opts.gamma.map(Value::from));
    put("kappa", opts.kappa.map(Value::from));
    if let Some(t) = &opts.transition {
        if t.len() != 4 {
            return Err(CliError::Usage("--transition takes p00,p01,p10,p11".into()));
        }
        put(
            "transition",
            Some(serde_json::json!([[t[0], t[1]], [t[2], t[3]]])),
        );
    }
    let given: Vec<String> = obj.keys().cloned().collect();
    let model: IncrementModel = serde_json::from_value(Value::Object(obj))
        .map_err(|e| CliError::Usage(format!("model {name}: {e}")))?;
    // unit variants of a tagged enum accept stray keys, so compare round trips
    let known = serde_json::to_value(&model).expect("models serialize");
    if let Some(extra) = given.iter().find(|k| known.get(k.as_str()).is_none()) {
        return Err(CliError::Usage(format!(
            "model {name} takes no parameter {extra}"
        )));
    }
    Ok(Some(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn grids() {
        assert_eq!(
            parse_grid("-2:2:1").unwrap(),
            vec![-2.0, -1.0, 0.0, 1.0, 2.0]
        );
        assert_eq!(parse_grid("-2:2:0.25").unwrap().len(), 17);
        assert_eq!(parse_grid("0.5,-0.3").unwrap(), vec![0.5, -0.3]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn model_flags() {
        let opts = Opts {
            model: Some("mflip".into()),
            m: Some(2),
            ..Default::default()
        };
        assert_eq!(
            model_from_flags(&opts).unwrap(),
            Some(IncrementModel::MFlip { m: 2 })
        );
        let opts = Opts {
            gamma: Some(2.0),
            ..Default::default()
        };
        assert_eq!(
            model_from_flags(&opts).unwrap(),
            Some(IncrementModel::LimitLinear { gamma: 2.0 })
        );
        let opts = Opts {
            model: Some("single-flip".into()),
            p: Some(0.5),
            ..Default::default()
        };
        assert!(matches!(model_from_flags(&opts), Err(CliError::Usage(_))));
    }

    #[test]
    fn config_round_trip() {
        let cfg = RunConfig {
            command: Some(CommandName::Green),
            model: Some(IncrementModel::SingleFlip),
            n: Some(3),
            alpha: Some(0.5),
            grid: Some(GridSpec::Values(vec![0.0, 1.0])),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
