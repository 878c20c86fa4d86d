//! Config file schema, validation with field paths, and flag overrides.

use std::collections::BTreeMap;
use std::path::Path;

use polydisc_kernels::kernels::Quadrature;
use polydisc_kernels::multiindex::MultiIndex;
use polydisc_kernels::params::KernelParams;
use serde::Deserialize;

/// A configuration problem, reported with the JSON field path that caused it.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureFile {
    radius: f64,
    nodes: usize,
}

/// On-disk schema. Everything beyond the kernel parameters is optional and
/// falls back to defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n: usize,
    alpha: Vec<usize>,
    lambda: Vec<f64>,
    #[serde(default)]
    mu: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    degree: Option<usize>,
    #[serde(default)]
    taylor_order: Option<usize>,
    #[serde(default)]
    tolerances: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    quadrature: Option<QuadratureFile>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: KernelParams,
    pub seed: u64,
    pub samples: usize,
    pub degree: usize,
    pub taylor_order: usize,
    /// User-supplied tolerance overrides, keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
    pub quadrature: Quadrature,
}

impl RunConfig {
    /// Threshold for a check: override when given, else the supplied default.
    pub fn tolerance(&self, check: &str, default: f64) -> f64 {
        self.tolerances.get(check).copied().unwrap_or(default)
    }

    /// Resolved μ map echoed into reports, keyed by the family's own display
    /// form.
    pub fn mu_echo(&self) -> BTreeMap<String, f64> {
        self.params
            .family()
            .members()
            .iter()
            .zip(self.params.mu())
            .map(|(m, &v)| (m.to_string(), v))
            .collect()
    }
}

/// Command-line overrides applied on top of the file values.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

pub fn load_config(path: &Path, overrides: Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err("<file>", format!("cannot read {}: {e}", path.display())))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| err("<json>", format!("malformed config: {e}")))?;
    resolve(file, overrides)
}

fn resolve(file: ConfigFile, overrides: Overrides) -> Result<RunConfig, ConfigError> {
    if file.n == 0 {
        return Err(err("n", "number of variables must be at least 1"));
    }
    if file.alpha.len() != file.n {
        return Err(err(
            "alpha",
            format!("expected {} entries, got {}", file.n, file.alpha.len()),
        ));
    }
    if file.lambda.len() != file.n {
        return Err(err(
            "lambda",
            format!("expected {} entries, got {}", file.n, file.lambda.len()),
        ));
    }
    for (i, l) in file.lambda.iter().enumerate() {
        if !l.is_finite() || *l <= 0.0 {
            return Err(err(
                &format!("lambda[{i}]"),
                format!("weight {l} must be a positive finite real"),
            ));
        }
    }
    let alpha = MultiIndex::new(file.alpha.clone());

    // Missing μ entries default to 1; keys must name family members.
    let mut mu_map: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    let family = polydisc_kernels::multiindex::index_family(&alpha);
    for member in family.members() {
        mu_map.insert(member.clone(), 1.0);
    }
    if let Some(user) = &file.mu {
        for (key, value) in user {
            let idx: MultiIndex = key
                .parse()
                .map_err(|e| err(&format!("mu.{key}"), format!("{e}")))?;
            if idx.dim() != file.n {
                return Err(err(
                    &format!("mu.{key}"),
                    format!("index has {} coordinates, expected {}", idx.dim(), file.n),
                ));
            }
            if !family.contains(&idx) {
                return Err(err(
                    &format!("mu.{key}"),
                    format!("index is not in the family of alpha = {alpha}"),
                ));
            }
            if !value.is_finite() || *value <= 0.0 {
                return Err(err(
                    &format!("mu.{key}"),
                    format!("coefficient {value} must be a positive finite real"),
                ));
            }
            mu_map.insert(idx, *value);
        }
    }
    let params = KernelParams::from_mu_map(alpha.clone(), file.lambda.clone(), &mu_map)
        .map_err(|e| err("mu", format!("{e}")))?;

    let samples = overrides.samples.or(file.samples).unwrap_or(100);
    if samples == 0 {
        return Err(err("samples", "need at least one sample"));
    }
    let min_degree = alpha.degree() + 2;
    let degree = file.degree.unwrap_or_else(|| min_degree.max(4));
    if degree < min_degree {
        return Err(err(
            "degree",
            format!("cutoff {degree} below the minimum {min_degree} for alpha = {alpha}"),
        ));
    }
    let taylor_order = file.taylor_order.unwrap_or(2 * alpha.degree() + 2);
    if taylor_order < 2 {
        return Err(err("taylor_order", "need order at least 2"));
    }
    if let Some(tols) = &file.tolerances {
        for (name, v) in tols {
            if !v.is_finite() || *v <= 0.0 {
                return Err(err(
                    &format!("tolerances.{name}"),
                    format!("threshold {v} must be a positive finite real"),
                ));
            }
        }
    }
    let quadrature = match &file.quadrature {
        Some(q) => {
            if !(q.radius > 0.0 && q.radius < 1.0) {
                return Err(err(
                    "quadrature.radius",
                    format!("radius {} must lie in (0, 1)", q.radius),
                ));
            }
            if q.nodes < taylor_order + 2 {
                return Err(err(
                    "quadrature.nodes",
                    format!(
                        "{} nodes cannot resolve taylor order {taylor_order}; need at least {}",
                        q.nodes,
                        taylor_order + 2
                    ),
                ));
            }
            Quadrature::new(q.radius, q.nodes)
                .map_err(|e| err("quadrature", format!("{e}")))?
        }
        None => Quadrature::default(),
    };

    Ok(RunConfig {
        params,
        seed: overrides.seed.or(file.seed).unwrap_or(7),
        samples,
        degree,
        taylor_order,
        tolerances: file.tolerances.unwrap_or_default(),
        quadrature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<RunConfig, ConfigError> {
        let file: ConfigFile = serde_json::from_str(json).map_err(|e| ConfigError {
            field: "<json>".into(),
            message: e.to_string(),
        })?;
        resolve(file, Overrides::default())
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(r#"{"n": 1, "alpha": [2], "lambda": [2.0]}"#).unwrap();
        assert_eq!(cfg.params.r(), 3);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.samples, 100);
        assert_eq!(cfg.degree, 4);
        assert_eq!(cfg.taylor_order, 6);
        assert_eq!(cfg.params.mu(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn partial_mu_fills_with_ones() {
        let cfg = parse(
            r#"{"n": 2, "alpha": [1, 1], "lambda": [1.5, 2.5], "mu": {"1,0": 0.8, "1,1": 1.1}}"#,
        )
        .unwrap();
        assert_eq!(cfg.params.mu(), &[1.0, 0.8, 1.0, 1.0, 1.1]);
    }

    #[test]
    fn field_paths_are_reported() {
        let e = parse(r#"{"n": 2, "alpha": [1], "lambda": [1.0, 2.0]}"#).unwrap_err();
        assert_eq!(e.field, "alpha");
        let e = parse(r#"{"n": 1, "alpha": [1], "lambda": [-1.0]}"#).unwrap_err();
        assert_eq!(e.field, "lambda[0]");
        let e = parse(r#"{"n": 1, "alpha": [1], "lambda": [2.0], "mu": {"5": 1.0}}"#).unwrap_err();
        assert_eq!(e.field, "mu.5");
        let e = parse(
            r#"{"n": 1, "alpha": [1], "lambda": [2.0], "tolerances": {"psd.gram-min-eigenvalue": 0.0}}"#,
        )
        .unwrap_err();
        assert!(e.field.starts_with("tolerances."));
        let e = parse(r#"{"n": 1, "alpha": [1], "lambda": [2.0], "degree": 1}"#).unwrap_err();
        assert_eq!(e.field, "degree");
        let e = parse(
            r#"{"n": 1, "alpha": [1], "lambda": [2.0], "quadrature": {"radius": 0.4, "nodes": 4}}"#,
        )
        .unwrap_err();
        assert_eq!(e.field, "quadrature.nodes");
    }

    #[test]
    fn overrides_win_over_file_values() {
        let file: ConfigFile = serde_json::from_str(
            r#"{"n": 1, "alpha": [1], "lambda": [2.0], "seed": 3, "samples": 10}"#,
        )
        .unwrap();
        let cfg = resolve(
            file,
            Overrides {
                seed: Some(99),
                samples: Some(5),
            },
        )
        .unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.samples, 5);
    }

    #[test]
    fn zero_index_mu_must_stay_unit() {
        let e = parse(r#"{"n": 1, "alpha": [1], "lambda": [2.0], "mu": {"0": 2.0}}"#).unwrap_err();
        assert_eq!(e.field, "mu");
    }
}
