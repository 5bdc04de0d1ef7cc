//! Flat key-value experiment specs. A spec file is plain text, one `key =
//! value` pair per line, `#` comments and blank lines ignored. Documented
//! keys: `problem`, `m`, `n`, `seed`, `mu`, `kappa_bar_factor`, `algorithms`,
//! `max_iters`, `tol`, `x0_radius`. Anything else is an error, as are
//! duplicate keys.

use super::MetricMethod;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue {
        line: usize,
        key: &'static str,
        msg: String,
    },
    #[error("unknown problem `{0}`; expected logsumexp or mushrooms")]
    UnknownProblem(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
}

/// Which objective family the experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Random log-sum-exp instance of shape `m x n`.
    LogSumExp,
    /// Synthetic one-hot logistic benchmark in the mushrooms layout
    /// (8124 x 117); ignores `m` and `n`.
    Mushrooms,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::LogSumExp => "logsumexp",
            ProblemKind::Mushrooms => "mushrooms",
        }
    }
}

/// Every solver the runner can dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmId {
    CubicSr1,
    GradSr1,
    GradRegSr1,
    Gd,
    HeavyBall,
    CubicNewton,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::CubicSr1,
        AlgorithmId::GradSr1,
        AlgorithmId::GradRegSr1,
        AlgorithmId::Gd,
        AlgorithmId::HeavyBall,
        AlgorithmId::CubicNewton,
    ];

    /// Stable name used in spec files and CSV file names.
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::CubicSr1 => "cubic_sr1",
            AlgorithmId::GradSr1 => "grad_sr1",
            AlgorithmId::GradRegSr1 => "grad_reg_sr1",
            AlgorithmId::Gd => "gd",
            AlgorithmId::HeavyBall => "heavy_ball",
            AlgorithmId::CubicNewton => "cubic_newton",
        }
    }

    pub fn parse(name: &str) -> Result<Self, SpecError> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| SpecError::UnknownAlgorithm(name.to_string()))
    }

    /// The audit/envelope variant, when this is one of the quasi-Newton
    /// methods rather than a baseline.
    pub fn metric_method(self) -> Option<MetricMethod> {
        match self {
            AlgorithmId::CubicSr1 => Some(MetricMethod::Cubic),
            AlgorithmId::GradSr1 => Some(MetricMethod::Grad),
            AlgorithmId::GradRegSr1 => Some(MetricMethod::GradReg),
            _ => None,
        }
    }
}

/// Parsed experiment description; see the module doc for the file format.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub mu: f64,
    /// Trace budget as a multiple of the gradient Lipschitz constant.
    pub kappa_bar_factor: f64,
    pub algorithms: Vec<AlgorithmId>,
    pub max_iters: usize,
    pub tol: f64,
    /// Zero starts at the origin; positive draws the start uniformly from
    /// the ball of this radius using the spec seed.
    pub x0_radius: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            problem: ProblemKind::LogSumExp,
            m: 100,
            n: 50,
            seed: 1,
            mu: 1.0,
            kappa_bar_factor: 3.0,
            algorithms: Vec::new(),
            max_iters: 1000,
            tol: 1e-10,
            x0_radius: 0.0,
        }
    }
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let mut spec = ExperimentSpec::default();
    let mut seen: Vec<&'static str> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SpecError::Malformed {
            line,
            text: content.to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();

        let canonical = match key {
            "problem" => "problem",
            "m" => "m",
            "n" => "n",
            "seed" => "seed",
            "mu" => "mu",
            "kappa_bar_factor" => "kappa_bar_factor",
            "algorithms" => "algorithms",
            "max_iters" => "max_iters",
            "tol" => "tol",
            "x0_radius" => "x0_radius",
            other => {
                return Err(SpecError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        };
        if seen.contains(&canonical) {
            return Err(SpecError::DuplicateKey {
                line,
                key: canonical.to_string(),
            });
        }
        seen.push(canonical);

        match canonical {
            "problem" => {
                spec.problem = match value {
                    "logsumexp" => ProblemKind::LogSumExp,
                    "mushrooms" => ProblemKind::Mushrooms,
                    other => return Err(SpecError::UnknownProblem(other.to_string())),
                }
            }
            "m" => spec.m = parse_num(line, "m", value)?,
            "n" => spec.n = parse_num(line, "n", value)?,
            "seed" => spec.seed = parse_num(line, "seed", value)?,
            "mu" => spec.mu = parse_pos(line, "mu", value)?,
            "kappa_bar_factor" => {
                spec.kappa_bar_factor = parse_pos(line, "kappa_bar_factor", value)?
            }
            "max_iters" => spec.max_iters = parse_num(line, "max_iters", value)?,
            "tol" => spec.tol = parse_nonneg(line, "tol", value)?,
            "x0_radius" => spec.x0_radius = parse_nonneg(line, "x0_radius", value)?,
            "algorithms" => {
                spec.algorithms = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(AlgorithmId::parse)
                    .collect::<Result<_, _>>()?;
            }
            _ => unreachable!("canonical keys are exhaustive"),
        }
    }
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    parse_spec(&fs::read_to_string(path)?)
}

fn parse_num<T: std::str::FromStr>(
    line: usize,
    key: &'static str,
    value: &str,
) -> Result<T, SpecError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| SpecError::BadValue {
        line,
        key,
        msg: e.to_string(),
    })
}

fn parse_pos(line: usize, key: &'static str, value: &str) -> Result<f64, SpecError> {
    let v: f64 = parse_num(line, key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(SpecError::BadValue {
            line,
            key,
            msg: format!("{v} is not a positive finite number"),
        })
    }
}

fn parse_nonneg(line: usize, key: &'static str, value: &str) -> Result<f64, SpecError> {
    let v: f64 = parse_num(line, key, value)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(SpecError::BadValue {
            line,
            key,
            msg: format!("{v} is not a nonnegative finite number"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_spec_round_trips() {
        let text = "\
# desk setup
problem = logsumexp
m = 100
n = 50
seed = 1
mu = 1.0
kappa_bar_factor = 3
algorithms = cubic_sr1, grad_sr1, grad_reg_sr1, gd, heavy_ball, cubic_newton
max_iters = 500
tol = 1e-9
x0_radius = 0.5
";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.problem, ProblemKind::LogSumExp);
        assert_eq!(spec.m, 100);
        assert_eq!(spec.n, 50);
        assert_eq!(spec.algorithms.len(), 6);
        assert_eq!(spec.algorithms[0], AlgorithmId::CubicSr1);
        assert_eq!(spec.tol, 1e-9);
        assert_eq!(spec.x0_radius, 0.5);
    }

    #[test]
    fn unknown_key_is_rejected_with_line_number() {
        let err = parse_spec("problem = logsumexp\nstep_size = 3\n").unwrap_err();
        match err {
            SpecError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "step_size");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_rejected() {
        assert!(matches!(
            parse_spec("seed = 1\nseed = 2\n"),
            Err(SpecError::DuplicateKey { .. })
        ));
    }

    #[test]
    fn unknown_algorithm_and_problem_are_rejected() {
        assert!(matches!(
            parse_spec("algorithms = bfgs\n"),
            Err(SpecError::UnknownAlgorithm(_))
        ));
        assert!(matches!(
            parse_spec("problem = rosenbrock\n"),
            Err(SpecError::UnknownProblem(_))
        ));
    }

    #[test]
    fn nonpositive_mu_is_rejected() {
        assert!(matches!(
            parse_spec("mu = 0\n"),
            Err(SpecError::BadValue { key: "mu", .. })
        ));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let spec = parse_spec("\n# nothing\n  seed = 9 # trailing\n\n").unwrap();
        assert_eq!(spec.seed, 9);
        assert!(spec.algorithms.is_empty());
    }
}
