//! Plain-text `key=value` run configuration.
//!
//! Pairs are separated by whitespace or newlines; `#` starts a comment.
//! Later occurrences of a key override earlier ones, which is how command
//! line overrides are applied.

use std::collections::BTreeMap;
use std::fmt;

use sphere_fv::flux::{Component, ComponentFlux, FluxModel, Weight};
use sphere_fv::godunov::{Order, Stepping, DEFAULT_CFL, DEFAULT_DT_MAX};
use sphere_fv::grid::{build_grid, Grid, GridError, Reduction, DEFAULT_THRESHOLD};
use sphere_fv::grp::Limiter;
use sphere_fv::testcases::SHOCK_TIME;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{}: expected key=value, found `{token}`", location(*line))]
    Syntax { line: usize, token: String },
    #[error("{}: unknown key `{key}`", location(*line))]
    UnknownKey { line: usize, key: String },
    #[error("{}: bad value `{value}` for `{key}`: {reason}", location(*line))]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("test_case required")]
    MissingTestCase,
    #[error("{}: `{key}` {reason}", location(*line))]
    Inconsistent {
        line: usize,
        key: String,
        reason: String,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Line 0 marks a value given on the command line.
fn location(line: usize) -> String {
    if line == 0 {
        "command line".to_string()
    } else {
        format!("line {line}")
    }
}

const KEYS: &[&str] = &[
    "test_case",
    "n_lat",
    "n_lon_equator",
    "reduction",
    "threshold",
    "dt",
    "cfl",
    "dt_max",
    "order",
    "limiter",
    "t_final",
    "init",
    "field_output",
    "diagnostics_output",
    "snapshots",
    "snapshot_prefix",
    "range_check",
    "f1",
    "f2",
    "f3",
    "r1",
    "r2",
    "r3",
    "initial",
    "initial_value",
];

/// A value with the line it came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Ordered key/value pairs before interpretation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairs {
    map: BTreeMap<String, Entry>,
}

impl Pairs {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Pairs::default();
        pairs.extend_from(text, 0)?;
        Ok(pairs)
    }

    /// Adds pairs from `text`; line numbers are offset by `first_line`.
    pub fn extend_from(&mut self, text: &str, first_line: usize) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = first_line + i + 1;
            let content = raw.split('#').next().unwrap_or("");
            for token in content.split_whitespace() {
                self.insert_token(token, line)?;
            }
        }
        Ok(())
    }

    /// Adds one `key=value` token, as given on a command line.
    pub fn insert_token(&mut self, token: &str, line: usize) -> Result<(), ConfigError> {
        let Some((key, value)) = token.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                token: token.to_string(),
            });
        };
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        self.map.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn line_of(&self, key: &str) -> usize {
        self.get(key).map_or(0, |e| e.line)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|e| {
                e.value.parse::<T>().map_err(|err| ConfigError::BadValue {
                    line: e.line,
                    key: key.to_string(),
                    value: e.value.clone(),
                    reason: err.to_string(),
                })
            })
            .transpose()
    }

    fn bad(&self, key: &str, reason: &str) -> ConfigError {
        let e = self.get(key).expect("key present");
        ConfigError::BadValue {
            line: e.line,
            key: key.to_string(),
            value: e.value.clone(),
            reason: reason.to_string(),
        }
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        e.value
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|err| self.bad(key, &err.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCase {
    Equatorial,
    Steady,
    Confined,
    Custom,
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestCase::Equatorial => "equatorial",
            TestCase::Steady => "steady",
            TestCase::Confined => "confined",
            TestCase::Custom => "custom",
        })
    }
}

/// Initial data of a custom run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CustomInitial {
    Constant(f64),
    X1,
    X2,
    X3,
    SinLambda,
}

/// One flux component of a custom model, as written in the config.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxSpec {
    Zero,
    Linear(f64),
    Burgers(f64),
    Poly(Vec<f64>),
}

impl FluxSpec {
    fn parse(text: &str) -> Result<Self, String> {
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let nums = parse_numbers(args)?;
        let one = |nums: &[f64]| match nums {
            [a] => Ok(*a),
            _ => Err(format!("`{name}` takes one coefficient")),
        };
        match name {
            "zero" if nums.is_empty() => Ok(FluxSpec::Zero),
            "linear" => one(&nums).map(FluxSpec::Linear),
            "burgers" => one(&nums).map(FluxSpec::Burgers),
            "poly" => Ok(FluxSpec::Poly(nums)),
            _ => Err("expected zero, linear:c, burgers:a or poly:c0,c1,...".into()),
        }
    }

    fn build(&self) -> ComponentFlux {
        match self {
            FluxSpec::Zero => ComponentFlux::zero(),
            FluxSpec::Linear(c) => ComponentFlux::linear(*c),
            FluxSpec::Burgers(a) => ComponentFlux::burgers(*a),
            FluxSpec::Poly(c) => ComponentFlux::polynomial(c.clone()),
        }
    }
}

/// Spatial weight `r_j` of a custom model.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Identity,
    CutoffPsi,
    Poly(Vec<f64>),
}

impl WeightSpec {
    fn parse(text: &str) -> Result<Self, String> {
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        match (name, args) {
            ("identity", "") => Ok(WeightSpec::Identity),
            ("cutoff_psi", "") => Ok(WeightSpec::CutoffPsi),
            ("poly", _) => parse_numbers(args).map(WeightSpec::Poly),
            _ => Err("expected identity, cutoff_psi or poly:c0,c1,...".into()),
        }
    }

    fn build(&self) -> Weight {
        match self {
            WeightSpec::Identity => Weight::Identity,
            WeightSpec::CutoffPsi => Weight::CutoffPsi,
            WeightSpec::Poly(c) => Weight::Polynomial(sphere_fv::poly::Polynomial::new(c.clone())),
        }
    }
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

/// Flux and initial data of `test_case=custom`, with
/// `h = Σ r_j(x_j) f_j(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomCase {
    pub f: [FluxSpec; 3],
    pub r: [WeightSpec; 3],
    pub initial: CustomInitial,
}

impl CustomCase {
    pub fn model(&self) -> FluxModel {
        let comp = |j: usize| Component {
            f: self.f[j].build(),
            r: self.r[j].build(),
        };
        FluxModel::separable("custom", [comp(0), comp(1), comp(2)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_lat: usize,
    pub n_lon_equator: usize,
    pub reduction: Reduction,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, GridError> {
        build_grid(self.n_lat, self.n_lon_equator, self.reduction)
    }

    pub fn from_pairs(p: &Pairs) -> Result<Self, ConfigError> {
        let n_lat = p.parsed::<usize>("n_lat")?.unwrap_or(60);
        let n_lon_equator = p.parsed::<usize>("n_lon_equator")?.unwrap_or(256);
        let threshold = p.parsed::<f64>("threshold")?;
        let reduction = match p.get("reduction").map(|e| e.value.as_str()) {
            None | Some("halving") => Reduction::Halving {
                threshold: threshold.unwrap_or(DEFAULT_THRESHOLD),
            },
            Some("none") => {
                if threshold.is_some() {
                    return Err(ConfigError::Inconsistent {
                        line: p.line_of("threshold"),
                        key: "threshold".into(),
                        reason: "requires reduction=halving".into(),
                    });
                }
                Reduction::None
            }
            Some(_) => return Err(p.bad("reduction", "expected none or halving")),
        };
        Ok(Self {
            n_lat,
            n_lon_equator,
            reduction,
        })
    }
}

/// Whether cells start from centre samples or exact averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Sample,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub test_case: TestCase,
    pub custom: Option<CustomCase>,
    pub grid: GridSpec,
    pub stepping: Stepping,
    pub order: Order,
    pub t_final: f64,
    pub init: InitMode,
    pub field_output: Option<String>,
    pub diagnostics_output: Option<String>,
    pub snapshots: Vec<f64>,
    pub snapshot_prefix: String,
    pub range_check: bool,
}

impl RunConfig {
    pub fn from_pairs(p: &Pairs) -> Result<Self, ConfigError> {
        let test_case = match p.get("test_case").map(|e| e.value.as_str()) {
            None => return Err(ConfigError::MissingTestCase),
            Some("equatorial") => TestCase::Equatorial,
            Some("steady") => TestCase::Steady,
            Some("confined") => TestCase::Confined,
            Some("custom") => TestCase::Custom,
            Some(_) => {
                return Err(p.bad("test_case", "expected equatorial, steady, confined or custom"))
            }
        };

        let custom_keys = ["f1", "f2", "f3", "r1", "r2", "r3", "initial", "initial_value"];
        let custom = if test_case == TestCase::Custom {
            let mut f = [FluxSpec::Zero, FluxSpec::Zero, FluxSpec::Zero];
            let mut r = [WeightSpec::Identity, WeightSpec::Identity, WeightSpec::Identity];
            for j in 0..3 {
                let key = format!("f{}", j + 1);
                if let Some(e) = p.get(&key) {
                    f[j] = FluxSpec::parse(&e.value).map_err(|m| p.bad(&key, &m))?;
                }
                let key = format!("r{}", j + 1);
                if let Some(e) = p.get(&key) {
                    r[j] = WeightSpec::parse(&e.value).map_err(|m| p.bad(&key, &m))?;
                }
            }
            let value = p.parsed::<f64>("initial_value")?;
            let initial = match p.get("initial").map(|e| e.value.as_str()) {
                None | Some("constant") => CustomInitial::Constant(value.unwrap_or(0.0)),
                Some("x1") => CustomInitial::X1,
                Some("x2") => CustomInitial::X2,
                Some("x3") => CustomInitial::X3,
                Some("sin_lambda") => CustomInitial::SinLambda,
                Some(_) => return Err(p.bad("initial", "expected constant, x1, x2, x3 or sin_lambda")),
            };
            if value.is_some() && !matches!(initial, CustomInitial::Constant(_)) {
                return Err(ConfigError::Inconsistent {
                    line: p.line_of("initial_value"),
                    key: "initial_value".into(),
                    reason: "only applies to initial=constant".into(),
                });
            }
            Some(CustomCase { f, r, initial })
        } else {
            if let Some(key) = custom_keys.iter().find(|k| p.get(k).is_some()) {
                return Err(ConfigError::Inconsistent {
                    line: p.line_of(key),
                    key: key.to_string(),
                    reason: "requires test_case=custom".into(),
                });
            }
            None
        };

        let grid = GridSpec::from_pairs(p)?;

        let dt = p.parsed::<f64>("dt")?;
        let cfl = p.parsed::<f64>("cfl")?;
        let dt_max = p.parsed::<f64>("dt_max")?;
        let stepping = match (dt, cfl) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Inconsistent {
                    line: p.line_of("cfl"),
                    key: "cfl".into(),
                    reason: "conflicts with dt".into(),
                })
            }
            (Some(dt), None) => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(p.bad("dt", "must be positive"));
                }
                if dt_max.is_some() {
                    return Err(ConfigError::Inconsistent {
                        line: p.line_of("dt_max"),
                        key: "dt_max".into(),
                        reason: "only applies to cfl stepping".into(),
                    });
                }
                Stepping::Fixed(dt)
            }
            (None, cfl) => {
                let cfl = cfl.unwrap_or(DEFAULT_CFL);
                if !(cfl > 0.0 && cfl <= 1.0) {
                    return Err(p.bad("cfl", "must lie in (0, 1]"));
                }
                let dt_max = dt_max.unwrap_or(DEFAULT_DT_MAX);
                if !(dt_max > 0.0 && dt_max.is_finite()) {
                    return Err(p.bad("dt_max", "must be positive"));
                }
                Stepping::Cfl { cfl, dt_max }
            }
        };

        let limiter = match p.get("limiter").map(|e| e.value.as_str()) {
            None | Some("minmod") => Limiter::Minmod,
            Some("none") => Limiter::None,
            Some(_) => return Err(p.bad("limiter", "expected minmod or none")),
        };
        let order = match p.parsed::<u8>("order")? {
            None | Some(2) => Order::Second(limiter),
            Some(1) => {
                if p.get("limiter").is_some() {
                    return Err(ConfigError::Inconsistent {
                        line: p.line_of("limiter"),
                        key: "limiter".into(),
                        reason: "requires order=2".into(),
                    });
                }
                Order::First
            }
            Some(_) => return Err(p.bad("order", "expected 1 or 2")),
        };

        let t_final = p.parsed::<f64>("t_final")?.unwrap_or(match test_case {
            TestCase::Equatorial => SHOCK_TIME,
            _ => 5.0,
        });
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(p.bad("t_final", "must be non-negative"));
        }

        let init = match p.get("init").map(|e| e.value.as_str()) {
            None | Some("sample") => InitMode::Sample,
            Some("exact") => {
                if test_case != TestCase::Equatorial {
                    return Err(ConfigError::Inconsistent {
                        line: p.line_of("init"),
                        key: "init".into(),
                        reason: "exact averages are only available for test_case=equatorial".into(),
                    });
                }
                InitMode::Exact
            }
            Some(_) => return Err(p.bad("init", "expected sample or exact")),
        };

        let snapshots = p.float_list("snapshots")?.unwrap_or_default();
        if snapshots.windows(2).any(|w| w[1] < w[0]) {
            return Err(p.bad("snapshots", "times must be sorted"));
        }
        if let Some(&t) = snapshots.iter().find(|&&t| t < 0.0 || t > t_final) {
            return Err(ConfigError::Inconsistent {
                line: p.line_of("snapshots"),
                key: "snapshots".into(),
                reason: format!("time {t} outside [0, t_final = {t_final}]"),
            });
        }

        let range_check = match p.get("range_check").map(|e| e.value.as_str()) {
            None | Some("on") => true,
            Some("off") => false,
            Some(_) => return Err(p.bad("range_check", "expected on or off")),
        };

        Ok(Self {
            test_case,
            custom,
            grid,
            stepping,
            order,
            t_final,
            init,
            field_output: p.get("field_output").map(|e| e.value.clone()),
            diagnostics_output: p.get("diagnostics_output").map(|e| e.value.clone()),
            snapshots,
            snapshot_prefix: p
                .get("snapshot_prefix")
                .map_or_else(|| "snapshot".to_string(), |e| e.value.clone()),
            range_check,
        })
    }

    pub fn limiter_name(&self) -> &'static str {
        match self.order {
            Order::First => "none",
            Order::Second(Limiter::Minmod) => "minmod",
            Order::Second(Limiter::None) => "none",
        }
    }
}

/// Parses and validates a full configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_pairs(&Pairs::parse(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_steady_config() {
        let c = parse_config("test_case=steady t_final=5 dt=0.05 n_lat=60 n_lon_equator=256").unwrap();
        assert_eq!(c.test_case, TestCase::Steady);
        assert_eq!(c.stepping, Stepping::Fixed(0.05));
        assert_eq!(c.order, Order::Second(Limiter::Minmod));
        assert_eq!(c.grid.n_lat, 60);
        assert_eq!(c.grid.reduction, Reduction::default());
        assert_eq!(c.t_final, 5.0);
    }

    #[test]
    fn defaults() {
        let c = parse_config("test_case=equatorial").unwrap();
        assert_eq!(
            c.stepping,
            Stepping::Cfl {
                cfl: 0.45,
                dt_max: 0.1
            }
        );
        assert_eq!(c.t_final, SHOCK_TIME);
        assert!(c.range_check);
    }

    #[test]
    fn empty_text_needs_test_case() {
        assert_eq!(parse_config(""), Err(ConfigError::MissingTestCase));
        assert_eq!(parse_config("# nothing\n\n").unwrap_err().to_string(), "test_case required");
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse_config("test_case=steady\nbogus=1").unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey { line: 2, key: "bogus".into() });
        let e = parse_config("test_case=steady\n\norder=3").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("order"), "{e}");
        let e = parse_config("test_case=steady dt=0.1 cfl=0.3").unwrap_err();
        assert!(matches!(e, ConfigError::Inconsistent { ref key, .. } if key == "cfl"));
        let e = parse_config("test_case=steady\nn_lat=abc").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("n_lat"));
        assert!(matches!(parse_config("test_case steady"), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn snapshots_are_validated() {
        let c = parse_config("test_case=steady t_final=1 snapshots=0.25,0.5").unwrap();
        assert_eq!(c.snapshots, vec![0.25, 0.5]);
        let e = parse_config("test_case=steady t_final=1 snapshots=0.5,2").unwrap_err();
        assert!(matches!(e, ConfigError::Inconsistent { ref key, .. } if key == "snapshots"));
        assert!(parse_config("test_case=steady t_final=1 snapshots=0.5,0.25").is_err());
    }

    #[test]
    fn comments_and_overrides() {
        let mut p = Pairs::parse("test_case=steady # the steady case\norder=1").unwrap();
        p.insert_token("order=2", 0).unwrap();
        let c = RunConfig::from_pairs(&p).unwrap();
        assert_eq!(c.order.as_number(), 2);
    }

    #[test]
    fn custom_case() {
        let c = parse_config("test_case=custom f1=linear:2 f3=poly:0,0,-1 r1=cutoff_psi initial=x1").unwrap();
        let cc = c.custom.unwrap();
        assert_eq!(cc.f[0], FluxSpec::Linear(2.0));
        assert_eq!(cc.f[1], FluxSpec::Zero);
        assert_eq!(cc.f[2], FluxSpec::Poly(vec![0.0, 0.0, -1.0]));
        assert_eq!(cc.r[0], WeightSpec::CutoffPsi);
        assert_eq!(cc.initial, CustomInitial::X1);
        let e = parse_config("test_case=custom\nf2=burgers:1,2").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("f2"), "{e}");
        assert!(parse_config("test_case=custom r3=sin").is_err());
        assert!(parse_config("test_case=steady f1=1").is_err());
        assert!(parse_config("test_case=custom initial=x2 initial_value=3").is_err());
    }

    #[test]
    fn inconsistent_combinations() {
        assert!(parse_config("test_case=steady order=1 limiter=none").is_err());
        assert!(parse_config("test_case=steady reduction=none threshold=0.4").is_err());
        assert!(parse_config("test_case=steady init=exact").is_err());
        assert!(parse_config("test_case=steady dt=0.1 dt_max=0.2").is_err());
        assert!(parse_config("test_case=steady cfl=1.5").is_err());
        assert!(parse_config("test_case=steady t_final=-1").is_err());
    }
}
