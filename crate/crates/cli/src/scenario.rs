//! Scenario files: one JSON document per run, schema version 1.

use serde::{Deserialize, Serialize};

use offnet_core::GameParameters;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ExanteSingle,
    ExpostSingle,
    ExanteMulti,
    ExpostMultiN2,
    Collusion,
    CollusionMetrics,
    Dynamics,
    Flow,
    Compare,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::ExanteSingle => "exante_single",
            Regime::ExpostSingle => "expost_single",
            Regime::ExanteMulti => "exante_multi",
            Regime::ExpostMultiN2 => "expost_multi_n2",
            Regime::Collusion => "collusion",
            Regime::CollusionMetrics => "collusion_metrics",
            Regime::Dynamics => "dynamics",
            Regime::Flow => "flow",
            Regime::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub n: usize,
    pub d0: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpecConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub halfwidth: Option<f64>,
}

fn default_resolution() -> usize {
    401
}

impl Default for GridSpecConfig {
    fn default() -> Self {
        Self {
            resolution: default_resolution(),
            halfwidth: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub regime: Regime,
    pub params: ParamsSpec,
    /// Regulated side payments; free input of the ex-ante games.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd: Option<Vec<f64>>,
    /// Free ISP price of the single-CP ex-post game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_ps: Option<f64>,
    /// Starting prices (ps1, ps2, pc1, pc2) for dynamics and flow runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpecConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Default output directory; the --out flag wins when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl Scenario {
    /// Structural checks beyond what serde enforces. Returns a schema
    /// violation message on failure.
    pub fn check_schema(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let n = self.params.n;
        if n == 0 {
            return Err("params.n must be at least 1".to_string());
        }
        for (name, v) in [
            ("params.pa", &self.params.pa),
            ("params.gamma", &self.params.gamma),
        ] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(format!("{name} must have length n = {n}"));
                }
            }
        }
        if let Some(pd) = &self.pd {
            let expected = if self.regime == Regime::Collusion {
                n - 1
            } else {
                n
            };
            if pd.len() != expected {
                return Err(format!(
                    "pd must have length {expected} for regime {}",
                    self.regime.name()
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.samples < 2 {
                return Err("sweep.samples must be at least 2".to_string());
            }
            if !sweep.from.is_finite() || !sweep.to.is_finite() {
                return Err("sweep range must be finite".to_string());
            }
            sweep_target(&sweep.parameter, n)?;
        }
        if matches!(self.regime, Regime::Dynamics | Regime::Flow) && self.p0.is_none() {
            return Err(format!("regime {} requires p0", self.regime.name()));
        }
        let required_n = match self.regime {
            Regime::ExanteSingle | Regime::ExpostSingle | Regime::Compare => Some(1),
            Regime::ExpostMultiN2 | Regime::CollusionMetrics | Regime::Dynamics | Regime::Flow => {
                Some(2)
            }
            Regime::ExanteMulti | Regime::Collusion => None,
        };
        if let Some(required) = required_n {
            if n != required {
                return Err(format!(
                    "regime {} needs n = {required}, got n = {n}",
                    self.regime.name()
                ));
            }
        }
        Ok(())
    }

    pub fn game_parameters(&self) -> GameParameters {
        let n = self.params.n;
        let mut params =
            GameParameters::new(n, self.params.d0, self.params.alpha, self.params.beta);
        if let Some(pa) = &self.params.pa {
            params.pa = pa.clone();
        }
        if let Some(gamma) = &self.params.gamma {
            params.gamma = gamma.clone();
        }
        if let Some(pd) = &self.pd {
            if self.regime == Regime::Collusion {
                // Side payments apply to the noncolluding CPs only.
                params.pd = std::iter::once(0.0).chain(pd.iter().copied()).collect();
            } else {
                params.pd = pd.clone();
            }
        }
        params
    }

    /// Side payments as the ex-ante solvers expect them.
    pub fn pd_vector(&self) -> Vec<f64> {
        match (&self.pd, self.regime) {
            (Some(pd), _) => pd.clone(),
            (None, Regime::Collusion) => vec![0.0; self.params.n - 1],
            (None, _) => vec![0.0; self.params.n],
        }
    }
}

/// Which scalar a sweep axis addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    D0,
    Alpha,
    Beta,
    Pa(usize),
    Pd(usize),
    Gamma(usize),
    FreePs,
}

/// Parses a sweep axis name like `pa2`, `gamma1`, `d0`, or `free_ps`.
pub fn sweep_target(name: &str, n: usize) -> Result<SweepTarget, String> {
    let indexed = |prefix: &str| -> Option<Result<usize, String>> {
        name.strip_prefix(prefix).map(|suffix| {
            suffix
                .parse::<usize>()
                .ok()
                .filter(|&i| i >= 1 && i <= n)
                .ok_or(format!("index out of range in sweep parameter '{name}'"))
        })
    };
    match name {
        "d0" => return Ok(SweepTarget::D0),
        "alpha" => return Ok(SweepTarget::Alpha),
        "beta" => return Ok(SweepTarget::Beta),
        "free_ps" => return Ok(SweepTarget::FreePs),
        _ => {}
    }
    if let Some(i) = indexed("pa") {
        return Ok(SweepTarget::Pa(i? - 1));
    }
    if let Some(i) = indexed("pd") {
        return Ok(SweepTarget::Pd(i? - 1));
    }
    if let Some(i) = indexed("gamma") {
        return Ok(SweepTarget::Gamma(i? - 1));
    }
    Err(format!("unknown sweep parameter '{name}'"))
}

/// Applies one sweep sample to a copy of the scenario.
pub fn apply_sweep_value(scenario: &Scenario, target: SweepTarget, value: f64) -> Scenario {
    let mut s = scenario.clone();
    s.sweep = None;
    match target {
        SweepTarget::D0 => s.params.d0 = value,
        SweepTarget::Alpha => s.params.alpha = value,
        SweepTarget::Beta => s.params.beta = value,
        SweepTarget::Pa(i) => {
            let mut pa = s.params.pa.unwrap_or_else(|| vec![0.0; s.params.n]);
            pa[i] = value;
            s.params.pa = Some(pa);
        }
        SweepTarget::Pd(i) => {
            let mut pd = s.pd_vector();
            pd[i] = value;
            s.pd = Some(pd);
        }
        SweepTarget::Gamma(i) => {
            let mut gamma = s.params.gamma.unwrap_or_else(|| vec![0.5; s.params.n]);
            gamma[i] = value;
            s.params.gamma = Some(gamma);
        }
        SweepTarget::FreePs => s.free_ps = Some(value),
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(regime: &str) -> String {
        format!(
            r#"{{"schema_version": 1, "regime": "{regime}",
                 "params": {{"n": 1, "d0": 90.0, "alpha": 9.0, "beta": 0.0, "pa": [3.0]}}}}"#
        )
    }

    #[test]
    fn parses_a_minimal_scenario() {
        let s: Scenario = serde_json::from_str(&minimal("exante_single")).unwrap();
        s.check_schema().unwrap();
        let params = s.game_parameters();
        assert_eq!(params.n, 1);
        assert_eq!(params.pa, vec![3.0]);
        assert_eq!(params.gamma, vec![0.5]);
        assert_eq!(s.pd_vector(), vec![0.0]);
    }

    #[test]
    fn rejects_wrong_schema_version() {
        let text =
            minimal("exante_single").replace("\"schema_version\": 1", "\"schema_version\": 2");
        let s: Scenario = serde_json::from_str(&text).unwrap();
        assert!(s.check_schema().is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_regimes() {
        assert!(serde_json::from_str::<Scenario>(&minimal("nonsense")).is_err());
        let text = minimal("exante_single").replace("\"regime\"", "\"mystery\": 1, \"regime\"");
        assert!(serde_json::from_str::<Scenario>(&text).is_err());
    }

    #[test]
    fn sweep_axes_parse_and_apply() {
        assert_eq!(sweep_target("pa2", 2).unwrap(), SweepTarget::Pa(1));
        assert_eq!(sweep_target("gamma1", 2).unwrap(), SweepTarget::Gamma(0));
        assert!(sweep_target("pa3", 2).is_err());
        assert!(sweep_target("price", 2).is_err());

        let s: Scenario = serde_json::from_str(&minimal("exante_single")).unwrap();
        let swept = apply_sweep_value(&s, SweepTarget::Pa(0), 7.5);
        assert_eq!(swept.params.pa, Some(vec![7.5]));
    }

    #[test]
    fn dynamics_requires_a_start() {
        let text = r#"{"schema_version": 1, "regime": "dynamics",
                       "params": {"n": 2, "d0": 200.0, "alpha": 6.0, "beta": 3.0}}"#;
        let s: Scenario = serde_json::from_str(text).unwrap();
        assert!(s.check_schema().is_err());
    }

    #[test]
    fn regime_arity_is_schema_checked() {
        let text = r#"{"schema_version": 1, "regime": "compare",
                       "params": {"n": 2, "d0": 100.0, "alpha": 10.0, "beta": 2.0}}"#;
        let s: Scenario = serde_json::from_str(text).unwrap();
        assert!(s.check_schema().unwrap_err().contains("needs n = 1"));
    }

    #[test]
    fn collusion_side_payments_cover_the_rest() {
        let text = r#"{"schema_version": 1, "regime": "collusion",
                       "params": {"n": 2, "d0": 100.0, "alpha": 10.0, "beta": 2.0},
                       "pd": [1.5]}"#;
        let s: Scenario = serde_json::from_str(text).unwrap();
        s.check_schema().unwrap();
        assert_eq!(s.game_parameters().pd, vec![0.0, 1.5]);
        assert_eq!(s.pd_vector(), vec![1.5]);
    }
}
