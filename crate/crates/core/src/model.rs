//! Market parameters, price profiles, utility evaluation, and the shared
//! matrix constructions used by every solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Constants of the pricing game: one monopoly ISP, `n` content providers,
/// and a linear internaut demand response.
///
/// Prices are per unit demand. `pd` holds the regulated side payments
/// currently in force (solvers that treat the side payment as a free input
/// take it as an explicit argument instead). `gamma` holds the relative
/// weight of the ISP against each CP and defaults to 1/2, the symmetric
/// bargaining case.
#[derive(Debug, Clone, PartialEq)]
pub struct GameParameters {
    /// Number of content providers (>= 1).
    pub n: usize,
    /// Demand intercept, shared by every content class.
    pub d0: f64,
    /// Own-price sensitivity of demand.
    pub alpha: f64,
    /// Cross-price sensitivity of demand (>= 0; 0 decouples the contents).
    pub beta: f64,
    /// Advertising revenue per unit demand earned by each CP (>= 0).
    pub pa: Vec<f64>,
    /// Regulated side payment per unit demand from each CP to the ISP
    /// (may be negative).
    pub pd: Vec<f64>,
    /// ISP-vs-CP relative weights, each strictly inside (0, 1).
    pub gamma: Vec<f64>,
}

impl GameParameters {
    /// Parameters with zero advertising revenue, zero side payments, and
    /// symmetric weights 1/2.
    pub fn new(n: usize, d0: f64, alpha: f64, beta: f64) -> Self {
        Self {
            n,
            d0,
            alpha,
            beta,
            pa: vec![0.0; n],
            pd: vec![0.0; n],
            gamma: vec![0.5; n],
        }
    }

    /// Convenience constructor for the single-CP game.
    pub fn single(d0: f64, alpha: f64, pa: f64) -> Self {
        Self::new(1, d0, alpha, 0.0).with_pa(vec![pa])
    }

    pub fn with_pa(mut self, pa: Vec<f64>) -> Self {
        self.pa = pa;
        self
    }

    pub fn with_pd(mut self, pd: Vec<f64>) -> Self {
        self.pd = pd;
        self
    }

    pub fn with_gamma(mut self, gamma: Vec<f64>) -> Self {
        self.gamma = gamma;
        self
    }

    /// Ratio of cross to own price sensitivity, `tau = beta / alpha`.
    pub fn tau(&self) -> f64 {
        self.beta / self.alpha
    }

    /// Checks every parameter invariant and reports each violation.
    pub fn validate(&self) -> ValidityReport {
        let mut violations = Vec::new();
        if self.n < 1 {
            violations.push("n >= 1 violated".to_string());
        }
        if !(self.d0 > 0.0) {
            violations.push(format!("D0 > 0 violated (D0 = {})", self.d0));
        }
        if !(self.alpha > 0.0) {
            violations.push(format!("alpha > 0 violated (alpha = {})", self.alpha));
        }
        if !(self.beta >= 0.0) {
            violations.push(format!("beta >= 0 violated (beta = {})", self.beta));
        }
        // Boundary rejected: the solver inverses degenerate at equality.
        if self.n >= 1 && !(self.alpha > (self.n as f64 - 1.0) * self.beta) {
            violations.push(format!(
                "alpha > (n-1)beta violated (alpha = {}, (n-1)beta = {})",
                self.alpha,
                (self.n as f64 - 1.0) * self.beta
            ));
        }
        for (name, v) in [("pa", &self.pa), ("pd", &self.pd), ("gamma", &self.gamma)] {
            if v.len() != self.n {
                violations.push(format!("{name} length {} != n = {}", v.len(), self.n));
            }
        }
        for (i, &a) in self.pa.iter().enumerate() {
            if !(a >= 0.0) {
                violations.push(format!("pa >= 0 violated (pa[{i}] = {a})"));
            }
        }
        for (i, &g) in self.gamma.iter().enumerate() {
            if !(g > 0.0 && g < 1.0) {
                violations.push(format!(
                    "gamma in open interval violated (gamma[{i}] = {g})"
                ));
            }
        }
        for (name, v) in [("pa", &self.pa), ("pd", &self.pd)] {
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite() {
                    violations.push(format!("{name}[{i}] is not finite"));
                }
            }
        }
        ValidityReport { violations }
    }

    /// Errors with the full violation list unless all invariants hold.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(report.violations.join("; ")))
        }
    }

    /// Errors unless the game has exactly `expected` content providers.
    pub fn ensure_n(&self, expected: usize) -> Result<()> {
        if self.n == expected {
            Ok(())
        } else {
            Err(Error::WrongPlayerCount {
                expected,
                got: self.n,
            })
        }
    }
}

/// Outcome of [`GameParameters::validate`]; empty means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidityReport {
    pub violations: Vec<String>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// ISP and CP access prices per content. Demand depends on the two vectors
/// only through their sum, the net internaut price.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceProfile {
    pub ps: Vec<f64>,
    pub pc: Vec<f64>,
}

impl PriceProfile {
    pub fn new(ps: Vec<f64>, pc: Vec<f64>) -> Self {
        assert_eq!(ps.len(), pc.len(), "price vectors must have equal length");
        Self { ps, pc }
    }

    /// Net internaut price per content, `p_i = ps_i + pc_i`.
    pub fn net(&self) -> Vec<f64> {
        self.ps.iter().zip(&self.pc).map(|(s, c)| s + c).collect()
    }
}

/// Matrices shared by the multi-CP solvers:
/// `A` has diagonal `alpha` and off-diagonal `-beta`,
/// `B` has diagonal `alpha` and off-diagonal `-beta/2`,
/// `E` is the all-ones vector.
#[derive(Debug, Clone)]
pub struct ModelMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DVector<f64>,
}

impl ModelMatrices {
    /// Eigenvalues of `A` in closed form: `alpha + beta` with multiplicity
    /// `n - 1` and `alpha - (n-1) beta` once.
    pub fn a_eigenvalues_closed_form(params: &GameParameters) -> Vec<f64> {
        let mut eigs = vec![params.alpha + params.beta; params.n];
        eigs[0] = params.alpha - (params.n as f64 - 1.0) * params.beta;
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eigs
    }
}

/// Builds the shared matrices for a valid parameter set.
pub fn build_matrices(params: &GameParameters) -> Result<ModelMatrices> {
    params.ensure_valid()?;
    let n = params.n;
    let a = DMatrix::from_fn(
        n,
        n,
        |i, j| {
            if i == j {
                params.alpha
            } else {
                -params.beta
            }
        },
    );
    let b = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            params.alpha
        } else {
            -params.beta / 2.0
        }
    });
    Ok(ModelMatrices {
        a,
        b,
        e: DVector::from_element(n, 1.0),
    })
}

/// Per-agent revenues at a price profile and realized demand vector.
#[derive(Debug, Clone)]
pub struct Utilities {
    /// ISP total revenue, `sum_i d_i (ps_i + pd_i)`.
    pub u_isp: f64,
    /// CP revenues, `u_cp_i = d_i (pc_i + pa_i - pd_i)`.
    pub u_cp: Vec<f64>,
    /// ISP revenue per unit demand per content, `ps_i + pd_i`.
    pub r_isp: Vec<f64>,
    /// CP revenue per unit demand, `pc_i + pa_i - pd_i`.
    pub r_cp: Vec<f64>,
}

/// Evaluates all revenues; demands must be componentwise nonnegative.
pub fn utilities(
    params: &GameParameters,
    profile: &PriceProfile,
    demands: &[f64],
) -> Result<Utilities> {
    for (i, &d) in demands.iter().enumerate() {
        if d < 0.0 {
            return Err(Error::NegativeDemand { index: i, value: d });
        }
    }
    let r_isp: Vec<f64> = (0..params.n)
        .map(|i| profile.ps[i] + params.pd[i])
        .collect();
    let r_cp: Vec<f64> = (0..params.n)
        .map(|i| profile.pc[i] + params.pa[i] - params.pd[i])
        .collect();
    let u_isp = demands.iter().zip(&r_isp).map(|(d, r)| d * r).sum();
    let u_cp = demands.iter().zip(&r_cp).map(|(d, r)| d * r).collect();
    Ok(Utilities {
        u_isp,
        u_cp,
        r_isp,
        r_cp,
    })
}
