//! Independent brute-force verification: grid best-response checks,
//! numeric Nash-product maximization, grid equilibrium search, and
//! finite-difference first-order-condition checks. Everything here
//! evaluates utilities from raw price profiles through the demand module,
//! never through the closed-form solvers it is meant to check.

use crate::demand::general_demand;
use crate::error::{Error, Result};
use crate::model::{GameParameters, PriceProfile};

/// Axis-aligned evaluation grid: per-coordinate bounds and a shared
/// per-axis resolution.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub axes: Vec<(f64, f64)>,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(axes: Vec<(f64, f64)>, resolution: usize) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::InvalidGrid(format!(
                "resolution must be >= 3 (got {resolution})"
            )));
        }
        for &(lo, hi) in &axes {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidGrid(format!(
                    "axis bounds must be finite with lo < hi (got [{lo}, {hi}])"
                )));
            }
        }
        Ok(Self { axes, resolution })
    }

    /// Grid centered on the given values, one axis per coordinate.
    pub fn centered(values: &[f64], halfwidth: f64, resolution: usize) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|&v| (v - halfwidth, v + halfwidth))
                .collect(),
            resolution,
        )
    }

    /// Default deviation halfwidth, `2 D0 / alpha`.
    pub fn default_halfwidth(params: &GameParameters) -> f64 {
        2.0 * params.d0 / params.alpha
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.axes[axis];
        (hi - lo) / (self.resolution - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.axes.len())
            .map(|i| self.spacing(i))
            .fold(0.0, f64::max)
    }

    pub fn point(&self, axis: usize, index: usize) -> f64 {
        self.axes[axis].0 + self.spacing(axis) * index as f64
    }

    /// Conservative bound for accepting a solver equilibrium:
    /// `3 * spacing * D0` (a Lipschitz envelope of the quadratic
    /// utilities; at a true equilibrium the measured gain is ~0).
    pub fn acceptance_tolerance(&self, d0: f64) -> f64 {
        3.0 * self.max_spacing() * d0
    }

    /// First-order-consistent tolerance for locating equilibria:
    /// `alpha * spacing^2`, the curvature-scale gain of a grid point one
    /// cell away from a true equilibrium. Keeps the located set shrinking
    /// linearly under grid refinement.
    pub fn search_tolerance(&self, alpha: f64) -> f64 {
        let s = self.max_spacing();
        alpha * s * s
    }
}

/// Game form under which the oracle evaluates deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRegime {
    ExAnteSingle,
    ExPostSingle,
    ExAnteMulti,
    ExPostMultiN2,
    Collusion,
}

/// Deviating agent. In the collusion regime the colluding pair moves its
/// joint net price and the ISP prices of the other contents; `Cp(0)` is
/// then inside the pair and not a separate agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    Isp,
    Cp(usize),
    Colluder,
}

fn check_regime_arity(params: &GameParameters, regime: OracleRegime) -> Result<()> {
    match regime {
        OracleRegime::ExAnteSingle | OracleRegime::ExPostSingle => params.ensure_n(1),
        OracleRegime::ExPostMultiN2 => params.ensure_n(2),
        OracleRegime::ExAnteMulti | OracleRegime::Collusion => {
            if params.n >= 1 {
                Ok(())
            } else {
                Err(Error::WrongPlayerCount {
                    expected: 1,
                    got: params.n,
                })
            }
        }
    }
}

/// Utility of one agent at a raw profile, using the truncated demand.
///
/// Ex-post regimes apply the regulator's sharing rule content by content:
/// a content whose joint surplus `p_i + pa_i` is nonpositive contributes
/// zero to both sharers.
pub fn agent_utility(
    params: &GameParameters,
    regime: OracleRegime,
    profile: &PriceProfile,
    agent: Agent,
) -> Result<f64> {
    check_regime_arity(params, regime)?;
    let net = profile.net();
    let d = general_demand(params, &net).demands;
    match regime {
        OracleRegime::ExAnteSingle | OracleRegime::ExAnteMulti => match agent {
            Agent::Isp => Ok((0..params.n)
                .map(|i| d[i] * (profile.ps[i] + params.pd[i]))
                .sum()),
            Agent::Cp(i) => Ok(d[i] * (profile.pc[i] + params.pa[i] - params.pd[i])),
            Agent::Colluder => Err(Error::UnsupportedRegime(
                "colluder only exists in the collusion regime".into(),
            )),
        },
        OracleRegime::ExPostSingle | OracleRegime::ExPostMultiN2 => {
            let share = |i: usize, weight: f64| {
                let surplus = net[i] + params.pa[i];
                if surplus > 0.0 {
                    d[i] * weight * surplus
                } else {
                    0.0
                }
            };
            match agent {
                Agent::Isp => Ok((0..params.n).map(|i| share(i, params.gamma[i])).sum()),
                Agent::Cp(i) => Ok(share(i, 1.0 - params.gamma[i])),
                Agent::Colluder => Err(Error::UnsupportedRegime(
                    "colluder only exists in the collusion regime".into(),
                )),
            }
        }
        OracleRegime::Collusion => match agent {
            Agent::Colluder => {
                let mut u = d[0] * (net[0] + params.pa[0]);
                for i in 1..params.n {
                    u += d[i] * (profile.ps[i] + params.pd[i]);
                }
                Ok(u)
            }
            Agent::Cp(i) if i >= 1 => Ok(d[i] * (profile.pc[i] + params.pa[i] - params.pd[i])),
            Agent::Cp(_) => Err(Error::UnsupportedRegime(
                "CP 1 bargains inside the colluding pair".into(),
            )),
            Agent::Isp => Err(Error::UnsupportedRegime(
                "the ISP acts through the colluding pair here".into(),
            )),
        },
    }
}

/// Indices of the profile coordinates the agent controls. ISP prices come
/// first in the flattened `(ps, pc)` layout.
fn agent_coordinates(params: &GameParameters, regime: OracleRegime, agent: Agent) -> Vec<usize> {
    let n = params.n;
    match agent {
        // The colluding pair moves its joint net price (through ps[0])
        // and the ISP prices of the remaining contents.
        Agent::Colluder => {
            debug_assert_eq!(regime, OracleRegime::Collusion);
            (0..n).collect()
        }
        Agent::Isp => (0..n).collect(),
        Agent::Cp(i) => vec![n + i],
    }
}

fn set_coordinate(profile: &mut PriceProfile, n: usize, coord: usize, value: f64) {
    if coord < n {
        profile.ps[coord] = value;
    } else {
        profile.pc[coord - n] = value;
    }
}

/// Maximum utility improvement the agent can reach by deviating on the
/// grid; nonpositive (up to grid resolution) at a Nash equilibrium.
///
/// One grid axis per controlled coordinate. Agents with one or two
/// coordinates scan the full product grid; larger control vectors fall
/// back to per-coordinate sweeps (their utilities are jointly concave, so
/// coordinate-wise stationarity is what the closed forms pin down).
pub fn best_response_gain(
    params: &GameParameters,
    regime: OracleRegime,
    profile: &PriceProfile,
    agent: Agent,
    grid: &GridSpec,
) -> Result<f64> {
    let base = agent_utility(params, regime, profile, agent)?;
    let coords = agent_coordinates(params, regime, agent);
    if grid.axes.len() != coords.len() {
        return Err(Error::InvalidGrid(format!(
            "agent controls {} coordinate(s) but the grid has {} axis/axes",
            coords.len(),
            grid.axes.len()
        )));
    }

    let n = params.n;
    let mut work = profile.clone();
    let mut best = f64::NEG_INFINITY;

    match coords.len() {
        1 => {
            for i in 0..grid.resolution {
                set_coordinate(&mut work, n, coords[0], grid.point(0, i));
                best = best.max(agent_utility(params, regime, &work, agent)?);
            }
        }
        2 => {
            for i in 0..grid.resolution {
                set_coordinate(&mut work, n, coords[0], grid.point(0, i));
                for j in 0..grid.resolution {
                    set_coordinate(&mut work, n, coords[1], grid.point(1, j));
                    best = best.max(agent_utility(params, regime, &work, agent)?);
                }
            }
        }
        _ => {
            for (axis, &coord) in coords.iter().enumerate() {
                let mut work = profile.clone();
                for i in 0..grid.resolution {
                    set_coordinate(&mut work, n, coord, grid.point(axis, i));
                    best = best.max(agent_utility(params, regime, &work, agent)?);
                }
            }
        }
    }
    Ok(best - base)
}

/// Golden-section maximization of the log Nash product over the side
/// payment. The feasible set (both utilities positive) is located by a
/// scan of the bracket; the maximizer is accurate to about 1e-10 of the
/// bracket width.
pub fn numeric_nash_bargain(
    u_isp: impl Fn(f64) -> f64,
    u_cp: impl Fn(f64) -> f64,
    gamma: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(Error::EmptyBracket);
    }
    let scan = 4096;
    let mut feasible_lo = f64::NAN;
    let mut feasible_hi = f64::NAN;
    for i in 0..=scan {
        let x = lo + (hi - lo) * i as f64 / scan as f64;
        if u_isp(x) > 0.0 && u_cp(x) > 0.0 {
            if feasible_lo.is_nan() {
                feasible_lo = x;
            }
            feasible_hi = x;
        }
    }
    if feasible_lo.is_nan() {
        return Err(Error::EmptyBracket);
    }

    let objective = |x: f64| {
        let (a, b) = (u_isp(x), u_cp(x));
        if a > 0.0 && b > 0.0 {
            gamma * a.ln() + (1.0 - gamma) * b.ln()
        } else {
            f64::NEG_INFINITY
        }
    };

    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (feasible_lo, feasible_hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > 1e-10 * (1.0 + (feasible_hi - feasible_lo).abs()) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    Ok(0.5 * (a + b))
}

/// A grid profile at which no agent's measured deviation gain exceeds the
/// search tolerance.
#[derive(Debug, Clone)]
pub struct GridEquilibrium {
    pub ps: Vec<f64>,
    pub pc: Vec<f64>,
    /// Largest deviation gain over all agents.
    pub max_gain: f64,
}

/// Scans a two-axis profile grid and returns every point where no agent
/// improves by more than [`GridSpec::search_tolerance`]. Deviations run
/// over the same axes as the scan.
///
/// Supported regimes: the single-CP games (axes = `(ps, pc)`) and the
/// two-CP ex-post game, whose utilities depend only on net prices
/// (axes = `(p1, p2)`, profiles reported with the CP price at zero).
/// Results come in grid index order.
pub fn grid_equilibrium_search(
    params: &GameParameters,
    regime: OracleRegime,
    grid: &GridSpec,
) -> Result<Vec<GridEquilibrium>> {
    check_regime_arity(params, regime)?;
    if grid.axes.len() != 2 {
        return Err(Error::InvalidGrid(
            "profile search needs exactly two axes".into(),
        ));
    }
    let tol = grid.search_tolerance(params.alpha);
    let r = grid.resolution;
    match regime {
        OracleRegime::ExAnteSingle | OracleRegime::ExPostSingle => {
            let u = |ps: f64, pc: f64, agent: Agent| {
                agent_utility(
                    params,
                    regime,
                    &PriceProfile::new(vec![ps], vec![pc]),
                    agent,
                )
                .expect("single-CP agents are always valid")
            };
            // Best ISP response per CP price and vice versa, shared
            // across the whole scan line.
            let mut best_isp = vec![f64::NEG_INFINITY; r];
            let mut best_cp = vec![f64::NEG_INFINITY; r];
            for i in 0..r {
                for j in 0..r {
                    let (ps, pc) = (grid.point(0, i), grid.point(1, j));
                    best_isp[j] = best_isp[j].max(u(ps, pc, Agent::Isp));
                    best_cp[i] = best_cp[i].max(u(ps, pc, Agent::Cp(0)));
                }
            }
            let mut found = Vec::new();
            for i in 0..r {
                for j in 0..r {
                    let (ps, pc) = (grid.point(0, i), grid.point(1, j));
                    let gain_isp = best_isp[j] - u(ps, pc, Agent::Isp);
                    let gain_cp = best_cp[i] - u(ps, pc, Agent::Cp(0));
                    let max_gain = gain_isp.max(gain_cp);
                    if max_gain <= tol {
                        found.push(GridEquilibrium {
                            ps: vec![ps],
                            pc: vec![pc],
                            max_gain,
                        });
                    }
                }
            }
            Ok(found)
        }
        OracleRegime::ExPostMultiN2 => {
            let u = |p1: f64, p2: f64, agent: Agent| {
                agent_utility(
                    params,
                    regime,
                    &PriceProfile::new(vec![p1, p2], vec![0.0, 0.0]),
                    agent,
                )
                .expect("two-CP ex-post agents are always valid")
            };
            // The ISP replaces both net prices, so its best reachable
            // utility is one number; each CP's best response depends only
            // on the other net price.
            let mut best_isp = f64::NEG_INFINITY;
            let mut best_cp1 = vec![f64::NEG_INFINITY; r];
            let mut best_cp2 = vec![f64::NEG_INFINITY; r];
            for i in 0..r {
                for j in 0..r {
                    let (p1, p2) = (grid.point(0, i), grid.point(1, j));
                    best_isp = best_isp.max(u(p1, p2, Agent::Isp));
                    best_cp1[j] = best_cp1[j].max(u(p1, p2, Agent::Cp(0)));
                    best_cp2[i] = best_cp2[i].max(u(p1, p2, Agent::Cp(1)));
                }
            }
            let mut found = Vec::new();
            for i in 0..r {
                for j in 0..r {
                    let (p1, p2) = (grid.point(0, i), grid.point(1, j));
                    let max_gain = (best_isp - u(p1, p2, Agent::Isp))
                        .max(best_cp1[j] - u(p1, p2, Agent::Cp(0)))
                        .max(best_cp2[i] - u(p1, p2, Agent::Cp(1)));
                    if max_gain <= tol {
                        found.push(GridEquilibrium {
                            ps: vec![p1, p2],
                            pc: vec![0.0, 0.0],
                            max_gain,
                        });
                    }
                }
            }
            Ok(found)
        }
        other => Err(Error::UnsupportedRegime(format!(
            "grid search over {other:?} profiles is not implemented"
        ))),
    }
}

/// Gradient estimate that refuses kinks: errors when any axis has
/// materially different one-sided derivatives, which is what the
/// truncated demand produces on a region boundary.
pub fn finite_difference_check(
    f: impl Fn(&[f64]) -> f64,
    point: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let mut gradient = Vec::with_capacity(point.len());
    for axis in 0..point.len() {
        let (left, right) = one_sided_partials(&f, point, axis, h);
        let scale = 1.0 + left.abs().max(right.abs());
        if (left - right).abs() > 1e-5 * scale {
            return Err(Error::HypothesisViolated(format!(
                "one-sided derivatives split along axis {axis} ({left} vs {right}); \
                 the point sits on a demand-region boundary"
            )));
        }
        gradient.push(0.5 * (left + right));
    }
    Ok(gradient)
}

/// Central-difference gradient estimate with step `h`.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    (0..point.len())
        .map(|i| {
            let mut hi = point.to_vec();
            let mut lo = point.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

/// Second-order one-sided derivative estimates `(left, right)` along one
/// axis; they differ at kinks of the truncated demand.
pub fn one_sided_partials(
    f: impl Fn(&[f64]) -> f64,
    point: &[f64],
    axis: usize,
    h: f64,
) -> (f64, f64) {
    let eval = |offset: f64| {
        let mut x = point.to_vec();
        x[axis] += offset;
        f(&x)
    };
    let f0 = eval(0.0);
    let right = (-3.0 * f0 + 4.0 * eval(h) - eval(2.0 * h)) / (2.0 * h);
    let left = (3.0 * f0 - 4.0 * eval(-h) + eval(-2.0 * h)) / (2.0 * h);
    (left, right)
}
