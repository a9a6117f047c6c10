//! The exclusive-contract game: one CP colludes with the ISP, they price
//! their content jointly, and everyone else best-responds. Includes the
//! collusion-price metrics comparing the outcome against the no-collusion
//! equilibrium.

use nalgebra::{DMatrix, DVector};

use crate::demand::general_demand;
use crate::equilibrium::exante_multi_stationary;
use crate::error::{Error, Result};
use crate::model::{GameParameters, PriceProfile};

/// Equilibrium of the ex-ante game with CP 1 and the ISP colluding.
///
/// The colluding pair's net price and every demand and revenue are
/// independent of the free side payments over the noncolluding CPs.
#[derive(Debug, Clone)]
pub struct CollusionEquilibrium {
    /// Net internaut price of the colluding pair's content.
    pub p1_net: f64,
    /// ISP prices for the noncolluding contents (length `n - 1`).
    pub ps_rest: Vec<f64>,
    /// Noncolluding CP prices (length `n - 1`).
    pub pc_rest: Vec<f64>,
    /// Per-content demands, colluding content first.
    pub demands: Vec<f64>,
    /// Joint revenue of the colluding pair; how they split it internally
    /// is not modeled.
    pub u_colluder: f64,
    /// Noncolluding CP revenues (length `n - 1`).
    pub u_cp_rest: Vec<f64>,
    /// Echo of the side payments the prices were decomposed with.
    pub pd_rest: Vec<f64>,
}

impl CollusionEquilibrium {
    /// Net price vector, colluding content first.
    pub fn net(&self) -> Vec<f64> {
        let mut p = vec![self.p1_net];
        p.extend(self.ps_rest.iter().zip(&self.pc_rest).map(|(s, c)| s + c));
        p
    }
}

/// Collusion-price metrics for the two-CP game.
#[derive(Debug, Clone, Copy)]
pub struct CollusionMetrics {
    /// Colluders' joint utility before collusion over after; below one
    /// means collusion pays.
    pub iscp: f64,
    /// Bystander CP's utility before collusion over after; at least one
    /// means the bystander loses.
    pub scep: f64,
    /// The advertising-revenue bound on CP 2 below which the bystander
    /// loses (`scep >= 1`).
    pub benefit_threshold: f64,
}

/// Builds and solves the `(2n - 1)`-dimensional stationarity system of the
/// collusion game. Unknowns: the joint net price `p1`, then the ISP prices
/// and CP prices of the noncolluding contents.
fn solve_collusion_system(params: &GameParameters, pd_rest: &[f64]) -> Result<DVector<f64>> {
    let n = params.n;
    let dim = 2 * n - 1;
    let (a, b, d0) = (params.alpha, params.beta, params.d0);

    // mu = 2 alpha - b' C^(-1) b must stay away from zero; it can only
    // degenerate when the parameter coupling bound is violated.
    if n >= 2 {
        let m = 2 * (n - 1);
        let c = DMatrix::from_fn(m, m, |i, j| {
            let (bi, bj) = (i / (n - 1), j / (n - 1));
            let (ri, rj) = (i % (n - 1), j % (n - 1));
            let base = if ri == rj { a } else { -b };
            match (bi, bj) {
                (0, 0) => 2.0 * base,
                (1, 1) => {
                    if ri == rj {
                        2.0 * a
                    } else {
                        -b
                    }
                }
                _ => base,
            }
        });
        let bvec = DVector::from_fn(m, |i, _| if i < n - 1 { 2.0 * b } else { b });
        let z = c
            .lu()
            .solve(&bvec)
            .ok_or(Error::SingularSystem("collusion block C"))?;
        let mu = 2.0 * a - bvec.dot(&z);
        if mu.abs() <= 1e-12 {
            return Err(Error::SingularSystem("collusion pivot mu"));
        }
    }

    let mut m = DMatrix::zeros(dim, dim);
    let mut r = DVector::zeros(dim);
    let pd_sum: f64 = pd_rest.iter().sum();

    // Joint first-order condition of the colluding pair in p1.
    m[(0, 0)] = 2.0 * a;
    for k in 0..n - 1 {
        m[(0, 1 + k)] = -2.0 * b;
        m[(0, n + k)] = -b;
    }
    r[0] = d0 - a * params.pa[0] + b * pd_sum;

    for k in 0..n - 1 {
        // Colluding pair's condition in the ISP price of content k + 2.
        let row = 1 + k;
        m[(row, 0)] = -2.0 * b;
        for j in 0..n - 1 {
            m[(row, 1 + j)] = if j == k { 2.0 * a } else { -2.0 * b };
            m[(row, n + j)] = if j == k { a } else { -b };
        }
        r[row] = d0 + b * params.pa[0] - a * pd_rest[k] + b * (pd_sum - pd_rest[k]);

        // Noncolluding CP's condition in its own price.
        let row = n + k;
        m[(row, 0)] = -b;
        for j in 0..n - 1 {
            m[(row, 1 + j)] = if j == k { a } else { -b };
            m[(row, n + j)] = if j == k { 2.0 * a } else { -b };
        }
        r[row] = d0 - a * params.pa[k + 1] + a * pd_rest[k];
    }

    m.lu()
        .solve(&r)
        .ok_or(Error::SingularSystem("collusion stationarity system"))
}

/// Solves the collusion game for a valid parameter set.
///
/// `pd_rest` holds the regulated side payments of the `n - 1` noncolluding
/// CPs (the colluding pair nets out any internal transfer).
pub fn collusion_equilibrium(
    params: &GameParameters,
    pd_rest: &[f64],
) -> Result<CollusionEquilibrium> {
    params.ensure_valid()?;
    assert_eq!(
        pd_rest.len(),
        params.n - 1,
        "pd_rest must cover the noncolluding CPs"
    );
    let n = params.n;
    let x = solve_collusion_system(params, pd_rest)?;

    let p1_net = x[0];
    let ps_rest: Vec<f64> = (0..n - 1).map(|k| x[1 + k]).collect();
    let pc_rest: Vec<f64> = (0..n - 1).map(|k| x[n + k]).collect();

    // The joint price depends on the market only through pa_1, D0, and
    // alpha - (n-1) beta.
    let closed_form =
        -params.pa[0] / 2.0 + params.d0 / (2.0 * (params.alpha - (n as f64 - 1.0) * params.beta));
    debug_assert!(
        (p1_net - closed_form).abs() <= 1e-9 * (1.0 + closed_form.abs()),
        "joint price {p1_net} deviates from closed form {closed_form}"
    );

    let mut nets = vec![p1_net];
    nets.extend(ps_rest.iter().zip(&pc_rest).map(|(s, c)| s + c));
    let outcome = general_demand(params, &nets);
    let d = &outcome.demands;

    let mut u_colluder = d[0] * (p1_net + params.pa[0]);
    for k in 0..n - 1 {
        u_colluder += d[k + 1] * (ps_rest[k] + pd_rest[k]);
    }
    let u_cp_rest: Vec<f64> = (0..n - 1)
        .map(|k| d[k + 1] * (pc_rest[k] + params.pa[k + 1] - pd_rest[k]))
        .collect();

    Ok(CollusionEquilibrium {
        p1_net,
        ps_rest,
        pc_rest,
        demands: outcome.demands,
        u_colluder,
        u_cp_rest,
        pd_rest: pd_rest.to_vec(),
    })
}

/// Advertising-revenue bound on CP 2 below which collusion hurts the
/// bystander: `((3 - tau^2)/(2 tau)) pa_1 + D0 (3 + tau)/(2 alpha tau)`.
pub fn collusion_benefit_threshold(params: &GameParameters) -> Result<f64> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    if params.beta <= 0.0 {
        return Err(Error::SeparableCase);
    }
    let tau = params.tau();
    Ok((3.0 - tau * tau) / (2.0 * tau) * params.pa[0]
        + params.d0 * (3.0 + tau) / (2.0 * params.alpha * tau))
}

/// Collusion-price metrics for `n = 2`.
///
/// The no-collusion side evaluates the ex-ante stationarity profile with
/// truncated demands, so the ratios stay meaningful right up to (and at)
/// the threshold where the bystander's pre-collusion demand vanishes.
pub fn iscp_scep(params: &GameParameters) -> Result<CollusionMetrics> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    let zeros = [0.0, 0.0];
    let (_, baseline) = exante_multi_stationary(params, &zeros)?;
    let base_demand = general_demand(params, &baseline.net());
    let base = baseline_utilities(params, &baseline, &base_demand.demands);
    let coll = collusion_equilibrium(params, &[0.0])?;

    let colluders_before = base.u_isp + base.u_cp[0];
    let bystander_before = base.u_cp[1];
    if colluders_before <= 0.0
        || bystander_before <= 0.0
        || coll.u_colluder <= 0.0
        || coll.u_cp_rest[0] <= 0.0
    {
        return Err(Error::MissingBaseline);
    }

    Ok(CollusionMetrics {
        iscp: colluders_before / coll.u_colluder,
        scep: bystander_before / coll.u_cp_rest[0],
        benefit_threshold: collusion_benefit_threshold(params)?,
    })
}

struct BaselineUtilities {
    u_isp: f64,
    u_cp: Vec<f64>,
}

fn baseline_utilities(
    params: &GameParameters,
    profile: &PriceProfile,
    demands: &[f64],
) -> BaselineUtilities {
    // Zero side payments; totals are side-payment invariant anyway.
    let u_isp = demands.iter().zip(&profile.ps).map(|(d, ps)| d * ps).sum();
    let u_cp = (0..params.n)
        .map(|i| demands[i] * (profile.pc[i] + params.pa[i]))
        .collect();
    BaselineUtilities { u_isp, u_cp }
}
