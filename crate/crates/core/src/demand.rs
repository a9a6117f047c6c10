//! Internaut demand evaluation: the single-CP clamped linear form, the
//! multi-CP linear form, the general truncated demand with per-content
//! cutoffs, and the two-CP price-plane region classification.

use crate::error::Result;
use crate::model::GameParameters;

/// Demands at a net price vector, with the truncation bookkeeping.
///
/// `k_star` counts the contents with positive demand: the `k_star`
/// cheapest contents (ties broken by original index) sell, the rest are
/// priced out. `x_star` is the threshold price `T(k_star + 1)` at which
/// the remaining demands froze; it is absent when every content sells
/// (`k_star = n`) and when none does (`k_star = 0`).
#[derive(Debug, Clone)]
pub struct DemandOutcome {
    /// Per-content demand, in input order, componentwise >= 0.
    pub demands: Vec<f64>,
    /// Number of contents with positive demand.
    pub k_star: usize,
    /// Threshold value `T(k_star + 1)`, when defined.
    pub x_star: Option<f64>,
    /// `perm[rank] = input index` mapping ascending-price order back to
    /// the input order.
    pub perm: Vec<usize>,
}

/// Two-CP price-plane region by which demands are positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Both demands strictly positive.
    Region1,
    /// Both demands zero.
    Region2,
    /// Demand for content 1 zero, content 2 positive.
    Region3,
    /// Demand for content 2 zero, content 1 positive.
    Region4,
    /// Boundary line where demand 1 vanishes: `p1 = (D0 + beta p2)/alpha`.
    BoundaryAO,
    /// Boundary line where demand 2 vanishes: `p2 = (D0 + beta p1)/alpha`.
    BoundaryBO,
    /// The corner `p1 = p2 = D0/(alpha - beta)`.
    PointO,
}

/// Single-CP demand `max(D0 - alpha p, 0)`.
pub fn single_demand(params: &GameParameters, p_net: f64) -> Result<f64> {
    params.ensure_n(1)?;
    Ok((params.d0 - params.alpha * p_net).max(0.0))
}

/// Unclamped linear demand `d_i = D0 - alpha p_i + beta sum_{j != i} p_j`.
///
/// Components may be negative; truncation is [`general_demand`]'s job.
pub fn linear_demand(params: &GameParameters, p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    p.iter()
        .map(|&pi| params.d0 - params.alpha * pi + params.beta * (total - pi))
        .collect()
}

/// Truncated demand for an arbitrary net price vector.
///
/// Sorts prices ascending (stable), finds the cutoff count `k_star` from
/// the threshold sequence `T(k) = (D0 + beta sum_{j<k} p_j)/(alpha - (n-k) beta)`,
/// evaluates the positive demands with the sub-threshold prices frozen at
/// `T(k_star + 1)`, and un-permutes. Total over any real price vector;
/// parameters must be valid (`alpha > (n-1) beta` keeps every threshold
/// denominator positive).
pub fn general_demand(params: &GameParameters, p: &[f64]) -> DemandOutcome {
    let n = params.n;
    debug_assert_eq!(p.len(), n);
    debug_assert!(params.validate().is_valid());

    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&i, &j| p[i].partial_cmp(&p[j]).unwrap());
    let sorted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();

    // Walk the thresholds; the first rank whose price reaches its
    // threshold freezes everything above it.
    let mut k_star = n;
    let mut x_star = None;
    let mut prefix = 0.0;
    let mut thresholds = Vec::with_capacity(n);
    for k in 1..=n {
        let denom = params.alpha - (n - k) as f64 * params.beta;
        let t_k = (params.d0 + params.beta * prefix) / denom;
        thresholds.push(t_k);
        if sorted[k - 1] >= t_k {
            k_star = k - 1;
            x_star = Some(t_k);
            break;
        }
        prefix += sorted[k - 1];
    }

    // T(1) > T(2) > ... > T(k*) > T(k*+1) along the selling prefix.
    for w in thresholds.windows(2) {
        assert!(
            w[0] > w[1] - 1e-12,
            "threshold ordering violated: {} <= {}",
            w[0],
            w[1]
        );
    }

    let selling_sum: f64 = sorted[..k_star].iter().sum();
    let mut demands = vec![0.0; n];
    for rank in 0..k_star {
        let pi = sorted[rank];
        let tail = match x_star {
            Some(x) => (n - k_star) as f64 * params.beta * x,
            None => 0.0,
        };
        let d = params.d0 - params.alpha * pi + params.beta * (selling_sum - pi) + tail;
        demands[perm[rank]] = d;
    }
    if k_star == 0 {
        x_star = None;
    }

    DemandOutcome {
        demands,
        k_star,
        x_star,
        perm,
    }
}

/// Classifies a two-CP net price pair into the demand regions.
///
/// Boundary tags fire on exact equality of the defining expressions;
/// generic floating-point inputs land in the open regions.
pub fn classify_region(params: &GameParameters, p: &[f64; 2]) -> Result<Region> {
    params.ensure_n(2)?;
    let corner = params.d0 / (params.alpha - params.beta);
    if p[0] == corner && p[1] == corner {
        return Ok(Region::PointO);
    }
    if p[0] >= corner && p[1] >= corner {
        return Ok(Region::Region2);
    }
    let outcome = general_demand(params, p);
    let d = &outcome.demands;
    if d[0] > 0.0 && d[1] > 0.0 {
        return Ok(Region::Region1);
    }
    if d[0] <= 0.0 {
        // Content 1 priced out; on line AO exactly at the vanishing price.
        if p[0] == (params.d0 + params.beta * p[1]) / params.alpha {
            Ok(Region::BoundaryAO)
        } else {
            Ok(Region::Region3)
        }
    } else {
        if p[1] == (params.d0 + params.beta * p[0]) / params.alpha {
            Ok(Region::BoundaryBO)
        } else {
            Ok(Region::Region4)
        }
    }
}
