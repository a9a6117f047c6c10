//! The regulator's weighted-proportional-sharing side-payment rule and the
//! Nash product objective it maximizes.

use crate::error::{Error, Result};

/// Sharing rule weight: the ISP's market power, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidePaymentRule {
    pub gamma: f64,
}

impl SidePaymentRule {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(Self { gamma })
        } else {
            Err(Error::InvalidParameters(format!(
                "gamma in open interval violated (gamma = {gamma})"
            )))
        }
    }

    /// Side payment that splits the surplus `ps + pc + pa` in the ratio
    /// `gamma : 1 - gamma`; see [`expost_side_payment`].
    pub fn apply(&self, ps: f64, pc: f64, pa: f64) -> Result<f64> {
        expost_side_payment(ps, pc, pa, self.gamma)
    }
}

/// Log-domain Nash product `gamma ln(u_isp) + (1 - gamma) ln(u_cp)`.
///
/// Defined only for strictly positive utilities.
pub fn nash_product(u_isp: f64, u_cp: f64, gamma: f64) -> Result<f64> {
    if u_isp <= 0.0 || u_cp <= 0.0 {
        return Err(Error::ObjectiveUndefined { u_isp, u_cp });
    }
    Ok(gamma * u_isp.ln() + (1.0 - gamma) * u_cp.ln())
}

/// Closed-form maximizer of the Nash product over the side payment:
/// `pd = gamma (pc + pa) - (1 - gamma) ps`.
///
/// Consequently `ps + pd = gamma (ps + pc + pa)` and
/// `pc + pa - pd = (1 - gamma)(ps + pc + pa)`: the joint revenue per unit
/// demand is shared in the ratio of the relative weights. The demand level
/// factors out of the objective, so the split never depends on it.
pub fn expost_side_payment(ps: f64, pc: f64, pa: f64, gamma: f64) -> Result<f64> {
    let surplus = ps + pc + pa;
    if surplus <= 0.0 {
        return Err(Error::NoBargainingSurplus { surplus });
    }
    Ok(gamma * (pc + pa) - (1.0 - gamma) * ps)
}
