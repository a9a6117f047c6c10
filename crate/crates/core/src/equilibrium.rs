//! Closed-form Nash equilibrium solvers and checkers for the four regimes:
//! single-CP ex-ante/ex-post and multi-CP ex-ante/ex-post, including the
//! zero-demand and mixed-demand equilibrium characterizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{build_matrices, GameParameters, PriceProfile};
use crate::regulator;

/// Regulation timing under which an equilibrium was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeTag {
    ExAnte,
    ExPost,
}

/// Which input the caller chose freely; uniqueness is up to this choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreeInput {
    /// Ex-ante games: the regulated side payment.
    SidePayment(f64),
    /// Ex-post single-CP game: the ISP access price.
    IspPrice(f64),
}

/// Equilibrium of the single-CP single-ISP game.
#[derive(Debug, Clone)]
pub struct SingleCpEquilibrium {
    pub regime: RegimeTag,
    pub ps: f64,
    pub pc: f64,
    /// Net internaut payment per unit demand, `ps + pc`.
    pub p_net: f64,
    pub demand: f64,
    pub u_isp: f64,
    pub u_cp: f64,
    /// Side payment in force (the input for ex-ante, the regulator's
    /// closed-form split for ex-post).
    pub pd: f64,
    pub free: FreeInput,
}

/// Ex-ante single-CP equilibrium with strictly positive demand.
///
/// The net price, demand, and both utilities do not depend on `pd`; the
/// side payment only shifts the split between `ps` and `pc`. If the ISP
/// price must stay nonnegative, restrict the free choice to
/// `pd <= (D0 + alpha pa)/(3 alpha)`; nothing else changes.
pub fn exante_single(params: &GameParameters, pd: f64) -> Result<SingleCpEquilibrium> {
    params.ensure_n(1)?;
    params.ensure_valid()?;
    let (d0, alpha, pa) = (params.d0, params.alpha, params.pa[0]);
    let ps = (d0 + alpha * pa) / (3.0 * alpha) - pd;
    let pc = (d0 - 2.0 * alpha * pa) / (3.0 * alpha) + pd;
    let demand = (d0 + alpha * pa) / 3.0;
    let u = (d0 + alpha * pa).powi(2) / (9.0 * alpha);
    Ok(SingleCpEquilibrium {
        regime: RegimeTag::ExAnte,
        ps,
        pc,
        p_net: (2.0 * d0 - alpha * pa) / (3.0 * alpha),
        demand,
        u_isp: u,
        u_cp: u,
        pd,
        free: FreeInput::SidePayment(pd),
    })
}

/// Ex-post single-CP equilibrium; uniqueness is up to the free ISP price.
///
/// The net price is pinned, the regulator's side payment splits the joint
/// surplus `gamma : 1 - gamma`.
pub fn expost_single(params: &GameParameters, free_ps: f64) -> Result<SingleCpEquilibrium> {
    params.ensure_n(1)?;
    params.ensure_valid()?;
    let (d0, alpha, pa, gamma) = (params.d0, params.alpha, params.pa[0], params.gamma[0]);
    let p_net = (d0 - alpha * pa) / (2.0 * alpha);
    let pc = p_net - free_ps;
    let pd = regulator::expost_side_payment(free_ps, pc, pa, gamma)?;
    let demand = (d0 + alpha * pa) / 2.0;
    let total = (d0 + alpha * pa).powi(2) / (4.0 * alpha);
    Ok(SingleCpEquilibrium {
        regime: RegimeTag::ExPost,
        ps: free_ps,
        pc,
        p_net,
        demand,
        u_isp: gamma * total,
        u_cp: (1.0 - gamma) * total,
        pd,
        free: FreeInput::IspPrice(free_ps),
    })
}

/// Verdict of one agent comparing the two regulation timings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferenceVerdict {
    PrefersExPost,
    PrefersExAnte,
    Indifferent,
}

fn verdict(ratio: f64) -> PreferenceVerdict {
    if (ratio - 1.0).abs() <= 1e-12 {
        PreferenceVerdict::Indifferent
    } else if ratio > 1.0 {
        PreferenceVerdict::PrefersExPost
    } else {
        PreferenceVerdict::PrefersExAnte
    }
}

/// Regime comparison for the single-CP game: the ex-post utility is
/// `9 gamma / 4` of the ex-ante one for the ISP and `9 (1 - gamma) / 4`
/// for the CP.
#[derive(Debug, Clone, Copy)]
pub struct RegimePreference {
    pub isp_ratio: f64,
    pub cp_ratio: f64,
    pub isp: PreferenceVerdict,
    pub cp: PreferenceVerdict,
}

pub fn regime_preference(params: &GameParameters) -> Result<RegimePreference> {
    params.ensure_n(1)?;
    params.ensure_valid()?;
    let gamma = params.gamma[0];
    let isp_ratio = 9.0 * gamma / 4.0;
    let cp_ratio = 9.0 * (1.0 - gamma) / 4.0;
    Ok(RegimePreference {
        isp_ratio,
        cp_ratio,
        isp: verdict(isp_ratio),
        cp: verdict(cp_ratio),
    })
}

/// Corner region of profiles that lock in zero demand: every agent's
/// price is so high that undercutting to the demand threshold already
/// yields a nonpositive revenue per unit demand.
#[derive(Debug, Clone)]
pub struct ZeroDemandRegion {
    /// Componentwise lower bounds on the ISP prices.
    pub ps_min: Vec<f64>,
    /// Componentwise lower bounds on the CP prices.
    pub pc_min: Vec<f64>,
}

impl ZeroDemandRegion {
    /// Bounds `ps_i >= D0/(alpha - (n-1) beta) + pa_i - pd_i` and
    /// `pc_i >= D0/(alpha - (n-1) beta) + pd_i`.
    pub fn new(params: &GameParameters, pd: &[f64]) -> Self {
        let t1 = params.d0 / (params.alpha - (params.n as f64 - 1.0) * params.beta);
        let ps_min = (0..params.n).map(|i| t1 + params.pa[i] - pd[i]).collect();
        let pc_min = (0..params.n).map(|i| t1 + pd[i]).collect();
        Self { ps_min, pc_min }
    }

    pub fn contains(&self, profile: &PriceProfile) -> bool {
        profile.ps.iter().zip(&self.ps_min).all(|(p, min)| p >= min)
            && profile.pc.iter().zip(&self.pc_min).all(|(p, min)| p >= min)
    }
}

/// Whether `(ps, pc)` is a zero-demand equilibrium of the single-CP
/// ex-ante game at side payment `pd`.
pub fn exante_single_zero_demand_check(
    params: &GameParameters,
    pd: f64,
    ps: f64,
    pc: f64,
) -> Result<bool> {
    params.ensure_n(1)?;
    let region = ZeroDemandRegion::new(params, &[pd]);
    Ok(region.contains(&PriceProfile::new(vec![ps], vec![pc])))
}

/// Whether a profile is an all-demands-zero equilibrium of the multi-CP
/// ex-ante game at side payments `pd`.
pub fn exante_multi_zero_demand_check(
    params: &GameParameters,
    pd: &[f64],
    profile: &PriceProfile,
) -> bool {
    ZeroDemandRegion::new(params, pd).contains(profile)
}

/// Prices, demands, and revenues of the strictly-positive-demand ex-ante
/// equilibrium when it exists.
#[derive(Debug, Clone)]
pub struct MultiCpSolution {
    pub ps: Vec<f64>,
    pub pc: Vec<f64>,
    pub demands: Vec<f64>,
    pub u_isp: f64,
    pub u_cp: Vec<f64>,
    /// The free side-payment vector the prices were decomposed with.
    pub pd: Vec<f64>,
}

impl MultiCpSolution {
    pub fn profile(&self) -> PriceProfile {
        PriceProfile::new(self.ps.clone(), self.pc.clone())
    }

    pub fn net(&self) -> Vec<f64> {
        self.profile().net()
    }
}

/// Result of the multi-CP ex-ante solver.
///
/// The equilibrium with strictly positive demands exists if and only if
/// `existence_vector = (A + 2 alpha I)^(-1) (A pa + D0 E)` is strictly
/// positive componentwise; a component exactly at zero counts as
/// nonexistent.
#[derive(Debug, Clone)]
pub struct MultiCpExAnteEquilibrium {
    pub existence_vector: Vec<f64>,
    pub solution: Option<MultiCpSolution>,
}

impl MultiCpExAnteEquilibrium {
    pub fn exists(&self) -> bool {
        self.solution.is_some()
    }
}

/// Existence vector and stationary price profile of the ex-ante game,
/// independent of whether the positivity condition holds.
///
/// `v = (A + 2 alpha I)^(-1) (A pa + D0 E)`, then
/// `ps = A^(-1)(alpha v) - pd` and `pc = v - pa + pd`. Used by the solver
/// and by downstream metrics that evaluate the stationarity point past the
/// existence boundary.
pub(crate) fn exante_multi_stationary(
    params: &GameParameters,
    pd: &[f64],
) -> Result<(Vec<f64>, PriceProfile)> {
    let n = params.n;
    assert_eq!(pd.len(), n, "pd must have one entry per CP");
    let m = build_matrices(params)?;
    let pa = DVector::from_column_slice(&params.pa);

    let lhs = &m.a + DMatrix::identity(n, n) * (2.0 * params.alpha);
    let rhs = &m.a * &pa + &m.e * params.d0;
    let v = lhs
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem("A + 2 alpha I"))?;
    let d = &v * params.alpha;
    let isp_receipt =
        m.a.clone()
            .lu()
            .solve(&d)
            .ok_or(Error::SingularSystem("A"))?;
    let ps: Vec<f64> = (0..n).map(|i| isp_receipt[i] - pd[i]).collect();
    let pc: Vec<f64> = (0..n).map(|i| v[i] - params.pa[i] + pd[i]).collect();
    Ok((v.iter().copied().collect(), PriceProfile::new(ps, pc)))
}

/// Ex-ante equilibrium with strictly positive demands for any `n >= 1`.
///
/// Solves the stationarity system through the reduced forms
/// `d = alpha v`, `pc + pa - pd = v`, `ps + pd = A^(-1) d` with
/// `v` the existence vector; `u_isp = d' A^(-1) d`.
pub fn exante_multi(params: &GameParameters, pd: &[f64]) -> Result<MultiCpExAnteEquilibrium> {
    params.ensure_valid()?;
    let (existence_vector, profile) = exante_multi_stationary(params, pd)?;
    if !existence_vector.iter().all(|&x| x > 0.0) {
        return Ok(MultiCpExAnteEquilibrium {
            existence_vector,
            solution: None,
        });
    }

    let demands: Vec<f64> = existence_vector.iter().map(|v| params.alpha * v).collect();
    let u_isp = demands
        .iter()
        .zip(profile.ps.iter().zip(pd))
        .map(|(d, (ps, pd_i))| d * (ps + pd_i))
        .sum();
    let u_cp: Vec<f64> = demands
        .iter()
        .zip(&existence_vector)
        .map(|(d, v)| d * v)
        .collect();

    Ok(MultiCpExAnteEquilibrium {
        existence_vector,
        solution: Some(MultiCpSolution {
            ps: profile.ps,
            pc: profile.pc,
            demands,
            u_isp,
            u_cp,
            pd: pd.to_vec(),
        }),
    })
}

/// One of the two families of mixed ex-ante equilibria (`n = 2`): the
/// surviving content's prices are pinned by the single-CP formulas with
/// `D0' = D0 (alpha + beta)/alpha` and `alpha' = (alpha^2 - beta^2)/alpha`,
/// the priced-out content only has to stay above its shutout bounds.
#[derive(Debug, Clone)]
pub struct MixedEquilibriumFamily {
    /// Index of the content with positive demand.
    pub survivor: usize,
    pub ps_survivor: f64,
    pub pc_survivor: f64,
    pub p_net_survivor: f64,
    pub demand_survivor: f64,
    pub d0_prime: f64,
    pub alpha_prime: f64,
    /// Net-price lower bound on the priced-out content,
    /// `(D0 + beta p_survivor)/alpha`.
    pub shutout_net_min: f64,
    /// ISP-price lower bound on the priced-out content,
    /// `shutout_net_min + pa_j - pd_j`.
    pub shutout_ps_min: f64,
}

impl MixedEquilibriumFamily {
    /// Membership check for a full profile (exact family conditions,
    /// within `tol` on the pinned prices).
    pub fn contains(&self, profile: &PriceProfile, tol: f64) -> bool {
        let i = self.survivor;
        let j = 1 - i;
        (profile.ps[i] - self.ps_survivor).abs() <= tol
            && (profile.pc[i] - self.pc_survivor).abs() <= tol
            && profile.ps[j] >= self.shutout_ps_min - tol
            && profile.ps[j] + profile.pc[j] >= self.shutout_net_min - tol
    }
}

/// Both mixed-demand equilibrium families of the two-CP ex-ante game:
/// element 0 has content 0 surviving, element 1 the mirror.
pub fn exante_mixed_equilibrium_n2(
    params: &GameParameters,
    pd: &[f64; 2],
) -> Result<[MixedEquilibriumFamily; 2]> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    let d0p = params.d0 * (params.alpha + params.beta) / params.alpha;
    let ap = (params.alpha.powi(2) - params.beta.powi(2)) / params.alpha;
    let family = |survivor: usize| {
        let other = 1 - survivor;
        let pa = params.pa[survivor];
        let ps = (d0p + ap * pa) / (3.0 * ap) - pd[survivor];
        let pc = (d0p - 2.0 * ap * pa) / (3.0 * ap) + pd[survivor];
        let p_net = ps + pc;
        let shutout_net_min = (params.d0 + params.beta * p_net) / params.alpha;
        MixedEquilibriumFamily {
            survivor,
            ps_survivor: ps,
            pc_survivor: pc,
            p_net_survivor: p_net,
            demand_survivor: (d0p + ap * pa) / 3.0,
            d0_prime: d0p,
            alpha_prime: ap,
            shutout_net_min,
            shutout_ps_min: shutout_net_min + params.pa[other] - pd[other],
        }
    };
    Ok([family(0), family(1)])
}

/// The Eq.-style weight condition that keeps the ISP utility concave in
/// the positive-demand region of the two-CP ex-post game.
#[derive(Debug, Clone, Copy)]
pub struct HCondition {
    /// `sqrt(max(gamma_1/gamma_2, gamma_2/gamma_1))`.
    pub lhs: f64,
    /// `(1 + sqrt(1 - tau^2))/tau`.
    pub rhs: f64,
    pub ok: bool,
}

/// Positive-definiteness test for the weight matrix `H` (`n = 2`,
/// `beta > 0`).
pub fn h_condition(params: &GameParameters) -> Result<HCondition> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    if params.beta <= 0.0 {
        return Err(Error::SeparableCase);
    }
    let tau = params.tau();
    let ratio = (params.gamma[0] / params.gamma[1]).max(params.gamma[1] / params.gamma[0]);
    let lhs = ratio.sqrt();
    let rhs = (1.0 + (1.0 - tau * tau).sqrt()) / tau;
    Ok(HCondition {
        lhs,
        rhs,
        ok: lhs <= rhs,
    })
}

/// Surviving-CP equilibrium of the two-CP ex-post game: the single-CP
/// ex-post formulas with the primed constants, the other content shut out.
#[derive(Debug, Clone)]
pub struct SurvivorEquilibrium {
    /// Original index of the surviving CP (the higher advertising revenue).
    pub survivor: usize,
    pub d0_prime: f64,
    pub alpha_prime: f64,
    pub p_net: f64,
    pub demand: f64,
    pub total_revenue: f64,
    pub u_isp: f64,
    pub u_cp: f64,
    /// Net-price lower bound keeping the other content at zero demand.
    pub shutout_net_min: f64,
}

/// Outcome of the two-CP ex-post game: either no pure equilibrium or the
/// survivor equilibrium when one advertising revenue dominates enough.
#[derive(Debug, Clone)]
pub enum ExPostN2Outcome {
    NoPureNe {
        h_condition_ok: bool,
    },
    Survivor {
        equilibrium: SurvivorEquilibrium,
        h_condition_ok: bool,
    },
}

/// Solves the two-CP ex-post game.
///
/// Requires `alpha > beta > 0` and the `H` positive-definiteness
/// condition (refuses otherwise). With advertising revenues ordered
/// `pa_hi >= pa_lo`, a pure equilibrium exists iff
/// `pa_hi >= (2 alpha / beta) pa_lo + (2 alpha / beta - 1) D0`.
pub fn expost_multi_n2(params: &GameParameters) -> Result<ExPostN2Outcome> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    if params.beta == 0.0 {
        return Err(Error::SeparableCase);
    }
    let h = h_condition(params)?;
    if !h.ok {
        return Err(Error::HypothesisViolated(format!(
            "H not positive definite: sqrt(max gamma ratio) = {} > {}",
            h.lhs, h.rhs
        )));
    }

    let (hi, lo) = if params.pa[0] >= params.pa[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let two_ab = 2.0 * params.alpha / params.beta;
    let threshold = two_ab * params.pa[lo] + (two_ab - 1.0) * params.d0;
    if params.pa[hi] < threshold {
        return Ok(ExPostN2Outcome::NoPureNe {
            h_condition_ok: true,
        });
    }

    let d0p = params.d0 * (params.alpha + params.beta) / params.alpha;
    let ap = (params.alpha.powi(2) - params.beta.powi(2)) / params.alpha;
    let pa = params.pa[hi];
    let gamma = params.gamma[hi];
    let p_net = (d0p - ap * pa) / (2.0 * ap);
    let total = (d0p + ap * pa).powi(2) / (4.0 * ap);
    Ok(ExPostN2Outcome::Survivor {
        equilibrium: SurvivorEquilibrium {
            survivor: hi,
            d0_prime: d0p,
            alpha_prime: ap,
            p_net,
            demand: (d0p + ap * pa) / 2.0,
            total_revenue: total,
            u_isp: gamma * total,
            u_cp: (1.0 - gamma) * total,
            shutout_net_min: (params.d0 + params.beta * p_net) / params.alpha,
        },
        h_condition_ok: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn single_params() -> GameParameters {
        GameParameters::single(90.0, 9.0, 3.0)
    }

    fn multi_params() -> GameParameters {
        GameParameters::new(2, 100.0, 10.0, 2.0)
    }

    #[test]
    fn exante_single_reference_values() {
        let eq = exante_single(&single_params(), 5.0).unwrap();
        assert_relative_eq!(eq.ps, -2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(eq.pc, 19.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(eq.p_net, 17.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(eq.demand, 39.0, epsilon = 1e-12);
        assert_relative_eq!(eq.u_isp, 169.0, epsilon = 1e-9);
        assert_relative_eq!(eq.u_cp, 169.0, epsilon = 1e-9);
        // The split is exactly equal, not merely close.
        assert_eq!(eq.u_isp, eq.u_cp);
    }

    #[test]
    fn exante_single_pd_only_shifts_the_split() {
        let a = exante_single(&single_params(), 5.0).unwrap();
        let b = exante_single(&single_params(), 0.0).unwrap();
        assert_relative_eq!(b.ps, 13.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(b.pc, 4.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(a.p_net, b.p_net, epsilon = 1e-12);
        assert_relative_eq!(a.demand, b.demand, epsilon = 1e-12);
        assert_relative_eq!(a.u_isp, b.u_isp, epsilon = 1e-12);
        assert_relative_eq!(a.u_cp, b.u_cp, epsilon = 1e-12);
    }

    #[test]
    fn exante_single_symmetric_split_without_ads() {
        let p = GameParameters::single(100.0, 10.0, 0.0);
        let eq = exante_single(&p, 0.0).unwrap();
        assert_relative_eq!(eq.ps, 100.0 / 30.0, epsilon = 1e-12);
        assert_relative_eq!(eq.pc, 100.0 / 30.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_demand_region_single() {
        let p = GameParameters::single(100.0, 10.0, 0.0);
        assert!(exante_single_zero_demand_check(&p, 0.0, 10.0, 10.0).unwrap());
        assert!(!exante_single_zero_demand_check(&p, 0.0, 10.0, 9.99).unwrap());
        let q = single_params();
        assert!(exante_single_zero_demand_check(&q, 1.0, 12.0, 11.0).unwrap());
    }

    #[test]
    fn expost_single_reference_values() {
        let eq = expost_single(&single_params(), 0.0).unwrap();
        assert_relative_eq!(eq.p_net, 3.5, epsilon = 1e-12);
        assert_relative_eq!(eq.demand, 58.5, epsilon = 1e-12);
        assert_relative_eq!(eq.u_isp + eq.u_cp, 380.25, epsilon = 1e-9);
        assert_relative_eq!(eq.u_isp, 190.125, epsilon = 1e-9);
        assert_relative_eq!(eq.u_cp, 190.125, epsilon = 1e-9);
    }

    #[test]
    fn expost_single_ratio_crossing_point() {
        let p = single_params().with_gamma(vec![4.0 / 9.0]);
        let eq = expost_single(&p, 0.0).unwrap();
        assert_relative_eq!(eq.u_isp, 169.0, epsilon = 1e-9);
    }

    #[test]
    fn expost_single_free_ps_moves_only_the_split() {
        let a = expost_single(&single_params(), 0.0).unwrap();
        let b = expost_single(&single_params(), 2.0).unwrap();
        assert_relative_eq!(a.p_net, b.p_net, epsilon = 1e-12);
        assert_relative_eq!(a.u_isp, b.u_isp, epsilon = 1e-12);
        assert_relative_eq!(a.u_cp, b.u_cp, epsilon = 1e-12);
        assert_relative_eq!(b.pc, a.p_net - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn expost_single_zero_net_price_when_ads_cover() {
        let p = GameParameters::single(100.0, 10.0, 10.0);
        let eq = expost_single(&p, 0.0).unwrap();
        assert_relative_eq!(eq.p_net, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ratio_law_over_gamma_grid() {
        for k in 1..10 {
            let gamma = k as f64 / 10.0;
            let p = single_params().with_gamma(vec![gamma]);
            let ante = exante_single(&p, 0.0).unwrap();
            let post = expost_single(&p, 0.0).unwrap();
            assert_relative_eq!(post.u_isp / ante.u_isp, 9.0 * gamma / 4.0, epsilon = 1e-9);
            assert_relative_eq!(
                post.u_cp / ante.u_cp,
                9.0 * (1.0 - gamma) / 4.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn preference_verdicts() {
        let both = regime_preference(&single_params()).unwrap();
        assert_eq!(both.isp, PreferenceVerdict::PrefersExPost);
        assert_eq!(both.cp, PreferenceVerdict::PrefersExPost);

        let split = regime_preference(&single_params().with_gamma(vec![0.7])).unwrap();
        assert_eq!(split.isp, PreferenceVerdict::PrefersExPost);
        assert_eq!(split.cp, PreferenceVerdict::PrefersExAnte);

        let boundary = regime_preference(&single_params().with_gamma(vec![4.0 / 9.0])).unwrap();
        assert_eq!(boundary.isp, PreferenceVerdict::Indifferent);
    }

    #[test]
    fn exante_multi_reference_values() {
        let eq = exante_multi(&multi_params(), &[0.0, 0.0]).unwrap();
        let sol = eq.solution.as_ref().expect("equilibrium exists");
        for i in 0..2 {
            assert_relative_eq!(sol.ps[i], 4.46429, epsilon = 1e-4);
            assert_relative_eq!(sol.pc[i], 3.57143, epsilon = 1e-4);
            assert_relative_eq!(sol.demands[i], 35.7143, epsilon = 1e-4);
            assert_relative_eq!(sol.u_cp[i], 127.551, epsilon = 1e-3);
        }
        assert_relative_eq!(sol.u_isp, 318.878, epsilon = 1e-3);
    }

    #[test]
    fn exante_multi_reduces_to_single() {
        let p = single_params();
        let multi = exante_multi(&p, &[5.0]).unwrap();
        let sol = multi.solution.unwrap();
        let single = exante_single(&p, 5.0).unwrap();
        assert_relative_eq!(sol.ps[0], single.ps, epsilon = 1e-12);
        assert_relative_eq!(sol.pc[0], single.pc, epsilon = 1e-12);
        assert_relative_eq!(sol.demands[0], single.demand, epsilon = 1e-12);
        assert_relative_eq!(sol.u_isp, single.u_isp, epsilon = 1e-9);
        assert_relative_eq!(sol.u_cp[0], single.u_cp, epsilon = 1e-9);
    }

    /// Independent two-CP closed forms for the ex-ante prices, written
    /// directly from the scalar reduction of the stationarity system.
    fn exante_closed_form_n2(params: &GameParameters, pd: &[f64; 2]) -> ([f64; 2], [f64; 2]) {
        let tau = params.tau();
        let (a, d0) = (params.alpha, params.d0);
        let couple = |x: &[f64; 2], k: usize| x[k] + tau / 3.0 * x[1 - k];
        let pa = [params.pa[0], params.pa[1]];
        let denom = 3.0 * (1.0 - tau * tau / 9.0);
        let mut ps = [0.0; 2];
        let mut pc = [0.0; 2];
        for k in 0..2 {
            ps[k] =
                -pd[k] + couple(&pa, k) / denom + d0 / (3.0 * a * (1.0 - tau) * (1.0 - tau / 3.0));
            pc[k] = pd[k] - 2.0 * couple(&pa, k) / denom + d0 / (3.0 * a * (1.0 - tau / 3.0));
        }
        (ps, pc)
    }

    #[test]
    fn exante_multi_agrees_with_the_scalar_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let alpha = rng.random_range(4.0..15.0);
            let tau = rng.random_range(0.02..0.95);
            let params = GameParameters::new(2, rng.random_range(40.0..300.0), alpha, tau * alpha)
                .with_pa(vec![rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)]);
            let pd = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let eq = exante_multi(&params, &pd).unwrap();
            let Some(sol) = eq.solution else { continue };
            let (ps, pc) = exante_closed_form_n2(&params, &pd);
            for k in 0..2 {
                assert_relative_eq!(sol.ps[k], ps[k], epsilon = 1e-9, max_relative = 1e-9);
                assert_relative_eq!(sol.pc[k], pc[k], epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn exante_multi_nonexistence_for_lopsided_ads() {
        // v_2 = (-2 alpha beta pa_1 + (3 alpha + beta) D0) / det turns
        // nonpositive at pa_1 = 80 for these constants.
        let p = multi_params().with_pa(vec![100.0, 0.0]);
        let eq = exante_multi(&p, &[0.0, 0.0]).unwrap();
        assert!(!eq.exists());
        assert!(eq.existence_vector[1] < 0.0);

        // Exactly zero also counts as nonexistent.
        let boundary = multi_params().with_pa(vec![80.0, 0.0]);
        let eq = exante_multi(&boundary, &[0.0, 0.0]).unwrap();
        assert!(!eq.exists());
        assert_eq!(eq.existence_vector[1], 0.0);
    }

    #[test]
    fn exante_multi_consistency_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let alpha = rng.random_range(5.0..15.0);
            let tau = rng.random_range(0.05..0.9);
            let p = GameParameters::new(2, rng.random_range(50.0..200.0), alpha, tau * alpha)
                .with_pa(vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)]);
            let eq = exante_multi(&p, &[0.0, 0.0]).unwrap();
            let Some(sol) = eq.solution else { continue };
            let m = build_matrices(&p).unwrap();
            let d = DVector::from_column_slice(&sol.demands);
            for i in 0..2 {
                assert_relative_eq!(
                    sol.demands[i],
                    p.alpha * eq.existence_vector[i],
                    epsilon = 1e-9
                );
            }
            let receipt = m.a.clone().lu().solve(&d).unwrap();
            assert_relative_eq!(sol.u_isp, d.dot(&receipt), epsilon = 1e-9);
        }
    }

    #[test]
    fn solver_utilities_match_direct_evaluation() {
        // The solver's ISP revenue is d' A^(-1) d and agrees with the raw
        // revenue evaluation at the equilibrium profile.
        let pd = [1.0, -0.5];
        let params = multi_params().with_pd(pd.to_vec());
        let sol = exante_multi(&params, &pd).unwrap().solution.unwrap();
        let direct = crate::model::utilities(&params, &sol.profile(), &sol.demands).unwrap();
        assert_relative_eq!(direct.u_isp, sol.u_isp, epsilon = 1e-9);
        let m = build_matrices(&params).unwrap();
        let d = DVector::from_column_slice(&sol.demands);
        let quad = d.dot(&m.a.clone().lu().solve(&d).unwrap());
        assert_relative_eq!(direct.u_isp, quad, epsilon = 1e-9);
        for i in 0..2 {
            assert_relative_eq!(direct.u_cp[i], sol.u_cp[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_demand_multi_boundary() {
        let p = multi_params();
        let at = PriceProfile::new(vec![12.5, 12.5], vec![12.5, 12.5]);
        assert!(exante_multi_zero_demand_check(&p, &[0.0, 0.0], &at));
        let below = PriceProfile::new(vec![12.5, 12.5], vec![12.4, 12.5]);
        assert!(!exante_multi_zero_demand_check(&p, &[0.0, 0.0], &below));
    }

    #[test]
    fn zero_demand_checks_agree_for_single_cp() {
        let p = single_params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let pd = rng.random_range(-3.0..3.0);
            let ps = rng.random_range(0.0..25.0);
            let pc = rng.random_range(0.0..25.0);
            let single = exante_single_zero_demand_check(&p, pd, ps, pc).unwrap();
            let multi =
                exante_multi_zero_demand_check(&p, &[pd], &PriceProfile::new(vec![ps], vec![pc]));
            assert_eq!(single, multi);
        }
    }

    #[test]
    fn mixed_family_reference_values() {
        let fams = exante_mixed_equilibrium_n2(&multi_params(), &[0.0, 0.0]).unwrap();
        let f = &fams[0];
        assert_relative_eq!(f.d0_prime, 120.0, epsilon = 1e-12);
        assert_relative_eq!(f.alpha_prime, 9.6, epsilon = 1e-12);
        assert_relative_eq!(f.ps_survivor, 25.0 / 6.0, epsilon = 1e-9);
        assert_relative_eq!(f.pc_survivor, 25.0 / 6.0, epsilon = 1e-9);
        assert_relative_eq!(f.p_net_survivor, 25.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(f.shutout_ps_min, 35.0 / 3.0, epsilon = 1e-9);
        // The mirror family swaps roles.
        assert_eq!(fams[1].survivor, 1);
        assert_relative_eq!(fams[1].ps_survivor, f.ps_survivor, epsilon = 1e-12);
    }

    #[test]
    fn mixed_family_collapses_to_single_when_decoupled() {
        let p = GameParameters::new(2, 90.0, 9.0, 0.0).with_pa(vec![3.0, 0.0]);
        let fams = exante_mixed_equilibrium_n2(&p, &[0.0, 0.0]).unwrap();
        let single = exante_single(&GameParameters::single(90.0, 9.0, 3.0), 0.0).unwrap();
        assert_relative_eq!(fams[0].ps_survivor, single.ps, epsilon = 1e-12);
        assert_relative_eq!(fams[0].pc_survivor, single.pc, epsilon = 1e-12);
        assert_relative_eq!(fams[0].demand_survivor, single.demand, epsilon = 1e-12);
    }

    #[test]
    fn mixed_family_membership() {
        let fams = exante_mixed_equilibrium_n2(&multi_params(), &[0.0, 0.0]).unwrap();
        let f = &fams[0];
        let inside = PriceProfile::new(
            vec![f.ps_survivor, f.shutout_ps_min + 1.0],
            vec![f.pc_survivor, f.shutout_net_min],
        );
        assert!(f.contains(&inside, 1e-9));
        let outside = PriceProfile::new(
            vec![f.ps_survivor, f.shutout_ps_min - 0.5],
            vec![f.pc_survivor, f.shutout_net_min],
        );
        assert!(!f.contains(&outside, 1e-9));
    }

    #[test]
    fn h_condition_reference() {
        let h = h_condition(&multi_params()).unwrap();
        assert_relative_eq!(h.lhs, 1.0, epsilon = 1e-12);
        assert_relative_eq!(h.rhs, (1.0 + 0.96f64.sqrt()) / 0.2, epsilon = 1e-9);
        assert!(h.ok);
    }

    #[test]
    fn expost_n2_no_equilibrium_for_equal_ads() {
        match expost_multi_n2(&multi_params()).unwrap() {
            ExPostN2Outcome::NoPureNe { h_condition_ok } => assert!(h_condition_ok),
            other => panic!("expected no equilibrium, got {other:?}"),
        }
    }

    #[test]
    fn expost_n2_survivor_at_threshold() {
        let p = multi_params().with_pa(vec![900.0, 0.0]);
        match expost_multi_n2(&p).unwrap() {
            ExPostN2Outcome::Survivor { equilibrium, .. } => {
                assert_eq!(equilibrium.survivor, 0);
                assert_relative_eq!(equilibrium.d0_prime, 120.0, epsilon = 1e-12);
                assert_relative_eq!(equilibrium.alpha_prime, 9.6, epsilon = 1e-12);
                assert_relative_eq!(equilibrium.p_net, -443.75, epsilon = 1e-9);
                assert_relative_eq!(equilibrium.demand, 4380.0, epsilon = 1e-6);
            }
            other => panic!("expected survivor equilibrium, got {other:?}"),
        }
    }

    #[test]
    fn expost_n2_sorts_by_advertising_revenue() {
        let p = multi_params().with_pa(vec![0.0, 900.0]);
        match expost_multi_n2(&p).unwrap() {
            ExPostN2Outcome::Survivor { equilibrium, .. } => {
                assert_eq!(equilibrium.survivor, 1);
                assert_relative_eq!(equilibrium.demand, 4380.0, epsilon = 1e-6);
            }
            other => panic!("expected survivor equilibrium, got {other:?}"),
        }
    }

    #[test]
    fn expost_n2_refuses_bad_weights() {
        // tau = 0.9 allows weight ratios only up to ((1 + sqrt(0.19))/0.9)^2.
        let p = GameParameters::new(2, 100.0, 10.0, 9.0).with_gamma(vec![0.9, 0.1]);
        assert!(matches!(
            expost_multi_n2(&p),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn expost_n2_beta_zero_is_separable() {
        let p = GameParameters::new(2, 100.0, 10.0, 0.0);
        assert!(matches!(expost_multi_n2(&p), Err(Error::SeparableCase)));
    }

    #[test]
    fn pd_invariance_across_solvers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = exante_multi(&multi_params(), &[0.0, 0.0]).unwrap();
        let base_sol = base.solution.unwrap();
        for _ in 0..10 {
            let pd = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let eq = exante_multi(&multi_params(), &pd).unwrap();
            let sol = eq.solution.unwrap();
            for i in 0..2 {
                assert_relative_eq!(
                    sol.ps[i] + sol.pc[i],
                    base_sol.ps[i] + base_sol.pc[i],
                    epsilon = 1e-9
                );
                assert_relative_eq!(sol.demands[i], base_sol.demands[i], epsilon = 1e-9);
                assert_relative_eq!(sol.u_cp[i], base_sol.u_cp[i], epsilon = 1e-9);
            }
            assert_relative_eq!(sol.u_isp, base_sol.u_isp, epsilon = 1e-9);
        }
    }
}
