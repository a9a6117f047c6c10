//! Price dynamics for the two-CP ex-ante game: the exact affine
//! best-response map with its spectral analysis, and a projected
//! pseudo-gradient flow over the coupled price constraints, plus the
//! diagonal-strict-concavity diagnostic behind its global stability.

use nalgebra::{Matrix4, Vector4};

use crate::equilibrium::exante_multi;
use crate::error::{Error, Result};
use crate::model::GameParameters;

/// Feasible price set of the constrained game: nonnegative demands and
/// nonnegative per-unit revenues for every agent, as half-spaces
/// `a . p <= b` over `p = (ps1, ps2, pc1, pc2)`.
#[derive(Debug, Clone)]
pub struct RegionPolytope {
    normals: [Vector4<f64>; 6],
    offsets: [f64; 6],
}

impl RegionPolytope {
    pub fn from_params(params: &GameParameters) -> Result<Self> {
        params.ensure_n(2)?;
        let (a, b, d0) = (params.alpha, params.beta, params.d0);
        let (pd1, pd2) = (params.pd[0], params.pd[1]);
        let (pa1, pa2) = (params.pa[0], params.pa[1]);
        Ok(Self {
            normals: [
                Vector4::new(a, -b, a, -b),
                Vector4::new(-b, a, -b, a),
                Vector4::new(-1.0, 0.0, 0.0, 0.0),
                Vector4::new(0.0, -1.0, 0.0, 0.0),
                Vector4::new(0.0, 0.0, -1.0, 0.0),
                Vector4::new(0.0, 0.0, 0.0, -1.0),
            ],
            offsets: [d0, d0, pd1, pd2, pa1 - pd1, pa2 - pd2],
        })
    }

    /// Largest constraint violation, if any.
    pub fn violation(&self, p: &Vector4<f64>, tol: f64) -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..6 {
            let v = self.normals[i].dot(p) - self.offsets[i];
            if v > tol && worst.map_or(true, |(_, w)| v > w) {
                worst = Some((i, v));
            }
        }
        worst
    }

    pub fn contains(&self, p: &Vector4<f64>, tol: f64) -> bool {
        self.violation(p, tol).is_none()
    }

    /// Euclidean projection onto the polytope by cyclic half-space
    /// projections (at most 64 sweeps).
    pub fn project(&self, mut p: Vector4<f64>) -> Vector4<f64> {
        for _ in 0..64 {
            let mut moved = false;
            for i in 0..6 {
                let v = self.normals[i].dot(&p) - self.offsets[i];
                if v > 0.0 {
                    p -= self.normals[i] * (v / self.normals[i].norm_squared());
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        p
    }
}

/// The affine day-to-day best-response map `p_{t+1} = X p_t + Y` over
/// `(ps1, ps2, pc1, pc2)`.
#[derive(Debug, Clone)]
pub struct DiscreteMap {
    pub x: Matrix4<f64>,
    pub y: Vector4<f64>,
    /// Magnitude of the dominant eigenvalue of `X`, `(1 + tau)/2`.
    pub spectral_radius: f64,
    pub tau: f64,
    pub region: RegionPolytope,
}

/// Eigenvalues of the iteration matrix `X` in closed form:
/// `{1/2, 1/2, (tau - 1)/2, -(1 + tau)/2}` (all real; the characteristic
/// polynomial factors as `(lambda - 1/2)^2 ((lambda + 1/2)^2 - tau^2/4)`).
pub fn x_eigenvalues_closed_form(tau: f64) -> [f64; 4] {
    [0.5, 0.5, (tau - 1.0) / 2.0, -(1.0 + tau) / 2.0]
}

/// Builds the best-response map for a valid two-CP parameter set.
pub fn build_discrete_map(params: &GameParameters) -> Result<DiscreteMap> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    let tau = params.tau();
    if tau >= 1.0 {
        return Err(Error::HypothesisViolated(format!(
            "discrete map needs tau < 1 (tau = {tau})"
        )));
    }
    let x = Matrix4::new(
        0.0, 0.0, -1.0, 0.0, //
        0.0, 0.0, 0.0, -1.0, //
        -1.0, tau, 0.0, tau, //
        tau, -1.0, tau, 0.0,
    ) * 0.5;
    let (a, b, d0) = (params.alpha, params.beta, params.d0);
    let y = Vector4::new(
        (d0 - (a - b) * params.pd[0]) / (2.0 * (a - b)),
        (d0 - (a - b) * params.pd[1]) / (2.0 * (a - b)),
        (d0 - a * (params.pa[0] - params.pd[0])) / (2.0 * a),
        (d0 - a * (params.pa[1] - params.pd[1])) / (2.0 * a),
    );
    Ok(DiscreteMap {
        x,
        y,
        spectral_radius: (1.0 + tau) / 2.0,
        tau,
        region: RegionPolytope::from_params(params)?,
    })
}

/// Fixed point `(I - X)^(-1) Y` of the best-response map; coincides with
/// the ex-ante equilibrium prices whenever the existence condition holds.
pub fn fixed_point(map: &DiscreteMap) -> Result<Vector4<f64>> {
    let system = Matrix4::identity() - map.x;
    let p = system
        .lu()
        .solve(&map.y)
        .ok_or(Error::SingularSystem("I - X"))?;
    debug_assert!(((map.x * p + map.y) - p).amax() < 1e-10 * (1.0 + p.amax()));
    Ok(p)
}

/// Ordered price iterates with convergence bookkeeping.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Visited points, starting with the initial one.
    pub iterates: Vec<[f64; 4]>,
    /// Infinity-norm distance to the reference point per iterate; empty
    /// when no reference point is available.
    pub error_norms: Vec<f64>,
    /// Whether each iterate satisfies the region constraints.
    pub in_region: Vec<bool>,
    pub converged: bool,
    /// Number of accepted update steps (0 when already at rest).
    pub steps_taken: usize,
}

/// Applies the affine map until the step shrinks below `tol` in the
/// infinity norm or `max_steps` updates were taken. Iterates are not
/// projected; the trajectory records region membership instead, since the
/// raw best responses may leave the feasible set transiently and still
/// converge.
pub fn iterate(map: &DiscreteMap, p0: [f64; 4], max_steps: usize, tol: f64) -> Trajectory {
    let target = fixed_point(map).ok();
    let mut p = Vector4::from_column_slice(&p0);
    let mut trajectory = Trajectory {
        iterates: vec![p0],
        error_norms: Vec::new(),
        in_region: vec![map.region.contains(&p, 1e-9)],
        converged: false,
        steps_taken: 0,
    };
    if let Some(t) = &target {
        trajectory.error_norms.push((p - t).amax());
    }
    for step in 0..max_steps {
        let next = map.x * p + map.y;
        if (next - p).amax() < tol {
            trajectory.converged = true;
            trajectory.steps_taken = step;
            return trajectory;
        }
        p = next;
        trajectory.iterates.push([p[0], p[1], p[2], p[3]]);
        trajectory.in_region.push(map.region.contains(&p, 1e-9));
        if let Some(t) = &target {
            trajectory.error_norms.push((p - t).amax());
        }
        trajectory.steps_taken = step + 1;
    }
    trajectory
}

/// Diagonal-strict-concavity diagnostic: eigenvalues of the constant
/// pseudo-gradient Jacobian `G` and of its normalization `-G/alpha`.
#[derive(Debug, Clone)]
pub struct ConcavityReport {
    /// Eigenvalues of `G` (ascending).
    pub g_eigenvalues: [f64; 4],
    /// Eigenvalues of `-G/alpha` (ascending); all strictly positive means
    /// the summed utility is diagonally strictly concave.
    pub scaled_eigenvalues: [f64; 4],
    pub diagonally_strictly_concave: bool,
}

/// Closed-form eigenvalues of `-G/alpha`:
/// `((3 tau + 4) +- sqrt(5 tau^2 + 8 tau + 4))/2` and
/// `((4 - 3 tau) +- sqrt(5 tau^2 - 8 tau + 4))/2`.
pub fn concavity_eigenvalues_closed_form(tau: f64) -> [f64; 4] {
    let d1 = (5.0 * tau * tau + 8.0 * tau + 4.0).sqrt();
    let d2 = (5.0 * tau * tau - 8.0 * tau + 4.0).sqrt();
    let mut eigs = [
        ((3.0 * tau + 4.0) - d1) / 2.0,
        ((3.0 * tau + 4.0) + d1) / 2.0,
        ((4.0 - 3.0 * tau) - d2) / 2.0,
        ((4.0 - 3.0 * tau) + d2) / 2.0,
    ];
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// The scaled Jacobian `-G/alpha` of the pseudo-gradient field.
#[rustfmt::skip]
pub fn scaled_jacobian(tau: f64) -> Matrix4<f64> {
    Matrix4::new(
        2.0,        -2.0 * tau, 1.0,  -tau,
        -2.0 * tau, 2.0,        -tau, 1.0,
        1.0,        -tau,       2.0,  -tau,
        -tau,       1.0,        -tau, 2.0,
    )
}

pub fn diagonal_concavity_check(params: &GameParameters) -> Result<ConcavityReport> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    let tau = params.tau();
    let mut scaled: Vec<f64> = scaled_jacobian(tau)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scaled: [f64; 4] = scaled.try_into().unwrap();
    let mut g: [f64; 4] = scaled.map(|l| -params.alpha * l);
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ConcavityReport {
        g_eigenvalues: g,
        scaled_eigenvalues: scaled,
        diagonally_strictly_concave: scaled.iter().all(|&l| l > 0.0),
    })
}

/// Step scale matched to the gradient fields, which grow with `alpha`.
pub fn default_flow_step(params: &GameParameters) -> f64 {
    0.01 / params.alpha
}

/// Own-utility partial derivatives driving the continuous dynamics.
fn pseudo_gradient(params: &GameParameters, p: &Vector4<f64>) -> Vector4<f64> {
    let (a, b, d0) = (params.alpha, params.beta, params.d0);
    let d1 = d0 - a * (p[0] + p[2]) + b * (p[1] + p[3]);
    let d2 = d0 - a * (p[1] + p[3]) + b * (p[0] + p[2]);
    Vector4::new(
        d1 - a * (p[0] + params.pd[0]) + b * (p[1] + params.pd[1]),
        d2 - a * (p[1] + params.pd[1]) + b * (p[0] + params.pd[0]),
        d1 - a * (p[2] + params.pa[0] - params.pd[0]),
        d2 - a * (p[3] + params.pa[1] - params.pd[1]),
    )
}

/// Explicit-Euler integration of the pseudo-gradient fields with
/// Euclidean projection onto the feasible polytope after every step.
///
/// The multiplier coupling of the exact centralized dynamics is replaced
/// by the projection; trajectories stay feasible and, under diagonal
/// strict concavity, end at the unique equilibrium whenever it lies in
/// the interior. Terminates once the post-projection move drops below
/// `tol * step_size` in the infinity norm.
pub fn pseudo_gradient_flow(
    params: &GameParameters,
    p0: [f64; 4],
    step_size: f64,
    max_steps: usize,
    tol: f64,
) -> Result<Trajectory> {
    params.ensure_n(2)?;
    params.ensure_valid()?;
    let region = RegionPolytope::from_params(params)?;
    let start = Vector4::from_column_slice(&p0);
    if let Some((constraint, violation)) = region.violation(&start, 1e-9) {
        return Err(Error::OutsideRegion {
            constraint,
            violation,
        });
    }

    let target = exante_multi(params, &params.pd)?
        .solution
        .map(|sol| Vector4::new(sol.ps[0], sol.ps[1], sol.pc[0], sol.pc[1]));

    let mut p = start;
    let mut trajectory = Trajectory {
        iterates: vec![p0],
        error_norms: Vec::new(),
        in_region: vec![true],
        converged: false,
        steps_taken: 0,
    };
    if let Some(t) = &target {
        trajectory.error_norms.push((p - t).amax());
    }
    for step in 0..max_steps {
        let next = region.project(p + pseudo_gradient(params, &p) * step_size);
        if (next - p).amax() < tol * step_size {
            trajectory.converged = true;
            trajectory.steps_taken = step;
            return Ok(trajectory);
        }
        p = next;
        trajectory.iterates.push([p[0], p[1], p[2], p[3]]);
        trajectory.in_region.push(region.contains(&p, 1e-9));
        if let Some(t) = &target {
            trajectory.error_norms.push((p - t).amax());
        }
        trajectory.steps_taken = step + 1;
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn remark_params() -> GameParameters {
        GameParameters::new(2, 200.0, 6.0, 3.0)
            .with_pd(vec![10.0, 25.0])
            .with_pa(vec![45.0, 10.0])
    }

    fn reference_params() -> GameParameters {
        GameParameters::new(2, 100.0, 10.0, 2.0)
    }

    #[test]
    fn offset_vector_reference_values() {
        let map = build_discrete_map(&remark_params()).unwrap();
        assert_relative_eq!(map.y[0], 28.3333, epsilon = 1e-4);
        assert_relative_eq!(map.y[1], 20.8333, epsilon = 1e-4);
        assert_relative_eq!(map.y[2], -0.8333, epsilon = 1e-4);
        assert_relative_eq!(map.y[3], 24.1667, epsilon = 1e-4);
    }

    #[test]
    fn decoupled_map_structure() {
        let p = GameParameters::new(2, 100.0, 10.0, 0.0);
        let map = build_discrete_map(&p).unwrap();
        assert_eq!(map.x[(0, 2)], -0.5);
        assert_eq!(map.x[(1, 3)], -0.5);
        assert_eq!(map.x[(2, 0)], -0.5);
        assert_eq!(map.x[(2, 1)], 0.0);
        assert_relative_eq!(map.spectral_radius, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn spectral_radius_below_one() {
        let p = GameParameters::new(2, 100.0, 10.0, 5.0);
        let map = build_discrete_map(&p).unwrap();
        assert!(map.spectral_radius < 1.0);
        let numeric = map
            .x
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0f64, f64::max);
        assert_relative_eq!(map.spectral_radius, numeric, epsilon = 1e-12);
    }

    #[test]
    fn x_closed_form_matches_numeric_eigensolve() {
        for k in 0..10 {
            let tau = k as f64 / 10.0;
            let alpha = 10.0;
            let p = GameParameters::new(2, 100.0, alpha, tau * alpha);
            let map = build_discrete_map(&p).unwrap();
            let mut numeric: Vec<(f64, f64)> = map
                .x
                .complex_eigenvalues()
                .iter()
                .map(|l| (l.re, l.im))
                .collect();
            numeric.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut closed: Vec<f64> = x_eigenvalues_closed_form(tau).to_vec();
            closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (n, c) in numeric.iter().zip(&closed) {
                assert_relative_eq!(n.0, c, epsilon = 1e-9);
                assert_relative_eq!(n.1, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn one_step_reference_iteration() {
        let map = build_discrete_map(&remark_params()).unwrap();
        let traj = iterate(&map, [19.0, 2.0, 25.0, 28.0], 1, 1e-12);
        let p1 = traj.iterates[1];
        assert_relative_eq!(p1[0], 15.8333, epsilon = 1e-3);
        assert_relative_eq!(p1[1], 6.8333, epsilon = 1e-3);
        assert_relative_eq!(p1[2], -2.8333, epsilon = 1e-3);
        assert_relative_eq!(p1[3], 34.1667, epsilon = 1e-3);
    }

    #[test]
    fn iterates_can_leave_the_region_and_still_converge() {
        let map = build_discrete_map(&remark_params()).unwrap();
        let traj = iterate(&map, [19.0, 2.0, 25.0, 28.0], 2000, 1e-12);
        assert!(traj.converged);
        assert!(traj.in_region.iter().any(|ok| !ok));
        let last = Vector4::from_column_slice(traj.iterates.last().unwrap());
        let fp = fixed_point(&map).unwrap();
        assert!((last - fp).amax() < 1e-9);
    }

    #[test]
    fn starting_at_the_fixed_point_takes_no_steps() {
        let map = build_discrete_map(&reference_params()).unwrap();
        let fp = fixed_point(&map).unwrap();
        let traj = iterate(&map, [fp[0], fp[1], fp[2], fp[3]], 100, 1e-10);
        assert!(traj.converged);
        assert_eq!(traj.steps_taken, 0);
        assert_eq!(traj.iterates.len(), 1);
    }

    #[test]
    fn error_contraction_is_exactly_linear() {
        let map = build_discrete_map(&remark_params()).unwrap();
        let fp = fixed_point(&map).unwrap();
        let p0 = Vector4::new(19.0, 2.0, 25.0, 28.0);
        let e0 = p0 - fp;
        let p1 = map.x * p0 + map.y;
        let propagated = map.x * e0;
        assert!(((p1 - fp) - propagated).amax() < 1e-12);
    }

    #[test]
    fn geometric_decay_after_burn_in() {
        let map = build_discrete_map(&remark_params()).unwrap();
        let traj = iterate(&map, [19.0, 2.0, 25.0, 28.0], 200, 0.0);
        let bound = map.spectral_radius + 0.05;
        let e = &traj.error_norms;
        for t in 10..e.len() - 1 {
            if e[t] > 1e-13 {
                assert!(
                    e[t + 1] / e[t] <= bound,
                    "step {t}: ratio {} exceeds {bound}",
                    e[t + 1] / e[t]
                );
            }
        }
    }

    #[test]
    fn fixed_point_matches_equilibrium_prices() {
        let map = build_discrete_map(&reference_params()).unwrap();
        let fp = fixed_point(&map).unwrap();
        assert!(((map.x * fp + map.y) - fp).amax() < 1e-10);
        assert_relative_eq!(fp[0], 4.46429, epsilon = 1e-4);
        assert_relative_eq!(fp[1], 4.46429, epsilon = 1e-4);
        assert_relative_eq!(fp[2], 3.57143, epsilon = 1e-4);
        assert_relative_eq!(fp[3], 3.57143, epsilon = 1e-4);
        let eq = exante_multi(&reference_params(), &[0.0, 0.0])
            .unwrap()
            .solution
            .unwrap();
        assert_relative_eq!(fp[0], eq.ps[0], epsilon = 1e-8);
        assert_relative_eq!(fp[2], eq.pc[0], epsilon = 1e-8);
    }

    #[test]
    fn concavity_eigenvalues_at_tau_zero() {
        let p = GameParameters::new(2, 100.0, 10.0, 0.0);
        let report = diagonal_concavity_check(&p).unwrap();
        let mut expected = [3.0, 1.0, 3.0, 1.0];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in report.scaled_eigenvalues.iter().zip(&expected) {
            assert_relative_eq!(got, want, epsilon = 1e-9);
        }
        assert!(report.diagonally_strictly_concave);
    }

    #[test]
    fn concavity_closed_form_matches_numeric() {
        for k in 0..10 {
            let tau = k as f64 / 10.0;
            let p = GameParameters::new(2, 100.0, 10.0, 10.0 * tau);
            let report = diagonal_concavity_check(&p).unwrap();
            let closed = concavity_eigenvalues_closed_form(tau);
            for (got, want) in report.scaled_eigenvalues.iter().zip(&closed) {
                assert_relative_eq!(got, want, epsilon = 1e-9);
            }
            assert!(report.diagonally_strictly_concave);
            assert!(report.g_eigenvalues.iter().all(|&l| l < 0.0));
        }
    }

    #[test]
    fn concavity_degenerates_towards_full_coupling() {
        let almost = concavity_eigenvalues_closed_form(0.999);
        assert!(almost[0] > 0.0);
        assert!(almost[0] < 0.01);
    }

    #[test]
    fn flow_is_stationary_at_the_equilibrium() {
        let params = reference_params();
        let eq = exante_multi(&params, &[0.0, 0.0])
            .unwrap()
            .solution
            .unwrap();
        let p0 = [eq.ps[0], eq.ps[1], eq.pc[0], eq.pc[1]];
        let traj =
            pseudo_gradient_flow(&params, p0, default_flow_step(&params), 1000, 1e-6).unwrap();
        assert!(traj.converged);
        assert_eq!(traj.steps_taken, 0);
    }

    #[test]
    fn flow_returns_to_the_equilibrium() {
        let params = reference_params();
        let eq = exante_multi(&params, &[0.0, 0.0])
            .unwrap()
            .solution
            .unwrap();
        let p0 = [
            eq.ps[0] + 0.1,
            eq.ps[1] - 0.1,
            eq.pc[0] + 0.05,
            eq.pc[1] - 0.05,
        ];
        let traj =
            pseudo_gradient_flow(&params, p0, default_flow_step(&params), 100_000, 1e-6).unwrap();
        assert!(traj.converged);
        assert!(traj.in_region.iter().all(|&ok| ok));
        let last = traj.iterates.last().unwrap();
        let target = [eq.ps[0], eq.ps[1], eq.pc[0], eq.pc[1]];
        for i in 0..4 {
            assert!((last[i] - target[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn flow_rejects_infeasible_starts() {
        let params = reference_params();
        // ps1 below -pd1 violates the ISP revenue constraint.
        let res = pseudo_gradient_flow(&params, [-1.0, 4.0, 3.0, 3.0], 0.001, 10, 1e-6);
        assert!(matches!(res, Err(Error::OutsideRegion { .. })));
    }

    #[test]
    fn projection_lands_inside() {
        let params = reference_params();
        let region = RegionPolytope::from_params(&params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = Vector4::new(
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
            );
            let q = region.project(p);
            assert!(region.contains(&q, 1e-6), "projection failed for {p:?}");
        }
    }
}
