mod common;

use std::f64::consts::PI;

use wireflow::diagnostics::{dissipation_audit, spatial_order_study_exact, OrderStudySettings};
use wireflow::flow::{diagnose, run_flow, FlowConfig, Scheme, Terminal};
use wireflow::grid::{inner, Grid};
use wireflow::model::{
    constraint_values, energy, flow_rhs, multipliers, pi_matrix, project_closure, reconstruct_curve, verify_winding,
};
use wireflow::scenario::{InitialFamily, Scenario};
use wireflow::stationary::{newton_refine, stationary_residual};
use wireflow::{AngleDensityState, ModelParams, StiffnessProfile};

/// `theta = s + 0.2 sin s`, `rho = 0.1 cos s`, exponential stiffness, `c0 = 0.5`.
fn perturbed(n: usize) -> (AngleDensityState, ModelParams) {
    let g = Grid::new(2.0 * PI, n).unwrap();
    let theta = g.sample(|s| s + 0.2 * s.sin());
    let rho = g.sample(|s| 0.1 * s.cos());
    let params = ModelParams {
        length: 2.0 * PI,
        mu: 1.0,
        c0: 0.5,
        omega: 1,
        beta: StiffnessProfile::Exponential { a: 1.0, b: 1.0 },
        mass: 0.0,
    };
    (AngleDensityState::new(theta, rho, 1, 0.0).unwrap(), params)
}

/// Continuum values for [`perturbed`] from analytic derivatives and a
/// spectrally accurate 8192-point trapezoid rule.
struct Continuum {
    lam: [f64; 3],
}

impl Continuum {
    const C0: f64 = 0.5;

    /// `(theta, kappa, beta, beta')`; for `beta = exp` the last two coincide.
    fn fields(s: f64) -> (f64, f64, f64, f64) {
        let theta = s + 0.2 * s.sin();
        let kappa = 1.0 + 0.2 * s.cos();
        let beta = (0.1 * s.cos()).exp();
        (theta, kappa, beta, beta)
    }

    fn new() -> Self {
        let m = 8192;
        let h = 2.0 * PI / m as f64;
        let (mut ss, mut sc, mut cc, mut j1, mut j2, mut q) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..m {
            let s = i as f64 * h;
            let (theta, kappa, beta, dbeta) = Self::fields(s);
            let (sn, cs) = theta.sin_cos();
            ss += h * sn * sn;
            sc += h * sn * cs;
            cc += h * cs * cs;
            let f = beta * (kappa - Self::C0);
            j1 += h * f * kappa * cs;
            j2 += h * f * kappa * sn;
            q += h * dbeta * (kappa - Self::C0).powi(2);
        }
        let det = ss * cc - sc * sc;
        let l1 = (cc * j1 + sc * j2) / det;
        let l2 = (ss * j2 + sc * j1) / det;
        Self { lam: [l1, l2, -q / (2.0 * 2.0 * PI)] }
    }

    fn rhs(&self, s: f64) -> (f64, f64) {
        let (theta, kappa, beta, dbeta) = Self::fields(s);
        let drho = -0.1 * s.sin();
        let d2rho = -0.1 * s.cos();
        let dkappa = -0.2 * s.sin();
        let dflux = dbeta * drho * (kappa - Self::C0) + beta * dkappa;
        let (sn, cs) = theta.sin_cos();
        let dt = dflux + self.lam[0] * sn - self.lam[1] * cs;
        let dr = d2rho - 0.5 * dbeta * (kappa - Self::C0).powi(2) - self.lam[2];
        (dt, dr)
    }
}

fn as_array(m: wireflow::Multipliers) -> [f64; 3] {
    [m.lam_theta1, m.lam_theta2, m.lam_rho]
}

#[test]
fn multipliers_match_continuum_after_extrapolation() {
    let oracle = Continuum::new();
    let coarse = as_array(multipliers(&perturbed(512).0, &perturbed(512).1).unwrap());
    let fine = as_array(multipliers(&perturbed(1024).0, &perturbed(1024).1).unwrap());
    for k in 0..3 {
        let extrapolated = (4.0 * fine[k] - coarse[k]) / 3.0;
        assert!(
            (extrapolated - oracle.lam[k]).abs() <= 1e-8,
            "multiplier {k}: {extrapolated} vs {}",
            oracle.lam[k]
        );
        assert!((coarse[k] - oracle.lam[k]).abs() <= 1e-3);
    }
}

#[test]
fn flow_rhs_matches_continuum_after_extrapolation() {
    let oracle = Continuum::new();
    let (sc, pc) = perturbed(512);
    let (sf, pf) = perturbed(1024);
    let coarse = flow_rhs(&sc, &pc).unwrap();
    let fine = flow_rhs(&sf, &pf).unwrap();
    let scale = 1.0 + coarse.max_abs();
    for i in 0..512 {
        let (dt, dr) = oracle.rhs(sc.grid().node(i));
        let et = (4.0 * fine.dtheta[2 * i] - coarse.dtheta[i]) / 3.0 - dt;
        let er = (4.0 * fine.drho[2 * i] - coarse.drho[i]) / 3.0 - dr;
        assert!(et.abs() <= 1e-6 * scale && er.abs() <= 1e-6 * scale, "node {i}: {et:e} {er:e}");
    }
}

#[test]
fn pi_determinant_double_integral() {
    let g = Grid::new(2.0 * PI, 512).unwrap();
    let theta = g.sample(|s| s + 0.3 * (2.0 * s).sin());
    let state = AngleDensityState::new(theta, g.constant(0.0), 1, 0.0).unwrap();
    let th = state.theta.values();
    let h = g.h();
    let double: f64 = th.iter().map(|a| th.iter().map(|b| (a - b).sin().powi(2)).sum::<f64>()).sum();
    assert!((pi_matrix(&state).det - 0.5 * h * h * double).abs() <= 1e-10);
}

#[test]
fn closure_moments_are_stationary_along_the_flow() {
    let mut rng = common::rng(21);
    for _ in 0..20 {
        let (raw, params) = common::random_state(&mut rng, 128);
        let Ok(projected) = project_closure(&raw, &params, 1e-12, 8) else { continue };
        let s = projected.state;
        let rhs = flow_rhs(&s, &params).unwrap();
        let sin = s.theta.map(f64::sin);
        let cos = s.theta.map(f64::cos);
        assert!(inner(&rhs.dtheta, &sin).abs() <= 1e-10);
        assert!(inner(&rhs.dtheta, &cos).abs() <= 1e-10);
    }
}

#[test]
fn projected_states_reconstruct_to_closed_polygons() {
    for n in [64, 128, 256] {
        let (s, p) = Scenario::standard().with_n(n).initial_state().unwrap();
        assert!(constraint_values(&s, &p).closure_defect() <= 1e-12);
        let h = s.grid().h();
        assert!(reconstruct_curve(&s, [0.0, 0.0]).closure_gap <= h * h);
    }
}

#[test]
fn stationary_residual_equals_grad_norm() {
    let (s, p) = Scenario::standard().initial_state().unwrap();
    let (d, _) = diagnose(&s, &p, 0.0, true).unwrap();
    let r = stationary_residual(&s, &p).unwrap();
    assert!((r.residual_l2 - d.grad_norm).abs() <= 1e-13);
    assert!(r.residual_l2 > 0.0);
}

#[test]
fn newton_polishes_a_coarse_flow_limit() {
    let sc = Scenario::standard().with_n(128);
    let (s, p) = sc.initial_state().unwrap();
    let traj = run_flow(&s, &p, &sc.flow);
    assert_eq!(traj.terminal, Terminal::Stationary);
    let out = newton_refine(&traj.final_state, &p, 1e-12, 5).unwrap();
    assert!(out.iterations <= 5);
    assert!((energy(&out.state, &p) - energy(&traj.final_state, &p)).abs() <= 1e-10);
    let c = constraint_values(&out.state, &p);
    assert!(c.closure_defect() <= 1e-12 && c.gmass.abs() <= 1e-12);
    assert_eq!(verify_winding(&out.state).unwrap(), 1);
    let (k, f) = (out.kkt, out.report.mult());
    assert!((k.lam_theta1 - f.lam_theta1).abs() <= 1e-9);
    assert!((k.lam_theta2 - f.lam_theta2).abs() <= 1e-9);
    assert!((k.lam_rho - f.lam_rho).abs() <= 1e-9);
}

#[test]
fn mid_flow_residual_decreases() {
    let sc = Scenario::standard();
    let (s, p) = sc.initial_state().unwrap();
    let traj = run_flow(&s, &p, &FlowConfig { t_end: 5.0, ..sc.flow.clone() });
    let after: Vec<f64> = traj.diagnostics.iter().filter(|d| d.time >= 1.0).map(|d| d.grad_norm).collect();
    assert!(after.len() > 10);
    assert!(after.iter().all(|&g| g > 0.0));
    assert!(after.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn rk4_satisfies_the_dissipation_identity_at_tiny_steps() {
    let sc = Scenario::standard().with_n(64);
    let (s, p) = sc.initial_state().unwrap();
    let settled = run_flow(&s, &p, &FlowConfig { t_end: 3.0, ..sc.flow.clone() }).final_state;
    let config = FlowConfig { scheme: Scheme::ExplicitRk4, ..FlowConfig::fixed_step(1e-6, 3.0 + 5e-5) };
    let traj = run_flow(&settled, &p, &config);
    assert_eq!(traj.terminal, Terminal::ReachedTEnd);
    let audit = dissipation_audit(&traj);
    assert!(audit.max <= 1e-8, "max residual {:e}", audit.max);
}

/// Unit stiffness, `c0 = 0`, multipliers off: both unknowns obey the heat
/// equation, with exact solution `theta = s + a e^{-t} sin s`, `rho = b e^{-mu t} cos s`.
#[test]
fn heat_subproblem_is_second_order_against_the_exact_solution() {
    let (a, b, mu) = (0.1, 0.2, 0.5);
    let sc = Scenario {
        params: ModelParams {
            length: 2.0 * PI,
            mu,
            c0: 0.0,
            omega: 1,
            beta: StiffnessProfile::Constant { a: 1.0 },
            mass: 0.0,
        },
        n: 64,
        initial: InitialFamily::PerturbedCircle {
            amplitudes: vec![a],
            modes: vec![1],
            rho_amplitudes: vec![b],
            rho_modes: vec![1],
            rho_mean: 0.0,
        },
        flow: FlowConfig { constrained: false, project_every: 0, ..FlowConfig::default() },
    };
    let exact = |g: Grid, t: f64| {
        let theta = g.sample(|s| s + a * (-t).exp() * s.sin());
        let rho = g.sample(|s| b * (-mu * t).exp() * s.cos());
        AngleDensityState::new(theta, rho, 1, t).unwrap()
    };
    let report = spatial_order_study_exact(&sc, &[32, 64, 128, 256], &OrderStudySettings::default(), exact).unwrap();
    let order = report.observed_order.unwrap();
    assert!((1.9..=2.1).contains(&order), "order {order}, errors {:?}", report.errors);
}
