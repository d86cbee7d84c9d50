//! Cross-module runs on real flow data: the spectral flow feeds the
//! rescaled graphs, the graphs feed the fits and checks, and the planar
//! arrival solver agrees with the support-function flow on the same shape.

use mcflab::arrival::{signed_distance_convex, solve_arrival, ArrivalControls, Grid2};
use mcflab::estimates::{decay_fit, mode_decay_fit, Verdict};
use mcflab::flow::{run_to_extinction, FlowControls, FlowTrajectory};
use mcflab::pipeline::{run_checks, CheckKind, CheckParams};
use mcflab::rescale::{build_graph_trajectory, Gauge, GraphTrajectory};
use mcflab::shapes;
use mcflab::spectral::SphereGrid;

fn ellipse_flow() -> FlowTrajectory {
    let sf = shapes::ellipse(1.2, 1.0 / 1.2, 128).unwrap();
    run_to_extinction(&sf, &FlowControls::default()).unwrap()
}

fn graph_of(traj: &FlowTrajectory, delta_t: f64, delta_x0: [f64; 2]) -> GraphTrajectory {
    let gauge = Gauge {
        t_hat: traj.t_hat + delta_t,
        x0: [traj.x0_hat[0] + delta_x0[0], traj.x0_hat[1] + delta_x0[1]],
    };
    let sphere = SphereGrid::new(1, 48).unwrap();
    build_graph_trajectory(traj, &sphere, &gauge).unwrap()
}

#[test]
fn ellipse_run_decays_at_the_mode_two_rate() {
    let traj = ellipse_flow();
    let graph = graph_of(&traj, 0.0, [0.0, 0.0]);
    assert_eq!(graph.skipped_lead, 0);
    assert!(graph.truncation.is_none());
    let fit = decay_fit(&graph.snapshots, 2, [3.0, 6.0]).unwrap();
    assert!(fit.reliable, "residual {}", fit.residual);
    assert!((fit.rate - 1.0).abs() < 0.05, "rate {}", fit.rate);
}

#[test]
fn misgauged_runs_grow_at_the_spectral_rates() {
    let sf = shapes::circle(1.0, [0.0, 0.0], 128).unwrap();
    let traj = run_to_extinction(&sf, &FlowControls::default()).unwrap();

    // extinction-time offset excites the l = 0 mode at rate e^{+s}
    let late = graph_of(&traj, 1e-4, [0.0, 0.0]);
    let fit = mode_decay_fit(&late.snapshots, 0, [3.0, 6.0], 1e-7, 20).unwrap();
    assert!((fit.rate + 1.0).abs() < 0.05, "l=0 rate {}", fit.rate);

    // center offset excites the l = 1 mode at rate e^{+s/2}
    let shifted = graph_of(&traj, 0.0, [1e-4, 0.0]);
    let fit = mode_decay_fit(&shifted.snapshots, 1, [3.0, 6.0], 1e-7, 20).unwrap();
    assert!((fit.rate + 0.5).abs() < 0.025, "l=1 rate {}", fit.rate);
}

#[test]
fn arrival_and_flow_agree_on_extinction() {
    let sf = shapes::ellipse(1.2, 1.0 / 1.2, 128).unwrap();
    let traj = run_to_extinction(&sf, &FlowControls::default()).unwrap();

    let grid = Grid2::square(96, 1.15 * 1.2).unwrap();
    let phi0 = signed_distance_convex(&sf, &grid);
    let field = solve_arrival(&grid, &phi0, &ArrivalControls::default()).unwrap();

    assert!(
        (field.t_hat - traj.t_hat).abs() < 5e-3,
        "arrival {} vs flow {}",
        field.t_hat,
        traj.t_hat
    );
    let dx0 = (field.x0_hat[0] - traj.x0_hat[0]).hypot(field.x0_hat[1] - traj.x0_hat[1]);
    assert!(dx0 < 5e-3, "centers {dx0} apart");
}

#[test]
fn ellipse_run_passes_every_check() {
    let traj = ellipse_flow();
    let graph = graph_of(&traj, 0.0, [0.0, 0.0]);
    let reports = run_checks(&graph, &CheckKind::all(), &CheckParams::default()).unwrap();

    let verdict = |name: &str| {
        reports
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("missing report {name}"))
            .1
            .verdict
    };
    assert!(
        reports.iter().all(|(_, r)| !r.verdict.is_failure()),
        "{:?}",
        reports
            .iter()
            .map(|(n, r)| (n.clone(), r.verdict))
            .collect::<Vec<_>>()
    );
    assert_eq!(verdict("certificate"), Verdict::Quantized);
    assert_eq!(verdict("decay"), Verdict::Pass);
    assert_eq!(verdict("quadratic_bound"), Verdict::Pass);
    assert_eq!(verdict("duhamel"), Verdict::Pass);
    // ranks below the double rate are provable, the rest are flagged, not failed
    assert_eq!(verdict("key_inequality_k1"), Verdict::Pass);
    assert_eq!(verdict("key_inequality_k2"), Verdict::Pass);
    assert_eq!(verdict("key_inequality_k3"), Verdict::Pass);
    assert_eq!(verdict("key_inequality_k4"), Verdict::Inconclusive);
    assert_eq!(verdict("sup_bound"), Verdict::Pass);
}
