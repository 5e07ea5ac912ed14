use frontlab::fbsolver::{classify_outcome, run, sandwich_excess, InitialData, InitialShape, Outcome, OutcomeThresholds, SimulationConfig};
use frontlab::kernels::Kernel;
use frontlab::lattice::ConvolutionPath;
use frontlab::reaction::ReactionSystem;

fn laplace() -> Vec<Kernel> {
    vec![Kernel::laplace(1.0).unwrap()]
}

fn short() -> SimulationConfig {
    SimulationConfig { h0: 3.0, dx: 0.1, t_final: 20.0, sample_dt: 1.0, ..SimulationConfig::default() }
}

#[test]
fn shifting_the_data_shifts_the_fronts() {
    let system = ReactionSystem::logistic();
    let base = run(&system, &laplace(), &short()).unwrap();
    let moved = run(&system, &laplace(), &SimulationConfig { shift_cells: 13, ..short() }).unwrap();
    let offset = 13.0 * 0.1;
    for k in 0..base.len() {
        assert!((moved.h[k] - base.h[k] - offset).abs() < 1e-9, "{k}");
        assert!((moved.g[k] - base.g[k] - offset).abs() < 1e-9, "{k}");
    }
}

#[test]
fn fft_and_direct_runs_agree() {
    let system = ReactionSystem::logistic();
    let direct = run(&system, &laplace(), &SimulationConfig { path: ConvolutionPath::Direct, ..short() }).unwrap();
    let fft = run(&system, &laplace(), &SimulationConfig { path: ConvolutionPath::Fft, ..short() }).unwrap();
    for (a, b) in direct.h.iter().zip(&fft.h) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn front_error_is_first_order_in_time() {
    let system = ReactionSystem::logistic();
    let h = |cfl: f64| {
        let tr = run(&system, &laplace(), &SimulationConfig { cfl_factor: cfl, ..short() }).unwrap();
        tr.h[tr.len() - 1]
    };
    let (a, b, c) = (h(0.4), h(0.2), h(0.1));
    let ratio = (a - b) / (b - c);
    assert!((1.6..2.6).contains(&ratio), "{a} {b} {c}: ratio {ratio}");
}

#[test]
fn solution_stays_under_the_ode_envelope() {
    let system = ReactionSystem::west_nile_default();
    let kernels = vec![Kernel::laplace(1.0).unwrap(), Kernel::gaussian(1.0).unwrap()];
    let tr = run(&system, &kernels, &short()).unwrap();
    assert!(sandwich_excess(&system, &tr).unwrap() <= 1e-6);
    assert!(tr.min_before_clamp.iter().all(|&v| v >= 0.0));
}

#[test]
fn weak_small_populations_vanish() {
    let mut system = ReactionSystem::logistic();
    system.d = vec![2.0];
    system.mu = vec![1e-3];
    let cfg = SimulationConfig {
        h0: 0.5,
        dx: 0.01,
        t_final: 50.0,
        u0: InitialData { shape: InitialShape::Bump, amplitude: 1e-3 },
        ..SimulationConfig::default()
    };
    let tr = run(&system, &laplace(), &cfg).unwrap();
    assert_eq!(classify_outcome(&tr, &system, &OutcomeThresholds::default()), Outcome::Vanishing);
}

#[test]
fn wide_saturated_populations_spread() {
    let system = ReactionSystem::logistic();
    let cfg = SimulationConfig { h0: 20.0, t_final: 60.0, u0: InitialData { shape: InitialShape::Constant, amplitude: 1.0 }, ..short() };
    let tr = run(&system, &laplace(), &cfg).unwrap();
    assert_eq!(classify_outcome(&tr, &system, &OutcomeThresholds::default()), Outcome::Spreading);
}

#[test]
fn joint_refinement_converges_at_first_order() {
    let system = ReactionSystem::logistic();
    let h = |dx: f64, cfl: f64| {
        let cfg = SimulationConfig { dx, cfl_factor: cfl, ..short() };
        let tr = run(&system, &laplace(), &cfg).unwrap();
        tr.h[tr.len() - 1]
    };
    let (a, b, c) = (h(0.2, 0.4), h(0.1, 0.2), h(0.05, 0.1));
    let ratio = (a - b) / (b - c);
    assert!(ratio >= 1.8, "{a} {b} {c}: ratio {ratio}");
}
