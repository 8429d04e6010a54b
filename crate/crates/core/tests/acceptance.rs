//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::f64::consts::PI;
use std::time::Instant;

use heatctl::bangbang::bangbang_report;
use heatctl::oracle::{
    galerkin_bruteforce_alpha, scalar_alpha, scalar_tau, GalerkinSearch, ScalarInstance,
};
use heatctl::pde::{eigenmode_combination, first_eigenvalue, scaling_gap_check, solve_forward};
use heatctl::reach::{default_fd_step, gradient_fd_check, project_pointwise};
use heatctl::solvers::{SolverOptions, ValuePoint, ValueSolver};
use heatctl::{
    ControlProblem, ControlSignal, Execution, NonlinearitySpec, SpatialGrid, TargetBall,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 127;
const STEPS: usize = 400;

fn instance(omega: Option<(f64, f64)>, f: NonlinearitySpec) -> ControlProblem {
    let g = match omega {
        Some((a, b)) => SpatialGrid::new(1.0, N, a, b).unwrap(),
        None => SpatialGrid::whole_domain(1.0, N).unwrap(),
    };
    let y0 = eigenmode_combination(&g, &[(1, 2.0)]).unwrap();
    ControlProblem::new(g, f, y0, TargetBall::new(0.5).unwrap(), STEPS).unwrap()
}

fn linear_global() -> ControlProblem {
    instance(None, NonlinearitySpec::zero())
}

fn tanh_partial() -> ControlProblem {
    instance(
        Some((0.3, 0.8)),
        NonlinearitySpec::scaled_tanh(1.0).unwrap(),
    )
}

fn tanh_global() -> ControlProblem {
    instance(None, NonlinearitySpec::scaled_tanh(1.0).unwrap())
}

fn solver(p: ControlProblem) -> ValueSolver {
    ValueSolver::new(p, SolverOptions::default()).unwrap()
}

/// Minimal-norm controls collected across criteria, with their grids.
type Alphas = Vec<(SpatialGrid, ValuePoint)>;
type Criterion = Box<dyn FnOnce(&mut Alphas) -> Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Random nodal values in `[-amp, amp]`.
fn random_state(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
}

fn random_control(
    rng: &mut ChaCha8Rng,
    g: &SpatialGrid,
    dt: f64,
    nt: usize,
    m: f64,
) -> ControlSignal {
    let raw = ControlSignal::from_fn(g, dt, nt, |_, _| rng.gen_range(-2.0 * m..2.0 * m));
    project_pointwise(&raw, m, g).unwrap()
}

fn decay_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let horizon = 0.15;
    let nt = 2000;
    let dt = horizon / nt as f64;
    let g = SpatialGrid::whole_domain(1.0, N).unwrap();
    let lam = first_eigenvalue(&g);
    let mut worst = 0.0_f64;
    for f in [
        NonlinearitySpec::zero(),
        NonlinearitySpec::scaled_tanh(1.0).unwrap(),
    ] {
        for _ in 0..10 {
            let y0 = random_state(&mut rng, N, 3.0);
            let y = solve_forward(&y0, &ControlSignal::zeros(&g, dt, nt), &f, &g).unwrap();
            let y0n = y.norms()[0];
            for (k, &norm) in y.norms().iter().enumerate() {
                let bound = (1.0 + 10.0 * dt) * (-lam * y.time(k)).exp() * y0n;
                worst = worst.max(norm / bound);
            }
        }
    }
    let e1 = eigenmode_combination(&g, &[(1, 1.0)]).unwrap();
    let y = solve_forward(
        &e1,
        &ControlSignal::zeros(&g, dt, nt),
        &NonlinearitySpec::zero(),
        &g,
    )
    .unwrap();
    let gap = y
        .norms()
        .iter()
        .enumerate()
        .map(|(k, &n)| (n / (-lam * y.time(k)).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1.0 && gap <= 1e-3,
        format!("max norm/bound {worst:.6} (<= 1), eigenmode envelope gap {gap:.2e} (<= 1e-3)"),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, p, tol) in [
        ("linear", linear_global(), 1e-9),
        ("tanh", tanh_partial(), 1e-6),
    ] {
        let g = p.grid().clone();
        let dt = p.dt(0.1);
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let v = random_control(&mut rng, &g, dt, STEPS, 5.0);
            let d = ControlSignal::from_fn(&g, dt, STEPS, |_, _| rng.gen_range(-1.0..1.0));
            worst = worst.max(gradient_fd_check(&p, &v, &d, default_fd_step(&p)).unwrap());
        }
        pass &= worst <= tol;
        detail.push(format!("{name} {worst:.2e} (<= {tol:.0e})"));
    }
    outcome(pass, detail.join(", "))
}

/// Dense RK4 on the scalar mode equation `a' = -lam a - M`.
fn rk4_hit(a0: f64, r: f64, lam: f64, m: f64) -> f64 {
    let dt = 1e-7;
    let rhs = |a: f64| -lam * a - m;
    let (mut a, mut t) = (a0, 0.0);
    while a > r {
        let k1 = rhs(a);
        let k2 = rhs(a + 0.5 * dt * k1);
        let k3 = rhs(a + 0.5 * dt * k2);
        let k4 = rhs(a + dt * k3);
        let next = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next <= r {
            return t + dt * (a - r) / (a - next);
        }
        a = next;
        t += dt;
    }
    t
}

fn rk4_terminal(a0: f64, lam: f64, m: f64, horizon: f64) -> f64 {
    let steps = 1_000_000;
    let dt = horizon / steps as f64;
    let rhs = |a: f64| -lam * a - m;
    let mut a = a0;
    for _ in 0..steps {
        let k1 = rhs(a);
        let k2 = rhs(a + 0.5 * dt * k1);
        let k3 = rhs(a + 0.5 * dt * k2);
        let k4 = rhs(a + dt * k3);
        a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    a
}

fn closed_form_agreement(alphas: &mut Alphas) -> Outcome {
    // Reference values first: formula against a dense scalar simulation.
    let continuum = ScalarInstance::new(2.0, 0.5, PI * PI).unwrap();
    let tau10 = scalar_tau(&continuum, 10.0);
    let alpha01 = scalar_alpha(&continuum, 0.1).unwrap();
    let refs_ok = (rk4_hit(2.0, 0.5, PI * PI, 10.0) - tau10).abs() < 1e-9
        && (rk4_terminal(2.0, PI * PI, alpha01, 0.1) - 0.5).abs() < 1e-9
        && (tau10 - 0.0698).abs() < 1e-4
        && (alpha01 - 3.861).abs() < 1e-3;

    let s = solver(linear_global());
    let inst = ScalarInstance::from_problem(s.problem()).unwrap();
    let mut worst = 0.0_f64;
    for m in [1.0, 10.0, 100.0] {
        let tau = s.minimal_time(m).unwrap().value;
        worst = worst.max((tau - scalar_tau(&inst, m)).abs() / scalar_tau(&inst, m));
    }
    for t in [0.03, 0.07, 0.1] {
        let point = s.minimal_norm(t).unwrap();
        let exact = scalar_alpha(&inst, t).unwrap();
        worst = worst.max((point.value - exact).abs() / exact);
        alphas.push((s.problem().grid().clone(), point));
    }
    outcome(
        refs_ok && worst <= 0.02,
        format!("tau(10) = {tau10:.5}, alpha(0.1) = {alpha01:.5} confirmed by RK4; max relative gap {worst:.2e} (<= 2e-2)"),
    )
}

fn equivalence() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, p) in [("linear", linear_global()), ("tanh", tanh_partial())] {
        let s = solver(p);
        let gam = s.gamma();
        let mut worst_t = 0.0_f64;
        for frac in [0.2, 0.4, 0.6, 0.8] {
            worst_t = worst_t.max(
                s.verify_equivalence_t(frac * gam)
                    .unwrap()
                    .relative_residual,
            );
        }
        let mut worst_m = 0.0_f64;
        for m in [1.0, 3.0, 10.0, 30.0] {
            worst_m = worst_m.max(s.verify_equivalence_m(m).unwrap().relative_residual);
        }
        pass &= worst_t <= 0.05 && worst_m <= 0.05;
        detail.push(format!("{name}: T {worst_t:.2e}, M {worst_m:.2e}"));
    }
    outcome(pass, format!("{} (<= 5e-2)", detail.join("; ")))
}

fn monotonicity_and_limits() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, p) in [("linear", linear_global()), ("tanh", tanh_global())] {
        let s = solver(p);
        let curve = s.tau_curve(&[0.0, 0.5, 1.0, 5.0, 10.0, 50.0]).unwrap();
        let decreasing = curve.strictly_decreasing();
        let small = (s.minimal_time(0.01).unwrap().value - s.gamma()).abs() / s.gamma();
        let large = s.minimal_time(1000.0).unwrap().value / s.gamma();
        pass &= decreasing && small <= 0.02 && large <= 0.02;
        detail.push(format!(
            "{name}: strictly decreasing {decreasing}, |tau(0.01)-gamma|/gamma {small:.2e}, tau(1000)/gamma {large:.2e}"
        ));
    }
    outcome(pass, detail.join("; "))
}

fn bang_bang(alphas: &mut Alphas) -> Outcome {
    for p in [linear_global(), tanh_partial()] {
        let s = solver(p);
        let ts: Vec<f64> = [0.2, 0.4, 0.6, 0.8].iter().map(|f| f * s.gamma()).collect();
        let g = s.problem().grid().clone();
        alphas.extend(
            s.alpha_curve(&ts)
                .unwrap()
                .points
                .into_iter()
                .map(|pt| (g.clone(), pt)),
        );
    }
    let mut worst = 1.0_f64;
    let mut checked = 0;
    for (g, point) in alphas.iter() {
        let converged = point.diagnostics.width() <= point.diagnostics.tolerance;
        if !converged || point.value <= 0.0 {
            continue;
        }
        let frac = bangbang_report(&point.control, point.value, 0.05, g).unwrap();
        worst = worst.min(frac);
        checked += 1;
    }
    outcome(
        checked == alphas.len() && worst >= 0.95,
        format!(
            "{checked} minimal-norm controls, smallest saturated fraction {worst:.3} (>= 0.95)"
        ),
    )
}

fn galerkin_brackets() -> Outcome {
    let grid = |hi: f64| -> Vec<f64> { (0..11).map(|i| -hi + 0.2 * hi * i as f64).collect() };
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, p, horizon, amp) in [
        ("linear", linear_global(), 0.1, 5.0),
        ("tanh", tanh_partial(), 0.06, 20.0),
    ] {
        let search = GalerkinSearch {
            k_modes: 2,
            m_intervals: 2,
            amp_grid: grid(amp),
        };
        let bracket =
            galerkin_bruteforce_alpha(&p, horizon, &search, Execution::default()).unwrap();
        let alpha = solver(p).minimal_norm(horizon).unwrap().value;
        let ok = bracket.contains(alpha);
        pass &= ok;
        detail.push(format!(
            "{name} T={horizon}: [{:?}, {:?}] contains {alpha:.4}: {ok}",
            bracket.lower, bracket.upper
        ));
    }
    // The closed form must also fall in the one-mode linear bracket.
    let p = linear_global();
    let one_mode = GalerkinSearch {
        k_modes: 1,
        m_intervals: 1,
        amp_grid: (0..21).map(|i| -5.0 + 0.5 * i as f64).collect(),
    };
    let bracket = galerkin_bruteforce_alpha(&p, 0.1, &one_mode, Execution::default()).unwrap();
    let exact = scalar_alpha(&ScalarInstance::from_problem(&p).unwrap(), 0.1).unwrap();
    pass &= bracket.contains(exact);
    detail.push(format!(
        "one-mode linear bracket contains closed form {exact:.4}: {}",
        bracket.contains(exact)
    ));
    outcome(pass, detail.join("; "))
}

fn gronwall_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let horizon = 0.1;
    let m = 5.0;
    let mut worst = 0.0_f64;
    for p in [
        tanh_partial(),
        instance(None, NonlinearitySpec::bounded_odd_rational(2.0).unwrap()),
    ] {
        let g = p.grid();
        let lip = p.nonlinearity().lipschitz;
        for _ in 0..5 {
            let u = random_control(&mut rng, g, p.dt(horizon), STEPS, m);
            let full = p.simulate(&u).unwrap();
            for theta in [0.5, 0.9] {
                let scaled = p.simulate(&u.scaled(theta)).unwrap();
                let report = scaling_gap_check(&full, &scaled, theta, m, lip, g).unwrap();
                worst = worst.max(report.sup_gap / report.bound);
            }
        }
    }
    outcome(
        worst <= 1.0,
        format!("max gap/bound {worst:.3} (<= 1) over 2 nonlinearities x 5 controls x 2 theta"),
    )
}

fn main() {
    // `cargo test` passes harness flags; listing mode expects no tests.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut alphas = Vec::new();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("decay bound", Box::new(|_| decay_bound())),
        ("adjoint gradient", Box::new(|_| gradient_check())),
        ("closed-form oracle", Box::new(closed_form_agreement)),
        ("equivalence identities", Box::new(|_| equivalence())),
        (
            "monotonicity and limits",
            Box::new(|_| monotonicity_and_limits()),
        ),
        ("bang-bang", Box::new(bang_bang)),
        ("Galerkin brackets", Box::new(|_| galerkin_brackets())),
        ("Gronwall scaling", Box::new(|_| gronwall_scaling())),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = run(&mut alphas);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!(
            "[{tag}] criterion {} {name}: {} ({:.1} s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
