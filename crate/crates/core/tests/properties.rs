use junction_core::functional::{cost, cost_weighted_density, BoxWeight, CostPlan, CostSpec, SampledWeight, Weight};
use junction_core::lattice::brute_force_value;
use junction_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A0: f64 = -0.25;

fn unit() -> JunctionModel {
    JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap()
}

fn linear() -> InitialData {
    InitialData::linear(-0.8).unwrap()
}

fn canonical_box() -> BoxWeight {
    BoxWeight::new(0.1, 0.18, 1.0, 1.5, 4.5, 5.0, 0.01).unwrap()
}

fn random_control(rng: &mut ChaCha8Rng, horizon: f64) -> Control {
    let cells = rng.gen_range(1..6);
    let mut times: Vec<f64> = (0..cells - 1).map(|_| rng.gen_range(0.05..0.95) * horizon).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.insert(0, 0.0);
    times.push(horizon);
    let values = (0..times.len() - 1).map(|_| rng.gen_range(A0..=0.0)).collect();
    Control::new(times, values).unwrap()
}

/// `max(A, B)` on the union of both partitions.
fn pointwise_max(a: &Control, b: &Control) -> Control {
    let mut times: Vec<f64> = a.times().iter().chain(b.times()).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let values = times.windows(2).map(|w| {
        let m = 0.5 * (w[0] + w[1]);
        a.value_at(m).max(b.value_at(m))
    });
    Control::new(times.clone(), values.collect()).unwrap()
}

#[test]
fn box_cost_matches_closed_form_up_to_trapezoid_error() {
    // u = px - H(p)t and phi = psi1 psi2' integrate to
    // H(p) int psi1 int psi2 = H(p) (x2 - x1 - delta)((t3 - t2) + (t2 - t1)/2 + (t4 - t3)/2).
    let b = canonical_box();
    let hp = -0.16;
    let m1 = b.x2 - b.x1 - b.delta;
    let m2 = (b.t3 - b.t2) + 0.5 * (b.t2 - b.t1) + 0.5 * (b.t4 - b.t3);
    let exact = hp * m1 * m2;
    assert!((exact + 0.0392).abs() < 1e-15);
    // psi2'' jumps by +-6/w^2 at t1..t4; the t-integrand -H t psi2' picks up
    // the Euler-Maclaurin term -h^2/12 sum [g'] per unit of int psi1.
    let jump = |w: f64| 6.0 / (w * w);
    let jumps = -hp * (jump(b.t2 - b.t1) * (b.t1 + b.t2) - jump(b.t4 - b.t3) * (b.t3 + b.t4));
    let spec = CostSpec::flux_box(b);
    let control = Control::constant(6.0, A0).unwrap();
    let mut errors = Vec::new();
    for n in [400, 800] {
        let mesh = Mesh::with_time_range(0.09, 0.19, n, 0.5, 5.5, n).unwrap();
        let q = cost(&unit(), &linear(), &spec, &control, &mesh, &Sequential).unwrap().total;
        let h = mesh.dt();
        let predicted = -h * h / 12.0 * jumps * m1;
        assert!((q - exact - predicted).abs() < 1e-6, "n = {n}: {q} vs {exact} + {predicted}");
        errors.push(q - exact);
    }
    assert!(errors[0].abs() < 3e-5, "{errors:?}");
    assert!((errors[1] / errors[0] - 0.25).abs() < 0.01, "{errors:?}");
}

fn ramp(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

fn ramp_slope(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        6.0 * s * (1.0 - s)
    }
}

#[test]
fn density_weight_matches_its_derivative_weight() {
    let (m, u0) = (unit(), linear());
    let control = Control::new(vec![0.0, 1.5, 6.0], vec![0.0, A0]).unwrap();
    let mesh = Mesh::new(0.05, 0.35, 120, 6.0, 240).unwrap();
    // Psi rises on [0.1, 0.15], falls on [0.25, 0.3]; Theta rises on [1, 2].
    let psi = |x: f64| ramp((x - 0.1) / 0.05).min(ramp((0.3 - x) / 0.05));
    let dpsi = |x: f64| {
        if x < 0.2 {
            ramp_slope((x - 0.1) / 0.05) / 0.05
        } else {
            -ramp_slope((0.3 - x) / 0.05) / 0.05
        }
    };
    let theta = |t: f64| ramp(t - 1.0).min(ramp(5.0 - t));
    let xi = SampledWeight::from_fn(mesh.clone(), |x, t| psi(x) * theta(t)).unwrap();
    let phi = SampledWeight::from_fn(mesh.clone(), |x, t| -dpsi(x) * theta(t)).unwrap();
    let a = cost_weighted_density(&m, &u0, &xi, &control, &mesh, &Sequential).unwrap().total;
    let b =
        cost(&m, &u0, &CostSpec::new(Weight::Sampled(phi), 0.0).unwrap(), &control, &mesh, &Sequential).unwrap().total;
    // Centered differences of xi are second order in dx.
    let fine = Mesh::new(0.05, 0.35, 240, 6.0, 240).unwrap();
    let xi_fine = SampledWeight::from_fn(fine.clone(), |x, t| psi(x) * theta(t)).unwrap();
    let phi_fine = SampledWeight::from_fn(fine.clone(), |x, t| -dpsi(x) * theta(t)).unwrap();
    let af = cost_weighted_density(&m, &u0, &xi_fine, &control, &fine, &Sequential).unwrap().total;
    let bf = cost(&m, &u0, &CostSpec::new(Weight::Sampled(phi_fine), 0.0).unwrap(), &control, &fine, &Sequential)
        .unwrap()
        .total;
    assert!((a - b).abs() < 5e-3 * b.abs(), "{a} {b}");
    assert!((af - bf).abs() < 0.3 * (a - b).abs(), "{af} {bf}");

    // Where xi is flat in x only the ramps carry weight.
    let plan = CostPlan::new(&CostSpec::new(Weight::Density(xi), 0.0).unwrap(), &mesh).unwrap();
    assert!(!plan.nodes().is_empty());
    let h = mesh.dx();
    let in_ramps = |x: f64| (x > 0.1 - 1.5 * h && x < 0.15 + 1.5 * h) || (x > 0.25 - 1.5 * h && x < 0.3 + 1.5 * h);
    let interior: f64 = plan.nodes().iter().filter(|n| !in_ramps(n.x)).map(|n| n.weight.abs()).sum();
    let ramps: f64 = plan.nodes().iter().filter(|n| in_ramps(n.x)).map(|n| n.weight.abs()).sum();
    assert!(interior < 1e-12 * ramps, "{interior} {ramps}");

    let zero = SampledWeight::from_fn(mesh.clone(), |_, _| 0.0).unwrap();
    assert_eq!(cost_weighted_density(&m, &u0, &zero, &control, &mesh, &Sequential).unwrap().total, 0.0);
}

#[test]
fn quadrature_refinement_contracts() {
    let (m, u0) = (unit(), linear());
    let b = canonical_box();
    let spec = CostSpec::flux_box(b);
    let control = Control::new(vec![0.0, 1.5, 6.0], vec![0.0, A0]).unwrap();
    // The queue keeps u = 0 on the whole positive slab and is gone before
    // t3 - x2, so only the negative slab contributes, with u = px - H(p)t:
    // m1 (-H(p)) int_{t3}^{t4} t psi2' - p int x psi1.
    let m1 = b.x2 - b.x1 - b.delta;
    let exact = m1 * 0.16 * -(b.t3 + 0.5 * (b.t4 - b.t3)) + 0.8 * m1 * 0.5 * (b.x1 + b.x2);
    let j: Vec<f64> = [(10, 120), (20, 240), (40, 480)]
        .iter()
        .map(|&(nx, nt)| {
            let mesh = Mesh::new(0.09, 0.19, nx, 6.0, nt).unwrap();
            cost(&m, &u0, &spec, &control, &mesh, &Sequential).unwrap().total
        })
        .collect();
    let (d1, d2) = ((j[1] - j[0]).abs(), (j[2] - j[1]).abs());
    assert!(d2 < d1, "{j:?}");
    let errs: Vec<f64> = j.iter().map(|v| (v - exact).abs()).collect();
    assert!(errs[2] < errs[1] && errs[1] < errs[0] && errs[2] < 5e-5, "{errs:?} vs {exact}");
}

#[test]
fn nonnegative_weight_prefers_blocking() {
    let (m, u0) = (unit(), linear());
    let b = canonical_box();
    let mesh = Mesh::new(0.09, 0.19, 20, 6.0, 120).unwrap();
    let w = SampledWeight::from_fn(mesh.clone(), |x, t| b.psi1(x) * b.psi2(t)).unwrap();
    let spec = CostSpec::new(Weight::Sampled(w), 0.0).unwrap();
    let j = |a: &Control| cost(&m, &u0, &spec, a, &mesh, &Sequential).unwrap().total;
    let blocked = j(&Control::constant(6.0, 0.0).unwrap());
    assert!(blocked <= j(&Control::constant(6.0, A0).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        assert!(blocked <= j(&random_control(&mut rng, 6.0)) + 1e-12);
    }
}

#[test]
fn light_oracle_agreement() {
    let m = unit();
    let u0 = InitialData::new(vec![-1.0, 0.5], vec![-0.7, -0.3, -0.6]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let control = random_control(&mut rng, 6.0);
    let solver = JunctionSolver::new(&m, &u0, &control).unwrap();
    let n = 120;
    for _ in 0..8 {
        let (x, t) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.2..6.0));
        let v = solver.value(x, t).unwrap().0;
        let w = brute_force_value(&m, &u0, &control, x, t, n, n).unwrap();
        let dx = 2.5 * m.max_speed() * t / (n as f64 - 4.0);
        let bound = 2.0 * (dx + t / n as f64);
        assert!((v - w).abs() <= bound, "({x}, {t}): {v} vs {w}, bound {bound}");
    }
}

#[test]
fn tabulated_quadratic_gives_the_same_values() {
    let samples: Vec<(f64, f64)> = (0..=8)
        .map(|k| {
            let p = -1.0 + k as f64 / 8.0;
            (p, p * (p + 1.0))
        })
        .collect();
    let h = Hamiltonian::tabulated(&samples).unwrap();
    let tab = JunctionModel::new(h.clone(), h);
    let quad = unit();
    let u0 = InitialData::new(vec![-0.5, 0.3], vec![-0.2, -0.9, -0.5]).unwrap();
    let control = Control::new(vec![0.0, 2.0, 6.0], vec![-0.1, A0]).unwrap();
    let mesh = Mesh::new(-2.0, 2.0, 16, 6.0, 12).unwrap();
    let a = JunctionSolver::new(&tab, &u0, &control).unwrap().value_grid(&mesh, &Sequential).unwrap();
    let b = JunctionSolver::new(&quad, &u0, &control).unwrap().value_grid(&mesh, &Sequential).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-9, "{x} {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn ordering_of_controls_orders_values_and_costs(seed in any::<u64>()) {
        let (m, u0) = (unit(), linear());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_control(&mut rng, 6.0);
        let hi = pointwise_max(&a, &random_control(&mut rng, 6.0));
        let mesh = Mesh::new(-2.0, 2.0, 20, 6.0, 24).unwrap();
        let grid = |c: &Control| JunctionSolver::new(&m, &u0, c).unwrap().value_grid(&mesh, &Sequential).unwrap();
        let (ua, uh) = (grid(&a), grid(&hi));
        let u_free = grid(&Control::constant(6.0, A0).unwrap());
        let u_block = grid(&Control::constant(6.0, 0.0).unwrap());
        for k in 0..ua.values.len() {
            prop_assert!(ua.values[k] >= uh.values[k] - 1e-9);
            prop_assert!(u_block.values[k] <= ua.values[k] + 1e-9);
            prop_assert!(ua.values[k] <= u_free.values[k] + 1e-9);
        }
        let b = canonical_box();
        let box_mesh = Mesh::new(0.09, 0.19, 10, 6.0, 60).unwrap();
        let w = SampledWeight::from_fn(box_mesh.clone(), |x, t| b.psi1(x) * b.psi2(t)).unwrap();
        let spec = CostSpec::new(Weight::Sampled(w), 0.0).unwrap();
        let j = |c: &Control| cost(&m, &u0, &spec, c, &box_mesh, &Sequential).unwrap().total;
        prop_assert!(j(&hi) <= j(&a) + 1e-12);
    }

    #[test]
    fn fields_respect_gradient_bounds(seed in any::<u64>()) {
        let m = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bp = rng.gen_range(-1.0..1.0);
        let slopes = vec![rng.gen_range(-0.95..-0.05), rng.gen_range(-0.95..-0.05)];
        let u0 = InitialData::new(vec![bp], slopes).unwrap();
        let a = random_control(&mut rng, 4.0);
        let mesh = Mesh::new(-2.0, 2.0, 40, 4.0, 40).unwrap();
        let f = JunctionSolver::new(&m, &u0, &a).unwrap().value_grid(&mesh, &Sequential).unwrap();
        let audit = f.gradient_audit(&m);
        prop_assert!(audit.passed, "{:?}", audit);
    }

    #[test]
    fn trajectories_are_well_formed(seed in any::<u64>()) {
        let (m, u0) = (unit(), linear());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_control(&mut rng, 6.0);
        let s = JunctionSolver::new(&m, &u0, &a).unwrap();
        for _ in 0..10 {
            let (x, t) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.01..6.0));
            for sel in [Selection::MostAtZero, Selection::LeastAtZero] {
                let d = s.optimal_trajectory(x, t, sel).unwrap();
                prop_assert!(d.is_well_formed(), "{:?}", d);
                prop_assert!((s.path_cost(&d) - d.cost).abs() < 1e-10);
                let v = s.value(x, t).unwrap().0;
                prop_assert!(d.cost <= v + 1e-8 * (1.0 + v.abs()) + 1e-12);
            }
        }
    }
}
