use std::f64::consts::PI;
use std::sync::Arc;

use ksstrip_core::energy::{sobolev_norm, LedgerSample};
use ksstrip_core::grid::{ddy, integrate, laplacian, remove_mean_in_y};
use ksstrip_core::transforms::{
    assemble_cole_hopf, assemble_physical, cole_hopf_forward, cole_hopf_inverse,
    make_initial_perturbation, wave_cole_hopf,
};
use ksstrip_core::waves::{left_tail_rate, wave_speed};
use ksstrip_core::*;
use proptest::prelude::*;

fn grid(n_z: usize, lambda: f64) -> Arc<Grid> {
    make_grid(10.0, n_z, lambda, 16, 1.0).unwrap()
}

/// Band-limited field from a list of `(mode, amplitude, centre, width)`.
fn field(g: &Arc<Grid>, terms: &[(usize, f64, f64, f64)]) -> ScalarField {
    let k1 = g.k1();
    ScalarField::from_fn(g, |z, y| {
        terms
            .iter()
            .map(|&(m, a, zc, w)| a * (-(z - zc).powi(2) / w).exp() * (m as f64 * k1 * y + zc).cos())
            .sum()
    })
}

fn term() -> impl Strategy<Value = (usize, f64, f64, f64)> {
    (0usize..8, -1.0f64..1.0, -4.0f64..4.0, 0.5f64..4.0)
}

fn l2(f: &ScalarField) -> f64 {
    integrate(&f.map(|v| v * v)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn poincare_holds_for_mean_free_fields(
        terms in prop::collection::vec(term(), 1..6),
        lambda in 0.25f64..2.0,
    ) {
        let g = grid(64, lambda);
        let raw = field(&g, &terms);
        let f = remove_mean_in_y(&raw);
        let lhs = l2(&f);
        let rhs = lambda / (2.0 * PI) * l2(&ddy(&f));
        // a purely planar field leaves only rounding noise after the mean
        // is removed
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-13 * l2(&raw));
    }

    #[test]
    fn ddy_ignores_the_mean(terms in prop::collection::vec(term(), 1..6)) {
        let g = grid(32, 0.5);
        let f = field(&g, &terms);
        let d = &ddy(&remove_mean_in_y(&f)) - &ddy(&f);
        prop_assert!(d.max_abs() <= 1e-12 * (1.0 + ddy(&f).max_abs()));
    }

    #[test]
    fn sobolev_norms_grow_with_order_and_scale_quadratically(
        terms in prop::collection::vec(term(), 1..5),
        a in 0.1f64..10.0,
        weighted in any::<bool>(),
    ) {
        let g = grid(64, 0.5);
        let f = field(&g, &terms);
        let mut prev = 0.0;
        for k in 0..=3 {
            let n = sobolev_norm(&f, k, weighted).unwrap();
            prop_assert!(n >= prev);
            prev = n;
        }
        let scaled = sobolev_norm(&f.map(|v| a * v), 2, weighted).unwrap();
        let base = sobolev_norm(&f, 2, weighted).unwrap();
        prop_assert!((scaled - a * a * base).abs() <= 1e-12 * scaled.max(1e-300));
    }

    #[test]
    fn speed_and_left_rate_relations(n_minus in 0.01f64..50.0, eps in 0.0f64..5.0) {
        let s = wave_speed(n_minus, eps).unwrap();
        prop_assert!((s * s * (1.0 + eps) - n_minus).abs() <= 1e-13 * n_minus);
        let mu = left_tail_rate(s, eps);
        // root of the linearization at the left state
        let r = eps * mu * mu + s * (1.0 + 2.0 * eps) * mu - (1.0 + eps) * s * s;
        prop_assert!(r.abs() <= 1e-12 * (1.0 + eps) * s * s);
        prop_assert!(mu > 0.0 && mu <= s * (1.0 + 1e-15));
    }

    #[test]
    fn cole_hopf_forward_ignores_scaling(
        terms in prop::collection::vec(term(), 1..4),
        a in 0.01f64..100.0,
    ) {
        let g = grid(64, 0.5);
        let c = field(&g, &terms).map(|v| 2.0 + 0.5 * v.tanh());
        let q1 = cole_hopf_forward(&PhysicalState { n: ScalarField::zeros(&g), c: c.clone(), t: 0.0 }).unwrap().q;
        let q2 = cole_hopf_forward(&PhysicalState { n: ScalarField::zeros(&g), c: c.map(|v| a * v), t: 0.0 }).unwrap().q;
        prop_assert!((&q1.z - &q2.z).max_abs() <= 1e-12 * (1.0 + q1.z.max_abs()));
        prop_assert!((&q1.y - &q2.y).max_abs() <= 1e-12 * (1.0 + q1.y.max_abs()));
    }

    #[test]
    fn round_trip_of_separable_states(
        // exp(b sin) must stay resolved by 16 points in y
        b in 0.01f64..0.15,
        mode in 1usize..3,
        width in 2.0f64..6.0,
    ) {
        let g = grid(512, 0.5);
        let k1 = g.k1();
        let c = ScalarField::from_fn(&g, |z, y| {
            (2.0 + (z / width).tanh()) * (b * (mode as f64 * k1 * y).sin()).exp()
        });
        let q = cole_hopf_forward(&PhysicalState { n: ScalarField::zeros(&g), c: c.clone(), t: 0.0 }).unwrap().q;
        let back = cole_hopf_inverse(&q, 2.0, 0.0).unwrap();
        prop_assert!((&back - &c).max_abs() / c.max_abs() < 1e-3);
    }

    #[test]
    fn linear_step_is_linear(seed_a in 0u64..1000, seed_b in 0u64..1000, alpha in -3.0f64..3.0) {
        let w = linear_wave();
        let a = make_initial_perturbation(&w.grid, 1e-3, seed_a, true).unwrap().with_eps(0.05);
        let b = make_initial_perturbation(&w.grid, 1e-3, seed_b, true).unwrap().with_eps(0.05);
        let step = |s: &PerturbationState| evolve::step_linear_eps(s, &w, 0.01).unwrap();
        let lhs = step(&a.combine(alpha, &b, 1.0).unwrap());
        let rhs = step(&a).combine(alpha, &step(&b), 1.0).unwrap();
        let d = lhs.combine(1.0, &rhs, -1.0).unwrap().max_abs();
        prop_assert!(d <= 1e-14 * (1.0 + lhs.max_abs()));
    }
}

fn linear_wave() -> WaveProfile {
    let p = WaveParams::new(0.05, 1.0, 1.0).unwrap();
    let g = make_grid(25.0 / p.s(), 128, 0.5, 8, p.s()).unwrap();
    build_wave(&p, &g, 1e-10).unwrap()
}

fn eps0_wave(n_z: usize, lambda: f64) -> WaveProfile {
    let p = WaveParams::new(0.0, 1.0, 1.0).unwrap();
    build_wave(&p, &make_grid(25.0, n_z, lambda, 16, 1.0).unwrap(), 1e-10).unwrap()
}

#[test]
fn laplacian_converges_at_second_order() {
    let lambda = 0.5;
    let err = |n_z: usize| {
        let g = make_grid(6.0, n_z, lambda, 16, 1.0).unwrap();
        let k = 2.0 * PI / lambda;
        let f = ScalarField::from_fn(&g, |z, y| (-z * z).exp() * (k * y).cos());
        let exact = ScalarField::from_fn(&g, |z, y| {
            ((4.0 * z * z - 2.0) - k * k) * (-z * z).exp() * (k * y).cos()
        });
        // interior only: the end rows of the second difference are one-sided
        let d = &laplacian(&f) - &exact;
        (2..n_z - 2)
            .flat_map(|i| d.row(i).iter().copied())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let e: Vec<f64> = [201, 401, 801].iter().map(|&n| err(n)).collect();
    for p in e.windows(2) {
        let slope = (p[0] / p[1]).log2();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}, errors {e:?}");
    }
}

#[test]
fn zero_perturbation_assembles_to_the_wave() {
    let w = eps0_wave(256, 0.5);
    let zero = PerturbationState::zeros(&w.grid, 0.0);
    let phys = assemble_physical(&zero, &w).unwrap();
    let ch = assemble_cole_hopf(&zero, &w).unwrap();
    let wave = wave_cole_hopf(&w).unwrap();
    for i in 0..w.grid.n_z() {
        for j in 0..w.grid.n_y() {
            assert_eq!(phys.n.at(i, j), w.n[i]);
            assert_eq!(phys.c.at(i, j), w.c[i]);
        }
    }
    assert_eq!((&ch.n - &wave.n).max_abs(), 0.0);
    assert_eq!((&ch.q.z - &wave.q.z).max_abs(), 0.0);
}

#[test]
fn nonlinear_mass_is_conserved_per_step() {
    let w = eps0_wave(512, 0.5);
    let mut st = make_initial_perturbation(&w.grid, 1e-2, 9, false).unwrap();
    let mass = |s: &PerturbationState| integrate(&ksstrip_core::grid::divergence(&s.phi));
    let m0 = mass(&st);
    for _ in 0..50 {
        let next = evolve::step_nonlinear_eps0(&st, &w, 0.01).unwrap();
        assert!((mass(&next) - mass(&st)).abs() < 1e-10);
        st = next;
    }
    assert!((mass(&st) - m0).abs() < 1e-10);
}

#[test]
fn small_data_energy_does_not_grow() {
    let w = eps0_wave(512, 0.5);
    let init = make_initial_perturbation(&w.grid, 1e-4, 13, false).unwrap();
    let cfg = IntegratorConfig {
        dt: 0.01,
        t_end: 4.0,
        record_every: 5,
        ..IntegratorConfig::default()
    };
    let rec = run(System::Nonlinear0, init, &w, &cfg).unwrap();
    let m: Vec<f64> = rec.ledger.rows.iter().map(|r| r.m_inst).collect();
    for p in m.windows(2) {
        assert!(p[1] <= 1.05 * p[0], "{} -> {}", p[0], p[1]);
    }
}

#[test]
fn dissipation_quadrature_is_converged_when_the_decay_is_resolved() {
    // lambda = 4 keeps the transverse decay rates below 1/dt
    let w = eps0_wave(256, 4.0);
    let init = make_initial_perturbation(&w.grid, 1e-4, 7, false).unwrap();
    let d = |every: usize| {
        let cfg = IntegratorConfig {
            dt: 0.001,
            t_end: 2.0,
            record_every: every,
            ..IntegratorConfig::default()
        };
        let rec = run(System::Nonlinear0, init.clone(), &w, &cfg).unwrap();
        let last = rec.ledger.last().unwrap();
        (last.d_phi, last.d_psi)
    };
    let (a, b) = (d(1), d(2));
    assert!((a.0 - b.0).abs() < 0.01 * a.0, "{a:?} {b:?}");
    assert!((a.1 - b.1).abs() < 0.01 * a.1, "{a:?} {b:?}");
}

#[test]
fn ledger_running_sup_is_the_max() {
    let mut ledger = EnergyLedger::new(0.0);
    let values = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
    for (k, v) in values.iter().enumerate() {
        ledger.push(LedgerSample {
            t: k as f64,
            h3w_phi: *v,
            ..LedgerSample::default()
        });
    }
    for (k, row) in ledger.rows.iter().enumerate() {
        let brute = values[..=k].iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(row.m_sup, brute);
    }
}
