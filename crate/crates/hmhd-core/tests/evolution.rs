//! Time-integration behavior: exact linear decay, energy budgets across
//! schemes and systems, adaptivity, and snapshot-resume equivalence.

use hmhd_core::evolve::{
    DtMode, ModelSpec, Scheme, SimState, Stepper, StepperConfig, System,
};
use hmhd_core::fields::{random_divfree, FieldKind, VectorField};
use hmhd_core::snapshot;
use hmhd_core::spectral::{Grid, SpectralScalar};
use num_complex::Complex64;

fn run_to(
    spec: ModelSpec,
    mut cfg: StepperConfig,
    state: &mut SimState,
    scheme: Scheme,
    dt: f64,
) {
    cfg.scheme = scheme;
    cfg.dt = DtMode::Fixed(dt);
    let mut stepper = Stepper::new(spec, cfg, state.b.grid()).unwrap();
    stepper.run(state, |_| Ok(())).unwrap();
}

#[test]
fn anisotropic_exponents_act_per_component() {
    // with the Hall coefficient off the system is pure anisotropic
    // diffusion; every component decays at its own closed-form rate
    let grid = Grid::new_square(2, 32, 8).unwrap();
    let c1 = SpectralScalar::from_modes(&grid, &[(vec![0, 2], Complex64::new(0.20, 0.0))]).unwrap();
    let c2 = SpectralScalar::from_modes(&grid, &[(vec![1, 0], Complex64::new(0.15, 0.0))]).unwrap();
    let c3 = SpectralScalar::from_modes(&grid, &[(vec![3, 0], Complex64::new(0.10, 0.0))]).unwrap();
    let b = VectorField::new(FieldKind::Magnetic, [c1, c2, c3]);
    assert!(b.is_div_free());

    let mut spec = ModelSpec::new(System::ElectronAniso);
    spec.eps = 0.0;
    spec.alpha = 0.6;
    let t = 0.25;
    let mut state = SimState::new(b, None);
    run_to(spec, StepperConfig::new(t), &mut state, Scheme::IfRk4, 1e-3);

    // horizontal components carry exponent 3, the vertical one 2 alpha
    let expect = [
        0.20 * (-(4.0f64).powf(1.5) * t).exp(),
        0.15 * (-(1.0f64) * t).exp(),
        0.10 * (-(9.0f64).powf(0.6) * t).exp(),
    ];
    let got = [
        state.b.comp(1).coeff(&[0, 2]).re,
        state.b.comp(2).coeff(&[1, 0]).re,
        state.b.comp(3).coeff(&[3, 0]).re,
    ];
    for (g, e) in got.iter().zip(expect.iter()) {
        assert!((g - e).abs() <= 1e-12 * e.abs(), "got {g:.15e} want {e:.15e}");
    }
}

#[test]
fn uniform_exponent_model_reduces_to_fractional_diffusion() {
    let grid = Grid::new_square(2, 32, 8).unwrap();
    let c3 = SpectralScalar::from_modes(&grid, &[(vec![2, 1], Complex64::new(0.3, -0.1))]).unwrap();
    let zero = SpectralScalar::zero(&grid);
    let b = VectorField::new(FieldKind::Magnetic, [zero.clone(), zero, c3]);
    let mut spec = ModelSpec::new(System::ElectronGeneral);
    spec.beta = 1.25;
    spec.eps = 0.0;
    let t = 0.125;
    let mut state = SimState::new(b, None);
    run_to(spec, StepperConfig::new(t), &mut state, Scheme::IfRk2, 5e-4);
    let rate = (5.0f64).powf(1.25);
    let want = Complex64::new(0.3, -0.1) * (-rate * t).exp();
    let got = state.b.comp(3).coeff(&[2, 1]);
    assert!((got - want).norm() <= 1e-12 * want.norm());
}

#[test]
fn dissipation_coefficient_scales_the_decay() {
    let grid = Grid::new_square(2, 16, 4).unwrap();
    let c3 = SpectralScalar::from_modes(&grid, &[(vec![1, 0], Complex64::new(0.5, 0.0))]).unwrap();
    let zero = SpectralScalar::zero(&grid);
    let b = VectorField::new(FieldKind::Magnetic, [zero.clone(), zero, c3]);
    let mut spec = ModelSpec::new(System::ElectronAniso);
    spec.eps = 0.0;
    spec.eta = 2.5;
    let t = 0.2;
    let mut state = SimState::new(b, None);
    run_to(spec, StepperConfig::new(t), &mut state, Scheme::IfRk4, 1e-3);
    let want = 0.5 * (-2.5 * (1.0f64).powf(0.6) * t).exp();
    let got = state.b.comp(3).coeff(&[1, 0]).re;
    assert!((got - want).abs() <= 1e-12 * want);
}

#[test]
fn energy_budget_closes_for_all_systems() {
    let grid = Grid::new_square(2, 48, 12).unwrap();
    let l2 = |f: &VectorField| f.l2_norm();
    for (i, system) in [
        System::ElectronAniso,
        System::ElectronGeneral,
        System::HallmhdMixed,
        System::HallmhdClassical,
    ]
    .into_iter()
    .enumerate()
    {
        let seed = 40 + i as u64;
        let mut b = random_divfree(&grid, seed, 8, 1.5).unwrap();
        b = b.scaled(0.25 / l2(&b));
        let u = if system.has_velocity() {
            let mut u = random_divfree(&grid, seed + 100, 8, 1.5).unwrap();
            u = u.scaled(0.25 / l2(&u));
            Some(u)
        } else {
            None
        };
        let spec = ModelSpec::new(system);
        let mut state = SimState::new(b, u);
        run_to(
            spec,
            StepperConfig::new(0.1),
            &mut state,
            Scheme::IfRk4,
            1e-3,
        );
        let defect = state.energy_defect();
        assert!(
            defect <= 1e-8,
            "{}: defect {defect:.3e}",
            spec.system.name()
        );
        assert!(state.b.div_residual_rel() <= 1e-11);
        if let Some(u) = &state.u {
            assert!(u.div_residual_rel() <= 1e-11);
        }
    }
}

#[test]
fn second_order_scheme_budget_is_coarser_but_closes() {
    let grid = Grid::new_square(2, 32, 8).unwrap();
    let mut b = random_divfree(&grid, 50, 6, 1.5).unwrap();
    b = b.scaled(0.25 / b.l2_norm());
    let spec = ModelSpec::new(System::ElectronAniso);
    let mut state = SimState::new(b, None);
    run_to(
        spec,
        StepperConfig::new(0.1),
        &mut state,
        Scheme::IfRk2,
        1e-3,
    );
    let defect = state.energy_defect();
    assert!(defect <= 1e-5, "defect {defect:.3e}");
}

#[test]
fn adaptive_steps_hit_the_final_time_exactly() {
    let grid = Grid::new_square(2, 32, 8).unwrap();
    let mut b = random_divfree(&grid, 51, 6, 1.5).unwrap();
    b = b.scaled(0.5 / b.l2_norm());
    let spec = ModelSpec::new(System::ElectronAniso);
    let mut cfg = StepperConfig::new(0.05);
    cfg.dt = DtMode::Adaptive;
    cfg.cfl = 0.3;
    let mut state = SimState::new(b, None);
    let mut stepper = Stepper::new(spec, cfg, state.b.grid()).unwrap();
    let mut samples = 0usize;
    stepper
        .run(&mut state, |_| {
            samples += 1;
            Ok(())
        })
        .unwrap();
    assert!((state.t - 0.05).abs() <= 1e-12);
    assert!(samples >= 2);
    assert!(state.energy_defect() <= 1e-6);
}

#[test]
fn snapshot_resume_reproduces_the_uninterrupted_run() {
    let grid = Grid::new_square(2, 32, 8).unwrap();
    let mut b = random_divfree(&grid, 52, 6, 1.5).unwrap();
    b = b.scaled(0.5 / b.l2_norm());
    let u = random_divfree(&grid, 53, 6, 1.5).unwrap();
    let u = u.scaled(0.5 / u.l2_norm());
    let spec = ModelSpec::new(System::HallmhdMixed);

    let mut straight = SimState::new(b.clone(), Some(u.clone()));
    run_to(
        spec,
        StepperConfig::new(0.08),
        &mut straight,
        Scheme::IfRk4,
        2e-3,
    );

    let mut first = SimState::new(b, Some(u));
    run_to(
        spec,
        StepperConfig::new(0.04),
        &mut first,
        Scheme::IfRk4,
        2e-3,
    );
    let mut bytes = Vec::new();
    snapshot::write_snapshot(&mut bytes, &spec, &first).unwrap();
    let (spec2, mut resumed) = snapshot::read_snapshot(bytes.as_slice()).unwrap();
    run_to(
        spec2,
        StepperConfig::new(0.08),
        &mut resumed,
        Scheme::IfRk4,
        2e-3,
    );

    assert_eq!(straight.step_count, resumed.step_count);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for c in 1..=3 {
        for (x, y) in straight
            .b
            .comp(c)
            .coeffs()
            .iter()
            .zip(resumed.b.comp(c).coeffs().iter())
        {
            worst = worst.max((x - y).norm());
            scale = scale.max(x.norm());
        }
    }
    assert!(
        worst <= 1e-12 * scale.max(1e-300),
        "resume drift {worst:.3e} against scale {scale:.3e}"
    );
    let d = (straight.energy_defect() - resumed.energy_defect()).abs();
    assert!(d <= 1e-10, "defect bookkeeping drift {d:.3e}");
}

#[test]
fn blowup_reports_time_and_preserves_error_shape() {
    let grid = Grid::new_square(2, 16, 4).unwrap();
    let b = random_divfree(&grid, 54, 3, 1.5).unwrap();
    let spec = ModelSpec::new(System::ElectronAniso);
    let mut cfg = StepperConfig::new(1.0);
    cfg.dt = DtMode::Fixed(1e-3);
    cfg.h3_ceiling = 1e-9;
    let mut state = SimState::new(b, None);
    let mut stepper = Stepper::new(spec, cfg, state.b.grid()).unwrap();
    let err = stepper.run(&mut state, |_| Ok(())).unwrap_err();
    match err {
        hmhd_core::HmhdError::Blowup { t, what } => {
            assert!(t > 0.0);
            assert!(what.contains("ceiling"));
        }
        other => panic!("expected a blow-up report, got {other}"),
    }
}
