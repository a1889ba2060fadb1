use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::OnceLock;

use kinkgate::crystal::*;
use kinkgate::dynamics::*;
use kinkgate::floquet::{floquet_modes, FloquetOptions};
use kinkgate::mathieu::characteristic_exponent;
use kinkgate::pipeline::KinkPipeline;
use kinkgate::{Error, Geometry, IonSpecies, Ions, TrapModel, TrapParameters, Vec3};
use num_complex::Complex64;
use proptest::prelude::*;

fn kink31() -> &'static KinkPipeline {
    static CELL: OnceLock<KinkPipeline> = OnceLock::new();
    CELL.get_or_init(|| KinkPipeline::reference(31, 1.0).unwrap())
}

fn ring() -> &'static PreparedRing {
    static CELL: OnceLock<PreparedRing> = OnceLock::new();
    CELL.get_or_init(|| RingSetup::default().prepare().unwrap())
}

fn paul(q: f64, a: [f64; 3]) -> TrapParameters {
    TrapParameters { geometry: Geometry::LinearPaul, rf_angular_frequency: TAU * 80.8e6, mathieu_q: q, static_curvature: a }
}

fn single_ion(q: f64, a: [f64; 3]) -> TrapModel {
    TrapModel::new(paul(q, a), Ions::uniform(IonSpecies::calcium40(), 1)).unwrap()
}

fn lone(x: Vec3, v: Vec3) -> MdState {
    MdState { positions: vec![x], velocities: vec![v], time: 0.0 }
}

#[test]
fn static_trap_traces_the_analytic_ellipse() {
    let w = 0.2;
    let m = single_ion(0.0, [0.09, w * w, w * w]);
    let (y0, vz0) = (1.0, 0.5 * w);
    let period = TAU / w;
    let dt = 5e-5;
    let opts = IntegrateOptions {
        dt,
        n_steps: (100.0 * period / dt).round() as usize,
        stride: 20_000,
        field: ForceField::Full,
        ..Default::default()
    };
    let mut s = lone(Vec3::new(0.0, y0, 0.0), Vec3::new(0.0, 0.0, vz0));
    let mut worst: f64 = 0.0;
    integrate_observed(&mut s, &m, None, None, &opts, |f| {
        let t = f.time;
        let exact = Vec3::new(0.0, y0 * (w * t).cos(), vz0 / w * (w * t).sin());
        worst = worst.max((f.positions[0] - exact).norm());
        true
    })
    .unwrap();
    assert!(s.time > 99.9 * period);
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn stroboscopic_motion_gives_the_mathieu_exponent() {
    let q = 0.22;
    let m = single_ion(q, [0.01, 0.0, 0.0]);
    let steps = 200;
    let opts = IntegrateOptions { dt: PI / steps as f64, n_steps: 4000 * steps, stride: steps, ..Default::default() };
    let frames = integrate(&lone(Vec3::new(0.0, 0.3, 0.0), Vec3::zeros()), &m, None, None, &opts).unwrap();
    let y: Vec<f64> = frames.iter().map(|f| f.positions[0].y).collect();
    let beta = dominant_frequency(&y, PI);
    let exact = characteristic_exponent(0.0, q).unwrap();
    assert!((beta / exact - 1.0).abs() < 1e-4, "{beta} vs {exact}");
}

#[test]
fn one_period_map_matches_the_floquet_solution() {
    let m = single_ion(0.22, [0.01, -0.002, 0.003]);
    let eq = CrystalConfiguration { positions: vec![Vec3::zeros()], ions: m.ions.clone(), energy: 0.0, gradient_norm: 0.0 };
    let orbit = find_periodic_orbit(&m, &eq, 3, &OrbitOptions::default()).unwrap();
    let (_, modes) = floquet_modes(&orbit, &FloquetOptions::default()).unwrap();
    let amps = [Complex64::new(0.3, -0.1), Complex64::new(-0.2, 0.25), Complex64::new(0.05, 0.4)];
    let (x0, v0) = mode_superposition(&modes, &amps, 0.0);
    let (x1, v1) = mode_superposition(&modes, &amps, PI);
    let steps = 4000;
    let opts = IntegrateOptions { dt: PI / steps as f64, n_steps: steps, stride: steps, ..Default::default() };
    let frames = integrate(&lone(x0[0], v0[0]), &m, None, None, &opts).unwrap();
    let end = frames.last().unwrap();
    let scale = x1[0].norm().max(v1[0].norm());
    assert!((end.positions[0] - x1[0]).norm() < 1e-6 * scale);
    assert!((end.velocities[0] - v1[0]).norm() < 1e-6 * scale);
}

#[test]
fn secular_dynamics_conserves_energy() {
    let p = kink31();
    let kt = p.units.thermal_energy(doppler_temperature(kinkgate::presets::COOLING_LINEWIDTH_HZ));
    let start = doppler_thermal_sample(&p.config, &p.pseudo, kt, &[], 4).unwrap();
    let opts = IntegrateOptions { n_steps: 10_000, stride: 100, field: ForceField::Secular, ..Default::default() };
    let e0 = total_energy(&start, &p.model, ForceField::Secular).unwrap();
    let mut s = start.clone();
    let mut drift: f64 = 0.0;
    integrate_observed(&mut s, &p.model, None, None, &opts, |f| {
        let e = total_energy(f, &p.model, ForceField::Secular).unwrap();
        drift = drift.max(((e - e0) / e0).abs());
        true
    })
    .unwrap();
    assert!(drift < 1e-8, "{drift:e}");
}

#[test]
fn small_oscillations_follow_the_mode_superposition() {
    let p = kink31();
    let l = &p.pseudo_localized;
    let picks = [l.bus, l.low_inplane, l.low_outofplane, 40];
    let mut amps = vec![Complex64::new(0.0, 0.0); p.pseudo.modes.len()];
    for (k, &j) in picks.iter().enumerate() {
        amps[j] = Complex64::from_polar(1e-6, 0.7 * k as f64);
    }
    let (dx, dv) = mode_superposition(&p.pseudo.modes, &amps, 0.0);
    let mut s = MdState::at_rest(&p.config);
    for (x, d) in s.positions.iter_mut().zip(&dx) {
        *x += d;
    }
    s.velocities.copy_from_slice(&dv);
    let t_end = 10.0 * TAU / p.pseudo.spectrum.frequencies[l.low_inplane];
    let dt = 2e-3;
    let opts = IntegrateOptions { dt, n_steps: (t_end / dt) as usize, stride: 100_000, field: ForceField::Secular, ..Default::default() };
    let mut worst: f64 = 0.0;
    integrate_observed(&mut s, &p.model, None, None, &opts, |f| {
        let (px, _) = mode_superposition(&p.pseudo.modes, &amps, f.time);
        let norm = px.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        let err = f.positions.iter().zip(&p.config.positions).zip(&px).map(|((x, x0), d)| (x - x0 - d).norm_squared()).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
        true
    })
    .unwrap();
    assert!(worst < 1e-4, "{worst:e}");
}

#[test]
fn cooling_without_friction_or_noise_is_conservative() {
    let p = kink31();
    let kt = p.units.thermal_energy(5e-4);
    let start = doppler_thermal_sample(&p.config, &p.pseudo, kt, &[], 9).unwrap();
    let opts = IntegrateOptions { n_steps: 2000, stride: 2000, ..Default::default() };
    let idle = CoolingModel::uniform(1, 0.0, 0.0);
    let a = integrate(&start, &p.model, None, None, &opts).unwrap();
    let b = integrate(&start, &p.model, None, Some(&idle), &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn langevin_cooling_reaches_the_target_temperature() {
    let m = single_ion(0.0, [0.04, 0.05, 0.06]);
    let kt = 2e-3;
    let cooling = CoolingModel::uniform(1, 0.05, kt);
    let opts = IntegrateOptions { dt: 0.05, n_steps: 2_000_000, stride: 10, field: ForceField::Secular, seed: 3, ..Default::default() };
    let mut s = lone(Vec3::new(0.5, 0.0, 0.0), Vec3::zeros());
    let (mut sum, mut count) = (0.0, 0usize);
    integrate_observed(&mut s, &m, None, Some(&cooling), &opts, |f| {
        if f.time > 2000.0 {
            sum += f.kinetic_energy(m.masses());
            count += 1;
        }
        true
    })
    .unwrap();
    let ke = sum / count as f64;
    assert!((ke / (1.5 * kt) - 1.0).abs() < 0.05, "{ke} vs {}", 1.5 * kt);
}

#[test]
fn noisy_runs_are_reproducible() {
    let p = kink31();
    let cooling = CoolingModel::uniform(1, 0.01, p.units.thermal_energy(5e-4));
    let opts = IntegrateOptions { n_steps: 500, stride: 100, seed: 77, ..Default::default() };
    let start = MdState::at_rest(&p.config);
    let a = integrate(&start, &p.model, None, Some(&cooling), &opts).unwrap();
    let b = integrate(&start, &p.model, None, Some(&cooling), &opts).unwrap();
    assert_eq!(a, b);
    let c = integrate(&start, &p.model, None, Some(&cooling), &IntegrateOptions { seed: 78, ..opts }).unwrap();
    assert_ne!(a.last(), c.last());
}

#[test]
fn runaway_ion_is_reported_as_lost() {
    let m = single_ion(0.0, [1e-4, 1e-4, 1e-4]);
    let opts = IntegrateOptions { dt: 0.1, n_steps: 10_000, stride: 10, escape_distance: Some(50.0), ..Default::default() };
    let err = integrate(&lone(Vec3::zeros(), Vec3::new(5.0, 0.0, 0.0)), &m, None, None, &opts).unwrap_err();
    match err {
        Error::Escape { ion, time, distance } => {
            assert_eq!(ion, 0);
            assert!(distance > 50.0 && time > 9.0 && time < 12.0, "{time} {distance}");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn kink_stays_pinned_at_the_doppler_limit() {
    let p = kink31();
    let kt = p.units.thermal_energy(doppler_temperature(kinkgate::presets::COOLING_LINEWIDTH_HZ));
    let mut s = doppler_thermal_sample(&p.config, &p.pseudo, kt, &[], 21).unwrap();
    let orbit_v = p.orbit.velocities(0.0);
    let orbit_x = p.orbit.positions(0.0);
    for i in 0..31 {
        s.positions[i] += orbit_x[i] - p.config.positions[i];
        s.velocities[i] += orbit_v[i];
    }
    let low_period = TAU / p.spectrum.frequencies[p.localized.low_inplane];
    let rf_periods = (1000.0 * low_period / PI) as usize;
    let opts = IntegrateOptions { n_steps: rf_periods * 100, stride: 100 * 50, ..Default::default() };
    let mut tracker = KinkTracker::new(31, false);
    let start = tracker.update(&p.kink).unwrap();
    let mut frames = 0;
    integrate_observed(&mut s, &p.model, None, None, &opts, |f| {
        let c = CrystalConfiguration { positions: f.positions.clone(), ions: p.model.ions.clone(), energy: 0.0, gradient_norm: 0.0 };
        let d = detect_kink(&c, &p.model.params).unwrap();
        assert_eq!(d.topological_charge, p.kink.topological_charge);
        assert_eq!(tracker.update(&d), Some(start));
        frames += 1;
        true
    })
    .unwrap();
    assert!(frames > 100);
}

#[test]
fn thermal_sample_obeys_equipartition() {
    let p = kink31();
    let kt = p.units.thermal_energy(5e-4);
    let dof = 93.0;
    let mean_ke = (0..1000u64)
        .map(|seed| doppler_thermal_sample(&p.config, &p.pseudo, kt, &[], seed).unwrap().kinetic_energy(p.model.masses()))
        .sum::<f64>()
        / 1000.0;
    assert!((mean_ke / (0.5 * kt * dof) - 1.0).abs() < 0.02, "{}", mean_ke / (0.5 * kt * dof));
}

#[test]
fn zero_temperature_sample_is_the_crystal_at_rest() {
    let p = kink31();
    let s = doppler_thermal_sample(&p.config, &p.pseudo, 0.0, &[], 5).unwrap();
    assert_eq!(s, MdState::at_rest(&p.config));
}

#[test]
fn zeroed_modes_stay_cold_and_projection_is_faithful() {
    let p = kink31();
    let l = &p.pseudo_localized;
    let kt = p.units.thermal_energy(doppler_temperature(kinkgate::presets::COOLING_LINEWIDTH_HZ));
    let cold = [l.bus, l.low_inplane, l.low_outofplane];
    let s = doppler_thermal_sample(&p.config, &p.pseudo, kt, &cold, 8).unwrap();
    let e = mode_energy(&s, &p.config, &p.pseudo, &p.model, p.units.hbar()).unwrap();
    for j in cold {
        assert!(e.share(j) < 1e-6, "{}", e.share(j));
    }
    assert!(e.residual < 0.05, "{}", e.residual);
    assert!(!e.far_from_reference);
}

#[test]
fn one_excited_mode_carries_the_energy() {
    let p = kink31();
    let j = p.pseudo_localized.low_inplane;
    let hbar = p.units.hbar();
    let s = excite_mode_coherent(&MdState::at_rest(&p.config), &p.pseudo.modes[j], p.model.masses(), 3.0, 0.4, hbar).unwrap();
    let e = mode_energy(&s, &p.config, &p.pseudo, &p.model, hbar).unwrap();
    assert!(e.share(j) > 0.99);
    assert!((e.phonons[j] - 3.0).abs() < 1e-9);
}

#[test]
fn thousand_phonons_in_the_ring_kink_mode() {
    let r = ring();
    let hbar = r.units.hbar();
    let mode = &r.modes.modes[r.low_mode];
    let s = excite_mode_coherent(&MdState::at_rest(&r.config), mode, r.model.masses(), 1000.0, 0.0, hbar).unwrap();
    let e = mode_energy(&s, &r.config, &r.modes, &r.model, hbar).unwrap();
    assert!((e.phonons[r.low_mode] - 1000.0).abs() < 10.0, "{}", e.phonons[r.low_mode]);
    let w = r.modes.spectrum.frequencies[r.low_mode];
    assert!((e.projected_total / (1000.0 * hbar * w) - 1.0).abs() < 0.01, "{}", e.projected_total / (1000.0 * hbar * w));
}

#[test]
fn excitation_phase_rotates_the_quadratures() {
    let p = kink31();
    let j = p.pseudo_localized.bus;
    let mode = &p.pseudo.modes[j];
    let w = p.pseudo.spectrum.frequencies[j];
    let hbar = p.units.hbar();
    let rest = MdState::at_rest(&p.config);
    let masses = p.model.masses();
    let a = excite_mode_coherent(&rest, mode, masses, 50.0, 0.0, hbar).unwrap();
    let b = excite_mode_coherent(&rest, mode, masses, 50.0, FRAC_PI_2, hbar).unwrap();
    let c = excite_mode_coherent(&rest, mode, masses, 50.0, PI, hbar).unwrap();
    for i in 0..31 {
        let da = a.positions[i] - rest.positions[i];
        let db = b.positions[i] - rest.positions[i];
        let dc = c.positions[i] - rest.positions[i];
        assert!(a.velocities[i].norm() < 1e-15 && db.norm() < 1e-15);
        assert!((b.velocities[i] - da * w).norm() < 1e-12);
        assert!((dc + da).norm() < 1e-15);
    }
    let zeros = vec![Vec3::zeros(); 31];
    let ja = mode_action(mode, &a, &rest.positions, &zeros, masses);
    let jb = mode_action(mode, &b, &rest.positions, &zeros, masses);
    assert!((ja / jb - 1.0).abs() < 1e-6);
    assert!((ja / (50.0 * hbar) - 1.0).abs() < 1e-6);
}

#[test]
fn excitation_edge_cases() {
    let p = kink31();
    let rest = MdState::at_rest(&p.config);
    let hbar = p.units.hbar();
    let mode = &p.pseudo.modes[0];
    assert_eq!(excite_mode_coherent(&rest, mode, p.model.masses(), 0.0, 1.0, hbar).unwrap(), rest);
    let mut short = rest.clone();
    short.positions.pop();
    short.velocities.pop();
    let err = excite_mode_coherent(&short, mode, &p.model.masses()[..30], 1.0, 0.0, hbar);
    assert!(matches!(err, Err(Error::InvalidParameter(_))));
}

#[test]
fn ramp_rejects_bad_schedules() {
    assert!(RampSchedule::single(0.0, 1.0, 0.5, PI).is_err());
    assert!(RampSchedule::single(0.0, 1.0, 0.5, -0.1).is_err());
    let jump =
        vec![RampSegment { start: 0.0, duration: 1.0, from: 1.0, to: 0.5 }, RampSegment { start: 10.0, duration: 1.0, from: 0.6, to: 0.4 }];
    assert!(RampSchedule::new(jump, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ramps_are_continuous_and_anchored(
        anchor in 0.0f64..PI,
        starts in prop::collection::vec(0.0f64..50.0, 1..4),
        durations in prop::collection::vec(0.0f64..20.0, 4),
        levels in prop::collection::vec(0.2f64..2.0, 4),
    ) {
        let mut t = 0.0;
        let mut from = 1.0;
        let mut segs = Vec::new();
        for (k, gap) in starts.iter().enumerate() {
            t += gap;
            segs.push(RampSegment { start: t, duration: durations[k], from, to: levels[k] });
            from = levels[k];
            t += durations[k] + PI;
        }
        let r = RampSchedule::new(segs, anchor).unwrap();
        for s in &r.segments {
            let phase = (s.start - anchor).rem_euclid(PI);
            prop_assert!(phase.min(PI - phase) < 1e-9);
            let eps = 1e-9;
            prop_assert!((r.scale_at(s.start - eps) - r.scale_at(s.start + eps)).abs() < 1e-6);
            let end = s.start + s.duration;
            prop_assert!((r.scale_at(end - eps) - r.scale_at(end + eps)).abs() < 1e-6);
            prop_assert!((r.scale_at(end + eps) - s.to).abs() < 1e-6);
        }
        prop_assert!((r.scale_at(-1.0) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn ramped_trap_scales_the_secular_frequency() {
    let m = single_ion(0.0, [0.04, 0.04, 0.04]);
    let ramp = RampSchedule::single(0.0, 10.0, 0.5, 0.0).unwrap();
    let opts = IntegrateOptions { dt: 0.01, n_steps: 200_000, stride: 10, field: ForceField::Secular, ..Default::default() };
    let frames = integrate(&lone(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros()), &m, Some(&ramp), None, &opts).unwrap();
    let late: Vec<f64> = frames.iter().filter(|f| f.time > 20.0).map(|f| f.positions[0].x).collect();
    let w = dominant_frequency(&late, 0.1);
    assert!((w / 0.1 - 1.0).abs() < 1e-3, "{w}");
}

#[test]
fn radial_decrease_moves_the_core_ion_outward() {
    let exc = ExcitationSpec { phonons: 1000.0, phase: 0.0 };
    let rep = transport_protocol(&RingSetup::default(), TransportVariant::RadialDecrease, exc, &TransportOptions::default()).unwrap();
    assert!(rep.success, "{:?}", rep.diagnostics);
    assert!(rep.joined_outer_ring);
    assert_eq!(rep.final_kind, Some(KinkKind::Extended));
    let first = &rep.frames[0];
    assert!(first.tracked_radius < 0.5 * (first.inner_radius + first.outer_radius));
    assert!(rep.frames.iter().all(|f| f.charge == Some(rep.initial_charge)));
}

#[test]
fn radial_decrease_needs_the_excitation() {
    let exc = ExcitationSpec { phonons: 0.0, phase: 0.0 };
    let rep = transport_protocol(&RingSetup::default(), TransportVariant::RadialDecrease, exc, &TransportOptions::default()).unwrap();
    assert!(!rep.joined_outer_ring);
    assert!(!rep.success);
    assert!(!rep.diagnostics.is_empty());
}

#[test]
fn ramp_timing_has_a_success_window() {
    let exc = ExcitationSpec { phonons: 1000.0, phase: 0.0 };
    let phases = [0.0, FRAC_PI_2, 2.4, PI, 1.5 * PI];
    let scan = scan_radial_decrease(&RingSetup::default(), exc, &TransportOptions::default(), &phases).unwrap();
    assert!(scan.iter().any(|s| s.1));
    assert!(scan.iter().any(|s| !s.1));
}

#[test]
fn strong_excitation_slides_the_kink() {
    let exc = ExcitationSpec { phonons: 5000.0, phase: 0.0 };
    let rep = transport_protocol(&RingSetup::default(), TransportVariant::KinkSlide, exc, &TransportOptions::default()).unwrap();
    assert!(rep.success, "{:?}", rep.diagnostics);
    assert!(rep.max_displacement >= 1.0);
    assert!(rep.charge_conserved);
    assert!(rep.frames.iter().all(|f| f.charge == Some(rep.initial_charge)));
    // the kink-mode energy spreads over the crystal
    let tail = &rep.frames[rep.frames.len() * 3 / 4..];
    let share = tail.iter().map(|f| f.low_mode_share).sum::<f64>() / tail.len() as f64;
    assert!(rep.frames[0].low_mode_share > 0.99);
    assert!(share < 0.1, "{share}");
}

#[test]
fn unexcited_kink_does_not_move() {
    let exc = ExcitationSpec { phonons: 0.0, phase: 0.0 };
    let rep = transport_protocol(&RingSetup::default(), TransportVariant::KinkSlide, exc, &TransportOptions::default()).unwrap();
    assert_eq!(rep.max_displacement, 0.0);
    assert!(rep.frames.iter().all(|f| f.kind == Some(KinkKind::Localized)));
}
