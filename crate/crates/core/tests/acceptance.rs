use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use kinkgate::crystal::{find_equilibrium, EquilibriumOptions};
use kinkgate::dynamics::{
    doppler_temperature, doppler_thermal_sample, integrate_observed, total_energy, transport_protocol, ExcitationSpec, ForceField,
    IntegrateOptions, RingSetup, TransportOptions, TransportVariant,
};
use kinkgate::floquet::pseudopotential_modes;
use kinkgate::gate::*;
use kinkgate::mathieu::characteristic_exponent;
use kinkgate::nonlinear::{estimate_heating_rate, BusAmplitude, HeatingOptions};
use kinkgate::pipeline::KinkPipeline;
use kinkgate::presets;
use kinkgate::{potential_and_force, Geometry, IonSpecies, Ions, TrapModel, TrapParameters, Vec3};

struct Checks {
    criterion: u32,
    failed: Vec<String>,
}

impl Checks {
    fn new(criterion: u32) -> Self {
        Self { criterion, failed: Vec::new() }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl std::fmt::Display) {
        let status = if ok { "PASS" } else { "FAIL" };
        println!("{status} criterion {} {name}: {detail}", self.criterion);
        if !ok {
            self.failed.push(name.to_string());
        }
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.check(name, (value - target).abs() <= tol, format!("{value:.6} vs {target} ± {tol}"));
    }

    fn runtime(&mut self, started: Instant, budget: Duration) {
        let t = started.elapsed();
        self.check("runtime", t <= budget, format!("{:.1} s of {} s", t.as_secs_f64(), budget.as_secs()));
    }

    fn finish(self) {
        assert!(self.failed.is_empty(), "criterion {} failed: {:?}", self.criterion, self.failed);
    }
}

fn kink31() -> &'static KinkPipeline {
    static CELL: OnceLock<KinkPipeline> = OnceLock::new();
    CELL.get_or_init(|| KinkPipeline::reference(31, 1.0).unwrap())
}

fn gate(p: &KinkPipeline, protocol: GateProtocol) -> GateRun {
    run_gate(&p.coupling, &protocol).unwrap()
}

fn heated(rate: f64) -> GateProtocol {
    GateProtocol { heating: HeatingModel { rate }, ..Default::default() }
}

fn peak(r: &GateResult) -> f64 {
    r.mean_phonons.iter().cloned().fold(0.0, f64::max)
}

#[test]
fn criterion_01_mode_spectrum() {
    let mut c = Checks::new(1);
    let started = Instant::now();
    let p = KinkPipeline::reference(31, 1.0).unwrap();
    let f = p.frequencies_in_axial_units();
    c.within("highest mode / axial", f[0], 12.02, 0.03 * 12.02);
    c.within("gap ratio", p.gap_ratio(), 1.085, 0.02);
    c.within("low in-plane mode / axial", f[p.localized.low_inplane], 1.47, 0.03 * 1.47);
    c.within("low mode Floquet shift", p.low_mode_shift(), -0.02, 0.01);
    c.runtime(started, Duration::from_secs(120));
    c.finish();
}

#[test]
fn criterion_02_alpha() {
    let mut c = Checks::new(2);
    let alpha = kink31().coupling.alpha().unwrap();
    c.within("|alpha| from crystal projections", alpha.abs(), 2.22, 0.05);
    let literal = compute_alpha(-0.0237, -0.0121, -0.35).unwrap();
    c.within("alpha from quoted inputs", literal, -2.22, 0.01);
    c.finish();
}

#[test]
fn criterion_03_ideal_gate() {
    let mut c = Checks::new(3);
    let started = Instant::now();
    let p = kink31();
    let run = gate(p, GateProtocol::default());
    let r = &run.result;
    let mid = r.mean_phonons[r.sample_at(run.drive.window.start() + 0.5 * run.drive.gate_time())];
    c.within("bus phonons at t*/2", mid, 0.78, 0.05);
    c.check("bus purity at t*", r.final_bus_purity() >= 0.999, r.final_bus_purity());
    c.check("qubit fidelity at t*", r.final_fidelity() >= 0.99, r.final_fidelity());
    let u = ideal_unitary(r.alpha, &r.local_phases, 1).unwrap();
    let ghz = &u * ground_qubits();
    let tangle = three_tangle(&projector(&ghz)).unwrap();
    c.within("three-tangle of ideal output", tangle, 1.0, 1e-6);
    c.runtime(started, Duration::from_secs(600));
    c.finish();
}

#[test]
fn criterion_04_heated_gate() {
    let mut c = Checks::new(4);
    let started = Instant::now();
    let p = kink31();
    let ghz = gate(p, heated(0.75e-4));
    let pair = gate(p, GateProtocol { pulses: 2, rabi: RabiChoice::Fixed(ghz.drive.rabi), ..heated(0.75e-4) });
    let f1 = ghz.result.final_fidelity();
    let f2 = pair.result.final_fidelity();
    c.within("GHZ fidelity at t*", f1, 0.974, 0.01);
    let ratio = (1.0 - f2) / (1.0 - f1);
    c.check("pair infidelity ratio", (1.6..=2.4).contains(&ratio), format!("{ratio:.3} ({f2:.5} at 2t*)"));
    c.runtime(started, Duration::from_secs(1200));
    c.finish();
}

#[test]
fn criterion_05_doubled_frequencies() {
    let mut c = Checks::new(5);
    let started = Instant::now();
    let p = KinkPipeline::reference(31, 2.0).unwrap();
    let wx = p.units.angular_to_physical(p.axial_frequency()) / TAU;
    c.within("axial frequency [kHz]", wx / 1e3, 1400.0, 1e-6);
    let base = gate(&p, heated(0.75e-4));
    let rabi = RabiChoice::Fixed(base.drive.rabi);
    let half = gate(&p, GateProtocol { rabi, ..heated(0.375e-4) });
    let none = gate(&p, GateProtocol { rabi, ..heated(0.0) });
    let f = [base.result.final_fidelity(), half.result.final_fidelity(), none.result.final_fidelity()];
    c.check("fidelity rises as heating falls", f[0] < f[1] && f[1] < f[2], format!("{f:?}"));
    c.runtime(started, Duration::from_secs(1200));
    c.finish();
}

#[test]
fn criterion_06_micromotion_harmonics() {
    let mut c = Checks::new(6);
    let started = Instant::now();
    let p = kink31();
    let off = gate(p, GateProtocol::default());
    let mut on = GateProtocol { rabi: RabiChoice::Fixed(off.drive.rabi), ..Default::default() };
    on.propagation.hamiltonian.micromotion_harmonics = true;
    let on = gate(p, on);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let df = rel(on.result.final_fidelity(), off.result.final_fidelity());
    let dn = rel(peak(&on.result), peak(&off.result));
    let dp = rel(on.result.final_bus_purity(), off.result.final_bus_purity());
    c.check("fidelity change", df <= 1e-3, format!("{df:e}"));
    c.check("peak phonon change", dn <= 1e-3, format!("{dn:e}"));
    c.check("bus purity change", dp <= 1e-3, format!("{dp:e}"));
    c.runtime(started, Duration::from_secs(2400));
    c.finish();
}

#[test]
fn criterion_07_heating_surrogate() {
    let mut c = Checks::new(7);
    let started = Instant::now();
    let p = kink31();
    let opts = HeatingOptions { ensemble_size: 200, seed: 11, ..Default::default() };
    let h = estimate_heating_rate(p, &opts).unwrap();
    c.check(
        "rate per bus period in [1e-5, 1e-3]",
        (1e-5..=1e-3).contains(&h.rate),
        format!("{:.3e} ± {:.1e}, 200 trajectories", h.rate, h.std_error),
    );
    let cold = estimate_heating_rate(
        p,
        &HeatingOptions { bath_temperature_k: 0.0, bus_amplitude: BusAmplitude::Zero, ensemble_size: 16, ..opts.clone() },
    )
    .unwrap();
    c.check("zero-temperature bath", cold.rate.abs() <= 2.0 * cold.std_error + 1e-9, format!("{:.2e} ± {:.1e}", cold.rate, cold.std_error));
    let stiff = KinkPipeline::reference(31, 2.0).unwrap();
    let s = estimate_heating_rate(&stiff, &HeatingOptions { ensemble_size: 64, seed: 2, ..Default::default() }).unwrap();
    let b = estimate_heating_rate(p, &HeatingOptions { ensemble_size: 64, seed: 2, ..Default::default() }).unwrap();
    c.check("doubled frequencies lower the rate", s.rate < b.rate, format!("{:.2e} vs {:.2e}", s.rate, b.rate));
    c.runtime(started, Duration::from_secs(3600));
    c.finish();
}

fn linear(q: f64, a: [f64; 3], n: usize) -> TrapModel {
    let params = TrapParameters { geometry: Geometry::LinearPaul, rf_angular_frequency: TAU * 80.8e6, mathieu_q: q, static_curvature: a };
    TrapModel::new(params, Ions::uniform(IonSpecies::calcium40(), n)).unwrap()
}

/// β from the Hill continued fraction, by bisection.
fn continued_fraction_beta(a: f64, q: f64) -> f64 {
    let gamma = |b: f64, n: i32| a - (b + 2.0 * n as f64).powi(2);
    let tail = |b: f64, sign: i32| (1..60).rev().fold(0.0, |r, n| q / (gamma(b, sign * n) - q * r));
    let f = |b: f64| gamma(b, 0) - q * (tail(b, 1) + tail(b, -1));
    let (mut lo, mut hi) = (1e-9, 0.999);
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_08_analytic_oracles() {
    let mut c = Checks::new(8);
    let m = linear(0.0, [1.0, 100.0, 100.0], 2);
    let eq = find_equilibrium(&m, 0, 1, None, &EquilibriumOptions::default()).unwrap();
    let u = 0.25f64.cbrt();
    let err = eq.positions.iter().map(|p| (p.x.abs() - u).abs() + p.y.abs() + p.z.abs()).fold(0.0, f64::max);
    c.check("two-ion separation", err < 1e-8, format!("{err:e}"));
    let w = pseudopotential_modes(&eq, &m).unwrap().spectrum.frequencies;
    let n = w.len();
    c.check("centre-of-mass mode", (w[n - 1] - 1.0).abs() < 1e-8, w[n - 1]);
    c.check("stretch mode", (w[n - 2] - 3f64.sqrt()).abs() < 1e-8, w[n - 2]);

    let worst = [(0.0, 0.22), (-0.01, 0.3), (0.05, 0.1)]
        .iter()
        .map(|&(a, q)| (characteristic_exponent(a, q).unwrap() - continued_fraction_beta(a, q)).abs())
        .fold(0.0, f64::max);
    c.check("Mathieu exponent vs continued fraction", worst < 1e-6, format!("{worst:e}"));

    let m5 = linear(0.22, [0.003, -0.01, 0.007], 5);
    let p: Vec<Vec3> = (0..5).map(|i| Vec3::new(3.0 * i as f64 + 0.1 * (i as f64).sin(), 0.3 - 0.1 * i as f64, 0.05 * i as f64)).collect();
    let t = 0.7;
    let (_, f) = potential_and_force(&p, &m5, t).unwrap();
    let e = |q: &[Vec3]| potential_and_force(q, &m5, t).unwrap().0;
    let h = 1e-5;
    let scale = f.iter().map(|v| v.norm()).fold(1e-3, f64::max);
    let mut fd_err: f64 = 0.0;
    for i in 0..5 {
        for a in 0..3 {
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp[i][a] += h;
            pm[i][a] -= h;
            fd_err = fd_err.max((-(e(&pp) - e(&pm)) / (2.0 * h) - f[i][a]).abs() / scale);
        }
    }
    c.check("forces vs finite differences", fd_err < 1e-6, format!("{fd_err:e}"));

    let p31 = kink31();
    let kt = p31.units.thermal_energy(doppler_temperature(presets::COOLING_LINEWIDTH_HZ));
    let mut s = doppler_thermal_sample(&p31.config, &p31.pseudo, kt, &[], 4).unwrap();
    let e0 = total_energy(&s, &p31.model, ForceField::Secular).unwrap();
    let opts = IntegrateOptions { n_steps: 10_000, stride: 100, field: ForceField::Secular, ..Default::default() };
    let mut drift: f64 = 0.0;
    integrate_observed(&mut s, &p31.model, None, None, &opts, |fr| {
        drift = drift.max(((total_energy(fr, &p31.model, ForceField::Secular).unwrap() - e0) / e0).abs());
        true
    })
    .unwrap();
    c.check("energy drift over 1e4 steps", drift < 1e-8, format!("{drift:e}"));
    c.finish();
}

#[test]
fn criterion_09_transport() {
    let mut c = Checks::new(9);
    let setup = RingSetup::default();
    let opts = TransportOptions::default();
    let started = Instant::now();
    let radial =
        transport_protocol(&setup, TransportVariant::RadialDecrease, ExcitationSpec { phonons: 1000.0, phase: 0.0 }, &opts).unwrap();
    c.check("tracked ion joins the outer ring", radial.joined_outer_ring, format!("{:?}", radial.diagnostics));
    c.check("kink ends extended", radial.final_kind == Some(kinkgate::crystal::KinkKind::Extended), format!("{:?}", radial.final_kind));
    c.check("charge conserved (radial decrease)", radial.charge_conserved, radial.frames.len());
    c.runtime(started, Duration::from_secs(1800));
    let started = Instant::now();
    let slide = transport_protocol(&setup, TransportVariant::KinkSlide, ExcitationSpec { phonons: 5000.0, phase: 0.0 }, &opts).unwrap();
    c.check("kink displaced by at least one site", slide.max_displacement >= 1.0, format!("{:.2} sites", slide.max_displacement));
    c.check("charge conserved (kink slide)", slide.charge_conserved, slide.frames.len());
    c.runtime(started, Duration::from_secs(1800));
    c.finish();
}

#[test]
fn criterion_10_determinism() {
    let mut c = Checks::new(10);
    let a = KinkPipeline::reference(31, 1.0).unwrap();
    let b = KinkPipeline::reference(31, 1.0).unwrap();
    let bits = |p: &KinkPipeline| {
        let mut v: Vec<u64> = p.spectrum.frequencies.iter().map(|w| w.to_bits()).collect();
        v.extend(p.config.positions.iter().flat_map(|x| x.iter().map(|c| c.to_bits()).collect::<Vec<_>>()));
        v.push(p.coupling.alpha().unwrap().to_bits());
        v.push(p.coupling.eta.to_bits());
        v
    };
    c.check("crystal, modes and coupling", bits(&a) == bits(&b), a.spectrum.frequencies.len());
    let opts = HeatingOptions { ensemble_size: 4, seed: 9, bus_amplitude: BusAmplitude::ZeroPoint, ..Default::default() };
    let h1 = estimate_heating_rate(&a, &opts).unwrap();
    let h2 = estimate_heating_rate(&b, &opts).unwrap();
    c.check("heating estimate", h1 == h2, format!("{:e}", h1.rate));
    let short = TransportOptions { duration_periods: 5.0, frames: 3, ..Default::default() };
    let exc = ExcitationSpec { phonons: 1000.0, phase: 0.5 * PI };
    let t1 = transport_protocol(&RingSetup::default(), TransportVariant::KinkSlide, exc, &short).unwrap();
    let t2 = transport_protocol(&RingSetup::default(), TransportVariant::KinkSlide, exc, &short).unwrap();
    c.check("transport frames", t1 == t2, t1.frames.len());
    c.finish();
}
