//! Localized-mode identification and laser-direction selection.

use serde::{Deserialize, Serialize};

use super::{FloquetMode, ModeSpectrum};
use crate::crystal::{KinkDescriptor, KinkKind};
use crate::error::{Error, Result};
use crate::trap::Vec3;

#[derive(Debug, Clone, Copy)]
pub struct LocalizeOptions {
    /// Minimum ω₁/ω₂ for the bus mode.
    pub gap_threshold: f64,
    /// Minimum share of the bus-mode norm on the three core ions.
    pub core_fraction: f64,
    /// Sites on each side of the kink centre counted for the low modes.
    pub window: usize,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self { gap_threshold: 1.05, core_fraction: 0.6, window: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedModes {
    pub bus: usize,
    pub low_inplane: usize,
    pub low_outofplane: usize,
    pub gap_ratio: f64,
    pub bus_core_fraction: f64,
    pub low_inplane_localization: f64,
    pub low_outofplane_localization: f64,
}

fn norm2(c: &super::CVec3) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// Share of the DC mode norm carried by `ions`.
pub fn norm_fraction(mode: &FloquetMode, ions: &[usize]) -> f64 {
    let dc = mode.dc_vector();
    let total: f64 = dc.iter().map(norm2).sum();
    ions.iter().map(|&i| norm2(&dc[i])).sum::<f64>() / total.max(1e-300)
}

/// Share of the DC mode norm along `normal`.
pub fn out_of_plane_fraction(mode: &FloquetMode, normal: &Vec3) -> f64 {
    let dc = mode.dc_vector();
    let total: f64 = dc.iter().map(norm2).sum();
    let along: f64 = dc.iter().map(|c| (c[0] * normal.x + c[1] * normal.y + c[2] * normal.z).norm_sqr()).sum();
    along / total.max(1e-300)
}

fn window_ions(kink: &KinkDescriptor, w: usize, periodic: bool) -> Vec<usize> {
    let n = kink.chain_order.len() as i64;
    let c = kink.center_site as i64;
    (c - w as i64..=c + w as i64)
        .filter_map(|s| {
            if periodic {
                Some(kink.chain_order[s.rem_euclid(n) as usize])
            } else if (0..n).contains(&s) {
                Some(kink.chain_order[s as usize])
            } else {
                None
            }
        })
        .collect()
}

/// Bus mode and the two low-frequency kink modes.
pub fn identify_localized_modes(
    spectrum: &ModeSpectrum,
    modes: &[FloquetMode],
    kink: &KinkDescriptor,
    opts: &LocalizeOptions,
) -> Result<LocalizedModes> {
    if kink.kind == KinkKind::None {
        return Err(Error::NotLocalized("crystal has no kink".into()));
    }
    let f = &spectrum.frequencies;
    if f.len() < 2 || modes.len() != f.len() {
        return Err(Error::invalid("spectrum and mode list do not match"));
    }
    let gap = f[0] / f[1];
    let core_fraction = norm_fraction(&modes[0], &kink.core_indices);
    if gap < opts.gap_threshold {
        return Err(Error::NotLocalized(format!("top-mode gap ω₁/ω₂ = {gap:.4} below {}", opts.gap_threshold)));
    }
    if core_fraction < opts.core_fraction {
        return Err(Error::NotLocalized(format!("top mode carries only {:.1}% of its norm on the core", 100.0 * core_fraction)));
    }
    let normal = Vec3::from(kink.plane_normal);
    let periodic = kink.closed;
    let ions = window_ions(kink, opts.window, periodic);
    let mut best_in = (usize::MAX, -1.0);
    let mut best_out = (usize::MAX, -1.0);
    for (j, m) in modes.iter().enumerate().skip(1) {
        if f[j] > 0.5 * f[0] || f[j] <= 0.0 {
            continue;
        }
        let loc = norm_fraction(m, &ions);
        if out_of_plane_fraction(m, &normal) < 0.5 {
            if loc > best_in.1 {
                best_in = (j, loc);
            }
        } else if loc > best_out.1 {
            best_out = (j, loc);
        }
    }
    if best_in.0 == usize::MAX || best_out.0 == usize::MAX {
        return Err(Error::NotLocalized("no low-frequency kink modes found".into()));
    }
    Ok(LocalizedModes {
        bus: 0,
        low_inplane: best_in.0,
        low_outofplane: best_out.0,
        gap_ratio: gap,
        bus_core_fraction: core_fraction,
        low_inplane_localization: best_in.1,
        low_outofplane_localization: best_out.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserConstraints {
    /// Optical wavenumber in inverse length units.
    pub wavenumber: f64,
    /// Dimensionless ħ.
    pub hbar: f64,
    /// Bound on |λ̃_i¹| for ions outside the core.
    pub bus_limit: f64,
    /// Bound on |λ̃_iʲ| / |λ̃_i¹| for core ions on the off-resonant modes.
    pub offres_ratio: f64,
    pub offres_modes: Vec<usize>,
    /// Scan resolution in degrees.
    pub angle_step_deg: f64,
}

impl LaserConstraints {
    pub fn new(wavenumber: f64, hbar: f64) -> Self {
        Self { wavenumber, hbar, bus_limit: 0.01, offres_ratio: 0.2, offres_modes: vec![1, 2], angle_step_deg: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub mode: usize,
    pub ion: usize,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserGeometry {
    /// In-plane angle from the first in-plane axis, degrees.
    pub angle_deg: f64,
    pub direction: [f64; 3],
    /// k = |k| k̂ in inverse length units.
    pub wavevector: [f64; 3],
    pub optical_phase: f64,
    /// η_j = |k| √(ħ/(2ω_j)) per mode.
    pub lamb_dicke: Vec<f64>,
    /// λ̃ of the bus mode per ion.
    pub bus_projections: Vec<f64>,
    pub feasible: bool,
    /// Largest constraint ratio (≤ 1 when feasible).
    pub worst_ratio: f64,
    pub violations: Vec<Violation>,
}

impl LaserGeometry {
    pub fn khat(&self) -> Vec3 {
        Vec3::from(self.direction)
    }

    pub fn wavenumber(&self) -> f64 {
        Vec3::from(self.wavevector).norm()
    }

    /// Geometry for a fixed direction, evaluated against `constraints`.
    pub fn evaluate(
        direction: Vec3,
        angle_deg: f64,
        spectrum: &ModeSpectrum,
        modes: &[FloquetMode],
        kink: &KinkDescriptor,
        c: &LaserConstraints,
    ) -> Self {
        let khat = direction.normalize();
        let (worst, violations) = constraint_report(&khat, modes, kink, c);
        let lamb_dicke = spectrum.frequencies.iter().map(|w| c.wavenumber * (c.hbar / (2.0 * w)).sqrt()).collect();
        let bus_projections = (0..modes[0].n_ions()).map(|i| modes[0].dc_projection(i, &khat)).collect();
        Self {
            angle_deg,
            direction: khat.into(),
            wavevector: (khat * c.wavenumber).into(),
            optical_phase: 0.0,
            lamb_dicke,
            bus_projections,
            feasible: worst <= 1.0,
            worst_ratio: worst,
            violations,
        }
    }
}

fn constraint_report(khat: &Vec3, modes: &[FloquetMode], kink: &KinkDescriptor, c: &LaserConstraints) -> (f64, Vec<Violation>) {
    let bus = &modes[0];
    let mut worst = 0.0f64;
    let mut v = Vec::new();
    for i in 0..bus.n_ions() {
        if kink.core_indices.contains(&i) {
            continue;
        }
        let l = bus.dc_projection(i, khat).abs();
        worst = worst.max(l / c.bus_limit);
        if l > c.bus_limit {
            v.push(Violation { mode: 0, ion: i, value: l, limit: c.bus_limit });
        }
    }
    for &j in &c.offres_modes {
        let Some(m) = modes.get(j) else { continue };
        for &i in &kink.core_indices {
            let limit = c.offres_ratio * bus.dc_projection(i, khat).abs();
            let l = m.dc_projection(i, khat).abs();
            worst = worst.max(l / limit.max(1e-300));
            if l > limit {
                v.push(Violation { mode: j, ion: i, value: l, limit });
            }
        }
    }
    (worst, v)
}

fn in_plane_basis(kink: &KinkDescriptor) -> (Vec3, Vec3) {
    let n = Vec3::from(kink.plane_normal).normalize();
    let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (seed - n * n.dot(&seed)).normalize();
    (e1, n.cross(&e1))
}

/// Scans in-plane directions for the one minimizing the worst constraint
/// ratio; infeasible constraint sets return the best direction with its
/// violations listed.
pub fn optimize_laser_direction(
    spectrum: &ModeSpectrum,
    modes: &[FloquetMode],
    kink: &KinkDescriptor,
    constraints: &LaserConstraints,
) -> Result<LaserGeometry> {
    if modes.is_empty() {
        return Err(Error::invalid("no modes"));
    }
    let (e1, e2) = in_plane_basis(kink);
    let dir = |deg: f64| {
        let t = deg.to_radians();
        e1 * t.cos() + e2 * t.sin()
    };
    let ratio = |deg: f64| constraint_report(&dir(deg), modes, kink, constraints).0;
    let n = (180.0 / constraints.angle_step_deg).ceil() as usize;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..n {
        let a = k as f64 * constraints.angle_step_deg;
        let r = ratio(a);
        if r < best.1 {
            best = (a, r);
        }
    }
    // golden-section refinement inside the bracketing grid cell
    let (mut lo, mut hi) = (best.0 - constraints.angle_step_deg, best.0 + constraints.angle_step_deg);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if ratio(a) < ratio(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    let angle = if ratio(mid) < best.1 { mid } else { best.0 };
    Ok(LaserGeometry::evaluate(dir(angle), angle.rem_euclid(180.0), spectrum, modes, kink, constraints))
}
