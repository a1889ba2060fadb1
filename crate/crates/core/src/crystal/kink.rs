//! Zigzag order parameter and domain-wall (kink) detection.

use serde::{Deserialize, Serialize};

use super::CrystalConfiguration;
use crate::error::{Error, Result};
use crate::trap::{Geometry, TrapParameters, Vec3};

/// Kinks whose core spans at most this many sites are called localized.
pub const LOCALIZED_MAX_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KinkKind {
    Localized,
    Extended,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkDescriptor {
    pub kind: KinkKind,
    /// Ion at the centre of the domain wall.
    pub center_index: usize,
    /// Position of the centre along the chain order (0 = first site).
    pub center_site: usize,
    /// Midpoint of the strong sites bounding the wall, in chain sites.
    pub center_coordinate: f64,
    pub width: usize,
    /// Net signed wall count for open chains; wall-count parity for rings.
    pub topological_charge: i32,
    /// Ions labelled 1, 2, 3 for the gate: centre ion and its chain neighbours.
    pub core_indices: [usize; 3],
    pub n_walls: usize,
    /// Ion indices in chain order.
    pub chain_order: Vec<usize>,
    /// Unit normal of the crystal plane.
    pub plane_normal: [f64; 3],
    /// Whether the chain closes on itself (ring).
    pub closed: bool,
}

struct Chain {
    order: Vec<usize>,
    /// Transverse deviation per chain site.
    d: Vec<f64>,
    periodic: bool,
    normal: Vec3,
}

fn principal_2d(pts: &[(f64, f64)]) -> ((f64, f64), f64, f64) {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx += dx * dx / n;
        syy += dy * dy / n;
        sxy += dx * dy / n;
    }
    let tr = sxx + syy;
    let disc = ((sxx - syy).powi(2) / 4.0 + sxy * sxy).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = (tr / 2.0 - disc).max(0.0);
    let dir = if sxy.abs() > 1e-300 {
        let v = (l1 - syy, sxy);
        let nv = (v.0 * v.0 + v.1 * v.1).sqrt();
        (v.0 / nv, v.1 / nv)
    } else if sxx >= syy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    (dir, l1.sqrt(), l2.sqrt())
}

fn build_chain(positions: &[Vec3], geometry: &Geometry) -> Result<Chain> {
    let n = positions.len();
    if n < 3 {
        return Err(Error::Classification("fewer than three ions cannot form a zigzag".into()));
    }
    let (order, d, periodic, out_of_plane, normal) = match geometry {
        Geometry::RingQuadrupole { .. } => {
            let phi0 = positions[0].y.atan2(positions[0].x);
            let tau = std::f64::consts::TAU;
            let mut order: Vec<usize> = (0..n).collect();
            let ang = |i: usize| (positions[i].y.atan2(positions[i].x) - phi0).rem_euclid(tau);
            order.sort_by(|&a, &b| ang(a).total_cmp(&ang(b)));
            let rho: Vec<f64> = order.iter().map(|&i| positions[i].xy().norm()).collect();
            let mean = rho.iter().sum::<f64>() / n as f64;
            let d: Vec<f64> = rho.iter().map(|r| r - mean).collect();
            let zs: Vec<f64> = order.iter().map(|&i| positions[i].z).collect();
            let zm = zs.iter().sum::<f64>() / n as f64;
            let zstd = (zs.iter().map(|z| (z - zm).powi(2)).sum::<f64>() / n as f64).sqrt();
            (order, d, true, zstd, Vec3::z())
        }
        _ => {
            // axis: x for the linear Paul trap, z for the multipole
            let (ax, t1, t2) = match geometry {
                Geometry::LinearPaul => (0, 1, 2),
                _ => (2, 0, 1),
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| positions[a][ax].total_cmp(&positions[b][ax]));
            let pts: Vec<(f64, f64)> = order.iter().map(|&i| (positions[i][t1], positions[i][t2])).collect();
            let (dir, _, minor) = principal_2d(&pts);
            let mean = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n as f64, b + p.1 / n as f64));
            let d: Vec<f64> = pts.iter().map(|p| (p.0 - mean.0) * dir.0 + (p.1 - mean.1) * dir.1).collect();
            let mut dv = Vec3::zeros();
            dv[t1] = dir.0;
            dv[t2] = dir.1;
            let mut axis = Vec3::zeros();
            axis[ax] = 1.0;
            (order, d, false, minor, axis.cross(&dv))
        }
    };
    let spread = (d.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let spacing = typical_spacing(positions, &order, periodic);
    if spread < 1e-3 * spacing {
        return Err(Error::Classification("configuration is a one-dimensional chain".into()));
    }
    if out_of_plane > 0.2 * spread {
        return Err(Error::Classification("configuration is not planar".into()));
    }
    Ok(Chain { order, d, periodic, normal })
}

fn typical_spacing(positions: &[Vec3], order: &[usize], periodic: bool) -> f64 {
    let n = order.len();
    let m = if periodic { n } else { n - 1 };
    let mut s: Vec<f64> = (0..m).map(|k| (positions[order[(k + 1) % n]] - positions[order[k]]).norm()).collect();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Local zigzag amplitude per chain site, `(d_n − (d_{n−1} + d_{n+1})/2)/2`,
/// with the chain order used. Alternates in sign in a perfect zigzag.
pub fn zigzag_amplitudes(config: &CrystalConfiguration, params: &TrapParameters) -> Result<(Vec<usize>, Vec<f64>)> {
    let c = build_chain(&config.positions, &params.geometry)?;
    Ok((c.order.clone(), local_amplitudes(&c)))
}

fn local_amplitudes(c: &Chain) -> Vec<f64> {
    let n = c.d.len();
    (0..n)
        .map(|k| {
            let nb = if c.periodic {
                0.5 * (c.d[(k + n - 1) % n] + c.d[(k + 1) % n])
            } else if k == 0 {
                c.d[1]
            } else if k == n - 1 {
                c.d[n - 2]
            } else {
                0.5 * (c.d[k - 1] + c.d[k + 1])
            };
            0.5 * (c.d[k] - nb)
        })
        .collect()
}

struct Wall {
    center: usize,
    coordinate: f64,
    width: usize,
    sign: i32,
}

fn find_walls(a: &[f64], periodic: bool) -> Vec<Wall> {
    let n = a.len();
    let mut mags: Vec<f64> = a.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let bulk = mags[n / 2];
    let strong: Vec<usize> = (0..n).filter(|&k| a[k].abs() >= 0.5 * bulk).collect();
    let mut walls = Vec::new();
    if strong.len() < 2 {
        return walls;
    }
    let mut pairs: Vec<(usize, usize)> = strong.windows(2).map(|w| (w[0], w[1])).collect();
    if periodic {
        pairs.push((strong[strong.len() - 1], strong[0] + n));
    }
    for (l, r) in pairs {
        let parity = if (r - l) % 2 == 0 { 1.0 } else { -1.0 };
        if a[l].signum() * a[r % n].signum() * parity > 0.0 {
            continue;
        }
        let inner: Vec<usize> = (l + 1..r).map(|k| k % n).collect();
        let center = if inner.is_empty() {
            if a[l].abs() <= a[r % n].abs() {
                l
            } else {
                r % n
            }
        } else {
            *inner.iter().min_by(|&&x, &&y| a[x].abs().total_cmp(&a[y].abs())).expect("non-empty")
        };
        let stagger = if l % 2 == 0 { 1.0 } else { -1.0 };
        let sign = if a[l].signum() * stagger > 0.0 { 1 } else { -1 };
        walls.push(Wall { center, coordinate: (0.5 * (l + r) as f64) % n as f64, width: inner.len().max(1), sign });
    }
    walls
}

/// Length in sites and first site of the shortest ring arc containing every wall centre.
fn covering_arc(walls: &[Wall], n: usize) -> (usize, usize) {
    let mut c: Vec<usize> = walls.iter().map(|w| w.center).collect();
    c.sort_unstable();
    let m = c.len();
    // the arc starts just after the largest gap between consecutive centres
    let (gap, k) = (0..m).map(|k| ((c[(k + 1) % m] + n - c[k]) % n, k)).max().expect("walls");
    let gap = if gap == 0 { n } else { gap };
    (n - gap + 1, c[(k + 1) % m])
}

/// Classifies the zigzag defect of a planar crystal.
pub fn detect_kink(config: &CrystalConfiguration, params: &TrapParameters) -> Result<KinkDescriptor> {
    let chain = build_chain(&config.positions, &params.geometry)?;
    let a = local_amplitudes(&chain);
    let n = a.len();
    let walls = find_walls(&a, chain.periodic);
    let charge = if chain.periodic { (walls.len() % 2) as i32 } else { walls.iter().map(|w| w.sign).sum() };
    let primary = if chain.periodic {
        walls.iter().min_by(|x, y| a[x.center].abs().total_cmp(&a[y.center].abs()))
    } else {
        let mid = (n as f64 - 1.0) / 2.0;
        walls.iter().min_by(|x, y| (x.center as f64 - mid).abs().total_cmp(&(y.center as f64 - mid).abs()))
    };
    let Some(w) = primary else {
        let mid = n / 2;
        return Ok(KinkDescriptor {
            kind: KinkKind::None,
            center_index: chain.order[mid],
            center_site: mid,
            center_coordinate: mid as f64,
            width: 0,
            topological_charge: charge,
            core_indices: [chain.order[mid.saturating_sub(1)], chain.order[mid], chain.order[(mid + 1).min(n - 1)]],
            n_walls: 0,
            chain_order: chain.order,
            plane_normal: chain.normal.into(),
            closed: chain.periodic,
        });
    };
    // in a ring the net defect may split into several partial walls; it then
    // spans the shortest arc holding all of them
    let (width, coordinate) = if chain.periodic && walls.len() > 1 {
        let (span, start) = covering_arc(&walls, n);
        (span, (start as f64 + 0.5 * (span - 1) as f64) % n as f64)
    } else {
        (w.width, w.coordinate)
    };
    let c = w.center;
    let (l, r) = if chain.periodic { ((c + n - 1) % n, (c + 1) % n) } else { (c.saturating_sub(1), (c + 1).min(n - 1)) };
    Ok(KinkDescriptor {
        kind: if width <= LOCALIZED_MAX_WIDTH { KinkKind::Localized } else { KinkKind::Extended },
        center_index: chain.order[c],
        center_site: c,
        center_coordinate: coordinate,
        width,
        topological_charge: charge,
        core_indices: [chain.order[l], chain.order[c], chain.order[r]],
        n_walls: walls.len(),
        chain_order: chain.order,
        plane_normal: chain.normal.into(),
        closed: chain.periodic,
    })
}

/// Follows the kink centre across frames; the tracked position only moves
/// when the detected wall has shifted by at least one full site.
#[derive(Debug, Clone, Default)]
pub struct KinkTracker {
    pub coordinate: Option<f64>,
    pub n_sites: usize,
    pub periodic: bool,
    /// Net displacement in sites since the first frame.
    pub displacement: f64,
}

impl KinkTracker {
    pub fn new(n_sites: usize, periodic: bool) -> Self {
        Self { coordinate: None, n_sites, periodic, displacement: 0.0 }
    }

    pub fn update(&mut self, desc: &KinkDescriptor) -> Option<f64> {
        if desc.kind == KinkKind::None {
            return self.coordinate;
        }
        let new = desc.center_coordinate;
        match self.coordinate {
            None => self.coordinate = Some(new),
            Some(old) => {
                let mut delta = new - old;
                if self.periodic {
                    let n = self.n_sites as f64;
                    delta = (delta + n / 2.0).rem_euclid(n) - n / 2.0;
                }
                if delta.abs() >= 1.0 - 1e-9 {
                    self.displacement += delta;
                    self.coordinate = Some(new);
                }
            }
        }
        self.coordinate
    }
}
