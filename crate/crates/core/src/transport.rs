//! Optimal transport at desk scale: an exact min-cost-flow solver for small
//! discrete problems, monotone couplings on the line and circle, displacement
//! interpolation, Kantorovich potentials and the Hopf-Lax semigroup.

use thiserror::Error;

use crate::entropy::{DiscreteMeasure, EntropyError};
use crate::fields::{line_integral_profile, FieldSpec};
use crate::geometry::{GeodesicPath, GeometryError, ModelSpace, SpaceKind, Vec3};
use crate::grid::{Binning, Density1d, Grid1d, QuantilePiece};
use crate::par;
use crate::quad::{golden_section, simpson_samples};

/// Largest support accepted by [`ot_exact`].
pub const EXACT_CAP: usize = 400;
/// Largest number of map-like pieces in a plan decomposition.
pub const SUBPLAN_CAP: usize = 64;
/// Offsets scanned on the circle before golden-section refinement.
pub const CIRCLE_OFFSETS: usize = 512;
/// Samples per geodesic in 1-D displacement plans.
pub const SEGMENT_STEPS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("support of size {size} exceeds the exact-solver cap {cap}")]
    SizeExceeded { size: usize, cap: usize },
    #[error("source atom {source_index} is split and binning is disabled")]
    NonMapPlan { source_index: usize },
    #[error("plan needs more than {cap} map-like pieces")]
    TooManySubplans { cap: usize },
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("operation needs a 1-D model (Interval or Circle)")]
    NotOneDimensional,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// A coupling between two discrete measures.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub sources: Vec<Vec3>,
    pub targets: Vec<Vec3>,
    pub pairs: Vec<Coupling>,
    /// Initial velocities of the connecting geodesics when they are not the
    /// shortest ones returned by the log map (circle windings).
    pub displacements: Option<Vec<Vec3>>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn source_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.sources.len()];
        for p in &self.pairs {
            m[p.source] += p.mass;
        }
        m
    }

    pub fn target_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.targets.len()];
        for p in &self.pairs {
            m[p.target] += p.mass;
        }
        m
    }

    /// `true` when every source atom is sent to a single target.
    pub fn is_map(&self) -> bool {
        let mut seen = vec![false; self.sources.len()];
        for p in &self.pairs {
            if seen[p.source] {
                return false;
            }
            seen[p.source] = true;
        }
        true
    }
}

/// Exact discrete optimal transport for quadratic distance cost.
///
/// Successive shortest paths with Dijkstra on reduced costs over the dense
/// bipartite graph; every augmentation keeps the flow optimal for its value.
pub fn ot_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    space: &ModelSpace,
) -> Result<TransportPlan, TransportError> {
    let (n, m) = (mu.len(), nu.len());
    if n.max(m) > EXACT_CAP {
        return Err(TransportError::SizeExceeded {
            size: n.max(m),
            cap: EXACT_CAP,
        });
    }
    let (ta, tb) = (mu.total(), nu.total());
    if (ta - tb).abs() > 1e-9 * ta.max(tb) {
        return Err(TransportError::MassMismatch(ta, tb));
    }
    let mut cost = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = space.distance(&mu.points[i], &nu.points[j])?;
            cost[i * m + j] = d * d;
        }
    }
    let flow = min_cost_flow(&cost, n, m, &mu.weights, &nu.weights);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                pairs.push(Coupling {
                    source: i,
                    target: j,
                    mass: f,
                });
                total += f * cost[i * m + j];
            }
        }
    }
    Ok(TransportPlan {
        sources: mu.points.clone(),
        targets: nu.points.clone(),
        pairs,
        displacements: None,
        cost: total,
    })
}

fn min_cost_flow(cost: &[f64], n: usize, m: usize, supply: &[f64], demand: &[f64]) -> Vec<f64> {
    let scale = supply.iter().sum::<f64>().max(1e-300);
    let eps = 1e-14 * scale;
    let mut excess = supply.to_vec();
    let mut deficit = demand.to_vec();
    let mut flow = vec![0.0; n * m];
    // node ids: sources 0..n, sinks n..n+m
    let mut pot = vec![0.0; n + m];
    let mut dist = vec![0.0; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];
    loop {
        if excess.iter().all(|&e| e <= eps) || deficit.iter().all(|&d| d <= eps) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if excess[i] > eps {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < bd {
                    bd = dist[v];
                    best = v;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best >= n && deficit[best - n] > eps {
                target = best;
                break;
            }
            if best < n {
                let i = best;
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[i * m + j] + pot[i] - pot[v]).max(0.0);
                    if bd + rc < dist[v] {
                        dist[v] = bd + rc;
                        prev[v] = i;
                    }
                }
            } else {
                let j = best - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= 0.0 {
                        continue;
                    }
                    let rc = (-cost[i * m + j] + pot[best] - pot[i]).max(0.0);
                    if bd + rc < dist[i] {
                        dist[i] = bd + rc;
                        prev[i] = best;
                    }
                }
            }
        }
        if target == usize::MAX {
            break;
        }
        let dt = dist[target];
        for v in 0..n + m {
            pot[v] += dist[v].min(dt);
        }
        // bottleneck along the path
        let mut delta = deficit[target - n];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // reverse edge sink u -> source v
                delta = delta.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        delta = delta.min(excess[v]);
        let origin = v;
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += delta;
            } else {
                let f = &mut flow[v * m + (u - n)];
                *f = (*f - delta).max(0.0);
            }
            v = u;
        }
        excess[origin] -= delta;
        deficit[target - n] -= delta;
    }
    flow
}

fn one_d_period(space: &ModelSpace) -> Result<Option<f64>, TransportError> {
    match space.kind() {
        SpaceKind::Interval { .. } => Ok(None),
        SpaceKind::Circle { circumference } => Ok(Some(*circumference)),
        _ => Err(TransportError::NotOneDimensional),
    }
}

/// Monotone coupling of two discrete measures on an interval or a circle.
///
/// On the circle every rotation offset at which the coupling changes is tried,
/// which makes the result exact.
pub fn ot_1d(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    space: &ModelSpace,
) -> Result<TransportPlan, TransportError> {
    let period = one_d_period(space)?;
    let (ta, tb) = (mu.total(), nu.total());
    if (ta - tb).abs() > 1e-9 * ta.max(tb) {
        return Err(TransportError::MassMismatch(ta, tb));
    }
    let sorted = |d: &DiscreteMeasure| -> Vec<(usize, f64, f64)> {
        let mut v: Vec<(usize, f64, f64)> = d
            .points
            .iter()
            .zip(&d.weights)
            .enumerate()
            .filter(|(_, (_, &w))| w > 0.0)
            .map(|(i, (p, &w))| {
                let x = match period {
                    Some(l) => p[0].rem_euclid(l),
                    None => p[0],
                };
                (i, x, w / ta)
            })
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    };
    let a = sorted(mu);
    let b = sorted(nu);
    let (pairs, disp, cost) = match period {
        None => atom_pairs(&a, &b, 0.0, None),
        Some(l) => {
            let mut cum_a = vec![0.0];
            for x in &a {
                cum_a.push(cum_a.last().unwrap() + x.2);
            }
            let mut cum_b = vec![0.0];
            for x in &b {
                cum_b.push(cum_b.last().unwrap() + x.2);
            }
            let mut offsets: Vec<f64> = Vec::with_capacity(a.len() * b.len());
            for ca in &cum_a[..a.len()] {
                for cb in &cum_b[..b.len()] {
                    offsets.push((cb - ca).rem_euclid(1.0));
                }
            }
            offsets.sort_by(f64::total_cmp);
            offsets.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
            let costs = par::map(&offsets, |&s| atom_pairs(&a, &b, s, Some(l)).2);
            let best = costs
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            atom_pairs(&a, &b, offsets[best], Some(l))
        }
    };
    let pairs: Vec<Coupling> = pairs
        .into_iter()
        .map(|c| Coupling {
            mass: c.mass * ta,
            ..c
        })
        .collect();
    Ok(TransportPlan {
        sources: mu.points.clone(),
        targets: nu.points.clone(),
        pairs,
        displacements: period.map(|_| disp.into_iter().map(|d| Vec3::new(d, 0.0, 0.0)).collect()),
        cost: cost * ta,
    })
}

/// Pairs of the monotone coupling with target quantiles read at `u + s`.
/// Returns pairs, signed displacements, and cost (unit total mass).
fn atom_pairs(
    a: &[(usize, f64, f64)],
    b: &[(usize, f64, f64)],
    s: f64,
    period: Option<f64>,
) -> (Vec<Coupling>, Vec<f64>, f64) {
    let mut pairs = Vec::with_capacity(a.len() + b.len());
    let mut disp = Vec::with_capacity(a.len() + b.len());
    // locate the target atom holding quantile level s
    let mut j = 0;
    let mut acc = 0.0;
    while j + 1 < b.len() && acc + b[j].2 <= s {
        acc += b[j].2;
        j += 1;
    }
    let mut rem_b = b[j].2 - (s - acc);
    let mut lift = 0.0;
    let mut i = 0;
    let mut rem_a = a[0].2;
    let tiny = 1e-15;
    while i < a.len() {
        let mass = rem_a.min(rem_b);
        if mass > tiny {
            pairs.push(Coupling {
                source: a[i].0,
                target: b[j].0,
                mass,
            });
            disp.push(b[j].1 + lift - a[i].1);
        }
        rem_a -= mass;
        rem_b -= mass;
        if rem_a <= tiny {
            i += 1;
            if i < a.len() {
                rem_a = a[i].2 + rem_a.min(0.0);
            }
        }
        if rem_b <= tiny {
            j += 1;
            if j == b.len() {
                j = 0;
                lift += period.unwrap_or(0.0);
            }
            rem_b = b[j].2;
        }
    }
    let mean: f64 = pairs.iter().zip(&disp).map(|(p, d)| p.mass * d).sum();
    if let Some(l) = period {
        let mut k = (-mean / l).round();
        let second: f64 = pairs.iter().zip(&disp).map(|(p, d)| p.mass * d * d).sum();
        let eval = |k: f64| second + 2.0 * k * l * mean + k * k * l * l;
        for cand in [k - 1.0, k + 1.0] {
            if eval(cand) < eval(k) {
                k = cand;
            }
        }
        for d in disp.iter_mut() {
            *d += k * l;
        }
    }
    let cost = pairs.iter().zip(&disp).map(|(p, d)| p.mass * d * d).sum();
    (pairs, disp, cost)
}

/// A linear piece `u ↦ x(u)` on `[u0, u1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct LinPiece {
    u0: f64,
    u1: f64,
    x_at_u0: f64,
    slope: f64,
}

impl LinPiece {
    fn at(&self, u: f64) -> f64 {
        self.x_at_u0 + self.slope * (u - self.u0)
    }
}

fn pieces_of(d: &Density1d) -> Vec<LinPiece> {
    d.quantile_pieces()
        .iter()
        .map(|p: &QuantilePiece| LinPiece {
            u0: p.u0,
            u1: p.u1,
            x_at_u0: p.x0,
            slope: p.slope(),
        })
        .collect()
}

/// Quantile pieces of `d` read at `u + s`, lifted to the universal cover.
fn shifted_pieces(d: &Density1d, s: f64, period: Option<f64>) -> Vec<LinPiece> {
    let base = pieces_of(d);
    let Some(l) = period else { return base };
    let mut out = Vec::with_capacity(base.len() + 1);
    for (wrap, lift) in [(0.0, 0.0), (1.0, l)] {
        for p in &base {
            let u0 = (p.u0 + wrap - s).max(0.0);
            let u1 = (p.u1 + wrap - s).min(1.0);
            if u1 - u0 > 1e-15 {
                let x0 = p.x_at_u0 + lift + p.slope * (u0 - (p.u0 + wrap - s));
                out.push(LinPiece {
                    u0,
                    u1,
                    x_at_u0: x0,
                    slope: p.slope,
                });
            }
        }
    }
    out.sort_by(|a, b| a.u0.total_cmp(&b.u0));
    out
}

/// Common refinement of two piece lists covering `[0, 1]`.
fn merge(a: &[LinPiece], b: &[LinPiece]) -> Vec<(f64, f64, LinPiece, LinPiece)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0f64;
    while i < a.len() && j < b.len() {
        let end = a[i].u1.min(b[j].u1);
        if end - u > 1e-15 {
            out.push((u, end, a[i], b[j]));
        }
        u = u.max(end);
        if a[i].u1 <= end {
            i += 1;
        }
        if j < b.len() && b[j].u1 <= end {
            j += 1;
        }
    }
    out
}

/// `(∫D, ∫D²)` with `D = x_b − x_a` over the merged pieces.
fn displacement_moments(merged: &[(f64, f64, LinPiece, LinPiece)]) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for &(u0, u1, a, b) in merged {
        let d0 = b.at(u0) - a.at(u0);
        let d1 = b.at(u1) - a.at(u1);
        let w = u1 - u0;
        m1 += w * 0.5 * (d0 + d1);
        m2 += w * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    (m1, m2)
}

/// Best integer winding `k` and the cost for a fixed offset.
fn wound_cost(m1: f64, m2: f64, period: Option<f64>) -> (f64, f64) {
    let Some(l) = period else { return (0.0, m2) };
    let eval = |k: f64| m2 + 2.0 * k * l * m1 + k * k * l * l;
    let k0 = (-m1 / l).round();
    [k0 - 1.0, k0, k0 + 1.0]
        .into_iter()
        .map(|k| (k, eval(k)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

/// Optimal offset and winding of the quantile coupling between two densities.
fn best_alignment(mu: &Density1d, nu: &Density1d, period: Option<f64>) -> (f64, f64, f64) {
    let src = pieces_of(mu);
    let cost_at = |s: f64| {
        let merged = merge(&src, &shifted_pieces(nu, s, period));
        let (m1, m2) = displacement_moments(&merged);
        wound_cost(m1, m2, period)
    };
    if period.is_none() {
        let (k, c) = cost_at(0.0);
        return (0.0, k, c);
    }
    let offsets: Vec<f64> = (0..CIRCLE_OFFSETS)
        .map(|i| i as f64 / CIRCLE_OFFSETS as f64)
        .collect();
    let costs = par::map(&offsets, |&s| cost_at(s).1);
    let best = costs
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap();
    let step = 1.0 / CIRCLE_OFFSETS as f64;
    let (s, _) = golden_section(offsets[best] - step, offsets[best] + step, 1e-13, |s| {
        cost_at(s.rem_euclid(1.0)).1
    });
    let mut s = s.rem_euclid(1.0);
    if cost_at(offsets[best]).1 <= cost_at(s).1 {
        s = offsets[best];
    }
    let (k, c) = cost_at(s);
    (s, k, c)
}

/// Exact `W₂²` between two piecewise-constant densities on an interval or circle.
pub fn w2_squared_1d(mu: &Density1d, nu: &Density1d) -> f64 {
    let period = mu.grid.periodic.then(|| mu.grid.length());
    best_alignment(mu, nu, period).2
}

/// One mass atom of a continuous monotone coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileAtom {
    pub from: f64,
    /// lifted endpoint on the universal cover
    pub to: f64,
    pub mass: f64,
    /// `dX_0/du = 1/ρ_0(from)`
    pub slope_from: f64,
    /// `dX_1/du = 1/ρ_1(to)`
    pub slope_to: f64,
}

impl QuantileAtom {
    /// `ρ_t(γ_t)` from the Jacobian of the monotone map, affine in `t`.
    pub fn density_at(&self, t: f64) -> f64 {
        1.0 / ((1.0 - t) * self.slope_from + t * self.slope_to)
    }
}

/// Optimal coupling of two densities on a 1-D model as quantile atoms, two
/// Gauss nodes per piece of the common refinement.
pub fn quantile_coupling(mu: &Density1d, nu: &Density1d) -> Vec<QuantileAtom> {
    let period = mu.grid.periodic.then(|| mu.grid.length());
    let (s, k, _) = best_alignment(mu, nu, period);
    let lift = k * period.unwrap_or(0.0);
    let merged = merge(&pieces_of(mu), &shifted_pieces(nu, s, period));
    let g = 0.5 / 3f64.sqrt();
    let mut atoms = Vec::with_capacity(2 * merged.len());
    for (u0, u1, a, b) in merged {
        let mid = 0.5 * (u0 + u1);
        let w = u1 - u0;
        for node in [mid - g * w, mid + g * w] {
            atoms.push(QuantileAtom {
                from: a.at(node),
                to: b.at(node) + lift,
                mass: 0.5 * w,
                slope_from: a.slope,
                slope_to: b.slope,
            });
        }
    }
    atoms
}

/// Geodesic of a dynamical plan carrying `mass`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanGeodesic {
    pub path: GeodesicPath,
    pub mass: f64,
}

/// A finite family of weighted geodesics approximating an optimal dynamical coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicalPlan {
    pub geodesics: Vec<PlanGeodesic>,
    pub t_grid: Vec<f64>,
}

impl DynamicalPlan {
    pub fn total_mass(&self) -> f64 {
        self.geodesics.iter().map(|g| g.mass).sum()
    }

    /// `∫ |γ̇|² dΠ`, which is `W₂²` for an optimal plan.
    pub fn w2_squared(&self) -> f64 {
        self.geodesics
            .iter()
            .map(|g| g.mass * g.path.speed * g.path.speed)
            .sum()
    }

    /// `φ_t(γ)` for every geodesic (outer) and grid time (inner).
    pub fn line_integrals(&self, space: &ModelSpace, field: &FieldSpec) -> Vec<Vec<f64>> {
        par::map(&self.geodesics, |g| {
            line_integral_profile(space, &g.path, field, &self.t_grid)
        })
    }

    /// `φ_t(Π) = Σ mass · φ_t(γ)` on the grid.
    pub fn mean_line_integral(&self, space: &ModelSpace, field: &FieldSpec) -> Vec<f64> {
        let per = self.line_integrals(space, field);
        (0..self.t_grid.len())
            .map(|k| {
                self.geodesics
                    .iter()
                    .zip(&per)
                    .map(|(g, p)| g.mass * p[k])
                    .sum()
            })
            .collect()
    }
}

/// One time slice of a displacement interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySlice {
    pub measure: DiscreteMeasure,
    /// reference cells when the slice is binned; `None` for atomic slices
    pub reference: Option<DiscreteMeasure>,
}

impl DensitySlice {
    pub fn is_absolutely_continuous(&self) -> bool {
        self.reference.is_some()
    }
}

/// Densities `ρ_t` of `(e_t)⋆Π` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPath {
    pub t_grid: Vec<f64>,
    pub slices: Vec<DensitySlice>,
    /// `ρ_t(γ_t)` per geodesic (outer) and time (inner), in exact 1-D mode
    pub along: Option<Vec<Vec<f64>>>,
}

fn uniform_times(n_t: usize) -> Vec<f64> {
    let n_t = n_t.max(2);
    (0..n_t).map(|i| i as f64 / (n_t - 1) as f64).collect()
}

/// Displacement interpolation between two densities on an interval or circle,
/// with densities along each geodesic from the monotone map's Jacobian and exact
/// slices on the source grid.
pub fn displacement_1d(
    space: &ModelSpace,
    mu0: &Density1d,
    mu1: &Density1d,
    n_t: usize,
) -> Result<(DynamicalPlan, DensityPath), TransportError> {
    one_d_period(space)?;
    let t_grid = uniform_times(n_t);
    let atoms = quantile_coupling(mu0, mu1);
    let geodesics = atoms
        .iter()
        .map(|a| PlanGeodesic {
            path: GeodesicPath::segment(
                &Vec3::new(a.from, 0.0, 0.0),
                &Vec3::new(a.to, 0.0, 0.0),
                SEGMENT_STEPS,
            ),
            mass: a.mass,
        })
        .collect();
    let along = atoms
        .iter()
        .map(|a| t_grid.iter().map(|&t| a.density_at(t)).collect())
        .collect();
    let slices = t_grid
        .iter()
        .map(|&t| DensitySlice {
            measure: interpolated_density(mu0, mu1, t).to_measure(),
            reference: Some(mu0.grid.reference()),
        })
        .collect();
    Ok((
        DynamicalPlan {
            geodesics,
            t_grid: t_grid.clone(),
        },
        DensityPath {
            t_grid,
            slices,
            along: Some(along),
        },
    ))
}

/// `(e_t)⋆Π` of the optimal coupling as cell masses on `mu0`'s grid, exact.
pub fn interpolated_density(mu0: &Density1d, mu1: &Density1d, t: f64) -> Density1d {
    let grid = mu0.grid.clone();
    let period = grid.periodic.then(|| grid.length());
    let (s, k, _) = best_alignment(mu0, mu1, period);
    let lift = k * period.unwrap_or(0.0);
    let merged = merge(&pieces_of(mu0), &shifted_pieces(mu1, s, period));
    let mut mass = vec![0.0; grid.cells];
    for (u0, u1, a, b) in merged {
        let xa = (1.0 - t) * a.at(u0) + t * (b.at(u0) + lift);
        let xb = (1.0 - t) * a.at(u1) + t * (b.at(u1) + lift);
        spread_uniform(&grid, xa, xb, u1 - u0, &mut mass);
    }
    Density1d { grid, mass }
}

/// Adds `m` spread uniformly over `[xa, xb]` to the cells of `grid`.
fn spread_uniform(grid: &Grid1d, xa: f64, xb: f64, m: f64, out: &mut [f64]) {
    let h = grid.spacing();
    let len = xb - xa;
    if len <= 1e-300 {
        if let Some(c) = grid.cell_of(xa) {
            out[c] += m;
        }
        return;
    }
    let first = ((xa - grid.lo) / h).floor() as i64;
    let last = ((xb - grid.lo) / h).ceil() as i64;
    for c in first..last.max(first + 1) {
        let lo = grid.lo + c as f64 * h;
        let overlap = (xb.min(lo + h) - xa.max(lo)).max(0.0);
        if overlap <= 0.0 {
            continue;
        }
        let idx = if grid.periodic {
            c.rem_euclid(grid.cells as i64) as usize
        } else {
            c.clamp(0, grid.cells as i64 - 1) as usize
        };
        out[idx] += m * overlap / len;
    }
}

/// How [`displacement_path`] reconstructs slice densities.
pub enum SliceMode<'a> {
    /// pushforward atoms only; split source atoms are rejected
    Atomic,
    /// bin the pushforward into reference cells
    Binned(&'a dyn Binning),
}

/// Each atom of a discrete plan rides its connecting geodesic.
pub fn displacement_path(
    plan: &TransportPlan,
    space: &ModelSpace,
    n_t: usize,
    mode: SliceMode<'_>,
) -> Result<(DynamicalPlan, DensityPath), TransportError> {
    if matches!(mode, SliceMode::Atomic) && !space.is_one_dimensional() && !plan.is_map() {
        let mut seen = vec![false; plan.sources.len()];
        for p in &plan.pairs {
            if seen[p.source] {
                return Err(TransportError::NonMapPlan {
                    source_index: p.source,
                });
            }
            seen[p.source] = true;
        }
    }
    let t_grid = uniform_times(n_t);
    let steps = SEGMENT_STEPS.max(4 * n_t);
    let mut geodesics = Vec::with_capacity(plan.pairs.len());
    for (idx, c) in plan.pairs.iter().enumerate() {
        let x = plan.sources[c.source];
        let v = match &plan.displacements {
            Some(d) => d[idx],
            None => space.log_map(&x, &plan.targets[c.target])?,
        };
        geodesics.push(PlanGeodesic {
            path: space.geodesic_shoot(&x, &v, steps)?,
            mass: c.mass,
        });
    }
    let dyn_plan = DynamicalPlan {
        geodesics,
        t_grid: t_grid.clone(),
    };
    let mut slices = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        slices.push(match &mode {
            SliceMode::Atomic => DensitySlice {
                measure: DiscreteMeasure::new(
                    dyn_plan
                        .geodesics
                        .iter()
                        .map(|g| space.wrap(&g.path.eval(t).0))
                        .collect(),
                    dyn_plan.geodesics.iter().map(|g| g.mass).collect(),
                ),
                reference: None,
            },
            SliceMode::Binned(bins) => {
                let (measure, _) = crate::entropy::pushforward(&dyn_plan, *bins, t)?;
                DensitySlice {
                    measure,
                    reference: Some(bins.reference()),
                }
            }
        });
    }
    Ok((
        dyn_plan,
        DensityPath {
            t_grid,
            slices,
            along: None,
        },
    ))
}

/// Splits a plan into map-like pieces: each source appears at most once per piece.
pub fn decompose_map_like(
    plan: &TransportPlan,
    cap: usize,
) -> Result<Vec<TransportPlan>, TransportError> {
    let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); plan.sources.len()];
    for (idx, p) in plan.pairs.iter().enumerate() {
        by_source[p.source].push(idx);
    }
    let depth = by_source.iter().map(Vec::len).max().unwrap_or(0);
    if depth > cap {
        return Err(TransportError::TooManySubplans { cap });
    }
    let mut out = Vec::with_capacity(depth);
    for layer in 0..depth {
        let picked: Vec<usize> = by_source
            .iter()
            .filter_map(|v| v.get(layer).copied())
            .collect();
        let pairs: Vec<Coupling> = picked.iter().map(|&i| plan.pairs[i]).collect();
        let displacements = plan
            .displacements
            .as_ref()
            .map(|d| picked.iter().map(|&i| d[i]).collect());
        let cost = picked
            .iter()
            .map(|&i| {
                let v = plan
                    .displacements
                    .as_ref()
                    .map_or(0.0, |d| d[i].norm_squared());
                v * plan.pairs[i].mass
            })
            .sum();
        out.push(TransportPlan {
            sources: plan.sources.clone(),
            targets: plan.targets.clone(),
            pairs,
            displacements,
            cost,
        });
    }
    Ok(out)
}

/// Values on a finite set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub points: Vec<Vec3>,
    pub values: Vec<f64>,
}

/// `Q_tφ(x) = min_y d(x,y)²/(2t) + φ(y)` at every point of `at`, minimizing over
/// the points of `phi`.
pub fn hopf_lax_at(
    phi: &GridFunction,
    t: f64,
    space: &ModelSpace,
    at: &[Vec3],
) -> Result<Vec<f64>, TransportError> {
    let rows = par::map(at, |x| {
        let mut best = f64::INFINITY;
        for (y, &v) in phi.points.iter().zip(&phi.values) {
            let d = space.distance(x, y)?;
            best = best.min(d * d / (2.0 * t) + v);
        }
        Ok::<f64, GeometryError>(best)
    });
    rows.into_iter()
        .map(|r| r.map_err(TransportError::from))
        .collect()
}

/// `Q_tφ` on the points of `phi`.
pub fn hopf_lax(
    phi: &GridFunction,
    t: f64,
    space: &ModelSpace,
) -> Result<GridFunction, TransportError> {
    let values = hopf_lax_at(phi, t, space, &phi.points)?;
    Ok(GridFunction {
        points: phi.points.clone(),
        values,
    })
}

/// Kantorovich potential `φ` with `∇φ(x) = x − T(x)` for the monotone map `T`
/// from `mu` to `nu` on an interval, sampled at `refine` nodes per grid cell.
///
/// With this orientation `T = exp(−∇φ)` and
/// `½W₂² = ∫φ dμ + ∫Q_1(−φ) dν`; see [`kantorovich_dual_value`].
pub fn kantorovich_potential_1d(
    mu: &Density1d,
    nu: &Density1d,
    refine: usize,
) -> Result<GridFunction, TransportError> {
    if mu.grid.periodic || mu.grid != nu.grid {
        return Err(TransportError::NotOneDimensional);
    }
    let refine = refine.max(2).next_multiple_of(2);
    let grid = &mu.grid;
    let n = grid.cells * refine;
    let h = grid.length() / n as f64;
    let cum: Vec<f64> = std::iter::once(0.0)
        .chain(mu.mass.iter().scan(0.0, |c, &m| {
            *c += m;
            Some(*c)
        }))
        .collect();
    let cdf = |x: f64| -> f64 {
        let y = (x - grid.lo) / grid.spacing();
        let i = (y.floor().max(0.0) as usize).min(grid.cells - 1);
        (cum[i] + mu.mass[i] * (y - i as f64)).clamp(0.0, 1.0)
    };
    let target = nu.quantile_pieces();
    let quantile = |u: f64| -> f64 {
        let k = target.partition_point(|p| p.u1 < u).min(target.len() - 1);
        target[k].eval(u.clamp(target[k].u0, target[k].u1))
    };
    let grad = |x: f64| x - quantile(cdf(x));
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for i in 0..n {
        let a = grid.lo + i as f64 * h;
        acc += crate::quad::gauss_legendre(a, a + h, grad);
        values.push(acc);
    }
    let points = (0..=n)
        .map(|i| Vec3::new(grid.lo + i as f64 * h, 0.0, 0.0))
        .collect();
    Ok(GridFunction { points, values })
}

/// `2(∫φ dμ + ∫Q_1(−φ) dν)`, which equals `W₂²(μ, ν)` for the potential of
/// [`kantorovich_potential_1d`]. Integrals use Simpson on the potential's nodes.
pub fn kantorovich_dual_value(
    phi: &GridFunction,
    mu: &Density1d,
    nu: &Density1d,
    space: &ModelSpace,
) -> Result<f64, TransportError> {
    let neg = GridFunction {
        points: phi.points.clone(),
        values: phi.values.iter().map(|v| -v).collect(),
    };
    let q = hopf_lax(&neg, 1.0, space)?;
    let grid = &mu.grid;
    let per_cell = (phi.points.len() - 1) / grid.cells;
    let h = grid.spacing() / per_cell as f64;
    let cell_integral = |vals: &[f64], d: &Density1d| -> f64 {
        (0..grid.cells)
            .map(|c| {
                let slice = &vals[c * per_cell..=(c + 1) * per_cell];
                d.density(c) * simpson_samples(slice, h)
            })
            .sum()
    };
    Ok(2.0 * (cell_integral(&phi.values, mu) + cell_integral(&q.values, nu)))
}
