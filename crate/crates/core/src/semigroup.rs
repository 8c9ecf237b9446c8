//! Grid discretization of `L = Δ + Z` on an interval or circle, its dual flow
//! on probability densities, and the flow estimates that follow from a
//! curvature bound: Wasserstein contraction, the evolution variational
//! inequality, the metric speed bound, and the gradient estimate.
//!
//! The generator uses square-root rates `e^{w/2}/h²` between neighbouring
//! cells, `w` being the line integral of `Z` between their centers. Rates are
//! positive for every `h`, rows sum to zero, and for gradient drifts the
//! scheme satisfies detailed balance with respect to the exact Gibbs weights.

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::fields::FieldSpec;
use crate::geometry::{ModelSpace, SpaceKind, Vec3};
use crate::grid::{Density1d, Grid1d};
use crate::par;
use crate::quad::{composite_gauss, gauss_legendre};
use crate::transport::{quantile_coupling, w2_squared_1d};

/// Largest grid evolved by a dense matrix exponential.
pub const DENSE_LIMIT: usize = 512;
/// Smallest admissible grid.
pub const MIN_CELLS: usize = 16;
/// Densities below this are reported as a failed scheme.
pub const NEGATIVITY_FLOOR: f64 = -1e-12;
/// Relative tolerance of the contraction envelope.
pub const CONTRACTION_TOL: f64 = 1e-3;
/// Relative tolerance of the variational inequality and the speed bound.
pub const FLOW_TOL: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemigroupError {
    #[error("the flow is implemented on intervals and circles only")]
    NotOneDimensional,
    #[error("weighted reference measures are not supported by the flow")]
    Weighted,
    #[error("need at least {MIN_CELLS} cells, got {0}")]
    TooFewCells(usize),
    #[error("negative flow time {0}")]
    NegativeTime(f64),
    #[error("density {value:.3e} in cell {cell} at t = {t}: time step too large")]
    NegativeDensity { t: f64, cell: usize, value: f64 },
    #[error("the flow left the floating-point range by t = {t}")]
    NonFinite { t: f64 },
    #[error("state has {got} values, grid has {expected} cells")]
    GridMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `L` and its adjoint on a uniform grid.
///
/// Cell measures are all `h`, so the adjoint is the transpose; it acts on cell
/// masses and conserves their sum.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    pub grid: Grid1d,
    pub space: ModelSpace,
    pub field: FieldSpec,
    /// rate from cell `i` to `i + 1` (wrapping on a circle; zero at a wall)
    pub right: Vec<f64>,
    /// rate from cell `i` to `i − 1`
    pub left: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn cells(&self) -> usize {
        self.grid.cells
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    /// The transpose, i.e. the generator of the dual flow on cell masses.
    pub fn adjoint(&self) -> DMatrix<f64> {
        self.matrix.transpose()
    }

    /// `e^{tL}` by scaling and squaring.
    pub fn propagator(&self, t: f64) -> DMatrix<f64> {
        (&self.matrix * t).exp()
    }
}

fn drift_at(space: &ModelSpace, field: &FieldSpec, x: f64) -> f64 {
    field.eval(&space.wrap(&Vec3::new(x, 0.0, 0.0)))[0]
}

/// Builds the generator on `m` cells with reflecting walls on an interval and
/// periodic wrap on a circle.
pub fn build_generator(
    space: &ModelSpace,
    field: &FieldSpec,
    m: usize,
) -> Result<GeneratorMatrix, SemigroupError> {
    let grid = check_space(space, m)?;
    let h = grid.spacing();
    let line = |i: usize| {
        let a = grid.center(i);
        gauss_legendre(a, a + h, |x| drift_at(space, field, x))
    };
    let forward: Vec<f64> = (0..m).map(line).collect();
    let gen = assemble(grid, space.clone(), field.clone(), &forward);
    if gen.right.iter().chain(&gen.left).any(|r| !r.is_finite()) {
        return Err(SemigroupError::NonFinite { t: 0.0 });
    }
    Ok(gen)
}

/// The Laplacian alone, assembled without touching any drift.
pub fn heat_generator(space: &ModelSpace, m: usize) -> Result<GeneratorMatrix, SemigroupError> {
    let grid = check_space(space, m)?;
    Ok(assemble(
        grid,
        space.clone(),
        FieldSpec::zero(),
        &vec![0.0; m],
    ))
}

fn check_space(space: &ModelSpace, m: usize) -> Result<Grid1d, SemigroupError> {
    if space.is_weighted() {
        return Err(SemigroupError::Weighted);
    }
    if !matches!(
        space.kind(),
        SpaceKind::Interval { .. } | SpaceKind::Circle { .. }
    ) {
        return Err(SemigroupError::NotOneDimensional);
    }
    if m < MIN_CELLS {
        return Err(SemigroupError::TooFewCells(m));
    }
    Ok(Grid1d::for_space(space, m).expect("1-D model"))
}

/// `forward[i]` is the drift integral from center `i` to the next center.
fn assemble(grid: Grid1d, space: ModelSpace, field: FieldSpec, forward: &[f64]) -> GeneratorMatrix {
    let m = grid.cells;
    let h2 = grid.spacing().powi(2);
    let periodic = grid.periodic;
    let mut right = vec![0.0; m];
    let mut left = vec![0.0; m];
    for i in 0..m {
        if periodic || i + 1 < m {
            right[i] = (0.5 * forward[i]).exp() / h2;
            left[(i + 1) % m] = (-0.5 * forward[i]).exp() / h2;
        }
    }
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        if right[i] > 0.0 {
            matrix[(i, (i + 1) % m)] += right[i];
        }
        if left[i] > 0.0 {
            matrix[(i, (i + m - 1) % m)] += left[i];
        }
        matrix[(i, i)] -= right[i] + left[i];
    }
    GeneratorMatrix {
        grid,
        space,
        field,
        right,
        left,
        matrix,
    }
}

/// Function values (`P_t f`) or cell masses (`ℋ_t μ`) at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub values: Vec<f64>,
}

impl FlowState {
    pub fn from_density(mu: &Density1d) -> Self {
        Self {
            t: 0.0,
            values: mu.mass.clone(),
        }
    }

    pub fn from_function(f: Vec<f64>) -> Self {
        Self { t: 0.0, values: f }
    }

    /// The masses as a density, clearing roundoff below zero.
    pub fn density(&self, grid: &Grid1d) -> Density1d {
        Density1d::from_masses(
            grid.clone(),
            self.values.iter().map(|&v| v.max(0.0)).collect(),
        )
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Advances `state` by `t`; `dual` evolves cell masses under the adjoint.
///
/// Grids up to [`DENSE_LIMIT`] use the matrix exponential, larger ones
/// Crank-Nicolson with steps at most `h²/2`.
pub fn evolve(
    gen: &GeneratorMatrix,
    state: &FlowState,
    t: f64,
    dual: bool,
) -> Result<FlowState, SemigroupError> {
    if !(t >= 0.0) {
        return Err(SemigroupError::NegativeTime(t));
    }
    if state.values.len() != gen.cells() {
        return Err(SemigroupError::GridMismatch {
            expected: gen.cells(),
            got: state.values.len(),
        });
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let values = if gen.cells() <= DENSE_LIMIT {
        apply(&gen.propagator(t), &state.values, dual)
    } else {
        crank_nicolson(gen, &state.values, t, dual)
    };
    finish(values, state.t + t, dual)
}

/// [`evolve`] from the same state to each of `times`, one exponential per time.
pub fn evolve_many(
    gen: &GeneratorMatrix,
    state: &FlowState,
    times: &[f64],
    dual: bool,
) -> Result<Vec<FlowState>, SemigroupError> {
    let results = par::map(times, |&t| evolve(gen, state, t, dual));
    results.into_iter().collect()
}

fn apply(p: &DMatrix<f64>, v: &[f64], dual: bool) -> Vec<f64> {
    let v = nalgebra::DVector::from_column_slice(v);
    let out = if dual { p.tr_mul(&v) } else { p * v };
    out.as_slice().to_vec()
}

fn finish(values: Vec<f64>, t: f64, dual: bool) -> Result<FlowState, SemigroupError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SemigroupError::NonFinite { t });
    }
    if dual {
        if let Some((cell, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| v < NEGATIVITY_FLOOR)
        {
            return Err(SemigroupError::NegativeDensity { t, cell, value });
        }
    }
    Ok(FlowState { t, values })
}

/// Tridiagonal rows (sub, diag, super) of `L` or its transpose.
fn bands(gen: &GeneratorMatrix, dual: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = gen.cells();
    let diag: Vec<f64> = (0..m).map(|i| -(gen.left[i] + gen.right[i])).collect();
    if dual {
        let sub = (0..m).map(|i| gen.right[(i + m - 1) % m]).collect();
        let sup = (0..m).map(|i| gen.left[(i + 1) % m]).collect();
        (sub, diag, sup)
    } else {
        (gen.left.clone(), diag, gen.right.clone())
    }
}

fn crank_nicolson(gen: &GeneratorMatrix, v: &[f64], t: f64, dual: bool) -> Vec<f64> {
    let m = gen.cells();
    let steps = (t / (0.5 * gen.spacing().powi(2))).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let (sub, diag, sup) = bands(gen, dual);
    let a: Vec<f64> = sub.iter().map(|x| -0.5 * dt * x).collect();
    let b: Vec<f64> = diag.iter().map(|x| 1.0 - 0.5 * dt * x).collect();
    let c: Vec<f64> = sup.iter().map(|x| -0.5 * dt * x).collect();
    let mut x = v.to_vec();
    let mut rhs = vec![0.0; m];
    for _ in 0..steps {
        for i in 0..m {
            let prev = x[(i + m - 1) % m];
            let next = x[(i + 1) % m];
            rhs[i] = x[i] + 0.5 * dt * (sub[i] * prev + diag[i] * x[i] + sup[i] * next);
        }
        x = solve_cyclic(&a, &b, &c, &rhs);
    }
    x
}

/// Solves `a_i x_{i−1} + b_i x_i + c_i x_{i+1} = r_i` with indices mod `m`
/// (Thomas plus a Sherman-Morrison correction for the corners).
fn solve_cyclic(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let m = b.len();
    let (alpha, beta) = (c[m - 1], a[0]);
    if alpha == 0.0 && beta == 0.0 {
        return thomas(a, b, c, r);
    }
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[m - 1] -= alpha * beta / gamma;
    let x = thomas(a, &bb, c, r);
    let mut u = vec![0.0; m];
    u[0] = gamma;
    u[m - 1] = alpha;
    let z = thomas(a, &bb, c, &u);
    let fact = (x[0] + beta * x[m - 1] / gamma) / (1.0 + z[0] + beta * z[m - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    cp[0] = c[0] / b[0];
    dp[0] = r[0] / b[0];
    for i in 1..m {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (r[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// One tested time: the checked quantity, its bound, and
/// `margin = (bound − value)/scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowRow {
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Outcome of one flow estimate over a list of times.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowVerdict {
    pub check: &'static str,
    pub k: f64,
    pub rows: Vec<FlowRow>,
    /// allowed negative margin
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

impl FlowVerdict {
    fn new(check: &'static str, k: f64, rows: Vec<FlowRow>, tolerance: f64, note: String) -> Self {
        let passed = rows.iter().all(|r| r.margin >= -tolerance);
        Self {
            check,
            k,
            rows,
            tolerance,
            passed,
            note,
        }
    }

    pub fn min_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// How far the worst row exceeds its bound, zero when all hold exactly.
    pub fn observed_slack(&self) -> f64 {
        (-self.min_margin()).max(0.0)
    }

    /// Times whose margin falls below the tolerance.
    pub fn witnesses(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.margin < -self.tolerance)
            .map(|r| r.t)
            .collect()
    }

    /// The same rows judged with `extra` added to the tolerance.
    pub fn with_slack(&self, extra: f64) -> Self {
        Self::new(
            self.check,
            self.k,
            self.rows.clone(),
            self.tolerance + extra.max(0.0),
            self.note.clone(),
        )
    }
}

impl fmt::Display for FlowVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}, K = {}: min margin {:+.3e} over {} times (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.check,
            self.k,
            self.min_margin(),
            self.rows.len(),
            self.tolerance
        )?;
        let w = self.witnesses();
        if !w.is_empty() {
            write!(f, ", fails at t = {w:?}")?;
        }
        if !self.note.is_empty() {
            write!(f, "; {}", self.note)?;
        }
        Ok(())
    }
}

fn sorted_unique(times: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = times.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// The dual flow of `mu` at each of `times`, evaluated once per distinct time.
fn densities_at(
    gen: &GeneratorMatrix,
    mu: &Density1d,
    times: &[f64],
) -> Result<Vec<(f64, Density1d)>, SemigroupError> {
    let times = sorted_unique(times.iter().copied());
    let start = FlowState::from_density(mu);
    let states = evolve_many(gen, &start, &times, true)?;
    Ok(times
        .into_iter()
        .zip(states.iter().map(|s| s.density(&gen.grid)))
        .collect())
}

fn lookup<'a>(table: &'a [(f64, Density1d)], t: f64) -> &'a Density1d {
    &table
        .iter()
        .find(|(s, _)| *s == t)
        .expect("time evaluated")
        .1
}

fn check_density(gen: &GeneratorMatrix, mu: &Density1d) -> Result<(), SemigroupError> {
    if mu.grid != gen.grid {
        return Err(SemigroupError::GridMismatch {
            expected: gen.cells(),
            got: mu.grid.cells,
        });
    }
    Ok(())
}

/// `W₂(ℋ_tμ, ℋ_tν)² ≤ e^{−2Kt} W₂(μ, ν)²`, margins relative to `W₂(μ, ν)²`.
pub fn contraction_check(
    gen: &GeneratorMatrix,
    mu: &Density1d,
    nu: &Density1d,
    k: f64,
    times: &[f64],
) -> Result<FlowVerdict, SemigroupError> {
    check_density(gen, mu)?;
    check_density(gen, nu)?;
    let w0 = w2_squared_1d(mu, nu);
    let scale = if w0 > 0.0 { w0 } else { 1.0 };
    let a = densities_at(gen, mu, times)?;
    let b = densities_at(gen, nu, times)?;
    let rows = times
        .iter()
        .map(|&t| {
            let value = w2_squared_1d(lookup(&a, t), lookup(&b, t));
            let bound = (-2.0 * k * t).exp() * w0;
            FlowRow {
                t,
                value,
                bound,
                margin: (bound - value) / scale,
            }
        })
        .collect();
    Ok(FlowVerdict::new(
        "contraction",
        k,
        rows,
        CONTRACTION_TOL,
        format!("W2(0)^2 = {w0:.4e}"),
    ))
}

/// Which sign the drift term carries on the right of the variational inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftSign {
    /// `−∫∫ Z(γ̇) dΠ`, plans oriented from `ℋ_sμ` toward `ν`
    Minus,
    Plus,
}

/// Both sign readings of the variational inequality; `minus` is the one asserted.
#[derive(Clone, Debug, PartialEq)]
pub struct EviReport {
    pub minus: FlowVerdict,
    pub plus: FlowVerdict,
}

impl EviReport {
    pub fn reading(&self, sign: DriftSign) -> &FlowVerdict {
        match sign {
            DriftSign::Minus => &self.minus,
            DriftSign::Plus => &self.plus,
        }
    }
}

/// `∫∫₀¹ Z(γ̇_r) dr dΠ` for the optimal coupling from `from` to `to`.
pub fn plan_drift_integral(gen: &GeneratorMatrix, from: &Density1d, to: &Density1d) -> f64 {
    let h = gen.spacing();
    quantile_coupling(from, to)
        .iter()
        .map(|a| {
            let pieces = 1 + ((a.to - a.from).abs() / h) as usize;
            a.mass
                * composite_gauss(a.from, a.to, pieces, |x| {
                    drift_at(&gen.space, &gen.field, x)
                })
        })
        .sum()
}

/// Step of the centered `s`-derivative: the smallest gap between tested times.
pub fn evi_step(times: &[f64]) -> f64 {
    let t = sorted_unique(times.iter().copied());
    let mut step = t.first().copied().unwrap_or(1.0);
    for w in t.windows(2) {
        step = step.min(w[1] - w[0]);
    }
    step
}

/// `½ d/ds W₂²(ℋ_sμ, ν) + (K/2) W₂²(ℋ_sμ, ν) ≤ ∓∫∫ Z(γ̇) dΠˢ + Ent(ν) − Ent(ℋ_sμ)`
/// at each tested `s > 0`, with both drift signs reported.
///
/// `d/ds` is a centered difference with step `step`, one-sided (second order,
/// forward) where `s < step`.
pub fn evi_check(
    gen: &GeneratorMatrix,
    mu: &Density1d,
    nu: &Density1d,
    k: f64,
    times: &[f64],
    step: f64,
) -> Result<EviReport, SemigroupError> {
    check_density(gen, mu)?;
    check_density(gen, nu)?;
    if !(step > 0.0) || times.iter().any(|&s| !(s > 0.0)) {
        return Err(SemigroupError::InvalidParameter(
            "EVI needs positive times and step".into(),
        ));
    }
    let stencil = |s: f64| -> Vec<(f64, f64)> {
        if s >= step {
            vec![(s - step, -0.5 / step), (s + step, 0.5 / step)]
        } else {
            vec![
                (s, -1.5 / step),
                (s + step, 2.0 / step),
                (s + 2.0 * step, -0.5 / step),
            ]
        }
    };
    let all = times
        .iter()
        .flat_map(|&s| stencil(s).into_iter().map(|p| p.0).chain([s]));
    let table = densities_at(gen, mu, &sorted_unique(all))?;
    let ent_nu = nu.entropy();
    let rows: Vec<(FlowRow, FlowRow)> = times
        .iter()
        .map(|&s| {
            let rho = lookup(&table, s);
            let w2 = w2_squared_1d(rho, nu);
            let dw2: f64 = stencil(s)
                .iter()
                .map(|&(t, c)| c * w2_squared_1d(lookup(&table, t), nu))
                .sum();
            let lhs = 0.5 * dw2 + 0.5 * k * w2;
            let drift = plan_drift_integral(gen, rho, nu);
            let gap = ent_nu - rho.entropy();
            let scale = 1.0 + lhs.abs() + drift.abs() + gap.abs();
            let row = |bound: f64| FlowRow {
                t: s,
                value: lhs,
                bound,
                margin: (bound - lhs) / scale,
            };
            (row(gap - drift), row(gap + drift))
        })
        .collect();
    let note = format!("ds = {step}");
    let (minus, plus): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(EviReport {
        minus: FlowVerdict::new("evi", k, minus, FLOW_TOL, note.clone()),
        plus: FlowVerdict::new("evi (plus reading)", k, plus, FLOW_TOL, note),
    })
}

/// `∫ |∇log ρ − Z|² ρ` on cell edges: geometric-mean edge densities, the
/// drift averaged over each edge's segment.
pub fn kinetic_bound(gen: &GeneratorMatrix, rho: &Density1d) -> f64 {
    let m = gen.cells();
    let h = gen.spacing();
    let edges = if gen.grid.periodic { m } else { m - 1 };
    (0..edges)
        .map(|i| {
            let j = (i + 1) % m;
            let (a, b) = (rho.density(i), rho.density(j));
            if a <= 0.0 || b <= 0.0 {
                return 0.0;
            }
            let x = gen.grid.center(i);
            let z = gauss_legendre(x, x + h, |y| drift_at(&gen.space, &gen.field, y)) / h;
            let v = (b.ln() - a.ln()) / h - z;
            h * (a * b).sqrt() * v * v
        })
        .sum()
}

/// `W₂(ℋ_tμ, ℋ_{t+δ}μ)²/δ² ≤ ∫|∇log ρ_t − Z|² dℋ_tμ` for `δ ∈ {4h², 2h², h²}`,
/// one row per `(t, δ)`, margins relative to `1 + rhs`.
pub fn kuwada_speed_check(
    gen: &GeneratorMatrix,
    mu: &Density1d,
    times: &[f64],
) -> Result<FlowVerdict, SemigroupError> {
    check_density(gen, mu)?;
    let h2 = gen.spacing().powi(2);
    let deltas = [4.0 * h2, 2.0 * h2, h2];
    let all = times
        .iter()
        .flat_map(|&t| deltas.iter().map(move |d| t + d).chain([t]));
    let table = densities_at(gen, mu, &sorted_unique(all))?;
    let mut rows = Vec::new();
    for &t in times {
        let rho = lookup(&table, t);
        let rhs = kinetic_bound(gen, rho);
        for d in deltas {
            let speed_sq = w2_squared_1d(rho, lookup(&table, t + d)) / (d * d);
            rows.push(FlowRow {
                t,
                value: speed_sq,
                bound: rhs,
                margin: (rhs - speed_sq) / (1.0 + rhs),
            });
        }
    }
    Ok(FlowVerdict::new(
        "kuwada",
        0.0,
        rows,
        FLOW_TOL,
        "steps 4h^2, 2h^2, h^2".into(),
    ))
}

/// Squared edge gradients averaged onto cells.
pub fn grad_sq(grid: &Grid1d, f: &[f64]) -> Vec<f64> {
    let m = grid.cells;
    let h = grid.spacing();
    let edge = |i: usize| ((f[(i + 1) % m] - f[i]) / h).powi(2);
    (0..m)
        .map(|i| {
            let mut s = Vec::with_capacity(2);
            if grid.periodic || i > 0 {
                s.push(edge((i + m - 1) % m));
            }
            if grid.periodic || i + 1 < m {
                s.push(edge(i));
            }
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

/// `|∇P_t f|² ≤ e^{−2Kt} P_t|∇f|²` cellwise, margin relative to
/// `sup P_t|∇f|²`, with tolerance `h`.
pub fn gradient_estimate_check(
    gen: &GeneratorMatrix,
    f: &[f64],
    k: f64,
    times: &[f64],
) -> Result<FlowVerdict, SemigroupError> {
    if f.len() != gen.cells() {
        return Err(SemigroupError::GridMismatch {
            expected: gen.cells(),
            got: f.len(),
        });
    }
    let times_u = sorted_unique(times.iter().copied());
    let g2 = grad_sq(&gen.grid, f);
    let pf = evolve_many(gen, &FlowState::from_function(f.to_vec()), &times_u, false)?;
    let pg = evolve_many(gen, &FlowState::from_function(g2), &times_u, false)?;
    let rows = times
        .iter()
        .map(|&t| {
            let idx = times_u
                .iter()
                .position(|&s| s == t)
                .expect("time evaluated");
            let lhs = grad_sq(&gen.grid, &pf[idx].values);
            let decay = (-2.0 * k * t).exp();
            let rhs: Vec<f64> = pg[idx].values.iter().map(|v| decay * v).collect();
            let sup = rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let scale = if sup > 0.0 { sup } else { 1.0 };
            let (mut value, mut bound, mut margin) = (0.0, 0.0, f64::INFINITY);
            for (l, r) in lhs.iter().zip(&rhs) {
                let mg = (r - l) / scale;
                if mg < margin {
                    (value, bound, margin) = (*l, *r, mg);
                }
            }
            FlowRow {
                t,
                value,
                bound,
                margin,
            }
        })
        .collect();
    Ok(FlowVerdict::new(
        "gradient estimate",
        k,
        rows,
        gen.spacing(),
        String::new(),
    ))
}

/// Splits every cell mass evenly between two half cells.
pub fn refine_density(mu: &Density1d) -> Density1d {
    let grid = mu.grid.with_cells(2 * mu.grid.cells);
    let mass = mu.mass.iter().flat_map(|&m| [0.5 * m, 0.5 * m]).collect();
    Density1d::from_masses(grid, mass)
}

/// Grid error estimate of the coarse margins from a run on twice as many
/// cells: twice the largest margin change, the first-order Richardson bound.
pub fn richardson_slack(coarse: &FlowVerdict, fine: &FlowVerdict) -> f64 {
    coarse
        .rows
        .iter()
        .zip(&fine.rows)
        .map(|(c, f)| 2.0 * (c.margin - f.margin).abs())
        .fold(0.0, f64::max)
}

/// The fine run's observed slack is at most half the coarse one's.
pub fn richardson_consistent(coarse: &FlowVerdict, fine: &FlowVerdict) -> bool {
    fine.observed_slack() <= 0.5 * coarse.observed_slack() + 1e-12
}
