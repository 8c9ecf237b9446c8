//! Executes the checks of a scenario and collects verdicts and curves.

use std::f64::consts::PI;
use std::panic::AssertUnwindSafe;

use cdcert::cdcheck::{
    check_cd_entropic, check_cd_finite, check_cd_inf, check_jacobi_ode, check_pointwise,
    counterexample_scan, CdVerdict, Instance, LineInstance,
};
use cdcert::comparison::{
    bishop_gromov_all, bishop_gromov_check, bonnet_myers_check, packing_ratios, polar_limit,
    volume_profile, ComparisonVerdict, COMPARISON_TOL, DEFAULT_RAYS,
};
use cdcert::fields::lower_bound_scan;
use cdcert::geometry::{sphere_point, SpaceKind};
use cdcert::semigroup::{
    build_generator, contraction_check, evi_check, evi_step, gradient_estimate_check,
    kuwada_speed_check, FlowVerdict, GeneratorMatrix,
};
use cdcert::warped::{sphere_example, warped_ricci_check, WarpedError, WARPED_TOL};
use cdcert::{Density1d, Dimension, FieldSpec, Grid1d, ModelSpace, Vec3};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::registry::{self, CheckInfo};
use crate::scenario::{CheckSpec, Scenario};

/// Slack for the Bakry-Emery scan.
pub const SCAN_TOL: f64 = 1e-9;
const DEFAULT_TIMES: [f64; 4] = [0.1, 0.2, 0.5, 1.0];

/// One CSV curve: rows of `(t, value, bound, margin)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub rows: Vec<[f64; 4]>,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub index: usize,
    pub info: &'static CheckInfo,
    pub asserted: bool,
    /// `Err` carries the reason a check could not be evaluated
    pub result: Result<Verdict, String>,
}

#[derive(Clone, Debug, Default)]
pub struct Verdict {
    pub passed: bool,
    pub margin: f64,
    pub summary: String,
    pub details: Vec<String>,
    pub witnesses: Vec<String>,
    pub curves: Vec<Curve>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        matches!(&self.result, Ok(v) if v.passed)
    }
}

/// Runs every check in parallel and returns outcomes ordered by check name,
/// then by position in the file.
pub fn run_checks(scenario: &Scenario, seed: u64, tolerance_scale: f64) -> Vec<CheckOutcome> {
    let space = scenario.space();
    let field = scenario.field();
    let mut out: Vec<CheckOutcome> = scenario
        .checks
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let info = registry::lookup(&spec.name).expect("validated check name");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let ctx = Ctx {
                scenario,
                space: &space,
                field: &field,
                scale: tolerance_scale,
            };
            let result =
                std::panic::catch_unwind(AssertUnwindSafe(|| ctx.run(info, spec, &mut rng)))
                    .unwrap_or_else(|p| Err(format!("internal error: {}", panic_text(&p))));
            CheckOutcome {
                index,
                info,
                asserted: spec.assert,
                result,
            }
        })
        .collect();
    out.sort_by(|a, b| a.info.name.cmp(b.info.name).then(a.index.cmp(&b.index)));
    out
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_default()
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    space: &'a ModelSpace,
    field: &'a FieldSpec,
    scale: f64,
}

fn dim(spec: &CheckSpec) -> Dimension {
    spec.resolved_n()
        .ok()
        .flatten()
        .unwrap_or(Dimension::Infinite)
}

fn finite_n(spec: &CheckSpec) -> f64 {
    dim(spec).finite().expect("validated finite N")
}

fn fmt_dim(n: Dimension) -> String {
    match n {
        Dimension::Finite(v) => format!("{v}"),
        Dimension::Infinite => "inf".into(),
    }
}

fn fmt_times(ts: &[f64]) -> String {
    ts.iter()
        .map(|t| format!("{t}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Ctx<'_> {
    fn run(
        &self,
        info: &CheckInfo,
        spec: &CheckSpec,
        rng: &mut ChaCha8Rng,
    ) -> Result<Verdict, String> {
        match info.name {
            "bakry-emery" => self.bakry_emery(spec),
            "bishop-gromov" => self.bishop_gromov(spec, rng),
            "bonnet-myers" => self.bonnet_myers(spec),
            "cd-entropic" | "cd-inf" | "cd-star" | "pointwise" => {
                self.transport(info.name, spec, rng)
            }
            "contraction" | "evi" | "gradient-estimate" | "kuwada" => {
                self.flow(info.name, spec, rng)
            }
            "counterexample" => self.counterexample(spec),
            "jacobi" => self.jacobi(spec, rng),
            "packing" => self.packing(spec),
            "warped-sphere" => self.warped_sphere(spec),
            other => Err(format!("no runner for {other}")),
        }
    }

    fn cd_passes(&self, v: &CdVerdict) -> bool {
        !v.infinity_mismatch && v.margin >= -v.tolerance * self.scale
    }

    fn comparison_passes(&self, v: &ComparisonVerdict) -> bool {
        v.margin >= -v.tolerance * self.scale
    }

    fn flow_failures(&self, v: &FlowVerdict) -> Vec<f64> {
        v.rows
            .iter()
            .filter(|r| !(r.margin >= -v.tolerance * self.scale))
            .map(|r| r.t)
            .collect()
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match self.space.kind() {
            SpaceKind::Interval { lo, hi } => {
                Vec3::new(lo + (hi - lo) * rng.random::<f64>(), 0.0, 0.0)
            }
            SpaceKind::Circle { circumference } => {
                Vec3::new(circumference * rng.random::<f64>(), 0.0, 0.0)
            }
            SpaceKind::Sphere2 { radius } => {
                let polar = (1.0 - 2.0 * rng.random::<f64>()).acos();
                sphere_point(*radius, polar, 2.0 * PI * rng.random::<f64>())
            }
            SpaceKind::FlatTorus2 { lx, ly } => {
                Vec3::new(lx * rng.random::<f64>(), ly * rng.random::<f64>(), 0.0)
            }
            _ => Vec3::zeros(),
        }
    }

    /// A bump of random centre and half-width between a tenth and a fifth of the length.
    fn random_bump(&self, grid: &Grid1d, rng: &mut ChaCha8Rng) -> Density1d {
        let w = grid.length() * (0.1 + 0.1 * rng.random::<f64>());
        Density1d::bump(grid.clone(), self.random_center(grid, w, rng), w)
    }

    fn random_center(&self, grid: &Grid1d, w: f64, rng: &mut ChaCha8Rng) -> f64 {
        let len = grid.length();
        if grid.periodic {
            grid.lo + len * rng.random::<f64>()
        } else {
            grid.lo + w + (len - 2.0 * w) * rng.random::<f64>()
        }
    }

    /// Two bumps of one random width: translates, the extremal pairs for contraction.
    ///
    /// On a circle the shift plus the support stays below `0.4 L`, where the
    /// rotation is still the optimal coupling.
    fn random_translates(&self, grid: &Grid1d, rng: &mut ChaCha8Rng) -> (Density1d, Density1d) {
        let len = grid.length();
        let w = len * (0.05 + 0.05 * rng.random::<f64>());
        let a = self.random_center(grid, w, rng);
        let b = if grid.periodic {
            a + len * (0.1 + 0.1 * rng.random::<f64>())
        } else {
            let mut b = self.random_center(grid, w, rng);
            // keep the pair apart so that the distance is not negligible
            for _ in 0..16 {
                if (b - a).abs() >= 0.1 * len {
                    break;
                }
                b = self.random_center(grid, w, rng);
            }
            b
        };
        (
            Density1d::bump(grid.clone(), a, w),
            Density1d::bump(grid.clone(), b, w),
        )
    }

    fn bakry_emery(&self, spec: &CheckSpec) -> Result<Verdict, String> {
        let n = dim(spec);
        let report = lower_bound_scan(self.space, self.field, n, spec.points.unwrap_or(64), 8);
        let passed = report.certifies(spec.k, SCAN_TOL * self.scale);
        let inf = match report.inf_estimate.finite() {
            Some(v) => format!("{v:.9}"),
            None => "-inf".into(),
        };
        let margin = report
            .inf_estimate
            .finite()
            .map_or(f64::NEG_INFINITY, |v| v - spec.k);
        let mut v = Verdict {
            passed,
            margin,
            summary: format!(
                "ric^{} >= {} over {} samples: scanned inf {inf}",
                fmt_dim(n),
                spec.k,
                report.samples.len()
            ),
            ..Default::default()
        };
        if !passed {
            v.witnesses.push(format!(
                "point {:?}, direction {:?}",
                report.worst_point.as_slice(),
                report.worst_direction.as_slice()
            ));
        }
        Ok(v)
    }

    fn bishop_gromov(&self, spec: &CheckSpec, rng: &mut ChaCha8Rng) -> Result<Verdict, String> {
        let n = finite_n(spec);
        let limit = default_radius_limit(self.space);
        let radii = spec
            .radii
            .clone()
            .unwrap_or_else(|| (1..=12).map(|i| limit * i as f64 / 12.0).collect());
        let x0 = match &spec.center {
            Some(c) => Vec3::from_iterator(c.iter().cloned().chain(std::iter::repeat(0.0)).take(3)),
            None => self.random_point(rng),
        };
        let profile = volume_profile(self.space, self.field, &x0, &radii, DEFAULT_RAYS)
            .map_err(|e| e.to_string())?;
        let worst = bishop_gromov_all(&profile, spec.k, n).map_err(|e| e.to_string())?;
        let passed = worst.iter().all(|w| self.comparison_passes(w));
        let margin = worst.iter().map(|w| w.margin).fold(f64::INFINITY, f64::min);
        let mut v = Verdict {
            passed,
            margin: if margin.is_finite() { margin } else { 0.0 },
            summary: format!(
                "K = {}, N = {n}, {} radii around {:?}",
                spec.k,
                radii.len(),
                x0.as_slice()
            ),
            ..Default::default()
        };
        for w in &worst {
            v.details.push(w.to_string());
            if !self.comparison_passes(w) {
                v.witnesses.push(w.note.clone());
            }
        }
        // ratios against the largest admissible radius
        let admissible: Vec<f64> = radii
            .iter()
            .cloned()
            .filter(|&r| spec.k <= 0.0 || r <= PI * ((n - 1.0) / spec.k).sqrt() * (1.0 + 1e-12))
            .collect();
        if let Some(&big) = admissible.last() {
            let mut sphere = Curve {
                label: "sphere-ratio".into(),
                rows: Vec::new(),
            };
            let mut ball = Curve {
                label: "ball-ratio".into(),
                rows: Vec::new(),
            };
            for &r in &admissible[..admissible.len() - 1] {
                for c in
                    bishop_gromov_check(&profile, spec.k, n, r, big).map_err(|e| e.to_string())?
                {
                    let row = [r, c.lhs, c.rhs, c.margin];
                    if c.name == "ball ratio" {
                        ball.rows.push(row);
                    } else {
                        sphere.rows.push(row);
                    }
                }
            }
            let volume = Curve {
                label: "profile".into(),
                rows: profile
                    .radii
                    .iter()
                    .zip(&profile.v)
                    .zip(&profile.s)
                    .map(|((&r, &vol), &s)| [r, vol, s, 0.0])
                    .collect(),
            };
            v.curves.push(volume);
            v.curves.push(ball);
            if !sphere.rows.is_empty() {
                v.curves.push(sphere);
            }
        }
        Ok(v)
    }

    fn bonnet_myers(&self, spec: &CheckSpec) -> Result<Verdict, String> {
        let n = finite_n(spec);
        let c = bonnet_myers_check(self.space, self.field, spec.k, n).map_err(|e| e.to_string())?;
        let passed = self.comparison_passes(&c) || !c.hypothesis_met;
        Ok(Verdict {
            passed,
            margin: c.margin,
            summary: format!(
                "diameter {:.10} against pi*sqrt((N-1)/K) = {:.10}",
                c.lhs, c.rhs
            ),
            details: vec![
                c.to_string(),
                if c.hypothesis_met {
                    "hypothesis certified by the scan".into()
                } else {
                    "hypothesis unmet: vacuous pass".into()
                },
            ],
            witnesses: if passed { vec![] } else { vec![c.note.clone()] },
            curves: vec![],
        })
    }

    fn transport(
        &self,
        name: &str,
        spec: &CheckSpec,
        rng: &mut ChaCha8Rng,
    ) -> Result<Verdict, String> {
        let grid = Grid1d::for_space(self.space, spec.cells.unwrap_or(120))
            .ok_or("not a one-dimensional model")?;
        let steps = spec.steps.unwrap_or(21);
        let n = dim(spec);
        let mut v = Verdict {
            passed: true,
            margin: f64::INFINITY,
            ..Default::default()
        };
        let pairs = spec.pairs.unwrap_or(4);
        let mut reading = None;
        for j in 0..pairs {
            let mu0 = self.random_bump(&grid, rng);
            let mu1 = self.random_bump(&grid, rng);
            let line = LineInstance::new(self.space.clone(), self.field.clone(), mu0, mu1);
            let (plan, path) = line.displacement(steps).map_err(|e| e.to_string())?;
            let inst = Instance::new(self.space, self.field, &plan, &path, None)
                .map_err(|e| e.to_string())?;
            let verdict = match name {
                "cd-inf" => check_cd_inf(&inst, spec.k),
                "cd-star" => check_cd_finite(&inst, spec.k, n, true).map_err(|e| e.to_string())?,
                "cd-entropic" => check_cd_entropic(&inst, spec.k, n).map_err(|e| e.to_string())?,
                _ => check_pointwise(&inst, spec.k, n, false).map_err(|e| e.to_string())?,
            };
            reading = Some(verdict.reading);
            let ok = self.cd_passes(&verdict);
            v.passed &= ok;
            v.margin = v.margin.min(verdict.signed_margin());
            v.details.push(format!("pair {j}: {verdict}"));
            if !ok {
                for w in verdict
                    .witnesses
                    .iter()
                    .filter(|w| w.margin.is_none_or(|m| m < -verdict.tolerance * self.scale))
                {
                    v.witnesses.push(format!(
                        "pair {j}, t = {}, {} margin {:?}",
                        w.t, w.label, w.margin
                    ));
                }
            }
            if name == "cd-inf" {
                let g = inst.free_energy();
                let ts = inst.times();
                let w2 = inst.w2_squared();
                let last = ts.len() - 1;
                let rows = ts
                    .iter()
                    .zip(&g)
                    .map(|(&t, &gt)| {
                        let bound =
                            (1.0 - t) * g[0] + t * g[last] - 0.5 * spec.k * t * (1.0 - t) * w2;
                        [t, gt, bound, (bound - gt) / (1.0 + gt.abs())]
                    })
                    .collect();
                v.curves.push(Curve {
                    label: format!("entropy-pair{j}"),
                    rows,
                });
            }
        }
        v.summary = format!(
            "K = {}, N = {}, {pairs} random bump pairs, {steps} times each",
            spec.k,
            fmt_dim(n)
        );
        if let Some(r) = reading {
            v.details.push(format!("coefficient reading: {r}"));
        }
        Ok(v)
    }

    fn flow(&self, name: &str, spec: &CheckSpec, rng: &mut ChaCha8Rng) -> Result<Verdict, String> {
        let gen: GeneratorMatrix =
            build_generator(self.space, self.field, spec.cells.unwrap_or(256))
                .map_err(|e| e.to_string())?;
        let times = spec.times.clone().unwrap_or_else(|| DEFAULT_TIMES.to_vec());
        let pairs = spec.pairs.unwrap_or(2);
        let mut v = Verdict {
            passed: true,
            margin: f64::INFINITY,
            ..Default::default()
        };
        let judge = |v: &mut Verdict, label: String, fv: &FlowVerdict, asserted: bool| {
            let failing = self.flow_failures(fv);
            if asserted {
                v.passed &= failing.is_empty();
                v.margin = v.margin.min(fv.min_margin());
                if !failing.is_empty() {
                    v.witnesses
                        .push(format!("{label}: t = {}", fmt_times(&failing)));
                }
            }
            v.details.push(format!("{label}: {fv}"));
            v.curves.push(Curve {
                label,
                rows: fv
                    .rows
                    .iter()
                    .map(|r| [r.t, r.value, r.bound, r.margin])
                    .collect(),
            });
        };
        for j in 0..pairs {
            let (mu, nu) = if j % 2 == 1 {
                self.random_translates(&gen.grid, rng)
            } else {
                (
                    self.random_bump(&gen.grid, rng),
                    self.random_bump(&gen.grid, rng),
                )
            };
            match name {
                "contraction" => {
                    let fv = contraction_check(&gen, &mu, &nu, spec.k, &times)
                        .map_err(|e| e.to_string())?;
                    judge(&mut v, format!("w2-pair{j}"), &fv, true);
                }
                "evi" => {
                    let rep = evi_check(&gen, &mu, &nu, spec.k, &times, evi_step(&times))
                        .map_err(|e| e.to_string())?;
                    judge(&mut v, format!("evi-minus-pair{j}"), &rep.minus, true);
                    judge(&mut v, format!("evi-plus-pair{j}"), &rep.plus, false);
                }
                "kuwada" => {
                    let fv = kuwada_speed_check(&gen, &mu, &times).map_err(|e| e.to_string())?;
                    judge(&mut v, format!("speed-pair{j}"), &fv, true);
                }
                _ => {
                    let f = self.random_test_function(&gen.grid, rng);
                    let fv = gradient_estimate_check(&gen, &f, spec.k, &times)
                        .map_err(|e| e.to_string())?;
                    judge(&mut v, format!("gradient-fn{j}"), &fv, true);
                }
            }
        }
        v.summary = format!(
            "K = {}, {} cells, {pairs} random instances, times {}",
            spec.k,
            gen.cells(),
            fmt_times(&times)
        );
        if name == "evi" {
            v.details.push(
                "drift reading: the minus reading is asserted, the plus reading is reported only"
                    .into(),
            );
        }
        Ok(v)
    }

    /// `Σ a_j sin(2πj(x − lo)/L + φ_j)` for `j = 1, 2, 3`.
    fn random_test_function(&self, grid: &Grid1d, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let coeffs: Vec<(f64, f64)> = (0..3)
            .map(|_| {
                (
                    2.0 * rng.random::<f64>() - 1.0,
                    2.0 * PI * rng.random::<f64>(),
                )
            })
            .collect();
        grid.centers()
            .iter()
            .map(|&x| {
                let s = 2.0 * PI * (x - grid.lo) / grid.length();
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, (a, ph))| a * ((j + 1) as f64 * s + ph).sin())
                    .sum()
            })
            .collect()
    }

    fn counterexample(&self, spec: &CheckSpec) -> Result<Verdict, String> {
        let n = dim(spec);
        let rep = counterexample_scan(
            self.space,
            self.field,
            spec.k,
            n,
            spec.trials.unwrap_or(200),
        );
        let passed = self.cd_passes(&rep.verdict);
        let mut v = Verdict {
            passed,
            margin: rep.verdict.signed_margin(),
            summary: format!(
                "K = {}, N = {}, {} trials run",
                spec.k,
                fmt_dim(n),
                rep.trials_run
            ),
            details: vec![rep.verdict.to_string()],
            ..Default::default()
        };
        if !passed {
            if let Some((x, vel, lambda)) = rep.worst_trial {
                v.witnesses.push(format!(
                    "start {:?}, velocity {:?}, hessian {lambda}",
                    x.as_slice(),
                    vel.as_slice()
                ));
            }
        }
        Ok(v)
    }

    fn jacobi(&self, spec: &CheckSpec, rng: &mut ChaCha8Rng) -> Result<Verdict, String> {
        let n = dim(spec);
        let d = self.space.dim();
        let scale = match self.space.kind() {
            SpaceKind::Sphere2 { radius } => *radius,
            _ => 1.0,
        };
        let geodesics = spec.geodesics.unwrap_or(64);
        let inits = spec.inits.unwrap_or(8);
        let mut v = Verdict {
            passed: true,
            margin: f64::INFINITY,
            ..Default::default()
        };
        for g in 0..geodesics {
            let x = self.random_point(rng);
            let basis = self.space.tangent_basis(&x);
            let mut dir = Vec3::zeros();
            for b in &basis {
                dir += b * (2.0 * rng.random::<f64>() - 1.0);
            }
            if self.space.norm(&x, &dir) < 1e-3 {
                dir = basis[0];
            }
            let theta = scale * (0.2 + 0.8 * rng.random::<f64>());
            let vel = dir * (theta / self.space.norm(&x, &dir));
            let geo = self
                .space
                .geodesic_shoot(&x, &vel, 512)
                .map_err(|e| e.to_string())?;
            for i in 0..inits {
                let mut a0p = DMatrix::zeros(d, d);
                if i > 0 {
                    for r in 0..d {
                        for c in r..d {
                            let e = 0.4 * rng.random::<f64>() - 0.2;
                            a0p[(r, c)] = e;
                            a0p[(c, r)] = e;
                        }
                    }
                }
                let verdict = check_jacobi_ode(
                    self.space,
                    &geo,
                    self.field,
                    spec.k,
                    n,
                    &DMatrix::identity(d, d),
                    &a0p,
                )
                .map_err(|e| e.to_string())?;
                let ok = self.cd_passes(&verdict);
                v.passed &= ok;
                v.margin = v.margin.min(verdict.signed_margin());
                if !ok && v.witnesses.len() < 8 {
                    let t = verdict.witnesses.first().map_or(f64::NAN, |w| w.t);
                    v.witnesses.push(format!(
                        "geodesic {g} from {:?}, speed {theta:.4}, initial condition {i}, t = {t}",
                        x.as_slice()
                    ));
                }
            }
        }
        v.summary = format!("K = {}, N = {}, {geodesics} geodesics x {inits} initial conditions, worst margin {:+.3e}", spec.k, fmt_dim(n), v.margin);
        Ok(v)
    }

    fn packing(&self, spec: &CheckSpec) -> Result<Verdict, String> {
        let eps = spec.eps.clone().unwrap_or_else(|| vec![0.2, 0.5]);
        let r = packing_ratios(self.space, self.field, &eps).map_err(|e| e.to_string())?;
        let passed = r.ratio <= r.envelope * (1.0 + COMPARISON_TOL * self.scale);
        let mut v = Verdict {
            passed,
            margin: (r.envelope - r.ratio) / (1.0 + r.ratio),
            summary: format!(
                "packing ratio {:.6} against envelope {:.6}",
                r.ratio, r.envelope
            ),
            ..Default::default()
        };
        for (e, count, vol) in &r.per_eps {
            v.details
                .push(format!("eps {e}: {count} balls, volume {vol:.6}"));
        }
        Ok(v)
    }

    fn warped_sphere(&self, spec: &CheckSpec) -> Result<Verdict, String> {
        let n = finite_n(spec);
        let alpha = self.scenario.rotation_alpha().unwrap_or(0.0);
        let points = spec.points.unwrap_or(64);
        let ex = sphere_example(n, alpha, None, points).map_err(|e| e.to_string())?;
        let mut v = Verdict {
            summary: format!(
                "N = {n}, alpha = {alpha}, kappa = {:.9}, K_F = {}, base K = {}",
                ex.kappa, ex.k_fiber, spec.k
            ),
            ..Default::default()
        };
        let warped = if spec.k == 1.0 {
            Ok(ex.warped.clone())
        } else {
            warped_ricci_check(&ex.spec, spec.k, ex.k_fiber, points)
        };
        let warped = match warped {
            Ok(w) => w,
            Err(WarpedError::ConditionViolated {
                condition,
                r,
                residual,
            }) => {
                v.passed = false;
                v.margin = -residual;
                v.witnesses.push(format!(
                    "{condition} fails at r = {r}, residual {residual:.3e}"
                ));
                return Ok(v);
            }
            Err(e) => return Err(e.to_string()),
        };
        let diameter = if spec.k == 1.0 {
            ex.diameter.clone()
        } else {
            bonnet_myers_check(&ex.bundle.space, &ex.bundle.effective, n * spec.k, n + 1.0)
                .map_err(|e| e.to_string())?
        };
        let fiber_ok = ex.fiber_inf >= 0.5 - SCAN_TOL * self.scale;
        let warped_ok = warped.fiber_hypothesis && warped.margin >= -WARPED_TOL * self.scale;
        let diameter_ok = diameter.hypothesis_met && self.comparison_passes(&diameter);
        v.passed = fiber_ok && warped_ok && diameter_ok;
        v.margin = warped.margin.min(diameter.margin);
        v.details
            .push(format!("fiber scan inf {:.9} against 1/2", ex.fiber_inf));
        for c in &warped.conditions {
            v.details.push(format!(
                "{}: worst residual {:.3e} at r = {:.4}",
                c.condition, c.residual, c.worst_r
            ));
        }
        v.details.push(format!(
            "zero-set reading of the gradient condition holds: {}",
            warped.alternative_reading
        ));
        v.details.push(warped.to_string());
        v.details.push(diameter.to_string());
        if !warped_ok {
            v.witnesses.push(format!(
                "point {:?}, direction {:?}",
                warped.worst_sample.0.as_slice(),
                warped.worst_sample.1.as_slice()
            ));
        }
        if !fiber_ok {
            v.witnesses.push("fiber Ricci bound below 1/2".into());
        }
        if !diameter_ok {
            v.witnesses.push(diameter.note.clone());
        }
        Ok(v)
    }
}

/// Largest default radius: the polar limit, or the length of an interval.
pub fn default_radius_limit(space: &ModelSpace) -> f64 {
    match polar_limit(space) {
        Ok(Some(l)) => l,
        _ => match space.kind() {
            SpaceKind::Interval { lo, hi } => hi - lo,
            _ => 1.0,
        },
    }
}
