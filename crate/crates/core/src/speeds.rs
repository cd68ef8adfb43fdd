//! Spreading speeds, hypothesis verification, linear-determinacy machinery,
//! and the Weinberger recursion bracket.

use serde::Serialize;

use crate::dynamics::{LineDomain, LineKernel, Pad, SimCoeffs};
use crate::eigen::{assemble, principal_eigen, CurveSample, Direction};
use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicField};
use crate::habitat::Habitat;
use crate::kernel::Kernel;
use crate::steady::{persistence_eigenvalue, scalar_steady_state};

/// Refinement tolerance for the speed minimizer in mu.
pub const SPEED_MU_TOL: f64 = 1e-8;
/// Hypothesis margins inside this band are reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-8;
/// Interior-attractor refutation search: random starts and iteration budget.
pub const COEXISTENCE_SEEDS: u64 = 32;
pub const COEXISTENCE_STEPS: usize = 5000;
/// Boundary-collapse tolerance for the refutation search.
pub const COEXISTENCE_TOL: f64 = 1e-6;
/// Recursion-bracket edge thresholds: "near beta" is within 5% in relative
/// sup norm on the probe window, "near zero" is below 1e-4 of max beta.
pub const BETA_EDGE_REL: f64 = 0.05;
pub const ZERO_EDGE_REL: f64 = 1e-4;
pub const RECURSION_MAX_ITERS: usize = 20_000;
/// Bisection width for the speed bracket.
pub const BRACKET_WIDTH: f64 = 1e-2;

const COARSE_SAMPLES: usize = 64;
const MU_SCAN_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMethod {
    ClosedForm,
    GoldenSection,
    RecursionBracket,
}

/// Spreading speed together with the sampled objective curve.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedReport {
    pub c: f64,
    pub mu0: f64,
    pub curve: Vec<CurveSample>,
    pub method: SpeedMethod,
}

/// Golden-section minimization of a unimodal objective on [a, b].
fn golden_min(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Rightward (or leftward) linear spreading speed
/// `c = inf over mu > 0 of ln lambda(mu) / mu` for the growth multiplier `m`.
///
/// Constant multipliers use the analytic moment generating function, which
/// sidesteps the first-order quadrature error at a Laplace kernel's corner;
/// spatially varying multipliers minimize over eigensolves.
pub fn spreading_speed(
    m: &PeriodicField,
    kernel: &Kernel,
    grid: &Grid,
    direction: Direction,
) -> Result<SpeedReport> {
    let lambda_at_zero = persistence_eigenvalue(m, kernel, grid)?;
    if lambda_at_zero <= 1.0 {
        return Err(Error::NoSpeed(format!(
            "lambda(0) = {lambda_at_zero:.6} <= 1: the speed quotient has no positive infimum"
        )));
    }
    let constant =
        if m.max() - m.min() <= 1e-12 * m.max().abs() { Some(m.max()) } else { None };
    let method = if constant.is_some() { SpeedMethod::ClosedForm } else { SpeedMethod::GoldenSection };
    let lambda_of = |mu: f64| -> Result<f64> {
        match constant {
            Some(mval) => Ok(mval * kernel.mgf(direction.signed(mu))?),
            None => Ok(principal_eigen(&assemble(m, kernel, grid, mu, direction)?)?.lambda),
        }
    };
    let mut g = |mu: f64| -> Result<f64> { Ok(lambda_of(mu)?.ln() / mu) };

    let abscissa = kernel.abscissa();
    let mu_hi = if abscissa.is_finite() {
        0.999 * abscissa
    } else {
        // Expand until the objective turns upward.
        let mut hi = 1.0;
        let mut prev = g(hi)?;
        loop {
            let next = g(2.0 * hi)?;
            hi *= 2.0;
            if next > prev {
                break;
            }
            prev = next;
            if hi > 1e9 {
                return Err(Error::Unbounded(
                    "speed objective still decreasing at mu = 1e9; infimum not interior".into(),
                ));
            }
        }
        hi
    };

    let (lo_ln, hi_ln) = (MU_SCAN_MIN.ln(), mu_hi.ln());
    let mut curve = Vec::with_capacity(COARSE_SAMPLES);
    let mut best = (0usize, f64::INFINITY);
    for i in 0..COARSE_SAMPLES {
        let t = i as f64 / (COARSE_SAMPLES - 1) as f64;
        let mu = (lo_ln + t * (hi_ln - lo_ln)).exp();
        let lambda = lambda_of(mu)?;
        let gval = lambda.ln() / mu;
        if gval < best.1 {
            best = (i, gval);
        }
        curve.push(CurveSample { mu, lambda, log_lambda_over_mu: gval });
    }
    if best.0 == COARSE_SAMPLES - 1 && abscissa.is_finite() {
        return Err(Error::Unbounded(format!(
            "speed objective still decreasing at 0.999 of the abscissa {abscissa:.4}; \
             infimum sits at the abscissa"
        )));
    }
    let a = curve[best.0.saturating_sub(1)].mu;
    let b = curve[(best.0 + 1).min(COARSE_SAMPLES - 1)].mu;
    let mu0 = golden_min(&mut g, a, b, SPEED_MU_TOL)?;
    let c = g(mu0)?;
    Ok(SpeedReport { c, mu0, curve, method })
}

/// Everything the hypothesis and determinacy machinery needs: the habitat,
/// kernels, and both semi-trivial steady states on one period.
pub struct ModelContext {
    pub grid: Grid,
    pub habitat: Habitat,
    pub k1: Kernel,
    pub k2: Kernel,
    pub pstar: PeriodicField,
    pub qstar: PeriodicField,
    /// Persistence eigenvalues lambda(k_i, r_i).
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ModelContext {
    pub fn build(habitat: Habitat, k1: Kernel, k2: Kernel, grid: Grid) -> Result<Self> {
        let init1 = habitat.c1.map(|v| 0.5 * v);
        let init2 = habitat.c2.map(|v| 0.5 * v);
        let s1 = scalar_steady_state(&habitat.r1, &habitat.b1(), &k1, &grid, &init1)?;
        let s2 = scalar_steady_state(&habitat.r2, &habitat.b2(), &k2, &grid, &init2)?;
        Ok(ModelContext {
            pstar: s1.field(&grid),
            qstar: s2.field(&grid),
            lambda1: s1.lambda0(),
            lambda2: s2.lambda0(),
            grid,
            habitat,
            k1,
            k2,
        })
    }

    /// Multiplier of the scalar equation governing species 1 invading the
    /// resident state: `r1 / (1 + b1 a1 q*)`.
    pub fn invasion_multiplier(&self) -> PeriodicField {
        let b1 = self.habitat.b1();
        PeriodicField {
            length: self.grid.length,
            values: (0..self.grid.n)
                .map(|j| {
                    self.habitat.r1.values[j]
                        / (1.0
                            + b1.values[j] * self.habitat.a1.values[j] * self.qstar.values[j])
                })
                .collect(),
        }
    }

    fn field_from(&self, f: impl Fn(usize) -> f64) -> PeriodicField {
        PeriodicField {
            length: self.grid.length,
            values: (0..self.grid.n).map(f).collect(),
        }
    }

    /// `r2 / (1 + b2 q*)`, the resident-state linearization multiplier.
    pub fn resident_mult(&self) -> PeriodicField {
        let b2 = self.habitat.b2();
        self.field_from(|j| {
            self.habitat.r2.values[j] / (1.0 + b2.values[j] * self.qstar.values[j])
        })
    }

    /// `r2 / (1 + b2 q*)^2`, the second-component self-coupling multiplier.
    pub fn coupling_mult(&self) -> PeriodicField {
        let b2 = self.habitat.b2();
        self.field_from(|j| {
            let d = 1.0 + b2.values[j] * self.qstar.values[j];
            self.habitat.r2.values[j] / (d * d)
        })
    }

    /// `r2 b2 a2 q* / (1 + b2 q*)^2`, the cross-coupling multiplier feeding
    /// the first component into the second.
    pub fn cross_mult(&self) -> PeriodicField {
        let b2 = self.habitat.b2();
        self.field_from(|j| {
            let d = 1.0 + b2.values[j] * self.qstar.values[j];
            self.habitat.r2.values[j]
                * b2.values[j]
                * self.habitat.a2.values[j]
                * self.qstar.values[j]
                / (d * d)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Marginal,
}

fn verdict_of(margin: f64) -> Verdict {
    if margin.abs() < MARGINAL_BAND {
        Verdict::Marginal
    } else if margin > 0.0 {
        Verdict::Holds
    } else {
        Verdict::Fails
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub verdict: Verdict,
    pub margin: f64,
    pub detail: String,
}

impl HypothesisCheck {
    fn new(name: &'static str, margin: f64, detail: String) -> Self {
        HypothesisCheck { name, verdict: verdict_of(margin), margin, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn holds(&self, name: &str) -> bool {
        self.get(name).map(|c| c.verdict == Verdict::Holds).unwrap_or(false)
    }
}

/// One step of the full competitive map on a single period with periodized
/// kernels (whole-line dynamics of a periodic state).
fn periodic_competitive_step(
    ctx: &ModelContext,
    k10: &crate::linalg::Matrix,
    k20: &crate::linalg::Matrix,
    p: &[f64],
    q: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = ctx.grid.n;
    let h = ctx.grid.spacing();
    let b1 = ctx.habitat.b1();
    let b2 = ctx.habitat.b2();
    let g1: Vec<f64> = (0..n)
        .map(|j| {
            ctx.habitat.r1.values[j] * p[j]
                / (1.0 + b1.values[j] * (p[j] + ctx.habitat.a1.values[j] * q[j]))
        })
        .collect();
    let g2: Vec<f64> = (0..n)
        .map(|j| {
            ctx.habitat.r2.values[j] * q[j]
                / (1.0 + b2.values[j] * (q[j] + ctx.habitat.a2.values[j] * p[j]))
        })
        .collect();
    let apply = |k: &crate::linalg::Matrix, g: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| k.row(i).iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * h)
            .collect()
    };
    (apply(k10, &g1), apply(k20, &g2))
}

/// Search for an interior (coexistence) attractor from random periodic
/// starts. Returns the largest final interiority measure
/// `min(max p, max q)` over all seeds; a value below 1e-6 means every start
/// collapsed to a boundary state.
fn coexistence_search(ctx: &ModelContext) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let k10 = ctx.k1.periodize_weighted(&ctx.grid, 0.0)?;
    let k20 = ctx.k2.periodize_weighted(&ctx.grid, 0.0)?;
    let n = ctx.grid.n;
    let mut worst = 0.0_f64;
    for seed in 0..COEXISTENCE_SEEDS {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p: Vec<f64> =
            (0..n).map(|j| rng.gen_range(0.05..0.95) * ctx.habitat.c1.values[j]).collect();
        let mut q: Vec<f64> =
            (0..n).map(|j| rng.gen_range(0.05..0.95) * ctx.habitat.c2.values[j]).collect();
        for _ in 0..COEXISTENCE_STEPS {
            let (np, nq) = periodic_competitive_step(ctx, &k10, &k20, &p, &q);
            let diff = np
                .iter()
                .zip(&p)
                .chain(nq.iter().zip(&q))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            p = np;
            q = nq;
            if diff < 1e-14 {
                break;
            }
        }
        let pmax = p.iter().cloned().fold(0.0, f64::max);
        let qmax = q.iter().cloned().fold(0.0, f64::max);
        worst = worst.max(pmax.min(qmax));
    }
    Ok(worst)
}

/// Quadratic extrapolation of `(x_i, y_i)` to `x = 0` (Lagrange form).
fn extrapolate_to_zero(pts: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        let mut w = 1.0;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i != j {
                w *= (0.0 - xj) / (xi - xj);
            }
        }
        acc += w * yi;
    }
    acc
}

/// Evaluate the full hypothesis battery. Every sub-check produces a verdict
/// and a finite margin; nothing is propagated as an error.
pub fn check_hypotheses(ctx: &ModelContext) -> Result<HypothesisReport> {
    let mut checks = Vec::new();

    let h1_margin = (ctx.lambda1 - 1.0).min(ctx.lambda2 - 1.0);
    checks.push(HypothesisCheck::new(
        "H1",
        h1_margin,
        format!(
            "persistence eigenvalues lambda1 = {:.6}, lambda2 = {:.6}; both must exceed 1",
            ctx.lambda1, ctx.lambda2
        ),
    ));

    let invasion_mult = ctx.invasion_multiplier();
    let lambda_inv = persistence_eigenvalue(&invasion_mult, &ctx.k1, &ctx.grid)?;
    checks.push(HypothesisCheck::new(
        "H2",
        lambda_inv - 1.0,
        format!("invasion eigenvalue of species 1 against the resident: {lambda_inv:.6}"),
    ));

    let interiority = coexistence_search(ctx)?;
    checks.push(HypothesisCheck::new(
        "H3",
        COEXISTENCE_TOL - interiority,
        format!(
            "no-coexistence check is refutation-only: {COEXISTENCE_SEEDS} random periodic \
             starts iterated up to {COEXISTENCE_STEPS} steps; largest final interiority \
             min(max p, max q) = {interiority:.3e}; 'holds' means no interior attractor \
             was found, not a proof that none exists"
        ),
    ));

    let c1p = spreading_speed(&ctx.habitat.r1, &ctx.k1, &ctx.grid, Direction::Rightward);
    let c2m = spreading_speed(&ctx.habitat.r2, &ctx.k2, &ctx.grid, Direction::Leftward);
    match (&c1p, &c2m) {
        (Ok(a), Ok(b)) => checks.push(HypothesisCheck::new(
            "H4",
            a.c + b.c,
            format!("rightward c1+ = {:.6}, leftward c2- = {:.6}; sum must be positive", a.c, b.c),
        )),
        (a, b) => {
            let why = [a, b]
                .iter()
                .filter_map(|r| r.as_ref().err())
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            checks.push(HypothesisCheck::new(
                "H4",
                -1.0,
                format!("single-species speed unavailable: {why}"),
            ));
        }
    }

    // Limit of ln lambda2(mu)/mu as mu -> 0+, from three decades of mu with
    // quadratic extrapolation, compared to the invasion speed c1+.
    let resident = ctx.resident_mult();
    let mut pts = Vec::new();
    for &mu in &[1e-1, 1e-2, 1e-3] {
        let lam =
            principal_eigen(&assemble(&resident, &ctx.k2, &ctx.grid, mu, Direction::Leftward)?)?
                .lambda;
        pts.push((mu, lam.ln() / mu));
    }
    let limit = extrapolate_to_zero(&pts);
    match &c1p {
        Ok(a) => checks.push(HypothesisCheck::new(
            "H5",
            a.c - limit,
            format!(
                "extrapolated limit of ln lambda2(mu)/mu at 0+ is {limit:.3e}, \
                 must not exceed c1+ = {:.6}",
                a.c
            ),
        )),
        Err(e) => checks.push(HypothesisCheck::new(
            "H5",
            -1.0,
            format!("c1+ unavailable: {e}"),
        )),
    }

    // Patch-extrema condition; stated for a common carrying capacity, so the
    // extrema are taken from C1 (a note is added when C1 and C2 differ).
    let a1_max = ctx.habitat.a1.max();
    let a2_min = ctx.habitat.a2.min();
    let c_min = ctx.habitat.c1.min();
    let c_max = ctx.habitat.c1.max();
    let first = c_min / c_max - a1_max;
    let second = a2_min - c_max / c_min;
    let mut detail = format!(
        "max a1 = {a1_max} vs Cm/CM = {:.6} (margin {first:+.6}); \
         min a2 = {a2_min} vs CM/Cm = {:.6} (margin {second:+.6})",
        c_min / c_max,
        c_max / c_min,
    );
    let c2_spread = (ctx.habitat.c1.max() - ctx.habitat.c2.max()).abs()
        + (ctx.habitat.c1.min() - ctx.habitat.c2.min()).abs();
    if c2_spread > 1e-12 {
        detail.push_str("; note: C1 and C2 differ, extrema taken from C1");
    }
    checks.push(HypothesisCheck::new("M", first.min(second), detail));

    // Linear-determinacy conditions at the invasion minimizer.
    match spreading_speed(&invasion_mult, &ctx.k1, &ctx.grid, Direction::Rightward) {
        Ok(c0) => {
            let lambda0 =
                principal_eigen(&assemble(&invasion_mult, &ctx.k1, &ctx.grid, c0.mu0, Direction::Rightward)?)?
                    .lambda;
            let coupling = ctx.coupling_mult();
            // The coupled eigenvalue needs an exponential moment of the
            // resident kernel at mu0; past its abscissa the comparison
            // diverges and the condition fails outright.
            match assemble(&coupling, &ctx.k2, &ctx.grid, c0.mu0, Direction::Rightward)
                .and_then(|op| principal_eigen(&op))
            {
                Ok(coupled) => checks.push(HypothesisCheck::new(
                    "D1",
                    lambda0 - coupled.lambda,
                    format!(
                        "at mu0 = {:.6}: lambda0 = {lambda0:.6}, coupled eigenvalue = {:.6}",
                        c0.mu0, coupled.lambda
                    ),
                )),
                Err(e) => checks.push(HypothesisCheck::new(
                    "D1",
                    -1.0,
                    format!("coupled eigenvalue diverges at mu0 = {:.6}: {e}", c0.mu0),
                )),
            }
            match linearized_pair(ctx, c0.mu0) {
                Ok(pair) => {
                    let margin = d2_margin(ctx, &pair);
                    checks.push(HypothesisCheck::new(
                        "D2",
                        margin,
                        "min over the grid of phi1/phi2 - max{a1, 1/a2}".into(),
                    ));
                }
                Err(e) => checks.push(HypothesisCheck::new(
                    "D2",
                    -1.0,
                    format!("eigenpair unavailable: {e}"),
                )),
            }
        }
        Err(e) => {
            let msg = format!("invasion speed unavailable: {e}");
            checks.push(HypothesisCheck::new("D1", -1.0, msg.clone()));
            checks.push(HypothesisCheck::new("D2", -1.0, msg));
        }
    }

    Ok(HypothesisReport { checks })
}

/// Positive eigenpair of the coupled linearization at the invasion
/// minimizer: the decoupled first component plus the uniquely solvable
/// second component.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizedEigenPair {
    pub lambda0: f64,
    pub mu0: f64,
    pub phi1: PeriodicField,
    pub phi2: PeriodicField,
}

pub fn linearized_pair(ctx: &ModelContext, mu0: f64) -> Result<LinearizedEigenPair> {
    let n = ctx.grid.n;
    let invasion = ctx.invasion_multiplier();
    let op1 = assemble(&invasion, &ctx.k1, &ctx.grid, mu0, Direction::Rightward)?;
    let e1 = principal_eigen(&op1)?;
    let lambda0 = e1.lambda;

    let coupling = ctx.coupling_mult();
    let op_l = assemble(&coupling, &ctx.k2, &ctx.grid, mu0, Direction::Rightward)?;
    let lambda_bar = principal_eigen(&op_l)?.lambda;
    if lambda0 - lambda_bar < 1e-10 {
        return Err(Error::SingularSystem(format!(
            "lambda0 = {lambda0:.8} is within 1e-10 of the coupled eigenvalue \
             {lambda_bar:.8}; the second-component system is near-singular"
        )));
    }

    let cross = ctx.cross_mult();
    let op_b = assemble(&cross, &ctx.k2, &ctx.grid, mu0, Direction::Rightward)?;
    let h: Vec<f64> = (0..n)
        .map(|i| op_b.matrix.row(i).iter().zip(&e1.phi.values).map(|(a, b)| a * b).sum())
        .collect();

    // Solve (lambda0 I - L) phi2 = h densely.
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let base = if i == j { lambda0 } else { 0.0 };
        base - op_l.matrix.get(i, j)
    });
    let rhs = nalgebra::DVector::from_column_slice(&h);
    let phi2 = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("dense solve for phi2 failed".into()))?;
    if let Some(min) = phi2.iter().cloned().reduce(f64::min) {
        if min <= 0.0 {
            return Err(Error::Positivity(format!(
                "solved phi2 has a nonpositive entry ({min:.3e}); the determinacy \
                 condition fails or the grid is too coarse"
            )));
        }
    }
    Ok(LinearizedEigenPair {
        lambda0,
        mu0,
        phi1: e1.phi,
        phi2: PeriodicField { length: ctx.grid.length, values: phi2.iter().cloned().collect() },
    })
}

/// Pointwise determinacy margin `min(phi1/phi2 - max{a1, 1/a2})`; invariant
/// under any common positive rescaling of the pair.
pub fn d2_margin(ctx: &ModelContext, pair: &LinearizedEigenPair) -> f64 {
    (0..ctx.grid.n)
        .map(|j| {
            let bound = ctx.habitat.a1.values[j].max(1.0 / ctx.habitat.a2.values[j]);
            pair.phi1.values[j] / pair.phi2.values[j] - bound
        })
        .fold(f64::INFINITY, f64::min)
}

/// Pointwise slack of the exponential supersolution over six steps.
#[derive(Debug, Clone, Serialize)]
pub struct UpperSolutionReport {
    /// Most negative relative slack `(S_{n+1} - Q[S_n]) / S_{n+1}` over the
    /// interior of the domain, both components, n in 0..=5.
    pub min_slack: f64,
    pub per_step: Vec<f64>,
}

/// Build `S_n(x) = M e^{-mu0 x} lambda0^n phi(x)` on a short centered domain,
/// apply the cooperative operator once per step, and report the worst
/// relative slack of `Q[S_n] <= S_{n+1}`. Negative slack is the finding, not
/// an error.
pub fn verify_upper_solution(
    ctx: &ModelContext,
    pair: &LinearizedEigenPair,
    scale: f64,
) -> Result<UpperSolutionReport> {
    let domain = LineDomain::centered(&ctx.grid, 4);
    let coeffs = SimCoeffs::sample(&ctx.habitat, &ctx.pstar, &ctx.qstar, &domain);
    let s1 = LineKernel::tabulate(&ctx.k1, domain.h, pair.mu0);
    let s2 = LineKernel::tabulate(&ctx.k2, domain.h, pair.mu0);
    let margin = s1.half.max(s2.half) + 1;
    if 2 * margin >= domain.n {
        return Err(Error::Validation(
            "kernel support exceeds the verification domain; refine the grid".into(),
        ));
    }
    let level = |n: i32| -> (Vec<f64>, Vec<f64>) {
        let amp = scale * pair.lambda0.powi(n);
        let u = (0..domain.n)
            .map(|j| {
                let x = domain.node(j);
                amp * (-pair.mu0 * x).exp() * pair.phi1.eval(x)
            })
            .collect();
        let v = (0..domain.n)
            .map(|j| {
                let x = domain.node(j);
                amp * (-pair.mu0 * x).exp() * pair.phi2.eval(x)
            })
            .collect();
        (u, v)
    };
    let mut min_slack = f64::INFINITY;
    let mut per_step = Vec::new();
    for n in 0..=5 {
        let (su, sv) = level(n);
        let (nu, nv) = level(n + 1);
        let (g1, g2) = coeffs.cooperative_growth(&su, &sv);
        let qu = s1.convolve(&g1, Pad::Replicate);
        let qv = s2.convolve(&g2, Pad::Replicate);
        let mut step_min = f64::INFINITY;
        for j in margin..domain.n - margin {
            step_min = step_min.min((nu[j] - qu[j]) / nu[j]);
            step_min = step_min.min((nv[j] - qv[j]) / nv[j]);
        }
        min_slack = min_slack.min(step_min);
        per_step.push(step_min);
    }
    Ok(UpperSolutionReport { min_slack, per_step })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecursionClass {
    BetaLimit,
    Intermediate,
    ZeroLimit,
}

/// Weinberger recursion `a_{n+1} = max{phi, shift_c Q[a_n]}` on a truncated
/// line; classifies the limit near the right edge.
pub fn recursion_bracket(
    ctx: &ModelContext,
    c: f64,
    halfwidth_periods: usize,
) -> Result<RecursionClass> {
    let domain = LineDomain::centered(&ctx.grid, 2 * halfwidth_periods.max(3));
    let coeffs = SimCoeffs::sample(&ctx.habitat, &ctx.pstar, &ctx.qstar, &domain);
    let s1 = LineKernel::tabulate(&ctx.k1, domain.h, 0.0);
    let s2 = LineKernel::tabulate(&ctx.k2, domain.h, 0.0);
    let beta_u = &coeffs.pstar;
    let beta_v = &coeffs.qstar;
    let beta_max = beta_u
        .iter()
        .chain(beta_v.iter())
        .cloned()
        .fold(0.0, f64::max);
    if beta_max <= 0.0 {
        return Err(Error::Validation("recursion needs a nontrivial target state".into()));
    }
    // Initial datum: half of beta left of the origin, zero to the right.
    let phi_u: Vec<f64> = (0..domain.n)
        .map(|j| if domain.node(j) < 0.0 { 0.5 * beta_u[j] } else { 0.0 })
        .collect();
    let phi_v: Vec<f64> = (0..domain.n)
        .map(|j| if domain.node(j) < 0.0 { 0.5 * beta_v[j] } else { 0.0 })
        .collect();
    let mut au = phi_u.clone();
    let mut av = phi_v.clone();

    // Probe window: the period [right - 2L, right - L), clear of the
    // replicate-padding fringe.
    let w_end = domain.n - ctx.grid.n;
    let w_start = w_end - ctx.grid.n;
    // Whole-profile stabilization: the tail alone sits at zero until the
    // front arrives, so it would stabilize spuriously.
    let mut prev_u = au.clone();
    let mut prev_v = av.clone();

    for iter in 1..=RECURSION_MAX_ITERS {
        let (g1, g2) = coeffs.cooperative_growth(&au, &av);
        let qu = s1.convolve(&g1, Pad::Replicate);
        let qv = s2.convolve(&g2, Pad::Replicate);
        for j in 0..domain.n {
            let s = domain.node(j) + c;
            au[j] = phi_u[j].max(domain.interp(&qu, s)).clamp(0.0, beta_u[j]);
            av[j] = phi_v[j].max(domain.interp(&qv, s)).clamp(0.0, beta_v[j]);
        }
        if iter % 50 == 0 {
            let change = au
                .iter()
                .zip(&prev_u)
                .chain(av.iter().zip(&prev_v))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change < 1e-8 * beta_max {
                return Ok(classify_window(
                    &au[w_start..w_end],
                    &av[w_start..w_end],
                    &beta_u[w_start..w_end],
                    &beta_v[w_start..w_end],
                    beta_max,
                ));
            }
            prev_u.copy_from_slice(&au);
            prev_v.copy_from_slice(&av);
        }
    }
    Err(Error::Inconclusive(format!(
        "recursion tail did not stabilize within {RECURSION_MAX_ITERS} iterations at c = {c}"
    )))
}

fn classify_window(
    au: &[f64],
    av: &[f64],
    bu: &[f64],
    bv: &[f64],
    beta_max: f64,
) -> RecursionClass {
    let level = au.iter().chain(av).cloned().fold(0.0, f64::max);
    if level < ZERO_EDGE_REL * beta_max {
        return RecursionClass::ZeroLimit;
    }
    let mut rel = 0.0_f64;
    for ((&a, &b), (&a2, &b2)) in au.iter().zip(bu).zip(av.iter().zip(bv)) {
        if b > 1e-12 * beta_max {
            rel = rel.max((a - b).abs() / b);
        }
        if b2 > 1e-12 * beta_max {
            rel = rel.max((a2 - b2).abs() / b2);
        }
    }
    if rel < BETA_EDGE_REL {
        RecursionClass::BetaLimit
    } else {
        RecursionClass::Intermediate
    }
}

/// Bisection brackets for the two recursion speeds: the edge where the limit
/// stops being beta, and the edge where it becomes zero.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedBracket {
    pub beta_edge: (f64, f64),
    pub zero_edge: (f64, f64),
}

fn bisect_edge(
    ctx: &ModelContext,
    mut lo: f64,
    mut hi: f64,
    halfwidth: usize,
    at_lo: impl Fn(RecursionClass) -> bool,
) -> Result<(f64, f64)> {
    while hi - lo > BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        if at_lo(recursion_bracket(ctx, mid, halfwidth)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Bracket both recursion speeds in [cmin, cmax]. The endpoints must
/// classify as beta at cmin and zero at cmax. Honors `IDEFRONT_THREADS`:
/// with 2 or more threads the two independent bisections run concurrently.
pub fn bracket_speeds(
    ctx: &ModelContext,
    cmin: f64,
    cmax: f64,
    halfwidth: usize,
) -> Result<SpeedBracket> {
    let at_min = recursion_bracket(ctx, cmin, halfwidth)?;
    let at_max = recursion_bracket(ctx, cmax, halfwidth)?;
    if at_min != RecursionClass::BetaLimit {
        return Err(Error::Validation(format!(
            "cmin = {cmin} does not classify as the beta limit ({at_min:?}); widen the range"
        )));
    }
    if at_max != RecursionClass::ZeroLimit {
        return Err(Error::Validation(format!(
            "cmax = {cmax} does not classify as the zero limit ({at_max:?}); widen the range"
        )));
    }
    let threads: usize = std::env::var("IDEFRONT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1);
    let beta_pred = |cl: RecursionClass| cl == RecursionClass::BetaLimit;
    let zero_pred = |cl: RecursionClass| cl != RecursionClass::ZeroLimit;
    if threads >= 2 {
        std::thread::scope(|scope| {
            let a = scope.spawn(|| bisect_edge(ctx, cmin, cmax, halfwidth, beta_pred));
            let b = scope.spawn(|| bisect_edge(ctx, cmin, cmax, halfwidth, zero_pred));
            let beta_edge = a.join().expect("bisection thread panicked")?;
            let zero_edge = b.join().expect("bisection thread panicked")?;
            Ok(SpeedBracket { beta_edge, zero_edge })
        })
    } else {
        let beta_edge = bisect_edge(ctx, cmin, cmax, halfwidth, beta_pred)?;
        let zero_edge = bisect_edge(ctx, cmin, cmax, halfwidth, zero_pred)?;
        Ok(SpeedBracket { beta_edge, zero_edge })
    }
}

/// Linear-determinacy verdict: the linearized invasion speed plus the two
/// determinacy margins.
#[derive(Debug, Clone, Serialize)]
pub struct DeterminacyReport {
    pub linearly_determinate: bool,
    pub c0: SpeedReport,
    pub d1_margin: f64,
    pub d2_margin: f64,
}

pub fn determinacy_verdict(ctx: &ModelContext) -> Result<DeterminacyReport> {
    let invasion = ctx.invasion_multiplier();
    let c0 = spreading_speed(&invasion, &ctx.k1, &ctx.grid, Direction::Rightward)?;
    let lambda0 =
        principal_eigen(&assemble(&invasion, &ctx.k1, &ctx.grid, c0.mu0, Direction::Rightward)?)?
            .lambda;
    let coupling = ctx.coupling_mult();
    let lambda_bar =
        principal_eigen(&assemble(&coupling, &ctx.k2, &ctx.grid, c0.mu0, Direction::Rightward)?)?
            .lambda;
    let d1_margin = lambda0 - lambda_bar;
    let pair = linearized_pair(ctx, c0.mu0)?;
    let d2 = d2_margin(ctx, &pair);
    Ok(DeterminacyReport {
        linearly_determinate: d1_margin > 0.0 && d2 > 0.0,
        c0,
        d1_margin,
        d2_margin: d2,
    })
}
