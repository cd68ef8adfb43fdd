//! Forward simulation on a truncated line: competitive and cooperative steps,
//! invasion-front tracking, and traveling-wave profile extraction.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicField};
use crate::habitat::{BoundaryKind, Habitat};
use crate::kernel::Kernel;

/// Uniform grid on a truncated piece of the line whose left end sits on a
/// period boundary.
#[derive(Debug, Clone, Copy)]
pub struct LineDomain {
    pub left: f64,
    pub n: usize,
    pub h: f64,
}

impl LineDomain {
    /// The full simulation domain `[-(sim_periods/2) L, +(sim_periods/2) L)`.
    pub fn from_grid(grid: &Grid) -> Self {
        LineDomain { left: grid.sim_left(), n: grid.sim_len(), h: grid.spacing() }
    }

    /// A centered domain spanning `periods` habitat periods.
    pub fn centered(grid: &Grid, periods: usize) -> Self {
        let periods = periods.max(2);
        LineDomain {
            left: -(periods as f64 / 2.0) * grid.length,
            n: periods * grid.n,
            h: grid.spacing(),
        }
    }

    pub fn node(&self, j: usize) -> f64 {
        self.left + j as f64 * self.h
    }

    pub fn right(&self) -> f64 {
        self.left + self.n as f64 * self.h
    }

    /// Linear interpolation with constant extension beyond both ends.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        let t = (x - self.left) / self.h;
        if t <= 0.0 {
            return values[0];
        }
        if t >= (self.n - 1) as f64 {
            return values[self.n - 1];
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        values[i] + frac * (values[i + 1] - values[i])
    }
}

/// Habitat coefficients and semi-trivial states sampled on a line domain.
#[derive(Debug, Clone)]
pub struct SimCoeffs {
    pub r1: Vec<f64>,
    pub b1: Vec<f64>,
    pub a1: Vec<f64>,
    pub r2: Vec<f64>,
    pub b2: Vec<f64>,
    pub a2: Vec<f64>,
    pub pstar: Vec<f64>,
    pub qstar: Vec<f64>,
}

impl SimCoeffs {
    pub fn sample(
        habitat: &Habitat,
        pstar: &PeriodicField,
        qstar: &PeriodicField,
        domain: &LineDomain,
    ) -> Self {
        let at = |f: &PeriodicField| (0..domain.n).map(|j| f.eval(domain.node(j))).collect();
        SimCoeffs {
            r1: at(&habitat.r1),
            b1: at(&habitat.b1()),
            a1: at(&habitat.a1),
            r2: at(&habitat.r2),
            b2: at(&habitat.b2()),
            a2: at(&habitat.a2),
            pstar: at(pstar),
            qstar: at(qstar),
        }
    }

    /// Growth stage of the competitive system.
    pub fn competitive_growth(&self, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g1 = (0..p.len())
            .map(|j| {
                self.r1[j] * p[j] / (1.0 + self.b1[j] * (p[j] + self.a1[j] * q[j]))
            })
            .collect();
        let g2 = (0..q.len())
            .map(|j| {
                self.r2[j] * q[j] / (1.0 + self.b2[j] * (q[j] + self.a2[j] * p[j]))
            })
            .collect();
        (g1, g2)
    }

    /// Growth stage of the cooperative transform `u = p`, `v = q* - q`.
    pub fn cooperative_growth(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g1 = (0..u.len())
            .map(|j| {
                self.r1[j] * u[j]
                    / (1.0 + self.b1[j] * (u[j] + self.a1[j] * (self.qstar[j] - v[j])))
            })
            .collect();
        let g2 = (0..v.len())
            .map(|j| {
                let s = self.r2[j] / (1.0 + self.b2[j] * self.qstar[j]);
                s * (self.b2[j] * self.a2[j] * self.qstar[j] * u[j] + v[j])
                    / (1.0 + self.b2[j] * (self.qstar[j] + self.a2[j] * u[j] - v[j]))
            })
            .collect();
        (g1, g2)
    }
}

/// How a signal is extended beyond the truncated domain during convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pad {
    Zero,
    Replicate,
}

/// Tabulated dispersal stencil `w_d = k(d h) h`, `|d| <= half`.
#[derive(Debug, Clone)]
pub struct LineKernel {
    pub weights: Vec<f64>,
    pub half: usize,
}

impl LineKernel {
    /// `mu_pad` widens the cutoff so the stencil remains accurate when the
    /// convolved signal grows like `e^{mu_pad |z|}`.
    pub fn tabulate(kernel: &Kernel, h: f64, mu_pad: f64) -> Self {
        let cutoff = kernel.weighted_cutoff(mu_pad.abs(), 1e-16);
        let half = (cutoff / h).ceil() as usize + 1;
        let weights =
            (-(half as i64)..=half as i64).map(|d| kernel.density(d as f64 * h) * h).collect();
        LineKernel { weights, half }
    }

    /// Direct convolution with the chosen boundary extension.
    pub fn convolve(&self, signal: &[f64], pad: Pad) -> Vec<f64> {
        let n = signal.len() as i64;
        let half = self.half as i64;
        let sample = |idx: i64| -> f64 {
            if idx < 0 {
                match pad {
                    Pad::Zero => 0.0,
                    Pad::Replicate => signal[0],
                }
            } else if idx >= n {
                match pad {
                    Pad::Zero => 0.0,
                    Pad::Replicate => signal[(n - 1) as usize],
                }
            } else {
                signal[idx as usize]
            }
        };
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for (wi, d) in (-half..=half).enumerate() {
                    acc += self.weights[wi] * sample(i - d);
                }
                acc
            })
            .collect()
    }
}

/// FFT linear convolution with explicit zero padding of one kernel support
/// width, so circular wrap-around is exactly absent.
pub struct Convolver {
    len: usize,
    padded: usize,
    kernel_fft: Vec<Complex<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub fn new(kernel: &Kernel, h: f64, len: usize) -> Self {
        let stencil = LineKernel::tabulate(kernel, h, 0.0);
        let padded = (len + 2 * stencil.half + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(padded);
        let ifft = planner.plan_fft_inverse(padded);
        let mut kbuf = vec![Complex::new(0.0, 0.0); padded];
        let half = stencil.half as i64;
        for (wi, d) in (-half..=half).enumerate() {
            let idx = d.rem_euclid(padded as i64) as usize;
            kbuf[idx].re += stencil.weights[wi];
        }
        fft.process(&mut kbuf);
        Convolver { len, padded, kernel_fft: kbuf, fft, ifft }
    }

    pub fn convolve(&self, signal: &[f64]) -> Vec<f64> {
        assert_eq!(signal.len(), self.len);
        let mut buf = vec![Complex::new(0.0, 0.0); self.padded];
        for (b, &s) in buf.iter_mut().zip(signal) {
            b.re = s;
        }
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_fft) {
            *b *= *k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.padded as f64;
        buf[..self.len].iter().map(|c| c.re * scale).collect()
    }
}

/// Population densities on the truncated domain at one time step.
#[derive(Debug, Clone)]
pub struct SimState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<SimState>,
    pub snapshot_every: usize,
}

impl Trajectory {
    /// States at multiples of the snapshot stride, plus the final state.
    pub fn snapshots(&self) -> Vec<&SimState> {
        let last = self.states.len() - 1;
        self.states
            .iter()
            .enumerate()
            .filter(|(i, s)| s.step % self.snapshot_every == 0 || *i == last)
            .map(|(_, s)| s)
            .collect()
    }
}

/// Relative floor below which post-dispersal densities are treated as exact
/// zeros. FFT round-off leaves noise of order `1e-16 * max` ahead of the
/// front; local growth factors above one would amplify it into a spurious
/// secondary front over a few dozen steps, so it must be removed every step.
const NOISE_FLOOR_REL: f64 = 1e-12;

/// Clamp negative round-off to zero and zero out entries below the relative
/// noise floor.
fn suppress_noise(values: &mut [f64]) {
    let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = NOISE_FLOOR_REL * max;
    for v in values.iter_mut() {
        if *v < floor {
            *v = 0.0;
        }
    }
}

/// Driver for the truncated-line dynamics of one problem instance.
pub struct Simulator {
    pub domain: LineDomain,
    pub grid: Grid,
    pub coeffs: SimCoeffs,
    pub policy: BoundaryKind,
    conv1: Convolver,
    conv2: Convolver,
}

impl Simulator {
    pub fn new(
        habitat: &Habitat,
        k1: &Kernel,
        k2: &Kernel,
        grid: &Grid,
        pstar: &PeriodicField,
        qstar: &PeriodicField,
        policy: BoundaryKind,
    ) -> Self {
        let domain = LineDomain::from_grid(grid);
        let coeffs = SimCoeffs::sample(habitat, pstar, qstar, &domain);
        let conv1 = Convolver::new(k1, domain.h, domain.n);
        let conv2 = Convolver::new(k2, domain.h, domain.n);
        Simulator { domain, grid: *grid, coeffs, policy, conv1, conv2 }
    }

    fn apply_guards(&self, p: &mut [f64], q: &mut [f64]) {
        let n = self.grid.n;
        let len = self.domain.n;
        match self.policy {
            BoundaryKind::Invasion => {
                for j in 0..n {
                    p[j] = self.coeffs.pstar[j];
                    q[j] = 0.0;
                }
                for j in len - n..len {
                    p[j] = 0.0;
                    q[j] = self.coeffs.qstar[j];
                }
            }
            BoundaryKind::Compact => {
                for j in (0..n).chain(len - n..len) {
                    p[j] = 0.0;
                    q[j] = 0.0;
                }
            }
        }
    }

    /// One step of the competitive system: growth pointwise, then dispersal,
    /// then the guard-band overwrite.
    pub fn step(&self, state: &SimState) -> SimState {
        let (g1, g2) = self.coeffs.competitive_growth(&state.p, &state.q);
        let mut p = self.conv1.convolve(&g1);
        let mut q = self.conv2.convolve(&g2);
        suppress_noise(&mut p);
        suppress_noise(&mut q);
        self.apply_guards(&mut p, &mut q);
        SimState { p, q, step: state.step + 1 }
    }

    /// One step of the cooperative transform with guard bands mapped through
    /// `u = p`, `v = q* - q`.
    pub fn step_cooperative(&self, u: &[f64], v: &[f64], step: usize) -> (Vec<f64>, Vec<f64>, usize) {
        let (g1, g2) = self.coeffs.cooperative_growth(u, v);
        let mut un = self.conv1.convolve(&g1);
        let mut vn = self.conv2.convolve(&g2);
        suppress_noise(&mut un);
        suppress_noise(&mut vn);
        let n = self.grid.n;
        let len = self.domain.n;
        match self.policy {
            BoundaryKind::Invasion => {
                for j in 0..n {
                    un[j] = self.coeffs.pstar[j];
                    vn[j] = self.coeffs.qstar[j];
                }
                for j in len - n..len {
                    un[j] = 0.0;
                    vn[j] = 0.0;
                }
            }
            BoundaryKind::Compact => {
                for j in (0..n).chain(len - n..len) {
                    un[j] = 0.0;
                    vn[j] = self.coeffs.qstar[j];
                }
            }
        }
        (un, vn, step + 1)
    }

    pub fn simulate(&self, init: SimState, steps: usize, snapshot_every: usize) -> Trajectory {
        let mut states = Vec::with_capacity(steps + 1);
        states.push(init);
        for _ in 0..steps {
            let next = self.step(states.last().unwrap());
            states.push(next);
        }
        Trajectory { states, snapshot_every: snapshot_every.max(1) }
    }

    /// Initial data for an invasion run: `p = p*` left of the origin, zero to
    /// the right; `q = q*` everywhere (or zero for compact runs).
    pub fn initial_step(&self) -> SimState {
        let len = self.domain.n;
        let mut p = vec![0.0; len];
        let mut q = vec![0.0; len];
        for j in 0..len {
            if self.domain.node(j) < 0.0 {
                p[j] = self.coeffs.pstar[j];
            }
            if self.policy == BoundaryKind::Invasion {
                q[j] = self.coeffs.qstar[j];
            }
        }
        SimState { p, q, step: 0 }
    }

    /// Initial data for a periodic (whole-line) run: a small multiple of `p*`
    /// everywhere.
    pub fn initial_periodic(&self) -> SimState {
        let len = self.domain.n;
        let p = (0..len).map(|j| 0.1 * self.coeffs.pstar[j]).collect();
        let q = if self.policy == BoundaryKind::Invasion {
            self.coeffs.qstar.clone()
        } else {
            vec![0.0; len]
        };
        SimState { p, q, step: 0 }
    }
}

/// Front positions per step plus the fitted asymptotic speed.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FrontTrace {
    pub threshold: f64,
    /// `(step, x_front)` for every step with a detectable front.
    pub records: Vec<(usize, f64)>,
    pub speed: f64,
    pub std_error: f64,
}

/// Rightmost crossing of the threshold with linear interpolation; `None` when
/// the profile stays below the threshold everywhere.
pub fn front_position(p: &[f64], domain: &LineDomain, threshold: f64) -> Option<f64> {
    let n = p.len();
    for j in (0..n).rev() {
        if p[j] >= threshold {
            if j + 1 < n {
                let frac = (p[j] - threshold) / (p[j] - p[j + 1]);
                return Some(domain.node(j) + frac.clamp(0.0, 1.0) * domain.h);
            }
            return Some(domain.node(j));
        }
    }
    None
}

/// Track the invasion edge across a trajectory and fit the asymptotic speed
/// by least squares over the last half of the records.
pub fn track_front(
    trajectory: &Trajectory,
    domain: &LineDomain,
    grid: &Grid,
    threshold: f64,
) -> Result<FrontTrace> {
    let guard_limit = domain.right() - 2.0 * grid.length;
    let mut records = Vec::new();
    for state in &trajectory.states {
        if let Some(x) = front_position(&state.p, domain, threshold) {
            if x >= guard_limit {
                return Err(Error::FrontLost {
                    step: state.step,
                    message: format!(
                        "front at x = {x:.3} is within one period of the right guard band; \
                         enlarge sim_periods"
                    ),
                });
            }
            records.push((state.step, x));
        }
    }
    if records.len() < 4 {
        return Err(Error::InsufficientData(
            "front visible in fewer than 4 steps; cannot fit a speed".into(),
        ));
    }
    // Burn-in: drop the first quarter, then fit over the last half.
    let fit = &records[records.len() / 2..];
    let m = fit.len() as f64;
    let tbar = fit.iter().map(|&(s, _)| s as f64).sum::<f64>() / m;
    let xbar = fit.iter().map(|&(_, x)| x).sum::<f64>() / m;
    let sxx: f64 = fit.iter().map(|&(s, _)| (s as f64 - tbar).powi(2)).sum();
    let sxy: f64 = fit.iter().map(|&(s, x)| (s as f64 - tbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("front fit needs at least 2 distinct steps".into()));
    }
    let speed = sxy / sxx;
    let ss_res: f64 = fit
        .iter()
        .map(|&(s, x)| {
            let pred = xbar + speed * (s as f64 - tbar);
            (x - pred).powi(2)
        })
        .sum();
    let dof = (fit.len() as f64 - 2.0).max(1.0);
    let std_error = (ss_res / dof / sxx).sqrt();
    Ok(FrontTrace { threshold, records, speed, std_error })
}

/// Periodic traveling-wave profile sampled in the moving frame.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WaveProfile {
    pub xi: Vec<f64>,
    /// Mean profile per (xi bin, x mod L bin); NaN where no sample landed.
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Largest increase of U along xi within a fixed x mod L row.
    pub monotonicity_defect: f64,
    /// Largest within-bin sample spread, normalized by the profile maximum:
    /// how far the second argument is from being exactly L-periodic.
    pub period_defect: f64,
}

/// Resample the last quarter of a trajectory onto the frame `xi = x - c n`.
pub fn extract_profile(
    trajectory: &Trajectory,
    domain: &LineDomain,
    grid: &Grid,
    c: f64,
) -> Result<WaveProfile> {
    let states = &trajectory.states;
    let late_start = states.len() - states.len() / 4;
    let late = &states[late_start.min(states.len().saturating_sub(4))..];
    if late.len() < 4 {
        return Err(Error::InsufficientData("need at least 4 late states for a profile".into()));
    }
    let pmax = late.iter().flat_map(|s| s.p.iter()).cloned().fold(0.0_f64, f64::max);
    if pmax <= 0.0 {
        return Err(Error::InsufficientData("trajectory is identically zero".into()));
    }
    let theta = 0.5 * pmax;
    let centers: Vec<f64> = late
        .iter()
        .filter_map(|s| front_position(&s.p, domain, theta).map(|x| x - c * s.step as f64))
        .collect();
    if centers.is_empty() {
        return Err(Error::InsufficientData("no front visible in the late states".into()));
    }
    let c0 = centers.iter().sum::<f64>() / centers.len() as f64;
    let span = 3.0 * grid.length;
    let h = domain.h;
    let nxi = (2.0 * span / h).round() as usize;
    let xi: Vec<f64> = (0..nxi).map(|j| c0 - span + j as f64 * h).collect();
    let nmod = grid.n;

    struct Acc {
        sum: f64,
        min: f64,
        max: f64,
        count: usize,
    }
    let mut acc_u: Vec<Vec<Acc>> = (0..nxi)
        .map(|_| (0..nmod).map(|_| Acc { sum: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0 }).collect())
        .collect();
    let mut acc_v: Vec<Vec<Acc>> = (0..nxi)
        .map(|_| (0..nmod).map(|_| Acc { sum: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0 }).collect())
        .collect();

    for state in late {
        let shift = c * state.step as f64;
        for (j, &xival) in xi.iter().enumerate() {
            let x = xival + shift;
            if x < domain.left + h || x > domain.right() - 2.0 * h {
                continue;
            }
            let mbin =
                ((x.rem_euclid(grid.length) / h).round() as usize) % nmod;
            let uval = domain.interp(&state.p, x);
            let vval = domain.interp(&state.q, x);
            let au = &mut acc_u[j][mbin];
            au.sum += uval;
            au.min = au.min.min(uval);
            au.max = au.max.max(uval);
            au.count += 1;
            let av = &mut acc_v[j][mbin];
            av.sum += vval;
            av.min = av.min.min(vval);
            av.max = av.max.max(vval);
            av.count += 1;
        }
    }

    let mean = |acc: &Vec<Vec<Acc>>| -> Vec<Vec<f64>> {
        acc.iter()
            .map(|row| {
                row.iter()
                    .map(|a| if a.count > 0 { a.sum / a.count as f64 } else { f64::NAN })
                    .collect()
            })
            .collect()
    };
    let u = mean(&acc_u);
    let v = mean(&acc_v);

    let mut mono = 0.0_f64;
    for m in 0..nmod {
        let mut prev: Option<f64> = None;
        for row in &u {
            let val = row[m];
            if val.is_nan() {
                continue;
            }
            if let Some(p) = prev {
                mono = mono.max(val - p);
            }
            prev = Some(val);
        }
    }
    let mut spread = 0.0_f64;
    for row in &acc_u {
        for a in row {
            if a.count >= 2 {
                spread = spread.max(a.max - a.min);
            }
        }
    }
    Ok(WaveProfile {
        xi,
        u,
        v,
        monotonicity_defect: mono,
        period_defect: spread / pmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicField;

    const E: f64 = std::f64::consts::E;

    fn homogeneous(a1: f64, sim_periods: usize) -> (Grid, Habitat) {
        let grid = Grid::new(10.0, 64, sim_periods).unwrap();
        let habitat = Habitat {
            r1: PeriodicField::constant(&grid, E),
            r2: PeriodicField::constant(&grid, E),
            c1: PeriodicField::constant(&grid, 1.0),
            c2: PeriodicField::constant(&grid, 0.5),
            a1: PeriodicField::constant(&grid, a1),
            a2: PeriodicField::constant(&grid, 1.0),
        };
        (grid, habitat)
    }

    #[test]
    fn fft_convolution_matches_direct_quadrature() {
        let grid = Grid::new(10.0, 64, 4).unwrap();
        let k = Kernel::gaussian(0.1).unwrap();
        let domain = LineDomain::from_grid(&grid);
        let conv = Convolver::new(&k, domain.h, domain.n);
        let signal: Vec<f64> =
            (0..domain.n).map(|j| (domain.node(j) / 7.0).sin().abs() + 0.1).collect();
        let fast = conv.convolve(&signal);
        let stencil = LineKernel::tabulate(&k, domain.h, 0.0);
        let slow = stencil.convolve(&signal, Pad::Zero);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn homogeneous_fixed_point_steps_to_itself() {
        let (grid, habitat) = homogeneous(0.0, 6);
        let k = Kernel::gaussian(0.1).unwrap();
        let pstar = PeriodicField::constant(&grid, 1.0);
        let qstar = PeriodicField::constant(&grid, 0.0);
        let sim = Simulator::new(
            &habitat,
            &k,
            &k,
            &grid,
            &pstar,
            &qstar,
            BoundaryKind::Invasion,
        );
        let init = SimState { p: vec![1.0; sim.domain.n], q: vec![0.0; sim.domain.n], step: 0 };
        let next = sim.step(&init);
        // Guard bands are overwritten by policy; the interior must be fixed.
        for j in grid.n..sim.domain.n - grid.n {
            assert!((next.p[j] - 1.0).abs() < 1e-10, "p[{j}] = {}", next.p[j]);
            assert_eq!(next.q[j], 0.0);
        }
    }

    #[test]
    fn unit_growth_rate_decays_mass() {
        let grid = Grid::new(10.0, 64, 4).unwrap();
        let habitat = Habitat {
            r1: PeriodicField::constant(&grid, 1.0 + 1e-12),
            r2: PeriodicField::constant(&grid, 1.0 + 1e-12),
            c1: PeriodicField::constant(&grid, 1.0),
            c2: PeriodicField::constant(&grid, 1.0),
            a1: PeriodicField::constant(&grid, 1e-12),
            a2: PeriodicField::constant(&grid, 1e-12),
        };
        // b = (r-1)/C ~ 0 makes growth nearly neutral; use explicit b instead.
        let mut coeffs = SimCoeffs::sample(
            &habitat,
            &PeriodicField::constant(&grid, 0.0),
            &PeriodicField::constant(&grid, 0.0),
            &LineDomain::from_grid(&grid),
        );
        for b in coeffs.b1.iter_mut() {
            *b = 1.0;
        }
        let p: Vec<f64> = vec![0.5; coeffs.r1.len()];
        let q = vec![0.0; coeffs.r1.len()];
        let (g1, _) = coeffs.competitive_growth(&p, &q);
        let before: f64 = p.iter().sum();
        let after: f64 = g1.iter().sum();
        assert!(after < before, "growth with r = 1 must strictly shrink mass");
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let (grid, habitat) = homogeneous(1.0, 4);
        let k = Kernel::gaussian(0.1).unwrap();
        let z = PeriodicField::constant(&grid, 0.0);
        let sim = Simulator::new(&habitat, &k, &k, &grid, &z, &z, BoundaryKind::Compact);
        let init = SimState { p: vec![0.0; sim.domain.n], q: vec![0.0; sim.domain.n], step: 0 };
        let traj = sim.simulate(init, 5, 1);
        let last = traj.states.last().unwrap();
        assert!(last.p.iter().all(|&v| v == 0.0));
        assert!(last.q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_matches_dense_quadrature_oracle() {
        let grid = Grid::new(10.0, 64, 4).unwrap();
        let (_, habitat) = {
            let h = homogeneous(1.0, 4);
            (h.0, h.1)
        };
        let k1 = Kernel::gaussian(0.1).unwrap();
        let k2 = Kernel::gaussian(0.2).unwrap();
        let pstar = PeriodicField::constant(&grid, 1.0);
        let qstar = PeriodicField::constant(&grid, 0.5);
        let sim = Simulator::new(&habitat, &k1, &k2, &grid, &pstar, &qstar, BoundaryKind::Invasion);
        let domain = sim.domain;
        let init_p: Vec<f64> =
            (0..domain.n).map(|j| if domain.node(j) < 0.0 { 0.5 } else { 0.0 }).collect();
        let init_q = vec![0.5; domain.n];
        let state = SimState { p: init_p.clone(), q: init_q.clone(), step: 0 };
        let fast = sim.step(&state);

        // Dense Nystrom oracle: full quadrature over the truncated domain.
        let (g1, g2) = sim.coeffs.competitive_growth(&init_p, &init_q);
        let dense = |kernel: &Kernel, g: &[f64]| -> Vec<f64> {
            (0..domain.n)
                .map(|i| {
                    let xi = domain.node(i);
                    (0..domain.n)
                        .map(|j| kernel.density(xi - domain.node(j)) * g[j] * domain.h)
                        .sum()
                })
                .collect()
        };
        let mut dp = dense(&k1, &g1);
        let mut dq = dense(&k2, &g2);
        sim.apply_guards(&mut dp, &mut dq);
        for j in 0..domain.n {
            assert!((fast.p[j] - dp[j]).abs() < 1e-9, "p[{j}]");
            assert!((fast.q[j] - dq[j]).abs() < 1e-9, "q[{j}]");
        }
    }

    #[test]
    fn cooperative_step_preserves_ordering() {
        let (grid, habitat) = homogeneous(0.3, 4);
        let k = Kernel::gaussian(0.1).unwrap();
        let pstar = PeriodicField::constant(&grid, 1.0);
        let qstar = PeriodicField::constant(&grid, 0.5);
        let sim = Simulator::new(&habitat, &k, &k, &grid, &pstar, &qstar, BoundaryKind::Invasion);
        let len = sim.domain.n;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let u1: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..0.5)).collect();
            let v1: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..0.25)).collect();
            let u2: Vec<f64> = u1.iter().map(|&v| (v + rng.gen_range(0.0..0.3)).min(1.0)).collect();
            let v2: Vec<f64> = v1.iter().map(|&v| (v + rng.gen_range(0.0..0.2)).min(0.5)).collect();
            let (mut au, mut av) = (u1, v1);
            let (mut bu, mut bv) = (u2, v2);
            for step in 0..10 {
                let (nau, nav, _) = sim.step_cooperative(&au, &av, step);
                let (nbu, nbv, _) = sim.step_cooperative(&bu, &bv, step);
                for j in 0..len {
                    assert!(nau[j] <= nbu[j] + 1e-12);
                    assert!(nav[j] <= nbv[j] + 1e-12);
                }
                au = nau;
                av = nav;
                bu = nbu;
                bv = nbv;
            }
        }
    }

    #[test]
    fn raising_competitor_density_never_helps_the_focal_species() {
        let (grid, habitat) = homogeneous(0.5, 4);
        let k = Kernel::gaussian(0.1).unwrap();
        let pstar = PeriodicField::constant(&grid, 1.0);
        let qstar = PeriodicField::constant(&grid, 0.5);
        let sim = Simulator::new(&habitat, &k, &k, &grid, &pstar, &qstar, BoundaryKind::Compact);
        let len = sim.domain.n;
        let p0: Vec<f64> =
            (0..len).map(|j| if sim.domain.node(j) < 0.0 { 0.8 } else { 0.0 }).collect();
        let q_lo = vec![0.1; len];
        let q_hi = vec![0.4; len];
        let mut a = SimState { p: p0.clone(), q: q_lo, step: 0 };
        let mut b = SimState { p: p0, q: q_hi, step: 0 };
        for _ in 0..10 {
            a = sim.step(&a);
            b = sim.step(&b);
            for j in 0..len {
                assert!(b.p[j] <= a.p[j] + 1e-12);
            }
        }
    }

    #[test]
    fn transform_round_trip_matches_competitive_path() {
        let (grid, habitat) = homogeneous(1.0, 6);
        let k = Kernel::gaussian(0.1).unwrap();
        // q* for the homogeneous habitat is the constant C2.
        let pstar = PeriodicField::constant(&grid, 1.0);
        let qstar = PeriodicField::constant(&grid, 0.5);
        let sim = Simulator::new(&habitat, &k, &k, &grid, &pstar, &qstar, BoundaryKind::Invasion);
        let mut state = sim.initial_step();
        let mut u = state.p.clone();
        let mut v: Vec<f64> =
            state.q.iter().zip(&sim.coeffs.qstar) .map(|(&q, &qs)| qs - q).collect();
        for step in 0..20 {
            state = sim.step(&state);
            let (nu, nv, _) = sim.step_cooperative(&u, &v, step);
            u = nu;
            v = nv;
            for j in 0..sim.domain.n {
                let q_back = sim.coeffs.qstar[j] - v[j];
                assert!((state.p[j] - u[j]).abs() < 1e-10);
                assert!((state.q[j] - q_back).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn front_position_interpolates_the_rightmost_crossing() {
        let grid = Grid::new(10.0, 64, 4).unwrap();
        let domain = LineDomain::from_grid(&grid);
        let p: Vec<f64> =
            (0..domain.n).map(|j| if domain.node(j) < 3.0 { 1.0 } else { 0.0 }).collect();
        let x = front_position(&p, &domain, 0.5).unwrap();
        assert!((x - 3.0).abs() <= domain.h, "front at {x}");
        assert!(front_position(&p, &domain, 2.0).is_none());
    }
}
