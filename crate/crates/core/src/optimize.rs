//! Gradient descent on sampling angles against an ℓp relaxation of the
//! mutual coherence.
//!
//! Elevations stay on the equispaced grid unless θ optimization is enabled,
//! in which case the two pole samples are held fixed.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{inner, sample_column, theorem_lower_bound};
use crate::error::{invalid, Error, Result};
use crate::grids::{enumerate_modes, format_f64, mode_count, wrap_angle, BasisKind, Grid, ModeIndex};
use crate::specfun::{wigner_norm, WignerDParams};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-8;
pub const ADADELTA_RHO: f64 = 0.95;
pub const ADADELTA_EPS: f64 = 1e-6;

/// Pairs with `|f| <` this contribute nothing to the gradient.
const MAGNITUDE_GUARD: f64 = 1e-14;

/// Interior elevations are kept this far from the poles during θ updates.
const THETA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Adam,
    Adagrad,
    Adadelta,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sgd, Method::Adam, Method::Adagrad, Method::Adadelta];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sgd => "sgd",
            Method::Adam => "adam",
            Method::Adagrad => "adagrad",
            Method::Adadelta => "adadelta",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Method::Sgd),
            "adam" => Ok(Method::Adam),
            "adagrad" => Ok(Method::Adagrad),
            "adadelta" => Ok(Method::Adadelta),
            other => Err(invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AngleFamily {
    Phi,
    Chi,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Relaxation exponent, even and at least 2.
    pub p: u32,
    pub eta: f64,
    /// Stop once `|μ_LB - μ| ≤ epsilon`.
    pub epsilon: f64,
    pub i_max: usize,
    pub method: Method,
    pub seed: u64,
    pub optimize_theta: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            p: 8,
            eta: 0.5,
            epsilon: 1e-4,
            i_max: 1000,
            method: Method::Adam,
            seed: 0,
            optimize_theta: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.p % 2 == 1 {
            return Err(invalid(format!("p must be even and >= 2, got {}", self.p)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.i_max == 0 {
            return Err(invalid("i_max must be at least 1"));
        }
        Ok(())
    }

    /// One-line description used as the trace CSV header.
    pub fn header(&self) -> String {
        let hyper = match self.method {
            Method::Sgd => String::new(),
            Method::Adam => format!(" beta1={ADAM_BETA1} beta2={ADAM_BETA2} eps_hat={ADAM_EPS:e}"),
            Method::Adagrad => format!(" eps_hat={ADAGRAD_EPS:e}"),
            Method::Adadelta => format!(" rho={ADADELTA_RHO} eps_hat={ADADELTA_EPS:e}"),
        };
        format!(
            "method={} p={} eta={} epsilon={:e} i_max={} seed={} optimize_theta={}{hyper}",
            self.method, self.p, self.eta, self.epsilon, self.i_max, self.seed, self.optimize_theta
        )
    }
}

/// `(Σ v^p)^{1/p}` for nonnegative `v`, scaled by the maximum so that small
/// entries do not underflow.
pub fn pnorm(values: &[f64], p: u32) -> f64 {
    let vmax = values.iter().copied().fold(0.0, f64::max);
    if vmax == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v / vmax).powi(p as i32)).sum();
    vmax * s.powf(1.0 / p as f64)
}

fn check_p(p: u32) -> Result<()> {
    if p < 2 || p % 2 == 1 {
        return Err(invalid(format!("p must be even and >= 2, got {p}")));
    }
    Ok(())
}

fn is_pole(cos_theta: f64) -> bool {
    1.0 - cos_theta.abs() <= 1e-14
}

/// Normalized Gram matrix of the sensing matrix on one grid, plus the data
/// needed to differentiate the relaxed objective.
struct Evaluation {
    m: usize,
    n: usize,
    modes: Vec<ModeIndex>,
    /// `Ã_{p,q}` row-major.
    rows: Vec<Complex64>,
    norms: Vec<f64>,
    /// `f_{a,b} = ⟨Ã_a, Ã_b⟩` for `a < b`, stored at `a * n + b`.
    gram: Vec<Complex64>,
    objective: f64,
    mu: f64,
}

impl Evaluation {
    fn new(grid: &Grid, bandwidth: u32, p: u32) -> Result<Self> {
        let modes = enumerate_modes(bandwidth, grid.kind());
        let (m, n) = (grid.len(), modes.len());
        let columns: Vec<Vec<Complex64>> = modes
            .par_iter()
            .map(|mode| sample_column(grid, mode))
            .collect::<Result<_>>()?;
        let norms: Vec<f64> = columns
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        if let Some(q) = norms.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::DegenerateColumn { column: q });
        }
        let gram_rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut row = vec![Complex64::default(); n];
                for b in a + 1..n {
                    row[b] = inner(&columns[a], &columns[b]) / (norms[a] * norms[b]);
                }
                row
            })
            .collect();
        let gram: Vec<Complex64> = gram_rows.into_iter().flatten().collect();
        let mut mags = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                mags.push(gram[a * n + b].norm());
            }
        }
        let mu = mags.iter().copied().fold(0.0, f64::max);
        let objective = pnorm(&mags, p);
        let mut rows = vec![Complex64::default(); m * n];
        for (q, col) in columns.iter().enumerate() {
            for (pi, z) in col.iter().enumerate() {
                rows[pi * n + q] = z / norms[q];
            }
        }
        Ok(Self {
            m,
            n,
            modes,
            rows,
            norms,
            gram,
            objective,
            mu,
        })
    }

    /// Hermitian weights `M_{a,b} = ρ_{a,b} conj(f_{a,b})` for `a < b`, with
    /// `ρ = (|f|/F)^{p-2}`.
    fn weights(&self, p: u32) -> Vec<Complex64> {
        let n = self.n;
        let mut w = vec![Complex64::default(); n * n];
        if self.objective == 0.0 {
            return w;
        }
        for a in 0..n {
            for b in a + 1..n {
                let f = self.gram[a * n + b];
                let mag = f.norm();
                if mag < MAGNITUDE_GUARD {
                    continue;
                }
                let rho = (mag / self.objective).powi(p as i32 - 2);
                let v = f.conj() * rho;
                w[a * n + b] = v;
                w[b * n + a] = v.conj();
            }
        }
        w
    }

    /// Gradient with respect to one azimuth-like angle family, where
    /// `∂Ã_{p,q}/∂x_p = i s c_q Ã_{p,q}`.
    fn phase_gradient(&self, weights: &[Complex64], orders: &[f64], s: f64) -> Vec<f64> {
        let n = self.n;
        if self.objective == 0.0 {
            return vec![0.0; self.m];
        }
        // W_{a,b} = i M_{a,b} (c_b - c_a)
        let w: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (a, b) = (idx / n, idx % n);
                weights[idx] * Complex64::new(0.0, orders[b] - orders[a])
            })
            .collect();
        let scale = s / (2.0 * self.objective);
        (0..self.m)
            .into_par_iter()
            .map(|p| {
                let row = &self.rows[p * n..(p + 1) * n];
                let mut acc = 0.0;
                for a in 0..n {
                    let wa = &w[a * n..(a + 1) * n];
                    let t: Complex64 = wa.iter().zip(row).map(|(x, y)| x * y).sum();
                    acc += (row[a].conj() * t).re;
                }
                scale * acc
            })
            .collect()
    }

    /// Gradient with respect to the elevations at the listed samples,
    /// differentiating both the entries and the column norms.
    fn theta_gradient(&self, grid: &Grid, weights: &[Complex64], samples: &[usize]) -> Vec<f64> {
        let n = self.n;
        if self.objective == 0.0 {
            return vec![0.0; samples.len()];
        }
        // c_a = Σ_{b≠a} ρ_{a,b} |f_{a,b}|²
        let c: Vec<f64> = (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&b| b != a)
                    .map(|b| {
                        let f = if a < b { self.gram[a * n + b] } else { self.gram[b * n + a].conj() };
                        (weights[a * n + b] * f).re
                    })
                    .sum()
            })
            .collect();
        let params: Vec<WignerDParams> = self
            .modes
            .iter()
            .map(|md| WignerDParams::new(md.l, md.k, md.n).expect("enumerated modes are valid"))
            .collect();
        let kind = grid.kind();
        samples
            .par_iter()
            .map(|&p| {
                let x = grid.cos_theta()[p];
                let (phi, chi) = (grid.phi()[p], grid.chi()[p]);
                let row = &self.rows[p * n..(p + 1) * n];
                let drow: Vec<Complex64> = self
                    .modes
                    .iter()
                    .zip(&params)
                    .enumerate()
                    .map(|(q, (md, par))| {
                        let dd = par.dtheta_cos_unchecked(x);
                        let (scale, phase) = match kind {
                            BasisKind::Wigner => {
                                (wigner_norm(md.l), -(md.k as f64 * phi + md.n as f64 * chi))
                            }
                            BasisKind::Spherical => (
                                ((2 * md.l + 1) as f64 / (4.0 * PI)).sqrt(),
                                md.k as f64 * phi,
                            ),
                        };
                        Complex64::from_polar(1.0, phase) * (scale * dd / self.norms[q])
                    })
                    .collect();
                let mut acc = 0.0;
                for a in 0..n {
                    let wa = &weights[a * n..(a + 1) * n];
                    let t: Complex64 = wa.iter().zip(row).map(|(x, y)| x * y).sum();
                    let h = (row[a].conj() * drow[a]).re;
                    acc += (drow[a].conj() * t).re - h * c[a];
                }
                acc / self.objective
            })
            .collect()
    }

    fn gradient(&self, grid: &Grid, p: u32, wrt: AngleFamily, samples: &[usize]) -> Vec<f64> {
        let weights = self.weights(p);
        match (wrt, grid.kind()) {
            (AngleFamily::Phi, BasisKind::Wigner) => {
                let k: Vec<f64> = self.modes.iter().map(|md| md.k as f64).collect();
                self.phase_gradient(&weights, &k, -1.0)
            }
            (AngleFamily::Phi, BasisKind::Spherical) => {
                let k: Vec<f64> = self.modes.iter().map(|md| md.k as f64).collect();
                self.phase_gradient(&weights, &k, 1.0)
            }
            (AngleFamily::Chi, BasisKind::Wigner) => {
                let nn: Vec<f64> = self.modes.iter().map(|md| md.n as f64).collect();
                self.phase_gradient(&weights, &nn, -1.0)
            }
            (AngleFamily::Chi, BasisKind::Spherical) => vec![0.0; self.m],
            (AngleFamily::Theta, _) => self.theta_gradient(grid, &weights, samples),
        }
    }
}

fn empty_problem(grid: &Grid, bandwidth: u32) -> Result<bool> {
    if bandwidth == 0 {
        return Err(invalid("bandwidth must be at least 1"));
    }
    if grid.is_empty() {
        return Err(invalid("grid is empty"));
    }
    Ok(mode_count(bandwidth, grid.kind()) < 2)
}

/// `(Σ_{r<q} |f_{q,r}|^p)^{1/p}` over the normalized column inner products.
pub fn pnorm_objective(grid: &Grid, bandwidth: u32, p: u32) -> Result<f64> {
    check_p(p)?;
    if empty_problem(grid, bandwidth)? {
        return Ok(0.0);
    }
    Ok(Evaluation::new(grid, bandwidth, p)?.objective)
}

/// Analytic gradient of [`pnorm_objective`] with respect to one angle vector.
///
/// The θ-gradient is refused when any sample sits on a pole.
pub fn gradient(grid: &Grid, bandwidth: u32, p: u32, wrt: AngleFamily) -> Result<Vec<f64>> {
    check_p(p)?;
    if wrt == AngleFamily::Theta {
        if let Some(sample) = grid.cos_theta().iter().position(|&x| is_pole(x)) {
            return Err(Error::PoleSingularity { sample });
        }
    }
    if empty_problem(grid, bandwidth)? {
        return Ok(vec![0.0; grid.len()]);
    }
    let ev = Evaluation::new(grid, bandwidth, p)?;
    let all: Vec<usize> = (0..grid.len()).collect();
    Ok(ev.gradient(grid, p, wrt, &all))
}

/// Accumulators of a first-order method.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    method: Method,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u32,
}

impl OptimizerState {
    pub fn new(method: Method, len: usize) -> Self {
        Self {
            method,
            first: vec![0.0; len],
            second: vec![0.0; len],
            t: 0,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn iterations(&self) -> u32 {
        self.t
    }

    /// Applies one update in place without wrapping.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], eta: f64) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient lengths differ");
        assert_eq!(params.len(), self.first.len(), "state was built for another size");
        self.t += 1;
        match self.method {
            Method::Sgd => {
                for (x, g) in params.iter_mut().zip(grads) {
                    *x -= eta * g;
                }
            }
            Method::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.first[i] = ADAM_BETA1 * self.first[i] + (1.0 - ADAM_BETA1) * g;
                    self.second[i] = ADAM_BETA2 * self.second[i] + (1.0 - ADAM_BETA2) * g * g;
                    let mhat = self.first[i] / bc1;
                    let vhat = self.second[i] / bc2;
                    params[i] -= eta * mhat / (vhat.sqrt() + ADAM_EPS);
                }
            }
            Method::Adagrad => {
                for i in 0..params.len() {
                    let g = grads[i];
                    self.second[i] += g * g;
                    params[i] -= eta * g / (self.second[i].sqrt() + ADAGRAD_EPS);
                }
            }
            Method::Adadelta => {
                // `second` holds E[g²], `first` holds E[Δx²].
                for i in 0..params.len() {
                    let g = grads[i];
                    self.second[i] = ADADELTA_RHO * self.second[i] + (1.0 - ADADELTA_RHO) * g * g;
                    let delta = ((self.first[i] + ADADELTA_EPS).sqrt()
                        / (self.second[i] + ADADELTA_EPS).sqrt())
                        * g;
                    self.first[i] = ADADELTA_RHO * self.first[i] + (1.0 - ADADELTA_RHO) * delta * delta;
                    params[i] -= eta * delta;
                }
            }
        }
    }
}

/// One update followed by wrapping every angle into `[0, 2π)`.
pub fn step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64], eta: f64) {
    state.update(params, grads, eta);
    for x in params.iter_mut() {
        *x = wrap_angle(*x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub mu: f64,
}

pub const TRACE_CSV_HEADER: &str = "iter,objective,mu";

#[derive(Debug, Clone)]
pub struct OptimizerRun {
    pub config: OptimizerConfig,
    pub bandwidth: u32,
    pub kind: BasisKind,
    pub trace: Vec<TracePoint>,
    pub best_grid: Grid,
    pub final_mu: f64,
    pub converged: bool,
    /// Normalized equal-order bound; absent for `B < 3`.
    pub lower_bound: Option<f64>,
}

impl OptimizerRun {
    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# {} B={} m={} kind={}",
            self.config.header(),
            self.bandwidth,
            self.best_grid.len(),
            self.kind
        )?;
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for t in &self.trace {
            writeln!(out, "{},{},{}", t.iter, format_f64(t.objective), format_f64(t.mu))?;
        }
        Ok(())
    }
}

/// Uniform `φ`, `χ` on `[0, 2π)` drawn from a ChaCha8 stream seeded with `seed`.
pub fn random_angles(m: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
    let chi = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
    (phi, chi)
}

/// Runs the descent from uniformly random `φ₀`, `χ₀` on the equispaced
/// elevation grid. Deterministic for a given seed.
pub fn run(config: &OptimizerConfig, bandwidth: u32, m: usize, kind: BasisKind) -> Result<OptimizerRun> {
    config.validate()?;
    if bandwidth == 0 {
        return Err(invalid("bandwidth must be at least 1"));
    }
    if mode_count(bandwidth, kind) < 2 {
        return Err(invalid("optimization needs at least two columns"));
    }
    let base = Grid::equispaced(m, kind)?;
    let lower_bound = if bandwidth >= 3 {
        Some(theorem_lower_bound(bandwidth, m, true)?)
    } else {
        None
    };

    let (phi0, chi0) = random_angles(m, config.seed);
    let chi0 = match kind {
        BasisKind::Wigner => chi0,
        BasisKind::Spherical => vec![0.0; m],
    };

    let interior: Vec<usize> = if config.optimize_theta {
        (1..m.saturating_sub(1)).collect()
    } else {
        Vec::new()
    };
    let use_chi = kind == BasisKind::Wigner;
    let mut angles = phi0;
    if use_chi {
        angles.extend(chi0.iter());
    }
    let mut theta = base.theta().to_vec();
    let mut interior_theta: Vec<f64> = interior.iter().map(|&p| theta[p]).collect();
    let mut angle_state = OptimizerState::new(config.method, angles.len());
    let mut theta_state = OptimizerState::new(config.method, interior_theta.len());

    let build = |angles: &[f64], theta: &[f64]| -> Result<Grid> {
        let phi = angles[..m].to_vec();
        let chi = if use_chi { angles[m..].to_vec() } else { vec![0.0; m] };
        let g = base.with_angles(phi, chi)?;
        if config.optimize_theta {
            g.with_theta(theta.to_vec())
        } else {
            Ok(g)
        }
    };

    let mut trace = Vec::new();
    let mut best: Option<(f64, Grid)> = None;
    let mut converged = false;
    for iter in 0..config.i_max {
        let grid = build(&angles, &theta)?;
        let ev = Evaluation::new(&grid, bandwidth, config.p)?;
        trace.push(TracePoint {
            iter,
            objective: ev.objective,
            mu: ev.mu,
        });
        if best.as_ref().is_none_or(|(mu, _)| ev.mu < *mu) {
            best = Some((ev.mu, grid.clone()));
        }
        if lower_bound.is_some_and(|lb| (lb - ev.mu).abs() <= config.epsilon) {
            converged = true;
            break;
        }
        if iter + 1 == config.i_max {
            break;
        }
        let mut grads = ev.gradient(&grid, config.p, AngleFamily::Phi, &[]);
        if use_chi {
            grads.extend(ev.gradient(&grid, config.p, AngleFamily::Chi, &[]));
        }
        step(&mut angle_state, &mut angles, &grads, config.eta);
        if config.optimize_theta && !interior.is_empty() {
            let g = ev.gradient(&grid, config.p, AngleFamily::Theta, &interior);
            theta_state.update(&mut interior_theta, &g, config.eta);
            for (slot, &p) in interior_theta.iter_mut().zip(&interior) {
                *slot = slot.clamp(THETA_MARGIN, PI - THETA_MARGIN);
                theta[p] = *slot;
            }
        }
    }
    let (final_mu, best_grid) = best.expect("at least one iteration runs");
    Ok(OptimizerRun {
        config: config.clone(),
        bandwidth,
        kind,
        trace,
        best_grid,
        final_mu,
        converged,
        lower_bound,
    })
}
