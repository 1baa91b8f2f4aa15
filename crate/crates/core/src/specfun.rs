//! Legendre, associated Legendre and Jacobi polynomials, Wigner d- and
//! D-functions and complex spherical harmonics.
//!
//! Conventions:
//!
//! * `P_l^k` carries the Condon–Shortley phase `(-1)^k`.
//! * `d_l^{k,n}(cos θ) = ω √γ sin^ξ(θ/2) cos^λ(θ/2) P_α^{(ξ,λ)}(cos θ)` with
//!   `ξ = |k-n|`, `λ = |k+n|`, `α = l - (ξ+λ)/2` and `ω = 1` for `n ≥ k`,
//!   `(-1)^{n-k}` otherwise.
//! * `D_l^{k,n}(θ,φ,χ) = N_l e^{-ikφ} d_l^{k,n}(cos θ) e^{-inχ}` with
//!   `N_l = sqrt((2l+1)/(8π²))`.
//! * `Y_l^k(θ,φ) = N_l^k P_l^k(cos θ) e^{ikφ}`.
//!
//! All polynomials are evaluated by three-term recurrences. Factorial ratios
//! go through [`ln_factorial`] so that degrees well beyond 128 stay finite.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Slack accepted on `|x| ≤ 1` before a domain error is raised.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

const LN_FACTORIAL_TABLE: usize = 2048;

/// `ln(n!)`, accumulated as a sum of logarithms.
pub fn ln_factorial(n: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..LN_FACTORIAL_TABLE {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    match table.get(n as usize) {
        Some(v) => *v,
        None => {
            table[LN_FACTORIAL_TABLE - 1]
                + (LN_FACTORIAL_TABLE as u32..=n)
                    .map(|i| (i as f64).ln())
                    .sum::<f64>()
        }
    }
}

fn check_domain(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_TOLERANCE {
        return Err(Error::Domain { x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

fn check_order(degree: u32, order: i32) -> Result<()> {
    if order.unsigned_abs() > degree {
        return Err(Error::Order { degree, order });
    }
    Ok(())
}

fn parity_sign(e: i64) -> f64 {
    if e.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `N_l = sqrt((2l+1)/(8π²))`, the unit-norm factor of `D_l^{k,n}` on SO(3).
pub fn wigner_norm(l: u32) -> f64 {
    ((2 * l + 1) as f64 / (8.0 * PI * PI)).sqrt()
}

/// `C_l^k = sqrt((l-k)!/(l+k)!)`, linking `d_l^{k,0}` to `P_l^k`.
pub fn legendre_scale(l: u32, k: i32) -> Result<f64> {
    check_order(l, k)?;
    let lo = (l as i64 - k as i64) as u32;
    let hi = (l as i64 + k as i64) as u32;
    Ok((0.5 * (ln_factorial(lo) - ln_factorial(hi))).exp())
}

/// `N_l^k = sqrt((2l+1)/(4π) · (l-k)!/(l+k)!)`, the unit-norm factor of `Y_l^k`.
pub fn sh_norm(l: u32, k: i32) -> Result<f64> {
    Ok(((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * legendre_scale(l, k)?)
}

/// Legendre polynomial `P_l(x)`.
pub fn legendre(l: u32, x: f64) -> Result<f64> {
    let x = check_domain(x)?;
    Ok(legendre_unchecked(l, x))
}

pub(crate) fn legendre_unchecked(l: u32, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for j in 2..=l {
                let j = j as f64;
                let next = ((2.0 * j - 1.0) * x * cur - (j - 1.0) * prev) / j;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `P_0(x), …, P_lmax(x)` in one pass of the recurrence.
pub fn legendre_sequence(lmax: u32, x: f64) -> Result<Vec<f64>> {
    let x = check_domain(x)?;
    let mut out = Vec::with_capacity(lmax as usize + 1);
    out.push(1.0);
    if lmax >= 1 {
        out.push(x);
    }
    for j in 2..=lmax as usize {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * x * out[j - 1] - (jf - 1.0) * out[j - 2]) / jf;
        out.push(next);
    }
    Ok(out)
}

/// Associated Legendre function `P_l^k(x)` with the Condon–Shortley phase.
///
/// Negative orders are mapped through
/// `P_l^{-k} = (-1)^k (l-k)!/(l+k)! P_l^k`.
pub fn assoc_legendre(l: u32, k: i32, x: f64) -> Result<f64> {
    check_order(l, k)?;
    let x = check_domain(x)?;
    let ka = k.unsigned_abs();
    let positive = assoc_legendre_nonneg(l, ka, x);
    if k >= 0 {
        Ok(positive)
    } else {
        let ratio = (ln_factorial(l - ka) - ln_factorial(l + ka)).exp();
        Ok(parity_sign(ka as i64) * ratio * positive)
    }
}

fn assoc_legendre_nonneg(l: u32, k: u32, x: f64) -> f64 {
    let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    // P_k^k = (-1)^k (2k-1)!! s^k
    let mut pkk = 1.0;
    for i in 1..=k {
        pkk *= -((2 * i - 1) as f64) * s;
    }
    if l == k {
        return pkk;
    }
    let mut prev = pkk;
    let mut cur = x * (2 * k + 1) as f64 * pkk;
    for j in (k + 2)..=l {
        let next = ((2 * j - 1) as f64 * x * cur - (j + k - 1) as f64 * prev) / (j - k) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Jacobi polynomial `P_α^{(a,b)}(x)` for nonnegative integer parameters.
pub fn jacobi(alpha: u32, a: u32, b: u32, x: f64) -> Result<f64> {
    let x = check_domain(x)?;
    Ok(jacobi_unchecked(alpha, a, b, x))
}

pub(crate) fn jacobi_unchecked(alpha: u32, a: u32, b: u32, x: f64) -> f64 {
    let (a, b) = (a as f64, b as f64);
    if alpha == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for n in 2..=alpha {
        let n = n as f64;
        let s = 2.0 * n + a + b;
        let c1 = 2.0 * n * (n + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * s;
        let next = (c2 * cur - c3 * prev) / c1;
        prev = cur;
        cur = next;
    }
    cur
}

/// `d/dx P_α^{(a,b)}(x) = (α+a+b+1)/2 · P_{α-1}^{(a+1,b+1)}(x)`.
pub fn jacobi_derivative(alpha: u32, a: u32, b: u32, x: f64) -> Result<f64> {
    let x = check_domain(x)?;
    Ok(jacobi_derivative_unchecked(alpha, a, b, x))
}

fn jacobi_derivative_unchecked(alpha: u32, a: u32, b: u32, x: f64) -> f64 {
    if alpha == 0 {
        return 0.0;
    }
    0.5 * (alpha + a + b + 1) as f64 * jacobi_unchecked(alpha - 1, a + 1, b + 1, x)
}

/// Derived parameters of `d_l^{k,n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerDParams {
    pub l: u32,
    pub k: i32,
    pub n: i32,
    /// `|k - n|`
    pub xi: u32,
    /// `|k + n|`
    pub lambda: u32,
    /// `l - (ξ+λ)/2`, the Jacobi degree.
    pub alpha: u32,
    /// `±1`
    pub omega: f64,
    /// `α!(α+ξ+λ)! / ((α+ξ)!(α+λ)!)`
    pub gamma: f64,
}

impl WignerDParams {
    pub fn new(l: u32, k: i32, n: i32) -> Result<Self> {
        check_order(l, k)?;
        check_order(l, n)?;
        let xi = (k - n).unsigned_abs();
        let lambda = (k + n).unsigned_abs();
        // ξ + λ = 2 max(|k|, |n|), so the halving is exact.
        let alpha = l - (xi + lambda) / 2;
        let omega = if n >= k { 1.0 } else { parity_sign((n - k) as i64) };
        let ln_gamma = ln_factorial(alpha) + ln_factorial(alpha + xi + lambda)
            - ln_factorial(alpha + xi)
            - ln_factorial(alpha + lambda);
        Ok(Self {
            l,
            k,
            n,
            xi,
            lambda,
            alpha,
            omega,
            gamma: ln_gamma.exp(),
        })
    }

    fn prefactor(&self) -> f64 {
        self.omega * self.gamma.sqrt()
    }

    /// `d_l^{k,n}` at `cos θ = x`.
    pub fn eval_cos(&self, x: f64) -> Result<f64> {
        let x = check_domain(x)?;
        Ok(self.eval_cos_unchecked(x))
    }

    pub(crate) fn eval_cos_unchecked(&self, x: f64) -> f64 {
        let sh = (0.5 * (1.0 - x)).max(0.0).sqrt();
        let ch = (0.5 * (1.0 + x)).max(0.0).sqrt();
        self.prefactor()
            * sh.powi(self.xi as i32)
            * ch.powi(self.lambda as i32)
            * jacobi_unchecked(self.alpha, self.xi, self.lambda, x)
    }

    /// `∂/∂θ d_l^{k,n}(cos θ)` at `cos θ = x`, `θ ∈ [0, π]`.
    ///
    /// Differentiates the half-angle weight directly, so the expression is
    /// regular at the poles.
    pub fn dtheta_cos(&self, x: f64) -> Result<f64> {
        let x = check_domain(x)?;
        Ok(self.dtheta_cos_unchecked(x))
    }

    pub(crate) fn dtheta_cos_unchecked(&self, x: f64) -> f64 {
        let sh = (0.5 * (1.0 - x)).max(0.0).sqrt();
        let ch = (0.5 * (1.0 + x)).max(0.0).sqrt();
        let (xi, la) = (self.xi as i32, self.lambda as i32);
        let weight = sh.powi(xi) * ch.powi(la);
        let mut dweight = 0.0;
        if xi > 0 {
            dweight += 0.5 * xi as f64 * sh.powi(xi - 1) * ch.powi(la + 1);
        }
        if la > 0 {
            dweight -= 0.5 * la as f64 * sh.powi(xi + 1) * ch.powi(la - 1);
        }
        let sin_theta = 2.0 * sh * ch;
        let jac = jacobi_unchecked(self.alpha, self.xi, self.lambda, x);
        let djac = jacobi_derivative_unchecked(self.alpha, self.xi, self.lambda, x);
        self.prefactor() * (dweight * jac - weight * djac * sin_theta)
    }
}

/// Wigner d-function `d_l^{k,n}(cos θ)`.
pub fn wigner_d(l: u32, k: i32, n: i32, theta: f64) -> Result<f64> {
    WignerDParams::new(l, k, n)?.eval_cos(theta.cos())
}

/// Complex spherical harmonic `Y_l^k(θ, φ)`.
///
/// Evaluated as `sqrt((2l+1)/(4π)) d_l^{k,0}(cos θ) e^{ikφ}`, which equals
/// `N_l^k P_l^k(cos θ) e^{ikφ}` without forming the unbounded `P_l^k`.
pub fn spherical_harmonic(l: u32, k: i32, theta: f64, phi: f64) -> Result<Complex64> {
    let d = WignerDParams::new(l, k, 0)?.eval_cos(theta.cos())?;
    let amp = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * d;
    Ok(Complex64::from_polar(1.0, k as f64 * phi) * amp)
}

/// Wigner D-function `D_l^{k,n}(θ, φ, χ)`.
pub fn wigner_big_d(l: u32, k: i32, n: i32, theta: f64, phi: f64, chi: f64) -> Result<Complex64> {
    let d = wigner_d(l, k, n, theta)?;
    let phase = -(k as f64 * phi + n as f64 * chi);
    Ok(Complex64::from_polar(1.0, phase) * (wigner_norm(l) * d))
}
