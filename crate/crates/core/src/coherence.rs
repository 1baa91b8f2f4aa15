//! Sensing matrices, mutual coherence and the equal-order lower bound.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grids::{enumerate_modes, equispaced_cos, BasisKind, Grid, ModeIndex};
use crate::specfun::{legendre_unchecked, wigner_norm, WignerDParams};
use crate::wigner3j::{threej, ThreeJArgs};

/// `m × N` matrix of basis functions sampled on a grid, stored column-major.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    rows: usize,
    modes: Vec<ModeIndex>,
    entries: Vec<Complex64>,
    column_norms: Vec<f64>,
    kind: BasisKind,
    bandwidth: u32,
}

/// Samples of one basis function on every grid point.
pub(crate) fn sample_column(grid: &Grid, mode: &ModeIndex) -> Result<Vec<Complex64>> {
    let params = WignerDParams::new(mode.l, mode.k, mode.n)?;
    let (cos_t, phi, chi) = (grid.cos_theta(), grid.phi(), grid.chi());
    let col = match grid.kind() {
        BasisKind::Wigner => {
            let norm = wigner_norm(mode.l);
            (0..grid.len())
                .map(|p| {
                    let d = params.eval_cos_unchecked(cos_t[p]);
                    let phase = -(mode.k as f64 * phi[p] + mode.n as f64 * chi[p]);
                    Complex64::from_polar(1.0, phase) * (norm * d)
                })
                .collect()
        }
        BasisKind::Spherical => {
            let norm = ((2 * mode.l + 1) as f64 / (4.0 * PI)).sqrt();
            (0..grid.len())
                .map(|p| {
                    let d = params.eval_cos_unchecked(cos_t[p]);
                    Complex64::from_polar(1.0, mode.k as f64 * phi[p]) * (norm * d)
                })
                .collect()
        }
    };
    Ok(col)
}

/// `Σ_p conj(a_p) b_p`, the first argument conjugated.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Assembles `A_{p,q}` from `D_{l(q)}^{k(q),n(q)}` or `Y_{l(q)}^{k(q)}` depending
/// on the grid kind, with columns in [`enumerate_modes`] order.
pub fn build_sensing_matrix(grid: &Grid, bandwidth: u32) -> Result<SensingMatrix> {
    if grid.is_empty() {
        return Err(invalid("grid is empty"));
    }
    if bandwidth == 0 {
        return Err(invalid("bandwidth must be at least 1"));
    }
    let modes = enumerate_modes(bandwidth, grid.kind());
    let columns: Vec<Vec<Complex64>> = modes
        .par_iter()
        .map(|mode| sample_column(grid, mode))
        .collect::<Result<_>>()?;
    let column_norms = columns
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    Ok(SensingMatrix {
        rows: grid.len(),
        modes,
        entries: columns.into_iter().flatten().collect(),
        column_norms,
        kind: grid.kind(),
        bandwidth,
    })
}

impl SensingMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn bandwidth(&self) -> u32 {
        self.bandwidth
    }

    pub fn column(&self, q: usize) -> &[Complex64] {
        &self.entries[q * self.rows..(q + 1) * self.rows]
    }

    pub fn entry(&self, p: usize, q: usize) -> Complex64 {
        self.entries[q * self.rows + p]
    }

    /// `⟨col_r, col_q⟩ = Σ_p conj(A_{p,r}) A_{p,q}`.
    pub fn inner(&self, r: usize, q: usize) -> Complex64 {
        inner(self.column(r), self.column(q))
    }
}

/// Maximum normalized column correlation and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceValue {
    pub mu: f64,
    /// Column indices `(r, q)` with `r < q`.
    pub columns: (usize, usize),
    pub modes: (ModeIndex, ModeIndex),
}

/// `max_{r<q} |⟨col_r, col_q⟩| / (‖col_r‖ ‖col_q‖)`.
///
/// Rows of the Gram matrix are streamed one column at a time, so memory stays
/// linear in `N`. Exact ties go to the lexicographically smallest `(r, q)`.
pub fn mutual_coherence(a: &SensingMatrix) -> Result<CoherenceValue> {
    let n = a.cols();
    if n < 2 {
        return Err(invalid("mutual coherence needs at least two columns"));
    }
    if let Some(q) = a.column_norms.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateColumn { column: q });
    }
    let best = (1..n)
        .into_par_iter()
        .map(|q| {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for r in 0..q {
                let v = a.inner(r, q).norm() / (a.column_norms[r] * a.column_norms[q]);
                if v > best.0 {
                    best = (v, r);
                }
            }
            (best.0, best.1, q)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            |x, y| {
                if y.0 > x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) {
                    y
                } else {
                    x
                }
            },
        );
    let (mu, r, q) = best;
    Ok(CoherenceValue {
        mu,
        columns: (r, q),
        modes: (a.modes[r], a.modes[q]),
    })
}

/// `sqrt((N - m)/(m (N - 1)))`, or 0 once `m ≥ N`.
pub fn welch_bound(m: usize, n: usize) -> f64 {
    if m == 0 || m >= n {
        return 0.0;
    }
    ((n - m) as f64 / (m as f64 * (n - 1) as f64)).sqrt()
}

/// `|Σ_p P_{B-1}(cos θ_p) P_{B-3}(cos θ_p)|` on the equispaced grid with `m`
/// samples, divided by the sample norms of both vectors when `normalized`.
pub fn theorem_lower_bound(bandwidth: u32, m: usize, normalized: bool) -> Result<f64> {
    if bandwidth < 3 {
        return Err(invalid(format!(
            "the equal-order bound needs bandwidth >= 3, got {bandwidth}"
        )));
    }
    let xs = equispaced_cos(m)?;
    let (hi, lo) = (bandwidth - 1, bandwidth - 3);
    let (mut dot, mut nh, mut nl) = (0.0, 0.0, 0.0);
    for &x in &xs {
        let (a, b) = (legendre_unchecked(hi, x), legendre_unchecked(lo, x));
        dot += a * b;
        nh += a * a;
        nl += b * b;
    }
    Ok(if normalized {
        dot.abs() / (nh.sqrt() * nl.sqrt())
    } else {
        dot.abs()
    })
}

/// Largest equal-order inner product of Wigner d-functions found by search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualOrderMax {
    pub value: f64,
    pub l1: u32,
    pub l2: u32,
    pub k: i32,
    pub n: i32,
}

/// Restrictions applied by [`max_equal_order_product_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EqualOrderSearch {
    /// Divide each product by the sample norms of both vectors.
    pub normalized: bool,
    /// Only `n = 0` (associated Legendre) pairs.
    pub zero_n_only: bool,
}

/// Unnormalized search over every `0 ≤ l1 < l2 ≤ B-1`, `|k|, |n| ≤ l1` of
/// `|Σ_p d_{l1}^{k,n}(cos θ_p) d_{l2}^{k,n}(cos θ_p)|` at the grid elevations.
pub fn max_equal_order_product(grid: &Grid, bandwidth: u32) -> Result<EqualOrderMax> {
    max_equal_order_product_with(grid, bandwidth, EqualOrderSearch::default())
}

/// [`max_equal_order_product`] with optional normalization and restriction.
///
/// Candidates are visited in lexicographic `(l1, l2, k, n)` order and only a
/// strictly larger value replaces the incumbent.
pub fn max_equal_order_product_with(
    grid: &Grid,
    bandwidth: u32,
    search: EqualOrderSearch,
) -> Result<EqualOrderMax> {
    if bandwidth < 3 {
        return Err(invalid(format!(
            "equal-order search needs bandwidth >= 3, got {bandwidth}"
        )));
    }
    let xs = grid.cos_theta();
    let lmax = bandwidth - 1;
    let lm = lmax as i32;
    // samples[(l, k, n)] for l >= max(|k|, |n|)
    let width = (2 * lmax + 1) as usize;
    let idx = |l: u32, k: i32, n: i32| -> usize {
        ((l as usize * width) + (k + lm) as usize) * width + (n + lm) as usize
    };
    let mut samples: Vec<Option<Vec<f64>>> = vec![None; bandwidth as usize * width * width];
    for l in 0..=lmax {
        let li = l as i32;
        for k in -li..=li {
            for n in -li..=li {
                let params = WignerDParams::new(l, k, n)?;
                samples[idx(l, k, n)] =
                    Some(xs.iter().map(|&x| params.eval_cos_unchecked(x)).collect());
            }
        }
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut best = EqualOrderMax {
        value: f64::NEG_INFINITY,
        l1: 0,
        l2: 0,
        k: 0,
        n: 0,
    };
    for l1 in 0..lmax {
        let li = l1 as i32;
        for l2 in (l1 + 1)..=lmax {
            for k in -li..=li {
                for n in -li..=li {
                    if search.zero_n_only && n != 0 {
                        continue;
                    }
                    let a = samples[idx(l1, k, n)].as_ref().expect("filled above");
                    let b = samples[idx(l2, k, n)].as_ref().expect("filled above");
                    let mut v = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs();
                    if search.normalized {
                        v /= norm(a) * norm(b);
                    }
                    if v > best.value {
                        best = EqualOrderMax { value: v, l1, l2, k, n };
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Direct `Σ_p conj(D_{l1}^{k1,n1}) D_{l2}^{k2,n2}` over the grid points.
pub fn direct_inner_product(first: ModeIndex, second: ModeIndex, grid: &Grid) -> Result<Complex64> {
    let g = as_wigner(grid);
    Ok(inner(&sample_column(&g, &first)?, &sample_column(&g, &second)?))
}

fn as_wigner(grid: &Grid) -> Grid {
    if grid.kind() == BasisKind::Wigner {
        grid.clone()
    } else {
        Grid::new(
            grid.theta().to_vec(),
            grid.phi().to_vec(),
            grid.chi().to_vec(),
            BasisKind::Wigner,
        )
        .expect("angles were validated when the grid was built")
    }
}

/// `Σ_p conj(D_{l1}^{k1,n1}) D_{l2}^{k2,n2}` through the 3j expansion into
/// single D-functions of degree `|l2-l1| ≤ l̂ ≤ l1+l2` and orders
/// `k̂ = k2-k1`, `n̂ = n2-n1`, with phase `(-1)^{k2+n2}`.
pub fn product_expansion(first: ModeIndex, second: ModeIndex, grid: &Grid) -> Result<Complex64> {
    for m in [first, second] {
        WignerDParams::new(m.l, m.k, m.n)?;
    }
    let g = as_wigner(grid);
    let (l1, l2) = (first.l, second.l);
    let kh = second.k - first.k;
    let nh = second.n - first.n;
    let phase = if (second.k + second.n).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut total = Complex64::new(0.0, 0.0);
    for lh in l1.abs_diff(l2)..=(l1 + l2) {
        if kh.unsigned_abs() > lh || nh.unsigned_abs() > lh {
            continue;
        }
        let wn = threej(&ThreeJArgs::new(l1, l2, lh, -first.n, second.n, -nh));
        let wk = threej(&ThreeJArgs::new(l1, l2, lh, -first.k, second.k, -kh));
        if wn == 0.0 || wk == 0.0 {
            continue;
        }
        let weight =
            (((2 * l1 + 1) * (2 * l2 + 1) * (2 * lh + 1)) as f64 / (8.0 * PI * PI)).sqrt();
        let single: Complex64 = sample_column(&g, &ModeIndex::new(lh, kh, nh))?.iter().sum();
        total += single * (weight * wn * wk);
    }
    Ok(total * phase)
}

/// Equal-order product `Σ_p d_{l1}^{k,n} d_{l2}^{k,n}` at the grid elevations,
/// written as a 3j-weighted combination of Legendre sums.
pub fn equal_order_legendre_form(l1: u32, l2: u32, k: i32, n: i32, grid: &Grid) -> Result<f64> {
    WignerDParams::new(l1, k, n)?;
    WignerDParams::new(l2, k, n)?;
    let phase = if (k + n).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut total = 0.0;
    for lh in l1.abs_diff(l2)..=(l1 + l2) {
        let w = threej(&ThreeJArgs::new(l1, l2, lh, -n, n, 0))
            * threej(&ThreeJArgs::new(l1, l2, lh, -k, k, 0));
        if w == 0.0 {
            continue;
        }
        let sum: f64 = grid.cos_theta().iter().map(|&x| legendre_unchecked(lh, x)).sum();
        total += (2 * lh + 1) as f64 * w * sum;
    }
    Ok(phase * total)
}

/// Coherence of one sensing matrix together with reference bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    #[serde(rename = "B")]
    pub bandwidth: u32,
    pub m: usize,
    #[serde(rename = "N")]
    pub columns: usize,
    pub kind: BasisKind,
    pub mu: f64,
    /// Normalized equal-order bound for the equispaced elevation with `m`
    /// samples; absent when the bandwidth is below 3.
    pub lower_bound: Option<f64>,
    pub welch: f64,
    pub argmax: (ModeIndex, ModeIndex),
}

pub const REPORT_CSV_HEADER: &str =
    "B,m,N,kind,mu,lower_bound,welch,arg_l1,arg_k1,arg_n1,arg_l2,arg_k2,arg_n2";

impl CoherenceReport {
    pub fn from_matrix(a: &SensingMatrix) -> Result<Self> {
        let c = mutual_coherence(a)?;
        let m = a.rows();
        let lower_bound = if a.bandwidth() >= 3 && m >= 2 {
            Some(theorem_lower_bound(a.bandwidth(), m, true)?)
        } else {
            None
        };
        Ok(Self {
            bandwidth: a.bandwidth(),
            m,
            columns: a.cols(),
            kind: a.kind(),
            mu: c.mu,
            lower_bound,
            welch: welch_bound(m, a.cols()),
            argmax: c.modes,
        })
    }

    pub fn csv_row(&self) -> String {
        use crate::grids::format_f64;
        let (a, b) = self.argmax;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.bandwidth,
            self.m,
            self.columns,
            self.kind,
            format_f64(self.mu),
            self.lower_bound.map(format_f64).unwrap_or_default(),
            format_f64(self.welch),
            a.l,
            a.k,
            a.n,
            b.l,
            b.k,
            b.n
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{REPORT_CSV_HEADER}")?;
        writeln!(out, "{}", self.csv_row())?;
        Ok(())
    }

    /// JSON object carrying the same fields as the CSV row.
    pub fn to_json(&self) -> String {
        let (a, b) = self.argmax;
        let value = serde_json::json!({
            "B": self.bandwidth,
            "m": self.m,
            "N": self.columns,
            "kind": self.kind,
            "mu": self.mu,
            "lower_bound": self.lower_bound,
            "welch": self.welch,
            "arg_l1": a.l,
            "arg_k1": a.k,
            "arg_n1": a.n,
            "arg_l2": b.l,
            "arg_k2": b.k,
            "arg_n2": b.n,
        });
        serde_json::to_string_pretty(&value).expect("report serializes")
    }
}

/// Builds the matrix for `grid` and reports its coherence.
pub fn coherence_report(grid: &Grid, bandwidth: u32) -> Result<CoherenceReport> {
    CoherenceReport::from_matrix(&build_sensing_matrix(grid, bandwidth)?)
}
