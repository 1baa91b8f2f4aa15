//! Sampling grids and mode enumeration.

use std::f64::consts::TAU;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which basis the columns of a sensing matrix are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Wigner D-functions on SO(3), columns indexed by `(l, k, n)`.
    Wigner,
    /// Spherical harmonics on S², columns indexed by `(l, k)`.
    #[serde(rename = "sh")]
    Spherical,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Wigner => "wigner",
            BasisKind::Spherical => "sh",
        })
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wigner" => Ok(BasisKind::Wigner),
            "sh" | "spherical" => Ok(BasisKind::Spherical),
            other => Err(invalid(format!("unknown basis kind `{other}`"))),
        }
    }
}

/// Degree and orders of one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub l: u32,
    pub k: i32,
    /// Always 0 for spherical harmonics.
    pub n: i32,
}

impl ModeIndex {
    pub const fn new(l: u32, k: i32, n: i32) -> Self {
        Self { l, k, n }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.l, self.k, self.n)
    }
}

/// Number of columns for bandwidth `b`.
pub fn mode_count(b: u32, kind: BasisKind) -> usize {
    let b = b as usize;
    match kind {
        BasisKind::Wigner => b * (4 * b * b).saturating_sub(1) / 3,
        BasisKind::Spherical => b * b,
    }
}

/// Columns for bandwidth `b` in lexicographic `(l, k, n)` order.
pub fn enumerate_modes(b: u32, kind: BasisKind) -> Vec<ModeIndex> {
    let mut modes = Vec::with_capacity(mode_count(b, kind));
    for l in 0..b {
        let li = l as i32;
        for k in -li..=li {
            match kind {
                BasisKind::Wigner => modes.extend((-li..=li).map(|n| ModeIndex::new(l, k, n))),
                BasisKind::Spherical => modes.push(ModeIndex::new(l, k, 0)),
            }
        }
    }
    modes
}

/// Position of `mode` in [`enumerate_modes`], if it belongs to the bandwidth.
pub fn mode_position(mode: &ModeIndex, b: u32, kind: BasisKind) -> Option<usize> {
    let (l, k, n) = (mode.l as usize, mode.k, mode.n);
    if mode.l >= b || k.unsigned_abs() > mode.l || n.unsigned_abs() > mode.l {
        return None;
    }
    let ks = (k + mode.l as i32) as usize;
    match kind {
        BasisKind::Wigner => {
            let before = mode_count(mode.l, kind);
            let width = 2 * l + 1;
            Some(before + ks * width + (n + mode.l as i32) as usize)
        }
        BasisKind::Spherical if n == 0 => Some(l * l + ks),
        BasisKind::Spherical => None,
    }
}

/// Smallest `m` with `m ≥ (b+2)²/10 + 1`.
pub fn min_samples(b: u32) -> usize {
    let s = (b as usize + 2).pow(2) + 10;
    s.div_ceil(10)
}

/// `cos θ_p = (2p - m - 1)/(m - 1)` for `p = 1..m`.
pub fn equispaced_cos(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(invalid(format!("equispaced grid needs m >= 2, got {m}")));
    }
    let den = (m - 1) as f64;
    Ok((1..=m)
        .map(|p| (2 * p as i64 - m as i64 - 1) as f64 / den)
        .collect())
}

/// Elevation angles of the equispaced grid, decreasing from π to 0.
pub fn equispaced_elevation(m: usize) -> Result<Vec<f64>> {
    Ok(equispaced_cos(m)?.into_iter().map(f64::acos).collect())
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `m` sample points `(θ_p, φ_p, χ_p)`.
///
/// `cos θ` is stored next to `θ`; for the equispaced constructor it comes
/// straight from the rational formula rather than through `cos(acos(·))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    phi: Vec<f64>,
    chi: Vec<f64>,
    kind: BasisKind,
}

impl Grid {
    /// Builds a grid from explicit angles. `φ` and `χ` are wrapped to `[0, 2π)`.
    pub fn new(theta: Vec<f64>, phi: Vec<f64>, chi: Vec<f64>, kind: BasisKind) -> Result<Self> {
        let m = theta.len();
        if m == 0 {
            return Err(invalid("grid must contain at least one sample"));
        }
        if phi.len() != m || chi.len() != m {
            return Err(invalid(format!(
                "angle vectors differ in length: theta {m}, phi {}, chi {}",
                phi.len(),
                chi.len()
            )));
        }
        if let Some(t) = theta
            .iter()
            .find(|t| !t.is_finite() || **t < 0.0 || **t > std::f64::consts::PI)
        {
            return Err(invalid(format!("theta {t} outside [0, pi]")));
        }
        if phi.iter().chain(chi.iter()).any(|a| !a.is_finite()) {
            return Err(invalid("non-finite azimuth or polarization angle"));
        }
        let cos_theta = theta.iter().map(|t| t.cos()).collect();
        Ok(Self {
            theta,
            cos_theta,
            phi: phi.into_iter().map(wrap_angle).collect(),
            chi: chi.into_iter().map(wrap_angle).collect(),
            kind,
        })
    }

    /// Equispaced elevation with all `φ`, `χ` zero.
    pub fn equispaced(m: usize, kind: BasisKind) -> Result<Self> {
        let cos_theta = equispaced_cos(m)?;
        Ok(Self {
            theta: cos_theta.iter().map(|c| c.acos()).collect(),
            cos_theta,
            phi: vec![0.0; m],
            chi: vec![0.0; m],
            kind,
        })
    }

    /// Same elevations, new azimuth and polarization angles.
    pub fn with_angles(&self, phi: Vec<f64>, chi: Vec<f64>) -> Result<Self> {
        let m = self.len();
        if phi.len() != m || chi.len() != m {
            return Err(invalid("angle vectors must match the grid size"));
        }
        if phi.iter().chain(chi.iter()).any(|a| !a.is_finite()) {
            return Err(invalid("non-finite azimuth or polarization angle"));
        }
        Ok(Self {
            theta: self.theta.clone(),
            cos_theta: self.cos_theta.clone(),
            phi: phi.into_iter().map(wrap_angle).collect(),
            chi: chi.into_iter().map(wrap_angle).collect(),
            kind: self.kind,
        })
    }

    /// Replaces the elevation angles, keeping `φ` and `χ`.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(theta, self.phi.clone(), self.chi.clone(), self.kind)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Writes `p,theta,phi,chi` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "theta", "phi", "chi"])?;
        for p in 0..self.len() {
            w.write_record([
                (p + 1).to_string(),
                format_f64(self.theta[p]),
                format_f64(self.phi[p]),
                format_f64(self.chi[p]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`Grid::write_csv`].
    pub fn read_csv<R: Read>(input: R, kind: BasisKind) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["p", "theta", "phi", "chi"] {
            return Err(Error::GridFormat(format!(
                "expected header p,theta,phi,chi, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut theta, mut phi, mut chi) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::GridFormat(format!("row {}: missing column", row + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::GridFormat(format!("row {}: {e}", row + 1)))
            };
            theta.push(field(1)?);
            phi.push(field(2)?);
            chi.push(field(3)?);
        }
        Self::new(theta, phi, chi, kind)
    }
}

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
