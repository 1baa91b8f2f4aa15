//! Wigner 3j symbols.
//!
//! The general symbol is evaluated with the Racah single-sum formula. Two
//! back ends share the same term structure: a floating one working with
//! logarithms of factorials and compensated summation, and an exact one in
//! big-integer rationals. The square of a 3j symbol is always rational, which
//! is what [`threej_squared_exact`] returns.

use std::fmt;
use std::sync::{OnceLock, RwLock};

use dashmap::DashMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::specfun::ln_factorial;

/// Above this value of `l1 + l2 + l3` the floating back end loses too much
/// to cancellation and [`threej`] evaluates exactly instead.
pub const EXACT_SWITCH_DEGREE_SUM: u32 = 60;

/// The six arguments of a 3j symbol, top row degrees and bottom row orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreeJArgs {
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
    pub k1: i32,
    pub k2: i32,
    pub k3: i32,
}

impl ThreeJArgs {
    pub const fn new(l1: u32, l2: u32, l3: u32, k1: i32, k2: i32, k3: i32) -> Self {
        Self { l1, l2, l3, k1, k2, k3 }
    }

    /// All orders zero.
    pub const fn zero_orders(l1: u32, l2: u32, l3: u32) -> Self {
        Self::new(l1, l2, l3, 0, 0, 0)
    }

    fn degree_sum(&self) -> u32 {
        self.l1 + self.l2 + self.l3
    }
}

impl fmt::Display for ThreeJArgs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} {} {}; {} {} {})",
            self.l1, self.l2, self.l3, self.k1, self.k2, self.k3
        )
    }
}

/// True iff every selection rule holds, i.e. the symbol may be nonzero.
pub fn selection_ok(a: &ThreeJArgs) -> bool {
    let orders_fit = a.k1.unsigned_abs() <= a.l1
        && a.k2.unsigned_abs() <= a.l2
        && a.k3.unsigned_abs() <= a.l3;
    let sum_zero = a.k1 as i64 + a.k2 as i64 + a.k3 as i64 == 0;
    let triangle = a.l1.abs_diff(a.l2) <= a.l3 && a.l3 <= a.l1 + a.l2;
    let parity = !(a.k1 == 0 && a.k2 == 0 && a.k3 == 0) || a.degree_sum() % 2 == 0;
    orders_fit && sum_zero && triangle && parity
}

/// Nonnegative rational number in lowest terms with a positive denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(BigRational);

impl ExactRational {
    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn from_integer(n: i64) -> Self {
        Self(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Self {
        Self(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_big_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_big_rational(self) -> BigRational {
        self.0
    }
}

impl From<BigRational> for ExactRational {
    fn from(r: BigRational) -> Self {
        Self(r)
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

fn big_factorial(n: u32) -> BigInt {
    static TABLE: OnceLock<RwLock<Vec<BigInt>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| RwLock::new(vec![BigInt::one()]));
    {
        let t = table.read().expect("factorial table poisoned");
        if let Some(v) = t.get(n as usize) {
            return v.clone();
        }
    }
    let mut t = table.write().expect("factorial table poisoned");
    while t.len() <= n as usize {
        let next = t.last().expect("table is never empty") * BigInt::from(t.len());
        t.push(next);
    }
    t[n as usize].clone()
}

/// Index data of the Racah sum shared by both back ends.
struct RacahTerms {
    /// Factorial arguments of the square-root prefactor, numerator side.
    root_num: [u32; 9],
    /// Factorial argument of the square-root prefactor, denominator side.
    root_den: u32,
    t_min: i64,
    t_max: i64,
    a: ThreeJArgs,
    /// `(-1)^{l1 - l2 - k3}`
    phase_odd: bool,
}

impl RacahTerms {
    fn new(a: &ThreeJArgs) -> Option<Self> {
        if !selection_ok(a) {
            return None;
        }
        let (j1, j2, j3) = (a.l1 as i64, a.l2 as i64, a.l3 as i64);
        let (m1, m2, m3) = (a.k1 as i64, a.k2 as i64, a.k3 as i64);
        let u = |v: i64| v as u32;
        let root_num = [
            u(j1 + j2 - j3),
            u(j1 - j2 + j3),
            u(-j1 + j2 + j3),
            u(j1 + m1),
            u(j1 - m1),
            u(j2 + m2),
            u(j2 - m2),
            u(j3 + m3),
            u(j3 - m3),
        ];
        let t_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
        let t_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
        Some(Self {
            root_num,
            root_den: u(j1 + j2 + j3 + 1),
            t_min,
            t_max,
            a: *a,
            phase_odd: (j1 - j2 - m3).rem_euclid(2) == 1,
        })
    }

    /// Factorial arguments in the denominator of term `t`.
    fn denominators(&self, t: i64) -> [u32; 6] {
        let (j1, j2, j3) = (self.a.l1 as i64, self.a.l2 as i64, self.a.l3 as i64);
        let (m1, m2) = (self.a.k1 as i64, self.a.k2 as i64);
        [
            t as u32,
            (j3 - j2 + t + m1) as u32,
            (j3 - j1 + t - m2) as u32,
            (j1 + j2 - j3 - t) as u32,
            (j1 - t - m1) as u32,
            (j2 - t + m2) as u32,
        ]
    }

    fn float_value(&self) -> f64 {
        let ln_root = 0.5
            * (self.root_num.iter().map(|&n| ln_factorial(n)).sum::<f64>()
                - ln_factorial(self.root_den));
        let logs: Vec<f64> = (self.t_min..=self.t_max)
            .map(|t| {
                ln_root
                    - self
                        .denominators(t)
                        .iter()
                        .map(|&n| ln_factorial(n))
                        .sum::<f64>()
            })
            .collect();
        let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Neumaier-compensated alternating sum of exp(log - shift).
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (i, lg) in logs.iter().enumerate() {
            let t = self.t_min + i as i64;
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * (lg - shift).exp();
            let s = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - s) + term;
            } else {
                comp += (term - s) + sum;
            }
            sum = s;
        }
        let phase = if self.phase_odd { -1.0 } else { 1.0 };
        phase * (sum + comp) * shift.exp()
    }

    /// `(sign, square)` exactly.
    fn exact_value(&self) -> (i32, BigRational) {
        let mut series = BigRational::zero();
        for t in self.t_min..=self.t_max {
            let den: BigInt = self
                .denominators(t)
                .iter()
                .map(|&n| big_factorial(n))
                .product();
            let term = BigRational::new(BigInt::one(), den);
            if t % 2 == 0 {
                series += term;
            } else {
                series -= term;
            }
        }
        if series.is_zero() {
            return (0, BigRational::zero());
        }
        let root_num: BigInt = self.root_num.iter().map(|&n| big_factorial(n)).product();
        let root = BigRational::new(root_num, big_factorial(self.root_den));
        let mut sign = if series.is_negative() { -1 } else { 1 };
        if self.phase_odd {
            sign = -sign;
        }
        (sign, root * &series * &series)
    }
}

/// Exact square of the symbol; zero whenever a selection rule fails.
pub fn threej_squared_exact(a: &ThreeJArgs) -> ExactRational {
    threej_signed_exact(a).1
}

/// Sign (`-1`, `0` or `1`) and exact square of the symbol.
pub fn threej_signed_exact(a: &ThreeJArgs) -> (i32, ExactRational) {
    match RacahTerms::new(a) {
        None => (0, ExactRational::zero()),
        Some(terms) => {
            let (sign, sq) = terms.exact_value();
            (sign, ExactRational(sq))
        }
    }
}

/// Exact value of the symbol converted to `f64`.
pub fn threej_exact_f64(a: &ThreeJArgs) -> f64 {
    let (sign, sq) = threej_signed_exact(a);
    sign as f64 * sq.to_f64().sqrt()
}

/// Racah sum in floating point, without caching or the exact fallback.
pub fn threej_float(a: &ThreeJArgs) -> f64 {
    RacahTerms::new(a).map_or(0.0, |t| t.float_value())
}

/// Canonical representative under column permutations and order reversal,
/// together with the sign relating the symbol to it.
fn canonical(a: &ThreeJArgs) -> (ThreeJArgs, bool) {
    let cols = [(a.l1, a.k1), (a.l2, a.k2), (a.l3, a.k3)];
    // Odd permutations and order reversal each contribute (-1)^{l1+l2+l3}.
    let flip_odd = a.degree_sum() % 2 == 1;
    let perms: [([usize; 3], bool); 6] = [
        ([0, 1, 2], false),
        ([1, 2, 0], false),
        ([2, 0, 1], false),
        ([1, 0, 2], true),
        ([0, 2, 1], true),
        ([2, 1, 0], true),
    ];
    let mut best: Option<(ThreeJArgs, bool)> = None;
    for (p, odd) in perms {
        for reverse in [false, true] {
            let s = if reverse { -1 } else { 1 };
            let cand = ThreeJArgs::new(
                cols[p[0]].0,
                cols[p[1]].0,
                cols[p[2]].0,
                s * cols[p[0]].1,
                s * cols[p[1]].1,
                s * cols[p[2]].1,
            );
            let negate = flip_odd && (odd ^ reverse);
            if best.as_ref().is_none_or(|(b, _)| cand < *b) {
                best = Some((cand, negate));
            }
        }
    }
    best.expect("six permutations were tried")
}

fn cache() -> &'static DashMap<ThreeJArgs, f64> {
    static CACHE: OnceLock<DashMap<ThreeJArgs, f64>> = OnceLock::new();
    CACHE.get_or_init(DashMap::new)
}

/// Value of the 3j symbol; zero whenever a selection rule fails.
///
/// Results are memoized by a canonical key, so symmetric queries share work.
pub fn threej(a: &ThreeJArgs) -> f64 {
    if !selection_ok(a) {
        return 0.0;
    }
    let (key, negate) = canonical(a);
    let value = match cache().get(&key) {
        Some(v) => *v,
        None => {
            let v = if key.degree_sum() > EXACT_SWITCH_DEGREE_SUM {
                threej_exact_f64(&key)
            } else {
                threej_float(&key)
            };
            cache().insert(key, v);
            v
        }
    };
    if negate {
        -value
    } else {
        value
    }
}

/// Zero-order symbol from its closed form in `L = (l1+l2+l3)/2`.
///
/// Returns 0 for an odd degree sum or a violated triangle inequality.
pub fn threej_zero(l1: u32, l2: u32, l3: u32) -> f64 {
    let sum = l1 + l2 + l3;
    if sum % 2 == 1 || !(l1.abs_diff(l2) <= l3 && l3 <= l1 + l2) {
        return 0.0;
    }
    let big_l = sum / 2;
    let ln_root = 0.5
        * (ln_factorial(2 * big_l - 2 * l1)
            + ln_factorial(2 * big_l - 2 * l2)
            + ln_factorial(2 * big_l - 2 * l3)
            - ln_factorial(2 * big_l + 1));
    let ln_ratio = ln_factorial(big_l)
        - ln_factorial(big_l - l1)
        - ln_factorial(big_l - l2)
        - ln_factorial(big_l - l3);
    let sign = if big_l % 2 == 0 { 1.0 } else { -1.0 };
    sign * (ln_root + ln_ratio).exp()
}
