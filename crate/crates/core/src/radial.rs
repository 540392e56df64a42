//! The radial law `μ r^{W−1} e^{−W(a²r⁴ + b r² + c r)}` on `(0, ∞)`.
//!
//! All integrals are taken in `u = log r`, where the density becomes `e^{h(u)}` with
//! `h(u) = W u − W(a² e^{4u} + b e^{2u} + c e^u)`. A table of cumulative panel
//! masses of `e^{h − max h}` is built once per density and backs the CDF, its
//! inverse, the log-normalizer and the moments of `log r`.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::rng::SeedSpec;

const PANELS: usize = 128;
/// Tables stop where the log-density is this far below its maximum.
const CUT_DEPTH: f64 = 60.0;

const PANEL_QUAD: QuadOptions = QuadOptions { abs_tol: 1e-20, rel_tol: 1e-13, max_depth: 40 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    Max,
    Min,
    /// `f''` vanishes to working precision at the root
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub r: f64,
    pub kind: CriticalKind,
}

#[derive(Clone, Debug)]
struct Table {
    u_lo: f64,
    du: f64,
    hmax: f64,
    /// `cum[k]` is the mass of panels `0..k`
    cum: Vec<f64>,
    /// `tail[k]` is the mass of panels `k..`
    tail: Vec<f64>,
}

impl Table {
    fn total(&self) -> f64 {
        self.cum[PANELS]
    }

    fn u_hi(&self) -> f64 {
        self.u_lo + self.du * PANELS as f64
    }

    fn edge(&self, k: usize) -> f64 {
        self.u_lo + self.du * k as f64
    }

    fn panel_of(&self, u: f64) -> usize {
        (((u - self.u_lo) / self.du).floor().max(0.0) as usize).min(PANELS - 1)
    }
}

#[derive(Clone, Debug)]
pub struct RadialDensity {
    w: usize,
    a2: f64,
    b: f64,
    c: f64,
    table: OnceLock<Result<Table>>,
}

impl PartialEq for RadialDensity {
    fn eq(&self, other: &Self) -> bool {
        (self.w, self.a2, self.b, self.c) == (other.w, other.a2, other.b, other.c)
    }
}

impl RadialDensity {
    pub fn new(w: usize, a2: f64, b: f64, c: f64) -> Result<Self> {
        if w == 0 {
            return Err(Error::InvalidDimension("radial density needs W >= 1".into()));
        }
        if !(a2 > 0.0 && a2.is_finite()) || !b.is_finite() || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("need a² > 0 and finite b, c; got a²={a2}, b={b}, c={c}")));
        }
        Ok(Self { w, a2, b, c, table: OnceLock::new() })
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn coefficients(&self) -> (f64, f64, f64) {
        (self.a2, self.b, self.c)
    }

    pub fn nu(&self) -> f64 {
        1.0 / self.w as f64
    }

    /// `a²r⁴ + b r² + c r`
    pub fn phi(&self, r: f64) -> f64 {
        r * (self.c + r * (self.b + r * r * self.a2))
    }

    /// `f(r) = (1 − ν) log r − (a²r⁴ + b r² + c r)`, the unnormalized log-density divided by `W`.
    pub fn f(&self, r: f64) -> f64 {
        (1.0 - self.nu()) * r.ln() - self.phi(r)
    }

    /// Unnormalized log-density `(W − 1) log r − W(a²r⁴ + b r² + c r)`.
    pub fn log_density(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
        }
        Ok(self.raw(r))
    }

    fn raw(&self, r: f64) -> f64 {
        let w = self.w as f64;
        (w - 1.0) * r.ln() - w * self.phi(r)
    }

    fn h(&self, u: f64) -> f64 {
        let w = self.w as f64;
        w * (u - self.phi(u.exp()))
    }

    /// The quartic `4a²r⁴ + 2br² + cr − (1 − ν)` whose positive roots are the
    /// critical points of `f`; for `W = 1` the trivial factor `r` is divided out.
    fn critical_polynomial(&self) -> Vec<f64> {
        let top = [self.c, 2.0 * self.b, 0.0, 4.0 * self.a2];
        if self.w == 1 {
            top.to_vec()
        } else {
            let mut p = vec![-(1.0 - self.nu())];
            p.extend(top);
            p
        }
    }

    /// Positive critical points of `f`, ascending, with the sign of `f''` deciding the kind.
    pub fn critical_points(&self) -> Vec<CriticalPoint> {
        let p = self.critical_polynomial();
        let dp = derivative(&p);
        positive_roots(&p)
            .into_iter()
            .map(|r| {
                // f' = −q/r, so at a root f'' = −q'/r
                let slope = horner(&dp, r);
                let scale = horner_abs(&dp, r);
                let kind = if slope.abs() <= 1e-8 * scale {
                    CriticalKind::Degenerate
                } else if slope > 0.0 {
                    CriticalKind::Max
                } else {
                    CriticalKind::Min
                };
                CriticalPoint { r, kind }
            })
            .collect()
    }

    fn maxima(&self) -> Vec<f64> {
        self.critical_points().into_iter().filter(|p| p.kind == CriticalKind::Max).map(|p| p.r).collect()
    }

    /// Residual of the exact expansion of `f(r_j(1 + η)) − f(r_j)` about a critical point.
    pub fn decay_identity_residual(&self, r_j: f64, eta: f64) -> Result<DecayResidual> {
        if !(eta > -1.0) {
            return Err(Error::InvalidArgument(format!("need η > −1, got {eta}")));
        }
        let p = self.critical_polynomial();
        if !(r_j > 0.0) || horner(&p, r_j).abs() > 1e-10 * horner_abs(&p, r_j).max(1.0) {
            return Err(Error::InvalidArgument(format!("{r_j} is not a critical point")));
        }
        let one_nu = 1.0 - self.nu();
        let a4 = self.a2 * r_j.powi(4);
        let b2 = self.b * r_j * r_j;
        let lhs = self.f(r_j * (1.0 + eta)) - self.f(r_j);
        let rhs = one_nu * eta.ln_1p() - one_nu * eta - (6.0 * a4 + b2) * eta * eta - 4.0 * a4 * eta.powi(3) - a4 * eta.powi(4);
        Ok(DecayResidual { lhs, rhs, residual: (lhs - rhs).abs() })
    }

    fn table(&self) -> Result<&Table> {
        self.table.get_or_init(|| self.build_table()).as_ref().map_err(Clone::clone)
    }

    fn build_table(&self) -> Result<Table> {
        // critical points of h are the roots of 4a²r⁴ + 2br² + cr − 1
        let roots = positive_roots(&[-1.0, self.c, 2.0 * self.b, 0.0, 4.0 * self.a2]);
        let us: Vec<f64> = roots.iter().map(|r| r.ln()).collect();
        let (first, last) = match (us.first(), us.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(Error::Quadrature("log-density has no interior maximum".into())),
        };
        let hmax = us.iter().map(|&u| self.h(u)).fold(f64::NEG_INFINITY, f64::max);
        let level = hmax - CUT_DEPTH;
        let u_lo = self.level_crossing(first, -1.0, level)?;
        let u_hi = self.level_crossing(last, 1.0, level)?;
        let du = (u_hi - u_lo) / PANELS as f64;
        let mut masses = Vec::with_capacity(PANELS);
        for k in 0..PANELS {
            let a = u_lo + du * k as f64;
            masses.push(integrate(|u| (self.h(u) - hmax).exp(), a, a + du, PANEL_QUAD)?);
        }
        let mut cum = vec![0.0; PANELS + 1];
        for k in 0..PANELS {
            cum[k + 1] = cum[k] + masses[k];
        }
        let mut tail = vec![0.0; PANELS + 1];
        for k in (0..PANELS).rev() {
            tail[k] = tail[k + 1] + masses[k];
        }
        if !(cum[PANELS] > 0.0 && cum[PANELS].is_finite()) {
            return Err(Error::Quadrature(format!("degenerate total mass {}", cum[PANELS])));
        }
        Ok(Table { u_lo, du, hmax, cum, tail })
    }

    /// Walks from `u0` in direction `dir` (where `h` is monotone) to the point where `h = level`.
    fn level_crossing(&self, u0: f64, dir: f64, level: f64) -> Result<f64> {
        let mut inside = u0;
        let mut step = 0.25;
        let mut outside = u0 + dir * step;
        let mut guard = 0;
        while self.h(outside) > level {
            inside = outside;
            step *= 2.0;
            outside = inside + dir * step;
            guard += 1;
            if guard > 200 {
                return Err(Error::Quadrature("could not bracket the tail cutoff".into()));
            }
        }
        Ok(bisect(|u| self.h(u) - level, inside, outside, 200))
    }

    /// `log ∫₀^∞ r^{W−1} e^{−Wφ(r)} dr`, so that `μ = exp(−log_normalizer)`.
    pub fn log_normalizer(&self) -> Result<f64> {
        let t = self.table()?;
        Ok(t.hmax + t.total().ln())
    }

    /// `|∫ density − 1|` with the integral recomputed in one adaptive pass over the table range.
    pub fn normalization_residual(&self) -> Result<f64> {
        let t = self.table()?;
        let whole = integrate(|u| (self.h(u) - t.hmax).exp(), t.u_lo, t.u_hi(), QuadOptions { abs_tol: 1e-20, rel_tol: 1e-13, max_depth: 60 })?;
        Ok((whole / t.total() - 1.0).abs())
    }

    fn partial(&self, t: &Table, a: f64, b: f64) -> Result<f64> {
        integrate(|u| (self.h(u) - t.hmax).exp(), a, b, PANEL_QUAD)
    }

    fn cdf_u(&self, u: f64) -> Result<f64> {
        let t = self.table()?;
        if u <= t.u_lo {
            return Ok(0.0);
        }
        if u >= t.u_hi() {
            return Ok(1.0);
        }
        let k = t.panel_of(u);
        Ok(((t.cum[k] + self.partial(t, t.edge(k), u)?) / t.total()).clamp(0.0, 1.0))
    }

    /// `P{r ≤ x}`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        self.cdf_u(x.ln())
    }

    /// `P{r ≥ x}`, summed from the right so small tails keep their relative accuracy.
    pub fn tail_mass(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(1.0);
        }
        let t = self.table()?;
        let u = x.ln();
        if u <= t.u_lo {
            return Ok(1.0);
        }
        if u >= t.u_hi() {
            return Ok(0.0);
        }
        let k = t.panel_of(u);
        Ok(((t.tail[k + 1] + self.partial(t, u, t.edge(k + 1))?) / t.total()).clamp(0.0, 1.0))
    }

    /// Inverse CDF: panel search on the cumulative table, then safeguarded Newton inside the panel.
    pub fn inverse_cdf(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {p}")));
        }
        let t = self.table()?;
        let target = p * t.total();
        let k = t.cum.partition_point(|&c| c <= target).clamp(1, PANELS) - 1;
        let (a, b) = (t.edge(k), t.edge(k + 1));
        let need = target - t.cum[k];
        let (mut lo, mut hi) = (a, b);
        let panel = t.cum[k + 1] - t.cum[k];
        let mut u = a + (b - a) * (need / panel).clamp(0.0, 1.0);
        for _ in 0..100 {
            let g = self.partial(t, a, u)? - need;
            if g > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let dens = (self.h(u) - t.hmax).exp();
            let mut next = if dens > 0.0 { u - g / dens } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - u).abs() <= 1e-14 * (1.0 + u.abs()) || hi - lo <= 1e-15 * (1.0 + u.abs());
            u = next;
            if done {
                break;
            }
        }
        Ok(u.exp())
    }

    pub fn sample_radius(&self, seed: SeedSpec) -> Result<f64> {
        let mut rng = seed.rng();
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let p: f64 = rng.random();
        // random() is in [0, 1); keep the draw in the open interval
        self.inverse_cdf(p.max(f64::MIN_POSITIVE))
    }

    /// `(E[log r], Var[log r])`.
    pub fn log_radius_moments(&self) -> Result<(f64, f64)> {
        let t = self.table()?;
        let total = t.total();
        let opts = QuadOptions { abs_tol: 1e-22, rel_tol: 1e-13, max_depth: 40 };
        let mut first = 0.0;
        for k in 0..PANELS {
            first += integrate(|u| u * (self.h(u) - t.hmax).exp(), t.edge(k), t.edge(k + 1), opts)?;
        }
        let mean = first / total;
        let mut second = 0.0;
        for k in 0..PANELS {
            second += integrate(|u| (u - mean).powi(2) * (self.h(u) - t.hmax).exp(), t.edge(k), t.edge(k + 1), opts)?;
        }
        Ok((mean, second / total))
    }

    /// Mass of `{r < c₁ W^{−d}}`.
    pub fn mass_below_floor(&self, c1: f64, d: f64) -> Result<f64> {
        self.cdf(c1 * (self.w as f64).powf(-d))
    }

    /// `(I)` crude size bound, `(II)` support mass and `(III)` dichotomy for this density.
    pub fn conditions_check(&self, p: &ConditionParams) -> Result<ConditionFlags> {
        let w = self.w as f64;
        let a = self.a2.sqrt();
        let size = self.a2.max(self.b.abs()).max(self.c.abs());
        let crude_bound = size <= 2.0 * p.support_a * p.support_a * w.powf(2.0 * p.d_exponent);
        let support_mass = self.tail_mass(p.support_a)?;
        let support_ok = support_mass <= p.support_threshold;
        let (case, condition_iii) = if size <= p.dichotomy_a {
            (DichotomyCase::CaseI, true)
        } else {
            // every term of max(a²r⁴, b r², |c| r) grows with r, so the violating set is (r*, ∞)
            let mut r_star = (p.dichotomy_a / self.a2).powf(0.25);
            if self.b > 0.0 {
                r_star = r_star.min((p.dichotomy_a / self.b).sqrt());
            }
            if self.c != 0.0 {
                r_star = r_star.min(p.dichotomy_a / self.c.abs());
            }
            let violation_mass = self.tail_mass(r_star)?;
            let sign_ok = self.b > 0.0 || self.b.abs() < a / p.cfrak;
            let ok = violation_mass <= p.violation_threshold && sign_ok;
            (DichotomyCase::CaseII { violation_mass, sign_ok }, ok)
        };
        Ok(ConditionFlags { crude_bound, support_mass, support_ok, case, condition_iii, all: crude_bound && support_ok && condition_iii })
    }

    /// Solves `raw(r) = level` on the monotone branch starting at `u0` and heading in `dir`.
    /// Returns `None` on the left branch when the density stays above `level` down to `r = 0`.
    fn level_set(&self, u0: f64, dir: f64, level: f64) -> Option<f64> {
        let ell = |u: f64| self.raw(u.exp());
        let mut inside = u0;
        let mut step = 0.05;
        let mut outside = u0 + dir * step;
        let mut guard = 0;
        while ell(outside) > level {
            inside = outside;
            step *= 2.0;
            outside = inside + dir * step;
            guard += 1;
            if guard > 100 || outside.exp() == 0.0 {
                return None;
            }
        }
        Some(bisect(|u| ell(u) - level, inside, outside, 200).exp())
    }

    /// Median level, the interval above it and the five-cell quantile ladder on the heavier side.
    pub fn quantile_ladder(&self) -> Result<QuantileLadder> {
        let log_z = self.log_normalizer()?;
        let maxima = self.maxima();
        let Some(&r1) = maxima.first() else {
            return Err(Error::InvalidArgument("density has no interior maximum".into()));
        };
        if self.b >= 0.0 && maxima.len() == 1 {
            let u1 = r1.ln();
            let top = self.raw(r1);
            let bounds = |level: f64| {
                let lo = self.level_set(u1, -1.0, level).unwrap_or(0.0);
                let hi = self.level_set(u1, 1.0, level).unwrap_or(f64::INFINITY);
                (lo, hi)
            };
            let mass = |level: f64| -> Result<f64> {
                let (lo, hi) = bounds(level);
                Ok(self.cdf(hi)? - self.cdf(lo)?)
            };
            let mut low = top - 1.0;
            while mass(low)? < 0.5 {
                low -= 2.0 * (top - low);
                if top - low > 1e6 {
                    return Err(Error::Quadrature("median level not bracketed".into()));
                }
            }
            let mut high = top;
            for _ in 0..200 {
                let mid = 0.5 * (low + high);
                if mid <= low || mid >= high {
                    break;
                }
                if mass(mid)? > 0.5 {
                    low = mid;
                } else {
                    high = mid;
                }
            }
            let level = 0.5 * (low + high);
            let (r_lo, r_hi) = bounds(level);
            let f1 = self.cdf(r1)?;
            let left = f1 - self.cdf(r_lo)?;
            let right = self.cdf(r_hi)? - f1;
            let side = if right >= left { Side::Right } else { Side::Left };
            let (end, side_mass) = match side {
                Side::Right => (r_hi, right),
                Side::Left => (r_lo, left),
            };
            let mut ladder = self.ladder_on_side(r1, side, end, side_mass)?;
            ladder.median_log_level = Some(level - log_z);
            ladder.median_interval = Some((r_lo, r_hi));
            ladder.mass_above_median = Some(right + left);
            return Ok(ladder);
        }
        let anchor = if maxima.len() >= 2 {
            let r2 = self
                .critical_points()
                .into_iter()
                .find(|p| p.kind == CriticalKind::Min)
                .map_or(0.5 * (maxima[0] + maxima[1]), |p| p.r);
            if self.cdf(r2)? >= 0.5 {
                maxima[0]
            } else {
                maxima[1]
            }
        } else {
            r1
        };
        let fa = self.cdf(anchor)?;
        let (left, right) = (fa, self.tail_mass(anchor)?);
        if right >= left {
            self.ladder_on_side(anchor, Side::Right, f64::INFINITY, right)
        } else {
            self.ladder_on_side(anchor, Side::Left, 0.0, left)
        }
    }

    fn ladder_on_side(&self, anchor: f64, side: Side, end: f64, side_mass: f64) -> Result<QuantileLadder> {
        let fa = self.cdf(anchor)?;
        let mut points = [anchor; 5];
        for (j, pt) in points.iter_mut().enumerate().skip(1) {
            let tau = j as f64 / 5.0;
            let p = match side {
                Side::Right => fa + tau * side_mass,
                Side::Left => fa - tau * side_mass,
            };
            *pt = self.inverse_cdf(p)?;
        }
        let sqrt_w = (self.w as f64).sqrt();
        let mut spacing = [0.0; 4];
        for j in 0..4 {
            spacing[j] = (points[j + 1] / points[j] - 1.0).abs() * sqrt_w;
        }
        let mut cells = [0.0; 5];
        let mut edges: Vec<f64> = points.to_vec();
        edges.push(end);
        for j in 0..5 {
            let (a, b) = (edges[j], edges[j + 1]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let upper = if hi.is_finite() { self.cdf(hi)? } else { 1.0 };
            cells[j] = (upper - self.cdf(lo)?) / side_mass;
        }
        Ok(QuantileLadder {
            median_log_level: None,
            median_interval: None,
            mass_above_median: None,
            anchor,
            side,
            side_mass,
            points,
            side_end: end,
            cell_fractions: cells,
            spacing_ratios: spacing,
        })
    }

    /// Everything the `radial` subcommand prints.
    pub fn report(&self, params: &ConditionParams) -> Result<RadialReport> {
        let (mean_log_r, var_log_r) = self.log_radius_moments()?;
        Ok(RadialReport {
            w: self.w,
            a2: self.a2,
            b: self.b,
            c: self.c,
            log_normalizer: self.log_normalizer()?,
            normalization_residual: self.normalization_residual()?,
            critical_points: self.critical_points(),
            mean_log_r,
            var_log_r,
            w_var_log_r: self.w as f64 * var_log_r,
            conditions: self.conditions_check(params)?,
            ladder: self.quantile_ladder().ok(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileLadder {
    /// log of the normalized density value at the median level (single-maximum case)
    pub median_log_level: Option<f64>,
    pub median_interval: Option<(f64, f64)>,
    pub mass_above_median: Option<f64>,
    /// the local maximum the ladder starts from
    pub anchor: f64,
    pub side: Side,
    pub side_mass: f64,
    /// `points[0]` is the anchor, `points[j]` the `j/5` quantile of the side
    pub points: [f64; 5],
    pub side_end: f64,
    /// mass of each of the five cells as a fraction of the side mass
    pub cell_fractions: [f64; 5],
    /// `|r_{j+1}/r_j − 1|·√W` for `j = 0..3`
    pub spacing_ratios: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionParams {
    /// support radius `A` in conditions (I), (II)
    pub support_a: f64,
    /// exponent `D` in the crude bound `2A²W^{2D}`
    pub d_exponent: f64,
    pub support_threshold: f64,
    /// dichotomy threshold `𝖠`
    pub dichotomy_a: f64,
    /// `𝖢` in the sign condition `|b| < 𝖢⁻¹|a|`
    pub cfrak: f64,
    pub violation_threshold: f64,
}

impl Default for ConditionParams {
    fn default() -> Self {
        Self { support_a: 4.0, d_exponent: 1.0, support_threshold: 1e-3, dichotomy_a: 1.0, cfrak: 1.0, violation_threshold: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DichotomyCase {
    CaseI,
    CaseII { violation_mass: f64, sign_ok: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub crude_bound: bool,
    pub support_mass: f64,
    pub support_ok: bool,
    pub case: DichotomyCase,
    pub condition_iii: bool,
    pub all: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialReport {
    pub w: usize,
    pub a2: f64,
    pub b: f64,
    pub c: f64,
    pub log_normalizer: f64,
    pub normalization_residual: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub mean_log_r: f64,
    pub var_log_r: f64,
    pub w_var_log_r: f64,
    pub conditions: ConditionFlags,
    pub ladder: Option<QuantileLadder>,
}

fn bisect(g: impl Fn(f64) -> f64, a: f64, b: f64, iters: usize) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let s_lo = g(lo).signum();
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return mid;
        }
        if v.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn horner(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn horner_abs(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &a| acc * x.abs() + a.abs())
}

fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(i, &a)| i as f64 * a).collect()
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Positive real roots of `Σ p[i] xⁱ`, ascending.
///
/// The roots of `p'` split `(0, R]` into pieces on which `p` is monotone; each piece
/// holds at most one sign change, found by bisection and polished by Newton. Interior
/// extrema where `p` vanishes to rounding are reported as (double) roots.
pub fn positive_roots(p: &[f64]) -> Vec<f64> {
    let mut p = p.to_vec();
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    let deg = p.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[deg];
    let bound = 1.0 + p[..deg].iter().map(|a| (a / lead).abs()).fold(0.0, f64::max);
    let dp = derivative(&p);
    let crit: Vec<f64> = positive_roots(&dp).into_iter().filter(|&x| x < bound).collect();
    let mut knots = vec![0.0];
    knots.extend(&crit);
    knots.push(bound);
    let mut roots = Vec::new();
    for win in knots.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let (s_lo, s_hi) = (sign(horner(&p, lo)), sign(horner(&p, hi)));
        if s_lo * s_hi < 0 {
            let mut x = bisect(|x| horner(&p, x), lo, hi, 300);
            for _ in 0..3 {
                let d = horner(&dp, x);
                if d == 0.0 {
                    break;
                }
                let next = x - horner(&p, x) / d;
                if !(next > lo && next < hi) {
                    break;
                }
                x = next;
            }
            roots.push(x);
        }
    }
    for &k in &crit {
        if horner(&p, k).abs() <= 1e-12 * horner_abs(&p, k) && !roots.iter().any(|&r| (r - k).abs() <= 1e-7 * k) {
            roots.push(k);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(RadialDensity::new(0, 1.0, 0.0, 0.0).is_err());
        assert!(RadialDensity::new(4, 0.0, 0.0, 0.0).is_err());
        assert!(RadialDensity::new(4, 1.0, f64::NAN, 0.0).is_err());
        assert!(RadialDensity::new(4, 1.0, 0.0, 0.0).unwrap().log_density(0.0).is_err());
    }

    #[test]
    fn log_density_at_one_and_two() {
        let d = RadialDensity::new(4, 0.3, -0.2, 0.7).unwrap();
        assert!((d.log_density(1.0).unwrap() + 4.0 * (0.3 - 0.2 + 0.7)).abs() < 1e-14);
        let d = RadialDensity::new(4, 1.0, 0.0, 0.0).unwrap();
        assert!((d.log_density(2.0).unwrap() - (3.0 * 2f64.ln() - 64.0)).abs() < 1e-12);
    }

    #[test]
    fn cubic_roots() {
        // (x − 1)(x − 2)(x + 3) = x³ − 7x + 6
        let r = positive_roots(&[6.0, -7.0, 0.0, 1.0]);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn double_root_is_found() {
        // (x − 1)²(x + 1) = x³ − x² − x + 1
        let r = positive_roots(&[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn quartic_single_max_closed_form() {
        // ν → 0 is approached with a huge W; 4·(1/4)·r⁴ = 1 − ν
        let d = RadialDensity::new(1_000_000_000, 0.25, 0.0, 0.0).unwrap();
        let cps = d.critical_points();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::Max);
        assert!((cps[0].r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn positive_b_has_one_maximum() {
        let d = RadialDensity::new(100, 1.0, 1.0, 0.0).unwrap();
        let cps = d.critical_points();
        assert_eq!(cps, vec![CriticalPoint { r: cps[0].r, kind: CriticalKind::Max }]);
    }

    #[test]
    fn negative_b_can_be_bimodal() {
        // q' = 8(r − 1)(2r² + 2r − 1) has a positive local max of q at r = (√3 − 1)/2
        let d = RadialDensity::new(100, 1.0, -6.0, 8.0).unwrap();
        let kinds: Vec<_> = d.critical_points().iter().map(|p| p.kind).collect();
        assert_eq!(kinds, vec![CriticalKind::Max, CriticalKind::Min, CriticalKind::Max]);
    }

    #[test]
    fn roots_agree_with_grid_scan_of_f_prime() {
        for (a2, b, c) in [(1.0, -3.0, 0.01), (1.0, -6.0, 8.0), (0.3, 0.5, -2.0), (2.0, -1.0, 0.4)] {
            let d = RadialDensity::new(100, a2, b, c).unwrap();
            let fp = |r: f64| (1.0 - d.nu()) / r - (4.0 * a2 * r.powi(3) + 2.0 * b * r + c);
            let (n, hi) = (1_000_000, 5.0);
            let mut changes = Vec::new();
            let mut prev = fp(hi / n as f64);
            for i in 2..=n {
                let r = hi * i as f64 / n as f64;
                let cur = fp(r);
                if prev.signum() != cur.signum() {
                    changes.push(r);
                }
                prev = cur;
            }
            let cps = d.critical_points();
            assert_eq!(cps.len(), changes.len(), "{a2} {b} {c}");
            for (cp, r) in cps.iter().zip(&changes) {
                assert!((cp.r - r).abs() <= 2.0 * hi / n as f64);
            }
        }
    }

    #[test]
    fn w1_divides_out_the_origin() {
        let d = RadialDensity::new(1, 1.0, 0.0, -1.0).unwrap();
        let cps = d.critical_points();
        assert_eq!(cps.len(), 1);
        // 4r³ = 1
        assert!((cps[0].r - 0.25f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn decay_identity_at_zero_and_off_critical() {
        let d = RadialDensity::new(16, 0.5, 0.2, -0.1).unwrap();
        let r1 = d.critical_points()[0].r;
        let z = d.decay_identity_residual(r1, 0.0).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        assert!(d.decay_identity_residual(r1, 0.1).unwrap().residual < 1e-12);
        assert!(d.decay_identity_residual(r1 * 1.1, 0.1).is_err());
        assert!(d.decay_identity_residual(r1, -1.0).is_err());
    }

    #[test]
    fn normalizer_matches_gamma_reduction() {
        // b = c = 0: ∫ r^{W−1} e^{−W a² r⁴} dr = Γ(W/4) / (4 (W a²)^{W/4})
        let (w, a2) = (8usize, 0.7);
        let d = RadialDensity::new(w, a2, 0.0, 0.0).unwrap();
        let expect = (1.0f64).ln() - 4f64.ln() - 2.0 * (w as f64 * a2).ln(); // Γ(2) = 1
        assert!((d.log_normalizer().unwrap() - expect).abs() < 1e-12);
        assert!(d.normalization_residual().unwrap() < 1e-10);
    }

    #[test]
    fn inverse_cdf_round_trip() {
        let d = RadialDensity::new(12, 0.8, -0.6, 0.3).unwrap();
        for p in [1e-9, 0.01, 0.3, 0.5, 0.77, 0.999_999] {
            let r = d.inverse_cdf(p).unwrap();
            assert!((d.cdf(r).unwrap() - p).abs() < 1e-12, "{p}");
        }
        assert!(d.inverse_cdf(0.0).is_err() && d.inverse_cdf(1.0).is_err());
    }

    #[test]
    fn tail_and_cdf_complement() {
        let d = RadialDensity::new(20, 1.5, 0.4, -0.2).unwrap();
        for x in [0.2, 0.5, 0.7, 1.0] {
            assert!((d.cdf(x).unwrap() + d.tail_mass(x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_covariance_of_log_moments() {
        let (a2, b, c, s): (f64, f64, f64, f64) = (0.6, -0.3, 0.5, 1.7);
        let d = RadialDensity::new(10, a2, b, c).unwrap();
        let ds = RadialDensity::new(10, a2 * s.powi(4), b * s * s, c * s).unwrap();
        let (m, v) = d.log_radius_moments().unwrap();
        let (ms, vs) = ds.log_radius_moments().unwrap();
        assert!((ms - (m - s.ln())).abs() < 1e-8);
        assert!((vs - v).abs() < 1e-8 * v.max(1.0));
    }

    #[test]
    fn case_i_and_sign_condition() {
        let p = ConditionParams::default();
        let d = RadialDensity::new(16, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(d.conditions_check(&p).unwrap().case, DichotomyCase::CaseI);
        let d = RadialDensity::new(16, 0.4, -0.5, 3.0).unwrap();
        match d.conditions_check(&ConditionParams { cfrak: 1.0, ..p }).unwrap().case {
            // |b| = 0.5 < 𝖢⁻¹·|a| = √0.4 ≈ 0.632
            DichotomyCase::CaseII { sign_ok, .. } => assert!(sign_ok),
            other => panic!("{other:?}"),
        }
        match d.conditions_check(&ConditionParams { cfrak: 2.0, ..p }).unwrap().case {
            DichotomyCase::CaseII { sign_ok, .. } => assert!(!sign_ok),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ladder_cells_carry_a_fifth_each() {
        let d = RadialDensity::new(100, 0.25, 0.0, 0.0).unwrap();
        let l = d.quantile_ladder().unwrap();
        assert!((l.mass_above_median.unwrap() - 0.5).abs() < 1e-6);
        for m in l.cell_fractions {
            assert!((m - 0.2).abs() < 1e-6, "{:?}", l.cell_fractions);
        }
        assert!(l.spacing_ratios.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn sampler_draws_are_positive() {
        let d = RadialDensity::new(3, 2.0, -1.0, 0.5).unwrap();
        for t in 0..200 {
            let r = d.sample_radius(SeedSpec::new(1, t, 0)).unwrap();
            assert!(r > 0.0 && r.is_finite());
        }
    }
}
