use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Relative tolerance under which two rates on the same side are one rate.
const RATE_MERGE_RTOL: f64 = 1e-12;
/// Target accuracy of [`ExpMixture::quantile`] on the CDF scale.
pub const QUANTILE_CDF_TOL: f64 = 1e-12;

/// Which half-line a term lives on.
///
/// `Right` is `e^{-r t} θ(t)`, `Left` is `e^{r t} θ(-t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(rename = "c")]
    pub coeff: f64,
    #[serde(rename = "r")]
    pub rate: f64,
    pub side: Side,
}

impl Term {
    pub fn right(coeff: f64, rate: f64) -> Term {
        Term { coeff, rate, side: Side::Right }
    }

    pub fn left(coeff: f64, rate: f64) -> Term {
        Term { coeff, rate, side: Side::Left }
    }

    fn eval(&self, t: f64) -> f64 {
        match self.side {
            Side::Right if t >= 0.0 => self.coeff * (-self.rate * t).exp(),
            Side::Left if t < 0.0 => self.coeff * (self.rate * t).exp(),
            _ => 0.0,
        }
    }

    /// Integral of the term over its half-line.
    pub fn mass(&self) -> f64 {
        self.coeff / self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// `[0, ∞)`; every term is a `Right` term.
    OneSided,
    /// The whole real line.
    TwoSided,
}

/// A finite signed mixture of decaying exponentials.
///
/// Coefficients may be negative (generalized hyperexponential) as long as the
/// sum stays a density. Terms are kept sorted by side and rate, and terms on
/// the same side with equal rates are merged, so the representation is
/// canonical.
///
/// Serializes to a bare JSON array of `{"c", "r", "side"}` objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Term>", try_from = "Vec<Term>")]
pub struct ExpMixture {
    terms: Vec<Term>,
    support: Support,
}

impl From<ExpMixture> for Vec<Term> {
    fn from(m: ExpMixture) -> Self {
        m.terms
    }
}

impl TryFrom<Vec<Term>> for ExpMixture {
    type Error = crate::Error;

    fn try_from(terms: Vec<Term>) -> Result<Self> {
        if terms.iter().any(|t| t.side == Side::Left) {
            ExpMixture::two_sided(terms)
        } else {
            ExpMixture::one_sided(terms.into_iter().map(|t| (t.coeff, t.rate)))
        }
    }
}

fn canonicalize(mut terms: Vec<Term>) -> Result<Vec<Term>> {
    for t in &terms {
        if !(t.rate.is_finite() && t.rate > 0.0) {
            return domain(format!("mixture rates must be positive and finite, got {}", t.rate));
        }
        if !t.coeff.is_finite() {
            return domain(format!("mixture coefficient must be finite, got {}", t.coeff));
        }
    }
    terms.sort_by(|x, y| x.side.cmp(&y.side).then(x.rate.total_cmp(&y.rate)));
    let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        match merged.last_mut() {
            Some(last)
                if last.side == t.side
                    && (last.rate - t.rate).abs() <= RATE_MERGE_RTOL * last.rate.max(t.rate) =>
            {
                last.coeff += t.coeff;
            }
            _ => merged.push(t),
        }
    }
    merged.retain(|t| t.coeff != 0.0);
    Ok(merged)
}

impl ExpMixture {
    /// A mixture on `[0, ∞)` from `(coefficient, rate)` pairs.
    pub fn one_sided(terms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let terms = terms.into_iter().map(|(c, r)| Term::right(c, r)).collect();
        Ok(ExpMixture { terms: canonicalize(terms)?, support: Support::OneSided })
    }

    /// A mixture on the whole real line.
    pub fn two_sided(terms: impl IntoIterator<Item = Term>) -> Result<Self> {
        Ok(ExpMixture {
            terms: canonicalize(terms.into_iter().collect())?,
            support: Support::TwoSided,
        })
    }

    /// The single-rate exponential density `rate e^{-rate t}`.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::one_sided([(rate, rate)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn is_one_sided(&self) -> bool {
        self.support == Support::OneSided
    }

    /// Sorted rates of the terms on one side.
    pub fn rates(&self, side: Side) -> Vec<f64> {
        self.terms.iter().filter(|t| t.side == side).map(|t| t.rate).collect()
    }

    pub fn min_rate(&self) -> f64 {
        self.terms.iter().map(|t| t.rate).fold(f64::INFINITY, f64::min)
    }

    pub fn density(&self, t: f64) -> f64 {
        if self.is_one_sided() && t < 0.0 {
            return 0.0;
        }
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    /// Closed-form integral of the density over its support.
    pub fn total_mass(&self) -> f64 {
        self.terms.iter().map(Term::mass).sum()
    }

    /// First moment, `Σ c/r²` on the right minus `Σ c/r²` on the left.
    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let m = t.coeff / (t.rate * t.rate);
                match t.side {
                    Side::Right => m,
                    Side::Left => -m,
                }
            })
            .sum()
    }

    /// Second moment about zero.
    pub fn second_moment(&self) -> f64 {
        self.terms.iter().map(|t| 2.0 * t.coeff / t.rate.powi(3)).sum()
    }

    /// Laplace transform `Σ c / (s + r)` of a one-sided density, for `s > -min_rate`.
    pub fn laplace(&self, s: f64) -> Result<f64> {
        self.require_one_sided("laplace")?;
        if !(s > -self.min_rate()) {
            return domain(format!("laplace argument {s} is outside the region of convergence"));
        }
        Ok(self.laplace_unchecked(s))
    }

    pub(crate) fn laplace_unchecked(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.coeff / (s + t.rate)).sum()
    }

    /// Rounding error to expect when summing term masses, e.g. in the CDF.
    fn mass_rounding(&self) -> f64 {
        16.0 * f64::EPSILON * self.terms.iter().map(|t| t.mass().abs()).sum::<f64>()
    }

    fn require_one_sided(&self, op: &str) -> Result<()> {
        if self.is_one_sided() {
            Ok(())
        } else {
            domain(format!("{op} is defined for one-sided mixtures only"))
        }
    }

    /// `F(t) = Σ (c/r)(1 - e^{-r t})`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        self.require_one_sided("cdf")?;
        if !(t >= 0.0) {
            return domain(format!("cdf argument must be non-negative, got {t}"));
        }
        Ok(self.cdf_unchecked(t))
    }

    fn cdf_unchecked(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| -term.mass() * (-term.rate * t).exp_m1()).sum()
    }

    /// Smallest `t` with `F(t) = p`, found by bracketing and bisection on the CDF.
    /// The CDF is matched to [`QUANTILE_CDF_TOL`], or to the rounding floor of
    /// the term sum when that is larger.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.require_one_sided("quantile")?;
        if !(0.0..1.0).contains(&p) {
            return domain(format!("quantile probability must lie in [0, 1), got {p}"));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0 / self.min_rate();
        while self.cdf_unchecked(hi) < p {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return domain(format!("cdf never reaches {p}; mixture is not normalized"));
            }
        }
        let mut best = hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f = self.cdf_unchecked(mid);
            if f < p {
                lo = mid;
            } else {
                hi = mid;
                best = mid;
            }
            if (f - p).abs() <= 0.01 * QUANTILE_CDF_TOL {
                best = mid;
                break;
            }
        }
        let err = (self.cdf_unchecked(best) - p).abs();
        if err > QUANTILE_CDF_TOL.max(self.mass_rounding()) {
            return domain(format!("quantile did not reach CDF tolerance (error {err:e})"));
        }
        Ok(best)
    }

    /// Checks the density contract: unit mass, and no negative values on a
    /// geometric grid of `points` over `[0, 50 / min_rate]`. Both checks allow
    /// for rounding in proportion to the coefficient magnitudes, which matters
    /// for mixtures with nearly equal rates and large opposite coefficients.
    pub fn check_density(&self, points: usize) -> Result<()> {
        let mass = self.total_mass();
        let abs_coeff: f64 = self.terms.iter().map(|t| t.coeff.abs()).sum();
        if (mass - 1.0).abs() > 1e-9 + self.mass_rounding() {
            return domain(format!("mixture mass is {mass}, expected 1"));
        }
        if self.is_one_sided() {
            let upper = 50.0 / self.min_rate();
            for t in geometric_grid(upper, points) {
                let f = self.density(t);
                if f < -1e-12 - 16.0 * f64::EPSILON * abs_coeff {
                    return domain(format!("density is negative ({f:e}) at t={t}"));
                }
            }
        }
        Ok(())
    }
}

/// `points` abscissae on `[0, upper]`: zero, then geometrically spaced from
/// `upper * 1e-6` to `upper`.
pub fn geometric_grid(upper: f64, points: usize) -> Vec<f64> {
    if points == 0 {
        return Vec::new();
    }
    let mut grid = vec![0.0];
    if points == 1 {
        return grid;
    }
    let lo = upper * 1e-6;
    let steps = (points - 2).max(1) as f64;
    let ratio = (upper / lo).ln() / steps;
    grid.extend((0..points - 1).map(|i| lo * (ratio * i as f64).exp()));
    grid
}
