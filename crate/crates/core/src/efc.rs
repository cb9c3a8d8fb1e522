//! Equivalent firm capacity (EFC), load-carrying capability and the
//! firm-capacity derivative of EEU.
//!
//! The EFC of a resource `i` against a set `R` is the firm capacity `y` with
//! `rho(R ∪ {i}) = rho(R + y)`. [`efc_exact`] solves this by bisection;
//! [`efc_marginal`] uses the first-order form `(rho(R ∪ {i}) - rho(R)) / rho'(R)`
//! with the EEU metric, where `rho'` comes from [`eeu_derivative`].
//!
//! All evaluations share the background's traces, so differences between
//! resource sets are common-random-number comparisons.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::risk::{self, Metric};
use crate::system::{ResourceSet, ShortfallEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfcMethod {
    ExactBisection,
    MarginalRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfcEstimate {
    /// MW of firm capacity.
    pub value: f64,
    pub method: EfcMethod,
    /// EEU slope (MWh per MW) used by the marginal method.
    pub derivative: Option<f64>,
    /// Half-width of the final bisection bracket, MW.
    pub tolerance: f64,
    /// Risk evaluations spent inside the bisection loop.
    pub evaluations: usize,
}

pub fn rho(resources: &ResourceSet, bg: &ShortfallEnsemble, metric: Metric) -> Result<f64> {
    risk::rho(resources, bg, metric)
}

/// Finds `x` in `[0, upper]` where the nonincreasing `f` crosses `target`,
/// to within `tol`. Returns the bracket midpoint and the evaluation count.
fn bisect_decreasing(
    mut f: impl FnMut(f64) -> Result<f64>,
    target: f64,
    upper: f64,
    tol: f64,
) -> Result<(f64, usize)> {
    let (mut lo, mut hi) = (0.0, upper);
    let mut evals = 0;
    while hi - lo > 2.0 * tol {
        let mid = 0.5 * (lo + hi);
        evals += 1;
        if f(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), evals))
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::config(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Exact EFC of `resource` added to `base`, by bisection over
/// `[0, nominal capacity of resource]`.
pub fn efc_exact(
    resource: &ResourceSet,
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    metric: Metric,
    tol: f64,
) -> Result<EfcEstimate> {
    check_tol(tol)?;
    let upper = resource.nominal_capacity();
    let estimate = |value, evaluations| EfcEstimate {
        value,
        method: EfcMethod::ExactBisection,
        derivative: None,
        tolerance: tol,
        evaluations,
    };
    if upper <= 0.0 {
        return Ok(estimate(0.0, 0));
    }
    let at_zero = rho(base, bg, metric)?;
    let at_upper = rho(&base.plus_firm(upper), bg, metric)?;
    if at_zero <= at_upper {
        return Err(Error::FlatRisk {
            lower: base.firm,
            upper: base.firm + upper,
        });
    }
    let target = rho(&base.union(resource), bg, metric)?;
    if target >= at_zero {
        return Ok(estimate(0.0, 0));
    }
    if target <= at_upper {
        return Ok(estimate(upper, 0));
    }
    let (value, evals) =
        bisect_decreasing(|y| rho(&base.plus_firm(y), bg, metric), target, upper, tol)?;
    Ok(estimate(value, evals))
}

/// Firm-capacity derivative of EEU, in MWh per MW: `-LOLE(R \ S_e)`.
///
/// Per trace and day the stores are dispatched greedily; stores still holding
/// energy at the end of the day act like firm capacity at their power rating,
/// so a period counts when its depth exceeds their combined power. Without
/// stores this is `-LOLE(R)`.
pub fn eeu_derivative(resources: &ResourceSet, bg: &ShortfallEnsemble) -> Result<f64> {
    Ok(risk::eeu_and_slope(resources, bg)?.1)
}

/// First-order EFC under the EEU metric.
pub fn efc_marginal(
    resource: &ResourceSet,
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
) -> Result<EfcEstimate> {
    let (eeu_base, slope) = risk::eeu_and_slope(base, bg)?;
    efc_marginal_with(resource, base, bg, eeu_base, slope)
}

/// [`efc_marginal`] with the base EEU and slope already known.
pub(crate) fn efc_marginal_with(
    resource: &ResourceSet,
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    eeu_base: f64,
    slope: f64,
) -> Result<EfcEstimate> {
    if slope == 0.0 {
        return Err(Error::ZeroDerivative);
    }
    let eeu_with = rho(&base.union(resource), bg, Metric::Eeu)?;
    Ok(EfcEstimate {
        value: (eeu_with - eeu_base) / slope,
        method: EfcMethod::MarginalRatio,
        derivative: Some(slope),
        tolerance: 0.0,
        evaluations: 1,
    })
}

/// Load-carrying capability: the load `x` with `rho(R ∪ {i} - x) = rho(R)`.
pub fn elcc(
    resource: &ResourceSet,
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    metric: Metric,
    tol: f64,
) -> Result<f64> {
    check_tol(tol)?;
    let upper = resource.nominal_capacity();
    if upper <= 0.0 {
        return Ok(0.0);
    }
    let target = rho(base, bg, metric)?;
    let below = rho(&base.plus_firm(-upper), bg, metric)?;
    if below <= target {
        return Err(Error::FlatRisk {
            lower: base.firm - upper,
            upper: base.firm,
        });
    }
    let with = base.union(resource);
    if rho(&with, bg, metric)? >= target {
        return Ok(0.0);
    }
    // rho(with - x) rises with x; bisect on its negation.
    let (x, _) = bisect_decreasing(
        |x| Ok(-rho(&with.plus_firm(-x), bg, metric)?),
        -target,
        upper,
        tol,
    )?;
    Ok(x)
}

/// Firm capacity `y >= 0` with `rho(base + y) = target`.
pub fn calibrate_firm_on(
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    metric: Metric,
    target: f64,
    tol: f64,
) -> Result<f64> {
    check_tol(tol)?;
    if rho(base, bg, metric)? <= target {
        return Ok(0.0);
    }
    // Beyond the deepest residual demand nothing is left to serve.
    let upper = (bg.max_depth() - base.firm).max(0.0) + tol;
    if target.is_nan() || target < 0.0 || rho(&base.plus_firm(upper), bg, metric)? > target {
        return Err(Error::TargetUnreachable { target, upper });
    }
    let (y, _) = bisect_decreasing(|y| rho(&base.plus_firm(y), bg, metric), target, upper, tol)?;
    Ok(y)
}

/// Firm capacity that alone brings the background to `target`.
pub fn calibrate_firm(
    bg: &ShortfallEnsemble,
    metric: Metric,
    target: f64,
    tol: f64,
) -> Result<f64> {
    calibrate_firm_on(&ResourceSet::empty(), bg, metric, target, tol)
}

/// One row of an EFC report.
#[derive(Debug, Clone, Serialize)]
pub struct EfcRow {
    pub id: String,
    pub method: EfcMethod,
    pub value_mw: f64,
    pub tolerance: f64,
    pub derivative: Option<f64>,
}

pub fn write_efc_csv<W: std::io::Write>(writer: W, rows: &[EfcRow]) -> Result<()> {
    use crate::io::fmt6;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "method", "value_mw", "tolerance", "derivative"])?;
    for r in rows {
        let method = match r.method {
            EfcMethod::ExactBisection => "exact-bisection",
            EfcMethod::MarginalRatio => "marginal-ratio",
        };
        w.write_record([
            r.id.clone(),
            method.to_string(),
            fmt6(r.value_mw),
            fmt6(r.tolerance),
            r.derivative.map(fmt6).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
