//! Identifiable additive models with exact univariate certificates.
//!
//! A model is a constant plus univariate components on distinct coordinates;
//! components are piecewise-linear or polynomial of degree at most 3, so
//! every integral, extremum, and slope bound used by a certificate is closed
//! form, not sampled. Centering against the uniform reference measure makes
//! the representation unique, which is what lets per-component quantities be
//! meaningful at all. Over product sets, verification separates into
//! per-coordinate problems, and monotone components reduce it further to
//! endpoint checks.

use serde::Serialize;

use crate::bounds::BoxSet;
use crate::error::{Error, Result};
use crate::transport::{shift_certificate, RiskCertificate};

/// A closed bounded interval on the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFinite("interval".into()));
        }
        if lo > hi {
            return Err(Error::InvalidParameter(format!("interval [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum ComponentKind {
    /// Continuous piecewise-linear graph through `(breakpoints[i], values[i])`.
    PiecewiseLinear { breakpoints: Vec<f64>, values: Vec<f64> },
    /// `c0 + c1 t + c2 t^2 + c3 t^3` (trailing coefficients optional).
    Polynomial { coeffs: Vec<f64> },
}

/// One univariate component together with the interval it is defined on.
#[derive(Debug, Clone, Serialize)]
pub struct UnivariateComponent {
    kind: ComponentKind,
    domain: Interval,
}

impl UnivariateComponent {
    /// Piecewise-linear component; its domain is the breakpoint span.
    pub fn piecewise_linear(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidParameter("need at least two breakpoints".into()));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} breakpoints, {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("piecewise-linear data".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let domain = Interval::new(breakpoints[0], *breakpoints.last().unwrap())?;
        Ok(Self { kind: ComponentKind::PiecewiseLinear { breakpoints, values }, domain })
    }

    /// Polynomial component of degree at most 3 on an explicit domain.
    pub fn polynomial(coeffs: Vec<f64>, domain: Interval) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > 4 {
            return Err(Error::InvalidParameter(format!(
                "polynomial needs 1..=4 coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients".into()));
        }
        Ok(Self { kind: ComponentKind::Polynomial { coeffs }, domain })
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Value at `t`, which must lie in the domain (callers validate).
    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            ComponentKind::PiecewiseLinear { breakpoints, values } => {
                if t <= breakpoints[0] {
                    return values[0];
                }
                if t >= *breakpoints.last().unwrap() {
                    return *values.last().unwrap();
                }
                let idx = match breakpoints.binary_search_by(|b| b.total_cmp(&t)) {
                    Ok(i) => return values[i],
                    Err(i) => i,
                };
                let (t0, t1) = (breakpoints[idx - 1], breakpoints[idx]);
                let (v0, v1) = (values[idx - 1], values[idx]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
            ComponentKind::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for c in coeffs.iter().rev() {
                    acc = acc * t + c;
                }
                acc
            }
        }
    }

    fn shifted(&self, offset: f64) -> Self {
        let kind = match &self.kind {
            ComponentKind::PiecewiseLinear { breakpoints, values } => {
                ComponentKind::PiecewiseLinear {
                    breakpoints: breakpoints.clone(),
                    values: values.iter().map(|v| v + offset).collect(),
                }
            }
            ComponentKind::Polynomial { coeffs } => {
                let mut coeffs = coeffs.clone();
                coeffs[0] += offset;
                ComponentKind::Polynomial { coeffs }
            }
        };
        Self { kind, domain: self.domain }
    }
}

fn check_domain(g: &UnivariateComponent, interval: Interval) -> Result<()> {
    if !g.domain().contains(&interval) {
        return Err(Error::DomainViolation(format!(
            "[{}, {}] not within component domain [{}, {}]",
            interval.lo,
            interval.hi,
            g.domain().lo,
            g.domain().hi
        )));
    }
    Ok(())
}

/// Exact mean of the component against the uniform probability measure on
/// the interval: trapezoid-exact for piecewise-linear graphs, closed-form
/// monomial integrals for polynomials. A zero-width interval is the point
/// evaluation.
pub fn component_integral(g: &UnivariateComponent, interval: Interval) -> Result<f64> {
    check_domain(g, interval)?;
    let width = interval.width();
    if width == 0.0 {
        return Ok(g.eval(interval.lo));
    }
    let raw = match g.kind() {
        ComponentKind::PiecewiseLinear { breakpoints, values } => {
            let mut total = 0.0;
            for i in 1..breakpoints.len() {
                let a = breakpoints[i - 1].max(interval.lo);
                let b = breakpoints[i].min(interval.hi);
                if a >= b {
                    continue;
                }
                let va = values[i - 1]
                    + (values[i] - values[i - 1]) * (a - breakpoints[i - 1])
                        / (breakpoints[i] - breakpoints[i - 1]);
                let vb = values[i - 1]
                    + (values[i] - values[i - 1]) * (b - breakpoints[i - 1])
                        / (breakpoints[i] - breakpoints[i - 1]);
                total += 0.5 * (va + vb) * (b - a);
            }
            total
        }
        ComponentKind::Polynomial { coeffs } => {
            let antiderivative = |t: f64| {
                let mut acc = 0.0;
                let mut power = t;
                for (k, c) in coeffs.iter().enumerate() {
                    acc += c * power / (k as f64 + 1.0);
                    power *= t;
                }
                acc
            };
            antiderivative(interval.hi) - antiderivative(interval.lo)
        }
    };
    Ok(raw / width)
}

/// Exact maximal absolute slope of the component on the interval: the
/// largest segment slope for piecewise-linear graphs; for polynomials the
/// derivative is quadratic, so its absolute maximum sits at the interval
/// endpoints or the derivative's vertex.
pub fn component_lipschitz(g: &UnivariateComponent, interval: Interval) -> Result<f64> {
    check_domain(g, interval)?;
    if interval.width() == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = match slope_range(g, interval) {
        Some(r) => r,
        None => return Ok(0.0),
    };
    Ok(lo.abs().max(hi.abs()))
}

/// Range of the derivative over the interval (piecewise slopes or the exact
/// quadratic range). `None` when no segment overlaps, which cannot happen
/// for intervals of positive width inside the domain.
fn slope_range(g: &UnivariateComponent, interval: Interval) -> Option<(f64, f64)> {
    match g.kind() {
        ComponentKind::PiecewiseLinear { breakpoints, values } => {
            let mut range: Option<(f64, f64)> = None;
            for i in 1..breakpoints.len() {
                let a = breakpoints[i - 1].max(interval.lo);
                let b = breakpoints[i].min(interval.hi);
                if a >= b {
                    continue;
                }
                let s = (values[i] - values[i - 1]) / (breakpoints[i] - breakpoints[i - 1]);
                range = Some(match range {
                    None => (s, s),
                    Some((lo, hi)) => (lo.min(s), hi.max(s)),
                });
            }
            range
        }
        ComponentKind::Polynomial { coeffs } => {
            let c1 = coeffs.get(1).copied().unwrap_or(0.0);
            let c2 = coeffs.get(2).copied().unwrap_or(0.0);
            let c3 = coeffs.get(3).copied().unwrap_or(0.0);
            let deriv = |t: f64| c1 + 2.0 * c2 * t + 3.0 * c3 * t * t;
            let mut lo = deriv(interval.lo).min(deriv(interval.hi));
            let mut hi = deriv(interval.lo).max(deriv(interval.hi));
            if c3 != 0.0 {
                let vertex = -c2 / (3.0 * c3);
                if vertex > interval.lo && vertex < interval.hi {
                    let v = deriv(vertex);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            Some((lo, hi))
        }
    }
}

/// Exact extrema `(min, max)` of the component on the interval.
fn component_extrema(g: &UnivariateComponent, interval: Interval) -> (f64, f64) {
    let mut candidates = vec![interval.lo, interval.hi];
    match g.kind() {
        ComponentKind::PiecewiseLinear { breakpoints, .. } => {
            candidates
                .extend(breakpoints.iter().filter(|t| **t > interval.lo && **t < interval.hi));
        }
        ComponentKind::Polynomial { coeffs } => {
            let c1 = coeffs.get(1).copied().unwrap_or(0.0);
            let c2 = coeffs.get(2).copied().unwrap_or(0.0);
            let c3 = coeffs.get(3).copied().unwrap_or(0.0);
            // Roots of the quadratic derivative 3 c3 t^2 + 2 c2 t + c1.
            if c3 != 0.0 {
                let (a, b, c) = (3.0 * c3, 2.0 * c2, c1);
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    candidates.push((-b + sq) / (2.0 * a));
                    candidates.push((-b - sq) / (2.0 * a));
                }
            } else if c2 != 0.0 {
                candidates.push(-c1 / (2.0 * c2));
            }
        }
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for t in candidates {
        if t < interval.lo || t > interval.hi {
            continue;
        }
        let v = g.eval(t);
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// A constant plus components on distinct coordinates, with a per-coordinate
/// uniform reference interval. The reference must lie inside each
/// component's domain so centering integrals are defined.
#[derive(Debug, Clone, Serialize)]
pub struct AdditiveModel {
    constant: f64,
    components: Vec<(usize, UnivariateComponent)>,
    dimension: usize,
    reference: Vec<Interval>,
}

impl AdditiveModel {
    pub fn new(
        constant: f64,
        mut components: Vec<(usize, UnivariateComponent)>,
        dimension: usize,
        reference: Vec<Interval>,
    ) -> Result<Self> {
        if !constant.is_finite() {
            return Err(Error::NonFinite("constant".into()));
        }
        if dimension == 0 || reference.len() != dimension {
            return Err(Error::DimensionMismatch(format!(
                "{} reference intervals for dimension {dimension}",
                reference.len()
            )));
        }
        components.sort_by_key(|(j, _)| *j);
        for pair in components.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidParameter(format!(
                    "duplicate component on coordinate {}",
                    pair[0].0
                )));
            }
        }
        for (j, g) in &components {
            if *j >= dimension {
                return Err(Error::InvalidParameter(format!(
                    "component coordinate {j} out of range for dimension {dimension}"
                )));
            }
            if !g.domain().contains(&reference[*j]) {
                return Err(Error::DomainViolation(format!(
                    "reference interval of coordinate {j} not inside component domain"
                )));
            }
        }
        Ok(Self { constant, components, dimension, reference })
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn components(&self) -> &[(usize, UnivariateComponent)] {
        &self.components
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn reference(&self) -> &[Interval] {
        &self.reference
    }

    /// Number of nonzero components (the sparsity of the representation).
    pub fn sparsity(&self) -> usize {
        self.components.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, model expects {}",
                x.len(),
                self.dimension
            )));
        }
        let mut total = self.constant;
        for (j, g) in &self.components {
            let t = x[*j];
            if t < g.domain().lo || t > g.domain().hi {
                return Err(Error::DomainViolation(format!(
                    "coordinate {j} value {t} outside component domain"
                )));
            }
            total += g.eval(t);
        }
        Ok(total)
    }

    /// Largest absolute component mean under the reference measure; zero for
    /// a centered model.
    pub fn centering_residual(&self) -> f64 {
        self.components
            .iter()
            .map(|(j, g)| component_integral(g, self.reference[*j]).expect("reference in domain"))
            .fold(0.0, |acc: f64, m| acc.max(m.abs()))
    }

    pub fn is_centered(&self, tol: f64) -> bool {
        self.centering_residual() <= tol
    }

    fn per_coordinate_interval(&self, region: &BoxSet, j: usize) -> Result<Interval> {
        Interval::new(region.lo()[j], region.hi()[j])
    }

    fn check_region(&self, region: &BoxSet) -> Result<()> {
        if region.dim() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "box has dimension {}, model expects {}",
                region.dim(),
                self.dimension
            )));
        }
        for (j, g) in &self.components {
            let iv = self.per_coordinate_interval(region, *j)?;
            check_domain(g, iv)?;
        }
        Ok(())
    }
}

const CENTERING_TOL: f64 = 1e-9;

/// Subtract each component's reference mean from the component and absorb
/// the total into the constant. The model is unchanged as a function;
/// afterwards every component mean is zero, which pins the representation.
pub fn center_model(m: &AdditiveModel) -> AdditiveModel {
    let mut constant = m.constant();
    let mut components = Vec::with_capacity(m.components().len());
    for (j, g) in m.components() {
        let mean =
            component_integral(g, m.reference()[*j]).expect("reference inside domain");
        constant += mean;
        components.push((*j, g.shifted(-mean)));
    }
    AdditiveModel::new(constant, components, m.dimension(), m.reference().to_vec())
        .expect("centering preserves validity")
}

/// Sum of exact per-component slope bounds: a sound Lipschitz constant for
/// the model under the l1 input norm on the box.
pub fn additive_lipschitz_l1(m: &AdditiveModel, region: &BoxSet) -> Result<f64> {
    m.check_region(region)?;
    let mut total = 0.0;
    for (j, g) in m.components() {
        total += component_lipschitz(g, m.per_coordinate_interval(region, *j)?)?;
    }
    Ok(total)
}

/// Per-component slope bounds `(coordinate, L_j)` on the box.
pub fn component_lipschitz_profile(
    m: &AdditiveModel,
    region: &BoxSet,
) -> Result<Vec<(usize, f64)>> {
    m.check_region(region)?;
    m.components()
        .iter()
        .map(|(j, g)| {
            Ok((*j, component_lipschitz(g, m.per_coordinate_interval(region, *j)?)?))
        })
        .collect()
}

/// Exact `(inf, sup)` of the model over a product box: additivity over a
/// product set separates, so each component is extremized on its own
/// interval and the results add.
pub fn product_sup_inf(m: &AdditiveModel, region: &BoxSet) -> Result<(f64, f64)> {
    m.check_region(region)?;
    let mut inf = m.constant();
    let mut sup = m.constant();
    for (j, g) in m.components() {
        let (lo, hi) = component_extrema(g, m.per_coordinate_interval(region, *j)?);
        inf += lo;
        sup += hi;
    }
    Ok((inf, sup))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
}

impl std::fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Monotonicity::Increasing => write!(f, "increasing"),
            Monotonicity::Decreasing => write!(f, "decreasing"),
            Monotonicity::Constant => write!(f, "constant"),
        }
    }
}

/// Endpoint certificate for a monotone model: the maximizing vertex of the
/// box and the exact value there.
#[derive(Debug, Clone, Serialize)]
pub struct EndpointCertificate {
    pub vertex: Vec<f64>,
    pub value: f64,
    pub directions: Vec<(usize, Monotonicity)>,
}

/// Requires every component weakly monotone on its box interval (certified
/// from slopes: all segment slopes share a sign, or the quadratic derivative
/// has constant sign). The maximum is then attained at a vertex: increasing
/// components pick the right endpoint, decreasing the left, constant
/// components resolve to the right endpoint. Coordinates without a
/// component do not affect the value and default to the right endpoint.
pub fn monotone_endpoint_certificate(
    m: &AdditiveModel,
    region: &BoxSet,
) -> Result<EndpointCertificate> {
    m.check_region(region)?;
    let mut directions = Vec::with_capacity(m.components().len());
    let mut vertex: Vec<f64> = region.hi().to_vec();
    let mut value = m.constant();
    for (j, g) in m.components() {
        let iv = m.per_coordinate_interval(region, *j)?;
        let (slope_lo, slope_hi) = slope_range(g, iv).unwrap_or((0.0, 0.0));
        let direction = if slope_lo >= 0.0 && slope_hi <= 0.0 {
            Monotonicity::Constant
        } else if slope_lo >= 0.0 {
            Monotonicity::Increasing
        } else if slope_hi <= 0.0 {
            Monotonicity::Decreasing
        } else {
            return Err(Error::NonMonotone {
                coord: *j,
                t_pos: argmax_slope(g, iv, true),
                t_neg: argmax_slope(g, iv, false),
            });
        };
        let at = match direction {
            Monotonicity::Increasing | Monotonicity::Constant => iv.hi,
            Monotonicity::Decreasing => iv.lo,
        };
        vertex[*j] = at;
        value += g.eval(at);
        directions.push((*j, direction));
    }
    Ok(EndpointCertificate { vertex, value, directions })
}

/// A point where the derivative is positive (or negative), as a sign-change
/// witness for non-monotone components.
fn argmax_slope(g: &UnivariateComponent, iv: Interval, positive: bool) -> f64 {
    match g.kind() {
        ComponentKind::PiecewiseLinear { breakpoints, values } => {
            for i in 1..breakpoints.len() {
                let a = breakpoints[i - 1].max(iv.lo);
                let b = breakpoints[i].min(iv.hi);
                if a >= b {
                    continue;
                }
                let s = (values[i] - values[i - 1]) / (breakpoints[i] - breakpoints[i - 1]);
                if (positive && s > 0.0) || (!positive && s < 0.0) {
                    return 0.5 * (a + b);
                }
            }
            0.5 * (iv.lo + iv.hi)
        }
        ComponentKind::Polynomial { coeffs } => {
            let c1 = coeffs.get(1).copied().unwrap_or(0.0);
            let c2 = coeffs.get(2).copied().unwrap_or(0.0);
            let c3 = coeffs.get(3).copied().unwrap_or(0.0);
            let deriv = |t: f64| c1 + 2.0 * c2 * t + 3.0 * c3 * t * t;
            // Scan candidates; the derivative is quadratic, so endpoints and
            // vertex cover the extreme signs.
            let mut candidates = vec![iv.lo, iv.hi, 0.5 * (iv.lo + iv.hi)];
            if c3 != 0.0 {
                candidates.push((-c2 / (3.0 * c3)).clamp(iv.lo, iv.hi));
            }
            *candidates
                .iter()
                .find(|t| if positive { deriv(**t) > 0.0 } else { deriv(**t) < 0.0 })
                .unwrap_or(&iv.lo)
        }
    }
}

/// Numerical identifiability residual between two centered representations:
/// the constant gap and the largest per-coordinate gap on a uniform grid
/// over the shared reference intervals (missing components are the zero
/// function). Representations that agree as functions have residuals at the
/// rounding level.
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityResidual {
    pub const_diff: f64,
    pub max_component_diff: f64,
}

pub fn identifiability_residual(
    ma: &AdditiveModel,
    mb: &AdditiveModel,
    grid_per_dim: usize,
) -> Result<IdentifiabilityResidual> {
    if ma.dimension() != mb.dimension() {
        return Err(Error::ModelMismatch(format!(
            "dimensions {} and {}",
            ma.dimension(),
            mb.dimension()
        )));
    }
    if ma.reference() != mb.reference() {
        return Err(Error::ModelMismatch("reference intervals differ".into()));
    }
    if grid_per_dim < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
    }
    for (name, m) in [("first", ma), ("second", mb)] {
        if !m.is_centered(CENTERING_TOL) {
            return Err(Error::NotCentered(format!(
                "{name} model has centering residual {}",
                m.centering_residual()
            )));
        }
    }

    let component_of = |m: &AdditiveModel, j: usize| -> Option<UnivariateComponent> {
        m.components().iter().find(|(k, _)| *k == j).map(|(_, g)| g.clone())
    };
    let mut max_component_diff: f64 = 0.0;
    for j in 0..ma.dimension() {
        let ga = component_of(ma, j);
        let gb = component_of(mb, j);
        if ga.is_none() && gb.is_none() {
            continue;
        }
        let iv = ma.reference()[j];
        for i in 0..grid_per_dim {
            let t = iv.lo + iv.width() * (i as f64) / (grid_per_dim as f64 - 1.0);
            let va = ga.as_ref().map_or(0.0, |g| g.eval(t));
            let vb = gb.as_ref().map_or(0.0, |g| g.eval(t));
            max_component_diff = max_component_diff.max((va - vb).abs());
        }
    }
    Ok(IdentifiabilityResidual {
        const_diff: (ma.constant() - mb.constant()).abs(),
        max_component_diff,
    })
}

/// Shift-risk certificate whose sensitivity decomposes over components.
#[derive(Debug, Clone, Serialize)]
pub struct AdditiveShiftCertificate {
    pub risk: RiskCertificate,
    /// `(coordinate, L_j)` for every component; the certificate's
    /// sensitivity is `l_loss` times their sum.
    pub component_sensitivities: Vec<(usize, f64)>,
}

/// Delegates to the transport-shift certificate with the decomposed l1
/// Lipschitz bound as the predictor constant. Requires a centered model so
/// the per-component constants are identifiable quantities.
pub fn additive_shift_certificate(
    m: &AdditiveModel,
    region: &BoxSet,
    train_risk: f64,
    rho: f64,
    l_loss: f64,
    covariate_shift_assumed: bool,
) -> Result<AdditiveShiftCertificate> {
    if !m.is_centered(CENTERING_TOL) {
        return Err(Error::NotCentered(format!(
            "centering residual {}",
            m.centering_residual()
        )));
    }
    let profile = component_lipschitz_profile(m, region)?;
    let l_f = profile.iter().map(|(_, l)| l).sum();
    let risk = shift_certificate(train_risk, rho, l_loss, l_f, covariate_shift_assumed)?;
    Ok(AdditiveShiftCertificate { risk, component_sensitivities: profile })
}

/// Parse the additive model format:
///
/// ```text
/// additive v1
/// dim 5
/// const 0.0
/// ref 0 -1 1
/// ...                 (one per coordinate)
/// pwl 2 3             (coordinate, point count; then `t v` lines)
/// poly 0 2 0 1 0.5    (coordinate, degree, then degree+1 coefficients)
/// ```
pub fn parse_additive(text: &str) -> Result<AdditiveModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut expect = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("unexpected end, wanted {what}") })
    };

    let (line, header) = expect("header")?;
    if header != "additive v1" {
        return Err(Error::Parse { line, msg: format!("expected `additive v1`, got `{header}`") });
    }
    let parse_f64 = |line: usize, tok: &str| -> Result<f64> {
        tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad decimal `{tok}`") })
    };
    let parse_usize = |line: usize, tok: &str| -> Result<usize> {
        tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer `{tok}`") })
    };

    let (line, dim_line) = expect("dim")?;
    let dim = match dim_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["dim", d] => parse_usize(line, d)?,
        _ => return Err(Error::Parse { line, msg: "expected `dim d`".into() }),
    };
    let (line, const_line) = expect("const")?;
    let constant = match const_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["const", c] => parse_f64(line, c)?,
        _ => return Err(Error::Parse { line, msg: "expected `const c`".into() }),
    };
    let mut reference = vec![None; dim];
    for _ in 0..dim {
        let (line, ref_line) = expect("ref")?;
        match ref_line.split_whitespace().collect::<Vec<_>>()[..] {
            ["ref", j, lo, hi] => {
                let j = parse_usize(line, j)?;
                if j >= dim {
                    return Err(Error::Parse { line, msg: format!("ref coordinate {j} >= dim") });
                }
                reference[j] = Some(Interval::new(parse_f64(line, lo)?, parse_f64(line, hi)?)?);
            }
            _ => return Err(Error::Parse { line, msg: "expected `ref j lo hi`".into() }),
        }
    }
    let reference: Vec<Interval> = reference
        .into_iter()
        .enumerate()
        .map(|(j, r)| r.ok_or(Error::Parse { line: 0, msg: format!("missing ref {j}") }))
        .collect::<Result<_>>()?;

    let mut components = Vec::new();
    while let Some((line, head)) = lines.next() {
        let tokens: Vec<&str> = head.split_whitespace().collect();
        match tokens.as_slice() {
            ["pwl", j, n] => {
                let j = parse_usize(line, j)?;
                let n = parse_usize(line, n)?;
                let mut breakpoints = Vec::with_capacity(n);
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    let (line, pair) = lines.next().ok_or(Error::Parse {
                        line: 0,
                        msg: "missing pwl point".into(),
                    })?;
                    match pair.split_whitespace().collect::<Vec<_>>()[..] {
                        [t, v] => {
                            breakpoints.push(parse_f64(line, t)?);
                            values.push(parse_f64(line, v)?);
                        }
                        _ => return Err(Error::Parse { line, msg: "expected `t v`".into() }),
                    }
                }
                components.push((j, UnivariateComponent::piecewise_linear(breakpoints, values)?));
            }
            ["poly", j, k, rest @ ..] => {
                let j = parse_usize(line, j)?;
                let k = parse_usize(line, k)?;
                if rest.len() != k + 1 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("degree {k} needs {} coefficients", k + 1),
                    });
                }
                let coeffs: Vec<f64> =
                    rest.iter().map(|t| parse_f64(line, t)).collect::<Result<_>>()?;
                if j >= dim {
                    return Err(Error::Parse { line, msg: format!("coordinate {j} >= dim") });
                }
                components.push((j, UnivariateComponent::polynomial(coeffs, reference[j])?));
            }
            _ => return Err(Error::Parse { line, msg: format!("unexpected line `{head}`") }),
        }
    }
    AdditiveModel::new(constant, components, dim, reference)
}

pub fn load_additive(path: &std::path::Path) -> Result<AdditiveModel> {
    parse_additive(&std::fs::read_to_string(path)?)
}

pub fn format_additive(m: &AdditiveModel) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("additive v1\n");
    writeln!(out, "dim {}", m.dimension()).unwrap();
    writeln!(out, "const {}", m.constant()).unwrap();
    for (j, r) in m.reference().iter().enumerate() {
        writeln!(out, "ref {} {} {}", j, r.lo, r.hi).unwrap();
    }
    for (j, g) in m.components() {
        match g.kind() {
            ComponentKind::PiecewiseLinear { breakpoints, values } => {
                writeln!(out, "pwl {} {}", j, breakpoints.len()).unwrap();
                for (t, v) in breakpoints.iter().zip(values) {
                    writeln!(out, "{t} {v}").unwrap();
                }
            }
            ComponentKind::Polynomial { coeffs } => {
                write!(out, "poly {} {}", j, coeffs.len() - 1).unwrap();
                for c in coeffs {
                    write!(out, " {c}").unwrap();
                }
                out.push('\n');
            }
        }
    }
    out
}
