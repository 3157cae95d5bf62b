//! Empirical optimal transport in one dimension and the shift-risk
//! certificate built on it.
//!
//! [`w1_empirical_1d`] computes the exact 1-Wasserstein distance between two
//! empirical measures by merging quantile breakpoints (the sorted coupling
//! is optimal in one dimension). [`w1_lp_oracle`] solves the same problem as
//! a general coupling program via min-cost flow, with no use of the 1-D
//! shortcut; the two routes cross-validate each other.
//!
//! [`shift_certificate`] stamps the bound `train risk + radius *
//! sensitivity`. The certificate record carries the covariate-shift flag:
//! when the flag is off the record is marked vacuous and the bound is not
//! asserted — [`shift_flip_construction`] builds the scenario showing why.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Network, NormKind};

/// 1-D covariates with optional binary labels in {-1, +1}.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalSample {
    xs: Vec<f64>,
    ys: Option<Vec<f64>>,
}

impl EmpiricalSample {
    pub fn unlabeled(xs: Vec<f64>) -> Result<Self> {
        Self::build(xs, None)
    }

    pub fn labeled(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::build(xs, Some(ys))
    }

    fn build(xs: Vec<f64>, ys: Option<Vec<f64>>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sample covariates".into()));
        }
        if let Some(ys) = &ys {
            if ys.len() != xs.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} covariates",
                    ys.len(),
                    xs.len()
                )));
            }
            if ys.iter().any(|y| *y != 1.0 && *y != -1.0) {
                return Err(Error::InvalidParameter("labels must be -1 or +1".into()));
            }
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> Option<&[f64]> {
        self.ys.as_deref()
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one point
    }
}

/// Parse the sample CSV format: header `x` or `x,y`, one record per line.
pub fn parse_samples(text: &str) -> Result<EmpiricalSample> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) =
        lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let labeled = match header.trim() {
        "x" => false,
        "x,y" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `x` or `x,y`, found `{other}`"),
            })
        }
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = line.split(',').map(str::trim);
        let x: f64 = fields
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse { line: line_no, msg: "bad x value".into() })?;
        xs.push(x);
        if labeled {
            let y: f64 = fields
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse { line: line_no, msg: "bad y value".into() })?;
            ys.push(y);
        } else if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: "unlabeled file has a second column".into(),
            });
        }
    }
    if labeled {
        EmpiricalSample::labeled(xs, ys)
    } else {
        EmpiricalSample::unlabeled(xs)
    }
}

pub fn load_samples(path: &std::path::Path) -> Result<EmpiricalSample> {
    parse_samples(&std::fs::read_to_string(path)?)
}

pub fn format_samples(s: &EmpiricalSample) -> String {
    let mut out = String::new();
    match s.ys() {
        Some(ys) => {
            out.push_str("x,y\n");
            for (x, y) in s.xs().iter().zip(ys) {
                out.push_str(&format!("{x},{y}\n"));
            }
        }
        None => {
            out.push_str("x\n");
            for x in s.xs() {
                out.push_str(&format!("{x}\n"));
            }
        }
    }
    out
}

/// Loss on a scalar prediction against a label in {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LossKind {
    /// `max(0, 1 - y u)`; 1-Lipschitz in the prediction.
    Hinge,
    /// `1{sign(u) != y}` with `sign(0) = +1`; carries no Lipschitz constant.
    ZeroOne,
}

impl LossKind {
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            LossKind::Hinge => Some(1.0),
            LossKind::ZeroOne => None,
        }
    }

    pub fn eval(&self, prediction: f64, label: f64) -> f64 {
        match self {
            LossKind::Hinge => (1.0 - label * prediction).max(0.0),
            LossKind::ZeroOne => {
                let predicted = if prediction >= 0.0 { 1.0 } else { -1.0 };
                if predicted == label {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// Scalar predictor: either an affine model or a 1-input, 1-output network.
#[derive(Debug, Clone, Serialize)]
pub enum Predictor {
    Affine { w: f64, b: f64 },
    Net(Network),
}

impl Predictor {
    pub fn value(&self, x: f64) -> Result<f64> {
        match self {
            Predictor::Affine { w, b } => Ok(w * x + b),
            Predictor::Net(net) => {
                if net.input_dim() != 1 || net.output_dim() != 1 {
                    return Err(Error::DimensionMismatch(
                        "predictor network must be 1-input, 1-output".into(),
                    ));
                }
                Ok(net.evaluate(&[x])?[0])
            }
        }
    }

    /// Sound Lipschitz upper bound of the predictor on the line.
    pub fn lipschitz_upper(&self) -> f64 {
        match self {
            Predictor::Affine { w, .. } => w.abs(),
            Predictor::Net(net) => net.lipschitz_upper(NormKind::L2),
        }
    }
}

/// Exact 1-Wasserstein distance between two empirical measures on the line,
/// by integrating `|F^{-1} - G^{-1}|` over merged quantile breakpoints.
/// With equal sizes this reduces to the mean absolute difference of the
/// sorted samples. Breakpoint positions are compared in integer arithmetic,
/// so segment boundaries are exact.
pub fn w1_empirical_1d(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let mut xs = a.xs().to_vec();
    let mut ys = b.xs().to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let n = xs.len() as u128;
    let m = ys.len() as u128;
    // Positions on (0, 1] in units of 1/(n m).
    let denom = (n * m) as f64;
    let mut total = 0.0;
    let mut i: u128 = 0;
    let mut j: u128 = 0;
    let mut prev: u128 = 0;
    while i < n && j < m {
        let next_a = (i + 1) * m;
        let next_b = (j + 1) * n;
        let next = next_a.min(next_b);
        total += ((next - prev) as f64 / denom) * (xs[i as usize] - ys[j as usize]).abs();
        prev = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    total
}

const ORACLE_SIZE_CAP: usize = 64;

/// Exact optimal transport cost as a coupling program, solved by successive
/// shortest-path min-cost flow on integer-scaled masses. Never uses the
/// sorted-coupling shortcut; serves as the independent oracle for
/// [`w1_empirical_1d`]. Capped at 64 points per side.
pub fn w1_lp_oracle(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
    let n = a.len();
    let m = b.len();
    for size in [n, m] {
        if size > ORACLE_SIZE_CAP {
            return Err(Error::OracleSizeCap { size, cap: ORACLE_SIZE_CAP });
        }
    }
    // Scale masses 1/n and 1/m by lcm(n, m) so every supply is integral.
    let g = gcd(n as u64, m as u64);
    let lcm = (n as u64 / g) * m as u64;
    let supply = lcm / n as u64;
    let demand = lcm / m as u64;

    let source = 0usize;
    let sink = n + m + 1;
    let mut flow = MinCostFlow::new(n + m + 2);
    for i in 0..n {
        flow.add_edge(source, 1 + i, supply, 0.0);
    }
    for (i, x) in a.xs().iter().enumerate() {
        for (j, y) in b.xs().iter().enumerate() {
            flow.add_edge(1 + i, 1 + n + j, lcm, (x - y).abs());
        }
    }
    for j in 0..m {
        flow.add_edge(1 + n + j, sink, demand, 0.0);
    }
    let (sent, cost) = flow.run(source, sink);
    debug_assert_eq!(sent, lcm);
    Ok(cost / lcm as f64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

/// Successive shortest paths with Johnson potentials. Costs are nonnegative,
/// so plain Dijkstra on reduced costs is valid throughout.
struct MinCostFlow {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl MinCostFlow {
    fn new(nodes: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
    }

    fn run(&mut self, source: usize, sink: usize) -> (u64, f64) {
        let n = self.adj.len();
        let mut potential = vec![0.0f64; n];
        let mut total_flow = 0u64;
        let mut total_cost = 0.0f64;
        loop {
            // Dijkstra on reduced costs (dense scan; the graph is tiny).
            let mut dist = vec![f64::INFINITY; n];
            let mut prev_edge = vec![usize::MAX; n];
            let mut done = vec![false; n];
            dist[source] = 0.0;
            loop {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
                for v in 0..n {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                for &eid in &self.adj[u] {
                    let e = &self.edges[eid];
                    if e.cap == 0 {
                        continue;
                    }
                    let rc = (e.cost + potential[u] - potential[e.to]).max(0.0);
                    if dist[u] + rc < dist[e.to] {
                        dist[e.to] = dist[u] + rc;
                        prev_edge[e.to] = eid;
                    }
                }
            }
            if !dist[sink].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            // Bottleneck along the shortest path.
            let mut push = u64::MAX;
            let mut v = sink;
            while v != source {
                let eid = prev_edge[v];
                push = push.min(self.edges[eid].cap);
                v = self.edges[eid ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let eid = prev_edge[v];
                self.edges[eid].cap -= push;
                self.edges[eid ^ 1].cap += push;
                total_cost += push as f64 * self.edges[eid].cost;
                v = self.edges[eid ^ 1].to;
            }
            total_flow += push;
        }
        (total_flow, total_cost)
    }
}

/// Mean loss of the predictor over a labeled sample.
pub fn empirical_risk(
    predictor: &Predictor,
    sample: &EmpiricalSample,
    loss: LossKind,
) -> Result<f64> {
    let ys = sample.ys().ok_or(Error::MissingLabels)?;
    let mut total = 0.0;
    for (x, y) in sample.xs().iter().zip(ys) {
        total += loss.eval(predictor.value(*x)?, *y);
    }
    Ok(total / sample.len() as f64)
}

/// The shift-risk certificate record. The arithmetic identity
/// `certified_shift_risk = train_risk + rho * sensitivity` holds exactly in
/// the stored floating-point values.
#[derive(Debug, Clone, Serialize)]
pub struct RiskCertificate {
    pub train_risk: f64,
    pub rho: f64,
    /// `l_loss * l_f`, the certified sensitivity of loss-after-predictor.
    pub sensitivity: f64,
    pub certified_shift_risk: f64,
    /// The covariate-shift gate. When false the certificate is vacuous:
    /// the bound is recorded but not asserted.
    pub covariate_shift_assumed: bool,
}

impl RiskCertificate {
    pub fn is_vacuous(&self) -> bool {
        !self.covariate_shift_assumed
    }

    /// A certificate is stamped only when its assumption gate is closed.
    pub fn is_stamped(&self) -> bool {
        self.covariate_shift_assumed
    }
}

/// Stamp the bound `train_risk + rho * (l_loss * l_f)`.
///
/// `rho` is taken as given: either a design radius or the empirical
/// transport distance; no population validity is claimed either way.
pub fn shift_certificate(
    train_risk: f64,
    rho: f64,
    l_loss: f64,
    l_f: f64,
    covariate_shift_assumed: bool,
) -> Result<RiskCertificate> {
    for (name, v) in [("train_risk", train_risk), ("rho", rho), ("l_loss", l_loss), ("l_f", l_f)]
    {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    if rho < 0.0 {
        return Err(Error::InvalidParameter(format!("rho {rho} must be nonnegative")));
    }
    if l_loss < 0.0 || l_f < 0.0 {
        return Err(Error::InvalidParameter("Lipschitz constants must be nonnegative".into()));
    }
    let sensitivity = l_loss * l_f;
    Ok(RiskCertificate {
        train_risk,
        rho,
        sensitivity,
        certified_shift_risk: train_risk + rho * sensitivity,
        covariate_shift_assumed,
    })
}

/// Checkable form of the empirical shift bound. Builds the sorted coupling
/// between equal-size train and target samples (labels ride with their
/// source points) and returns
///
/// `lhs` = risk on the transported points with carried labels,
/// `rhs` = train risk + W1 * l_loss * l_f.
///
/// For a Lipschitz loss and a sound `l_f`, `lhs <= rhs` always.
pub fn empirical_shift_check(
    predictor: &Predictor,
    train: &EmpiricalSample,
    target: &EmpiricalSample,
    loss: LossKind,
    l_f: f64,
) -> Result<(f64, f64)> {
    let ys = train.ys().ok_or(Error::MissingLabels)?;
    if target.len() != train.len() {
        return Err(Error::DimensionMismatch(format!(
            "sorted coupling needs equal sizes, got {} train and {} target",
            train.len(),
            target.len()
        )));
    }
    let l_loss = loss.lipschitz().ok_or(Error::NonLipschitzLoss)?;

    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&i, &j| train.xs()[i].total_cmp(&train.xs()[j]));
    let mut target_sorted = target.xs().to_vec();
    target_sorted.sort_by(f64::total_cmp);

    let mut transported = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        transported += loss.eval(predictor.value(target_sorted[rank])?, ys[i]);
    }
    let lhs = transported / train.len() as f64;

    let train_risk = empirical_risk(predictor, train, loss)?;
    let rhs = train_risk + w1_empirical_1d(train, target) * l_loss * l_f;
    Ok((lhs, rhs))
}

/// The scenario in which a small transport shift flips the risk from 0 to 1
/// because the conditional label law changes: train points carry label +1,
/// target points are the same covariates pushed right by `rho` (truncated to
/// [0, 1]) with every label flipped. The constant predictor 0 is perfect on
/// one and perfectly wrong on the other, while the covariate distance stays
/// at most `rho`. Covariate shift does not hold here, by construction, so
/// no shift certificate can be stamped for it.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftFlipScenario {
    pub train: EmpiricalSample,
    pub target: EmpiricalSample,
    pub predictor: Predictor,
    pub risk_train: f64,
    pub risk_target: f64,
    pub w1: f64,
    pub rho: f64,
}

impl ShiftFlipScenario {
    /// The A1 gate is open in this construction, always.
    pub fn covariate_shift_assumed(&self) -> bool {
        false
    }
}

pub fn shift_flip_construction(rho: f64, n: usize, seed: u64) -> Result<ShiftFlipScenario> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho {rho} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let shifted: Vec<f64> = xs.iter().map(|x| (x + rho).min(1.0)).collect();
    let train = EmpiricalSample::labeled(xs, vec![1.0; n])?;
    let target = EmpiricalSample::labeled(shifted, vec![-1.0; n])?;
    let predictor = Predictor::Affine { w: 0.0, b: 0.0 };

    let risk_train = empirical_risk(&predictor, &train, LossKind::ZeroOne)?;
    let risk_target = empirical_risk(&predictor, &target, LossKind::ZeroOne)?;
    let w1 = w1_empirical_1d(&train, &target);
    if risk_train != 0.0 || risk_target != 1.0 || w1 > rho + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "flip construction self-check failed: risks ({risk_train}, {risk_target}), W1 {w1}"
        )));
    }
    Ok(ShiftFlipScenario { train, target, predictor, risk_train, risk_target, w1, rho })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(xs: &[f64]) -> EmpiricalSample {
        EmpiricalSample::unlabeled(xs.to_vec()).unwrap()
    }

    fn random_sample(rng: &mut ChaCha12Rng, len: usize) -> EmpiricalSample {
        sample(&(0..len).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>())
    }

    #[test]
    fn w1_of_identical_samples_is_zero() {
        let s = sample(&[0.3, -1.2, 2.0, 0.3]);
        assert_eq!(w1_empirical_1d(&s, &s), 0.0);
        assert_eq!(w1_lp_oracle(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn w1_equal_sizes_is_mean_sorted_difference() {
        let a = sample(&[0.0, 1.0]);
        let b = sample(&[0.5, 1.5]);
        assert!((w1_empirical_1d(&a, &b) - 0.5).abs() <= 1e-15);
        assert!((w1_lp_oracle(&a, &b).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn w1_unequal_sizes_uses_the_quantile_integral() {
        let a = sample(&[0.0]);
        let b = sample(&[0.0, 1.0]);
        assert!((w1_empirical_1d(&a, &b) - 0.5).abs() <= 1e-15);
        assert!((w1_lp_oracle(&a, &b).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn point_masses_transport_at_their_distance() {
        let a = sample(&[0.0]);
        for rho in [0.1, 0.5, 2.0] {
            let b = sample(&[rho]);
            assert!((w1_lp_oracle(&a, &b).unwrap() - rho).abs() <= 1e-12);
        }
    }

    #[test]
    fn sorting_matches_the_lp_oracle_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        for trial in 0..100 {
            let n = rng.random_range(1..=20);
            let m = if trial % 2 == 0 { n } else { rng.random_range(1..=20) };
            let a = random_sample(&mut rng, n);
            let b = random_sample(&mut rng, m);
            let fast = w1_empirical_1d(&a, &b);
            let exact = w1_lp_oracle(&a, &b).unwrap();
            assert!(
                (fast - exact).abs() <= 1e-9,
                "trial {trial}: sorting {fast} vs lp {exact}"
            );
        }
    }

    #[test]
    fn oracle_rejects_oversized_inputs() {
        let a = sample(&vec![0.0; 65]);
        let b = sample(&[0.0]);
        assert!(matches!(w1_lp_oracle(&a, &b), Err(Error::OracleSizeCap { .. })));
    }

    #[test]
    fn metric_axioms_hold_empirically() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (na, nb, nc) = (
                rng.random_range(1..=30),
                rng.random_range(1..=30),
                rng.random_range(1..=30),
            );
            let a = random_sample(&mut rng, na);
            let b = random_sample(&mut rng, nb);
            let c = random_sample(&mut rng, nc);
            let dab = w1_empirical_1d(&a, &b);
            let dba = w1_empirical_1d(&b, &a);
            let dac = w1_empirical_1d(&a, &c);
            let dcb = w1_empirical_1d(&c, &b);
            assert!(dab >= 0.0);
            assert!((dab - dba).abs() <= 1e-12, "symmetry");
            assert!(dab <= dac + dcb + 1e-9, "triangle");
        }
        // Zero iff identical multisets.
        let a = sample(&[1.0, 2.0, 3.0]);
        let shuffled = sample(&[3.0, 1.0, 2.0]);
        assert!(w1_empirical_1d(&a, &shuffled) <= 1e-12);
        let moved = sample(&[1.0, 2.0, 3.1]);
        assert!(w1_empirical_1d(&a, &moved) > 1e-3);
    }

    #[test]
    fn hinge_risk_of_the_zero_predictor_is_one() {
        let s = EmpiricalSample::labeled(vec![0.1, 0.7, -0.3], vec![1.0, -1.0, 1.0]).unwrap();
        let f = Predictor::Affine { w: 0.0, b: 0.0 };
        assert_eq!(empirical_risk(&f, &s, LossKind::Hinge).unwrap(), 1.0);
    }

    #[test]
    fn separated_data_with_unit_margin_has_zero_hinge_risk() {
        // f(x) = 4x - 2 gives margin >= 1 on these points.
        let s = EmpiricalSample::labeled(
            vec![0.0, 0.1, 0.9, 1.0],
            vec![-1.0, -1.0, 1.0, 1.0],
        )
        .unwrap();
        let f = Predictor::Affine { w: 4.0, b: -2.0 };
        assert_eq!(empirical_risk(&f, &s, LossKind::Hinge).unwrap(), 0.0);
    }

    #[test]
    fn risk_requires_labels() {
        let s = sample(&[0.0, 1.0]);
        let f = Predictor::Affine { w: 1.0, b: 0.0 };
        assert!(matches!(
            empirical_risk(&f, &s, LossKind::Hinge),
            Err(Error::MissingLabels)
        ));
    }

    #[test]
    fn certificate_with_zero_radius_is_the_train_risk() {
        let cert = shift_certificate(0.25, 0.0, 1.0, 7.0, true).unwrap();
        assert_eq!(cert.certified_shift_risk, 0.25);
        assert!(cert.is_stamped());
    }

    #[test]
    fn certificate_identity_is_exact_in_floating_point() {
        let cert = shift_certificate(0.3121, 0.173, 1.0, 2.7, true).unwrap();
        assert_eq!(
            cert.certified_shift_risk - cert.train_risk - cert.rho * cert.sensitivity,
            0.0
        );
    }

    #[test]
    fn linear_hinge_certificate_uses_the_weight_magnitude() {
        // Hinge is 1-Lipschitz and an affine model has slope |w|, so the
        // certificate is train risk + rho |w|.
        let f = Predictor::Affine { w: -3.0, b: 0.2 };
        let cert = shift_certificate(0.1, 0.05, 1.0, f.lipschitz_upper(), true).unwrap();
        assert!((cert.sensitivity - 3.0).abs() <= 1e-15);
        assert!((cert.certified_shift_risk - (0.1 + 0.05 * 3.0)).abs() <= 1e-15);
    }

    #[test]
    fn decomposed_sensitivity_for_the_two_component_model() {
        // Components with slopes 1 and 2*0.5 sum to 2; any loss constant
        // scales it linearly.
        for l_loss in [1.0, 0.5, 2.0] {
            let cert = shift_certificate(0.0, 1.0, l_loss, 2.0, true).unwrap();
            assert!((cert.sensitivity - 2.0 * l_loss).abs() <= 1e-15);
        }
    }

    #[test]
    fn negative_rho_is_rejected() {
        assert!(shift_certificate(0.0, -0.1, 1.0, 1.0, true).is_err());
    }

    #[test]
    fn shift_check_with_no_shift_is_tight() {
        let train =
            EmpiricalSample::labeled(vec![0.2, 0.5, 0.8], vec![1.0, -1.0, 1.0]).unwrap();
        let target = sample(&[0.2, 0.5, 0.8]);
        let f = Predictor::Affine { w: 1.5, b: -0.4 };
        let (lhs, rhs) =
            empirical_shift_check(&f, &train, &target, LossKind::Hinge, 1.5).unwrap();
        let train_risk = empirical_risk(&f, &train, LossKind::Hinge).unwrap();
        assert!((lhs - train_risk).abs() <= 1e-12);
        assert!((rhs - train_risk).abs() <= 1e-12);
    }

    #[test]
    fn translation_shift_saturates_the_radius() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
        let ys: Vec<f64> =
            (0..40).map(|_| if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 }).collect();
        let rho = 0.3;
        let shifted: Vec<f64> = xs.iter().map(|x| x + rho).collect();
        let train = EmpiricalSample::labeled(xs, ys).unwrap();
        let target = sample(&shifted);
        assert!((w1_empirical_1d(&train, &target) - rho).abs() <= 1e-12);
        let f = Predictor::Affine { w: 2.0, b: -1.0 };
        let (lhs, rhs) =
            empirical_shift_check(&f, &train, &target, LossKind::Hinge, 2.0).unwrap();
        assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn shift_check_inequality_holds_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for trial in 0..200 {
            let n = rng.random_range(1..=50);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ys: Vec<f64> = (0..n)
                .map(|_| if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 })
                .collect();
            let tx: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let train = EmpiricalSample::labeled(xs, ys).unwrap();
            let target = sample(&tx);
            let f = Predictor::Affine {
                w: rng.random_range(-4.0..4.0),
                b: rng.random_range(-1.0..1.0),
            };
            let (lhs, rhs) =
                empirical_shift_check(&f, &train, &target, LossKind::Hinge, f.lipschitz_upper())
                    .unwrap();
            assert!(lhs <= rhs + 1e-9, "trial {trial}: lhs {lhs} > rhs {rhs}");
        }
    }

    #[test]
    fn shift_check_demands_equal_sizes_and_lipschitz_loss() {
        let train = EmpiricalSample::labeled(vec![0.0, 1.0], vec![1.0, -1.0]).unwrap();
        let short = sample(&[0.5]);
        let f = Predictor::Affine { w: 1.0, b: 0.0 };
        assert!(empirical_shift_check(&f, &train, &short, LossKind::Hinge, 1.0).is_err());
        let target = sample(&[0.5, 0.6]);
        assert!(matches!(
            empirical_shift_check(&f, &train, &target, LossKind::ZeroOne, 1.0),
            Err(Error::NonLipschitzLoss)
        ));
    }

    #[test]
    fn flip_scenario_always_flips_risk_within_the_radius() {
        for rho in [0.01, 0.1, 0.5] {
            let s = shift_flip_construction(rho, 100, 4).unwrap();
            assert_eq!(s.risk_train, 0.0);
            assert_eq!(s.risk_target, 1.0);
            assert!(s.w1 <= rho + 1e-9);
            assert!(!s.covariate_shift_assumed());
            // Any certificate computed from this scenario stays vacuous.
            let cert = shift_certificate(
                s.risk_train,
                s.w1,
                1.0,
                s.predictor.lipschitz_upper(),
                s.covariate_shift_assumed(),
            )
            .unwrap();
            assert!(cert.is_vacuous());
            // And its number is wrong for the target, which is the point:
            // the unstamped bound does not dominate the flipped risk.
            assert!(cert.certified_shift_risk < s.risk_target);
        }
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let labeled = parse_samples("x,y\n0.5,1\n-0.25,-1\n").unwrap();
        assert_eq!(labeled.xs(), &[0.5, -0.25]);
        assert_eq!(labeled.ys().unwrap(), &[1.0, -1.0]);
        let unlabeled = parse_samples("x\n1.0\n2.0\n").unwrap();
        assert!(unlabeled.ys().is_none());
        let back = parse_samples(&format_samples(&labeled)).unwrap();
        assert_eq!(back.xs(), labeled.xs());
        assert!(parse_samples("x,y\n0.5,2\n").is_err(), "labels outside {{-1,+1}}");
        assert!(parse_samples("value\n0.5\n").is_err(), "bad header");
        assert!(parse_samples("x\n").is_err(), "empty sample");
    }
}
