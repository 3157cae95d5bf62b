//! Complete verification by certified branch-and-bound over input-domain
//! splits, plus the constructions that demonstrate where verification gets
//! hard: the sawtooth family whose affine pieces double per layer, and the
//! sampling-attack experiment showing that a failed attack proves nothing.
//!
//! The search keeps a best-first queue of sub-boxes bounded by
//! [`crate::bounds::linear_output_bounds`]-style brackets. A sub-box on
//! which every hidden ReLU is stable is affine, so it is resolved in closed
//! form instead of split further. The bracket `[lower, upper]` on the
//! violation value is sound at every intermediate state: `upper` is the max
//! of certified per-region bounds covering the box, `lower` is the best
//! concretely evaluated point.

use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::bounds::{analyze_region, BoxSet, LinearSpec, RegionAnalysis};
use crate::error::{Error, Result};
use crate::network::{Activation, AffineLayer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BabVerdict {
    Safe,
    Unsafe,
    Budget,
}

impl std::fmt::Display for BabVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BabVerdict::Safe => write!(f, "Safe"),
            BabVerdict::Unsafe => write!(f, "Unsafe"),
            BabVerdict::Budget => write!(f, "Budget"),
        }
    }
}

/// Outcome of a branch-and-bound run. The bracket `[lower, upper]` on the
/// violation value is sound regardless of the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct BabResult {
    pub verdict: BabVerdict,
    pub lower: f64,
    pub upper: f64,
    pub nodes_expanded: u64,
    pub witness: Option<Vec<f64>>,
    pub wall_ops: u64,
}

#[derive(Debug, Clone)]
pub struct BabConfig {
    pub node_budget: u64,
    pub gap_tol: f64,
    /// Nodes popped and bounded per round. With 1 the search is strictly
    /// sequential; larger values expand a batch concurrently and merge in
    /// deterministic order, so results are reproducible for a fixed value.
    pub threads: usize,
}

impl Default for BabConfig {
    fn default() -> Self {
        Self { node_budget: 100_000, gap_tol: 1e-9, threads: 1 }
    }
}

struct Node {
    region: BoxSet,
    upper: f64,
    id: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper && self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Largest certified upper bound first; oldest insertion on ties.
        self.upper.total_cmp(&other.upper).then(other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    net: &'a Network,
    spec: &'a LinearSpec,
    heap: BinaryHeap<Node>,
    next_id: u64,
    nodes_expanded: u64,
    wall_ops: u64,
    /// Best concretely evaluated violation value and its input.
    best_value: f64,
    best_point: Vec<f64>,
    /// Sound upper bound over all regions removed from the frontier.
    resolved_upper: f64,
}

impl Search<'_> {
    fn note_point(&mut self, point: Vec<f64>, value: f64) {
        self.wall_ops += self.net.param_count() as u64;
        if value > self.best_value {
            self.best_value = value;
            self.best_point = point;
        }
    }

    /// Bound a region and either enqueue it or fold it into the resolved
    /// bound. `cap` is the parent's bound; a child never reports a looser
    /// bound than its parent.
    ///
    /// Concrete values enter the search only through resolved regions: on an
    /// all-stable region the restriction is affine, the relaxed argmax
    /// corner is the exact maximizer, and evaluating it yields an attained
    /// value (and the Unsafe witness when positive). A region too small to
    /// split further is resolved the same way; at that scale the certified
    /// bound has converged to the attained value up to rounding. Unstable
    /// splittable regions are never point-sampled: cheap heuristic hits
    /// would mask how much splitting a verdict actually requires.
    fn admit(&mut self, region: BoxSet, analysis: RegionAnalysis, cap: f64) {
        self.nodes_expanded += 1;
        self.wall_ops += analysis.ops;
        let upper = analysis.upper.min(cap);
        if analysis.all_stable || !region.splittable() {
            if let Ok(v) = self.spec.violation(self.net, &analysis.relax_argmax) {
                self.note_point(analysis.relax_argmax, v);
            }
            self.resolved_upper = self.resolved_upper.max(upper);
        } else if upper <= 0.0 || upper <= self.best_value {
            // Cannot raise the global bound; keep its bound, drop the region.
            self.resolved_upper = self.resolved_upper.max(upper);
        } else {
            let id = self.next_id;
            self.next_id += 1;
            self.heap.push(Node { region, upper, id });
        }
    }

    fn global_upper(&self) -> f64 {
        let frontier = self.heap.peek().map_or(f64::NEG_INFINITY, |n| n.upper);
        frontier.max(self.resolved_upper)
    }

    fn finish(&self, verdict: BabVerdict) -> BabResult {
        let lower = self.best_value;
        let upper = self.global_upper().max(lower);
        BabResult {
            verdict,
            lower,
            upper,
            nodes_expanded: self.nodes_expanded,
            witness: if self.best_value > 0.0 { Some(self.best_point.clone()) } else { None },
            wall_ops: self.wall_ops,
        }
    }
}

/// Certified branch-and-bound on `sup a . f(x) - beta` over a box.
///
/// Returns `Safe` when the certified global upper bound drops to 0 or below,
/// `Unsafe` with a witness when a concretely evaluated point violates the
/// spec, and `Budget` with the current sound bracket when the node budget is
/// exhausted or the bracket width falls below `gap_tol` without a verdict.
pub fn verify_complete(
    net: &Network,
    region: &BoxSet,
    spec: &LinearSpec,
    node_budget: u64,
    gap_tol: f64,
) -> Result<BabResult> {
    verify_complete_with(net, region, spec, &BabConfig { node_budget, gap_tol, threads: 1 })
}

pub fn verify_complete_with(
    net: &Network,
    region: &BoxSet,
    spec: &LinearSpec,
    cfg: &BabConfig,
) -> Result<BabResult> {
    if cfg.node_budget == 0 {
        return Err(Error::InvalidParameter("node budget must be at least 1".into()));
    }
    if !(cfg.gap_tol > 0.0) || !cfg.gap_tol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gap tolerance {} must be positive",
            cfg.gap_tol
        )));
    }
    let threads = cfg.threads.max(1);

    let mut search = Search {
        net,
        spec,
        heap: BinaryHeap::new(),
        next_id: 0,
        nodes_expanded: 0,
        wall_ops: 0,
        best_value: f64::NEG_INFINITY,
        best_point: region.center(),
        resolved_upper: f64::NEG_INFINITY,
    };

    // One concrete anchor so the bracket's lower end is finite even under
    // a budget of one.
    let center = region.center();
    let center_value = spec.violation(net, &center)?;
    search.note_point(center, center_value);

    let root = analyze_region(net, region, spec)?;
    search.admit(region.clone(), root, f64::INFINITY);

    loop {
        if search.best_value > 0.0 {
            return Ok(search.finish(BabVerdict::Unsafe));
        }
        if search.global_upper() <= 0.0 {
            return Ok(search.finish(BabVerdict::Safe));
        }
        if search.heap.is_empty()
            || search.global_upper() - search.best_value <= cfg.gap_tol
            || search.nodes_expanded >= cfg.node_budget
        {
            return Ok(search.finish(BabVerdict::Budget));
        }

        let batch: Vec<Node> = (0..threads).filter_map(|_| search.heap.pop()).collect();
        let mut halves: Vec<(BoxSet, f64)> = Vec::with_capacity(2 * batch.len());
        for node in &batch {
            let (left, right) = node.region.split(node.region.widest_coord());
            halves.push((left, node.upper));
            halves.push((right, node.upper));
        }

        if threads == 1 {
            for (half, cap) in halves {
                let analysis = analyze_region(net, &half, spec)?;
                search.admit(half, analysis, cap);
            }
        } else {
            // Bound the batch concurrently; merge in batch order so the
            // outcome is identical for a fixed thread count.
            let mut results: Vec<Option<Result<RegionAnalysis>>> =
                (0..halves.len()).map(|_| None).collect();
            std::thread::scope(|scope| {
                for (slot, (half, _)) in results.iter_mut().zip(&halves) {
                    scope.spawn(move || {
                        *slot = Some(analyze_region(net, half, spec));
                    });
                }
            });
            for (result, (half, cap)) in results.into_iter().zip(halves) {
                let analysis = result.expect("worker filled its slot")?;
                search.admit(half, analysis, cap);
            }
        }
    }
}

/// Tent map composed `k` times, realized as a ReLU network with `2k` hidden
/// units: `T(x) = 2 relu(x) - 4 relu(x - 1/2)` maps `[0, 1]` onto itself
/// with one interior kink, and each composition doubles the number of
/// affine pieces, giving `2^k` pieces on `[0, 1]`.
pub fn sawtooth_network(k: u32) -> Result<Network> {
    if k == 0 || k > 20 {
        return Err(Error::InvalidParameter(format!("sawtooth level {k} out of range 1..=20")));
    }
    let mut layers = Vec::with_capacity(k as usize + 1);
    layers.push(AffineLayer::new(
        vec![vec![1.0], vec![1.0]],
        vec![0.0, -0.5],
        Activation::Relu,
    )?);
    for _ in 1..k {
        layers.push(AffineLayer::new(
            vec![vec![2.0, -4.0], vec![2.0, -4.0]],
            vec![0.0, -0.5],
            Activation::Relu,
        )?);
    }
    layers.push(AffineLayer::new(vec![vec![2.0, -4.0]], vec![0.0], Activation::Identity)?);
    Network::new(layers)
}

/// A continuous piecewise-linear scalar function stored as breakpoints and
/// values. Produced by [`enumerate_pieces`].
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

/// One maximal affine piece of a [`PiecewiseLinear`] function.
#[derive(Debug, Clone, Copy)]
pub struct Piece {
    pub x0: f64,
    pub x1: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl PiecewiseLinear {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.breakpoints.len();
        if t <= self.breakpoints[0] {
            return self.values[0];
        }
        if t >= self.breakpoints[n - 1] {
            return self.values[n - 1];
        }
        let idx = match self.breakpoints.binary_search_by(|b| b.total_cmp(&t)) {
            Ok(i) => return self.values[i],
            Err(i) => i,
        };
        let (t0, t1) = (self.breakpoints[idx - 1], self.breakpoints[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Maximal affine pieces: raw segments merged where the slope does not
    /// change (relative tolerance 1e-9).
    pub fn pieces(&self) -> Vec<Piece> {
        let mut pieces: Vec<Piece> = Vec::new();
        for i in 1..self.breakpoints.len() {
            let (t0, t1) = (self.breakpoints[i - 1], self.breakpoints[i]);
            let (v0, v1) = (self.values[i - 1], self.values[i]);
            let slope = (v1 - v0) / (t1 - t0);
            let intercept = v0 - slope * t0;
            match pieces.last_mut() {
                Some(last) if (last.slope - slope).abs() <= 1e-9 * (1.0 + slope.abs()) => {
                    last.x1 = t1;
                }
                _ => pieces.push(Piece { x0: t0, x1: t1, slope, intercept }),
            }
        }
        pieces
    }

    /// Interior kinks: the piece boundaries strictly inside the domain.
    pub fn kinks(&self) -> Vec<f64> {
        let pieces = self.pieces();
        pieces.iter().skip(1).map(|p| p.x0).collect()
    }

    /// Exact maximum `(argmax, value)`; a piecewise-linear function attains
    /// it at a breakpoint. Ties resolve to the smallest argument.
    pub fn max(&self) -> (f64, f64) {
        let mut best = (self.breakpoints[0], self.values[0]);
        for (t, v) in self.breakpoints.iter().zip(&self.values) {
            if *v > best.1 {
                best = (*t, *v);
            }
        }
        best
    }

    pub fn min(&self) -> (f64, f64) {
        let mut best = (self.breakpoints[0], self.values[0]);
        for (t, v) in self.breakpoints.iter().zip(&self.values) {
            if *v < best.1 {
                best = (*t, *v);
            }
        }
        best
    }
}

/// Exact affine decomposition of a scalar 1-input network on an interval,
/// computed by pushing breakpoints through the layers: every ReLU zero
/// crossing inside a segment becomes a new breakpoint, after which clamping
/// is exact on each segment.
pub fn enumerate_pieces(net: &Network, interval: &BoxSet) -> Result<PiecewiseLinear> {
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "piece enumeration needs a 1-input, 1-output network, got {} -> {}",
            net.input_dim(),
            net.output_dim()
        )));
    }
    if interval.dim() != 1 {
        return Err(Error::DimensionMismatch("interval must be one-dimensional".into()));
    }
    let (lo, hi) = (interval.lo()[0], interval.hi()[0]);
    let span = (hi - lo).max(f64::MIN_POSITIVE);

    let mut ts = vec![lo, hi];
    let mut vals: Vec<Vec<f64>> = vec![vec![lo], vec![hi]];

    for layer in net.layers() {
        // Affine map at each breakpoint.
        for v in &mut vals {
            let mut next = layer.bias.clone();
            for (out, row) in next.iter_mut().zip(&layer.weight) {
                for (w, vi) in row.iter().zip(v.iter()) {
                    *out += w * vi;
                }
            }
            *v = next;
        }
        if layer.activation != Activation::Relu {
            continue;
        }
        // Insert a breakpoint at every interior zero crossing.
        let mut crossings = Vec::new();
        for seg in 0..ts.len() - 1 {
            for j in 0..layer.out_dim() {
                let (v0, v1) = (vals[seg][j], vals[seg + 1][j]);
                if (v0 < 0.0 && v1 > 0.0) || (v0 > 0.0 && v1 < 0.0) {
                    let t = ts[seg] + (ts[seg + 1] - ts[seg]) * (-v0) / (v1 - v0);
                    crossings.push(t);
                }
            }
        }
        crossings.sort_by(f64::total_cmp);
        let mut merged_ts = Vec::with_capacity(ts.len() + crossings.len());
        let mut merged_vals = Vec::with_capacity(ts.len() + crossings.len());
        let mut ci = 0;
        for seg in 0..ts.len() {
            merged_ts.push(ts[seg]);
            merged_vals.push(vals[seg].clone());
            if seg + 1 == ts.len() {
                break;
            }
            while ci < crossings.len() && crossings[ci] < ts[seg + 1] {
                let t = crossings[ci];
                ci += 1;
                let prev = *merged_ts.last().unwrap();
                if t - prev <= 1e-12 * span || ts[seg + 1] - t <= 1e-12 * span {
                    continue;
                }
                let frac = (t - ts[seg]) / (ts[seg + 1] - ts[seg]);
                let interp: Vec<f64> = vals[seg]
                    .iter()
                    .zip(&vals[seg + 1])
                    .map(|(a, b)| a + (b - a) * frac)
                    .collect();
                merged_ts.push(t);
                merged_vals.push(interp);
            }
        }
        for v in &mut merged_vals {
            for x in v.iter_mut() {
                *x = x.max(0.0);
            }
        }
        ts = merged_ts;
        vals = merged_vals;
    }

    Ok(PiecewiseLinear { breakpoints: ts, values: vals.into_iter().map(|v| v[0]).collect() })
}

/// Draw `n_samples` uniform points from the box (deterministically from the
/// seed) and return the first spec-violating point, if any. A `None` result
/// proves nothing; that is the point of [`attack_gap_experiment`].
pub fn sampling_attack(
    net: &Network,
    region: &BoxSet,
    spec: &LinearSpec,
    n_samples: u64,
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if region.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "box has dimension {}, network expects {}",
            region.dim(),
            net.input_dim()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let x: Vec<f64> = region
            .lo()
            .iter()
            .zip(region.hi())
            .map(|(l, h)| if l == h { *l } else { rng.random_range(*l..*h) })
            .collect();
        if spec.violation(net, &x)? > 0.0 {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

/// Continuous stand-in for the indicator of `[0, epsilon]`: a piecewise
/// linear bump that is 1 on `[delta, epsilon - delta]` with `delta =
/// epsilon / 100`, 0 outside `[0, epsilon]`, and strictly positive on the
/// open interval `(0, epsilon)`.
///
/// Built from decreasing ramps `relu(t - x)` so that every unit is exactly
/// inactive for `x >= epsilon`: the region right of the bump evaluates to
/// an exact floating-point zero rather than a cancellation residue, and the
/// strict-violation set `{f > 0}` keeps measure `epsilon` under sampling
/// from `[0, 1]`.
pub fn bump_network(epsilon: f64) -> Result<Network> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must lie in (0, 1)")));
    }
    let delta = epsilon / 100.0;
    let layer1 = AffineLayer::new(
        vec![vec![-1.0]; 4],
        vec![epsilon, epsilon - delta, delta, 0.0],
        Activation::Relu,
    )?;
    let inv = 1.0 / delta;
    let layer2 = AffineLayer::new(
        vec![vec![inv, -inv, -inv, inv]],
        vec![0.0],
        Activation::Identity,
    )?;
    Network::new(vec![layer1, layer2])
}

/// Outcome of repeated sampling attacks against a known-violating model.
/// `predicted_miss_prob` is the closed form `(1 - epsilon)^N`.
#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub n_trials: u64,
    pub n_missed: u64,
    pub epsilon: f64,
    pub n_samples_per_trial: u64,
    pub predicted_miss_prob: f64,
}

impl AttackReport {
    pub fn empirical_miss_rate(&self) -> f64 {
        self.n_missed as f64 / self.n_trials as f64
    }
}

/// Build a model violating `f(x) <= 0` exactly on a set of measure
/// `epsilon`, run a fresh sampling attack per trial, and compare the
/// empirical miss rate with `(1 - epsilon)^N`.
pub fn attack_gap_experiment(
    epsilon: f64,
    n_samples: u64,
    n_trials: u64,
    seed: u64,
) -> Result<AttackReport> {
    if n_samples == 0 || n_trials == 0 {
        return Err(Error::InvalidParameter("need at least one sample and one trial".into()));
    }
    let net = bump_network(epsilon)?;
    let region = BoxSet::new(vec![0.0], vec![1.0])?;
    let spec = LinearSpec::new(vec![1.0], 0.0)?;
    let mut master = ChaCha12Rng::seed_from_u64(seed);
    let mut n_missed = 0;
    for _ in 0..n_trials {
        let trial_seed: u64 = master.random();
        if sampling_attack(&net, &region, &spec, n_samples, trial_seed)?.is_none() {
            n_missed += 1;
        }
    }
    Ok(AttackReport {
        n_trials,
        n_missed,
        epsilon,
        n_samples_per_trial: n_samples,
        predicted_miss_prob: (1.0 - epsilon).powi(n_samples as i32),
    })
}
