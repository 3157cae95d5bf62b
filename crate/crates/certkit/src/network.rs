//! Feedforward affine+ReLU networks.
//!
//! A [`Network`] is an ordered stack of [`AffineLayer`]s. Hidden layers apply
//! ReLU coordinatewise; the final layer is always affine (no activation).
//! This module supplies exact evaluation, activation patterns, the affine
//! parameter count, and a sound global Lipschitz upper bound built from
//! per-layer operator-norm bounds. Everything here is pure and immutable,
//! so values can be shared freely across threads.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Activation {
    Relu,
    Identity,
}

/// Input-space norm for Lipschitz statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormKind {
    L1,
    L2,
    LInf,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" => Ok(NormKind::LInf),
            other => Err(Error::InvalidParameter(format!(
                "unknown norm `{other}` (expected l1, l2, or linf)"
            ))),
        }
    }
}

/// One affine map plus its activation. `weight` is row-major:
/// rows = output width, cols = input width.
#[derive(Debug, Clone, Serialize)]
pub struct AffineLayer {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl AffineLayer {
    pub fn new(weight: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.is_empty() {
            return Err(Error::DimensionMismatch("layer has no rows".into()));
        }
        let in_dim = weight[0].len();
        if in_dim == 0 {
            return Err(Error::DimensionMismatch("layer has zero input width".into()));
        }
        for (i, row) in weight.iter().enumerate() {
            if row.len() != in_dim {
                return Err(Error::DimensionMismatch(format!(
                    "weight row {i} has {} entries, expected {in_dim}",
                    row.len()
                )));
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite(format!("weight row {i}")));
            }
        }
        if bias.len() != weight.len() {
            return Err(Error::DimensionMismatch(format!(
                "bias length {} does not match {} rows",
                bias.len(),
                weight.len()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("bias".into()));
        }
        Ok(Self { weight, bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weight[0].len()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.len()
    }
}

/// A layered affine+ReLU model. Invariants (enforced at construction):
/// consecutive layer widths chain, all parameters are finite, and the final
/// layer applies no ReLU.
#[derive(Debug, Clone, Serialize)]
pub struct Network {
    layers: Vec<AffineLayer>,
    input_dim: usize,
    output_dim: usize,
}

impl Network {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::DimensionMismatch("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} expects input width {}, but layer {} outputs {}",
                    i + 2,
                    pair[1].in_dim(),
                    i + 1,
                    pair[0].out_dim()
                )));
            }
        }
        if layers.last().unwrap().activation != Activation::Identity {
            return Err(Error::InvalidParameter(
                "final layer must not apply an activation".into(),
            ));
        }
        let input_dim = layers[0].in_dim();
        let output_dim = layers.last().unwrap().out_dim();
        Ok(Self { layers, input_dim, output_dim })
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Total number of hidden ReLU units.
    pub fn hidden_relu_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.activation == Activation::Relu)
            .map(AffineLayer::out_dim)
            .sum()
    }

    /// Number of affine weights, excluding biases.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.in_dim() * l.out_dim()).sum()
    }

    /// Exact forward pass.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut z = x.to_vec();
        for layer in &self.layers {
            let mut next = layer.bias.clone();
            for (out, row) in next.iter_mut().zip(&layer.weight) {
                for (w, zi) in row.iter().zip(&z) {
                    *out += w * zi;
                }
            }
            if layer.activation == Activation::Relu {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            z = next;
        }
        Ok(z)
    }

    /// On/off state of every hidden ReLU unit at `x`, in layer order.
    /// An entry is `true` iff the preactivation is strictly positive.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<bool>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut pattern = Vec::with_capacity(self.hidden_relu_count());
        let mut z = x.to_vec();
        for layer in &self.layers {
            let mut next = layer.bias.clone();
            for (out, row) in next.iter_mut().zip(&layer.weight) {
                for (w, zi) in row.iter().zip(&z) {
                    *out += w * zi;
                }
            }
            if layer.activation == Activation::Relu {
                for v in &mut next {
                    pattern.push(*v > 0.0);
                    *v = v.max(0.0);
                }
            }
            z = next;
        }
        Ok(pattern)
    }

    /// Sound global Lipschitz upper bound with respect to `norm` on inputs
    /// and the Euclidean norm on outputs.
    ///
    /// The bound is the product of per-layer operator-norm upper bounds:
    /// the first factor is the induced `norm`-to-Euclidean norm of the first
    /// weight matrix (exact for L1, Frobenius for L2, row-sum based for
    /// LInf), and every later factor is the Frobenius norm, which dominates
    /// the spectral norm. ReLU is 1-Lipschitz, so the product is sound. No
    /// tightness is claimed.
    pub fn lipschitz_upper(&self, norm: NormKind) -> f64 {
        let mut bound = induced_to_l2_upper(&self.layers[0].weight, norm);
        for layer in &self.layers[1..] {
            bound *= frobenius(&layer.weight);
        }
        bound
    }

    /// Network computing the scalar `a . f(x) - beta`, built by appending an
    /// affine output layer. Used to reduce functional specs to scalar nets.
    pub fn compose_output(&self, a: &[f64], beta: f64) -> Result<Network> {
        if a.len() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "functional has length {}, network outputs {}",
                a.len(),
                self.output_dim
            )));
        }
        let mut layers = self.layers.clone();
        layers.push(AffineLayer::new(vec![a.to_vec()], vec![-beta], Activation::Identity)?);
        Network::new(layers)
    }
}

fn frobenius(weight: &[Vec<f64>]) -> f64 {
    weight
        .iter()
        .flat_map(|row| row.iter())
        .map(|w| w * w)
        .sum::<f64>()
        .sqrt()
}

/// Upper bound on max_{||x||_norm <= 1} ||Wx||_2.
fn induced_to_l2_upper(weight: &[Vec<f64>], norm: NormKind) -> f64 {
    match norm {
        // Exact: the maximum over the l1 ball is attained at +-e_j.
        NormKind::L1 => {
            let cols = weight[0].len();
            (0..cols)
                .map(|j| weight.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        }
        NormKind::L2 => frobenius(weight),
        // ||Wx||_2^2 <= sum_i (sum_j |W_ij|)^2 for ||x||_inf <= 1.
        NormKind::LInf => weight
            .iter()
            .map(|row| {
                let r: f64 = row.iter().map(|w| w.abs()).sum();
                r * r
            })
            .sum::<f64>()
            .sqrt(),
    }
}

/// Parse the line-oriented network format:
///
/// ```text
/// relu-net v1
/// dims d0 d1 ... dL
/// layer 1 relu|identity
/// <d1 rows of d0 weights>
/// <one line of d1 bias values>
/// ...
/// ```
pub fn parse_network(text: &str) -> Result<Network> {
    let mut lines = text.lines().enumerate();

    let mut next_content = |expect: &str| -> Result<(usize, &str)> {
        for (idx, raw) in lines.by_ref() {
            let trimmed = raw.trim();
            if !trimmed.is_empty() {
                return Ok((idx + 1, trimmed));
            }
        }
        Err(Error::Parse { line: 0, msg: format!("unexpected end of file, expected {expect}") })
    };

    let (line_no, header) = next_content("header")?;
    if header != "relu-net v1" {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected `relu-net v1`, found `{header}`"),
        });
    }

    let (line_no, dims_line) = next_content("dims line")?;
    let mut parts = dims_line.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(Error::Parse { line: line_no, msg: "expected `dims d0 d1 ...`".into() });
    }
    let dims: Vec<usize> = parts
        .map(|t| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad dimension `{t}`"),
            })
        })
        .collect::<Result<_>>()?;
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(Error::Parse {
            line: line_no,
            msg: "dims must list at least two positive widths".into(),
        });
    }

    let parse_row = |line_no: usize, s: &str, want: usize| -> Result<Vec<f64>> {
        let row: Vec<f64> = s
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad decimal `{t}`"),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != want {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {want} values, found {}", row.len()),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("line {line_no}")));
        }
        Ok(row)
    };

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for ell in 1..dims.len() {
        let (line_no, layer_line) = next_content("layer line")?;
        let mut parts = layer_line.split_whitespace();
        if parts.next() != Some("layer") {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `layer {ell} relu|identity`, found `{layer_line}`"),
            });
        }
        let idx: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse { line: line_no, msg: "missing layer index".into() })?;
        if idx != ell {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected layer {ell}, found layer {idx}"),
            });
        }
        let activation = match parts.next() {
            Some("relu") => Activation::Relu,
            Some("identity") => Activation::Identity,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("bad activation `{}`", other.unwrap_or("")),
                })
            }
        };

        let mut weight = Vec::with_capacity(dims[ell]);
        for _ in 0..dims[ell] {
            let (line_no, row_line) = next_content("weight row")?;
            weight.push(parse_row(line_no, row_line, dims[ell - 1])?);
        }
        let (line_no, bias_line) = next_content("bias line")?;
        let bias = parse_row(line_no, bias_line, dims[ell])?;
        layers.push(AffineLayer::new(weight, bias, activation)?);
    }

    Network::new(layers)
}

pub fn load_network(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    parse_network(&text)
}

/// Render a network in the same format `parse_network` reads.
pub fn format_network(net: &Network) -> String {
    let mut out = String::from("relu-net v1\ndims");
    write!(out, " {}", net.input_dim()).unwrap();
    for layer in net.layers() {
        write!(out, " {}", layer.out_dim()).unwrap();
    }
    out.push('\n');
    for (ell, layer) in net.layers().iter().enumerate() {
        let act = match layer.activation {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        };
        writeln!(out, "layer {} {}", ell + 1, act).unwrap();
        for row in &layer.weight {
            let mut first = true;
            for w in row {
                if !first {
                    out.push(' ');
                }
                write!(out, "{w}").unwrap();
                first = false;
            }
            out.push('\n');
        }
        let mut first = true;
        for b in &layer.bias {
            if !first {
                out.push(' ');
            }
            write!(out, "{b}").unwrap();
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn write_network(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, format_network(net))?;
    Ok(())
}

/// Deterministic random network for demos and experiments. Weights are
/// uniform in [-1, 1] scaled by 1/sqrt(fan-in); hidden layers use ReLU.
pub fn random_network(dims: &[usize], seed: u64) -> Network {
    assert!(dims.len() >= 2, "need at least input and output widths");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for ell in 1..dims.len() {
        let scale = 1.0 / (dims[ell - 1] as f64).sqrt();
        let weight: Vec<Vec<f64>> = (0..dims[ell])
            .map(|_| (0..dims[ell - 1]).map(|_| rng.random_range(-1.0..1.0) * scale).collect())
            .collect();
        let bias: Vec<f64> = (0..dims[ell]).map(|_| rng.random_range(-0.5..0.5)).collect();
        let activation =
            if ell + 1 == dims.len() { Activation::Identity } else { Activation::Relu };
        layers.push(AffineLayer::new(weight, bias, activation).unwrap());
    }
    Network::new(layers).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(w: f64, b: f64) -> Network {
        Network::new(vec![
            AffineLayer::new(vec![vec![w]], vec![b], Activation::Identity).unwrap()
        ])
        .unwrap()
    }

    fn relu_scalar() -> Network {
        // f(x) = relu(x)
        Network::new(vec![
            AffineLayer::new(vec![vec![1.0]], vec![0.0], Activation::Relu).unwrap(),
            AffineLayer::new(vec![vec![1.0]], vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn single_identity_layer_doubles() {
        let text = "relu-net v1\ndims 1 1\nlayer 1 identity\n2.0\n0.0\n";
        let net = parse_network(text).unwrap();
        assert_eq!(net.evaluate(&[3.0]).unwrap(), vec![6.0]);
        assert_eq!(net.evaluate(&[-1.5]).unwrap(), vec![-3.0]);
    }

    #[test]
    fn parses_wide_classifier_shape() {
        let net = random_network(&[50, 200, 10], 7);
        let text = format_network(&net);
        let parsed = parse_network(&text).unwrap();
        assert_eq!(parsed.input_dim(), 50);
        assert_eq!(parsed.output_dim(), 10);
        assert_eq!(parsed.param_count(), 12_000);
    }

    #[test]
    fn broken_width_chain_is_rejected() {
        // Second layer expects width 3 after a width-2 layer.
        let text = "relu-net v1\ndims 1 2 1\nlayer 1 relu\n1.0\n-1.0\n0.0 0.0\nlayer 2 identity\n1.0 1.0 1.0\n0.0\n";
        match parse_network(text) {
            Err(Error::Parse { .. }) | Err(Error::DimensionMismatch(_)) => {}
            other => panic!("expected parse/dimension error, got {other:?}"),
        }
        let l1 = AffineLayer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0], Activation::Relu)
            .unwrap();
        let l2 = AffineLayer::new(vec![vec![1.0, 1.0, 1.0]], vec![0.0], Activation::Identity)
            .unwrap();
        assert!(matches!(Network::new(vec![l1, l2]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn non_finite_weight_is_rejected() {
        let text = "relu-net v1\ndims 1 1\nlayer 1 identity\ninf\n0.0\n";
        assert!(matches!(parse_network(text), Err(Error::NonFinite(_))));
    }

    #[test]
    fn relu_evaluation_matches_definition() {
        let net = relu_scalar();
        assert_eq!(net.evaluate(&[-1.0]).unwrap(), vec![0.0]);
        assert_eq!(net.evaluate(&[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn evaluate_rejects_wrong_input_length() {
        let net = relu_scalar();
        assert!(matches!(net.evaluate(&[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn activation_pattern_tracks_sign() {
        let net = relu_scalar();
        assert_eq!(net.activation_pattern(&[1.0]).unwrap(), vec![true]);
        assert_eq!(net.activation_pattern(&[-1.0]).unwrap(), vec![false]);
        // Zero preactivation counts as off.
        assert_eq!(net.activation_pattern(&[0.0]).unwrap(), vec![false]);
    }

    #[test]
    fn param_count_is_sum_of_weight_shapes() {
        assert_eq!(scalar_net(1.0, 0.0).param_count(), 1);
        // 4 -> 8 -> 8 -> 2: 32 + 64 + 16, by direct summation over the
        // declared shapes.
        let net = random_network(&[4, 8, 8, 2], 0);
        let by_shapes: usize =
            net.layers().iter().map(|l| l.in_dim() * l.out_dim()).sum();
        assert_eq!(by_shapes, 32 + 64 + 16);
        assert_eq!(net.param_count(), 112);
    }

    #[test]
    fn lipschitz_upper_for_scalar_affine_is_weight_magnitude() {
        for norm in [NormKind::L1, NormKind::L2, NormKind::LInf] {
            assert_eq!(scalar_net(3.0, 1.0).lipschitz_upper(norm), 3.0);
            assert_eq!(scalar_net(1.0, 0.0).lipschitz_upper(norm), 1.0);
        }
    }

    #[test]
    fn lipschitz_upper_dominates_sampled_slopes() {
        use rand::Rng;
        use rand::SeedableRng;
        let net = random_network(&[3, 16, 2], 42);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        for norm in [NormKind::L1, NormKind::L2, NormKind::LInf] {
            let bound = net.lipschitz_upper(norm);
            for _ in 0..100_000 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let fx = net.evaluate(&x).unwrap();
                let fy = net.evaluate(&y).unwrap();
                let df = fx
                    .iter()
                    .zip(&fy)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let dx = match norm {
                    NormKind::L1 => x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>(),
                    NormKind::L2 => x
                        .iter()
                        .zip(&y)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt(),
                    NormKind::LInf => x
                        .iter()
                        .zip(&y)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max),
                };
                assert!(df <= bound * dx + 1e-9, "slope {} exceeds bound {}", df / dx, bound);
            }
        }
    }

    #[test]
    fn same_pattern_implies_affine_on_segment() {
        use rand::Rng;
        use rand::SeedableRng;
        let net = random_network(&[2, 8, 8, 1], 3);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 200 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            if net.activation_pattern(&x).unwrap() != net.activation_pattern(&y).unwrap() {
                continue;
            }
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let fx = net.evaluate(&x).unwrap()[0];
            let fy = net.evaluate(&y).unwrap()[0];
            let fm = net.evaluate(&mid).unwrap()[0];
            assert!((fm - 0.5 * (fx + fy)).abs() <= 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn compose_output_folds_functional() {
        let net = random_network(&[2, 4, 3], 5);
        let a = vec![0.5, -1.0, 2.0];
        let beta = 0.25;
        let scalar = net.compose_output(&a, beta).unwrap();
        let x = [0.3, -0.7];
        let f = net.evaluate(&x).unwrap();
        let want: f64 = a.iter().zip(&f).map(|(ai, fi)| ai * fi).sum::<f64>() - beta;
        let got = scalar.evaluate(&x).unwrap()[0];
        assert!((want - got).abs() <= 1e-12);
    }
}
