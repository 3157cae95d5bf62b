//! Runtime-selectable verification strategies.
//!
//! Each bounding method lives behind the [`Verifier`] trait and is looked up
//! by name with [`make`], so callers (the CLI in particular) pick a method
//! from configuration without caring which algorithm runs underneath. All
//! strategies produce the same [`Certificate`] shape and are sound; they
//! differ in tightness and cost.

use crate::bab::{verify_complete_with, BabConfig, BabVerdict};
use crate::bounds::{
    interval_output_bounds, linear_output_bounds, BoxSet, Certificate, LinearSpec, Method,
    Verdict,
};
use crate::error::{Error, Result};
use crate::network::Network;

/// Tuning knobs consumed by strategies that need them; the rest ignore them.
#[derive(Debug, Clone)]
pub struct VerifierOptions {
    pub node_budget: u64,
    pub gap_tol: f64,
    pub threads: usize,
}

impl Default for VerifierOptions {
    fn default() -> Self {
        Self { node_budget: 100_000, gap_tol: 1e-9, threads: 1 }
    }
}

/// A sound certificate producer for linear specs over box input sets.
pub trait Verifier: Send + Sync {
    /// Registry name, as accepted by [`make`].
    fn name(&self) -> &'static str;

    fn certify(&self, net: &Network, region: &BoxSet, spec: &LinearSpec)
        -> Result<Certificate>;
}

/// Names accepted by [`make`], in increasing tightness/cost order.
pub const METHOD_NAMES: &[&str] = &["interval", "backward-linear", "complete-bab"];

/// Look up a verification strategy by name.
pub fn make(name: &str, opts: &VerifierOptions) -> Result<Box<dyn Verifier>> {
    match name {
        "interval" => Ok(Box::new(IntervalVerifier)),
        "backward-linear" => Ok(Box::new(BackwardLinearVerifier)),
        "complete-bab" => Ok(Box::new(CompleteBabVerifier {
            cfg: BabConfig {
                node_budget: opts.node_budget,
                gap_tol: opts.gap_tol,
                threads: opts.threads,
            },
        })),
        other => Err(Error::UnknownMethod(other.to_string())),
    }
}

struct IntervalVerifier;

impl Verifier for IntervalVerifier {
    fn name(&self) -> &'static str {
        "interval"
    }

    fn certify(
        &self,
        net: &Network,
        region: &BoxSet,
        spec: &LinearSpec,
    ) -> Result<Certificate> {
        interval_output_bounds(net, region, spec)
    }
}

struct BackwardLinearVerifier;

impl Verifier for BackwardLinearVerifier {
    fn name(&self) -> &'static str {
        "backward-linear"
    }

    fn certify(
        &self,
        net: &Network,
        region: &BoxSet,
        spec: &LinearSpec,
    ) -> Result<Certificate> {
        linear_output_bounds(net, region, spec)
    }
}

struct CompleteBabVerifier {
    cfg: BabConfig,
}

impl Verifier for CompleteBabVerifier {
    fn name(&self) -> &'static str {
        "complete-bab"
    }

    fn certify(
        &self,
        net: &Network,
        region: &BoxSet,
        spec: &LinearSpec,
    ) -> Result<Certificate> {
        let result = verify_complete_with(net, region, spec, &self.cfg)?;
        let verdict = match result.verdict {
            BabVerdict::Safe => Verdict::Safe,
            BabVerdict::Unsafe => Verdict::Unsafe,
            BabVerdict::Budget => Verdict::Unknown,
        };
        Ok(Certificate {
            method: Method::CompleteBab,
            passes: net.layers().len() as u32,
            upper: result.upper,
            lower: result.lower,
            verdict,
            witness: result.witness,
            wall_ops: result.wall_ops,
        })
    }
}

/// Certify several specs against one shared network. With `threads > 1` the
/// specs run concurrently; results are positionally identical to the
/// sequential run because each certification is a pure function of its
/// inputs.
pub fn certify_all(
    verifier: &dyn Verifier,
    net: &Network,
    region: &BoxSet,
    specs: &[LinearSpec],
    threads: usize,
) -> Result<Vec<Certificate>> {
    if threads <= 1 || specs.len() <= 1 {
        return specs.iter().map(|s| verifier.certify(net, region, s)).collect();
    }
    let mut slots: Vec<Option<Result<Certificate>>> = (0..specs.len()).map(|_| None).collect();
    let mut pairs: Vec<(&mut Option<Result<Certificate>>, &LinearSpec)> =
        slots.iter_mut().zip(specs).collect();
    let chunk_size = specs.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for chunk in pairs.chunks_mut(chunk_size) {
            scope.spawn(move || {
                for (slot, spec) in chunk.iter_mut() {
                    **slot = Some(verifier.certify(net, region, spec));
                }
            });
        }
    });
    drop(pairs);
    slots.into_iter().map(|s| s.expect("worker filled its slot")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::random_network;

    #[test]
    fn registry_knows_every_listed_method() {
        let opts = VerifierOptions::default();
        for name in METHOD_NAMES {
            let v = make(name, &opts).unwrap();
            assert_eq!(v.name(), *name);
        }
        assert!(matches!(make("simplex", &opts), Err(Error::UnknownMethod(_))));
    }

    #[test]
    fn strategies_agree_on_soundness_and_tighten_in_order() {
        let net = random_network(&[2, 10, 3], 44);
        let region = BoxSet::around(&[0.1, -0.2], 0.4).unwrap();
        let spec = LinearSpec::new(vec![1.0, -0.5, 0.25], 0.1).unwrap();
        let opts = VerifierOptions::default();
        let certs: Vec<Certificate> = METHOD_NAMES
            .iter()
            .map(|n| make(n, &opts).unwrap().certify(&net, &region, &spec).unwrap())
            .collect();
        for pair in certs.windows(2) {
            assert!(pair[1].upper <= pair[0].upper + 1e-12);
            assert!(pair[1].lower >= pair[0].lower - 1e-12);
        }
    }

    #[test]
    fn concurrent_certification_is_bitwise_identical() {
        let net = random_network(&[6, 24, 8], 13);
        let region = BoxSet::around(&[0.0; 6], 0.1).unwrap();
        let specs: Vec<LinearSpec> =
            (0..8).filter(|k| *k != 2).map(|k| LinearSpec::margin(8, k, 2).unwrap()).collect();
        let opts = VerifierOptions::default();
        let verifier = make("backward-linear", &opts).unwrap();
        let seq = certify_all(verifier.as_ref(), &net, &region, &specs, 1).unwrap();
        let par = certify_all(verifier.as_ref(), &net, &region, &specs, 4).unwrap();
        assert_eq!(seq.len(), par.len());
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.upper.to_bits(), b.upper.to_bits());
            assert_eq!(a.lower.to_bits(), b.lower.to_bits());
            assert_eq!(a.verdict, b.verdict);
        }
    }
}
