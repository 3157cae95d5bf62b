//! Command-line jobs: parse flags, dispatch to the owning module, emit the
//! machine-readable report, and map the result onto the exit-code contract
//! (0 safe/success, 1 unsafe/violation found, 2 unknown/budget/vacuous,
//! 3 and above for errors).

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::additive::{
    additive_shift_certificate, center_model, component_lipschitz_profile,
    identifiability_residual, load_additive, monotone_endpoint_certificate, product_sup_inf,
    AdditiveModel, UnivariateComponent,
};
use crate::bab::{
    attack_gap_experiment, enumerate_pieces, sawtooth_network, verify_complete_with, BabConfig,
    BabVerdict,
};
use crate::bounds::{linear_output_bounds, BoxSet, LinearSpec, Verdict};
use crate::error::{Error, Result};
use crate::network::{load_network, random_network, Network};
use crate::report::{AdditiveSummary, FlipSummary, Payload, Report};
use crate::transport::{
    empirical_risk, empirical_shift_check, load_samples, shift_certificate,
    shift_flip_construction, w1_empirical_1d, w1_lp_oracle, EmpiricalSample, LossKind, Predictor,
};
use crate::verifier::{certify_all, make as make_verifier, VerifierOptions};

#[derive(Debug, Parser)]
#[command(
    name = "certkit",
    version,
    about = "Sound certificates for network safety, shift risk, and additive models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Also write the flat report to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Write a JSON mirror of the report to this file.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,

    /// Worker threads for concurrent certification and node expansion.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// RNG seed. The CERTKIT_SEED environment variable overrides it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Hinge,
    ZeroOne,
}

impl From<LossArg> for LossKind {
    fn from(value: LossArg) -> Self {
        match value {
            LossArg::Hinge => LossKind::Hinge,
            LossArg::ZeroOne => LossKind::ZeroOne,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sound incomplete verification of a network spec over a box.
    Verify {
        #[arg(long)]
        net: PathBuf,
        /// CSV (header `x`) with one coordinate per row: the box center.
        #[arg(long)]
        center: PathBuf,
        #[arg(long)]
        radius: f64,
        /// Certify all logit margins against this class.
        #[arg(long)]
        target_class: Option<usize>,
        /// Explicit output functional, comma-separated (alternative to
        /// --target-class).
        #[arg(long)]
        spec_a: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Verification strategy: interval, backward-linear, or complete-bab.
        #[arg(long, default_value = "backward-linear")]
        method: String,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value_t = 1e-9)]
        gap_tol: f64,
    },
    /// Complete verification by branch-and-bound over domain splits.
    VerifyComplete {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        center: PathBuf,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        target_class: Option<usize>,
        #[arg(long)]
        spec_a: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value_t = 1e-9)]
        gap_tol: f64,
    },
    /// Exact empirical 1-D Wasserstein distance between two sample files.
    W1 {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Stamp a shift-risk certificate for a scalar predictor.
    ShiftCert {
        /// Labeled training sample (CSV header `x,y`).
        #[arg(long)]
        train: PathBuf,
        /// Unlabeled target sample; its empirical W1 to the train marginal
        /// becomes the radius unless --rho is given.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        rho: Option<f64>,
        /// Affine predictor weight (alternative to --net).
        #[arg(long)]
        w: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        /// Network predictor file (1-input, 1-output).
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = LossArg::Hinge)]
        loss: LossArg,
        /// Assert the covariate-shift assumption; without it the
        /// certificate is recorded but not stamped.
        #[arg(long)]
        assume_covariate_shift: bool,
    },
    /// Certificates for an additive model file; with --compare, the
    /// identifiability residual between two centered models.
    Additive {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        grid_per_dim: usize,
        /// Shift radius; enables the decomposed shift certificate.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        l_loss: f64,
        #[arg(long, default_value_t = 0.0)]
        train_risk: f64,
        #[arg(long)]
        assume_covariate_shift: bool,
    },
    /// Branch-and-bound cost growth on the sawtooth family.
    SawtoothDemo {
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 1e-12)]
        gap_tol: f64,
    },
    /// Sampling-attack miss-rate experiment against a violating model.
    AttackDemo {
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 10)]
        samples: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// The covariate-shift violation that flips risk inside a small radius.
    ShiftFlipDemo {
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
}

fn effective_seed(cli_seed: u64) -> u64 {
    std::env::var("CERTKIT_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(cli_seed)
}

fn load_center(path: &PathBuf) -> Result<Vec<f64>> {
    Ok(load_samples(path)?.xs().to_vec())
}

fn build_specs(
    net: &Network,
    target_class: Option<usize>,
    spec_a: &Option<String>,
    beta: f64,
) -> Result<Vec<(String, LinearSpec)>> {
    match (target_class, spec_a) {
        (Some(t), None) => {
            let mut specs = Vec::new();
            for k in 0..net.output_dim() {
                if k == t {
                    continue;
                }
                specs.push((format!("margin {k}"), LinearSpec::margin(net.output_dim(), k, t)?));
            }
            Ok(specs)
        }
        (None, Some(raw)) => {
            let a: Vec<f64> = raw
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| Error::InvalidParameter(
                        format!("bad spec coefficient `{t}`"),
                    ))
                })
                .collect::<Result<_>>()?;
            Ok(vec![("functional".to_string(), LinearSpec::new(a, beta)?)])
        }
        _ => Err(Error::InvalidParameter(
            "give exactly one of --target-class and --spec-a".into(),
        )),
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Execute a job and return its report plus the process exit status.
pub fn run(cli: &Cli) -> Result<(Report, i32)> {
    let seed = effective_seed(cli.seed);
    match &cli.command {
        Command::Verify {
            net,
            center,
            radius,
            target_class,
            spec_a,
            beta,
            method,
            budget,
            gap_tol,
        } => {
            let network = load_network(net)?;
            let center_point = load_center(center)?;
            let region = BoxSet::around(&center_point, *radius)?;
            let specs = build_specs(&network, *target_class, spec_a, *beta)?;
            let opts = VerifierOptions {
                node_budget: *budget,
                gap_tol: *gap_tol,
                threads: cli.threads,
            };
            let verifier = make_verifier(method, &opts)?;
            let only_specs: Vec<LinearSpec> = specs.iter().map(|(_, s)| s.clone()).collect();
            let certs =
                certify_all(verifier.as_ref(), &network, &region, &only_specs, cli.threads)?;
            let labeled: Vec<(String, crate::bounds::Certificate)> = specs
                .iter()
                .map(|(l, _)| l.clone())
                .zip(certs)
                .collect();
            let code = if labeled.iter().all(|(_, c)| c.verdict == Verdict::Safe) {
                0
            } else if labeled.iter().any(|(_, c)| c.verdict == Verdict::Unsafe) {
                1
            } else {
                2
            };
            let config = vec![
                ("net".into(), net.display().to_string()),
                ("center".into(), center.display().to_string()),
                ("radius".into(), fmt(*radius)),
                ("method".into(), method.clone()),
                ("beta".into(), fmt(*beta)),
                ("seed".into(), seed.to_string()),
                ("threads".into(), cli.threads.to_string()),
            ];
            Ok((Report::new("verify", config, Payload::Certificates(labeled)), code))
        }

        Command::VerifyComplete {
            net,
            center,
            radius,
            target_class,
            spec_a,
            beta,
            budget,
            gap_tol,
        } => {
            let network = load_network(net)?;
            let center_point = load_center(center)?;
            let region = BoxSet::around(&center_point, *radius)?;
            let specs = build_specs(&network, *target_class, spec_a, *beta)?;
            if specs.len() != 1 {
                return Err(Error::InvalidParameter(
                    "complete verification takes a single spec; use --spec-a or a 2-class net"
                        .into(),
                ));
            }
            let cfg =
                BabConfig { node_budget: *budget, gap_tol: *gap_tol, threads: cli.threads };
            let result = verify_complete_with(&network, &region, &specs[0].1, &cfg)?;
            let code = match result.verdict {
                BabVerdict::Safe => 0,
                BabVerdict::Unsafe => 1,
                BabVerdict::Budget => 2,
            };
            let config = vec![
                ("net".into(), net.display().to_string()),
                ("center".into(), center.display().to_string()),
                ("radius".into(), fmt(*radius)),
                ("budget".into(), budget.to_string()),
                ("gap_tol".into(), fmt(*gap_tol)),
                ("beta".into(), fmt(*beta)),
                ("seed".into(), seed.to_string()),
                ("threads".into(), cli.threads.to_string()),
            ];
            Ok((Report::new("verify-complete", config, Payload::Bab(result)), code))
        }

        Command::W1 { source, target } => {
            let a = load_samples(source)?;
            let b = load_samples(target)?;
            let distance = w1_empirical_1d(&a, &b);
            let config = vec![
                ("source".into(), source.display().to_string()),
                ("target".into(), target.display().to_string()),
            ];
            Ok((Report::new("w1", config, Payload::W1 { distance }), 0))
        }

        Command::ShiftCert { train, target, rho, w, b, net, loss, assume_covariate_shift } => {
            let train_sample = load_samples(train)?;
            let predictor = match (w, net) {
                (Some(w), None) => Predictor::Affine { w: *w, b: *b },
                (None, Some(path)) => Predictor::Net(load_network(path)?),
                _ => {
                    return Err(Error::InvalidParameter(
                        "give exactly one of --w and --net".into(),
                    ))
                }
            };
            let loss_kind: LossKind = (*loss).into();
            let l_loss = loss_kind.lipschitz().ok_or(Error::NonLipschitzLoss)?;
            let radius = match (rho, target) {
                (Some(r), _) => *r,
                (None, Some(path)) => w1_empirical_1d(&train_sample, &load_samples(path)?),
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "give --rho or --target to fix the shift radius".into(),
                    ))
                }
            };
            let train_risk = empirical_risk(&predictor, &train_sample, loss_kind)?;
            let cert = shift_certificate(
                train_risk,
                radius,
                l_loss,
                predictor.lipschitz_upper(),
                *assume_covariate_shift,
            )?;
            let code = if cert.is_stamped() { 0 } else { 2 };
            let config = vec![
                ("train".into(), train.display().to_string()),
                ("rho".into(), fmt(radius)),
                ("loss".into(), format!("{loss:?}").to_lowercase()),
                ("assume_covariate_shift".into(), assume_covariate_shift.to_string()),
            ];
            Ok((Report::new("shift-cert", config, Payload::Risk(cert)), code))
        }

        Command::Additive {
            model,
            compare,
            grid_per_dim,
            rho,
            l_loss,
            train_risk,
            assume_covariate_shift,
        } => {
            let raw = load_additive(model)?;
            if let Some(other) = compare {
                let a = center_model(&raw);
                let b = center_model(&load_additive(other)?);
                let residual = identifiability_residual(&a, &b, *grid_per_dim)?;
                let config = vec![
                    ("model".into(), model.display().to_string()),
                    ("compare".into(), other.display().to_string()),
                    ("grid_per_dim".into(), grid_per_dim.to_string()),
                ];
                return Ok((
                    Report::new("additive", config, Payload::Residuals(residual)),
                    0,
                ));
            }
            let centered = center_model(&raw);
            let region = BoxSet::new(
                centered.reference().iter().map(|r| r.lo).collect(),
                centered.reference().iter().map(|r| r.hi).collect(),
            )?;
            let profile = component_lipschitz_profile(&centered, &region)?;
            let (inf, sup) = product_sup_inf(&centered, &region)?;
            let shift = match rho {
                Some(r) => Some(additive_shift_certificate(
                    &centered,
                    &region,
                    *train_risk,
                    *r,
                    *l_loss,
                    *assume_covariate_shift,
                )?),
                None => None,
            };
            let code = match &shift {
                Some(cert) if !cert.risk.is_stamped() => 2,
                _ => 0,
            };
            let summary = AdditiveSummary {
                dimension: centered.dimension(),
                sparsity: centered.sparsity(),
                centering_residual: raw.centering_residual(),
                component_lipschitz: profile.clone(),
                lipschitz_l1: profile.iter().map(|(_, l)| l).sum(),
                inf,
                sup,
                monotone: monotone_endpoint_certificate(&centered, &region).ok(),
                shift,
            };
            let config = vec![("model".into(), model.display().to_string())];
            Ok((Report::new("additive", config, Payload::Additive(summary)), code))
        }

        Command::SawtoothDemo { kmax, budget, gap_tol } => {
            let (report, _) = sawtooth_table(*kmax, *budget, *gap_tol, cli.threads)?;
            Ok((report, 0))
        }

        Command::AttackDemo { epsilon, samples, trials } => {
            let result = attack_gap_experiment(*epsilon, *samples, *trials, seed)?;
            let config = vec![
                ("epsilon".into(), fmt(*epsilon)),
                ("samples".into(), samples.to_string()),
                ("trials".into(), trials.to_string()),
                ("seed".into(), seed.to_string()),
            ];
            Ok((Report::new("attack-demo", config, Payload::Attack(result)), 0))
        }

        Command::ShiftFlipDemo { rho, n } => {
            let scenario = shift_flip_construction(*rho, *n, seed)?;
            let unstamped = shift_certificate(
                scenario.risk_train,
                scenario.w1,
                1.0,
                scenario.predictor.lipschitz_upper(),
                scenario.covariate_shift_assumed(),
            )?;
            let summary = FlipSummary {
                rho: scenario.rho,
                w1: scenario.w1,
                risk_train: scenario.risk_train,
                risk_target: scenario.risk_target,
                covariate_shift_assumed: scenario.covariate_shift_assumed(),
                unstamped,
            };
            let config = vec![
                ("rho".into(), fmt(*rho)),
                ("n".into(), n.to_string()),
                ("seed".into(), seed.to_string()),
            ];
            Ok((Report::new("shift-flip-demo", config, Payload::Flip(summary)), 0))
        }
    }
}

/// The k / pieces / BaB nodes / incomplete-gap table for the sawtooth
/// family at threshold `max - 1e-6`.
fn sawtooth_table(
    kmax: u32,
    budget: u64,
    gap_tol: f64,
    threads: usize,
) -> Result<(Report, Vec<u64>)> {
    let mut rows = Vec::new();
    let mut nodes_by_k = Vec::new();
    for k in 1..=kmax {
        let net = sawtooth_network(k)?;
        let interval = BoxSet::new(vec![0.0], vec![1.0])?;
        let pwl = enumerate_pieces(&net, &interval)?;
        let exact_max = pwl.max().1;
        let spec = LinearSpec::new(vec![1.0], exact_max - 1e-6)?;
        let incomplete = linear_output_bounds(&net, &interval, &spec)?;
        let cfg = BabConfig { node_budget: budget, gap_tol, threads };
        let bab = verify_complete_with(&net, &interval, &spec, &cfg)?;
        nodes_by_k.push(bab.nodes_expanded);
        rows.push(vec![
            k.to_string(),
            (1u64 << k).to_string(),
            pwl.pieces().len().to_string(),
            bab.nodes_expanded.to_string(),
            bab.verdict.to_string(),
            fmt(incomplete.upper),
            format!("{:?}", incomplete.verdict),
            fmt(incomplete.upper - (exact_max - (exact_max - 1e-6))),
        ]);
    }
    let config = vec![
        ("kmax".into(), kmax.to_string()),
        ("budget".into(), budget.to_string()),
        ("gap_tol".into(), fmt(gap_tol)),
    ];
    let report = Report::new(
        "sawtooth-demo",
        config,
        Payload::Table {
            columns: vec![
                "k".into(),
                "pieces_expected".into(),
                "pieces".into(),
                "bab_nodes".into(),
                "bab_verdict".into(),
                "incomplete_upper".into(),
                "incomplete_verdict".into(),
                "incomplete_gap".into(),
            ],
            rows,
        },
    );
    Ok((report, nodes_by_k))
}

/// Outcome of the bundled end-to-end example runs.
pub struct ExampleBundle {
    pub reports: Vec<Report>,
    pub failures: Vec<String>,
}

impl ExampleBundle {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Run the bundled worked examples and failure demonstrations end to end,
/// asserting each one's headline inequality. Everything is constructed
/// deterministically in memory; no assets are read from disk.
pub fn reproduce_examples() -> Result<ExampleBundle> {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    let mut reports = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        if !ok {
            failures.push(format!("{name}: {detail}"));
        }
    };

    // 1. Empirical shift certificate for a linear hinge model.
    {
        let mut rng = ChaCha12Rng::seed_from_u64(71);
        let n = 50;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let ys: Vec<f64> =
            (0..n).map(|_| if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 }).collect();
        let train = EmpiricalSample::labeled(xs.clone(), ys)?;
        let target =
            EmpiricalSample::unlabeled(xs.iter().map(|x| x + 0.17).collect())?;
        let w1 = w1_empirical_1d(&train, &target);
        let lp = w1_lp_oracle(&train, &target)?;
        check("shift-example", (w1 - lp).abs() <= 1e-9, format!("W1 routes differ: {w1} vs {lp}"));
        let predictor = Predictor::Affine { w: 2.5, b: -1.0 };
        let (lhs, rhs) = empirical_shift_check(
            &predictor,
            &train,
            &target,
            LossKind::Hinge,
            predictor.lipschitz_upper(),
        )?;
        check("shift-example", lhs <= rhs + 1e-9, format!("lhs {lhs} > rhs {rhs}"));
        let train_risk = empirical_risk(&predictor, &train, LossKind::Hinge)?;
        let cert =
            shift_certificate(train_risk, w1, 1.0, predictor.lipschitz_upper(), true)?;
        check(
            "shift-example",
            (cert.certified_shift_risk - rhs).abs() <= 1e-12,
            format!("certificate {} differs from checkable rhs {rhs}", cert.certified_shift_risk),
        );
        reports.push(Report::new(
            "example-shift",
            vec![("w1".into(), fmt(w1)), ("lhs".into(), fmt(lhs)), ("rhs".into(), fmt(rhs))],
            Payload::Risk(cert),
        ));
    }

    // 2. Verification pipeline on the 50 -> 200 -> 10 classifier.
    {
        let net = random_network(&[50, 200, 10], 72);
        check(
            "verify-example",
            net.param_count() == 12_000,
            format!("param count {}", net.param_count()),
        );
        let region = BoxSet::around(&vec![0.0; 50], 0.02)?;
        let target = 0;
        let mut rng = ChaCha12Rng::seed_from_u64(73);
        let mut labeled = Vec::new();
        for k in 1..10 {
            let spec = LinearSpec::margin(10, k, target)?;
            let cert = linear_output_bounds(&net, &region, &spec)?;
            let mut sampled = f64::NEG_INFINITY;
            for _ in 0..1000 {
                let x: Vec<f64> = region
                    .lo()
                    .iter()
                    .zip(region.hi())
                    .map(|(l, h)| rng.random_range(*l..=*h))
                    .collect();
                sampled = sampled.max(spec.violation(&net, &x)?);
            }
            check(
                "verify-example",
                cert.upper >= sampled,
                format!("margin {k}: certified {} below sampled {sampled}", cert.upper),
            );
            labeled.push((format!("margin {k}"), cert));
        }
        check("verify-example", labeled.len() == 9, format!("{} margins", labeled.len()));
        reports.push(Report::new(
            "example-verify",
            vec![("params".into(), net.param_count().to_string())],
            Payload::Certificates(labeled),
        ));

        // Cost accounting: multiply-add count is affine in the parameter
        // count at fixed pass count.
        let mut rows = Vec::new();
        let mut points = Vec::new();
        for w in [50usize, 100, 200, 400] {
            let net = random_network(&[50, w, 10], 74);
            let region = BoxSet::around(&vec![0.0; 50], 0.02)?;
            let spec = LinearSpec::margin(10, 1, 0)?;
            let cert = linear_output_bounds(&net, &region, &spec)?;
            points.push((net.param_count() as f64, cert.wall_ops as f64));
            rows.push(vec![
                w.to_string(),
                net.param_count().to_string(),
                cert.passes.to_string(),
                cert.wall_ops.to_string(),
            ]);
        }
        let r2 = linear_fit_r2(&points);
        check("verify-example", r2 >= 0.99, format!("cost fit R^2 {r2}"));
        rows.push(vec!["r2".into(), fmt(r2), String::new(), String::new()]);
        reports.push(Report::new(
            "example-verify-cost",
            vec![],
            Payload::Table {
                columns: vec!["width".into(), "M".into(), "K".into(), "wall_ops".into()],
                rows,
            },
        ));
    }

    // 3. The 2-sparse additive model with explicit constants.
    {
        let refs = vec![crate::additive::Interval::new(-1.0, 1.0)?; 5];
        let g1 = UnivariateComponent::polynomial(vec![0.0, 1.0], refs[0])?;
        let g3 = UnivariateComponent::polynomial(vec![0.0, 0.0, 0.5], refs[2])?;
        let model =
            center_model(&AdditiveModel::new(0.0, vec![(0, g1), (2, g3)], 5, refs.clone())?);
        let region = BoxSet::new(vec![-1.0; 5], vec![1.0; 5])?;
        let profile = component_lipschitz_profile(&model, &region)?;
        let l1: f64 = profile.iter().map(|(_, l)| l).sum();
        check(
            "additive-example",
            profile.iter().all(|(_, l)| (l - 1.0).abs() <= 1e-12),
            format!("component constants {profile:?}"),
        );
        check("additive-example", (l1 - 2.0).abs() <= 1e-12, format!("l1 bound {l1}"));
        let cert = additive_shift_certificate(&model, &region, 0.0, 1.0, 1.0, true)?;
        check(
            "additive-example",
            (cert.risk.sensitivity - 2.0).abs() <= 1e-12,
            format!("sensitivity {}", cert.risk.sensitivity),
        );

        // Unit-coefficient variant: exact range against dense vertex grid.
        let h3 = UnivariateComponent::polynomial(vec![-1.0 / 3.0, 0.0, 1.0], refs[2])?;
        let g1b = UnivariateComponent::polynomial(vec![0.0, 1.0], refs[0])?;
        let unit_model = AdditiveModel::new(0.0, vec![(0, g1b), (2, h3)], 5, refs)?;
        let (inf, sup) = product_sup_inf(&unit_model, &region)?;
        let mut grid_sup = f64::NEG_INFINITY;
        let mut grid_inf = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let mut x = vec![0.0; 5];
                x[0] = -1.0 + i as f64 / 100.0;
                x[2] = -1.0 + j as f64 / 100.0;
                let v = unit_model.evaluate(&x)?;
                grid_sup = grid_sup.max(v);
                grid_inf = grid_inf.min(v);
            }
        }
        check(
            "additive-example",
            (sup - 5.0 / 3.0).abs() <= 1e-9 && (sup - grid_sup).abs() <= 1e-9,
            format!("sup {sup} vs grid {grid_sup}"),
        );
        check(
            "additive-example",
            (inf + 4.0 / 3.0).abs() <= 1e-9 && (inf - grid_inf).abs() <= 1e-9,
            format!("inf {inf} vs grid {grid_inf}"),
        );
        reports.push(Report::new(
            "example-additive",
            vec![("sup".into(), fmt(sup)), ("inf".into(), fmt(inf))],
            Payload::Additive(AdditiveSummary {
                dimension: model.dimension(),
                sparsity: model.sparsity(),
                centering_residual: model.centering_residual(),
                component_lipschitz: profile,
                lipschitz_l1: l1,
                inf,
                sup,
                monotone: None,
                shift: Some(cert),
            }),
        ));
    }

    // 4. Attack failure does not imply robustness.
    {
        let report = attack_gap_experiment(0.01, 10, 10_000, 75)?;
        let p = report.predicted_miss_prob;
        let se = (p * (1.0 - p) / report.n_trials as f64).sqrt();
        check(
            "attack-example",
            (report.empirical_miss_rate() - p).abs() <= 3.0 * se,
            format!("empirical {} vs predicted {p}", report.empirical_miss_rate()),
        );
        check(
            "attack-example",
            report.n_missed > 0,
            "the attack never missed; the gap demonstration needs misses".into(),
        );
        reports.push(Report::new("example-attack", vec![], Payload::Attack(report)));
    }

    // 5. Shift can flip risk when the label law changes.
    {
        let scenario = shift_flip_construction(0.1, 100, 76)?;
        let unstamped = shift_certificate(
            scenario.risk_train,
            scenario.w1,
            1.0,
            scenario.predictor.lipschitz_upper(),
            scenario.covariate_shift_assumed(),
        )?;
        check(
            "flip-example",
            scenario.risk_train == 0.0 && scenario.risk_target == 1.0,
            format!("risks ({}, {})", scenario.risk_train, scenario.risk_target),
        );
        check(
            "flip-example",
            scenario.w1 <= scenario.rho + 1e-9,
            format!("W1 {} exceeds rho {}", scenario.w1, scenario.rho),
        );
        check("flip-example", unstamped.is_vacuous(), "certificate was stamped".into());
        reports.push(Report::new(
            "example-flip",
            vec![("rho".into(), fmt(scenario.rho))],
            Payload::Flip(FlipSummary {
                rho: scenario.rho,
                w1: scenario.w1,
                risk_train: scenario.risk_train,
                risk_target: scenario.risk_target,
                covariate_shift_assumed: scenario.covariate_shift_assumed(),
                unstamped,
            }),
        ));
    }

    // 6. The exponential barrier, measured.
    {
        let (report, nodes) = sawtooth_table(10, 1_000_000, 1e-12, 1)?;
        for k in 4..=9u32 {
            let idx = (k - 1) as usize;
            check(
                "barrier-example",
                nodes[idx + 1] as f64 >= 1.5 * nodes[idx] as f64,
                format!("nodes({}) = {} < 1.5 * nodes({k}) = {}", k + 1, nodes[idx + 1], nodes[idx]),
            );
        }
        let incomplete_k10 = {
            let net = sawtooth_network(10)?;
            let interval = BoxSet::new(vec![0.0], vec![1.0])?;
            let exact_max = enumerate_pieces(&net, &interval)?.max().1;
            linear_output_bounds(&net, &interval, &LinearSpec::new(vec![1.0], exact_max - 1e-6)?)?
        };
        check(
            "barrier-example",
            incomplete_k10.verdict == Verdict::Unknown && incomplete_k10.upper > 0.0,
            format!("incomplete verdict {:?}", incomplete_k10.verdict),
        );
        reports.push(report);
    }

    Ok(ExampleBundle { reports, failures })
}

fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_res: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_examples_pass() {
        let bundle = reproduce_examples().unwrap();
        assert!(bundle.passed(), "failures: {:?}", bundle.failures);
        assert_eq!(bundle.reports.len(), 7);
    }
}
