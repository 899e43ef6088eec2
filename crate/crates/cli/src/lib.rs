pub mod oracle;
pub mod suite;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use bose_bounds::certificate::{
    build_certificate_with, evaluate_bounds, probe_stability_with, BSource, CertificateReport,
    StabilityOptions,
};
use bose_bounds::perturbation::{check_instance, run_trial, verify_perturbation_lemma, PerturbationInstance};
use bose_bounds::potential::PotentialPair;
use bose_bounds::scattering::solve_zero_energy;
use bose_bounds::spectral::{
    neumann_ball_ground, neumann_box_k_ground, two_body_box_ground_with, two_body_torus_ground,
    BoxOptions, SpectralResult,
};
use bose_bounds::Error;
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use suite::{lemma4_check, lemma5_check, partition_check, Budget, Suite};

pub const THREADS_ENV: &str = "BOSE_BOUNDS_THREADS";
pub const MEM_BUDGET_ENV: &str = "BOSE_BOUNDS_MEM_BUDGET_MB";

#[derive(Debug, Parser, Serialize)]
#[command(name = "bose-bounds", version, about = "Scattering lengths, Neumann eigenvalues and bound certificates for dilute Bose gases")]
pub struct Cli {
    /// Worker threads; overrides BOSE_BOUNDS_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Zero-energy scattering solution of v1 − λ v2.
    Scattering {
        /// Pair JSON; the built-in reference pair when omitted.
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Solve −f'' + V f/2 = 0 instead of −f'' + V f = 0.
        #[arg(long)]
        half: bool,
        /// Also write (r, f(r)) samples as CSV.
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Neumann or periodic ground energies.
    Eig {
        #[arg(long, value_enum)]
        kind: EigKind,
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Radius for `ball`, side for the others.
        #[arg(long, required_unless_present = "sweep")]
        extent: Option<f64>,
        /// Cells per axis; defaults to 100000 (ball), 64 (torus), 8 (boxes).
        #[arg(long)]
        n: Option<usize>,
        /// Particles for `boxk`.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// `extent=a,b,c`: one solve per extent, CSV output.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Constants chain for a pair.
    Certify {
        #[arg(long)]
        pair: Option<PathBuf>,
        /// Stability constant.
        #[arg(long = "B", conflicts_with = "probe_b", required_unless_present = "probe_b")]
        b: Option<f64>,
        /// Estimate the stability constant by annealing.
        #[arg(long = "probe-B")]
        probe_b: bool,
        #[arg(long, default_value_t = 12)]
        nmax: usize,
        /// Metropolis moves per annealing restart.
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = bose_bounds::certificate::DEFAULT_KAPPA)]
        kappa: f64,
    },
    /// Energy bounds from a certificate.
    Bounds {
        /// Certificate JSON written by `certify`.
        #[arg(long)]
        cert: PathBuf,
        #[arg(long, required_unless_present = "sweep")]
        rho: Option<f64>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long = "N")]
        n: f64,
        #[arg(long, default_value_t = 1.0)]
        c_prime: f64,
        /// `rho=a,b,c`: CSV of (rho, bound, ratio_to_4pi_a_rho_N).
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Single verification tasks.
    Verify {
        #[command(subcommand)]
        task: VerifyTask,
    },
    /// Every acceptance criterion at the chosen budget.
    VerifyAll {
        #[arg(long, value_enum, default_value = "quick")]
        budget: Budget,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the built-in reference pair as JSON.
    ReferencePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EigKind {
    Ball,
    Torus,
    Box6,
    Boxk,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum VerifyTask {
    /// Fuzz the diagonal-perturbation bound against dense diagonalization.
    Perturb {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Check one instance `{"base": [[..]], "x": [..]}` instead.
        #[arg(long, conflicts_with_all = ["replay_trial", "replay_seed"])]
        instance: Option<PathBuf>,
        /// Re-run a single trial from a failure report.
        #[arg(long, requires = "replay_seed")]
        replay_trial: Option<usize>,
        #[arg(long, requires = "replay_trial")]
        replay_seed: Option<u64>,
    },
    /// Partition-of-unity identities and the pointwise potential chain.
    Partition {
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, default_value_t = 4.0)]
        cell: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Ball ground energy against 3a/l0³.
    Lemma4 {
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Radii; defaults to 25, 50, 100 times r1.
        #[arg(long, value_delimiter = ',')]
        l0: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
    },
    /// Two-body torus ground energy against 8πa/L³.
    Lemma5 {
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Sides; defaults to 100, 200, 400 times a.
        #[arg(long, value_delimiter = ',')]
        extent: Vec<f64>,
        #[arg(long, default_value_t = 96)]
        n: usize,
    },
}

/// A failed run: exit status and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub report: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BoundStateDetected { .. } | Error::PointwiseViolation { .. } | Error::NormalizationError { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
            report: None,
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
        report: None,
    }
}

/// Output of a successful dispatch.
pub enum Artifact {
    Json { report: Value, passed: bool },
    Csv { header: Vec<String>, rows: Vec<Vec<f64>> },
}

struct PairSource {
    pair: PotentialPair,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load_pair(path: Option<&Path>) -> Result<PairSource, Failure> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| usage(format!("cannot read pair file {}: {e}", p.display())))?;
            let bad = |e: serde_json::Error| usage(format!("pair file {} is not a valid pair: {e}", p.display()));
            // Accept either a bare pair or a `reference-pair` envelope.
            let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(bad)?;
            let body = value.get("report").cloned().unwrap_or(value);
            let pair: PotentialPair = serde_json::from_value(body).map_err(bad)?;
            Ok(PairSource {
                pair,
                sha256: sha256_hex(&bytes),
            })
        }
        None => {
            let pair = PotentialPair::reference();
            let canonical = serde_json::to_vec(&pair).expect("pair serializes");
            Ok(PairSource {
                pair,
                sha256: sha256_hex(&canonical),
            })
        }
    }
}

fn parse_list(spec: &str, key: &str) -> Result<Vec<f64>, Failure> {
    let body = spec
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .ok_or_else(|| usage(format!("sweep must look like {key}=a,b,c, got {spec}")))?;
    body.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| usage(format!("bad sweep value {t}: {e}"))))
        .collect()
}

fn solve_eig(kind: EigKind, pair: &PotentialPair, lambda: f64, extent: f64, n: Option<usize>, k: usize) -> Result<SpectralResult, Failure> {
    let v = pair.composite(lambda);
    let memory_budget = std::env::var(MEM_BUDGET_ENV)
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .map_or(bose_bounds::spectral::DEFAULT_MEMORY_BUDGET, |mb| mb << 20);
    let box_opts = BoxOptions {
        memory_budget,
        ..Default::default()
    };
    Ok(match kind {
        EigKind::Ball => neumann_ball_ground(&v, extent, n.unwrap_or(100_000))?,
        EigKind::Torus => two_body_torus_ground(&v, extent, n.unwrap_or(64))?,
        EigKind::Box6 => two_body_box_ground_with(&v, extent, n.unwrap_or(8), &box_opts)?,
        EigKind::Boxk => neumann_box_k_ground(&v, extent, k, n.unwrap_or(8), &box_opts)?,
    })
}

fn load_instance(path: &Path) -> Result<PerturbationInstance, Failure> {
    #[derive(Deserialize)]
    struct Raw {
        base: Vec<Vec<f64>>,
        x: Vec<f64>,
    }
    let bytes = std::fs::read(path).map_err(|e| usage(format!("cannot read instance {}: {e}", path.display())))?;
    let raw: Raw = serde_json::from_slice(&bytes).map_err(|e| usage(format!("bad instance file: {e}")))?;
    let n = raw.base.len();
    if raw.base.iter().any(|r| r.len() != n) {
        return Err(usage("instance base must be square"));
    }
    let flat: Vec<f64> = raw.base.into_iter().flatten().collect();
    Ok(PerturbationInstance::new(DMatrix::from_row_slice(n, n, &flat), raw.x)?)
}

/// Runs one command; `pair_sha256` is filled for commands that read a pair.
pub fn dispatch(cmd: &Command) -> Result<(Artifact, Option<String>), Failure> {
    match cmd {
        Command::Scattering {
            pair,
            lambda,
            half,
            samples_csv,
        } => {
            let src = load_pair(pair.as_deref())?;
            let sol = solve_zero_energy(&src.pair.composite(*lambda), *half)?;
            if let Some(path) = samples_csv {
                let mut w = csv::Writer::from_path(path).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
                let io = |e: csv::Error| usage(format!("cannot write samples: {e}"));
                w.write_record(["r", "f"]).map_err(io)?;
                for (r, f) in &sol.f_samples {
                    w.write_record([r.to_string(), f.to_string()]).map_err(io)?;
                }
                w.flush().map_err(|e| usage(e.to_string()))?;
            }
            let report = json!({
                "a": sol.a,
                "w_positive": sol.w_positive,
                "r_match": sol.r_match,
                "grid_step": sol.grid_step,
            });
            Ok((Artifact::Json { report, passed: true }, Some(src.sha256)))
        }
        Command::Eig {
            kind,
            pair,
            lambda,
            extent,
            n,
            k,
            sweep,
        } => {
            let src = load_pair(pair.as_deref())?;
            if let Some(spec) = sweep {
                let a = solve_zero_energy(&src.pair.composite(*lambda), true)?.a;
                let (norm, label) = match kind {
                    EigKind::Ball => (3.0 * a, "E_extent3_over_3a"),
                    _ => (8.0 * std::f64::consts::PI * a, "E_extent3_over_8pi_a"),
                };
                let mut rows = Vec::new();
                for l in parse_list(spec, "extent")? {
                    let e = solve_eig(*kind, &src.pair, *lambda, l, *n, *k)?.best();
                    rows.push(vec![l, e, e * l.powi(3) / norm]);
                }
                let header = ["extent", "E", label].map(String::from).to_vec();
                return Ok((Artifact::Csv { header, rows }, Some(src.sha256)));
            }
            let extent = extent.ok_or_else(|| usage("--extent is required without --sweep"))?;
            let r = solve_eig(*kind, &src.pair, *lambda, extent, *n, *k)?;
            let report = serde_json::to_value(&r).expect("serializable");
            Ok((Artifact::Json { report, passed: true }, Some(src.sha256)))
        }
        Command::Certify {
            pair,
            b,
            probe_b,
            nmax,
            budget,
            restarts,
            seed,
            kappa,
        } => {
            let src = load_pair(pair.as_deref())?;
            let (b, source, stability) = if *probe_b {
                let est = probe_stability_with(
                    &src.pair,
                    &StabilityOptions {
                        n_max: *nmax,
                        budget: *budget,
                        restarts: *restarts,
                        seed: *seed,
                        ..Default::default()
                    },
                )?;
                (est.b_hat, BSource::Probed, Some(est))
            } else {
                (b.expect("clap enforces --B or --probe-B"), BSource::Supplied, None)
            };
            let cert = build_certificate_with(&src.pair, b, source, *kappa)?;
            let mut report = serde_json::to_value(&cert).expect("serializable");
            if let Some(est) = stability {
                report["stability"] = serde_json::to_value(&est).expect("serializable");
            }
            Ok((Artifact::Json { report, passed: true }, Some(src.sha256)))
        }
        Command::Bounds {
            cert,
            rho,
            epsilon,
            n,
            c_prime,
            sweep,
        } => {
            let bytes = std::fs::read(cert).map_err(|e| usage(format!("cannot read certificate {}: {e}", cert.display())))?;
            let value: Value = serde_json::from_slice(&bytes).map_err(|e| usage(format!("bad certificate: {e}")))?;
            // Accept either a bare certificate or a full `certify` envelope.
            let body = value.get("report").cloned().unwrap_or(value);
            let c: CertificateReport = serde_json::from_value(body).map_err(|e| usage(format!("bad certificate: {e}")))?;
            let sha = sha256_hex(&serde_json::to_vec(&c.pair).expect("serializable"));
            if let Some(spec) = sweep {
                let mut rows = Vec::new();
                for r in parse_list(spec, "rho")? {
                    let e = evaluate_bounds(&c, r, *epsilon, *n, *c_prime)?;
                    rows.push(vec![r, e.theorem1_bound, e.ratio]);
                }
                let header = ["rho", "bound", "ratio_to_4pi_a_rho_N"].map(String::from).to_vec();
                return Ok((Artifact::Csv { header, rows }, Some(sha)));
            }
            let rho = rho.ok_or_else(|| usage("--rho is required without --sweep"))?;
            let e = evaluate_bounds(&c, rho, *epsilon, *n, *c_prime)?;
            let report = serde_json::to_value(&e).expect("serializable");
            Ok((Artifact::Json { report, passed: true }, Some(sha)))
        }
        Command::Verify { task } => verify(task),
        Command::VerifyAll { budget, seed } => {
            let report = Suite::new(*budget, *seed).run_all();
            let passed = report.passed;
            Ok((
                Artifact::Json {
                    report: serde_json::to_value(&report).expect("serializable"),
                    passed,
                },
                None,
            ))
        }
        Command::ReferencePair => Ok((
            Artifact::Json {
                report: serde_json::to_value(PotentialPair::reference()).expect("serializable"),
                passed: true,
            },
            None,
        )),
    }
}

fn verify(task: &VerifyTask) -> Result<(Artifact, Option<String>), Failure> {
    let json_out = |report: Value, passed: bool, sha: Option<String>| Ok((Artifact::Json { report, passed }, sha));
    match task {
        VerifyTask::Perturb {
            trials,
            dim,
            seed,
            instance,
            replay_trial,
            replay_seed,
        } => {
            if let Some(path) = instance {
                let inst = load_instance(path)?;
                let check = check_instance(&inst)?;
                let passed = check.passed;
                return json_out(serde_json::to_value(&check).expect("serializable"), passed, None);
            }
            if let (Some(t), Some(s)) = (replay_trial, replay_seed) {
                let o = run_trial(*t, *s, *dim);
                let passed = o.slack >= -bose_bounds::perturbation::BOUND_TOLERANCE * o.scale
                    && o.psi_prime_slack >= -bose_bounds::perturbation::PSI_TOLERANCE * o.psi_prime_bound;
                return json_out(serde_json::to_value(&o).expect("serializable"), passed, None);
            }
            let r = verify_perturbation_lemma(*trials, *dim, *seed)?;
            let passed = r.passed;
            let mut report = serde_json::to_value(&r).expect("serializable");
            report["replay"] = json!(r
                .violations
                .iter()
                .map(|v| format!("verify perturb --dim {dim} --replay-trial {} --replay-seed {}", v.trial, v.seed))
                .collect::<Vec<_>>());
            json_out(report, passed, None)
        }
        VerifyTask::Partition { pair, cell, samples, seed } => {
            let src = load_pair(pair.as_deref())?;
            let r = partition_check(&src.pair, *cell, *samples, *seed)?;
            let passed = r.passed;
            json_out(serde_json::to_value(&r).expect("serializable"), passed, Some(src.sha256))
        }
        VerifyTask::Lemma4 { pair, lambda, l0, n } => {
            let src = load_pair(pair.as_deref())?;
            let v = src.pair.composite(*lambda);
            let a = solve_zero_energy(&v, true)?.a;
            let r1 = src.pair.r1;
            let l0s = if l0.is_empty() { vec![25.0 * r1, 50.0 * r1, 100.0 * r1] } else { l0.clone() };
            let r = lemma4_check(&v, a, &l0s, *n, r1)?;
            let passed = r.passed;
            json_out(serde_json::to_value(&r).expect("serializable"), passed, Some(src.sha256))
        }
        VerifyTask::Lemma5 { pair, lambda, extent, n } => {
            let src = load_pair(pair.as_deref())?;
            let v = src.pair.composite(*lambda);
            let a = solve_zero_energy(&v, true)?.a;
            let extents = if extent.is_empty() { vec![100.0 * a, 200.0 * a, 400.0 * a] } else { extent.clone() };
            let r = lemma5_check(&v, a, &extents, *n)?;
            let passed = r.passed;
            json_out(serde_json::to_value(&r).expect("serializable"), passed, Some(src.sha256))
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), Failure> {
    let threads = flag.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.parse().ok()));
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("--threads must be positive"));
        }
        // A second initialization in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| usage(e.to_string()))
        }
    }
}

fn render(cli: &Cli, artifact: Artifact, sha: Option<String>) -> Result<(String, bool), Failure> {
    let config = serde_json::to_value(cli).expect("serializable");
    match artifact {
        Artifact::Json { report, passed } => {
            let envelope = json!({"config": config, "pair_sha256": sha, "report": report});
            Ok((serde_json::to_string_pretty(&envelope).expect("serializable") + "\n", passed))
        }
        Artifact::Csv { header, rows } => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| usage(format!("cannot format CSV: {e}"));
            w.write_record(&header).map_err(io)?;
            for row in rows {
                w.write_record(row.iter().map(|x| x.to_string())).map_err(io)?;
            }
            let body = String::from_utf8(w.into_inner().map_err(|e| usage(e.to_string()))?).expect("utf8");
            let head = format!(
                "# config: {}\n# pair_sha256: {}\n",
                serde_json::to_string(&config).expect("serializable"),
                sha.unwrap_or_default()
            );
            Ok((head + &body, true))
        }
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = configure_threads(cli.threads)
        .and_then(|_| dispatch(&cli.command))
        .and_then(|(artifact, sha)| render(&cli, artifact, sha))
        .and_then(|(text, passed)| write_out(cli.output.as_deref(), &text).map(|_| passed));
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("verification failed; see report");
            2
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            if let Some(r) = f.report {
                eprintln!("{r}");
            }
            f.code
        }
    }
}
