//! Command-line front end: parse problem files, dispatch to the library,
//! emit machine-readable reports.
//!
//! Exit codes: 0 success / check passed, 1 invalid input or infeasible,
//! 2 non-convergence, 3 verification failure (a check that theory says
//! should pass came back false). Identical inputs and seeds produce
//! byte-identical reports.

use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::costs::{CostModel, ThetaSpec};
use crate::error::{Error, Result};
use crate::measures::{
    load_measure_field, CostDoc, Coupling, DiscreteMeasure, ProblemDoc,
};
use crate::monopoly::{compare_four, default_grid, solve_form_i, solve_kr_dual, MonopolyProblem};
use crate::monotonicity::{check_c_monotone, RedistributeOptions};
use crate::orders::{check_convex_order, check_icx_order, OrderOutcome};
use crate::schrodinger::{check_product_form, pairwise_ratio_check, sinkhorn, ReferenceJoint};
use crate::wot::{
    duality_gap, instance_fingerprint, solve_dual, solve_primal, stability_probe,
    tagged_fingerprint, verify_transfer_representation, SolveOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NON_CONVERGENCE: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "wotlab",
    version,
    about = "Weak optimal transport solvers, certificates and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Problem file (JSON); an array of problems fans out over the workers.
    #[arg(long)]
    input: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Check tolerance override (meaning depends on the subcommand).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the coupling matrix in reports.
    #[arg(long, default_value_t = false)]
    emit_coupling: bool,
    /// Worker threads for multi-instance inputs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the primal problem.
    Solve(Common),
    /// Produce a dual certificate.
    Dual(Common),
    /// Duality gap; either from artifacts or by solving both sides.
    Gap {
        #[command(flatten)]
        common: GapArgs,
    },
    /// Check a coupling (default: the solver output) for redistribution
    /// stability.
    Monotone {
        #[command(flatten)]
        common: Common,
        /// Coupling file (JSON mass matrix); defaults to the solver output.
        #[arg(long)]
        coupling: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        kmax: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Entropic bridge via alternating marginal fitting.
    Sinkhorn(Common),
    /// Verify the product-form factorization of the entropic optimizer.
    ProductForm(Common),
    /// Decide convex or increasing convex order.
    Order {
        #[command(flatten)]
        common: Common,
        /// "cx" or "icx"; defaults to the problem file's `order` field.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Quadratic projection onto the convex-order lower set.
    BrenierStrassen(Common),
    /// Check the solver map against the Lipschitz-gradient cycle conditions.
    Rockafellar {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
        #[arg(long, default_value_t = 5)]
        cycle_len: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// The four pricing programs and their spread.
    Monopoly(Common),
    /// Norm-cost dual over increasing convex 1-Lipschitz functions.
    KrDual(Common),
    /// Verify the backward-transfer representation.
    TransferCheck(Common),
    /// Re-solve under weight perturbations.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        perturb: usize,
        #[arg(long, default_value_t = 1e-3)]
        scale: f64,
        #[arg(long, default_value_t = 0.0)]
        lipschitz: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct GapArgs {
    /// Problem file; solves both sides when artifacts are not given.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Primal artifact (a `solve` report).
    #[arg(long)]
    primal: Option<PathBuf>,
    /// Dual artifact (a `dual` report).
    #[arg(long)]
    dual: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    emit_coupling: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

/// Parsed single instance.
struct Instance {
    doc: ProblemDoc,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    model: Option<CostModel>,
}

fn parse_instance(doc: ProblemDoc) -> Result<Instance> {
    let mu = load_measure_field(&doc.mu, "mu")?;
    let nu = load_measure_field(&doc.nu, "nu")?;
    let model = doc.cost.as_ref().map(CostModel::from_doc).transpose()?;
    if let Some(model) = &model {
        model.validate(&mu, &nu)?;
    }
    Ok(Instance { doc, mu, nu, model })
}

fn read_problems(path: &PathBuf) -> Result<(Vec<ProblemDoc>, bool)> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    if value.is_array() {
        Ok((serde_json::from_value(value)?, true))
    } else {
        Ok((vec![serde_json::from_value(value)?], false))
    }
}

fn require_model(inst: &Instance) -> Result<&CostModel> {
    inst.model
        .as_ref()
        .ok_or_else(|| Error::schema("cost", "this subcommand needs a cost record"))
}

fn solve_options(common: &Common) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(tol) = common.tol {
        opts.rel_tol = tol;
    }
    opts
}

fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::CyclingGuard { .. } => EXIT_NON_CONVERGENCE,
        _ => EXIT_INVALID,
    }
}

/// Entry point; returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // Clap handles --help/--version through this path as well.
            let _ = err.print();
            return if err.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = exit_code_for(&err);
            let payload = json!({"error": err.to_string(), "exit_code": code});
            eprintln!("{}", serde_json::to_string_pretty(&payload).unwrap());
            code
        }
    }
}

fn init_logging() {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        let env = env_logger::Env::new().filter("WOTLAB_LOG");
        let _ = env_logger::Builder::from_env(env)
            .format_timestamp(None)
            .try_init();
    });
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(common) => fan_out(&common.clone(), move |inst, c| cmd_solve(inst, c)),
        Command::Dual(common) => fan_out(&common.clone(), move |inst, c| cmd_dual(inst, c)),
        Command::Gap { common } => cmd_gap(common),
        Command::Monotone {
            common,
            coupling,
            kmax,
            trials,
        } => {
            let coupling_doc = coupling.map(|p| read_coupling(&p)).transpose()?;
            fan_out(&common, move |inst, c| {
                cmd_monotone(inst, c, coupling_doc.clone(), kmax, trials)
            })
        }
        Command::Sinkhorn(common) => fan_out(&common, cmd_sinkhorn),
        Command::ProductForm(common) => fan_out(&common, cmd_product_form),
        Command::Order { common, kind } => {
            fan_out(&common, move |inst, c| cmd_order(inst, c, kind.clone()))
        }
        Command::BrenierStrassen(common) => fan_out(&common, cmd_brenier),
        Command::Rockafellar {
            common,
            lipschitz,
            cycle_len,
            trials,
        } => fan_out(&common, move |inst, c| {
            cmd_rockafellar(inst, c, lipschitz, cycle_len, trials)
        }),
        Command::Monopoly(common) => fan_out(&common, cmd_monopoly),
        Command::KrDual(common) => fan_out(&common, cmd_kr_dual),
        Command::TransferCheck(common) => fan_out(&common, cmd_transfer),
        Command::Stability {
            common,
            perturb,
            scale,
            lipschitz,
        } => fan_out(&common, move |inst, c| {
            cmd_stability(inst, c, perturb, scale, lipschitz)
        }),
    }
}

/// Run a handler over every instance in the input (bounded worker pool for
/// arrays), write the report, and combine exit codes.
fn fan_out(
    common: &Common,
    handler: impl Fn(&Instance, &Common) -> Result<(Value, i32)> + Sync,
) -> Result<i32> {
    let (docs, is_array) = read_problems(&common.input)?;
    let n = docs.len();
    let workers = common.workers.max(1).min(n.max(1));
    let slots: Mutex<Vec<Option<Result<(Value, i32)>>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= n {
                    break;
                }
                let outcome = parse_instance(docs[idx].clone())
                    .and_then(|inst| handler(&inst, common));
                slots.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });
    let results = slots.into_inner().unwrap();
    let mut reports = Vec::with_capacity(n);
    let mut code = EXIT_OK;
    for outcome in results {
        let (value, c) = outcome.expect("worker filled every slot")?;
        reports.push(value);
        code = code.max(c);
    }
    let body = if is_array {
        Value::Array(reports)
    } else {
        reports.into_iter().next().expect("one instance")
    };
    emit(&common.output, &body)?;
    Ok(code)
}

fn emit(output: &Option<PathBuf>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let stdout = std::io::stdout();
            stdout.lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn to_value(v: impl Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn with_meta(mut value: Value, fingerprint: &str) -> Value {
    if let Some(map) = value.as_object_mut() {
        map.insert("fingerprint".into(), json!(fingerprint));
        map.insert("version".into(), json!(version()));
    }
    value
}

fn cmd_solve(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let model = require_model(inst)?;
    let opts = solve_options(common);
    let sol = solve_primal(model, &inst.mu, &inst.nu, &opts)?;
    let mut report = json!({
        "value": sol.value,
        "fw_gap": sol.fw_gap,
        "iterations": sol.iterations,
    });
    if common.emit_coupling {
        report["coupling"] = to_value(&sol.coupling.mass)?;
    }
    Ok((with_meta(report, &sol.fingerprint), EXIT_OK))
}

fn cmd_dual(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let model = require_model(inst)?;
    let opts = solve_options(common);
    let cert = solve_dual(model, &inst.mu, &inst.nu, &opts)?;
    let report = json!({
        "dual_value": cert.dual_value,
        "g": cert.g,
        "r_values": cert.r_values,
    });
    Ok((with_meta(report, &cert.fingerprint), EXIT_OK))
}

fn cmd_gap(args: GapArgs) -> Result<i32> {
    let report = match (&args.primal, &args.dual) {
        (Some(primal), Some(dual)) => {
            let p: Value = serde_json::from_str(&std::fs::read_to_string(primal)?)?;
            let d: Value = serde_json::from_str(&std::fs::read_to_string(dual)?)?;
            let scalar = |v: &Value, field: &str| -> Result<f64> {
                v.get(field)
                    .and_then(Value::as_f64)
                    .ok_or_else(|| Error::schema(field, "missing numeric field"))
            };
            let text = |v: &Value, field: &str| -> Result<String> {
                Ok(v.get(field)
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::schema(field, "missing string field"))?
                    .to_string())
            };
            let fp_primal = text(&p, "fingerprint")?;
            let fp_dual = text(&d, "fingerprint")?;
            if fp_primal != fp_dual {
                return Err(Error::FingerprintMismatch {
                    left: fp_primal,
                    right: fp_dual,
                });
            }
            let primal_value = scalar(&p, "value")?;
            let dual_value = scalar(&d, "dual_value")?;
            let gap = primal_value - dual_value;
            let rel_gap = gap / (1.0 + primal_value.abs());
            let passed = rel_gap <= 1e-5 && gap >= -1e-7;
            with_meta(
                json!({
                    "value": primal_value,
                    "fw_gap": p.get("fw_gap").cloned().unwrap_or(Value::Null),
                    "dual_value": dual_value,
                    "gap": gap,
                    "rel_gap": rel_gap,
                    "passed": passed,
                }),
                &fp_primal,
            )
        }
        _ => {
            let input = args
                .input
                .as_ref()
                .ok_or_else(|| Error::schema("input", "gap needs --input or both artifacts"))?;
            let (docs, _) = read_problems(input)?;
            let inst = parse_instance(docs.into_iter().next().ok_or_else(|| {
                Error::schema("input", "empty problem array")
            })?)?;
            let model = require_model(&inst)?;
            let mut opts = SolveOptions::default();
            if let Some(tol) = args.tol {
                opts.rel_tol = tol;
            }
            let sol = solve_primal(model, &inst.mu, &inst.nu, &opts)?;
            let cert = solve_dual(model, &inst.mu, &inst.nu, &opts)?;
            let gap = duality_gap(&sol, &cert)?;
            let mut body = json!({
                "value": gap.primal,
                "fw_gap": sol.fw_gap,
                "dual_value": gap.dual,
                "gap": gap.gap,
                "rel_gap": gap.rel_gap,
                "passed": gap.passed,
                "g": cert.g,
            });
            if args.emit_coupling {
                body["coupling"] = to_value(&sol.coupling.mass)?;
            }
            with_meta(body, &sol.fingerprint)
        }
    };
    let passed = report
        .get("passed")
        .and_then(Value::as_bool)
        .unwrap_or(false);
    emit(&args.output, &report)?;
    Ok(if passed { EXIT_OK } else { EXIT_VERIFICATION })
}

fn read_coupling(path: &PathBuf) -> Result<Vec<Vec<f64>>> {
    let value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mass = if let Some(m) = value.get("mass").or(value.get("coupling")) {
        m.clone()
    } else {
        value
    };
    Ok(serde_json::from_value(mass)?)
}

fn cmd_monotone(
    inst: &Instance,
    common: &Common,
    coupling: Option<Vec<Vec<f64>>>,
    kmax: usize,
    trials: usize,
) -> Result<(Value, i32)> {
    let model = require_model(inst)?;
    let opts = SolveOptions::default();
    let tol = common.tol.unwrap_or(1e-6);
    let provided = coupling.is_some();
    let coupling = match coupling {
        Some(mass) => Coupling::new(inst.mu.clone(), inst.nu.clone(), mass)?,
        None => solve_primal(model, &inst.mu, &inst.nu, &opts)?.coupling,
    };
    let verdict = check_c_monotone(
        model,
        &coupling,
        kmax,
        trials,
        common.seed,
        tol,
        &RedistributeOptions::default(),
    )?;
    let fingerprint = instance_fingerprint(model, &inst.mu, &inst.nu);
    let entropic_note = matches!(model, CostModel::Entropic { .. });
    let report = with_meta(
        json!({
            "passed": verdict.passed,
            "worst_violation": verdict.worst_violation,
            "witness": to_value(&verdict.witness)?,
            "subsets_checked": verdict.subsets_checked,
            "necessary_condition_only": entropic_note,
        }),
        &fingerprint,
    );
    // Failing on a user-provided coupling is an answer; failing on the
    // solver's own output contradicts optimizer monotonicity.
    let code = if verdict.passed || provided {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    };
    Ok((report, code))
}

fn entropic_joint(inst: &Instance) -> Result<ReferenceJoint> {
    match &inst.doc.cost {
        Some(CostDoc::Entropic { gamma }) => ReferenceJoint::new(gamma.clone()),
        _ => Err(Error::schema("cost", "expected an entropic cost record")),
    }
}

fn cmd_sinkhorn(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let joint = entropic_joint(inst)?;
    let tol = common.tol.unwrap_or(1e-10);
    let res = sinkhorn(&joint, &inst.mu, &inst.nu, tol, 100_000)?;
    let model = require_model(inst)?;
    let fingerprint = instance_fingerprint(model, &inst.mu, &inst.nu);
    let mut report = json!({
        "value": res.value,
        "u": res.u,
        "v": res.v,
        "iterations": res.iterations,
        "marginal_err": res.marginal_err,
    });
    if common.emit_coupling {
        report["coupling"] = to_value(&res.coupling.mass)?;
    }
    Ok((with_meta(report, &fingerprint), EXIT_OK))
}

fn cmd_product_form(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let joint = entropic_joint(inst)?;
    let res = sinkhorn(&joint, &inst.mu, &inst.nu, 1e-10, 100_000)?;
    let tol = common.tol.unwrap_or(1e-8);
    let pf = check_product_form(&res.coupling, &joint, tol)?;
    let ratios = pairwise_ratio_check(&res.coupling, &joint, tol)?;
    let model = require_model(inst)?;
    let fingerprint = instance_fingerprint(model, &inst.mu, &inst.nu);
    let passed = pf.passed && ratios.passed;
    let report = with_meta(
        json!({
            "passed": passed,
            "max_log_deviation": pf.max_log_deviation,
            "f": pf.f,
            "g": pf.g,
            "ratio_worst": ratios.worst,
            "ratio_pairs": to_value(&ratios.pairs)?,
        }),
        &fingerprint,
    );
    let code = if passed { EXIT_OK } else { EXIT_VERIFICATION };
    Ok((report, code))
}

fn cmd_order(inst: &Instance, _common: &Common, kind: Option<String>) -> Result<(Value, i32)> {
    let kind = kind
        .or_else(|| inst.doc.order.clone())
        .unwrap_or_else(|| "cx".to_string());
    let outcome = match kind.as_str() {
        "cx" => check_convex_order(&inst.mu, &inst.nu)?,
        "icx" => check_icx_order(&inst.mu, &inst.nu)?,
        other => {
            return Err(Error::schema(
                "order",
                format!("unknown order `{other}` (expected \"cx\" or \"icx\")"),
            ))
        }
    };
    let fingerprint = tagged_fingerprint(&format!("order:{kind}"), &inst.mu, &inst.nu);
    let report = match &outcome {
        OrderOutcome::Holds(w) => json!({
            "order": kind,
            "holds": true,
            "witness": to_value(w)?,
        }),
        OrderOutcome::Fails(cert) => json!({
            "order": kind,
            "holds": false,
            "certificate": to_value(cert)?,
        }),
        OrderOutcome::Inconclusive { margin } => json!({
            "order": kind,
            "holds": "inconclusive",
            "margin": margin,
        }),
    };
    Ok((with_meta(report, &fingerprint), EXIT_OK))
}

fn cmd_brenier(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let opts = solve_options(common);
    let sol = crate::brenier_strassen::solve_v2(&inst.mu, &inst.nu, &opts)?;
    let fingerprint = instance_fingerprint(&CostModel::Barycentric, &inst.mu, &inst.nu);
    let map: Vec<Value> = sol
        .map_graph
        .iter()
        .map(|(x, t)| json!([x.coords, t.coords]))
        .collect();
    let mut report = json!({
        "value": sol.value,
        "fw_gap": sol.fw_gap,
        "map": map,
        "eta_star": to_value(sol.eta_star.to_doc())?,
    });
    if common.emit_coupling {
        report["coupling"] = to_value(&sol.coupling.mass)?;
    }
    Ok((with_meta(report, &fingerprint), EXIT_OK))
}

fn cmd_rockafellar(
    inst: &Instance,
    common: &Common,
    lipschitz: f64,
    cycle_len: usize,
    trials: usize,
) -> Result<(Value, i32)> {
    let opts = solve_options(common);
    let tol = common.tol.unwrap_or(1e-6);
    let sol = crate::brenier_strassen::solve_v2(&inst.mu, &inst.nu, &opts)?;
    let verdict = crate::brenier_strassen::check_rockafellar_strassen(
        &sol.map_graph,
        lipschitz,
        cycle_len,
        trials,
        common.seed,
        tol,
    )?;
    let probe = crate::brenier_strassen::lipschitz_monotone_probe(&sol.map_graph)?;
    let fingerprint = instance_fingerprint(&CostModel::Barycentric, &inst.mu, &inst.nu);
    let passed = verdict.pairwise_ok && verdict.cycles_ok;
    let report = with_meta(
        json!({
            "passed": passed,
            "pairwise_ok": verdict.pairwise_ok,
            "worst_pair": to_value(&verdict.worst_pair)?,
            "cycles_ok": verdict.cycles_ok,
            "worst_cycle": to_value(&verdict.worst_cycle)?,
            "cycles_checked": verdict.cycles_checked,
            "lipschitz_constant": probe.lipschitz_constant,
            "monotonicity_defect": probe.monotonicity_defect,
            "single_valued": probe.single_valued,
        }),
        &fingerprint,
    );
    let code = if passed { EXIT_OK } else { EXIT_VERIFICATION };
    Ok((report, code))
}

fn monopoly_problem(inst: &Instance) -> Result<MonopolyProblem> {
    let theta = match (&inst.doc.theta, &inst.doc.cost) {
        (Some(theta), _) => theta.clone(),
        (None, Some(CostDoc::MonopolyIcx { theta })) => theta.clone(),
        _ => ThetaSpec::l1(),
    };
    MonopolyProblem::new(
        theta,
        inst.mu.clone(),
        inst.nu.clone(),
        inst.doc.grid.clone(),
    )
}

fn cmd_monopoly(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let prob = monopoly_problem(inst)?;
    let tol = common.tol.unwrap_or(1e-4);
    let opts = SolveOptions::default();
    let four = compare_four(&prob, tol, &opts)?;
    let (_, phi) = crate::monopoly::solve_form_iv(&prob)?;
    let fingerprint = tagged_fingerprint("monopoly", &inst.mu, &inst.nu);
    let report = with_meta(
        json!({
            "v1": four.v1,
            "v2": four.v2,
            "v3": four.v3,
            "v4": four.v4,
            "spread": four.spread,
            "passed": four.passed,
            "grid": prob.grid,
            "phi": phi,
        }),
        &fingerprint,
    );
    let code = if four.passed { EXIT_OK } else { EXIT_VERIFICATION };
    Ok((report, code))
}

fn cmd_kr_dual(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let grid = inst
        .doc
        .grid
        .clone()
        .unwrap_or_else(|| default_grid(&inst.mu, &inst.nu));
    let (value, phi) = solve_kr_dual(&inst.mu, &inst.nu, &grid)?;
    // The norm dual must agree with form i under the absolute-value cost.
    let prob = MonopolyProblem::new(
        ThetaSpec::l1(),
        inst.mu.clone(),
        inst.nu.clone(),
        Some(grid.clone()),
    )?;
    let v1 = solve_form_i(&prob, &SolveOptions::default())?;
    let tol = common.tol.unwrap_or(1e-5);
    let passed = (value - v1).abs() <= tol * (1.0 + v1.abs());
    let fingerprint = tagged_fingerprint("kr_dual", &inst.mu, &inst.nu);
    let report = with_meta(
        json!({
            "value": value,
            "form_i_value": v1,
            "passed": passed,
            "grid": grid,
            "phi": phi,
        }),
        &fingerprint,
    );
    let code = if passed { EXIT_OK } else { EXIT_VERIFICATION };
    Ok((report, code))
}

fn cmd_transfer(inst: &Instance, common: &Common) -> Result<(Value, i32)> {
    let model = require_model(inst)?;
    let opts = solve_options(common);
    let verdict = verify_transfer_representation(model, &inst.mu, &inst.nu, &opts)?;
    let fingerprint = instance_fingerprint(model, &inst.mu, &inst.nu);
    let report = with_meta(to_value(&verdict)?, &fingerprint);
    let code = if verdict.passed {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    };
    Ok((report, code))
}

fn cmd_stability(
    inst: &Instance,
    common: &Common,
    perturb: usize,
    scale: f64,
    lipschitz: f64,
) -> Result<(Value, i32)> {
    let model = require_model(inst)?;
    let opts = SolveOptions::default();
    let report = stability_probe(
        model,
        &inst.mu,
        &inst.nu,
        perturb,
        scale,
        lipschitz,
        common.seed,
        &opts,
    )?;
    let fingerprint = instance_fingerprint(model, &inst.mu, &inst.nu);
    Ok((with_meta(to_value(&report)?, &fingerprint), EXIT_OK))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_error_kinds() {
        assert_eq!(
            exit_code_for(&Error::schema("mu", "bad")),
            EXIT_INVALID
        );
        assert_eq!(
            exit_code_for(&Error::NonConvergence {
                what: "x",
                detail: String::new()
            }),
            EXIT_NON_CONVERGENCE
        );
    }
}
