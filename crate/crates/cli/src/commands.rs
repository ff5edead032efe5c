use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cplp_core::bounds::{clustering_estimate, frustration, spectral_data, threshold_population, threshold_temperature_bound};
use cplp_core::classical::{check_support_condition, solve_classical, ClassicalInput, ClassicalInstance};
use cplp_core::operators::ComplexMatrixJson;
use cplp_core::passivity::{build_c_operator, check_theorem1, SdpSummary};
use cplp_core::scan::{chain_convergence, sweep, write_csv, write_json, ScanResult, GAUGE_NOTE};
use cplp_core::sdp::{solve_extraction, verify_certificate, ChoiMatrix, SdpSolution};
use cplp_core::{Error, HermitianOperator, Tolerances};
use serde::Serialize;
use serde_json::{json, Value};

use crate::input::{load_model, read_json, ChoiFile, ModelSource};
use crate::{exit, CliError};

const VERDICT_GAUGE: &str = "energies are in the Hamiltonian's own gauge; verdicts are invariant under H -> H + c";

fn emit(v: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Input(format!("cannot serialize output: {e}")))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Input(format!("cannot write output: {e}"))),
        _ => Ok(()),
    }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

pub fn solution_json(sol: &SdpSolution, state_energy: Option<f64>) -> Value {
    let mut v = json!({
        "primal_value": sol.primal_value,
        "dual_value": sol.dual_value,
        "gap": sol.gap,
        "slackness_residual": sol.slackness_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "choi": ComplexMatrixJson::from_matrix(sol.choi.matrix().matrix()),
    });
    if let Some(e) = state_energy {
        v["state_energy"] = json!(e);
        v["delta_e"] = json!(sol.primal_value - e);
    }
    v
}

pub fn check(model: &Path, tol: f64, with_sdp: bool) -> Result<u8, CliError> {
    let loaded = load_model(model)?;
    let tolerances = Tolerances::default();
    let c = build_c_operator(&loaded.state()?, &loaded.hamiltonian, &tolerances)?;
    let mut report = check_theorem1(&c, &tolerances)?;
    if with_sdp {
        let sol = solve_extraction(&c, tol)?;
        report.sdp = Some(SdpSummary::new(&sol, c.state_energy));
    }
    let out = merge(
        serde_json::to_value(&report).expect("report serializes"),
        json!({ "tolerances": tolerances, "gauge": VERDICT_GAUGE }),
    );
    emit(&out)?;
    Ok(if report.is_passive { exit::PASSIVE } else { exit::NON_PASSIVE })
}

pub fn extract(model: &Path, tol: f64, choi_out: Option<&Path>) -> Result<u8, CliError> {
    let loaded = load_model(model)?;
    let tolerances = Tolerances::default();
    let c = build_c_operator(&loaded.state()?, &loaded.hamiltonian, &tolerances)?;
    let sol = solve_extraction(&c, tol)?;
    let certificate = verify_certificate(&sol, &c, tol)?;
    if let Some(path) = choi_out {
        let file = ChoiFile {
            d_a: c.d_a,
            choi: ComplexMatrixJson::from_matrix(sol.choi.matrix().matrix()),
            dual_y: ComplexMatrixJson::from_matrix(sol.dual_y.matrix()),
        };
        let w = File::create(path).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(BufWriter::new(w), &file).map_err(|e| CliError::Input(e.to_string()))?;
    }
    let out = merge(solution_json(&sol, Some(c.state_energy)), json!({ "certificate": certificate, "tol": tol, "gauge": VERDICT_GAUGE }));
    emit(&out)?;
    Ok(exit::PASSIVE)
}

pub fn verify(model: &Path, choi: &Path, tol: f64) -> Result<u8, CliError> {
    let loaded = load_model(model)?;
    let c = build_c_operator(&loaded.state()?, &loaded.hamiltonian, &Tolerances::default())?;
    let saved: ChoiFile = read_json(choi)?;
    let choi = ChoiMatrix::new(HermitianOperator::new(saved.choi.to_matrix()?)?, saved.d_a)?;
    let dual = HermitianOperator::new(saved.dual_y.to_matrix()?)?;
    if choi.d_a() != c.d_a || dual.dim() != c.d_a {
        return Err(Error::DimensionMismatch { expected: c.d_a, found: choi.d_a() }.into());
    }
    let sol = SdpSolution::from_parts(choi, dual, &c.matrix);
    let report = verify_certificate(&sol, &c, tol)?;
    emit(&report)?;
    Ok(if report.pass { exit::PASSIVE } else { exit::NON_PASSIVE })
}

pub struct ScanArgs {
    pub model: PathBuf,
    pub param: String,
    pub grid: String,
    pub out: PathBuf,
    pub t_window: String,
    pub chain_lengths: Option<Vec<usize>>,
    pub jobs: Option<usize>,
}

fn parse_numbers(s: &str, expected: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("bad {what} `{s}`: {e}")))?;
    if parts.len() != expected || parts.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Input(format!("{what} must have {expected} colon-separated numbers, got `{s}`")));
    }
    Ok(parts)
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let p = parse_numbers(s, 3, "grid")?;
    let n = p[2];
    if n < 1.0 || n.fract() != 0.0 {
        return Err(CliError::Input(format!("grid size must be a positive integer, got {n}")));
    }
    let n = n as usize;
    if n == 1 {
        return Ok(vec![p[0]]);
    }
    Ok((0..n).map(|i| p[0] + (p[1] - p[0]) * i as f64 / (n - 1) as f64).collect())
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "scan".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn write_scan(result: &ScanResult, csv_path: &Path) -> Result<PathBuf, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", p.display()));
    write_csv(result, BufWriter::new(File::create(csv_path).map_err(|e| io(csv_path, e))?))?;
    let json_path = csv_path.with_extension("json");
    write_json(result, BufWriter::new(File::create(&json_path).map_err(|e| io(&json_path, e))?))?;
    Ok(json_path)
}

pub fn scan(args: &ScanArgs) -> Result<u8, CliError> {
    let loaded = load_model(&args.model)?;
    let family = loaded.family()?;
    let grid = parse_grid(&args.grid)?;
    let w = parse_numbers(&args.t_window, 2, "temperature window")?;
    let t_window = (w[0], w[1]);
    let tol = Tolerances::default();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Input(format!("cannot start workers: {e}")))?;

    let results: Vec<(Option<usize>, ScanResult)> = match &args.chain_lengths {
        None => vec![(None, pool.install(|| sweep(&family, &args.param, &grid, t_window, &tol)))],
        Some(ns) => {
            let ModelSource::Builtin(cplp_core::models::ModelSpec::Chain(spec)) = &loaded.spec.model else {
                return Err(CliError::Input("--chain-lengths needs a chain model".into()));
            };
            if args.param != "kappa" {
                return Err(CliError::Input("chain-length curves sweep `kappa`".into()));
            }
            let conv = pool.install(|| chain_convergence(spec.gamma, &grid, ns, t_window, &tol))?;
            let summary_path = sibling(&args.out, "_convergence", "json");
            let f = File::create(&summary_path).map_err(|e| CliError::Input(format!("cannot write {}: {e}", summary_path.display())))?;
            serde_json::to_writer_pretty(
                BufWriter::new(f),
                &json!({ "gamma": spec.gamma, "n_list": conv.n_list, "max_differences": conv.max_differences }),
            )
            .map_err(|e| CliError::Input(e.to_string()))?;
            conv.n_list.iter().copied().map(Some).zip(conv.curves).collect()
        }
    };

    let mut files = Vec::new();
    let (mut total, mut failed) = (0, 0);
    for (n, result) in &results {
        let csv_path = match n {
            Some(n) => sibling(&args.out, &format!("_n{n}"), "csv"),
            None => args.out.clone(),
        };
        let json_path = write_scan(result, &csv_path)?;
        total += result.points.len();
        failed += result.points.iter().filter(|p| p.error.is_some()).count();
        files.push(json!({ "chain_length": n, "csv": csv_path, "json": json_path }));
    }
    emit(&json!({ "files": files, "points": total, "failed_points": failed }))?;
    Ok(if failed == total { exit::INPUT } else { exit::PASSIVE })
}

pub fn bounds(model: &Path, seed: u64) -> Result<u8, CliError> {
    let loaded = load_model(model)?;
    let tol = Tolerances::default();
    let sd = spectral_data(&loaded.hamiltonian, loaded.space, &tol)?;
    let frus = match &loaded.decomposition {
        Some(d) => Some(frustration(&loaded.hamiltonian, &d.h_a, &d.h_b, &d.v, loaded.space, &tol)?),
        None => None,
    };
    let clustering = match &loaded.spec.state {
        Some(_) if loaded.space.dim() <= 1024 => Some(clustering_estimate(&loaded.state()?, seed)?),
        _ => None,
    };
    let mut out = json!({
        "gauge": GAUGE_NOTE,
        "energy_offset": sd.energy_offset,
        "energies": sd.energies,
        "ground_degenerate": sd.ground_degenerate,
        "ground_full_rank": sd.ground_full_rank,
        "frustration": frus,
        "frustration_chain_sides": frus.as_ref().map(|f| json!({
            "ratio": f.ratio,
            "one_minus_q0_max": f.one_minus_q0_max,
            "q0_min_term": f.q0_min_term,
            "holds": f.chain_holds,
        })),
        "clustering_lower_estimate": clustering,
        "seed": seed,
    });
    let population = threshold_population(&sd);
    let temperature = threshold_temperature_bound(&sd);
    match (population, temperature) {
        (Ok(p), Ok(t)) => {
            out["p_star_bound"] = json!(p);
            out["t_bound"] = json!(t);
            emit(&out)?;
            Ok(exit::PASSIVE)
        }
        (Err(e), _) | (_, Err(e)) => {
            let err = CliError::Core(e);
            out["error"] = json!(err.kind());
            out["message"] = json!(err.message());
            emit(&out)?;
            Ok(err.code())
        }
    }
}

pub fn classical(path: &Path) -> Result<u8, CliError> {
    let input: ClassicalInput = read_json(path)?;
    let inst = ClassicalInstance::from_input(input)?;
    let result = solve_classical(&inst);
    let support = check_support_condition(&inst);
    emit(&json!({ "result": result, "support_condition": support }))?;
    Ok(exit::PASSIVE)
}
