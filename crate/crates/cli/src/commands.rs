use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use gs_core::dynamics::{measurement_time, simulate, steady_state, Integrator, SimConfig};
use gs_core::eigen::{eig_symmetric, inf_norm};
use gs_core::ensemble::{certified_ensemble, random_drive};
use gs_core::graph::grounded_laplacian;
use gs_core::identifiability::check_conditions;
use gs_core::sequence::{generate_sequence, SequenceConfig, SequenceFile};
use gs_core::spectral::{
    fiedler_pair, semi_normalized_adjacency, verify_perron, PerronReport, SpectralResult,
};
use gs_core::tempo::{
    angle_between, identify_leaders, run_pipeline, write_tempo_csv, LeaderEstimateFile,
    PipelineConfig, PipelineDiagnostics,
};
use gs_core::{Graph, Partition};

use crate::files::{classify, load_graph, resolve_drive, write_json, write_with};
use crate::manifest::RunManifest;
use crate::{
    Command, Failure, GenArgs, GraphArgs, IdentifyArgs, OracleArgs, PipelineArgs, SimulateArgs,
};

/// Files read and written by one command.
#[derive(Default)]
struct Record {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

pub fn run(command: Command) -> Result<(), Failure> {
    let command = match command {
        Command::Replay(r) => {
            let mut recorded = RunManifest::read(&r.manifest)?.command;
            if let Some(dir) = r.out_dir {
                if let Some(out) = output_dir_mut(&mut recorded) {
                    *out = dir;
                }
            }
            info!("replaying {}", r.manifest.display());
            recorded
        }
        other => other,
    };

    let mut rec = Record::default();
    let result = match &command {
        Command::Gen(a) => gen(a, &mut rec),
        Command::Spectral(a) => spectral(a, &mut rec),
        Command::Check(a) => check(a, &mut rec),
        Command::Simulate(a) => simulate_cmd(a, &mut rec),
        Command::Identify(a) => identify(a, &mut rec),
        Command::Oracle(a) => oracle(a, &mut rec),
        Command::Pipeline(a) => pipeline(a, &mut rec),
        Command::Replay(_) => Err(Failure::Input("a manifest cannot record a replay".into())),
    };
    if !rec.outputs.is_empty() {
        let dir = output_dir_mut(&mut command.clone())
            .cloned()
            .unwrap_or_default();
        RunManifest::new(command, rec.inputs, rec.outputs).write(&dir)?;
    }
    result
}

fn output_dir_mut(c: &mut Command) -> Option<&mut PathBuf> {
    Some(match c {
        Command::Gen(a) => &mut a.output.out_dir,
        Command::Spectral(a) | Command::Check(a) => &mut a.output.out_dir,
        Command::Simulate(a) => &mut a.output.out_dir,
        Command::Identify(a) => &mut a.output.out_dir,
        Command::Oracle(a) => &mut a.output.out_dir,
        Command::Pipeline(a) => &mut a.output.out_dir,
        Command::Replay(_) => return None,
    })
}

fn graph_input(path: &Path, rec: &mut Record) -> Result<(Graph, Partition), Failure> {
    rec.inputs.push(path.to_path_buf());
    load_graph(path)
}

fn labels(ids: &[gs_core::NodeId]) -> Vec<usize> {
    ids.iter().map(|l| l.label()).collect()
}

fn gen(a: &GenArgs, rec: &mut Record) -> Result<(), Failure> {
    rec.inputs.push(a.config.clone());
    let cfg: SequenceConfig = crate::files::read_json(&a.config)?;
    let seq = generate_sequence(&cfg).map_err(classify)?;
    if seq.saturated {
        warn!(
            "sequence saturated after {} of {} elements: no follower pairs left to connect",
            seq.elements.len(),
            cfg.steps
        );
    }
    let dir = &a.output.out_dir;
    let file = SequenceFile::new(&cfg, &seq);
    rec.outputs.push(write_json(dir, "sequence.json", &file)?);
    for (k, g) in file.graphs.iter().enumerate() {
        rec.outputs
            .push(write_json(dir, &format!("graph_{:03}.json", k + 1), g)?);
    }
    println!(
        "wrote {} graphs to {}{}",
        file.graphs.len(),
        dir.display(),
        if seq.saturated { " (saturated)" } else { "" }
    );
    Ok(())
}

#[derive(Serialize)]
struct SpectralOutput {
    #[serde(flatten)]
    spectral: SpectralResult,
    perron: PerronReport,
}

fn spectral(a: &GraphArgs, rec: &mut Record) -> Result<(), Failure> {
    let (g, p) = graph_input(&a.graph, rec)?;
    let s = fiedler_pair(&grounded_laplacian(&g, &p).map_err(classify)?).map_err(classify)?;
    let adj = semi_normalized_adjacency(&g, &p, s.lambda_f).map_err(classify)?;
    let perron = verify_perron(&adj, &s.v_f_vector()).map_err(classify)?;
    println!(
        "lambda_F = {:.9}  |rho - 1| = {:.2e}  fixed-point residual = {:.2e}",
        s.lambda_f, perron.radius_error, perron.fixed_point_residual
    );
    let out = SpectralOutput {
        spectral: s,
        perron,
    };
    rec.outputs
        .push(write_json(&a.output.out_dir, "spectral.json", &out)?);
    Ok(())
}

fn check(a: &GraphArgs, rec: &mut Record) -> Result<(), Failure> {
    let (g, p) = graph_input(&a.graph, rec)?;
    let r = check_conditions(&g, &p).map_err(classify)?;
    rec.outputs
        .push(write_json(&a.output.out_dir, "report.json", &r)?);
    println!(
        "{}",
        serde_json::to_string_pretty(&r).expect("serializable")
    );

    let mut unmet = Vec::new();
    for (ok, what) in [
        (r.connected, "(i) connected"),
        (r.leaders_nonadjacent, "(ii) leaders non-adjacent"),
        (r.condition_iii_holds, "(iii) epsilon_d > 0"),
        (r.condition_iv_holds, "(iv) epsilon < epsilon_d / 4"),
        (r.separated, "leader/follower separation"),
    ] {
        if !ok {
            unmet.push(what);
        }
    }
    if unmet.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "not certified: {}",
            unmet.join(", ")
        )))
    }
}

fn lambda_max(g: &Graph, p: &Partition) -> Result<f64, Failure> {
    let l = grounded_laplacian(g, p).map_err(classify)?;
    Ok(eig_symmetric(&l.matrix)
        .map_err(classify)?
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max))
}

fn simulate_cmd(a: &SimulateArgs, rec: &mut Record) -> Result<(), Failure> {
    let (g, p) = graph_input(&a.graph, rec)?;
    let d = &a.drive;
    if let Some(i) = &d.inputs {
        rec.inputs.push(i.clone());
    }
    let (u, mut x0) = resolve_drive(&p, d.dim, d.seed, d.inputs.as_deref())?;
    if d.x0_steady {
        x0 = steady_state(&g, &p, &u).map_err(classify)?;
    }
    let t_final = match a.t_final {
        Some(t) => t,
        None => {
            let s =
                fiedler_pair(&grounded_laplacian(&g, &p).map_err(classify)?).map_err(classify)?;
            measurement_time(s.lambda_f, s.spectrum.get(1).copied().unwrap_or(s.lambda_f)).time
        }
    };
    let integrator: Integrator = d.integrator.into();
    let dt = match a.dt {
        Some(dt) => dt,
        None if integrator == Integrator::Rk4 => (t_final / 1000.0).min(0.1 / lambda_max(&g, &p)?),
        None => t_final / 1000.0,
    };
    let cfg = SimConfig {
        dim: d.dim,
        dt,
        t_final,
        record_every: a.record_every,
        integrator,
    };
    let traj = simulate(&g, &p, &u, &x0, &cfg).map_err(classify)?;
    rec.outputs
        .push(write_with(&a.output.out_dir, "trajectory.csv", |w| {
            traj.write_csv(w)
        })?);
    println!(
        "simulated {} samples to t = {}; dominance ratio at end {:.3e}",
        traj.times.len(),
        traj.t_final(),
        traj.modal.dominance_ratio(traj.t_final())
    );
    Ok(())
}

fn identify(a: &IdentifyArgs, rec: &mut Record) -> Result<(), Failure> {
    let (g, p) = graph_input(&a.graph, rec)?;
    let d = &a.drive;
    if let Some(i) = &d.inputs {
        rec.inputs.push(i.clone());
    }
    let (u, mut x0) = resolve_drive(&p, d.dim, d.seed, d.inputs.as_deref())?;
    if d.x0_steady {
        x0 = steady_state(&g, &p, &u).map_err(classify)?;
    }
    let cfg = PipelineConfig {
        integrator: d.integrator.into(),
        dt: a.dt,
        record_points: a.record_points,
        measurement_time: a.t_final,
    };
    let out = run_pipeline(&g, &p, &u, &x0, &cfg).map_err(classify)?;
    let dir = &a.output.out_dir;
    let estimate = LeaderEstimateFile::from(&out.estimate);
    rec.outputs
        .push(write_json(dir, "estimate.json", &estimate)?);
    rec.outputs
        .push(write_json(dir, "diagnostics.json", &out.diagnostics)?);
    rec.outputs.push(write_with(dir, "trajectory.csv", |w| {
        out.trajectory.write_csv(w)
    })?);
    rec.outputs.push(write_with(dir, "tempo.csv", |w| {
        write_tempo_csv(&out.trajectory, out.tempo.reference, w)
    })?);
    println!(
        "leaders {:?} (gap {:.4e} at t = {:.3}, angle to v_F {:.2e} rad)",
        estimate.leaders,
        estimate.gap_size,
        out.diagnostics.measurement_time,
        out.diagnostics.fiedler_angle
    );
    if out.diagnostics.recovered {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "estimated leaders {:?} differ from the graph's leaders {:?}",
            estimate.leaders, out.diagnostics.true_leaders
        )))
    }
}

#[derive(Serialize)]
struct OracleCheck {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct OracleReport {
    tampered: bool,
    checks: Vec<OracleCheck>,
    /// 1-based.
    leaders_from_true_vector: Vec<usize>,
    leaders_from_pipeline: Vec<usize>,
}

fn oracle(a: &OracleArgs, rec: &mut Record) -> Result<(), Failure> {
    let (g, p) = graph_input(&a.graph, rec)?;
    let l = grounded_laplacian(&g, &p).map_err(classify)?;
    let s = fiedler_pair(&l).map_err(classify)?;
    let full = eig_symmetric(&l.matrix).map_err(classify)?;
    let reference = l.matrix.clone().symmetric_eigen();
    let mut ref_values: Vec<f64> = reference.eigenvalues.iter().copied().collect();
    ref_values.sort_by(f64::total_cmp);
    let k = reference.eigenvalues.imin();
    let ref_vector: DVector<f64> = reference.eigenvectors.column(k).into_owned();

    let mut v_f = s.v_f_vector();
    if a.tamper {
        let (lo, hi) = (v_f.imin(), v_f.imax());
        v_f.swap_rows(lo, hi);
        v_f[0] += 1e-3;
        warn!(
            "Fiedler vector tampered: entries {} and {} swapped",
            lo + 1,
            hi + 1
        );
    }

    let norm = inf_norm(&l.matrix).max(1.0);
    let spectrum_gap = full
        .eigenvalues
        .iter()
        .zip(&ref_values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let adj = semi_normalized_adjacency(&g, &p, s.lambda_f).map_err(classify)?;
    let perron = verify_perron(&adj, &v_f).map_err(classify)?;

    let (u, x0) = random_drive(&p, 2, 1.0, a.seed).map_err(classify)?;
    let out = run_pipeline(&g, &p, &u, &x0, &PipelineConfig::default()).map_err(classify)?;
    let from_true = identify_leaders(v_f.as_slice()).map_err(classify)?;

    let mut checks = Vec::new();
    let mut add = |name, value: f64, tolerance| {
        checks.push(OracleCheck {
            name,
            value,
            tolerance,
            pass: value <= tolerance,
        })
    };
    add(
        "lambda_F vs full spectrum",
        (s.lambda_f - full.eigenvalues[0]).abs(),
        1e-12 * norm,
    );
    add(
        "lambda_F vs reference solver",
        (s.lambda_f - ref_values[0]).abs(),
        1e-9,
    );
    add("spectrum vs reference solver", spectrum_gap, 1e-9 * norm);
    add(
        "eigenvector residual",
        (&l.matrix * &v_f - &v_f * s.lambda_f).amax(),
        1e-10 * norm,
    );
    let unsigned = angle_between(&v_f, &ref_vector).min(angle_between(&v_f, &-&ref_vector));
    add("angle to reference eigenvector", unsigned, 1e-8);
    add(
        "Perron fixed-point residual",
        perron.fixed_point_residual,
        1e-8,
    );
    add(
        "pipeline estimate angle",
        angle_between(&out.fiedler_estimate, &v_f),
        1e-3,
    );
    let agree = from_true.leader_set == out.estimate.leader_set;
    add("leader sets disagree", if agree { 0.0 } else { 1.0 }, 0.0);

    let report = OracleReport {
        tampered: a.tamper,
        leaders_from_true_vector: labels(&from_true.leader_set),
        leaders_from_pipeline: labels(&out.estimate.leader_set),
        checks,
    };
    for c in &report.checks {
        println!(
            "{} {:<32} {:.3e} (tol {:.1e})",
            if c.pass { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    rec.outputs
        .push(write_json(&a.output.out_dir, "oracle.json", &report)?);
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "oracle mismatch: {}",
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct PipelineRow {
    source: String,
    n: usize,
    true_leaders: Vec<usize>,
    leaders: Option<Vec<usize>>,
    recovered: bool,
    diagnostics: Option<PipelineDiagnostics>,
    error: Option<String>,
}

#[derive(Serialize)]
struct PipelineSummary {
    total: usize,
    recovered: usize,
    instances: Vec<PipelineRow>,
}

fn pipeline(a: &PipelineArgs, rec: &mut Record) -> Result<(), Failure> {
    let mut instances = Vec::new();
    if a.graphs.is_empty() {
        for c in certified_ensemble(a.seed, a.count).map_err(classify)? {
            let name = format!("certified seed {} element {}", c.instance.seed, c.element);
            instances.push((name, c.instance.graph, c.instance.partition));
        }
    } else {
        for path in &a.graphs {
            let (g, p) = graph_input(path, rec)?;
            instances.push((path.display().to_string(), g, p));
        }
    }
    let cfg = PipelineConfig {
        integrator: a.integrator.into(),
        ..PipelineConfig::default()
    };
    let one = |(k, (name, g, p)): (usize, &(String, Graph, Partition))| {
        let result = random_drive(p, a.dim, 1.0, a.seed.wrapping_add(k as u64))
            .and_then(|(u, x0)| run_pipeline(g, p, &u, &x0, &cfg));
        let mut row = PipelineRow {
            source: name.clone(),
            n: g.n(),
            true_leaders: labels(p.leaders()),
            leaders: None,
            recovered: false,
            diagnostics: None,
            error: None,
        };
        match result {
            Ok(out) => {
                row.leaders = Some(labels(&out.estimate.leader_set));
                row.recovered = out.diagnostics.recovered;
                row.diagnostics = Some(out.diagnostics);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Failure::Input(e.to_string()))?;
    let rows: Vec<PipelineRow> =
        pool.install(|| instances.par_iter().enumerate().map(one).collect());

    let summary = PipelineSummary {
        total: rows.len(),
        recovered: rows.iter().filter(|r| r.recovered).count(),
        instances: rows,
    };
    for r in &summary.instances {
        match (&r.leaders, &r.error) {
            (Some(l), _) => println!(
                "{} {}: leaders {:?}",
                if r.recovered { "ok  " } else { "MISS" },
                r.source,
                l
            ),
            (None, Some(e)) => println!("ERR  {}: {e}", r.source),
            (None, None) => {}
        }
    }
    println!("recovered {}/{}", summary.recovered, summary.total);
    rec.outputs
        .push(write_json(&a.output.out_dir, "pipeline.json", &summary)?);
    if summary.recovered == summary.total {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "{} of {} instances not recovered",
            summary.total - summary.recovered,
            summary.total
        )))
    }
}
