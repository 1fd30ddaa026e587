//! Mode dispatch. Everything is computed in memory; files are written only
//! after every run succeeded.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use isp_core::experiments::{
    build_case, convergence_study, run_direct, run_inverse, InverseRun, ManufacturedCase,
    MeasurementSource, NoiseSettings, StudyOptions,
};
use isp_core::fem::CgOptions;
use isp_core::regularization::{generate_noisy, improvement_percent, l2_mean, residual_curve, select_from_curve, Parity};
use isp_core::{Mesh, TimeGrid};
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};
use crate::output::{fmt_float, fmt_opt, Csv};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct OutputFile {
    pub name: &'static str,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<OutputFile>,
    pub summary: Value,
}

/// Order-preserving map over independent runs on a few worker threads.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
}

struct Setup {
    case: ManufacturedCase,
    mesh: Mesh,
    grid: TimeGrid,
    opts: StudyOptions,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let case = build_case(cfg.experiment_id).map_err(|e| CliError::invalid("experiments", &e))?;
    let mesh = cfg
        .mesh
        .expect("resolved config has a mesh")
        .build()
        .map_err(|e| CliError::invalid("mesh", &e))?;
    let grid = TimeGrid::new(case.final_time(), cfg.n_time_steps.expect("resolved config has a step count"))
        .map_err(|e| CliError::invalid("rothe_inverse", &e))?;
    let opts = StudyOptions {
        cg: CgOptions {
            rel_tol: cfg.cg_rel_tol,
            max_iter: None,
        },
        omega_min: cfg.omega_min,
    };
    case.spec_with(&opts)
        .validate(&mesh, &grid)
        .map_err(|e| CliError::invalid("rothe_inverse", &e))?;
    Ok(Setup { case, mesh, grid, opts })
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    match cfg.mode {
        Mode::Direct => direct(&s),
        Mode::Inverse => inverse(cfg, &s),
        Mode::Convergence => convergence(cfg, &s),
        Mode::PolyfitAnalysis => polyfit_analysis(cfg, &s),
    }
}

fn coord_headers(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

fn direct(s: &Setup) -> Result<Outcome, CliError> {
    let (traj, errors) = run_direct(&s.case, &s.mesh, &s.grid, s.opts).map_err(|e| CliError::numerical("rothe_inverse", &e))?;
    let t = s.grid.final_time();
    let u = traj.states.last().expect("trajectory holds the initial state");
    let mut csv = Csv::new(&[coord_headers(s.mesh.dim()), &["u_exact", "u_num", "abs_err"]].concat());
    for (x, &v) in s.mesh.nodes().zip(u) {
        let exact = s.case.u(t, x);
        let mut row: Vec<String> = x.iter().map(|&c| fmt_float(c)).collect();
        row.extend([fmt_float(exact), fmt_float(v), fmt_float((exact - v).abs())]);
        csv.row(row);
    }
    Ok(Outcome {
        files: vec![OutputFile {
            name: "final_solution.csv",
            contents: csv.finish(),
        }],
        summary: json!({
            "e_max_u": errors.e_max_u,
            "cg_iterations": traj.cg_iterations.iter().sum::<usize>(),
        }),
    })
}

struct RunKey {
    epsilon: f64,
    seed: Option<u64>,
}

fn inverse(cfg: &RunConfig, s: &Setup) -> Result<Outcome, CliError> {
    let mut keys = Vec::new();
    for &epsilon in &cfg.epsilons {
        if epsilon == 0.0 {
            keys.push(RunKey { epsilon, seed: None });
        } else {
            keys.extend(cfg.seed_list().into_iter().map(|seed| RunKey {
                epsilon,
                seed: Some(seed),
            }));
        }
    }
    let results = par_map(&keys, |k| {
        let source = match k.seed {
            None => MeasurementSource::Exact,
            Some(seed) => MeasurementSource::Noisy(NoiseSettings {
                epsilon: k.epsilon,
                seed,
                samples: cfg.samples,
                degree: cfg.degree_choice(),
                parity: Parity::from(cfg.parity),
            }),
        };
        run_inverse(&s.case, &s.mesh, &s.grid, &source, s.opts)
    });

    let mut source_csv = Csv::new(&["epsilon", "seed", "degree", "t", "h_exact", "h_num", "abs_err"]);
    let mut fit_csv = Csv::new(&["epsilon", "seed", "degree", "t", "m_exact", "m_noisy", "p_fit", "p_fit_derivative"]);
    let mut final_csv = Csv::new(&[&["epsilon", "seed"], coord_headers(s.mesh.dim()), &["u_exact", "u_num", "abs_err"]].concat());
    let mut runs = Vec::new();
    let t_final = s.grid.final_time();
    for (k, res) in keys.iter().zip(results) {
        let run: InverseRun = res.map_err(|e| {
            let module = if matches!(e.root(), isp_core::Error::FitFailure(_)) {
                "measurement_reg"
            } else {
                "rothe_inverse"
            };
            CliError::numerical(module, &e)
        })?;
        let eps = fmt_float(k.epsilon);
        let seed = k.seed.map_or(String::new(), |s| s.to_string());
        let degree = run.regularized.as_ref().map(|r| r.fit.degree);
        let degree_s = degree.map_or(String::new(), |d| d.to_string());
        for ((&t, &h), err) in run.result.times.iter().zip(&run.result.h).zip(&run.errors.h_errors) {
            source_csv.row(vec![
                eps.clone(),
                seed.clone(),
                degree_s.clone(),
                fmt_float(t),
                fmt_float(s.case.exact_h.eval(t)),
                fmt_float(h),
                fmt_float(*err),
            ]);
        }
        if let Some(reg) = &run.regularized {
            for ((&t, &exact), &noisy) in reg.series.times.iter().zip(&reg.series.exact).zip(&reg.series.values) {
                fit_csv.row(vec![
                    eps.clone(),
                    seed.clone(),
                    degree_s.clone(),
                    fmt_float(t),
                    fmt_float(exact),
                    fmt_float(noisy),
                    fmt_float(reg.fit.eval(t)),
                    fmt_float(reg.fit.derivative(t)),
                ]);
            }
        }
        for (x, &v) in s.mesh.nodes().zip(&run.result.u_final) {
            let exact = s.case.u(t_final, x);
            let mut row = vec![eps.clone(), seed.clone()];
            row.extend(x.iter().map(|&c| fmt_float(c)));
            row.extend([fmt_float(exact), fmt_float(v), fmt_float((exact - v).abs())]);
            final_csv.row(row);
        }
        runs.push(json!({
            "epsilon": k.epsilon,
            "seed": k.seed,
            "degree": degree,
            "fit_residual": run.regularized.as_ref().map(|r| r.fit.residual),
            "e_max_u": run.errors.e_max_u,
            "e_max_h": run.errors.e_max_h,
            "max_measurement_residual": run.result.max_measurement_residual(),
            "cg_iterations": run.result.cg_iterations.iter().sum::<usize>(),
        }));
    }
    let max_of = |key: &str| runs.iter().filter_map(|r| r[key].as_f64()).fold(0.0, f64::max);
    let summary = json!({
        "max_measurement_residual": max_of("max_measurement_residual"),
        "e_max_u": max_of("e_max_u"),
        "e_max_h": max_of("e_max_h"),
        "runs": runs,
    });
    let mut files = vec![OutputFile {
        name: "source.csv",
        contents: source_csv.finish(),
    }];
    if !fit_csv.is_empty() {
        files.push(OutputFile {
            name: "polyfit.csv",
            contents: fit_csv.finish(),
        });
    }
    files.push(OutputFile {
        name: "final_solution.csv",
        contents: final_csv.finish(),
    });
    Ok(Outcome { files, summary })
}

fn convergence(cfg: &RunConfig, s: &Setup) -> Result<Outcome, CliError> {
    let taus: Vec<f64> = cfg
        .convergence_steps
        .iter()
        .map(|&n| s.case.final_time() / n as f64)
        .collect();
    let rows = convergence_study(&s.case, &taus, &s.mesh, s.opts).map_err(|e| CliError::numerical("experiments", &e))?;
    let mut csv = Csv::new(&["tau", "steps", "e_max_u", "e_max_h", "eoc_u", "eoc_h"]);
    for r in &rows {
        csv.row(vec![
            fmt_float(r.tau),
            r.steps.to_string(),
            fmt_float(r.e_max_u),
            fmt_float(r.e_max_h),
            fmt_opt(r.eoc_u),
            fmt_opt(r.eoc_h),
        ]);
    }
    let last = rows.last().expect("at least three rows");
    Ok(Outcome {
        files: vec![OutputFile {
            name: "convergence.csv",
            contents: csv.finish(),
        }],
        summary: json!({
            "max_measurement_residual": rows.iter().map(|r| r.max_measurement_residual).fold(0.0, f64::max),
            "e_max_u": rows.iter().map(|r| r.e_max_u).fold(0.0, f64::max),
            "e_max_h": rows.iter().map(|r| r.e_max_h).fold(0.0, f64::max),
            "eoc_u": last.eoc_u,
            "eoc_h": last.eoc_h,
        }),
    })
}

/// Residual curve E(d) per noise level, averaged over the seeds, with the
/// relative improvement and the degree picked by the threshold rule.
fn polyfit_analysis(cfg: &RunConfig, s: &Setup) -> Result<Outcome, CliError> {
    let parity = Parity::from(cfg.parity);
    let seeds = cfg.seed_list();
    let fail = |e: isp_core::Error| CliError::numerical("measurement_reg", &e);
    let mut csv = Csv::new(&["epsilon", "degree", "residual", "improvement_percent", "selected"]);
    let mut selected = Vec::new();
    for &epsilon in &cfg.epsilons {
        let mut mean: Vec<(usize, f64)> = Vec::new();
        let mut data_norm = 0.0;
        for &seed in &seeds {
            let series = generate_noisy(&s.case.measurement, s.case.final_time(), cfg.samples, epsilon, seed).map_err(fail)?;
            let curve = residual_curve(&series, parity, cfg.max_degree).map_err(fail)?;
            if mean.is_empty() {
                mean = curve.iter().map(|&(d, _)| (d, 0.0)).collect();
            }
            for (m, (_, e)) in mean.iter_mut().zip(curve) {
                m.1 += e / seeds.len() as f64;
            }
            data_norm += l2_mean(&series.values) / seeds.len() as f64;
        }
        let pick = select_from_curve(&mean, cfg.improvement_threshold_percent, data_norm);
        for (j, &(d, e)) in mean.iter().enumerate() {
            let r_im = if j == 0 { None } else { improvement_percent(mean[j - 1].1, e).ok() };
            csv.row(vec![
                fmt_float(epsilon),
                d.to_string(),
                fmt_float(e),
                fmt_opt(r_im),
                u8::from(d == pick).to_string(),
            ]);
        }
        selected.push(json!({ "epsilon": epsilon, "degree": pick }));
    }
    Ok(Outcome {
        files: vec![OutputFile {
            name: "polyfit.csv",
            contents: csv.finish(),
        }],
        summary: json!({ "seeds": seeds, "selected_degrees": selected }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..37).collect();
        assert_eq!(par_map(&items, |&i| i * i), items.iter().map(|i| i * i).collect::<Vec<_>>());
        assert!(par_map(&[] as &[u8], |&i| i).is_empty());
    }
}
