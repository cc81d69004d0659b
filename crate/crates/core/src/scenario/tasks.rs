//! Task runners: one computation each, rendered both as files and as a
//! plain-text summary built from the same table cells.

use std::path::{Path, PathBuf};

use crate::analysis::{
    find_equilibria, find_limit_cycle, first_integral_drift, interior_equilibrium, time_averages,
    verify_disturbance_law, DisturbanceOptions, EquilibriumReport, LimitCycleOptions, LimitCycleOutcome,
};
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::Model;

use super::config::{
    AveragesTask, DanconaTask, EquilibriaTask, HarvestLawTask, LimitCycleTask, ScenarioConfig, TaskConfig, TaskKind,
};
use super::csv::{format_number, trajectory_csv, write_file, Cell, Table};
use super::dancona::{run_dancona, DAnconaScenario};
use super::svg::{phase_plot, render_plot_svg, time_series_plot, Plot, Series, Style};
use super::ScenarioError;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutput {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Outputs<'a> {
    dir: &'a Path,
    svg: bool,
    files: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn csv(&mut self, name: &str, table: &Table) -> Result<(), ScenarioError> {
        self.text(name, &table.render())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), ScenarioError> {
        let path = self.dir.join(name);
        write_file(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn plot(&mut self, name: &str, plot: &Plot) -> Result<(), ScenarioError> {
        if !self.svg {
            return Ok(());
        }
        let path = self.dir.join(name);
        render_plot_svg(plot, &path)?;
        self.files.push(path);
        Ok(())
    }
}

/// Column-aligned rendering of `table`, cells exactly as in the CSV.
pub fn aligned(table: &Table) -> String {
    let cells: Vec<Vec<String>> = std::iter::once(table.header.clone())
        .chain(table.rows.iter().map(|r| r.iter().map(Cell::render).collect()))
        .collect();
    let ncol = table.header.len();
    let widths: Vec<usize> = (0..ncol).map(|j| cells.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Runs `kind` on `config`, writing outputs into `out_dir` (created if needed).
pub fn run_task(config: &ScenarioConfig, kind: TaskKind, out_dir: &Path) -> Result<TaskOutput, ScenarioError> {
    config.validate()?;
    let task = config.task_for(kind)?;
    let model = config.model.build()?;
    let integrator = config.integrator.to_config();
    integrator.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| ScenarioError::Io { path: out_dir.to_path_buf(), source })?;
    let mut out = Outputs { dir: out_dir, svg: config.output.svg, files: Vec::new() };
    let summary = match &task {
        TaskConfig::Simulate {} => simulate(&model, &integrator, config.integrator.t_span, &mut out)?,
        TaskConfig::Equilibria(EquilibriaTask { guesses }) => equilibria(&model, guesses.as_deref(), &mut out)?,
        TaskConfig::Averages(AveragesTask { n_periods }) => averages(&model, &integrator, *n_periods, &mut out)?,
        TaskConfig::HarvestLaw(HarvestLawTask { alpha, beta, efforts, n_periods }) => {
            let p = config.model.lv_params().expect("validated");
            let ic = model.initial_state();
            let options =
                DisturbanceOptions { initial_state: [ic[0], ic[1]], n_periods: *n_periods, config: integrator };
            let table = verify_disturbance_law(&p, *alpha, *beta, efforts, &options)?;
            harvest_law(&model, &table, &mut out)?
        }
        TaskConfig::LimitCycle(LimitCycleTask { initial_states, transient }) => {
            let options = LimitCycleOptions { transient: *transient, ..LimitCycleOptions::default() };
            limit_cycle(&model, &integrator, initial_states.as_deref(), &options, config.integrator.t_span, &mut out)?
        }
        TaskConfig::Dancona(DanconaTask { alpha, beta, pre_war, war, post_war, periods_per_phase }) => {
            let ic = model.initial_state();
            let scenario = DAnconaScenario {
                params: config.model.lv_params().expect("validated"),
                alpha: *alpha,
                beta: *beta,
                pre_war: *pre_war,
                war: *war,
                post_war: *post_war,
                periods_per_phase: *periods_per_phase,
                initial_state: [ic[0], ic[1]],
                config: integrator,
            };
            dancona(&scenario, &mut out)?
        }
    };
    Ok(TaskOutput { summary, files: out.files })
}

fn simulate(model: &Model, cfg: &IntegratorConfig, span: [f64; 2], out: &mut Outputs) -> Result<String, ScenarioError> {
    let traj = integrate(model, cfg, span[0], span[1], &model.initial_state())?;
    let names = model.names();
    out.text("trajectory.csv", &trajectory_csv(&traj, &names))?;
    let columns: Vec<(String, Vec<f64>)> = names.iter().enumerate().map(|(j, n)| (n.clone(), traj.column(j))).collect();
    out.plot("timeseries.svg", &time_series_plot("Population densities", traj.times(), &columns))?;
    if names.len() >= 2 {
        out.plot("phase.svg", &phase_plot("Phase plane", &names[0], &names[1], &columns[0].1, &columns[1].1))?;
    }

    let mut table = Table::new(["species", "initial", "final", "min", "max"]);
    for (j, (name, col)) in columns.iter().enumerate() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        table.push(vec![
            name.as_str().into(),
            traj.state(0)[j].into(),
            traj.final_state()[j].into(),
            lo.into(),
            hi.into(),
        ]);
    }
    let mut summary = format!(
        "simulated t = {} .. {} ({} samples)\n",
        format_number(traj.times()[0]),
        format_number(traj.final_time()),
        traj.len()
    );
    summary.push_str(&aligned(&table));
    if let Some((p, [0.0, 0.0])) = model.as_lotka_volterra() {
        if traj.states().all(|s| s.iter().all(|&v| v > 0.0)) {
            let drift = first_integral_drift(&p, &traj)?;
            summary.push_str(&format!("first integral relative drift: {}\n", format_number(drift)));
        }
    }
    Ok(summary)
}

fn default_guesses(model: &Model) -> Vec<Vec<f64>> {
    let base: Vec<f64> = model.initial_state().iter().map(|&v| v.max(1.0)).collect();
    let scales = [0.0, 0.5, 1.0, 2.0, 5.0];
    let dim = model.dim();
    let mut guesses = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        guesses.push(idx.iter().zip(&base).map(|(&k, &b)| scales[k] * b).collect());
        let mut j = 0;
        loop {
            if j == dim {
                return guesses;
            }
            idx[j] += 1;
            if idx[j] < scales.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn equilibrium_table(model: &Model, found: &[EquilibriumReport]) -> Table {
    let dim = model.dim();
    let mut header = model.names();
    for k in 1..=dim {
        header.push(format!("eig{k}_re"));
        header.push(format!("eig{k}_im"));
    }
    header.push("classification".into());
    let mut table = Table::new(header);
    for rep in found {
        let mut row: Vec<Cell> = rep.point.iter().map(|&v| v.into()).collect();
        for e in &rep.eigenvalues {
            row.push(e.re.into());
            row.push(e.im.into());
        }
        row.push(rep.classification.to_string().into());
        table.push(row);
    }
    table
}

fn equilibria(model: &Model, guesses: Option<&[Vec<f64>]>, out: &mut Outputs) -> Result<String, ScenarioError> {
    let explicit = guesses.is_some();
    let guesses = guesses.map_or_else(|| default_guesses(model), <[_]>::to_vec);
    let search = find_equilibria(model, &guesses);
    let mut found = search.found;
    found.sort_by(|a, b| {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if found.is_empty() {
        let why = search.failures.first().map_or_else(|| "no guesses".to_string(), |(i, e)| format!("guess {i}: {e}"));
        return Err(ScenarioError::Check(format!("no equilibrium found ({why})")));
    }
    let table = equilibrium_table(model, &found);
    out.csv("equilibria.csv", &table)?;
    let mut summary = format!("{} equilibria\n", found.len());
    summary.push_str(&aligned(&table));
    let degenerate = found.iter().filter(|r| r.eigenvalues.iter().any(|e| e.norm() <= 1e-9)).count();
    if degenerate > 0 {
        summary.push_str(&format!(
            "{degenerate} with a zero eigenvalue: the equilibrium may not be isolated (a curve of equilibria)\n"
        ));
    }
    if explicit {
        for (i, e) in &search.failures {
            summary.push_str(&format!("guess {i} failed: {e}\n"));
        }
    }
    Ok(summary)
}

fn averages(
    model: &Model,
    cfg: &IntegratorConfig,
    n_periods: usize,
    out: &mut Outputs,
) -> Result<String, ScenarioError> {
    let report = time_averages(model, cfg, &model.initial_state(), n_periods)?;
    let abs = report.abs_discrepancy();
    let rel = report.rel_discrepancy();
    let mut table =
        Table::new(["species", "period", "n_periods", "mean", "predicted", "abs_discrepancy", "rel_discrepancy"]);
    for (j, name) in model.names().into_iter().enumerate() {
        table.push(vec![
            name.into(),
            report.period.into(),
            report.n_periods.into(),
            report.means[j].into(),
            report.predicted.as_ref().map(|p| p[j]).into(),
            abs.as_ref().map(|a| a[j]).into(),
            rel.as_ref().map(|r| r[j]).into(),
        ]);
    }
    out.csv("averages.csv", &table)?;
    let mut summary = format!(
        "time averages over {} periods, t = {} .. {}\n",
        report.n_periods,
        format_number(report.start_time),
        format_number(report.end_time)
    );
    summary.push_str(&aligned(&table));
    Ok(summary)
}

fn harvest_law(
    model: &Model,
    table: &crate::analysis::DisturbanceTable,
    out: &mut Outputs,
) -> Result<String, ScenarioError> {
    let names = model.names();
    let mut header = vec!["effort".to_string()];
    for what in ["mean", "predicted", "abs_discrepancy", "rel_discrepancy"] {
        for n in &names {
            header.push(format!("{n}_{what}"));
        }
    }
    header.push("period".into());
    let mut csv = Table::new(header);
    for r in &table.rows {
        let mut row: Vec<Cell> = vec![r.effort.into()];
        for pair in [r.simulated, r.predicted, r.abs_discrepancy, r.rel_discrepancy] {
            row.extend(pair.iter().map(|&v| Cell::from(v)));
        }
        row.push(r.period.into());
        csv.push(row);
    }
    out.csv("harvest_law.csv", &csv)?;

    let efforts: Vec<f64> = table.rows.iter().map(|r| r.effort).collect();
    if efforts.len() >= 2 {
        let mut plot = Plot::new("Mean densities under harvesting", "effort", "mean density");
        for (j, n) in names.iter().enumerate() {
            let sim = efforts.iter().zip(&table.rows).map(|(&e, r)| (e, r.simulated[j])).collect();
            let pred = efforts.iter().zip(&table.rows).map(|(&e, r)| (e, r.predicted[j])).collect();
            plot = plot
                .with(Series::new(format!("{n} simulated"), sim).styled(Style::Markers))
                .with(Series::new(format!("{n} predicted"), pred).styled(Style::Dashed));
        }
        out.plot("harvest_law.svg", &plot)?;
    }

    let mut summary = format!("disturbance of the averages, {} efforts\n", table.rows.len());
    summary.push_str(&aligned(&csv));
    let verdict = |b: bool| if b { "yes" } else { "no" };
    summary.push_str(&format!(
        "prey mean rises and predator mean falls with effort: simulated {}, predicted {}\n",
        verdict(table.simulated_monotone),
        verdict(table.predicted_monotone)
    ));
    Ok(summary)
}

fn limit_cycle(
    model: &Model,
    cfg: &IntegratorConfig,
    initial_states: Option<&[Vec<f64>]>,
    options: &LimitCycleOptions,
    span: [f64; 2],
    out: &mut Outputs,
) -> Result<String, ScenarioError> {
    let ics = match initial_states {
        Some(list) => list.to_vec(),
        None => {
            let eq = interior_equilibrium(model, &model.initial_state())?;
            [0.5, 1.25, 2.0].iter().map(|s| eq.iter().map(|v| v * s).collect()).collect()
        }
    };
    let names = model.names();
    match find_limit_cycle(model, cfg, &ics, options)? {
        LimitCycleOutcome::StableFocus { equilibrium } => {
            let mut header = vec!["outcome".to_string()];
            header.extend(names.iter().map(|n| format!("equilibrium_{n}")));
            for k in 1..=names.len() {
                header.push(format!("eig{k}_re"));
                header.push(format!("eig{k}_im"));
            }
            let mut table = Table::new(header);
            let mut row: Vec<Cell> = vec!["stable_focus".into()];
            row.extend(equilibrium.point.iter().map(|&v| Cell::from(v)));
            for e in &equilibrium.eigenvalues {
                row.push(e.re.into());
                row.push(e.im.into());
            }
            table.push(row);
            out.csv("limit_cycle.csv", &table)?;
            if out.svg {
                let traj = integrate(model, cfg, span[0], span[1], &ics[0])?;
                let plot = phase_plot(
                    "Trajectory into the equilibrium",
                    &names[0],
                    &names[1],
                    &traj.column(0),
                    &traj.column(1),
                )
                .with(
                    Series::new("equilibrium", vec![(equilibrium.point[0], equilibrium.point[1])])
                        .styled(Style::Markers),
                );
                out.plot("cycle.svg", &plot)?;
            }
            let mut summary = String::from("stable focus, no cycle\n");
            summary.push_str(&aligned(&table));
            Ok(summary)
        }
        LimitCycleOutcome::Cycle(report) => {
            let mut header = vec!["run".to_string()];
            header.extend(names.iter().map(|n| format!("initial_{n}")));
            header.extend(["returns".to_string(), "last_return_delta".to_string()]);
            header.extend(names.iter().map(|n| format!("return_{n}")));
            header.push("period".into());
            for n in &names {
                header.push(format!("min_{n}"));
                header.push(format!("max_{n}"));
            }
            let mut table = Table::new(header);
            for (i, run) in report.runs.iter().enumerate() {
                let mut row: Vec<Cell> = vec![i.into()];
                row.extend(run.initial_state.iter().map(|&v| Cell::from(v)));
                row.push(run.returns.into());
                row.push(run.last_return_delta.into());
                row.extend(run.fixed_point.iter().map(|&v| Cell::from(v)));
                row.push(run.period.into());
                for &(lo, hi) in &run.extremes {
                    row.push(lo.into());
                    row.push(hi.into());
                }
                table.push(row);
            }
            out.csv("limit_cycle.csv", &table)?;
            if out.svg {
                let traj = integrate(model, cfg, 0.0, report.period, &report.fixed_point)?;
                let plot = phase_plot("Limit cycle", &names[0], &names[1], &traj.column(0), &traj.column(1)).with(
                    Series::new("equilibrium", vec![(report.equilibrium[0], report.equilibrium[1])])
                        .styled(Style::Markers),
                );
                out.plot("cycle.svg", &plot)?;
            }
            let mut summary = format!("limit cycle, period {}\n", format_number(report.period));
            for (n, (lo, hi)) in names.iter().zip(&report.extremes) {
                summary.push_str(&format!("{n} range {} .. {}\n", format_number(*lo), format_number(*hi)));
            }
            summary.push_str(&aligned(&table));
            Ok(summary)
        }
    }
}

fn dancona(scenario: &DAnconaScenario, out: &mut Outputs) -> Result<String, ScenarioError> {
    let phases = run_dancona(scenario)?;
    let mut table = Table::new([
        "phase",
        "effort",
        "prey_mean",
        "predator_mean",
        "prey_predicted",
        "predator_predicted",
        "predator_percent",
        "predicted_percent",
        "period",
    ]);
    for r in &phases.rows {
        table.push(vec![
            r.phase.name().into(),
            r.effort.into(),
            r.means.simulated[0].into(),
            r.means.simulated[1].into(),
            r.means.predicted[0].into(),
            r.means.predicted[1].into(),
            r.predator_percent.into(),
            r.predicted_percent.into(),
            r.means.period.into(),
        ]);
    }
    out.csv("dancona.csv", &table)?;
    let xs = [1.0, 2.0, 3.0];
    let simulated = xs.iter().zip(&phases.rows).map(|(&x, r)| (x, r.predator_percent)).collect();
    let predicted = xs.iter().zip(&phases.rows).map(|(&x, r)| (x, r.predicted_percent)).collect();
    let plot = Plot::new("Predator share by phase (1 pre-war, 2 war, 3 post-war)", "phase", "predator percent")
        .with(Series::new("simulated", simulated).styled(Style::Markers))
        .with(Series::new("predicted", predicted).styled(Style::Dashed));
    out.plot("dancona.svg", &plot)?;

    let war_is_lower = scenario.war < scenario.pre_war.min(scenario.post_war);
    if war_is_lower && !phases.war_increase_holds {
        return Err(ScenarioError::Check("war-time predator share is not above both peace-time shares".into()));
    }
    let mut summary = String::from("predator share of the catch by phase\n");
    summary.push_str(&aligned(&table));
    summary.push_str(if phases.war_increase_holds {
        "war-time predator share exceeds both peace phases\n"
    } else {
        "equal efforts: predator share unchanged\n"
    });
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets::load_preset;

    fn run(preset: &str, kind: TaskKind) -> (TaskOutput, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = load_preset(preset).unwrap();
        (run_task(&cfg, kind, dir.path()).unwrap(), dir)
    }

    fn read(dir: &tempfile::TempDir, name: &str) -> String {
        std::fs::read_to_string(dir.path().join(name)).unwrap()
    }

    #[test]
    fn averages_summary_matches_csv() {
        let (out, dir) = run("lv-default", TaskKind::Averages);
        let csv = read(&dir, "averages.csv");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "species,period,n_periods,mean,predicted,abs_discrepancy,rel_discrepancy");
        assert_eq!(lines.len(), 3);
        for line in &lines[1..] {
            let cells: Vec<&str> = line.split(',').collect();
            let mean: f64 = cells[3].parse().unwrap();
            let predicted: f64 = cells[4].parse().unwrap();
            assert!((mean - predicted).abs() < 1e-3, "{line}");
            for c in &cells[1..] {
                assert!(out.summary.contains(c), "summary lacks {c}");
            }
        }
        assert!(lines[1].starts_with("prey,") && lines[1].contains(",3,"));
        assert!(lines[2].contains(",2,"));
    }

    #[test]
    fn simulate_writes_three_files_deterministically() {
        let (a, da) = run("chain-default", TaskKind::Simulate);
        let (b, db) = run("chain-default", TaskKind::Simulate);
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.files.len(), 3);
        for name in ["trajectory.csv", "timeseries.svg", "phase.svg"] {
            assert_eq!(read(&da, name), read(&db, name), "{name}");
        }
        assert!(read(&da, "trajectory.csv").starts_with("t,basal,middle,top\n"));
    }

    #[test]
    fn stable_focus_summary() {
        let (out, dir) = run("rm-stable", TaskKind::LimitCycle);
        assert!(out.summary.starts_with("stable focus, no cycle"));
        assert!(read(&dir, "limit_cycle.csv").contains("stable_focus,1,"));
    }

    #[test]
    fn equilibria_of_lv_preset() {
        let (out, dir) = run("lv-default", TaskKind::Equilibria);
        let csv = read(&dir, "equilibria.csv");
        assert_eq!(csv.lines().next().unwrap(), "prey,predator,eig1_re,eig1_im,eig2_re,eig2_im,classification");
        // origin (saddle) and the centre (3, 2)
        assert!(csv.contains("\n0,0,-0.75,0,1,0,unstable\n"), "{csv}");
        assert!(csv.contains("\n3,2,"), "{csv}");
        assert!(csv.contains("center_marginal"));
        assert!(out.summary.starts_with("2 equilibria"));
    }

    #[test]
    fn dancona_preset() {
        let (out, dir) = run("dancona-default", TaskKind::Dancona);
        let csv = read(&dir, "dancona.csv");
        assert_eq!(csv.lines().count(), 4);
        assert!(out.summary.contains("exceeds both peace phases"));
        assert!(csv.contains("war,0.05,"));
    }

    #[test]
    fn harvest_law_default_efforts() {
        let (out, dir) = run("lv-default", TaskKind::HarvestLaw);
        let csv = read(&dir, "harvest_law.csv");
        assert_eq!(csv.lines().count(), 5);
        assert!(out.summary.contains("simulated yes, predicted yes"));
        assert!(dir.path().join("harvest_law.svg").exists());
    }

    #[test]
    fn wrong_model_for_task_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = load_preset("rm-cycle").unwrap();
        let err = run_task(&cfg, TaskKind::HarvestLaw, dir.path()).unwrap_err();
        assert!(matches!(err, ScenarioError::Config(_)));
        assert!(!err.is_numerical());
    }

    #[test]
    fn default_guess_grid() {
        let m = crate::model::make_verhulst(1.0, 2.0, 0.5).unwrap();
        assert_eq!(default_guesses(&m), vec![vec![0.0], vec![0.5], vec![1.0], vec![2.0], vec![5.0]]);
    }
}
