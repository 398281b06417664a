use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lithos::harness::twin::{build_observer, build_plant, output_dir, plant_csv};
use lithos::harness::{twin_experiment_to_dir, CorruptionSpec, TwinConfig};
use lithos::ident::{
    analyze, fit, one_c_profile, parse_param_list, sensitivity_matrix, Analysis, DifferentialEvolution, FitData,
    FitWeights, ModelSetup, ParamId, ParameterVector, Scheme, SensitivityConfig, SubsetConfig,
};
use lithos::observer::{self, run_observer, Measurement, ASSUMED_INITIAL_ERROR};
use lithos::{DriveCycle, Execution, OcpTable, ParameterSet};
use serde::Serialize;

use crate::{
    CliError, CliResult, IdentifyArgs, ObserveArgs, Output, ProfileArgs, SensitivityArgs, SimulateArgs, TwinArgs,
    ValidateGainsArgs,
};

fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "nan".into()
    }
}

/// Flat `key = value` lines, written to `summary.txt` and echoed on stdout.
#[derive(Default)]
struct Summary(Vec<(String, String)>);

impl Summary {
    fn num(&mut self, k: impl Into<String>, v: f64) -> &mut Self {
        self.0.push((k.into(), sig12(v)));
        self
    }

    fn text(&mut self, k: impl Into<String>, v: impl ToString) -> &mut Self {
        self.0.push((k.into(), v.to_string()));
        self
    }

    fn render(&self) -> String {
        self.0.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    fn emit(&self, dir: Option<&Path>) -> CliResult<()> {
        let text = self.render();
        if let Some(d) = dir {
            write(d, "summary.txt", &text)?;
        }
        print!("{text}");
        Ok(())
    }
}

fn out_dir(o: &Output, command: &str) -> CliResult<PathBuf> {
    let dir = o
        .out
        .clone()
        .unwrap_or_else(|| output_dir(Path::new("lithos-out").join(command)));
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    log::info!("writing to {}", dir.display());
    Ok(dir)
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Run(lithos::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| io_error(&p, e))
}

fn twin_config(path: Option<&PathBuf>) -> CliResult<TwinConfig> {
    Ok(match path {
        Some(p) => TwinConfig::load(p)?,
        None => TwinConfig::reference()?,
    })
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut cfg = twin_config(a.config.as_ref())?;
    if let Some(h) = a.plant {
        cfg.plant.health = h;
    }
    if let Some(s) = a.soc {
        cfg.plant.soc = s;
    }
    cfg.validate()?;
    let cycle = DriveCycle::load(&a.cycle)?;
    let dir = out_dir(&a.output, "simulate")?;
    write(&dir, "config.toml", &cfg.to_toml_string())?;
    let (model, x0) = build_plant(&cfg)?;
    let tr = model.simulate(&cycle, &x0)?;
    write(&dir, "plant.csv", &plant_csv(&tr))?;
    let last = tr.len() - 1;
    let (vmin, vmax) = tr
        .voltage
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    Summary::default()
        .text("cycle", a.cycle.display())
        .text("samples", tr.len())
        .text("cut_off", tr.cut_off)
        .num("end_time_s", tr.t[last])
        .num("capacity_Ah", tr.states[0].q)
        .num("voltage_min_V", vmin)
        .num("voltage_max_V", vmax)
        .num("final_voltage_V", tr.voltage[last])
        .num("final_soc_cathode", tr.soc_p[last])
        .num("final_soc_anode", tr.soc_n[last])
        .emit(Some(&dir))
}

pub fn observe(a: ObserveArgs) -> CliResult<()> {
    let mut cfg = twin_config(a.config.as_ref())?;
    // the observer starts at plant.soc - soc_error
    cfg.plant.soc = a.soc0;
    cfg.init.soc_error = 0.0;
    if let Some(q) = a.capacity {
        cfg.init.capacity = q;
    }
    cfg.validate()?;
    let cycle = DriveCycle::load(&a.cycle)?;
    let stream = Measurement::from_cycle(&cycle)?;
    let dir = out_dir(&a.output, "observe")?;
    write(&dir, "config.toml", &cfg.to_toml_string())?;
    let (obs, init) = build_observer(&cfg)?;
    let est = run_observer(&obs, &stream, &init, false)?;
    est.write_csv(dir.join("estimates.csv"))?;
    let f = est.final_state.as_ref();
    let last = est.len() - 1;
    Summary::default()
        .text("cycle", a.cycle.display())
        .text("samples", est.len())
        .num("q_hat_Ah", f.map_or(f64::NAN, |s| s.q_filtered))
        .num("q_hat_raw_Ah", f.map_or(f64::NAN, |s| s.x3_hat))
        .num("theta1_hat_m2_s", f.map_or(f64::NAN, |s| s.theta1_hat))
        .num("kappa_sei_hat_S_m", est.kappa_sei[last])
        .num("soc_cathode", est.soc_p[last])
        .num("soc_anode", est.soc_n[last])
        .text("gate_time_s", est.gate_time.map_or("none".into(), sig12))
        .text("faults", est.faults.len())
        .emit(Some(&dir))
}

pub fn twin(a: TwinArgs) -> CliResult<()> {
    let mut cfg = twin_config(a.config.as_ref())?;
    if let Some(h) = a.plant {
        cfg.plant.health = h;
    }
    if let Some(s) = a.soc {
        cfg.plant.soc = s;
    }
    let c = &mut cfg.corruption;
    let given = [a.noise_current, a.noise_voltage, a.bias_current, a.bias_voltage];
    if given.iter().any(Option::is_some) || a.seed.is_some() {
        *c = CorruptionSpec {
            noise_std_i: a.noise_current.unwrap_or(c.noise_std_i),
            noise_std_v: a.noise_voltage.unwrap_or(c.noise_std_v),
            bias_i: a.bias_current.unwrap_or(c.bias_i),
            bias_v: a.bias_voltage.unwrap_or(c.bias_v),
            seed: a.seed.unwrap_or(c.seed),
        };
    }
    let cycle = DriveCycle::load(&a.cycle)?;
    let dir = out_dir(&a.output, "twin")?;
    let r = twin_experiment_to_dir(&cycle, &cfg, &dir)?;
    print!("{}", r.summary.to_text());
    Ok(())
}

struct Profile {
    set: ParameterSet,
    vector: ParameterVector,
    setup: ModelSetup,
    cycle: DriveCycle,
    source: String,
}

fn profile(p: &ProfileArgs) -> CliResult<Profile> {
    let set = match &p.params {
        Some(path) => ParameterSet::load(path)?,
        None => ParameterSet::reference(),
    };
    let vector = ParameterVector::new(set.cell.clone())?;
    let mut setup = ModelSetup::new(&set, OcpTable::reference(), Default::default());
    let (cycle, source) = match &p.cycle {
        Some(path) => (DriveCycle::load(path)?, path.display().to_string()),
        None => {
            setup.discretization.dt = p.dt;
            (
                one_c_profile(vector.base(), p.dt)?,
                format!("1C reference discharge, dt {} s", p.dt),
            )
        }
    };
    Ok(Profile {
        set,
        vector,
        setup,
        cycle,
        source,
    })
}

fn free_list(s: Option<&str>) -> CliResult<Option<Vec<ParamId>>> {
    s.map(|s| {
        let v = parse_param_list(s).map_err(|e| CliError::Usage(format!("--free: {e}")))?;
        if v.is_empty() {
            return Err(CliError::Usage("--free names no parameters".into()));
        }
        Ok(v)
    })
    .transpose()
}

fn names(ps: &[ParamId]) -> String {
    ps.iter().map(|p| p.name()).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct IdentRun<'a> {
    command: &'a str,
    cycle: &'a str,
    soc0: f64,
    free: String,
    rel_step: f64,
    scheme: Scheme,
    sens_threshold: f64,
    corr_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perturb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(rename = "capacity_Ah")]
    capacity_ah: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimizer: Option<DifferentialEvolution>,
    parameters: &'a ParameterSet,
}

fn echo(dir: &Path, run: &IdentRun) -> CliResult<()> {
    let text = toml::to_string(run).map_err(|e| CliError::Run(lithos::Error::Config(e.to_string())))?;
    write(dir, "config.toml", &text)
}

fn ranking_text(a: &Analysis) -> String {
    let mut s = String::from("# rank param all_outputs voltage_only\n");
    for (k, r) in a.norms.multi.iter().enumerate() {
        let v = a.norms.voltage_norm(r.param).unwrap_or(f64::NAN);
        let _ = writeln!(s, "{} {} {:e} {:e}", k + 1, r.param, r.norm, v);
    }
    s
}

pub fn sensitivity(a: SensitivityArgs, exec: Execution) -> CliResult<()> {
    let free = free_list(a.free.as_deref())?.unwrap_or_else(|| ParamId::ALL.to_vec());
    let p = profile(&a.profile)?;
    let cfg = SensitivityConfig {
        scheme: if a.forward { Scheme::Forward } else { Scheme::Central },
        rel_step: a.rel_step,
        soc0: a.profile.soc0,
        ..Default::default()
    };
    let sub = SubsetConfig {
        sens_threshold: a.sens_threshold,
        corr_threshold: a.corr_threshold,
    };
    let dir = out_dir(&a.output, "sensitivity")?;
    echo(
        &dir,
        &IdentRun {
            command: "sensitivity",
            cycle: &p.source,
            soc0: cfg.soc0,
            free: names(&free),
            rel_step: cfg.rel_step,
            scheme: cfg.scheme,
            sens_threshold: sub.sens_threshold,
            corr_threshold: sub.corr_threshold,
            budget: None,
            perturb: None,
            capacity_ah: None,
            optimizer: None,
            parameters: &p.set,
        },
    )?;
    let s = sensitivity_matrix(&p.cycle, &p.vector, &p.setup, &free, &cfg, exec)?;
    let an = analyze(&s, &sub);
    write(&dir, "ranking.txt", &ranking_text(&an))?;
    write(&dir, "correlation.txt", &an.correlation.to_text())?;
    let mut log = format!("selected = {}\n", names(&an.subset.selected));
    for e in &an.subset.log {
        let _ = writeln!(log, "# {e}");
    }
    write(&dir, "subset.txt", &log)?;
    let mut sum = Summary::default();
    sum.text("cycle", &p.source)
        .text("samples", s.samples())
        .text("parameters", s.cols())
        .text("selected", names(&an.subset.selected))
        .text("subset_size", an.subset.selected.len())
        .text("leader", an.norms.multi.first().map_or("none", |r| r.param.name()))
        .text("flagged", s.flagged.len())
        .text("one_sided", s.one_sided.len());
    for r in &an.norms.multi {
        sum.num(format!("norm.{}", r.param), r.norm);
    }
    sum.emit(Some(&dir))
}

pub fn identify(a: IdentifyArgs, exec: Execution) -> CliResult<()> {
    let free = free_list(a.free.as_deref())?;
    let p = profile(&a.profile)?;
    let soc0 = a.profile.soc0;
    let data = if p.cycle.voltage.is_some() {
        let q = a.capacity.unwrap_or_else(|| p.set.cell.cathode_capacity_ah());
        FitData::new(p.cycle.clone(), q, soc0)?
    } else {
        log::warn!("cycle has no voltage column; fitting data simulated from the given cell");
        FitData::synthetic(&p.vector, &p.setup, &p.cycle, soc0)?
    };
    let analysis = match &free {
        Some(_) => None,
        None => {
            log::info!("selecting parameters by sensitivity analysis");
            let cfg = SensitivityConfig {
                soc0,
                ..Default::default()
            };
            let s = sensitivity_matrix(&data.cycle, &p.vector, &p.setup, &ParamId::ALL, &cfg, exec)?;
            Some(analyze(&s, &SubsetConfig::default()))
        }
    };
    let free = free.unwrap_or_else(|| analysis.as_ref().map(|x| x.subset.selected.clone()).unwrap_or_default());
    if free.is_empty() {
        return Err(CliError::Run(lithos::Error::Domain(
            "no identifiable parameters selected".into(),
        )));
    }
    let mut init = p.vector.clone().with_free(&free);
    for id in &free {
        init.set_clamped(*id, init.value(*id) * (1.0 + a.perturb))?;
    }
    let optimizer = DifferentialEvolution::default();
    let dir = out_dir(&a.output, "identify")?;
    let defaults = SensitivityConfig::default();
    let sub = SubsetConfig::default();
    echo(
        &dir,
        &IdentRun {
            command: "identify",
            cycle: &p.source,
            soc0,
            free: names(&free),
            rel_step: defaults.rel_step,
            scheme: defaults.scheme,
            sens_threshold: sub.sens_threshold,
            corr_threshold: sub.corr_threshold,
            budget: Some(a.budget),
            perturb: Some(a.perturb),
            capacity_ah: Some(data.capacity),
            optimizer: Some(optimizer),
            parameters: &p.set,
        },
    )?;
    let r = fit(
        &data,
        &init,
        &p.setup,
        &FitWeights::default(),
        &optimizer,
        a.budget,
        exec,
    )?;
    let tables = analysis.as_ref().map(|x| (&x.norms, &x.correlation, &x.subset));
    write(&dir, "report.txt", &r.to_text(tables))?;
    let mut sum = Summary::default();
    sum.text("cycle", &p.source)
        .text("free", names(&free))
        .text("evaluations", r.evaluations)
        .text("converged", r.converged)
        .num("initial_cost", r.initial_cost.total)
        .num("cost", r.cost.total)
        .num("j1_voltage_rms_V", r.cost.j1)
        .num("j2_cathode_soc_rms", r.cost.j2)
        .num("j3_anode_soc_rms", r.cost.j3)
        .num("q0_Ah", r.cost.q0);
    for id in &free {
        sum.num(format!("fitted.{id}"), r.fitted.value(*id));
    }
    sum.emit(Some(&dir))
}

pub fn validate_gains(a: ValidateGainsArgs) -> CliResult<()> {
    let cfg = twin_config(a.config.as_ref())?;
    let p = &cfg.parameters;
    let report = observer::validate_gains(
        &cfg.observer.gains,
        &p.cell,
        &p.sei,
        &OcpTable::reference(),
        p.cell.d_s_n_ref,
        a.initial_error.unwrap_or(ASSUMED_INITIAL_ERROR),
    );
    eprint!("{report}");
    let mut sum = Summary::default();
    sum.text("passed", report.passed());
    for c in &report.checks {
        sum.text(
            format!("check.{}", c.name.replace(' ', "_")),
            if c.passed { "pass" } else { "fail" },
        );
    }
    sum.emit(None)?;
    let failed = report.failures();
    if failed.is_empty() {
        Ok(())
    } else {
        let list: Vec<&str> = failed.iter().map(|c| c.name).collect();
        Err(CliError::Run(lithos::Error::Domain(format!(
            "gain checks failed: {}",
            list.join(", ")
        ))))
    }
}
