use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::report::{parse_header, Report, Table};
use super::trace::TraceFile;
use crate::analysis;
use crate::dynamics::{run_protocol, EvolutionResult};
use crate::engineered::{self, EngineeredBasisSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fock::{FockSpace, QuantumState};
use crate::linalg::{CMatrix, C64};
use crate::spectro::{
    self, fit_engineered_ground, fit_populations, fit_state_family, BasisTag, PopulationEstimate, StateFamily,
    StateFamilyFit, Truth,
};

pub const PUMP_TABLE: &str = "pump_fidelity.tsv";
pub const PUMP_STATE: &str = "pump_state.tsv";
pub const PUMP_SUMMARY: &str = "pump_summary.tsv";
pub const TRACE_FILE: &str = "trace.tsv";
pub const FIT_REPORT: &str = "fit_report.tsv";
pub const FIT_POPULATIONS: &str = "fit_populations.tsv";
pub const GEN_POPULATIONS: &str = "gen_populations.tsv";
pub const GEN_TRACE: &str = "gen_trace.tsv";
pub const LOG_FILE: &str = "run.log";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Appends a timestamped line to the sidecar log; payload files never
/// carry timestamps.
pub fn append_log(dir: &Path, line: &str) -> Result<()> {
    use std::io::Write;
    ensure_dir(dir)?;
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(dir.join(LOG_FILE))?;
    writeln!(f, "{secs}\t{line}")?;
    Ok(())
}

/// Writes the motional density matrix as `row col re im` entries, with the
/// pump target in the header.
pub fn write_state(path: &Path, state: &QuantumState, spec: &EngineeredBasisSpec, digest: &str) -> Result<()> {
    let m = state.motional().density_matrix();
    let mut t = Table::new(&["row", "col", "re", "im"]);
    t.meta("dim", m.nrows())
        .meta("target_alpha_re", format!("{:e}", spec.alpha.re))
        .meta("target_alpha_im", format!("{:e}", spec.alpha.im))
        .meta("target_r", format!("{:e}", spec.r))
        .meta("target_phi_s", format!("{:e}", spec.phi_s))
        .meta("config_digest", digest);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            t.row(vec![i as f64, j as f64, m[(i, j)].re, m[(i, j)].im]);
        }
    }
    t.write(path)
}

/// Reads a state written by [`write_state`] with the spec it was pumped to.
pub fn read_state(path: &Path) -> Result<(QuantumState, EngineeredBasisSpec)> {
    let text = std::fs::read_to_string(path)?;
    let (meta, _, rows) = parse_header(&text)?;
    let get = |k: &str| -> Result<f64> {
        meta.iter()
            .find(|(key, _)| key == k)
            .and_then(|(_, v)| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Format {
                line: 0,
                message: format!("state header lacks numeric `{k}`"),
            })
    };
    let dim = get("dim")? as usize;
    let mut m = CMatrix::zeros(dim, dim);
    for (line, r) in &rows {
        let (i, j) = (r[0] as usize, r[1] as usize);
        if i >= dim || j >= dim {
            return Err(Error::Format {
                line: *line,
                message: format!("index ({i}, {j}) outside dimension {dim}"),
            });
        }
        m[(i, j)] = C64::new(r[2], r[3]);
    }
    let spec = EngineeredBasisSpec::new(
        C64::new(get("target_alpha_re")?, get("target_alpha_im")?),
        get("target_r")?,
        get("target_phi_s")?,
    )?;
    let state = QuantumState::density(FockSpace::motion(dim)?, nearest_density(&m))?;
    Ok((state, spec))
}

/// Clips the small negative eigenvalues left by integrator error and
/// restores unit trace.
fn nearest_density(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = crate::linalg::eigh(&crate::linalg::hermitian_part(m));
    let worst = vals.iter().cloned().fold(0.0, f64::min);
    if worst < -1e-5 {
        log::warn!("stored state has eigenvalue {worst:e}; clipping to the nearest density matrix");
    }
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for (k, w) in clipped.iter().enumerate() {
        if *w > 0.0 {
            let v = vecs.column(k);
            out += v * v.adjoint() * C64::new(w / total, 0.0);
        }
    }
    out
}

pub struct PumpOutput {
    pub result: EvolutionResult,
    pub final_state: QuantumState,
}

/// Runs the configured pumping protocol and writes the fidelity table, the
/// final motional state and a summary.
pub fn cmd_pump(cfg: &ExperimentConfig, out: &Path) -> Result<PumpOutput> {
    cfg.validate()?;
    ensure_dir(out)?;
    let spec = cfg.spec()?;
    let space = FockSpace::spin_motion(cfg.truncation)?;
    let result = run_protocol(&cfg.protocol_config()?, &spec, space)?;
    let final_state = result
        .final_state()
        .cloned()
        .ok_or_else(|| Error::SteadyState("protocol returned no state".into()))?;
    let digest = cfg.digest();
    let mut t = Table::new(&["step", "time_s", "target_fidelity", "p_down", "mean_n"]);
    t.meta("command", "pump").meta("config_digest", &digest);
    for i in 0..result.times.len() {
        t.row(vec![
            i as f64,
            result.times[i],
            result.target_fidelity[i],
            result.spin_down_prob.get(i).copied().unwrap_or(f64::NAN),
            result.mean_n[i],
        ]);
    }
    t.write(&out.join(PUMP_TABLE))?;
    write_state(&out.join(PUMP_STATE), &final_state, &spec, &digest)?;
    let motional = final_state.motional();
    let mut r = Report::new();
    r.meta("command", "pump").meta("config_digest", &digest);
    r.num("final_target_fidelity", *result.target_fidelity.last().expect("nonempty"))
        .num("final_p_down", final_state.spin_down_probability()?)
        .num("final_mean_n", *result.mean_n.last().expect("nonempty"))
        .num("final_squeezing_db", analysis::state_squeezing_db(&motional)?);
    r.write(&out.join(PUMP_SUMMARY))?;
    Ok(PumpOutput { result, final_state })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateSource {
    Target,
    File(PathBuf),
}

impl StateSource {
    pub fn parse(s: &str) -> Self {
        if s == "target" {
            StateSource::Target
        } else {
            StateSource::File(PathBuf::from(s))
        }
    }
}

/// Probes a state with the configured basis and writes a shot-sampled trace.
pub fn cmd_probe(cfg: &ExperimentConfig, source: &StateSource, out: &Path) -> Result<TraceFile> {
    cfg.validate()?;
    ensure_dir(out)?;
    let tag = cfg.basis_tag()?;
    let spec = cfg.spec()?;
    let state = match source {
        StateSource::Target => engineered::target_state(&spec, FockSpace::motion(cfg.truncation)?)?,
        StateSource::File(p) => {
            let (st, pumped) = read_state(p)?;
            if tag.is_engineered() && pumped != spec {
                return Err(Error::param(format!(
                    "{tag} probe uses the configured target basis, but the state was pumped towards a different target"
                )));
            }
            st
        }
    };
    let truth = Truth::State {
        state,
        spec,
        gamma: cfg.probe.decay_per_s,
        omega_r: TAU * cfg.probe.rabi_hz,
        b: cfg.probe.drift_per_s,
    };
    let trace = spectro::synthesize_trace(&truth, &cfg.probe_times(), cfg.probe.shots, cfg.seed(), tag, &cfg.lamb_dicke())?;
    let file = TraceFile {
        trace,
        seed: cfg.seed(),
        config_digest: cfg.digest(),
    };
    file.write(&out.join(TRACE_FILE))?;
    Ok(file)
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub populations: PopulationEstimate,
    pub family: Option<StateFamilyFit>,
    pub report: Report,
}

/// Fits a trace file. With a config its digest must match the trace's
/// unless `force` is set.
pub fn cmd_fit(
    trace_path: &Path,
    cfg: Option<&ExperimentConfig>,
    n_max: Option<usize>,
    force: bool,
    out: &Path,
) -> Result<FitOutput> {
    let file = TraceFile::read(trace_path)?;
    if let Some(c) = cfg {
        c.validate()?;
        let expected = c.digest();
        if expected != file.config_digest {
            if !force {
                return Err(Error::DigestMismatch {
                    expected,
                    found: file.config_digest.clone(),
                });
            }
            log::warn!("trace digest differs from config; continuing because --force was given");
        }
    }
    ensure_dir(out)?;
    let tag = file.trace.basis_tag;
    let mut opts = match cfg {
        Some(c) => c.fit_options()?,
        None => spectro::FitOptions::default(),
    };
    if tag.is_engineered() {
        match cfg {
            Some(c) => opts.omega_r = Some(TAU * c.probe.rabi_hz),
            None => log::warn!("{tag} fit without a config: Ω_R is free and the level index is ambiguous"),
        }
    }
    let n_max = n_max.or(cfg.map(|c| c.fit.n_max)).unwrap_or(20);
    if n_max > 20 {
        log::warn!("n_max = {n_max}: large population fits are poorly conditioned");
    }
    let populations = match tag {
        BasisTag::HPlus => fit_engineered_ground(&file.trace, n_max, &opts)?,
        _ => fit_populations(&file.trace, n_max, &opts)?,
    };
    let mut advisory = None;
    let family = if tag == BasisTag::BlueSideband {
        let fam = match cfg {
            Some(c) => c.family()?,
            None => StateFamily::Coherent,
        };
        match fit_state_family(&populations, fam) {
            Ok(f) => Some(f),
            Err(Error::Advisory(msg)) => {
                log::warn!("{msg}");
                advisory = Some(msg);
                Some(fit_state_family(&populations, StateFamily::Coherent)?)
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let (sg, sw, sb) = populations.param_errors();
    let mut r = Report::new();
    r.meta("command", "fit")
        .meta("basis_tag", tag)
        .meta("config_digest", &file.config_digest);
    r.num("b", populations.b).num("b_err", sb);
    let na = |r: &mut Report, k: &str| {
        r.text(k, "nan");
        r.text(&format!("{k}_err"), "nan");
    };
    match &family {
        Some(f) => {
            r.text("family", f.family.as_str());
            for key in ["alpha_mag", "r", "theta"] {
                match f.family.param_names().iter().position(|n| *n == key) {
                    Some(i) => {
                        r.num(key, f.params[i]).num(&format!("{key}_err"), f.param_errors[i]);
                    }
                    None => na(&mut r, key),
                }
            }
            r.num("family_residual", f.residual);
        }
        None => {
            r.text("family", "engineered");
            for key in ["alpha_mag", "r", "theta"] {
                na(&mut r, key);
            }
        }
    }
    r.num("gamma", populations.gamma)
        .num("gamma_err", sg)
        .num("omega_r", populations.omega_r)
        .num("omega_r_err", sw)
        .text("n_max", populations.n_max)
        .num("chi2", populations.cost);
    if tag.is_engineered() {
        r.num("p_ground", populations.p[0]).num("p_ground_err", populations.p_errors()[0]);
    }
    if let Some(a) = advisory {
        r.text("advisory", a);
    }
    r.write(&out.join(FIT_REPORT))?;

    let errs = populations.p_errors();
    let mut t = Table::new(&["n", "p", "p_err"]);
    t.meta("command", "fit").meta("basis_tag", tag).meta("config_digest", &file.config_digest);
    for (n, p) in populations.p.iter().enumerate() {
        t.row(vec![n as f64, *p, errs[n]]);
    }
    t.write(&out.join(FIT_POPULATIONS))?;
    Ok(FitOutput {
        populations,
        family,
        report: r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisSelector {
    DarkState,
    NoiseBudget,
    CoherentBenchmark,
}

impl AnalysisSelector {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "darkstate" => Ok(Self::DarkState),
            "noise-budget" => Ok(Self::NoiseBudget),
            "coherent-benchmark" => Ok(Self::CoherentBenchmark),
            other => Err(Error::param(format!(
                "unknown analysis `{other}` (expected darkstate, noise-budget or coherent-benchmark)"
            ))),
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            Self::DarkState => "analysis_darkstate.tsv",
            Self::NoiseBudget => "analysis_noise_budget.tsv",
            Self::CoherentBenchmark => "analysis_coherent_benchmark.tsv",
        }
    }
}

/// Runs one analysis and writes its report.
pub fn cmd_analyze(cfg: &ExperimentConfig, selector: AnalysisSelector, out: &Path) -> Result<Report> {
    cfg.validate()?;
    ensure_dir(out)?;
    let a = &cfg.analysis;
    let mut r = Report::new();
    r.meta("command", "analyze").meta("config_digest", cfg.digest());
    match selector {
        AnalysisSelector::DarkState => {
            let n = ((a.r_grid_stop - a.r_grid_start) / a.r_grid_step + 1e-9).floor() as usize + 1;
            let grid: Vec<f64> = (0..n).map(|k| a.r_grid_start + a.r_grid_step * k as f64).collect();
            let sw = analysis::dark_state_sweep(
                &grid,
                cfg.target.phi_s_rad,
                &cfg.lamb_dicke(),
                a.dark_state_dim,
                a.fidelity_threshold,
                Execution::default(),
            )?;
            r.meta("selector", "darkstate").meta("eta", cfg.trap.eta).meta("dim", a.dark_state_dim);
            match sw.crossing {
                Some(c) => r.num("crossing_r", c),
                None => r.text("crossing_r", "nan"),
            };
            r.num("threshold", sw.threshold).num("max_db", sw.max_db).num("r_at_max_db", sw.r_at_max_db);
            for p in &sw.points {
                let k = format!("r={}", p.r_target);
                r.num(&format!("{k}:fidelity"), p.fidelity)
                    .num(&format!("{k}:squeezed_variance_db"), p.squeezed_variance_db)
                    .num(&format!("{k}:min_singular_value"), p.min_singular_value)
                    .text(&format!("{k}:support_cutoff"), p.support_cutoff);
            }
        }
        AnalysisSelector::NoiseBudget => {
            let b = analysis::noise_budget(
                cfg.noise.heating_per_s,
                cfg.target.r,
                a.coherence_time_s,
                TAU * cfg.pump_anchor_hz(),
                TAU * cfg.noise.spin_decay_hz,
            )?;
            r.meta("selector", "noise-budget");
            r.num("gamma_sq", b.gamma_sq)
                .num("gamma_dephase", b.gamma_dephase)
                .num("pump_rate", b.pump_rate);
        }
        AnalysisSelector::CoherentBenchmark => {
            let omega = analysis::second_sideband_rate(cfg.trap.eta, TAU * cfg.drives.probe_anchor_hz);
            let g = analysis::coherent_generation_benchmark(cfg.target.r, omega, &cfg.noise_model(), a.benchmark_dim)?;
            r.meta("selector", "coherent-benchmark");
            r.num("r", cfg.target.r)
                .num("omega_2sb", omega)
                .num("duration_s", g.duration)
                .num("ideal_fidelity", g.ideal_fidelity)
                .num("noisy_fidelity", g.noisy_fidelity);
        }
    }
    r.write(&out.join(selector.file_name()))?;
    Ok(r)
}

/// Writes the ideal Fock distribution of the target and a blue-sideband
/// trace synthesized from it.
pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<TraceFile> {
    cfg.validate()?;
    ensure_dir(out)?;
    let spec = cfg.spec()?;
    let n = cfg.truncation;
    let a = spec.alpha.norm();
    let mut p = if spec.r == 0.0 {
        spectro::coherent_table(n, a)
    } else if a == 0.0 {
        spectro::squeezed_table(n, spec.r)
    } else {
        spectro::dist_displaced_squeezed_table(n, spec.r, a, spec.alpha.arg() - 0.5 * spec.phi_s)?
    };
    let total: f64 = p.iter().sum();
    let digest = cfg.digest();
    let mut t = Table::new(&["n", "p"]);
    t.meta("command", "gen-data").meta("mass_in_truncation", format!("{total:e}")).meta("config_digest", &digest);
    for (k, v) in p.iter().enumerate() {
        t.row(vec![k as f64, *v]);
    }
    t.write(&out.join(GEN_POPULATIONS))?;
    p.iter_mut().for_each(|v| *v /= total);
    let est = PopulationEstimate::exact(p, cfg.probe.decay_per_s, TAU * cfg.probe.rabi_hz, cfg.probe.drift_per_s)?;
    let trace = spectro::synthesize_trace(
        &Truth::Populations(est),
        &cfg.probe_times(),
        cfg.probe.shots,
        cfg.seed(),
        BasisTag::BlueSideband,
        &cfg.lamb_dicke(),
    )?;
    let file = TraceFile {
        trace,
        seed: cfg.seed(),
        config_digest: digest,
    };
    file.write(&out.join(GEN_TRACE))?;
    Ok(file)
}
