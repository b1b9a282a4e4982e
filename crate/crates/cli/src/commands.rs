use serde::Serialize;

use qbyte::analysis::{
    crosstalk_matrix, exact_crosstalk_matrix, fidelity_from_counts, fidelity_point, fit_decay,
    initial_fidelity, single_pulse_excitation, three_way, CrosstalkMatrix, OracleSettings,
};
use qbyte::benchmark::{
    rabi_scan, run_benchmark, spectrum_scan, Benchmark, BenchmarkPlan, InputState, Register,
};
use qbyte::chain::TransitionSet;
use qbyte::optimizer::{
    bias_for_detuning, choose_harmonic, commensurability, crosstalk_objective, error_budget,
    optimal_bias, optimal_duration, scale_error, HarmonicChoice, OptimizationReport, ScaleFactors,
};
use qbyte::pulse::{crosstalk_envelope, Channel, RabiMap};

use crate::config::{RunConfig, Setup};
use crate::error::CliError;
use crate::output::{header, ion_columns, num, OutputDir};

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn positions(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = cfg.build()?;
    let hf = s.constants.hyperfine_splitting;
    let ions = &s.register.transitions.ions;
    let rows: Vec<Vec<String>> = ions
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let z = s.chain.positions[k];
            vec![
                (k + 1).to_string(),
                num(z * 1e6),
                num(s.field.field_at(z)),
                num(t.sigma_plus),
                num(t.sigma_plus - hf),
                num(t.pi),
                num(t.sigma_minus),
                ions.get(k + 1)
                    .map(|n| num(n.sigma_plus - t.sigma_plus))
                    .unwrap_or_default(),
            ]
        })
        .collect();
    out.csv(
        "positions.csv",
        &header(&[
            "ion",
            "position_um",
            "field_t",
            "sigma_plus_hz",
            "qubit_offset_hz",
            "pi_hz",
            "sigma_minus_hz",
            "next_neighbor_difference_hz",
        ]),
        &rows,
    )
}

fn scan_rows(points: &[qbyte::benchmark::ScanPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            std::iter::once(num(p.x))
                .chain(p.bright.iter().map(|&b| num(b)))
                .collect()
        })
        .collect()
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = cfg.build()?;
    let sp = s.register.transitions.sigma_plus();
    let lo = sp.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let start = cfg.scan.spectrum_start_hz.unwrap_or(lo - 2e6);
    let stop = cfg.scan.spectrum_stop_hz.unwrap_or(hi + 2e6);
    if !(stop > start) {
        return Err(CliError::Config(
            "scan: spectrum_stop_hz must exceed spectrum_start_hz".into(),
        ));
    }
    let tau = cfg
        .scan
        .spectrum_duration_s
        .unwrap_or(cfg.pulses.duration_s);
    let grid = linspace(start, stop, cfg.scan.spectrum_points);
    let points = spectrum_scan(&s.register.transitions, &s.register.rabi, tau, &grid)?;
    let mut h = header(&["frequency_hz"]);
    h.extend(ion_columns("bright_probability", sp.len()));
    out.csv("spectrum.csv", &h, &scan_rows(&points))
}

fn rabi_map_for_scan(cfg: &RunConfig, s: &Setup, ion: usize) -> Result<RabiMap, CliError> {
    Ok(match cfg.scan.rabi_hz {
        Some(r) => s.register.rabi.normalized_to(ion, Channel::SigmaPlus, r)?,
        None => s.register.drive_for(ion)?,
    })
}

pub fn rabi(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = cfg.build()?;
    let ion = cfg
        .scan
        .rabi_ion
        .map(|i| i - 1)
        .unwrap_or(cfg.addressed()[0]);
    let map = rabi_map_for_scan(cfg, &s, ion)?;
    let carrier = s.register.transitions.ions[ion].sigma_plus;
    let grid = linspace(0.0, cfg.scan.rabi_max_duration_s, cfg.scan.rabi_points);
    let points = rabi_scan(&s.register.transitions, &map, carrier, &grid)?;
    let mut h = header(&["duration_s"]);
    h.extend(ion_columns("bright_probability", s.register.len()));
    out.csv("rabi.csv", &h, &scan_rows(&points))
}

#[derive(Serialize)]
struct SpectatorFit {
    spectator: usize,
    p0: f64,
    p0_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduced_chi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct AddressedSummary {
    addressed_ion: usize,
    input_state: InputState,
    duration_s: f64,
    trials: usize,
    fits: Vec<SpectatorFit>,
}

fn fit_spectator(
    rows: &[qbyte::benchmark::CountRow],
    plan: &BenchmarkPlan,
    ion: usize,
) -> Result<SpectatorFit, CliError> {
    let curve = fidelity_from_counts(rows, ion, plan.addressed_ion, plan.input_state)?;
    let distinct = curve.points.len();
    if distinct < 3 {
        let (p0, sigma) = initial_fidelity(&curve)?;
        return Ok(SpectatorFit {
            spectator: ion + 1,
            p0,
            p0_sigma: sigma,
            c: None,
            c_sigma: None,
            c_upper: None,
            reduced_chi2: None,
            note: Some(format!(
                "{distinct} sequence lengths; p0 from the shortest only"
            )),
        });
    }
    Ok(match fit_decay(&curve) {
        Ok(f) => SpectatorFit {
            spectator: ion + 1,
            p0: f.p0,
            p0_sigma: f.p0_sigma,
            c: Some(f.crosstalk),
            c_sigma: Some(f.crosstalk_sigma),
            c_upper: f.crosstalk_upper,
            reduced_chi2: Some(f.reduced_chi2),
            note: None,
        },
        Err(e) if e.is_numerical() => SpectatorFit {
            spectator: ion + 1,
            p0: f64::NAN,
            p0_sigma: f64::NAN,
            c: None,
            c_sigma: None,
            c_upper: None,
            reduced_chi2: None,
            note: Some(e.to_string()),
        },
        Err(e) => return Err(e.into()),
    })
}

/// Whether `ion` gets a fidelity row when `addressed` is driven. A detuned
/// drive makes the addressed ion a spectator too.
fn reports(cfg: &RunConfig, addressed: usize, ion: usize) -> bool {
    ion != addressed || cfg.benchmark.carrier_offset_hz != 0.0
}

pub fn benchmark(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = cfg.build()?;
    let n = s.register.len();
    let mut count_rows = Vec::new();
    let mut fidelity_rows = Vec::new();
    let mut summaries = Vec::new();
    for a in cfg.addressed() {
        let plan = cfg.plan(a)?;
        let rows = run_benchmark(&s.register, &plan)?;
        for r in &rows {
            count_rows.push(vec![
                (a + 1).to_string(),
                r.pulse_count.to_string(),
                (r.ion + 1).to_string(),
                r.trials.to_string(),
                r.bright.to_string(),
            ]);
            if reports(cfg, a, r.ion) {
                let p = fidelity_point(r, plan.input_state)?;
                fidelity_rows.push(vec![
                    (a + 1).to_string(),
                    (r.ion + 1).to_string(),
                    r.pulse_count.to_string(),
                    num(p.fidelity),
                    num(p.stderr),
                ]);
            }
        }
        let fits = (0..n)
            .filter(|&j| reports(cfg, a, j))
            .map(|j| fit_spectator(&rows, &plan, j))
            .collect::<Result<Vec<_>, _>>()?;
        summaries.push(AddressedSummary {
            addressed_ion: a + 1,
            input_state: plan.input_state,
            duration_s: plan.pulse_duration,
            trials: plan.trials,
            fits,
        });
    }
    out.csv(
        "counts.csv",
        &header(&["addressed_ion", "pulse_count", "ion", "trials", "bright"]),
        &count_rows,
    )?;
    out.csv(
        "fidelity.csv",
        &header(&["addressed_ion", "ion", "pulse_count", "fidelity", "stderr"]),
        &fidelity_rows,
    )?;
    out.json("benchmark.json", &summaries)?;
    if !cfg.benchmark.duration_sweep_s.is_empty() {
        duration_sweep(cfg, &s.register, out)?;
    }
    Ok(())
}

fn duration_sweep(
    cfg: &RunConfig,
    register: &Register,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for a in cfg.addressed() {
        for &tau in &cfg.benchmark.duration_sweep_s {
            let plan = BenchmarkPlan {
                pulse_duration: tau,
                n_values: vec![cfg.benchmark.sweep_pulses],
                ..cfg.plan(a)?
            };
            let counts = Benchmark::new(register, &plan)?.counts_at(cfg.benchmark.sweep_pulses)?;
            for r in counts.iter().filter(|r| reports(cfg, a, r.ion)) {
                let p = fidelity_point(r, plan.input_state)?;
                rows.push(vec![
                    (a + 1).to_string(),
                    num(tau),
                    (r.ion + 1).to_string(),
                    num(p.fidelity),
                    num(p.stderr),
                ]);
            }
        }
    }
    out.csv(
        "duration_sweep.csv",
        &header(&["addressed_ion", "duration_s", "ion", "fidelity", "stderr"]),
        &rows,
    )
}

#[derive(Serialize)]
struct JsonEntry {
    addressed: usize,
    spectator: usize,
    c: f64,
    c_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn matrix_json(m: &CrosstalkMatrix) -> Vec<JsonEntry> {
    m.entries
        .iter()
        .map(|e| JsonEntry {
            addressed: e.addressed + 1,
            spectator: e.spectator + 1,
            c: e.c,
            c_sigma: e.c_sigma,
            c_upper: e.c_upper,
            error: e.error.clone(),
        })
        .collect()
}

/// Table layout: one row per addressed ion, blank diagonal.
fn matrix_table(
    m: &CrosstalkMatrix,
    value: impl Fn(&qbyte::analysis::MatrixEntry) -> f64,
) -> Vec<Vec<String>> {
    (0..m.size)
        .map(|i| {
            std::iter::once((i + 1).to_string())
                .chain((0..m.size).map(|j| m.get(i, j).map(|e| num(value(e))).unwrap_or_default()))
                .collect()
        })
        .collect()
}

pub fn xtalk(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = cfg.build()?;
    let n = s.register.len();
    let plan = cfg.plan(0)?;
    let m = crosstalk_matrix(&s.register, &plan)?;
    out.json("xtalk.json", &matrix_json(&m))?;
    let mut h = header(&["addressed_ion"]);
    h.extend(ion_columns("c", n));
    out.csv("xtalk.csv", &h, &matrix_table(&m, |e| e.c))?;
    let mut h = header(&["addressed_ion"]);
    h.extend(ion_columns("c_sigma", n));
    out.csv("xtalk_sigma.csv", &h, &matrix_table(&m, |e| e.c_sigma))?;
    let exact = exact_crosstalk_matrix(&s.register, cfg.pulses.duration_s)?;
    let mut h = header(&["addressed_ion"]);
    h.extend(ion_columns("c_single_pulse", n));
    out.csv("xtalk_single_pulse.csv", &h, &matrix_table(&exact, |e| e.c))
}

#[derive(Serialize)]
struct OptimizeOutput {
    #[serde(flatten)]
    report: OptimizationReport,
    detuning_hz: f64,
    bias_multiplier: i64,
    comb_residuals_hz: Vec<f64>,
    /// Four-level single-pulse excitation at the optimum, per addressed
    /// ion and spectator.
    spectator_crosstalk: Vec<Vec<f64>>,
    /// `(Omega / Delta)^2` at the same Rabi frequency.
    unoptimized_crosstalk: f64,
}

pub fn optimize(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = cfg.build()?;
    let o = &cfg.optimize;
    let n = s.register.len();
    let z = s.constants.zeeman_coefficient;
    let hf = s.constants.hyperfine_splitting;
    let (delta, residuals, bias) = match o.detuning_hz {
        Some(d) => {
            let at_first = bias_for_detuning(d, z, o.bias_multiplier)?;
            let bias = at_first - s.field.gradient * (s.chain.positions[0] - s.field.zero_position);
            (d, vec![0.0; n.saturating_sub(1)], bias)
        }
        None => {
            let r = optimal_bias(&s.chain, &s.field, &s.constants, o.bias_multiplier)?;
            (r.detuning.abs(), r.residuals, r.bias)
        }
    };
    let choice = match o.harmonic_k {
        Some(k) => {
            let (tau, omega) = optimal_duration(delta, k)?;
            HarmonicChoice { k, tau, omega }
        }
        None => choose_harmonic(delta, o.rabi_target_hz, o.rabi_min_hz, o.rabi_max_hz)?,
    };
    // Register at the chosen bias: an ideal comb when the spacing is given,
    // the computed map otherwise.
    let transitions = match o.detuning_hz {
        Some(d) => {
            let m = o.bias_multiplier as f64;
            let sp: Vec<f64> = (0..n).map(|k| hf + (m + k as f64) * d).collect();
            TransitionSet::from_sigma_plus(hf, &sp)
        }
        None => {
            let field = qbyte::chain::FieldConfig { bias, ..s.field };
            qbyte::chain::transition_map(&s.chain, &field, &s.constants)
        }
    };
    let mut register = Register::new(
        transitions,
        RabiMap::uniform(n, choice.omega, cfg.weights())?,
    )?;
    register.probe = s.register.probe;
    let grid = linspace(
        choice.tau * (1.0 - o.tau_grid_span),
        choice.tau * (1.0 + o.tau_grid_span),
        o.tau_grid_points,
    );
    let scan = crosstalk_objective(&register, &grid)?;
    let spectator_crosstalk = (0..n)
        .map(|i| single_pulse_excitation(&register, i, choice.tau))
        .collect::<Result<Vec<_>, _>>()?;
    let report = OptimizationReport {
        k: choice.k,
        tau: choice.tau,
        omega: choice.omega,
        bias,
        objective: qbyte::optimizer::total_crosstalk(&register, choice.tau)?,
        objective_argmin: scan.refined_argmin,
        commensurability: commensurability(&register, choice.tau)?,
    };
    out.json(
        "optimize.json",
        &OptimizeOutput {
            report,
            detuning_hz: delta,
            bias_multiplier: o.bias_multiplier,
            comb_residuals_hz: residuals,
            spectator_crosstalk,
            unoptimized_crosstalk: crosstalk_envelope(choice.omega, delta),
        },
    )?;
    let rows: Vec<Vec<String>> = scan
        .taus
        .iter()
        .zip(&scan.values)
        .map(|(t, v)| vec![num(*t), num(*v)])
        .collect();
    out.csv(
        "objective.csv",
        &header(&["duration_s", "total_crosstalk"]),
        &rows,
    )
}

pub fn scaling(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = cfg.build()?;
    let first = cfg.addressed()[0];
    let rabi = s.register.drive_for(first)?.get(first, Channel::SigmaPlus);
    let detuning = match cfg.scaling.detuning_hz {
        Some(d) => d,
        None => s
            .register
            .transitions
            .next_neighbor_differences()
            .iter()
            .map(|d| d.abs())
            .fold(f64::INFINITY, f64::min),
    };
    if !detuning.is_finite() {
        return Err(CliError::Config(
            "scaling.detuning_hz is required for a single ion".into(),
        ));
    }
    let j = cfg.scaling.j_hz.unwrap_or(cfg.model.j_nearest_neighbor_hz);
    let factors = ScaleFactors {
        rabi: cfg.scaling.rabi_ratio,
        gradient: cfg.scaling.gradient_ratio,
        secular: cfg.scaling.secular_ratio,
    };
    let budget = error_budget(rabi, detuning, cfg.pulses.duration_s, j, &cfg.sideband())?;
    let rows = budget
        .iter()
        .map(|r| {
            let (scaled, exps) = match r.law {
                Some(l) => (
                    num(scale_error(r.value, l, factors)?),
                    [num(l.rabi), num(l.gradient), num(l.secular)],
                ),
                None => (String::new(), Default::default()),
            };
            let mut row = vec![r.source.clone(), num(r.value), scaled];
            row.extend(exps);
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.csv(
        "scaling.csv",
        &header(&[
            "source",
            "error_per_pulse",
            "scaled_error_per_pulse",
            "rabi_exponent",
            "gradient_exponent",
            "secular_exponent",
        ]),
        &rows,
    )?;
    #[derive(Serialize)]
    struct Params {
        rabi_hz: f64,
        detuning_hz: f64,
        duration_s: f64,
        j_hz: f64,
        factors: ScaleFactors,
    }
    out.json(
        "scaling.json",
        &Params {
            rabi_hz: rabi,
            detuning_hz: detuning,
            duration_s: cfg.pulses.duration_s,
            j_hz: j,
            factors,
        },
    )
}

pub fn oracle(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let q = &cfg.oracle;
    let settings = OracleSettings {
        rabi: q.rabi_hz,
        tau_hint: q.duration_s,
        walkers: q.walkers,
        sequences: q.sequences,
        seed: cfg.benchmark.seed,
    };
    let mut rows = Vec::new();
    for &c in &q.crosstalk {
        for cmp in three_way(c, &q.n_values, &settings)? {
            rows.push(vec![
                num(cmp.c),
                cmp.n.to_string(),
                num(cmp.analytic),
                num(cmp.walk.mean),
                num(cmp.walk.stderr),
                num(cmp.unitary.mean),
                num(cmp.unitary.stderr),
                num(cmp.max_pull()),
            ]);
        }
    }
    out.csv(
        "oracle.csv",
        &header(&[
            "crosstalk",
            "pulse_count",
            "analytic_fidelity",
            "walk_fidelity",
            "walk_stderr",
            "unitary_fidelity",
            "unitary_stderr",
            "max_pull_sigma",
        ]),
        &rows,
    )
}
