//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use rand_distr::{Binomial, Distribution};

use qbyte::analysis::{
    crosstalk_matrix, fidelity_from_counts, fit_decay, is_next_neighbor, single_pulse_excitation,
    three_way, OracleSettings,
};
use qbyte::benchmark::rng::{stream, Purpose};
use qbyte::benchmark::{run_benchmark, BenchmarkPlan, CountRow, InputState, Register};
use qbyte::chain::{
    equilibrium_positions, transition_map, FieldConfig, PhysicalConstants, TrapConfig,
};
use qbyte::optimizer::crosstalk_objective;
use qbyte::optimizer::optimal_duration;
use qbyte::pulse::{
    crosstalk_envelope, crosstalk_probability, dephasing_error, light_shift_phase,
    light_shift_rate, RabiMap,
};
use qbyte_cli::RunConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    RunConfig::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn criterion_1() -> Outcome {
    let c = crosstalk_probability(20e3, 1.852e6, 25e-6);
    let rounded = (c * 1e6).round() / 1e6;
    let in_band = (c - 7.6e-5).abs() <= 1.3e-5;
    outcome(
        (rounded - 7.7e-5).abs() < 1e-12 && in_band,
        format!("C = {c:.4e} (band 7.6(1.3)e-5)"),
    )
}

fn criterion_2() -> Outcome {
    let settings = OracleSettings::default();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for c in [1e-5, 1e-4, 1e-3] {
        for cmp in three_way(c, &[250, 500, 1250], &settings).unwrap() {
            worst = worst.max(cmp.max_pull());
            lines.push(format!(
                "C={:.0e} N={} pull={:.2}",
                cmp.c,
                cmp.n,
                cmp.max_pull()
            ));
        }
    }
    outcome(
        worst < 3.0,
        format!(
            "max pairwise pull {worst:.2} sigma over {} points ({} walkers, {} sequences)",
            lines.len(),
            settings.walkers,
            settings.sequences
        ),
    )
}

fn criterion_3() -> Outcome {
    let (c, p0, trials) = (7.6e-5, 0.975, 1600);
    let n_values: Vec<usize> = (0..=5).map(|k| k * 250).collect();
    let curves = 500;
    let mut covered = 0;
    let mut failed = 0;
    for k in 0..curves {
        let mut rng = stream(2015, Purpose::Synthetic, &[k as u64]);
        let rows: Vec<CountRow> = n_values
            .iter()
            .map(|&n| {
                let f = 0.5 * (1.0 + (2.0 * p0 - 1.0) * (-2.0 * c * n as f64).exp());
                let bright = Binomial::new(trials as u64, 1.0 - f)
                    .unwrap()
                    .sample(&mut rng) as usize;
                CountRow {
                    pulse_count: n,
                    ion: 1,
                    trials,
                    bright,
                }
            })
            .collect();
        let curve = fidelity_from_counts(&rows, 1, 0, InputState::Eigenstate).unwrap();
        match fit_decay(&curve) {
            Ok(fit) if (fit.crosstalk - c).abs() <= 2.0 * fit.crosstalk_sigma => covered += 1,
            Ok(_) => {}
            Err(_) => failed += 1,
        }
    }
    let frac = covered as f64 / curves as f64;
    outcome(
        frac >= 0.95,
        format!(
            "{covered}/{curves} within 2 sigma ({:.1}%), {failed} fit failures",
            100.0 * frac
        ),
    )
}

fn criterion_4() -> Outcome {
    let measured = [
        12.648298e9,
        12.650634e9,
        12.652658e9,
        12.654523e9,
        12.656375e9,
        12.658282e9,
        12.660302e9,
        12.662694e9,
    ];
    let c = PhysicalConstants::default();
    let chain = equilibrium_positions(&TrapConfig::ytterbium(8, 124e3), &c).unwrap();
    let field = FieldConfig {
        gradient: 18.8,
        bias: 0.0,
        zero_position: chain.positions[0],
    };
    let sim = transition_map(&chain, &field, &c).next_neighbor_differences();
    let worst = sim
        .iter()
        .zip(measured.windows(2))
        .map(|(s, w)| ((s - (w[1] - w[0])) / (w[1] - w[0])).abs())
        .fold(0.0, f64::max);
    let mhz: Vec<String> = sim.iter().map(|d| format!("{:.3}", d / 1e6)).collect();
    outcome(
        worst <= 0.10,
        format!(
            "differences [{}] MHz, worst deviation {:.1}%",
            mhz.join(", "),
            100.0 * worst
        ),
    )
}

fn criterion_5() -> Outcome {
    let (tau, omega) = optimal_duration(3.358e6, 29).unwrap();
    let cfg = config("three_ion.toml");
    let s = cfg.build().unwrap();
    let n = s.register.len();
    let register = Register::new(
        s.register.transitions.clone(),
        RabiMap::uniform(n, omega, cfg.weights()).unwrap(),
    )
    .unwrap();
    let grid: Vec<f64> = (0..=800)
        .map(|k| tau * (0.97 + 0.06 * k as f64 / 800.0))
        .collect();
    let scan = crosstalk_objective(&register, &grid).unwrap();
    let ok = (tau - 8.64e-6).abs() <= 0.005 * 8.64e-6
        && (omega - 57.9e3).abs() <= 0.005 * 57.9e3
        && (scan.refined_argmin - tau).abs() <= 0.02e-6;
    outcome(
        ok,
        format!(
            "tau = {:.4} us, Omega = {:.2} kHz, objective minimum at {:.4} us",
            tau * 1e6,
            omega / 1e3,
            scan.refined_argmin * 1e6
        ),
    )
}

fn criterion_6() -> Outcome {
    let (tau, omega) = optimal_duration(3.358e6, 29).unwrap();
    let cfg = config("three_ion.toml");
    let s = cfg.build().unwrap();
    let n = s.register.len();
    let register = Register::new(
        s.register.transitions.clone(),
        RabiMap::uniform(n, omega, cfg.weights()).unwrap(),
    )
    .unwrap();
    let t = &register.transitions;
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..n {
        let ex = single_pulse_excitation(&register, i, tau).unwrap();
        for j in (0..n).filter(|&j| j != i) {
            let unoptimized = crosstalk_envelope(omega, t.qubit_detuning(i, j));
            worst = worst.max(ex[j]);
            worst_ratio = worst_ratio.max(ex[j] / unoptimized);
        }
    }
    outcome(
        worst < 3e-4 && worst_ratio <= 0.1,
        format!(
            "largest spectator excitation {worst:.2e}, at most {worst_ratio:.1e} of the un-optimized value"
        ),
    )
}

fn criterion_7() -> Outcome {
    let rate = light_shift_rate(20e3, 2e6).unwrap();
    let err = dephasing_error(light_shift_phase(20e3, 2e6, 25e-6).unwrap());
    outcome(
        (rate - 98.0).abs() <= 6.0 && (5.9e-5..=6.2e-5).contains(&err),
        format!("rate = {rate:.1} Hz, error over 25 us = {err:.3e}"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = config("single_ion.toml");
    let s = cfg.build().unwrap();
    let fit_for = |input_state| {
        let plan = BenchmarkPlan {
            n_values: (0..=5).map(|k| k * 400).collect(),
            trials: 4000,
            input_state,
            ..cfg.plan(0).unwrap()
        };
        let rows = run_benchmark(&s.register, &plan).unwrap();
        fit_decay(&fidelity_from_counts(&rows, 0, 0, input_state).unwrap()).unwrap()
    };
    let eig = fit_for(InputState::Eigenstate);
    let sup = fit_for(InputState::Superposition);
    let ratio = eig.crosstalk / sup.crosstalk;
    let sigma = ratio
        * ((eig.crosstalk_sigma / eig.crosstalk).powi(2)
            + (sup.crosstalk_sigma / sup.crosstalk).powi(2))
        .sqrt();
    outcome(
        (1.25..=1.55).contains(&ratio),
        format!(
            "C(eigenstate) = {:.2e}, C(superposition) = {:.2e}, ratio = {ratio:.2} +- {sigma:.2}",
            eig.crosstalk, sup.crosstalk
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut cfg = config("byte.toml");
    cfg.benchmark.n_values = (0..=4).map(|k| k * 500).collect();
    cfg.benchmark.trials = 1000;
    let s = cfg.build().unwrap();
    let m = crosstalk_matrix(&s.register, &cfg.plan(0).unwrap()).unwrap();
    let far = |rows: [usize; 2]| {
        m.mean_where(|e| rows.contains(&e.addressed) && !is_next_neighbor(e))
            .unwrap()
    };
    let (low, high) = (far([0, 1]), far([6, 7]));
    outcome(
        low > high,
        format!("mean non-neighbour C: rows 1-2 {low:.2e}, rows 7-8 {high:.2e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("closed-form cross-talk", criterion_1),
        ("oracle equivalence", criterion_2),
        ("fit recovery", criterion_3),
        ("frequency map", criterion_4),
        ("optimizer reproduction", criterion_5),
        ("optimized-register suppression", criterion_6),
        ("light-shift budget", criterion_7),
        ("superposition advantage", criterion_8),
        ("byte asymmetry", criterion_9),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {} {name}: {} ({}; {:.1} s)",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
