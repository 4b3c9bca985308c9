use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::CommandFactory;
use serde_json::{json, Value};

use ptring::counting::{analyze_streams, bell_threshold_check, heralded_g2, visibility_fit, AnalysisConfig};
use ptring::lifetime::{lifetime_contrast, tau_exact, tau_high_q, tau_low_q, LifetimeEstimate};
use ptring::optimize::LmOptions;
use ptring::photon_sim::{generate_pair_streams, pair_rate, simulate_franson, simulate_hbt, FransonConfig, HbtConfig};
use ptring::spectra::{extract_system_params, find_resonances, Baseline, ParamFitOptions};
use ptring::tcmt::{comb_spectrum, dos_spectrum, eigenfrequencies, linear_grid, transmission_spectrum};
use ptring::timestamps::{read_csv, write_csv};
use ptring::units::{self, GHZ, PS};
use ptring::{Spectrum, SpectrumKind, TimestampStream};

use crate::args::*;
use crate::config::layered;
use crate::error::{CliError, CliResult};
use crate::output::Staged;

/// Runs one command and returns the summary printed on stdout.
pub fn run(command: Command) -> CliResult<Value> {
    match command {
        Command::SimulateSpectrum(a) => simulate_spectrum(resolve("simulate-spectrum", &a, &a.config)?),
        Command::SweepDetuning(a) => sweep_detuning(resolve("sweep-detuning", &a, &a.config)?),
        Command::FitSpectrum(a) => fit_spectrum(resolve("fit-spectrum", &a, &a.config)?),
        Command::PredictLifetime(a) => predict_lifetime(resolve("predict-lifetime", &a, &a.config)?),
        Command::SimulatePairs(a) => simulate_pairs(resolve("simulate-pairs", &a, &a.config)?),
        Command::Analyze(a) => analyze(resolve("analyze", &a, &a.config)?),
        Command::Franson(a) => franson(resolve("franson", &a, &a.config)?),
        Command::G2(a) => g2(resolve("g2", &a, &a.config)?),
    }
}

fn resolve<T>(name: &str, cli: &T, config: &Option<PathBuf>) -> CliResult<T>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let known: BTreeSet<String> = Cli::command()
        .find_subcommand(name)
        .map(|c| c.get_arguments().map(|a| a.get_id().to_string()).collect())
        .unwrap_or_default();
    layered(cli, config.as_deref(), &known)
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    value.as_ref().ok_or_else(|| CliError::input(format!("--{flag} is required")))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(&path.display().to_string(), e)
}

fn write_err(e: std::io::Error) -> CliError {
    CliError::io("write", e)
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::input(format!("invalid {name}: must be finite and > 0, got {v}")))
    }
}

/// Evenly spaced model-axis grid covering a wavelength band.
fn band_grid(grid: &GridArgs) -> CliResult<Vec<f64>> {
    let a = units::angular_from_nm(positive("start_nm", grid.start_nm.unwrap_or(1534.0))?);
    let b = units::angular_from_nm(positive("stop_nm", grid.stop_nm.unwrap_or(1540.0))?);
    let points = grid.points.unwrap_or(8001);
    if points < 2 || a == b {
        return Err(CliError::input("invalid grid: needs two distinct band edges and at least 2 points"));
    }
    Ok(linear_grid(a.min(b), a.max(b), points))
}

fn spectrum_json(s: &Spectrum) -> Value {
    json!({
        "kind": s.kind,
        "freq_hz": s.freqs.iter().map(|f| units::hz_from_angular(*f)).collect::<Vec<_>>(),
        "values": s.values,
    })
}

fn simulate_spectrum(a: SimulateSpectrumArgs) -> CliResult<Value> {
    let output = required(&a.output, "output")?;
    let params = a.model.params();
    let grid = band_grid(&a.grid)?;
    let spec = if a.single {
        transmission_spectrum(&params, &grid)?
    } else {
        comb_spectrum(&params, &a.geometry.geometry(a.model.center_nm()), a.geometry.tuning(), &grid)?
    };
    let mut staged = Staged::new();
    match a.format.unwrap_or(Format::Csv) {
        Format::Csv => staged.add(output, |w| Ok(spec.write_csv(w)?))?,
        Format::Json => staged.add_json(output, &spectrum_json(&spec))?,
    }
    staged.commit()?;
    let min = spec.values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(json!({ "output": output, "points": spec.len(), "min_transmission": min }))
}

struct SweepRow {
    regime: &'static str,
    delta_omega: f64,
    /// ω± relative to the probe centre (real part) and their imaginary parts.
    eig: [f64; 4],
    dos: Vec<f64>,
}

fn sweep_detuning(a: SweepDetuningArgs) -> CliResult<Value> {
    let output = required(&a.output, "output")?;
    let merged = a.model.params();
    let split = ptring::SystemParams {
        gamma_c: positive("split_gamma_c_ghz", a.split_gamma_c_ghz.unwrap_or(10.0))? * GHZ,
        ..merged
    };
    let rows = a.rows.unwrap_or(41);
    let points = a.points.unwrap_or(601);
    let span = positive("span_ghz", a.span_ghz.unwrap_or(300.0))? * GHZ;
    let (d0, d1) = (a.detuning_min_ghz.unwrap_or(-100.0), a.detuning_max_ghz.unwrap_or(100.0));
    if rows < 1 || points < 2 || !(d0.is_finite() && d1.is_finite() && d0 <= d1) {
        return Err(CliError::input("invalid sweep: needs rows >= 1, points >= 2 and detuning_min <= detuning_max"));
    }
    let offsets = linear_grid(-span / 2.0, span / 2.0, points);
    let mut table = Vec::new();
    for (regime, base) in [("split", split), ("merged", merged)] {
        for delta in linear_grid(d0 * GHZ, d1 * GHZ, rows) {
            let p = base.with_delta_omega(delta);
            let center = p.omega1 + delta / 2.0;
            let grid: Vec<f64> = offsets.iter().map(|x| center + x).collect();
            let dos = dos_spectrum(&p, &grid, true)?;
            let e = eigenfrequencies(&p);
            table.push(SweepRow {
                regime,
                delta_omega: delta,
                eig: [
                    e.omega_plus.re - center,
                    e.omega_plus.im,
                    e.omega_minus.re - center,
                    e.omega_minus.im,
                ],
                dos: dos.values,
            });
        }
    }
    let mut staged = Staged::new();
    match a.format.unwrap_or(Format::Csv) {
        Format::Csv => staged.add(output, |w| {
            write!(w, "regime,delta_omega,omega_plus_offset,omega_plus_imag,omega_minus_offset,omega_minus_imag")
                .map_err(write_err)?;
            for x in &offsets {
                write!(w, ",{x:.6e}").map_err(write_err)?;
            }
            writeln!(w).map_err(write_err)?;
            for r in &table {
                write!(w, "{},{:.15e}", r.regime, r.delta_omega).map_err(write_err)?;
                for v in r.eig.iter().chain(&r.dos) {
                    write!(w, ",{v:.15e}").map_err(write_err)?;
                }
                writeln!(w).map_err(write_err)?;
            }
            Ok(())
        })?,
        Format::Json => {
            let rows: Vec<Value> = table
                .iter()
                .map(|r| {
                    json!({
                        "regime": r.regime,
                        "delta_omega": r.delta_omega,
                        "omega_plus_offset": r.eig[0],
                        "omega_plus_imag": r.eig[1],
                        "omega_minus_offset": r.eig[2],
                        "omega_minus_imag": r.eig[3],
                        "dos": r.dos,
                    })
                })
                .collect();
            staged.add_json(output, &json!({ "probe_offsets": offsets, "rows": rows }))?
        }
    }
    staged.commit()?;
    Ok(json!({ "output": output, "rows": table.len(), "points": points }))
}

fn lifetimes_json(params: &ptring::SystemParams) -> CliResult<Value> {
    Ok(json!({
        "tau_high_q": tau_high_q(params)?,
        "tau_low_q": tau_low_q(params)?,
        "lifetime_contrast": lifetime_contrast(params)?,
    }))
}

fn fit_spectrum(a: FitSpectrumArgs) -> CliResult<Value> {
    let input = required(&a.input, "input")?;
    let output = required(&a.output, "output")?;
    let file = File::open(input).map_err(io_err(input))?;
    let spec = Spectrum::read_csv(BufReader::new(file))?;
    if spec.kind != SpectrumKind::Transmission {
        return Err(CliError::input(format!("{}: expected a transmission spectrum", input.display())));
    }
    let mut guess = a.model.params();
    let geom = a.geometry.geometry(a.model.center_nm());
    let found = find_resonances(&spec, a.prominence.unwrap_or(0.5), Baseline::Unity)?;
    // every detected dip, shifted by whole main-ring FSRs onto the reference mode
    let reduced = |c: f64| c - ((c - guess.omega1) / geom.fsr1).round() * geom.fsr1;
    if let Some(w) = found
        .iter()
        .map(|r| reduced(r.center))
        .min_by(|x, y| (x - guess.omega1).abs().total_cmp(&(y - guess.omega1).abs()))
    {
        guess.omega1 = w;
    }
    let options = ParamFitOptions {
        tuning: a.geometry.tuning(),
        tie_gammas: a.tie_gammas,
        clip_sigma: a.clip_sigma,
        lm: LmOptions {
            max_iterations: a.max_iterations.unwrap_or(10_000),
            ..LmOptions::default()
        },
    };
    let fit = extract_system_params(&spec, &geom, &guess, &options)?;
    let lifetimes = lifetimes_json(&fit.params)?;
    let mut result = serde_json::to_value(&fit).map_err(|e| CliError::io("json", e))?;
    if let (Value::Object(map), Value::Object(extra)) = (&mut result, lifetimes.clone()) {
        map.extend(extra);
        map.insert("resonances".into(), json!(found));
    }
    let mut staged = Staged::new();
    staged.add_json(output, &result)?;
    staged.commit()?;
    let p = &fit.params;
    Ok(json!({
        "gamma1_ghz": p.gamma1 / GHZ,
        "gamma2_ghz": p.gamma2 / GHZ,
        "gamma_c_ghz": p.gamma_c / GHZ,
        "kappa_ghz": p.kappa / GHZ,
        "tuning_ghz": fit.tuning / GHZ,
        "tau_high_q_ps": lifetimes["tau_high_q"].as_f64().unwrap_or(f64::NAN) / PS,
        "tau_low_q_ps": lifetimes["tau_low_q"].as_f64().unwrap_or(f64::NAN) / PS,
        "lifetime_contrast": lifetimes["lifetime_contrast"],
        "warnings": fit.warnings,
    }))
}

fn predict_lifetime(a: PredictLifetimeArgs) -> CliResult<Value> {
    let params = a.model.params();
    params.validate()?;
    let mut result = lifetimes_json(&params)?;
    let (plus, minus) = tau_exact(&params)?;
    result["tau_exact"] = json!({ "omega_plus": plus, "omega_minus": minus });
    if let Some(width) = a.tau_1e_ps {
        let j1 = a.jitter1_ps.unwrap_or(74.5) * PS;
        let j2 = a.jitter2_ps.unwrap_or(53.5) * PS;
        result["deconvolved"] = json!(LifetimeEstimate::from_width(width * PS, j1, j2)?);
    }
    if let Some(output) = &a.output {
        let mut staged = Staged::new();
        staged.add_json(output, &result)?;
        staged.commit()?;
    }
    Ok(result)
}

fn write_stream(staged: &mut Staged, path: &Path, stream: &TimestampStream, format: Format) -> CliResult<()> {
    match format {
        Format::Csv => staged.add(path, |w| Ok(write_csv(w, &[stream])?)),
        Format::Json => staged.add_json(path, stream),
    }
}

fn simulate_pairs(a: SimulatePairsArgs) -> CliResult<Value> {
    let signal_out = required(&a.signal_out, "signal-out")?;
    let idler_out = required(&a.idler_out, "idler-out")?;
    let cfg = a.source.config(a.seed.unwrap_or(0));
    let (signal, idler) = generate_pair_streams(&cfg)?;
    let format = a.format.unwrap_or(Format::Csv);
    let mut staged = Staged::new();
    write_stream(&mut staged, signal_out, &signal, format)?;
    write_stream(&mut staged, idler_out, &idler, format)?;
    staged.commit()?;
    let rate = pair_rate(&cfg);
    Ok(json!({
        "pair_rate": rate,
        "expected_singles_signal": rate * cfg.eff_signal + cfg.dark_signal,
        "expected_singles_idler": rate * cfg.eff_idler + cfg.dark_idler,
        "signal_events": signal.len(),
        "idler_events": idler.len(),
    }))
}

/// The stream named `channel`, or the only stream of the file.
fn load_stream(path: &Path, channel: Option<&str>) -> CliResult<TimestampStream> {
    let file = File::open(path).map_err(io_err(path))?;
    let streams = read_csv(BufReader::new(file))?;
    match channel {
        Some(name) => match streams.into_iter().find(|s| s.channel == name) {
            Some(s) => Ok(s),
            None => Ok(TimestampStream::empty(name)),
        },
        None => match streams.len() {
            0 => Ok(TimestampStream::empty(path.display().to_string())),
            1 => Ok(streams.into_iter().next().unwrap()),
            n => Err(CliError::input(format!(
                "{} holds {n} channels; choose one with --start-channel/--stop-channel",
                path.display()
            ))),
        },
    }
}

fn analyze(a: AnalyzeArgs) -> CliResult<Value> {
    let output = required(&a.output, "output")?;
    let start = load_stream(required(&a.start, "start")?, a.start_channel.as_deref())?;
    let stop = load_stream(required(&a.stop, "stop")?, a.stop_channel.as_deref())?;
    let cfg = AnalysisConfig {
        bin_width: a.bin_width_ps.unwrap_or(10.0) * PS,
        span: a.span_ns.unwrap_or(10.0) * 1e-9,
        jitter_start: a.jitter_start_ps.unwrap_or(53.5) * PS,
        jitter_stop: a.jitter_stop_ps.unwrap_or(74.5) * PS,
        peak_factor: a.peak_factor.unwrap_or(3.0),
        accidental_factor: a.accidental_factor.unwrap_or(10.0),
        allow_lower_bound: a.allow_lower_bound,
    };
    let (hist, result) = analyze_streams(&start, &stop, &cfg)?;
    let mut staged = Staged::new();
    if let Some(path) = &a.histogram {
        let ps = |s: f64| (s / PS).round() as i64;
        staged.add_json(
            path,
            &json!({
                "bin_width_ps": ps(hist.bin_width),
                "offsets_ps": hist.offsets.iter().map(|o| ps(*o)).collect::<Vec<_>>(),
                "counts": hist.counts,
                "start_channel": hist.start_channel,
                "stop_channel": hist.stop_channel,
                "total_starts": hist.total_starts,
            }),
        )?;
    }
    let f = result.fit;
    let c = result.car;
    let summary = json!({
        "tau_1e": f.tau_1e,
        "decay": f.decay,
        "amplitude": f.amplitude,
        "baseline": f.baseline,
        "center": f.center,
        "tau": result.tau,
        "car": c.car,
        "car_sigma": c.car_sigma,
        "peak_counts": c.peak_counts,
        "accidental_mean": c.accidental_mean,
        "lower_bound": c.lower_bound,
        "histogram": a.histogram,
    });
    staged.add_json(output, &summary)?;
    staged.commit()?;
    Ok(summary)
}

fn franson(a: FransonArgs) -> CliResult<Value> {
    let output = required(&a.output, "output")?;
    let seed = a.seed.unwrap_or(0);
    let n = a.phases.unwrap_or(21);
    if n < 2 {
        return Err(CliError::input("invalid phases: need at least 2"));
    }
    let phases = linear_grid(0.0, 2.0 * std::f64::consts::PI, n);
    let mut counts = Vec::with_capacity(n);
    for (k, &phase) in phases.iter().enumerate() {
        counts.push(simulate_franson(&FransonConfig {
            phase,
            visibility_true: a.visibility_true.unwrap_or(0.871),
            base_rate: a.base_rate.unwrap_or(40.0),
            singles_signal: a.singles_signal.unwrap_or(40.1e3),
            singles_idler: a.singles_idler.unwrap_or(40.0e3),
            integration_time: a.integration_time_s.unwrap_or(20.0),
            seed: seed.wrapping_add(k as u64),
        })?);
    }
    let coincidences: Vec<u64> = counts.iter().map(|c| c.coincidences).collect();
    let fit = visibility_fit(&phases, &coincidences, a.trials.unwrap_or(1000), seed)?;
    let bell = bell_threshold_check(&fit);
    let result = json!({
        "phases": phases,
        "coincidences": coincidences,
        "signal_singles": counts.iter().map(|c| c.signal_singles).collect::<Vec<_>>(),
        "idler_singles": counts.iter().map(|c| c.idler_singles).collect::<Vec<_>>(),
        "visibility": fit.visibility,
        "sigma": fit.sigma,
        "fit_amplitude": fit.fit_amplitude,
        "fit_offset": fit.fit_offset,
        "fit_phase": fit.fit_phase,
        "n_trials": fit.n_trials,
        "violates": bell.violates,
        "margin": bell.margin,
    });
    let mut staged = Staged::new();
    staged.add_json(output, &result)?;
    staged.commit()?;
    Ok(json!({
        "visibility": fit.visibility,
        "sigma": fit.sigma,
        "violates": bell.violates,
        "margin": bell.margin,
    }))
}

fn g2(a: G2Args) -> CliResult<Value> {
    let output = required(&a.output, "output")?;
    let source = SourceArgs {
        pgr_coefficient: Some(0.0),
        detector: a.detector.clone(),
        ..Default::default()
    }
    .config(0);
    let hbt = HbtConfig {
        mean_pairs_per_window: a.mean_pairs.unwrap_or(0.02),
        splitter_ratio: a.splitter_ratio.unwrap_or(0.5),
        n_windows: a.windows.unwrap_or(1_000_000),
        window_period: a.window_period_ns.unwrap_or(10.0) * 1e-9,
        seed: a.seed.unwrap_or(0),
    };
    let delays: Vec<f64> = a
        .delays_ns
        .clone()
        .unwrap_or_else(|| vec![-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0])
        .iter()
        .map(|d| d * 1e-9)
        .collect();
    let (herald, arm1, arm2) = simulate_hbt(&source, &hbt)?;
    let window = a.coincidence_window_ns.unwrap_or(1.0) * 1e-9;
    let r = heralded_g2(&herald, &arm1, &arm2, window, &delays)?;
    let result = json!({
        "delays_ps": r.delays.iter().map(|d| (d / PS).round() as i64).collect::<Vec<_>>(),
        "g2": r.g2,
        "g2_zero": r.g2_zero,
        "sigma_zero": r.sigma_zero,
        "heralds": herald.len(),
    });
    let mut staged = Staged::new();
    staged.add_json(output, &result)?;
    staged.commit()?;
    Ok(json!({ "g2_zero": r.g2_zero, "sigma_zero": r.sigma_zero, "heralds": herald.len() }))
}
