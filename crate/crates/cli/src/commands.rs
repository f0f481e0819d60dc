use std::path::{Path, PathBuf};

use ddsense::modulation::{trace_plan, unit_fourier, z_statistics, Component};
use ddsense::seqdsl::{parse_quantity, parse_unit_with_warnings, SequenceSource};
use ddsense::sequence::{phase_stream, validate_unit, PulseUnit, SequencePlan};
use ddsense::spectroscopy::{build_unit, dual_basis_scan, run_robustness_map, run_spectrum, RobustnessMap, SpectrumResult};

use crate::config::{ConfigText, ReadoutChoice, RobustnessFile, SpectrumFile};
use crate::error::{CliError, CliResult};
use crate::output::{num, Run};

/// Options shared by every subcommand.
pub struct Globals {
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub overrides: Vec<String>,
}

fn spectrum_rows(r: &SpectrumResult) -> Vec<Vec<String>> {
    r.points
        .iter()
        .map(|p| vec![num(p.frequency_hz), num(p.standard), num(p.randomized_mean), num(p.randomized_std), num(p.ideal)])
        .collect()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

pub fn spectrum(g: &Globals, path: &Path) -> CliResult<()> {
    let cfg = ConfigText::load(path, &g.overrides, g.seed)?;
    let file: SpectrumFile = cfg.parse()?;
    let (config, choice) = file.resolve(&cfg)?;
    let mut run = Run::start(&g.output, "spectrum", config.seed, Some((path, &cfg)))?;
    let cols = header(&["freq_hz", "p_standard", "p_randomized_mean", "p_randomized_std", "p_ideal"]);
    match choice {
        ReadoutChoice::One(_) => {
            let r = run_spectrum(&config)?;
            run.csv("spectrum.csv", &cols, &spectrum_rows(&r))?;
        }
        ReadoutChoice::Both => {
            let (x, mx) = dual_basis_scan(&config)?;
            run.csv("spectrum.csv", &cols, &spectrum_rows(&x))?;
            run.csv("spectrum_minus_x.csv", &cols, &spectrum_rows(&mx))?;
        }
    }
    let m = run.finish()?;
    eprintln!("wrote {}", m.display());
    Ok(())
}

fn map_rows(m: &RobustnessMap, grid: &[Vec<f64>]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut head = vec![format!("{}\\{}", m.y_label, m.x_label)];
    head.extend(m.x.iter().map(|&x| num(x)));
    let rows = m
        .y
        .iter()
        .zip(grid)
        .map(|(&y, row)| std::iter::once(num(y)).chain(row.iter().map(|&v| num(v))).collect())
        .collect();
    (head, rows)
}

pub fn robustness(g: &Globals, path: &Path) -> CliResult<()> {
    let cfg = ConfigText::load(path, &g.overrides, g.seed)?;
    let file: RobustnessFile = cfg.parse()?;
    let config = file.resolve(&cfg)?;
    let mut run = Run::start(&g.output, "robustness", config.seed, Some((path, &cfg)))?;
    let map = run_robustness_map(&config)?;
    let (h, rows) = map_rows(&map, &map.standard);
    run.csv("map_standard.csv", &h, &rows)?;
    let (h, rows) = map_rows(&map, &map.randomized);
    run.csv("map_randomized.csv", &h, &rows)?;
    println!("randomized ≥ standard on {:.1}% of {} cells", 100.0 * map.dominance_fraction(), map.x.len() * map.y.len());
    let m = run.finish()?;
    eprintln!("wrote {}", m.display());
    Ok(())
}

pub fn zstats(g: &Globals, ms: &[usize], samples: usize) -> CliResult<()> {
    if ms.contains(&0) {
        return Err(CliError::Usage("M must be at least 1".into()));
    }
    let seed = g.seed.unwrap_or(0);
    let mut run = Run::start(&g.output, "zstats", seed, None)?;
    let mut rows = Vec::new();
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}", "M", "mean|Z|^2", "se", "1/M", "var|Z|^2", "se", "(M-1)/M^3");
    for &m in ms {
        let s = z_statistics(m, samples, seed)?;
        println!(
            "{m:>6} {:>12.5e} {:>12.2e} {:>12.5e} {:>12.5e} {:>12.2e} {:>12.5e}",
            s.mean_abs_sq,
            s.mean_std_error,
            s.expected_mean(),
            s.variance_abs_sq,
            s.variance_std_error,
            s.expected_variance()
        );
        rows.push(vec![
            m.to_string(),
            s.samples.to_string(),
            num(s.mean_abs_sq),
            num(s.mean_std_error),
            num(s.expected_mean()),
            num(s.variance_abs_sq),
            num(s.variance_std_error),
            num(s.expected_variance()),
        ]);
    }
    let cols = header(&["m", "samples", "mean_abs_sq", "mean_std_error", "expected_mean", "variance_abs_sq", "variance_std_error", "expected_variance"]);
    run.csv("zstats.csv", &cols, &rows)?;
    run.finish()?;
    Ok(())
}

fn time_arg(name: &str, text: &str) -> CliResult<f64> {
    parse_quantity(text)
        .and_then(|q| q.as_time())
        .map_err(|m| CliError::Usage(format!("--{name}: {m}")))
}

/// A `.ddseq` file, or a built-in family at the given spacing and π-pulse
/// length (zero or absent for δ-pulses).
pub fn load_unit(target: &str, tau: Option<&str>, tpi: Option<&str>) -> CliResult<PulseUnit> {
    let path = Path::new(target);
    if target.ends_with(".ddseq") || path.is_file() {
        let src = SequenceSource::from_path(path).map_err(|e| CliError::io(path, e))?;
        let parsed = parse_unit_with_warnings(&src)?;
        for w in &parsed.warnings {
            eprintln!("{}:{w}", src.origin);
        }
        return Ok(parsed.value);
    }
    let tau = tau.ok_or_else(|| CliError::Usage(format!("`{target}` is a family name; --tau is required")))?;
    let tau = time_arg("tau", tau)?;
    let tpi = tpi.map(|t| time_arg("tpi", t)).transpose()?.unwrap_or(0.0);
    build_unit(target, tau, tpi).map_err(|e| match e {
        ddsense::Error::UnknownFamily(_) | ddsense::Error::OverlappingPulses { .. } => CliError::Usage(e.to_string()),
        other => other.into(),
    })
}

/// Samples per unit keeping at least 16 points in the shortest pulse.
fn samples_for(unit: &PulseUnit, requested: usize) -> usize {
    let shortest = unit.pulses().iter().map(|p| p.duration).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    if shortest.is_finite() {
        requested.max((16.0 * unit.duration() / shortest).ceil() as usize)
    } else {
        requested
    }
}

/// Returns whether the unit is valid.
pub fn validate(target: &str, tau: Option<&str>, tpi: Option<&str>) -> CliResult<bool> {
    let unit = load_unit(target, tau, tpi)?;
    let report = validate_unit(&unit);
    println!("unit {}: N={}, T={:e} s", unit.name(), unit.len(), unit.duration());
    for issue in &report.issues {
        println!("issue: {issue}");
    }
    if report.balanced {
        println!("balanced (residual {:e} s, tolerance {:e} s)", report.residual, report.tolerance);
    } else {
        println!("unbalanced: alternating-sum residual {:e} s (tolerance {:e} s)", report.residual, report.tolerance);
    }
    println!("{:>3} {:>14} {:>14} {:>10} {:>14}", "#", "center_s", "width_s", "phase/pi", "rabi_rad_s");
    for (i, p) in unit.pulses().iter().enumerate() {
        println!(
            "{i:>3} {:>14.6e} {:>14.6e} {:>10.4} {:>14.6e}",
            p.center_time,
            p.duration,
            p.phase / std::f64::consts::PI,
            p.rabi_frequency
        );
    }
    if report.issues.is_empty() {
        let plan = SequencePlan::standard(unit.clone(), 1)?;
        let trace = trace_plan(&plan, &[0.0], samples_for(&unit, 2000))?;
        let n = trace.fperp.len() as f64;
        let rms = (trace.fperp.iter().map(|v| v.norm_sqr()).sum::<f64>() / n).sqrt();
        let peak = trace.fperp.iter().map(|v| v.norm()).fold(0.0, f64::max);
        println!("modulation: mean F_z = {:.6e}", unit_fourier(&unit, 0.0, Component::Z).re);
        println!("            rms |F_perp| = {rms:.6e}, max |F_perp| = {peak:.6e}");
        for q in 1..=4 {
            println!(
                "            q={q}: |f_z| = {:.6e}, |f_perp| = {:.6e}",
                unit_fourier(&unit, q as f64, Component::Z).norm(),
                unit_fourier(&unit, q as f64, Component::Perp).norm()
            );
        }
    }
    Ok(report.is_valid())
}

pub struct ModfuncArgs<'a> {
    pub target: &'a str,
    pub tau: Option<&'a str>,
    pub tpi: Option<&'a str>,
    pub repetitions: usize,
    pub samples: usize,
    pub randomized: bool,
}

pub fn modfunc(g: &Globals, a: &ModfuncArgs) -> CliResult<()> {
    let unit = load_unit(a.target, a.tau, a.tpi)?;
    if a.repetitions == 0 {
        return Err(CliError::Usage("--repetitions must be at least 1".into()));
    }
    let seed = g.seed.unwrap_or(0);
    let plan = SequencePlan::standard(unit.clone(), a.repetitions)?;
    let phases = if a.randomized {
        phase_stream(seed, 0, 0, a.repetitions)
    } else {
        plan.zero_phases()
    };
    let trace = trace_plan(&plan, &phases, samples_for(&unit, a.samples))?;
    let mut run = Run::start(&g.output, "modfunc", seed, None)?;
    let rows: Vec<Vec<String>> = trace
        .time_grid
        .iter()
        .zip(&trace.fz)
        .zip(&trace.fperp)
        .map(|((t, z), p)| vec![num(*t), num(*z), num(p.re), num(p.im)])
        .collect();
    run.csv("modfunc.csv", &header(&["t_s", "f_z", "f_perp_re", "f_perp_im"]), &rows)?;
    let prow: Vec<Vec<String>> = phases.iter().enumerate().map(|(m, p)| vec![m.to_string(), num(*p)]).collect();
    run.csv("phases.csv", &header(&["unit", "global_phase_rad"]), &prow)?;
    run.finish()?;
    Ok(())
}
