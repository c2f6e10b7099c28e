use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hexns::accept::{self, Evidence, Relation, Suite, Verdict};
use hexns::asymptotics::{alpha_window_increments, invariant_from_flux, large_time_extrapolate, MomentumFlux};
use hexns::farfield::{self, render_density, BiotSavart, Component, DensitySource};
use hexns::io::report::{self, write_timing, ProbeOutcome};
use hexns::io::{emit_report, parse_config, read_checkpoint, write_checkpoint, RunReport};
use hexns::kernels::{kernel_table, Point2};
use hexns::verify::{self, HeatCase, HeatDatum, SyntheticTensorField};

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

mod failure;
use failure::Failure;

#[derive(Parser)]
#[command(name = "hexns", version, about = "Far-field hexagon laboratory for 2D Navier-Stokes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write its report, final checkpoint and timing.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probe the far field of a checkpoint on circles.
    Probe(ProbeArgs),
    /// Summarize the invariant series of a report.
    Analyze {
        /// Directory holding report.json, or the file itself.
        #[arg(long)]
        report: PathBuf,
        /// Snapshots per alpha increment window.
        #[arg(long, default_value_t = 4)]
        window: usize,
    },
    /// Run a lemma harness and write its tables and verdicts.
    Verify {
        #[arg(long, value_enum)]
        suite: VerifySuite,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render `R³|u|` as a PGM raster from a checkpoint or a flux triple.
    Render(RenderArgs),
    /// Run acceptance suites; `all` runs every criterion.
    Accept {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Print verdicts as JSON instead of one line each.
        #[arg(long)]
        json: bool,
    },
    /// Re-emit a stored report and print its verdicts.
    Report {
        #[arg(long)]
        dir: PathBuf,
        /// Where to re-emit; defaults to checking only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump kernel samples on a polar lattice as CSV.
    KernelTable {
        #[arg(long, default_value = "0.25,0.5,1,2,4")]
        radii: String,
        #[arg(long, default_value = "0.1,1")]
        times: String,
        #[arg(long, default_value_t = 8)]
        angles: usize,
    },
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Radii as multiples of `--support`.
    #[arg(long, default_value = "3,4,6")]
    radii: String,
    #[arg(long, default_value_t = 1.0)]
    support: f64,
    #[arg(long, default_value_t = 512)]
    mtheta: usize,
    #[arg(long, default_value = "u2")]
    component: String,
    /// Directory for probe.json and the profile CSV; CSV goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, conflicts_with = "flux")]
    checkpoint: Option<PathBuf>,
    /// `a,b,d` of the momentum-flux matrix.
    #[arg(long, allow_hyphen_values = true)]
    flux: Option<String>,
    #[arg(long, default_value = "u2")]
    component: String,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 6.0)]
    half_width: f64,
    /// Pixels closer to the origin are masked.
    #[arg(long, default_value_t = 1.0)]
    inner: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "render")]
    stem: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifySuite {
    Kernels,
    Duhamel,
    Heat,
    Decay,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HEXNS_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("HEXNS_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("HEXNS_THREADS must be a positive integer, got 0".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn dispatch(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Probe(a) => probe(a),
        Command::Analyze { report, window } => analyze(&report, window),
        Command::Verify { suite, out } => verify_suite(suite, &out),
        Command::Render(a) => render(a),
        Command::Accept { suite, json } => accept_suites(&suite, json),
        Command::Report { dir, out } => report_cmd(&dir, out.as_deref()),
        Command::KernelTable { radii, times, angles } => kernel_table_cmd(&radii, &times, angles),
    }
}

fn list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Failure::usage(format!("{what}: cannot parse {s:?} as a number"))))
        .collect()
}

fn print_verdicts(verdicts: &[Verdict]) {
    for v in verdicts {
        outln!("{v}");
    }
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Result<bool, Failure> {
    let text = fs::read_to_string(config).map_err(|e| Failure::usage(format!("{}: {e}", config.display())))?;
    let cfg = parse_config(&text).map_err(|e| Failure::usage(e.to_string()))?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output));
    let start = Instant::now();
    let sim = report::simulate(&cfg)?;
    emit_report(&sim.report, &dir)?;
    write_checkpoint(&sim.trajectory.final_state, &dir.join("final.chk"))?;
    write_timing(&dir, start.elapsed().as_secs_f64())?;
    print_verdicts(&sim.report.verdicts);
    Ok(sim.report.passed())
}

fn probe(a: ProbeArgs) -> Result<bool, Failure> {
    let component: Component = a.component.parse().map_err(|_| Failure::usage(format!("unknown component {:?}", a.component)))?;
    if a.mtheta < farfield::MIN_ANGLES {
        return Err(Failure::usage(format!("--mtheta must be at least {}", farfield::MIN_ANGLES)));
    }
    let radii: Vec<f64> = list(&a.radii, "--radii")?.into_iter().map(|r| r * a.support).collect();
    let state = read_checkpoint(&a.checkpoint)?;
    let set = farfield::probe_set(&state.omega, &state.flux, state.time, &radii, a.mtheta, &[component])?;
    let profiles: Vec<_> = set.profiles.iter().collect();
    let csv = report::profile_csv(&profiles);
    let verdict = Verdict::new(5, "far-field structure", accept::far_field_evidence(&set));
    match a.out {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
            let body = serde_json::json!({ "time": set.time, "invariant": set.invariant, "radii": set.radii, "verdict": verdict });
            let p = dir.join("probe.json");
            fs::write(&p, format!("{}\n", serde_json::to_string_pretty(&body).expect("serializes"))).map_err(|e| Failure::io(&p, e))?;
            let p = dir.join(format!("profile_{}.csv", component.name()));
            fs::write(&p, csv).map_err(|e| Failure::io(&p, e))?;
            outln!("{verdict}");
        }
        None => out!("{csv}"),
    }
    Ok(verdict.passed)
}

fn load_report(path: &Path) -> Result<RunReport, Failure> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Failure::io(&file, e))?;
    Ok(RunReport::from_json(&text)?)
}

fn analyze(path: &Path, window: usize) -> Result<bool, Failure> {
    if window == 0 {
        return Err(Failure::usage("--window must be positive"));
    }
    let rep = load_report(path)?;
    let samples: Vec<_> = rep.rows.iter().map(|r| hexns::asymptotics::FluxSample { t: r.t, flux: r.flux, energy: r.energy }).collect();
    let late = &samples[samples.len() / 2..];
    let increments = alpha_window_increments(late, window);
    let estimate = large_time_extrapolate(&samples, 1.0);
    let peak = rep.rows.iter().max_by(|a, b| a.l.total_cmp(&b.l));
    let body = serde_json::json!({
        "snapshots": rep.rows.len(),
        "final": samples.last().map(|s| invariant_from_flux(&s.flux)),
        "peak_l": peak.map(|r| serde_json::json!({ "t": r.t, "l": r.l })),
        "late_alpha_increments": increments,
        "late_increments_nonincreasing": increments.windows(2).all(|w| w[1] <= w[0]),
        "large_time": estimate,
    });
    outln!("{}", serde_json::to_string_pretty(&body).expect("serializes"));
    Ok(true)
}

fn write(dir: &Path, name: &str, body: impl AsRef<[u8]>) -> Result<(), Failure> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| Failure::io(&p, e))
}

fn verify_suite(suite: VerifySuite, out: &Path) -> Result<bool, Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let radii = [4.0, 8.0, 16.0];
    let verdicts = match suite {
        VerifySuite::Kernels => {
            let v = accept::kernel_identities()?;
            let env = hexns::kernels::remainder_envelope(1.0, 8.0, 64)?;
            write(out, "envelope.json", format!("{}\n", serde_json::to_string_pretty(&env).expect("serializes")))?;
            vec![v]
        }
        VerifySuite::Duhamel => {
            let m = [[1.0, 0.3], [0.3, -0.5]];
            let mut ev = Vec::new();
            for (name, w, strict) in [
                ("gaussian_a0", SyntheticTensorField::gaussian(1.0, m, 0.0)?, true),
                ("gaussian_a07", SyntheticTensorField::gaussian(1.0, m, 0.7)?, true),
                ("gradient_decay_q1.25", SyntheticTensorField::algebraic(1.0, 1.25, m, 0.0)?, false),
            ] {
                let tab = verify::duhamel_asymptotics_check(&w, 1.0, &radii)?;
                write(out, &format!("duhamel_{name}.csv"), tab.to_csv())?;
                ev.push(Evidence::flag(format!("{name}: residual strictly decreasing"), tab.strictly_decreasing));
                if strict {
                    ev.push(Evidence::new(format!("{name}: final residual / scale"), tab.final_fraction, Relation::Le, verify::DUHAMEL_FINAL_FRACTION));
                }
            }
            vec![Verdict::new(9, "duhamel asymptotics", ev)]
        }
        VerifySuite::Heat => {
            let mut ev = Vec::new();
            for (datum, case) in [
                (HeatDatum::GaussianVortex { width: 1.0 }, HeatCase::I),
                (HeatDatum::AlgebraicTail { power: 1.25 }, HeatCase::Ii),
                (HeatDatum::DipoleGradient, HeatCase::Iii),
                (HeatDatum::OscillatingCubic { wavenumber: 6.0 }, HeatCase::Boundary),
            ] {
                let tab = verify::heat_tail_check(&datum, case, 1.0, &radii)?;
                write(out, &format!("heat_{}.csv", case.name()), tab.to_csv())?;
                ev.push(Evidence::flag(format!("case {}: table passes", case.name()), tab.passes()));
            }
            let growth = verify::heat_growth_in_time(&HeatDatum::AlgebraicTail { power: 1.25 }, 16.0, 0.25, 5)?;
            let mut csv = String::from("T,bound\n");
            for (t, b) in &growth.rows {
                csv.push_str(&format!("{t:.16e},{b:.16e}\n"));
            }
            write(out, "heat_growth.csv", csv)?;
            ev.push(Evidence::new("case ii: max local exponent in T", growth.max_exponent, Relation::Le, 3.0 + verify::DEGREE_SLACK));
            vec![Verdict::new(9, "heat tails", ev)]
        }
        VerifySuite::Decay => {
            let v = accept::large_time(&accept::LargeTimeSetup::default())?;
            vec![v]
        }
    };
    write(out, "verdicts.json", format!("{}\n", serde_json::to_string_pretty(&verdicts).expect("serializes")))?;
    print_verdicts(&verdicts);
    Ok(verdicts.iter().all(|v| v.passed))
}

fn render(a: RenderArgs) -> Result<bool, Failure> {
    let component: Component = a.component.parse().map_err(|_| Failure::usage(format!("unknown component {:?}", a.component)))?;
    if a.size == 0 || a.half_width <= 0.0 {
        return Err(Failure::usage("--size and --half-width must be positive"));
    }
    let raster = match (&a.checkpoint, &a.flux) {
        (Some(path), None) => {
            let state = read_checkpoint(path)?;
            let bs = BiotSavart::new(&state.omega);
            render_density(DensitySource::Simulated(&bs), component, a.size, a.half_width, a.inner)?
        }
        (None, Some(text)) => {
            let v = list(text, "--flux")?;
            let [fa, fb, fd] = v[..] else { return Err(Failure::usage("--flux takes exactly three numbers a,b,d")) };
            let flux = MomentumFlux::new(fa, fb, fd);
            render_density(DensitySource::ClosedForm(&flux), component, a.size, a.half_width, a.inner)?
        }
        _ => return Err(Failure::usage("render needs exactly one of --checkpoint or --flux")),
    };
    raster.write(&a.out, &a.stem)?;
    Ok(true)
}

fn accept_suites(name: &str, json: bool) -> Result<bool, Failure> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        name.split(',').map(|s| s.trim().parse::<Suite>().map_err(|e| Failure::usage(e.to_string()))).collect::<Result<_, _>>()?
    };
    let shared = suites.contains(&Suite::Theorem) && suites.contains(&Suite::AngularSpeed);
    let theorem = if shared { Some(accept::theorem_run(&accept::TheoremSetup::default())?) } else { None };
    let mut verdicts = Vec::new();
    for s in suites {
        let v = match (s, &theorem) {
            (Suite::Theorem, Some(run)) => vec![accept::main_theorem(run)],
            (Suite::AngularSpeed, Some(run)) => vec![accept::angular_speed(run)],
            _ => accept::run_suite(s)?,
        };
        if !json {
            print_verdicts(&v);
        }
        verdicts.extend(v);
    }
    if json {
        outln!("{}", serde_json::to_string_pretty(&verdicts).expect("serializes"));
    }
    Ok(verdicts.iter().all(|v| v.passed))
}

fn report_cmd(dir: &Path, out: Option<&Path>) -> Result<bool, Failure> {
    let file = if dir.is_dir() { dir.join("report.json") } else { dir.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Failure::io(&file, e))?;
    let rep = RunReport::from_json(&text)?;
    if rep.to_json() != text {
        return Err(Failure::runtime(format!("{} does not re-serialize to identical bytes", file.display())));
    }
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
        write(out, "report.json", rep.to_json())?;
        write(out, "series.csv", rep.series_csv())?;
    }
    let measured = rep.probes.iter().filter(|p| matches!(p, ProbeOutcome::Measured(_))).count();
    outln!("{} snapshots, {} steps, {} probe records ({} measured)", rep.rows.len(), rep.steps, rep.probes.len(), measured);
    print_verdicts(&rep.verdicts);
    Ok(rep.passed())
}

fn kernel_table_cmd(radii: &str, times: &str, angles: usize) -> Result<bool, Failure> {
    if angles == 0 {
        return Err(Failure::usage("--angles must be positive"));
    }
    let mut points = Vec::new();
    for t in list(times, "--times")? {
        for r in list(radii, "--radii")? {
            for k in 0..angles {
                points.push((Point2::polar(r, (k as f64 + 0.5) * std::f64::consts::TAU / angles as f64), t));
            }
        }
    }
    out!("{}", kernel_table(&points)?);
    Ok(true)
}
