//! Run reports: a JSON document, a CSV time series, angular-profile CSVs and
//! PGM rasters. Everything written by [`emit_report`] is a pure function of
//! the report, so a deterministic run re-emits identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accept::{angular_speed_evidence, far_field_evidence, Evidence, Relation, Verdict};
use crate::asymptotics::{invariant_from_flux, time_series_csv, HexInvariant, MomentumFlux};
use crate::farfield::{render_density, BiotSavart, Component, DensitySource, FarFieldError, FarFieldProfile, ProbeSet, RadiusProbe, Raster};
use crate::grid::GridScalarField;
use crate::initdata::{self, InitError};
use crate::io::config::SimConfig;
use crate::kernels::Point2;
use crate::solver::{self, FlowState, SolverError, Trajectory};

pub const SCHEMA_VERSION: u32 = 1;
pub const RASTER_SIZE: usize = 128;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    FarField(#[from] FarFieldError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub package: String,
    pub version: String,
    pub schema: u32,
    pub seed: u64,
}

impl Provenance {
    pub fn current(seed: u64) -> Self {
        Self { package: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into(), schema: SCHEMA_VERSION, seed }
    }
}

/// Invariants of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub t: f64,
    pub step: u64,
    pub flux: MomentumFlux,
    pub l: f64,
    pub alpha: Option<f64>,
    /// `|α̇|`.
    pub hex_speed: Option<f64>,
    /// `|α̇|/3`.
    pub vertex_speed: Option<f64>,
    pub speed_bound: Option<f64>,
    pub energy: f64,
    pub enstrophy: f64,
    pub dissipation_accum: f64,
    /// `|‖u‖² + 2∫‖∇u‖² − ‖u₀‖²| / ‖u₀‖²`.
    pub energy_residual: f64,
}

/// Probe results at one time with the profiles split off into CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub time: f64,
    pub invariant: HexInvariant,
    pub support_radius: f64,
    pub radii: Vec<RadiusProbe>,
    pub extrapolated_mean: Option<f64>,
    pub extrapolated_error: Option<f64>,
    pub cv_decreasing: Option<bool>,
    /// Periodic minus free-space velocity on the outermost circle, relative
    /// to the free-space value.
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub image_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProbeOutcome {
    Measured(ProbeRecord),
    Rejected { time: f64, support_radius: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SimConfig,
    pub provenance: Provenance,
    pub box_len: f64,
    pub steps: usize,
    pub rows: Vec<InvariantRow>,
    pub probes: Vec<ProbeOutcome>,
    pub verdicts: Vec<Verdict>,
    #[serde(skip)]
    pub profiles: Vec<FarFieldProfile>,
    #[serde(skip)]
    pub rasters: Vec<(String, Raster)>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Time series in the column layout of [`time_series_csv`].
    pub fn series_csv(&self) -> String {
        let samples: Vec<_> = self
            .rows
            .iter()
            .map(|r| crate::asymptotics::FluxSample { t: r.t, flux: r.flux, energy: r.energy })
            .collect();
        time_series_csv(&samples)
    }
}

/// A finished run: the report plus the trajectory it was built from.
pub struct Simulation {
    pub report: RunReport,
    pub trajectory: Trajectory,
}

/// Builds the initial state described by `config`.
pub fn initial_state(config: &SimConfig) -> Result<FlowState, ReportError> {
    let u0 = initdata::make_datum(config.grid(), &config.bumps(), config.init.class, config.init.seed)?;
    Ok(FlowState::from_velocity(&u0)?)
}

/// Runs `config` from its initial datum.
pub fn simulate(config: &SimConfig) -> Result<Simulation, ReportError> {
    let state = initial_state(config)?;
    simulate_from(config, state)
}

/// Runs `config` from `state`, probing at the configured times.
pub fn simulate_from(config: &SimConfig, state: FlowState) -> Result<Simulation, ReportError> {
    let mut opts = config.run_options();
    opts.final_time = opts.final_time.max(state.time);
    let trajectory = solver::run(state, &opts)?;
    let report = build_report(config, &trajectory)?;
    Ok(Simulation { report, trajectory })
}

fn rows_of(traj: &Trajectory) -> Vec<InvariantRow> {
    traj.snapshots
        .iter()
        .map(|s| {
            let inv = invariant_from_flux(&s.flux);
            InvariantRow {
                t: s.time,
                step: s.step,
                flux: s.flux,
                l: inv.l,
                alpha: inv.hexagon.map(|h| h.alpha),
                hex_speed: inv.hexagon.map(|h| h.hex_speed),
                vertex_speed: inv.hexagon.map(|h| h.vertex_speed),
                speed_bound: inv.hexagon.map(|h| h.bound),
                energy: s.energy,
                enstrophy: s.enstrophy,
                dissipation_accum: s.dissipation_accum,
                energy_residual: (s.energy + s.dissipation_accum - traj.initial_energy).abs() / traj.initial_energy,
            }
        })
        .collect()
}

fn image_defect(omega: &GridScalarField, bs: &BiotSavart, radius: f64) -> Result<f64, ReportError> {
    let g = *omega.grid();
    let u = solver::velocity_from_vorticity(omega)?;
    let h = g.dx();
    let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
    for k in 0..8 {
        let th = (k as f64 + 0.5) * std::f64::consts::TAU / 8.0;
        let target = Point2::polar(radius, th);
        let node = |x: f64| ((x - g.coord(0)) / h).round().rem_euclid(g.n() as f64) as usize;
        let (i, j) = (node(target.x1), node(target.x2));
        let free = bs.velocity(g.point(i, j))?;
        let periodic = [u.u1.at(i, j), u.u2.at(i, j)];
        diff = diff.max((periodic[0] - free[0]).hypot(periodic[1] - free[1]));
        scale = scale.max(free[0].hypot(free[1]));
    }
    Ok(if scale > 0.0 { diff / scale } else { 0.0 })
}

/// Assembles the report of a finished trajectory.
pub fn build_report(config: &SimConfig, traj: &Trajectory) -> Result<RunReport, ReportError> {
    let rows = rows_of(traj);
    let mut verdicts = Vec::new();
    let residual = rows.iter().map(|r| r.energy_residual).fold(0.0, f64::max);
    verdicts.push(Verdict::new(4, "energy equality", vec![Evidence::new("max energy-equality residual", residual, Relation::Le, 1e-6)]));
    if rows.iter().any(|r| r.alpha.is_some()) {
        let (ev, note) = angular_speed_evidence(&traj.samples());
        let ev: Vec<Evidence> = ev.into_iter().filter(|e| !e.value.is_nan()).collect();
        verdicts.push(Verdict::new(8, "angular-speed bound", ev).with_note(note));
    }

    let mut probes = Vec::new();
    let mut profiles = Vec::new();
    let mut rasters = Vec::new();
    if let Some(section) = &config.probe {
        let radii = config.probe_radii();
        for t in config.probe_times() {
            let Some(snap) = traj.snapshots.iter().min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs())) else {
                continue;
            };
            let Some(omega) = snap.omega.as_ref() else { continue };
            let bs = BiotSavart::new(omega);
            let support = bs.support_radius();
            let set = match crate::farfield::probe_set(omega, &snap.flux, snap.time, &radii, section.mtheta, &section.components) {
                Ok(set) => set,
                Err(e @ FarFieldError::InsideSupport { .. }) => {
                    verdicts.push(Verdict::new(
                        5,
                        "far-field precondition",
                        vec![Evidence::new(format!("t={} effective support radius x 1.5", snap.time), 1.5 * support, Relation::Lt, radii.iter().copied().fold(f64::INFINITY, f64::min))],
                    ));
                    probes.push(ProbeOutcome::Rejected { time: snap.time, support_radius: support, reason: e.to_string() });
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let outer = radii.iter().copied().fold(0.0, f64::max);
            let defect = image_defect(omega, &bs, outer)?;
            if set.invariant.hexagon.is_some() {
                verdicts.push(Verdict::new(5, "far-field structure", far_field_evidence(&set)).with_note(format!("t = {}", set.time)));
            }
            let idx = probes.len();
            for &c in &section.components {
                let w = (1.2 * outer).min(0.5 * omega.grid().box_len());
                let inner = radii.iter().copied().fold(f64::INFINITY, f64::min) * 0.5;
                if snap.flux.z().norm() > 0.0 {
                    rasters.push((format!("predicted_{}_{idx}", c.name()), render_density(DensitySource::ClosedForm(&snap.flux), c, RASTER_SIZE, w, inner)?));
                }
                rasters.push((format!("simulated_{}_{idx}", c.name()), render_density(DensitySource::Simulated(&bs), c, RASTER_SIZE, w, inner)?));
            }
            let ProbeSet { time, invariant, radii: rp, profiles: pr, extrapolated_mean, extrapolated_error, cv_decreasing } = set;
            profiles.extend(pr);
            probes.push(ProbeOutcome::Measured(ProbeRecord {
                time,
                invariant,
                support_radius: support,
                radii: rp,
                extrapolated_mean,
                extrapolated_error,
                cv_decreasing,
                image_defect: defect,
            }));
        }
    }

    Ok(RunReport {
        config: config.clone(),
        provenance: Provenance::current(config.init.seed),
        box_len: config.box_len(),
        steps: traj.steps.len(),
        rows,
        probes,
        verdicts,
        profiles,
        rasters,
    })
}

/// `theta` followed by one value column per radius, for one component at
/// one time.
pub fn profile_csv(profiles: &[&FarFieldProfile]) -> String {
    let mut out = String::from("theta");
    for p in profiles {
        let _ = write!(out, ",R={}", p.radius);
    }
    out.push('\n');
    let Some(first) = profiles.first() else { return out };
    for (k, th) in first.theta.iter().enumerate() {
        let _ = write!(out, "{th:.16e}");
        for p in profiles {
            let _ = write!(out, ",{:.16e}", p.values[k]);
        }
        out.push('\n');
    }
    out
}

fn profile_files(profiles: &[FarFieldProfile]) -> Vec<(String, String)> {
    let mut times: Vec<f64> = Vec::new();
    for p in profiles {
        if !times.contains(&p.time) {
            times.push(p.time);
        }
    }
    let mut out = Vec::new();
    for (idx, &t) in times.iter().enumerate() {
        let mut comps: Vec<Component> = Vec::new();
        for p in profiles.iter().filter(|p| p.time == t) {
            if !comps.contains(&p.component) {
                comps.push(p.component);
            }
        }
        for c in comps {
            let group: Vec<&FarFieldProfile> = profiles.iter().filter(|p| p.time == t && p.component == c).collect();
            out.push((format!("profile_{}_{idx}.csv", c.name()), profile_csv(&group)));
        }
    }
    out
}

/// Writes `report.json`, `series.csv`, one profile CSV per component and
/// probe time, and a `.pgm`/`.txt` pair per raster. Returns the paths.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = vec![("report.json".to_string(), report.to_json().into_bytes()), ("series.csv".to_string(), report.series_csv().into_bytes())];
    files.extend(profile_files(&report.profiles).into_iter().map(|(n, s)| (n, s.into_bytes())));
    for (stem, r) in &report.rasters {
        files.push((format!("{stem}.pgm"), r.to_pgm()));
        files.push((format!("{stem}.txt"), r.sidecar().into_bytes()));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Wall-clock timing, kept out of `report.json` so reports stay reproducible.
pub fn write_timing(dir: &Path, seconds: f64) -> Result<PathBuf, ReportError> {
    let path = dir.join("timing.json");
    let body = serde_json::json!({ "wall_seconds": seconds });
    fs::write(&path, format!("{body}\n")).map_err(io_err(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_config;

    fn small(extra: &str) -> SimConfig {
        parse_config(&format!("[grid]\nn = 64\n[time]\nfinal = 0.002\nsnapshot = 0.001\n{extra}")).unwrap()
    }

    #[test]
    fn no_probe_section_gives_rows_only() {
        let sim = simulate(&small("")).unwrap();
        let r = &sim.report;
        assert!(r.probes.is_empty());
        assert!(r.profiles.is_empty() && r.rasters.is_empty());
        assert_eq!(r.rows.len(), 3);
        assert!(!r.to_json().contains("\"radii\""));
    }

    #[test]
    fn json_round_trips() {
        let r = simulate(&small("")).unwrap().report;
        let back = RunReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.to_json(), r.to_json());
        assert_eq!(back.rows, r.rows);
    }

    #[test]
    fn profile_csv_layout() {
        let mk = |r: f64| FarFieldProfile { radius: r, time: 0.5, component: Component::U2, theta: vec![0.0, 1.0], values: vec![r, -r] };
        let (a, b) = (mk(3.0), mk(4.0));
        let csv = profile_csv(&[&a, &b]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "theta,R=3,R=4");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",-4.0000000000000000e0"));
    }
}
