//! CSV and JSON artifacts of a run.
//!
//! Every CSV starts with `#` metadata rows, then one `# column` row per
//! column, then the header. `t` is always the first column. Values use the
//! shortest round-trip exponent form, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use schmidt_core::analysis::PureAnalysis;
use schmidt_core::effective::{lindblad_assembly, master_residuals};
use schmidt_core::hilbert::{partial_trace, Subsystem};
use schmidt_core::numkernel::ComplexMatrix;
use schmidt_core::schmidt::DARK_TOL;
use schmidt_core::thermo::{spectral_gaps, track_spectrum, FluxLedger};

use crate::config::OutputKind;
use crate::error::CliError;
use crate::runner::{Computed, Experiment, MixedRun, Severity};

pub struct Table {
    names: Vec<String>,
    descriptions: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(times: &[f64]) -> Self {
        let mut t = Self {
            names: Vec::new(),
            descriptions: Vec::new(),
            columns: Vec::new(),
        };
        t.push("t", "time", times.to_vec());
        t
    }

    pub fn push(&mut self, name: impl Into<String>, description: impl Into<String>, values: Vec<f64>) {
        debug_assert!(self.columns.is_empty() || values.len() == self.columns[0].len());
        self.names.push(name.into());
        self.descriptions.push(description.into());
        self.columns.push(values);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn render(&self, meta: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        for (n, d) in self.names.iter().zip(&self.descriptions) {
            let _ = writeln!(s, "# column {n}: {d}");
        }
        s.push_str(&self.names.join(","));
        s.push('\n');
        let rows = self.columns.first().map_or(0, Vec::len);
        for r in 0..rows {
            for (c, col) in self.columns.iter().enumerate() {
                if c > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{:e}", col[r]);
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path, meta: &[(String, String)]) -> Result<(), CliError> {
        fs::write(path, self.render(meta)).map_err(|e| CliError::io(path, e))
    }
}

const SUB: [&str; 2] = ["1", "2"];

pub fn energies_table(exp: &Experiment) -> Table {
    let e = exp.energy();
    let mut t = Table::new(&e.times);
    t.push("U0", "total energy <H0>", e.total.clone());
    for k in 0..2 {
        t.push(format!("bare_{}", SUB[k]), format!("bare local energy <H{}>", SUB[k]), e.bare[k].clone());
    }
    t.push("interaction", "interaction energy <Hint>", e.interaction.clone());
    for k in 0..2 {
        let s = SUB[k];
        t.push(format!("eff_{s}"), format!("effective local energy <H~{s}> = tr(H~{s} rho{s})"), e.u_eff[k].clone());
        t.push(format!("lamb_shift_{s}"), format!("<H_LS{s}>: part of H~{s} - H{s} diagonal in the bare eigenbasis"), e.lamb_shift[k].clone());
        t.push(format!("cross_{s}"), format!("<H_X{s}>: off-diagonal remainder of H~{s} - H{s}"), e.cross[k].clone());
    }
    t.push("additivity", "<H~1> + <H~2> - U0(t0)", e.additivity.clone());
    t
}

pub fn flux_table(l: &FluxLedger) -> Table {
    let id = l.definition.id();
    let mut t = Table::new(&l.times);
    for k in 0..2 {
        let s = SUB[k];
        let p = &l.parts[k];
        t.push(format!("U_{s}"), format!("[{id}] local energy of subsystem {s}"), p.energy.clone());
        t.push(format!("dW_{s}"), format!("[{id}] work rate dW{s}/dt"), p.work_rate.clone());
        t.push(format!("dQ_{s}"), format!("[{id}] heat rate dQ{s}/dt"), p.heat_rate.clone());
        t.push(format!("W_{s}"), format!("[{id}] cumulative work since t0"), p.work.clone());
        t.push(format!("Q_{s}"), format!("[{id}] cumulative heat since t0"), p.heat.clone());
    }
    t.push("net_rate", format!("[{id}] sum over subsystems of dW/dt + dQ/dt"), l.net_rate());
    t
}

pub fn entropy_table(exp: &Experiment) -> Table {
    let e = exp.entropy();
    let mut t = Table::new(&e.times);
    t.push("S_1", "von Neumann entropy of rho1", e.s1.clone());
    t.push("S_2", "von Neumann entropy of rho2", e.s2.clone());
    t.push("purity_1", "tr(rho1^2)", e.purity1.clone());
    t.push("purity_2", "tr(rho2^2)", e.purity2.clone());
    t.push("mutual_information", "S_1 + S_2 - S(rho0)", e.mutual.clone());
    if !e.schmidt.is_empty() {
        t.push("schmidt_entropy", "Shannon entropy of the squared Schmidt coefficients", e.schmidt.clone());
    }
    t
}

pub fn schmidt_table(a: &PureAnalysis) -> Table {
    let frames = &a.frames.frames;
    let mut t = Table::new(&a.frames.times());
    let r = frames[0].paired();
    for j in 0..r {
        t.push(format!("lambda_{}", j + 1), format!("Schmidt coefficient of tracked branch {}", j + 1), frames.iter().map(|f| f.lambda[j]).collect());
    }
    for j in 0..r {
        t.push(format!("sign_{}", j + 1), format!("continuation sign of branch {}", j + 1), frames.iter().map(|f| f.sign[j]).collect());
    }
    let mut overlap = vec![f64::NAN];
    overlap.extend(&a.frames.continuity.min_overlap);
    t.push("min_overlap", "min |<phi_j(t_prev)|phi_j(t)>| over branches and subsystems", overlap);
    t.push("flags", "number of tracking flags on the frame", frames.iter().map(|f| f.flags.len() as f64).collect());
    t
}

pub fn spectrum_table(a: &PureAnalysis) -> Result<Table, CliError> {
    let mut t = Table::new(&a.frames.times());
    for k in Subsystem::BOTH {
        let s = SUB[k.index()];
        let series = a.effective.get(k);
        let (values, _, _) = track_spectrum(series)?;
        for j in 0..values[0].len() {
            t.push(format!("eps_{s}_{}", j + 1), format!("tracked eigenvalue {} of H~{s}", j + 1), values.iter().map(|v| v[j]).collect());
        }
        t.push(format!("gap_{s}"), format!("largest minus smallest eigenvalue of H~{s}"), spectral_gaps(series)?);
    }
    Ok(t)
}

pub fn pure_residuals_table(a: &PureAnalysis, ch: &schmidt_core::dynamics::CompositeHamiltonian) -> Result<Table, CliError> {
    let n = a.frames.len();
    let mut t = Table::new(&a.frames.times());
    t.push("additivity", "<H~1> + <H~2> - U0(t0)", a.energy.additivity.clone());
    t.push("energy_balance", "<H1> + <H2> + <Hint> - U0(t0)", a.energy.balance.clone());
    for k in 0..2 {
        t.push(format!("antihermitian_{}", SUB[k]), format!("anti-Hermitian norm removed from H~{}", SUB[k]), a.effective.antihermitian_residual[k].clone());
    }
    let mut master = [[vec![f64::NAN; n], vec![f64::NAN; n]], [vec![f64::NAN; n], vec![f64::NAN; n]]];
    let mut lindblad = [vec![f64::NAN; n], vec![f64::NAN; n]];
    for i in 1..n.saturating_sub(1) {
        let r = master_residuals(ch, &a.frames, &a.traj, i)?;
        for k in Subsystem::BOTH {
            let ki = k.index();
            master[ki][0][i] = r[ki].r1;
            master[ki][1][i] = r[ki].r2;
            let l = lindblad_assembly(&a.frames, k, i, DARK_TOL)?;
            if l.excluded.is_empty() {
                lindblad[ki][i] = l.distance;
            }
        }
    }
    for k in 0..2 {
        let s = SUB[k];
        t.push(format!("master_bare_{s}"), format!("|ih drho{s}/dt - [H{s}, rho{s}] - tr(other)[Hint, rho0]|, interior steps"), master[k][0].clone());
        t.push(format!("master_eff_{s}"), format!("|ih drho{s}/dt - [H~{s}, rho{s}] - population term|, interior steps"), master[k][1].clone());
    }
    for k in 0..2 {
        let s = SUB[k];
        t.push(format!("lindblad_{s}"), format!("|jump-operator dissipator - population term| on subsystem {s}; empty when a branch is excluded"), lindblad[k].clone());
    }
    let recon = a.frames.frames.iter().zip(&a.traj.states).map(|(f, psi)| f.reconstruct().distance(psi)).collect();
    t.push("reconstruction", "|sum_j s_j lambda_j phi1_j phi2_j - Psi|", recon);
    t.push("orthonormality", "max deviation of the Schmidt bases from orthonormal", a.frames.frames.iter().map(|f| f.orthonormality_residual()).collect());
    Ok(t)
}

pub fn mixed_residuals_table(m: &MixedRun, ch: &schmidt_core::dynamics::CompositeHamiltonian) -> Result<Table, CliError> {
    let l = &m.ledger;
    let shape = ch.shape();
    let mut t = Table::new(&l.times);
    t.push("additivity", "ensemble <H~1> + <H~2> - tr(H0 rho0(t0))", l.additivity.clone());
    t.push("conservation", "ensemble <H0> - tr(H0 rho0(t0))", l.u0.iter().map(|u| u - l.u0_direct).collect());
    for k in Subsystem::BOTH {
        let d = shape.dim(k);
        let series = m
            .global
            .iter()
            .enumerate()
            .map(|(i, rho)| {
                let avg = l.branches.iter().zip(&l.probabilities).fold(ComplexMatrix::zeros(d, d), |acc, (b, p)| {
                    &acc + &b.frames.frames[i].local_state(k).scale_re(*p)
                });
                Ok((&avg - partial_trace(rho, shape, k)?.matrix()).norm_fro())
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        let s = SUB[k.index()];
        t.push(format!("local_state_{s}"), format!("|sum_eta P_eta rho{s}_eta - partial trace of rho0(t)|"), series);
    }
    let drift = m
        .global
        .iter()
        .enumerate()
        .map(|(i, rho)| {
            l.branches
                .iter()
                .zip(&l.probabilities)
                .map(|(b, p)| {
                    let psi = &b.traj.states[i];
                    (psi.inner(&psi.apply(rho.matrix())).re - p).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    t.push("population_drift", "max_eta |<Psi_eta|rho0(t)|Psi_eta> - P_eta|", drift);
    Ok(t)
}

/// Writes the configured artifacts and returns the paths written.
pub fn write_all(exp: &Experiment, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let meta = metadata_rows(exp);
    let mut written = Vec::new();
    let mut emit = |name: String, table: Table, dir: &Path| -> Result<(), CliError> {
        let path = dir.join(name);
        table.write(&path, &meta)?;
        written.push(path);
        Ok(())
    };
    let want = |k: OutputKind| exp.config.outputs.contains(&k);
    if want(OutputKind::Energies) {
        emit("energies.csv".into(), energies_table(exp), dir)?;
    }
    if want(OutputKind::Fluxes) {
        for l in exp.fluxes() {
            emit(format!("fluxes_{}.csv", l.definition.id()), flux_table(l), dir)?;
        }
    }
    if want(OutputKind::Entropy) {
        emit("entropy.csv".into(), entropy_table(exp), dir)?;
    }
    match &exp.computed {
        Computed::Pure(p) => {
            if want(OutputKind::Residuals) {
                emit("residuals.csv".into(), pure_residuals_table(&p.analysis, &exp.ch)?, dir)?;
            }
            if want(OutputKind::Spectrum) {
                emit("spectrum.csv".into(), spectrum_table(&p.analysis)?, dir)?;
            }
            if want(OutputKind::Schmidt) {
                emit("schmidt.csv".into(), schmidt_table(&p.analysis), dir)?;
            }
        }
        Computed::Mixed(m) => {
            if want(OutputKind::Residuals) {
                emit("residuals.csv".into(), mixed_residuals_table(m, &exp.ch)?, dir)?;
            }
            for (eta, b) in m.ledger.branches.iter().enumerate() {
                let sub = dir.join(format!("branch_{eta}"));
                if want(OutputKind::Spectrum) || want(OutputKind::Schmidt) {
                    fs::create_dir_all(&sub).map_err(|e| CliError::io(&sub, e))?;
                }
                if want(OutputKind::Spectrum) {
                    emit("spectrum.csv".into(), spectrum_table(b)?, &sub)?;
                }
                if want(OutputKind::Schmidt) {
                    emit("schmidt.csv".into(), schmidt_table(b), &sub)?;
                }
            }
        }
    }
    let flags = exp.flags();
    let flags_path = dir.join("flags.json");
    write_json(&flags_path, &serde_json::to_value(&flags).expect("serializable"))?;
    written.push(flags_path);
    let meta_path = dir.join("metadata.json");
    write_json(&meta_path, &metadata_json(exp, &flags))?;
    written.push(meta_path);
    Ok(written)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn metadata_rows(exp: &Experiment) -> Vec<(String, String)> {
    let mut rows = vec![("system".to_string(), exp.config.label())];
    if let Some((w1, w2, g)) = exp.config.parameters() {
        rows.push(("parameters".into(), format!("omega1={w1} omega2={w2} g={g}")));
    }
    rows.push(("hbar".into(), exp.ch.hbar().to_string()));
    rows.push(("grid".into(), format!("t0={} t1={} dt={} steps={}", exp.config.grid.t0, exp.config.grid.t1, exp.grid.dt, exp.grid.steps)));
    rows.push(("gauge".into(), exp.policy.name()));
    rows.push(("derivatives".into(), "central differences with step dt; one-sided second order at both ends".into()));
    rows.push(("tolerances".into(), "dark branch lambda<=1e-12; degeneracy 1e-8; rank 1e-10".into()));
    rows
}

fn metadata_json(exp: &Experiment, flags: &[crate::runner::FlagRecord]) -> serde_json::Value {
    let params = exp.config.parameters().map(|(w1, w2, g)| json!({"omega1": w1, "omega2": w2, "g": g}));
    let shape = exp.ch.shape();
    let initial = match &exp.computed {
        Computed::Pure(_) => json!({"kind": "pure"}),
        Computed::Mixed(m) => json!({
            "kind": "ensemble",
            "probabilities": m.ensemble.probabilities,
            "dropped_mass": m.ensemble.dropped_mass,
            "log_partition": m.ensemble.log_partition,
        }),
    };
    let continuity: Vec<_> = exp
        .branches()
        .iter()
        .map(|a| {
            let c = &a.frames.continuity;
            json!({
                "min_overlap": c.min_overlap.iter().copied().fold(1.0, f64::min),
                "sign_changes": c.sign_changes.len(),
                "flagged_steps": c.flagged.len(),
            })
        })
        .collect();
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "system": exp.config.label(),
        "parameters": params,
        "dims": [shape.d1, shape.d2],
        "hbar": exp.ch.hbar(),
        "grid": {"t0": exp.config.grid.t0, "t1": exp.config.grid.t1, "dt": exp.grid.dt, "steps": exp.grid.steps},
        "gauge": exp.policy.name(),
        "initial": initial,
        "sec": exp.sec,
        "u0": exp.energy().u0,
        "outputs": exp.config.outputs,
        "continuity": continuity,
        "flags": {
            "warning": flags.iter().filter(|f| f.severity == Severity::Warning).count(),
            "error": flags.iter().filter(|f| f.severity == Severity::Error).count(),
        },
    })
}
