//! Dispatch of a [`RunConfig`] to the library, with report assembly.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use resoforge::averaging::{
    cosine_rescale, lie_step_nonres, lie_step_res, verify_conjugacy, AveragedNF, AveragingOptions, NaturalHam, NfKind,
};
use resoforge::cover::{measure_r2, raster, Classifier, CoveringParams, RegionKind};
use resoforge::fourier::{ModeVector, PotentialFile, TrigPoly};
use resoforge::genericity::{
    check_membership, empirical_genericity, perturbation_radius, sample_product_measure, trial_rng, GenericityParams,
};
use resoforge::standard_form::{symplectic_residual, verify_standard, FixedPointOptions, StandardForm};
use resoforge::suite::{run_criterion, SuiteConfig, SuiteReport};
use resoforge::unimodular::bezout_report;
use resoforge::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, NormalFormKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// One reported check. Hard checks decide the exit status; soft ones are informational.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flag {
    pub name: String,
    pub pass: bool,
    pub hard: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

impl Flag {
    fn hard(name: &str, pass: bool, margin: Option<f64>) -> Self {
        Flag {
            name: name.to_string(),
            pass,
            hard: true,
            margin,
        }
    }

    fn soft(name: &str, pass: bool, margin: Option<f64>) -> Self {
        Flag {
            name: name.to_string(),
            pass,
            hard: false,
            margin,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub versions: Value,
    pub flags: Vec<Flag>,
    pub warnings: Vec<String>,
    pub result: Value,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.flags.iter().any(|f| f.hard && !f.pass) {
            EXIT_INVARIANT
        } else {
            EXIT_OK
        }
    }
}

#[derive(Debug)]
pub struct RunError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotAGenerator(_)
            | Error::InvalidInput(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::CutoffOrdering(_)
            | Error::CutoffBelowThreshold { .. }
            | Error::OutsideUnitBall(_) => EXIT_CONFIG,
            _ => EXIT_INVARIANT,
        };
        RunError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError {
            code: EXIT_CONFIG,
            message: format!("csv: {e}"),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

fn config_error(message: impl Into<String>) -> RunError {
    RunError {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

struct Draft {
    flags: Vec<Flag>,
    warnings: Vec<String>,
    result: Value,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Executes the configured command and assembles its report. Artifacts other than the
/// report itself (CSV, sampled potentials) are written here.
pub fn run(config: &RunConfig) -> RunResult<Report> {
    let draft = match &config.command {
        Command::Sample { k_max, trials } => sample(config, *k_max, *trials)?,
        Command::CheckGeneric { k_max } => check_generic(config, *k_max)?,
        Command::CoverClassify { points } => cover_classify(config, points)?,
        Command::CoverMeasure { samples } => cover_measure(config, *samples)?,
        Command::CoverRaster { resolution } => cover_raster(config, *resolution)?,
        Command::Bezout { k } => bezout(k)?,
        Command::Normalize {
            kind,
            k,
            base_point,
            order,
            degree,
            verify_points,
        } => normalize(config, *kind, k.as_deref(), base_point, *order, *degree, *verify_points)?,
        Command::Standardize {
            k,
            base_point,
            order,
            degree,
            samples,
            grid,
        } => standardize(config, k, base_point, *order, *degree, *samples, *grid)?,
        Command::Report { quick, only } => report(config, *quick, only.as_deref())?,
    };
    Ok(Report {
        command: command_name(&config.command).to_string(),
        config: config.clone(),
        versions: json!({ "resoforge": env!("CARGO_PKG_VERSION"), "report_format": 1 }),
        flags: draft.flags,
        warnings: draft.warnings,
        result: draft.result,
    })
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Sample { .. } => "sample",
        Command::CheckGeneric { .. } => "check-generic",
        Command::CoverClassify { .. } => "cover classify",
        Command::CoverMeasure { .. } => "cover measure",
        Command::CoverRaster { .. } => "cover raster",
        Command::Bezout { .. } => "bezout",
        Command::Normalize { .. } => "normalize",
        Command::Standardize { .. } => "standardize",
        Command::Report { .. } => "report",
    }
}

fn csv_writer(path: &Path) -> RunResult<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn sample(config: &RunConfig, k_max: u32, trials: u64) -> RunResult<Draft> {
    let p = &config.params;
    let f = sample_product_measure(p.n, p.s, k_max, config.seed);
    let file = PotentialFile::from_trig_poly(&f, p.s);
    if let Some(path) = &config.outputs.potential {
        std::fs::write(path, serde_json::to_string_pretty(&file).map_err(Error::from)?)?;
    }
    if let Some(path) = &config.outputs.csv {
        let mut w = csv_writer(path)?;
        let mut header: Vec<String> = (1..=p.n).map(|i| format!("k{i}")).collect();
        header.extend(["re".into(), "im".into()]);
        w.write_record(&header)?;
        for m in &file.modes {
            let mut row: Vec<String> = m.k.iter().map(|v| v.to_string()).collect();
            row.extend([m.re.to_string(), m.im.to_string()]);
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    let mut result = json!({ "modes": file.modes.len(), "k_max": k_max });
    if config.outputs.potential.is_none() {
        result["potential"] = to_value(&file);
    }
    if trials > 0 {
        let est = empirical_genericity(p.n, p.s, p.delta, k_max, trials, config.seed)?;
        result["genericity"] = to_value(&est);
    }
    Ok(Draft {
        flags: Vec::new(),
        warnings: Vec::new(),
        result,
    })
}

fn check_generic(config: &RunConfig, k_max: u32) -> RunResult<Draft> {
    let p = &config.params;
    let f = config.potential(k_max)?;
    let params = GenericityParams::new(p.n, p.s, p.delta, p.beta, k_max)?;
    let report = check_membership(&f, &params)?;
    let mut warnings = Vec::new();
    if report.symbolic_proof != Some(true) {
        warnings.push(format!(
            "membership is certified on the window [{:.3}, {}] only",
            report.checked_range.0, report.checked_range.1
        ));
    }
    let margin = report
        .lower_margin
        .into_iter()
        .chain(report.morse_margin)
        .fold(f64::INFINITY, f64::min);
    let flags = vec![Flag::soft(
        "in class over the window",
        report.in_class,
        margin.is_finite().then_some(margin),
    )];
    Ok(Draft {
        flags,
        warnings,
        result: json!({ "membership": to_value(&report), "perturbation_radius": perturbation_radius(&report, p.s) }),
    })
}

fn kind_name(kind: RegionKind) -> &'static str {
    match kind {
        RegionKind::R0 => "R0",
        RegionKind::R1 => "R1",
        RegionKind::R2 => "R2",
    }
}

fn cover_classify(config: &RunConfig, points: &[Vec<f64>]) -> RunResult<Draft> {
    let params = config.params.covering()?;
    let classifier = Classifier::new(&params);
    let mut rows = Vec::with_capacity(points.len());
    let mut uncovered = 0usize;
    for y in points {
        if y.len() != params.n {
            return Err(config_error(format!(
                "point {y:?} does not have {} components",
                params.n
            )));
        }
        let labels = classifier.classify(y)?;
        if labels.is_empty() {
            uncovered += 1;
        }
        rows.push(json!({ "y": y, "labels": to_value(&labels) }));
    }
    if let Some(path) = &config.outputs.csv {
        let mut w = csv_writer(path)?;
        w.write_record(["point", "kind", "k", "l"])?;
        for (i, y) in points.iter().enumerate() {
            for label in classifier.classify(y)? {
                let show = |m: &Option<ModeVector>| m.as_ref().map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    i.to_string(),
                    kind_name(label.kind).into(),
                    show(&label.k),
                    show(&label.l),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(Draft {
        flags: vec![Flag::hard("every point carries a region label", uncovered == 0, None)],
        warnings: params.flags.clone(),
        result: json!({ "params": to_value(&params), "points": rows }),
    })
}

fn cover_measure(config: &RunConfig, samples: usize) -> RunResult<Draft> {
    let params = config.params.covering()?;
    let m = measure_r2(&params, samples, config.seed)?;
    let flags = vec![
        Flag::hard("no uncovered sample", m.uncovered == 0, None),
        Flag::soft(
            "estimate below the counting bound",
            m.r2_only_estimate <= m.bound,
            Some(m.bound - m.r2_only_estimate),
        ),
    ];
    Ok(Draft {
        flags,
        warnings: params.flags.clone(),
        result: json!({ "params": to_value(&params), "measure": to_value(&m) }),
    })
}

fn cover_raster(config: &RunConfig, resolution: usize) -> RunResult<Draft> {
    let path = config
        .outputs
        .csv
        .as_ref()
        .ok_or_else(|| config_error("cover raster writes CSV; pass --csv"))?;
    let params = config.params.covering()?;
    let cells = raster(&params, resolution)?;
    let mut w = csv_writer(path)?;
    w.write_record(["y1", "y2", "code"])?;
    let mut counts = [0usize; 8];
    let mut outside = 0usize;
    for (y1, y2, code) in &cells {
        w.write_record([y1.to_string(), y2.to_string(), code.to_string()])?;
        if *code == 255 {
            outside += 1;
        } else {
            counts[*code as usize] += 1;
        }
    }
    w.flush()?;
    Ok(Draft {
        flags: vec![Flag::hard(
            "every cell inside the ball is labelled",
            counts[0] == 0,
            None,
        )],
        warnings: params.flags.clone(),
        result: json!({ "resolution": resolution, "cells": cells.len(), "outside": outside, "code_counts": counts }),
    })
}

fn bezout(k: &[i64]) -> RunResult<Draft> {
    let report = bezout_report(&ModeVector(k.to_vec()))?;
    let flags = vec![
        Flag::hard("det A = 1", report.det == "1", None),
        Flag::hard(
            "entry bounds",
            report.bounds.holds,
            Some(report.bounds.a_inv_bound - report.bounds.a_inv_inf as f64),
        ),
        Flag::hard("decoupling map is exactly symplectic", report.symplectic, None),
    ];
    Ok(Draft {
        flags,
        warnings: Vec::new(),
        result: to_value(&report),
    })
}

fn build_nf(
    config: &RunConfig,
    kind: NormalFormKind,
    k: Option<&[i64]>,
    base_point: &[f64],
    order: usize,
    degree: u32,
) -> RunResult<(NaturalHam, AveragedNF, CoveringParams, TrigPoly)> {
    let p = &config.params;
    let params = p.covering()?;
    if base_point.len() != p.n {
        return Err(config_error(format!("base point needs {} components", p.n)));
    }
    let f = config.potential(params.k_cut)?;
    let ham = NaturalHam::new(p.epsilon()?, f.clone())?;
    let opts = AveragingOptions {
        order,
        degree,
        extra_orders: 2,
    };
    let nf = match kind {
        NormalFormKind::Nonresonant => lie_step_nonres(&ham, &params, base_point, opts)?,
        NormalFormKind::Resonant => {
            let k = k.ok_or_else(|| config_error("the resonant normal form needs --k"))?;
            lie_step_res(&ham, &ModeVector(k.to_vec()), &params, base_point, opts)?
        }
    };
    Ok((ham, nf, params, f))
}

#[allow(clippy::too_many_arguments)]
fn normalize(
    config: &RunConfig,
    kind: NormalFormKind,
    k: Option<&[i64]>,
    base_point: &[f64],
    order: usize,
    degree: u32,
    verify_points: usize,
) -> RunResult<Draft> {
    let (ham, nf, params, f) = build_nf(config, kind, k, base_point, order, degree)?;
    let band_left = nf.f_rem().filter(|m| nf.in_band(m)).len();
    let mut flags = vec![Flag::hard(
        "band removed through the normalized order",
        band_left == 0,
        None,
    )];
    let mut warnings = params.flags.clone();
    let mut result = json!({
        "params": to_value(&params),
        "normal_form": to_value(&nf.to_data()),
        "band_remainder_norm": nf.band_remainder_norm(nf.radius, params.s_o),
    });
    if let NfKind::Resonant { k } = nf.kind.clone() {
        let lattice_left = nf
            .f_rem()
            .filter(|m| ModeVector(m.to_vec()).multiple_of(&k).is_some())
            .len();
        flags.push(Flag::hard(
            "resonant lattice kept in the normal form",
            lattice_left == 0,
            None,
        ));
        match cosine_rescale(&nf, &f, config.params.delta, &params) {
            Ok(form) => {
                let s = form.summary();
                flags.push(Flag::soft("F* below its threshold", s.f_star_ok, None));
                flags.push(Flag::soft("g* below its threshold", s.g_star_ok, None));
                flags.push(Flag::soft("f* below its threshold", s.rem_star_ok, None));
                result["cosine_form"] = to_value(&s);
            }
            Err(e) => warnings.push(format!("cosine rescaling skipped: {e}")),
        }
    }
    if verify_points > 0 {
        let points: Vec<(Vec<f64>, Vec<f64>)> = (0..verify_points as u64)
            .map(|t| {
                let mut rng = trial_rng(config.seed, t);
                let x = (0..base_point.len()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
                (base_point.to_vec(), x)
            })
            .collect();
        let conj = verify_conjugacy(&ham, &nf, &points, false)?;
        flags.push(Flag::soft(
            "transform displacement below threshold",
            conj.displacement_ok,
            Some(conj.displacement_threshold - conj.max_displacement),
        ));
        result["conjugacy"] = to_value(&conj);
    }
    Ok(Draft {
        flags,
        warnings,
        result,
    })
}

#[allow(clippy::too_many_arguments)]
fn standardize(
    config: &RunConfig,
    k: &[i64],
    base_point: &[f64],
    order: usize,
    degree: u32,
    samples: usize,
    grid: usize,
) -> RunResult<Draft> {
    let (_, nf, params, f) = build_nf(config, NormalFormKind::Resonant, Some(k), base_point, order, degree)?;
    let options = FixedPointOptions {
        grid,
        tol: config.tolerances.fixed_point_residual,
        ..FixedPointOptions::default()
    };
    let sf = StandardForm::build(&nf, &f, config.params.beta, config.params.delta, &params, options)?;
    let verification = verify_standard(&sf, samples, config.seed)?;
    let tol = &config.tolerances;
    let (mut energy, mut decoupling, mut symplectic, mut residual) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (p, q) in sf.sample_points(samples.max(1), config.seed) {
        let fp = sf.solve(&p[1..])?;
        residual = residual.max(fp.residual);
        let pt = sf.energy_identity(&fp, &p, &q)?;
        energy = energy.max((pt.lhs - pt.rhs).abs() / pt.rhs.abs().max(1e-300));
        decoupling = decoupling.max(sf.decoupling_defect(&p, q[0])?);
        for j in sf.jacobians(&fp, &p, &q)? {
            symplectic = symplectic.max(symplectic_residual(&j));
        }
    }
    let mut flags = vec![
        Flag::hard(
            "energy identity",
            energy <= tol.energy_identity,
            Some(tol.energy_identity - energy),
        ),
        Flag::hard(
            "decoupling identity",
            decoupling <= tol.decoupling,
            Some(tol.decoupling - decoupling),
        ),
        Flag::hard(
            "symplectic Jacobians",
            symplectic <= tol.symplectic,
            Some(tol.symplectic - symplectic),
        ),
        Flag::hard(
            "fixed-point residual",
            residual < tol.fixed_point_residual,
            Some(tol.fixed_point_residual - residual),
        ),
    ];
    if let Some(h) = &verification.hypothesis {
        flags.push(Flag::soft(
            "size hypothesis of the fixed-point problem",
            h.holds,
            Some(h.threshold - h.ratio),
        ));
    }
    for c in &verification.checks {
        flags.push(Flag::soft(&c.name, c.pass, Some(c.margin())));
    }
    let center = sf.p_hat_center();
    let fp = sf.solve(&center)?;
    let count = 64usize;
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let q = 2.0 * PI * i as f64 / count as f64;
        rows.push(json!({
            "q": q,
            "G": sf.potential(&fp, q)?,
            "G_bar": sf.g_bar.eval(q),
            "nu": sf.nu(&center, 0.25 * sf.r, q)?,
        }));
    }
    Ok(Draft {
        flags,
        warnings: params.flags.clone(),
        result: json!({
            "characteristics": to_value(&verification.characteristics),
            "kappa": verification.characteristics.kappa,
            "g_bar_morse_beta": verification.g_bar_morse_beta,
            "h0_at_center": sf.h0(&fp),
            "max_energy_error": energy,
            "max_decoupling_defect": decoupling,
            "max_symplectic_residual": symplectic,
            "grid": { "p_hat": center, "p1_for_nu": 0.25 * sf.r, "samples": rows },
        }),
    })
}

fn report(config: &RunConfig, quick: bool, only: Option<&[u32]>) -> RunResult<Draft> {
    let suite = SuiteConfig {
        quick,
        seed: config.seed,
        timings: true,
    };
    let ids: Vec<u32> = match only {
        Some(ids) => {
            if let Some(bad) = ids.iter().find(|&&i| !(1..=12).contains(&i)) {
                return Err(config_error(format!("no acceptance criterion {bad}")));
            }
            ids.to_vec()
        }
        None => (1..=12).collect(),
    };
    let criteria: Vec<_> = ids.iter().map(|&id| run_criterion(id, &suite)).collect();
    let flags = criteria
        .iter()
        .map(|c| Flag::hard(&format!("criterion {} {}", c.id, c.name), c.pass, Some(c.margin)))
        .collect();
    let all_pass = criteria.iter().all(|c| c.pass);
    let report = SuiteReport {
        config: suite,
        criteria,
        all_pass,
    };
    Ok(Draft {
        flags,
        warnings: Vec::new(),
        result: json!({ "table": report.table(), "suite": to_value(&report) }),
    })
}
