use std::io::Write;
use std::path::Path;

use hardy_lab::atomic::{
    validate_atom, AtomKind, AtomReport, AtomicDecomposition, Branch, DecomposeConfig, Pipeline,
};
use hardy_lab::io::{self, IoError, OperatorFile, SpaceFile};
use hardy_lab::maximal::{
    default_grand_order, grand_maximal, hl_maximal, maximal_triple, radial_maximal, Dictionary, MaximalField, TGrid,
};
use hardy_lab::profiles::ProfileExport;
use hardy_lab::spectral::{default_fit_grid, finite_speed_check, fit_heat_constants};
use hardy_lab::whitney::{verify_cover, whitney_cover};
use hardy_lab::{fixtures, LpPair, MetricMeasureSpace, Profile, SpectralOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::provenance::{fitted, formula, measured};
use crate::{DecompFileArgs, DecomposeArgs, FixtureArgs, MaximalArgs, MaximalKindArg, ReportArgs, SignalArgs, WhitneyArgs};

const MARKOV_TOL: f64 = 1e-10;
const SUBORDINATION_TOL: f64 = 1e-6;
const CERTIFICATE_TOL: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-9;

/// A decomposition together with the inputs needed to recheck it.
#[derive(Serialize, Deserialize)]
struct DecompositionFile {
    inputs: Inputs,
    #[serde(flatten)]
    decomposition: AtomicDecomposition,
}

#[derive(Serialize, Deserialize)]
struct Inputs {
    space: SpaceFile,
    operator: OperatorFile,
    signal: Vec<f64>,
}

/// Prints the JSON value or the text rendering; a closed stdout is not an error.
fn emit(json_out: bool, value: &Value, text: impl FnOnce() -> String) {
    let body = if json_out { serde_json::to_string_pretty(value).expect("JSON values serialize") } else { text() };
    let _ = writeln!(std::io::stdout().lock(), "{body}");
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let fail = |e: csv::Error| CliError::input("FILE_WRITE", format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::input("FILE_WRITE", format!("{}: {e}", path.display())))
}

fn model(space: &SpaceFile, operator: &OperatorFile) -> Result<(MetricMeasureSpace, SpectralOperator), CliError> {
    let space = space.build()?;
    let op = operator.build()?;
    if op.len() != space.len() {
        return Err(CliError::input(
            "DIMENSION_MISMATCH",
            format!("operator has {} points, space has {}", op.len(), space.len()),
        ));
    }
    let mismatch = space.measure().iter().zip(op.mu()).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()));
    if mismatch {
        return Err(CliError::input("MEASURE_MISMATCH", "operator measure differs from the space measure"));
    }
    Ok((space, op))
}

fn load_model(space: &Path, operator: &Path) -> Result<(SpaceFile, OperatorFile, MetricMeasureSpace, SpectralOperator), CliError> {
    let sf: SpaceFile = io::read_json(space)?;
    let of: OperatorFile = io::read_json(operator)?;
    let (s, o) = model(&sf, &of)?;
    Ok((sf, of, s, o))
}

fn check_exponent(p: f64, upper: f64) -> Result<(), CliError> {
    if p > 0.0 && p <= upper {
        Ok(())
    } else {
        Err(CliError::input("P_OUT_OF_RANGE", format!("p = {p} must lie in (0, {upper}]")))
    }
}

/// `2^a..2^b` gives every power of two in between; `t0..t1` doubles from `t0` up to `t1`.
pub fn parse_tgrid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::input("BAD_TGRID", format!("cannot parse scale grid {s:?}"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let exponent = |v: &str| v.trim().strip_prefix("2^").map(|e| e.parse::<i32>());
    match (exponent(lo), exponent(hi)) {
        (Some(Ok(a)), Some(Ok(b))) if a <= b => Ok((a..=b).map(|e| 2f64.powi(e)).collect()),
        (None, None) => {
            let (t0, t1): (f64, f64) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
            if !(t0 > 0.0 && t1 >= t0 && t1.is_finite()) {
                return Err(bad());
            }
            Ok(std::iter::successors(Some(t0), |t| Some(2.0 * t)).take_while(|t| *t <= t1 * (1.0 + 1e-12)).collect())
        }
        _ => Err(bad()),
    }
}

pub fn parse_profile(s: &str) -> Result<Profile, CliError> {
    match s {
        "gaussian" => Ok(Profile::gaussian()),
        "exp" => Ok(Profile::exponential()),
        "stein" => Ok(Profile::stein()),
        _ => {
            let m = s
                .strip_prefix("admissible:")
                .and_then(|m| m.parse().ok())
                .ok_or_else(|| CliError::input("BAD_PROFILE", format!("unknown profile {s:?}")))?;
            Ok(Profile::admissible(m)?)
        }
    }
}

pub fn space_validate(path: &Path, json_out: bool) -> Result<(), CliError> {
    let file: SpaceFile = io::read_json(path)?;
    let space = match file.build() {
        Ok(s) => s,
        Err(IoError::Space(e)) => return Err(CliError::validation("INVALID_SPACE", e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let v = json!({
        "valid": true,
        "points": space.len(),
        "diam": measured(space.diam()),
        "total_mass": measured(space.total_mass()),
    });
    emit(json_out, &v, || format!("valid: {} points, diam {}, total mass {}", space.len(), space.diam(), space.total_mass()));
    Ok(())
}

pub fn space_report(path: &Path, unit: Option<f64>, json_out: bool) -> Result<(), CliError> {
    let space = io::read_space(path)?;
    if let Some(u) = unit.filter(|u| !(*u > 0.0 && u.is_finite())) {
        return Err(CliError::input("BAD_INPUT", format!("unit must be positive, got {u}")));
    }
    let g = match unit {
        Some(u) => space.geometry_report_with_unit(u),
        None => space.geometry_report(),
    };
    let v = json!({
        "points": space.len(),
        "diam": measured(space.diam()),
        "c0": measured(g.c0),
        "d": measured(g.d),
        "c1": measured(g.c1),
        "epsilon": measured(g.epsilon),
        "c2": measured(g.c2),
        "unit": measured(g.unit),
        "reverse_doubling_tested": g.reverse_tested,
    });
    emit(json_out, &v, || {
        format!(
            "points {}\ndiam {}\ndoubling c0 = {:.6} (d = {:.6})\nreverse doubling c1 = {:.6} (epsilon = {:.6})\nnon-collapsing c2 = {:.6} at unit {}",
            space.len(),
            space.diam(),
            g.c0,
            g.d,
            g.c1,
            g.epsilon,
            g.c2,
            g.unit
        )
    });
    Ok(())
}

pub fn spectral_diagnose(space: &Path, operator: &Path, tgrid: &str, nodes: usize, json_out: bool) -> Result<(), CliError> {
    let ts = parse_tgrid(tgrid)?;
    let (_, _, space, op) = load_model(space, operator)?;
    let mu = op.mu();
    let mut markov_defect = 0.0f64;
    for &t in &ts {
        for s in op.heat_kernel(t)?.row_sums(mu) {
            markov_defect = markov_defect.max((s - 1.0).abs());
        }
    }
    let fit = fit_heat_constants(&op, &space, &default_fit_grid(&space))?;
    let mut subordination = Vec::new();
    for t in [0.25, 1.0, 4.0] {
        let direct = op.poisson_direct(t)?;
        let sub = op.poisson_subordinated(t, nodes, f64::INFINITY)?;
        subordination.push(json!({ "t": t, "max_difference": measured((&direct.entries - &sub.entries).amax()) }));
    }
    let sub_max = subordination
        .iter()
        .map(|v| v["max_difference"]["value"].as_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let grid = TGrid::for_space(&space);
    let pair = LpPair::from_phi(&Profile::admissible(6)?);
    let speed = finite_speed_check(&op, &space, &pair, grid.k_lo..=grid.k_hi, fit.tau())?;
    let leak = speed.leakage.iter().map(|l| l.2).fold(0.0, f64::max);
    let markov_ok = !op.markov() || markov_defect < MARKOV_TOL;
    let sub_ok = sub_max < SUBORDINATION_TOL;
    let v = json!({
        "points": op.len(),
        "lambda_max": measured(op.lambda_max()),
        "markov": op.markov(),
        "markov_defect": measured(markov_defect),
        "orthonormality_residual": measured(op.orthonormality_residual()),
        "heat_fit": {
            "c_upper": fitted(fit.c_upper),
            "c_star": fitted(fit.c_star),
            "alpha": fitted(fit.alpha),
            "tau": fitted(fit.tau()),
            "fit_range": fitted(fit.fit_range),
            "samples": fit.samples,
        },
        "subordination": subordination,
        "finite_speed_relative_leakage": measured(leak),
        "passed": markov_ok && sub_ok,
    });
    emit(json_out, &v, || {
        format!(
            "lambda_max {:.6}\nmarkov defect {:.3e} over {} scales\nheat fit: C = {:.4}, c* = {:.4}, alpha = {}, tau = {:.4}\nsubordination max difference {:.3e}\nfinite speed relative leakage {:.3e}",
            op.lambda_max(),
            markov_defect,
            ts.len(),
            fit.c_upper,
            fit.c_star,
            fit.alpha.map_or("n/a".into(), |a| format!("{a:.4}")),
            fit.tau(),
            sub_max,
            leak
        )
    });
    if !markov_ok {
        return Err(CliError::validation("MARKOV_DEFECT", format!("row sums deviate by {markov_defect:.3e}")));
    }
    if !sub_ok {
        return Err(CliError::validation("SUBORDINATION_MISMATCH", format!("max difference {sub_max:.3e}")));
    }
    Ok(())
}

pub fn profile_build(m: usize, out: &Path, step: f64, u_max: f64, json_out: bool) -> Result<(), CliError> {
    if !(step > 0.0 && u_max >= 4.0 * step && u_max.is_finite()) {
        return Err(CliError::input("BAD_INPUT", format!("need step > 0 and u_max ≥ 4·step, got {step}, {u_max}")));
    }
    let phi = Profile::admissible(m)?;
    let bl = phi.bandlimited().expect("admissible profiles are band-limited");
    let export = phi.export(u_max, step);
    io::write_json(out, &export)?;
    let cert = bl.vanishing_certificate().iter().copied().fold(0.0, f64::max);
    let v = json!({
        "m": m,
        "samples": export.samples.len(),
        "value_at_zero": measured(phi.eval(0.0)),
        "max_derivative_at_zero": measured(cert),
        "fourier_mass_outside": measured(bl.fourier_mass_outside(1.0)),
        "bandlimit": formula(phi.bandlimit()),
        "out": out.display().to_string(),
    });
    emit(json_out, &v, || {
        format!(
            "wrote {} samples of the order-{m} profile to {}\nmax |phi^(k)(0)| = {:.3e}, Fourier mass outside [-1,1] = {:.3e}",
            export.samples.len(),
            out.display(),
            cert,
            bl.fourier_mass_outside(1.0)
        )
    });
    Ok(())
}

pub fn profile_check(path: &Path, json_out: bool) -> Result<(), CliError> {
    let export: ProfileExport = io::read_json(path)?;
    Profile::from_export(&export)?;
    let phi0 = export.samples[0];
    let mut failures = Vec::new();
    if (phi0 - 1.0).abs() >= NORMALIZATION_TOL {
        failures.push(format!("phi(0) = {phi0}"));
    }
    let mut v = json!({ "name": export.metadata.name, "samples": export.samples.len(), "value_at_zero": measured(phi0) });
    match export.metadata.construction_order {
        Some(m) => {
            let phi = Profile::admissible(m)?;
            let bl = phi.bandlimited().expect("admissible profiles are band-limited");
            let mismatch = export
                .samples
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let want = phi.eval(j as f64 * export.grid_step);
                    (s - want).abs() / want.abs().max(1.0)
                })
                .fold(0.0, f64::max);
            let cert = bl.vanishing_certificate().iter().copied().fold(0.0, f64::max);
            let mass = bl.fourier_mass_outside(1.0);
            if mismatch > 1e-12 {
                failures.push(format!("samples differ from the order-{m} construction by {mismatch:.3e}"));
            }
            if cert >= CERTIFICATE_TOL {
                failures.push(format!("max |phi^(k)(0)| = {cert:.3e}"));
            }
            if mass >= CERTIFICATE_TOL {
                failures.push(format!("Fourier mass outside [-1,1] = {mass:.3e}"));
            }
            v["construction_order"] = json!(m);
            v["sample_mismatch"] = json!(measured(mismatch));
            v["max_derivative_at_zero"] = json!(measured(cert));
            v["fourier_mass_outside"] = json!(measured(mass));
        }
        None => {
            let mass = hardy_lab::profiles::fourier_mass_outside(&export.samples, export.grid_step, 1.0);
            v["fourier_mass_outside"] = json!(measured(mass));
        }
    }
    v["passed"] = json!(failures.is_empty());
    v["failures"] = json!(failures);
    emit(json_out, &v, || {
        if failures.is_empty() {
            format!("ok: {} ({} samples)", export.metadata.name, export.samples.len())
        } else {
            format!("FAILED: {}", failures.join("; "))
        }
    });
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation("PROFILE_CHECK_FAILED", failures.join("; ")))
    }
}

pub fn maximal(args: &MaximalArgs) -> Result<(), CliError> {
    check_exponent(args.p, f64::INFINITY)?;
    let profile = parse_profile(&args.profile)?;
    let (_, _, space, op) = load_model(&args.space, &args.operator)?;
    let f = io::read_signal(&args.signal, space.len())?;
    let grid = TGrid::for_space(&space);
    let d = space.geometry_report().d;
    let theta = args.theta.unwrap_or(args.p / 2.0);
    let gamma = args.gamma.unwrap_or(2.0 * d / theta + 1.0);
    let mut params = json!({ "d": measured(d) });
    let field: MaximalField = match args.kind {
        MaximalKindArg::Radial => radial_maximal(&op, &f, &profile, &grid)?,
        MaximalKindArg::Heat => radial_maximal(&op, &f, &Profile::gaussian(), &grid)?,
        MaximalKindArg::Poisson => radial_maximal(&op, &f, &Profile::exponential(), &grid)?,
        MaximalKindArg::Nontangential | MaximalKindArg::Tangential => {
            let t = maximal_triple(&op, &space, &f, &profile, args.a, gamma, &grid)?;
            if args.gamma.is_none() {
                params["gamma"] = json!(formula(gamma));
            }
            if args.kind == MaximalKindArg::Nontangential {
                t.nontangential
            } else {
                t.tangential
            }
        }
        MaximalKindArg::Grand => {
            let n = args.n.unwrap_or_else(|| default_grand_order(d, args.p));
            if args.n.is_none() {
                params["n"] = json!(formula(n));
            }
            grand_maximal(&op, &space, &f, &Dictionary::standard(n)?, &grid)?
        }
        MaximalKindArg::Hl => {
            if args.theta.is_none() {
                params["theta"] = json!(formula(theta));
            }
            hl_maximal(&space, &f, theta)?
        }
    };
    let norm = field.lp_norm(op.mu(), args.p);
    if let Some(path) = &args.csv {
        let rows = field.values.iter().enumerate().map(|(x, v)| vec![x.to_string(), format!("{v:e}")]);
        write_csv(path, &["point", "value"], rows)?;
    }
    let v = json!({
        "kind": field.kind,
        "profile": field.profile,
        "p": args.p,
        "derived": params,
        "values": measured(&field.values),
        "lp_norm": measured(norm),
    });
    emit(args.json, &v, || format!("{:?} maximal function, L^{} norm {norm:.6e}", args.kind, args.p));
    Ok(())
}

pub fn whitney(args: &WhitneyArgs) -> Result<(), CliError> {
    let space = io::read_space(&args.space)?;
    let omega = io::read_point_set(&args.omega, space.len())?;
    let cover = whitney_cover(&space, &omega)?;
    let geometry = space.geometry_report();
    let rep = verify_cover(&space, &cover, &geometry);
    let v = json!({
        "omega": cover.omega,
        "centers": cover.centers,
        "radii": measured(&cover.radii),
        "union_equals_omega": rep.union_equals_omega,
        "fifth_balls_disjoint": rep.fifth_balls_disjoint,
        "radii_comparable": rep.radii_comparable,
        "max_overlap": measured(rep.max_overlap),
        "overlap_bound": formula(rep.overlap_bound),
        "passed": rep.passed(),
    });
    emit(args.json, &v, || {
        let balls: Vec<String> = cover.centers.iter().zip(&cover.radii).map(|(c, r)| format!("B({c}, {r}/2)")).collect();
        format!(
            "{} balls: {}\nunion = omega: {}, fifth balls disjoint: {}, radii comparable: {}, overlap {} <= {:.1}",
            cover.len(),
            balls.join(" "),
            rep.union_equals_omega,
            rep.fifth_balls_disjoint,
            rep.radii_comparable,
            rep.max_overlap,
            rep.overlap_bound
        )
    });
    if rep.passed() {
        Ok(())
    } else {
        Err(CliError::validation("COVER_INVALID", "Whitney cover properties fail"))
    }
}

fn decomposition_summary(dec: &AtomicDecomposition) -> Value {
    json!({
        "p": dec.p,
        "d": measured(dec.d),
        "c0": measured(dec.c0),
        "tau": fitted(dec.tau),
        "atom_order": formula(dec.n),
        "grand_order": formula(dec.grand_order),
        "profile_order": formula(dec.profile_order),
        "coarsest_scale": formula(dec.j),
        "scale_range": formula(dec.k_range),
        "atoms": dec.terms.len(),
        "outstanding": dec.outstanding.is_some(),
        "hp_norm": measured(dec.hp_norm),
        "budget": measured(dec.budget),
        "regular_budget": measured(dec.regular_budget),
        "budget_bound": formula(dec.budget_bound()),
        "c_sharp": measured(dec.c_sharp),
        "c_star": measured(dec.c_star),
        "residual_l2": measured(dec.residual_norms.l2),
        "residual_relative_l2": measured(dec.residual_norms.relative_l2),
        "truncation_budget_l2": measured(dec.truncation_log.budget_l2),
        "identity_gap_l2": measured(dec.identity.gap_l2),
        "partition_exact": dec.partition.exact(),
    })
}

pub fn decompose(args: &DecomposeArgs) -> Result<(), CliError> {
    check_exponent(args.p, 1.0)?;
    let (sf, of, space, op) = load_model(&args.space, &args.operator)?;
    let f = io::read_signal(&args.signal, space.len())?;
    let mut config = DecomposeConfig::new(args.p);
    config.k_max_extra = args.k_extra;
    config.profile_order = args.profile_order;
    config.grand_order = args.grand_order;
    if let Some(extra_scales) = args.noncompact {
        config.branch = Branch::Noncompact { extra_scales };
    }
    let dec = Pipeline::new(&space, &op, &config)?.decompose(&f)?;
    if let Some(path) = &args.csv {
        let rows = dec.levels.iter().map(|l| {
            vec![
                l.r.to_string(),
                l.omega_size.to_string(),
                format!("{:e}", l.omega_mass),
                format!("{:e}", 2f64.powf(dec.p * l.r as f64) * l.omega_mass),
                l.balls.to_string(),
                l.atoms.to_string(),
                format!("{:e}", l.regroup_defect),
            ]
        });
        write_csv(path, &["level", "omega_size", "omega_mass", "level_share", "balls", "atoms", "regroup_defect"], rows)?;
    }
    let v = decomposition_summary(&dec);
    let file = DecompositionFile { inputs: Inputs { space: sf, operator: of, signal: f }, decomposition: dec };
    io::write_json(&args.out, &file)?;
    let dec = &file.decomposition;
    emit(args.json, &v, || {
        format!(
            "{} atoms{} written to {}\nbudget {:.6e} (bound {:.6e}), relative residual {:.3e}",
            dec.terms.len(),
            if dec.outstanding.is_some() { " plus the outstanding atom" } else { "" },
            args.out.display(),
            dec.budget,
            dec.budget_bound(),
            dec.residual_norms.relative_l2
        )
    });
    Ok(())
}

fn load_decomposition(path: &Path) -> Result<(DecompositionFile, MetricMeasureSpace, SpectralOperator), CliError> {
    let file: DecompositionFile = io::read_json(path)?;
    let (space, op) = model(&file.inputs.space, &file.inputs.operator)?;
    Ok((file, space, op))
}

fn atom_reports(file: &DecompositionFile, space: &MetricMeasureSpace, op: &SpectralOperator) -> Vec<AtomReport> {
    let dec = &file.decomposition;
    dec.terms.iter().chain(&dec.outstanding).map(|t| validate_atom(space, op, &t.atom)).collect()
}

pub fn validate_atoms(args: &DecompFileArgs) -> Result<(), CliError> {
    let (file, space, op) = load_decomposition(&args.file)?;
    let reports = atom_reports(&file, &space, &op);
    let failed = reports.iter().filter(|r| !r.passed()).count();
    let worst = reports.iter().map(|r| r.representation_residual).fold(0.0, f64::max);
    let v = json!({
        "atoms": reports.len(),
        "failed": failed,
        "max_representation_residual": measured(worst),
        "reports": reports,
    });
    emit(args.json, &v, || format!("{} atoms checked, {failed} failed, max representation residual {worst:.3e}", reports.len()));
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::validation("ATOM_INVALID", format!("{failed} of {} atoms fail", reports.len())))
    }
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let (file, space, op) = load_decomposition(&args.file)?;
    let dec = &file.decomposition;
    let reports = atom_reports(&file, &space, &op);
    let terms: Vec<_> = dec.terms.iter().chain(&dec.outstanding).collect();
    let rows: Vec<Value> = terms
        .iter()
        .zip(&reports)
        .enumerate()
        .map(|(i, (t, r))| {
            json!({
                "index": i,
                "kind": t.atom.kind,
                "level": t.atom.level,
                "center": t.atom.ball.center,
                "radius": measured(t.atom.ball.radius),
                "lambda": measured(t.lambda),
                "size_slack": measured(r.size_slack),
                "representation_residual": measured(r.representation_residual),
                "support_leaks": r.support_leaks,
                "passed": r.passed(),
            })
        })
        .collect();
    let regroup = dec.levels.iter().map(|l| l.regroup_defect).fold(0.0, f64::max);
    let identity = (dec.identity.gap_l2 - dec.identity.budget_l2).abs();
    let checks = json!({
        "atoms_admissible": reports.iter().all(AtomReport::passed),
        "partition_exact": dec.partition.exact(),
        "regroup_defect": measured(regroup),
        "identity_vs_budget": measured(identity),
        "identity_within_tolerance": identity <= IDENTITY_TOL,
        "budget_within_bound": dec.regular_budget <= dec.budget_bound(),
    });
    if let Some(path) = &args.csv {
        let csv_rows = terms.iter().zip(&reports).enumerate().map(|(i, (t, r))| {
            vec![
                i.to_string(),
                match t.atom.kind {
                    AtomKind::Regular => "regular".into(),
                    AtomKind::Outstanding => "outstanding".into(),
                },
                t.atom.level.map_or(String::new(), |l| l.to_string()),
                t.atom.ball.center.to_string(),
                format!("{:e}", t.atom.ball.radius),
                format!("{:e}", t.lambda),
                format!("{:e}", r.size_slack),
                format!("{:e}", r.representation_residual),
            ]
        });
        write_csv(path, &["index", "kind", "level", "center", "radius", "lambda", "size_slack", "representation_residual"], csv_rows)?;
    }
    let v = json!({ "summary": decomposition_summary(dec), "checks": checks, "atoms": rows });
    emit(args.json, &v, || {
        let mut out = format!(
            "p = {}, {} atoms, budget {:.6e} (bound {:.6e}), H^p norm {:.6e}\nrelative residual {:.3e}, identity gap {:.3e} vs truncation budget {:.3e}, regroup defect {:.1e}\n",
            dec.p,
            terms.len(),
            dec.budget,
            dec.budget_bound(),
            dec.hp_norm,
            dec.residual_norms.relative_l2,
            dec.identity.gap_l2,
            dec.identity.budget_l2,
            regroup
        );
        out.push_str("  #  kind         level  center  radius      lambda        size slack  repr. residual\n");
        for (i, (t, r)) in terms.iter().zip(&reports).enumerate() {
            out.push_str(&format!(
                "{i:>3}  {:<11}  {:>5}  {:>6}  {:<10.4}  {:<12.5e}  {:<10.4}  {:.2e}{}\n",
                format!("{:?}", t.atom.kind).to_lowercase(),
                t.atom.level.map_or("-".into(), |l| l.to_string()),
                t.atom.ball.center,
                t.atom.ball.radius,
                t.lambda,
                r.size_slack,
                r.representation_residual,
                if r.passed() { "" } else { "  FAILED" }
            ));
        }
        out.trim_end().to_string()
    });
    Ok(())
}

pub fn signal(args: &SignalArgs) -> Result<(), CliError> {
    let space = io::read_space(&args.space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let f: Vec<f64> = (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    io::write_json(&args.out, &f)?;
    Ok(())
}

pub fn fixture(args: &FixtureArgs) -> Result<(), CliError> {
    let model = fixtures::by_name(&args.name)
        .ok_or_else(|| CliError::input("UNKNOWN_FIXTURE", format!("no bundled model named {:?}", args.name)))?;
    let (sf, of) = io::model_files(&model)?;
    std::fs::create_dir_all(&args.dir)
        .map_err(|e| CliError::input("FILE_WRITE", format!("cannot create {}: {e}", args.dir.display())))?;
    io::write_json(&args.dir.join(format!("{}.space.json", model.name)), &sf)?;
    io::write_json(&args.dir.join(format!("{}.operator.json", model.name)), &of)?;
    Ok(())
}
