//! The subcommands. Each runs one pipeline, writes its data files and returns
//! its checks; a pipeline error becomes a failed check carrying the message.

use horolab::atlas::FaceKind;
use horolab::coarse::SandwichConstants;
use horolab::experiments::*;
use horolab::growth::write_growth_csv;
use horolab::horosphere::{growth_compare, qi_audit, sandwich_check, GrowthComparison, Verdict};
use horolab::mesh::build_mesh;
use horolab::{Error, HeintzeGroup};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::report::{csv, Check, Output};

pub const SUBCOMMANDS: &[&str] = &[
    "curvature-scan",
    "geodesic-audit",
    "rho-audit",
    "face-volume",
    "convexity-scan",
    "growth-approx",
    "growth-horosphere",
    "sandwich",
    "projection-decay",
    "controlled-volume",
    "qi-audit",
    "full-suite",
];

#[derive(Debug)]
pub enum Failure {
    Compute(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Checks = Result<Vec<Check>, Failure>;

fn f(v: f64) -> String {
    format!("{v}")
}

/// Run `name`; I/O errors propagate, computation errors become a failed check.
pub fn run(name: &str, cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>, std::io::Error> {
    let result = match name {
        "curvature-scan" => curvature(cfg, out),
        "geodesic-audit" => geodesics(cfg, out),
        "rho-audit" => rho(cfg, out),
        "face-volume" => face_volume(cfg, out),
        "convexity-scan" => convexity(cfg, out),
        "growth-approx" => growth_approx_cmd(cfg, out),
        "growth-horosphere" => growth_horosphere_cmd(cfg, out),
        "sandwich" => sandwich(cfg, out),
        "projection-decay" => projection(cfg, out),
        "controlled-volume" => controlled(cfg, out),
        "qi-audit" => qi(cfg, out),
        "full-suite" => {
            let mut all = Vec::new();
            for sub in SUBCOMMANDS.iter().filter(|s| **s != "full-suite") {
                all.extend(run(sub, cfg, out)?);
            }
            Ok(all)
        }
        other => unreachable!("unknown subcommand {other}"),
    };
    match result {
        Ok(c) => Ok(c),
        Err(Failure::Io(e)) => Err(e),
        Err(Failure::Compute(e)) => Ok(vec![Check::new(
            name,
            false,
            Value::Null,
            Value::Null,
            json!({ "error": e.to_string() }),
        )]),
    }
}

fn curvature(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let scan = curvature_scan(&g, 50 * cfg.samples, cfg.seed, 1e-4)?;
    out.write(
        "curvature.csv",
        csv(
            "sample,curvature",
            scan.samples.iter().enumerate().map(|(i, k)| vec![i.to_string(), f(*k)]),
        )
        .as_bytes(),
    )?;
    let tol = cfg.tol("curvature");
    let bad = scan
        .samples
        .iter()
        .position(|k| *k < scan.lower - tol || *k > scan.upper + tol);
    let mut checks = vec![Check::new(
        "curvature-bounds",
        bad.is_none(),
        json!({ "min": scan.min, "max": scan.max, "samples": scan.samples.len() }),
        json!({ "lower": scan.lower, "upper": scan.upper, "tolerance": tol }),
        json!(bad.map(|i| json!({ "sample": i, "curvature": scan.samples[i] }))),
    )];
    if g.dim() == 1 {
        let tol = cfg.tol("curvature_plane");
        let dev = scan.samples.iter().map(|k| (k - scan.lower).abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            "constant-curvature",
            dev <= tol,
            json!({ "max_deviation": dev }),
            json!({ "tolerance": tol }),
            json!({ "max_deviation": dev }),
        ));
    }
    Ok(checks)
}

fn geodesics(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let a = geodesic_audit(&g, cfg.samples.min(100), 10.0, 1e-3, cfg.seed)?;
    let d = g.dim();
    let mut header = String::from("run,y");
    for i in 0..d {
        header.push_str(&format!(",x{i}"));
    }
    header.push_str(",speed_drift,momentum_drift");
    out.write(
        "geodesics.csv",
        csv(
            &header,
            a.runs.iter().enumerate().map(|(k, r)| {
                let mut row = vec![k.to_string(), f(r.start.y)];
                row.extend(r.start.x.iter().map(|x| f(*x)));
                row.push(f(r.speed_drift));
                row.push(f(r.momentum_drift));
                row
            }),
        )
        .as_bytes(),
    )?;
    let tol = cfg.tol("conservation");
    let worst = a
        .runs
        .iter()
        .position(|r| r.speed_drift >= tol || r.momentum_drift >= tol);
    Ok(vec![Check::new(
        "conservation",
        worst.is_none(),
        json!({ "speed_drift": a.max_speed_drift, "momentum_drift": a.max_momentum_drift, "runs": a.runs.len() }),
        json!({ "tolerance": tol, "t_end": 10.0, "step": 1e-3 }),
        json!(worst.map(|k| &a.runs[k])),
    )])
}

fn sweep(cfg: &ExperimentConfig, g: &HeintzeGroup) -> Result<RhoSweep, Error> {
    rho_sweep(g, cfg.samples, (1.0, 30.0), 15.0, cfg.seed, cfg.tol("distance"))
}

fn rho(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let tol = cfg.tol("distance");
    let s = match sweep(cfg, &g) {
        Err(Error::SandwichViolation { index, rho, dist }) => {
            return Ok(vec![Check::new(
                "rho-lower",
                false,
                Value::Null,
                json!({ "lower": -3.0 * tol }),
                json!({ "pair": index, "rho": rho, "dist": dist }),
            )])
        }
        other => other?,
    };
    out.write(
        "rho.csv",
        csv(
            "pair,dist,rho,gap",
            s.audit
                .pairs
                .iter()
                .enumerate()
                .map(|(i, p)| vec![i.to_string(), f(p.dist), f(p.rho), f(p.gap)]),
        )
        .as_bytes(),
    )?;
    let growth = s.max_high - s.max_low;
    let limit = cfg.tol("rho_growth");
    let c = s.audit.constants;
    Ok(vec![
        Check::new(
            "rho-lower",
            s.audit.min_gap >= -3.0 * tol,
            json!({ "min_gap": s.audit.min_gap }),
            json!({ "lower": -3.0 * tol }),
            json!({ "min_gap": s.audit.min_gap }),
        ),
        Check::new(
            "rho-upper",
            c.c_rho_hat.is_finite() && growth < limit,
            json!({ "c_rho_hat": c.c_rho_hat, "c_v": c.c_v, "max_low": s.max_low, "max_high": s.max_high }),
            json!({ "range_growth_below": limit, "split": s.split }),
            json!({ "range_growth": growth }),
        ),
    ])
}

fn face_volume(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let a = face_volume_audit(&g, cfg.t_max, cfg.resolution, 10)?;
    out.write(
        "face_volume.csv",
        csv(
            "face,closed,mesh,rel_err,mesh_refined,rel_err_refined",
            a.faces.iter().map(|r| {
                vec![
                    r.face.clone(),
                    f(r.closed),
                    f(r.mesh),
                    f(r.rel_err),
                    f(r.mesh_refined),
                    f(r.rel_err_refined),
                ]
            }),
        )
        .as_bytes(),
    )?;
    out.write(
        "volume_ratio.csv",
        csv(
            "t,ratio,limit",
            a.ratios.iter().map(|(t, r)| vec![f(*t), f(*r), f(a.ratio_limit)]),
        )
        .as_bytes(),
    )?;
    let (t1, t2) = (cfg.tol("face_volume"), cfg.tol("face_volume_refined"));
    let worst = a.faces.iter().find(|r| r.rel_err >= t1 || r.rel_err_refined >= t2);
    let (t, last) = *a.ratios.last().unwrap();
    let ratio_err = (last / a.ratio_limit - 1.0).abs();
    let t3 = cfg.tol("volume_ratio");
    Ok(vec![
        Check::new(
            "face-volume",
            worst.is_none(),
            json!({ "faces": a.faces }),
            json!({ "default": t1, "refined": t2 }),
            json!(worst),
        ),
        Check::new(
            "volume-ratio",
            ratio_err < t3,
            json!({ "t": t, "ratio": last, "limit": a.ratio_limit }),
            json!({ "relative": t3 }),
            json!({ "relative_error": ratio_err }),
        ),
    ])
}

fn convexity(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let rows = convexity_scan(
        &g,
        &[0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        5 * cfg.samples,
        -4.0,
        cfg.seed,
    )?;
    out.write(
        "convexity.csv",
        csv(
            "direction,multiple,a,coefficient,min",
            rows.iter().map(|r| {
                vec![
                    r.direction.to_string(),
                    f(r.multiple),
                    f(r.a),
                    f(r.coefficient),
                    f(r.min),
                ]
            }),
        )
        .as_bytes(),
    )?;
    let wrong = rows.iter().find(|r| (r.min < 0.0) != (r.coefficient < 0.0));
    Ok(vec![Check::new(
        "convexity",
        wrong.is_none(),
        json!({ "rows": rows }),
        json!({ "rule": "min < 0 exactly where 2aλ_i − a² < 0" }),
        json!(wrong),
    )])
}

fn exponent_check(name: &str, exponent: f64, k: f64, budget: f64, window: (f64, f64)) -> Check {
    Check::new(
        name,
        (exponent - k).abs() <= budget,
        json!({ "exponent": exponent, "window": window }),
        json!({ "k": k, "budget": budget }),
        json!({ "exponent": exponent }),
    )
}

fn compare_check(name: &str, c: &GrowthComparison, want: Verdict) -> Check {
    Check::new(
        name,
        c.verdict == want,
        json!(c),
        json!({ "expected": format!("{want:?}") }),
        json!({ "verdict": format!("{:?}", c.verdict) }),
    )
}

fn growth_approx_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let (run, mesh, _) = growth_approx(&g, cfg.t_max, cfg.resolution, cfg.r_window)?;
    out.write_with("growth_approx.csv", |w| write_growth_csv(w, &run.points))?;
    if cfg.export_mesh {
        out.write_with("mesh_approx.txt", |w| mesh.write_text(w))?;
    }
    let k = g.growth_exponent();
    let mut c = exponent_check(
        "growth-approx",
        run.fit.exponent,
        k,
        cfg.tol("growth_approx"),
        run.fit.r_window,
    );
    c.values["vertices"] = json!(run.vertices);
    c.values["residual_max"] = json!(run.fit.residual_max);
    Ok(vec![c])
}

fn growth_horosphere_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let k = g.growth_exponent();
    let sheet = growth_horosphere(&g, 0.0, cfg.sheet_t_max, cfg.sheet_resolution, cfg.y_cut, cfg.r_window)?;
    let (approx, _, _) = growth_approx(&g, cfg.t_max, cfg.resolution, cfg.r_window)?;
    let flat = growth_euclidean(&g, 0.0, 1.0625 * cfg.r_window.1, 1.0, cfg.r_window)?;
    out.write_with("growth_horosphere.csv", |w| write_growth_csv(w, &sheet.growth.points))?;
    out.write_with("growth_euclidean.csv", |w| write_growth_csv(w, &flat.points))?;
    if cfg.export_mesh {
        out.write_with("mesh_horosphere.txt", |w| sheet.mesh.write_text(w))?;
    }
    let (bh, ba) = (cfg.tol("compare_horosphere"), cfg.tol("compare_approx"));
    let same = growth_compare(&sheet.growth.fit, &approx.fit, &g, bh, ba)?;
    let flat_vs = growth_compare(&flat.fit, &approx.fit, &g, bh, ba)?;
    let mut checks = vec![
        exponent_check(
            "growth-horosphere",
            sheet.growth.fit.exponent,
            k,
            cfg.tol("growth_horosphere"),
            sheet.growth.fit.r_window,
        ),
        exponent_check(
            "growth-euclidean",
            flat.fit.exponent,
            g.dim() as f64,
            cfg.tol("growth_euclidean"),
            flat.fit.r_window,
        ),
        compare_check("compare-horosphere-approx", &same, Verdict::Pass),
    ];
    if (k - g.dim() as f64).abs() > bh + ba {
        checks.push(compare_check("compare-euclidean-approx", &flat_vs, Verdict::Distinct));
    }
    Ok(checks)
}

fn constants(cfg: &ExperimentConfig, g: &HeintzeGroup) -> Result<SandwichConstants, Error> {
    Ok(sweep(cfg, g)?.audit.constants)
}

fn sandwich(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let c = constants(cfg, &g)?;
    let mesh = build_mesh(&g, cfg.t_max, cfg.resolution)?;
    let tol = cfg.tol("sandwich");
    let upper = (g.dim() as f64).ln() / g.lambda_min();
    match sandwich_check(&g, &mesh, &c, 100, cfg.seed, tol) {
        Ok(r) => {
            out.write(
                "sandwich_spot.csv",
                csv(
                    "vertex,busemann,lo,hi,inside",
                    r.spot_checks.iter().map(|s| {
                        vec![
                            s.vertex.to_string(),
                            f(s.busemann),
                            f(s.bracket.0),
                            f(s.bracket.1),
                            s.inside.to_string(),
                        ]
                    }),
                )
                .as_bytes(),
            )?;
            Ok(vec![Check::new(
                "horoball-sandwich",
                true,
                json!({ "band": r.band, "vertices": mesh.len(), "spot_checks": r.spot_checks.len() }),
                json!({ "lower": 0.0, "upper": r.upper, "tolerance": tol }),
                Value::Null,
            )])
        }
        Err(Error::SandwichFailure { count, first }) => Ok(vec![Check::new(
            "horoball-sandwich",
            false,
            json!({ "vertices": mesh.len() }),
            json!({ "lower": 0.0, "upper": upper, "tolerance": tol }),
            json!({ "failures": count, "first_vertex": first, "point": mesh.point(first) }),
        )]),
        Err(e) => Err(e.into()),
    }
}

fn probes_csv(probes: &[horolab::projection::BallProbe]) -> String {
    csv(
        "y_p,r,vertices,ratio,calibrated,jacobian_deviation,drift,height_span",
        probes.iter().map(|p| {
            vec![
                f(p.y_p),
                f(p.r),
                p.vertices.to_string(),
                f(p.ratio),
                f(p.calibrated),
                f(p.jacobian_deviation),
                f(p.drift),
                f(p.height_span),
            ]
        }),
    )
}

fn projection(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let ladder = [-8.0, -12.0, -16.0, -20.0];
    let probes = ball_ladder(&g, FaceKind::Plus(0), &ladder, 1.0, 0.025)?;
    out.write("projection.csv", probes_csv(&probes).as_bytes())?;
    let devs: Vec<f64> = probes.iter().map(|p| p.jacobian_deviation).collect();
    let tol = cfg.tol("projection");
    let last = *devs.last().unwrap();
    let inversion = devs.windows(2).position(|w| w[1] >= w[0]);
    let drift_tol = cfg.tol("drift");
    let drift = probes.iter().map(|p| p.drift).fold(0.0, f64::max);
    Ok(vec![
        Check::new(
            "projection-decay",
            last <= tol && inversion.is_none(),
            json!({ "y_p": ladder, "deviation": devs }),
            json!({ "deepest": tol, "monotone": true }),
            json!({ "deepest": last, "inversion_after": inversion.map(|i| ladder[i]) }),
        ),
        Check::new(
            "vertical-drift",
            drift <= drift_tol,
            json!({ "drift": probes.iter().map(|p| p.drift).collect::<Vec<_>>() }),
            json!({ "max": drift_tol }),
            json!({ "drift": drift }),
        ),
    ])
}

fn controlled(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let ladder = [-4.0, -8.0, -12.0, -16.0, -20.0];
    let probes = ball_ladder(&g, FaceKind::Plus(0), &ladder, 2.0, 0.05)?;
    out.write("controlled_volume.csv", probes_csv(&probes).as_bytes())?;
    let tol = cfg.tol("controlled_volume");
    let at12 = probes[2].calibrated;
    let gaps: Vec<f64> = probes.iter().map(|p| (p.calibrated - 1.0).abs()).collect();
    let inversions = gaps.windows(2).filter(|w| w[1] > w[0]).count();
    Ok(vec![Check::new(
        "controlled-volume",
        (at12 - 1.0).abs() <= tol && inversions <= 1 && gaps[4] < gaps[0],
        json!({
            "y_p": ladder,
            "calibrated": probes.iter().map(|p| p.calibrated).collect::<Vec<_>>(),
            "raw": probes.iter().map(|p| p.ratio).collect::<Vec<_>>(),
        }),
        json!({ "at_minus_12": [1.0 - tol, 1.0 + tol], "max_inversions": 1 }),
        json!({ "at_minus_12": at12, "inversions": inversions }),
    )])
}

fn qi(cfg: &ExperimentConfig, out: &mut Output) -> Checks {
    let g = cfg.group();
    let c = constants(cfg, &g)?;
    let sheet = growth_horosphere(&g, 0.0, cfg.sheet_t_max, cfg.sheet_resolution, cfg.y_cut, cfg.r_window)?;
    let approx = build_mesh(&g, cfg.sheet_t_max, cfg.sheet_resolution)?;
    let q = qi_audit(
        &g,
        &sheet.mesh,
        &approx,
        c.c_v,
        cfg.sheet_t_max,
        3.0,
        &[5.0, 20.0, 40.0],
        8,
        cfg.samples,
        cfg.seed,
    )?;
    out.write(
        "qi_pairs.csv",
        csv("dist_h,dist_approx", q.pairs.iter().map(|(a, b)| vec![f(*a), f(*b)])).as_bytes(),
    )?;
    let summary = json!({ "a": q.a, "b": q.b, "violations": q.violations, "pairs": q.pairs, "window": q.window });
    out.write(
        "qi_audit.json",
        serde_json::to_string_pretty(&summary).unwrap().as_bytes(),
    )?;
    let b_lo = q.b_by_window.first().map(|w| w.1).unwrap_or(f64::NAN);
    let b_hi = q.b_by_window.last().map(|w| w.1).unwrap_or(f64::NAN);
    let grow = cfg.tol("qi_window");
    Ok(vec![
        Check::new(
            "qi-envelope",
            q.a.is_finite() && q.b.is_finite() && q.violations == 0,
            json!({ "a": q.a, "b": q.b, "violations": q.violations, "pairs": q.pairs.len(), "max_offset": q.max_offset }),
            json!({ "violations": 0, "max_offset": 3.0 * c.c_v }),
            json!({ "violations": q.violations }),
        ),
        Check::new(
            "qi-bounded",
            b_hi <= (1.0 + grow) * b_lo + 1e-9,
            json!({ "b_by_window": q.b_by_window }),
            json!({ "growth": grow }),
            json!({ "b_low": b_lo, "b_high": b_hi }),
        ),
    ])
}
