//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::process::ExitCode;
use std::time::Instant;

use horolab::atlas::FaceKind;
use horolab::coarse::SandwichConstants;
use horolab::experiments::*;
use horolab::horosphere::{growth_compare, qi_audit, sandwich_check, Verdict};
use horolab::mesh::SurfaceMesh;
use horolab::HeintzeGroup;

type Outcome = Result<(bool, String), String>;
type Criterion = fn(&mut Shared) -> Outcome;

struct Shared {
    constants: Option<SandwichConstants>,
    approx: Option<(GrowthRun, SurfaceMesh)>,
}

fn g12() -> HeintzeGroup {
    HeintzeGroup::new(vec![1.0, 2.0]).unwrap()
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn approx_growth(s: &mut Shared) -> Result<&(GrowthRun, SurfaceMesh), String> {
    if s.approx.is_none() {
        let (run, mesh, _) = growth_approx(&g12(), 14.0, 0.2, (8.0, 128.0)).map_err(|e| e.to_string())?;
        s.approx = Some((run, mesh));
    }
    Ok(s.approx.as_ref().unwrap())
}

fn sandwich_constants(s: &mut Shared) -> Result<SandwichConstants, String> {
    if s.constants.is_none() {
        let sweep = rho_sweep(&g12(), 200, (1.0, 30.0), 15.0, 7, 1e-4).map_err(|e| e.to_string())?;
        s.constants = Some(sweep.audit.constants);
    }
    Ok(s.constants.unwrap())
}

fn growth_of_approx(s: &mut Shared) -> Outcome {
    let t = Instant::now();
    let (run, _) = approx_growth(s)?;
    let secs = t.elapsed().as_secs_f64();
    let k2 = run.fit.exponent;
    let size_ok = within(run.vertices as f64, 2.0e5, 4.0e5);
    let g3 = HeintzeGroup::new(vec![1.0, 1.0, 2.0]).unwrap();
    let (run3, _, _) = growth_approx(&g3, 11.0, 0.4, (8.0, 128.0)).map_err(|e| e.to_string())?;
    let k3 = run3.fit.exponent;
    Ok((
        within(k2, 2.6, 3.4) && size_ok && secs < 300.0 && within(k3, 3.4, 4.6),
        format!(
            "d=2: k={k2:.3} on {} vertices in {secs:.1}s; d=3: k={k3:.3} on {} vertices",
            run.vertices, run3.vertices
        ),
    ))
}

fn euclidean_class(s: &mut Shared) -> Outcome {
    let g = g12();
    let flat = growth_euclidean(&g, 0.0, 136.0, 1.0, (8.0, 128.0)).map_err(|e| e.to_string())?;
    let (approx, _) = approx_growth(s)?;
    let cmp = growth_compare(&flat.fit, &approx.fit, &g, 0.4, 0.3).map_err(|e| e.to_string())?;
    let k = flat.fit.exponent;
    Ok((
        within(k, 1.8, 2.2) && cmp.verdict == Verdict::Distinct,
        format!(
            "flat horosphere k={k:.3} vs 𝓗 k={:.3}: {:?}",
            approx.fit.exponent, cmp.verdict
        ),
    ))
}

fn true_horosphere(s: &mut Shared) -> Outcome {
    let g = g12();
    let c = sandwich_constants(s)?;
    let sheet = growth_horosphere(&g, 0.0, 10.5, 0.25, -2.0, (8.0, 128.0)).map_err(|e| e.to_string())?;
    let k = sheet.growth.fit.exponent;
    let approx = horolab::mesh::build_mesh(&g, 10.5, 0.25).map_err(|e| e.to_string())?;
    let q = qi_audit(
        &g,
        &sheet.mesh,
        &approx,
        c.c_v,
        10.5,
        3.0,
        &[5.0, 20.0, 40.0],
        8,
        200,
        3,
    )
    .map_err(|e| e.to_string())?;
    let b_lo = q.b_by_window.first().map(|w| w.1).unwrap_or(f64::NAN);
    let b_hi = q.b_by_window.last().map(|w| w.1).unwrap_or(f64::NAN);
    let bounded = b_hi <= 1.25 * b_lo + 1e-9;
    Ok((
        (k - 3.0).abs() <= 0.4 && q.a.is_finite() && q.b.is_finite() && q.violations == 0 && bounded,
        format!(
            "sheet k={k:.3} on {} vertices; qi a={:.3} b={:.3}, {} violations over {} pairs, b[5,20]={b_lo:.3} b[20,40]={b_hi:.3}",
            sheet.mesh.len(),
            q.a,
            q.b,
            q.violations,
            q.pairs.len()
        ),
    ))
}

fn rho_sandwich(_: &mut Shared) -> Outcome {
    let tol = 1e-4;
    let sweep = rho_sweep(&g12(), 200, (1.0, 30.0), 15.0, 7, tol).map_err(|e| e.to_string())?;
    let a = &sweep.audit;
    let c = a.constants.c_rho_hat;
    let in_range = a.pairs.iter().all(|p| within(p.dist, 1.0, 30.0));
    let lower = a.min_gap >= -3.0 * tol;
    let growth = sweep.max_high - sweep.max_low;
    Ok((
        a.pairs.len() == 200 && in_range && lower && c.is_finite() && growth < 1.0,
        format!(
            "ρ − dist in [{:.4}, {:.4}], C_rho_hat={c:.4}, max over [15,30] − max over [1,15] = {growth:.4}",
            a.min_gap, a.max_gap
        ),
    ))
}

fn curvature(_: &mut Shared) -> Outcome {
    let g = g12();
    let scan = curvature_scan(&g, 10_000, 5, 1e-4).map_err(|e| e.to_string())?;
    let ok = scan
        .samples
        .iter()
        .all(|k| within(*k, scan.lower - 1e-3, scan.upper + 1e-3));
    let g1 = HeintzeGroup::new(vec![1.0]).unwrap();
    let plane = curvature_scan(&g1, 1000, 6, 1e-4).map_err(|e| e.to_string())?;
    let dev = plane.samples.iter().map(|k| (k + 1.0).abs()).fold(0.0, f64::max);
    Ok((
        ok && dev <= 1e-4,
        format!(
            "λ=(1,2): K in [{:.5}, {:.5}] ⊂ [{}, {}] ± 1e-3; d=1: max |K + 1| = {dev:.2e}",
            scan.min, scan.max, scan.lower, scan.upper
        ),
    ))
}

fn conservation(_: &mut Shared) -> Outcome {
    let a = geodesic_audit(&g12(), 100, 10.0, 1e-3, 8).map_err(|e| e.to_string())?;
    Ok((
        a.max_speed_drift < 1e-8 && a.max_momentum_drift < 1e-8,
        format!(
            "speed drift {:.2e}, momentum drift {:.2e}",
            a.max_speed_drift, a.max_momentum_drift
        ),
    ))
}

fn face_volumes(_: &mut Shared) -> Outcome {
    let a = face_volume_audit(&g12(), 14.0, 0.2, 10).map_err(|e| e.to_string())?;
    let coarse = a.faces.iter().map(|f| f.rel_err).fold(0.0, f64::max);
    let fine = a.faces.iter().map(|f| f.rel_err_refined).fold(0.0, f64::max);
    let (t, last) = *a.ratios.last().unwrap();
    let ratio_err = (last / a.ratio_limit - 1.0).abs();
    Ok((
        coarse < 0.01 && fine < 0.0025 && ratio_err < 0.02,
        format!("max rel. error {coarse:.2e} at ε=0.2, {fine:.2e} at ε=0.1; ratio at t={t} off by {ratio_err:.2e}"),
    ))
}

fn convexity(_: &mut Shared) -> Outcome {
    let rows = convexity_scan(&g12(), &[0.1, 0.5, 1.0, 2.0, 3.0], 1000, -4.0, 9).map_err(|e| e.to_string())?;
    let convex = rows.iter().filter(|r| r.multiple <= 2.0).all(|r| r.min >= 0.0);
    let broken = rows.iter().filter(|r| r.multiple == 3.0).all(|r| r.min < 0.0);
    let worst = rows
        .iter()
        .filter(|r| r.multiple <= 2.0)
        .map(|r| r.min)
        .fold(f64::INFINITY, f64::min);
    let beyond = rows
        .iter()
        .filter(|r| r.multiple == 3.0)
        .map(|r| r.min)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        convex && broken,
        format!("min over a ≤ 2λ_i: {worst:.3e}; at a = 3λ_i every direction has a sample ≤ {beyond:.3e}"),
    ))
}

fn horoball_band(s: &mut Shared) -> Outcome {
    let g = g12();
    let c = sandwich_constants(s)?;
    let (_, mesh) = approx_growth(s)?;
    match sandwich_check(&g, mesh, &c, 100, 10, 1e-6) {
        Ok(r) => Ok((
            true,
            format!(
                "y + 2R in [{:.2e}, {:.6}] with upper {:.6}; {} spot checks inside",
                r.band.0,
                r.band.1,
                r.upper,
                r.spot_checks.len()
            ),
        )),
        Err(e) => Ok((false, e.to_string())),
    }
}

fn projection_decay(_: &mut Shared) -> Outcome {
    let ladder = [-8.0, -12.0, -16.0, -20.0];
    let probes = ball_ladder(&g12(), FaceKind::Plus(0), &ladder, 1.0, 0.025).map_err(|e| e.to_string())?;
    let devs: Vec<f64> = probes.iter().map(|p| p.jacobian_deviation).collect();
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    let last = *devs.last().unwrap();
    Ok((
        last <= 0.05 && monotone,
        format!(
            "max |σ − 1| along y_p = {ladder:?}: {}",
            devs.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn controlled_volume(_: &mut Shared) -> Outcome {
    let ladder = [-4.0, -8.0, -12.0, -16.0, -20.0];
    let probes = ball_ladder(&g12(), FaceKind::Plus(0), &ladder, 2.0, 0.05).map_err(|e| e.to_string())?;
    let at12 = probes[2].calibrated;
    let gaps: Vec<f64> = probes.iter().map(|p| (p.calibrated - 1.0).abs()).collect();
    let inversions = gaps.windows(2).filter(|w| w[1] > w[0]).count();
    Ok((
        within(at12, 0.8, 1.2) && inversions <= 1 && gaps[4] < gaps[0],
        format!(
            "Vol/ω_d r^d along y_p = {ladder:?}: {} (raw {})",
            probes
                .iter()
                .map(|p| format!("{:.4}", p.calibrated))
                .collect::<Vec<_>>()
                .join(", "),
            probes
                .iter()
                .map(|p| format!("{:.4}", p.ratio))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 11] = [
        ("growth exponent of 𝓗", growth_of_approx),
        ("Euclidean class is distinct", euclidean_class),
        ("true horosphere growth and quasi-isometry", true_horosphere),
        ("ρ sandwich", rho_sandwich),
        ("curvature bounds", curvature),
        ("geodesic conservation", conservation),
        ("face volumes", face_volumes),
        ("convexity", convexity),
        ("horoball sandwich", horoball_band),
        ("projection decay", projection_decay),
        ("controlled volume", controlled_volume),
    ];
    let mut shared = Shared {
        constants: None,
        approx: None,
    };
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match run(&mut shared) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            n + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
