//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use birkhoff::beams::{conjugacy_test, mirror_step, propagate_focus, FocusRatio, CONJUGACY_TOL};
use birkhoff::geom::{param_dist, point_line_dist};
use birkhoff::paths::{certify, launch_angle, max_length_path, path_length, solve_shooting, CertifiedPath};
use birkhoff::perturb::{break_conjugacy, bump_curvature};
use birkhoff::ray::{billiard_map, first_hit, reflect, trace};
use birkhoff::security::{
    check_general_position, check_non_collinearity, construct_witness, find_new_vertex_path, verify_bundle,
    WitnessBundle,
};
use birkhoff::{Error, PolygonalPath, RayState, Table, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_table(rng: &mut ChaCha8Rng) -> Table {
    Table::noisy_circle(1.0, rng.gen_range(0.0..0.02), 5, rng.gen())
}

fn random_interior(rng: &mut ChaCha8Rng, r: f64) -> Vec2 {
    Vec2::from_angle(rng.gen_range(0.0..TAU)) * (r * rng.gen::<f64>().sqrt())
}

/// A certified path between random interior points with `m` bounces.
fn random_path(rng: &mut ChaCha8Rng, m: usize) -> (Table, CertifiedPath) {
    loop {
        let t = random_table(rng);
        let (x, y) = (random_interior(rng, 0.7), random_interior(rng, 0.7));
        if x.dist(y) < 0.05 {
            continue;
        }
        if let Some(p) = max_length_path(&t, x, y, m, 8, rng.gen()).into_iter().next() {
            return (t, p);
        }
    }
}

fn reflection_and_section() -> Outcome {
    let c = Table::circle(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut s, alpha0) = (rng.gen::<f64>(), rng.gen_range(0.2..PI - 0.2));
    let mut alpha = alpha0;
    let (mut drift, mut chord_err) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let (s1, a1) = match billiard_map(&c, s, alpha) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("billiard map failed: {e}")),
        };
        let chord = c.point(s).dist(c.point(s1));
        chord_err = chord_err.max((chord - 2.0 * alpha0.sin()).abs());
        drift = drift.max((a1 - alpha0).abs());
        s = s1;
        alpha = a1;
    }
    outcome(
        drift < 1e-8 && chord_err < 1e-8,
        format!("alpha drift {drift:.2e}, chord error {chord_err:.2e}"),
    )
}

fn ellipse_focal_property() -> Outcome {
    let (a, b) = (2.0, 1.0);
    let e = Table::ellipse(a, b);
    let f = (a * a - b * b).sqrt();
    let foci = [Vec2::new(-f, 0.0), Vec2::new(f, 0.0)];
    let mut worst = 0.0f64;
    // per-segment maxima over all rays, to expose how the error grows
    let mut by_segment = [0.0f64; 9];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let ray = RayState::new(foci[0], Vec2::from_angle(rng.gen_range(0.0..TAU)));
        let tr = match trace(&e, &ray, 10) {
            Ok(t) => t,
            Err(err) => return outcome(false, format!("trace failed: {err}")),
        };
        let mut prev = foci[0];
        for (k, b) in tr.bounces.iter().enumerate() {
            // segment k lies on a line through focus k mod 2
            if k > 0 {
                let d = point_line_dist(foci[k % 2], prev, b.point);
                worst = worst.max(d);
                by_segment[k - 1] = by_segment[k - 1].max(d);
            }
            prev = b.point;
        }
    }
    // focal rays converge to the major-axis two-bounce orbit, which is
    // hyperbolic; deviations grow by about (a + c) / (a - c) per bounce
    let predicted = (a + f) / (a - f);
    let growth = (by_segment[8] / by_segment[2]).powf(1.0 / 6.0);
    let within = by_segment.iter().take_while(|&&d| d < 1e-8).count();
    outcome(
        worst < 1e-8,
        format!(
            "max focus-to-line distance {worst:.2e}; error grows {growth:.1}x per bounce \
             (orbit expansion {predicted:.1}x), first {within} of 9 reflected segments within 1e-8"
        ),
    )
}

/// Focusing distance of the reflected family by central differences of traced rays.
fn traced_reflection_focus(t: &Table, p: Vec2, theta: f64, h: f64) -> Option<f64> {
    let line = |u: f64| -> Option<(Vec2, Vec2)> {
        let v = Vec2::from_angle(u);
        let hit = first_hit(t, &RayState::new(p, v)).ok()?;
        Some((hit.point, reflect(v, t.frame(hit.s).normal)))
    };
    let (a, b) = (line(theta - h)?, line(theta + h)?);
    let dxi = (b.0 - a.0) / (2.0 * h);
    let dv = (b.1 - a.1) / (2.0 * h);
    Some(-dxi.dot(dv) / dv.norm_sq())
}

fn mirror_equation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let t = random_table(&mut rng);
        let p = random_interior(&mut rng, 0.8);
        let theta = rng.gen_range(0.0..TAU);
        let hit = match first_hit(&t, &RayState::new(p, Vec2::from_angle(theta))) {
            Ok(h) => h,
            Err(_) => continue,
        };
        if hit.alpha.sin() < 0.2 {
            continue;
        }
        let kappa = t.frame(hit.s).kappa;
        let analytic = match mirror_step(FocusRatio::finite(-hit.t), kappa, hit.alpha, 0.0, 1.0) {
            Ok(f) => f.value(),
            Err(_) => continue,
        };
        let Some(numeric) = traced_reflection_focus(&t, p, theta, 1e-5) else {
            continue;
        };
        worst = worst.max((numeric - analytic).abs() / analytic.abs().max(1.0));
        done += 1;
    }
    outcome(worst < 1e-6, format!("max relative deviation {worst:.2e} over 100 rays"))
}

fn focus_chain_anchor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let (t, p) = random_path(&mut rng, 1 + i % 4);
        let f0 = match propagate_focus(&t, &p.path, 0.0) {
            Ok(f) => f.value(),
            Err(e) => return outcome(false, format!("propagation failed: {e}")),
        };
        worst = worst.max((f0 + p.path.length()).abs());
    }
    outcome(worst < 1e-9, format!("max |f(0) + length| {worst:.2e} over 50 paths"))
}

fn conjugacy_detection() -> Outcome {
    let c = Table::circle(1.0);
    let diameter = PolygonalPath::new(&c, Vec2::ZERO, Vec2::ZERO, vec![0.3]);
    let circle_margin = conjugacy_test(&c, &diameter).map(|r| r.margin).unwrap_or(f64::NAN);
    let e = Table::ellipse(2.0, 1.0);
    let f = 3f64.sqrt();
    let focal = PolygonalPath::new(&e, Vec2::new(-f, 0.0), Vec2::new(f, 0.0), vec![0.2]);
    let ellipse = conjugacy_test(&e, &focal).map(|r| r.conjugate).unwrap_or(false);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut generic = 0;
    for _ in 0..100 {
        let (t, p) = random_path(&mut rng, 1);
        if conjugacy_test(&t, &p.path).is_ok_and(|r| !r.conjugate && r.margin.abs() > 1e-3) {
            generic += 1;
        }
    }
    let fraction = generic as f64 / 100.0;
    outcome(
        circle_margin.abs() < 1e-6 && ellipse && fraction >= 0.95,
        format!("circle margin {circle_margin:.2e}, ellipse conjugate {ellipse}, non-conjugate fraction {fraction:.2}"),
    )
}

fn variational_solver() -> Outcome {
    let c = Table::circle(1.0);
    let (x, y) = (Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0));
    let found = max_length_path(&c, x, y, 1, 16, 6);
    let Some(best) = found.first() else {
        return outcome(false, "no path found");
    };
    let v = best.path.points[0];
    let vertex_err = v.dist(Vec2::new(0.0, 1.0)).min(v.dist(Vec2::new(0.0, -1.0)));
    let length_err = (best.certificate.length - 2.0 * 1.25f64.sqrt()).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut grad_err = 0.0f64;
    for _ in 0..200 {
        let t = random_table(&mut rng);
        let (x, y) = (random_interior(&mut rng, 0.7), random_interior(&mut rng, 0.7));
        let m = rng.gen_range(1..5);
        let s: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
        let Ok((_, g)) = path_length(&t, x, y, &s) else {
            return outcome(false, "length evaluation failed");
        };
        let h = 1e-6;
        for i in 0..m {
            let (mut a, mut b) = (s.clone(), s.clone());
            a[i] -= h;
            b[i] += h;
            let fd = (path_length(&t, x, y, &b).unwrap().0 - path_length(&t, x, y, &a).unwrap().0) / (2.0 * h);
            grad_err = grad_err.max((fd - g[i]).abs());
        }
    }
    outcome(
        vertex_err < 1e-6 && length_err < 1e-8 && grad_err < 1e-6,
        format!("vertex error {vertex_err:.2e}, length error {length_err:.2e}, gradient error {grad_err:.2e}"),
    )
}

fn shooting_uniqueness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..50 {
        let (t, p) = random_path(&mut rng, 1 + i % 3);
        let path = &p.path;
        let theta0 = launch_angle(path);
        for _ in 0..3 {
            let theta = theta0 + rng.gen_range(-0.01..0.01);
            match solve_shooting(&t, path.x, path.y, path.bounces(), theta) {
                Ok(r) => {
                    for (a, b) in r.path.vertices.iter().zip(&path.vertices) {
                        worst = worst.max(param_dist(*a, *b));
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    let c = Table::circle(1.0);
    let singular = matches!(
        solve_shooting(&c, Vec2::ZERO, Vec2::ZERO, 1, 0.4),
        Err(Error::SingularJacobian { .. })
    );
    outcome(
        worst < 1e-8 && failures == 0 && singular,
        format!("max vertex spread {worst:.2e}, {failures} non-converged, center-to-center singular {singular}"),
    )
}

fn perturbation_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut dk_err, mut pos_err, mut exact) = (0.0f64, 0.0f64, true);
    for _ in 0..10 {
        let t = random_table(&mut rng);
        let s0 = rng.gen::<f64>();
        let dk = rng.gen_range(-0.1..0.1);
        let Ok((after, rec)) = bump_curvature(&t, s0, dk, 0.05, f64::INFINITY, &[]) else {
            return outcome(false, "curvature bump failed");
        };
        let (f0, f1) = (t.frame(s0), after.frame(s0));
        dk_err = dk_err.max((f1.kappa - f0.kappa - dk).abs());
        pos_err = pos_err.max(f1.point.dist(f0.point)).max(f1.tangent.dist(f0.tangent));
        for j in 0..200 {
            let s = j as f64 / 200.0;
            if rec.untouched(s) {
                exact &= t.eval(s, 4).unwrap() == after.eval(s, 4).unwrap();
            }
        }
    }
    let c = Table::circle(1.0);
    let diameter = PolygonalPath::new(&c, Vec2::ZERO, Vec2::ZERO, vec![0.0]);
    let (margin, residual) = match break_conjugacy(&c, &diameter, 100.0, &[]) {
        Ok((t, Some(_), m)) => (m, certify(&t, &diameter.on_table(&t)).map(|c| c.residual).unwrap_or(f64::INFINITY)),
        _ => (0.0, f64::INFINITY),
    };
    outcome(
        dk_err < 1e-6 && pos_err < 1e-10 && exact && margin.abs() >= 10.0 * CONJUGACY_TOL && residual < 1e-9,
        format!(
            "curvature error {dk_err:.2e}, position/tangent error {pos_err:.2e}, exact outside support {exact}, \
             conjugacy margin {margin:.2e}, residual {residual:.2e}"
        ),
    )
}

fn verifier_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut agree = 0;
    for _ in 0..100 {
        let (paths, x, y) = common::random_bundle(&mut rng);
        let tol = [1e-4, 1e-2, 5e-2][rng.gen_range(0..3)];
        let r = check_general_position(&paths, x, y, tol);
        let o = common::oracle::check(&paths, x, y, tol);
        if [r.gp1, r.gp2, r.gp3, r.gp4] == o.gp && r.nc == o.nc {
            agree += 1;
        }
    }
    // stability on genuine billiard bundles
    let (mut stable, mut tried) = (0, 0);
    while tried < 20 {
        let t = random_table(&mut rng);
        let (x, y) = (random_interior(&mut rng, 0.6), random_interior(&mut rng, 0.6));
        let paths: Vec<PolygonalPath> = std::iter::once(PolygonalPath::segment(x, y))
            .chain((1..4).filter_map(|m| max_length_path(&t, x, y, m, 8, rng.gen()).into_iter().next().map(|c| c.path)))
            .collect();
        let r = check_general_position(&paths, x, y, 1e-6);
        if !r.passes() || !r.margin.is_finite() {
            continue;
        }
        tried += 1;
        let mu = r.margin;
        let noisy: Vec<PolygonalPath> = paths
            .iter()
            .map(|p| {
                let pts = p
                    .points
                    .iter()
                    .map(|&q| q + Vec2::from_angle(rng.gen_range(0.0..TAU)) * (0.249 * mu * rng.gen::<f64>()))
                    .collect();
                common::raw(x, y, pts)
            })
            .collect();
        if check_general_position(&noisy, x, y, mu / 2.0).passes() {
            stable += 1;
        }
    }
    outcome(
        agree == 100 && stable == tried,
        format!("oracle agreement {agree}/100, stable under noise {stable}/{tried}"),
    )
}

fn witness(n: usize) -> (Outcome, Duration) {
    let table = Table::noisy_circle(1.0, 1e-2, 5, 7);
    let (x, y) = (Vec2::new(-0.3, 0.1), Vec2::new(0.4, -0.2));
    let start = Instant::now();
    let result = construct_witness(&table, x, y, n, 4.0, 7);
    let elapsed = start.elapsed();
    let o = match result {
        Ok(bundle) => {
            let json = serde_json::to_string(&bundle).expect("bundle serializes");
            let back: WitnessBundle = serde_json::from_str(&json).expect("bundle parses");
            let v = verify_bundle(&back);
            outcome(
                v.passed && back.paths.len() == n && elapsed < Duration::from_secs(300),
                format!(
                    "n = {n}: verified {}, residual {:.1e}, margin {:.2e}, d2 drift {:.2e}, {} perturbations, {:.1?}",
                    v.passed,
                    v.max_residual,
                    v.general_position.margin,
                    v.d2_drift,
                    back.perturbation_log.len(),
                    elapsed
                ),
            )
        }
        Err(e) => outcome(false, format!("n = {n}: {e}; diagnostics {:?}", e.partial.diagnostics)),
    };
    (o, elapsed)
}

fn end_to_end_witness() -> Outcome {
    let (a, _) = witness(3);
    let (b, _) = witness(4);
    outcome(a.pass && b.pass, format!("{}; {}", a.detail, b.detail))
}

fn pigeonhole() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut found = 0;
    let mut notes = Vec::new();
    let mut instance = 0;
    while instance < 20 {
        let t = random_table(&mut rng);
        let (x, y) = (random_interior(&mut rng, 0.6), random_interior(&mut rng, 0.6));
        if x.dist(y) < 0.1 {
            continue;
        }
        // existing bundle: the segment plus short paths up to k vertices
        let k_target = 1 + instance % 6;
        let mut existing = vec![PolygonalPath::segment(x, y)];
        let mut k = 0;
        for m in [1, 2, 1, 3, 2] {
            if k + m > k_target {
                continue;
            }
            if let Some(c) = max_length_path(&t, x, y, m, 8, rng.gen()).into_iter().next() {
                k += m;
                existing.push(c.path);
            }
        }
        if !check_non_collinearity(&existing, y, 1e-4).is_empty() {
            continue;
        }
        instance += 1;
        match find_new_vertex_path(&t, x, y, &existing, 8, rng.gen(), 1e-4) {
            Ok(r) => {
                let v = r.path.path.points[r.new_vertex];
                if existing.iter().flat_map(|p| p.points.iter()).all(|q| q.dist(v) >= 1e-4) {
                    found += 1;
                }
            }
            Err(e) => notes.push(format!("k = {k}: {e}")),
        }
    }
    outcome(found == 20, format!("{found}/20 instances with a new vertex {notes:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("reflection and section correctness", reflection_and_section),
        ("ellipse focal property", ellipse_focal_property),
        ("mirror equation vs traced envelope", mirror_equation),
        ("focus chain at zero curvature", focus_chain_anchor),
        ("conjugacy detection", conjugacy_detection),
        ("variational solver", variational_solver),
        ("shooting uniqueness", shooting_uniqueness),
        ("perturbation contracts", perturbation_contracts),
        ("general-position verifier", verifier_vs_oracle),
        ("end-to-end witness", end_to_end_witness),
        ("new-vertex pigeonhole", pigeonhole),
    ];
    let limits = [1.0, 1.0, 10.0, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, 600.0, f64::INFINITY];
    let mut failed = 0;
    for (i, ((name, check), limit)) in criteria.iter().zip(limits).enumerate() {
        let start = Instant::now();
        let mut o = check();
        let secs = start.elapsed().as_secs_f64();
        if secs > limit {
            o.pass = false;
            o.detail.push_str(&format!(" (runtime limit {limit} s exceeded)"));
        }
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {}: {} [{secs:.2} s] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
