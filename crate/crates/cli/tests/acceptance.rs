//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use geodecomp_core::embed::{
    comp_to_sphere, density_to_sphere, sphere_to_comp, sphere_to_density, unit_edges, Composition, DensityOnGrid,
};
use geodecomp_core::harness::{evaluate_simulation, CvConfig, EvalConfig};
use geodecomp_core::simgen::{impose_periodic, impose_trend};
use geodecomp_core::sphere::{exp_map, frechet_gradient, frechet_objective, generator_to_operator};
use geodecomp_core::stpd::{cycle_at, deseasonalize, detrend_with_path, local_weights, redetect_period, Kernel};
use geodecomp_core::tpsar::fit_tpsar_from;
use geodecomp_core::{
    decompose, expm_apply, frechet_mean, geo_dist, inner, log_generator, remove, rotate, simulate, DecomposeConfig,
    ModelKind, SimConfig, SpherePoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = budget.map_or(true, |b| elapsed <= b);
    let pass = out.pass && in_time;
    let budget_note = budget.map_or(String::new(), |b| format!(" (budget {}s)", b.as_secs()));
    println!(
        "criterion {id} {name}: {} | {} | {:.1}s{budget_note}",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    pass
}

/// Bandwidth rule used for the Monte Carlo criteria.
fn rule_bandwidth(n: usize) -> f64 {
    1.5 * (n as f64).powf(-0.2)
}

fn random_unit(rng: &mut ChaCha20Rng, dim: usize) -> SpherePoint {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            return SpherePoint::normalize(v).unwrap();
        }
    }
}

/// A point within geodesic radius `r` of `c`.
fn near(rng: &mut ChaCha20Rng, c: &SpherePoint, r: f64) -> SpherePoint {
    let d = random_unit(rng, c.dim());
    let k: f64 = d.coords().iter().zip(c.coords()).map(|(a, b)| a * b).sum();
    let t: Vec<f64> = d.coords().iter().zip(c.coords()).map(|(a, b)| a - k * b).collect();
    let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    let len = r * rng.random::<f64>();
    exp_map(c, &t.iter().map(|x| x * len / tn).collect::<Vec<_>>())
}

fn euclid(a: &SpherePoint, b: &SpherePoint) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn geometry() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (mut e_rot, mut e_ip, mut e_rm, mut e_exp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for dim in [3usize, 7] {
        for _ in 0..1000 {
            let c = random_unit(&mut rng, dim);
            // Radius (π/2 - 0.1)/2 about a common center bounds pairwise distances.
            let r = (FRAC_PI_2 - 0.1) / 2.0;
            let (a, b, v) = (near(&mut rng, &c, r), near(&mut rng, &c, r), near(&mut rng, &c, r));
            let g = log_generator(&b, &v).unwrap();
            e_rot = e_rot.max(euclid(&rotate(&g, &b), &v));
            let (x, y) = (random_unit(&mut rng, dim), random_unit(&mut rng, dim));
            let before = inner(&x, &y).unwrap();
            let after = inner(&rotate(&g, &x), &rotate(&g, &y)).unwrap();
            e_ip = e_ip.max((before - after).abs());
            e_rm = e_rm.max(euclid(&remove(&a, &b, &b).unwrap(), &a));
            e_rm = e_rm.max(euclid(&remove(&b, &b, &v).unwrap(), &v));
            let op = generator_to_operator(&g);
            e_exp = e_exp.max(euclid(&expm_apply(&op, &a).unwrap(), &rotate(&g, &a)));
            e_exp = e_exp.max(euclid(&expm_apply(&op, &x).unwrap(), &rotate(&g, &x)));
            count += 1;
        }
    }
    Outcome {
        pass: e_rot <= 1e-10 && e_ip <= 1e-10 && e_rm <= 1e-10 && e_exp <= 1e-9,
        detail: format!(
            "{count} cases; rotate {e_rot:.1e}, inner {e_ip:.1e}, remove {e_rm:.1e}, expm {e_exp:.1e}"
        ),
    }
}

fn latlon(lat: f64, lon: f64) -> SpherePoint {
    SpherePoint::new(vec![lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]).unwrap()
}

/// Exhaustive search on a 0.5° latitude/longitude grid.
fn grid_argmin(points: &[SpherePoint], w: &[f64]) -> SpherePoint {
    let step = 0.5f64.to_radians();
    let mut best = (f64::INFINITY, latlon(0.0, 0.0));
    for i in 0..=360 {
        let lat = -FRAC_PI_2 + i as f64 * step;
        for j in 0..720 {
            let p = latlon(lat, j as f64 * step);
            let f = frechet_objective(&p, points, w);
            if f < best.0 {
                best = (f, p);
            }
        }
    }
    best.1
}

fn frechet_oracle() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (mut worst_deg, mut worst_grad) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let c = random_unit(&mut rng, 3);
        let n = rng.random_range(3..=8);
        let pts: Vec<SpherePoint> = (0..n).map(|_| near(&mut rng, &c, 0.6)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let m = frechet_mean(&pts, &w).unwrap();
        let oracle = grid_argmin(&pts, &w);
        worst_deg = worst_deg.max(geo_dist(&m, &oracle).unwrap().to_degrees());
        let g = frechet_gradient(&m, &pts, &w).unwrap();
        worst_grad = worst_grad.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    Outcome {
        pass: worst_deg <= 2.0 && worst_grad <= 1e-8,
        detail: format!("20 instances; max gap to grid {worst_deg:.3} deg, max gradient norm {worst_grad:.1e}"),
    }
}

fn local_linear_equivalence() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let n = 150;
    let h = 0.12;
    let ys: Vec<f64> = (1..=n)
        .map(|t| {
            let x = t as f64 / n as f64;
            (3.0 * x).sin() + x * x + 0.2 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let (mut fit_err, mut moment_err) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let u = 0.025 + 0.95 * i as f64 / 19.0;
        let w = local_weights(u, n, h, Kernel::Gaussian).unwrap();
        let est = w.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        // Weighted least squares for a + b (x - u) with Gaussian kernel weights.
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, y) in ys.iter().enumerate() {
            let x = (k + 1) as f64 / n as f64 - u;
            let kw = (-0.5 * (x / h).powi(2)).exp();
            s0 += kw;
            s1 += kw * x;
            s2 += kw * x * x;
            t0 += kw * y;
            t1 += kw * x * y;
        }
        let oracle = (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1);
        fit_err = fit_err.max((est - oracle).abs());
        let m0 = w.iter().sum::<f64>() / n as f64;
        let m1 = w
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * ((k + 1) as f64 / n as f64 - u))
            .sum::<f64>()
            / n as f64;
        moment_err = moment_err.max((m0 - 1.0).abs()).max(m1.abs());
    }
    Outcome {
        pass: fit_err <= 1e-8 && moment_err <= 1e-12,
        detail: format!("20 points; fit gap {fit_err:.1e}, moment error {moment_err:.1e}"),
    }
}

fn period_recovery() -> Outcome {
    let sim = SimConfig {
        dim: 7,
        len: 300,
        theta0: 12,
        phi: vec![0.5],
        seed: 4,
        ..Default::default()
    };
    let h = rule_bandwidth(300);
    let cfg = DecomposeConfig::default();
    let (mut hit, mut resid_one) = (0, 0);
    for r in 0..50 {
        let b = simulate(&sim.with_replicate(r)).unwrap();
        let d = decompose(&b.y, h, &cfg).unwrap();
        hit += (d.period == 12) as usize;
        resid_one += (redetect_period(&d.residuals, h, &cfg).unwrap() == 1) as usize;
    }
    Outcome {
        pass: hit >= 45 && resid_one >= 45,
        detail: format!("period 12 in {hit}/50, residual period 1 in {resid_one}/50 (h = {h:.3})"),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_sq_dist(a: impl Iterator<Item = (SpherePoint, SpherePoint)>) -> f64 {
    let (mut s, mut k) = (0.0, 0);
    for (x, y) in a {
        s += geo_dist(&x, &y).unwrap().powi(2);
        k += 1;
    }
    s / k as f64
}

fn consistency() -> Outcome {
    let cfg = DecomposeConfig::default();
    let mut rows = Vec::new();
    let mut phis = Vec::new();
    for &n in &[120usize, 300, 600] {
        let sim = SimConfig {
            len: n,
            phi: vec![0.5],
            seed: 5,
            ..Default::default()
        };
        let h = rule_bandwidth(n);
        let (mut fs, mut gs, mut rs) = (Vec::new(), Vec::new(), Vec::new());
        for r in 0..20 {
            let b = simulate(&sim.with_replicate(r)).unwrap();
            let d = decompose(&b.y, h, &cfg).unwrap();
            fs.push(mean_sq_dist(d.trend.values.iter().cloned().zip(b.f_path.iter().cloned())));
            gs.push(mean_sq_dist(
                (1..=n).map(|t| (cycle_at(&d.cycle, t).clone(), cycle_at(&b.g_cycle, t).clone())),
            ));
            rs.push(mean_sq_dist(d.residuals.points().iter().cloned().zip(b.r2.points().iter().cloned())));
            if n == 120 {
                phis.push(fit_tpsar_from(d, 1).unwrap().ar.coeffs.phi()[0]);
            }
        }
        rows.push((median(fs), median(gs), median(rs)));
    }
    let dec = |f: fn(&(f64, f64, f64)) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let bias = phis.iter().sum::<f64>() / phis.len() as f64 - 0.5;
    let mse = phis.iter().map(|p| (p - 0.5).powi(2)).sum::<f64>() / phis.len() as f64;
    let pass = dec(|r| r.0) && dec(|r| r.1) && dec(|r| r.2) && bias < 0.0 && bias.abs() <= 0.06 && mse <= 0.01;
    let fmt = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(|r| format!("{:.2e}", f(r))).collect::<Vec<_>>().join(">");
    Outcome {
        pass,
        detail: format!(
            "IMSE f {} g {} R2 {}; phi1 bias {bias:.4} mse {mse:.4}",
            fmt(|r| r.0),
            fmt(|r| r.1),
            fmt(|r| r.2)
        ),
    }
}

fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xm = (n + 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let x = (i + 1) as f64 - xm;
        sxy += x * (y - ym);
        sxx += x * x;
    }
    sxy / sxx
}

fn forecast_ordering() -> Outcome {
    let settings = [vec![0.5], vec![0.5, -0.3], vec![0.3, -0.1, 0.4]];
    let cfg = EvalConfig {
        kappa: 0.9,
        cv: CvConfig {
            bandwidth: Some(rule_bandwidth(108)),
            ..Default::default()
        },
        ..Default::default()
    };
    let mut ordered = true;
    let mut slopes = Vec::new();
    let mut notes = Vec::new();
    for (i, phi) in settings.iter().enumerate() {
        let sim = SimConfig {
            len: 120,
            phi: phi.clone(),
            seed: 6 + i as u64,
            ..Default::default()
        };
        let r = evaluate_simulation(&sim, 50, &cfg).unwrap();
        let (tp, sar, dsar) = (&r.errors[&ModelKind::Tpsar], &r.errors[&ModelKind::Sar], &r.errors[&ModelKind::Dsar]);
        let ok = (6..=12).all(|m| tp[m - 1] < sar[m - 1] && tp[m - 1] < dsar[m - 1]);
        ordered &= ok;
        slopes.push(ols_slope(tp));
        notes.push(format!(
            "AR({}) m=12 tpsar {:.4} sar {:.4} dsar {:.4}{}",
            phi.len(),
            tp[11],
            sar[11],
            dsar[11],
            if ok { "" } else { " (order violated)" }
        ));
    }
    let slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    Outcome {
        pass: ordered && slope >= 0.0,
        detail: format!("{}; mean tpsar slope {slope:.2e}/step", notes.join("; ")),
    }
}

fn round_trips() -> Outcome {
    let mut worst_inv = 0.0f64;
    let mut worst_unit = 0.0f64;
    for r in 0..5 {
        let b = simulate(&SimConfig {
            len: 150,
            seed: 8,
            replicate: r,
            ..Default::default()
        })
        .unwrap();
        let r2 = deseasonalize(&b.r1, &b.g_cycle, &b.base).unwrap();
        let r1 = detrend_with_path(&b.y, &b.f_path, &b.base).unwrap();
        let r1_again = impose_periodic(&b.r2, &b.g_cycle, &b.base).unwrap();
        let y_again = impose_trend(&b.r1, &b.f_path, &b.base).unwrap();
        for (x, y) in r2.points().iter().zip(b.r2.points()) {
            worst_inv = worst_inv.max(geo_dist(x, y).unwrap());
        }
        for (x, y) in r1.points().iter().zip(b.r1.points()).chain(r1_again.points().iter().zip(b.r1.points())) {
            worst_inv = worst_inv.max(geo_dist(x, y).unwrap());
        }
        for (x, y) in y_again.points().iter().zip(b.y.points()) {
            worst_inv = worst_inv.max(geo_dist(x, y).unwrap());
        }
        let d = decompose(&b.y, rule_bandwidth(150), &DecomposeConfig::default()).unwrap();
        let model = fit_tpsar_from(d.clone(), 2).unwrap();
        let fc = geodecomp_core::forecast_tpsar(&model, 12).unwrap();
        let outputs = d
            .trend
            .values
            .iter()
            .chain(&d.cycle)
            .chain(d.detrended.points())
            .chain(d.residuals.points())
            .chain([&d.mu_y, &d.mu_r1, &d.mu_r2])
            .chain(&fc);
        for p in outputs {
            let n = p.coords().iter().map(|x| x * x).sum::<f64>().sqrt();
            worst_unit = worst_unit.max((n - 1.0).abs());
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let mut worst_embed = 0.0f64;
    for _ in 0..200 {
        let g = rng.random_range(2..10);
        let raw: Vec<f64> = (0..g).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let comp = Composition::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let back = sphere_to_comp(&comp_to_sphere(&comp).unwrap());
        for (a, b) in back.shares().iter().zip(comp.shares()) {
            worst_embed = worst_embed.max((a - b).abs());
        }
        let edges = unit_edges(g);
        let vals: Vec<f64> = raw.iter().map(|x| x / total * g as f64).collect();
        let dens = DensityOnGrid::on_bins(&edges, vals).unwrap();
        let back = sphere_to_density(&density_to_sphere(&dens).unwrap(), dens.grid(), dens.quadrature()).unwrap();
        for (a, b) in back.values().iter().zip(dens.values()) {
            worst_embed = worst_embed.max((a - b).abs());
        }
    }
    Outcome {
        pass: worst_inv <= 1e-9 && worst_embed <= 1e-12 && worst_unit <= 1e-9,
        detail: format!("inverse gap {worst_inv:.1e}, embedding gap {worst_embed:.1e}, unit-norm gap {worst_unit:.1e}"),
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_geodecomp")
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn degenerate() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).to_string_lossy().into_owned();
    let row = "0.2,0.3,0.1,0.4";
    let mut text = String::from("t,c1,c2,c3,c4\n");
    for t in 1..=40 {
        text.push_str(&format!("{t},{row}\n"));
    }
    std::fs::write(p("const.csv"), text).unwrap();
    let mut codes = Vec::new();
    codes.push(run(&["decompose", "--input", &p("const.csv"), "--kind", "composition", "--out", &p("d.json")]).0);
    codes.push(run(&["fit", "--input", &p("const.csv"), "--kind", "composition", "--out", &p("m.json")]).0);
    codes.push(
        run(&["forecast", "--model", &p("m.json"), "--steps", "5", "--back-map", "composition", "--out", &p("f.csv")]).0,
    );
    if codes.iter().any(|c| *c != 0) {
        return Outcome {
            pass: false,
            detail: format!("exit codes {codes:?}"),
        };
    }
    let d: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("d.json")).unwrap()).unwrap();
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("m.json")).unwrap()).unwrap();
    let period = d["period"].as_u64();
    let model_period = m["decomposition"]["period"].as_u64();
    let phi: Vec<f64> = m["ar"]["coeffs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let flag = m["ar"]["degenerate"].as_bool() == Some(true);
    let fc = std::fs::read_to_string(p("f.csv")).unwrap();
    let want = [0.2, 0.3, 0.1, 0.4];
    let mut worst = 0.0f64;
    for line in fc.lines().skip(1) {
        for (v, w) in line.split(',').skip(1).zip(want) {
            worst = worst.max((v.parse::<f64>().unwrap() - w).abs());
        }
    }
    let pass = period == Some(1)
        && model_period == Some(1)
        && phi.iter().all(|x| *x == 0.0)
        && flag
        && fc.lines().count() == 6
        && worst < 1e-9;
    Outcome {
        pass,
        detail: format!(
            "exit codes {codes:?}; period {period:?}/{model_period:?}; phi {phi:?}; degenerate {flag}; forecast gap {worst:.1e}"
        ),
    }
}

fn files_equal(a: &Path, b: &Path) -> bool {
    std::fs::read(a).ok() == std::fs::read(b).ok()
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let outputs = ["y.csv", "truth.json", "d.json", "m.json", "f.csv", "e.json", "e.csv"];
    let mut codes = Vec::new();
    for d in &dirs {
        let p = |f: &str| d.path().join(f).to_string_lossy().into_owned();
        std::fs::write(p("sim.json"), r#"{"len": 60, "phi": [0.3, -0.1, 0.4]}"#).unwrap();
        std::fs::write(p("cfg.json"), r#"{"kappa": 0.9, "cv": {"kappa": 0.25, "max_order": 3}}"#).unwrap();
        let steps: Vec<Vec<String>> = vec![
            vec!["simulate", "--seed", "7", "--sim", &p("sim.json"), "--out", &p("y.csv"), "--truth", &p("truth.json")],
            vec!["decompose", "--input", &p("y.csv"), "--out", &p("d.json"), "--config", &p("cfg.json")],
            vec!["fit", "--input", &p("y.csv"), "--out", &p("m.json"), "--config", &p("cfg.json")],
            vec!["forecast", "--model", &p("m.json"), "--steps", "6", "--out", &p("f.csv")],
            vec![
                "evaluate", "--simulate", "--seed", "7", "--sim", &p("sim.json"), "--replicates", "2", "--config",
                &p("cfg.json"), "--out", &p("e.json"), "--csv", &p("e.csv"),
            ],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        for s in &steps {
            codes.push(run(&s.iter().map(String::as_str).collect::<Vec<_>>()).0);
        }
    }
    let same: Vec<&str> = outputs
        .iter()
        .copied()
        .filter(|f| files_equal(&dirs[0].path().join(f), &dirs[1].path().join(f)))
        .collect();
    Outcome {
        pass: codes.iter().all(|c| *c == 0) && same.len() == outputs.len(),
        detail: format!("exit codes {codes:?}; identical {}/{} outputs", same.len(), outputs.len()),
    }
}

fn main() {
    let _ = geodecomp_core::harness::init_thread_pool();
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    let results = [
        report(1, "geometry suite", Some(Duration::from_secs(10)), geometry),
        report(2, "frechet mean oracle", Some(Duration::from_secs(60)), frechet_oracle),
        report(3, "local-linear equivalence", None, local_linear_equivalence),
        report(4, "period recovery", mins(15), period_recovery),
        report(5, "consistency trends", mins(30), consistency),
        report(6, "forecast ordering", mins(30), forecast_ordering),
        report(7, "round-trip identities", None, round_trips),
        report(8, "degenerate handling", None, degenerate),
        report(9, "cli determinism", None, determinism),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
