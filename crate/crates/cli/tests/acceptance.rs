//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use polyfact::instances::{gen_lossless, gen_spectrum, Instance, SpectrumOptions};
use polyfact::paraunitary::{
    complete_to_paraunitary, compare_completions, deficiency_matrix, paraunitary_degree, verify_paraunitary, LosslessRow,
};
use polyfact::rankdef::{
    check_rank_identity, compare_factors, find_rank_drop_points, select_pivot, spectral_factor, RankDefOptions,
};
use polyfact::roots::poly_roots;
use polyfact::{AnalyticPolyMatrix, CMatrix, LaurentMatrix, LaurentPoly};

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: String) -> Outcome {
    Outcome { pass, summary }
}

fn opts_for(s: &LaurentMatrix) -> RankDefOptions {
    RankDefOptions::for_problem(s.rows(), s.hi().unwrap_or(0).max(0) as usize)
}

/// Instance `i` of the 100-instance sweep: m in 1..=5, k in 1..=m, N in 0..=6.
fn sweep_instance(i: u64) -> Instance {
    let m = 1 + (i % 5) as usize;
    let k = 1 + ((i / 5) as usize % m);
    let n = ((3 * i + i / 7) % 7) as usize;
    gen_spectrum(m, k, n, 1000 + i, SpectrumOptions::default())
}

struct Factored {
    instance: Instance,
    factor: Option<AnalyticPolyMatrix>,
    residual: f64,
}

fn criterion_1(runs: &[Factored], elapsed: Duration) -> Outcome {
    let ok = runs.iter().filter(|r| r.factor.is_some() && r.residual <= 1e-7).count();
    let worst = runs.iter().map(|r| r.residual).fold(0.0, f64::max);
    let fast = elapsed < Duration::from_secs(60);
    outcome(
        ok == runs.len() && fast,
        format!("round-trip factorization: {ok}/{} residual <= 1e-7 (worst {worst:.2e}), {:.1} s", runs.len(), elapsed.as_secs_f64()),
    )
}

fn criterion_2(runs: &[Factored]) -> Outcome {
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for r in runs {
        let Some(f) = &r.factor else {
            failures += 1;
            continue;
        };
        let opts = opts_for(&r.instance.spectrum);
        let drops = find_rank_drop_points(f, &opts).map(|p| p.len()).unwrap_or(usize::MAX);
        let scale = f.max_abs_coeff();
        let mut points = vec![Complex64::new(0.0, 0.0)];
        for radius in [0.25, 0.5, 0.75, 0.9] {
            points.extend((0..64).map(|j| Complex64::from_polar(radius, std::f64::consts::TAU * j as f64 / 64.0)));
        }
        let smin = points
            .iter()
            .map(|&z| {
                let sv = f.eval(z).expect("analytic").singular_values();
                sv.iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
            / scale;
        worst = worst.min(smin);
        if drops != 0 || smin <= 1e-8 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("full rank inside the disk: {failures} failures, min sigma/scale on rings {worst:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut ok = 0;
    let mut worst_defect = 0.0f64;
    let total = 20;
    for i in 0..total {
        let m = 2 + (i % 4) as usize;
        let k = 1 + ((i / 4) as usize % m);
        let inst = gen_spectrum(m, k, 1 + (i % 6) as usize, 2000 + i, SpectrumOptions::default());
        let base = opts_for(&inst.spectrum);
        let other = RankDefOptions { rng_seed: 17 + i, ..base.clone() };
        let (Ok((f, _)), Ok((g, _))) = (spectral_factor(&inst.spectrum, &base), spectral_factor(&inst.spectrum, &other)) else {
            continue;
        };
        if let Ok(Some(u)) = compare_factors(&f, &g, 1e-6) {
            let defect = (u.adjoint() * &u - CMatrix::identity(k, k)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            worst_defect = worst_defect.max(defect);
            ok += 1;
        }
    }
    outcome(
        ok == total,
        format!("uniqueness across seeds: {ok}/{total} related by a constant unitary (worst unitarity defect {worst_defect:.2e})"),
    )
}

/// Coefficients of `det F` recovered from unit-circle samples.
fn det_coefficients(f: &AnalyticPolyMatrix) -> Vec<Complex64> {
    let n = f.hi().unwrap_or(0).max(0) as usize * f.rows();
    let count = (n + 1).next_power_of_two() * 2;
    let samples: Vec<CMatrix> = f
        .eval_unit_grid(count)
        .iter()
        .map(|x| CMatrix::from_element(1, 1, x.determinant()))
        .collect();
    let det = LaurentMatrix::from_unit_grid(&samples, 0).entry(0, 0);
    (0..=n as i32).map(|p| det.coeff(p)).collect()
}

fn criterion_4() -> Outcome {
    let total = 20;
    let mut ok = 0;
    let mut closest = f64::INFINITY;
    for i in 0..total {
        let m = 1 + (i % 5) as usize;
        let inst = gen_spectrum(m, m, (i % 7) as usize, 3000 + i, SpectrumOptions::default());
        let Ok((f, _)) = spectral_factor(&inst.spectrum, &opts_for(&inst.spectrum)) else { continue };
        let mut coeffs = det_coefficients(&f);
        let top = coeffs.iter().fold(0.0f64, |a, c| a.max(c.norm()));
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() <= 1e-13 * top) {
            coeffs.pop();
        }
        let smallest = poly_roots(&coeffs).iter().map(|r| r.norm()).fold(f64::INFINITY, f64::min);
        closest = closest.min(smallest);
        if smallest >= 1.0 - 1e-7 {
            ok += 1;
        }
    }
    outcome(
        ok == total,
        format!("full-rank regression: {ok}/{total} with det roots outside the disk (smallest |root| {closest:.6})"),
    )
}

fn criterion_5() -> Outcome {
    let total = 50;
    let mut ok = 0;
    let mut notes = Vec::new();
    for i in 0..total {
        let m = 2 + (i % 4) as usize;
        let n = 1 + ((i / 4) % 6) as usize;
        let inst = gen_lossless(m, n, 5000 + i);
        let Ok((u, report)) = complete_to_paraunitary(&inst.row, &RankDefOptions::for_problem(m, n)) else {
            notes.push(format!("#{i} error"));
            continue;
        };
        let first_row_exact = (0..m).all(|j| u.entry(0, j) == inst.row.entries()[j]);
        let related = matches!(compare_completions(&inst.secret_paraunitary, &u, 1e-6), Ok(Some(_)));
        let pass = report.deviation <= 1e-9
            && report.det_off_monomial <= 1e-9
            && report.degree == inst.row.order()
            && first_row_exact
            && related;
        if pass {
            ok += 1;
        } else {
            notes.push(format!("#{i} (m={m}, N={n})"));
        }
    }
    let extra = if notes.is_empty() { String::new() } else { format!("; failed {}", notes.join(", ")) };
    outcome(ok == total, format!("paraunitary completion: {ok}/{total} rows{extra}"))
}

fn criterion_6() -> Outcome {
    let row = LosslessRow::new(vec![LaurentPoly::from_real(0, &[0.5, 0.5]), LaurentPoly::from_real(0, &[0.5, -0.5])])
        .expect("valid row");
    let Ok((u, report)) = complete_to_paraunitary(&row, &RankDefOptions::for_problem(2, 1)) else {
        return outcome(false, "Haar fixture: completion failed".into());
    };
    let phi = u.entry(1, 0).coeff(0) * 2.0;
    let expected = [[0.5, -0.5], [0.5, 0.5]];
    let gap = expected
        .iter()
        .enumerate()
        .flat_map(|(j, e)| e.iter().enumerate().map(move |(p, &x)| (j, p, x)))
        .map(|(j, p, x)| (u.entry(1, j).coeff(p as i32) - phi * x).norm())
        .fold(0.0f64, f64::max);
    let second_row_len = (0..2).filter_map(|j| u.entry(1, j).hi()).max().unwrap_or(0);
    let pass = report.degree == 1 && (phi.norm() - 1.0).abs() <= 1e-10 && gap <= 1e-10 && second_row_len <= 1;
    outcome(pass, format!("Haar fixture: det degree {}, |phase| - 1 = {:.1e}, row gap {gap:.1e}", report.degree, phi.norm() - 1.0))
}

fn criterion_7() -> Outcome {
    let total = 50;
    let mut ok = 0;
    let mut strict = 0;
    for i in 0..total {
        let m = 2 + (i % 4) as usize;
        let n = 1 + ((i / 4) % 6) as usize;
        let inst = gen_lossless(m, n, 6000 + i);
        let u = &inst.secret_paraunitary;
        let Ok(report) = verify_paraunitary(u, 1e-9) else { continue };
        let Ok(degree) = paraunitary_degree(u, 1e-9) else { continue };
        let length = report.length;
        if length < n {
            strict += 1;
        }
        let equality_ok = length != n || degree == n;
        if report.det_off_monomial <= 1e-9 && degree >= length && equality_ok {
            ok += 1;
        }
    }
    outcome(
        ok == total,
        format!("monomial determinant and degree >= length: {ok}/{total} ({strict} with length below degree)"),
    )
}

fn criterion_8() -> Outcome {
    let total = 50;
    let mut ok = 0;
    let mut largest = 0.0f64;
    for i in 0..total {
        let m = 2 + (i % 4) as usize;
        let inst = gen_lossless(m, (i % 7) as usize, 8000 + i);
        let Ok(s) = deficiency_matrix(&inst.row, 1e-9) else { continue };
        let mut good = true;
        for x in s.eval_unit_grid(128) {
            let ev = x.symmetric_eigenvalues();
            let small = ev.iter().filter(|&&e| e <= 1e-9).count();
            largest = largest.max(ev.iter().cloned().fold(f64::MIN, f64::max));
            if small != 1 || ev.iter().any(|&e| e > 1.0 + 1e-9) {
                good = false;
            }
        }
        if good {
            ok += 1;
        }
    }
    outcome(ok == total, format!("deficiency matrix spectrum: {ok}/{total} rows (largest eigenvalue {largest:.12})"))
}

fn criterion_9(runs: &[Factored]) -> Outcome {
    let mut total = 0;
    let mut ok = 0;
    for r in runs.iter().filter(|r| r.instance.k < r.instance.m) {
        total += 1;
        let s = &r.instance.spectrum;
        let opts = opts_for(s);
        let passed = select_pivot(s, r.instance.k, &opts)
            .and_then(|p| check_rank_identity(s, &p, r.instance.k, &opts))
            .unwrap_or(false);
        if passed {
            ok += 1;
        }
    }
    outcome(ok == total, format!("Schur-complement rank identity: {ok}/{total} rank-deficient instances"))
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_polyfact"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::TempDir::new().expect("temporary directory");
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (s, a, bad, f) = (p("s.json"), p("a.json"), p("bad.json"), p("f.json"));
    let haar = fixture("haar_row.json").to_string_lossy().into_owned();
    let non_ph = fixture("non_parahermitian.json").to_string_lossy().into_owned();

    let mut checks = Vec::new();
    let gen = ["random", "--m", "3", "--k", "2", "--order", "2", "--seed", "7", "--out", &s, "--factor-out", &a];
    checks.push(("random", cli(&gen), 0));
    checks.push(("factor", cli(&["factor", &s, "--out", &f]), 0));
    checks.push(("complete", cli(&["complete", &haar]), 0));
    checks.push(("verify oracle", cli(&["verify", "--factor", &s, &a]), 0));
    if let Ok(text) = std::fs::read_to_string(&a) {
        let mut file = polyfact_cli::format::MatrixFile::parse(&text).expect("written file parses");
        file.terms[0].matrix[0][0][0].0 += 1e-3;
        std::fs::write(&bad, file.to_json()).expect("write");
    }
    checks.push(("verify perturbed", cli(&["verify", "--factor", &s, &bad]), 1));
    checks.push(("non-para-Hermitian", cli(&["factor", &non_ph]), 2));
    checks.push(("k > m", cli(&["random", "--m", "2", "--k", "3", "--order", "1"]), 2));
    checks.push(("unattainable tol", cli(&["factor", &s, "--tol", "1e-300"]), 3));
    let failed: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(name, got, want)| format!("{name}: exit {got}, expected {want}"))
        .collect();

    let (r1, r2) = (p("r1.json"), p("r2.json"));
    cli(&["random", "--m", "2", "--k", "1", "--order", "1", "--seed", "7", "--out", &r1]);
    cli(&["random", "--m", "2", "--k", "1", "--order", "1", "--seed", "7", "--out", &r2]);
    let deterministic = matches!((std::fs::read(&r1), std::fs::read(&r2)), (Ok(x), Ok(y)) if x == y);

    let mut summary = format!("CLI contract: exit codes 0/1/2/3 {}, random byte-deterministic {}",
        if failed.is_empty() { "ok" } else { "wrong" },
        if deterministic { "yes" } else { "no" });
    if !failed.is_empty() {
        summary.push_str(&format!(" ({})", failed.join("; ")));
    }
    outcome(failed.is_empty() && deterministic, summary)
}

fn main() {
    let start = Instant::now();
    let runs: Vec<Factored> = (0..100)
        .map(|i| {
            let instance = sweep_instance(i);
            match spectral_factor(&instance.spectrum, &opts_for(&instance.spectrum)) {
                Ok((f, report)) => Factored {
                    instance,
                    factor: Some(f),
                    residual: report.residual,
                },
                Err(_) => Factored {
                    instance,
                    factor: None,
                    residual: f64::INFINITY,
                },
            }
        })
        .collect();
    let elapsed = start.elapsed();

    let results = [
        criterion_1(&runs, elapsed),
        criterion_2(&runs),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(&runs),
        criterion_10(),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        println!("criterion {:>2} [{}] {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.summary);
        if !r.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
