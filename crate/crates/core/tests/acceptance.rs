//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use quasimode_lab::exponents::{breakpoints, delta, sigma};
use quasimode_lab::flat_quasimode::{
    defect_bound, verify_tube_bound, FourierMultiplier, SpectralCap,
};
use quasimode_lab::geometry::RigidMotion;
use quasimode_lab::index::{Exact, LebesgueIndex};
use quasimode_lab::region_norms::{
    dyadic_h_list, fit_exponent, sweep, AlphaChoice, BoxRegion, FieldSource, GridSpec, SweepConfig,
};
use quasimode_lab::scale_predictor::{predict_alpha, ScaleQuery};
use quasimode_lab::sphere_harmonics::{
    build_u1, build_un, concentration_check, l2_norm, pair_correlation, u1_norm_squared_exact,
    SphereGrid,
};
use quasimode_lab::{LabError, Result};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, &'static str, Duration, fn() -> Check);

fn p(x: i64) -> LebesgueIndex {
    LebesgueIndex::integer(x)
}

fn betas() -> Vec<f64> {
    (0..=10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

fn ratio_spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn lab(e: LabError) -> String {
    e.to_string()
}

/// `p · (1 ± 10⁻¹³)` as an exact index.
fn nudge(bp: LebesgueIndex, up: bool) -> LebesgueIndex {
    let LebesgueIndex::Finite(r) = bp else {
        panic!("finite breakpoint expected")
    };
    let scale = 10_000_000_000_000i64;
    let sign = if up { 1 } else { -1 };
    LebesgueIndex::ratio(r.numer() * (scale + sign), r.denom() * scale)
}

fn a1() -> Check {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 2..=8u32 {
        let bp = breakpoints(n).map_err(lab)?;
        for point in [bp.p_hyp, bp.p_stz] {
            let (lo, hi) = (nudge(point, false), nudge(point, true));
            for k in 1..=n {
                let at = delta(n, k, point).map_err(lab)?.exponent;
                for q in [lo, hi] {
                    worst = worst.max((delta(n, k, q).map_err(lab)?.exponent - at).abs());
                    cases += 1;
                }
                if k == n {
                    continue;
                }
                for beta in betas() {
                    let at = sigma(n, k, point, beta).map_err(lab)?.exponent;
                    for q in [lo, hi] {
                        worst = worst.max((sigma(n, k, q, beta).map_err(lab)?.exponent - at).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    let detail = format!("{cases} one-sided limits, max jump {worst:.3e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn a2() -> Check {
    let half = |x: i128, d: i128| Exact::new(x, d);
    let exact =
        |r: Result<quasimode_lab::exponents::ExponentResult>| r.map(|e| e.exact).map_err(lab);
    let mut checked = 0;
    for n in 2..=8u32 {
        let ni = n as i128;
        let want = [
            (
                exact(delta(n, n, LebesgueIndex::Infinite))?,
                half(ni - 1, 2),
                "delta(n,n,inf)",
            ),
            (exact(delta(n, n, p(2)))?, half(0, 1), "delta(n,n,2)"),
            (exact(delta(n, n - 1, p(2)))?, half(1, 4), "delta(n,n-1,2)"),
        ];
        for (got, w, what) in want {
            if got != w {
                return Err(format!("{what} for n={n}: got {got}, want {w}"));
            }
            checked += 1;
        }
        for beta in betas() {
            let b = quasimode_lab::index::exact_from_f64(beta).map_err(lab)?;
            for k in 1..n.saturating_sub(1) {
                let got = exact(sigma(n, k, p(2), beta))?;
                if got != half(1, 2) - b {
                    return Err(format!("sigma({n},{k},2,{beta}) = {got}"));
                }
                checked += 1;
            }
        }
        for q in [
            p(2),
            LebesgueIndex::ratio(5, 2),
            p(3),
            p(4),
            p(6),
            p(10),
            LebesgueIndex::Infinite,
        ] {
            for k in 1..n {
                let got = exact(sigma(n, k, q, 0.5))?;
                let want = exact(delta(n, n, q))?;
                if got != want {
                    return Err(format!(
                        "sigma({n},{k},{q},1/2) = {got}, delta({n},{n},{q}) = {want}"
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} exact identities"))
}

fn a3() -> Check {
    let ps = [
        p(2),
        LebesgueIndex::ratio(5, 2),
        p(3),
        p(4),
        p(6),
        p(10),
        LebesgueIndex::Infinite,
    ];
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 2..=4u32 {
        for k in 1..n {
            for &q in &ps {
                for beta in betas() {
                    // predict_alpha itself rejects argmax sets that miss the
                    // table scale or are non-unique away from breakpoints
                    let pr = predict_alpha(&ScaleQuery::new(n, k, q, beta))
                        .map_err(|e| format!("n={n} k={k} p={q} beta={beta}: {e}"))?;
                    let s = sigma(n, k, q, beta).map_err(lab)?.exponent;
                    worst = worst.max((pr.exponent_at_max - s).abs());
                    cases += 1;
                }
            }
        }
    }
    let detail = format!("{cases} queries, max |max E - sigma| {worst:.3e}");
    if worst <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn a4() -> Check {
    let mut ratios = Vec::new();
    for e in 4..=6 {
        let h = 2f64.powi(-e);
        let cap = SpectralCap::new(2, h, 0.25).map_err(lab)?;
        let d = defect_bound(&cap);
        if d != 2.0 * h + h * h {
            return Err(format!("defect bound {d} != 2h + h^2 at h = 2^-{e}"));
        }
        let region = BoxRegion::unit(RigidMotion::identity(2));
        let source = FieldSource::new(cap);
        let base = source.sample(&region, &GridSpec::default()).map_err(lab)?;
        let applied = source
            .with_multiplier(FourierMultiplier::Defect)
            .sample(&region, &GridSpec::default())
            .map_err(lab)?;
        let r = applied.sampled_l2() / base.sampled_l2() / h;
        ratios.push(r);
        if r > 3.0 {
            return Err(format!(
                "||(|xi|^2 - 1) T|| / ||T|| = {r:.3} h at h = 2^-{e}"
            ));
        }
    }
    Ok(format!(
        "defect = 2h + h^2 exactly; physical ratio / h = {ratios:.3?}"
    ))
}

fn a5() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for alpha in [0.0, 0.25, 0.5] {
        let mut constants = Vec::new();
        for e in 4..=8 {
            let h = 2f64.powi(-e);
            let cap = SpectralCap::new(2, h, alpha).map_err(lab)?;
            let got = quasimode_lab::flat_quasimode::evaluate(&cap, &[vec![0.0, 0.0]], None)
                .map_err(lab)?[0]
                .re;
            let want = 2.0 / std::f64::consts::PI * h.powf((alpha - 1.0) / 2.0);
            if (got / want - 1.0).abs() > 1e-6 {
                return Err(format!(
                    "T(0) = {got} vs {want} at alpha = {alpha}, h = 2^-{e}"
                ));
            }
            constants.push(verify_tube_bound(&cap, 0.1, 5).map_err(lab)?.constant);
        }
        let spread = ratio_spread(&constants);
        ok &= spread <= 2.0 && constants.iter().all(|&c| c > 0.0);
        lines.push(format!("alpha={alpha}: spread {spread:.3}"));
    }
    let detail = lines.join(", ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn a6() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for beta in [0.5, 0.75, 1.0] {
        let ps = vec![p(2), p(4), p(8), LebesgueIndex::Infinite];
        let cfg = SweepConfig {
            n: 2,
            k: 1,
            p: ps.clone(),
            beta,
            alpha: AlphaChoice::Auto,
            h_list: dyadic_h_list(4, 6),
            grid: GridSpec::default(),
            record_timing: false,
        };
        let records = sweep(&cfg).map_err(lab)?;
        for q in ps {
            let group: Vec<_> = records.iter().filter(|r| r.p == q).cloned().collect();
            let fit = fit_exponent(&group).map_err(lab)?;
            let s = sigma(2, 1, q, beta).map_err(lab)?.exponent;
            let dev = fit.exponent - s;
            ok &= dev.abs() <= 0.15;
            lines.push(format!("b={beta} p={q}: {:.4} vs {s:.4}", fit.exponent));
        }
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn a7() -> Check {
    let grid = SphereGrid { nodes_per_h: 4.0 };
    let js = [100u32, 200, 400];
    let mut ok = true;
    let mut notes = Vec::new();
    let mut worst_residual = 0.0f64;
    let mut worst_wallis = 0.0f64;
    let mut slopes = Vec::new();
    for &j in &js {
        let u1 = build_u1(2, j).map_err(lab)?;
        let exact = u1_norm_squared_exact(2, j).map_err(lab)?.sqrt();
        worst_wallis = worst_wallis.max((l2_norm(&u1, &grid).map_err(lab)? / exact - 1.0).abs());
        let pts: Vec<(f64, f64)> = (1..=10u32)
            .map(|d| Ok((d as f64, pair_correlation(&u1, 0, d, 2, &grid)?)))
            .collect::<Result<_>>()
            .map_err(lab)?;
        let slope = quasimode_lab::region_norms::fit_power_law(&pts)
            .map_err(lab)?
            .slope;
        ok &= slope <= -1.5;
        slopes.push(slope);
    }
    // ε = 1 gives several rotated terms per stage at these degrees
    for (alpha, epsilon) in [(0.3, 0.1), (0.5, 0.1), (0.3, 1.0)] {
        let mut norms = Vec::new();
        let mut constants = Vec::new();
        for &j in &js {
            let un = build_un(2, j, alpha, epsilon).map_err(lab)?;
            worst_residual = worst_residual.max(un.max_harmonicity_residual());
            norms.push(l2_norm(&un, &grid).map_err(lab)?);
            constants.push(concentration_check(&un, 0.1, 5).map_err(lab)?.constant);
        }
        let (ns, cs) = (ratio_spread(&norms), ratio_spread(&constants));
        ok &= ns <= 2.0 && cs <= 2.0;
        notes.push(format!(
            "alpha={alpha} eps={epsilon}: norm spread {ns:.3}, concentration spread {cs:.3}"
        ));
    }
    ok &= worst_residual < 1e-12 && worst_wallis <= 1e-4;
    let detail = format!(
        "residual {worst_residual:.1e}, Wallis error {worst_wallis:.1e}, {}, decay slopes {slopes:.2?}",
        notes.join(", ")
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(args: &[&str], out: &Path, threads: usize) -> std::result::Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_quasimode-lab"))
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} exited with {status}"))
    }
}

fn read_dir_sorted(dir: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            let bytes = fs::read(e.path()).map_err(|e| e.to_string())?;
            Ok((e.file_name().to_string_lossy().into_owned(), bytes))
        })
        .collect::<std::result::Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn a8() -> Check {
    let runs: [&[&str]; 5] = [
        &["exponents", "--n", "4", "--k", "2", "--beta", "0.7"],
        &["predict", "--n", "3", "--k", "1", "--p", "2,4,inf"],
        &["quasimode", "--h-start", "5"],
        &["scaling", "--h-start", "4", "--h-count", "3"],
        &["sphere", "--j", "20"],
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (rep, threads) in [1usize, 8, 1].into_iter().enumerate() {
            let dir = tmp.path().join(format!("{i}-{rep}"));
            run_cli(args, &dir, threads)?;
            outputs.push(read_dir_sorted(&dir)?);
        }
        if outputs[0].is_empty() {
            return Err(format!("{args:?} wrote nothing"));
        }
        for o in &outputs[1..] {
            if *o != outputs[0] {
                return Err(format!("{args:?} outputs differ between runs"));
            }
        }
        files += outputs[0].len();
    }
    Ok(format!(
        "{files} files byte-identical across --threads 1/8/1"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("A1", "exponent continuity", Duration::from_secs(1), a1),
        ("A2", "anchors", Duration::from_secs(1), a2),
        (
            "A3",
            "optimizer matches closed form",
            Duration::from_secs(10),
            a3,
        ),
        ("A4", "quasimode defect", Duration::from_secs(60), a4),
        ("A5", "tube lower bound", Duration::from_secs(300), a5),
        ("A6", "scaling saturation", Duration::from_secs(1800), a6),
        ("A7", "sphere construction", Duration::from_secs(600), a7),
        ("A8", "determinism", Duration::from_secs(60), a8),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(d) => (false, d),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{id} {} {name} ({:.2}s): {detail}",
            if passed { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
