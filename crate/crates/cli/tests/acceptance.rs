//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mkvlevy::config::parse_config;
use mkvlevy::execute;
use mkvlevy::report::{Artifact, Results};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> String {
    std::fs::read_to_string(configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run_in(threads: usize, text: &str) -> Result<(Results, Vec<Artifact>), String> {
    let cfg = parse_config(text).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| execute(&cfg)).map_err(|e| e.to_string())
}

struct Suite {
    outcomes: Vec<(String, bool, String)>,
    /// every config that ran, for the determinism criterion
    ran: Vec<(String, String, Results, Vec<Artifact>)>,
}

fn failing(r: &Results) -> String {
    let bad: Vec<String> = r
        .checks
        .iter()
        .filter(|c| c.verdict != mkvlevy::report::Verdict::Pass)
        .map(|c| format!("{} {:?} value {} threshold {}", c.name, c.verdict, c.value, c.threshold))
        .collect();
    match &r.error {
        Some(e) => format!("error: {e}"),
        None => bad.join("; "),
    }
}

impl Suite {
    fn config(&mut self, label: &str, text: String) -> Option<Results> {
        match run_in(4, &text) {
            Ok((r, a)) => {
                self.ran.push((label.to_string(), text, r.clone(), a));
                Some(r)
            }
            Err(e) => {
                eprintln!("  {label}: {e}");
                None
            }
        }
    }

    /// All configs pass; detail lists the failures.
    fn criterion(&mut self, id: &str, title: &str, runs: Vec<(String, String)>, extra: impl Fn(&[Results]) -> Result<String, String>) {
        let start = Instant::now();
        let mut results = Vec::new();
        let mut problems = Vec::new();
        for (label, text) in runs {
            match self.config(&label, text) {
                Some(r) => {
                    if !r.pass {
                        problems.push(format!("{label}: {}", failing(&r)));
                    }
                    results.push(r);
                }
                None => problems.push(format!("{label}: did not run")),
            }
        }
        let detail = match extra(&results) {
            Ok(d) => d,
            Err(e) => {
                problems.push(e);
                String::new()
            }
        };
        let ok = problems.is_empty();
        let detail = if ok { detail } else { problems.join(" | ") };
        self.report(id, title, ok, format!("{detail} [{:.1}s]", start.elapsed().as_secs_f64()));
    }

    fn report(&mut self, id: &str, title: &str, ok: bool, detail: String) {
        println!("[{}] {id} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.outcomes.push((id.to_string(), ok, detail));
    }
}

fn files(names: &[&str]) -> Vec<(String, String)> {
    names.iter().map(|n| (n.to_string(), load(n))).collect()
}

fn num(v: &serde_json::Value, path: &[&str]) -> f64 {
    let mut v = v;
    for p in path {
        v = &v[*p];
    }
    v.as_f64().unwrap_or(f64::NAN)
}

const DRIFTS: [(&str, &str); 3] = [
    ("meanfield_ou", r#"{ "name": "meanfield_ou", "beta": 1.0, "gamma": 0.5 }"#),
    ("ou", r#"{ "name": "ou", "beta": 1.0 }"#),
    (
        "sine_meanfield",
        r#"{ "name": "sine_meanfield", "beta": 1.0, "a": 0.5, "gamma": 0.5 }"#,
    ),
];
const SUBORDINATORS: [(&str, &str); 2] = [
    ("stable", r#"{ "kind": "stable", "alpha": 0.75 }"#),
    ("relativistic", r#"{ "kind": "relativistic_stable", "alpha": 0.75, "m": 1.0 }"#),
];
const PAIRS: [(&str, &str, &str); 2] = [
    (
        "points",
        r#"{ "type": "point_mass", "x": [0.0] }"#,
        r#"{ "type": "point_mass", "x": [1.0] }"#,
    ),
    (
        "gaussians",
        r#"{ "type": "gaussian", "mean": [0.0], "std": 0.5 }"#,
        r#"{ "type": "gaussian", "mean": [1.0], "std": 0.5 }"#,
    ),
];

fn harnack_grid() -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut seed = 700;
    for (dn, drift) in DRIFTS {
        for (sn, sub) in SUBORDINATORS {
            for (pn, mu0, nu0) in PAIRS {
                for variant in ["printed", "derived"] {
                    for (kind, extra) in [
                        ("harnack_log", String::new()),
                        ("harnack_power", r#", "p": 2.0, "f": { "name": "gauss" }"#.to_string()),
                        ("entropy", String::new()),
                    ] {
                        seed += 1;
                        let text = format!(
                            r#"{{
  "kind": "{kind}",
  "seed": {seed},
  "parameters": {{
    "drift": {drift},
    "subordinator": {sub},
    "mu0": {mu0},
    "nu0": {nu0},
    "harnack": {{ "k_variant": "{variant}"{extra} }}
  }}
}}
"#
                        );
                        out.push((format!("{kind}/{dn}/{sn}/{pn}/{variant}"), text));
                    }
                }
            }
        }
    }
    out
}

fn determinism(suite: &mut Suite) {
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut checked = 0;
    for (label, text, r4, a4) in &suite.ran {
        match run_in(1, text) {
            Ok((r1, a1)) => {
                if r1.to_json() != r4.to_json() || a1 != *a4 {
                    problems.push(format!("{label}: 1 vs 4 threads differ"));
                }
                checked += 1;
            }
            Err(e) => problems.push(format!("{label}: {e}")),
        }
    }
    // two separate processes with different pools, compared file by file
    let dir = std::env::temp_dir().join(format!("mkvlevy-acceptance-{}", std::process::id()));
    let cfg = configs().join("fpke_stability.json");
    let outs = [dir.join("a"), dir.join("b")];
    for (out, threads) in outs.iter().zip(["1", "3"]) {
        let status = Command::new(env!("CARGO_BIN_EXE_mkvlevy"))
            .args(["run", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output();
        match status {
            Ok(o) if o.status.code() == Some(0) => {}
            other => problems.push(format!("binary run failed: {other:?}")),
        }
    }
    for name in ["results.json", "stability.csv"] {
        let a = std::fs::read(outs[0].join(name));
        let b = std::fs::read(outs[1].join(name));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => problems.push(format!("binary {name} differs between processes")),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let ok = problems.is_empty();
    let detail = if ok {
        format!(
            "{checked} configs identical with 1 and 4 threads; two processes byte-identical [{:.1}s]",
            start.elapsed().as_secs_f64()
        )
    } else {
        problems.join(" | ")
    };
    suite.report("C11", "determinism", ok, detail);
}

fn main() {
    let total = Instant::now();
    let mut s = Suite {
        outcomes: vec![],
        ran: vec![],
    };

    s.criterion(
        "C1",
        "subordinator Laplace transforms within 4 SE",
        files(&[
            "subcheck_stable.json",
            "subcheck_gamma.json",
            "subcheck_relativistic.json",
            "subcheck_pure_drift.json",
        ]),
        |rs| {
            let worst = rs
                .iter()
                .flat_map(|r| &r.checks)
                .map(|c| if c.threshold > 0.0 { c.value / c.threshold } else { 0.0 })
                .fold(0.0, f64::max);
            Ok(format!("{} families, worst |error| / 4SE = {worst:.2}", rs.len()))
        },
    );

    s.criterion(
        "C2",
        "mean-field OU contraction at rate 0.5",
        files(&["contraction_stable.json", "contraction_brownian.json"]),
        |rs| {
            let rates: Vec<String> = rs.iter().map(|r| format!("{:.3}", num(&r.summary, &["fitted_rate"]))).collect();
            Ok(format!("fitted rates {} against 0.5", rates.join(", ")))
        },
    );

    s.criterion("C3", "OU invariant measure", files(&["invariant_ou.json"]), |rs| {
        let r = &rs[0];
        Ok(format!(
            "variance {:.4} in [0.45, 0.55], fixed-point Ŵ {:.4} (SE {:.4})",
            num(&r.summary, &["variance"]),
            num(&r.summary, &["fixed_point", "distance"]),
            num(&r.summary, &["fixed_point", "se"])
        ))
    });

    s.criterion("C4", "Picard decay", files(&["picard.json"]), |rs| {
        let r = &rs[0];
        Ok(format!(
            "{} iterations, slope {:.3}, R² {:.3}",
            r.summary["iterations"],
            num(&r.summary, &["slope"]),
            num(&r.summary, &["r2"])
        ))
    });

    s.criterion(
        "C5",
        "Girsanov normalisation, bracket bound, negative control",
        files(&["girsanov.json"]),
        |rs| {
            let e = &rs[0].summary["extra"];
            Ok(format!(
                "mean R {:.4} ± {:.4}; control mean {:.4} rejected",
                num(e, &["girsanov", "mean"]),
                num(e, &["girsanov", "se"]),
                num(e, &["negative_control", "mean"])
            ))
        },
    );

    s.criterion(
        "C6",
        "coupling success and Δt refinement",
        files(&["coupling_success.json"]),
        |rs| {
            let r = &rs[0];
            Ok(format!(
                "coupled fraction {:.4}, {:.4} at half Δt",
                num(&r.summary, &["coupling", "coupled_fraction"]),
                num(&r.summary, &["extra", "coupled_fraction_refined"])
            ))
        },
    );

    s.criterion(
        "C7",
        "log/power Harnack and entropy cost over the configuration grid",
        harnack_grid(),
        |rs| {
            let inconclusive = rs.iter().filter(|r| r.verdict == mkvlevy::report::Verdict::Inconclusive).count();
            Ok(format!(
                "{} runs (3 drifts x 2 subordinators x 2 pairs x 2 K variants x 3 checks), {inconclusive} inconclusive",
                rs.len()
            ))
        },
    );

    s.criterion(
        "C8",
        "FPKE against Fourier oracle and particles",
        files(&["fpke_correspond.json"]),
        |rs| {
            let r = &rs[0];
            let by: Vec<String> = r.summary["report"]["by_size"]
                .as_array()
                .map(|a| a.iter().map(|e| format!("{}:{:.4}", e["n"], num(e, &["distance"]))).collect())
                .unwrap_or_default();
            Ok(format!(
                "oracle L¹ {:.4}; Ŵ₁ by N {}",
                num(&r.summary, &["stable_oracle", "l1"]),
                by.join(" ")
            ))
        },
    );

    s.criterion("C9", "FPKE Wasserstein stability", files(&["fpke_stability.json"]), |rs| {
        Ok(format!("{} pairs, 0 checkpoint violations", rs[0].checks.len()))
    });

    s.criterion("C10", "sup-moment finite and refinement-stable", files(&["moments.json"]), |rs| {
        let r = &rs[0];
        Ok(format!(
            "E sup|X| = {:.4}, change {:.4} when paths double",
            num(&r.summary, &["sup_moment"]),
            num(&r.summary, &["relative_change"])
        ))
    });

    determinism(&mut s);

    let failed: Vec<&str> = s.outcomes.iter().filter(|o| !o.1).map(|o| o.0.as_str()).collect();
    println!(
        "acceptance: {}/{} criteria pass in {:.1}s",
        s.outcomes.len() - failed.len(),
        s.outcomes.len(),
        total.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
