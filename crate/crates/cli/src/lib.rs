//! Config-driven runner for the verification experiments of
//! `mkvlevy-core`.
//!
//! A run reads one JSON config, executes the experiment it names and
//! writes `results.json` plus CSV artifacts to an output directory.

pub mod config;
pub mod experiments;
pub mod params;
pub mod report;

use std::path::Path;

use mkvlevy_core::{Error, Streams};

use config::{ConfigError, ExperimentConfig, Parameters};
use experiments::Outcome;
use report::{Artifact, Results, Verdict};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn dispatch(cfg: &ExperimentConfig, streams: &Streams) -> mkvlevy_core::Result<Outcome> {
    match (&cfg.parameters, cfg.kind) {
        (Parameters::Subcheck(p), _) => experiments::subcheck(p, streams),
        (Parameters::Moments(p), _) => experiments::moments(p, streams),
        (Parameters::Picard(p), _) => experiments::picard(p, streams),
        (Parameters::Contraction(p), _) => experiments::contraction(p, streams),
        (Parameters::Invariant(p), _) => experiments::invariant(p, streams),
        (Parameters::Harnack(p), kind) => experiments::harnack(kind, p, streams),
        (Parameters::FpkeCorrespond(p), _) => experiments::fpke_correspond(p, streams),
        (Parameters::FpkeStability(p), _) => experiments::fpke_stability(p),
    }
}

/// Run a parsed config. Assumption failures detected during the run are
/// reported like config errors; other runtime errors give a failed result.
pub fn execute(cfg: &ExperimentConfig) -> Result<(Results, Vec<Artifact>), ConfigError> {
    let streams = Streams::new(cfg.seed);
    let base = |verdict: Verdict| Results {
        kind: cfg.kind.name().to_string(),
        seed: cfg.seed,
        config_digest: cfg.digest.clone(),
        version: VERSION.to_string(),
        verdict,
        pass: verdict == Verdict::Pass,
        summary: serde_json::Value::Null,
        checks: vec![],
        error: None,
    };
    match dispatch(cfg, &streams) {
        Ok(out) => {
            let verdict = experiments::overall(&out.checks);
            let results = Results {
                summary: out.summary,
                checks: out.checks,
                ..base(verdict)
            };
            Ok((results, out.artifacts))
        }
        Err(Error::Assumption { assumption, detail }) => {
            let (l, c) = config::locate_key(&cfg.source, "parameters");
            Err(ConfigError::at(l, c, format!("assumption ({assumption}) fails: {detail}")))
        }
        Err(e) => Ok((
            Results {
                error: Some(e.to_string()),
                ..base(Verdict::Fail)
            },
            vec![],
        )),
    }
}

/// Parse, run and write outputs.
pub fn run_file(text: &str, seed: Option<u64>, out: &Path) -> Result<Results, ConfigError> {
    let mut cfg = config::parse_config(text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (results, artifacts) = execute(&cfg)?;
    report::write_outputs(out, &results, &artifacts).map_err(|e| ConfigError::at(1, 1, format!("writing {}: {e}", out.display())))?;
    Ok(results)
}
