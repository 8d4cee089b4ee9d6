//! `results.json` and CSV artifacts.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// Fail dominates, then inconclusive.
    pub fn combine(items: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in items {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }
}

impl From<mkvlevy_core::harnack::Verdict> for Verdict {
    fn from(v: mkvlevy_core::harnack::Verdict) -> Self {
        match v {
            mkvlevy_core::harnack::Verdict::Pass => Verdict::Pass,
            mkvlevy_core::harnack::Verdict::Fail => Verdict::Fail,
            mkvlevy_core::harnack::Verdict::Inconclusive => Verdict::Inconclusive,
        }
    }
}

/// One named comparison `value` against `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn with_verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Results {
    pub kind: String,
    pub seed: u64,
    pub config_digest: String,
    pub version: String,
    pub verdict: Verdict,
    pub pass: bool,
    pub summary: Value,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Results {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialise");
        s.push('\n');
        s
    }
}

/// A CSV file produced by an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    /// Build a CSV from a header and rows of numbers.
    pub fn table(name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Self {
        let mut contents = header.join(",");
        contents.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(contents, "{}", cells.join(","));
        }
        Self {
            name: name.to_string(),
            contents,
        }
    }

    pub fn from_writer(name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Self {
        let mut buf = Vec::new();
        f(&mut buf).expect("writing to memory");
        Self {
            name: name.to_string(),
            contents: String::from_utf8(buf).expect("CSV is UTF-8"),
        }
    }
}

pub fn write_outputs(out: &Path, results: &Results, artifacts: &[Artifact]) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("results.json"), results.to_json())?;
    for a in artifacts {
        std::fs::write(out.join(&a.name), &a.contents)?;
    }
    Ok(())
}
