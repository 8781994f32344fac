use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::ProtocolConfig;
use super::indices::{sc, ssi, verdict, Thresholds, Verdict};
use super::protocols::{prepare, run_member};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub index: usize,
    pub ok: bool,
    pub error: Option<String>,
    /// Per-level commutation gaps of this member.
    pub gaps: Vec<f64>,
    pub diagnostics: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub protocol: String,
    pub config_hash: String,
    pub seed: u64,
    pub ensemble_size: usize,
    pub survivors: usize,
    pub levels: usize,
    pub policies: Vec<String>,
    pub recodings: Vec<String>,
    pub thresholds: Thresholds,
    /// `ssi[n-1]` compares stages `n` and `n+1`.
    pub ssi: Vec<f64>,
    /// `sc[n-1]` is the gap at stage `n`.
    pub sc: Vec<f64>,
    pub ssi_verdict: Verdict,
    pub sc_verdict: Verdict,
    pub verdict: Verdict,
    pub members: Vec<MemberRecord>,
}

/// Decaying only if both indices decay; plateau if either plateaus.
pub fn combine(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (Verdict::Decaying, Verdict::Decaying) => Verdict::Decaying,
        (Verdict::Plateau, _) | (_, Verdict::Plateau) => Verdict::Plateau,
        _ => Verdict::Inconclusive,
    }
}

/// Runs every member, then reduces to indices and verdicts. Members failing
/// with anything but an invalid-argument error are dropped and disclosed;
/// the run fails when survivors fall below `ceil(quorum * ensemble_size)`.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let fam = cfg.family()?;
    let setup = prepare(cfg, &fam)?;
    let runs: Vec<Result<_>> = (0..cfg.ensemble_size).into_par_iter().map(|m| run_member(cfg, &fam, &setup, m)).collect();
    let mut outputs = Vec::new();
    let mut gaps = Vec::new();
    let mut members = Vec::new();
    for (index, r) in runs.into_iter().enumerate() {
        match r {
            Ok(run) => {
                members.push(MemberRecord { index, ok: true, error: None, gaps: run.gaps.clone(), diagnostics: run.extra });
                outputs.push(Some(run.outputs));
                gaps.push(Some(run.gaps));
            }
            Err(e @ Error::InvalidArgument(_)) => return Err(e),
            Err(e) => {
                members.push(MemberRecord { index, ok: false, error: Some(e.to_string()), gaps: vec![], diagnostics: Value::Null });
                outputs.push(None);
                gaps.push(None);
            }
        }
    }
    let survivors = members.iter().filter(|m| m.ok).count();
    let need = (cfg.quorum * cfg.ensemble_size as f64).ceil() as usize;
    if survivors < need.max(1) {
        return Err(Error::Quorum { survivors, total: cfg.ensemble_size, quorum: need.max(1) });
    }
    let ssi = ssi(&outputs)?;
    let sc = sc(&gaps)?;
    let ssi_verdict = verdict(&ssi, &cfg.thresholds)?;
    let sc_verdict = verdict(&sc, &cfg.thresholds)?;
    Ok(StabilityReport {
        protocol: cfg.protocol.name().to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        ensemble_size: cfg.ensemble_size,
        survivors,
        levels: cfg.levels,
        policies: cfg.policies.iter().map(|p| p.id.clone()).collect(),
        recodings: cfg.recodings.clone(),
        thresholds: cfg.thresholds,
        ssi,
        sc,
        ssi_verdict,
        sc_verdict,
        verdict: combine(ssi_verdict, sc_verdict),
        members,
    })
}

impl StabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// `report.json`, `ssi.csv`, `sc.csv` and `metadata.json` (the only file with a timestamp).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        for (name, xs) in [("ssi.csv", &self.ssi), ("sc.csv", &self.sc)] {
            let mut w = csv::Writer::from_path(dir.join(name)).map_err(|e| Error::Format(e.to_string()))?;
            w.write_record(["level", "value"]).map_err(|e| Error::Format(e.to_string()))?;
            for (n, x) in xs.iter().enumerate() {
                w.write_record([(n + 1).to_string(), format!("{x:e}")]).map_err(|e| Error::Format(e.to_string()))?;
            }
            w.flush()?;
        }
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = json!({
            "generated_unix": secs,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config_hash,
        });
        std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta).unwrap())?;
        Ok(())
    }
}
