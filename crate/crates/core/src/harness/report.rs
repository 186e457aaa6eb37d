use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AttackSpec, ExperimentConfig};
use super::stats::Stat;
use crate::attacks::AttackOutcome;
use crate::error::{Error, Result};

/// What happened to one test node in one cell for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VictimRecord {
    pub cell: usize,
    pub seed: u64,
    pub victim: usize,
    pub label: Option<usize>,
    /// False when the victim had no valid attacker (or target) and kept its
    /// clean prediction.
    pub attacked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub pred_before: usize,
    pub pred_after: usize,
    pub success: bool,
    pub budget_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<AttackOutcome>,
}

impl VictimRecord {
    pub fn correct(&self) -> bool {
        self.label == Some(self.pred_after)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub name: String,
    pub attack: AttackSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
    pub accuracy: Stat,
    /// Fraction of counted victims whose attack reached its goal.
    pub success_rate: Stat,
    /// Per seed: victims attacked, and victims left unattacked.
    pub attacked: Vec<usize>,
    pub unattacked: Vec<usize>,
    /// When set, unattacked victims are left out of both rates.
    pub excludes_unattacked: bool,
    pub budget_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub config: ExperimentConfig,
    pub clean_accuracy: Stat,
    pub cells: Vec<CellReport>,
    /// Per-victim JSONL log, relative to the report file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_log: Option<String>,
    pub notes: Vec<String>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    /// Canonical JSON with the wall time zeroed, for reproducibility checks.
    pub fn canonical_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.wall_time_secs = 0.0;
        Ok(serde_json::to_string_pretty(&r)?)
    }

    /// One CSV row per cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "cell,name,attack,attacker,num_attackers,eps0,eps_inf,distance,accuracy_mean,accuracy_std,success_mean,success_std,budget_violations\n",
        );
        for (i, c) in self.cells.iter().enumerate() {
            let a = &c.attack;
            let kind = serde_json::to_value(a.kind).ok();
            let who = serde_json::to_value(a.attacker).ok();
            let text = |v: Option<serde_json::Value>| {
                v.and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
            };
            s.push_str(&format!(
                "{i},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.name,
                text(kind),
                text(who),
                a.num_attackers,
                a.budget.eps0,
                a.budget.eps_inf.map(|e| e.to_string()).unwrap_or_default(),
                c.distance.map(|d| d.to_string()).unwrap_or_default(),
                c.accuracy.mean,
                c.accuracy.std,
                c.success_rate.mean,
                c.success_rate.std,
                c.budget_violations,
            ));
        }
        s
    }

    /// Writes `<out>` (JSON), `<out>.csv`-style sibling and the per-victim
    /// log next to it, and records the log's file name in the report.
    pub fn write(&mut self, out: &Path, records: &[VictimRecord]) -> Result<()> {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let stem = out
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Config(format!("bad output path {}", out.display())))?;
        let log_name = format!("{stem}.victims.jsonl");
        write_victim_log(&out.with_file_name(&log_name), records)?;
        self.outcome_log = Some(log_name);
        fs::write(out, serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(out.with_extension("csv"), self.to_csv())?;
        Ok(())
    }
}

pub fn write_victim_log(path: &Path, records: &[VictimRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_victim_log(path: &Path) -> Result<Vec<VictimRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Recomputes every cell's per-seed accuracy and success rate from the
/// victim log and compares them with the report. Returns the mismatches.
pub fn replay_check(report: &ExperimentReport, records: &[VictimRecord]) -> Vec<String> {
    let mut bad = Vec::new();
    for (ci, cell) in report.cells.iter().enumerate() {
        for (si, &seed) in report.config.seeds.iter().enumerate() {
            let rows: Vec<&VictimRecord> = records
                .iter()
                .filter(|r| r.cell == ci && r.seed == seed)
                .filter(|r| r.attacked || !cell.excludes_unattacked)
                .collect();
            let (acc, succ) = if rows.is_empty() {
                (0.0, 0.0)
            } else {
                let n = rows.len() as f64;
                (
                    rows.iter().filter(|r| r.correct()).count() as f64 / n,
                    rows.iter().filter(|r| r.success).count() as f64 / n,
                )
            };
            if cell.accuracy.per_seed.get(si) != Some(&acc) {
                bad.push(format!("cell {ci} seed {seed}: accuracy {acc} in log"));
            }
            if cell.success_rate.per_seed.get(si) != Some(&succ) {
                bad.push(format!("cell {ci} seed {seed}: success rate {succ} in log"));
            }
        }
    }
    bad
}
