use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{checkpoint, Mlp};
use crate::oracle::{Budget, QueryFamily, VerdictKind};
use crate::trainer::VerdictTag;

/// Weight files under `<root>/<run_id>/ep<N>.mlp`.
pub struct CheckpointStore {
    root: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CheckpointRef {
    pub run_id: String,
    pub episode: u64,
    pub path: PathBuf,
}

impl CheckpointStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, run_id: &str, episode: u64) -> PathBuf {
        self.root.join(run_id).join(format!("ep{episode}.mlp"))
    }

    pub fn save(&self, run_id: &str, episode: u64, net: &Mlp) -> Result<()> {
        checkpoint::save(net, &self.path(run_id, episode))
    }

    /// All checkpoints sorted by run id, then episode.
    pub fn list(&self) -> Result<Vec<CheckpointRef>> {
        let mut out = Vec::new();
        for run in std::fs::read_dir(&self.root)? {
            let run = run?;
            if !run.file_type()?.is_dir() {
                continue;
            }
            let run_id = run.file_name().to_string_lossy().into_owned();
            for file in std::fs::read_dir(run.path())? {
                let path = file?.path();
                let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                    continue;
                };
                let episode = name
                    .strip_prefix("ep")
                    .and_then(|r| r.strip_suffix(".mlp"))
                    .and_then(|n| n.parse().ok());
                if let Some(episode) = episode {
                    out.push(CheckpointRef {
                        run_id: run_id.clone(),
                        episode,
                        path,
                    });
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn load_all(&self) -> Result<Vec<(String, u64, Result<Mlp>)>> {
        Ok(self
            .list()?
            .into_iter()
            .map(|c| {
                let net = checkpoint::load(&c.path);
                (c.run_id, c.episode, net)
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub run_id: String,
    pub episode: u64,
    pub label: String,
    pub verdict: VerdictTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentages {
    pub sat: f64,
    pub unsat: f64,
    pub timeout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    pub instances: usize,
    #[serde(flatten)]
    pub percent: Percentages,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub cells: Vec<ReportCell>,
    /// Checkpoints that could not be evaluated.
    pub errors: Vec<String>,
}

fn percentages<'a>(cells: impl Iterator<Item = &'a ReportCell>) -> (usize, Percentages) {
    let (mut n, mut sat, mut unsat, mut timeout) = (0usize, 0usize, 0usize, 0usize);
    for c in cells {
        n += 1;
        match c.verdict {
            VerdictTag::Sat => sat += 1,
            VerdictTag::Unsat => unsat += 1,
            VerdictTag::Timeout => timeout += 1,
        }
    }
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    (
        n,
        Percentages {
            sat: pct(sat),
            unsat: pct(unsat),
            timeout: pct(timeout),
        },
    )
}

impl RobustnessReport {
    pub fn run_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.cells.iter().map(|c| c.run_id.clone()).collect();
        ids.dedup();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn per_run(&self) -> Vec<RunRow> {
        self.run_ids()
            .into_iter()
            .map(|id| {
                let (instances, percent) = percentages(self.cells.iter().filter(|c| c.run_id == id));
                RunRow {
                    run_id: id,
                    instances,
                    percent,
                }
            })
            .collect()
    }

    /// Mean of the per-run percentages.
    pub fn overall(&self) -> Percentages {
        let rows = self.per_run();
        let n = rows.len().max(1) as f64;
        Percentages {
            sat: rows.iter().map(|r| r.percent.sat).sum::<f64>() / n,
            unsat: rows.iter().map(|r| r.percent.unsat).sum::<f64>() / n,
            timeout: rows.iter().map(|r| r.percent.timeout).sum::<f64>() / n,
        }
    }

    pub fn merge(mut self, other: RobustnessReport) -> Self {
        self.cells.extend(other.cells);
        self.errors.extend(other.errors);
        self
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| run | instances | Sat % | Unsat % | Timeout % |\n|---|---:|---:|---:|---:|\n");
        for r in self.per_run() {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3} | {:.3} | {:.3} |",
                r.run_id, r.instances, r.percent.sat, r.percent.unsat, r.percent.timeout
            );
        }
        let o = self.overall();
        let _ = writeln!(
            s,
            "| **average** | | {:.3} | {:.3} | {:.3} |",
            o.sat, o.unsat, o.timeout
        );
        for e in &self.errors {
            let _ = writeln!(s, "\nnote: {e}");
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(c)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs every family query on every checkpoint. Corrupt checkpoints are
/// reported in `errors` and skipped. Output order is fixed by the input.
pub fn evaluate_robustness(
    checkpoints: &[(String, u64, Result<Mlp>)],
    family: &QueryFamily,
    budget: Budget,
) -> RobustnessReport {
    let mut report = RobustnessReport::default();
    let mut jobs = Vec::new();
    for (run_id, episode, net) in checkpoints {
        match net {
            Ok(net) => {
                if let Err(e) = family.validate(net.input_dim(), net.output_dim()) {
                    report
                        .errors
                        .push(format!("{run_id} ep{episode}: family does not fit network: {e}"));
                    continue;
                }
                for (q, _) in family.entries.iter().enumerate() {
                    jobs.push((run_id, *episode, net, q));
                }
            }
            Err(e) => report
                .errors
                .push(format!("{run_id} ep{episode}: unreadable checkpoint excluded: {e}")),
        }
    }
    let cells: Vec<ReportCell> = jobs
        .par_iter()
        .map(|&(run_id, episode, net, q)| {
            let entry = &family.entries[q];
            let verdict = match entry.query.evaluate(net, budget).map(|v| v.kind) {
                Ok(VerdictKind::Sat { .. }) => VerdictTag::Sat,
                Ok(VerdictKind::Unsat) => VerdictTag::Unsat,
                Ok(VerdictKind::Timeout) | Err(_) => VerdictTag::Timeout,
            };
            ReportCell {
                run_id: run_id.clone(),
                episode,
                label: entry.label.clone(),
                verdict,
            }
        })
        .collect();
    report.cells = cells;
    report
}

/// Unsat count per checkpoint, ordered by run then episode.
pub fn unsat_timeseries(report: &RobustnessReport) -> Vec<(String, u64, usize)> {
    let mut counts: BTreeMap<(String, u64), usize> = BTreeMap::new();
    for c in &report.cells {
        *counts.entry((c.run_id.clone(), c.episode)).or_default() += (c.verdict == VerdictTag::Unsat) as usize;
    }
    counts.into_iter().map(|((r, e), n)| (r, e, n)).collect()
}

pub fn timeseries_csv(series: &[(String, u64, usize)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run_id", "episode", "unsat"])?;
    for (r, e, n) in series {
        w.write_record([r.clone(), e.to_string(), n.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Interval;
    use crate::oracle::{ActionPredicate, FamilyEntry, Query, QueryRegion};

    fn constant(action: usize) -> Mlp {
        let mut bias = vec![0.0; 3];
        bias[action] = 2.0;
        Mlp::from_layers(vec![(vec![0.1; 6], bias)]).unwrap()
    }

    fn family(action: usize, n: usize) -> QueryFamily {
        QueryFamily {
            entries: (0..n)
                .map(|k| FamilyEntry {
                    label: format!("q{k}"),
                    query: Query::Region(QueryRegion::new(
                        vec![
                            Interval::new(k as f64, k as f64 + 1.0).unwrap(),
                            Interval::new(-1.0, 1.0).unwrap(),
                        ],
                        ActionPredicate::SelectedActionIs(action),
                    )),
                })
                .collect(),
            ..QueryFamily::empty()
        }
    }

    fn cell(run: &str, episode: u64, label: &str, verdict: VerdictTag) -> ReportCell {
        ReportCell {
            run_id: run.into(),
            episode,
            label: label.into(),
            verdict,
        }
    }

    #[test]
    fn constant_network_percentages() {
        let cps = vec![("a".to_string(), 1, Ok(constant(0)))];
        let r = evaluate_robustness(&cps, &family(0, 3), Budget::boxes(1000));
        assert_eq!(r.overall().sat, 100.0);
        let r = evaluate_robustness(&cps, &family(1, 3), Budget::boxes(1000));
        assert_eq!(r.overall().unsat, 100.0);
        assert_eq!(r.cells.len(), 3);
    }

    #[test]
    fn overall_is_mean_of_runs() {
        let r = RobustnessReport {
            cells: vec![
                cell("a", 1, "q", VerdictTag::Unsat),
                cell("a", 2, "q", VerdictTag::Sat),
                cell("b", 1, "q", VerdictTag::Unsat),
                cell("b", 2, "q", VerdictTag::Unsat),
                cell("b", 3, "q", VerdictTag::Unsat),
                cell("b", 4, "q", VerdictTag::Timeout),
            ],
            errors: vec![],
        };
        let rows = r.per_run();
        assert_eq!(rows[0].percent.unsat, 50.0);
        assert_eq!(rows[1].percent.unsat, 75.0);
        assert_eq!(r.overall().unsat, 62.5);
        for row in rows {
            let p = row.percent;
            assert!((p.sat + p.unsat + p.timeout - 100.0).abs() < 1e-9);
        }
        assert!(r.to_markdown().contains("62.500"));
    }

    #[test]
    fn corrupt_checkpoint_is_noted() {
        let cps = vec![
            ("a".to_string(), 1, Ok(constant(0))),
            ("a".to_string(), 2, Err(Error::Checkpoint("truncated".into()))),
        ];
        let r = evaluate_robustness(&cps, &family(0, 2), Budget::boxes(100));
        assert_eq!(r.cells.len(), 2);
        assert_eq!(r.errors.len(), 1);
        assert!(r.to_markdown().contains("unreadable"));
    }

    #[test]
    fn timeseries_cases() {
        let single = RobustnessReport {
            cells: vec![cell("a", 5, "q", VerdictTag::Unsat)],
            errors: vec![],
        };
        assert_eq!(unsat_timeseries(&single), vec![("a".to_string(), 5, 1)]);
        let mut cells = vec![];
        for (e, unsat) in [(1u64, 4usize), (2, 3), (3, 1), (4, 0)] {
            for k in 0..4 {
                let v = if k < unsat { VerdictTag::Unsat } else { VerdictTag::Sat };
                cells.push(cell("r", e, &format!("q{k}"), v));
            }
        }
        let series: Vec<usize> = unsat_timeseries(&RobustnessReport { cells, errors: vec![] })
            .into_iter()
            .map(|(_, _, n)| n)
            .collect();
        assert_eq!(series, vec![4, 3, 1, 0]);
        let csv = timeseries_csv(&[("r".into(), 1, 4)]).unwrap();
        assert_eq!(csv, "run_id,episode,unsat\nr,1,4\n");
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = CheckpointStore::new(dir.path());
        store.save("b", 10, &constant(1)).unwrap();
        store.save("a", 2, &constant(0)).unwrap();
        store.save("a", 10, &constant(2)).unwrap();
        std::fs::write(dir.path().join("a").join("notes.txt"), "x").unwrap();
        let list = store.list().unwrap();
        let keys: Vec<_> = list.iter().map(|c| (c.run_id.as_str(), c.episode)).collect();
        assert_eq!(keys, vec![("a", 2), ("a", 10), ("b", 10)]);
        let all = store.load_all().unwrap();
        assert_eq!(all[2].2.as_ref().unwrap().params(), constant(1).params());
    }
}
