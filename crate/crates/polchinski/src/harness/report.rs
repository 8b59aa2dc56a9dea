//! Deterministic aggregation of results files into tables and plot-ready
//! series.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::harness::records::{read_records, RunRecord};

/// Aggregate every `results.txt` under `input` into one table per statistic
/// under `output`.  Rows are sorted by (params, config hash), so rebuilding
/// from the same records reproduces files byte for byte.
pub fn generate(input: &Path, output: &Path) -> Result<Vec<String>> {
    let mut records: Vec<RunRecord> = Vec::new();
    let mut stack = vec![input.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.is_file() {
            records.extend(read_records(&dir)?);
            continue;
        }
        let mut entries: Vec<_> = std::fs::read_dir(&dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|f| f == "results.txt") {
                records.extend(read_records(&path)?);
            }
        }
    }
    let mut by_stat: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in &records {
        by_stat.entry(r.statistic.clone()).or_default().push(r);
    }
    std::fs::create_dir_all(output)?;
    let mut written = Vec::new();
    for (stat, mut rows) in by_stat {
        rows.sort_by(|a, b| (&a.params, &a.config_hash).cmp(&(&b.params, &b.config_hash)));
        let fname = format!("{}.tsv", stat.replace(['/', ' '], "_"));
        let mut file = std::fs::File::create(output.join(&fname))?;
        writeln!(file, "params\tvalue\tse\treplicas\tconfig")?;
        for r in rows {
            writeln!(
                file,
                "{}\t{:.17e}\t{}\t{}\t{}",
                r.params,
                r.value,
                r.std_error.map_or("-".into(), |e| format!("{e:.17e}")),
                r.replicas,
                r.config_hash
            )?;
        }
        written.push(fname);
    }
    Ok(written)
}
