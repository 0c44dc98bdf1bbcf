//! Offline logit sources: per-probe JSONL records or per-(model, condition) aggregate CSV rows.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BackendConfig, BackendError, LogitQuery, LogitRecord, LogitSource, ModelSpec};
use crate::condition::ContextCondition;
use crate::error::{DataError, ValidationError};

pub const AGGREGATE_CSV_HEADER: &str = "setting,model,param_count,dstr_no,dstr_with,gold_no,gold_with";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AggregateRow {
    setting: ContextCondition,
    model: String,
    param_count: u64,
    dstr_no: f64,
    dstr_with: f64,
    gold_no: f64,
    gold_with: f64,
}

/// Records keyed by (model, probe id).
#[derive(Debug, Clone, Default)]
pub struct ReplaySource {
    records: BTreeMap<(String, String), LogitRecord>,
    /// Parameter counts carried by aggregate rows, in first-seen order.
    sizes: Vec<(String, u64)>,
    origin: Option<PathBuf>,
    model: Option<String>,
}

impl ReplaySource {
    pub fn from_records(records: impl IntoIterator<Item = LogitRecord>) -> Result<Self, ValidationError> {
        let mut source = Self::default();
        for r in records {
            source.insert(r)?;
        }
        Ok(source)
    }

    fn insert(&mut self, record: LogitRecord) -> Result<(), ValidationError> {
        record.validate()?;
        let key = (record.model.clone(), record.probe_id.clone());
        if self.records.contains_key(&key) {
            return Err(ValidationError::new(format!(
                "duplicate replay record for probe `{}` on `{}`",
                key.1, key.0
            )));
        }
        self.records.insert(key, record);
        Ok(())
    }

    /// Parse aggregate rows; each row becomes one record with id `<model>/<setting>`.
    pub fn from_aggregate_csv(text: &str, origin: &Path) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| DataError::format(origin, 1, 0, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.join(",") != AGGREGATE_CSV_HEADER {
            return Err(DataError::format(
                origin,
                1,
                0,
                format!("expected header `{AGGREGATE_CSV_HEADER}`, found `{}`", header.join(",")),
            ));
        }
        let mut source = Self {
            origin: Some(origin.to_path_buf()),
            ..Self::default()
        };
        for row in reader.deserialize::<AggregateRow>() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                DataError::format(origin, line, 0, e.to_string())
            })?;
            if row.param_count == 0 {
                return Err(
                    ValidationError::new(format!("model `{}`: param_count must be positive", row.model)).into(),
                );
            }
            match source.sizes.iter().find(|(m, _)| *m == row.model) {
                Some((_, n)) if *n != row.param_count => {
                    return Err(
                        ValidationError::new(format!("model `{}` listed with two parameter counts", row.model)).into(),
                    )
                }
                Some(_) => {}
                None => source.sizes.push((row.model.clone(), row.param_count)),
            }
            source.insert(LogitRecord {
                probe_id: format!("{}/{}", row.model, row.setting),
                model: row.model,
                condition: row.setting,
                gold_ctx: row.gold_with,
                gold_noctx: row.gold_no,
                dstr_ctx: row.dstr_with,
                dstr_noctx: row.dstr_no,
            })?;
        }
        Ok(source)
    }

    /// Opens `.csv` files as aggregate rows and everything else as JSONL records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
            Self::from_aggregate_csv(&text, path)
        } else {
            let mut source = Self::from_records(read_records_jsonl(path)?)?;
            source.origin = Some(path.to_path_buf());
            Ok(source)
        }
    }

    /// Restrict lookups to one model.
    pub fn for_model(mut self, model: &str) -> Self {
        self.model = Some(model.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// All records (or those of the selected model), ordered by model then probe id.
    pub fn records(&self) -> Vec<LogitRecord> {
        self.records
            .values()
            .filter(|r| self.model.as_ref().is_none_or(|m| *m == r.model))
            .cloned()
            .collect()
    }

    /// Model specs for aggregate replays, in file order.
    pub fn models(&self, family_hint: Option<&str>) -> Vec<ModelSpec> {
        let path = self
            .origin
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        self.sizes
            .iter()
            .map(|(name, n)| ModelSpec {
                name: name.clone(),
                family: family_hint
                    .map(str::to_string)
                    .unwrap_or_else(|| name.split('-').next().unwrap_or(name).to_string()),
                param_count: *n,
                backend: BackendConfig::Replay { path: path.clone() },
            })
            .collect()
    }

    fn lookup(&self, probe_id: &str) -> Result<&LogitRecord, BackendError> {
        let gap = || BackendError::DataGap {
            probe_id: probe_id.to_string(),
            model: self.model.clone().unwrap_or_else(|| "*".into()),
        };
        match &self.model {
            Some(m) => self.records.get(&(m.clone(), probe_id.to_string())).ok_or_else(gap),
            None => {
                let mut hits = self.records.values().filter(|r| r.probe_id == probe_id);
                let first = hits.next().ok_or_else(gap)?;
                if hits.next().is_some() {
                    return Err(BackendError::Protocol(format!(
                        "probe `{probe_id}` is recorded for several models; select one"
                    )));
                }
                Ok(first)
            }
        }
    }
}

impl LogitSource for ReplaySource {
    /// Candidates are read as `[gold, distractor]`.
    fn fetch(&self, query: &LogitQuery) -> Result<Vec<f64>, BackendError> {
        let origin = query
            .origin
            .as_ref()
            .ok_or_else(|| BackendError::Protocol("replay lookups need the probe id of the query".into()))?;
        if query.candidates.len() != 2 {
            return Err(BackendError::Protocol(format!(
                "replay serves [gold, distractor] pairs, got {} candidates",
                query.candidates.len()
            )));
        }
        let r = self.lookup(&origin.probe_id)?;
        Ok(if origin.with_context {
            vec![r.gold_ctx, r.dstr_ctx]
        } else {
            vec![r.gold_noctx, r.dstr_noctx]
        })
    }
}

pub fn write_records_jsonl<W: Write>(mut writer: W, records: &[LogitRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_records_jsonl(path: impl AsRef<Path>) -> Result<Vec<LogitRecord>, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogitRecord =
            serde_json::from_str(&line).map_err(|e| DataError::format(path, n + 1, e.column(), e.to_string()))?;
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::fetch_logits;

    const CSV: &str = "setting,model,param_count,dstr_no,dstr_with,gold_no,gold_with\n\
                       counterfactual,cerebras-111M,111000000,3.65,13.35,4.62,7.82\n";

    #[test]
    fn aggregate_row_serves_with_context_distractor() {
        let src = ReplaySource::from_aggregate_csv(CSV, Path::new("t.csv"))
            .unwrap()
            .for_model("cerebras-111M");
        let q = LogitQuery::new("", vec!["g".into(), "d".into()]).with_origin("cerebras-111M/counterfactual", true);
        assert_eq!(fetch_logits(&src, &q).unwrap(), vec![7.82, 13.35]);
        let q = q.with_origin("cerebras-111M/counterfactual", false);
        assert_eq!(fetch_logits(&src, &q).unwrap(), vec![4.62, 3.65]);
    }

    #[test]
    fn missing_probe_is_data_gap() {
        let src = ReplaySource::from_aggregate_csv(CSV, Path::new("t.csv")).unwrap();
        let q = LogitQuery::new("", vec!["g".into(), "d".into()]).with_origin("nope", true);
        match fetch_logits(&src, &q) {
            Err(BackendError::DataGap { probe_id, .. }) => assert_eq!(probe_id, "nope"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let err = ReplaySource::from_aggregate_csv("a,b\n1,2\n", Path::new("t.csv")).unwrap_err();
        assert!(matches!(err, DataError::Format { line: 1, .. }));
    }

    #[test]
    fn bad_number_reports_line() {
        let text = format!("{AGGREGATE_CSV_HEADER}\nrandom,m-1M,1000000,x,1,1,1\n");
        let err = ReplaySource::from_aggregate_csv(&text, Path::new("t.csv")).unwrap_err();
        assert!(matches!(err, DataError::Format { line: 2, .. }), "{err}");
    }

    #[test]
    fn models_carry_param_counts() {
        let src = ReplaySource::from_aggregate_csv(CSV, Path::new("t.csv")).unwrap();
        let models = src.models(None);
        assert_eq!(models.len(), 1);
        assert_eq!(models[0].family, "cerebras");
        assert_eq!(models[0].param_count, 111_000_000);
    }
}
