//! On-disk dataset layout:
//!
//! - `spec.json` — the dataset spec, every field materialized
//! - `{split}.csv` — `split,sample_id,modality,dim_0..dim_{D−1}`, one row per
//!   sample and modality (`D` is the widest modality; narrower rows leave the
//!   trailing cells empty)
//! - `{split}_labels.csv` — `sample_id,y`

use std::path::Path;

use careflow::synthdata::{generate, DatasetSpec, Sample, Split};
use careflow::{Label, Modality, Task};

use crate::error::{CliError, CliResult};
use crate::output::{write_json, CsvOut};

pub const SPEC_FILE: &str = "spec.json";

pub fn features_file(split: Split) -> String {
    format!("{}.csv", split.as_str())
}

pub fn labels_file(split: Split) -> String {
    format!("{}_labels.csv", split.as_str())
}

/// All three splits of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn generate(spec: &DatasetSpec) -> CliResult<Self> {
        Ok(Self {
            spec: spec.clone(),
            train: generate(spec, Split::Train)?,
            val: generate(spec, Split::Val)?,
            test: generate(spec, Split::Test)?,
        })
    }

    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(SPEC_FILE), &self.spec)?;
        let width = Modality::ALL.iter().map(|&m| self.spec.modality_dim(m)).max().unwrap_or(0);
        for split in Split::ALL {
            let mut header = vec!["split".to_string(), "sample_id".into(), "modality".into()];
            header.extend((0..width).map(|k| format!("dim_{k}")));
            let mut feats = CsvOut::create(&dir.join(features_file(split)), &header)?;
            let mut labels = CsvOut::create(&dir.join(labels_file(split)), &["sample_id".to_string(), "y".into()])?;
            for (id, s) in self.split(split).iter().enumerate() {
                for m in Modality::ALL {
                    let mut row = vec![split.as_str().to_string(), id.to_string(), m.as_str().to_string()];
                    let f = s.features(m);
                    row.extend(f.iter().map(|v| v.to_string()));
                    row.extend(std::iter::repeat_n(String::new(), width - f.len()));
                    feats.row(&row)?;
                }
                labels.row(&[id.to_string(), label_text(s.y)])?;
            }
            feats.finish()?;
            labels.finish()?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let spec_path = dir.join(SPEC_FILE);
        let text = std::fs::read_to_string(&spec_path).map_err(|e| CliError::io(&spec_path, e))?;
        let spec: DatasetSpec = serde_json::from_str(&text).map_err(|e| CliError::format(&spec_path, e))?;
        spec.validate()?;
        let mut splits = Vec::with_capacity(3);
        for split in Split::ALL {
            splits.push(read_split(dir, &spec, split)?);
        }
        let [train, val, test]: [Vec<Sample>; 3] = splits.try_into().expect("three splits");
        Ok(Self { spec, train, val, test })
    }
}

pub fn label_text(y: Label) -> String {
    match y {
        Label::Class(c) => c.to_string(),
        Label::Value(v) => v.to_string(),
    }
}

fn parse_label(text: &str, task: Task) -> Option<Label> {
    match task {
        Task::Classification => text.parse().ok().map(Label::Class),
        Task::Regression => text.parse().ok().filter(|v: &f64| v.is_finite()).map(Label::Value),
    }
}

fn open_csv(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::format(path, e))
}

fn read_split(dir: &Path, spec: &DatasetSpec, split: Split) -> CliResult<Vec<Sample>> {
    let n = spec.samples.get(split);
    let label_path = dir.join(labels_file(split));
    let mut labels = vec![None; n];
    for (line, record) in open_csv(&label_path)?.records().enumerate() {
        let record = record.map_err(|e| CliError::format(&label_path, e))?;
        let bad = || CliError::format(&label_path, format!("malformed row {}", line + 2));
        let id: usize = record.get(0).and_then(|s| s.parse().ok()).filter(|&i| i < n).ok_or_else(bad)?;
        let y = record.get(1).and_then(|s| parse_label(s, spec.task)).ok_or_else(bad)?;
        labels[id] = Some(y);
    }

    let feat_path = dir.join(features_file(split));
    let mut feats: Vec<[Option<Vec<f64>>; 3]> = vec![[None, None, None]; n];
    for (line, record) in open_csv(&feat_path)?.records().enumerate() {
        let record = record.map_err(|e| CliError::format(&feat_path, e))?;
        let bad = |what: &str| CliError::format(&feat_path, format!("row {}: {what}", line + 2));
        if record.get(0) != Some(split.as_str()) {
            return Err(bad("wrong split"));
        }
        let id: usize = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .filter(|&i| i < n)
            .ok_or_else(|| bad("bad sample_id"))?;
        let m = record.get(2).and_then(Modality::parse).ok_or_else(|| bad("bad modality"))?;
        let dim = spec.modality_dim(m);
        let values: Option<Vec<f64>> = (0..dim).map(|k| record.get(3 + k).and_then(|s| s.parse().ok())).collect();
        let values = values
            .filter(|v| v.iter().all(|x: &f64| x.is_finite()))
            .ok_or_else(|| bad("bad feature value"))?;
        feats[id][m.index()] = Some(values);
    }

    let mut out = Vec::with_capacity(n);
    for (id, (f, y)) in feats.into_iter().zip(labels).enumerate() {
        let missing = || CliError::format(dir, format!("{} sample {id} is incomplete", split.as_str()));
        let [a, v, l] = f;
        out.push(Sample {
            u: [a.ok_or_else(missing)?, v.ok_or_else(missing)?, l.ok_or_else(missing)?],
            y: y.ok_or_else(missing)?,
            z: Vec::new(),
        });
    }
    Ok(out)
}
