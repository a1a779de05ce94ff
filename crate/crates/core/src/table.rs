//! Per-sample statistic tables and their CSV + JSON manifest format.
//!
//! A table is stored as `<name>.csv` with header `sample_id,<col>,...` and a
//! sibling `<name>.csv.manifest.json` carrying the schema and role. Columns
//! are laid out statistic-major: an ensembled statistic `s` contributes one
//! column `s@<model>` per model id (in manifest order), a plain statistic a
//! single column `s`. Whether a statistic is ensembled is read off the header.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DoseError, Result};
use crate::rng::{domain, subseed, CounterRng};

/// Separator between a statistic and a model id in ensemble column names.
pub const ENSEMBLE_SEP: char = '@';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
    Ood,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Test => "test",
            Role::Ood => "ood",
        })
    }
}

/// Discrete data-domain description used for entropy bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainMeta {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub levels: u32,
}

impl DomainMeta {
    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 || self.levels < 2 {
            return Err(DoseError::SchemaMismatch(format!("invalid domain_meta {self:?}")));
        }
        Ok(())
    }

    /// Upper entropy bound `h·w·c·log k` in nats.
    pub fn max_entropy(&self) -> f64 {
        f64::from(self.height) * f64::from(self.width) * f64::from(self.channels) * f64::from(self.levels).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatSchema {
    statistic_names: Vec<String>,
    model_ids: Vec<String>,
    ensembled: Vec<bool>,
    domain_meta: Option<DomainMeta>,
}

impl StatSchema {
    pub fn new(
        statistic_names: Vec<String>,
        model_ids: Vec<String>,
        ensembled: Vec<bool>,
        domain_meta: Option<DomainMeta>,
    ) -> Result<Self> {
        if statistic_names.is_empty() {
            return Err(DoseError::SchemaMismatch("no statistics".into()));
        }
        if ensembled.len() != statistic_names.len() {
            return Err(DoseError::SchemaMismatch(
                "ensemble flags do not match statistic count".into(),
            ));
        }
        check_names("statistic", &statistic_names)?;
        if model_ids.is_empty() {
            return Err(DoseError::SchemaMismatch("at least one model id required".into()));
        }
        check_names("model", &model_ids)?;
        if let Some(meta) = &domain_meta {
            meta.validate()?;
        }
        Ok(Self {
            statistic_names,
            model_ids,
            ensembled,
            domain_meta,
        })
    }

    /// Schema of non-ensembled statistics from a single model `m0`.
    pub fn plain<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names.iter().map(|s| s.as_ref().to_string()).collect(),
            vec!["m0".to_string()],
            vec![false; names.len()],
            None,
        )
    }

    pub fn statistic_names(&self) -> &[String] {
        &self.statistic_names
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn is_ensembled(&self, statistic: usize) -> bool {
        self.ensembled[statistic]
    }

    pub fn domain_meta(&self) -> Option<&DomainMeta> {
        self.domain_meta.as_ref()
    }

    pub fn with_domain_meta(mut self, meta: Option<DomainMeta>) -> Result<Self> {
        if let Some(m) = &meta {
            m.validate()?;
        }
        self.domain_meta = meta;
        Ok(self)
    }

    pub fn statistic_index(&self, name: &str) -> Option<usize> {
        self.statistic_names.iter().position(|s| s == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols = Vec::new();
        for (name, &ens) in self.statistic_names.iter().zip(&self.ensembled) {
            if ens {
                for m in &self.model_ids {
                    cols.push(format!("{name}{ENSEMBLE_SEP}{m}"));
                }
            } else {
                cols.push(name.clone());
            }
        }
        cols
    }

    pub fn n_columns(&self) -> usize {
        self.ensembled
            .iter()
            .map(|&e| if e { self.model_ids.len() } else { 1 })
            .sum()
    }

    /// Column range occupied by statistic `idx`.
    fn column_span(&self, idx: usize) -> std::ops::Range<usize> {
        let width = |e: bool| if e { self.model_ids.len() } else { 1 };
        let start: usize = self.ensembled[..idx].iter().map(|&e| width(e)).sum();
        start..start + width(self.ensembled[idx])
    }

    /// Infer the per-statistic ensemble flags from a CSV header, failing if
    /// the header is not exactly the layout implied by names and models.
    fn infer_layout(statistic_names: &[String], model_ids: &[String], header: &[String]) -> Result<Vec<bool>> {
        let mut flags = Vec::with_capacity(statistic_names.len());
        let mut pos = 0;
        for name in statistic_names {
            match header.get(pos) {
                Some(col) if col == name => {
                    flags.push(false);
                    pos += 1;
                }
                Some(_) => {
                    for m in model_ids {
                        let expected = format!("{name}{ENSEMBLE_SEP}{m}");
                        if header.get(pos) != Some(&expected) {
                            return Err(DoseError::SchemaMismatch(format!(
                                "expected column `{expected}` at position {}, found `{}`",
                                pos + 1,
                                header.get(pos).map(String::as_str).unwrap_or("<end>")
                            )));
                        }
                        pos += 1;
                    }
                    flags.push(true);
                }
                None => {
                    return Err(DoseError::SchemaMismatch(format!(
                        "header ends before statistic `{name}`"
                    )))
                }
            }
        }
        if pos != header.len() {
            return Err(DoseError::SchemaMismatch(format!(
                "unexpected extra column `{}`",
                header[pos]
            )));
        }
        Ok(flags)
    }
}

fn check_names(what: &str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if n.is_empty() || n.contains(ENSEMBLE_SEP) || n.contains(',') || n.contains('"') {
            return Err(DoseError::SchemaMismatch(format!("invalid {what} name `{n}`")));
        }
        if !seen.insert(n.as_str()) {
            return Err(DoseError::SchemaMismatch(format!("duplicate {what} name `{n}`")));
        }
    }
    Ok(())
}

/// An immutable matrix of finite statistic values, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StatTable {
    schema: StatSchema,
    role: Role,
    sample_ids: Vec<String>,
    values: Vec<f64>,
}

impl StatTable {
    /// Build a table from row-major values.
    pub fn new(schema: StatSchema, role: Role, sample_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n_cols = schema.n_columns();
        if values.len() != sample_ids.len() * n_cols {
            return Err(DoseError::SchemaMismatch(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                sample_ids.len(),
                n_cols
            )));
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        for id in &sample_ids {
            if id.contains(['\n', '\r']) {
                return Err(DoseError::SchemaMismatch(format!(
                    "sample id {id:?} contains a newline"
                )));
            }
            if !seen.insert(id.as_str()) {
                return Err(DoseError::DuplicateSampleId(id.clone()));
            }
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(DoseError::NonFiniteValue {
                row: k / n_cols,
                col: k % n_cols,
            });
        }
        Ok(Self {
            schema,
            role,
            sample_ids,
            values,
        })
    }

    /// Build a table from named columns with generated ids `<prefix><i>`.
    pub fn from_columns(schema: StatSchema, role: Role, id_prefix: &str, columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = schema.n_columns();
        if columns.len() != n_cols {
            return Err(DoseError::DimensionMismatch {
                expected: n_cols,
                got: columns.len(),
            });
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(DoseError::SchemaMismatch("ragged columns".into()));
        }
        let mut values = Vec::with_capacity(n * n_cols);
        for i in 0..n {
            values.extend(columns.iter().map(|c| c[i]));
        }
        let ids = (0..n).map(|i| format!("{id_prefix}{i}")).collect();
        Self::new(schema, role, ids, values)
    }

    pub fn schema(&self) -> &StatSchema {
        &self.schema
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn n_rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.n_columns()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn column_names(&self) -> Vec<String> {
        self.schema.column_names()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names().iter().position(|c| c == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows().map(|r| r[idx]).collect()
    }

    /// Values of a column looked up by its full name.
    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        self.column_index(name)
            .map(|i| self.column(i))
            .ok_or_else(|| DoseError::UnknownStatistic(name.to_string()))
    }

    /// Keep the given rows, in the given order.
    fn take_rows(&self, rows: &[usize], role: Role) -> Self {
        let c = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * c);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            values.extend_from_slice(self.row(r));
            ids.push(self.sample_ids[r].clone());
        }
        Self {
            schema: self.schema.clone(),
            role,
            sample_ids: ids,
            values,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    role: Role,
    statistic_names: Vec<String>,
    model_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain_meta: Option<DomainMeta>,
}

/// Path of the manifest belonging to a CSV file.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:?}")
}

pub fn read_stat_table(path: &Path, expected_role: Option<Role>) -> Result<StatTable> {
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Err(DoseError::MissingManifest(mpath));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&mpath).map_err(|e| DoseError::io(&mpath, e))?)?;
    if let Some(expected) = expected_role {
        if expected != manifest.role {
            return Err(DoseError::RoleMismatch {
                expected: expected.to_string(),
                found: manifest.role.to_string(),
            });
        }
    }

    let file = fs::File::open(path).map_err(|e| DoseError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("sample_id") {
        return Err(DoseError::SchemaMismatch("first column must be `sample_id`".into()));
    }
    let flags = StatSchema::infer_layout(&manifest.statistic_names, &manifest.model_ids, &header[1..])?;
    let schema = StatSchema::new(
        manifest.statistic_names,
        manifest.model_ids,
        flags,
        manifest.domain_meta,
    )?;
    let n_cols = schema.n_columns();

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != n_cols + 1 {
            return Err(DoseError::SchemaMismatch(format!(
                "row {row} has {} fields, expected {}",
                rec.len(),
                n_cols + 1
            )));
        }
        ids.push(rec[0].to_string());
        for col in 0..n_cols {
            let v: f64 = rec[col + 1].trim().parse().map_err(|_| {
                DoseError::SchemaMismatch(format!("row {row}, column {col}: `{}` is not a real", &rec[col + 1]))
            })?;
            if !v.is_finite() {
                return Err(DoseError::NonFiniteValue { row, col });
            }
            values.push(v);
        }
    }
    StatTable::new(schema, manifest.role, ids, values)
}

/// Write `table` to `path` and its manifest next to it.
pub fn write_stat_table(table: &StatTable, path: &Path) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["sample_id".to_string()];
    header.extend(table.column_names());
    wtr.write_record(&header)?;
    for (id, row) in table.sample_ids.iter().zip(table.rows()) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(id.clone());
        rec.extend(row.iter().map(|&v| format_real(v)));
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| DoseError::io(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| DoseError::io(path, e))?;

    let manifest = Manifest {
        role: table.role,
        statistic_names: table.schema.statistic_names.clone(),
        model_ids: table.schema.model_ids.clone(),
        domain_meta: table.schema.domain_meta,
    };
    let mpath = manifest_path(path);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&mpath, text).map_err(|e| DoseError::io(&mpath, e))
}

/// Split a training table into (train, val) with `⌈fraction·n⌉` validation rows.
///
/// Rows are shuffled with a seeded Fisher-Yates pass and the validation set
/// is the shuffled prefix. Both outputs keep the original relative row order.
pub fn split_holdout(table: &StatTable, holdout_fraction: f64, seed: u64) -> Result<(StatTable, StatTable)> {
    let n = table.n_rows();
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(DoseError::BadParams(format!(
            "holdout fraction {holdout_fraction} not in (0, 1)"
        )));
    }
    let n_val = ceil_count(holdout_fraction, n);
    if n < 2 || n_val < 1 || n_val >= n {
        return Err(DoseError::TableTooSmall(format!(
            "{n} rows cannot give {n_val} validation rows and a non-empty training set"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = CounterRng::new(subseed(seed, domain::HOLDOUT), 0, 0);
    for i in (1..n).rev() {
        let j = (rng.open01() * (i + 1) as f64) as usize;
        perm.swap(i, j.min(i));
    }
    let mut val_rows = perm[..n_val].to_vec();
    let mut train_rows = perm[n_val..].to_vec();
    val_rows.sort_unstable();
    train_rows.sort_unstable();
    Ok((
        table.take_rows(&train_rows, Role::Train),
        table.take_rows(&val_rows, Role::Val),
    ))
}

/// `⌈fraction·n⌉`, tolerant of representation error in `fraction`.
pub(crate) fn ceil_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// How ensemble columns collapse to one value per statistic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reducer {
    SingleModel(String),
    EnsembleMean,
}

/// Project a table onto `statistic_names`, producing plain columns.
pub fn select_columns<S: AsRef<str>>(table: &StatTable, statistic_names: &[S], reducer: &Reducer) -> Result<StatTable> {
    let schema = table.schema();
    let model_idx = match reducer {
        Reducer::SingleModel(m) => Some(
            schema
                .model_ids
                .iter()
                .position(|x| x == m)
                .ok_or_else(|| DoseError::UnknownModel(m.clone()))?,
        ),
        Reducer::EnsembleMean => None,
    };
    let mut spans = Vec::with_capacity(statistic_names.len());
    for name in statistic_names {
        let name = name.as_ref();
        let idx = schema
            .statistic_index(name)
            .ok_or_else(|| DoseError::UnknownStatistic(name.to_string()))?;
        spans.push((schema.column_span(idx), schema.ensembled[idx]));
    }
    let new_schema = StatSchema::new(
        statistic_names.iter().map(|s| s.as_ref().to_string()).collect(),
        match reducer {
            Reducer::SingleModel(m) => vec![m.clone()],
            Reducer::EnsembleMean => schema.model_ids.clone(),
        },
        vec![false; statistic_names.len()],
        schema.domain_meta,
    )?;
    let mut values = Vec::with_capacity(table.n_rows() * spans.len());
    for row in table.rows() {
        for (span, ens) in &spans {
            let v = match (ens, model_idx) {
                (false, _) => row[span.start],
                (true, Some(m)) => row[span.start + m],
                (true, None) => {
                    let cols = &row[span.clone()];
                    cols.iter().sum::<f64>() / cols.len() as f64
                }
            };
            values.push(v);
        }
    }
    StatTable::new(new_schema, table.role, table.sample_ids.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, csv: &str, manifest: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, csv).unwrap();
        fs::write(manifest_path(&p), manifest).unwrap();
        p
    }

    const M_NLL: &str = r#"{"role":"train","statistic_names":["nll"],"model_ids":["m0"]}"#;

    #[test]
    fn reads_minimal_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "sample_id,nll@m0\na,1.5\nb,-2\n", M_NLL);
        let t = read_stat_table(&p, Some(Role::Train)).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.n_cols(), 1);
        assert_eq!(t.column(0), vec![1.5, -2.0]);
        assert!(t.schema().is_ensembled(0));
    }

    #[test]
    fn nan_cell_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "sample_id,nll@m0\na,1.5\nb,NaN\n", M_NLL);
        let err = read_stat_table(&p, None).unwrap_err();
        assert!(matches!(err, DoseError::NonFiniteValue { row: 1, col: 0 }), "{err:?}");
    }

    #[test]
    fn header_manifest_disagreement() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "t.csv",
            "sample_id,rate\na,1\n",
            r#"{"role":"test","statistic_names":["xent"],"model_ids":["m0"]}"#,
        );
        assert!(matches!(read_stat_table(&p, None), Err(DoseError::SchemaMismatch(_))));
    }

    #[test]
    fn missing_manifest_duplicate_ids_and_role() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "sample_id,nll\na,1\n").unwrap();
        assert!(matches!(read_stat_table(&p, None), Err(DoseError::MissingManifest(_))));

        let p = write(dir.path(), "d.csv", "sample_id,nll@m0\na,1\na,2\n", M_NLL);
        assert!(matches!(
            read_stat_table(&p, None),
            Err(DoseError::DuplicateSampleId(_))
        ));

        let p = write(dir.path(), "r.csv", "sample_id,nll@m0\na,1\n", M_NLL);
        assert!(matches!(
            read_stat_table(&p, Some(Role::Ood)),
            Err(DoseError::RoleMismatch { .. })
        ));
    }

    #[test]
    fn invalid_names_rejected() {
        assert!(StatSchema::plain(&["a@b"]).is_err());
        assert!(StatSchema::plain(&["a", "a"]).is_err());
        assert!(StatSchema::plain(&[""]).is_err());
    }

    fn table(n: usize) -> StatTable {
        let col: Vec<f64> = (0..n).map(|i| i as f64).collect();
        StatTable::from_columns(StatSchema::plain(&["x"]).unwrap(), Role::Train, "s", &[col]).unwrap()
    }

    #[test]
    fn holdout_sizes_and_determinism() {
        let t = table(10);
        let (tr, va) = split_holdout(&t, 0.1, 3).unwrap();
        assert_eq!((tr.n_rows(), va.n_rows()), (9, 1));
        assert_eq!(tr.role(), Role::Train);
        assert_eq!(va.role(), Role::Val);
        let (tr2, va2) = split_holdout(&t, 0.1, 3).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(va, va2);
        assert!(matches!(split_holdout(&t, 0.95, 3), Err(DoseError::TableTooSmall(_))));
        assert!(matches!(
            split_holdout(&table(1), 0.5, 3),
            Err(DoseError::TableTooSmall(_))
        ));
    }

    fn ensemble_table() -> StatTable {
        let schema = StatSchema::new(
            vec!["nll".into(), "rate".into()],
            vec!["m0".into(), "m1".into()],
            vec![true, false],
            None,
        )
        .unwrap();
        StatTable::new(schema, Role::Test, vec!["a".into()], vec![2.0, 4.0, 7.0]).unwrap()
    }

    #[test]
    fn ensemble_mean_and_single_model() {
        let t = ensemble_table();
        assert_eq!(t.column_names(), vec!["nll@m0", "nll@m1", "rate"]);
        let mean = select_columns(&t, &["nll"], &Reducer::EnsembleMean).unwrap();
        assert_eq!(mean.column_names(), vec!["nll"]);
        assert_eq!(mean.values(), &[3.0]);
        let one = select_columns(&t, &["nll", "rate"], &Reducer::SingleModel("m1".into())).unwrap();
        assert_eq!(one.values(), &[4.0, 7.0]);
    }

    #[test]
    fn selection_errors() {
        let t = ensemble_table();
        assert!(matches!(
            select_columns(&t, &["iwae"], &Reducer::EnsembleMean),
            Err(DoseError::UnknownStatistic(_))
        ));
        assert!(matches!(
            select_columns(&t, &["nll"], &Reducer::SingleModel("m9".into())),
            Err(DoseError::UnknownModel(_))
        ));
    }

    #[test]
    fn ceil_count_tolerates_rounding() {
        assert_eq!(ceil_count(0.1, 2000), 200);
        assert_eq!(ceil_count(0.1, 10), 1);
        assert_eq!(ceil_count(0.7, 10), 7);
        assert_eq!(ceil_count(0.15, 10), 2);
        assert_eq!(ceil_count(0.0, 10), 0);
    }
}
