//! Expression-matrix ingestion, preprocessing and fold construction.
//!
//! Data files are delimiter-separated text: the first row holds the sample
//! ids (after a corner cell), the first column holds gene ids and the rest
//! are decimal reals. Label files hold one `sample_id<delim>label` pair per
//! line. The delimiter is comma or tab, detected from the first line unless
//! given explicitly.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    GenesAsRows,
    SamplesAsRows,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "genes_as_rows" | "genes" => Ok(Orientation::GenesAsRows),
            "samples_as_rows" | "samples" => Ok(Orientation::SamplesAsRows),
            other => Err(Error::Parse(format!("unknown orientation `{other}`"))),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::GenesAsRows => "genes_as_rows",
            Orientation::SamplesAsRows => "samples_as_rows",
        })
    }
}

/// What to do with missing or non-finite cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Fail, reporting the first offending cell.
    #[default]
    Reject,
    /// Replace with the mean of the finite values of the same gene.
    ImputeMean,
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "reject" => Ok(MissingPolicy::Reject),
            "impute-mean" | "impute" => Ok(MissingPolicy::ImputeMean),
            other => Err(Error::Parse(format!("unknown missing-value policy `{other}`"))),
        }
    }
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingPolicy::Reject => "reject",
            MissingPolicy::ImputeMean => "impute-mean",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub orientation: Orientation,
    /// `None` auto-detects comma or tab from the first line.
    pub delimiter: Option<u8>,
    pub missing: MissingPolicy,
    /// Allowed label tokens in class-index order. When absent, the distinct
    /// tokens are sorted lexicographically.
    pub classes: Option<Vec<String>>,
}

/// Genes × samples expression matrix with labels.
///
/// Labels are stored as zero-based class indices into `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionDataset {
    values: DMatrix<f64>,
    gene_ids: Vec<String>,
    sample_ids: Vec<String>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl ExpressionDataset {
    pub fn new(
        values: DMatrix<f64>,
        gene_ids: Vec<String>,
        sample_ids: Vec<String>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (d, n) = values.shape();
        if gene_ids.len() != d || sample_ids.len() != n || labels.len() != n {
            return Err(Error::Dimension(format!(
                "matrix is {d}x{n} but there are {} gene ids, {} sample ids and {} labels",
                gene_ids.len(),
                sample_ids.len(),
                labels.len()
            )));
        }
        if let Some((pos, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse(format!(
                "non-finite value at gene {}, sample {}",
                pos % d.max(1),
                pos / d.max(1)
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = sample_ids.iter().find(|s| !seen.insert(s.as_str())) {
            return Err(Error::Parse(format!("duplicate sample id `{dup}`")));
        }
        let c = class_names.len();
        if let Some(bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidArgument(format!(
                "label index {bad} out of range for {c} classes"
            )));
        }
        let mut counts = vec![0usize; c];
        labels.iter().for_each(|&l| counts[l] += 1);
        if let Some(j) = counts.iter().position(|&k| k == 0) {
            return Err(Error::InvalidArgument(format!(
                "class `{}` has no samples",
                class_names[j]
            )));
        }
        Ok(Self {
            values,
            gene_ids,
            sample_ids,
            labels,
            class_names,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_genes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Columns `indices` of the value matrix, in the given order.
    pub fn sample_columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.values.select_columns(indices)
    }

    /// Dataset restricted to the given genes (rows), in the given order.
    pub fn with_genes(&self, genes: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(genes),
            gene_ids: genes.iter().map(|&g| self.gene_ids[g].clone()).collect(),
            sample_ids: self.sample_ids.clone(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }

    fn with_values(&self, values: DMatrix<f64>) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }

    /// Writes the matrix in the genes-as-rows text format. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn write_matrix(&self, path: &Path, delimiter: u8) -> Result<()> {
        let d = delimiter as char;
        let mut out = String::new();
        out.push_str("gene_id");
        for s in &self.sample_ids {
            out.push(d);
            out.push_str(s);
        }
        out.push('\n');
        for (g, id) in self.gene_ids.iter().enumerate() {
            out.push_str(id);
            for v in self.values.row(g).iter() {
                out.push(d);
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_labels(&self, path: &Path, delimiter: u8) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (s, &l) in self.sample_ids.iter().zip(&self.labels) {
            writeln!(f, "{s}{}{}", delimiter as char, self.class_names[l])
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// What ingestion saw and did; recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestLog {
    pub genes: usize,
    pub samples: usize,
    pub class_counts: Vec<(String, usize)>,
    pub delimiter: char,
    pub missing_policy: MissingPolicy,
    pub imputed_cells: usize,
}

fn detect_delimiter(first_line: &str) -> u8 {
    if first_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn is_missing_token(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "n/a"
    )
}

/// Loads a data file and its label file into canonical genes × samples form.
pub fn load_matrix(
    data_path: &Path,
    labels_path: &Path,
    opts: &LoadOptions,
) -> Result<(ExpressionDataset, IngestLog)> {
    let text = read_text(data_path)?;
    let label_text = read_text(labels_path)?;
    parse_dataset(&text, &label_text, opts)
}

/// In-memory form of [`load_matrix`].
pub fn parse_dataset(
    data: &str,
    labels: &str,
    opts: &LoadOptions,
) -> Result<(ExpressionDataset, IngestLog)> {
    let first = data.lines().next().unwrap_or("");
    let delim = opts.delimiter.unwrap_or_else(|| detect_delimiter(first));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delim)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(data.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec);
    }
    if records.len() < 2 {
        return Err(Error::Parse("no data rows".into()));
    }
    let header: Vec<String> = records[0].iter().skip(1).map(str::to_owned).collect();
    if header.is_empty() {
        return Err(Error::Parse("header row has no column ids".into()));
    }

    // Row-major cells as read from the file; `None` marks a missing cell.
    let mut row_ids = Vec::with_capacity(records.len() - 1);
    let mut cells: Vec<Vec<Option<f64>>> = Vec::with_capacity(records.len() - 1);
    for (r, rec) in records.iter().enumerate().skip(1) {
        if rec.len() != header.len() + 1 {
            return Err(Error::Dimension(format!(
                "row {} has {} cells, expected {}",
                r + 1,
                rec.len(),
                header.len() + 1
            )));
        }
        row_ids.push(rec[0].to_owned());
        let mut row = Vec::with_capacity(header.len());
        for (c, cell) in rec.iter().enumerate().skip(1) {
            let v = if is_missing_token(cell) {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Parse(format!(
                        "unparseable cell `{cell}` at row {}, column {}",
                        r + 1,
                        c + 1
                    ))
                })?;
                v.is_finite().then_some(v)
            };
            if v.is_none() && opts.missing == MissingPolicy::Reject {
                return Err(Error::Parse(format!(
                    "missing or non-finite value at row {}, column {}",
                    r + 1,
                    c + 1
                )));
            }
            row.push(v);
        }
        cells.push(row);
    }

    let (gene_ids, sample_ids) = match opts.orientation {
        Orientation::GenesAsRows => (row_ids, header),
        Orientation::SamplesAsRows => (header, row_ids),
    };
    let get = |g: usize, s: usize| match opts.orientation {
        Orientation::GenesAsRows => cells[g][s],
        Orientation::SamplesAsRows => cells[s][g],
    };
    let (d, n) = (gene_ids.len(), sample_ids.len());

    let mut imputed = 0;
    let mut values = DMatrix::zeros(d, n);
    for g in 0..d {
        let finite: Vec<f64> = (0..n).filter_map(|s| get(g, s)).collect();
        let mean = if finite.is_empty() {
            return Err(Error::Parse(format!(
                "gene `{}` has no finite values to impute from",
                gene_ids[g]
            )));
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        for s in 0..n {
            values[(g, s)] = match get(g, s) {
                Some(v) => v,
                None => {
                    imputed += 1;
                    mean
                }
            };
        }
    }

    let mut seen = HashSet::new();
    if let Some(dup) = sample_ids.iter().find(|s| !seen.insert(s.as_str())) {
        return Err(Error::Parse(format!("duplicate sample id `{dup}`")));
    }

    let label_map = parse_labels(labels)?;
    if label_map.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} samples",
            label_map.len()
        )));
    }
    let class_names: Vec<String> = match &opts.classes {
        Some(c) => c.clone(),
        None => label_map
            .values()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let mut label_idx = Vec::with_capacity(n);
    for s in &sample_ids {
        let token = label_map
            .get(s)
            .ok_or_else(|| Error::Dimension(format!("no label for sample `{s}`")))?;
        let idx = class_names
            .iter()
            .position(|c| c == token)
            .ok_or_else(|| Error::Parse(format!("unknown label token `{token}` for sample `{s}`")))?;
        label_idx.push(idx);
    }

    let ds = ExpressionDataset::new(values, gene_ids, sample_ids, label_idx, class_names)?;
    let log = IngestLog {
        genes: d,
        samples: n,
        class_counts: ds
            .class_names()
            .iter()
            .cloned()
            .zip(ds.class_counts())
            .collect(),
        delimiter: delim as char,
        missing_policy: opts.missing,
        imputed_cells: imputed,
    };
    Ok((ds, log))
}

fn parse_labels(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .or_else(|| line.split_once(','))
            .ok_or_else(|| Error::Parse(format!("label line {} has no delimiter", i + 1)))?;
        let (id, label) = (id.trim(), label.trim());
        if map.insert(id.to_owned(), label.to_owned()).is_some() {
            return Err(Error::Parse(format!("duplicate sample id `{id}` in labels")));
        }
    }
    Ok(map)
}

/// Subtracts each gene's minimum when it is negative.
///
/// Returns the shifted dataset and the per-gene shift that was applied
/// (zero for rows that were already nonnegative).
pub fn shift_nonnegative(ds: &ExpressionDataset) -> (ExpressionDataset, Vec<f64>) {
    let (values, shifts) = shift_rows_nonnegative(ds.values());
    (ds.with_values(values), shifts)
}

/// Matrix form of [`shift_nonnegative`].
pub fn shift_rows_nonnegative(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut out = m.clone();
    let mut shifts = Vec::with_capacity(m.nrows());
    for g in 0..m.nrows() {
        let min = m.row(g).min();
        if min < 0.0 {
            out.row_mut(g).iter_mut().for_each(|v| *v -= min);
            shifts.push(-min);
        } else {
            shifts.push(0.0);
        }
    }
    (out, shifts)
}

/// Per-gene z-scoring (sample standard deviation); constant genes become 0.
pub fn standardize(ds: &ExpressionDataset) -> ExpressionDataset {
    let mut values = ds.values().clone();
    let n = values.ncols() as f64;
    for g in 0..values.nrows() {
        let mean = values.row(g).sum() / n;
        let var = values.row(g).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = var.sqrt();
        values
            .row_mut(g)
            .iter_mut()
            .for_each(|v| *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 });
    }
    ds.with_values(values)
}

/// A train/test split of sample positions, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    pub fn new(mut train: Vec<usize>, mut test: Vec<usize>) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidArgument("partition with an empty side".into()));
        }
        train.sort_unstable();
        test.sort_unstable();
        let t: HashSet<_> = train.iter().collect();
        if test.iter().any(|i| t.contains(i)) {
            return Err(Error::InvalidArgument("train and test overlap".into()));
        }
        Ok(Self { train, test })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub folds: Vec<Partition>,
    pub seed: u64,
    pub k_folds: usize,
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled with a generator seeded from `seed`; the classes
/// are then laid end to end (ascending class index) and position `i` of that
/// sequence goes to fold `i mod k`. Per-class fold counts therefore differ by
/// at most one, and so do fold sizes. Classes smaller than `k` end up one
/// member per fold.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds sample count {n}")));
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = seed::rng(seed::derive(seed, "stratified_kfold", 0));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut pos = 0usize;
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            members[pos % k].push(i);
            pos += 1;
        }
    }
    let folds = members
        .into_iter()
        .map(|test| {
            let in_test: HashSet<usize> = test.iter().copied().collect();
            let train = (0..n).filter(|i| !in_test.contains(i)).collect();
            Partition::new(train, test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldPlan {
        folds,
        seed,
        k_folds: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (String, String) {
        (
            "gene_id,s1,s2,s3\ng1,1.5,2,3\ng2,-1,0,2\n".to_owned(),
            "s1,A\ns2,A\ns3,B\n".to_owned(),
        )
    }

    #[test]
    fn parses_minimal_csv() {
        let (d, l) = toy();
        let (ds, log) = parse_dataset(&d, &l, &LoadOptions::default()).unwrap();
        assert_eq!((ds.n_genes(), ds.n_samples(), ds.n_classes()), (2, 3, 2));
        assert_eq!(ds.labels(), &[0, 0, 1]);
        assert_eq!(log.class_counts, vec![("A".into(), 2), ("B".into(), 1)]);
        assert_eq!(log.delimiter, ',');
    }

    #[test]
    fn samples_as_rows_is_transposed() {
        let d = "sample\tg1\tg2\ns1\t1\t2\ns2\t3\t4\ns3\t5\t6\n";
        let l = "s1\tx\ns2\ty\ns3\tx\n";
        let opts = LoadOptions {
            orientation: Orientation::SamplesAsRows,
            ..Default::default()
        };
        let (ds, log) = parse_dataset(d, l, &opts).unwrap();
        assert_eq!(log.delimiter, '\t');
        assert_eq!(ds.values().shape(), (2, 3));
        assert_eq!(ds.values()[(1, 2)], 6.0);
        assert_eq!(ds.gene_ids(), &["g1", "g2"]);
    }

    #[test]
    fn empty_file_has_no_data_rows() {
        let err = parse_dataset("", "", &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
        let err = parse_dataset("gene_id,s1\n", "s1,A\n", &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }

    #[test]
    fn unparseable_cell_reports_position() {
        let err = parse_dataset("g,s1,s2\nx,1,abc\n", "s1,A\ns2,B\n", &LoadOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("row 2, column 3"), "{err}");
    }

    #[test]
    fn label_count_mismatch_and_duplicates() {
        let (d, _) = toy();
        assert!(matches!(
            parse_dataset(&d, "s1,A\ns2,B\n", &LoadOptions::default()),
            Err(Error::Dimension(_))
        ));
        let dup = "g,s1,s1\nx,1,2\n";
        assert!(parse_dataset(dup, "s1,A\n", &LoadOptions::default()).is_err());
    }

    #[test]
    fn unknown_label_token_rejected() {
        let (d, l) = toy();
        let opts = LoadOptions {
            classes: Some(vec!["A".into(), "C".into()]),
            ..Default::default()
        };
        let err = parse_dataset(&d, &l, &opts).unwrap_err();
        assert!(err.to_string().contains("unknown label token"));
    }

    #[test]
    fn missing_values_rejected_or_imputed() {
        let d = "g,s1,s2,s3\nx,1,NA,3\n";
        let l = "s1,A\ns2,A\ns3,B\n";
        assert!(parse_dataset(d, l, &LoadOptions::default()).is_err());
        let opts = LoadOptions {
            missing: MissingPolicy::ImputeMean,
            ..Default::default()
        };
        let (ds, log) = parse_dataset(d, l, &opts).unwrap();
        assert_eq!(ds.values()[(0, 1)], 2.0);
        assert_eq!(log.imputed_cells, 1);
    }

    #[test]
    fn shift_examples() {
        let m = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 2.0, 3.0, 5.0, 4.0, -2.0, -2.0, -2.0]);
        let (out, shifts) = shift_rows_nonnegative(&m);
        assert_eq!(out.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 3.0]);
        assert_eq!(out.row(1).iter().copied().collect::<Vec<_>>(), vec![3.0, 5.0, 4.0]);
        assert_eq!(out.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
        assert_eq!(shifts, vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn kfold_two_by_two() {
        let plan = stratified_kfold(&[0, 0, 1, 1], 2, 7).unwrap();
        for f in &plan.folds {
            let mut classes: Vec<usize> = f.test.iter().map(|&i| [0, 0, 1, 1][i]).collect();
            classes.sort();
            assert_eq!(classes, vec![0, 1]);
        }
    }

    #[test]
    fn kfold_rejects_bad_k() {
        assert!(stratified_kfold(&[0, 1, 0, 1], 1, 0).is_err());
        assert!(stratified_kfold(&[0, 1, 0, 1], 5, 0).is_err());
    }

    #[test]
    fn kfold_colon_shape() {
        let labels: Vec<usize> = (0..62).map(|i| usize::from(i >= 40)).collect();
        let plan = stratified_kfold(&labels, 10, 3).unwrap();
        let mut sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![6, 6, 6, 6, 6, 6, 6, 6, 7, 7]);
        for f in &plan.folds {
            let tumor = f.test.iter().filter(|&&i| labels[i] == 0).count();
            let normal = f.test.len() - tumor;
            assert!((3..=5).contains(&tumor));
            assert!((1..=3).contains(&normal));
        }
    }
}
