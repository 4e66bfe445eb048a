//! Matrix and result file handling.
//!
//! The on-disk matrix format is TSV: a header line whose first field is
//! empty followed by sample ids, then one line per feature holding the
//! feature id and one value per sample. Matrix values are written with
//! `f64`'s shortest round-trip representation so that write-then-read
//! reproduces the input exactly; derived numbers in other files are
//! rendered with six significant digits.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bicluster::{Bicluster, BiclusterDirection};
use crate::error::{Result, UnpastError};
use crate::evaluate::GroundTruth;

/// Dense features-by-samples matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    feature_ids: Vec<String>,
    sample_ids: Vec<String>,
    values: Vec<f64>,
}

fn check_ids(ids: &[String], kind: &str) -> Result<()> {
    if ids.is_empty() {
        return Err(UnpastError::invalid(format!("no {kind} ids")));
    }
    let mut seen = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(UnpastError::invalid(format!("empty {kind} id at position {i}")));
        }
        if id.chars().any(char::is_whitespace) {
            return Err(UnpastError::invalid(format!("{kind} id {id:?} contains whitespace")));
        }
        if id.starts_with('-') {
            // A leading dash is reserved for the sign marker in bicluster files.
            return Err(UnpastError::invalid(format!("{kind} id {id:?} starts with '-'")));
        }
        if let Some(prev) = seen.insert(id.as_str(), i) {
            return Err(UnpastError::invalid(format!(
                "duplicate {kind} id {id:?} at positions {prev} and {i}"
            )));
        }
    }
    Ok(())
}

impl ExpressionMatrix {
    pub fn new(feature_ids: Vec<String>, sample_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        check_ids(&feature_ids, "feature")?;
        check_ids(&sample_ids, "sample")?;
        if values.len() != feature_ids.len() * sample_ids.len() {
            return Err(UnpastError::invalid(format!(
                "value count {} does not match {} features x {} samples",
                values.len(),
                feature_ids.len(),
                sample_ids.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (f, s) = (pos / sample_ids.len(), pos % sample_ids.len());
            return Err(UnpastError::invalid(format!(
                "non-finite value for feature {:?}, sample {:?}",
                feature_ids[f], sample_ids[s]
            )));
        }
        Ok(ExpressionMatrix { feature_ids, sample_ids, values })
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, feature: usize) -> &[f64] {
        let n = self.n_samples();
        &self.values[feature * n..(feature + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_index_map(&self) -> HashMap<&str, usize> {
        self.feature_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }

    pub fn sample_index_map(&self) -> HashMap<&str, usize> {
        self.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}

/// A matrix whose rows have been z-scored; see [`zscore_rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    m: ExpressionMatrix,
}

impl StandardizedMatrix {
    pub fn matrix(&self) -> &ExpressionMatrix {
        &self.m
    }

    pub fn n_features(&self) -> usize {
        self.m.n_features()
    }

    pub fn n_samples(&self) -> usize {
        self.m.n_samples()
    }

    pub fn feature_ids(&self) -> &[String] {
        self.m.feature_ids()
    }

    pub fn sample_ids(&self) -> &[String] {
        self.m.sample_ids()
    }

    pub fn row(&self, feature: usize) -> &[f64] {
        self.m.row(feature)
    }
}

/// Population mean and standard deviation (denominator n).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

/// Centers and scales each row to mean 0 and population standard deviation 1.
/// Constant rows become all zeros.
pub fn zscore_rows(m: &ExpressionMatrix) -> StandardizedMatrix {
    let ns = m.n_samples();
    let mut values = Vec::with_capacity(m.values.len());
    for f in 0..m.n_features() {
        let row = m.row(f);
        let (mean, std) = mean_std(row);
        if std == 0.0 {
            values.extend(std::iter::repeat(0.0).take(ns));
        } else {
            values.extend(row.iter().map(|v| (v - mean) / std));
        }
    }
    StandardizedMatrix {
        m: ExpressionMatrix {
            feature_ids: m.feature_ids.clone(),
            sample_ids: m.sample_ids.clone(),
            values,
        },
    }
}

/// Renders a number with six significant digits, trimming trailing zeros.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        let s = format!("{x:.5e}");
        // Trim trailing zeros in the mantissa: 1.200000e-7 -> 1.2e-7.
        if let Some(epos) = s.find('e') {
            let (mant, exp) = s.split_at(epos);
            let mant = mant.trim_end_matches('0').trim_end_matches('.');
            return format!("{mant}{exp}");
        }
        return s;
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| UnpastError::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);

    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| UnpastError::io(path, e))?;
    if header.is_empty() {
        return Err(UnpastError::parse(path, 1, "empty file"));
    }
    let header = header.trim_end_matches(['\n', '\r']);
    let mut fields = header.split('\t');
    fields.next(); // corner cell; content ignored, written empty
    let sample_ids: Vec<String> = fields.map(str::to_string).collect();
    if sample_ids.is_empty() {
        return Err(UnpastError::parse(path, 1, "header has no sample ids"));
    }
    let ns = sample_ids.len();

    let mut feature_ids = Vec::new();
    let mut values = Vec::new();
    let mut line = String::new();
    let mut lineno = 1usize;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| UnpastError::io(path, e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let id = fields.next().unwrap_or("");
        feature_ids.push(id.to_string());
        let before = values.len();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                UnpastError::parse(path, lineno, format!("bad number {field:?}"))
            })?;
            values.push(v);
        }
        let got = values.len() - before;
        if got != ns {
            return Err(UnpastError::parse(
                path,
                lineno,
                format!("expected {ns} values, found {got}"),
            ));
        }
    }
    ExpressionMatrix::new(feature_ids, sample_ids, values)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &ExpressionMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| UnpastError::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let mut inner = || -> std::io::Result<()> {
        for id in m.sample_ids() {
            write!(w, "\t{id}")?;
        }
        writeln!(w)?;
        for f in 0..m.n_features() {
            write!(w, "{}", m.feature_ids[f])?;
            for v in m.row(f) {
                write!(w, "\t{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    inner().map_err(|e| UnpastError::io(path, e))
}

fn direction_str(d: BiclusterDirection) -> &'static str {
    match d {
        BiclusterDirection::Up => "up",
        BiclusterDirection::Down => "down",
        BiclusterDirection::Mixed => "mixed",
    }
}

/// Writes biclusters as TSV. Feature lists carry a `-` prefix on members
/// that are under-expressed inside a mixed bicluster.
pub fn write_biclusters(
    path: impl AsRef<Path>,
    biclusters: &[Bicluster],
    feature_ids: &[String],
    sample_ids: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| UnpastError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut inner = || -> std::io::Result<()> {
        writeln!(w, "id\tsnr\tdirection\tn_features\tn_samples\tfeatures\tsamples")?;
        for (i, b) in biclusters.iter().enumerate() {
            write!(w, "{i}\t{}\t{}\t{}\t{}\t", sig6(b.snr), direction_str(b.direction), b.features.len(), b.samples.len())?;
            for (j, (&f, &sign)) in b.features.iter().zip(&b.signs).enumerate() {
                if j > 0 {
                    write!(w, " ")?;
                }
                if sign < 0 {
                    write!(w, "-")?;
                }
                write!(w, "{}", feature_ids[f])?;
            }
            write!(w, "\t")?;
            for (j, &s) in b.samples.iter().enumerate() {
                if j > 0 {
                    write!(w, " ")?;
                }
                write!(w, "{}", sample_ids[s as usize])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    inner().map_err(|e| UnpastError::io(path, e))
}

pub fn read_biclusters(path: impl AsRef<Path>, m: &ExpressionMatrix) -> Result<Vec<Bicluster>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| UnpastError::io(path, e))?;
    let reader = BufReader::new(file);
    let fmap = m.feature_index_map();
    let smap = m.sample_index_map();

    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| UnpastError::io(path, e))?;
        let lineno = lineno + 1;
        if lineno == 1 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(UnpastError::parse(path, lineno, format!("expected 7 columns, found {}", fields.len())));
        }
        let snr: f64 = fields[1]
            .parse()
            .map_err(|_| UnpastError::parse(path, lineno, format!("bad snr {:?}", fields[1])))?;
        let direction = match fields[2] {
            "up" => BiclusterDirection::Up,
            "down" => BiclusterDirection::Down,
            "mixed" => BiclusterDirection::Mixed,
            other => {
                return Err(UnpastError::parse(path, lineno, format!("bad direction {other:?}")));
            }
        };
        let mut features = Vec::new();
        let mut signs = Vec::new();
        for tok in fields[5].split(' ').filter(|t| !t.is_empty()) {
            let (sign, id) = match tok.strip_prefix('-') {
                Some(rest) => (-1i8, rest),
                None => (1i8, tok),
            };
            let &idx = fmap
                .get(id)
                .ok_or_else(|| UnpastError::parse(path, lineno, format!("unknown feature id {id:?}")))?;
            features.push(idx);
            signs.push(sign);
        }
        let mut samples = Vec::new();
        for tok in fields[6].split(' ').filter(|t| !t.is_empty()) {
            let &idx = smap
                .get(tok)
                .ok_or_else(|| UnpastError::parse(path, lineno, format!("unknown sample id {tok:?}")))?;
            samples.push(idx as u32);
        }
        if features.is_empty() || samples.is_empty() {
            return Err(UnpastError::parse(path, lineno, "empty feature or sample list"));
        }
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by_key(|&i| features[i]);
        let features_sorted: Vec<usize> = order.iter().map(|&i| features[i]).collect();
        let signs_sorted: Vec<i8> = order.iter().map(|&i| signs[i]).collect();
        if features_sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(UnpastError::parse(path, lineno, "duplicate feature in bicluster"));
        }
        samples.sort_unstable();
        if samples.windows(2).any(|w| w[0] == w[1]) {
            return Err(UnpastError::parse(path, lineno, "duplicate sample in bicluster"));
        }
        out.push(Bicluster {
            features: features_sorted,
            signs: signs_sorted,
            samples,
            direction,
            snr,
            feature_stats: None,
        });
    }
    Ok(out)
}

/// Ground truth file: one line per cluster, `name<TAB>id id id ...`.
pub fn read_ground_truth(path: impl AsRef<Path>, m: &ExpressionMatrix) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| UnpastError::io(path, e))?;
    let reader = BufReader::new(file);
    let smap = m.sample_index_map();

    let mut names = Vec::new();
    let mut sets = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| UnpastError::io(path, e))?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (name, rest) = line
            .split_once('\t')
            .ok_or_else(|| UnpastError::parse(path, lineno, "expected name<TAB>samples"))?;
        let mut set = Vec::new();
        for tok in rest.split(' ').filter(|t| !t.is_empty()) {
            let &idx = smap
                .get(tok)
                .ok_or_else(|| UnpastError::parse(path, lineno, format!("unknown sample id {tok:?}")))?;
            set.push(idx as u32);
        }
        if set.is_empty() {
            return Err(UnpastError::parse(path, lineno, format!("cluster {name:?} has no samples")));
        }
        set.sort_unstable();
        set.dedup();
        names.push(name.to_string());
        sets.push(set);
    }
    if names.is_empty() {
        return Err(UnpastError::parse(path, 1, "no clusters"));
    }
    GroundTruth::new(names, sets, m.n_samples())
}

pub fn write_ground_truth(path: impl AsRef<Path>, truth: &GroundTruth, sample_ids: &[String]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| UnpastError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut inner = || -> std::io::Result<()> {
        for (name, set) in truth.names().iter().zip(truth.sets()) {
            write!(w, "{name}\t")?;
            for (j, &s) in set.iter().enumerate() {
                if j > 0 {
                    write!(w, " ")?;
                }
                write!(w, "{}", sample_ids[s as usize])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    inner().map_err(|e| UnpastError::io(path, e))
}
