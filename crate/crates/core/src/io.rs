//! File formats: datasets and index lists as CSV, generator configs as TOML.
//!
//! Dataset CSV has the header `idx,corrupted,y,x0,...,x{d-1}`. Corrupted
//! rows leave the `x` cells empty. Reals are written in the shortest form
//! that parses back to the same `f64`, so `load_csv(save_csv(ds)) == ds`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{CategoricalSpec, DataPoint, Dataset, DensitySpec, GeneratorConfig, P0Means};
use crate::decomposition::BatchDecomposition;
use crate::error::{Error, ParseIssue, Result};
use crate::subsets::{SubsetMethod, SubsetResult};

const FIXED_COLUMNS: [&str; 3] = ["idx", "corrupted", "y"];

pub fn write_dataset<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..ds.dim()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for p in ds.points() {
        row.clear();
        row.push(p.index.to_string());
        row.push(u8::from(p.corrupted()).to_string());
        row.push(p.y.to_string());
        match &p.x {
            Some(x) => row.extend(x.iter().map(|c| format!("{c:?}"))),
            None => row.extend(std::iter::repeat_n(String::new(), ds.dim())),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_dataset(ds, std::io::BufWriter::new(file))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    read_dataset(fs::File::open(path)?, path, None)
}

/// Like [`load_csv`], additionally rejecting category ids `>= cat_size`.
pub fn load_csv_checked(path: impl AsRef<Path>, cat_size: usize) -> Result<Dataset> {
    let path = path.as_ref();
    read_dataset(fs::File::open(path)?, path, Some(cat_size))
}

/// Parses dataset CSV from `input`; `path` only labels errors. Rows are
/// numbered as file lines, the header being line 1.
pub fn read_dataset<R: Read>(input: R, path: &Path, cat_size: Option<usize>) -> Result<Dataset> {
    let fail = |row: u64, issue: ParseIssue| Error::Parse {
        path: path.to_path_buf(),
        row,
        issue,
    };
    let malformed = |field: &str, detail: String| ParseIssue::Malformed {
        field: field.to_string(),
        detail,
    };
    let mut r = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(fail(1, ParseIssue::Other("empty file".into()))),
    };
    let width = header.len();
    let fixed_ok = header.iter().take(3).eq(FIXED_COLUMNS.iter().copied());
    let coords_ok = header.iter().skip(3).enumerate().all(|(j, h)| h == format!("x{j}"));
    if width < 4 || !fixed_ok || !coords_ok {
        return Err(fail(
            1,
            ParseIssue::Other("header must be idx,corrupted,y,x0,...,x{d-1} with d >= 1".into()),
        ));
    }
    let dim = width - 3;
    let mut points = Vec::new();
    for rec in records {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(fail(row, ParseIssue::WrongWidth { expected: width, found: rec.len() }));
        }
        let idx: usize = rec[0]
            .parse()
            .map_err(|e| fail(row, malformed("idx", format!("{e}"))))?;
        if idx != points.len() {
            return Err(fail(
                row,
                malformed("idx", format!("expected {}, found {idx}", points.len())),
            ));
        }
        let corrupted = match &rec[1] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => {
                return Err(fail(row, malformed("corrupted", format!("`{other}` is not 0 or 1"))))
            }
        };
        let y: u64 = rec[2]
            .parse()
            .map_err(|e| fail(row, malformed("y", format!("{e}"))))?;
        if let Some(cat_size) = cat_size {
            if y >= cat_size as u64 {
                return Err(fail(row, ParseIssue::CategoryOutOfRange { y, cat_size }));
            }
        }
        let y = u32::try_from(y).map_err(|_| fail(row, malformed("y", format!("{y} exceeds u32"))))?;
        let x = if corrupted {
            if let Some(j) = (0..dim).find(|&j| !rec[3 + j].is_empty()) {
                return Err(fail(row, malformed(&format!("x{j}"), "must be empty for a corrupted row".into())));
            }
            None
        } else {
            let mut x = Vec::with_capacity(dim);
            for j in 0..dim {
                let cell = &rec[3 + j];
                let c: f64 = cell
                    .parse()
                    .map_err(|_| fail(row, malformed(&format!("x{j}"), format!("`{cell}` is not a real"))))?;
                if !c.is_finite() {
                    return Err(fail(row, malformed(&format!("x{j}"), "not finite".into())));
                }
                x.push(c);
            }
            Some(x)
        };
        points.push(DataPoint { index: idx, x, y });
    }
    if points.is_empty() {
        return Err(fail(1, ParseIssue::Other("no data rows".into())));
    }
    Dataset::new(dim, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub d: usize,
    pub r_n: f64,
    pub p0: f64,
    #[serde(default)]
    pub p0_means: P0Means,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    pub seed: u64,
}

/// On-disk layout of a [`GeneratorConfig`]:
///
/// ```toml
/// [model]
/// n = 1000
/// d = 2
/// r_n = 0.05
/// p0 = 0.1
/// p0_means = "prob_corrupted"
///
/// [density]
/// kind = "uniform-unit-cube"
///
/// [categorical]
/// kind = "uniform"
/// cat_size = 4
///
/// [rng]
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub density: DensitySpec,
    pub categorical: CategoricalSpec,
    pub rng: RngSection,
}

impl From<&GeneratorConfig> for ConfigFile {
    fn from(c: &GeneratorConfig) -> Self {
        ConfigFile {
            model: ModelSection {
                n: c.n,
                d: c.d,
                r_n: c.r_n,
                p0: c.p0,
                p0_means: c.p0_means,
            },
            density: c.density.clone(),
            categorical: c.categorical.clone(),
            rng: RngSection { seed: c.seed },
        }
    }
}

impl From<ConfigFile> for GeneratorConfig {
    fn from(f: ConfigFile) -> Self {
        GeneratorConfig {
            n: f.model.n,
            d: f.model.d,
            r_n: f.model.r_n,
            p0: f.model.p0,
            p0_means: f.model.p0_means,
            density: f.density,
            categorical: f.categorical,
            seed: f.rng.seed,
        }
    }
}

pub fn config_to_toml(cfg: &GeneratorConfig) -> Result<String> {
    toml::to_string(&ConfigFile::from(cfg)).map_err(|e| Error::invalid(e.to_string()))
}

/// Parses and validates a generator config.
pub fn config_from_toml(text: &str) -> Result<GeneratorConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
    let cfg = GeneratorConfig::from(file);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<GeneratorConfig> {
    let path = path.as_ref();
    config_from_toml(&fs::read_to_string(path)?)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn save_config(cfg: &GeneratorConfig, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, config_to_toml(cfg)?)?;
    Ok(())
}

/// Writes `idx,batch`, one row per point in index order.
pub fn write_decomposition<W: Write>(dec: &BatchDecomposition, n: usize, out: W) -> Result<()> {
    let labels = dec.labels(n)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["idx", "batch"])?;
    for (i, b) in labels.iter().enumerate() {
        w.write_record([i.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_decomposition(dec: &BatchDecomposition, n: usize, path: impl AsRef<Path>) -> Result<()> {
    write_decomposition(dec, n, std::io::BufWriter::new(fs::File::create(path)?))
}

/// Reads an `idx,batch` file. Every index `0..n` must appear exactly once.
pub fn load_decomposition(path: impl AsRef<Path>, k: usize) -> Result<BatchDecomposition> {
    let path = path.as_ref();
    let rows = read_int_rows(path, &["idx", "batch"])?;
    let n = rows.len();
    let mut labels = vec![None; n];
    for (row, v) in &rows {
        let (i, b) = (v[0], v[1]);
        let slot = labels.get_mut(i).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            row: *row,
            issue: ParseIssue::Malformed {
                field: "idx".into(),
                detail: format!("{i} out of range for {n} rows"),
            },
        })?;
        if slot.replace(b).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: *row,
                issue: ParseIssue::Malformed {
                    field: "idx".into(),
                    detail: format!("{i} listed twice"),
                },
            });
        }
    }
    let labels: Vec<usize> = labels.into_iter().map(|l| l.expect("all rows filled")).collect();
    Ok(BatchDecomposition::from_labels(k, &labels))
}

/// Writes a subset as `# method=... k=... size=...` followed by an `idx`
/// column.
pub fn write_subset<W: Write>(s: &SubsetResult, mut out: W) -> Result<()> {
    writeln!(out, "# method={} k={} size={}", s.method.name(), s.k, s.size())?;
    writeln!(out, "idx")?;
    for i in &s.indices {
        writeln!(out, "{i}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_subset(s: &SubsetResult, path: impl AsRef<Path>) -> Result<()> {
    write_subset(s, std::io::BufWriter::new(fs::File::create(path)?))
}

pub fn load_subset(path: impl AsRef<Path>) -> Result<SubsetResult> {
    let path = path.as_ref();
    let fail = |row: u64, issue: ParseIssue| Error::Parse {
        path: path.to_path_buf(),
        row,
        issue,
    };
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let mut method = None;
    let mut k = None;
    let mut size = None;
    for kv in first.strip_prefix('#').unwrap_or("").split_whitespace() {
        match kv.split_once('=') {
            Some(("method", m)) => method = Some(m.to_string()),
            Some(("k", v)) => k = v.parse::<usize>().ok(),
            Some(("size", v)) => size = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let method = match method.as_deref() {
        Some("greedy-direct") => SubsetMethod::GreedyDirect,
        Some("greedy-kway") => SubsetMethod::GreedyKway,
        Some("exact") => SubsetMethod::Exact,
        _ => return Err(fail(1, ParseIssue::Other("expected `# method=<name> k=<k> size=<size>`".into()))),
    };
    let (k, size) = match (k, size) {
        (Some(k), Some(size)) if k >= 1 => (k, size),
        _ => return Err(fail(1, ParseIssue::Other("missing or invalid k/size".into()))),
    };
    if lines.next().transpose()?.as_deref() != Some("idx") {
        return Err(fail(2, ParseIssue::Other("expected header `idx`".into())));
    }
    let mut indices = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let v = line.trim().parse::<usize>().map_err(|e| {
            fail(i as u64 + 3, ParseIssue::Malformed { field: "idx".into(), detail: e.to_string() })
        })?;
        indices.push(v);
    }
    if indices.len() != size {
        return Err(fail(1, ParseIssue::Other(format!("size={size} but {} indices listed", indices.len()))));
    }
    indices.sort_unstable();
    Ok(SubsetResult { k, indices, method })
}

/// Writes the edge list `u,v` with `u < v`.
pub fn write_edges<W: Write>(edges: impl IntoIterator<Item = (usize, usize)>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["u", "v"])?;
    for (u, v) in edges {
        w.write_record([u.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_int_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<usize>)>> {
    let fail = |row: u64, issue: ParseIssue| Error::Parse {
        path: PathBuf::from(path),
        row,
        issue,
    };
    let mut r = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_path(path)?;
    let mut records = r.records();
    match records.next().transpose()? {
        Some(h) if h.iter().eq(header.iter().copied()) => {}
        _ => return Err(fail(1, ParseIssue::Other(format!("expected header `{}`", header.join(","))))),
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(fail(row, ParseIssue::WrongWidth { expected: header.len(), found: rec.len() }));
        }
        let mut vals = Vec::with_capacity(header.len());
        for (field, cell) in header.iter().zip(rec.iter()) {
            vals.push(cell.parse::<usize>().map_err(|e| {
                fail(row, ParseIssue::Malformed { field: field.to_string(), detail: e.to_string() })
            })?);
        }
        rows.push((row, vals));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate;

    fn roundtrip(ds: &Dataset) -> Dataset {
        let mut buf = Vec::new();
        write_dataset(ds, &mut buf).unwrap();
        read_dataset(buf.as_slice(), Path::new("mem"), None).unwrap()
    }

    fn parse_err(text: &str, cat_size: Option<usize>) -> (u64, ParseIssue) {
        match read_dataset(text.as_bytes(), Path::new("mem"), cat_size) {
            Err(Error::Parse { row, issue, .. }) => (row, issue),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn generated_dataset_roundtrips() {
        let cfg = GeneratorConfig::uniform(100, 3, 0.1, 4, 9).with_corruption(0.3);
        let ds = generate(&cfg).unwrap();
        assert_eq!(roundtrip(&ds), ds);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.csv");
        save_csv(&ds, &p).unwrap();
        assert_eq!(load_csv(&p).unwrap(), ds);
        assert_eq!(load_csv_checked(&p, 4).unwrap(), ds);
    }

    #[test]
    fn awkward_reals_roundtrip() {
        let xs = [0.1 + 0.2, 1e-300, f64::MIN_POSITIVE / 3.0, 0.9999999999999999, -0.0];
        let ds = Dataset::from_parts(1, xs.iter().map(|&x| (Some(vec![x]), 0))).unwrap();
        let back = roundtrip(&ds);
        for (a, b) in ds.points().iter().zip(back.points()) {
            assert_eq!(a.x.as_ref().unwrap()[0].to_bits(), b.x.as_ref().unwrap()[0].to_bits());
        }
    }

    #[test]
    fn corrupted_row_has_empty_cells() {
        let ds = Dataset::from_parts(2, vec![(None, 1), (Some(vec![0.5, 0.25]), 0)]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "idx,corrupted,y,x0,x1\n0,1,1,,\n1,0,0,0.5,0.25\n");
        let ds = read_dataset("idx,corrupted,y,x0\n0,1,2,\n".as_bytes(), Path::new("m"), None).unwrap();
        assert!(ds.is_corrupted(0));
    }

    #[test]
    fn errors_name_the_row() {
        let (row, issue) = parse_err("idx,corrupted,y,x0,x1\n0,0,0,0.1,0.2\n1,0,0,0.3\n", None);
        assert_eq!(row, 3);
        assert_eq!(issue, ParseIssue::WrongWidth { expected: 5, found: 4 });
        let (row, issue) = parse_err("idx,corrupted,y,x0\n0,0,0,abc\n", None);
        assert_eq!(row, 2);
        assert!(matches!(issue, ParseIssue::Malformed { field, .. } if field == "x0"));
        let (row, issue) = parse_err("idx,corrupted,y,x0\n0,0,0,0.1\n1,0,7,0.2\n", Some(4));
        assert_eq!(row, 3);
        assert_eq!(issue, ParseIssue::CategoryOutOfRange { y: 7, cat_size: 4 });
        let (_, issue) = parse_err("idx,corrupted,y,x0\n0,2,0,0.1\n", None);
        assert!(matches!(issue, ParseIssue::Malformed { field, .. } if field == "corrupted"));
        let (_, issue) = parse_err("idx,corrupted,y,x0\n0,1,0,0.1\n", None);
        assert!(matches!(issue, ParseIssue::Malformed { field, .. } if field == "x0"));
        let (_, issue) = parse_err("idx,corrupted,y,x0\n1,0,0,0.1\n", None);
        assert!(matches!(issue, ParseIssue::Malformed { field, .. } if field == "idx"));
        let (row, _) = parse_err("idx,y,x0\n", None);
        assert_eq!(row, 1);
        let (_, issue) = parse_err("idx,corrupted,y,x0\n", None);
        assert!(matches!(issue, ParseIssue::Other(_)));
    }

    #[test]
    fn config_roundtrip() {
        let mut cfg = GeneratorConfig::uniform(1000, 2, 0.05, 4, 7).with_corruption(0.1);
        assert_eq!(config_from_toml(&config_to_toml(&cfg).unwrap()).unwrap(), cfg);
        cfg.density = DensitySpec::TwoLevel { corner: vec![0.0, 0.0], side: 0.5, hot_mass: 0.5 };
        cfg.categorical = CategoricalSpec::PowerLaw { cat_size: 5, exponent: 1.5 };
        let text = config_to_toml(&cfg).unwrap();
        assert!(text.contains("[model]") && text.contains("[rng]"));
        assert_eq!(config_from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn config_text_is_readable() {
        let text = "[model]\nn = 50\nd = 1\nr_n = 0.1\np0 = 0.0\n\n[density]\nkind = \"uniform-unit-cube\"\n\n\
                    [categorical]\nkind = \"two-level\"\ncat_size = 3\np_up = 0.5\n\n[rng]\nseed = 3\n";
        let cfg = config_from_toml(text).unwrap();
        assert_eq!(cfg.p0_means, P0Means::ProbCorrupted);
        assert_eq!(cfg.categorical.cat_size(), 3);
        assert!(config_from_toml(&text.replace("n = 50", "n = 0")).is_err());
        assert!(config_from_toml(&text.replace("seed = 3", "seed = 3\nextra = 1")).is_err());
    }

    #[test]
    fn decomposition_and_subset_files() {
        let dir = tempfile::tempdir().unwrap();
        let dec = BatchDecomposition::from_labels(2, &[0, 1, 0, 2, 1]);
        let p = dir.path().join("dec.csv");
        save_decomposition(&dec, 5, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "idx,batch\n0,0\n1,1\n2,0\n3,2\n4,1\n");
        assert_eq!(load_decomposition(&p, 2).unwrap(), dec);
        fs::write(&p, "idx,batch\n0,0\n0,1\n").unwrap();
        assert!(matches!(load_decomposition(&p, 2), Err(Error::Parse { row: 3, .. })));

        let s = SubsetResult { k: 2, indices: vec![1, 4, 9], method: SubsetMethod::GreedyKway };
        let p = dir.path().join("sub.csv");
        save_subset(&s, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "# method=greedy-kway k=2 size=3\nidx\n1\n4\n9\n");
        assert_eq!(load_subset(&p).unwrap(), s);
        fs::write(&p, "# method=exact k=1 size=2\nidx\n3\n").unwrap();
        assert!(load_subset(&p).is_err());
    }

    #[test]
    fn edge_list() {
        let mut buf = Vec::new();
        write_edges(vec![(0, 2), (1, 3)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u,v\n0,2\n1,3\n");
    }
}
