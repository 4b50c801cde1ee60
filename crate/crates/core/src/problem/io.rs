//! Triplet files (`i j value`, 1-based, `#` comments) and the key-value
//! metadata file written next to them.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::ObservedMatrix;
use crate::linalg::LinalgError;

pub const TRIPLETS_FILE: &str = "triplets.txt";
pub const META_FILE: &str = "meta.txt";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate coordinate ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("line {line}: index ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    OutOfRange {
        line: usize,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for DataError {
    fn from(e: LinalgError) -> Self {
        match e {
            // report in the file's 1-based convention
            LinalgError::DuplicateCoordinate { row, col } => DataError::Duplicate { row: row + 1, col: col + 1 },
            LinalgError::OutOfBounds { row, col, nrows, ncols } => {
                DataError::OutOfRange { line: 0, row: row + 1, col: col + 1, nrows, ncols }
            }
            other => DataError::Linalg(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Parses triplets. Dimensions default to the largest indices seen.
pub fn read_triplets<R: BufRead>(reader: R, dims: Option<(usize, usize)>) -> Result<ObservedMatrix, DataError> {
    let mut triplets = Vec::new();
    let mut lines_of = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DataError::Parse { line: lineno, message: e.to_string() })?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(DataError::Parse { line: lineno, message: format!("expected `i j value`, found {} fields", fields.len()) });
        }
        let index = |s: &str, what: &str| -> Result<usize, DataError> {
            let v: usize = s.parse().map_err(|_| DataError::Parse { line: lineno, message: format!("invalid {what} index `{s}`") })?;
            if v == 0 {
                return Err(DataError::Parse { line: lineno, message: format!("{what} index must be 1-based") });
            }
            Ok(v - 1)
        };
        let i = index(fields[0], "row")?;
        let j = index(fields[1], "column")?;
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| DataError::Parse { line: lineno, message: format!("invalid value `{}`", fields[2]) })?;
        if !value.is_finite() {
            return Err(DataError::Parse { line: lineno, message: format!("non-finite value `{}`", fields[2]) });
        }
        triplets.push((i, j, value));
        lines_of.push(lineno);
    }
    let (nrows, ncols) = match dims {
        Some(d) => {
            for (t, &(i, j, _)) in triplets.iter().enumerate() {
                if i >= d.0 || j >= d.1 {
                    return Err(DataError::OutOfRange { line: lines_of[t], row: i + 1, col: j + 1, nrows: d.0, ncols: d.1 });
                }
            }
            d
        }
        None => triplets.iter().fold((0, 0), |(m, n), &(i, j, _)| (m.max(i + 1), n.max(j + 1))),
    };
    ObservedMatrix::from_triplets(nrows, ncols, triplets)
}

pub fn load_triplets(path: &Path, dims: Option<(usize, usize)>) -> Result<ObservedMatrix, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_triplets(BufReader::new(file), dims)
}

/// Writes 1-based triplets; values use the shortest exact decimal form.
pub fn write_triplets<W: Write>(mut writer: W, observed: &ObservedMatrix) -> std::io::Result<()> {
    writeln!(writer, "# {} {} {}", observed.nrows(), observed.ncols(), observed.nnz())?;
    for (i, j, v) in observed.matrix().iter() {
        writeln!(writer, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMetadata {
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    pub delta: Option<f64>,
    pub scale: f64,
    pub seed: Option<u64>,
}

impl InstanceMetadata {
    pub fn describe(observed: &ObservedMatrix, delta: Option<f64>, seed: Option<u64>) -> Self {
        let sq: f64 = observed.values().iter().map(|x| x * x).sum();
        Self { m: observed.nrows(), n: observed.ncols(), nnz: observed.nnz(), delta, scale: 1.0 / sq, seed }
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".to_string());
        format!(
            "m={}\nn={}\nomega={}\ndelta={}\nscale={}\nseed={}\n",
            self.m,
            self.n,
            self.nnz,
            opt(self.delta.map(|d| d.to_string())),
            self.scale,
            opt(self.seed.map(|s| s.to_string()))
        )
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let map = crate::kv::parse_flat(text).map_err(DataError::Metadata)?;
        let get = |k: &str| map.get(k).ok_or_else(|| DataError::Metadata(format!("missing key `{k}`")));
        let num = |k: &str| -> Result<usize, DataError> {
            get(k)?.parse().map_err(|_| DataError::Metadata(format!("key `{k}` is not an integer")))
        };
        let optional = |k: &str| map.get(k).filter(|v| v.as_str() != "none");
        Ok(Self {
            m: num("m")?,
            n: num("n")?,
            nnz: num("omega")?,
            delta: optional("delta")
                .map(|v| v.parse().map_err(|_| DataError::Metadata("key `delta` is not a number".into())))
                .transpose()?,
            scale: get("scale")?.parse().map_err(|_| DataError::Metadata("key `scale` is not a number".into()))?,
            seed: optional("seed")
                .map(|v| v.parse().map_err(|_| DataError::Metadata("key `seed` is not an integer".into())))
                .transpose()?,
        })
    }
}

/// Writes `triplets.txt` and `meta.txt` into `dir`, creating it if needed.
pub fn save_instance_dir(dir: &Path, observed: &ObservedMatrix, meta: &InstanceMetadata) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tpath = dir.join(TRIPLETS_FILE);
    let file = File::create(&tpath).map_err(io_err(&tpath))?;
    let mut w = BufWriter::new(file);
    write_triplets(&mut w, observed).map_err(io_err(&tpath))?;
    w.flush().map_err(io_err(&tpath))?;
    let mpath = dir.join(META_FILE);
    fs::write(&mpath, meta.to_text()).map_err(io_err(&mpath))?;
    Ok(())
}

pub fn load_instance_dir(dir: &Path) -> Result<(ObservedMatrix, InstanceMetadata), DataError> {
    let mpath = dir.join(META_FILE);
    let meta = InstanceMetadata::parse(&fs::read_to_string(&mpath).map_err(io_err(&mpath))?)?;
    let observed = load_triplets(&dir.join(TRIPLETS_FILE), Some((meta.m, meta.n)))?;
    if observed.nnz() != meta.nnz {
        return Err(DataError::Metadata(format!("metadata lists {} entries, file has {}", meta.nnz, observed.nnz())));
    }
    Ok((observed, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_lines_three_entries() {
        let text = "# ratings\n1 1 4.5\n2 3 -1\n\n3 2 0.25\n";
        let obs = read_triplets(text.as_bytes(), None).unwrap();
        assert_eq!((obs.nrows(), obs.ncols(), obs.nnz()), (3, 3, 3));
        assert_eq!(obs.values(), &[4.5, -1.0, 0.25]);
    }

    #[test]
    fn duplicate_names_coordinate() {
        let err = read_triplets("1 2 1.0\n1 2 3.0\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, DataError::Duplicate { row: 1, col: 2 }), "{err}");
        assert!(err.to_string().contains("(1, 2)"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read_triplets("1 1 1\n2 x 3\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err}");
        let err = read_triplets("0 1 1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
    }

    #[test]
    fn out_of_range_against_declared_dims() {
        let err = read_triplets("1 1 1\n3 1 2\n".as_bytes(), Some((2, 2))).unwrap_err();
        assert!(matches!(err, DataError::OutOfRange { line: 2, row: 3, .. }), "{err}");
    }

    #[test]
    fn metadata_round_trip() {
        let meta = InstanceMetadata { m: 200, n: 400, nnz: 8012, delta: Some(3.75), scale: 0.1234567890123, seed: Some(7) };
        assert_eq!(InstanceMetadata::parse(&meta.to_text()).unwrap(), meta);
        let bare = InstanceMetadata { delta: None, seed: None, ..meta };
        assert_eq!(InstanceMetadata::parse(&bare.to_text()).unwrap(), bare);
    }
}
