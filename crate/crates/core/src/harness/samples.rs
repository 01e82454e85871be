//! Plain-text sample files: a `# dim=<d> count=<M> seed=<s>` header and one
//! whitespace-separated row per sample, floats written as shortest
//! round-trip decimals so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub dim: usize,
    pub seed: u64,
    /// Row-major `count × dim`.
    pub samples: Vec<f64>,
}

impl SampleSet {
    pub fn count(&self) -> usize {
        self.samples.len() / self.dim.max(1)
    }
}

pub fn format_samples(set: &SampleSet) -> String {
    let mut out = format!("# dim={} count={} seed={}\n", set.dim, set.count(), set.seed);
    for row in set.samples.chunks(set.dim.max(1)) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn persist_samples(path: &Path, set: &SampleSet) -> Result<()> {
    if set.dim == 0 || !set.samples.len().is_multiple_of(set.dim) {
        return Err(Error::param("dim", "sample array is not a multiple of the dimension"));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, format_samples(set))?;
    Ok(())
}

pub fn parse_samples(text: &str, path: &Path) -> Result<SampleSet> {
    let err = |line: usize, field: &str, detail: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        detail,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "header", "file is empty".into()))?;
    let fields = header
        .strip_prefix('#')
        .ok_or_else(|| err(1, "header", "expected `# dim=<d> count=<M> seed=<s>`".into()))?;
    let (mut dim, mut count, mut seed) = (None, None, None);
    for kv in fields.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| err(1, "header", format!("`{kv}` is not key=value")))?;
        let bad = |e: std::num::ParseIntError| err(1, k, format!("`{v}`: {e}"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(bad)?),
            "count" => count = Some(v.parse::<usize>().map_err(bad)?),
            "seed" => seed = Some(v.parse::<u64>().map_err(bad)?),
            _ => return Err(err(1, k, "unknown header field".into())),
        }
    }
    let dim = dim.ok_or_else(|| err(1, "dim", "missing".into()))?;
    let count = count.ok_or_else(|| err(1, "count", "missing".into()))?;
    let seed = seed.ok_or_else(|| err(1, "seed", "missing".into()))?;
    if dim == 0 {
        return Err(err(1, "dim", "must be positive".into()));
    }
    let mut samples = Vec::with_capacity(count * dim);
    let mut rows = 0;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let before = samples.len();
        for (j, tok) in line.split_whitespace().enumerate() {
            let v = tok
                .parse::<f64>()
                .map_err(|e| err(line_no, &format!("column {}", j + 1), format!("`{tok}`: {e}")))?;
            samples.push(v);
        }
        let width = samples.len() - before;
        if width != dim {
            return Err(err(
                line_no,
                "dim",
                format!("row has {width} value(s), header says {dim}"),
            ));
        }
        rows += 1;
    }
    if rows != count {
        return Err(err(1, "count", format!("header says {count} rows, file has {rows}")));
    }
    Ok(SampleSet { dim, seed, samples })
}

pub fn load_samples(path: &Path) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path)?;
    parse_samples(&text, path)
}

/// Loads a sample file and checks its dimension.
pub fn load_samples_with_dim(path: &Path, dim: usize) -> Result<SampleSet> {
    let set = load_samples(path)?;
    if set.dim != dim {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            field: "dim".into(),
            detail: format!("expected dimension {dim}, header says {}", set.dim),
        });
    }
    Ok(set)
}
