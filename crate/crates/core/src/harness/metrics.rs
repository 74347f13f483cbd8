use std::path::Path;

use crate::federation::Strategy;
use crate::{Error, Result};

/// One evaluation point of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    /// 0 is the evaluation before any training.
    pub round: usize,
    pub strategy: Strategy,
    pub accuracy: f64,
    /// Table formula applied to this run's sizes.
    pub bytes_symbolic: u64,
    /// Payload bytes counted on the encoded messages of the round.
    pub bytes_measured: u64,
    /// Informational only; not covered by the determinism guarantee.
    pub wall_ms: f64,
}

pub const METRICS_HEADER: [&str; 6] = ["round", "strategy", "accuracy", "bytes_symbolic", "bytes_measured", "wall_ms"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line: 0,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

/// Writes metrics as CSV to any writer. Accuracy uses the shortest
/// representation that parses back to the same `f64`.
pub fn write_metrics_to<W: std::io::Write>(metrics: &[RoundMetrics], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.round.to_string(),
            m.strategy.to_string(),
            m.accuracy.to_string(),
            m.bytes_symbolic.to_string(),
            m.bytes_measured.to_string(),
            format!("{:.3}", m.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `metrics` to `path`; an empty list gives a header-only file.
pub fn write_metrics(metrics: &[RoundMetrics], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_to(metrics, file).map_err(|e| csv_err(path, e))
}

/// Parses a file written by [`write_metrics`].
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<RoundMetrics>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what} `{}`", field(METRICS_HEADER.iter().position(|h| *h == what).unwrap_or(0))),
        };
        out.push(RoundMetrics {
            round: field(0).parse().map_err(|_| bad("round"))?,
            strategy: field(1).parse().map_err(|_| bad("strategy"))?,
            accuracy: field(2).parse().map_err(|_| bad("accuracy"))?,
            bytes_symbolic: field(3).parse().map_err(|_| bad("bytes_symbolic"))?,
            bytes_measured: field(4).parse().map_err(|_| bad("bytes_measured"))?,
            wall_ms: field(5).parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(round: usize) -> RoundMetrics {
        RoundMetrics {
            round,
            strategy: Strategy::RetrievalClassMeans,
            accuracy: 1.0 / 3.0,
            bytes_symbolic: 123,
            bytes_measured: 120,
            wall_ms: 1.5,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_metrics(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "round,strategy,accuracy,bytes_symbolic,bytes_measured,wall_ms\n");
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut ms = vec![sample(1), sample(2)];
        ms[1].strategy = Strategy::NonFed;
        write_metrics(&ms, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 3);
        assert_eq!(read_metrics(&p).unwrap(), ms);
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let e = write_metrics(&[], "/nonexistent-dir/m.csv").unwrap_err().to_string();
        assert!(e.contains("/nonexistent-dir/m.csv"), "{e}");
    }
}
