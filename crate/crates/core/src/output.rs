//! Writes experiment results to disk.
//!
//! Layout under the output directory:
//!
//! ```text
//! summary.json
//! <policy>_n<N>/metrics.csv
//! cisp_n<N>/ledger.csv        (replication 0)
//! cisp_n<N>/ledger_r<i>.csv   (replication i, for i >= 1)
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::ResultBundle;
use crate::metrics::write_metrics_csv;

/// Files written by [`emit_results`].
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub summary: PathBuf,
    pub metrics: Vec<PathBuf>,
    pub ledgers: Vec<PathBuf>,
}

pub fn emit_results(bundle: &ResultBundle, output_dir: &Path) -> Result<WrittenFiles> {
    if output_dir.as_os_str().is_empty() {
        return Err(Error::config("out", "output directory path is empty"));
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let mut written = WrittenFiles {
        summary: output_dir.join("summary.json"),
        metrics: Vec::new(),
        ledgers: Vec::new(),
    };
    let text = serde_json::to_string_pretty(&bundle.summary)?;
    fs::write(&written.summary, text + "\n").map_err(|e| Error::io(&written.summary, e))?;

    for run in &bundle.runs {
        let dir = output_dir.join(run.dir_name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let path = dir.join("metrics.csv");
        let file = create(&path)?;
        write_metrics_csv(&run.metrics_records(bundle.config.rho), file).map_err(|e| with_path(e, &path))?;
        written.metrics.push(path);

        let ledgers = run.ledgers();
        for (rep, ledger) in ledgers.iter().enumerate() {
            let name = match rep {
                0 => "ledger.csv".to_string(),
                _ => format!("ledger_r{rep}.csv"),
            };
            let path = dir.join(name);
            ledger.write_csv(create(&path)?).map_err(|e| with_path(e, &path))?;
            written.ledgers.push(path);
        }
    }
    Ok(written)
}

fn create(path: &Path) -> Result<impl Write> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn with_path(error: Error, path: &Path) -> Error {
    match error {
        Error::Csv(e) => Error::Parse(format!("{}: {e}", path.display())),
        other => other,
    }
}
