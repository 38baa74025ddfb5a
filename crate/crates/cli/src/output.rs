use std::fs;
use std::path::{Path, PathBuf};

use kslab_core::density::NormSeries;
use kslab_core::grid::GridField;
use kslab_core::io::{csv_document, encode_field, reports_to_json};
use kslab_core::verification::{Verdict, VerificationReport};

use crate::{Failure, Format};

/// Writes files named `<prefix>-<short hash>-<name>` into one directory.
pub struct Writer {
    dir: PathBuf,
    prefix: String,
    pub hash: String,
    short: String,
}

impl Writer {
    pub fn new(dir: &Path, prefix: &str, hash: &str) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), prefix: prefix.into(), hash: hash.into(), short: hash[..12].into() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}-{}-{}", self.prefix, self.short, name))
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let p = self.path(name);
        fs::write(&p, bytes)?;
        Ok(p)
    }

    pub fn csv(&self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<PathBuf, Failure> {
        self.write(name, csv_document(&self.hash, header, rows))
    }

    pub fn norms(&self, series: &[NormSeries]) -> Result<(), Failure> {
        for s in series {
            let body = s.to_csv();
            let mut lines = body.lines();
            let header = lines.next().unwrap_or_default().to_string();
            self.csv(&format!("norms-r{}.csv", s.r), &header, lines.map(str::to_string))?;
        }
        Ok(())
    }

    /// A density field in the chosen format (binary by default).
    pub fn field(&self, stem: &str, field: &GridField, t: f64, format: Option<Format>) -> Result<PathBuf, Failure> {
        match format.unwrap_or(Format::Binary) {
            Format::Binary => self.write(&format!("{stem}.bin"), encode_field(field, t)),
            Format::Csv => {
                let spec = field.spec;
                let header = (0..spec.d).map(|a| format!("x{a}")).chain(["value".into()]).collect::<Vec<_>>().join(",");
                let mut x = vec![0.0; spec.d];
                let rows = field.values.iter().enumerate().map(|(i, v)| {
                    spec.point(i, &mut x);
                    x.iter().map(|c| format!("{c:e}")).chain([format!("{v:e}")]).collect::<Vec<_>>().join(",")
                });
                let rows: Vec<String> = std::iter::once(format!("# t={t:e}")).chain(rows).collect();
                self.csv(&format!("{stem}.csv"), &header, rows)
            }
            Format::Json => {
                let doc = serde_json::json!({
                    "config_hash": self.hash,
                    "t": t,
                    "d": field.spec.d,
                    "n": field.spec.n,
                    "box_length": field.spec.box_length,
                    "values": field.values,
                });
                self.write(&format!("{stem}.json"), serde_json::to_string(&doc).expect("json"))
            }
        }
    }

    /// Write the reports and fail with exit status 3 if any hard check failed.
    pub fn reports(&self, reports: &[VerificationReport]) -> Result<(), Failure> {
        let p = self.write("report.json", reports_to_json(reports))?;
        for r in reports {
            let tag = match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Informational => "info",
            };
            eprintln!("[{tag}] {} measured {:e}", r.check_id, r.measured);
        }
        let failed: Vec<&str> = reports.iter().filter(|r| r.failed()).map(|r| r.check_id.as_str()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Check(format!("checks failed: {} (see {})", failed.join(", "), p.display())))
        }
    }
}
