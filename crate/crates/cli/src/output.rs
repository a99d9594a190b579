use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use committee_ba::analysis::{BatchSummary, ReferenceCurves};
use committee_ba::engine::TrialResult;
use serde_json::{Map, Value};

use crate::error::CliError;
use crate::Format;

pub const CSV_HEADER: [&str; 11] = [
    "trial",
    "seed",
    "n",
    "t",
    "q",
    "adversary",
    "phases",
    "rounds",
    "agreement",
    "validity",
    "violations",
];

/// Opens the destination up front so an unwritable path fails before any
/// trial runs.
pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let file = File::create(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

/// Effective configuration echoed ahead of the data.
#[derive(Default)]
pub struct Echo(pub Vec<(String, String)>);

impl Echo {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn write_comments(&self, w: &mut dyn Write) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }

    fn to_json(&self) -> Value {
        let map: Map<String, Value> = self
            .0
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let mut outer = Map::new();
        outer.insert("config".into(), Value::Object(map));
        Value::Object(outer)
    }
}

pub enum ResultWriter {
    Csv(csv::Writer<Box<dyn Write>>),
    Jsonl(Box<dyn Write>),
}

impl ResultWriter {
    pub fn new(mut out: Box<dyn Write>, format: Format, echo: &Echo) -> Result<Self, CliError> {
        Ok(match format {
            Format::Csv => {
                echo.write_comments(&mut out)?;
                let mut w = csv::Writer::from_writer(out);
                w.write_record(CSV_HEADER)?;
                ResultWriter::Csv(w)
            }
            Format::Jsonl => {
                serde_json::to_writer(&mut out, &echo.to_json())?;
                writeln!(out)?;
                ResultWriter::Jsonl(out)
            }
        })
    }

    pub fn write(&mut self, results: &[TrialResult]) -> Result<(), CliError> {
        match self {
            ResultWriter::Csv(w) => {
                for r in results {
                    w.write_record([
                        r.trial.to_string(),
                        r.seed.to_string(),
                        r.n.to_string(),
                        r.t.to_string(),
                        r.q.to_string(),
                        r.adversary.clone(),
                        r.phases_used.to_string(),
                        r.rounds_used.to_string(),
                        r.agreement.to_string(),
                        r.validity_ok.to_string(),
                        r.violations_label(),
                    ])?;
                }
            }
            ResultWriter::Jsonl(out) => {
                for r in results {
                    // Traces go to their own file.
                    let stripped;
                    let r = if r.trace.is_some() {
                        stripped = TrialResult {
                            trace: None,
                            ..r.clone()
                        };
                        &stripped
                    } else {
                        r
                    };
                    serde_json::to_writer(&mut *out, r)?;
                    writeln!(out)?;
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self {
            ResultWriter::Csv(mut w) => w.flush()?,
            ResultWriter::Jsonl(mut out) => out.flush()?,
        }
        Ok(())
    }
}

pub fn write_curves(out: Box<dyn Write>, echo: &Echo, curves: &[ReferenceCurves]) -> Result<(), CliError> {
    let mut out = out;
    echo.write_comments(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "upper_new", "upper_cc", "lower_bb"])?;
    for c in curves {
        w.write_record([c.x, c.upper_new, c.upper_cc, c.lower_bb].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_line(label: &str, s: &BatchSummary) -> String {
    let validity = s
        .validity
        .map_or("n/a".to_string(), |v| format!("{:.3}", v.rate));
    format!(
        "{label}: {} trials, agreement {:.3} [{:.3}, {:.3}], validity {validity}, phases mean {:.2} median {} p95 {}, mean q {:.1}, trials with violations {}",
        s.trials,
        s.agreement.rate,
        s.agreement.lo,
        s.agreement.hi,
        s.mean_phases,
        s.median_phases,
        s.p95_phases,
        s.mean_q,
        s.trials_with_violations
    )
}

/// `<out>.trace.jsonl` next to the results file.
pub fn default_trace_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".trace.jsonl");
    out.with_file_name(name)
}
