use std::io::{BufRead, Write};

use super::{Episode, StepRecord};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "t,target,value,eig,entropy,p_true,expected_shd";

/// One JSON object per line, in step order.
pub fn write_trace_jsonl(mut w: impl Write, steps: &[StepRecord]) -> Result<()> {
    for s in steps {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace_jsonl(r: impl BufRead) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Row `t = 0` is the state after initialization; intervention fields are empty.
pub fn write_summary_csv(mut w: impl Write, ep: &Episode) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    let i = &ep.initial;
    writeln!(w, "0,,,,{},{},{}", i.entropy, opt(i.p_true), opt(i.expected_shd))?;
    for s in &ep.steps {
        let (target, value) = s.chosen.get().map_or((String::new(), String::new()), |iv| (iv.target.to_string(), iv.value.to_string()));
        writeln!(w, "{},{target},{value},{},{},{},{}", s.t, opt(s.eig), s.entropy, opt(s.p_true), opt(s.expected_shd))?;
    }
    Ok(())
}
