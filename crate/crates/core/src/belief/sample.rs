use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `do(X_target = value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub target: usize,
    pub value: f64,
}

/// Either a purely observational draw or a single-node hard intervention.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterventionSpec(Option<Intervention>);

impl InterventionSpec {
    pub const OBSERVATIONAL: Self = Self(None);

    pub fn observational() -> Self {
        Self(None)
    }

    pub fn intervene(target: usize, value: f64) -> Self {
        Self(Some(Intervention { target, value }))
    }

    pub fn get(&self) -> Option<Intervention> {
        self.0
    }

    pub fn target(&self) -> Option<usize> {
        self.0.map(|i| i.target)
    }

    pub fn is_observational(&self) -> bool {
        self.0.is_none()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let Some(Intervention { target, value }) = self.0 {
            if target >= d {
                return Err(Error::InvalidSample(format!("intervention target {target} out of range for d = {d}")));
            }
            if !value.is_finite() {
                return Err(Error::InvalidSample(format!("intervention value {value} is not finite")));
            }
        }
        Ok(())
    }
}

/// One observed vector together with the intervention it was drawn under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub intervention: InterventionSpec,
}

impl Sample {
    pub fn new(values: Vec<f64>, intervention: InterventionSpec) -> Result<Self> {
        let s = Self { values, intervention };
        s.validate(s.values.len())?;
        Ok(s)
    }

    pub fn observational(values: Vec<f64>) -> Result<Self> {
        Self::new(values, InterventionSpec::observational())
    }

    pub fn d(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.values.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.values.len() });
        }
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("values[{k}] = {} is not finite", self.values[k])));
        }
        self.intervention.validate(d)?;
        if let Some(Intervention { target, value }) = self.intervention.get() {
            let observed = self.values[target];
            if observed != value {
                return Err(Error::ClampMismatch { target, value, observed });
            }
        }
        Ok(())
    }
}

/// Read a JSON-lines dataset, skipping blank lines.
pub fn read_samples_jsonl(reader: impl BufRead) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        s.validate(s.d()).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_samples_jsonl(mut w: impl Write, samples: &[Sample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
