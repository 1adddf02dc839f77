//! Realized factual datasets and their CSV form.

use std::io::{Read, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentKind {
    /// Binary treatments; `propensity` holds `p_t(W_t)`.
    Discrete,
    /// Real treatments; `propensity` holds the density `f_t(W_t)`.
    Continuous,
}

/// One realized dataset. Index `i` holds period `t = i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBundle {
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub what: Option<Vec<f64>>,
    pub propensity: Vec<f64>,
    pub kind: TreatmentKind,
}

impl PathBundle {
    pub fn new(
        w: Vec<f64>,
        y: Vec<f64>,
        what: Option<Vec<f64>>,
        propensity: Vec<f64>,
        kind: TreatmentKind,
    ) -> Result<Self> {
        let n = w.len();
        if y.len() != n || propensity.len() != n || what.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::Precondition("all series in a bundle must share one length".into()));
        }
        Ok(PathBundle { w, y, what, propensity, kind })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Writes `t,W,Y,What,propensity` (instrument column omitted when absent),
    /// floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        if self.what.is_some() {
            wtr.write_record(["t", "W", "Y", "What", "propensity"])?;
        } else {
            wtr.write_record(["t", "W", "Y", "propensity"])?;
        }
        for i in 0..self.len() {
            let mut rec = vec![(i + 1).to_string(), fmt17(self.w[i]), fmt17(self.y[i])];
            if let Some(what) = &self.what {
                rec.push(fmt17(what[i]));
            }
            rec.push(fmt17(self.propensity[i]));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). Treatments that
    /// are all exactly 0 or 1 are taken to be discrete.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(ct), Some(cw), Some(cy), Some(cp)) = (col("t"), col("W"), col("Y"), col("propensity")) else {
            return Err(Error::config("header", "expected columns t,W,Y,[What,]propensity"));
        };
        let cwhat = col("What");
        let (mut w, mut y, mut what, mut prop) = (vec![], vec![], vec![], vec![]);
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |c: usize, name: &str| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::config(format!("row {}.{name}", row + 1), "not a number"))
            };
            let t = num(ct, "t")?;
            if t != (row + 1) as f64 {
                return Err(Error::config(format!("row {}.t", row + 1), "periods must be 1, 2, ..."));
            }
            w.push(num(cw, "W")?);
            y.push(num(cy, "Y")?);
            if let Some(c) = cwhat {
                what.push(num(c, "What")?);
            }
            prop.push(num(cp, "propensity")?);
        }
        let kind = if !w.is_empty() && w.iter().all(|v| *v == 0.0 || *v == 1.0) {
            TreatmentKind::Discrete
        } else {
            TreatmentKind::Continuous
        };
        PathBundle::new(w, y, cwhat.map(|_| what), prop, kind)
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
