use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kinetics::Intervention;
use crate::error::{Error, Result};

/// Time-stamped culture record. Ground-truth runs also carry the latent
/// series and realized batch effects; inference only ever reads `rho_obs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub hours: Vec<f64>,
    pub rho_obs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inhibitor_true: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_true: Option<Vec<f64>>,
    /// Intervention applied at each observation time, before the next interval.
    pub interventions: Vec<Option<Intervention>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_growth_rates: Option<[f64; 2]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    pub fn initial_density(&self) -> f64 {
        self.rho_obs[0]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.hours.len();
        let lens_ok = self.rho_obs.len() == n
            && self.interventions.len() == n
            && self.inhibitor_true.as_ref().is_none_or(|v| v.len() == n)
            && self.rho_true.as_ref().is_none_or(|v| v.len() == n);
        if !lens_ok {
            return Err(Error::InvalidConfig("trajectory series lengths differ".into()));
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.hours.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("trajectory hours not strictly increasing".into()));
        }
        Ok(())
    }

    /// Same observations with latent information stripped.
    pub fn observed_only(&self) -> Trajectory {
        Trajectory {
            hours: self.hours.clone(),
            rho_obs: self.rho_obs.clone(),
            inhibitor_true: None,
            rho_true: None,
            interventions: self.interventions.clone(),
            batch_growth_rates: None,
        }
    }

    /// CSV with columns `hour,rho_obs,inhibitor_true,intervention`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["hour", "rho_obs", "inhibitor_true", "intervention"])?;
        for k in 0..self.len() {
            let inhibitor = self
                .inhibitor_true
                .as_ref()
                .map(|v| format!("{:.12}", v[k]))
                .unwrap_or_default();
            let action = self.interventions[k]
                .map(|i| i.label())
                .unwrap_or_else(|| "none".to_string());
            w.write_record([
                format!("{}", self.hours[k]),
                format!("{:.12}", self.rho_obs[k]),
                inhibitor,
                action,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Trajectory> {
        let mut r = csv::Reader::from_reader(reader);
        let mut t = Trajectory {
            hours: vec![],
            rho_obs: vec![],
            inhibitor_true: None,
            rho_true: None,
            interventions: vec![],
            batch_growth_rates: None,
        };
        let mut inhibitor = Vec::new();
        for record in r.records() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
            let num = |i: usize| {
                field(i)
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad number in column {i}: `{}`", field(i))))
            };
            t.hours.push(num(0)?);
            t.rho_obs.push(num(1)?);
            if !field(2).is_empty() {
                inhibitor.push(num(2)?);
            }
            let action = Intervention::parse(&field(3))
                .ok_or_else(|| Error::InvalidConfig(format!("bad intervention `{}`", field(3))))?;
            t.interventions.push(action);
        }
        if !inhibitor.is_empty() {
            t.inhibitor_true = Some(inhibitor);
        }
        t.validate()?;
        Ok(t)
    }

    pub fn load_csv(path: &Path) -> Result<Trajectory> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(rho: Vec<f64>, with_latent: bool) -> Trajectory {
        let n = rho.len();
        Trajectory {
            hours: (0..n).map(|k| 3.0 * k as f64).collect(),
            inhibitor_true: with_latent.then(|| rho.iter().map(|r| r / 2.0).collect()),
            rho_obs: rho,
            rho_true: None,
            interventions: (0..n)
                .map(|k| match k % 3 {
                    1 => Some(Intervention::Exchange),
                    2 => Some(Intervention::Expand { factor: 4.0 }),
                    _ => None,
                })
                .collect(),
            batch_growth_rates: None,
        }
    }

    proptest! {
        #[test]
        fn csv_roundtrip(rho in prop::collection::vec(0.0f64..20.0, 1..15), latent in any::<bool>()) {
            let t = sample(rho, latent);
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = Trajectory::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), t.len());
            prop_assert_eq!(&back.interventions, &t.interventions);
            for (a, b) in back.rho_obs.iter().zip(&t.rho_obs) {
                prop_assert!((a - b).abs() < 1e-11);
            }
            prop_assert_eq!(back.inhibitor_true.is_some(), latent);
        }
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        sample(vec![3.0, 3.5], false).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("hour,rho_obs,inhibitor_true,intervention\n"));
        assert!(text.contains("0,3.000000000000,,none"));
    }

    #[test]
    fn rejects_non_increasing_hours() {
        let mut t = sample(vec![1.0, 2.0], false);
        t.hours = vec![3.0, 3.0];
        assert!(t.validate().is_err());
    }
}
