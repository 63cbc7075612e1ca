use std::io::{Read, Write};

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sample period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("signal needs at least one sample")]
    Empty,
    #[error("sample {index} has {got} components, expected {expected}")]
    Arity { index: usize, got: usize, expected: usize },
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("signals are not compatible: {0}")]
    Incompatible(String),
    #[error("trace file: {0}")]
    Format(String),
    #[error("trace file: {0}")]
    Csv(#[from] csv::Error),
}

/// Uniformly sampled, multi-variable real-valued trace.
///
/// Sample `i` is taken at `start_time + i * sample_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<S> {
    sample_period: f64,
    start_time: f64,
    variables: Vec<String>,
    samples: Vec<Vec<S>>,
}

impl<S: Scalar> Signal<S> {
    pub fn new(
        sample_period: f64,
        start_time: f64,
        variables: Vec<String>,
        samples: Vec<Vec<S>>,
    ) -> Result<Self, SignalError> {
        if !(sample_period > 0.0) || !sample_period.is_finite() {
            return Err(SignalError::BadPeriod(sample_period));
        }
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        for (i, name) in variables.iter().enumerate() {
            if variables[..i].contains(name) {
                return Err(SignalError::DuplicateVariable(name.clone()));
            }
        }
        let k = variables.len();
        for (index, s) in samples.iter().enumerate() {
            if s.len() != k {
                return Err(SignalError::Arity { index, got: s.len(), expected: k });
            }
        }
        Ok(Self { sample_period, start_time, variables, samples })
    }

    /// Single-variable signal starting at time 0.
    pub fn from_values(name: &str, sample_period: f64, values: &[S]) -> Result<Self, SignalError> {
        Self::new(
            sample_period,
            0.0,
            vec![name.to_string()],
            values.iter().map(|v| vec![*v]).collect(),
        )
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn samples(&self) -> &[Vec<S>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last_index(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.sample_period
    }

    pub fn end_time(&self) -> f64 {
        self.time_of(self.last_index())
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn value(&self, var: usize, index: usize) -> S {
        self.samples[index][var]
    }

    pub fn sample(&self, index: usize) -> &[S] {
        &self.samples[index]
    }

    pub fn last(&self) -> &[S] {
        &self.samples[self.last_index()]
    }

    /// Sample index for an absolute time, if it falls on a sample instant inside the signal.
    pub fn index_at(&self, time: f64) -> Option<usize> {
        let k = (time - self.start_time) / self.sample_period;
        let r = k.round();
        if (k - r).abs() > 1e-6 || r < 0.0 {
            return None;
        }
        let i = r as usize;
        (i < self.samples.len()).then_some(i)
    }

    pub fn push(&mut self, sample: Vec<S>) -> Result<(), SignalError> {
        if sample.len() != self.variables.len() {
            return Err(SignalError::Arity {
                index: self.samples.len(),
                got: sample.len(),
                expected: self.variables.len(),
            });
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Concatenation `self ⌢ other`: `other`'s samples follow directly after the last sample.
    pub fn concat(&self, other: &Signal<S>) -> Result<Self, SignalError> {
        if self.variables != other.variables {
            return Err(SignalError::Incompatible("variable lists differ".into()));
        }
        if (self.sample_period - other.sample_period).abs() > 1e-12 {
            return Err(SignalError::Incompatible("sample periods differ".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Ok(Self { samples, ..self.clone() })
    }

    /// Samples `from..` as a new signal, re-based at the sample's time.
    pub fn suffix(&self, from: usize) -> Result<Self, SignalError> {
        if from >= self.samples.len() {
            return Err(SignalError::Empty);
        }
        Ok(Self {
            sample_period: self.sample_period,
            start_time: self.time_of(from),
            variables: self.variables.clone(),
            samples: self.samples[from..].to_vec(),
        })
    }

    pub fn prefix(&self, len: usize) -> Result<Self, SignalError> {
        if len == 0 {
            return Err(SignalError::Empty);
        }
        let mut out = self.clone();
        out.samples.truncate(len);
        Ok(out)
    }

    pub fn cast<T: Scalar>(&self) -> Signal<T> {
        Signal {
            sample_period: self.sample_period,
            start_time: self.start_time,
            variables: self.variables.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| s.iter().map(|v| T::of(v.as_f64())).collect())
                .collect(),
        }
    }

    /// Reads a CSV trace: first column `time`, then one column per variable.
    /// Spacing must be uniform.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SignalError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("time") {
            return Err(SignalError::Format("first column must be `time`".into()));
        }
        let variables: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| SignalError::Format(format!("row {}: bad number `{s}`", row + 1)))
            };
            if rec.len() != variables.len() + 1 {
                return Err(SignalError::Format(format!("row {}: wrong column count", row + 1)));
            }
            times.push(parse(&rec[0])?);
            samples.push(rec.iter().skip(1).map(|s| parse(s).map(S::of)).collect::<Result<Vec<_>, _>>()?);
        }
        if times.is_empty() {
            return Err(SignalError::Empty);
        }
        let period = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        if !(period > 0.0) {
            return Err(SignalError::Format("time column must be increasing".into()));
        }
        for (i, t) in times.iter().enumerate() {
            let expected = times[0] + i as f64 * period;
            if (t - expected).abs() > 1e-6 * period.max(1.0) {
                return Err(SignalError::Format(format!(
                    "non-uniform sample spacing at row {}: time {t}, expected {expected}",
                    i + 1
                )));
            }
        }
        Self::new(period, times[0], variables, samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SignalError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut rec = vec![format!("{}", self.time_of(i))];
            rec.extend(s.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Signal::<f64>::new(0.0, 0.0, vec!["x".into()], vec![vec![1.0]]),
            Err(SignalError::BadPeriod(_))
        ));
        assert!(matches!(
            Signal::<f64>::new(1.0, 0.0, vec!["x".into()], vec![]),
            Err(SignalError::Empty)
        ));
        assert!(matches!(
            Signal::<f64>::new(1.0, 0.0, vec!["x".into()], vec![vec![1.0, 2.0]]),
            Err(SignalError::Arity { .. })
        ));
    }

    #[test]
    fn sample_times_and_lookup() {
        let s = Signal::<f64>::new(0.5, 2.0, vec!["x".into()], vec![vec![0.0]; 4]).unwrap();
        assert_eq!(s.time_of(3), 3.5);
        assert_eq!(s.index_at(3.0), Some(2));
        assert_eq!(s.index_at(3.2), None);
        assert_eq!(s.index_at(4.0), None);
    }

    #[test]
    fn csv_round_trip_and_spacing_check() {
        let s = Signal::<f64>::new(
            0.5,
            0.0,
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.5], vec![-3.0, 0.125], vec![7.0, 8.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = Signal::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);

        let bad = "time,x\n0,1\n1,2\n3,4\n";
        assert!(matches!(Signal::<f64>::read_csv(bad.as_bytes()), Err(SignalError::Format(_))));
    }

    #[test]
    fn concat_appends_samples() {
        let a = Signal::from_values("x", 1.0, &[1.0, 2.0]).unwrap();
        let b = Signal::from_values("x", 1.0, &[3.0]).unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.value(0, 2), 3.0);
    }
}
