//! Fitting the depth-noise table from detector confidence logs.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::DepthNoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    /// Distance to the object in meters.
    pub distance: f64,
    pub confidence: f64,
    pub label: String,
}

/// Score a perfect detector would report for the logged samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdealScore {
    /// True-positive logs: ideal confidence 1.
    #[default]
    One,
    /// False-positive logs: ideal confidence 0.
    Zero,
}

impl IdealScore {
    fn value(self) -> f64 {
        match self {
            IdealScore::One => 1.0,
            IdealScore::Zero => 0.0,
        }
    }
}

/// Read a `distance,confidence,label` CSV with a header line.
pub fn read_samples<R: BufRead>(r: R) -> Result<Vec<CalibrationSample>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["distance", "confidence", "label"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header distance,confidence,label, found {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line: no, message };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", f.len())));
        }
        let distance: f64 = f[0].parse().map_err(|e| bad(format!("distance: {e}")))?;
        let confidence: f64 = f[1].parse().map_err(|e| bad(format!("confidence: {e}")))?;
        if !distance.is_finite() || distance < 0.0 {
            return Err(bad(format!("distance {distance} must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(bad(format!("confidence {confidence} outside [0, 1]")));
        }
        out.push(CalibrationSample {
            distance,
            confidence,
            label: f[2].to_string(),
        });
    }
    Ok(out)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<CalibrationSample>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_samples(std::io::BufReader::new(file))
}

/// Per-bin result before and after the monotone fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
    pub raw: f64,
    pub variance: f64,
}

/// Fit a noise table from samples binned by `edges` (bin `i` is
/// `[edges[i], edges[i+1])`, the last bin closed).
///
/// Under the half-normal score model `|ideal - y|` has second moment `sigma^2`,
/// so each bin's estimate is `mean((ideal - y)^2)`. Bins are then made
/// non-decreasing in distance by count-weighted isotonic regression, and each
/// bin contributes one knot at its midpoint.
pub fn calibrate_noise(
    samples: &[CalibrationSample],
    edges: &[f64],
    ideal: IdealScore,
) -> Result<(DepthNoiseModel, Vec<CalibrationBin>)> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::config(
            "bin edges must be finite and strictly increasing, at least two",
        ));
    }
    let nbins = edges.len() - 1;
    let mut sums = vec![0.0; nbins];
    let mut counts = vec![0usize; nbins];
    let target = ideal.value();
    for s in samples {
        let d = s.distance;
        if d < edges[0] || d > edges[nbins] {
            continue;
        }
        let bin = edges[1..].partition_point(|&e| e <= d).min(nbins - 1);
        sums[bin] += (target - s.confidence).powi(2);
        counts[bin] += 1;
    }
    let sparse: Vec<String> = (0..nbins)
        .filter(|&i| counts[i] < 2)
        .map(|i| format!("[{}, {}) has {} samples", edges[i], edges[i + 1], counts[i]))
        .collect();
    if !sparse.is_empty() {
        return Err(Error::config(format!(
            "calibration needs at least 2 samples per bin: {}",
            sparse.join("; ")
        )));
    }
    let raw: Vec<f64> = (0..nbins).map(|i| sums[i] / counts[i] as f64).collect();
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let fitted = isotonic_increasing(&raw, &weights);
    let depths: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let model = DepthNoiseModel::new(depths, fitted.clone())?;
    let bins = (0..nbins)
        .map(|i| CalibrationBin {
            low: edges[i],
            high: edges[i + 1],
            count: counts[i],
            raw: raw[i],
            variance: fitted[i],
        })
        .collect();
    Ok((model, bins))
}

/// Weighted least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (m2, w2, n2) = blocks.pop().expect("len > 1");
            let (m1, w1, n1) = blocks.pop().expect("len > 1");
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, n1 + n2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Header `low,high,depth,count,raw_variance,variance`.
pub fn write_calibration_csv<W: Write>(bins: &[CalibrationBin], mut w: W) -> std::io::Result<()> {
    writeln!(w, "low,high,depth,count,raw_variance,variance")?;
    for b in bins {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            b.low,
            b.high,
            0.5 * (b.low + b.high),
            b.count,
            b.raw,
            b.variance
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GroundTruth;
    use crate::sensing::{observe, SensingAction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(distance: f64, confidence: f64) -> CalibrationSample {
        CalibrationSample {
            distance,
            confidence,
            label: "car".into(),
        }
    }

    fn synthetic(distance: f64, variance: f64, n: usize, seed: u64) -> Vec<CalibrationSample> {
        let truth = GroundTruth::from_support(1, &[0]).unwrap();
        let noise = DepthNoiseModel::constant(variance).unwrap();
        let action = SensingAction::point(0, &noise);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| sample(distance, observe(&truth, &action, &mut rng).y[0]))
            .collect()
    }

    #[test]
    fn round_trip_recovers_variance() {
        let s = synthetic(15.0, 0.02, 10_000, 3);
        let (model, bins) = calibrate_noise(&s, &[10.0, 20.0], IdealScore::One).unwrap();
        assert_eq!(bins[0].count, 10_000);
        let v = model.variances()[0];
        assert!((v - 0.02).abs() < 0.002, "{v}");
    }

    #[test]
    fn perfect_confidence_means_zero_variance() {
        let s: Vec<_> = (0..10).map(|_| sample(5.0, 1.0)).collect();
        let (model, _) = calibrate_noise(&s, &[0.0, 10.0], IdealScore::One).unwrap();
        assert_eq!(model.variances(), &[0.0]);
    }

    #[test]
    fn false_positive_ideal_is_zero() {
        let s: Vec<_> = (0..10).map(|_| sample(5.0, 0.0)).collect();
        let (model, _) = calibrate_noise(&s, &[0.0, 10.0], IdealScore::Zero).unwrap();
        assert_eq!(model.variances(), &[0.0]);
    }

    #[test]
    fn decreasing_bins_are_pooled() {
        let mut s = vec![sample(1.0, 0.6), sample(1.5, 0.6)];
        s.extend([sample(2.5, 0.8), sample(2.6, 0.8)]);
        let (model, bins) = calibrate_noise(&s, &[0.0, 2.0, 3.0], IdealScore::One).unwrap();
        assert!(bins[0].raw > bins[1].raw);
        let v = model.variances();
        assert!((v[0] - v[1]).abs() < 1e-15);
        assert!((v[0] - 0.5 * (0.16 + 0.04)).abs() < 1e-12);
    }

    #[test]
    fn sparse_bin_is_reported() {
        let s = vec![sample(1.0, 0.9), sample(1.2, 0.9), sample(5.0, 0.9)];
        let err = calibrate_noise(&s, &[0.0, 2.0, 4.0, 6.0], IdealScore::One).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 4)") && msg.contains("[4, 6)"), "{msg}");
    }

    #[test]
    fn isotonic_examples() {
        assert_eq!(
            isotonic_increasing(&[1.0, 3.0, 2.0], &[1.0, 1.0, 1.0]),
            vec![1.0, 2.5, 2.5]
        );
        assert_eq!(isotonic_increasing(&[3.0, 1.0], &[3.0, 1.0]), vec![2.5, 2.5]);
        assert_eq!(isotonic_increasing(&[1.0, 2.0], &[1.0, 1.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn csv_parsing() {
        let text = "distance,confidence,label\n10,0.9,car\n\n20,0.5,car\n";
        let s = read_samples(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1], sample(20.0, 0.5));
        let err = read_samples("distance,confidence,label\n10,1.5,car\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(read_samples("d,c\n".as_bytes()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn isotonic_output_is_monotone(v in proptest::collection::vec(0.0f64..1.0, 1..20)) {
            let w = vec![1.0; v.len()];
            let out = isotonic_increasing(&v, &w);
            proptest::prop_assert_eq!(out.len(), v.len());
            proptest::prop_assert!(out.windows(2).all(|p| p[0] <= p[1] + 1e-12));
            let (s1, s2): (f64, f64) = (v.iter().sum(), out.iter().sum());
            proptest::prop_assert!((s1 - s2).abs() < 1e-9);
        }
    }
}
