//! EEG preprocessing and frequency-pattern decomposition.
//!
//! Raw recordings have the headset DC offset subtracted, are z-scored per
//! channel, and are then split into the classic EEG bands with a causal
//! Butterworth band-pass realized as a cascade of biquads.

use std::f64::consts::PI;
use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// DC offset (µV) introduced by the Emotiv EPOC+ headset.
pub const EMOTIV_DC_OFFSET: f64 = 4200.0;

/// Analog prototype order used for every band.
pub const DEFAULT_FILTER_ORDER: usize = 3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SignalError {
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("expected stage {expected}, found {found}")]
    Stage {
        expected: &'static str,
        found: Stage,
    },
    #[error("filter design: {0}")]
    Design(String),
    #[error("recording rate {recording} Hz does not match filter rate {filter} Hz")]
    RateMismatch { recording: f64, filter: f64 },
    #[error("cannot filter a signal with zero channels")]
    NoChannels,
}

/// Frequency pattern names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
    Full,
}

impl BandName {
    pub const ALL: [BandName; 6] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::Beta,
        BandName::Gamma,
        BandName::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
            BandName::Full => "full",
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BandName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BandName::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown band `{s}`"))
    }
}

/// A frequency pattern with its pass-band edges. `Full` carries no edges and
/// is never filtered.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: BandName,
    pub edges: Option<(f64, f64)>,
}

impl Band {
    /// The standard band edges at a given sampling rate. Gamma's upper edge is
    /// `min(100, rate/2 - 1)` so that it stays below Nyquist (63 Hz at 128 Hz,
    /// 79 Hz at 160 Hz).
    pub fn standard(name: BandName, rate_hz: f64) -> Band {
        let edges = match name {
            BandName::Delta => Some((0.5, 4.0)),
            BandName::Theta => Some((4.0, 8.0)),
            BandName::Alpha => Some((8.0, 12.0)),
            BandName::Beta => Some((12.0, 30.0)),
            BandName::Gamma => Some((30.0, (rate_hz / 2.0 - 1.0).min(100.0))),
            BandName::Full => None,
        };
        Band { name, edges }
    }

    pub fn is_filtered(&self) -> bool {
        self.edges.is_some()
    }

    /// Geometric center of the pass band.
    pub fn center_hz(&self) -> Option<f64> {
        self.edges.map(|(lo, hi)| (lo * hi).sqrt())
    }
}

/// Processing stage of a recording.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "band")]
pub enum Stage {
    Raw,
    Preprocessed,
    Band(BandName),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Raw => f.write_str("raw"),
            Stage::Preprocessed => f.write_str("preprocessed"),
            Stage::Band(b) => write!(f, "band({b})"),
        }
    }
}

/// Multichannel EEG: `samples` is `[time points × channels]` in µV.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    samples: Array2<f64>,
    rate_hz: f64,
    pub subject: usize,
    pub trial: usize,
    stage: Stage,
}

impl Recording {
    pub fn new(
        samples: Array2<f64>,
        rate_hz: f64,
        subject: usize,
        trial: usize,
    ) -> Result<Self, SignalError> {
        Self::with_stage(samples, rate_hz, subject, trial, Stage::Raw)
    }

    pub fn with_stage(
        samples: Array2<f64>,
        rate_hz: f64,
        subject: usize,
        trial: usize,
        stage: Stage,
    ) -> Result<Self, SignalError> {
        if samples.nrows() == 0 {
            return Err(SignalError::InvalidRecording("no time points".into()));
        }
        if samples.ncols() == 0 {
            return Err(SignalError::InvalidRecording("no channels".into()));
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(SignalError::InvalidRecording(format!(
                "sampling rate must be positive, got {rate_hz}"
            )));
        }
        if let Some(((t, c), _)) = samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SignalError::InvalidRecording(format!(
                "non-finite value at time {t}, channel {c}"
            )));
        }
        Ok(Recording {
            samples,
            rate_hz,
            subject,
            trial,
            stage,
        })
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.ncols()
    }

    fn replace(&self, samples: Array2<f64>, stage: Stage) -> Recording {
        Recording {
            samples,
            rate_hz: self.rate_hz,
            subject: self.subject,
            trial: self.trial,
            stage,
        }
    }
}

/// Subtract a constant DC offset from every value.
pub fn remove_dc(rec: &Recording, dc: f64) -> Result<Recording, SignalError> {
    if rec.stage != Stage::Raw {
        return Err(SignalError::Stage {
            expected: "raw",
            found: rec.stage,
        });
    }
    Ok(rec.replace(rec.samples.mapv(|v| v - dc), Stage::Raw))
}

/// Result of z-scoring: the normalized recording plus the channels that were
/// constant and therefore zeroed instead of scaled.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub recording: Recording,
    pub constant_channels: Vec<usize>,
}

/// Per-channel z-score with population standard deviation, computed over the
/// whole recording. Constant channels become all zeros.
pub fn zscore_normalize(rec: &Recording) -> Normalized {
    let mut out = rec.samples.clone();
    let mut constant_channels = Vec::new();
    let n = rec.len() as f64;
    for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if sd <= f64::EPSILON * scale {
            log::warn!("channel {c} is constant; z-score set to zero");
            constant_channels.push(c);
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| (v - mean) / sd);
        }
    }
    Normalized {
        recording: rec.replace(out, Stage::Preprocessed),
        constant_channels,
    }
}

/// One biquad: `y = b0 x + b1 x[-1] + b2 x[-2] - a1 y[-1] - a2 y[-2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        quadratic_roots(self.a[0], self.a[1])
    }

    fn run(&self, mut signal: ArrayViewMut1<'_, f64>) {
        // transposed direct form II
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in signal.iter_mut() {
            let x = *v;
            let y = b0 * x + s1;
            s1 = b1 * x - a1 * y + s2;
            s2 = b2 * x - a2 * y;
            *v = y;
        }
    }
}

fn quadratic_roots(p: f64, q: f64) -> [Complex64; 2] {
    let disc = Complex64::new(p * p - 4.0 * q, 0.0).sqrt();
    [(-p + disc) / 2.0, (-p - disc) / 2.0]
}

/// A digital Butterworth band-pass as an ordered cascade of biquads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub sections: Vec<Biquad>,
    pub order: usize,
    pub band: Band,
    pub rate_hz: f64,
}

impl FilterDesign {
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / self.rate_hz;
        self.sections
            .iter()
            .map(|s| s.response(omega))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Filter one channel in place, zero initial state.
    pub fn filter_in_place(&self, signal: ArrayViewMut1<'_, f64>) {
        let mut signal = signal;
        for s in &self.sections {
            s.run(signal.view_mut());
        }
    }

    pub fn filter_vec(&self, signal: ArrayView1<'_, f64>) -> Vec<f64> {
        let mut out = signal.to_owned();
        self.filter_in_place(out.view_mut());
        out.to_vec()
    }

    /// Filter every column of a `[time × channel]` matrix independently.
    pub fn filter_matrix(&self, samples: &Array2<f64>) -> Result<Array2<f64>, SignalError> {
        if samples.ncols() == 0 {
            return Err(SignalError::NoChannels);
        }
        let mut out = samples.clone();
        for col in out.axis_iter_mut(Axis(1)) {
            self.filter_in_place(col);
        }
        Ok(out)
    }
}

/// Design a Butterworth band-pass of analog order `order` (digital order
/// `2·order`) by the bilinear transform with pre-warped band edges.
pub fn design_bandpass(
    band: Band,
    rate_hz: f64,
    order: usize,
) -> Result<FilterDesign, SignalError> {
    let (low, high) = band
        .edges
        .ok_or_else(|| SignalError::Design(format!("band {} has no edges", band.name)))?;
    if order == 0 {
        return Err(SignalError::Design("order must be at least 1".into()));
    }
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(SignalError::Design(format!(
            "invalid sampling rate {rate_hz}"
        )));
    }
    let nyquist = rate_hz / 2.0;
    if high >= nyquist {
        return Err(SignalError::Design(format!(
            "high edge {high} Hz is not below Nyquist ({nyquist} Hz)"
        )));
    }
    if !(low > 0.0 && low < high) {
        return Err(SignalError::Design(format!(
            "band edges must satisfy 0 < low < high, got ({low}, {high})"
        )));
    }

    let fs2 = 2.0 * rate_hz;
    let warp = |f: f64| fs2 * (PI * f / rate_hz).tan();
    let (w_lo, w_hi) = (warp(low), warp(high));
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    // Analog low-pass prototype poles on the left half of the unit circle,
    // each mapped to two band-pass poles: s² - p·B·s + w0² = 0.
    let mut analog = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        analog.push((pb + disc) / 2.0);
        analog.push((pb - disc) / 2.0);
    }
    let digital: Vec<Complex64> = analog.iter().map(|s| (fs2 + s) / (fs2 - s)).collect();

    let mut sections: Vec<Biquad> = pair_conjugates(&digital)
        .into_iter()
        .map(|(p1, p2)| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(p1 + p2).re, (p1 * p2).re],
        })
        .collect();

    // Unit gain at the digital image of the analog center frequency.
    let f_center = rate_hz / PI * (w0_sq.sqrt() / fs2).atan();
    let omega = 2.0 * PI * f_center / rate_hz;
    let raw_gain: f64 = sections.iter().map(|s| s.response(omega).norm()).product();
    let per_section = raw_gain.powf(-1.0 / sections.len() as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }

    let design = FilterDesign {
        sections,
        order,
        band,
        rate_hz,
    };
    if !design.is_stable() {
        return Err(SignalError::Design(format!(
            "unstable design for band {} at {rate_hz} Hz",
            band.name
        )));
    }
    Ok(design)
}

/// Group poles of a real-coefficient polynomial into second-order pairs:
/// complex poles with their conjugates, real poles two at a time.
fn pair_conjugates(poles: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    const IMAG_TOL: f64 = 1e-12;
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > IMAG_TOL).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= IMAG_TOL)
        .map(|p| p.re)
        .collect();
    upper.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real.sort_by(f64::total_cmp);
    let mut pairs: Vec<(Complex64, Complex64)> = upper.into_iter().map(|p| (p, p.conj())).collect();
    pairs.extend(real.chunks(2).map(|c| {
        (
            Complex64::new(c[0], 0.0),
            Complex64::new(*c.get(1).unwrap_or(&0.0), 0.0),
        )
    }));
    pairs
}

/// Causal forward filtering of each channel with zero initial conditions.
pub fn apply_filter(design: &FilterDesign, rec: &Recording) -> Result<Recording, SignalError> {
    if (rec.rate_hz - design.rate_hz).abs() > 1e-9 * design.rate_hz {
        return Err(SignalError::RateMismatch {
            recording: rec.rate_hz,
            filter: design.rate_hz,
        });
    }
    let filtered = design.filter_matrix(&rec.samples)?;
    Ok(rec.replace(filtered, Stage::Band(design.band.name)))
}

/// Isolate one frequency pattern from a preprocessed recording. `Full` passes
/// the recording through untouched.
pub fn decompose(rec: &Recording, band: BandName) -> Result<Recording, SignalError> {
    if rec.stage != Stage::Preprocessed {
        return Err(SignalError::Stage {
            expected: "preprocessed",
            found: rec.stage,
        });
    }
    let band = Band::standard(band, rec.rate_hz);
    if !band.is_filtered() {
        return Ok(rec.clone());
    }
    let design = design_bandpass(band, rec.rate_hz, DEFAULT_FILTER_ORDER)?;
    apply_filter(&design, rec)
}

/// DC removal, z-score and band decomposition in one go.
pub fn preprocess_and_decompose(
    rec: &Recording,
    dc: f64,
    band: BandName,
) -> Result<(Recording, Vec<usize>), SignalError> {
    let centered = remove_dc(rec, dc)?;
    let Normalized {
        recording,
        constant_channels,
    } = zscore_normalize(&centered);
    Ok((decompose(&recording, band)?, constant_channels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rec(samples: Array2<f64>) -> Recording {
        Recording::new(samples, 128.0, 0, 0).unwrap()
    }

    fn butterworth_bandpass_gain(band: Band, freq: f64, order: i32) -> f64 {
        // analog Butterworth band-pass magnitude with pre-warped edges
        let rate = 128.0;
        let warp = |f: f64| 2.0 * rate * (PI * f / rate).tan();
        let (lo, hi) = band.edges.unwrap();
        let (wl, wh, w) = (warp(lo), warp(hi), warp(freq));
        let omega = (w * w - wl * wh) / (w * (wh - wl));
        1.0 / (1.0 + omega.powi(2 * order)).sqrt()
    }

    #[test]
    fn remove_dc_examples() {
        let r = rec(Array2::from_elem((5, 1), 4200.0));
        assert!(remove_dc(&r, 4200.0)
            .unwrap()
            .samples()
            .iter()
            .all(|&v| v == 0.0));
        let r = rec(array![[4201.0], [4199.0]]);
        assert_eq!(
            remove_dc(&r, 4200.0).unwrap().samples(),
            &array![[1.0], [-1.0]]
        );
        let r = rec(array![[1.5, -3.0], [2.0, 7.25]]);
        assert_eq!(remove_dc(&r, 0.0).unwrap(), r);
    }

    #[test]
    fn remove_dc_rejects_processed() {
        let r = zscore_normalize(&rec(array![[1.0], [2.0]])).recording;
        assert!(matches!(remove_dc(&r, 1.0), Err(SignalError::Stage { .. })));
    }

    #[test]
    fn zscore_examples() {
        let out = zscore_normalize(&rec(array![[1.0], [-1.0], [1.0], [-1.0]]));
        assert_eq!(
            out.recording.samples(),
            &array![[1.0], [-1.0], [1.0], [-1.0]]
        );
        assert!(out.constant_channels.is_empty());
        assert_eq!(out.recording.stage(), Stage::Preprocessed);

        let out = zscore_normalize(&rec(array![[0.0], [0.0], [0.0]]));
        assert_eq!(out.recording.samples(), &array![[0.0], [0.0], [0.0]]);
        assert_eq!(out.constant_channels, vec![0]);

        let out = zscore_normalize(&rec(array![[2.0], [4.0], [6.0]]));
        let expected = 2.0 / (8.0f64 / 3.0).sqrt();
        let s = out.recording.samples();
        assert!((s[[0, 0]] + expected).abs() < 1e-12);
        assert!(s[[1, 0]].abs() < 1e-12);
        assert!((s[[2, 0]] - expected).abs() < 1e-12);
        assert!((expected - 1.224_744_871).abs() < 1e-9);
    }

    #[test]
    fn zscore_constant_nonzero_channel() {
        let out = zscore_normalize(&rec(array![[0.1, 1.0], [0.1, 2.0], [0.1, 3.0]]));
        assert_eq!(out.constant_channels, vec![0]);
        assert!(out.recording.samples().column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gamma_edge_below_nyquist() {
        assert_eq!(
            Band::standard(BandName::Gamma, 128.0).edges,
            Some((30.0, 63.0))
        );
        assert_eq!(
            Band::standard(BandName::Gamma, 160.0).edges,
            Some((30.0, 79.0))
        );
        assert_eq!(
            Band::standard(BandName::Gamma, 1000.0).edges,
            Some((30.0, 100.0))
        );
        assert_eq!(Band::standard(BandName::Full, 128.0).edges, None);
    }

    #[test]
    fn delta_design_matches_analog_magnitude() {
        let band = Band::standard(BandName::Delta, 128.0);
        let d = design_bandpass(band, 128.0, 3).unwrap();
        assert_eq!(d.sections.len(), 3);
        assert!(d.is_stable());
        let h2 = d.magnitude(2.0);
        assert!((0.95..=1.05).contains(&h2), "{h2}");
        assert!((d.magnitude(0.5) - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02);
        assert!((d.magnitude(4.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02);
        assert!(d.magnitude(50.0) < 1e-4);
        for f in [0.3, 1.0, 2.0, 3.0, 6.0, 10.0, 30.0] {
            let analytic = butterworth_bandpass_gain(band, f, 3);
            assert!((d.magnitude(f) - analytic).abs() < 1e-9, "f={f}");
        }
    }

    #[test]
    fn every_band_is_stable_with_unit_center_gain() {
        for rate in [128.0, 160.0] {
            for name in BandName::ALL.into_iter().filter(|b| *b != BandName::Full) {
                let band = Band::standard(name, rate);
                let d = design_bandpass(band, rate, 3).unwrap();
                assert!(d.is_stable(), "{name} @ {rate}");
                for p in d.poles() {
                    assert!(p.norm() < 1.0);
                }
                let c = d.magnitude(band.center_hz().unwrap());
                assert!((0.95..=1.05).contains(&c), "{name} center {c}");
                let (lo, hi) = band.edges.unwrap();
                for edge in [lo, hi] {
                    let g = d.magnitude(edge);
                    assert!(
                        (g - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02,
                        "{name} edge {edge}: {g}"
                    );
                }
            }
        }
    }

    #[test]
    fn design_errors() {
        let bad = Band {
            name: BandName::Gamma,
            edges: Some((30.0, 64.0)),
        };
        assert!(matches!(
            design_bandpass(bad, 128.0, 3),
            Err(SignalError::Design(_))
        ));
        let full = Band::standard(BandName::Full, 128.0);
        assert!(design_bandpass(full, 128.0, 3).is_err());
        let inverted = Band {
            name: BandName::Delta,
            edges: Some((4.0, 0.5)),
        };
        assert!(design_bandpass(inverted, 128.0, 3).is_err());
    }

    #[test]
    fn filter_zero_and_linearity() {
        let d = design_bandpass(Band::standard(BandName::Delta, 128.0), 128.0, 3).unwrap();
        let zero = rec(Array2::zeros((300, 2)));
        assert!(apply_filter(&d, &zero)
            .unwrap()
            .samples()
            .iter()
            .all(|&v| v == 0.0));

        let x = Array2::from_shape_fn((500, 2), |(t, c)| ((t * 7 + c * 13) % 17) as f64 - 8.0);
        let fx = apply_filter(&d, &rec(x.clone())).unwrap();
        let f3x = apply_filter(&d, &rec(x.mapv(|v| 3.5 * v))).unwrap();
        for (a, b) in fx.samples().iter().zip(f3x.samples()) {
            assert!((3.5 * a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        assert_eq!(fx.stage(), Stage::Band(BandName::Delta));
    }

    #[test]
    fn filter_rejects_bad_inputs() {
        let d = design_bandpass(Band::standard(BandName::Delta, 128.0), 128.0, 3).unwrap();
        assert_eq!(
            d.filter_matrix(&Array2::zeros((10, 0))),
            Err(SignalError::NoChannels)
        );
        let r = Recording::new(Array2::zeros((10, 1)), 160.0, 0, 0).unwrap();
        assert!(matches!(
            apply_filter(&d, &r),
            Err(SignalError::RateMismatch { .. })
        ));
    }

    #[test]
    fn steady_state_sinusoid_gain() {
        let d = design_bandpass(Band::standard(BandName::Delta, 128.0), 128.0, 3).unwrap();
        let n = 128 * 60;
        let x = Array2::from_shape_fn((n, 1), |(t, _)| (2.0 * PI * 2.0 * t as f64 / 128.0).sin());
        let y = apply_filter(&d, &rec(x)).unwrap();
        let tail = y.samples().slice(ndarray::s![n - 128 * 10.., 0]).to_owned();
        let amp = (2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
        let analytic = d.magnitude(2.0);
        assert!(
            (amp - analytic).abs() / analytic < 0.05,
            "{amp} vs {analytic}"
        );
    }

    #[test]
    fn decompose_full_passthrough_and_stage_check() {
        let r = zscore_normalize(&rec(array![[1.0, 2.0], [3.0, 5.0], [4.0, 1.0]])).recording;
        assert_eq!(decompose(&r, BandName::Full).unwrap(), r);
        let raw = rec(array![[1.0], [2.0]]);
        assert!(decompose(&raw, BandName::Delta).is_err());
    }

    #[test]
    fn band_name_parses() {
        assert_eq!("Delta".parse::<BandName>().unwrap(), BandName::Delta);
        assert_eq!("full".parse::<BandName>().unwrap(), BandName::Full);
        assert!("kappa".parse::<BandName>().is_err());
    }
}
