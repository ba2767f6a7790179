//! Synthetic multi-subject EEG where identity lives only in the Delta band.
//!
//! Each subject owns a few Delta-band oscillators with their own spatial
//! pattern: oscillator `j` contributes `u cos(ωt + φ) + v sin(ωt + φ)` across
//! the source channels, with `u ⟂ v` and `|u| = |v|`. On top of that sits a
//! broadband 4–60 Hz noise process that is the same realization for every
//! subject. Sources are mixed to scalp channels by one shared matrix and the
//! headset DC offset is added.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::substream;
use crate::signal::Recording;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub subjects: usize,
    pub channels: usize,
    pub rate_hz: f64,
    pub duration_s: f64,
    pub oscillators_per_subject: usize,
    /// Oscillator frequencies are drawn without replacement from an even
    /// grid over this range, so no two subjects share a frequency.
    pub delta_range_hz: (f64, f64),
    /// Standard deviation of the shared noise relative to the Delta signal.
    pub noise_level: f64,
    pub noise_components: usize,
    pub noise_range_hz: (f64, f64),
    pub amplitude_uv: f64,
    pub dc_offset_uv: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 8 subjects, 14 channels at 128 Hz, 60 s each.
    fn default() -> Self {
        SyntheticSpec {
            subjects: 8,
            channels: 14,
            rate_hz: 128.0,
            duration_s: 60.0,
            oscillators_per_subject: 2,
            delta_range_hz: (1.0, 3.2),
            noise_level: 2.0,
            noise_components: 150,
            noise_range_hz: (4.0, 60.0),
            amplitude_uv: 20.0,
            dc_offset_uv: crate::signal::EMOTIV_DC_OFFSET,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        let (lo, hi) = self.delta_range_hz;
        if self.subjects == 0 || self.channels == 0 || self.oscillators_per_subject == 0 {
            return Err("subjects, channels and oscillators must be at least 1".into());
        }
        if !(0.5 <= lo && lo <= hi && hi <= 4.0) {
            return Err(format!(
                "oscillator range ({lo}, {hi}) Hz is outside the Delta band"
            ));
        }
        if self.noise_level < 0.0 {
            return Err("noise level must be non-negative".into());
        }
        if self.rate_hz.is_nan()
            || self.rate_hz <= 0.0
            || self.duration_s.is_nan()
            || self.duration_s <= 0.0
        {
            return Err("rate and duration must be positive".into());
        }
        let (nlo, nhi) = self.noise_range_hz;
        if !(nlo > 0.0 && nlo <= nhi && nhi < self.rate_hz / 2.0) {
            return Err(format!(
                "noise range ({nlo}, {nhi}) Hz must lie below Nyquist"
            ));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.rate_hz * self.duration_s).round() as usize
    }

    /// Every subject's oscillator frequencies, subject-major.
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        let count = self.subjects * self.oscillators_per_subject;
        let (lo, hi) = self.delta_range_hz;
        let mut grid: Vec<f64> = (0..count)
            .map(|i| {
                if count == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect();
        grid.shuffle(&mut substream(self.seed, "synth/frequencies"));
        grid.chunks(self.oscillators_per_subject)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.sample(StandardNormal))
}

/// The subject's noise-free Delta sources, `[time × channels]`, scaled to unit
/// overall standard deviation.
fn subject_sources(spec: &SyntheticSpec, subject: usize, freqs: &[f64]) -> Array2<f64> {
    let n = spec.channels;
    let t_len = spec.samples();
    let mut rng = substream(spec.seed, &format!("synth/subject/{subject}"));
    let mut src = Array2::<f64>::zeros((t_len, n));
    for &f in freqs {
        let u = gaussian_vec(&mut rng, n);
        let mut v = gaussian_vec(&mut rng, n);
        if n > 1 {
            let proj = u.dot(&v) / u.dot(&u);
            v.scaled_add(-proj, &u);
            let scale = u.dot(&u).sqrt() / v.dot(&v).sqrt();
            v.mapv_inplace(|x| x * scale);
        }
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        for t in 0..t_len {
            let arg = 2.0 * PI * f * t as f64 / spec.rate_hz + phase;
            let (s, c) = arg.sin_cos();
            let mut row = src.row_mut(t);
            row.scaled_add(c, &u);
            row.scaled_add(s, &v);
        }
    }
    let mean = src.mean().unwrap_or(0.0);
    let sd = src
        .mapv(|x| (x - mean).powi(2))
        .mean()
        .unwrap_or(0.0)
        .sqrt();
    if sd > 0.0 {
        src.mapv_inplace(|x| x / sd);
    }
    src
}

/// Shared band-limited noise: per source channel a sum of random sinusoids
/// inside `noise_range_hz`, scaled to unit standard deviation.
fn shared_noise(spec: &SyntheticSpec) -> Array2<f64> {
    let n = spec.channels;
    let t_len = spec.samples();
    let mut rng = substream(spec.seed, "synth/noise");
    let (lo, hi) = spec.noise_range_hz;
    let mut out = Array2::<f64>::zeros((t_len, n));
    for c in 0..n {
        let comps: Vec<(f64, f64)> = (0..spec.noise_components)
            .map(|_| (rng.random_range(lo..=hi), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let mut col = out.column_mut(c);
        for (t, v) in col.iter_mut().enumerate() {
            let time = t as f64 / spec.rate_hz;
            *v = comps
                .iter()
                .map(|&(f, p)| (2.0 * PI * f * time + p).sin())
                .sum();
        }
        let mean = col.mean().unwrap_or(0.0);
        let sd = col
            .mapv(|x| (x - mean).powi(2))
            .mean()
            .unwrap_or(0.0)
            .sqrt();
        if sd > 0.0 {
            col.mapv_inplace(|x| (x - mean) / sd);
        }
    }
    out
}

/// One raw recording per subject (trial 0), deterministic given the spec.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<Vec<Recording>, String> {
    spec.validate()?;
    let n = spec.channels;
    let mut mix_rng = substream(spec.seed, "synth/mixing");
    let mixing = Array2::from_shape_fn((n, n), |_| {
        mix_rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt()
    });
    let noise = if spec.noise_level > 0.0 {
        Some(shared_noise(spec))
    } else {
        None
    };
    spec.frequencies()
        .iter()
        .enumerate()
        .map(|(subject, freqs)| {
            let mut src = subject_sources(spec, subject, freqs);
            if let Some(noise) = &noise {
                src.scaled_add(spec.noise_level, noise);
            }
            let scalp = src
                .dot(&mixing.t())
                .mapv(|x| spec.dc_offset_uv + spec.amplitude_uv * x);
            Recording::new(scalp, spec.rate_hz, subject, 0).map_err(|e| e.to_string())
        })
        .collect()
}

/// Noise-free Delta waveform of one subject after mixing, `[time × channels]`.
pub fn delta_waveform(spec: &SyntheticSpec, subject: usize) -> Array2<f64> {
    let freqs = &spec.frequencies()[subject];
    let n = spec.channels;
    let mut mix_rng = substream(spec.seed, "synth/mixing");
    let mixing = Array2::from_shape_fn((n, n), |_| {
        mix_rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt()
    });
    subject_sources(spec, subject, freqs).dot(&mixing.t())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            subjects: 3,
            channels: 4,
            duration_s: 8.0,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            synth_generate(&small()).unwrap(),
            synth_generate(&small()).unwrap()
        );
        let other = SyntheticSpec { seed: 8, ..small() };
        assert_ne!(
            synth_generate(&small()).unwrap(),
            synth_generate(&other).unwrap()
        );
    }

    #[test]
    fn shapes_labels_and_offset() {
        let recs = synth_generate(&small()).unwrap();
        assert_eq!(recs.len(), 3);
        for (s, r) in recs.iter().enumerate() {
            assert_eq!(r.subject, s);
            assert_eq!((r.len(), r.channels()), (1024, 4));
            let mean = r.samples().mean().unwrap();
            assert!((mean - 4200.0).abs() < 20.0, "{mean}");
        }
    }

    #[test]
    fn frequencies_are_disjoint_and_in_delta() {
        let spec = SyntheticSpec::default();
        let mut all: Vec<f64> = spec.frequencies().concat();
        assert_eq!(all.len(), 16);
        assert!(all.iter().all(|f| (0.5..=4.0).contains(f)));
        all.sort_by(f64::total_cmp);
        assert!(all.windows(2).all(|w| w[1] - w[0] > 0.1));
    }

    #[test]
    fn invalid_specs() {
        let s = SyntheticSpec {
            delta_range_hz: (0.5, 6.0),
            ..small()
        };
        assert!(synth_generate(&s).is_err());
        let s = SyntheticSpec {
            noise_level: -1.0,
            ..small()
        };
        assert!(synth_generate(&s).is_err());
    }
}
