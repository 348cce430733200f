//! Trial representation and preprocessing.
//!
//! A [`Recording`] is one imagined-speech trial: a channels × time matrix of
//! amplitudes with its subject and prompt. Preprocessing is a zero-phase
//! Butterworth bandpass (cascaded second-order sections run forward and
//! backward) followed by per-channel mean removal.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eleven imagined-speech prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prompt {
    Iy,
    Piy,
    Tiy,
    Diy,
    Uw,
    M,
    N,
    Pat,
    Pot,
    Knew,
    Gnaw,
}

impl Prompt {
    pub const ALL: [Prompt; 11] = [
        Prompt::Iy,
        Prompt::Piy,
        Prompt::Tiy,
        Prompt::Diy,
        Prompt::Uw,
        Prompt::M,
        Prompt::N,
        Prompt::Pat,
        Prompt::Pot,
        Prompt::Knew,
        Prompt::Gnaw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Prompt::Iy => "/iy/",
            Prompt::Piy => "/piy/",
            Prompt::Tiy => "/tiy/",
            Prompt::Diy => "/diy/",
            Prompt::Uw => "/uw/",
            Prompt::M => "/m/",
            Prompt::N => "/n/",
            Prompt::Pat => "pat",
            Prompt::Pot => "pot",
            Prompt::Knew => "knew",
            Prompt::Gnaw => "gnaw",
        }
    }
}

impl fmt::Display for Prompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Prompt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Prompt::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown prompt `{s}`")))
    }
}

impl Serialize for Prompt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Prompt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One trial: channels × time amplitudes plus metadata.
///
/// Immutable once built; every preprocessing step returns a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    subject_id: String,
    prompt: Prompt,
    n_channels: usize,
    n_times: usize,
    /// Channel-major: channel `c` occupies `c * n_times .. (c + 1) * n_times`.
    samples: Vec<f64>,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
}

impl Recording {
    /// Build a recording from channel-major samples, checking every invariant.
    pub fn new(
        subject_id: impl Into<String>,
        prompt: Prompt,
        channels: Vec<Vec<f64>>,
        sample_rate_hz: f64,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        let n_channels = channels.len();
        let n_times = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n_times) {
            return Err(Error::invalid("channels have unequal lengths"));
        }
        let samples = channels.into_iter().flatten().collect();
        Self::from_flat(subject_id, prompt, n_channels, samples, sample_rate_hz, channel_names)
    }

    /// Build from a flat channel-major buffer of `n_channels * n_times` values.
    pub fn from_flat(
        subject_id: impl Into<String>,
        prompt: Prompt,
        n_channels: usize,
        samples: Vec<f64>,
        sample_rate_hz: f64,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if n_channels < 2 {
            return Err(Error::invalid(format!("need at least 2 channels, got {n_channels}")));
        }
        if samples.len() % n_channels != 0 {
            return Err(Error::invalid("sample buffer is not a whole number of channels"));
        }
        let n_times = samples.len() / n_channels;
        if n_times < 2 {
            return Err(Error::invalid(format!("need at least 2 time points, got {n_times}")));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite amplitude"));
        }
        if channel_names.len() != n_channels {
            return Err(Error::invalid(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                n_channels
            )));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            prompt,
            n_channels,
            n_times,
            samples,
            sample_rate_hz,
            channel_names,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn prompt(&self) -> Prompt {
        self.prompt
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.samples[c * self.n_times..(c + 1) * self.n_times]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.n_times)
    }

    /// Channel-major flat view.
    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }

    /// Same metadata, new samples produced channel by channel.
    fn map_channels(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut samples = Vec::with_capacity(self.samples.len());
        for ch in self.channels() {
            let out = f(ch);
            debug_assert_eq!(out.len(), self.n_times);
            samples.extend(out);
        }
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Reorder channels so that output channel `i` is input channel `order[i]`.
    pub fn permute_channels(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n_channels];
        if order.len() != self.n_channels {
            return Err(Error::invalid("permutation length differs from channel count"));
        }
        for &o in order {
            if o >= self.n_channels || std::mem::replace(&mut seen[o], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        let mut samples = Vec::with_capacity(self.samples.len());
        for &o in order {
            samples.extend_from_slice(self.channel(o));
        }
        Ok(Self {
            samples,
            channel_names: order.iter().map(|&o| self.channel_names[o].clone()).collect(),
            ..self.clone()
        })
    }
}

/// Remove each channel's arithmetic mean.
pub fn subtract_channel_means(rec: &Recording) -> Result<Recording> {
    if rec.n_times == 0 {
        return Err(Error::invalid("empty channel"));
    }
    Ok(rec.map_channels(|ch| {
        let mean = ch.iter().sum::<f64>() / ch.len() as f64;
        let centred: Vec<f64> = ch.iter().map(|v| v - mean).collect();
        // A second pass removes the rounding residue of the first.
        let residue = centred.iter().sum::<f64>() / ch.len() as f64;
        centred.into_iter().map(|v| v - residue).collect()
    }))
}

/// Passband description. `low_hz == 0` degenerates to a lowpass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        Self {
            low_hz: 1.0,
            high_hz: 50.0,
            order: 4,
        }
    }
}

pub const MAX_FILTER_ORDER: usize = 10;

impl BandpassSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.low_hz.is_finite() && self.low_hz >= 0.0) {
            return Err(Error::invalid(format!("low cutoff must be >= 0, got {}", self.low_hz)));
        }
        if !(self.high_hz > self.low_hz) {
            return Err(Error::invalid(format!(
                "high cutoff {} must exceed low cutoff {}",
                self.high_hz, self.low_hz
            )));
        }
        if self.high_hz >= sample_rate_hz / 2.0 {
            return Err(Error::invalid(format!(
                "high cutoff {} Hz is at or above Nyquist ({} Hz)",
                self.high_hz,
                sample_rate_hz / 2.0
            )));
        }
        if self.order == 0 || self.order > MAX_FILTER_ORDER {
            return Err(Error::invalid(format!(
                "filter order must be in 1..={MAX_FILTER_ORDER}, got {}",
                self.order
            )));
        }
        Ok(())
    }
}

/// One biquad, `a[0]` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + zi * (self.b[1] + zi * self.b[2]);
        let den = self.a[0] + zi * (self.a[1] + zi * self.a[2]);
        num / den
    }

    fn dc_gain(&self) -> f64 {
        let den: f64 = self.a.iter().sum();
        self.b.iter().sum::<f64>() / den
    }

    /// Transposed direct form II over `x`, starting from state `z`.
    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Digital Butterworth design via analog prototype, band transform and
    /// bilinear mapping (cutoffs pre-warped).
    pub fn butterworth(spec: &BandpassSpec, sample_rate_hz: f64) -> Result<Self> {
        spec.validate(sample_rate_hz)?;
        let fs2 = 2.0 * sample_rate_hz;
        let warp = |f: f64| fs2 * (std::f64::consts::PI * f / sample_rate_hz).tan();
        let n = spec.order;
        let prototype: Vec<Complex64> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();
        let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);

        let (poles, zero_kind, norm_z) = if spec.low_hz > 0.0 {
            let wl = warp(spec.low_hz);
            let wh = warp(spec.high_hz);
            let bw = wh - wl;
            let w0 = (wl * wh).sqrt();
            let mut poles = Vec::with_capacity(2 * n);
            for p in &prototype {
                let a = p * (bw / 2.0);
                let d = (a * a - w0 * w0).sqrt();
                poles.push(bilinear(a + d));
                poles.push(bilinear(a - d));
            }
            let centre = 2.0 * (w0 / fs2).atan();
            (poles, ZeroKind::Bandpass, Complex64::from_polar(1.0, centre))
        } else {
            let wh = warp(spec.high_hz);
            let poles = prototype.iter().map(|p| bilinear(p * wh)).collect();
            (poles, ZeroKind::Lowpass, Complex64::new(1.0, 0.0))
        };

        let mut sections = group_poles(&poles)
            .into_iter()
            .map(|a| {
                let b = match (zero_kind, a[2] == 0.0) {
                    (ZeroKind::Bandpass, _) => [1.0, 0.0, -1.0],
                    (ZeroKind::Lowpass, false) => [1.0, 2.0, 1.0],
                    (ZeroKind::Lowpass, true) => [1.0, 1.0, 0.0],
                };
                Biquad { b, a }
            })
            .collect::<Vec<_>>();

        let gain = sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(norm_z))
            .norm();
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::invalid("filter design produced a degenerate gain"));
        }
        for b in sections[0].b.iter_mut() {
            *b /= gain;
        }
        Ok(Self { sections })
    }

    /// Steady-state initial conditions for a unit step, per section.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = s.dc_gain();
                let z = [scale * (g - s.b[0]), scale * (s.b[2] - s.a[2] * g)];
                scale *= g;
                z
            })
            .collect()
    }

    /// Causal filtering with states seeded from `x[0]`.
    pub fn filter(&self, x: &mut [f64]) {
        if x.is_empty() {
            return;
        }
        let x0 = x[0];
        for (s, z) in self.sections.iter().zip(self.step_states()) {
            s.run(x, [z[0] * x0, z[1] * x0]);
        }
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        self.filter(&mut ext);
        ext.reverse();
        self.filter(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

#[derive(Clone, Copy)]
enum ZeroKind {
    Bandpass,
    Lowpass,
}

/// Pair conjugate poles into denominators; leftover real poles pair up, and a
/// final odd one becomes a first-order section.
fn group_poles(poles: &[Complex64]) -> Vec<[f64; 3]> {
    let tol = 1e-10;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= tol).map(|p| p.re).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real.sort_by(f64::total_cmp);
    let mut out: Vec<[f64; 3]> = complex
        .iter()
        .map(|p| [1.0, -2.0 * p.re, p.norm_sqr()])
        .collect();
    let mut it = real.chunks(2);
    for pair in &mut it {
        match pair {
            [r1, r2] => out.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => out.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

/// Zero-phase Butterworth bandpass applied to every channel.
pub fn bandpass_filter(rec: &Recording, spec: &BandpassSpec) -> Result<Recording> {
    let filter = SosFilter::butterworth(spec, rec.sample_rate_hz)?;
    Ok(rec.map_channels(|ch| filter.filtfilt(ch)))
}

/// Bandpass then mean removal.
pub fn preprocess(rec: &Recording, spec: &BandpassSpec) -> Result<Recording> {
    subtract_channel_means(&bandpass_filter(rec, spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("C{i}")).collect()
    }

    fn rec(channels: Vec<Vec<f64>>, fs: f64) -> Recording {
        let n = channels.len();
        Recording::new("s01", Prompt::M, channels, fs, names(n)).unwrap()
    }

    #[test]
    fn mean_subtraction_examples() {
        let r = rec(vec![vec![1.0; 4], vec![2.0, 4.0, 6.0, 8.0]], 100.0);
        let out = subtract_channel_means(&r).unwrap();
        assert_eq!(out.channel(0), &[0.0; 4]);
        assert_eq!(out.channel(1), &[-3.0, -1.0, 1.0, 3.0]);

        let r = rec(vec![vec![1.0, 3.0], vec![0.0, 0.0]], 100.0);
        assert_eq!(subtract_channel_means(&r).unwrap().channel(0), &[-1.0, 1.0]);
    }

    #[test]
    fn recording_invariants() {
        assert!(Recording::new("s", Prompt::M, vec![vec![1.0, 2.0]], 1.0, names(1)).is_err());
        assert!(Recording::new("s", Prompt::M, vec![vec![1.0], vec![2.0]], 1.0, names(2)).is_err());
        assert!(Recording::new("s", Prompt::M, vec![vec![1.0, 2.0]; 2], 0.0, names(2)).is_err());
        assert!(Recording::new("s", Prompt::M, vec![vec![1.0, f64::NAN]; 2], 1.0, names(2)).is_err());
        assert!(Recording::new("s", Prompt::M, vec![vec![1.0, 2.0]; 2], 1.0, names(3)).is_err());
    }

    #[test]
    fn spec_validation() {
        let bad = [
            BandpassSpec { low_hz: 10.0, high_hz: 5.0, order: 4 },
            BandpassSpec { low_hz: 1.0, high_hz: 60.0, order: 4 },
            BandpassSpec { low_hz: 1.0, high_hz: 20.0, order: 0 },
            BandpassSpec { low_hz: -1.0, high_hz: 20.0, order: 2 },
        ];
        for spec in bad {
            assert!(spec.validate(100.0).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn constant_channel_is_rejected_by_bandpass() {
        let r = rec(vec![vec![5.0; 1024], vec![-2.0; 1024]], 256.0);
        let out = bandpass_filter(&r, &BandpassSpec::default()).unwrap();
        for (c, level) in [(0, 5.0), (1, 2.0)] {
            for &v in &out.channel(c)[128..896] {
                assert!(v.abs() < 0.01 * level, "{v}");
            }
        }
    }

    #[test]
    fn butterworth_magnitude_matches_closed_form() {
        // |H| of a digital Butterworth lowpass equals 1/sqrt(1 + (tan(w/2)/tan(wc/2))^(2N)).
        let fs = 200.0;
        let spec = BandpassSpec { low_hz: 0.0, high_hz: 30.0, order: 5 };
        let f = SosFilter::butterworth(&spec, fs).unwrap();
        for freq in [1.0, 10.0, 30.0, 45.0, 80.0] {
            let w = 2.0 * std::f64::consts::PI * freq / fs;
            let z = Complex64::from_polar(1.0, w);
            let h = f.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z)).norm();
            let wc = 2.0 * std::f64::consts::PI * 30.0 / fs;
            let ratio = (w / 2.0).tan() / (wc / 2.0).tan();
            let expected = 1.0 / (1.0 + ratio.powi(10)).sqrt();
            assert!((h - expected).abs() < 1e-9, "{freq}: {h} vs {expected}");
        }
    }

    #[test]
    fn bandpass_design_is_stable_with_unit_peak() {
        for order in 1..=8 {
            let spec = BandpassSpec { low_hz: 1.0, high_hz: 50.0, order };
            let f = SosFilter::butterworth(&spec, 256.0).unwrap();
            assert_eq!(f.sections.len(), order);
            for s in &f.sections {
                // Both roots of z^2 + a1 z + a2 inside the unit circle.
                assert!(s.a[2].abs() < 1.0 && s.a[1].abs() < 1.0 + s.a[2], "order {order}: {s:?}");
            }
        }
    }

    #[test]
    fn permutation_roundtrip() {
        let r = rec(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], 10.0);
        let p = r.permute_channels(&[2, 0, 1]).unwrap();
        assert_eq!(p.channel(0), r.channel(2));
        assert_eq!(p.channel_names()[0], "C2");
        assert!(r.permute_channels(&[0, 0, 1]).is_err());
    }

    #[test]
    fn prompt_strings_roundtrip() {
        for p in Prompt::ALL {
            assert_eq!(p.as_str().parse::<Prompt>().unwrap(), p);
        }
        assert!("/aa/".parse::<Prompt>().is_err());
    }
}
