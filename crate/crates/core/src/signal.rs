//! Signal conditioning: bandpass filtering, per-instance normalization,
//! missing-sample encoding, and inter-device clock alignment.
//!
//! Missing samples are `f64::NAN` in memory throughout the crate. Every
//! stage preserves missingness; [`encode_missing`] rewrites the gaps to the
//! -1.0 sentinel the models consume, as the last step of preprocessing.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Pearson correlation below which an alignment estimate is flagged.
pub const LOW_CONFIDENCE_CORRELATION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Ecg,
    Spo2,
    HeartRate,
}

impl ChannelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::Ecg => "ecg",
            ChannelKind::Spo2 => "spo2",
            ChannelKind::HeartRate => "hr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ecg" => Ok(ChannelKind::Ecg),
            "spo2" => Ok(ChannelKind::Spo2),
            "hr" => Ok(ChannelKind::HeartRate),
            other => Err(Error::InvalidInput(format!(
                "unknown channel kind {other:?} (expected ecg, spo2, or hr)"
            ))),
        }
    }
}

/// One uniformly sampled channel of one recording. Gaps are NaN samples.
#[derive(Debug, Clone)]
pub struct SignalChannel {
    pub patient_id: String,
    pub kind: ChannelKind,
    pub rate_hz: f64,
    /// Recording start, seconds since the Unix epoch.
    pub start_epoch_s: f64,
    pub values: Vec<f64>,
}

impl SignalChannel {
    pub fn new(
        patient_id: impl Into<String>,
        kind: ChannelKind,
        rate_hz: f64,
        start_epoch_s: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive and finite, got {rate_hz}"
            )));
        }
        Ok(SignalChannel {
            patient_id: patient_id.into(),
            kind,
            rate_hz,
            start_epoch_s,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.rate_hz
    }

    pub fn n_missing(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    /// Half-open index ranges of consecutive present (finite) samples.
    pub fn present_segments(&self) -> Vec<(usize, usize)> {
        present_segments(&self.values)
    }
}

fn present_segments(values: &[f64]) -> Vec<(usize, usize)> {
    let mut segments = Vec::new();
    let mut start = None;
    for (i, v) in values.iter().enumerate() {
        match (v.is_finite(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                segments.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        segments.push((s, values.len()));
    }
    segments
}

/// Butterworth bandpass design parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Run the filter forward and then backward, cancelling phase delay at
    /// the cost of non-causality. Off by default: the detector is meant to
    /// work on streams.
    pub zero_phase: bool,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        BandpassSpec {
            order: 2,
            low_hz: 5.0,
            high_hz: 35.0,
            zero_phase: false,
        }
    }
}

// Minimal complex arithmetic for the filter design; only the handful of
// operations needed here.
#[derive(Debug, Clone, Copy)]
struct C {
    re: f64,
    im: f64,
}

impl C {
    fn new(re: f64, im: f64) -> Self {
        C { re, im }
    }

    fn real(re: f64) -> Self {
        C { re, im: 0.0 }
    }

    fn add(self, o: C) -> C {
        C::new(self.re + o.re, self.im + o.im)
    }

    fn sub(self, o: C) -> C {
        C::new(self.re - o.re, self.im - o.im)
    }

    fn mul(self, o: C) -> C {
        C::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    fn div(self, o: C) -> C {
        let d = o.re * o.re + o.im * o.im;
        C::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }

    fn scale(self, s: f64) -> C {
        C::new(self.re * s, self.im * s)
    }

    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    fn sqrt(self) -> C {
        let r = self.abs();
        let re = ((r + self.re) / 2.0).max(0.0).sqrt();
        let im = ((r - self.re) / 2.0).max(0.0).sqrt();
        C::new(re, if self.im < 0.0 { -im } else { im })
    }
}

/// One second-order section, direct form II transposed, monic denominator.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn run_in_place(&self, xs: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for x in xs.iter_mut() {
            let xin = *x;
            let y = self.b0 * xin + s1;
            s1 = self.b1 * xin - self.a1 * y + s2;
            s2 = self.b2 * xin - self.a2 * y;
            *x = y;
        }
    }
}

/// A designed filter bound to one sample rate.
#[derive(Debug, Clone)]
pub struct BandpassFilter {
    sections: Vec<Biquad>,
    rate_hz: f64,
    zero_phase: bool,
    /// Present segments shorter than this many samples carry only filter
    /// transient, never settled output, and are flagged missing instead.
    warmup_samples: usize,
}

impl BandpassFilter {
    /// Designs an analog Butterworth bandpass prototype and discretizes it
    /// with the bilinear transform (cutoffs prewarped), yielding `order`
    /// second-order sections.
    pub fn design(spec: &BandpassSpec, rate_hz: f64) -> Result<Self> {
        if spec.order == 0 {
            return Err(Error::InvalidConfig("filter order must be >= 1".into()));
        }
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive and finite, got {rate_hz}"
            )));
        }
        let nyquist = rate_hz / 2.0;
        if !(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz && spec.high_hz < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "band edges must satisfy 0 < low < high < rate/2; got {} / {} at rate {}",
                spec.low_hz, spec.high_hz, rate_hz
            )));
        }

        let n = spec.order;
        let k = 2.0 * rate_hz;
        // Prewarped analog edge frequencies (rad/s).
        let wl = k * (PI * spec.low_hz / rate_hz).tan();
        let wh = k * (PI * spec.high_hz / rate_hz).tan();
        let w0_sq = wl * wh;
        let bw = wh - wl;

        // Unit-cutoff lowpass prototype poles, then the lowpass-to-bandpass
        // substitution s -> (s^2 + w0^2) / (bw * s). Each prototype pole
        // splits into two; the n prototype zeros at infinity become n zeros
        // at s = 0 plus n more at infinity.
        let mut analog_poles = Vec::with_capacity(2 * n);
        for i in 1..=n {
            let theta = PI * (2 * i + n - 1) as f64 / (2 * n) as f64;
            let p = C::new(theta.cos(), theta.sin());
            let q = p.scale(bw / 2.0);
            let d = q.mul(q).sub(C::real(w0_sq)).sqrt();
            analog_poles.push(q.add(d));
            analog_poles.push(q.sub(d));
        }

        // Bilinear transform: z = (k + s) / (k - s). The n zeros at s = 0
        // map to z = 1 and the n at infinity to z = -1. Overall gain is
        // bw^n * k^n / prod(k - p); the product is real up to roundoff
        // because the poles come in conjugate pairs.
        let mut denom = C::real(1.0);
        let mut digital_poles = Vec::with_capacity(2 * n);
        for &p in &analog_poles {
            let km = C::real(k).sub(p);
            denom = denom.mul(km);
            digital_poles.push(C::real(k).add(p).div(km));
        }
        let gain_c = C::real((bw * k).powi(n as i32)).div(denom);
        debug_assert!(gain_c.im.abs() <= 1e-9 * gain_c.re.abs().max(1.0));
        let gain = gain_c.re;

        // Pair the 2n poles into n sections: each positive-imaginary pole
        // with its conjugate, leftover real poles with each other.
        let im_tol = 1e-8;
        let mut complex: Vec<C> = digital_poles
            .iter()
            .filter(|p| p.im > im_tol * (1.0 + p.abs()))
            .copied()
            .collect();
        let mut reals: Vec<f64> = digital_poles
            .iter()
            .filter(|p| p.im.abs() <= im_tol * (1.0 + p.abs()))
            .map(|p| p.re)
            .collect();
        complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        reals.sort_by(f64::total_cmp);
        if complex.len() + reals.len() / 2 != n || reals.len() % 2 != 0 {
            return Err(Error::InvalidConfig(
                "filter design produced an unpairable pole set; band edges \
                 are likely too close to 0 or Nyquist"
                    .into(),
            ));
        }

        let mut sections = Vec::with_capacity(n);
        for p in complex {
            sections.push(Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * p.re,
                a2: p.re * p.re + p.im * p.im,
            });
        }
        for pair in reals.chunks(2) {
            sections.push(Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -(pair[0] + pair[1]),
                a2: pair[0] * pair[1],
            });
        }
        sections[0].b0 *= gain;
        sections[0].b2 *= gain;

        let warmup_s = (3.0 / spec.low_hz).max(1.0);
        Ok(BandpassFilter {
            sections,
            rate_hz,
            zero_phase: spec.zero_phase,
            warmup_samples: (warmup_s * rate_hz).ceil() as usize,
        })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn warmup_samples(&self) -> usize {
        self.warmup_samples
    }

    /// Effective magnitude response at `freq_hz` (squared when zero-phase,
    /// since the signal passes through the filter twice).
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.rate_hz;
        let zinv = C::new(w.cos(), -w.sin());
        let zinv2 = zinv.mul(zinv);
        let mut h = C::real(1.0);
        for s in &self.sections {
            let num = C::real(s.b0)
                .add(zinv.scale(s.b1))
                .add(zinv2.scale(s.b2));
            let den = C::real(1.0)
                .add(zinv.scale(s.a1))
                .add(zinv2.scale(s.a2));
            h = h.mul(num.div(den));
        }
        let m = h.abs();
        if self.zero_phase {
            m * m
        } else {
            m
        }
    }

    fn run_cascade(&self, xs: &mut [f64]) {
        for s in &self.sections {
            s.run_in_place(xs);
        }
        if self.zero_phase {
            xs.reverse();
            for s in &self.sections {
                s.run_in_place(xs);
            }
            xs.reverse();
        }
    }

    /// Filters each present segment independently from zero state. Segments
    /// shorter than the warm-up length are flagged missing in the output;
    /// missing positions stay missing.
    pub fn apply(&self, channel: &SignalChannel) -> SignalChannel {
        let mut out = channel.clone();
        out.values = vec![f64::NAN; channel.values.len()];
        for (start, end) in channel.present_segments() {
            if end - start < self.warmup_samples {
                continue;
            }
            let mut seg = channel.values[start..end].to_vec();
            self.run_cascade(&mut seg);
            out.values[start..end].copy_from_slice(&seg);
        }
        out
    }
}

/// Designs the filter for the channel's rate and applies it.
pub fn butterworth_bandpass(channel: &SignalChannel, spec: &BandpassSpec) -> Result<SignalChannel> {
    Ok(BandpassFilter::design(spec, channel.rate_hz)?.apply(channel))
}

/// Rescales the present samples to [0, 1]; missing positions are untouched.
/// A constant signal maps to all zeros. Errs when every sample is missing.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if min > max {
        return Err(Error::InvalidInput(
            "cannot normalize: every sample is missing".into(),
        ));
    }
    let span = max - min;
    Ok(values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                v
            } else if span == 0.0 {
                0.0
            } else {
                (v - min) / span
            }
        })
        .collect())
}

/// Writes the -1.0 sentinel the models consume at every masked position.
/// Present values are assumed already normalized to [0, 1], so the sentinel
/// is disjoint from them.
pub fn encode_missing(values: &[f64], missing: &[bool]) -> Result<Vec<f64>> {
    if values.len() != missing.len() {
        return Err(Error::InvalidInput(format!(
            "values ({}) and mask ({}) lengths differ",
            values.len(),
            missing.len()
        )));
    }
    Ok(values
        .iter()
        .zip(missing)
        .map(|(&v, &m)| if m { -1.0 } else { v })
        .collect())
}

/// [`encode_missing`] with the mask taken from NaN positions.
pub fn encode_missing_nan(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| if v.is_finite() { v } else { -1.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentEstimate {
    /// How much `b` is delayed relative to `a`, in seconds. Positive means
    /// `b[t]` matches `a[t - lag]`.
    pub lag_s: f64,
    pub peak_correlation: f64,
    /// Peak correlation below [`LOW_CONFIDENCE_CORRELATION`]: the estimate
    /// should not be applied automatically.
    pub low_confidence: bool,
}

/// Estimates the clock offset between two equally sampled channels by
/// scanning integer-sample lags in `[-max_lag_s, max_lag_s]` for the
/// highest Pearson correlation. Ties prefer the smaller |lag|. The shorter
/// channel must cover at least ten times the lag range.
pub fn estimate_alignment_lag(
    a: &SignalChannel,
    b: &SignalChannel,
    max_lag_s: f64,
) -> Result<AlignmentEstimate> {
    if (a.rate_hz - b.rate_hz).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "alignment requires equal rates, got {} and {}",
            a.rate_hz, b.rate_hz
        )));
    }
    if !(max_lag_s > 0.0) {
        return Err(Error::InvalidInput(format!(
            "max lag must be positive, got {max_lag_s}"
        )));
    }
    let max_lag = (max_lag_s * a.rate_hz).round() as i64;
    let overlap = a.len().min(b.len());
    if max_lag < 1 || overlap < 10 * max_lag as usize {
        return Err(Error::AlignmentFailed(format!(
            "overlap of {overlap} samples is too short for a ±{max_lag} sample lag scan \
             (need at least {})",
            10 * max_lag
        )));
    }

    let mut best_lag = 0i64;
    let mut best_corr = f64::NEG_INFINITY;
    // 0, 1, -1, 2, -2, ... so that ties resolve to the smallest |lag|.
    let candidates = std::iter::once(0i64)
        .chain((1..=max_lag).flat_map(|l| [l, -l]));
    for lag in candidates {
        let i0 = 0.max(-lag);
        let i1 = (a.len() as i64).min(b.len() as i64 - lag);
        if i1 - i0 < 2 {
            continue;
        }
        let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in i0..i1 {
            let x = a.values[i as usize];
            let y = b.values[(i + lag) as usize];
            if x.is_finite() && y.is_finite() {
                n += 1.0;
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
            }
        }
        if n < 2.0 {
            continue;
        }
        let den = (n * sxx - sx * sx) * (n * syy - sy * sy);
        if den <= 0.0 {
            continue;
        }
        let corr = (n * sxy - sx * sy) / den.sqrt();
        if corr > best_corr {
            best_corr = corr;
            best_lag = lag;
        }
    }
    if !best_corr.is_finite() {
        return Err(Error::AlignmentFailed(
            "no lag had two overlapping present samples with nonzero variance".into(),
        ));
    }
    Ok(AlignmentEstimate {
        lag_s: best_lag as f64 / a.rate_hz,
        peak_correlation: best_corr,
        low_confidence: best_corr < LOW_CONFIDENCE_CORRELATION,
    })
}
