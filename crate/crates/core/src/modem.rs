//! HRM transmitter/receiver chain and the reference schemes it is compared
//! against.
//!
//! The surface is split into `G` contiguous groups. Bits select how many
//! groups (`l_A`) switch their amplifiers on; active groups fill from element
//! 0 upward. Phases always cancel the cascaded channel phase, so every
//! hypothesis maps to a real, non-negative virtual amplitude `H_{l_A}`.

use num_complex::Complex;
use rand::Rng;

use crate::channel::{ChannelRealization, RisLayout};
use crate::error::{config, domain, Result};
use crate::num::{complex_normal, Real};

/// How the amplification budget charges the dynamic noise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetNorm {
    /// `P_A / (P_t‖h_a‖² + σ_dy²)`: one noise term regardless of `N_A`.
    #[default]
    SingleNoise,
    /// `P_A / (P_t‖h_a‖² + N_A σ_dy²)`: every active element amplifies its
    /// own noise.
    Frobenius,
}

/// Link-level powers of the hybrid surface. All values in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrmConfig<F> {
    pub tx_power: F,
    /// Maximum amplification power available to the active elements.
    pub amp_budget: F,
    /// Thermal noise power injected per active element.
    pub dynamic_noise: F,
    /// Receiver noise power.
    pub static_noise: F,
    /// Fixed amplification gain; `None` derives it from `amp_budget`.
    pub gain_override: Option<F>,
    pub budget_norm: BudgetNorm,
}

impl<F: Real> HrmConfig<F> {
    /// -90 dBm static and dynamic noise, 10 dBm amplifier budget, fixed
    /// gain of 10.
    pub fn reference(tx_power: F) -> Self {
        Self {
            tx_power,
            amp_budget: F::of(1e-2),
            dynamic_noise: F::of(1e-12),
            static_noise: F::of(1e-12),
            gain_override: Some(F::of(10.0)),
            budget_norm: BudgetNorm::SingleNoise,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.dynamic_noise = F::zero();
        self.static_noise = F::zero();
        self
    }

    /// Noise powers may be zero (noiseless runs); everything else must be
    /// strictly positive.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: F| v.is_finite();
        if !(self.tx_power > F::zero() && finite(self.tx_power)) {
            return Err(config("transmit power must be positive"));
        }
        if !(self.amp_budget > F::zero() && finite(self.amp_budget)) {
            return Err(config("amplification budget must be positive"));
        }
        if !(self.dynamic_noise >= F::zero() && self.static_noise >= F::zero())
            || !finite(self.dynamic_noise)
            || !finite(self.static_noise)
        {
            return Err(config("noise powers must be non-negative"));
        }
        if let Some(p) = self.gain_override {
            if !(p > F::one() && finite(p)) {
                return Err(config(format!("fixed amplification gain must exceed 1, got {p}")));
            }
        }
        Ok(())
    }
}

/// Natural-binary bit label → number of active groups. MSB first.
pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

/// Inverse of [`bits_to_index`] for a `width`-bit word.
pub fn index_to_bits(index: usize, width: u32) -> Vec<bool> {
    (0..width).rev().map(|k| (index >> k) & 1 == 1).collect()
}

/// Hamming distance between two natural-binary labels.
#[inline]
pub fn bit_errors(a: usize, b: usize) -> u32 {
    (a ^ b).count_ones()
}

/// `log2(n)` for a power of two, `None` otherwise.
pub fn bits_per_index(n: usize) -> Option<u32> {
    n.is_power_of_two().then(|| n.trailing_zeros())
}

/// Phase shifts that cancel the cascaded channel phase: `-(arg h_i + arg g_i)`,
/// wrapped to `[-π, π]`.
pub fn optimal_phases<F: Real>(ch: &ChannelRealization<F>) -> Vec<F> {
    ch.h.iter()
        .zip(&ch.g)
        .map(|(h, g)| {
            let phi = -(h.arg() + g.arg());
            if phi < -F::PI() {
                phi + F::TAU()
            } else if phi > F::PI() {
                phi - F::TAU()
            } else {
                phi
            }
        })
        .collect()
}

/// Amplification gain allowed by the power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSolution<F> {
    pub gain: F,
    /// The budget cannot sustain a gain above one; active elements would
    /// attenuate.
    pub below_unity: bool,
}

/// Largest gain satisfying the amplifier power budget for the active set
/// `h_active`.
pub fn max_gain<F: Real>(cfg: &HrmConfig<F>, h_active: &[Complex<F>]) -> Result<GainSolution<F>> {
    if h_active.is_empty() {
        return Err(domain("max_gain", "active set is empty"));
    }
    let h_power: F = h_active.iter().map(|z| z.norm_sqr()).sum();
    let noise = match cfg.budget_norm {
        BudgetNorm::SingleNoise => cfg.dynamic_noise,
        BudgetNorm::Frobenius => cfg.dynamic_noise * F::of(h_active.len() as f64),
    };
    let denom = cfg.tx_power * h_power + noise;
    if !(denom > F::zero()) {
        return Err(domain("max_gain", "budget denominator is zero"));
    }
    let gain = (cfg.amp_budget / denom).sqrt();
    Ok(GainSolution {
        gain,
        below_unity: gain < F::one(),
    })
}

/// CLT noise power for `n_active` amplifying elements:
/// `p² N_A L_r σ_dy² + σ_st²`.
pub fn clt_noise_power<F: Real>(cfg: &HrmConfig<F>, rx_path_loss: F, gain: F, n_active: usize) -> F {
    gain * gain * F::of(n_active as f64) * rx_path_loss * cfg.dynamic_noise + cfg.static_noise
}

/// Surface configuration for one transmitted index.
#[derive(Debug, Clone, PartialEq)]
pub struct RisState<F> {
    pub active_groups: usize,
    pub active_elements: usize,
    pub passive_elements: usize,
    pub phases: Vec<F>,
    pub gain: F,
}

impl<F: Real> RisState<F> {
    /// Reflection coefficients `ξ_i`: gain `p` on the first `N_A` elements,
    /// unit magnitude elsewhere.
    pub fn reflection_coefficients(&self) -> Vec<Complex<F>> {
        self.phases
            .iter()
            .enumerate()
            .map(|(i, &phi)| {
                let mag = if i < self.active_elements { self.gain } else { F::one() };
                Complex::from_polar(mag, phi)
            })
            .collect()
    }
}

pub fn ris_state<F: Real>(
    ch: &ChannelRealization<F>,
    layout: &RisLayout<F>,
    active_groups: usize,
    gain: F,
) -> Result<RisState<F>> {
    if active_groups >= layout.groups.max(1) {
        return Err(domain(
            "ris_state",
            format!("active group count {active_groups} out of range for {} groups", layout.groups),
        ));
    }
    let active_elements = active_groups * layout.group_size();
    Ok(RisState {
        active_groups,
        active_elements,
        passive_elements: ch.len() - active_elements,
        phases: optimal_phases(ch),
        gain,
    })
}

/// Virtual amplitude constellation of one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSet<F> {
    /// `H_0 … H_{G-1}`.
    pub amplitudes: Vec<F>,
    /// Noise power `N_0(l_A)` seen under each hypothesis.
    pub noise_powers: Vec<F>,
    pub gain: F,
    /// Elements switched per index step (`S`, or `N` for F-HRM).
    pub group_size: usize,
}

impl<F: Real> SymbolSet<F> {
    pub fn order(&self) -> usize {
        self.amplitudes.len()
    }

    /// Bits per symbol, `log2(G)`; zero when `G` is not a power of two.
    pub fn bits_per_symbol(&self) -> u32 {
        bits_per_index(self.order()).unwrap_or(0)
    }

    /// Natural-binary label of index `l`.
    pub fn label(&self, l: usize) -> Vec<bool> {
        index_to_bits(l, self.bits_per_symbol())
    }
}

fn symbol_set_with<F: Real>(
    ch: &ChannelRealization<F>,
    order: usize,
    group_size: usize,
    cfg: &HrmConfig<F>,
    gain: F,
) -> Result<SymbolSet<F>> {
    if !(gain >= F::one()) {
        return Err(domain("hrm_symbol_set", format!("gain must be at least 1, got {gain}")));
    }
    if order == 0 || (order - 1) * group_size > ch.len() {
        return Err(domain("hrm_symbol_set", "layout larger than channel realization"));
    }
    let mut group_sums = Vec::with_capacity(order);
    let mut magnitudes = ch.cascade_magnitudes();
    for _ in 0..order {
        group_sums.push(magnitudes.by_ref().take(group_size).sum::<F>());
    }
    let rest: F = magnitudes.sum();
    let passive_total: F = group_sums.iter().copied().sum::<F>() + rest;

    let mut amplitudes = Vec::with_capacity(order);
    let mut noise_powers = Vec::with_capacity(order);
    let mut active_sum = F::zero();
    for (l, s) in group_sums.iter().enumerate() {
        let passive = passive_total - active_sum;
        amplitudes.push(gain * active_sum + passive);
        noise_powers.push(clt_noise_power(cfg, ch.rx_path_loss, gain, l * group_size));
        active_sum += *s;
    }
    Ok(SymbolSet {
        amplitudes,
        noise_powers,
        gain,
        group_size,
    })
}

/// `H_{l_A} = p Σ_{i<N_A}|h_i||g_i| + Σ_{i≥N_A}|h_i||g_i|` for every `l_A`.
pub fn hrm_symbol_set<F: Real>(
    ch: &ChannelRealization<F>,
    layout: &RisLayout<F>,
    cfg: &HrmConfig<F>,
    gain: F,
) -> Result<SymbolSet<F>> {
    symbol_set_with(ch, layout.groups, layout.group_size(), cfg, gain)
}

/// Two-level set where the whole surface is either passive or active.
pub fn fhrm_symbol_set<F: Real>(
    ch: &ChannelRealization<F>,
    cfg: &HrmConfig<F>,
    gain: F,
) -> Result<SymbolSet<F>> {
    symbol_set_with(ch, 2, ch.len(), cfg, gain)
}

/// Adds the per-element dynamic noise `p Σ_{i<N_A} |g_i| ṽ_i` and the static
/// noise to `signal`.
fn add_noise<F: Real, R: Rng + ?Sized>(
    signal: Complex<F>,
    ch: &ChannelRealization<F>,
    cfg: &HrmConfig<F>,
    gain: F,
    n_active: usize,
    rng: &mut R,
) -> Complex<F> {
    let mut y = signal;
    if cfg.dynamic_noise > F::zero() {
        for g in &ch.g[..n_active] {
            y = y + complex_normal(rng, cfg.dynamic_noise).scale(gain * g.norm());
        }
    }
    if cfg.static_noise > F::zero() {
        y = y + complex_normal(rng, cfg.static_noise);
    }
    y
}

/// Received sample for index `l_A`:
/// `√P_t H_{l_A} + p Σ_{i≤N_A}|g_i|ṽ_i + n_s`.
///
/// Each active element contributes its own amplifier noise draw.
pub fn simulate_rx<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    layout: &RisLayout<F>,
    cfg: &HrmConfig<F>,
    gain: F,
    active_groups: usize,
    rng: &mut R,
) -> Result<Complex<F>> {
    if active_groups >= layout.groups {
        return Err(domain("simulate_rx", "active group index out of range"));
    }
    let n_active = active_groups * layout.group_size();
    let amplitude = ch
        .cascade_magnitudes()
        .enumerate()
        .map(|(i, m)| if i < n_active { gain * m } else { m })
        .sum::<F>();
    let signal = Complex::new(cfg.tx_power.sqrt() * amplitude, F::zero());
    Ok(add_noise(signal, ch, cfg, gain, n_active, rng))
}

/// Received sample for index `l_A` given a precomputed symbol set.
pub fn transmit<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    symbols: &SymbolSet<F>,
    cfg: &HrmConfig<F>,
    active_groups: usize,
    rng: &mut R,
) -> Complex<F> {
    let signal = Complex::new(cfg.tx_power.sqrt() * symbols.amplitudes[active_groups], F::zero());
    add_noise(
        signal,
        ch,
        cfg,
        symbols.gain,
        active_groups * symbols.group_size,
        rng,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<F> {
    pub index: usize,
    /// Per-hypothesis metric; smaller is better for the minimum-distance
    /// detector, larger is better for full ML.
    pub metrics: Vec<F>,
}

impl<F> Detection<F> {
    pub fn bit_errors(&self, transmitted: usize) -> u32 {
        bit_errors(self.index, transmitted)
    }
}

/// `argmin_l |y − √P_t H_l|²`; ties go to the smaller index.
pub fn detect_simple<F: Real>(y: Complex<F>, symbols: &SymbolSet<F>, tx_power: F) -> Detection<F> {
    let amp = tx_power.sqrt();
    let metrics: Vec<F> = symbols
        .amplitudes
        .iter()
        .map(|&h| (y - Complex::new(amp * h, F::zero())).norm_sqr())
        .collect();
    let mut best = 0;
    for (l, &m) in metrics.iter().enumerate().skip(1) {
        if m < metrics[best] {
            best = l;
        }
    }
    Detection { index: best, metrics }
}

/// Log-likelihood up to a constant. Without noise the likelihood is
/// degenerate, so fall back to the negated distance.
fn ml_metric<F: Real>(distance: F, noise: F) -> F {
    if noise > F::zero() {
        -noise.ln() - distance / noise
    } else {
        -distance
    }
}

/// `argmax_l [−ln N_0(l) − |y − √P_t H_l|²/N_0(l)]`; ties go to the smaller
/// index.
pub fn detect_full_ml<F: Real>(y: Complex<F>, symbols: &SymbolSet<F>, tx_power: F) -> Detection<F> {
    let amp = tx_power.sqrt();
    let metrics: Vec<F> = symbols
        .amplitudes
        .iter()
        .zip(&symbols.noise_powers)
        .map(|(&h, &n0)| ml_metric((y - Complex::new(amp * h, F::zero())).norm_sqr(), n0))
        .collect();
    let mut best = 0;
    for (l, &m) in metrics.iter().enumerate().skip(1) {
        if m > metrics[best] {
            best = l;
        }
    }
    Detection { index: best, metrics }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detector {
    #[default]
    MinDistance,
    FullMl,
}

impl Detector {
    pub fn detect<F: Real>(self, y: Complex<F>, symbols: &SymbolSet<F>, tx_power: F) -> Detection<F> {
        match self {
            Detector::MinDistance => detect_simple(y, symbols, tx_power),
            Detector::FullMl => detect_full_ml(y, symbols, tx_power),
        }
    }
}

/// Bits carried and bits received in error by one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub bits: u32,
    pub bit_errors: u32,
}

/// One HRM symbol: uniform index, transmission, detection.
pub fn hrm_trial<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    symbols: &SymbolSet<F>,
    cfg: &HrmConfig<F>,
    detector: Detector,
    rng: &mut R,
) -> TrialOutcome {
    let l = rng.random_range(0..symbols.order());
    let y = transmit(ch, symbols, cfg, l, rng);
    let det = detector.detect(y, symbols, cfg.tx_power);
    TrialOutcome {
        bits: symbols.bits_per_symbol(),
        bit_errors: det.bit_errors(l),
    }
}

/// Gray label of PSK position `k`.
#[inline]
pub fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// PSK position carrying Gray label `label`.
#[inline]
pub fn gray_inverse(label: usize) -> usize {
    let mut k = label;
    let mut shift = label >> 1;
    while shift != 0 {
        k ^= shift;
        shift >>= 1;
    }
    k
}

/// Unit-energy M-PSK point at position `k`, rotated by `offset` radians.
#[inline]
pub fn psk_point<F: Real>(k: usize, order: usize, offset: F) -> Complex<F> {
    let angle = F::TAU() * F::of(k as f64) / F::of(order as f64) + offset;
    Complex::from_polar(F::one(), angle)
}

fn check_psk_order(op: &'static str, order: usize) -> Result<u32> {
    bits_per_index(order).ok_or_else(|| domain(op, format!("PSK order must be a power of two, got {order}")))
}

/// Nearest point of a constellation, smallest index on ties.
fn nearest<F: Real>(y: Complex<F>, points: impl Iterator<Item = Complex<F>>) -> usize {
    let mut best = 0;
    let mut best_d = F::infinity();
    for (i, p) in points.enumerate() {
        let d = (y - p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Fully passive surface with phase alignment and M-PSK at the transmitter;
/// ML detection over the M points.
pub fn baseline_passive_psk<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    cfg: &HrmConfig<F>,
    order: usize,
    rng: &mut R,
) -> Result<TrialOutcome> {
    psk_over_surface(ch, cfg, F::one(), 0, order, rng, "baseline_passive_psk")
}

/// Fully active surface: every element amplifies with `gain` and injects
/// dynamic noise.
pub fn baseline_active_psk<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    cfg: &HrmConfig<F>,
    gain: F,
    order: usize,
    rng: &mut R,
) -> Result<TrialOutcome> {
    psk_over_surface(ch, cfg, gain, ch.len(), order, rng, "baseline_active_psk")
}

fn psk_over_surface<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    cfg: &HrmConfig<F>,
    gain: F,
    n_active: usize,
    order: usize,
    rng: &mut R,
    op: &'static str,
) -> Result<TrialOutcome> {
    let bits = check_psk_order(op, order)?;
    let magnitude: F = ch.cascade_magnitudes().sum();
    let scale = cfg.tx_power.sqrt() * gain * magnitude;
    let label = rng.random_range(0..order);
    let s = psk_point(gray_inverse(label), order, F::zero());
    let y = add_noise(s.scale(scale), ch, cfg, gain, n_active, rng);
    let k_hat = nearest(y, (0..order).map(|k| psk_point(k, order, F::zero()).scale(scale)));
    Ok(TrialOutcome {
        bits,
        bit_errors: bit_errors(label, gray(k_hat)),
    })
}

/// Reflection-modulation reference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RmConfig {
    /// Number of groups; `log2(groups)` bits pick which group is switched
    /// off.
    pub groups: usize,
    pub psk_order: usize,
    /// Keep every group on (single pattern, no index bits).
    pub all_on: bool,
}

impl RmConfig {
    pub fn patterns(&self) -> usize {
        if self.all_on {
            1
        } else {
            self.groups
        }
    }

    pub fn bits(&self) -> u32 {
        bits_per_index(self.patterns()).unwrap_or(0) + bits_per_index(self.psk_order).unwrap_or(0)
    }
}

/// Reflection modulation: index bits switch one group off, the remaining
/// elements stay phase-aligned, and pattern `b` sends M-PSK rotated by
/// `2πb/(GM)` so the joint constellation interleaves in phase. Joint ML over
/// (pattern, symbol).
pub fn baseline_rm<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    cfg: &HrmConfig<F>,
    rm: &RmConfig,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let op = "baseline_rm";
    let psk_bits = check_psk_order(op, rm.psk_order)?;
    let patterns = rm.patterns();
    let index_bits = bits_per_index(patterns)
        .ok_or_else(|| domain(op, format!("group count must be a power of two, got {}", rm.groups)))?;
    if rm.groups == 0 || ch.len() % rm.groups != 0 {
        return Err(domain(op, "group count must divide the element count"));
    }
    let group_size = ch.len() / rm.groups;
    let magnitudes: Vec<F> = ch.cascade_magnitudes().collect();
    let total: F = magnitudes.iter().copied().sum();
    let amp = cfg.tx_power.sqrt();
    let order = rm.psk_order;
    let step = F::TAU() / F::of((rm.groups * order) as f64);
    let amplitude = |b: usize| -> F {
        if rm.all_on {
            total
        } else {
            total - magnitudes[b * group_size..(b + 1) * group_size].iter().copied().sum::<F>()
        }
    };
    let rotation = |b: usize| if rm.all_on { F::zero() } else { step * F::of(b as f64) };

    let pattern = if patterns > 1 { rng.random_range(0..patterns) } else { 0 };
    let label = rng.random_range(0..order);
    let s = psk_point(gray_inverse(label), order, rotation(pattern)).scale(amp * amplitude(pattern));
    let y = add_noise(s, ch, cfg, F::one(), 0, rng);

    let points = (0..patterns).flat_map(|b| {
        let a = amp * amplitude(b);
        let rot = rotation(b);
        (0..order).map(move |k| psk_point(k, order, rot).scale(a))
    });
    let best = nearest(y, points);
    let (b_hat, k_hat) = (best / order, best % order);
    Ok(TrialOutcome {
        bits: index_bits + psk_bits,
        bit_errors: bit_errors(pattern, b_hat) + bit_errors(label, gray(k_hat)),
    })
}

/// HRM with an M-PSK carrier: `y = √P_t s H_{l_A} + noise`, joint ML over
/// `(s, l_A)` with the per-hypothesis noise power. `order = 1` is plain HRM
/// with full-ML detection.
pub fn hrm_with_psk<F: Real, R: Rng + ?Sized>(
    ch: &ChannelRealization<F>,
    symbols: &SymbolSet<F>,
    cfg: &HrmConfig<F>,
    order: usize,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let psk_bits = check_psk_order("hrm_with_psk", order)?;
    let l = rng.random_range(0..symbols.order());
    let label = if order > 1 { rng.random_range(0..order) } else { 0 };
    let s = psk_point(gray_inverse(label), order, F::zero());
    let amp = cfg.tx_power.sqrt();
    let signal = s.scale(amp * symbols.amplitudes[l]);
    let y = add_noise(signal, ch, cfg, symbols.gain, l * symbols.group_size, rng);

    let mut best = (0, 0);
    let mut best_metric = F::neg_infinity();
    let mut first = true;
    for (li, (&h, &n0)) in symbols.amplitudes.iter().zip(&symbols.noise_powers).enumerate() {
        for k in 0..order {
            let p = psk_point(k, order, F::zero()).scale(amp * h);
            let m = ml_metric((y - p).norm_sqr(), n0);
            if first || m > best_metric {
                best_metric = m;
                best = (li, k);
                first = false;
            }
        }
    }
    Ok(TrialOutcome {
        bits: symbols.bits_per_symbol() + psk_bits,
        bit_errors: bit_errors(l, best.0) + bit_errors(label, gray(best.1)),
    })
}
