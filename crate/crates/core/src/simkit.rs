//! Deterministic parallel Monte Carlo engine.
//!
//! Trial `t` of sweep point `k` always draws from stream `(k, t)` of the
//! master seed. Trials run in batches whose boundaries depend only on the
//! trial policy, and error counts are merged as integers, so results are
//! identical for any thread count.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::analysis::{mutual_information, MiEstimate};
use crate::channel::{ChannelModel, ChannelRealization, LinkGeometry, RisLayout};
use crate::error::{config, Result};
use crate::modem::{
    baseline_active_psk, baseline_passive_psk, baseline_rm, bits_per_index, fhrm_symbol_set, hrm_symbol_set,
    hrm_trial, hrm_with_psk, max_gain, Detector, HrmConfig, RmConfig, TrialOutcome,
};
use crate::num::{compensated_sum, dbm_to_watts, Real};
use crate::power::{
    energy_efficiency, instantaneous_snr_with, ris_power, total_power, PowerModel, RisArchitecture,
};
use crate::rng::{Streams, TrialRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// HRM over `G` groups with an unmodulated carrier.
    Hrm,
    /// Whole surface toggles between passive and active.
    Fhrm,
    /// HRM with an M-PSK carrier.
    HrmPsk,
    /// Fully passive surface, M-PSK.
    PassivePsk,
    /// Fully active surface, M-PSK.
    ActivePsk,
    /// Reflection modulation with one group off per pattern.
    Rm,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Hrm,
        Scheme::Fhrm,
        Scheme::HrmPsk,
        Scheme::PassivePsk,
        Scheme::ActivePsk,
        Scheme::Rm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Hrm => "hrm",
            Scheme::Fhrm => "fhrm",
            Scheme::HrmPsk => "hrm_psk",
            Scheme::PassivePsk => "passive_psk",
            Scheme::ActivePsk => "active_psk",
            Scheme::Rm => "rm",
        }
    }

    fn uses_groups(self) -> bool {
        matches!(self, Scheme::Hrm | Scheme::HrmPsk | Scheme::Rm)
    }

    fn uses_psk(self) -> bool {
        matches!(self, Scheme::HrmPsk | Scheme::PassivePsk | Scheme::ActivePsk | Scheme::Rm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scheme {s:?}"))
    }
}

/// The single swept parameter of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    /// Transmit power in dBm.
    TxPowerDbm(Vec<f64>),
    Elements(Vec<usize>),
    Groups(Vec<usize>),
    /// Correlated square surface with element side `v·λ`.
    Spacing(Vec<f64>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::TxPowerDbm(_) => "tx_power_dbm",
            Axis::Elements(_) => "elements",
            Axis::Groups(_) => "groups",
            Axis::Spacing(_) => "spacing_wavelengths",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::TxPowerDbm(v) | Axis::Spacing(v) => v.clone(),
            Axis::Elements(v) | Axis::Groups(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::TxPowerDbm(v) | Axis::Spacing(v) => v.len(),
            Axis::Elements(v) | Axis::Groups(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.values();
        if values.is_empty() {
            return Err(config(format!("{} grid is empty", self.name())));
        }
        if values.iter().any(|v| !v.is_finite()) || !values.windows(2).all(|w| w[0] < w[1]) {
            return Err(config(format!(
                "{} grid must be finite and strictly increasing",
                self.name()
            )));
        }
        Ok(())
    }

    /// Applies the `index`-th grid value to a copy of the fixed parameters.
    fn apply<F: Real>(&self, index: usize, layout: &mut RisLayout<F>, cfg: &mut HrmConfig<F>) {
        match self {
            Axis::TxPowerDbm(v) => cfg.tx_power = dbm_to_watts(F::of(v[index])),
            Axis::Elements(v) => layout.elements = v[index],
            Axis::Groups(v) => layout.groups = v[index],
            Axis::Spacing(v) => {
                let side = layout.wavelength * F::of(v[index]);
                layout.element_width = side;
                layout.element_height = side;
                layout.correlated = true;
            }
        }
    }
}

/// When a point stops accumulating trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPolicy {
    pub target_errors: u64,
    pub max_trials: u64,
}

impl Default for TrialPolicy {
    fn default() -> Self {
        Self {
            target_errors: 100,
            max_trials: 100_000_000,
        }
    }
}

const FIRST_BATCH: u64 = 256;
const MAX_BATCH: u64 = 65_536;

/// Integer totals of a BER estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
}

impl Tally {
    fn add(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            bits: self.bits + o.bits,
            bit_errors: self.bit_errors + o.bit_errors,
        }
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    /// Normal-approximation 95% half-width.
    pub fn ci95(&self) -> f64 {
        if self.bits == 0 {
            return 0.0;
        }
        let p = self.ber();
        1.96 * (p * (1.0 - p) / self.bits as f64).sqrt()
    }
}

/// Runs `trial` on streams `(point, 0), (point, 1), …` until the policy stops.
///
/// `init` builds per-worker scratch state.
pub fn estimate_ber<S, I, T>(policy: &TrialPolicy, streams: &Streams, point: u64, init: I, trial: T) -> Result<Tally>
where
    I: Fn() -> S + Sync + Send,
    T: Fn(&mut S, &mut TrialRng) -> Result<TrialOutcome> + Sync + Send,
{
    let mut tally = Tally::default();
    let mut batch = FIRST_BATCH;
    while tally.trials < policy.max_trials && tally.bit_errors < policy.target_errors {
        let start = tally.trials;
        let end = start + batch.min(policy.max_trials - start);
        let part = (start..end)
            .into_par_iter()
            .map_init(&init, |scratch, t| {
                let mut rng = streams.stream(point, t);
                trial(scratch, &mut rng).map(|o| Tally {
                    trials: 1,
                    bits: o.bits as u64,
                    bit_errors: o.bit_errors as u64,
                })
            })
            .try_reduce(Tally::default, |a, b| Ok(a.add(b)))?;
        tally = tally.add(part);
        batch = (batch * 2).min(MAX_BATCH);
    }
    Ok(tally)
}

/// A BER sweep: one scheme, one swept axis, everything else fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<F> {
    pub scheme: Scheme,
    pub axis: Axis,
    pub geometry: LinkGeometry<F>,
    pub layout: RisLayout<F>,
    pub cfg: HrmConfig<F>,
    /// PSK order for the schemes that modulate the carrier.
    pub psk_order: usize,
    pub detector: Detector,
    pub policy: TrialPolicy,
}

impl<F: Real> SweepSpec<F> {
    pub fn new(scheme: Scheme, axis: Axis, layout: RisLayout<F>, cfg: HrmConfig<F>) -> Self {
        Self {
            scheme,
            axis,
            geometry: LinkGeometry::reference(),
            layout,
            cfg,
            psk_order: 1,
            detector: Detector::MinDistance,
            policy: TrialPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axis.validate()?;
        if matches!(self.axis, Axis::Groups(_)) && !self.scheme.uses_groups() {
            return Err(config(format!(
                "scheme {} has no group count to sweep",
                self.scheme
            )));
        }
        if self.policy.max_trials == 0 {
            return Err(config("max_trials must be positive"));
        }
        for k in 0..self.axis.len() {
            let (layout, cfg) = self.point(k);
            self.geometry.validate()?;
            layout.validate()?;
            cfg.validate()?;
            self.bits_per_trial(&layout)?;
        }
        Ok(())
    }

    /// Layout and link configuration at grid point `index`.
    pub fn point(&self, index: usize) -> (RisLayout<F>, HrmConfig<F>) {
        let mut layout = self.layout;
        let mut cfg = self.cfg;
        self.axis.apply(index, &mut layout, &mut cfg);
        (layout, cfg)
    }

    fn bits_per_trial(&self, layout: &RisLayout<F>) -> Result<u32> {
        let psk = if self.scheme.uses_psk() {
            let min = if self.scheme == Scheme::HrmPsk { 1 } else { 2 };
            match bits_per_index(self.psk_order) {
                Some(b) if self.psk_order >= min => b,
                _ => return Err(config(format!("invalid PSK order {} for {}", self.psk_order, self.scheme))),
            }
        } else {
            0
        };
        let index = match self.scheme {
            Scheme::Hrm | Scheme::HrmPsk | Scheme::Rm => match bits_per_index(layout.groups) {
                Some(b) if b > 0 => b,
                _ => {
                    return Err(config(format!(
                        "{} needs a power-of-two group count ≥ 2, got {}",
                        self.scheme, layout.groups
                    )))
                }
            },
            Scheme::Fhrm => 1,
            Scheme::PassivePsk | Scheme::ActivePsk => 0,
        };
        Ok(index + psk)
    }
}

/// One point of a BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub axis_value: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci95: f64,
    pub wall_time: Duration,
}

impl BerPoint {
    fn from_tally(axis_value: f64, tally: Tally, wall_time: Duration) -> Self {
        Self {
            axis_value,
            trials: tally.trials,
            bit_errors: tally.bit_errors,
            ber: tally.ber(),
            ci95: tally.ci95(),
            wall_time,
        }
    }
}

/// Gain for one realization: the fixed override, or the budget-limited
/// gain of the largest active set the scheme uses.
fn trial_gain<F: Real>(scheme: Scheme, cfg: &HrmConfig<F>, layout: &RisLayout<F>, ch: &ChannelRealization<F>) -> Result<F> {
    if let Some(p) = cfg.gain_override {
        return Ok(p);
    }
    let active = match scheme {
        Scheme::Hrm | Scheme::HrmPsk => (layout.groups - 1) * layout.group_size(),
        _ => ch.len(),
    };
    Ok(max_gain(cfg, &ch.h[..active])?.gain)
}

fn ber_trial<F: Real>(
    spec: &SweepSpec<F>,
    layout: &RisLayout<F>,
    cfg: &HrmConfig<F>,
    model: &ChannelModel<F>,
    ch: &mut ChannelRealization<F>,
    rng: &mut TrialRng,
) -> Result<TrialOutcome> {
    model.draw_into(rng, ch);
    match spec.scheme {
        Scheme::Hrm => {
            let gain = trial_gain(spec.scheme, cfg, layout, ch)?;
            let set = hrm_symbol_set(ch, layout, cfg, gain)?;
            Ok(hrm_trial(ch, &set, cfg, spec.detector, rng))
        }
        Scheme::Fhrm => {
            let gain = trial_gain(spec.scheme, cfg, layout, ch)?;
            let set = fhrm_symbol_set(ch, cfg, gain)?;
            Ok(hrm_trial(ch, &set, cfg, spec.detector, rng))
        }
        Scheme::HrmPsk => {
            let gain = trial_gain(spec.scheme, cfg, layout, ch)?;
            let set = hrm_symbol_set(ch, layout, cfg, gain)?;
            hrm_with_psk(ch, &set, cfg, spec.psk_order, rng)
        }
        Scheme::PassivePsk => baseline_passive_psk(ch, cfg, spec.psk_order, rng),
        Scheme::ActivePsk => {
            let gain = trial_gain(spec.scheme, cfg, layout, ch)?;
            baseline_active_psk(ch, cfg, gain, spec.psk_order, rng)
        }
        Scheme::Rm => {
            let rm = RmConfig {
                groups: layout.groups,
                psk_order: spec.psk_order,
                all_on: false,
            };
            baseline_rm(ch, cfg, &rm, rng)
        }
    }
}

/// BER at every grid point of `spec`.
pub fn run_ber<F: Real>(spec: &SweepSpec<F>, master_seed: u64) -> Result<Vec<BerPoint>> {
    spec.validate()?;
    let streams = Streams::new(master_seed);
    let values = spec.axis.values();
    let mut out = Vec::with_capacity(values.len());
    for (k, &value) in values.iter().enumerate() {
        let started = Instant::now();
        let (layout, cfg) = spec.point(k);
        let model = ChannelModel::new(spec.geometry, layout)?;
        let tally = estimate_ber(
            &spec.policy,
            &streams,
            k as u64,
            ChannelRealization::default,
            |ch, rng| ber_trial(spec, &layout, &cfg, &model, ch, rng),
        )?;
        out.push(BerPoint::from_tally(value, tally, started.elapsed()));
    }
    Ok(out)
}

/// One point of an achievable-rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub axis_value: f64,
    pub bits: f64,
    pub std_error: f64,
    pub samples: u64,
    pub wall_time: Duration,
}

/// Mutual information of plain HRM at every grid point, `samples` channel
/// draws per point. Needs a fixed gain.
pub fn run_rate<F: Real>(spec: &SweepSpec<F>, samples: u64, master_seed: u64) -> Result<Vec<RatePoint>> {
    if spec.scheme != Scheme::Hrm {
        return Err(config(format!("rate sweeps support scheme hrm only, got {}", spec.scheme)));
    }
    let gain = spec
        .cfg
        .gain_override
        .ok_or_else(|| config("rate sweeps need a fixed amplification gain"))?;
    spec.validate()?;
    let streams = Streams::new(master_seed);
    let values = spec.axis.values();
    let mut out = Vec::with_capacity(values.len());
    for (k, &value) in values.iter().enumerate() {
        let started = Instant::now();
        let (layout, cfg) = spec.point(k);
        let model = ChannelModel::new(spec.geometry, layout)?;
        let MiEstimate {
            bits,
            std_error,
            samples,
        } = mutual_information(&model, &cfg, gain, samples, &streams, k as u64)?;
        out.push(RatePoint {
            axis_value: value,
            bits: bits.as_f64(),
            std_error: std_error.as_f64(),
            samples,
            wall_time: started.elapsed(),
        });
    }
    Ok(out)
}

/// SNR the F-HRM link is credited with in the efficiency metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrPolicy {
    /// SNR of the all-active state, the link's maximum.
    #[default]
    MaxState,
    /// Average of `log2(1 + γ)` over the two equiprobable states.
    SymbolAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnergyScheme {
    Fhrm,
    Active,
    Passive,
}

impl EnergyScheme {
    pub const ALL: [EnergyScheme; 3] = [EnergyScheme::Fhrm, EnergyScheme::Active, EnergyScheme::Passive];

    pub fn name(self) -> &'static str {
        match self {
            EnergyScheme::Fhrm => "fhrm",
            EnergyScheme::Active => "active",
            EnergyScheme::Passive => "passive",
        }
    }
}

/// Energy-efficiency sweep over transmit power or element count.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpec<F> {
    pub axis: Axis,
    pub geometry: LinkGeometry<F>,
    pub layout: RisLayout<F>,
    pub cfg: HrmConfig<F>,
    pub power: PowerModel<F>,
    pub realizations: u64,
    pub snr_policy: SnrPolicy,
}

impl<F: Real> EnergySpec<F> {
    pub fn validate(&self) -> Result<()> {
        self.axis.validate()?;
        if !matches!(self.axis, Axis::TxPowerDbm(_) | Axis::Elements(_)) {
            return Err(config(format!("energy sweeps cannot sweep {}", self.axis.name())));
        }
        if self.realizations == 0 {
            return Err(config("energy sweeps need at least one realization"));
        }
        self.geometry.validate()?;
        self.power.validate()?;
        for k in 0..self.axis.len() {
            let mut layout = self.layout;
            let mut cfg = self.cfg;
            self.axis.apply(k, &mut layout, &mut cfg);
            layout.validate()?;
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Expected efficiency and power of one scheme at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyPoint {
    pub axis_value: f64,
    pub scheme: EnergyScheme,
    /// Mean bits per joule over the realizations.
    pub efficiency: f64,
    pub ci95: f64,
    pub ris_watts: f64,
    pub total_watts: f64,
    /// Realizations whose budget-limited gain fell below one.
    pub below_unity: u64,
    pub realizations: u64,
}

/// Efficiency of F-HRM, fully active and fully passive surfaces. All three
/// schemes see the same channel draws at each point.
pub fn run_energy<F: Real>(spec: &EnergySpec<F>, master_seed: u64) -> Result<Vec<EnergyPoint>> {
    spec.validate()?;
    let streams = Streams::new(master_seed);
    let values = spec.axis.values();
    let mut out = Vec::with_capacity(values.len() * 3);
    for (k, &value) in values.iter().enumerate() {
        let mut layout = spec.layout;
        let mut cfg = spec.cfg;
        spec.axis.apply(k, &mut layout, &mut cfg);
        let n = layout.elements;
        let model = ChannelModel::new(spec.geometry, layout)?;
        let pw = &spec.power;
        let ris = [
            ris_power(pw, RisArchitecture::half_active(n), n, cfg.amp_budget)?,
            ris_power(pw, RisArchitecture::Active, n, cfg.amp_budget)?,
            ris_power(pw, RisArchitecture::Passive, n, cfg.amp_budget)?,
        ];
        let total = ris.map(|r| total_power(cfg.tx_power, pw, r));
        let bw = pw.bandwidth;

        let samples: Vec<([f64; 3], bool)> = (0..spec.realizations)
            .into_par_iter()
            .map_init(ChannelRealization::default, |ch, t| -> Result<([f64; 3], bool)> {
                let mut rng = streams.stream(k as u64, t);
                model.draw_into(&mut rng, ch);
                let gain = match cfg.gain_override {
                    Some(p) => p,
                    None => max_gain(&cfg, &ch.h)?.gain,
                };
                let full = instantaneous_snr_with(ch, &cfg, gain, n)?;
                let passive = instantaneous_snr_with(ch, &cfg, F::one(), 0)?;
                let fhrm = match spec.snr_policy {
                    SnrPolicy::MaxState => energy_efficiency(bw, total[0], full)?,
                    SnrPolicy::SymbolAverage => {
                        let a = energy_efficiency(bw, total[0], full)?;
                        let b = energy_efficiency(bw, total[0], passive)?;
                        (a + b) * F::of(0.5)
                    }
                };
                let active = energy_efficiency(bw, total[1], full)?;
                let pas = energy_efficiency(bw, total[2], passive)?;
                Ok(([fhrm.as_f64(), active.as_f64(), pas.as_f64()], gain < F::one()))
            })
            .collect::<Result<_>>()?;

        let below = samples.iter().filter(|s| s.1).count() as u64;
        let count = samples.len() as f64;
        for (j, scheme) in EnergyScheme::ALL.into_iter().enumerate() {
            let mean = compensated_sum(samples.iter().map(|s| s.0[j])) / count;
            let var = if samples.len() > 1 {
                compensated_sum(samples.iter().map(|s| (s.0[j] - mean).powi(2))) / (count - 1.0)
            } else {
                0.0
            };
            out.push(EnergyPoint {
                axis_value: value,
                scheme,
                efficiency: mean,
                ci95: 1.96 * (var / count).sqrt(),
                ris_watts: ris[j].as_f64(),
                total_watts: total[j].as_f64(),
                below_unity: if scheme == EnergyScheme::Passive { 0 } else { below },
                realizations: spec.realizations,
            });
        }
    }
    Ok(out)
}
