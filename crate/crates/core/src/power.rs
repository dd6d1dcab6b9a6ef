//! Power consumption and energy efficiency of passive, active and hybrid
//! surfaces.

use crate::channel::{ChannelRealization, RisLayout};
use crate::error::{config, domain, Result};
use crate::modem::HrmConfig;
use crate::num::{dbm_to_watts, watts_to_dbm, Real};

/// Power constants, all in watts except the efficiencies and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel<F> {
    /// Transmitter and receiver circuit power.
    pub circuit: F,
    /// Phase-shifter power per passive element.
    pub per_passive: F,
    /// Static power of the active circuitry.
    pub static_active: F,
    /// Dynamic power per active element.
    pub per_active: F,
    pub tx_efficiency: F,
    pub amp_efficiency: F,
    /// Hz.
    pub bandwidth: F,
}

impl<F: Real> PowerModel<F> {
    /// 75 dBm circuit power, 5 mW per passive element, 35 dBm static and
    /// 30 dBm per-element active power, efficiencies 0.5, 10 MHz.
    pub fn reference() -> Self {
        Self {
            circuit: dbm_to_watts(F::of(75.0)),
            per_passive: F::of(5e-3),
            static_active: dbm_to_watts(F::of(35.0)),
            per_active: dbm_to_watts(F::of(30.0)),
            tx_efficiency: F::of(0.5),
            amp_efficiency: F::of(0.5),
            bandwidth: F::of(10e6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eff = |v: F| v > F::zero() && v <= F::one();
        if !eff(self.tx_efficiency) || !eff(self.amp_efficiency) {
            return Err(config("efficiencies must lie in (0, 1]"));
        }
        let powers = [self.circuit, self.per_passive, self.static_active, self.per_active];
        if powers.iter().any(|&p| !(p >= F::zero() && p.is_finite())) {
            return Err(config("power constants must be non-negative"));
        }
        if !(self.bandwidth > F::zero()) {
            return Err(config("bandwidth must be positive"));
        }
        Ok(())
    }

    /// Each constant in watts and dBm, for run logs.
    pub fn unit_table(&self) -> Vec<(&'static str, f64, f64)> {
        let row = |name, w: F| (name, w.as_f64(), watts_to_dbm(w).as_f64());
        vec![
            row("circuit", self.circuit),
            row("per_passive", self.per_passive),
            row("static_active", self.static_active),
            row("per_active", self.per_active),
        ]
    }
}

/// Which elements of the surface carry amplifiers and how many are on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RisArchitecture<F> {
    Passive,
    Active,
    /// Average numbers of active and passive elements.
    Hybrid { active: F, passive: F },
}

impl<F: Real> RisArchitecture<F> {
    /// Half the elements active on average, as for two equiprobable
    /// all-passive / all-active states.
    pub fn half_active(elements: usize) -> Self {
        let half = F::of(elements as f64 * 0.5);
        RisArchitecture::Hybrid {
            active: half,
            passive: half,
        }
    }
}

/// Power drawn by the surface itself.
pub fn ris_power<F: Real>(
    model: &PowerModel<F>,
    arch: RisArchitecture<F>,
    elements: usize,
    amp_budget: F,
) -> Result<F> {
    let n = F::of(elements as f64);
    match arch {
        RisArchitecture::Passive => Ok(n * model.per_passive),
        RisArchitecture::Active => {
            Ok(amp_budget / model.amp_efficiency + n * model.per_active + model.static_active)
        }
        RisArchitecture::Hybrid { active, passive } => {
            if !(active >= F::zero() && passive >= F::zero())
                || ((active + passive) - n).abs() > F::of(1e-9) * n.max(F::one())
            {
                return Err(config(format!(
                    "hybrid element counts {active} + {passive} must sum to {elements}"
                )));
            }
            Ok(amp_budget / model.amp_efficiency
                + active * model.per_active
                + passive * model.per_passive
                + model.static_active)
        }
    }
}

/// `P_t/τ_t + P_RIS + P_c`.
pub fn total_power<F: Real>(tx_power: F, model: &PowerModel<F>, ris_watts: F) -> F {
    tx_power / model.tx_efficiency + ris_watts + model.circuit
}

/// Received SNR with the first `n_active` elements amplified by `gain`:
/// `P_t H² / (p² ‖g_a‖² σ_dy² + σ_st²)` under phase alignment.
pub fn instantaneous_snr_with<F: Real>(
    ch: &ChannelRealization<F>,
    cfg: &HrmConfig<F>,
    gain: F,
    n_active: usize,
) -> Result<F> {
    if n_active > ch.len() {
        return Err(domain("instantaneous_snr", "more active elements than the surface has"));
    }
    let mut amplitude = F::zero();
    let mut g_active = F::zero();
    for (i, (h, g)) in ch.h.iter().zip(&ch.g).enumerate() {
        let m = h.norm() * g.norm();
        if i < n_active {
            amplitude += gain * m;
            g_active += g.norm_sqr();
        } else {
            amplitude += m;
        }
    }
    let noise = gain * gain * g_active * cfg.dynamic_noise + cfg.static_noise;
    if !(noise > F::zero()) {
        return Err(domain("instantaneous_snr", "noise power is zero"));
    }
    Ok(cfg.tx_power * amplitude * amplitude / noise)
}

/// SNR of HRM index `active_groups` on `layout`.
pub fn instantaneous_snr<F: Real>(
    ch: &ChannelRealization<F>,
    layout: &RisLayout<F>,
    cfg: &HrmConfig<F>,
    gain: F,
    active_groups: usize,
) -> Result<F> {
    if active_groups >= layout.groups {
        return Err(domain("instantaneous_snr", "active group index out of range"));
    }
    instantaneous_snr_with(ch, cfg, gain, active_groups * layout.group_size())
}

/// `(B_W / P_tot) log2(1 + γ)` in bits per joule.
pub fn energy_efficiency<F: Real>(bandwidth: F, total_watts: F, snr: F) -> Result<F> {
    if !(total_watts > F::zero()) {
        return Err(domain("energy_efficiency", "total power must be positive"));
    }
    if !(snr >= F::zero()) {
        return Err(domain("energy_efficiency", "SNR must be non-negative"));
    }
    Ok(bandwidth / total_watts * (F::one() + snr).log2())
}
