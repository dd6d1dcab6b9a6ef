//! Experiment configuration: a TOML file with unit-suffixed quantities.
//!
//! Every section and key is optional; missing values take the reference
//! deployment defaults. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use hrmsim::analysis::{NoiseReference, PepForm, StatsVariant};
use hrmsim::channel::{LinkGeometry, RisLayout};
use hrmsim::modem::{BudgetNorm, Detector, HrmConfig};
use hrmsim::power::PowerModel;
use hrmsim::simkit::{Axis, EnergySpec, Scheme, SnrPolicy, SweepSpec, TrialPolicy};

use crate::error::CliError;
use crate::units::{Decibel, Frequency, Length, Power};

fn p(s: &str) -> Power {
    Power::parse(s).expect("valid default")
}

fn len(s: &str) -> Length {
    Length::parse(s).expect("valid default")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: SchemeName,
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub geometry: GeometrySection,
    pub surface: SurfaceSection,
    pub link: LinkSection,
    pub power: PowerSection,
    pub sweep: SweepSection,
    pub trials: TrialsSection,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeName::Hrm,
            seed: 1,
            output: None,
            geometry: GeometrySection::default(),
            surface: SurfaceSection::default(),
            link: LinkSection::default(),
            power: PowerSection::default(),
            sweep: SweepSection::default(),
            trials: TrialsSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Hrm,
    Fhrm,
    HrmPsk,
    PassivePsk,
    ActivePsk,
    Rm,
}

impl SchemeName {
    pub fn scheme(self) -> Scheme {
        match self {
            SchemeName::Hrm => Scheme::Hrm,
            SchemeName::Fhrm => Scheme::Fhrm,
            SchemeName::HrmPsk => Scheme::HrmPsk,
            SchemeName::PassivePsk => Scheme::PassivePsk,
            SchemeName::ActivePsk => Scheme::ActivePsk,
            SchemeName::Rm => Scheme::Rm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub tx_distance: Length,
    pub rx_distance: Length,
    pub tx_exponent: f64,
    pub rx_exponent: f64,
    pub reference_loss: Decibel,
    pub tx_rician_k: f64,
    pub rx_rician_k: f64,
    pub tx_scale: f64,
    pub rx_scale: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            tx_distance: len("20 m"),
            rx_distance: len("50 m"),
            tx_exponent: 2.2,
            rx_exponent: 2.8,
            reference_loss: Decibel::parse("-30 dB").expect("valid default"),
            tx_rician_k: 0.0,
            rx_rician_k: 0.0,
            tx_scale: 1.0,
            rx_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSection {
    pub elements: usize,
    pub groups: usize,
    pub element_width: Length,
    pub element_height: Length,
    pub carrier: Frequency,
    pub correlated: bool,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self {
            elements: 64,
            groups: 2,
            element_width: len("0.5 lambda"),
            element_height: len("0.5 lambda"),
            carrier: Frequency::parse("2.4 GHz").expect("valid default"),
            correlated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormName {
    SingleNoise,
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorName {
    MinDistance,
    FullMl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub tx_power: Power,
    pub amp_budget: Power,
    pub dynamic_noise: Power,
    pub static_noise: Power,
    /// Fixed amplification gain, or `"budget"` to derive it per channel
    /// draw from `amp_budget`.
    pub gain: GainSetting,
    pub budget_norm: NormName,
    pub detector: DetectorName,
    pub psk_order: usize,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            tx_power: p("20 dBm"),
            amp_budget: p("10 dBm"),
            dynamic_noise: p("-90 dBm"),
            static_noise: p("-90 dBm"),
            gain: GainSetting::Fixed(10.0),
            budget_norm: NormName::SingleNoise,
            detector: DetectorName::MinDistance,
            psk_order: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSetting {
    Fixed(f64),
    Budget(BudgetWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetWord {
    Budget,
}

impl GainSetting {
    pub fn fixed(self) -> Option<f64> {
        match self {
            GainSetting::Fixed(p) => Some(p),
            GainSetting::Budget(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrPolicyName {
    MaxState,
    SymbolAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub circuit: Power,
    pub per_passive: Power,
    pub static_active: Power,
    pub per_active: Power,
    pub tx_efficiency: f64,
    pub amp_efficiency: f64,
    pub bandwidth: Frequency,
    pub snr_policy: SnrPolicyName,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            circuit: p("75 dBm"),
            per_passive: p("5 mW"),
            static_active: p("35 dBm"),
            per_active: p("30 dBm"),
            tx_efficiency: 0.5,
            amp_efficiency: 0.5,
            bandwidth: Frequency::parse("10 MHz").expect("valid default"),
            snr_policy: SnrPolicyName::MaxState,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    TxPower,
    Elements,
    Groups,
    Spacing,
}

/// Quantity a sweep computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    /// Monte Carlo bit error rate.
    Ber,
    /// Union-bound ABEP under both moment variants, plus its upper bound.
    Abep,
    /// Mutual information in bits per channel use.
    Rate,
    /// Energy efficiency of F-HRM, active and passive surfaces.
    Energy,
    /// Surface power consumption; no simulation.
    Power,
}

/// Swept parameter. `tx_power` takes power strings, `spacing` takes lengths
/// (element side of a correlated square surface), `elements` and `groups`
/// take integers. A `tx_power` grid may instead be given as `start`,
/// `stop` and `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub metric: MetricName,
    pub axis: AxisName,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub powers: Vec<Power>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Power>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<Power>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<Decibel>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub counts: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spacings: Vec<Length>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            metric: MetricName::Ber,
            axis: AxisName::TxPower,
            powers: Vec::new(),
            start: Some(p("0 dBm")),
            stop: Some(p("20 dBm")),
            step: Some(Decibel::parse("2 dB").expect("valid default")),
            counts: Vec::new(),
            spacings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialsSection {
    pub target_errors: u64,
    pub max_trials: u64,
    pub rate_samples: u64,
    pub energy_realizations: u64,
}

impl Default for TrialsSection {
    fn default() -> Self {
        Self {
            target_errors: 100,
            max_trials: 100_000_000,
            rate_samples: 100_000,
            energy_realizations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    DifferenceOfSquares,
    SquaredDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormName {
    Craig,
    HalvedVariance,
    DoubledMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRefName {
    Transmitted,
    WorstCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub variant: VariantName,
    pub pep_form: FormName,
    pub quadrature_nodes: usize,
    pub noise_reference: NoiseRefName,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            variant: VariantName::SquaredDifference,
            pep_form: FormName::Craig,
            quadrature_nodes: 64,
            noise_reference: NoiseRefName::Transmitted,
        }
    }
}

impl VariantName {
    pub fn variant(self) -> StatsVariant {
        match self {
            VariantName::DifferenceOfSquares => StatsVariant::DifferenceOfSquares,
            VariantName::SquaredDifference => StatsVariant::SquaredDifference,
        }
    }
}

impl FormName {
    pub fn form(self) -> PepForm {
        match self {
            FormName::Craig => PepForm::Craig,
            FormName::HalvedVariance => PepForm::HalvedVariance,
            FormName::DoubledMean => PepForm::DoubledMean,
        }
    }
}

impl NoiseRefName {
    pub fn reference(self) -> NoiseReference {
        match self {
            NoiseRefName::Transmitted => NoiseReference::Transmitted,
            NoiseRefName::WorstCase => NoiseReference::WorstCase,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key=value` overrides, and deserializes.
    /// Schema errors name the offending key.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::schema("<file>", e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        let value = toml::Value::Table(table);
        serde_path_to_error::deserialize(value).map_err(|e| {
            let key = e.path().to_string();
            let msg = e.into_inner().to_string();
            CliError::schema(&key, msg.lines().next().unwrap_or_default().to_string())
        })
    }

    pub fn to_table(&self) -> toml::Table {
        match toml::Value::try_from(self).expect("config serializes") {
            toml::Value::Table(t) => t,
            _ => unreachable!("config serializes to a table"),
        }
    }

    /// Copy with the given overrides applied.
    pub fn with(&self, overrides: &[&str]) -> Result<Self, CliError> {
        let mut table = self.to_table();
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    /// Every key as `section.key=value`, sorted, joined by `;`.
    ///
    /// Each entry is a valid `--set` argument, so a CSV row carries what is
    /// needed to rerun it.
    pub fn fingerprint(&self) -> String {
        let mut entries = Vec::new();
        flatten("", &toml::Value::Table(self.to_table()), &mut entries);
        entries.retain(|e| !e.starts_with("output="));
        entries.sort();
        entries.join(";")
    }

    pub fn wavelength(&self) -> f64 {
        299_792_458.0 / self.surface.carrier.hz()
    }

    pub fn geometry(&self) -> LinkGeometry<f64> {
        let g = &self.geometry;
        let lambda = self.wavelength();
        LinkGeometry {
            tx_distance: g.tx_distance.meters(lambda),
            rx_distance: g.rx_distance.meters(lambda),
            tx_exponent: g.tx_exponent,
            rx_exponent: g.rx_exponent,
            reference_loss_db: g.reference_loss.db(),
            tx_rician_k: g.tx_rician_k,
            rx_rician_k: g.rx_rician_k,
            tx_scale: g.tx_scale,
            rx_scale: g.rx_scale,
        }
    }

    pub fn layout(&self) -> RisLayout<f64> {
        let s = &self.surface;
        let lambda = self.wavelength();
        RisLayout {
            elements: s.elements,
            groups: s.groups,
            element_width: s.element_width.meters(lambda),
            element_height: s.element_height.meters(lambda),
            wavelength: lambda,
            correlated: s.correlated,
        }
    }

    pub fn link(&self) -> HrmConfig<f64> {
        let l = &self.link;
        HrmConfig {
            tx_power: l.tx_power.watts(),
            amp_budget: l.amp_budget.watts(),
            dynamic_noise: l.dynamic_noise.watts(),
            static_noise: l.static_noise.watts(),
            gain_override: l.gain.fixed(),
            budget_norm: match l.budget_norm {
                NormName::SingleNoise => BudgetNorm::SingleNoise,
                NormName::Frobenius => BudgetNorm::Frobenius,
            },
        }
    }

    pub fn power_model(&self) -> PowerModel<f64> {
        let p = &self.power;
        PowerModel {
            circuit: p.circuit.watts(),
            per_passive: p.per_passive.watts(),
            static_active: p.static_active.watts(),
            per_active: p.per_active.watts(),
            tx_efficiency: p.tx_efficiency,
            amp_efficiency: p.amp_efficiency,
            bandwidth: p.bandwidth.hz(),
        }
    }

    pub fn axis(&self) -> Result<Axis, CliError> {
        let s = &self.sweep;
        let lambda = self.wavelength();
        let need = |ok: bool, key: &str, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::schema(key, what.to_string()))
            }
        };
        let axis = match s.axis {
            AxisName::TxPower => {
                if !s.powers.is_empty() {
                    Axis::TxPowerDbm(s.powers.iter().map(Power::dbm).collect())
                } else {
                    let (Some(a), Some(b), Some(step)) = (&s.start, &s.stop, &s.step) else {
                        return Err(CliError::schema(
                            "sweep.powers",
                            "tx_power sweep needs `powers` or `start`, `stop` and `step`".into(),
                        ));
                    };
                    need(step.db() > 0.0, "sweep.step", "step must be positive")?;
                    need(b.dbm() >= a.dbm(), "sweep.stop", "stop must not be below start")?;
                    let n = ((b.dbm() - a.dbm()) / step.db() + 1e-9).floor() as usize;
                    Axis::TxPowerDbm((0..=n).map(|k| round_db(a.dbm() + k as f64 * step.db())).collect())
                }
            }
            AxisName::Elements => {
                need(!s.counts.is_empty(), "sweep.counts", "elements sweep needs `counts`")?;
                Axis::Elements(s.counts.clone())
            }
            AxisName::Groups => {
                need(!s.counts.is_empty(), "sweep.counts", "groups sweep needs `counts`")?;
                Axis::Groups(s.counts.clone())
            }
            AxisName::Spacing => {
                need(!s.spacings.is_empty(), "sweep.spacings", "spacing sweep needs `spacings`")?;
                Axis::Spacing(s.spacings.iter().map(|l| l.wavelengths(lambda)).collect())
            }
        };
        axis.validate().map_err(|e| CliError::schema("sweep", e.to_string()))?;
        Ok(axis)
    }

    pub fn policy(&self) -> TrialPolicy {
        TrialPolicy {
            target_errors: self.trials.target_errors,
            max_trials: self.trials.max_trials,
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec<f64>, CliError> {
        Ok(SweepSpec {
            scheme: self.scheme.scheme(),
            axis: self.axis()?,
            geometry: self.geometry(),
            layout: self.layout(),
            cfg: self.link(),
            psk_order: self.link.psk_order,
            detector: match self.link.detector {
                DetectorName::MinDistance => Detector::MinDistance,
                DetectorName::FullMl => Detector::FullMl,
            },
            policy: self.policy(),
        })
    }

    pub fn energy_spec(&self) -> Result<EnergySpec<f64>, CliError> {
        Ok(EnergySpec {
            axis: self.axis()?,
            geometry: self.geometry(),
            layout: self.layout(),
            cfg: self.link(),
            power: self.power_model(),
            realizations: self.trials.energy_realizations,
            snr_policy: match self.power.snr_policy {
                SnrPolicyName::MaxState => SnrPolicy::MaxState,
                SnrPolicyName::SymbolAverage => SnrPolicy::SymbolAverage,
            },
        })
    }
}

/// Rounds grid values so that `0.1 + 0.2`-style drift never reaches the CSV.
fn round_db(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push(format!("{prefix}={other}")),
    }
}

/// Sets `section.key=value` in `table`. The value is read as a TOML value
/// when it parses as one and as a bare string otherwise, so both
/// `--set link.tx_power="20 dBm"` and `--set link.tx_power=20 dBm` work.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::schema(spec, "override must look like key=value".into()))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::schema(key, "empty key segment".into()));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::schema(key, format!("{part} is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
