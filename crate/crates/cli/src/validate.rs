//! Dry-run checks of a configuration. Nothing is simulated.

use std::fmt;

use hrmsim::analysis::cascade_mean;
use hrmsim::simkit::Axis;

use crate::config::{ExperimentConfig, MetricName};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub key: String,
    pub msg: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.key, self.msg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub findings: Vec<Finding>,
}

impl Report {
    fn warn(&mut self, key: &str, msg: String) {
        self.findings.push(Finding { severity: Severity::Warning, key: key.into(), msg });
    }

    fn error(&mut self, key: &str, msg: String) {
        self.findings.push(Finding { severity: Severity::Error, key: key.into(), msg });
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }
}

/// Schema has already been checked by deserialization; this adds the
/// physical sanity checks.
pub fn validate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::default();
    let axis = match cfg.axis() {
        Ok(a) => a,
        Err(CliError::Schema { key, msg }) => {
            report.error(&key, msg);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    if let Err(e) = axis.validate() {
        report.error("sweep", e.to_string());
    }

    let elements: Vec<usize> = match &axis {
        Axis::Elements(v) => v.clone(),
        _ => vec![cfg.surface.elements],
    };
    let groups: Vec<usize> = match &axis {
        Axis::Groups(v) => v.clone(),
        _ => vec![cfg.surface.groups],
    };
    for &n in &elements {
        for &g in &groups {
            if g == 0 || n % g != 0 {
                report.error("surface.groups", format!("{g} groups do not divide {n} elements"));
            } else if cfg.scheme.scheme().name() != "fhrm" && !g.is_power_of_two() {
                report.error("surface.groups", format!("group count {g} is not a power of two"));
            }
        }
    }

    if let Some(p) = cfg.link.gain.fixed() {
        if !(p > 1.0) {
            report.warn("link.gain", format!("gain {p} does not exceed 1; active elements would not amplify"));
        }
    }

    // Budget check against the mean channel: the largest active set at the
    // highest transmit power on the grid.
    let link = cfg.link();
    let geometry = cfg.geometry();
    if let Err(e) = geometry.validate() {
        report.error("geometry", e.to_string());
        return Ok(report);
    }
    let tx_dbm = match &axis {
        Axis::TxPowerDbm(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        _ => cfg.link.tx_power.dbm(),
    };
    let tx = 10f64.powf((tx_dbm - 30.0) / 10.0);
    let lt = geometry.tx_path_loss()?;
    let n_max = elements.iter().copied().max().unwrap_or(0);
    let g_min = groups.iter().copied().min().unwrap_or(1).max(1);
    let active = match (cfg.sweep.metric, cfg.scheme.scheme().name()) {
        (MetricName::Energy | MetricName::Power, _) | (_, "fhrm" | "active_psk") => n_max,
        _ => n_max - n_max / g_min,
    };
    if active > 0 && link.amp_budget > 0.0 {
        let dyn_noise = match link.budget_norm {
            hrmsim::modem::BudgetNorm::SingleNoise => link.dynamic_noise,
            hrmsim::modem::BudgetNorm::Frobenius => link.dynamic_noise * active as f64,
        };
        let budget_gain = (link.amp_budget / (tx * active as f64 * lt + dyn_noise)).sqrt();
        if budget_gain < 1.0 {
            report.warn(
                "link.amp_budget",
                format!(
                    "{} cannot sustain unity gain for {active} active elements at {tx_dbm} dBm (mean-channel gain {budget_gain:.3})",
                    cfg.link.amp_budget
                ),
            );
        } else if let Some(p) = cfg.link.gain.fixed() {
            if p > budget_gain {
                report.warn(
                    "link.gain",
                    format!(
                        "fixed gain {p} exceeds the {budget_gain:.3} that {} supports at {tx_dbm} dBm",
                        cfg.link.amp_budget
                    ),
                );
            }
        }
    }
    if cascade_mean(&geometry).is_err() {
        report.error("geometry", "Rician factors must be non-negative".into());
    }
    if !report.has_errors() {
        // Whatever the core rejects that the checks above did not name.
        let core = match cfg.sweep.metric {
            MetricName::Energy => cfg.energy_spec()?.validate(),
            _ => cfg.sweep_spec()?.validate(),
        };
        if let Err(e) = core {
            if !(e.to_string().contains("gain") && cfg.link.gain.fixed().is_some_and(|p| p <= 1.0)) {
                report.error("<config>", e.to_string());
            }
        }
    }
    Ok(report)
}
