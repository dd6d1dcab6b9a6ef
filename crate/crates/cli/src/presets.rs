//! Figure reproduction presets.
//!
//! A preset pins the figure's parameters on top of the user's config file.
//! `--set` overrides are applied last, so every pinned value stays
//! adjustable from the command line.

use std::fmt;

use clap::ValueEnum;

use crate::config::{apply_override, ExperimentConfig};
use crate::error::CliError;
use crate::jobs::{abep_crossing, Job};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// HRM BER and ABEP vs transmit power, G = 2, N from 32 to 512, K in {0, 10}.
    Fig3,
    /// HRM BER and ABEP vs transmit power, N = 256, G from 2 to 32.
    Fig4,
    /// Four-bit schemes at N = 256: HRM, HRM + QPSK, passive 16-PSK, RM + QPSK.
    Fig5,
    /// Correlated vs independent surfaces, G = 2.
    Fig6,
    /// Energy efficiency vs transmit power and vs N, and surface power vs N.
    Fig7,
    /// Mutual information vs transmit power.
    Rate,
}

impl Figure {
    pub fn file_name(self) -> String {
        format!("{self}.csv")
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

/// Trial cap for presets; the library default of 1e8 is meant for single
/// points, not whole figures.
const PRESET_MAX_TRIALS: &str = "trials.max_trials=1000000";
const PRESET_ENERGY_REALIZATIONS: &str = "trials.energy_realizations=100000";
const PRESET_RATE_SAMPLES: &str = "trials.rate_samples=20000";

/// Analytical BER range the automatic transmit-power grids span.
const GRID_TOP: f64 = 1e-1;
const GRID_BOTTOM: f64 = 1e-5;

struct Builder<'a> {
    base: &'a toml::Table,
    user: &'a [String],
    /// The user supplied their own grid, so keep it.
    user_grid: bool,
}

impl<'a> Builder<'a> {
    fn new(base: &'a toml::Table, user: &'a [String]) -> Self {
        let user_grid = user.iter().any(|o| o.trim_start().starts_with("sweep."));
        Self { base, user, user_grid }
    }

    fn config(&self, pins: &[String]) -> Result<ExperimentConfig, CliError> {
        let mut table = self.base.clone();
        for o in pins.iter().chain(self.user) {
            apply_override(&mut table, o)?;
        }
        ExperimentConfig::from_table(table)
    }

    /// Config with a transmit-power grid spanning the analytical BER range
    /// of `reference` (or of the config itself), in steps of `step` dB.
    fn with_abep_grid(
        &self,
        pins: &[String],
        reference: Option<&ExperimentConfig>,
        step: f64,
    ) -> Result<ExperimentConfig, CliError> {
        let cfg = self.config(pins)?;
        if self.user_grid {
            return Ok(cfg);
        }
        let reference = reference.unwrap_or(&cfg);
        let start = (abep_crossing(reference, GRID_TOP)? / step).floor() * step;
        let stop = (abep_crossing(reference, GRID_BOTTOM)? / step).ceil() * step;
        let mut pins = pins.to_vec();
        pins.extend(power_grid(start, stop, step));
        self.config(&pins)
    }
}

fn power_grid(start: f64, stop: f64, step: f64) -> [String; 4] {
    [
        "sweep.axis=tx_power".into(),
        format!("sweep.start=\"{start} dBm\""),
        format!("sweep.stop=\"{stop} dBm\""),
        format!("sweep.step=\"{step} dB\""),
    ]
}

fn pins(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Jobs that make up `figure`.
pub fn jobs(figure: Figure, base: &toml::Table, user: &[String]) -> Result<Vec<Job>, CliError> {
    let b = Builder::new(base, user);
    let mut jobs = Vec::new();
    let common = pins(&["scheme=hrm", "link.gain=10", "link.psk_order=1", PRESET_MAX_TRIALS]);
    match figure {
        Figure::Fig3 => {
            for k in [0, 10] {
                for n in [32, 64, 128, 256, 512] {
                    let mut p = common.clone();
                    p.extend([
                        "surface.groups=2".to_string(),
                        format!("surface.elements={n}"),
                        format!("geometry.tx_rician_k={k}"),
                        format!("geometry.rx_rician_k={k}"),
                    ]);
                    push_ber_and_abep(&mut jobs, &b, &p, &format!("N={n},K={k}"))?;
                }
            }
        }
        Figure::Fig4 => {
            for g in [2, 4, 8, 16, 32] {
                let mut p = common.clone();
                p.extend(["surface.elements=256".to_string(), format!("surface.groups={g}")]);
                push_ber_and_abep(&mut jobs, &b, &p, &format!("G={g}"))?;
            }
        }
        Figure::Fig5 => {
            let grid = power_grid(-10.0, 30.0, 2.0);
            let series: [(&str, &[&str]); 4] = [
                ("HRM G=16", &["scheme=hrm", "surface.groups=16"]),
                ("HRM G=4 + QPSK", &["scheme=hrm_psk", "surface.groups=4", "link.psk_order=4"]),
                ("passive 16-PSK", &["scheme=passive_psk", "surface.groups=2", "link.psk_order=16"]),
                ("RM G=4 + QPSK", &["scheme=rm", "surface.groups=4", "link.psk_order=4"]),
            ];
            for (name, extra) in series {
                let mut p = common.clone();
                p.push("surface.elements=256".into());
                p.extend(pins(extra));
                if !b.user_grid {
                    p.extend(grid.iter().cloned());
                }
                p.push("sweep.metric=ber".into());
                jobs.push(Job::new(name, b.config(&p)?));
            }
        }
        Figure::Fig6 => {
            for n in [16, 64, 256] {
                let mut p = common.clone();
                p.extend([
                    "surface.groups=2".to_string(),
                    format!("surface.elements={n}"),
                    "sweep.metric=ber".into(),
                    "surface.correlated=false".into(),
                ]);
                let independent = b.with_abep_grid(&p, None, 1.0)?;
                jobs.push(Job::new(format!("N={n},independent"), independent.clone()));
                for (label, size) in [("1/2", "0.5"), ("1/4", "0.25"), ("1/8", "0.125")] {
                    let mut q = p.clone();
                    q.extend([
                        "surface.correlated=true".to_string(),
                        format!("surface.element_width=\"{size} lambda\""),
                        format!("surface.element_height=\"{size} lambda\""),
                    ]);
                    let cfg = b.with_abep_grid(&q, Some(&independent), 1.0)?;
                    jobs.push(Job::new(format!("N={n},spacing={label} lambda"), cfg));
                }
            }
        }
        Figure::Fig7 => {
            let energy = pins(&["link.gain=budget", "sweep.metric=energy", PRESET_ENERGY_REALIZATIONS]);
            for pa in [10, 20, 30] {
                let mut p = energy.clone();
                p.extend(["surface.elements=512".to_string(), format!("link.amp_budget=\"{pa} dBm\"")]);
                if !b.user_grid {
                    p.extend(power_grid(0.0, 40.0, 5.0));
                }
                jobs.push(Job::new(format!("vs_tx_power,PA={pa} dBm"), b.config(&p)?));
            }
            let counts = "sweep.counts=[16, 32, 64, 128, 256, 512, 1024]";
            for pa in [0, 10] {
                let mut p = energy.clone();
                p.extend([
                    "link.tx_power=\"30 dBm\"".to_string(),
                    format!("link.amp_budget=\"{pa} dBm\""),
                    "sweep.axis=elements".into(),
                    counts.into(),
                ]);
                jobs.push(Job::new(format!("vs_elements,PA={pa} dBm"), b.config(&p)?));
            }
            let p = pins(&["sweep.metric=power", "sweep.axis=elements", counts, "link.tx_power=\"30 dBm\""]);
            jobs.push(Job::new("power_vs_elements", b.config(&p)?));
        }
        Figure::Rate => {
            for n in [64, 256, 512] {
                for g in [2, 4, 8] {
                    let mut p = common.clone();
                    p.extend([
                        format!("surface.elements={n}"),
                        format!("surface.groups={g}"),
                        "sweep.metric=rate".into(),
                        PRESET_RATE_SAMPLES.into(),
                    ]);
                    if !b.user_grid {
                        p.extend(power_grid(-40.0, 20.0, 2.5));
                    }
                    jobs.push(Job::new(format!("N={n},G={g}"), b.config(&p)?));
                }
            }
        }
    }
    Ok(jobs)
}

fn push_ber_and_abep(jobs: &mut Vec<Job>, b: &Builder, pins: &[String], series: &str) -> Result<(), CliError> {
    let cfg = b.with_abep_grid(pins, None, 1.0)?;
    jobs.push(Job::new(series, cfg.with(&["sweep.metric=ber"])?));
    jobs.push(Job::new(series, cfg.with(&["sweep.metric=abep"])?));
    Ok(())
}
