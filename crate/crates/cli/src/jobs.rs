//! A job is one configured curve; running it yields CSV rows.

use std::io::Write;
use std::time::Instant;

use hrmsim::analysis::{NoiseReference, PepIntegrator, StatsVariant, UnionBound};
use hrmsim::power::{ris_power, total_power, RisArchitecture};
use hrmsim::simkit::{self, Axis};

use crate::config::{ExperimentConfig, MetricName};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Job {
    /// Curve label within a figure, e.g. `N=64,K=0`.
    pub series: String,
    pub config: ExperimentConfig,
}

impl Job {
    pub fn new(series: impl Into<String>, config: ExperimentConfig) -> Self {
        Self {
            series: series.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub axis: &'static str,
    pub axis_value: f64,
    pub metric: &'static str,
    pub series: String,
    pub value: f64,
    pub ci95: f64,
    pub trials: u64,
    pub seed: u64,
    pub scheme: &'static str,
    pub fingerprint: String,
}

pub const HEADER: [&str; 10] = [
    "axis",
    "axis_value",
    "metric",
    "series",
    "value",
    "ci95",
    "trials",
    "seed",
    "scheme",
    "fingerprint",
];

impl Row {
    /// Fields as written. `{}` on `f64` is locale-independent and round-trips.
    pub fn record(&self) -> [String; 10] {
        [
            self.axis.to_string(),
            format!("{}", self.axis_value),
            self.metric.to_string(),
            self.series.clone(),
            format!("{}", self.value),
            format!("{}", self.ci95),
            self.trials.to_string(),
            self.seed.to_string(),
            self.scheme.to_string(),
            self.fingerprint.clone(),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| CliError::io("writing CSV", e))?;
    Ok(())
}

/// Runs a job; rows come back sorted by axis value (stable, so rows sharing
/// a value keep their emission order).
pub fn run(job: &Job) -> Result<Vec<Row>, CliError> {
    let started = Instant::now();
    let cfg = &job.config;
    let axis = cfg.axis()?;
    let row = |axis_value: f64, metric: &'static str, scheme: &'static str, value: f64, ci95: f64, trials: u64| Row {
        axis: axis.name(),
        axis_value,
        metric,
        series: job.series.clone(),
        value,
        ci95,
        trials,
        seed: cfg.seed,
        scheme,
        fingerprint: cfg.fingerprint(),
    };
    let scheme = cfg.scheme.scheme().name();
    let mut rows = Vec::new();
    match cfg.sweep.metric {
        MetricName::Ber => {
            for p in simkit::run_ber(&cfg.sweep_spec()?, cfg.seed)? {
                log::debug!("{} {}={}: {:?}", job.series, axis.name(), p.axis_value, p.wall_time);
                rows.push(row(p.axis_value, "ber", scheme, p.ber, p.ci95, p.trials));
            }
        }
        MetricName::Abep => {
            let spec = cfg.sweep_spec()?;
            spec.validate()?;
            let gain = cfg.link.gain.fixed().ok_or_else(|| {
                CliError::schema("link.gain", "the ABEP needs a fixed amplification gain".into())
            })?;
            let integrator = PepIntegrator::new(cfg.analysis.quadrature_nodes, cfg.analysis.pep_form.form());
            for (k, value) in axis.values().into_iter().enumerate() {
                let (layout, link) = spec.point(k);
                let mut bound = UnionBound::new(layout.groups, layout.group_size(), gain, spec.geometry);
                bound.integrator = integrator.clone();
                bound.noise_reference = cfg.analysis.noise_reference.reference();
                let noise = |l: usize| bound.clt_noise(&link, l);
                let noises = (0..layout.groups).map(noise).collect::<Result<Vec<_>, _>>()?;
                for (variant, metric) in [
                    (StatsVariant::SquaredDifference, "abep_squared_difference"),
                    (StatsVariant::DifferenceOfSquares, "abep_difference_of_squares"),
                ] {
                    bound.variant = variant;
                    rows.push(row(value, metric, scheme, bound.abep(link.tx_power, |l| noises[l])?, 0.0, 0));
                }
                bound.variant = cfg.analysis.variant.variant();
                let upper = bound.abep_upper(link.tx_power, |l| noises[l])?;
                rows.push(row(value, "abep_upper", scheme, upper, 0.0, 0));
            }
        }
        MetricName::Rate => {
            for p in simkit::run_rate(&cfg.sweep_spec()?, cfg.trials.rate_samples, cfg.seed)? {
                rows.push(row(p.axis_value, "rate_bits", scheme, p.bits, 1.96 * p.std_error, p.samples));
            }
        }
        MetricName::Energy => {
            for p in simkit::run_energy(&cfg.energy_spec()?, cfg.seed)? {
                let s = p.scheme.name();
                rows.push(row(p.axis_value, "energy_efficiency", s, p.efficiency, p.ci95, p.realizations));
                rows.push(row(p.axis_value, "ris_power", s, p.ris_watts, 0.0, 0));
                rows.push(row(p.axis_value, "total_power", s, p.total_watts, 0.0, 0));
                if p.below_unity > 0 {
                    log::warn!(
                        "{}: {} of {} draws at {}={} had a budget gain below one",
                        job.series,
                        p.below_unity,
                        p.realizations,
                        axis.name(),
                        p.axis_value
                    );
                }
            }
        }
        MetricName::Power => {
            let Axis::Elements(counts) = &axis else {
                return Err(CliError::schema("sweep.axis", "the power metric sweeps `elements`".into()));
            };
            let model = cfg.power_model();
            model.validate()?;
            let link = cfg.link();
            for &n in counts {
                for (arch, name) in [
                    (RisArchitecture::Passive, "passive"),
                    (RisArchitecture::half_active(n), "fhrm"),
                    (RisArchitecture::Active, "active"),
                ] {
                    let ris = ris_power(&model, arch, n, link.amp_budget)?;
                    rows.push(row(n as f64, "ris_power", name, ris, 0.0, 0));
                    let total = total_power(link.tx_power, &model, ris);
                    rows.push(row(n as f64, "total_power", name, total, 0.0, 0));
                }
            }
        }
    }
    rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));
    log::info!("{} ({:?}): {} rows in {:.2?}", job.series, cfg.sweep.metric, rows.len(), started.elapsed());
    Ok(rows)
}

/// Union-bound ABEP of a configuration at `tx_power_dbm`.
pub fn abep_at(cfg: &ExperimentConfig, tx_power_dbm: f64) -> Result<f64, CliError> {
    let gain = cfg
        .link
        .gain
        .fixed()
        .ok_or_else(|| CliError::schema("link.gain", "the ABEP needs a fixed amplification gain".into()))?;
    let layout = cfg.layout();
    let mut link = cfg.link();
    link.tx_power = 10f64.powf((tx_power_dbm - 30.0) / 10.0);
    let mut bound = UnionBound::new(layout.groups, layout.group_size(), gain, cfg.geometry());
    bound.variant = cfg.analysis.variant.variant();
    bound.noise_reference = NoiseReference::Transmitted;
    bound.integrator = PepIntegrator::new(cfg.analysis.quadrature_nodes, cfg.analysis.pep_form.form());
    let noises = (0..layout.groups)
        .map(|l| bound.clt_noise(&link, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(bound.abep(link.tx_power, |l| noises[l])?)
}

/// Transmit power in dBm where the ABEP falls to `target`, by bisection.
pub fn abep_crossing(cfg: &ExperimentConfig, target: f64) -> Result<f64, CliError> {
    let (mut lo, mut hi) = (-80.0, 80.0);
    if abep_at(cfg, hi)? > target || abep_at(cfg, lo)? < target {
        return Err(CliError::schema(
            "sweep",
            format!("ABEP does not cross {target} between {lo} and {hi} dBm"),
        ));
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if abep_at(cfg, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
