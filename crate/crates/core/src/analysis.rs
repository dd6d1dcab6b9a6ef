//! Closed-form error-probability and rate analysis.
//!
//! The symbol difference `Σ = H_{l_A} − H_{l̂_A}` is treated as Gaussian
//! (central limit over the `|δ|` elements whose state differs), which turns
//! the average PEP into a one-dimensional MGF integral.

use rayon::prelude::*;

use crate::channel::{ChannelModel, ChannelRealization, LinkGeometry};
use crate::error::{domain, Result};
use crate::modem::{bit_errors, bits_per_index, hrm_symbol_set, HrmConfig};
use crate::num::{complex_normal, compensated_sum, log_sum_exp, Real};
use crate::rng::Streams;
use crate::special::{bessel_i0_scaled, bessel_i1_scaled, GaussLegendre};

/// `L_{1/2}(−K) = e^{−K/2}[(1+K) I_0(K/2) + K I_1(K/2)]`.
pub fn laguerre_half<F: Real>(k: F) -> Result<F> {
    if !(k >= F::zero()) || !k.is_finite() {
        return Err(domain("laguerre_half", format!("K must be non-negative, got {k}")));
    }
    let k = k.as_f64();
    let x = 0.5 * k;
    Ok(F::of((1.0 + k) * bessel_i0_scaled(x) + k * bessel_i1_scaled(x)))
}

/// Mean and variance of a Rician envelope with shape `K` and power `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeMoments<F> {
    pub mean: F,
    pub variance: F,
}

pub fn envelope_moments<F: Real>(k: F, power: F) -> Result<EnvelopeMoments<F>> {
    if !(power > F::zero()) {
        return Err(domain("envelope_moments", format!("power must be positive, got {power}")));
    }
    let lag = laguerre_half(k)?;
    let mean = F::of(0.5) * (power * F::PI() / (k + F::one())).sqrt() * lag;
    let variance = power - power * F::PI() / (F::of(4.0) * (k + F::one())) * lag * lag;
    Ok(EnvelopeMoments { mean, variance })
}

/// Mean of the cascaded magnitude `|h_i||g_i|` for one element.
pub fn cascade_mean<F: Real>(geom: &LinkGeometry<F>) -> Result<F> {
    let lt = geom.tx_path_loss()?;
    let lr = geom.rx_path_loss()?;
    let h = envelope_moments(geom.tx_rician_k, lt)?;
    let g = envelope_moments(geom.rx_rician_k, lr)?;
    Ok(h.mean * g.mean)
}

/// Which expression for the variance of `Σ` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsVariant {
    /// Variance factor `(p² − 1)|δ|`, the looser of the two expressions.
    DifferenceOfSquares,
    /// `Σ = (p − 1) Σ_{|δ| terms} |h||g|`, so the factor is `(p − 1)²|δ|`.
    #[default]
    SquaredDifference,
}

/// Gaussian statistics of `Σ = H_{l_A} − H_{l̂_A}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PepStats<F> {
    pub mean: F,
    pub variance: F,
    /// `N_A − N̂_A`.
    pub delta: i64,
    pub variant: StatsVariant,
}

impl<F: Real> PepStats<F> {
    pub fn new(mean: F, variance: F) -> Self {
        Self {
            mean,
            variance,
            delta: 0,
            variant: StatsVariant::SquaredDifference,
        }
    }
}

/// Statistics of `Σ` for transmitted `active` and detected `detected` group
/// counts with `group_size` elements per group.
///
/// The per-element variance term is `L_t L_r − μ_hg²` in both variants; only
/// the `δ` scaling differs. The mean carries the sign of `δ`.
pub fn sigma_stats<F: Real>(
    active: usize,
    detected: usize,
    group_size: usize,
    gain: F,
    geom: &LinkGeometry<F>,
    variant: StatsVariant,
) -> Result<PepStats<F>> {
    let delta = (active as i64 - detected as i64) * group_size as i64;
    if delta == 0 {
        return Ok(PepStats {
            mean: F::zero(),
            variance: F::zero(),
            delta,
            variant,
        });
    }
    let mu = cascade_mean(geom)?;
    let second = geom.tx_path_loss()? * geom.rx_path_loss()?;
    let per_element = (second - mu * mu).max(F::zero());
    let d = F::of(delta as f64);
    let count = d.abs();
    let mean = (gain - F::one()) * d * mu;
    let variance = match variant {
        StatsVariant::DifferenceOfSquares => (gain * gain - F::one()) * count * per_element,
        StatsVariant::SquaredDifference => (gain - F::one()).powi(2) * count * per_element,
    };
    Ok(PepStats {
        mean,
        variance,
        delta,
        variant,
    })
}

/// Constants of the PEP integrand
/// `(1 + a σ² c / sin²θ)^{-1/2} exp(−b μ² c / sin²θ / (1 + a σ² c / sin²θ))`
/// with `c = P_t / N_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PepForm {
    /// `a = 1/2`, `b = 1/4`: the exact average of `Q(√(P_t Σ² / 2N_0))` over
    /// Gaussian `Σ`.
    #[default]
    Craig,
    /// `a = b = 1/4`, the variance coefficient halved relative to `Craig`.
    HalvedVariance,
    /// `a = b = 1/2`, the MGF evaluated at `−P_t/(2N_0 sin²θ)`.
    DoubledMean,
}

impl PepForm {
    fn constants(self) -> (f64, f64) {
        match self {
            PepForm::Craig => (0.5, 0.25),
            PepForm::HalvedVariance => (0.25, 0.25),
            PepForm::DoubledMean => (0.5, 0.5),
        }
    }

    fn integrand(self, mean_sq: f64, variance: f64, snr: f64, z: f64) -> f64 {
        let (a, b) = self.constants();
        let denom = 1.0 + a * variance * snr * z;
        (-(b * mean_sq * snr * z) / denom).exp() / denom.sqrt()
    }
}

/// Gauss–Legendre evaluation of the MGF-form PEP over `θ ∈ (0, π/2)`.
#[derive(Debug, Clone)]
pub struct PepIntegrator {
    rule: GaussLegendre,
    pub form: PepForm,
}

impl Default for PepIntegrator {
    fn default() -> Self {
        Self::new(64, PepForm::Craig)
    }
}

impl PepIntegrator {
    pub fn new(nodes: usize, form: PepForm) -> Self {
        Self {
            rule: GaussLegendre::new(nodes),
            form,
        }
    }

    pub fn nodes(&self) -> usize {
        self.rule.len()
    }

    /// Average PEP. `1/2` when `Σ` is identically zero.
    pub fn pep_exact<F: Real>(&self, stats: &PepStats<F>, tx_power: F, noise: F) -> Result<F> {
        let snr = snr_ratio("pep_exact", tx_power, noise)?;
        let mean_sq = stats.mean.as_f64().powi(2);
        let variance = stats.variance.as_f64();
        let form = self.form;
        let v = self.rule.integrate(0.0, std::f64::consts::FRAC_PI_2, |theta| {
            let s = theta.sin();
            form.integrand(mean_sq, variance, snr, 1.0 / (s * s))
        }) / std::f64::consts::PI;
        Ok(F::of(v.clamp(0.0, 0.5)))
    }

    /// The integrand at `θ = π/2`, halved: an upper bound on [`Self::pep_exact`].
    pub fn pep_upper<F: Real>(&self, stats: &PepStats<F>, tx_power: F, noise: F) -> Result<F> {
        let snr = snr_ratio("pep_upper", tx_power, noise)?;
        let v = 0.5 * self.form.integrand(stats.mean.as_f64().powi(2), stats.variance.as_f64(), snr, 1.0);
        Ok(F::of(v))
    }
}

fn snr_ratio<F: Real>(op: &'static str, tx_power: F, noise: F) -> Result<f64> {
    if !(noise > F::zero()) {
        return Err(domain(op, format!("noise power must be positive, got {noise}")));
    }
    if !(tx_power >= F::zero()) {
        return Err(domain(op, format!("transmit power must be non-negative, got {tx_power}")));
    }
    Ok((tx_power / noise).as_f64())
}

/// [`PepIntegrator::pep_exact`] with the default 64-node Craig rule.
pub fn pep_exact<F: Real>(stats: &PepStats<F>, tx_power: F, noise: F) -> Result<F> {
    PepIntegrator::default().pep_exact(stats, tx_power, noise)
}

/// [`PepIntegrator::pep_upper`] with the default form.
pub fn pep_upper<F: Real>(stats: &PepStats<F>, tx_power: F, noise: F) -> Result<F> {
    PepIntegrator::default().pep_upper(stats, tx_power, noise)
}

/// High-SNR expression as printed:
///
/// `(P_t/4N_0) L_t L_r (p²−1)|δ| · [1 − π²Λ²/(16(K_t+1)(K_r+1))]^{-1/2}
///  · exp(−π²Λ²(p−1)²|δ| / (16(K_t+1)(K_r+1) − π²Λ²(p²−1)))`
/// with `Λ = L_{1/2}(−K_t) L_{1/2}(−K_r)`.
///
/// Its leading factor grows with `P_t/N_0`, so this is a diagnostic, not a
/// probability.
pub fn pep_asymptotic<F: Real>(
    tx_power: F,
    noise: F,
    geom: &LinkGeometry<F>,
    gain: F,
    delta: i64,
) -> Result<F> {
    if delta == 0 {
        return Err(domain("pep_asymptotic", "identical hypotheses (delta = 0)"));
    }
    let snr = snr_ratio("pep_asymptotic", tx_power, noise)?;
    let lt = geom.tx_path_loss()?.as_f64();
    let lr = geom.rx_path_loss()?.as_f64();
    let kt = geom.tx_rician_k.as_f64();
    let kr = geom.rx_rician_k.as_f64();
    let lag = laguerre_half(geom.tx_rician_k)?.as_f64() * laguerre_half(geom.rx_rician_k)?.as_f64();
    let p = gain.as_f64();
    let d = delta.unsigned_abs() as f64;
    let pi2 = std::f64::consts::PI.powi(2);
    let k_prod = (kt + 1.0) * (kr + 1.0);
    let lead = snr / 4.0 * lt * lr * (p * p - 1.0) * d;
    let root = (1.0 - pi2 / 16.0 / k_prod * lag * lag).powf(-0.5);
    let expo = -pi2 * lag * lag * (p - 1.0).powi(2) * d / (16.0 * k_prod - pi2 * lag * lag * (p * p - 1.0));
    Ok(F::of(lead * root * expo.exp()))
}

/// Which hypothesis's noise power enters a pairwise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseReference {
    /// `N_0` of the transmitted hypothesis.
    #[default]
    Transmitted,
    /// The largest `N_0` over all hypotheses.
    WorstCase,
}

/// Union bound on the bit error probability of HRM with `G` groups.
#[derive(Debug, Clone)]
pub struct UnionBound<F> {
    pub groups: usize,
    pub group_size: usize,
    pub gain: F,
    pub geometry: LinkGeometry<F>,
    pub variant: StatsVariant,
    pub noise_reference: NoiseReference,
    pub integrator: PepIntegrator,
}

impl<F: Real> UnionBound<F> {
    pub fn new(groups: usize, group_size: usize, gain: F, geometry: LinkGeometry<F>) -> Self {
        Self {
            groups,
            group_size,
            gain,
            geometry,
            variant: StatsVariant::default(),
            noise_reference: NoiseReference::default(),
            integrator: PepIntegrator::default(),
        }
    }

    /// CLT noise power of hypothesis `l` under `cfg`.
    pub fn clt_noise(&self, cfg: &HrmConfig<F>, l: usize) -> Result<F> {
        let lr = self.geometry.rx_path_loss()?;
        Ok(crate::modem::clt_noise_power(cfg, lr, self.gain, l * self.group_size))
    }

    /// `(1/m) Σ_l 2^{-m} Σ_{l̂≠l} PEP(l→l̂) e(l, l̂)` with `N_0` from `noise(l)`.
    pub fn abep(&self, tx_power: F, noise: impl Fn(usize) -> F) -> Result<F> {
        self.abep_with(tx_power, noise, |stats, pt, n0| self.integrator.pep_exact(stats, pt, n0))
    }

    /// Same bound with the θ = π/2 PEP bound in place of the integral.
    pub fn abep_upper(&self, tx_power: F, noise: impl Fn(usize) -> F) -> Result<F> {
        self.abep_with(tx_power, noise, |stats, pt, n0| self.integrator.pep_upper(stats, pt, n0))
    }

    fn abep_with(
        &self,
        tx_power: F,
        noise: impl Fn(usize) -> F,
        pep: impl Fn(&PepStats<F>, F, F) -> Result<F>,
    ) -> Result<F> {
        let g = self.groups;
        let m = bits_per_index(g)
            .filter(|&m| m > 0)
            .ok_or_else(|| domain("abep_union", format!("group count must be a power of two ≥ 2, got {g}")))?;
        let worst = (0..g).map(&noise).fold(F::zero(), F::max);
        let mut total = F::zero();
        for l in 0..g {
            let n0 = match self.noise_reference {
                NoiseReference::Transmitted => noise(l),
                NoiseReference::WorstCase => worst,
            };
            for l_hat in (0..g).filter(|&k| k != l) {
                let stats = sigma_stats(l, l_hat, self.group_size, self.gain, &self.geometry, self.variant)?;
                total += pep(&stats, tx_power, n0)? * F::of(bit_errors(l, l_hat) as f64);
            }
        }
        Ok(total / (F::of(m as f64) * F::of(g as f64)))
    }
}

/// Union-bound ABEP with CLT noise powers from `cfg`.
pub fn abep_union<F: Real>(
    groups: usize,
    group_size: usize,
    gain: F,
    geom: &LinkGeometry<F>,
    cfg: &HrmConfig<F>,
    variant: StatsVariant,
) -> Result<F> {
    let mut bound = UnionBound::new(groups, group_size, gain, *geom);
    bound.variant = variant;
    let lr = geom.rx_path_loss()?;
    bound.abep(cfg.tx_power, |l| {
        crate::modem::clt_noise_power(cfg, lr, gain, l * group_size)
    })
}

/// Monte Carlo mutual information with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate<F> {
    /// Bits per channel use, clamped to `[0, log2 G]`.
    pub bits: F,
    pub std_error: F,
    pub samples: u64,
}

/// Mutual information between the HRM index and the received sample.
///
/// Each sample draws one channel and, for every transmitted index, one
/// Gaussian noise draw with the CLT noise power of that index. The per-index
/// term is `log2 Σ_{l̂} exp(−(|√P_t(H_l − H_l̂) + n|² − |n|²)/N_0)`, whose
/// mean equals the `log2 e` correction of the textbook expression.
pub fn mutual_information<F: Real>(
    model: &ChannelModel<F>,
    cfg: &HrmConfig<F>,
    gain: F,
    n_samples: u64,
    streams: &Streams,
    point: u64,
) -> Result<MiEstimate<F>> {
    if n_samples == 0 {
        return Err(domain("mutual_information", "need at least one sample"));
    }
    let layout = *model.layout();
    let g = layout.groups;
    let log2g = (g as f64).log2();
    let ln2 = std::f64::consts::LN_2;
    let amp = cfg.tx_power.sqrt();

    let losses: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map_init(
            || (ChannelRealization::default(), Vec::with_capacity(g)),
            |(ch, exps), t| -> Result<f64> {
                let mut rng = streams.stream(point, t);
                model.draw_into(&mut rng, ch);
                let set = hrm_symbol_set(ch, &layout, cfg, gain)?;
                let mut acc = 0.0;
                for l in 0..g {
                    let n0 = set.noise_powers[l];
                    let n = complex_normal(&mut rng, n0);
                    let base = n.norm_sqr();
                    exps.clear();
                    for &h in &set.amplitudes {
                        let d = n + num_complex::Complex::new(amp * (set.amplitudes[l] - h), F::zero());
                        exps.push(((base - d.norm_sqr()) / n0).as_f64());
                    }
                    acc += log_sum_exp(exps) / ln2;
                }
                Ok(acc / g as f64)
            },
        )
        .collect::<Result<_>>()?;

    let n = losses.len() as f64;
    let mean = compensated_sum(losses.iter().copied()) / n;
    let var = if losses.len() > 1 {
        compensated_sum(losses.iter().map(|&x| (x - mean).powi(2))) / (n - 1.0)
    } else {
        0.0
    };
    Ok(MiEstimate {
        bits: F::of((log2g - mean).clamp(0.0, log2g)),
        std_error: F::of((var / n).sqrt()),
        samples: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RisLayout;
    use rand::Rng;
    use statrs::function::erf::erfc;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn q(x: f64) -> f64 {
        0.5 * erfc(x / std::f64::consts::SQRT_2)
    }

    /// `e^{-K} Σ_k (3/2)_k / (k!)² K^k`, the Kummer form of `L_{1/2}(−K)`.
    fn kummer(k: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut i = 0.0;
        while term > 1e-18 * sum || i < 5.0 {
            term *= (1.5 + i) * k / ((i + 1.0) * (i + 1.0));
            sum += term;
            i += 1.0;
        }
        sum * (-k).exp()
    }

    // 20-digit reference values of L_{1/2}(−K).
    const LAGUERRE: [(f64, f64); 13] = [
        (0.5, 1.2355820575582631692),
        (1.0, 1.4464913440831718334),
        (2.0, 1.8130996534803382072),
        (5.0, 2.6532018973295492084),
        (10.0, 3.6586716081480354531),
        (20.0, 5.1097537081211111282),
        (29.9, 6.22188866270967693),
        (30.0, 6.2321107262685040231),
        (31.0, 6.3334245458484638726),
        (50.0, 8.0188411168839107309),
        (100.0, 11.31203668068241341),
        (1000.0, 35.691404059551376865),
        (1e6, 1128.3794491903396096),
    ];

    #[test]
    fn laguerre_reference_values() {
        assert_eq!(laguerre_half(0.0_f64).unwrap(), 1.0);
        for &(k, v) in &LAGUERRE {
            assert!(rel(laguerre_half(k).unwrap(), v) < 1e-10, "K = {k}");
        }
        assert!(laguerre_half(-1.0_f64).is_err());
    }

    #[test]
    fn laguerre_matches_kummer_series() {
        for k in [0.1, 0.7, 3.0, 8.0, 12.5] {
            assert!(rel(laguerre_half(k).unwrap(), kummer(k)) < 1e-12, "K = {k}");
        }
    }

    #[test]
    fn laguerre_large_k_scaling() {
        let k = 1e6_f64;
        let ratio = laguerre_half(k).unwrap() / k.sqrt();
        assert!(rel(ratio, 2.0 / std::f64::consts::PI.sqrt()) < 1e-6);
    }

    #[test]
    fn envelope_moment_values() {
        let pi = std::f64::consts::PI;
        let m = envelope_moments(0.0_f64, 1.0).unwrap();
        assert!(rel(m.mean, pi.sqrt() / 2.0) < 1e-14);
        assert!(rel(m.variance, 1.0 - pi / 4.0) < 1e-14);
        let m4 = envelope_moments(0.0_f64, 4.0).unwrap();
        assert!(rel(m4.mean, 1.7724538509055160273) < 1e-14);
        assert!(rel(m4.variance, 0.85840734641020676154) < 1e-13);
        let m1 = envelope_moments(1.0_f64, 1.0).unwrap();
        assert!(rel(m1.mean, 0.90645402552196947249) < 1e-12);
        assert!(rel(m1.variance, 0.1783410996150167162) < 1e-10);
        let m10 = envelope_moments(10.0_f64, 1.0).unwrap();
        assert!(rel(m10.mean, 0.97762439090461111015) < 1e-12);
        assert!(rel(m10.variance, 0.044250550308388129678) < 1e-9);
    }

    #[test]
    fn sigma_stats_degenerate_cases() {
        let geom = LinkGeometry::reference();
        for variant in [StatsVariant::DifferenceOfSquares, StatsVariant::SquaredDifference] {
            let s = sigma_stats(1, 1, 16, 10.0_f64, &geom, variant).unwrap();
            assert_eq!((s.mean, s.variance, s.delta), (0.0, 0.0, 0));
            let s = sigma_stats(1, 0, 16, 1.0_f64, &geom, variant).unwrap();
            assert_eq!(s.mean, 0.0);
        }
        let up = sigma_stats(3, 1, 8, 10.0_f64, &geom, StatsVariant::SquaredDifference).unwrap();
        let down = sigma_stats(1, 3, 8, 10.0_f64, &geom, StatsVariant::SquaredDifference).unwrap();
        assert_eq!(up.delta, 16);
        assert_eq!(down.delta, -16);
        assert_eq!(up.mean, -down.mean);
        assert_eq!(up.variance, down.variance);
    }

    #[test]
    fn sample_moments_select_squared_difference_variance() {
        // Σ for δ = 128 elements at p = 10 sampled directly from Rayleigh
        // envelopes with the reference path losses.
        let geom = LinkGeometry::<f64>::reference();
        let lt = geom.tx_path_loss().unwrap();
        let lr = geom.rx_path_loss().unwrap();
        let p = 10.0;
        let delta = 128;
        let draws = 1_000_000u64;
        let streams = Streams::new(2024);
        let samples: Vec<f64> = (0..draws)
            .into_par_iter()
            .map(|t| {
                let mut rng = streams.stream(0, t);
                let s: f64 = (0..delta)
                    .map(|_| {
                        let h = complex_normal(&mut rng, lt).norm();
                        let g = complex_normal(&mut rng, lr).norm();
                        h * g
                    })
                    .sum();
                (p - 1.0) * s
            })
            .collect();
        let n = draws as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);

        let re = sigma_stats(1, 0, delta, p, &geom, StatsVariant::SquaredDifference).unwrap();
        let lit = sigma_stats(1, 0, delta, p, &geom, StatsVariant::DifferenceOfSquares).unwrap();
        assert!(rel(mean, re.mean) < 2e-3, "mean {mean} vs {}", re.mean);
        assert!(rel(var, re.variance) < 1e-2, "variance {var} vs {}", re.variance);
        assert!(rel(var, lit.variance) > 0.1);
    }

    #[test]
    fn pep_zero_distance_is_half() {
        let s = PepStats::new(0.0_f64, 0.0);
        assert!((pep_exact(&s, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((pep_upper(&s, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(pep_exact(&s, 1.0, 0.0).is_err());
    }

    #[test]
    fn pep_vanishes_monotonically_with_power() {
        let s = PepStats::new(1.0_f64, 0.01);
        let mut prev = 0.5;
        for db in (-20..=40).step_by(2) {
            let pt = 10f64.powf(db as f64 / 10.0);
            let v = pep_exact(&s, pt, 1.0).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn quadrature_converges() {
        let coarse = PepIntegrator::new(64, PepForm::Craig);
        let fine = PepIntegrator::new(256, PepForm::Craig);
        for &(mu, var) in &[(0.1, 0.01), (1.0, 0.5), (3.0, 0.1), (0.5, 4.0)] {
            for db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
                let s = PepStats::new(mu, var);
                let pt = 10f64.powf(db / 10.0);
                let a: f64 = coarse.pep_exact(&s, pt, 1.0).unwrap();
                let b: f64 = fine.pep_exact(&s, pt, 1.0).unwrap();
                assert!((a - b).abs() < 1e-10, "mu {mu} var {var} {db} dB: {a} vs {b}");
            }
        }
    }

    #[test]
    fn craig_form_matches_q_expectation() {
        let streams = Streams::new(99);
        let mut rng = streams.stream(0, 0);
        for case in 0..5u64 {
            let mu: f64 = rng.random_range(0.2..2.0);
            let var: f64 = rng.random_range(0.01..1.0);
            let snr: f64 = rng.random_range(0.5..10.0);
            let n = 200_000u64;
            let mc: f64 = (0..n)
                .into_par_iter()
                .map(|t| {
                    let mut r = streams.stream(case + 1, t);
                    let sigma = mu + var.sqrt() * f64::standard_normal(&mut r);
                    q((snr * sigma * sigma / 2.0).sqrt())
                })
                .sum::<f64>()
                / n as f64;
            let exact = pep_exact(&PepStats::new(mu, var), snr, 1.0).unwrap();
            assert!(rel(exact, mc) < 0.01, "case {case}: {exact} vs {mc}");
        }
    }

    #[test]
    fn upper_bound_dominates() {
        let streams = Streams::new(3);
        let mut rng = streams.stream(0, 0);
        for form in [PepForm::Craig, PepForm::HalvedVariance, PepForm::DoubledMean] {
            let integ = PepIntegrator::new(64, form);
            for _ in 0..2000 {
                let s = PepStats::new(rng.random_range(0.0..3.0_f64), rng.random_range(0.0..3.0));
                let pt = 10f64.powf(rng.random_range(-3.0..3.0));
                let exact = integ.pep_exact(&s, pt, 1.0).unwrap();
                let upper = integ.pep_upper(&s, pt, 1.0).unwrap();
                assert!(upper >= exact - 1e-15 && upper <= 0.5);
            }
        }
    }

    #[test]
    fn asymptote_rejects_zero_delta() {
        let geom = LinkGeometry::<f64>::reference();
        assert!(pep_asymptotic(1.0, 1e-12, &geom, 10.0, 0).is_err());
        let v = pep_asymptotic(1.0, 1e-12, &geom, 10.0, 16).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn two_group_bound_is_the_pep() {
        let geom = LinkGeometry::<f64>::reference();
        let mut cfg = HrmConfig::reference(1e-2);
        cfg.dynamic_noise = 0.0;
        let bound = abep_union(2, 32, 10.0, &geom, &cfg, StatsVariant::SquaredDifference).unwrap();
        let stats = sigma_stats(1, 0, 32, 10.0, &geom, StatsVariant::SquaredDifference).unwrap();
        let pep = pep_exact(&stats, cfg.tx_power, cfg.static_noise).unwrap();
        assert!(rel(bound, pep) < 1e-14);

        let ub = UnionBound::new(4, 16, 10.0, geom);
        let zero = ub.abep_with(1.0, |_| 1.0, |_, _, _| Ok(0.0)).unwrap();
        assert_eq!(zero, 0.0);
        assert!(UnionBound::new(3, 16, 10.0, geom).abep(1.0, |_| 1.0).is_err());
    }

    #[test]
    fn mutual_information_limits() {
        let model = ChannelModel::new(LinkGeometry::reference(), RisLayout::new(64, 4)).unwrap();
        let streams = Streams::new(5);
        let loud = HrmConfig::<f64>::reference(1.0).noiseless();
        let mut loud = loud;
        loud.static_noise = 1e-30;
        let hi = mutual_information(&model, &loud, 10.0, 2000, &streams, 0).unwrap();
        assert!((hi.bits - 2.0).abs() < 1e-6, "{}", hi.bits);

        let mut quiet = HrmConfig::reference(1e-9);
        quiet.static_noise = 1.0;
        quiet.dynamic_noise = 1.0;
        let lo = mutual_information(&model, &quiet, 10.0, 2000, &streams, 1).unwrap();
        assert!(lo.bits < 1e-3, "{}", lo.bits);
    }

    #[test]
    fn mutual_information_is_deterministic_and_bounded() {
        let model = ChannelModel::new(LinkGeometry::reference(), RisLayout::new(64, 4)).unwrap();
        let streams = Streams::new(8);
        let mut prev = 0.0;
        for (i, dbm) in [-10.0, 0.0, 10.0, 20.0].iter().enumerate() {
            let cfg = HrmConfig::reference(crate::num::dbm_to_watts(*dbm));
            let a = mutual_information(&model, &cfg, 10.0, 4000, &streams, i as u64).unwrap();
            let b = mutual_information(&model, &cfg, 10.0, 4000, &streams, i as u64).unwrap();
            assert_eq!(a, b);
            assert!((0.0..=2.0).contains(&a.bits));
            assert!(a.bits >= prev - 2.0 * a.std_error);
            prev = a.bits;
        }
    }
}
