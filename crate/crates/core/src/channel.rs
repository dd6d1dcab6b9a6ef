//! Path loss and Rician fading for the transmitter→RIS and RIS→receiver hops.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;

use crate::error::{config, domain, HrmError, Result};
use crate::num::{complex_normal, db_to_linear, Real};

/// Carrier wavelength at 2.4 GHz, in meters.
pub const WAVELENGTH_2G4: f64 = 299_792_458.0 / 2.4e9;

/// Large-scale parameters of both hops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<F> {
    /// Transmitter→RIS distance in meters.
    pub tx_distance: F,
    /// RIS→receiver distance in meters.
    pub rx_distance: F,
    pub tx_exponent: F,
    pub rx_exponent: F,
    /// Path loss at 1 m, in dB (negative).
    pub reference_loss_db: F,
    pub tx_rician_k: F,
    pub rx_rician_k: F,
    /// Multiplicative power scale on the transmitter hop; 1 leaves the
    /// path loss untouched.
    pub tx_scale: F,
    pub rx_scale: F,
}

impl<F: Real> LinkGeometry<F> {
    /// Outdoor reference deployment: 20 m / 50 m hops, exponents 2.2 / 2.8,
    /// -30 dB at 1 m, Rayleigh fading on both hops.
    pub fn reference() -> Self {
        Self {
            tx_distance: F::of(20.0),
            rx_distance: F::of(50.0),
            tx_exponent: F::of(2.2),
            rx_exponent: F::of(2.8),
            reference_loss_db: F::of(-30.0),
            tx_rician_k: F::zero(),
            rx_rician_k: F::zero(),
            tx_scale: F::one(),
            rx_scale: F::one(),
        }
    }

    pub fn with_rician(mut self, k: F) -> Self {
        self.tx_rician_k = k;
        self.rx_rician_k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: F| v > F::zero() && v.is_finite();
        if !positive(self.tx_distance) || !positive(self.rx_distance) {
            return Err(config("link distances must be positive"));
        }
        if !(self.tx_exponent >= F::one() && self.rx_exponent >= F::one()) {
            return Err(config("path-loss exponents must be at least 1"));
        }
        if !(self.tx_rician_k >= F::zero() && self.rx_rician_k >= F::zero()) {
            return Err(config("Rician K-factors must be non-negative"));
        }
        if !positive(self.tx_scale) || !positive(self.rx_scale) {
            return Err(config("hop scale parameters must be positive"));
        }
        if !self.reference_loss_db.is_finite() {
            return Err(config("reference loss must be finite"));
        }
        Ok(())
    }

    /// Linear power gain of the transmitter hop, `L_t`.
    pub fn tx_path_loss(&self) -> Result<F> {
        Ok(path_loss(self.reference_loss_db, self.tx_distance, self.tx_exponent)? * self.tx_scale)
    }

    /// Linear power gain of the receiver hop, `L_r`.
    pub fn rx_path_loss(&self) -> Result<F> {
        Ok(path_loss(self.reference_loss_db, self.rx_distance, self.rx_exponent)? * self.rx_scale)
    }
}

/// Element count, grouping and physical geometry of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisLayout<F> {
    pub elements: usize,
    pub groups: usize,
    /// Horizontal element size in meters.
    pub element_width: F,
    /// Vertical element size in meters.
    pub element_height: F,
    pub wavelength: F,
    /// Draw spatially correlated Rayleigh fading across the surface.
    pub correlated: bool,
}

impl<F: Real> RisLayout<F> {
    /// Uncorrelated surface with half-wavelength elements at 2.4 GHz.
    pub fn new(elements: usize, groups: usize) -> Self {
        let wavelength = F::of(WAVELENGTH_2G4);
        Self {
            elements,
            groups,
            element_width: wavelength * F::of(0.5),
            element_height: wavelength * F::of(0.5),
            wavelength,
            correlated: false,
        }
    }

    /// Square correlated surface with elements of `size_in_wavelengths · λ`
    /// on each side.
    pub fn correlated(elements: usize, groups: usize, size_in_wavelengths: F) -> Self {
        let mut layout = Self::new(elements, groups);
        layout.element_width = layout.wavelength * size_in_wavelengths;
        layout.element_height = layout.wavelength * size_in_wavelengths;
        layout.correlated = true;
        layout
    }

    /// Elements per group, `S = N / G`.
    pub fn group_size(&self) -> usize {
        self.elements / self.groups.max(1)
    }

    /// Elements per row when the surface is square.
    pub fn side(&self) -> Option<usize> {
        let side = (self.elements as f64).sqrt().round() as usize;
        (side * side == self.elements).then_some(side)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements == 0 {
            return Err(config("surface needs at least one element"));
        }
        if self.groups == 0 || self.elements % self.groups != 0 {
            return Err(config(format!(
                "group count {} must divide element count {}",
                self.groups, self.elements
            )));
        }
        if self.correlated {
            if self.side().is_none() {
                return Err(config(format!(
                    "correlated surface needs a square element count, got {}",
                    self.elements
                )));
            }
            let positive = |v: F| v > F::zero() && v.is_finite();
            if !positive(self.element_width)
                || !positive(self.element_height)
                || !positive(self.wavelength)
            {
                return Err(config(
                    "correlated surface needs positive element sizes and wavelength",
                ));
            }
        }
        Ok(())
    }
}

/// Per-element complex gains of both hops, path loss included.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelRealization<F> {
    /// Transmitter→RIS gains.
    pub h: Vec<Complex<F>>,
    /// RIS→receiver gains.
    pub g: Vec<Complex<F>>,
    /// Mean power gain of the RIS→receiver hop, used by the CLT noise model.
    pub rx_path_loss: F,
}

impl<F: Real> ChannelRealization<F> {
    pub fn new(h: Vec<Complex<F>>, g: Vec<Complex<F>>, rx_path_loss: F) -> Result<Self> {
        if h.len() != g.len() {
            return Err(domain(
                "ChannelRealization::new",
                format!("hop lengths differ: {} vs {}", h.len(), g.len()),
            ));
        }
        if h.iter().chain(g.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(domain("ChannelRealization::new", "non-finite channel entry"));
        }
        Ok(Self { h, g, rx_path_loss })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Cascaded magnitudes `|h_i||g_i|`.
    pub fn cascade_magnitudes(&self) -> impl Iterator<Item = F> + '_ {
        self.h.iter().zip(&self.g).map(|(h, g)| h.norm() * g.norm())
    }
}

/// Linear power gain `10^(β₀/10) · d^(-α)`.
pub fn path_loss<F: Real>(reference_loss_db: F, distance: F, exponent: F) -> Result<F> {
    if !(distance > F::zero()) || !distance.is_finite() {
        return Err(domain("path_loss", format!("distance must be positive, got {distance}")));
    }
    Ok(db_to_linear(reference_loss_db) * distance.powf(-exponent))
}

/// Unit-power Rician fading vector with shape factor `k`.
///
/// The line-of-sight term has unit modulus and a uniformly random phase, so
/// each envelope is exactly Rician(K).
pub fn gen_rician<F: Real, R: Rng + ?Sized>(n: usize, k: F, rng: &mut R) -> Result<Vec<Complex<F>>> {
    if !(k >= F::zero()) {
        return Err(domain("gen_rician", format!("K-factor must be non-negative, got {k}")));
    }
    let mut out = vec![Complex::new(F::zero(), F::zero()); n];
    fill_rician(&mut out, k, rng);
    Ok(out)
}

fn fill_rician<F: Real, R: Rng + ?Sized>(out: &mut [Complex<F>], k: F, rng: &mut R) {
    let denom = k + F::one();
    let scatter_power = F::one() / denom;
    if k == F::zero() {
        for z in out.iter_mut() {
            *z = complex_normal(rng, F::one());
        }
        return;
    }
    let los = (k / denom).sqrt();
    let two_pi = F::TAU();
    for z in out.iter_mut() {
        let theta = F::unit_uniform(rng) * two_pi - F::PI();
        let (s, c) = theta.sin_cos();
        *z = Complex::new(c * los, s * los) + complex_normal(rng, scatter_power);
    }
}

/// Sinc correlation of a square surface and its symmetric square root.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCorrelation<F> {
    n: usize,
    matrix: Vec<F>,
    sqrt: Vec<F>,
}

impl<F: Real> SpatialCorrelation<F> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `[R]_{k,l}`.
    pub fn entry(&self, k: usize, l: usize) -> F {
        self.matrix[k * self.n + l]
    }

    /// `[R^{1/2}]_{k,l}`.
    pub fn sqrt_entry(&self, k: usize, l: usize) -> F {
        self.sqrt[k * self.n + l]
    }

    /// Row-vector product `out = x · R^{1/2}`.
    pub fn color(&self, x: &[Complex<F>], out: &mut [Complex<F>]) {
        let n = self.n;
        assert!(x.len() == n && out.len() == n);
        out.fill(Complex::new(F::zero(), F::zero()));
        for (xi, row) in x.iter().zip(self.sqrt.chunks_exact(n)) {
            for (o, &a) in out.iter_mut().zip(row) {
                o.re += xi.re * a;
                o.im += xi.im * a;
            }
        }
    }
}

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Builds `[R]_{k,l} = sinc(2‖w_k − w_l‖/λ)` for the element grid of `layout`
/// and its square root by symmetric eigendecomposition.
///
/// Eigenvalues in `[-1e-10·N, 0)` are clamped to zero; anything more negative
/// is reported as a numerical failure.
pub fn correlation_matrix<F: Real>(layout: &RisLayout<F>) -> Result<SpatialCorrelation<F>> {
    let side = layout.side().ok_or_else(|| {
        config(format!(
            "correlation needs a square surface, got {} elements",
            layout.elements
        ))
    })?;
    let n = layout.elements;
    let dh = layout.element_width.as_f64();
    let dv = layout.element_height.as_f64();
    let lambda = layout.wavelength.as_f64();
    if !(dh > 0.0 && dv > 0.0 && lambda > 0.0) {
        return Err(config("correlation needs positive element sizes and wavelength"));
    }
    let pos = |i: usize| ((i % side) as f64 * dh, (i / side) as f64 * dv);
    let r = DMatrix::<f64>::from_fn(n, n, |k, l| {
        let (yk, zk) = pos(k);
        let (yl, zl) = pos(l);
        let dist = (yk - yl).hypot(zk - zl);
        sinc(2.0 * dist / lambda)
    });

    let eig = SymmetricEigen::new(r.clone());
    let floor = -1e-10 * n as f64;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < floor {
        return Err(HrmError::Numerical {
            module: "channel",
            op: "correlation_matrix",
            msg: format!("correlation matrix is indefinite (min eigenvalue {min:e})"),
        });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    // Symmetrize: the product is symmetric only up to roundoff.
    let sqrt = (&sqrt + sqrt.transpose()) * 0.5;

    let to_vec = |m: &DMatrix<f64>| {
        let mut v = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                v.push(F::of(m[(k, l)]));
            }
        }
        v
    };
    Ok(SpatialCorrelation {
        n,
        matrix: to_vec(&r),
        sqrt: to_vec(&sqrt),
    })
}

/// Channel generator for a fixed geometry and layout.
///
/// Path losses and the correlation square root are computed once and shared,
/// so cloning a model is cheap and it can be used from many threads.
#[derive(Debug, Clone)]
pub struct ChannelModel<F> {
    geometry: LinkGeometry<F>,
    layout: RisLayout<F>,
    tx_path_loss: F,
    rx_path_loss: F,
    tx_amplitude: F,
    rx_amplitude: F,
    correlation: Option<Arc<SpatialCorrelation<F>>>,
}

impl<F: Real> ChannelModel<F> {
    pub fn new(geometry: LinkGeometry<F>, layout: RisLayout<F>) -> Result<Self> {
        geometry.validate()?;
        layout.validate()?;
        let correlation = if layout.correlated {
            if geometry.tx_rician_k != F::zero() || geometry.rx_rician_k != F::zero() {
                return Err(config(
                    "spatially correlated fading is Rayleigh only; set both K-factors to 0",
                ));
            }
            Some(Arc::new(correlation_matrix(&layout)?))
        } else {
            None
        };
        let tx_path_loss = geometry.tx_path_loss()?;
        let rx_path_loss = geometry.rx_path_loss()?;
        Ok(Self {
            geometry,
            layout,
            tx_path_loss,
            rx_path_loss,
            tx_amplitude: tx_path_loss.sqrt(),
            rx_amplitude: rx_path_loss.sqrt(),
            correlation,
        })
    }

    pub fn geometry(&self) -> &LinkGeometry<F> {
        &self.geometry
    }

    pub fn layout(&self) -> &RisLayout<F> {
        &self.layout
    }

    pub fn tx_path_loss(&self) -> F {
        self.tx_path_loss
    }

    pub fn rx_path_loss(&self) -> F {
        self.rx_path_loss
    }

    pub fn correlation(&self) -> Option<&SpatialCorrelation<F>> {
        self.correlation.as_deref()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization<F> {
        let mut ch = ChannelRealization::default();
        self.draw_into(rng, &mut ch);
        ch
    }

    /// Draws a realization into `ch`, reusing its allocations.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, ch: &mut ChannelRealization<F>) {
        let n = self.layout.elements;
        let zero = Complex::new(F::zero(), F::zero());
        ch.h.resize(n, zero);
        ch.g.resize(n, zero);
        ch.rx_path_loss = self.rx_path_loss;
        match &self.correlation {
            None => {
                fill_rician(&mut ch.h, self.geometry.tx_rician_k, rng);
                fill_rician(&mut ch.g, self.geometry.rx_rician_k, rng);
            }
            Some(corr) => {
                let mut white = vec![zero; n];
                fill_rician(&mut white, F::zero(), rng);
                corr.color(&white, &mut ch.h);
                fill_rician(&mut white, F::zero(), rng);
                corr.color(&white, &mut ch.g);
            }
        }
        for z in ch.h.iter_mut() {
            *z = z.scale(self.tx_amplitude);
        }
        for z in ch.g.iter_mut() {
            *z = z.scale(self.rx_amplitude);
        }
    }
}

/// One channel realization for `geometry` and `layout`.
///
/// Rebuilds the correlation square root on every call; use [`ChannelModel`]
/// when drawing repeatedly.
pub fn gen_channels<F: Real, R: Rng + ?Sized>(
    geometry: &LinkGeometry<F>,
    layout: &RisLayout<F>,
    rng: &mut R,
) -> Result<ChannelRealization<F>> {
    Ok(ChannelModel::new(*geometry, *layout)?.draw(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn path_loss_values() {
        assert!(rel(path_loss(-30.0, 1.0, 2.2).unwrap(), 1.0e-3) < 1e-14);
        // 1e-3 · 20^-2.2 and 1e-3 · 50^-2.8, 40-digit reference.
        assert!(rel(path_loss(-30.0, 20.0, 2.2).unwrap(), 1.37320067913265e-6) < 1e-12);
        assert!(rel(path_loss(-30.0, 50.0, 2.8).unwrap(), 1.74937931830925e-8) < 1e-12);
        assert!(path_loss(-30.0_f64, 0.0, 2.0).is_err());
        assert!(path_loss(-30.0_f64, -1.0, 2.0).is_err());
    }

    #[test]
    fn rician_rejects_negative_k() {
        let mut rng = Streams::new(0).stream(0, 0);
        assert!(gen_rician::<f64, _>(4, -0.1, &mut rng).is_err());
    }

    #[test]
    fn rayleigh_limit_envelope() {
        let mut rng = Streams::new(11).stream(0, 0);
        let v = gen_rician::<f64, _>(400_000, 0.0, &mut rng).unwrap();
        let env: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        let mean = env.iter().sum::<f64>() / env.len() as f64;
        let var = env.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / env.len() as f64;
        assert!((mean - std::f64::consts::PI.sqrt() / 2.0).abs() < 3e-3, "{mean}");
        assert!((var - (1.0 - std::f64::consts::FRAC_PI_4)).abs() < 3e-3, "{var}");
    }

    #[test]
    fn deterministic_los_limit() {
        let mut rng = Streams::new(5).stream(0, 0);
        let v = gen_rician::<f64, _>(1000, 1e6, &mut rng).unwrap();
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 5e-3));
    }

    #[test]
    fn unit_power_normalization() {
        let n = 1_000_000;
        for (i, &k) in [0.0, 0.5, 3.0, 10.0].iter().enumerate() {
            let mut rng = Streams::new(21).stream(i as u64, 0);
            let v = gen_rician::<f64, _>(n, k, &mut rng).unwrap();
            let p = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            assert!((p - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "K={k} power {p}");
        }
    }

    #[test]
    fn rician_envelope_mean_at_k10() {
        let n = 2_000_000;
        let mut rng = Streams::new(8).stream(0, 0);
        let v = gen_rician::<f64, _>(n, 10.0, &mut rng).unwrap();
        let mean = v.iter().map(|z| z.norm()).sum::<f64>() / n as f64;
        assert!((mean - 0.978).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn channel_power_matches_path_loss() {
        let geom = LinkGeometry::<f64>::reference();
        let layout = RisLayout::new(100, 1);
        let model = ChannelModel::new(geom, layout).unwrap();
        let streams = Streams::new(3);
        let mut ch = ChannelRealization::default();
        let mut acc_h = 0.0;
        let mut acc_g = 0.0;
        let draws = 10_000;
        for t in 0..draws {
            model.draw_into(&mut streams.stream(0, t), &mut ch);
            acc_h += ch.h.iter().map(|z| z.norm_sqr()).sum::<f64>();
            acc_g += ch.g.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let samples = (draws * 100) as f64;
        assert!(rel(acc_h / samples, 1.37320067913265e-6) < 5e-3);
        assert!(rel(acc_g / samples, 1.74937931830925e-8) < 5e-3);
        assert_eq!(ch.rx_path_loss, model.rx_path_loss());
    }

    #[test]
    fn correlated_layout_validation() {
        let geom = LinkGeometry::<f64>::reference();
        let mut zero = RisLayout::correlated(16, 2, 0.5);
        zero.element_width = 0.0;
        zero.element_height = 0.0;
        assert!(matches!(ChannelModel::new(geom, zero), Err(HrmError::Config(_))));
        let not_square = RisLayout::correlated(32, 2, 0.5);
        assert!(matches!(ChannelModel::new(geom, not_square), Err(HrmError::Config(_))));
        let rician = geom.with_rician(1.0);
        assert!(ChannelModel::new(rician, RisLayout::correlated(16, 2, 0.5)).is_err());
    }

    #[test]
    fn correlation_entries() {
        let r = correlation_matrix(&RisLayout::<f64>::correlated(16, 1, 0.5)).unwrap();
        assert_eq!(r.entry(3, 3), 1.0);
        assert!(r.entry(0, 1).abs() < 1e-15);
        let q = correlation_matrix(&RisLayout::<f64>::correlated(16, 1, 0.25)).unwrap();
        assert!((q.entry(0, 1) - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((q.entry(5, 4) - 0.636_619_772_367_581_3).abs() < 1e-12);
    }

    #[test]
    fn correlation_sqrt_reconstructs() {
        for &(n, size) in &[(16, 0.125), (64, 0.25), (256, 0.5)] {
            let c = correlation_matrix(&RisLayout::<f64>::correlated(n, 1, size)).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 0..n {
                for l in 0..n {
                    assert_eq!(c.entry(k, l), c.entry(l, k));
                    let s: f64 = (0..n).map(|j| c.sqrt_entry(k, j) * c.sqrt_entry(j, l)).sum();
                    num += (s - c.entry(k, l)).powi(2);
                    den += c.entry(k, l).powi(2);
                }
                assert_eq!(c.entry(k, k), 1.0);
            }
            assert!((num / den).sqrt() < 1e-8, "n={n} size={size}");
        }
    }

    fn sample_correlation(model: &ChannelModel<f64>, a: usize, b: usize, draws: u64) -> f64 {
        let streams = Streams::new(99);
        let mut ch = ChannelRealization::default();
        let (mut cross, mut pa, mut pb) = (Complex::new(0.0, 0.0), 0.0, 0.0);
        for t in 0..draws {
            model.draw_into(&mut streams.stream(0, t), &mut ch);
            cross += ch.h[a] * ch.h[b].conj();
            pa += ch.h[a].norm_sqr();
            pb += ch.h[b].norm_sqr();
        }
        cross.norm() / (pa * pb).sqrt()
    }

    #[test]
    fn half_wavelength_neighbours_are_uncorrelated() {
        let geom = LinkGeometry::reference();
        let model = ChannelModel::new(geom, RisLayout::correlated(16, 2, 0.5)).unwrap();
        assert!(sample_correlation(&model, 0, 1, 100_000) < 0.015);
        let tight = ChannelModel::new(geom, RisLayout::correlated(16, 2, 0.125)).unwrap();
        let expected = sinc(0.25);
        assert!((sample_correlation(&tight, 0, 1, 100_000) - expected).abs() < 0.02);
    }

    #[test]
    fn wide_spacing_recovers_independence() {
        let geom = LinkGeometry::reference();
        let model = ChannelModel::new(geom, RisLayout::correlated(16, 2, 200.0)).unwrap();
        for &(a, b) in &[(0, 1), (0, 4), (0, 5), (3, 12)] {
            assert!(sample_correlation(&model, a, b, 100_000) < 0.01);
        }
    }
}
