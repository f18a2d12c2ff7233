//! Heat equation with distributed control on a periodic interval, in a real
//! Fourier basis.
//!
//! Basis function `r` is the constant for `r = 0`, `cos(2 pi j x / L)` for
//! `r = 2j - 1` and `sin(2 pi j x / L)` for `r = 2j`. The Laplacian is then
//! diagonal, so with `dy/dt + A y = u`, `A = diag((2 pi j / L)^2)`, `B = I`,
//! `M = 0`, `N = I` and `J0 = lambda I` every kernel block has a closed form
//! per mode.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::evolution::{closed_loop_generator, propagate_auto};
use crate::grid::TimeGrid;
use crate::kernel::{build_kernel_table, KernelTable};
use crate::linalg::Mat;
use crate::problem::ProblemData;
use crate::riccati::solve_riccati;

#[derive(Debug, Clone)]
pub struct SpectralHeatModel {
    pub modes: usize,
    pub domain_length: f64,
    pub lambda: f64,
    pub grid: Arc<TimeGrid>,
}

impl SpectralHeatModel {
    pub fn new(modes: usize, domain_length: f64, lambda: f64, grid: Arc<TimeGrid>) -> Result<Self> {
        if modes == 0 || modes.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "mode count must be odd and positive, got {modes}"
            )));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            modes,
            domain_length,
            lambda,
            grid,
        })
    }

    /// Frequency `j >= 0` of basis function `r`.
    pub fn frequency(&self, r: usize) -> usize {
        r.div_ceil(2)
    }

    /// Decay rate `(2 pi j / L)^2` of frequency `j`.
    pub fn rate(&self, frequency: usize) -> f64 {
        (2.0 * PI * frequency as f64 / self.domain_length).powi(2)
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.modes).map(|r| self.rate(self.frequency(r))).collect()
    }
}

pub fn discretize_heat(model: &SpectralHeatModel) -> Result<ProblemData> {
    let n = model.modes;
    let a = Mat::from_diagonal(&DVector::from_vec(model.rates()));
    ProblemData::constant(
        model.grid.clone(),
        a,
        Mat::identity(n, n),
        Mat::zeros(n, n),
        Mat::identity(n, n),
        Mat::identity(n, n) * model.lambda,
        1.0,
    )
}

/// Problem data and kernel table of the model. The closed loop equals the
/// diagonal heat generator, so the table is integrated in closed form.
pub fn heat_kernel_table(model: &SpectralHeatModel) -> Result<(ProblemData, KernelTable)> {
    let p = discretize_heat(model)?;
    let ric = solve_riccati(&p)?;
    let fam = propagate_auto(&closed_loop_generator(&p, &ric)?)?;
    let kt = build_kernel_table(&p, &ric, Arc::new(fam))?;
    Ok((p, kt))
}

/// Gaussian heat kernel `(4 pi tau)^(-d/2) exp(-|x - y|^2 / (4 tau))` on
/// `R^d`, `d = x.len()`.
pub fn analytic_heat_kernel(tau: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("heat kernel needs tau > 0, got {tau}")));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "points have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((4.0 * PI * tau).powf(-(x.len() as f64) / 2.0) * (-dist2 / (4.0 * tau)).exp())
}

/// Closed-form `(K0, K1)` of the mode with the given frequency at times `s`,
/// `t`:
/// `K0 = exp(-a (s + t)) / lambda`,
/// `K1 = (exp(-a |t - s|) - exp(-a (t + s))) / (2 a)` (`min(s, t)` for
/// `a = 0`), times measured from the grid start.
pub fn mode_kernel_analytic(model: &SpectralHeatModel, frequency: usize, s: f64, t: f64) -> (f64, f64) {
    let a = model.rate(frequency);
    let t0 = model.grid.t0();
    let (lo, hi) = {
        let (s, t) = (s - t0, t - t0);
        (s.min(t), s.max(t))
    };
    let k0 = (-a * (lo + hi)).exp() / model.lambda;
    let k1 = if a == 0.0 {
        lo
    } else {
        (-a * (hi - lo)).exp() * -(-2.0 * a * lo).exp_m1() / (2.0 * a)
    };
    (k0, k1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeIdentity {
    pub frequency: usize,
    pub rate: f64,
    /// `int_0^{2s} exp(-a tau) d tau = (1 - exp(-2 s a)) / a`.
    pub printed_left: f64,
    /// `exp(-s^2 a)`.
    pub printed_right: f64,
    pub printed_holds: bool,
    pub k1_closed_form: f64,
    /// `1/2 int_{t-s}^{t+s} exp(-a sigma) d sigma` by composite Simpson.
    pub k1_change_of_variables: f64,
    pub change_of_variables_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct K1IdentityReport {
    pub s: f64,
    pub t: f64,
    pub modes: Vec<ModeIdentity>,
    pub max_change_of_variables_error: f64,
    /// Frequencies for which `int_0^{2s} k = k(s^2)` fails.
    pub printed_failures: Vec<usize>,
}

/// Compares, per frequency, the two sides of the identity
/// `int_0^{2s} k(tau, x, y) d tau = k(s^2, x, y)` and checks that
/// `K1(s, t) = 1/2 int_{t-s}^{t+s} exp(-a sigma) d sigma` for `s <= t`.
/// Times are measured from the grid start.
pub fn check_k1_identity(model: &SpectralHeatModel, s: f64, t: f64) -> Result<K1IdentityReport> {
    let t0 = model.grid.t0();
    let (ls, lt) = (s - t0, t - t0);
    if !(ls >= 0.0 && lt >= ls) {
        return Err(Error::InvalidArgument(format!(
            "identity check needs t0 <= s <= t, got s = {s}, t = {t}"
        )));
    }
    let frequencies = (model.modes - 1) / 2;
    let modes: Vec<ModeIdentity> = (0..=frequencies)
        .map(|j| {
            let a = model.rate(j);
            let printed_left = if a == 0.0 { 2.0 * ls } else { -(-2.0 * ls * a).exp_m1() / a };
            let printed_right = (-ls * ls * a).exp();
            let (_, k1) = mode_kernel_analytic(model, j, s, t);
            let panels = (2000.0f64).max(40.0 * a * 2.0 * ls).ceil() as usize;
            let cov = 0.5 * simpson(|x| (-a * x).exp(), lt - ls, lt + ls, panels);
            ModeIdentity {
                frequency: j,
                rate: a,
                printed_left,
                printed_right,
                printed_holds: (printed_left - printed_right).abs() <= 1e-6,
                k1_closed_form: k1,
                k1_change_of_variables: cov,
                change_of_variables_error: (cov - k1).abs(),
            }
        })
        .collect();
    Ok(K1IdentityReport {
        s,
        t,
        max_change_of_variables_error: modes.iter().map(|m| m.change_of_variables_error).fold(0.0, f64::max),
        printed_failures: modes.iter().filter(|m| !m.printed_holds).map(|m| m.frequency).collect(),
        modes,
    })
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Largest deviations of a tabulated heat kernel from the per-mode closed
/// forms, over all node pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatComparison {
    pub k0_error: f64,
    pub k1_error: f64,
    /// Largest off-diagonal entry; modes decouple exactly.
    pub coupling: f64,
}

pub fn compare_with_analytic(model: &SpectralHeatModel, kt: &KernelTable) -> HeatComparison {
    let nodes = model.grid.nodes();
    let mut out = HeatComparison {
        k0_error: 0.0,
        k1_error: 0.0,
        coupling: 0.0,
    };
    for i in 0..nodes.len() {
        for j in 0..=i {
            let (k0, k1) = (kt.k0(i, j), kt.k1(i, j));
            for r in 0..model.modes {
                let (e0, e1) = mode_kernel_analytic(model, model.frequency(r), nodes[i], nodes[j]);
                out.k0_error = out.k0_error.max((k0[(r, r)] - e0).abs());
                out.k1_error = out.k1_error.max((k1[(r, r)] - e1).abs());
                for c in 0..model.modes {
                    if c != r {
                        out.coupling = out.coupling.max(k0[(r, c)].abs()).max(k1[(r, c)].abs());
                    }
                }
            }
        }
    }
    out
}

/// Largest defect of the semigroup law
/// `int k(tau1, x, xi) k(tau2, xi, 0) d xi = k(tau1 + tau2, x, 0)` in one
/// dimension, for `x` in `probes`, with the convolution integrated by the
/// trapezoidal rule on `[-half_width, half_width]` with `points` nodes.
pub fn heat_semigroup_defect(tau1: f64, tau2: f64, probes: &[f64], half_width: f64, points: usize) -> Result<f64> {
    if points < 3 || !(half_width > 0.0) {
        return Err(Error::InvalidArgument("quadrature needs at least 3 points and a positive width".into()));
    }
    let h = 2.0 * half_width / (points - 1) as f64;
    let mut worst: f64 = 0.0;
    for &x in probes {
        let mut acc = 0.0;
        for i in 0..points {
            let xi = -half_width + i as f64 * h;
            let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            acc += w * analytic_heat_kernel(tau1, &[x], &[xi])? * analytic_heat_kernel(tau2, &[xi], &[0.0])?;
        }
        let exact = analytic_heat_kernel(tau1 + tau2, &[x], &[0.0])?;
        worst = worst.max((acc * h - exact).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate_problem, Tolerances};

    fn model(modes: usize, lambda: f64) -> SpectralHeatModel {
        let g = Arc::new(TimeGrid::uniform(0.0, 1.0, 200).unwrap());
        SpectralHeatModel::new(modes, 2.0 * PI, lambda, g).unwrap()
    }

    #[test]
    fn rates_and_validation() {
        let m = model(3, 1.0);
        assert_eq!(m.rates(), vec![0.0, 1.0, 1.0]);
        let p = discretize_heat(&m).unwrap();
        assert!(validate_problem(&p, &Tolerances::default()).unwrap().passed());
        assert!(SpectralHeatModel::new(4, 1.0, 1.0, m.grid.clone()).is_err());
        assert!(SpectralHeatModel::new(0, 1.0, 1.0, m.grid.clone()).is_err());
    }

    #[test]
    fn single_mode_is_scalar_kernel() {
        let m = model(1, 2.0);
        let (_, kt) = heat_kernel_table(&m).unwrap();
        let nodes = m.grid.nodes();
        for (i, j) in [(0, 0), (40, 140), (200, 200), (150, 10)] {
            let exact = 0.5 + nodes[i].min(nodes[j]);
            assert!((kt.k(i, j)[(0, 0)] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_forms() {
        let m = model(3, 1.0);
        assert_eq!(mode_kernel_analytic(&m, 0, 0.3, 0.7), (1.0, 0.3));
        let (_, k1) = mode_kernel_analytic(&m, 1, 1.0, 1.0);
        assert!((k1 - 0.4323324).abs() < 1e-7);
        assert!((k1 - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
        assert_eq!(mode_kernel_analytic(&m, 1, 0.0, 0.8).1, 0.0);
    }

    #[test]
    fn table_matches_closed_forms() {
        let m = model(5, 1.5);
        let (_, kt) = heat_kernel_table(&m).unwrap();
        assert!(kt.exact_quadrature());
        let cmp = compare_with_analytic(&m, &kt);
        assert!(cmp.k1_error <= 1e-6, "{cmp:?}");
        assert!(cmp.k0_error <= 1e-8, "{cmp:?}");
        assert_eq!(cmp.coupling, 0.0);
    }

    #[test]
    fn gaussian_kernel() {
        assert!((analytic_heat_kernel(1.0, &[0.0], &[0.0]).unwrap() - 0.2820948).abs() < 1e-7);
        let tau = 0.37;
        assert_eq!(
            analytic_heat_kernel(tau, &[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            (4.0 * PI * tau).powf(-1.0)
        );
        assert_eq!(
            analytic_heat_kernel(0.5, &[0.2], &[-1.1]).unwrap(),
            analytic_heat_kernel(0.5, &[-1.1], &[0.2]).unwrap()
        );
        assert!(analytic_heat_kernel(0.0, &[0.0], &[0.0]).is_err());
        assert!(heat_semigroup_defect(0.3, 0.5, &[0.0, 0.7, -1.5], 12.0, 4001).unwrap() < 1e-4);
    }

    #[test]
    fn identity_report() {
        let m = model(3, 1.0);
        let r = check_k1_identity(&m, 0.3, 0.9).unwrap();
        assert_eq!(r.modes[0].printed_left, 0.6);
        assert_eq!(r.modes[0].printed_right, 1.0);
        assert!(r.printed_failures.contains(&0));
        assert!(r.max_change_of_variables_error < 1e-6);
        let r = check_k1_identity(&m, 0.5, 1.0).unwrap();
        assert!(r.modes[0].printed_holds);
        // (e^{-1/2} - e^{-3/2}) / 2
        assert!((r.modes[1].k1_change_of_variables - 0.1917002).abs() < 1e-7);
        let r = check_k1_identity(&m, 0.0, 0.6).unwrap();
        assert!(r.modes.iter().all(|m| m.k1_closed_form == 0.0 && m.k1_change_of_variables == 0.0));
        assert!(check_k1_identity(&m, 0.8, 0.6).is_err());
    }
}
