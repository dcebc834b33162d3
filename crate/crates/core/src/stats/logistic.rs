//! Two-parameter logistic regression by iteratively reweighted least
//! squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{stable_sum, Scalar};

pub const MAX_ITERATIONS: usize = 100;
pub const LOG_LIKELIHOOD_TOL: f64 = 1e-8;
/// Coefficient magnitude reported for separated data.
pub const COEFFICIENT_CAP: f64 = 1e6;
/// Fewest observations accepted by [`fit_logistic`].
pub const MIN_RECORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit<F> {
    pub beta0: F,
    pub beta1: F,
    /// Load at which the fitted accuracy is one half: `-beta0 / beta1`.
    pub c50: Option<F>,
    /// Squared correlation between fitted probability and outcome.
    pub r2: F,
    pub mcfadden_r2: F,
    pub log_likelihood: F,
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    /// The classes are (quasi-)separated by `x`, so the likelihood has no
    /// finite maximum.
    pub separation: bool,
}

pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

impl<F: Scalar> LogisticFit<F> {
    pub fn predict(&self, x: F) -> F {
        sigmoid(self.beta0 + self.beta1 * x)
    }
}

/// `log(sigmoid(z))` and `log(1 - sigmoid(z))` without overflow.
fn log_probs<F: Scalar>(z: F) -> (F, F) {
    // log(1 + e^{-|z|}) + max(0, ∓z)
    let soft = (F::one() + (-z.abs()).exp()).ln();
    let lp = -(soft + (-z).max(F::zero()));
    let lq = -(soft + z.max(F::zero()));
    (lp, lq)
}

fn log_likelihood<F: Scalar>(b0: F, b1: F, x: &[F], y: &[bool]) -> F {
    stable_sum(x.iter().zip(y).map(|(&xi, &yi)| {
        let (lp, lq) = log_probs(b0 + b1 * xi);
        if yi {
            lp
        } else {
            lq
        }
    }))
}

/// Whether some threshold on `x` splits the classes (ties allowed).
pub fn is_separated<F: Scalar>(x: &[F], y: &[bool]) -> bool {
    let range = |want: bool| {
        x.iter().zip(y).filter(|(_, &yi)| yi == want).fold(None, |acc: Option<(F, F)>, (&xi, _)| match acc {
            None => Some((xi, xi)),
            Some((lo, hi)) => Some((lo.min(xi), hi.max(xi))),
        })
    };
    match (range(true), range(false)) {
        (Some((plo, phi)), Some((nlo, nhi))) => phi <= nlo || nhi <= plo,
        _ => true,
    }
}

/// Maximum-likelihood fit of `P(y) = sigmoid(beta0 + beta1 * x)`.
pub fn fit_logistic<F: Scalar>(x: &[F], y: &[bool]) -> Result<LogisticFit<F>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} loads but {} outcomes", x.len(), y.len())));
    }
    let n = x.len();
    if n < MIN_RECORDS {
        return Err(Error::invalid(format!("logistic fit needs at least {MIN_RECORDS} records, got {n}")));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite load {bad}")));
    }
    let separation = is_separated(x, y);
    let positives = y.iter().filter(|&&v| v).count();
    let cap = F::of(COEFFICIENT_CAP);

    if positives == 0 || positives == n {
        // single class: intercept pinned to the cap, no slope
        let beta0 = if positives == n { cap } else { -cap };
        return Ok(finish(beta0, F::zero(), x, y, 0, false, true));
    }

    // centre and scale x for conditioning; coefficients are mapped back
    let nf = F::of_usize(n);
    let mx = stable_sum(x.iter().copied()) / nf;
    let sx = (stable_sum(x.iter().map(|&v| (v - mx) * (v - mx))) / nf).sqrt();
    let sx = if sx > F::zero() { sx } else { F::one() };
    let xs: Vec<F> = x.iter().map(|&v| (v - mx) / sx).collect();

    let pbar = F::of_usize(positives) / nf;
    let mut b0 = (pbar / (F::one() - pbar)).ln();
    let mut b1 = F::zero();
    let mut ll = log_likelihood(b0, b1, &xs, y);
    let tol = F::of(LOG_LIKELIHOOD_TOL).max(F::epsilon() * ll.abs() * F::of(16.0));
    let mut converged = false;
    let mut iterations = 0;
    let floor = F::of(1e-12);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (mut s_w, mut s_wx, mut s_wxx, mut s_wz, mut s_wxz) = (
            crate::scalar::CompensatedSum::new(),
            crate::scalar::CompensatedSum::new(),
            crate::scalar::CompensatedSum::new(),
            crate::scalar::CompensatedSum::new(),
            crate::scalar::CompensatedSum::new(),
        );
        for (&xi, &yi) in xs.iter().zip(y) {
            let eta = b0 + b1 * xi;
            let p = sigmoid(eta);
            let w = (p * (F::one() - p)).max(floor);
            let yv = if yi { F::one() } else { F::zero() };
            let z = eta + (yv - p) / w;
            s_w.add(w);
            s_wx.add(w * xi);
            s_wxx.add(w * xi * xi);
            s_wz.add(w * z);
            s_wxz.add(w * xi * z);
        }
        let (a, b, d) = (s_w.value(), s_wx.value(), s_wxx.value());
        let det = a * d - b * b;
        if det.abs() <= F::epsilon() * a * d {
            break;
        }
        let nb0 = (d * s_wz.value() - b * s_wxz.value()) / det;
        let nb1 = (a * s_wxz.value() - b * s_wz.value()) / det;
        // step halving keeps the likelihood monotone
        let (mut c0, mut c1) = (nb0, nb1);
        let mut nll = log_likelihood(c0, c1, &xs, y);
        let mut halvings = 0;
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        while !(nll >= ll - tol) && halvings < 30 {
            c0 = (c0 + b0) / F::of(2.0);
            c1 = (c1 + b1) / F::of(2.0);
            nll = log_likelihood(c0, c1, &xs, y);
            halvings += 1;
        }
        let change = (nll - ll).abs();
        b0 = c0;
        b1 = c1;
        ll = nll;
        if change < tol {
            converged = true;
            break;
        }
        if b0.abs() > cap || b1.abs() > cap {
            break;
        }
    }
    let mut beta1 = b1 / sx;
    let mut beta0 = b0 - beta1 * mx;
    if separation {
        converged = false;
        beta0 = beta0.max(-cap).min(cap);
        beta1 = beta1.max(-cap).min(cap);
    }
    Ok(finish(beta0, beta1, x, y, iterations, converged, separation))
}

fn finish<F: Scalar>(
    beta0: F,
    beta1: F,
    x: &[F],
    y: &[bool],
    iterations: usize,
    converged: bool,
    separation: bool,
) -> LogisticFit<F> {
    let c50 = (beta1 != F::zero()).then(|| -beta0 / beta1);
    let mut fit = LogisticFit {
        beta0,
        beta1,
        c50,
        r2: F::zero(),
        mcfadden_r2: F::zero(),
        log_likelihood: log_likelihood(beta0, beta1, x, y),
        n: x.len(),
        iterations,
        converged,
        separation,
    };
    let (r2, mcf) = r_squared(&fit, x, y);
    fit.r2 = r2;
    fit.mcfadden_r2 = mcf;
    fit
}

/// `(pearson², mcfadden)` for a fit on `(x, y)`. Zero when either the
/// predictions or the outcomes have no variance.
pub fn r_squared<F: Scalar>(fit: &LogisticFit<F>, x: &[F], y: &[bool]) -> (F, F) {
    let n = x.len();
    if n == 0 {
        return (F::zero(), F::zero());
    }
    let nf = F::of_usize(n);
    let p: Vec<F> = x.iter().map(|&v| fit.predict(v)).collect();
    let yv: Vec<F> = y.iter().map(|&b| if b { F::one() } else { F::zero() }).collect();
    let mp = stable_sum(p.iter().copied()) / nf;
    let my = stable_sum(yv.iter().copied()) / nf;
    let cov = stable_sum(p.iter().zip(&yv).map(|(&a, &b)| (a - mp) * (b - my)));
    let vp = stable_sum(p.iter().map(|&a| (a - mp) * (a - mp)));
    let vy = stable_sum(yv.iter().map(|&b| (b - my) * (b - my)));
    let tiny = F::epsilon() * nf;
    let pearson =
        if vp <= tiny * F::epsilon() || vy <= F::zero() { F::zero() } else { (cov * cov / (vp * vy)).min(F::one()) };
    let mcfadden = if my <= F::zero() || my >= F::one() {
        F::zero()
    } else {
        let ll0 = nf * (my * my.ln() + (F::one() - my) * (F::one() - my).ln());
        let ll = log_likelihood(fit.beta0, fit.beta1, x, y);
        (F::one() - ll / ll0).max(F::zero()).min(F::one())
    };
    (pearson, mcfadden)
}
