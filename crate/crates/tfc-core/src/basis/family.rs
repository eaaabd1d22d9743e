//! Univariate orthogonal polynomial and Fourier families.

use super::elm::Activation;

/// Kind of univariate family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Chebyshev,
    Legendre,
    Laguerre,
    HermiteProb,
    HermitePhys,
    Fourier,
    Elm(Activation),
}

impl FamilyKind {
    /// Interval on which the family is normally used, when it is finite.
    /// Laguerre and Hermite live on unbounded intervals and need a caller window.
    pub fn native_domain(self) -> Option<(f64, f64)> {
        match self {
            FamilyKind::Chebyshev | FamilyKind::Legendre => Some((-1.0, 1.0)),
            FamilyKind::Fourier => Some((-std::f64::consts::PI, std::f64::consts::PI)),
            FamilyKind::Elm(_) => Some((0.0, 1.0)),
            FamilyKind::Laguerre | FamilyKind::HermiteProb | FamilyKind::HermitePhys => None,
        }
    }

    pub fn is_polynomial(self) -> bool {
        !matches!(self, FamilyKind::Fourier | FamilyKind::Elm(_))
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Chebyshev => "chebyshev",
            FamilyKind::Legendre => "legendre",
            FamilyKind::Laguerre => "laguerre",
            FamilyKind::HermiteProb => "hermite-prob",
            FamilyKind::HermitePhys => "hermite-phys",
            FamilyKind::Fourier => "fourier",
            FamilyKind::Elm(_) => "elm",
        }
    }
}

/// Writes the `d`-th z-derivative of functions `0..out.len()` of a
/// non-ELM family at `z` into `out`.
///
/// Polynomial families run the value recursion and its differentiated
/// forms for every order up to `d` side by side, so each order reuses the
/// previous one.
pub fn eval_family(kind: FamilyKind, z: f64, d: usize, out: &mut [f64]) {
    let count = out.len();
    if count == 0 {
        return;
    }
    if kind == FamilyKind::Fourier {
        for (k, o) in out.iter_mut().enumerate() {
            *o = fourier(k, z, d);
        }
        return;
    }
    assert!(kind.is_polynomial(), "eval_family called with an ELM kind");
    // rows[q][k] = q-th derivative of P_k at z
    let mut prev = vec![0.0; count];
    let mut cur = vec![0.0; count];
    for q in 0..=d {
        std::mem::swap(&mut prev, &mut cur);
        let qf = q as f64;
        let p0 = if q == 0 { 1.0 } else { 0.0 };
        cur[0] = p0;
        if count > 1 {
            // first-degree member and its derivatives
            let (v, dv) = match kind {
                FamilyKind::Chebyshev | FamilyKind::Legendre | FamilyKind::HermiteProb => (z, 1.0),
                FamilyKind::HermitePhys => (2.0 * z, 2.0),
                FamilyKind::Laguerre => (1.0 - z, -1.0),
                _ => unreachable!(),
            };
            cur[1] = match q {
                0 => v,
                1 => dv,
                _ => 0.0,
            };
        }
        for k in 1..count.saturating_sub(1) {
            let kf = k as f64;
            let lower = if q > 0 { prev[k] } else { 0.0 };
            cur[k + 1] = match kind {
                FamilyKind::Chebyshev => 2.0 * (qf * lower + z * cur[k]) - cur[k - 1],
                FamilyKind::Legendre => {
                    ((2.0 * kf + 1.0) * (qf * lower + z * cur[k]) - kf * cur[k - 1]) / (kf + 1.0)
                }
                FamilyKind::Laguerre => {
                    ((2.0 * kf + 1.0 - z) * cur[k] - qf * lower - kf * cur[k - 1]) / (kf + 1.0)
                }
                FamilyKind::HermiteProb => qf * lower + z * cur[k] - kf * cur[k - 1],
                FamilyKind::HermitePhys => {
                    2.0 * (qf * lower + z * cur[k]) - 2.0 * kf * cur[k - 1]
                }
                _ => unreachable!(),
            };
        }
    }
    out.copy_from_slice(&cur);
}

/// Fourier member `k` differentiated `d` times: 1, sin z, cos z, sin 2z, cos 2z, ...
fn fourier(k: usize, z: f64, d: usize) -> f64 {
    if k == 0 {
        return if d == 0 { 1.0 } else { 0.0 };
    }
    let freq = k.div_ceil(2) as f64;
    let arg = freq * z;
    let scale = freq.powi(d as i32);
    // Differentiating sin cycles through cos, -sin, -cos, sin; cos is one step ahead.
    let phase = if k % 2 == 1 { d % 4 } else { (d + 1) % 4 };
    scale
        * match phase {
            0 => arg.sin(),
            1 => arg.cos(),
            2 => -arg.sin(),
            _ => -arg.cos(),
        }
}
