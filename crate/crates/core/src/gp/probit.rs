//! Standard normal CDF and the quantities EP needs from it.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use super::GpError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn probit(g: f64) -> f64 {
    0.5 * erfc(-g * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn probit_inv(p: f64) -> Result<f64, GpError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GpError::ProbitDomain(p));
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step on the CDF polishes the last few bits
    let err = probit(x) - p;
    Ok(x - err / normal_pdf(x))
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// `Phi(-x) / phi(x)` for large positive `x`, by continued fraction.
fn mills_ratio(x: f64) -> f64 {
    let mut tail = 0.0;
    for k in (1..=40).rev() {
        tail = k as f64 / (x + tail);
    }
    1.0 / (x + tail)
}

/// Below this the CDF is computed through the Mills ratio.
const TAIL: f64 = -8.0;

/// `phi(z) / Phi(z)`, accurate far into the lower tail.
pub fn pdf_over_cdf(z: f64) -> f64 {
    if z < TAIL {
        1.0 / mills_ratio(-z)
    } else {
        normal_pdf(z) / probit(z)
    }
}

/// `ln Phi(z)`, accurate far into the lower tail.
pub fn log_probit(z: f64) -> f64 {
    if z < TAIL {
        -0.5 * z * z - LN_SQRT_2PI + mills_ratio(-z).ln()
    } else {
        probit(z).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        assert_eq!(probit(0.0), 0.5);
        assert_eq!(probit_inv(0.5).unwrap(), 0.0);
        assert!((probit(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((probit(-3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-17);
        assert!((probit_inv(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-13);
        assert!((probit(-1.959_963_984_540_054) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(probit_inv(p).is_err());
        }
    }

    #[test]
    fn mutual_inverses() {
        let mut p = 1e-6;
        while p < 1.0 - 1e-6 {
            let back = probit(probit_inv(p).unwrap());
            assert!((back - p).abs() <= 1e-12 * p.max(1e-3), "{p}: {back}");
            p += 1.37e-3;
        }
        for p in [1e-6, 1.0 - 1e-6, 1e-4, 0.3] {
            assert!((probit(probit_inv(p).unwrap()) - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn tails_are_continuous() {
        for z in [TAIL - 1e-9, TAIL + 1e-9] {
            let direct = normal_pdf(z) / probit(z);
            assert!((pdf_over_cdf(z) - direct).abs() < 1e-9 * direct, "{z}");
            assert!((log_probit(z) - probit(z).ln()).abs() < 1e-9);
        }
        // ratio approaches -z in the far tail
        let r = pdf_over_cdf(-40.0);
        assert!((r - 40.0).abs() < 0.03 && r > 40.0);
        assert!(log_probit(-40.0).is_finite());
        assert!(log_probit(-40.0) < -800.0);
    }
}
