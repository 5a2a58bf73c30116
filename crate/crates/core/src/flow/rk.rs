//! Embedded Runge–Kutta 5(4) scalar integrator with adaptive steps.
//!
//! Dormand–Prince coefficients with the first-same-as-last evaluation
//! reused across accepted steps. The driver monitors an admissibility
//! predicate after every accepted step, so the caller learns where an
//! orbit left its domain instead of watching the right-hand side go
//! undefined.

/// Why an integration stopped short of the far end of its span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepFail {
    /// step size collapsed (or the step budget ran out) near `theta`
    Stalled { theta: f64 },
    /// an accepted step produced an inadmissible value at `theta`
    Inadmissible { theta: f64, value: f64 },
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19_372.0 / 6_561.0;
const A52: f64 = -25_360.0 / 2_187.0;
const A53: f64 = 64_448.0 / 6_561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9_017.0 / 3_168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46_732.0 / 5_247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5_103.0 / 18_656.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// fifth-order weights (also the sixth stage row of the tableau)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1_113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2_187.0 / 6_784.0;
const B6: f64 = 11.0 / 84.0;

/// fifth-minus-fourth error weights
const E1: f64 = B1 - 5_179.0 / 57_600.0;
const E3: f64 = B3 - 7_571.0 / 16_695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92_097.0 / 339_200.0;
const E6: f64 = B6 - 187.0 / 2_100.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dw/dtheta = f(theta, w)` from `span.0` to `span.1`,
/// keeping the local error within `atol + rtol * |w|` per step and
/// checking `admissible(w)` after every accepted step.
pub(crate) fn integrate<F, G>(
    f: &F,
    admissible: &G,
    span: (f64, f64),
    w0: f64,
    rtol: f64,
    atol: f64,
    max_steps: usize,
) -> Result<f64, StepFail>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64) -> bool,
{
    let (t0, t1) = span;
    let length = t1 - t0;
    if length <= f64::EPSILON {
        return Ok(w0);
    }
    let mut t = t0;
    let mut w = w0;
    let mut h = length / 64.0;
    let h_floor = length * 1e-14;
    let mut k1 = f(t, w);
    for _ in 0..max_steps {
        if t >= t1 {
            return Ok(w);
        }
        h = h.min(t1 - t);
        let k2 = f(t + C2 * h, w + h * (A21 * k1));
        let k3 = f(t + C3 * h, w + h * (A31 * k1 + A32 * k2));
        let k4 = f(t + C4 * h, w + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(t + C5 * h, w + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(t + h, w + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let w_next = w + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(t + h, w_next);
        let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = atol + rtol * w.abs().max(w_next.abs());
        let ratio = (err / scale).abs();

        if !ratio.is_finite() {
            // right-hand side went undefined inside the step; retreat
            h *= 0.25;
            if h < h_floor {
                return Err(StepFail::Stalled { theta: t });
            }
            continue;
        }
        if ratio <= 1.0 {
            t += h;
            w = w_next;
            if !admissible(w) {
                return Err(StepFail::Inadmissible { theta: t, value: w });
            }
            k1 = k7;
            let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            h *= (0.9 * ratio.powf(-0.2)).clamp(0.2, 1.0);
            if h < h_floor {
                return Err(StepFail::Stalled { theta: t });
            }
        }
    }
    if t >= t1 {
        Ok(w)
    } else {
        Err(StepFail::Stalled { theta: t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::TWO_PI;

    const RTOL: f64 = 1e-12;
    const ATOL: f64 = 1e-14;

    fn always(_: f64) -> bool {
        true
    }

    #[test]
    fn sine_returns_to_start() {
        let f = |t: f64, _: f64| t.cos();
        let end = integrate(&f, &always, (0.0, TWO_PI), 0.0, RTOL, ATOL, 100_000).unwrap();
        assert!(end.abs() < 1e-12, "end {end:+e}");
    }

    #[test]
    fn exponential_growth_matches() {
        let f = |_: f64, w: f64| w;
        let end = integrate(&f, &always, (0.0, 1.0), 1.0, RTOL, ATOL, 100_000).unwrap();
        assert!((end - std::f64::consts::E).abs() < 1e-12, "end {end}");
    }

    #[test]
    fn inadmissible_orbit_reports_where() {
        // w' = w^2 from w(0)=1 blows up at t=1; the bound trips just before
        let f = |_: f64, w: f64| w * w;
        let bounded = |w: f64| w < 1e6;
        match integrate(&f, &bounded, (0.0, 2.0), 1.0, RTOL, ATOL, 200_000) {
            Err(StepFail::Inadmissible { theta, value }) => {
                assert!((theta - 1.0).abs() < 1e-3, "theta {theta}");
                assert!(value >= 1e6);
            }
            other => panic!("expected inadmissible stop, got {other:?}"),
        }
    }

    #[test]
    fn undefined_region_stalls() {
        let f = |t: f64, _: f64| if t <= 0.5 { 1.0 } else { f64::NAN };
        match integrate(&f, &always, (0.0, 1.0), 0.0, RTOL, ATOL, 100_000) {
            Err(StepFail::Stalled { theta }) => assert!(theta <= 0.5 + 1e-6),
            other => panic!("expected stall, got {other:?}"),
        }
    }

    #[test]
    fn empty_span_is_identity() {
        let f = |_: f64, _: f64| 1.0;
        let end = integrate(&f, &always, (1.0, 1.0), 3.5, RTOL, ATOL, 10).unwrap();
        assert_eq!(end, 3.5);
    }
}
