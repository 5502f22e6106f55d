#![allow(dead_code)]

/// TDEV straight from the definition: an explicit triple loop, no prefix sums.
pub fn brute_tdev(x: &[f64], m: usize) -> f64 {
    let n = x.len();
    let terms = n + 1 - 3 * m;
    let mut outer = 0.0;
    for i in 0..terms {
        let mut inner = 0.0;
        for j in i..i + m {
            inner += x[j + 2 * m] - 2.0 * x[j + m] + x[j];
        }
        outer += inner * inner;
    }
    let mf = m as f64;
    (outer / (6.0 * mf * mf * terms as f64)).sqrt()
}

/// Least-squares slope of `log10(tdev)` against `log10(tau)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(t, d)| (t.log10(), d.log10())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Reference superposition of M(t) built only from the event definitions.
pub mod reference {
    pub fn step(t: f64, t0: f64) -> f64 {
        if t >= t0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn jump(a: f64, t0: f64, t: f64) -> f64 {
        a * step(t, t0)
    }

    pub fn spike(a: f64, t0: f64, width: f64, t: f64) -> f64 {
        a * (step(t, t0) - step(t, t0 + width))
    }
}

pub mod strategies {
    use asymdelay::attack_model::{AttackEvent, Behavior, DelayTrajectory};
    use proptest::prelude::*;

    pub fn event() -> impl Strategy<Value = AttackEvent<f64>> {
        let amp = -1000.0..1000.0f64;
        let start = 0.0..5000.0f64;
        prop_oneof![
            (amp.clone(), start.clone()).prop_map(|(a, t0)| AttackEvent::jump(a, t0)),
            (amp.clone(), start.clone(), 0.01..100.0f64).prop_map(|(a, t0, w)| AttackEvent::spike(a, t0, w)),
            (amp, start, 1e-4..1.0f64, 0.0..60.0f64, proptest::option::of(0.0..3000.0f64), any::<bool>()).prop_map(
                |(a, t0, rate, step, end, rev)| {
                    let e = AttackEvent::gradual(a, t0, Behavior::Linear { rate_per_s: rate }).stepped(step);
                    match end {
                        Some(d) => e.until(t0 + d, rev),
                        None => e,
                    }
                }
            ),
        ]
    }

    pub fn trajectory() -> impl Strategy<Value = DelayTrajectory<f64>> {
        proptest::collection::vec(event(), 0..8).prop_map(DelayTrajectory::new)
    }
}
