use asymdelay::detection::{cusum_drift, score, threshold_monitor, Alarm, AlarmKind, CusumConfig, ThresholdConfig};
use proptest::prelude::*;

fn series(values: &[f64]) -> Vec<(f64, f64)> {
    values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bounded_noise_never_crosses_a_wider_threshold(
        noise in proptest::collection::vec(-50.0..50.0f64, 80..400),
        level in -1e4..1e4f64,
    ) {
        let v: Vec<f64> = noise.iter().map(|n| level + n).collect();
        let alarms = threshold_monitor(&series(&v), &ThresholdConfig::new(60, 100.0)).unwrap();
        prop_assert!(alarms.is_empty());
    }

    #[test]
    fn step_beyond_threshold_fires_on_its_first_epoch(
        noise in proptest::collection::vec(-10.0..10.0f64, 120..300),
        at in 61usize..119,
        amp in prop_oneof![-1000.0..-250.0f64, 250.0..1000.0f64],
    ) {
        let v: Vec<f64> = noise.iter().enumerate().map(|(i, n)| n + if i >= at { amp } else { 0.0 }).collect();
        let alarms = threshold_monitor(&series(&v), &ThresholdConfig::new(60, 200.0)).unwrap();
        prop_assert_eq!(alarms[0].epoch_start_s, at as f64);
        prop_assert_eq!(alarms.len(), v.len() - at);
    }

    #[test]
    fn cusum_ignores_increments_below_reference(
        incs in proptest::collection::vec(-1.0..1.0f64, 2..500),
        start in -1e4..1e4f64,
    ) {
        // each |Δδ| stays below k, so neither statistic can grow
        let mut v = vec![start];
        for d in &incs {
            let last = *v.last().unwrap();
            v.push(last + d);
        }
        let cfg = CusumConfig { reference_drift_ps: 1.0, decision_limit_ps: 1e-3 };
        prop_assert!(cusum_drift(&series(&v), &cfg).unwrap().is_empty());
    }

    #[test]
    fn cusum_sign_follows_drift(rate in 0.2..5.0f64, sign in prop_oneof![Just(-1.0), Just(1.0)]) {
        let v: Vec<f64> = (0..400).map(|i| sign * rate * i as f64).collect();
        let cfg = CusumConfig { reference_drift_ps: 0.1, decision_limit_ps: 10.0 };
        let alarms = cusum_drift(&series(&v), &cfg).unwrap();
        prop_assert!(!alarms.is_empty());
        for a in alarms {
            prop_assert_eq!(a.magnitude_ps.signum(), sign);
            prop_assert_eq!(a.kind, AlarmKind::Drift);
        }
    }

    #[test]
    fn score_counts_each_alarm_once(times in proptest::collection::vec(0.0..1000.0f64, 0..50), onset in 0.0..1000.0f64) {
        let alarms: Vec<Alarm<f64>> = times
            .iter()
            .map(|&t| Alarm { epoch_start_s: t, kind: AlarmKind::Threshold, magnitude_ps: 1.0 })
            .collect();
        let s = score(&alarms, onset, (0.0, 1000.0));
        let before = times.iter().filter(|&&t| t < onset).count();
        prop_assert_eq!(s.false_alarms, before);
        prop_assert_eq!(s.detected, before < times.len());
        if let Some(l) = s.latency_s {
            prop_assert!(l >= 0.0);
        }
    }
}
