use std::f64::consts::PI;

use lora_dts_core::channel::apply_doppler;
use lora_dts_core::estimators::apply_plan;
use lora_dts_core::modem::symbol_envelope;
use lora_dts_core::{
    BasebandSignal, ChirpKind, CompensationPlan, Complex64, DopplerProfile, Modem, ModemConfig,
};
use proptest::prelude::*;

/// Chirp built from the integrated frequency law in plain floating point.
fn reference_chirp(cfg: &ModemConfig, s: u32) -> Vec<Complex64> {
    let b = cfg.bandwidth_hz();
    let tc = cfg.chirp_duration_s();
    let f_start = -b / 2.0 + cfg.bin_width_hz() * s as f64;
    let t_wrap = (b / 2.0 - f_start) / (b / tc);
    let fs = cfg.sample_rate_hz();
    (0..cfg.chirp_samples())
        .map(|k| {
            let t = k as f64 / fs;
            let mut cycles = f_start * t + b / (2.0 * tc) * t * t;
            if t >= t_wrap {
                cycles -= b * (t - t_wrap);
            }
            Complex64::from_polar(1.0, 2.0 * PI * cycles)
        })
        .collect()
}

#[test]
fn synthesis_matches_frequency_law() {
    for (sf, ldro, osf) in [(7, false, 1), (7, true, 2), (9, false, 4), (12, true, 1)] {
        let cfg = ModemConfig::with_oversampling(sf, 125e3, ldro, osf).unwrap();
        let step = (cfg.alphabet_size() / 7).max(1);
        for s in (0..cfg.alphabet_size()).step_by(step as usize) {
            let got = symbol_envelope(&cfg, s).unwrap().samples;
            let want = reference_chirp(&cfg, s);
            // Equal up to one common phase.
            let rot = got[0] * want[0].conj();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w * rot).norm() < 1e-6, "sf {sf} ldro {ldro} osf {osf} s {s}");
            }
        }
    }
}

#[test]
fn loopback_every_symbol_every_mode() {
    for sf in 7..=12 {
        for ldro in [false, true] {
            let cfg = ModemConfig::new(sf, 125e3, ldro).unwrap();
            let modem = Modem::new(cfg);
            let mut chirp = vec![Complex64::new(0.0, 0.0); cfg.chirp_samples()];
            for s in 0..cfg.alphabet_size() {
                modem.write_symbol(s, &mut chirp).unwrap();
                assert_eq!(modem.demod_chirp(&chirp, ChirpKind::Up).unwrap().symbol, s);
            }
        }
    }
}

#[test]
fn unit_magnitude_samples() {
    let cfg = ModemConfig::with_oversampling(10, 250e3, true, 2).unwrap();
    for s in [0, 1, 100, cfg.alphabet_size() - 1] {
        let e = symbol_envelope(&cfg, s).unwrap();
        let energy: f64 = e.samples.iter().map(|x| x.norm_sqr()).sum();
        assert!((energy - cfg.chirp_samples() as f64).abs() < 1e-9);
    }
}

#[test]
fn ldro_peaks_four_bins_apart() {
    let off = ModemConfig::new(9, 125e3, false).unwrap();
    let on = ModemConfig::new(9, 125e3, true).unwrap();
    let m = Modem::new(on);
    assert_eq!(on.bin_width_hz(), 4.0 * off.bin_width_hz());
    let mut prev = None;
    for s in 0..on.alphabet_size() {
        let d = m.demod_chirp(&m.symbol_chirp(s).unwrap(), ChirpKind::Up).unwrap();
        assert_eq!(d.peak.bin as u32, 4 * s);
        if let Some(p) = prev {
            assert_eq!(d.peak.bin - p, 4);
        }
        prev = Some(d.peak.bin);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tone_shifts_decision(sf in 7u8..=10, ldro: bool, s in 0u32..4096, j in -60i64..60) {
        let cfg = ModemConfig::new(sf, 125e3, ldro).unwrap();
        let m = cfg.alphabet_size() as i64;
        let s = s % cfg.alphabet_size();
        let j = j % (m / 4).max(1);
        let sig = symbol_envelope(&cfg, s).unwrap();
        let tone = DopplerProfile::Static { f0_hz: j as f64 * cfg.bin_width_hz() };
        let rx = apply_doppler(&sig, &tone).unwrap();
        let d = Modem::new(cfg).demod_chirp(&rx.samples, ChirpKind::Up).unwrap();
        prop_assert_eq!(d.symbol as i64, (s as i64 + j).rem_euclid(m));
    }

    #[test]
    fn static_plan_undoes_static_channel(f0 in -20e3f64..20e3, n in 1usize..3000) {
        let fs = 125e3;
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 0.37 * k as f64)).collect();
        let sig = BasebandSignal::new(x.clone(), fs, 0.0);
        let rx = apply_doppler(&sig, &DopplerProfile::Static { f0_hz: f0 }).unwrap();
        let mut plan = CompensationPlan::empty(fs);
        plan.push(n, f0, 0.0);
        let back = apply_plan(&rx, &plan).unwrap();
        for (a, b) in back.samples.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn opposite_plans_cancel(f0 in -5e3f64..5e3, slope in -3e3f64..3e3, cut in 1usize..999) {
        let fs = 125e3;
        let n = 1000;
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(1.0 + k as f64 * 1e-3, -0.5)).collect();
        let sig = BasebandSignal::new(x.clone(), fs, 0.0);
        let mut a = CompensationPlan::empty(fs);
        a.push(cut, f0, slope);
        a.push(n, -f0, slope);
        let mut b = CompensationPlan::empty(fs);
        b.push(cut, -f0, -slope);
        b.push(n, f0, -slope);
        let out = apply_plan(&apply_plan(&sig, &a).unwrap(), &b).unwrap();
        for (p, q) in out.samples.iter().zip(&x) {
            prop_assert!((p - q).norm() < 1e-9 * q.norm().max(1.0));
        }
    }
}
