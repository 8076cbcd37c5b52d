//! The learner against a simulated primary link whose power control reacts
//! to interference, with SNR-target and waterfilling policies.

use blind_null_space::bnsl::{run_bnsl, BnslConfig, Extraction};
use blind_null_space::radiosim::{ChannelSet, MeasurementConfig, PowerControlModel, RadioOracle};

fn main() {
    let (n_r, n_t) = (2, 4);
    let ch = ChannelSet::random(n_r, n_t, 42).unwrap();
    let g = ch.gram();
    let config = BnslConfig {
        extraction: Extraction::KnownRank(n_r),
        ..BnslConfig::with_eta(1e-4)
    };
    let cases = [
        ("snr target", PowerControlModel::default(), false),
        ("waterfilling", PowerControlModel::waterfilling(), false),
        ("snr target + noise", PowerControlModel::default(), true),
    ];
    for (name, model, noisy) in cases {
        let measurement = MeasurementConfig {
            noise_enabled: noisy,
            noise_std: 1e-6,
            ..MeasurementConfig::default()
        };
        let mut oracle = RadioOracle::new(ch.clone(), model, measurement).unwrap();
        let (slope, intercept) = oracle.measurement_law();
        let report = run_bnsl(&mut oracle, &config).unwrap();
        let warnings = report.trace.phases.iter().filter(|p| p.warning).count();
        println!(
            "{name:<20} q = {slope:+.3}·I {intercept:+.3}  cycles {:>6}  interference {:.3e}  saturated phases {warnings}",
            report.total_cycles,
            report.interference(&g).unwrap()
        );
    }
}
