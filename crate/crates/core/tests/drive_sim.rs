use arraymp::experiment::{run_drive_sim, CanyonChoice, EpochMode, RunConfig};

fn quiet_flat_street() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.drive.duration_s = 10.0;
    cfg.drive.canyon = CanyonChoice::Custom;
    cfg.drive.half_width_m = 10.0;
    cfg.drive.rayleigh_scale_m = 0.0;
    cfg.noise.sigma_pseudorange_m = 0.0;
    cfg.noise.sigma_phase_mm = 0.0;
    cfg.drive.gyro_noise = 0.0;
    cfg.drive.accel_noise = 0.0;
    cfg
}

#[test]
fn flat_street_without_noise_detects_nothing() {
    let report = run_drive_sim(&quiet_flat_street()).unwrap();
    assert_eq!(report.epochs.len(), 101);
    for e in &report.epochs {
        assert_eq!(e.n_contaminated, 0);
        assert_eq!(e.n_flagged, Some(0));
        let (p, a) = (e.proposed.unwrap(), e.gnss_imu_all.unwrap());
        assert!((p - a).norm() < 1e-3, "t = {}: {} m apart", e.t, (p - a).norm());
    }
    assert_eq!(report.summary.success_rate, 1.0);
    assert_eq!(report.summary.propagation_only_epochs, 0);
}

#[test]
fn urban_street_favours_the_proposed_filter() {
    let mut cfg = RunConfig::default();
    cfg.drive.duration_s = 20.0;
    let s = run_drive_sim(&cfg).unwrap().summary;
    assert_eq!(s.epochs, 201);
    assert!(s.position_mse_proposed < s.position_mse_gnss_all, "{s:?}");
    assert!((0.0..=1.0).contains(&s.success_rate));
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let mut cfg = RunConfig::default();
    cfg.drive.duration_s = 5.0;
    let a = run_drive_sim(&cfg).unwrap();
    let b = run_drive_sim(&cfg).unwrap();
    assert_eq!(a.summary, b.summary);
    cfg.seed += 1;
    let c = run_drive_sim(&cfg).unwrap();
    assert_ne!(a.summary, c.summary);
}

#[test]
fn starved_epochs_only_propagate() {
    let mut cfg = RunConfig::default();
    cfg.drive.duration_s = 10.0;
    cfg.drive.degrade_epochs = vec![40, 41, 42];
    let report = run_drive_sim(&cfg).unwrap();
    for k in [40, 41, 42] {
        let e = &report.epochs[k];
        assert!(e.n_visible - e.n_contaminated <= 3);
        assert_eq!(e.mode, EpochMode::PropagateOnly);
        assert!(e.proposed.is_some());
    }
}
