use pefnn_core::gradcheck::{gradcheck, gradcheck_with, GradcheckConfig};
use pefnn_core::kernel::KernelMode;
use pefnn_core::training::Strategy;

#[test]
fn default_tiny_config_passes_for_every_mode_and_strategy() {
    let report = gradcheck(&GradcheckConfig::default()).unwrap();
    assert!(report.passed(), "{}", report.render());
    assert_eq!(report.entries.len(), 6);
    for mode in KernelMode::ALL {
        assert!(report.render().contains(&mode.to_string()));
        for strategy in [Strategy::Markov, Strategy::Recurrent] {
            assert!(report.entries.iter().any(|e| e.kernel == mode && e.strategy == strategy));
        }
    }
    assert!(report.entries.iter().all(|e| e.slots >= 50));
}

#[test]
fn corrupted_adjoint_fails() {
    let cfg = GradcheckConfig { slots: 20, ..GradcheckConfig::default() };
    let report = gradcheck_with(&cfg, |g| g.iter_mut().for_each(|v| *v *= 1.001)).unwrap();
    assert!(!report.passed());
    assert!(report.render().contains("FAIL"));
}

#[test]
fn rejects_empty_check() {
    assert!(gradcheck(&GradcheckConfig { slots: 0, ..GradcheckConfig::default() }).is_err());
}
