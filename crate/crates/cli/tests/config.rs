use schmidt_cli::config::{ExperimentConfig, Initial, InitialSpec, Preset};

#[test]
fn preset_alias_and_defaults() {
    let a = ExperimentConfig::from_json(r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":1,"dt":0.01}}"#).unwrap();
    let b = ExperimentConfig::from_json(r#"{"system":{"preset":"two-qubit-reference"},"grid":{"t1":1,"dt":0.01}}"#).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.system.preset, Some(Preset::TwoQubit));
    assert_eq!(a.parameters(), Some((1.0, 5.0, 1.3)));
    assert_eq!(a.gauge.policy, "symmetric");
    assert_eq!(a.grid.t0, 0.0);
    assert_eq!(a.label(), "two-qubit-reference");
    // Canonical name on output.
    let text = serde_json::to_string(&a).unwrap();
    assert!(text.contains("\"two-qubit-reference\""));
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), a);
}

#[test]
fn reference_initial_state_energy() {
    let c = ExperimentConfig::from_preset(Preset::TwoQubit);
    let ch = c.hamiltonian().unwrap();
    let Initial::Pure(psi) = c.initial_state(&ch).unwrap() else { panic!() };
    let h0 = schmidt_core::dynamics::assemble_total(&ch);
    let u0 = schmidt_core::hilbert::expectation(&h0, &psi).unwrap().re;
    assert!((u0 + 0.3).abs() <= 1e-15);
}

#[test]
fn product_factors_are_normalized_separately() {
    let mut c = ExperimentConfig::from_preset(Preset::TwoQubit);
    c.initial = Some(InitialSpec::Product {
        first: vec![[1.0, 0.0], [2.0, 0.0]],
        second: vec![[1.0, 0.0], [3.0, 0.0]],
    });
    let ch = c.hamiltonian().unwrap();
    let Initial::Pure(psi) = c.initial_state(&ch).unwrap() else { panic!() };
    let Initial::Pure(reference) = ExperimentConfig::from_preset(Preset::TwoQubit).initial_state(&ch).unwrap() else {
        panic!()
    };
    assert!(psi.distance(&reference) <= 1e-15);
}

#[test]
fn explicit_matrices_and_exclusivity() {
    let z = "[[0,0],[0,0],[0,0],[0,0]]";
    let sz = "[[[1,0],[0,0]],[[0,0],[-1,0]]]";
    let explicit = format!(r#"{{"system":{{"h1":{sz},"h2":{sz},"hint":[{z},{z},{z},{z}]}},"initial":{{"ket":[[1,0],[0,0],[0,0],[0,0]]}},"grid":{{"t1":1,"dt":0.01}}}}"#);
    let c = ExperimentConfig::from_json(&explicit).unwrap();
    assert_eq!(c.label(), "explicit");
    assert!(c.hamiltonian().is_ok());
    let both = explicit.replace(r#""system":{"#, r#""system":{"preset":"dephasing-zz","#);
    assert!(ExperimentConfig::from_json(&both).is_err());
    let no_initial = format!(r#"{{"system":{{"h1":{sz},"h2":{sz},"hint":[{z},{z},{z},{z}]}},"grid":{{"t1":1,"dt":0.01}}}}"#);
    assert!(ExperimentConfig::from_json(&no_initial).is_err());
    let non_hermitian = explicit.replace(r#""h1":[[[1,0],[0,0]]"#, r#""h1":[[[1,0],[1,0]]"#);
    let c = ExperimentConfig::from_json(&non_hermitian).unwrap();
    assert_eq!(c.hamiltonian().unwrap_err().exit_code(), 2);
}

#[test]
fn density_initial_becomes_an_ensemble() {
    let mut c = ExperimentConfig::from_preset(Preset::TwoQubit);
    let d = |x: f64| [x, 0.0];
    let o = [0.0, 0.0];
    c.initial = Some(InitialSpec::Density(vec![
        vec![d(0.5), o, o, o],
        vec![o, d(0.5), o, o],
        vec![o, o, o, o],
        vec![o, o, o, o],
    ]));
    let ch = c.hamiltonian().unwrap();
    let Initial::Mixed(ens) = c.initial_state(&ch).unwrap() else { panic!() };
    // Zero-weight directions are dropped.
    assert_eq!(ens.len(), 2);
    assert!(ens.probabilities.iter().all(|p| (p - 0.5).abs() <= 1e-12));
}

#[test]
fn dephasing_default_state_is_plus_plus() {
    let c = ExperimentConfig::from_preset(Preset::DephasingZz);
    let ch = c.hamiltonian().unwrap();
    let Initial::Pure(psi) = c.initial_state(&ch).unwrap() else { panic!() };
    assert!(psi.amplitudes().iter().all(|a| (a.re - 0.5).abs() <= 1e-15 && a.im == 0.0));
}
