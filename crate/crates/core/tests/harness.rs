use std::path::PathBuf;

use lithos::espm::ElectrolyteMode;
use lithos::harness::twin::{plant_csv, sweep};
use lithos::harness::*;
use lithos::observer::Measurement;
use lithos::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/cycles").join(name)
}

#[test]
fn plant_health_parsing() {
    assert_eq!("fresh".parse::<PlantHealth>().unwrap(), PlantHealth::Fresh);
    assert_eq!("aged:1.84".parse::<PlantHealth>().unwrap(), PlantHealth::Aged(1.84));
    assert_eq!(" aged:1.9 ".parse::<PlantHealth>().unwrap(), PlantHealth::Aged(1.9));
    for bad in ["old", "aged:", "aged:-1", "aged:x", "aged:inf"] {
        assert!(bad.parse::<PlantHealth>().is_err(), "{bad}");
    }
    assert_eq!(PlantHealth::Aged(1.84).to_string(), "aged:1.84");
}

#[test]
fn shipped_cycles_match_generators() {
    let us06 = DriveCycle::load(data("us06_like.csv")).unwrap();
    let gen = us06_like(2.0).unwrap();
    assert_eq!(us06.len(), cycles::US06_LIKE_SAMPLES);
    assert_eq!(us06.t, gen.t);
    assert_eq!(us06.current, gen.current);
    let udds = DriveCycle::load(data("udds2_like.csv")).unwrap();
    let gen = udds2_like(2.0).unwrap();
    assert_eq!(udds.len(), cycles::UDDS2_LIKE_SAMPLES);
    assert_eq!(udds.current, gen.current);
}

#[test]
fn us06_like_is_charge_sustaining() {
    let c = us06_like(2.0).unwrap();
    assert!(c.charge_ah().abs() < 1e-9, "net {} Ah", c.charge_ah());
    let peak = c.current.iter().fold(0.0f64, |m, i| m.max(i.abs()));
    assert!(peak > 4.0 && peak < 8.0, "peak {peak} A");
    assert_eq!(c.meta.source, "synthetic surrogate");
}

#[test]
fn udds2_like_is_charge_depleting_and_repeats() {
    let c = udds2_like(2.0).unwrap();
    assert!(c.charge_ah() > 0.3, "net {} Ah", c.charge_ah());
    let half = (c.len() - 1) / 2;
    assert_eq!(c.current[..half], c.current[half..2 * half]);
}

#[test]
fn cycles_scale_with_one_c() {
    let a = us06_like(2.0).unwrap();
    let b = us06_like(4.0).unwrap();
    for (x, y) in a.current.iter().zip(&b.current) {
        assert!((2.0 * x - y).abs() < 1e-12);
    }
    assert!(us06_like(0.0).is_err());
}

fn stream(n: usize) -> Vec<Measurement> {
    (0..n)
        .map(|k| Measurement {
            t: k as f64,
            current: 1.0,
            voltage: 3.7,
            temperature: 298.15,
        })
        .collect()
}

#[test]
fn identity_corruption_changes_nothing() {
    let s = stream(10);
    let spec = CorruptionSpec::default();
    assert!(spec.is_identity());
    assert_eq!(corrupt(&s, &spec).unwrap(), s);
}

#[test]
fn bias_is_exact() {
    let s = stream(10);
    let out = corrupt(&s, &CorruptionSpec::bias(0.01, -0.02)).unwrap();
    for (a, b) in s.iter().zip(&out) {
        assert_eq!(b.current, a.current + 0.01);
        assert_eq!(b.voltage, a.voltage - 0.02);
        assert_eq!(b.t, a.t);
    }
}

#[test]
fn noise_is_seeded_and_has_the_requested_moments() {
    let s = stream(100_000);
    let spec = CorruptionSpec::noise(0.1, 0.025, 7);
    let a = corrupt(&s, &spec).unwrap();
    assert_eq!(a, corrupt(&s, &spec).unwrap());
    assert_ne!(a, corrupt(&s, &CorruptionSpec::noise(0.1, 0.025, 8)).unwrap());
    let moments = |x: Vec<f64>| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    };
    let (mi, si) = moments(a.iter().map(|m| m.current - 1.0).collect());
    let (mv, sv) = moments(a.iter().map(|m| m.voltage - 3.7).collect());
    // 5 standard errors
    assert!(mi.abs() < 5.0 * 0.1 / 316.0, "{mi}");
    assert!(mv.abs() < 5.0 * 0.025 / 316.0, "{mv}");
    assert!((si / 0.1 - 1.0).abs() < 0.02);
    assert!((sv / 0.025 - 1.0).abs() < 0.02);
}

#[test]
fn negative_noise_is_rejected() {
    assert!(corrupt(&stream(3), &CorruptionSpec::noise(-0.1, 0.0, 0)).is_err());
}

#[test]
fn twin_config_toml_round_trip() {
    let cfg = TwinConfig::reference().unwrap().with_health(PlantHealth::Aged(1.84));
    let text = cfg.to_toml_string();
    assert!(text.contains("aged:1.84"));
    assert_eq!(TwinConfig::from_toml_str(&text, "mem").unwrap(), cfg);
    let bad = text.replacen("soc_error", "soc_err", 1);
    assert!(matches!(
        TwinConfig::from_toml_str(&bad, "mem"),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn invalid_start_soc_is_a_config_stage_error() {
    let mut cfg = TwinConfig::reference().unwrap();
    cfg.init.soc_error = 0.9;
    let err = twin_experiment(&us06_like(2.0).unwrap(), &cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "config", .. }));
}

#[test]
fn plant_failure_is_tagged_with_its_stage() {
    let mut cfg = TwinConfig::reference().unwrap();
    cfg.plant.soc = 0.99;
    cfg.init.soc_error = 0.2;
    let charge = DriveCycle::constant(-6.0, 298.15, 4000.0, 1.0).unwrap();
    let err = twin_experiment(&charge, &cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "plant", .. }), "{err}");
}

#[test]
fn aged_plant_starts_at_the_target_capacity() {
    let cfg = TwinConfig::reference().unwrap().with_health(PlantHealth::Aged(1.84));
    let (_, x0) = twin::build_plant(&cfg).unwrap();
    assert_eq!(x0.q, 1.84);
}

#[test]
fn twin_run_writes_its_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TwinConfig::reference().unwrap();
    let r = twin_experiment_to_dir(&us06_like(2.0).unwrap(), &cfg, dir.path()).unwrap();
    for f in ["config.toml", "plant.csv", "estimates.csv", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let echoed = TwinConfig::load(dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("q_true_Ah = 1.95000000000e0"));
    let est = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert!(est.starts_with("# lithos-estimates v1\n"));
    assert_eq!(est.lines().count(), r.estimates.len() + 2);
    assert_eq!(plant_csv(&r.plant).lines().count(), r.plant.len() + 1);
}

#[test]
fn sweep_matches_single_runs_in_both_modes() {
    let cyc = us06_like(2.0).unwrap();
    let base = TwinConfig::reference().unwrap();
    let configs: Vec<TwinConfig> = [0.7, 0.75, 0.8]
        .iter()
        .map(|s| {
            let mut c = base.clone();
            c.plant.soc = *s;
            c
        })
        .collect();
    let par = sweep(&cyc, &configs, Execution::Parallel);
    let seq = sweep(&cyc, &configs, Execution::Sequential);
    for ((p, s), c) in par.iter().zip(&seq).zip(&configs) {
        let single = twin_experiment(&cyc, c).unwrap().summary;
        assert_eq!(p.as_ref().unwrap(), &single);
        assert_eq!(s.as_ref().unwrap(), &single);
    }
}

#[test]
fn frozen_plant_has_no_reduced_model_uncertainty() {
    let mut cfg = TwinConfig::reference().unwrap();
    cfg.plant.electrolyte = ElectrolyteMode::Frozen;
    let r = twin_experiment(&us06_like(2.0).unwrap(), &cfg).unwrap();
    assert!(r.model_uncertainty().unwrap() < 1e-12);
    let mut cfg = TwinConfig::reference().unwrap();
    cfg.plant.electrolyte = ElectrolyteMode::Dynamic;
    let r = twin_experiment(&us06_like(2.0).unwrap(), &cfg).unwrap();
    let u = r.model_uncertainty().unwrap();
    assert!(u > 1e-3 && u < 0.1, "{u}");
}
