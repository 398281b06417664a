use lithos::espm::*;
use lithos::observer::*;
use lithos::params::{Electrode, ParameterSet};
use lithos::*;
use proptest::prelude::*;

const T: f64 = 298.15;

fn refs() -> (ParameterSet, OcpTable) {
    (ParameterSet::reference(), OcpTable::reference())
}

fn reference_gains() -> ObserverGains {
    let (p, ocp) = refs();
    ObserverGains::reference(&p.cell, &p.sei, &ocp, 10).unwrap()
}

fn observer_with(cfg: ObserverConfig) -> Observer {
    let (p, ocp) = refs();
    Observer::new(p.cell, p.sei, ocp, cfg).unwrap()
}

fn frozen_plant() -> EspmModel {
    let (p, ocp) = refs();
    EspmModel::new(p.cell, p.sei, ocp, DiscretizationConfig::default())
        .unwrap()
        .with_mode(ElectrolyteMode::Frozen)
}

fn meas(t: f64, current: f64, voltage: f64) -> Measurement {
    Measurement {
        t,
        current,
        voltage,
        temperature: T,
    }
}

#[test]
fn reference_gains_pass_every_check() {
    let (p, ocp) = refs();
    let g = reference_gains();
    let rep = validate_gains(&g, &p.cell, &p.sei, &ocp, p.cell.d_s_n_ref, ASSUMED_INITIAL_ERROR);
    assert!(rep.passed(), "{rep}");
    for name in [
        "sign pattern",
        "gain ratio",
        "lipschitz bounds",
        "cathode spectrum",
        "anode spectrum",
        "beta1 bound",
        "beta2 bound",
        "G3 bound",
    ] {
        assert!(rep.check(name).is_some_and(|c| c.passed), "{name}");
    }
}

#[test]
fn flipped_cathode_gain_is_rejected() {
    let (p, ocp) = refs();
    let mut g = reference_gains();
    g.g1[3] = -g.g1[3];
    let rep = validate_gains(&g, &p.cell, &p.sei, &ocp, p.cell.d_s_n_ref, ASSUMED_INITIAL_ERROR);
    assert!(!rep.check("sign pattern").unwrap().passed);
    assert!(!rep.passed());
    let err = Observer::new(p.cell, p.sei, ocp, ObserverConfig::new(g)).unwrap_err();
    assert!(matches!(err, Error::InvalidParameters(ref v) if v.iter().any(|m| m.contains("G1[3]"))));
}

#[test]
fn broken_ratio_is_reported_and_blocks_sei_adaptation() {
    let (p, ocp) = refs();
    let mut g = reference_gains();
    for x in g.g2.iter_mut() {
        *x *= 1.01;
    }
    let rep = validate_gains(&g, &p.cell, &p.sei, &ocp, p.cell.d_s_n_ref, ASSUMED_INITIAL_ERROR);
    assert!(!rep.check("gain ratio").unwrap().passed);
    let obs = observer_with(ObserverConfig::new(g));
    let st = obs.state_at_soc(0.5, 2.0, p.cell.d_s_n_ref, obs.theta2_nominal());
    assert!(matches!(obs.adapt_theta2(&st, 1.0, 0.01, 1.0), Err(Error::Config(_))));
}

#[test]
fn ratio_deviation_is_relative() {
    let mut g = reference_gains();
    assert!(g.ratio_deviation() <= 1e-12);
    g.g1[0] *= 1.1;
    // |1.1 l - l| / (1.1 |l|)
    assert!((g.ratio_deviation() - 0.1 / 1.1).abs() < 1e-12);
}

#[test]
fn switching_saturates_and_sign_has_zero_at_zero() {
    let mut cfg = ObserverConfig::new(reference_gains());
    let obs = observer_with(cfg.clone());
    let phi = cfg.boundary_layer;
    assert_eq!(obs.switching(0.0), 0.0);
    assert_eq!(obs.switching(10.0 * phi), 1.0);
    assert_eq!(obs.switching(-10.0 * phi), -1.0);
    assert!((obs.switching(0.5 * phi) - 0.5).abs() < 1e-15);
    cfg.boundary_layer = 0.0;
    let obs = observer_with(cfg);
    assert_eq!(obs.switching(0.0), 0.0);
    assert_eq!(obs.switching(1e-12), 1.0);
    assert_eq!(obs.switching(-1e-12), -1.0);
}

#[test]
fn zero_residual_gives_open_loop_propagation() {
    let obs = Observer::reference(10).unwrap();
    let p = obs.params.clone();
    let st = obs.state_at_soc(0.6, obs.sei.q_0, p.d_s_n_ref, obs.theta2_nominal());
    let current = 2.0;
    let y = obs
        .observer_output(&st, &meas(0.0, current, 0.0), Side::Cathode)
        .unwrap();
    let m = meas(0.0, current, y);
    let next = obs.cathode_step(&st, &m, y, 1.0).unwrap();
    let mut oracle = st.x1_hat.clone();
    let dp = p.solid_diffusivity(Electrode::Cathode, T).unwrap();
    obs.operator(Electrode::Cathode)
        .step(&mut oracle, dp, current, 1.0, Integrator::ImplicitEuler, None)
        .unwrap();
    for (a, b) in next.x1_hat.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
    }
    // the open-loop copies never see the injection
    let next_a = obs.anode_step(&st, &meas(0.0, current, y + 0.3), y, 1.0).unwrap();
    for (a, b) in next_a.x1_ol.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12 * b);
    }
}

#[test]
fn injection_moves_electrodes_by_equal_soc() {
    let obs = Observer::reference(10).unwrap();
    let p = obs.params.clone();
    let st = obs.state_at_soc(0.5, obs.sei.q_0, p.d_s_n_ref, obs.theta2_nominal());
    let y = obs.observer_output(&st, &meas(0.0, 0.0, 0.0), Side::Cathode).unwrap();
    let m = meas(0.0, 0.0, y + 0.1);
    let c = obs.cathode_step(&st, &m, y, 1.0).unwrap();
    let a = obs.anode_step(&st, &m, y, 1.0).unwrap();
    let soc = |e: Electrode, x: &[f64]| {
        let g = p.electrode(e);
        (obs.operator(e).bulk(x) / g.c_max - g.theta_0) / (g.theta_100 - g.theta_0)
    };
    let dp = soc(Electrode::Cathode, &c.x1_hat) - 0.5;
    let dn = soc(Electrode::Anode, &a.x2_hat) - 0.5;
    assert!(dp > 0.0, "positive residual should raise the SOC estimate");
    assert!((dp - dn).abs() < 1e-9 * dp.abs(), "{dp} vs {dn}");
}

#[test]
fn output_at_rest_is_ocp_difference() {
    let obs = Observer::reference(10).unwrap();
    let p = &obs.params;
    let (x1, x2) = (0.6 * p.c_s_p_max, 0.5 * p.c_s_n_max);
    let y = obs.output_from(x1, x2, 1.9, 0.2, 0.0, T).unwrap();
    let up = obs.ocp.cathode.potential(0.6, T, p.t_ref).unwrap();
    let un = obs.ocp.anode.potential(0.5, T, p.t_ref).unwrap();
    assert!((y - (up - un)).abs() < 1e-12);
}

#[test]
fn output_matches_frozen_plant_at_initial_capacity() {
    let plant = frozen_plant();
    let obs = Observer::reference(10).unwrap();
    let s = plant.state_at_soc(0.6);
    for current in [-4.0, -1.0, 0.5, 3.0] {
        let v = plant.terminal_voltage(&s, current, T).unwrap();
        let y = obs
            .output_from(
                s.surface(Electrode::Cathode),
                s.surface(Electrode::Anode),
                obs.sei.q_0,
                obs.theta2_nominal(),
                current,
                T,
            )
            .unwrap();
        assert!((v - y).abs() < 1e-10, "I = {current}: {v} vs {y}");
    }
}

#[test]
fn capacity_terms_shift_output_linearly_in_current() {
    let obs = Observer::reference(10).unwrap();
    let p = &obs.params;
    let (x1, x2) = (0.6 * p.c_s_p_max, 0.5 * p.c_s_n_max);
    let q0 = obs.sei.q_0;
    let th = obs.theta2_nominal();
    let q = q0 + 0.1;
    for current in [-2.0, 1.5] {
        let base = obs.output_from(x1, x2, q0, th, current, T).unwrap();
        let shifted = obs.output_from(x1, x2, q, th, current, T).unwrap();
        let h3 = |x| gains::h3(x, p, &obs.sei, T).unwrap();
        let expect = (-(h3(q) - h3(q0)) + (q - q0) * th) * current;
        assert!((shifted - base - expect).abs() < 1e-12);
    }
}

#[test]
fn kappa_sei_round_trip() {
    let (p, _) = refs();
    let th = p.sei.theta_2(&p.cell);
    let k = unpack_kappa_sei(th, &p.cell, &p.sei).unwrap();
    assert!((k - p.sei.kappa_sei).abs() <= 1e-12 * p.sei.kappa_sei);
    let k2 = unpack_kappa_sei(2.0 * th, &p.cell, &p.sei).unwrap();
    assert!((k2 - 0.5 * p.sei.kappa_sei).abs() <= 1e-12 * p.sei.kappa_sei);
    assert!(unpack_kappa_sei(0.0, &p.cell, &p.sei).is_err());
    assert!(unpack_kappa_sei(f64::NAN, &p.cell, &p.sei).is_err());
}

#[test]
fn excitation_of_constant_input() {
    let t: Vec<f64> = (0..=100).map(f64::from).collect();
    let u = vec![2.0; t.len()];
    let r = persistence_of_excitation(&t, &u, 10.0, 39.0, 41.0);
    assert!(r.passed);
    assert_eq!(r.windows, 91);
    assert!((r.min - 40.0).abs() < 1e-12 && (r.max - 40.0).abs() < 1e-12);
    let z = persistence_of_excitation(&t, &vec![0.0; t.len()], 10.0, 1e-3, 1.0);
    assert!(!z.passed);
    let short = persistence_of_excitation(&t[..5], &u[..5], 10.0, 0.0, 1e9);
    assert_eq!(short.windows, 0);
    assert!(!short.passed);
}

#[test]
fn excitation_of_square_wave_counts_holds() {
    // u = 1 on even seconds, 0 on odd: every 10 s window holds five unit samples
    let t: Vec<f64> = (0..=60).map(f64::from).collect();
    let u: Vec<f64> = (0..=60).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect();
    let r = persistence_of_excitation(&t, &u, 10.0, 4.9, 5.1);
    assert!(r.passed, "{r:?}");
}

fn plant_stream(soc: f64, seconds: usize) -> (Trajectory, Vec<Measurement>) {
    let plant = frozen_plant();
    let t: Vec<f64> = (0..seconds).map(|k| k as f64).collect();
    let i: Vec<f64> = t.iter().map(|t| 3.0 * (t / 40.0).sin() + 0.5).collect();
    let cyc = DriveCycle::new(t, i, vec![T; seconds]).unwrap();
    let tr = plant.simulate(&cyc, &plant.state_at_soc(soc)).unwrap();
    let m = (0..tr.len())
        .map(|k| meas(tr.t[k], tr.current[k], tr.voltage[k]))
        .collect();
    (tr, m)
}

#[test]
fn perfect_initialisation_keeps_residual_at_zero() {
    let (tr, stream) = plant_stream(0.6, 600);
    let obs = Observer::reference(10).unwrap();
    let init = obs.state_at_soc(0.6, obs.sei.q_0, obs.params.d_s_n_ref, obs.theta2_nominal());
    let est = run_observer(&obs, &stream, &init, false).unwrap();
    let worst = est.e_y1.iter().chain(&est.e_y2).fold(0.0f64, |m, e| m.max(e.abs()));
    assert!(worst < 1e-6, "largest residual {worst}");
    let last = tr.len() - 1;
    assert!((est.soc_p[last] - tr.soc_p[last]).abs() < 1e-6);
    assert!((est.soc_n[last] - tr.soc_n[last]).abs() < 1e-6);
}

#[test]
fn state_error_shrinks_from_a_wrong_start() {
    let (tr, stream) = plant_stream(0.7, 1500);
    let obs = Observer::reference(10).unwrap();
    let init = obs.state_at_soc(0.4, obs.sei.q_0, obs.params.d_s_n_ref, obs.theta2_nominal());
    let est = run_observer(&obs, &stream, &init, false).unwrap();
    let last = tr.len() - 1;
    assert!((est.soc_p[last] - tr.soc_p[last]).abs() < 0.02);
    assert!((est.soc_n[last] - tr.soc_n[last]).abs() < 0.02);
}

#[test]
fn capacity_is_frozen_while_the_gate_is_shut() {
    let (_, stream) = plant_stream(0.7, 800);
    let mut cfg = ObserverConfig::new(reference_gains());
    cfg.gating.threshold = 1e-9;
    let obs = observer_with(cfg);
    let init = obs.state_at_soc(0.3, 2.1, obs.params.d_s_n_ref, obs.theta2_nominal());
    let est = run_observer(&obs, &stream, &init, false).unwrap();
    assert!(est.gate_time.is_none());
    assert!(est.gate_open.iter().all(|g| !g));
    assert!(est.q_raw.iter().all(|q| *q == 2.1));
    assert!(est.q_filtered.iter().all(|q| *q == 2.1));
    assert!(est.theta1.iter().all(|x| *x == obs.params.d_s_n_ref));
}

#[test]
fn gate_opens_once_and_filter_lags_raw_capacity() {
    let (_, stream) = plant_stream(0.7, 2500);
    let obs = Observer::reference(10).unwrap();
    let init = obs.state_at_soc(0.3, 2.1, obs.params.d_s_n_ref, obs.theta2_nominal());
    let est = run_observer(&obs, &stream, &init, true).unwrap();
    let t_gate = est.gate_time.expect("gate should open");
    let k = est.gate_open.iter().position(|g| *g).unwrap();
    assert!(est.gate_open[k..].iter().all(|g| *g));
    assert!(est.t[k] > t_gate);
    // first-order filter, exact exponential form
    let tau = obs.config.gating.filter_tau;
    for j in k..k + 50 {
        let a = 1.0 - (-(est.t[j + 1] - est.t[j]) / tau).exp();
        let want = est.q_filtered[j] + a * (est.q_raw[j + 1] - est.q_filtered[j]);
        assert!((est.q_filtered[j + 1] - want).abs() < 1e-12);
    }
    assert!(est.states.len() == est.len());
}

#[test]
fn non_finite_sample_is_skipped_and_recorded() {
    let (_, mut stream) = plant_stream(0.6, 50);
    stream[20].voltage = f64::NAN;
    let obs = Observer::reference(10).unwrap();
    let init = obs.state_at_soc(0.5, 2.0, obs.params.d_s_n_ref, obs.theta2_nominal());
    let est = run_observer(&obs, &stream, &init, true).unwrap();
    assert_eq!(est.faults, vec![20.0]);
    assert_eq!(est.states[21], est.states[20]);
    assert!(est.e_y1[20].is_nan());
    assert!(est.e_y1[21].is_finite());
}

#[test]
fn stream_time_must_increase() {
    let obs = Observer::reference(10).unwrap();
    let init = obs.state_at_soc(0.5, 2.0, obs.params.d_s_n_ref, obs.theta2_nominal());
    let s = vec![meas(0.0, 0.0, 3.7), meas(0.0, 0.0, 3.7)];
    assert!(matches!(run_observer(&obs, &s, &init, false), Err(Error::Domain(_))));
    assert!(run_observer(&obs, &[], &init, false).is_err());
}

#[test]
fn diffusivity_projection_holds_bounds() {
    let obs = Observer::reference(10).unwrap();
    let d = obs.params.d_s_n_ref;
    let mut st = obs.state_at_soc(0.5, 2.0, d, obs.theta2_nominal());
    // a steep surface gradient so the law has something to act on
    let n = st.x2_hat.len();
    st.x2_hat[n - 1] *= 0.5;
    let [lo, hi] = obs.config.theta1_bounds;
    let up = obs.adapt_theta1(&st, 1.0, 1e12);
    let down = obs.adapt_theta1(&st, -1.0, 1e12);
    assert_eq!(up.theta1_hat.max(down.theta1_hat), hi * d);
    assert_eq!(up.theta1_hat.min(down.theta1_hat), lo * d);
}

#[test]
fn config_toml_round_trip_and_line_numbers() {
    let cfg = ObserverConfig::new(reference_gains());
    let text = cfg.to_toml_string();
    let back = ObserverConfig::from_toml_str(&text, "mem").unwrap();
    assert_eq!(back, cfg);
    let bad = text.replacen("k1 =", "k_one =", 1);
    let line = bad.lines().position(|l| l.starts_with("k_one")).unwrap() + 1;
    match ObserverConfig::from_toml_str(&bad, "mem") {
        Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
        other => panic!("{other:?}"),
    }
}

#[test]
fn lyapunov_is_zero_at_truth() {
    let obs = Observer::reference(10).unwrap();
    let st = obs.state_at_soc(0.5, 1.9, obs.params.d_s_n_ref, obs.theta2_nominal());
    let truth = TruthPoint {
        c_s_p: st.x1_hat.clone(),
        c_s_n: st.x2_hat.clone(),
        q: 1.9,
        theta1: obs.params.d_s_n_ref,
        theta2: obs.theta2_nominal(),
    };
    assert_eq!(composite_lyapunov(&obs, &st, &truth).total, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn designed_gains_keep_sign_pattern_and_ratio(
        soc_rate in 1e-4f64..0.05,
        beta in 1e-4f64..0.05,
        g3 in 1e-3f64..1.0,
        n in 3usize..30,
    ) {
        let (p, ocp) = refs();
        let d = GainDesign { soc_rate, beta1: beta, beta2: beta, g3, ..GainDesign::default() };
        let g = ObserverGains::design(&p.cell, &p.sei, &ocp, n, d).unwrap();
        prop_assert!(g.sign_violations().is_empty());
        prop_assert!(g.ratio_deviation() <= 1e-9);
        prop_assert_eq!(g.n(), n);
    }

    #[test]
    fn lyapunov_terms_are_non_negative(
        dp in -500.0f64..500.0,
        dn in -500.0f64..500.0,
        dq in -0.3f64..0.3,
        s1 in 0.1f64..10.0,
        s2 in 0.1f64..10.0,
    ) {
        let obs = Observer::reference(10).unwrap();
        let d = obs.params.d_s_n_ref;
        let st = obs.state_at_soc(0.5, 1.9, d, obs.theta2_nominal());
        let truth = TruthPoint {
            c_s_p: st.x1_hat.iter().map(|x| x + dp).collect(),
            c_s_n: st.x2_hat.iter().map(|x| x + dn).collect(),
            q: 1.9 + dq,
            theta1: s1 * d,
            theta2: s2 * obs.theta2_nominal(),
        };
        let l = composite_lyapunov(&obs, &st, &truth);
        for x in [l.cathode, l.anode, l.capacity, l.theta1, l.theta2] {
            prop_assert!(x >= 0.0);
        }
        prop_assert!((l.total - (l.cathode + l.anode + l.capacity + l.theta1 + l.theta2)).abs() <= 1e-15 * l.total.max(1.0));
    }

    #[test]
    fn capacity_update_follows_residual_times_current(e in -0.05f64..0.05, current in -5.0f64..5.0) {
        let obs = Observer::reference(10).unwrap();
        let mut st = obs.state_at_soc(0.5, 2.0, obs.params.d_s_n_ref, obs.theta2_nominal());
        st.gate_open = true;
        let y = obs.observer_output(&st, &meas(0.0, current, 0.0), Side::Cathode).unwrap();
        let next = obs.cathode_step(&st, &meas(0.0, current, y + e), y, 1.0).unwrap();
        let want = 2.0 + obs.gains().g3 * e * current;
        prop_assert!((next.x3_hat - want).abs() < 1e-12);
    }
}
