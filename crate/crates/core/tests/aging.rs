use lithos::aging::*;
use lithos::espm::{DiscretizationConfig, EspmModel};
use lithos::observer::unpack_kappa_sei;
use lithos::{CellParameters, OcpTable, ParameterSet};
use proptest::prelude::*;

const T: f64 = 298.15;
const CE: [f64; 3] = [1200.0; 3];

fn cell(area_scale: f64, l_n_scale: f64, eps_scale: f64) -> CellParameters {
    let mut c = CellParameters::reference();
    c.area *= area_scale;
    c.l_n *= l_n_scale;
    c.eps_n *= eps_scale;
    c
}

#[test]
fn aging_a_plant_lowers_its_terminal_voltage_under_load() {
    let p = ParameterSet::reference();
    let m = EspmModel::new(
        p.cell.clone(),
        p.sei.clone(),
        OcpTable::reference(),
        DiscretizationConfig::default(),
    )
    .unwrap()
    .with_aging(true);
    let fresh = m.state_at_soc(0.6);
    let aged = age_to_capacity(&fresh, 1.84, 3.0e7, &p.cell, &p.sei).unwrap();
    let r = power_fade_resistance(aged.q, &p.cell, &p.sei, CE, T).unwrap();
    assert!(r > 0.0);
    let v_fresh = m.terminal_voltage(&fresh, 2.0, T).unwrap();
    let v_aged = m.terminal_voltage(&aged, 2.0, T).unwrap();
    assert!((v_fresh - v_aged - 2.0 * r).abs() < 1e-12, "{v_fresh} {v_aged} {r}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fade_and_growth_rates_agree(
        i_s in -1e-2f64..-1e-10,
        a in 0.5f64..1.5,
        l in 0.5f64..1.5,
        e in 0.8f64..1.1,
    ) {
        let c = cell(a, l, e);
        let sei = ParameterSet::reference().sei;
        let dl = sei_growth_rate(i_s, &sei, c.faraday).unwrap();
        let dq = capacity_fade_rate(i_s, &c).unwrap();
        prop_assert!(dl > 0.0 && dq < 0.0);
        let rel = (capacity_rate_from_growth(dl, &c, &sei) - dq).abs() / dq.abs();
        prop_assert!(rel <= 1e-12, "{}", rel);
    }

    #[test]
    fn power_fade_never_decreases_as_capacity_is_lost(
        fracs in prop::collection::vec(0.0f64..0.15, 2..12),
    ) {
        let p = ParameterSet::reference();
        let mut qs: Vec<f64> = fracs.iter().map(|f| p.sei.q_0 * (1.0 - f)).collect();
        qs.sort_by(|a, b| b.total_cmp(a));
        let r: Vec<f64> = qs
            .iter()
            .map(|q| power_fade_resistance(*q, &p.cell, &p.sei, CE, T).unwrap())
            .collect();
        prop_assert!(r.iter().all(|x| *x >= 0.0));
        prop_assert!(r.windows(2).all(|w| w[1] >= w[0]), "{:?} -> {:?}", qs, r);
    }

    #[test]
    fn kappa_survives_the_theta2_round_trip(
        kappa in 1e-7f64..1e-3,
        a in 0.5f64..1.5,
        l in 0.5f64..1.5,
    ) {
        let c = cell(a, l, 1.0);
        let mut sei = ParameterSet::reference().sei;
        sei.kappa_sei = kappa;
        let back = unpack_kappa_sei(sei.theta_2(&c), &c, &sei).unwrap();
        prop_assert!((back - kappa).abs() <= 1e-12 * kappa, "{} {}", back, kappa);
    }

    #[test]
    fn aged_voltage_is_fresh_voltage_minus_the_fade_drop(
        soc in 0.2f64..0.9,
        q_frac in 0.85f64..1.0,
        current in -4.0f64..4.0,
    ) {
        let p = ParameterSet::reference();
        let m = EspmModel::new(p.cell.clone(), p.sei.clone(), OcpTable::reference(), DiscretizationConfig::default())
            .unwrap();
        let mut s = m.state_at_soc(soc);
        s.q = q_frac * p.sei.q_0;
        let aged = m.terminal_voltage_with(&s, current, T, true).unwrap();
        let fresh = m.terminal_voltage_with(&s, current, T, false).unwrap();
        let r = power_fade_resistance(s.q, &p.cell, &p.sei, CE, T).unwrap();
        prop_assert!((aged - fresh + current * r).abs() <= 1e-12 * fresh.abs().max(1.0));
    }
}
