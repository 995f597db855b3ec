use uavfso::analysis::{
    evaluate, evaluate_with, floor_blind, floor_blind_exact, sweep_curve, Formulation, Kind, QuadratureSettings,
};
use uavfso::config::{dbm_to_watts, SystemParams};

fn at(dbm: f64, l: u32) -> SystemParams {
    SystemParams {
        tx_power: dbm_to_watts(dbm),
        window_len: l,
        ..SystemParams::default()
    }
}

#[test]
fn tighter_quadrature_moves_values_little() {
    let p = at(-20.0, 5);
    for kind in [Kind::TerKnown, Kind::TerBlind, Kind::BerKnown, Kind::BerBlind] {
        for f in [Formulation::Exact, Formulation::Printed] {
            let a = evaluate_with(&p, kind, f, QuadratureSettings::default()).unwrap().value;
            let b = evaluate_with(&p, kind, f, QuadratureSettings::refined()).unwrap().value;
            assert!(((a - b) / b).abs() < 1e-3, "{kind} {f}: {a} vs {b}");
        }
    }
}

#[test]
fn known_csi_tracking_falls_to_the_floor() {
    let grid: Vec<f64> = (0..9).map(|i| -30.0 + 5.0 * i as f64).collect();
    let rows = sweep_curve(&at(0.0, 10), &grid, &[Kind::TerKnown], Formulation::Exact, QuadratureSettings::default());
    let v: Vec<f64> = rows.iter().map(|r| r.as_ref().unwrap().value).collect();
    let floor = floor_blind_exact(10, 0.0);
    for w in v.windows(2) {
        assert!(w[1] < w[0] || (w[1] - floor).abs() < 1e-3 * floor, "{v:?}");
    }
}

#[test]
fn blind_curves_floor_where_expected() {
    let p = at(40.0, 12);
    let exact = evaluate(&p, Kind::TerBlind, Formulation::Exact).unwrap().value;
    let printed = evaluate(&p, Kind::TerBlind, Formulation::Printed).unwrap().value;
    assert!((exact / floor_blind_exact(12, 0.0) - 1.0).abs() < 1e-3, "{exact}");
    assert!((printed / floor_blind(12, 0.0) - 1.0).abs() < 1e-3, "{printed}");
}

#[test]
fn single_point_and_failed_point() {
    let rows = sweep_curve(&at(0.0, 10), &[-20.0], &[Kind::TerKnown], Formulation::Exact, QuadratureSettings::default());
    assert_eq!(rows.len(), 1);
    let rows = sweep_curve(
        &at(0.0, 10),
        &[-20.0, f64::NAN, -10.0],
        &[Kind::TerKnown],
        Formulation::Exact,
        QuadratureSettings::default(),
    );
    assert!(rows[0].is_ok() && rows[2].is_ok());
    let failed = rows[1].as_ref().unwrap_err();
    assert!(failed.error.to_string().contains("tx_power"), "{}", failed.error);
}

#[test]
fn blind_costs_against_known_csi() {
    let p = at(-17.0, 10);
    let tk = evaluate(&p, Kind::TerKnown, Formulation::Exact).unwrap().value;
    let tb = evaluate(&p, Kind::TerBlind, Formulation::Exact).unwrap().value;
    assert!(tb > tk);
    let bk = evaluate(&p, Kind::BerKnown, Formulation::Exact).unwrap().value;
    let bb = evaluate(&p, Kind::BerBlind, Formulation::Exact).unwrap().value;
    assert!(bb > bk);
}

#[test]
fn printed_blind_ber_clamps_and_says_so() {
    let c = evaluate(&at(-20.0, 10), Kind::BerBlind, Formulation::Printed).unwrap();
    assert!(c.clamped_cells > 0);
    let e = evaluate(&at(-20.0, 10), Kind::BerBlind, Formulation::Exact).unwrap();
    assert_eq!(e.clamped_cells, 0);
}

#[test]
fn main_text_variant_differs_only_for_known_tracking() {
    let p = at(-20.0, 10);
    let a = evaluate(&p, Kind::TerKnown, Formulation::Printed).unwrap().value;
    let b = evaluate(&p, Kind::TerKnown, Formulation::PrintedMainText).unwrap().value;
    assert_ne!(a, b);
    let a = evaluate(&p, Kind::TerBlind, Formulation::Printed).unwrap().value;
    let b = evaluate(&p, Kind::TerBlind, Formulation::PrintedMainText).unwrap().value;
    assert_eq!(a, b);
}
