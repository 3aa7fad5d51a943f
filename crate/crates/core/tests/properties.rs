use proptest::prelude::*;

use stable_op_core::spectral_measure::{SpectralMeasure, StableOperator};

fn atoms_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..std::f64::consts::PI, 0.05..2.0), 2..7)
}

fn build(s: f64, atoms: &[(f64, f64)]) -> Option<StableOperator> {
    let atoms = atoms.iter().map(|&(a, w)| (vec![a.cos(), a.sin()], w)).collect();
    let m = SpectralMeasure::atomic(2, atoms).ok()?;
    StableOperator::new(s, m).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbol_between_ellipticity_bounds(
        s in 0.2..0.95f64,
        atoms in atoms_strategy(),
        xs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 16),
    ) {
        // Nearly parallel atoms are rejected as degenerate; nothing to check then.
        let Some(op) = build(s, &atoms) else { return Ok(()) };
        for (a, b) in xs {
            let xi = [a, b];
            let r = (a * a + b * b).sqrt().powf(2.0 * s);
            let v = op.symbol(&xi);
            prop_assert!(v >= op.lambda * r * (1.0 - 1e-6) - 1e-14, "A={v} lambda r={}", op.lambda * r);
            prop_assert!(v <= op.big_lambda * r * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn symbol_is_even_and_homogeneous(
        s in 0.2..0.95f64,
        atoms in atoms_strategy(),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        t in 0.1..10.0f64,
    ) {
        let Some(op) = build(s, &atoms) else { return Ok(()) };
        let v = op.symbol(&[a, b]);
        prop_assert!((op.symbol(&[-a, -b]) - v).abs() <= 1e-12 * (1.0 + v));
        let scaled = op.symbol(&[t * a, t * b]);
        prop_assert!((scaled - t.powf(2.0 * s) * v).abs() <= 1e-10 * (1.0 + scaled));
    }

    #[test]
    fn rotating_the_measure_rotates_the_symbol(
        s in 0.2..0.95f64,
        atoms in atoms_strategy(),
        phi in 0.0..std::f64::consts::TAU,
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
    ) {
        let Some(op) = build(s, &atoms) else { return Ok(()) };
        let (c, sn) = (phi.cos(), phi.sin());
        let rot = vec![vec![c, -sn], vec![sn, c]];
        let turned = StableOperator::new(s, op.measure.rotated(&rot)).unwrap();
        let v = op.symbol(&[a, b]);
        let w = turned.symbol(&[c * a - sn * b, sn * a + c * b]);
        prop_assert!((v - w).abs() <= 1e-10 * (1.0 + v));
    }
}
