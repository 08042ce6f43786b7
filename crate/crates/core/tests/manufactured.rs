//! Case A against values computed symbolically (exact rational arithmetic,
//! rounded to f64) for the default coefficients sigma = (1, 10), eps = (1, 0.1).

use capfem::verification::case_a;

/// (point, t, f, u)
const CASE_A: [([f64; 2], f64, f64, f64); 8] = [
    ([0.1, 0.2], 0.0, 2.13136128, 0.0361304064),
    (
        [-0.3, 0.15],
        0.25,
        -0.27582939954864416,
        0.017872308320058972,
    ),
    ([0.0, 0.0], 0.6, 3.872029090235066, 0.083080436353526),
    ([0.2, -0.4], 1.0, -1.3827462115202254, 0.0022237648904230726),
    ([0.7, 0.1], 0.0, 4.023681228, 0.015932750625),
    ([-0.55, -0.6], 0.25, 10.876130794878547, 0.04050934419812617),
    ([0.9, -0.9], 0.6, -4.249702287872853, 0.0032514291099743505),
    ([0.3, 0.8], 1.0, 19.695104984585775, 0.03382346398333493),
];

#[test]
fn case_a_forcing_matches_symbolic_values() {
    let case = case_a();
    let f = case.forcing();
    for (p, t, want, _) in CASE_A {
        let got = f.evaluate(t, p);
        assert!(
            (got - want).abs() <= 1e-12 * want.abs().max(1.0),
            "f({t}, {p:?}) = {got}, want {want}"
        );
    }
}

#[test]
fn case_a_solution_matches_symbolic_values() {
    let case = case_a();
    for (p, t, _, want) in CASE_A {
        let got = case.exact(t, p);
        assert!(
            (got - want).abs() <= 1e-14,
            "u({t}, {p:?}) = {got}, want {want}"
        );
    }
}

#[test]
fn case_b_inner_forcing_at_zero() {
    // -4 a1 (sigma1 alpha(0) + eps1 alpha'(0)) = -4 (2 * 2 - 2)
    let case = capfem::verification::case_b();
    assert!((case.forcing().evaluate(0.0, [0.1, 0.1]) + 8.0).abs() < 1e-14);
}
