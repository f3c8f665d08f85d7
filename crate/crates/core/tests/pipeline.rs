use ducharge::charges::{charge_from_soliton, verify_conserved, SolitonCatalog};
use ducharge::io::{charge_from_json, charge_to_json, solitons_from_json, solitons_to_json};
use ducharge::lightcone::{find_solitons, UNIMODULAR_TOL};
use ducharge::{Direction, Error, FloquetOperator, Gate};

#[test]
fn solitons_become_conserved_charges() {
    let g = Gate::fswap();
    let f = FloquetOperator::new(&g, &g, 4).unwrap();
    for dir in [Direction::Plus, Direction::Minus] {
        let recs = find_solitons(&g, &g, 3, dir, UNIMODULAR_TOL).unwrap();
        assert_eq!(recs.len(), 5);
        let recs = solitons_from_json(&solitons_to_json(&recs)).unwrap();
        let mut built = 0;
        for r in &recs {
            match charge_from_soliton(r, 4) {
                Ok(q) => {
                    let q = charge_from_json(&charge_to_json(&q)).unwrap();
                    assert!(verify_conserved(&f, &q).unwrap() < 1e-9, "λ = {}", r.lambda);
                    built += 1;
                }
                Err(Error::PhaseIncompatible { .. }) => assert!((r.lambda.powu(4) - 1.0).norm() > 1e-8),
                Err(e) => panic!("{e}"),
            }
        }
        assert!(built > 0);
    }
}

#[test]
fn phased_swap_charges_depend_on_chain_length() {
    let g = Gate::phased_swap(0.4);
    let cat = SolitonCatalog::build(&g, &g, 1, UNIMODULAR_TOL).unwrap();
    assert!(cat.count() > 0);
    for l in [2usize, 3, 4] {
        let f = FloquetOperator::new(&g, &g, l).unwrap();
        let (charges, _) = cat.charges(l).unwrap();
        for q in &charges {
            assert!(verify_conserved(&f, q).unwrap() < 1e-9);
        }
    }
}

#[test]
fn window_width_must_be_odd() {
    let g = Gate::fswap();
    assert!(matches!(find_solitons(&g, &g, 2, Direction::Plus, UNIMODULAR_TOL), Err(Error::Contract(_))));
}

#[test]
fn swap_family_spans_match_the_oracle() {
    for g in [Gate::swap(2), Gate::phased_swap(std::f64::consts::FRAC_PI_4)] {
        let r = ducharge::charges::theorem1_equivalence(&g, &g, 4, 3, 1e-8).unwrap();
        assert_eq!((r.oracle_dim, r.soliton_dim), (24, 24));
        assert!(r.matched);
        assert!(r.max_principal_sine.unwrap() < 1e-7);
        assert!(r.max_decomposition_residual < 1e-8);
    }
}
