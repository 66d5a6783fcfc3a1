use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weyl_lab::dsl::{parse_expression, parse_map, parse_polynomial, parse_state, AddOp, Expr, MapExpr, VecExpr};
use weyl_lab::hilbert::CVector;
use weyl_lab::weyl::WeylPolynomial;
use weyl_lab::Error;

const VOCAB: &[&str] = &[
    "W", "(", ")", "[", "]", "e", "adj", "rho", "gn", "shift", "perm", "u", ",", ":", ";", "excess", "=", "+", "-",
    "*", "i", "0", "1", "2", "17", "-3", "0.5", "2.5e3", "1e999", "3i", "0.25i", "vacuum", "trace", "qf", "pg", "mix",
    "flat", "inf", "x", "_", "\n", "  ", "é", "#", "99999999999999999999999",
];

fn token_stream(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(0..40);
    let glue = if rng.random_bool(0.5) { "" } else { " " };
    (0..len).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(glue)
}

#[test]
fn random_token_streams_only_raise_parse_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd51);
    let mut accepted = 0;
    for _ in 0..10_000 {
        let src = token_stream(&mut rng);
        match parse_expression(&src) {
            Ok(_) => accepted += 1,
            Err(Error::Syntax { .. } | Error::Arity { .. }) => {}
            Err(e) => panic!("{src:?} gave {e:?}"),
        }
        match parse_map(&src) {
            Ok(_) | Err(Error::Syntax { .. } | Error::Arity { .. }) => {}
            Err(e) => panic!("{src:?} gave {e:?}"),
        }
        match parse_state(&src) {
            Ok(_) | Err(Error::Syntax { .. } | Error::Arity { .. } | Error::Domain(_)) => {}
            Err(e) => panic!("{src:?} gave {e:?}"),
        }
    }
    assert!(accepted > 0);
}

#[test]
fn hostile_inputs_are_rejected_cleanly() {
    let deep = "(".repeat(50_000) + "1" + &")".repeat(50_000);
    let long = "W(e(0)) + ".repeat(7_000) + "1";
    let adj = "adj(".repeat(300) + "W(e(0))" + &")".repeat(300);
    for src in [deep.as_str(), long.as_str(), adj.as_str(), "\u{0}", "W(e(0)))", "", "   "] {
        assert!(matches!(parse_expression(src), Err(Error::Syntax { .. })), "{:.40}", src);
    }
    let wide = "W(e(0)) + ".repeat(3_000) + "1";
    assert!(parse_expression(&wide).is_ok());
}

#[test]
fn errors_point_at_the_offending_token() {
    match parse_expression("W(e(0)) *\n  adj(W(e(1)) $") {
        Err(Error::Syntax { line, column, token, .. }) => assert_eq!((line, column, token.as_str()), (2, 15, "$")),
        other => panic!("{other:?}"),
    }
    match parse_expression("rho(gn(2), W(e(1)), W(e(2)), 3)") {
        Err(Error::Arity { constructor, found, .. }) => assert_eq!((constructor.as_str(), found), ("rho", 4)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn documented_examples() {
    assert_eq!(parse_expression("W(e(0))").unwrap(), Expr::Weyl(VecExpr::Basis(0)));
    match parse_expression("W([0: 1+2i]) * adj(W(e(1)))").unwrap() {
        Expr::Product(items) => {
            assert!(matches!(&items[..], [Expr::Weyl(_), Expr::Adjoint(inner)] if matches!(**inner, Expr::Weyl(_))))
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(parse_polynomial("rho(gn(2), W(e(1)))").unwrap(), WeylPolynomial::generator(CVector::basis(3)));
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-16i32..=16).prop_map(|k| k as f64 / 8.0),
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

fn complex() -> impl Strategy<Value = Complex64> {
    (number(), number()).prop_map(|(re, im)| Complex64::new(re, im))
}

fn vec_expr() -> impl Strategy<Value = VecExpr> {
    let leaf = prop_oneof![
        (-40i64..40).prop_map(VecExpr::Basis),
        (
            prop::collection::vec((-40i64..40, complex()), 1..4),
            prop::option::of(number().prop_map(f64::abs)),
        )
            .prop_map(|(entries, excess)| VecExpr::Literal { entries, excess }),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            (complex(), inner.clone()).prop_map(|(c, v)| VecExpr::Scaled(c, Box::new(v))),
            prop::collection::vec(inner, 2..4).prop_map(VecExpr::Sum),
        ]
    })
}

fn map_expr() -> impl Strategy<Value = MapExpr> {
    prop_oneof![
        (-5i64..70).prop_map(MapExpr::Gn),
        Just(MapExpr::Shift),
        prop::collection::vec(-3i64..8, 1..6).prop_map(MapExpr::Perm),
        (1usize..4).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(complex(), n), n)).prop_map(MapExpr::U),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![complex().prop_map(Expr::Scalar), vec_expr().prop_map(Expr::Weyl)];
    leaf.prop_recursive(4, 24, 4, |inner| {
        let op = prop_oneof![Just(AddOp::Plus), Just(AddOp::Minus)];
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Product),
            (inner.clone(), prop::collection::vec((op, inner.clone()), 1..3))
                .prop_map(|(first, rest)| Expr::Sum(Box::new(first), rest)),
            inner.clone().prop_map(|e| Expr::Adjoint(Box::new(e))),
            (map_expr(), inner).prop_map(|(m, e)| Expr::Apply(m, Box::new(e))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn printed_expressions_parse_back(e in expr()) {
        let text = e.to_string();
        let back = parse_expression(&text).map_err(|err| TestCaseError::fail(format!("{err} in {text}")))?;
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn printed_maps_parse_back(m in map_expr()) {
        prop_assert_eq!(parse_map(&m.to_string()).unwrap(), m);
    }
}
