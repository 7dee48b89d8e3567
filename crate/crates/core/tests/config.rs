use lagns::cli_io::{parse_config, serialize_config};
use lagns::Error;
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("equilibrium"), Just("cosine"), Just("random_smooth")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(
        beta in 0.01f64..5.0,
        mu in 0.1f64..3.0,
        kappa in 0.1f64..3.0,
        r in 0.1f64..3.0,
        c_v in 0.5f64..3.0,
        kind in kind(),
        a_v in -0.5f64..0.5,
        a_u in -0.3f64..0.3,
        a_theta in -0.05f64..0.05,
        n in 16usize..200,
        dt in 1e-6f64..1e-2,
        t_end in 1.0f64..100.0,
        seed in any::<u64>(),
        lp in proptest::option::of(proptest::collection::vec(0.01f64..4.0, 1..4)),
        explicit in any::<bool>(),
    ) {
        let mut text = format!(
            "beta = {beta}\nmu = {mu}\nkappa = {kappa}\nR = {r}\nc_v = {c_v}\ninit.kind = {kind}\n\
             init.a_v = {a_v}\ninit.a_u = {a_u}\ninit.a_theta = {a_theta}\nn_cells = {n}\n\
             dt = {dt}\nt_end = {t_end}\nsample_every = 0.5\nseed = {seed}\nfit_window = 0.5, {t_end}\n\
             scheme = {}\n",
            if explicit { "explicit_rk2" } else { "imex_be" }
        );
        if let Some(lp) = &lp {
            let items: Vec<String> = lp.iter().map(|p| p.to_string()).collect();
            text.push_str(&format!("lp = {}\n", items.join(",")));
        }
        // amplitudes can exceed what a given c_v allows; those are rejected, not mangled
        match parse_config(&text) {
            Ok(cfg) => prop_assert_eq!(parse_config(&serialize_config(&cfg)).unwrap(), cfg),
            Err(Error::Config { key, .. }) => prop_assert!(key.starts_with("init."), "{}", key),
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line(pad in 0usize..5, key in "[a-z]{3,8}") {
        prop_assume!(!["beta", "mu", "kappa", "dt", "scheme", "t_end", "lp", "seed"].contains(&key.as_str()));
        let text = format!("{}{key} = 1\n", "\n".repeat(pad));
        match parse_config(&text) {
            Err(Error::Config { line, key: k, .. }) => {
                prop_assert_eq!(line, pad + 1);
                prop_assert_eq!(k, key);
            }
            other => prop_assert!(false, "{:?}", other.map(|_| ())),
        }
    }
}

#[test]
fn spec_examples() {
    assert!(parse_config("beta=1\ninit.kind=cosine\nn_cells=256\ndt=1e-4\nt_end=20").is_ok());
    assert!(
        matches!(parse_config("beta=-1"), Err(Error::Config { key, line: 1, .. }) if key == "beta")
    );
    assert!(
        matches!(parse_config("betta=1"), Err(Error::Config { key, line: 1, .. }) if key == "betta")
    );
}
