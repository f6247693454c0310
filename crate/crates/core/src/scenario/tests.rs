use serde_json::json;

use super::*;

fn small(sub: Subcommand, extra: &[&str]) -> ScenarioConfig {
    let mut o: Vec<String> = vec!["sweep.resolutions=[17]".into(), "sweep.seeds=[0,1]".into()];
    o.extend(extra.iter().map(|s| s.to_string()));
    resolve_config(sub, None, &o).unwrap().0
}

#[test]
fn subcommand_names_round_trip() {
    for s in Subcommand::ALL {
        assert_eq!(s.as_str().parse::<Subcommand>().unwrap(), s);
    }
    assert!(matches!("bogus".parse::<Subcommand>(), Err(Error::Config(_))));
}

#[test]
fn overrides_create_and_replace() {
    let mut v = json!({"a": {"b": 1}, "list": [1, 2]});
    apply_override(&mut v, "a.b=2.5").unwrap();
    apply_override(&mut v, "a.c.d=\"x\"").unwrap();
    apply_override(&mut v, "a.e=plain").unwrap();
    apply_override(&mut v, "list.1=7").unwrap();
    assert_eq!(v, json!({"a": {"b": 2.5, "c": {"d": "x"}, "e": "plain"}, "list": [1, 7]}));
    assert!(apply_override(&mut v, "novalue").is_err());
    assert!(apply_override(&mut v, "list.9=1").is_err());
    assert!(apply_override(&mut v, "a.b.c=1").is_err());
}

#[test]
fn file_merges_over_defaults() {
    let text = r#"{"sweep": {"eps": [0.5]}, "domain": {"kind": "disk", "center": [0, 0], "radius": 1}}"#;
    let (c, _) = resolve_config(Subcommand::Rigidity, Some(text), &[]).unwrap();
    assert_eq!(c.sweep.eps, vec![0.5]);
    assert_eq!(c.sweep.seeds.len(), 5);
    assert!(matches!(c.domain, crate::grid::Shape::Disk { .. }));
}

#[test]
fn validation_errors() {
    let bad = [
        (Some(r#"{"sweep": {"eps": []}}"#), vec![]),
        (Some("not json"), vec![]),
        (Some(r#"{"unknown": 1}"#), vec![]),
        (Some(r#"{"subcommand": "korn"}"#), vec![]),
        (None, vec!["sweep.mu=[5]".to_string()]),
        (None, vec!["sweep.eps=[0.1, -1]".to_string()]),
        (None, vec!["subcommand=korn".to_string()]),
    ];
    for (text, o) in bad {
        assert!(matches!(resolve_config(Subcommand::Rigidity, text, &o), Err(Error::Config(_))), "{text:?} {o:?}");
    }
    assert!(resolve_config(Subcommand::Gamma, None, &["sweep.resolutions=[9,17]".into()]).is_err());
    assert!(resolve_config(Subcommand::Gamma, None, &["sweep.eps=[0.01, 0.1]".into()]).is_err());
}

#[test]
fn row_counts_follow_the_sweep() {
    let cases = [
        (Subcommand::Norm, 2 * 3),
        (Subcommand::Rigidity, 2 * 3),
        (Subcommand::Poincare, 2 * 3),
        (Subcommand::Korn, 2 * 3),
        (Subcommand::Lusin, 2 * 3),
        (Subcommand::Maximal, 2),
        (Subcommand::Whitney, 1),
    ];
    for (sub, rows) in cases {
        let out = execute(&small(sub, &[])).unwrap();
        assert_eq!(out.rows, rows, "{sub}");
        assert_eq!(out.csv.lines().count(), rows + 1, "{sub}");
        assert_eq!(out.flagged, 0, "{sub}: {}", out.csv);
    }
    let mixed = execute(&small(Subcommand::Mixed, &["sweep.eps=[0.05]", "sweep.mu=[1,2]"])).unwrap();
    assert_eq!(mixed.rows, 2 * 2);
    assert_eq!(mixed.flagged, 0, "{}", mixed.csv);
}

#[test]
fn extend_requires_graph_domain() {
    let c = small(Subcommand::Extend, &["domain={\"kind\":\"lshape\"}"]);
    assert!(matches!(execute(&c), Err(Error::Unsupported(_))));
    let ok = small(Subcommand::Extend, &["sweep.resolutions=[65]", "sweep.seeds=[0]"]);
    let out = execute(&ok).unwrap();
    assert_eq!(out.rows, 1);
    assert_eq!(out.flagged, 0, "{}\n{:?}", out.csv, out.errors);
}

#[test]
fn outputs_are_deterministic() {
    let c = small(Subcommand::Rigidity, &[]);
    let a = execute(&c).unwrap();
    let b = execute(&c).unwrap();
    assert_eq!(a.csv, b.csv);
    let other = small(Subcommand::Rigidity, &["rng_seed=7"]);
    assert_ne!(a.csv, execute(&other).unwrap().csv);
}

#[test]
fn gamma_with_zero_data() {
    let c = small(Subcommand::Gamma, &["sweep.resolutions=[9]", "energy.boundary=zero"]);
    let out = execute(&c).unwrap();
    assert_eq!(out.csv.lines().next().unwrap(), crate::linearize::CSV_HEADER.join(","));
    assert_eq!(out.rows, 3);
    assert_eq!(out.flagged, 0);
}

#[test]
fn table_flags_non_finite_cells() {
    let mut t = Table::new(&["x"]);
    t.push(vec![Cell::Num(1.0)], "ok".into());
    t.push(vec![Cell::Num(f64::INFINITY)], "ok".into());
    t.push_row(vec![Cell::Num(2.0)], "cold-start-differs".into(), false);
    assert_eq!(t.flagged(), 1);
    assert_eq!(t.to_csv(), "x,flag\n1e0,ok\ninf,non-finite\n2e0,cold-start-differs\n");
}

#[test]
fn run_writes_artifacts_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vec!["sweep.resolutions=[17]".to_string(), "sweep.seeds=[0]".to_string()];
    let st = run("whitney", None, &o, dir.path());
    assert_eq!(st.code, EXIT_OK, "{}", st.message);
    assert!(dir.path().join("data.csv").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["subcommand"], "whitney");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config"]["sweep"]["resolutions"], json!([17]));

    assert_eq!(run("nope", None, &o, dir.path()).code, EXIT_INVALID);
    assert_eq!(run("whitney", Some("{"), &o, dir.path()).code, EXIT_INVALID);
    let file = dir.path().join("data.csv");
    assert_eq!(run("whitney", None, &o, &file.join("sub")).code, EXIT_INVALID);
}
