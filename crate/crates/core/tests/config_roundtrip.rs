use std::path::Path;

use proptest::prelude::*;
use viaflow::interface::{parse_config, parse_config_str, to_toml, StageSpec};
use viaflow::Error;

fn project(d: f64, sigma: f64, points: usize, f_lo: f64, decades: u32, suffix: &str) -> String {
    let scale = match suffix {
        "um" => 1e6,
        "mm" => 1e3,
        _ => 1.0,
    };
    format!(
        r#"
[materials.m]
conductivity = {sigma:e}
thermal_conductivity = 1
heat_capacity = 1

[cross_sections.w]
material = "m"
shape = {{ kind = "circle", diameter = "{}{suffix}" }}

[stages.z.extract_z]
variants = [{{ name = "w", cross_section = "w" }}]
frequencies = {{ start = {f_lo:e}, stop = {:e}, points = {points} }}

[scenarios.s]
stages = ["z"]
"#,
        d * scale,
        f_lo * 10f64.powi(decades as i32)
    )
}

proptest! {
    #[test]
    fn serialize_is_idempotent(
        d in 1e-7f64..1e-3,
        sigma in 1.0f64..1e8,
        points in 2usize..200,
        f_lo in 1.0f64..1e6,
        decades in 1u32..6,
        suffix in prop::sample::select(vec!["", "um", "mm"]),
    ) {
        let cfg = parse_config_str(&project(d, sigma, points, f_lo, decades, suffix)).unwrap();
        let once = to_toml(&cfg).unwrap();
        let again = parse_config_str(&once).unwrap();
        prop_assert_eq!(&once, &to_toml(&again).unwrap());
        let StageSpec::ExtractZ(z) = &again.stages["z"] else { panic!("stage kind changed") };
        prop_assert_eq!(z.frequencies.points, points);
        prop_assert_eq!(again.materials["m"].conductivity.0, sigma);
    }

    #[test]
    fn suffix_scales_value(v in 0.001f64..1000.0) {
        let a = parse_config_str(&project(v * 1e-6, 1.0, 3, 1.0, 2, "um")).unwrap();
        let b = parse_config_str(&project(v * 1e-3, 1.0, 3, 1.0, 2, "mm")).unwrap();
        let d = |c: &viaflow::interface::ProjectConfig| to_toml(c).unwrap();
        let (ta, tb) = (d(&a), d(&b));
        let pick = |t: &str| -> f64 {
            t.lines().find_map(|l| l.strip_prefix("diameter = ")).unwrap().parse().unwrap()
        };
        prop_assert!((pick(&ta) / pick(&tb) - 1e-3).abs() < 1e-12);
    }
}

#[test]
fn demo_configuration_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = parse_config(&path).unwrap();
    for s in ["fig4", "fig7_8", "fig9", "fig10", "fig11", "fig13", "mor", "etherm", "circuit"] {
        assert!(cfg.scenarios.contains_key(s), "{s}");
    }
}

#[test]
fn errors_carry_line_and_column() {
    let text = "[materials.m]\nconductivity = 1\n\n[cross_sections.w]\nmaterial = \"m\"\nshape = { kind = \"circle\", diameter = 2um, colour = 1 }\n";
    match parse_config_str(text) {
        Err(Error::Config { location: Some(loc), .. }) => assert_eq!(loc.line, 6),
        other => panic!("{other:?}"),
    }
}
