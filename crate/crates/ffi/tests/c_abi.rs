use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use viaflow_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

const PROJECT: &str = r#"
[cross_sections.wire]
material = "copper"
shape = { kind = "circle", diameter = 4um }

[stages.z.extract_z]
variants = [{ name = "w", cross_section = "wire" }]
frequencies = { start = 1MHz, stop = 1GHz, points = 3 }
cell_size = 0.5um

[scenarios.quick]
stages = ["z"]
"#;

#[test]
fn project_round_trip_and_run() {
    let mut p = ptr::null_mut();
    let mut toml = ptr::null_mut();
    let dir = tempfile::tempdir().unwrap();
    let out = c(dir.path().to_str().unwrap());
    unsafe {
        assert_eq!(vf_project_parse(c(PROJECT).as_ptr(), ptr::null(), &mut p), VfStatus::Ok);
        assert_eq!(vf_project_scenario_count(p), 1);
        assert_eq!(vf_project_to_toml(p, &mut toml), VfStatus::Ok);
        let text = CStr::from_ptr(toml).to_str().unwrap().to_owned();
        vf_string_free(toml);
        assert!(text.contains("diameter = 0.000004"), "{text}");
        let mut q = ptr::null_mut();
        assert_eq!(vf_project_parse(c(&text).as_ptr(), ptr::null(), &mut q), VfStatus::Ok);
        vf_project_free(q);
        assert_eq!(vf_project_run(p, c("quick").as_ptr(), out.as_ptr(), 1), VfStatus::Ok);
        assert_eq!(vf_project_run(p, c("missing").as_ptr(), out.as_ptr(), 1), VfStatus::Config);
        vf_project_free(p);
    }
    assert!(dir.path().join("quick/z_impedance.csv").exists());
    assert!(dir.path().join("quick/manifest.json").exists());
}

#[test]
fn wire_resistance_matches_dc() {
    let f = [0.0, 1e6];
    let mut r = [0.0; 2];
    let (d, sigma) = (4e-6, 5.8e7);
    let s = unsafe { vf_wire_resistance(d, sigma, 0.25e-6, f.as_ptr(), 2, r.as_mut_ptr()) };
    assert_eq!(s, VfStatus::Ok);
    let r_dc = 1.0 / (sigma * std::f64::consts::PI * 0.25 * d * d);
    assert!((r[0] / r_dc - 1.0).abs() < 1e-9, "{} vs {r_dc}", r[0]);
}

#[test]
fn errors_map_to_status() {
    let mut r = [0.0; 2];
    let f = [1e9, 1e6];
    let s = unsafe { vf_wire_resistance(4e-6, 5.8e7, 0.25e-6, f.as_ptr(), 2, r.as_mut_ptr()) };
    assert_eq!(s, VfStatus::Config);
    assert!(!vf_last_error().is_null());

    let mut net = ptr::null_mut();
    let mut dc = ptr::null_mut();
    unsafe {
        let text = c("V1 a 0 1\nV2 a 0 2\nR1 a 0 1k\n");
        assert_eq!(vf_netlist_parse(text.as_ptr(), ptr::null(), &mut net), VfStatus::Ok);
        assert_eq!(vf_netlist_dc(net, &mut dc), VfStatus::Solver);
        assert!(dc.is_null());
        vf_netlist_free(net);
        assert_eq!(vf_netlist_parse(ptr::null(), ptr::null(), &mut net), VfStatus::NullArgument);
    }
}

// The test executable and the freshly built static library share <target>/<profile>/deps.
fn static_lib() -> PathBuf {
    std::env::current_exe().unwrap().with_file_name("libviaflow_ffi.a")
}

#[test]
fn c_program_links_against_header() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = static_lib();
    assert!(header_dir.join("viaflow.h").exists());
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "viaflow.h"
int main(void) {
    VfNetlist *net = NULL;
    VfDcSolution *dc = NULL;
    double v = 0.0;
    if (vf_netlist_parse("V1 a 0 3\nR1 a b 2k\nR2 b 0 1k\n", NULL, &net) != VF_STATUS_OK) return 10;
    if (vf_netlist_dc(net, &dc) != VF_STATUS_OK) return 11;
    if (vf_dc_voltage(dc, "b", &v) != VF_STATUS_OK) return 12;
    if (vf_dc_voltage(dc, "nowhere", &v) == VF_STATUS_OK) return 13;
    if (vf_last_error() == NULL) return 14;
    printf("%.12f\n", v);
    vf_dc_free(dc);
    vf_netlist_free(net);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("demo");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.000000000000");
}
