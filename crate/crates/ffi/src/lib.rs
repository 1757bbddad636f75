//! C ABI over the viaflow toolkit.
//!
//! Every fallible call returns a [`VfStatus`]; on failure the message is
//! available from [`vf_last_error`] on the same thread. Handles are opaque
//! and owned by the caller until passed to their `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use viaflow::circuit::{dc_solve, parse_netlist, DcResult, Netlist, NetlistContext};
use viaflow::em::{discretize_filaments, sweep_frequency, DEFAULT_REFERENCE_RADIUS};
use viaflow::interface::config::{parse_config, parse_config_str, to_toml};
use viaflow::interface::{run_scenario, ProjectConfig, RunOptions};
use viaflow::model::{build_cross_section, CrossSection, MaskOptions};
use viaflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfStatus {
    Ok = 0,
    Config = 1,
    Solver = 2,
    Io = 3,
    NullArgument = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

/// Parsed project configuration.
pub struct VfProject {
    config: ProjectConfig,
    base_dir: PathBuf,
}

/// Parsed circuit netlist.
pub struct VfNetlist {
    netlist: Netlist,
}

/// DC operating point of a netlist.
pub struct VfDcSolution {
    result: DcResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: &Error) -> VfStatus {
    set_error(e.to_string());
    match e.exit_code() {
        1 => VfStatus::Config,
        3 => VfStatus::Io,
        _ => VfStatus::Solver,
    }
}

/// Runs `f`, converting panics into [`VfStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), VfStatus>) -> VfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            VfStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, VfStatus> {
    if p.is_null() {
        set_error(format!("`{what}` is null"));
        return Err(VfStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{what}` is not valid UTF-8"));
        VfStatus::InvalidUtf8
    })
}

fn nonnull<T>(p: *const T, what: &str) -> Result<(), VfStatus> {
    if p.is_null() {
        set_error(format!("`{what}` is null"));
        Err(VfStatus::NullArgument)
    } else {
        Ok(())
    }
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn vf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn vf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by the library.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses configuration text; relative paths resolve against `base_dir` (may be null).
///
/// # Safety
/// `text` and non-null `base_dir` are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn vf_project_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut VfProject,
) -> VfStatus {
    guard(|| {
        nonnull(out, "out")?;
        let t = cstr(text, "text")?;
        let base = if base_dir.is_null() { "." } else { cstr(base_dir, "base_dir")? };
        let config = parse_config_str(t).map_err(|e| fail(&e))?;
        *out = Box::into_raw(Box::new(VfProject {
            config,
            base_dir: PathBuf::from(base),
        }));
        Ok(())
    })
}

/// Loads a configuration file; relative paths resolve against its directory.
///
/// # Safety
/// `path` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn vf_project_load(path: *const c_char, out: *mut *mut VfProject) -> VfStatus {
    guard(|| {
        nonnull(out, "out")?;
        let p = Path::new(cstr(path, "path")?);
        let config = parse_config(p).map_err(|e| fail(&e))?;
        let base_dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
        *out = Box::into_raw(Box::new(VfProject { config, base_dir }));
        Ok(())
    })
}

/// # Safety
/// `p` is null or a live project handle.
#[no_mangle]
pub unsafe extern "C" fn vf_project_free(p: *mut VfProject) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of scenarios in the project.
///
/// # Safety
/// `p` is a live project handle.
#[no_mangle]
pub unsafe extern "C" fn vf_project_scenario_count(p: *const VfProject) -> usize {
    p.as_ref().map_or(0, |p| p.config.scenarios.len())
}

/// Canonical TOML of the project in SI units; free with [`vf_string_free`].
///
/// # Safety
/// `p` is a live project handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn vf_project_to_toml(p: *const VfProject, out: *mut *mut c_char) -> VfStatus {
    guard(|| {
        nonnull(p, "project")?;
        nonnull(out, "out")?;
        let s = to_toml(&(*p).config).map_err(|e| fail(&e))?;
        *out = CString::new(s).expect("TOML has no NULs").into_raw();
        Ok(())
    })
}

/// Runs a scenario into `out_dir/<scenario>/`. `threads` of 0 uses all cores.
///
/// # Safety
/// `p` is a live project handle; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn vf_project_run(
    p: *const VfProject,
    scenario: *const c_char,
    out_dir: *const c_char,
    threads: u32,
) -> VfStatus {
    guard(|| {
        nonnull(p, "project")?;
        let p = &*p;
        let name = cstr(scenario, "scenario")?;
        let mut opts = RunOptions::new(cstr(out_dir, "out_dir")?);
        opts.threads = threads as usize;
        opts.base_dir = p.base_dir.clone();
        run_scenario(&p.config, name, &opts).map_err(|e| fail(&e))?;
        Ok(())
    })
}

/// Parses a netlist; file references resolve against `base_dir` (may be null).
///
/// # Safety
/// `text` and non-null `base_dir` are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn vf_netlist_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut VfNetlist,
) -> VfStatus {
    guard(|| {
        nonnull(out, "out")?;
        let t = cstr(text, "text")?;
        let ctx = NetlistContext {
            base_dir: if base_dir.is_null() { None } else { Some(PathBuf::from(cstr(base_dir, "base_dir")?)) },
            ..NetlistContext::default()
        };
        let netlist = parse_netlist(t, &ctx).map_err(|e| fail(&e))?;
        *out = Box::into_raw(Box::new(VfNetlist { netlist }));
        Ok(())
    })
}

/// # Safety
/// `n` is null or a live netlist handle.
#[no_mangle]
pub unsafe extern "C" fn vf_netlist_free(n: *mut VfNetlist) {
    if !n.is_null() {
        drop(Box::from_raw(n));
    }
}

/// DC operating point.
///
/// # Safety
/// `n` is a live netlist handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn vf_netlist_dc(n: *const VfNetlist, out: *mut *mut VfDcSolution) -> VfStatus {
    guard(|| {
        nonnull(n, "netlist")?;
        nonnull(out, "out")?;
        let result = dc_solve(&(*n).netlist).map_err(|e| fail(&e))?;
        *out = Box::into_raw(Box::new(VfDcSolution { result }));
        Ok(())
    })
}

/// Voltage of `node` in volts.
///
/// # Safety
/// `s` is a live solution handle; `node` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn vf_dc_voltage(s: *const VfDcSolution, node: *const c_char, out: *mut f64) -> VfStatus {
    guard(|| {
        nonnull(s, "solution")?;
        nonnull(out, "out")?;
        let name = cstr(node, "node")?;
        match (*s).result.voltage(name) {
            Some(v) => {
                *out = v;
                Ok(())
            }
            None => Err(fail(&Error::Reference(format!("node `{name}` is not in the netlist")))),
        }
    })
}

/// KCL residual of the solution, A.
///
/// # Safety
/// `s` is a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn vf_dc_kcl_residual(s: *const VfDcSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.result.kcl_residual)
}

/// # Safety
/// `s` is null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn vf_dc_free(s: *mut VfDcSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Per-unit-length resistance (Ω/m) of a round wire at `n` strictly
/// increasing frequencies, by the filament method on a `cell_size` grid.
///
/// # Safety
/// `frequencies` holds `n` values and `out` has room for `n`.
#[no_mangle]
pub unsafe extern "C" fn vf_wire_resistance(
    diameter: f64,
    conductivity: f64,
    cell_size: f64,
    frequencies: *const f64,
    n: usize,
    out: *mut f64,
) -> VfStatus {
    guard(|| {
        nonnull(frequencies, "frequencies")?;
        nonnull(out, "out")?;
        let f = std::slice::from_raw_parts(frequencies, n);
        let r = (|| {
            let opts = MaskOptions {
                preserve_area: true,
                ..MaskOptions::new(cell_size)
            };
            let mask = build_cross_section(&CrossSection::circle_diameter(diameter), &opts)?;
            let sys = discretize_filaments(&mask, &[conductivity], DEFAULT_REFERENCE_RADIUS)?;
            sweep_frequency(&sys, f)
        })()
        .map_err(|e| fail(&e))?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&r.r_eff);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn divider_through_handles() {
        let text = c("V1 a 0 2\nR1 a b 1k\nR2 b 0 1k\n");
        let mut net = ptr::null_mut();
        let mut dc = ptr::null_mut();
        let mut v = 0.0;
        unsafe {
            assert_eq!(vf_netlist_parse(text.as_ptr(), ptr::null(), &mut net), VfStatus::Ok);
            assert_eq!(vf_netlist_dc(net, &mut dc), VfStatus::Ok);
            assert_eq!(vf_dc_voltage(dc, c("b").as_ptr(), &mut v), VfStatus::Ok);
            assert!(vf_dc_kcl_residual(dc) < 1e-9);
            vf_dc_free(dc);
            vf_netlist_free(net);
        }
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors_set_message_and_code() {
        let mut p = ptr::null_mut();
        let bad = c("[materials.x]\ncolour = 1\n");
        let s = unsafe { vf_project_parse(bad.as_ptr(), ptr::null(), &mut p) };
        assert_eq!(s, VfStatus::Config);
        assert!(p.is_null());
        let msg = unsafe { CStr::from_ptr(vf_last_error()) }.to_str().unwrap();
        assert!(msg.contains("colour"), "{msg}");
        let s = unsafe { vf_project_parse(ptr::null(), ptr::null(), &mut p) };
        assert_eq!(s, VfStatus::NullArgument);
    }

    #[test]
    fn version_is_static() {
        let v = unsafe { CStr::from_ptr(vf_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
