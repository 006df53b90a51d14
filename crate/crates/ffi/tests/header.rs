use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/cbm.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(text.contains("typedef struct CbmInstance CbmInstance;"));
    assert!(text.contains("CBM_STATUS_OK = 0"));
}

fn compiles_with(compiler: &str, lang: &str) -> Option<bool> {
    let status = Command::new(compiler)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
        .arg(header())
        .status()
        .ok()?;
    Some(status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    match compiles_with("cc", "c") {
        Some(ok) => assert!(ok, "header rejected by C compiler"),
        None => eprintln!("no C compiler found, skipping"),
    }
    if let Some(ok) = compiles_with("c++", "c++") {
        assert!(ok, "header rejected by C++ compiler");
    }
}
