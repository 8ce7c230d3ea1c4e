use std::path::{Path, PathBuf};
use std::process::Command;

const HEADER: &str = include_str!("../include/xcdtl.h");

const EXPORTS: &[&str] = &[
    "xcdtl_last_error_message",
    "xcdtl_version",
    "xcdtl_num_features",
    "xcdtl_feature_name",
    "xcdtl_graph_new",
    "xcdtl_graph_load_edge_list",
    "xcdtl_graph_free",
    "xcdtl_graph_node_count",
    "xcdtl_graph_edge_count",
    "xcdtl_graph_features",
    "xcdtl_graph_modularity",
    "xcdtl_iforest_fit",
    "xcdtl_iforest_score",
    "xcdtl_iforest_free",
    "xcdtl_detection_metrics",
    "xcdtl_transfer_gain",
    "xcdtl_iit_score",
    "xcdtl_kruskal_wallis",
];

#[test]
fn header_declares_every_export() {
    assert!(HEADER.starts_with("#ifndef XCDTL_H"));
    for name in EXPORTS {
        assert!(HEADER.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(HEADER.contains("typedef struct XcdtlGraph XcdtlGraph;"));
    assert!(HEADER.contains("XCDTL_STATUS_OK = 0"));
}

fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "xcdtl.h"

int main(void) {
    uint32_t edges[] = {0, 1, 1, 2, 2, 0, 2, 3};
    XcdtlGraph *g = NULL;
    if (xcdtl_graph_new(4, edges, 4, 0, &g) != XCDTL_STATUS_OK) return 1;
    double v[12];
    uint8_t m[12];
    if (xcdtl_graph_features(g, v, m) != XCDTL_STATUS_OK) return 2;
    xcdtl_graph_free(g);
    if (v[1] != 4.0 || fabs(v[4] - 0.6) > 1e-12) return 3;
    if (xcdtl_graph_new(2, edges, 4, 0, &g) != XCDTL_STATUS_INVALID_INPUT) return 4;
    if (xcdtl_last_error_message() == NULL) return 5;
    printf("%s %zu\n", xcdtl_version(), xcdtl_num_features());
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let lib = profile_dir().join("libxcdtl.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("capi");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), format!("{} 12", env!("CARGO_PKG_VERSION")));
}
