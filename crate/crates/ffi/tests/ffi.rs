use std::ffi::{CStr, CString};
use std::ptr;

use rdsnet_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rdsnet_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn total_from_known_and_errors() {
    let mut out = 0.0;
    assert_eq!(
        unsafe { rdsnet_total_from_known(0.304, 1225, &mut out) },
        RdsnetStatus::Ok
    );
    assert!((out - 535.0575).abs() < 1e-3);
    assert_eq!(last_error(), "");

    assert_eq!(
        unsafe { rdsnet_total_from_known(1.0, 1225, &mut out) },
        RdsnetStatus::Undefined
    );
    assert!(last_error().contains("boundary"));
    assert_eq!(
        unsafe { rdsnet_total_from_known(0.3, 0, &mut out) },
        RdsnetStatus::Validation
    );
    assert_eq!(
        unsafe { rdsnet_total_from_known(0.3, 10, ptr::null_mut()) },
        RdsnetStatus::NullPointer
    );
}

#[test]
fn simulate_and_estimate_through_handles() {
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(rdsnet_network_reference(1, &mut net), RdsnetStatus::Ok);
        assert_eq!(rdsnet_network_node_count(net), 2035);
        let mut sizes = [0usize; 2];
        assert_eq!(rdsnet_network_group_sizes(net, sizes.as_mut_ptr()), RdsnetStatus::Ok);
        assert_eq!(sizes, [597, 1438]);

        let mut sample = ptr::null_mut();
        assert_eq!(rdsnet_simulate_rds(net, 10, 246, 3, 7, &mut sample), RdsnetStatus::Ok);
        assert_eq!(rdsnet_sample_len(sample), 246);
        assert!(rdsnet_sample_max_wave(sample) >= 1);

        let mut a = RdsnetTotal::default();
        let mut b = RdsnetTotal::default();
        assert_eq!(
            rdsnet_estimate_total(sample, 1225, 200, 0.95, 3, &mut a),
            RdsnetStatus::Ok
        );
        assert_eq!(
            rdsnet_estimate_total(sample, 1225, 200, 0.95, 3, &mut b),
            RdsnetStatus::Ok
        );
        assert_eq!(a, b);
        assert!(a.ci_low <= a.total && a.total <= a.ci_high);
        assert_eq!(a.n, 246);

        // round trip through the sample table
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("s.csv").to_str().unwrap()).unwrap();
        assert_eq!(rdsnet_sample_write_csv(sample, path.as_ptr()), RdsnetStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(rdsnet_sample_read_csv(path.as_ptr(), 3, &mut back), RdsnetStatus::Ok);
        assert_eq!(rdsnet_sample_len(back), 246);

        rdsnet_sample_free(back);
        rdsnet_sample_free(sample);
        rdsnet_network_free(net);
    }
}

#[test]
fn bad_inputs_report_status_and_message() {
    unsafe {
        let mut sample = ptr::null_mut();
        assert_eq!(
            rdsnet_simulate_rds(ptr::null(), 1, 10, 3, 0, &mut sample),
            RdsnetStatus::NullPointer
        );
        let missing = CString::new("/nonexistent/sample.csv").unwrap();
        assert_eq!(
            rdsnet_sample_read_csv(missing.as_ptr(), 3, &mut sample),
            RdsnetStatus::Validation
        );
        assert!(!last_error().is_empty());
        assert!(sample.is_null());

        let mut net = ptr::null_mut();
        assert_eq!(rdsnet_network_reference(2, &mut net), RdsnetStatus::Ok);
        assert_eq!(
            rdsnet_simulate_rds(net, 0, 10, 3, 0, &mut sample),
            RdsnetStatus::Validation
        );
        assert!(last_error().contains("seed"));
        rdsnet_network_free(net);

        // freeing null is a no-op
        rdsnet_network_free(ptr::null_mut());
        rdsnet_sample_free(ptr::null_mut());
        assert_eq!(rdsnet_network_node_count(ptr::null()), 0);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rdsnet.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in [
        "rdsnet_estimate_total",
        "rdsnet_network_free",
        "RDSNET_STATUS_UNDEFINED = 3",
    ] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
