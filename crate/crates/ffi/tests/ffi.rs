use std::ffi::CStr;
use std::ptr;

use mwi_ffi::*;

fn measure(dim: usize, points: &[f64], weights: &[f64]) -> *mut MwiMeasure {
    let mut out = ptr::null_mut();
    let s = unsafe { mwi_measure_new(dim, weights.len(), points.as_ptr(), weights.as_ptr(), &mut out) };
    assert_eq!(s, MwiStatus::Ok);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mwi_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn two_atom_pair_through_the_c_api() {
    let mu = measure(1, &[-1.0, 1.0], &[0.5, 0.5]);
    let nu = measure(1, &[-2.0, 2.0], &[0.5, 0.5]);
    unsafe {
        assert_eq!(mwi_measure_len(mu), 2);
        assert_eq!(mwi_measure_dim(nu), 1);

        let mut w = 0.0;
        assert_eq!(mwi_wasserstein(mu, nu, 1.0, 2.0, &mut w), MwiStatus::Ok);
        assert!((w - 1.0).abs() < 1e-15);

        let mut m = 0.0;
        let mut c = ptr::null_mut();
        assert_eq!(mwi_martingale_cost(mu, nu, 1.0, 2.0, &mut m, &mut c), MwiStatus::Ok);
        assert!((m - 1.5).abs() < 1e-9);
        assert_eq!((mwi_coupling_rows(c), mwi_coupling_cols(c)), (2, 2));
        let mut buf = [0.0; 4];
        assert_eq!(mwi_coupling_weights(c, buf.as_mut_ptr(), 4), MwiStatus::Ok);
        let expected = [0.375, 0.125, 0.125, 0.375];
        assert!(buf.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(mwi_coupling_weights(c, buf.as_mut_ptr(), 3), MwiStatus::Domain);
        mwi_coupling_free(c);

        let mut itm = 0.0;
        assert_eq!(mwi_itm_cost(mu, nu, 2.0, MwiQChoice::Comonotone, &mut itm), MwiStatus::Ok);
        assert!((itm - 3.0).abs() < 1e-12);

        let mut ordered = false;
        assert_eq!(mwi_cx_check(mu, nu, &mut ordered), MwiStatus::Ok);
        assert!(ordered);
        assert_eq!(mwi_cx_check(nu, mu, &mut ordered), MwiStatus::Ok);
        assert!(!ordered);

        let mut sigma = 0.0;
        let mut centre = [f64::NAN];
        assert_eq!(mwi_centred_moment(nu, 1.5, 2.0, &mut sigma, centre.as_mut_ptr()), MwiStatus::Ok);
        assert!((sigma - 2.0).abs() < 1e-9);

        let mut report = MwiReport::default();
        assert_eq!(mwi_verify_pair(mu, nu, 1.0, 2.0, MwiCase::OneD, 0.0, &mut report), MwiStatus::Ok);
        assert!((report.ratio - 1.5).abs() < 1e-9);
        assert_eq!(report.bound, 2.0);
        assert!(!report.surrogate);

        assert_eq!(
            mwi_martingale_cost(nu, mu, 1.0, 2.0, &mut m, ptr::null_mut()),
            MwiStatus::NotInConvexOrder
        );
        assert!(last_error().contains("convex order"));

        mwi_measure_free(mu);
        mwi_measure_free(nu);
    }
}

#[test]
fn constants_and_errors() {
    unsafe {
        let mut k = MwiConstants::default();
        assert_eq!(mwi_k_rho(2.0, 1e-3, &mut k), MwiStatus::Ok);
        assert_eq!(k.k_est, 2.0);
        assert_eq!(mwi_k_rho(0.5, 1e-3, &mut k), MwiStatus::Domain);
        assert_eq!(mwi_k_rho(1.5, 1e-3, ptr::null_mut()), MwiStatus::NullPointer);

        let mut out = ptr::null_mut();
        let s = mwi_measure_new(1, 2, [0.0, 1.0].as_ptr(), [0.5, 0.2].as_ptr(), &mut out);
        assert_eq!(s, MwiStatus::InvalidMeasure);
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        let a = measure(1, &[0.0], &[1.0]);
        let b = measure(2, &[0.0, 0.0], &[1.0]);
        let mut w = 0.0;
        assert_eq!(mwi_wasserstein(a, b, 1.0, 2.0, &mut w), MwiStatus::DimensionMismatch);
        assert_eq!(mwi_wasserstein(a, ptr::null(), 1.0, 2.0, &mut w), MwiStatus::NullPointer);
        mwi_measure_free(a);
        mwi_measure_free(b);
        mwi_measure_free(ptr::null_mut());

        let msg = CStr::from_ptr(mwi_status_string(MwiStatus::NotInConvexOrder));
        assert_eq!(msg.to_str().unwrap(), "measures are not in the convex order");
    }
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mwi.h")).unwrap();
    for name in ["mwi_measure_new", "mwi_verify_pair", "typedef struct MwiMeasure MwiMeasure", "MWI_STATUS_OK"] {
        assert!(h.contains(name), "{name}");
    }
}
