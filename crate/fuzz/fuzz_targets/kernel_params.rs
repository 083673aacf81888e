#![no_main]

use libfuzzer_sys::fuzz_target;

use asyncgp_core::KernelSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // First comma-free token selects the family, the rest are parameters.
    let (family, params) = text.split_once(';').unwrap_or(("se", text));
    if let Ok(spec) = KernelSpec::from_params(family, params) {
        // Any spec the parser accepts must evaluate without panicking, and
        // symmetrically when it evaluates at all.
        let x = vec![0.25; spec.dim()];
        let y = vec![-0.5; spec.dim()];
        if let (Ok(a), Ok(b)) = (spec.eval(&x, &y), spec.eval(&y, &x)) {
            assert!(a.total_cmp(&b).is_eq(), "asymmetric kernel: {a} vs {b}");
        }
    }
});
