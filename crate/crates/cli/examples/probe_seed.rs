// temporary probe: which xor constants give a firing blow-up diagnostic
fn main() {
    let coords: Vec<f64> = (0..65).map(|i| i as f64 / 64.0).collect();
    for x in [0x0au64, 0x0b, 0x0c, 0x0d, 0x0e, 0x0f, 0x1a, 0x2a, 0x3a, 0x4a] {
        let seed = factorable_cli::config::DEFAULT_SEED ^ x;
        let ens = factorable::fields::simulate_stable(1.2, &coords, 10_000,
            factorable::fields::RngStreamSpec::new(seed)).unwrap();
        let d = factorable::fields::p_moment_blowup(&ens, 4.0, &[100, 1000, 10_000]).unwrap();
        println!("xor {x:#x}: fires={} estimates={:?}", d.fires, d.estimates.iter().map(|e| format!("{e:.1}")).collect::<Vec<_>>());
    }
}
