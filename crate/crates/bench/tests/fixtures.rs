use pwdft_bench::{bilayer, pseudos, rocksalt};

#[test]
fn fixtures_are_well_formed() {
    let cell = bilayer(3.7).unwrap();
    assert_eq!(cell.n_atoms(), 4);
    assert!((cell.interlayer_distance().unwrap() - 3.7).abs() < 1e-12);
    assert_eq!(pseudos(&cell).unwrap().len(), 3);
    let (cell, q) = rocksalt().unwrap();
    assert_eq!(cell.n_atoms(), 8);
    assert_eq!(q.iter().sum::<f64>(), 0.0);
}
