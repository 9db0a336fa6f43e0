use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use pwdft::kgrid::monkhorst_pack;
use pwdft::pseudo::{grimme_d2, D2Params, NonlocalProjectors, ProjectorTables, DEFAULT_D2_CUTOFF};
use pwdft::pwbasis::{build_basis, fft_grid, FftGrid};
use pwdft::scf::{ewald_energy, Hamiltonian};
use pwdft_bench::{bilayer, pseudos, rocksalt};

fn mp_grid(c: &mut Criterion) {
    c.bench_function("monkhorst_pack 10x10x1", |b| {
        b.iter(|| monkhorst_pack(10, 10, 1).unwrap())
    });
    c.bench_function("monkhorst_pack 24x24x24", |b| {
        b.iter(|| monkhorst_pack(24, 24, 24).unwrap())
    });
}

fn ewald(c: &mut Criterion) {
    let (cell, q) = rocksalt().unwrap();
    c.bench_function("ewald rocksalt", |b| {
        b.iter(|| ewald_energy(&cell, &q, false).unwrap())
    });
    let cell = bilayer(3.7).unwrap();
    let q = cell.valence().to_vec();
    c.bench_function("ewald bilayer", |b| {
        b.iter(|| ewald_energy(&cell, &q, true).unwrap())
    });
}

fn d2(c: &mut Criterion) {
    let params = D2Params::bundled();
    let cell = bilayer(3.7).unwrap();
    let mut g = c.benchmark_group("grimme_d2 bilayer");
    for cutoff in [50.0, DEFAULT_D2_CUTOFF] {
        g.bench_with_input(BenchmarkId::from_parameter(cutoff), &cutoff, |b, &r| {
            b.iter(|| grimme_d2(&cell, &params, r).unwrap())
        });
    }
    g.finish();
}

fn hamiltonian(c: &mut Criterion) {
    let cell = bilayer(3.7).unwrap();
    let ps = pseudos(&cell).unwrap();
    let mut g = c.benchmark_group("H apply bilayer");
    g.sample_size(20);
    for ecut in [15.0, 30.0] {
        let dims = fft_grid(&cell, 4.0 * ecut);
        let basis = build_basis(&cell, [0.0; 3], ecut).unwrap();
        let fft = FftGrid::new(dims);
        let tables = ProjectorTables::new(&ps, 2.0 * ecut.sqrt() + 1.0);
        let nl = NonlocalProjectors::build(&cell, &ps, &tables, &basis).unwrap();
        let v: Vec<f64> = (0..fft.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = Hamiltonian::new(&basis, &fft, &v, &nl).unwrap();
        let psi: Vec<Complex64> = (0..basis.len())
            .map(|i| Complex64::new((i as f64).cos(), (i as f64).sin()))
            .collect();
        g.bench_with_input(BenchmarkId::new("ecut_ry", ecut), &psi, |b, psi| {
            b.iter(|| h.apply(psi).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, mp_grid, ewald, d2, hamiltonian);
criterion_main!(benches);
