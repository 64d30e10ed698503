//! Helium SCF at a given resolution; prints the numbers used for the
//! committed reference band.
//!
//! cargo run --release --example he_reference -- 128 12

use std::time::Instant;

use convolve_hf::hf::MolecularSystem;
use convolve_hf::scf::{solve, ScfConfig};
use convolve_hf::GridSpec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(128, |s| s.parse().expect("grid points"));
    let l: f64 = args.get(2).map_or(12.0, |s| s.parse().expect("extent"));
    let grid = GridSpec::new(n, l).expect("grid");
    let start = Instant::now();
    let r = solve(&MolecularSystem::helium(), &grid, &ScfConfig::default()).expect("scf");
    let e = r.energies;
    println!("n = {n}");
    println!("extent = {l}");
    println!("converged = {}", r.converged);
    println!("iterations = {}", r.iterations);
    println!("total_energy = {:.10}", e.total);
    println!("orbital_energy = {:.10}", r.orbitals.energies()[0]);
    println!("virial_ratio = {:.6}", e.virial_ratio);
    println!("fock_residual = {:.3e}", r.fock_residual);
    println!("orbital_sup = {:.6}", r.orbitals.max_sup());
    println!("seconds = {:.1}", start.elapsed().as_secs_f64());
}
