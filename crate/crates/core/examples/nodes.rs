//! Lattice trial nodes on the unit disk with fill distance and separation radius.

use kernel_lsq::geometry::{regular_disk_nodes, DiskDomain};

fn main() -> kernel_lsq::Result<()> {
    let d = DiskDomain::unit();
    println!("{:>10} {:>6} {:>12} {:>12} {:>8}", "spacing", "N", "h_fill", "q_sep", "rho");
    for k in [1u32, 2, 4, 6, 8] {
        let spacing = 0.25 / k as f64;
        let nodes = regular_disk_nodes(&d, spacing)?;
        println!(
            "{spacing:>10.5} {:>6} {:>12.5e} {:>12.5e} {:>8.3}",
            nodes.len(),
            nodes.h_fill,
            nodes.q_sep,
            nodes.mesh_ratio
        );
    }
    let mut csv = Vec::new();
    regular_disk_nodes(&d, 0.9)?.write_csv(&mut csv)?;
    print!("spacing 0.9 nodes:\n{}", String::from_utf8_lossy(&csv));
    Ok(())
}
