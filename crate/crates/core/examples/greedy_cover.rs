//! Cover the Henon attractor with δ-balls at several radii.

use znl::cover::{build_cover, mesh_size};
use znl::systems::{generate_henon, HenonParams};

fn main() -> znl::Result<()> {
    let s = generate_henon(HenonParams::default(), [0.0, 0.0], 10_000, 100)?;
    for delta in [0.4, 0.2, 0.1, 0.05] {
        let cover = build_cover(&s, delta)?;
        let labels = cover.labels(&s);
        let mut sizes = vec![0usize; cover.len()];
        for c in labels {
            sizes[c] += 1;
        }
        println!(
            "delta {delta:<5} cells {:>4}  mesh {:.4}  largest cell {} samples",
            cover.len(),
            mesh_size(&cover, &s),
            sizes.iter().max().unwrap()
        );
    }
    Ok(())
}
