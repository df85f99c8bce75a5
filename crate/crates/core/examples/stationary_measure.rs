//! Transition matrix on the cover cells, its strongly connected core and
//! stationary vector.

use znl::cover::build_cover;
use znl::systems::{generate_lorenz63, FlowSpec, Lorenz63Params};
use znl::transitions::{build_transitions, check_irreducible, stationary_measure, TransitionModel};

fn main() -> znl::Result<()> {
    let s = generate_lorenz63(Lorenz63Params::default(), &FlowSpec::standard(vec![1.0, 1.0, 1.0]), 10_000)?;
    let cover = build_cover(&s, 0.1)?;
    let raw = TransitionModel::from_symbol_paths(cover.len(), &[cover.labels(&s)])?;
    println!("{} cells, {} strongly connected components before trimming", cover.len(), raw.components().len());

    let chain = build_transitions(&s, &cover)?;
    println!(
        "core: {} states, {} edges, {} cells dropped, irreducible {}",
        chain.len(),
        chain.edge_count(),
        chain.dropped_cells().len(),
        check_irreducible(&chain)
    );

    let est = stationary_measure(&chain, 1e-10, 1_000_000)?;
    let mut top: Vec<(usize, f64)> = est.pi.iter().copied().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("converged in {} iterations, residual {:.2e}, gap {:?}", est.iterations, est.residual, est.gap);
    for (state, mass) in top.iter().take(5) {
        println!("  state {state:>5} (cell {:>5}) mass {mass:.5}", chain.cells()[*state]);
    }
    Ok(())
}
