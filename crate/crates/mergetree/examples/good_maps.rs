//! Maps induced by a coupling: evaluate them, check the good-map properties,
//! and recover a coupling from the vertex images.

use mergetree::coupling::{Coupling, CouplingContext, Side};
use mergetree::maps::{check_eps_good, composition_check, extract_coupling, InducedMap};
use mergetree::tree::tree;

fn main() {
    let t = tree(&[("a", 0.0, Some("r")), ("b", 1.0, Some("r")), ("r", 2.0, None)]).unwrap();
    let g = tree(&[("a'", 0.0, Some("r'")), ("b'", 1.0, Some("r'")), ("r'", 3.0, None)]).unwrap();
    let c = Coupling::from_ids(&t, &g, &[("a", "a'"), ("b", "b'"), ("r", "r'")]).unwrap();
    let ctx = CouplingContext::new(&t, &g, &c);
    let eps = ctx.norm();
    let alpha = InducedMap::good(&ctx, Side::T, eps).unwrap();
    let beta = InducedMap::good(&ctx, Side::G, eps).unwrap();
    for v in 0..t.len() {
        println!("alpha({}) = {}", t.id(v), alpha.eval_vertex(v).unwrap().label(&g));
    }
    let ra = check_eps_good(&alpha, 4).unwrap();
    let rb = check_eps_good(&beta, 4).unwrap();
    println!("alpha good: {} (P1 residual {:.2e}), beta good: {}", ra.pass, ra.p1_max_residual, rb.pass);
    let (res, bad) = composition_check(&alpha, &beta, 4).unwrap();
    println!("beta∘alpha residual {res:.2e}, points below the 2ε shift: {bad}");
    let back = extract_coupling(&t, &g, &alpha.vertex_images().unwrap(), eps).unwrap();
    println!("extracted {:?} with norm {}", back.to_file(&t, &g).pairs, CouplingContext::new(&t, &g, &back).norm());
}
