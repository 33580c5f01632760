//! Exact distance by enumerating couplings, with the family minima and the
//! decomposition check.

use mergetree::oracle::{enumerate_couplings, exact_interleaving, verify_decomposition, FamilyKind, OracleConfig};
use mergetree::tree::tree;

fn main() {
    let t = tree(&[("a", 0.0, Some("m")), ("b", 0.4, Some("m")), ("c", 0.9, Some("r")), ("m", 1.5, Some("r")), ("r", 2.5, None)]).unwrap();
    let g = tree(&[("a", 0.1, Some("r")), ("b", 1.2, Some("r")), ("r", 2.0, None)]).unwrap();
    let cfg = OracleConfig::default();
    let (d, w) = exact_interleaving(&t, &g, &cfg).unwrap();
    println!("d_I = {d}, witness {:?}", w.to_file(&t, &g).pairs);
    for kind in [FamilyKind::All, FamilyKind::Rooted, FamilyKind::RootedSpecial] {
        let f = enumerate_couplings(&t, &g, kind, &cfg).unwrap();
        println!("{kind:?}: {} couplings, min {}", f.members.len(), f.min);
    }
    let rep = verify_decomposition(&t, &g, &cfg).unwrap();
    println!("antichains {}, special min {}, lower {}, ok {}", rep.antichains, rep.special_min, rep.lower, rep.check().is_ok());
    let big = tree(&[("1", 0.0, Some("r")), ("2", 0.1, Some("r")), ("3", 0.2, Some("r")), ("4", 0.3, Some("r")), ("5", 0.4, Some("r")), ("6", 0.5, Some("r")), ("r", 1.0, None)]).unwrap();
    println!("six leaves: {}", exact_interleaving(&big, &g, &cfg).unwrap_err());
}
