use super::{AtomVocab, BondVocab, MolecularGraph};
use crate::error::GraphError;

fn bond_sum(g: &MolecularGraph, bonds: &BondVocab, i: usize) -> u32 {
    g.neighbors(i).map(|j| bonds.order(g.edge(i, j))).sum()
}

/// Whether setting edge `(i, j)` to `proposed` keeps both endpoints within
/// their valence. Any existing bond between `i` and `j` is replaced.
pub fn check_valency(
    g: &MolecularGraph,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    i: usize,
    j: usize,
    proposed: usize,
) -> bool {
    if proposed == bonds.no_edge() {
        return true;
    }
    let existing = bonds.order(g.edge(i, j));
    let add = bonds.order(proposed);
    [i, j]
        .iter()
        .all(|&a| bond_sum(g, bonds, a) - existing + add <= vocab.valence(g.node_type(a)))
}

/// Whole-graph check of every atom's total bond order.
pub fn valency_audit(
    g: &MolecularGraph,
    vocab: &AtomVocab,
    bonds: &BondVocab,
) -> Result<(), GraphError> {
    for i in 0..g.n() {
        let t = g.node_type(i);
        if t >= vocab.len() {
            return Err(GraphError::AtomType(t));
        }
        let total = bond_sum(g, bonds, i);
        if total > vocab.valence(t) {
            return Err(GraphError::Valency {
                atom: i,
                total,
                max: vocab.valence(t),
            });
        }
    }
    Ok(())
}

/// Unfilled valence per atom.
pub fn implicit_hydrogens(
    g: &MolecularGraph,
    vocab: &AtomVocab,
    bonds: &BondVocab,
) -> Result<Vec<u32>, GraphError> {
    valency_audit(g, vocab, bonds)?;
    Ok((0..g.n())
        .map(|i| vocab.valence(g.node_type(i)) - bond_sum(g, bonds, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carbon_with_triple_and_single() {
        let (v, b) = (AtomVocab::organic(), BondVocab::standard());
        // C0 #C1, C0 - C2, propose C0 - C3
        let g = MolecularGraph::from_bonds(vec![0, 0, 0, 0], 3, &[(0, 1, 2), (0, 2, 0)]).unwrap();
        assert!(!check_valency(&g, &v, &b, 0, 3, 0));
        assert!(check_valency(&g, &v, &b, 0, 3, b.no_edge()));
        // replacing the triple with a double is fine
        assert!(check_valency(&g, &v, &b, 0, 1, 1));
    }

    #[test]
    fn oxygen_second_single() {
        let (v, b) = (AtomVocab::organic(), BondVocab::standard());
        let g = MolecularGraph::from_bonds(vec![2, 0, 0], 3, &[(0, 1, 0)]).unwrap();
        assert!(check_valency(&g, &v, &b, 0, 2, 0));
        assert!(!check_valency(&g, &v, &b, 0, 2, 1));
    }

    #[test]
    fn hydrogens() {
        let (v, b) = (AtomVocab::organic(), BondVocab::standard());
        let c = MolecularGraph::new(vec![0], 3);
        assert_eq!(implicit_hydrogens(&c, &v, &b).unwrap(), vec![4]);
        let oh = MolecularGraph::from_bonds(vec![2, 0], 3, &[(0, 1, 0)]).unwrap();
        assert_eq!(implicit_hydrogens(&oh, &v, &b).unwrap(), vec![1, 3]);
        let bad = MolecularGraph::from_bonds(vec![2, 0, 0], 3, &[(0, 1, 1), (0, 2, 0)]).unwrap();
        assert_eq!(
            implicit_hydrogens(&bad, &v, &b),
            Err(GraphError::Valency {
                atom: 0,
                total: 3,
                max: 2
            })
        );
    }
}
