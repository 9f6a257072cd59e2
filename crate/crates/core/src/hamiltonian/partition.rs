use super::pauli::{PauliString, PauliSum};
use crate::error::{QksdError, Result};
use crate::linalg::CMatrix;

/// One anticommuting group `β_j Û_j` with `Û_j = Σ_k α'_k P_k`, `Σ α'_k² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub beta: f64,
    pub members: Vec<(f64, PauliString)>,
}

impl Fragment {
    /// The unit-norm fragment `Û_j` as a Pauli sum.
    pub fn unitary(&self, n_qubits: usize) -> Result<PauliSum> {
        PauliSum::new(n_qubits, self.members.clone())
    }
}

/// `H - c·I = Σ_j β_j Û_j`; the identity part `c` is carried separately and
/// never enters a fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryPartition {
    n_qubits: usize,
    groups: Vec<Fragment>,
    identity_offset: f64,
    beta_norm: f64,
    alpha_norm: f64,
}

impl UnitaryPartition {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn groups(&self) -> &[Fragment] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `‖H‖_β = Σ_j β_j`.
    pub fn beta_norm(&self) -> f64 {
        self.beta_norm
    }

    /// `‖H‖_α = Σ_k |α_k|` over non-identity terms.
    pub fn alpha_norm(&self) -> f64 {
        self.alpha_norm
    }

    pub fn identity_offset(&self) -> f64 {
        self.identity_offset
    }

    pub fn betas(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.beta).collect()
    }

    /// Dense `Û_j` for every fragment.
    pub fn dense_unitaries(&self) -> Result<Vec<CMatrix>> {
        self.groups
            .iter()
            .map(|g| g.unitary(self.n_qubits)?.to_dense())
            .collect()
    }

    /// `Σ_j β_j Û_j` (without the identity offset) as a Pauli sum.
    pub fn reconstruct(&self) -> Result<PauliSum> {
        let terms = self
            .groups
            .iter()
            .flat_map(|g| g.members.iter().map(move |(a, s)| (g.beta * a, s.clone())))
            .collect();
        PauliSum::new(self.n_qubits, terms)
    }
}

/// Greedy sorted-insertion grouping: terms by descending `|α|` (stable on the
/// original index) join the first group whose every member they anticommute
/// with, otherwise open a new group.
pub fn sorted_insertion_partition(h: &PauliSum) -> Result<UnitaryPartition> {
    let mut order: Vec<&(f64, PauliString)> = h.non_identity_terms().collect();
    if order.is_empty() {
        return Err(QksdError::InvalidInput(
            "partitioning needs at least one non-identity term".into(),
        ));
    }
    order.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));

    let mut raw: Vec<Vec<(f64, PauliString)>> = Vec::new();
    for (coeff, string) in order {
        let slot = raw
            .iter_mut()
            .find(|group| group.iter().all(|(_, m)| m.anticommutes_with(string)));
        match slot {
            Some(group) => group.push((*coeff, string.clone())),
            None => raw.push(vec![(*coeff, string.clone())]),
        }
    }

    let groups: Vec<Fragment> = raw
        .into_iter()
        .map(|members| {
            let beta = members.iter().map(|(a, _)| a * a).sum::<f64>().sqrt();
            let members = members.into_iter().map(|(a, s)| (a / beta, s)).collect();
            Fragment { beta, members }
        })
        .collect();
    let beta_norm = groups.iter().map(|g| g.beta).sum();
    Ok(UnitaryPartition {
        n_qubits: h.n_qubits(),
        groups,
        identity_offset: h.identity_coefficient(),
        beta_norm,
        alpha_norm: h.alpha_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff};

    #[test]
    fn single_qubit_paulis_share_one_group() {
        let h = PauliSum::from_labels(&[(0.5, "X"), (0.3, "Y"), (0.2, "Z")]).unwrap();
        let p = sorted_insertion_partition(&h).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.beta_norm() - 0.38_f64.sqrt()).abs() < 1e-12);
        assert!((p.beta_norm() - 0.61644).abs() < 1e-5);
        assert!((p.alpha_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn commuting_terms_split() {
        let h = PauliSum::from_labels(&[(0.5, "ZI"), (0.3, "IZ")]).unwrap();
        let p = sorted_insertion_partition(&h).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.beta_norm() - 0.8).abs() < 1e-15);
        assert!((p.alpha_norm() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ties_keep_original_order() {
        let h = PauliSum::from_labels(&[(0.3, "ZI"), (-0.3, "XI"), (0.3, "IZ")]).unwrap();
        let p = sorted_insertion_partition(&h).unwrap();
        assert_eq!(p.groups()[0].members[0].1.to_string(), "ZI");
        assert_eq!(p.groups()[0].members[1].1.to_string(), "XI");
        assert_eq!(p.groups()[1].members[0].1.to_string(), "IZ");
    }

    #[test]
    fn identity_only_or_empty_is_rejected() {
        let empty = PauliSum::new(2, vec![]).unwrap();
        assert!(sorted_insertion_partition(&empty).is_err());
        let id = PauliSum::from_labels(&[(1.0, "II")]).unwrap();
        assert!(sorted_insertion_partition(&id).is_err());
    }

    #[test]
    fn fragments_are_unitary_and_reconstruct() {
        let h = PauliSum::from_labels(&[
            (0.4, "XX"),
            (0.3, "YZ"),
            (-0.2, "ZI"),
            (0.1, "IY"),
            (0.7, "II"),
        ])
        .unwrap();
        let p = sorted_insertion_partition(&h).unwrap();
        let mut total = CMatrix::zeros(4, 4);
        for (g, u) in p.groups().iter().zip(p.dense_unitaries().unwrap()) {
            assert!(max_abs_diff(&(u.adjoint() * &u), &identity(4)) < 1e-12);
            total += u * num_complex::Complex64::new(g.beta, 0.0);
        }
        let traceless = h.without_identity().to_dense().unwrap();
        assert!(max_abs_diff(&total, &traceless) < 1e-12);
        assert_eq!(p.identity_offset(), 0.7);
    }
}
