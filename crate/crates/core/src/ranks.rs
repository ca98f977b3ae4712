//! Empirical multivariate ranks.
//!
//! The empirical rank map of a sample `Y_1..Y_n` assigns each row a distinct
//! Halton point by solving the discrete Monge problem
//! `π* = argmin_π Σ_i ‖Y_π(i) − h_i‖²`; row `π*(i)` then has rank `h_i`.
//! In one dimension the induced order is the ordinary sort order.

use alloc::vec::Vec;

use crate::assignment::{rank_cost_matrix, solve_lsap};
use crate::error::{Error, Result};
use crate::halton::halton_block;
use crate::matrix::{Matrix, Permutation};

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRankMap {
    /// `perm(i)` is the sample row that receives target `i`.
    perm: Permutation,
    targets: Matrix,
    /// Monge cost `n⁻¹ Σ_i ‖Y_π(i) − h_i‖²` of the optimal matching.
    cost: f64,
}

impl EmpiricalRankMap {
    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Index of the Halton target held by sample row `row`.
    pub fn target_index(&self, row: usize) -> usize {
        self.perm.apply_inverse(row)
    }

    /// Rank (Halton point) of sample row `row`.
    pub fn rank_of(&self, row: usize) -> &[f64] {
        self.targets.row(self.target_index(row))
    }

    /// Ranks laid out by sample row.
    pub fn ranks(&self) -> Matrix {
        let idx: Vec<usize> = (0..self.perm.len()).map(|r| self.target_index(r)).collect();
        self.targets.select_rows(&idx)
    }
}

pub fn empirical_ranks(sample: &Matrix) -> Result<EmpiricalRankMap> {
    if sample.rows() == 0 {
        return Err(Error::invalid("rank map needs at least one row"));
    }
    sample.check_finite()?;
    let targets = halton_block(sample.rows(), sample.cols())?;
    let costs = rank_cost_matrix(sample, &targets)?;
    let a = solve_lsap(&costs)?;
    Ok(EmpiricalRankMap {
        perm: a.perm,
        targets,
        cost: a.total_cost,
    })
}

/// Permutation `r = π₂ ∘ π₁⁻¹` such that `base[r(i)]` and `latent[i]` share the same rank.
pub fn match_ranks(latent: &Matrix, base: &Matrix) -> Result<Permutation> {
    latent.check_same_shape(base)?;
    let latent_ranks = empirical_ranks(latent)?;
    let base_ranks = empirical_ranks(base)?;
    base_ranks.perm.compose(&latent_ranks.perm.inverse())
}

/// `(n⁻¹ Σ_i ‖R^a_i − R^b_i‖²)^{1/2}` with rows paired by index.
pub fn rank_discrepancy(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.check_same_shape(b)?;
    let ra = empirical_ranks(a)?;
    let rb = empirical_ranks(b)?;
    let n = a.rows();
    let mut total = 0.0;
    for i in 0..n {
        total += ra
            .rank_of(i)
            .iter()
            .zip(rb.rank_of(i))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    Ok(libm::sqrt(total / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::CostMatrix;
    use crate::halton::halton_block;
    use crate::rng::{fill_standard_normal, stream, Purpose};

    fn gaussian(n: usize, d: usize, idx: u64) -> Matrix {
        let mut rng = stream(99, Purpose::User, idx);
        let mut m = Matrix::zeros(n, d);
        for i in 0..n {
            fill_standard_normal(&mut rng, m.row_mut(i));
        }
        m
    }

    #[test]
    fn univariate_hand_example() {
        let s = Matrix::column_vector(&[3.0, 1.0, 2.0]);
        let r = empirical_ranks(&s).unwrap();
        assert_eq!(r.rank_of(1), &[0.25]);
        assert_eq!(r.rank_of(2), &[0.5]);
        assert_eq!(r.rank_of(0), &[0.75]);
    }

    #[test]
    fn single_row_gets_first_target() {
        let s = Matrix::from_rows(&[[4.0, -2.0]]).unwrap();
        let r = empirical_ranks(&s).unwrap();
        assert_eq!(r.rank_of(0), &[0.5, 1.0 / 3.0]);
    }

    #[test]
    fn halton_sample_ranks_itself() {
        let h = halton_block(30, 2).unwrap();
        let r = empirical_ranks(&h).unwrap();
        assert_eq!(r.perm(), &Permutation::identity(30));
        assert_eq!(r.cost(), 0.0);
    }

    #[test]
    fn univariate_order_matches_argsort() {
        let s = gaussian(200, 1, 1);
        let r = empirical_ranks(&s).unwrap();
        let mut by_value: Vec<usize> = (0..200).collect();
        by_value.sort_by(|&a, &b| s.get(a, 0).total_cmp(&s.get(b, 0)));
        let mut by_rank: Vec<usize> = (0..200).collect();
        by_rank.sort_by(|&a, &b| r.rank_of(a)[0].total_cmp(&r.rank_of(b)[0]));
        assert_eq!(by_value, by_rank);
    }

    #[test]
    fn monge_cost_agrees_with_solver() {
        let s = gaussian(40, 3, 2);
        let r = empirical_ranks(&s).unwrap();
        let c = rank_cost_matrix(&s, &halton_block(40, 3).unwrap()).unwrap();
        let direct = crate::assignment::solve_lsap(&c).unwrap();
        assert!((r.cost() - direct.total_cost).abs() < 1e-12);
        let _: &CostMatrix = &c;
    }

    #[test]
    fn match_ranks_univariate_pairs_by_order() {
        let latent = Matrix::column_vector(&[0.1, 0.9]);
        let base = Matrix::column_vector(&[5.0, -2.0]);
        let r = match_ranks(&latent, &base).unwrap();
        assert_eq!(base.get(r.apply(0), 0), -2.0);
        assert_eq!(base.get(r.apply(1), 0), 5.0);
    }

    #[test]
    fn matched_base_shares_latent_ranks() {
        for (d, idx) in [(1usize, 3u64), (2, 4), (3, 5)] {
            let latent = gaussian(50, d, idx);
            let base = gaussian(50, d, idx + 100);
            let r = match_ranks(&latent, &base).unwrap();
            let rl = empirical_ranks(&latent).unwrap();
            let rb = empirical_ranks(&base).unwrap();
            for i in 0..50 {
                assert_eq!(rb.target_index(r.apply(i)), rl.target_index(i));
            }
            let permuted = base.select_rows(r.as_slice());
            assert_eq!(rank_discrepancy(&permuted, &latent).unwrap(), 0.0);
        }
        let x = gaussian(20, 2, 9);
        let r = match_ranks(&x, &x).unwrap();
        assert_eq!(rank_discrepancy(&x.select_rows(r.as_slice()), &x).unwrap(), 0.0);
    }

    #[test]
    fn discrepancy_examples() {
        let x = gaussian(25, 2, 6);
        assert_eq!(rank_discrepancy(&x, &x).unwrap(), 0.0);
        let a = Matrix::column_vector(&[1.0, 2.0]);
        let b = Matrix::column_vector(&[2.0, 1.0]);
        assert!((rank_discrepancy(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        let c = Matrix::column_vector(&[10.0, 20.0]);
        assert_eq!(rank_discrepancy(&a, &c).unwrap(), 0.0);
        assert!(rank_discrepancy(&a, &x).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let s = Matrix::column_vector(&[1.0, f64::INFINITY]);
        assert!(matches!(empirical_ranks(&s), Err(Error::NonFinite { .. })));
    }
}
