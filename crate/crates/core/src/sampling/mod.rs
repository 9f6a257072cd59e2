//! Simulated Hadamard-test sampling of the projected pair.

pub mod estimate;
pub mod plan;
pub mod rng;

pub use estimate::{
    apply_hardware_decay, estimate_part, hadamard_estimate, hardware_lambda, HadamardEstimate,
    NoiseMode, NoiseSpec, PartEstimate,
};
pub use plan::{
    allocate_h, allocate_nontoeplitz, allocate_toeplitz, largest_remainder, split_budget,
    split_constants, ConfigShots, Part, PlanTarget, ShotPlan,
};

use num_complex::Complex64;

use crate::error::{QksdError, Result};
use crate::krylov::{toeplitz_from_sequence, Construction, KrylovPair, KrylovProblem};
use crate::linalg::{CMatrix, ZERO};

const TAG_S: u64 = 0;
const TAG_H: u64 = 1;

/// Sampled pair plus a marker for configurations that received no shots.
#[derive(Debug, Clone)]
pub struct SampledPair {
    pub pair: KrylovPair,
    pub infinite_variance: bool,
}

struct Sampler<'a> {
    noise: &'a NoiseSpec,
    trial: u64,
    decay: f64,
    infinite: bool,
}

impl Sampler<'_> {
    fn part(&mut self, key: [u64; 4], fragment: usize, truth: f64, shots: u64) -> Result<f64> {
        let mut rng = rng::stream(&[
            self.noise.seed,
            self.trial,
            key[0],
            key[1],
            key[2],
            key[3],
            fragment as u64,
        ]);
        let e = estimate_part(self.decay * truth, shots, self.noise.mode, &mut rng)?;
        self.infinite |= e.infinite_variance;
        Ok(e.value)
    }

    /// `Σ_j β_j · estimate(⟨·|Û_j|·⟩)` for one element.
    fn fragment_sum(
        &mut self,
        plan: &ShotPlan,
        row: usize,
        col: usize,
        truths: impl Fn(usize) -> Complex64,
        real_only: bool,
    ) -> Result<Complex64> {
        let weights = plan.weights();
        let re_shots = plan.config(row, col, Part::Real);
        let im_shots = plan.config(row, col, Part::Imag);
        let (r, c) = (row as u64, col as u64);
        let mut total = ZERO;
        for (j, beta) in weights.iter().enumerate() {
            let truth = truths(j);
            let re = self.part(
                [TAG_H, r, c, Part::Real as u64],
                j,
                truth.re,
                re_shots.map_or(0, |s| s.fragments[j]),
            )?;
            let im = if real_only {
                0.0
            } else {
                self.part(
                    [TAG_H, r, c, Part::Imag as u64],
                    j,
                    truth.im,
                    im_shots.map_or(0, |s| s.fragments[j]),
                )?
            };
            total += Complex64::new(re, im) * *beta;
        }
        Ok(total)
    }
}

fn check_plan(plan: &ShotPlan, target: PlanTarget, order: usize, fragments: usize) -> Result<()> {
    if plan.target() != target {
        return Err(QksdError::InvalidInput(format!(
            "plan targets {:?}, expected {target:?}",
            plan.target()
        )));
    }
    if plan.order() != order {
        return Err(QksdError::DimensionMismatch { expected: order, found: plan.order() });
    }
    if plan.weights().len() != fragments {
        return Err(QksdError::DimensionMismatch {
            expected: fragments,
            found: plan.weights().len(),
        });
    }
    Ok(())
}

/// Draws one noisy `(H̃, S̃)`.
///
/// True values are scaled by `e^{−λ}` before sampling, `S̃` has an exact
/// diagonal, and the identity part of `H` enters as `c·S̃`. `s_plan` may be
/// `None` only for order one.
pub fn sample_pair(
    problem: &KrylovProblem,
    construction: Construction,
    h_plan: &ShotPlan,
    s_plan: Option<&ShotPlan>,
    noise: &NoiseSpec,
    trial: u64,
) -> Result<SampledPair> {
    let n = problem.order();
    let h_target = match construction {
        Construction::Toeplitz => PlanTarget::HToeplitz,
        Construction::NonToeplitz => PlanTarget::HNonToeplitz,
    };
    check_plan(h_plan, h_target, n, problem.betas.len())?;
    match s_plan {
        Some(p) => check_plan(p, PlanTarget::SToeplitz, n, 1)?,
        None if n == 1 => {}
        None => return Err(QksdError::InvalidInput("missing overlap shot plan".into())),
    }
    let mut sampler = Sampler {
        noise,
        trial,
        decay: noise.decay_factor(),
        infinite: false,
    };

    let mut s_seq = vec![Complex64::new(sampler.decay, 0.0)];
    if let Some(plan) = s_plan {
        for k in 1..n {
            let truth = problem.sequences.s[k];
            let key = |part: Part| [TAG_S, 0, k as u64, part as u64];
            let re = sampler.part(key(Part::Real), 0, truth.re, plan.shots(0, k, Part::Real))?;
            let im = sampler.part(key(Part::Imag), 0, truth.im, plan.shots(0, k, Part::Imag))?;
            s_seq.push(Complex64::new(re, im));
        }
    }
    let s = toeplitz_from_sequence(&s_seq);
    let c = problem.identity_offset;

    let h = match construction {
        Construction::Toeplitz => {
            let mut h_seq = Vec::with_capacity(n);
            for k in 0..n {
                let sum = sampler.fragment_sum(
                    h_plan,
                    0,
                    k,
                    |j| problem.toeplitz_overlaps[j][k],
                    k == 0,
                )?;
                h_seq.push(sum + s_seq[k] * c);
            }
            toeplitz_from_sequence(&h_seq)
        }
        Construction::NonToeplitz => {
            let mut h = CMatrix::from_element(n, n, ZERO);
            for k in 0..n {
                for l in k..n {
                    let sum = sampler.fragment_sum(
                        h_plan,
                        k,
                        l,
                        |j| problem.pair_overlaps[j][(k, l)],
                        k == l,
                    )?;
                    let v = sum + s[(k, l)] * c;
                    if k == l {
                        h[(k, k)] = Complex64::new(v.re, 0.0);
                    } else {
                        h[(k, l)] = v;
                        h[(l, k)] = v.conj();
                    }
                }
            }
            h
        }
    };
    Ok(SampledPair {
        pair: KrylovPair {
            h,
            s,
            construction,
            config: problem.config,
        },
        infinite_variance: sampler.infinite,
    })
}

/// Exact pair scaled by the decay factor: the mean of [`sample_pair`].
pub fn decayed_truth(problem: &KrylovProblem, construction: Construction, lambda: f64) -> Result<KrylovPair> {
    apply_hardware_decay(problem.pair(construction), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{hartree_fock_state, Filling};
    use crate::hamiltonian::{build_hubbard_1d, sorted_insertion_partition};
    use crate::krylov::{default_time_step, KrylovConfig, PropagatorSource};
    use crate::linalg::{hermitize, max_abs_diff};

    fn problem(n: usize) -> KrylovProblem {
        let h = build_hubbard_1d(2, 0.2, 0.8).unwrap();
        let part = sorted_insertion_partition(&h).unwrap();
        let psi = hartree_fock_state(2, 0.2, Filling::new(1, 1)).unwrap();
        let cfg = KrylovConfig::new(n, default_time_step(&part).unwrap()).unwrap();
        KrylovProblem::build(&h, &part, &psi, cfg, PropagatorSource::Exact).unwrap()
    }

    fn plans(p: &KrylovProblem, c: Construction, m: u64) -> (ShotPlan, ShotPlan) {
        let (mh, ms) = split_budget(m, p.order(), c, p.beta_norm).unwrap();
        (
            allocate_h(mh, p.order(), c, &p.betas).unwrap(),
            allocate_toeplitz(ms, p.order(), false, &[]).unwrap(),
        )
    }

    #[test]
    fn huge_budget_recovers_exact_pair() {
        let p = problem(5);
        for c in [Construction::Toeplitz, Construction::NonToeplitz] {
            let (hp, sp) = plans(&p, c, 1_000_000_000_000);
            let noise = NoiseSpec::new(NoiseMode::Gaussian, 0.0, 9).unwrap();
            let out = sample_pair(&p, c, &hp, Some(&sp), &noise, 0).unwrap();
            assert!(max_abs_diff(&out.pair.h, &p.pair(c).h) < 1e-4);
            assert!(max_abs_diff(&out.pair.s, &p.pair(c).s) < 1e-4);
            assert!(!out.infinite_variance);
        }
    }

    #[test]
    fn samples_are_hermitian_with_exact_overlap_diagonal() {
        let p = problem(5);
        for c in [Construction::Toeplitz, Construction::NonToeplitz] {
            let (hp, sp) = plans(&p, c, 2000);
            let noise = NoiseSpec::new(NoiseMode::Binomial, 0.0, 1).unwrap();
            for trial in 0..10 {
                let out = sample_pair(&p, c, &hp, Some(&sp), &noise, trial).unwrap();
                assert_eq!(out.pair.h, hermitize(&out.pair.h));
                assert_eq!(out.pair.s, hermitize(&out.pair.s));
                for k in 0..5 {
                    assert_eq!(out.pair.s[(k, k)], Complex64::new(1.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_trial() {
        let p = problem(3);
        let (hp, sp) = plans(&p, Construction::Toeplitz, 5000);
        let noise = NoiseSpec::new(NoiseMode::Binomial, 0.0, 42).unwrap();
        let a = sample_pair(&p, Construction::Toeplitz, &hp, Some(&sp), &noise, 3).unwrap();
        let b = sample_pair(&p, Construction::Toeplitz, &hp, Some(&sp), &noise, 3).unwrap();
        let c = sample_pair(&p, Construction::Toeplitz, &hp, Some(&sp), &noise, 4).unwrap();
        assert_eq!(a.pair.h, b.pair.h);
        assert_ne!(a.pair.h, c.pair.h);
    }

    #[test]
    fn decay_scales_noiseless_limit() {
        let p = problem(3);
        let (hp, sp) = plans(&p, Construction::Toeplitz, 1_000_000_000_000);
        let noise = NoiseSpec::new(NoiseMode::Gaussian, 0.8, 1).unwrap();
        let out = sample_pair(&p, Construction::Toeplitz, &hp, Some(&sp), &noise, 0).unwrap();
        let truth = decayed_truth(&p, Construction::Toeplitz, 0.8).unwrap();
        assert!(max_abs_diff(&out.pair.h, &truth.h) < 1e-4);
        assert!((out.pair.s[(0, 0)].re - (-0.8f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_plan_is_rejected() {
        let p = problem(3);
        let (hp, sp) = plans(&p, Construction::Toeplitz, 5000);
        let noise = NoiseSpec::new(NoiseMode::Binomial, 0.0, 1).unwrap();
        assert!(sample_pair(&p, Construction::NonToeplitz, &hp, Some(&sp), &noise, 0).is_err());
        assert!(sample_pair(&p, Construction::Toeplitz, &hp, None, &noise, 0).is_err());
    }
}
