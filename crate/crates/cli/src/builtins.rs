//! Built-in spaces, kernels and default study configurations.

use pchaos_core::space::{Factor, PiecewisePoly};

use crate::config::{
    CellCount, ExperimentConfig, FactorPrimitive, FactorSpec, KernelSpec, SpaceSpec, StudyId,
};

/// Default seed for the shipped studies.
pub const DEFAULT_SEED: u64 = 20_260_809;

/// The mean-zero unit step e = 1_{(0,1)} − 1_{(−1,0)} on (−1, 1): with the
/// uniform mass-one base measure it is orthonormal and mean-zero, so
/// e⊗e / n is the canonical Γ̄₁-limit kernel with exactly zero variance gap
/// and middle-contraction defect at every intensity.
pub fn sign_factor() -> Factor {
    Factor::poly(PiecewisePoly::step(0.0, 1.0, 1.0).add(&PiecewisePoly::step(-1.0, 0.0, -1.0)))
}

fn sign_factor_spec() -> FactorSpec {
    FactorSpec {
        parts: vec![
            (1.0, FactorPrimitive::Step { a: 0.0, b: 1.0, c: 1.0 }),
            (-1.0, FactorPrimitive::Step { a: -1.0, b: 0.0, c: 1.0 }),
        ],
    }
}

/// Γ̄₁-limit pair kernel spec: e⊗e scaled by 1/n.
pub fn gamma_pair_spec() -> KernelSpec {
    KernelSpec::Rank { order: 2, coeff: 1.0, scale_exp: -1.0, factors: vec![sign_factor_spec()] }
}

/// A variance-matched detuned variant (coefficient √2): its middle
/// contraction stays bounded away from c₂·f, so the three-moment residual
/// has a positive floor.
pub fn detuned_pair_spec() -> KernelSpec {
    KernelSpec::Rank {
        order: 2,
        coeff: std::f64::consts::SQRT_2,
        scale_exp: -1.0,
        factors: vec![sign_factor_spec()],
    }
}

/// Default configuration for each built-in study.
pub fn default_config(id: StudyId) -> ExperimentConfig {
    let uniform_sym = SpaceSpec::Uniform { a: -1.0, b: 1.0, mass: 1.0 };
    let uniform_unit = SpaceSpec::Uniform { a: 0.0, b: 1.0, mass: 1.0 };
    match id {
        StudyId::IdentitySuite => ExperimentConfig {
            id,
            seed: DEFAULT_SEED,
            n_schedule: vec![],
            replications: 1000,
            nu: 1.0,
            space: uniform_sym,
            kernels: vec![],
            dump_samples: false,
            overrides: Default::default(),
        },
        StudyId::GammaUstat => ExperimentConfig {
            id,
            seed: DEFAULT_SEED,
            n_schedule: vec![100.0, 400.0, 1600.0, 6400.0, 25600.0],
            replications: 100_000,
            nu: 1.0,
            space: uniform_sym,
            kernels: vec![gamma_pair_spec()],
            dump_samples: false,
            overrides: Default::default(),
        },
        StudyId::ThreeMoment => ExperimentConfig {
            id,
            seed: DEFAULT_SEED,
            n_schedule: vec![100.0, 400.0, 1600.0, 6400.0, 25600.0],
            replications: 1000,
            nu: 1.0,
            space: uniform_sym,
            kernels: vec![gamma_pair_spec(), detuned_pair_spec()],
            dump_samples: false,
            overrides: Default::default(),
        },
        StudyId::DejongNormal => ExperimentConfig {
            id,
            seed: DEFAULT_SEED,
            n_schedule: vec![100.0, 400.0, 1600.0, 6400.0],
            replications: 40_000,
            nu: 1.0,
            space: uniform_unit,
            kernels: vec![KernelSpec::Blocks {
                order: 2,
                coeff: 1.0,
                scale_exp: 0.0,
                cells: CellCount::PerIntensity,
            }],
            dump_samples: false,
            overrides: Default::default(),
        },
        StudyId::HybridGn => ExperimentConfig {
            id,
            seed: DEFAULT_SEED,
            n_schedule: vec![400.0, 3200.0, 25600.0],
            replications: 6_000,
            nu: 1.0,
            space: uniform_sym,
            kernels: vec![
                gamma_pair_spec(),
                // order-3 mean-zero block kernel, 3!‖f‖² = 1 at every n
                KernelSpec::Blocks {
                    order: 3,
                    coeff: 1.0 / 6.0_f64.sqrt(),
                    scale_exp: -0.5,
                    cells: CellCount::PerIntensity,
                },
            ],
            dump_samples: false,
            overrides: Default::default(),
        },
        StudyId::HybridGp => ExperimentConfig {
            id,
            seed: DEFAULT_SEED,
            n_schedule: vec![400.0, 3200.0, 25600.0],
            replications: 10_000,
            nu: 1.0,
            space: uniform_sym,
            kernels: vec![gamma_pair_spec()],
            dump_samples: false,
            overrides: Default::default(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pchaos_core::contract::norm2;
    use pchaos_core::space::Kernel;

    #[test]
    fn gamma_pair_kernel_is_unit_variance() {
        let cfg = default_config(StudyId::GammaUstat);
        for &n in &[100.0, 1600.0] {
            let space = cfg.space.build(n).unwrap();
            let h: Kernel = cfg.kernels[0].build(&space, n).unwrap();
            // 2‖h‖² = 2 exactly at every n
            let v = 2.0 * norm2(&space, &h).unwrap();
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hybrid_normal_leg_is_normalised() {
        let cfg = default_config(StudyId::HybridGn);
        let n = 400.0;
        let space = cfg.space.build(n).unwrap();
        let f3 = cfg.kernels[1].build(&space, n).unwrap();
        // 3!‖f‖² = 1
        let v = 6.0 * norm2(&space, &f3).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }
}
