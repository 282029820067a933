//! Orchestration of the physical Grover search: Dicke initialization,
//! alternating oracle/reflection pulses, fidelity tracking, diagnostics,
//! and measurement sampling.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collective::{build_collective_operators, dicke_state};
use crate::dynamics::{
    extract_phases, propagate_with, IntegratorOptions, PhaseReport, PulseParams, SectorHamiltonian,
};
use crate::error::{IgsError, Result};
use crate::hilbert::{binomial, build_sector_basis, marked_ket, IonConfig, SectorBasis, StateVector};

/// Full description of one search run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub ions: IonConfig,
    /// Marked database element (bit k-1 = ion k).
    pub marked_bits: u32,
    /// Oracle pulse; must address exactly the marked half.
    pub oracle_pulse: PulseParams,
    /// Inversion-about-average pulse; must address all ions.
    pub reflection_pulse: PulseParams,
    pub n_steps: usize,
    pub rng_seed: u64,
    /// Fluorescence shots drawn from the final state.
    #[serde(default)]
    pub n_shots: usize,
    /// Probe the pulses for their acquired phases (adds a few extra
    /// integrations per run).
    #[serde(default = "default_true")]
    pub collect_phase_diagnostics: bool,
}

fn default_true() -> bool {
    true
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.ions.n_ions();
        if self.marked_bits.count_ones() != self.ions.excitations() {
            return Err(IgsError::InvalidMarkedState(format!(
                "marked state must excite exactly {} of {} ions",
                self.ions.excitations(),
                n
            )));
        }
        if self.oracle_pulse.addressed != self.marked_bits {
            return Err(IgsError::Config(
                "oracle pulse must address exactly the marked half".into(),
            ));
        }
        if self.reflection_pulse.addressed != self.ions.all_ions_mask() {
            return Err(IgsError::Config(
                "reflection pulse must address all ions".into(),
            ));
        }
        Ok(())
    }
}

/// One recorded point of the population trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Dimensionless time elapsed after this step (both pulse windows).
    pub tau_elapsed: f64,
    pub marked_population: f64,
    pub norm: f64,
}

/// Result of a completed search run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub populations: Vec<StepRecord>,
    pub final_fidelity: f64,
    /// Max norm deviation seen across all pulses.
    pub norm_drift: f64,
    pub oracle_phases: PhaseReport,
    pub reflection_phases: PhaseReport,
    pub samples: Vec<String>,
    #[serde(skip)]
    pub final_state: Option<StateVector>,
}

/// The product-Dicke states `|Φ_k⟩ = |W^{N/2}_{N/2-k}⟩_A |W^{N/2}_k⟩_B`,
/// `k = 0..N/2`, where half A carries the marked excitations. `Φ₀` is the
/// marked ket.
pub fn phi_states(basis: &Arc<SectorBasis>, marked_bits: u32) -> Result<Vec<StateVector>> {
    let config = basis.config();
    let half = config.excitations();
    if marked_bits.count_ones() != half {
        return Err(IgsError::InvalidMarkedState(format!(
            "expected {} excited ions in marked state",
            half
        )));
    }
    let unmarked = config.all_ions_mask() & !marked_bits;
    let mut states = Vec::with_capacity(half as usize + 1);
    for k in 0..=half {
        let amp = 1.0
            / ((binomial(half, (half - k) as i64) * binomial(half, k as i64)) as f64).sqrt();
        let mut s = StateVector::zero(Arc::clone(basis));
        for (i, ket) in basis.kets().iter().enumerate() {
            if ket.phonons != 0 {
                continue;
            }
            let n_a = (ket.ion_bits & marked_bits).count_ones();
            let n_b = (ket.ion_bits & unmarked).count_ones();
            if n_a == half - k && n_b == k {
                s.amplitudes[i] = C64::new(amp, 0.0);
            }
        }
        states.push(s);
    }
    Ok(states)
}

/// Run the full pulse-level search and collect the population trace.
pub fn run_search(config: &AlgorithmConfig) -> Result<RunResult> {
    config.validate()?;
    let basis = build_sector_basis(config.ions);
    let marked = marked_ket(config.ions, config.marked_bits)?;
    let opts = IntegratorOptions::default();
    let oracle_ham = SectorHamiltonian::new(&basis, &config.oracle_pulse);
    let reflection_ham = SectorHamiltonian::new(&basis, &config.reflection_pulse);

    let mut state = dicke_state(&basis, config.ions.excitations())?;
    let step_tau = 2.0 * config.oracle_pulse.window + 2.0 * config.reflection_pulse.window;
    let mut populations = vec![StepRecord {
        step: 0,
        tau_elapsed: 0.0,
        marked_population: state.population(&marked),
        norm: state.norm(),
    }];
    let mut norm_drift = 0.0f64;
    for step in 1..=config.n_steps {
        let (after_oracle, s1) = propagate_with(&oracle_ham, &state, &opts).map_err(|e| {
            IgsError::Integration {
                reason: format!("oracle pulse at step {step}: {e}"),
                achieved: opts.tol,
            }
        })?;
        let (after_reflection, s2) =
            propagate_with(&reflection_ham, &after_oracle, &opts).map_err(|e| {
                IgsError::Integration {
                    reason: format!("reflection pulse at step {step}: {e}"),
                    achieved: opts.tol,
                }
            })?;
        state = after_reflection;
        norm_drift = norm_drift.max(s1.norm_drift).max(s2.norm_drift);
        populations.push(StepRecord {
            step,
            tau_elapsed: step as f64 * step_tau,
            marked_population: state.population(&marked),
            norm: state.norm(),
        });
    }

    let (oracle_phases, reflection_phases) = if config.collect_phase_diagnostics {
        let phis = phi_states(&basis, config.marked_bits)?;
        let oracle_probes: Vec<(String, StateVector)> = phis
            .into_iter()
            .enumerate()
            .map(|(k, s)| (format!("Phi_{k}"), s))
            .collect();
        let ops = build_collective_operators(&basis, config.ions.all_ions_mask())?;
        let ms = crate::collective::build_ms_basis(&basis, &ops)?;
        let mut reflection_probes = Vec::new();
        for j in (0..=config.ions.excitations()).rev() {
            if let Some(c) = ms.position(j, 0, 1) {
                reflection_probes.push((format!("j={j}"), ms.column_state(c)));
            }
        }
        (
            extract_phases(&basis, &config.oracle_pulse, &oracle_probes)?,
            extract_phases(&basis, &config.reflection_pulse, &reflection_probes)?,
        )
    } else {
        (PhaseReport::default(), PhaseReport::default())
    };

    let samples = measure_sample(&state, config.n_shots, config.rng_seed);
    Ok(RunResult {
        final_fidelity: populations.last().unwrap().marked_population,
        populations,
        norm_drift,
        oracle_phases,
        reflection_phases,
        samples,
        final_state: Some(state),
    })
}

/// First-order fidelity diagnostic `P = 1 - 2|Re⟨f|Δf⟩|`.
pub fn fidelity_deviation(f: &StateVector, delta_f: &StateVector) -> f64 {
    1.0 - 2.0 * f.inner(delta_f).re.abs()
}

/// Draw `n_shots` fluorescence outcomes (ion bitstrings, phonons traced
/// out) from the state's measurement distribution.
pub fn measure_sample(state: &StateVector, n_shots: usize, seed: u64) -> Vec<String> {
    if n_shots == 0 {
        return Vec::new();
    }
    let n = state.basis.config().n_ions();
    let weights: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let dist = WeightedIndex::new(&weights).expect("state has nonzero norm");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_shots)
        .map(|_| state.basis.ket(dist.sample(&mut rng)).bits_string(n))
        .collect()
}
