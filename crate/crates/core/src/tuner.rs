//! Derivative-free search over pulse parameters `(g0T, δT)` realizing the
//! reflection and oracle phase conditions.
//!
//! The objective is the database-restricted trace overlap between the pulse
//! propagator and the ideal Householder reflection; it penalizes both phase
//! mismatch and non-adiabatic leakage with a single scalar. A coarse grid
//! scan locates candidate basins, then Nelder-Mead refines the best cells.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::phi_states;
use crate::collective::dicke_state;
use crate::dynamics::{
    extract_phases, IntegratorOptions, PhaseReport, PulseParams, SectorHamiltonian,
};
use crate::error::{IgsError, Result};
use crate::hilbert::{build_sector_basis, marked_ket, IonConfig, SectorBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Reflection,
    Oracle,
}

/// What to tune and where to look.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneTarget {
    pub kind: OperatorKind,
    /// Desired phase on the target state (default π).
    pub target_phase: f64,
    pub ions: IonConfig,
    /// Marked half for oracle tuning.
    pub marked_bits: Option<u32>,
    pub g0t_range: (f64, f64),
    pub deltat_range: (f64, f64),
    /// Grid points per axis for the coarse scan.
    pub grid_density: usize,
    /// Stop refining when the objective improves by less than this.
    pub refine_tolerance: f64,
    /// Accept only candidates with objective below this threshold.
    pub objective_threshold: f64,
    pub window: f64,
}

impl TuneTarget {
    pub fn new(kind: OperatorKind, ions: IonConfig) -> Self {
        Self {
            kind,
            target_phase: std::f64::consts::PI,
            ions,
            marked_bits: None,
            g0t_range: (1.0, 40.0),
            deltat_range: (1.0, 40.0),
            grid_density: 48,
            refine_tolerance: 1e-6,
            objective_threshold: 0.2,
            window: crate::dynamics::DEFAULT_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.g0t_range, self.deltat_range] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(IgsError::Config(format!(
                    "bounds must be positive and ordered, got ({lo}, {hi})"
                )));
            }
        }
        if self.kind == OperatorKind::Oracle && self.marked_bits.is_none() {
            return Err(IgsError::Config("oracle tuning requires marked_bits".into()));
        }
        if let Some(bits) = self.marked_bits {
            if bits.count_ones() != self.ions.excitations() {
                return Err(IgsError::InvalidMarkedState(format!(
                    "marked half must excite {} ions",
                    self.ions.excitations()
                )));
            }
        }
        Ok(())
    }

    /// Addressed-ion mask for the operator being tuned.
    pub fn addressed(&self) -> u32 {
        match self.kind {
            OperatorKind::Reflection => self.ions.all_ions_mask(),
            OperatorKind::Oracle => self.marked_bits.expect("validated"),
        }
    }
}

/// Outcome of a tuning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: PulseParams,
    pub objective_value: f64,
    pub phase_report: PhaseReport,
    pub operator_fidelity: f64,
    /// False when no candidate beat the objective threshold; `best` is then
    /// the best found.
    pub converged: bool,
}

/// Database-restricted axis of the ideal Householder target.
fn target_axis(basis: &Arc<SectorBasis>, target: &TuneTarget) -> Result<Vec<C64>> {
    let ndb = basis.database_dim();
    match target.kind {
        OperatorKind::Reflection => {
            let w = dicke_state(basis, target.ions.excitations())?;
            Ok(w.amplitudes.iter().take(ndb).copied().collect())
        }
        OperatorKind::Oracle => {
            let ket = marked_ket(target.ions, target.marked_bits.expect("validated"))?;
            let idx = basis.index_of(&ket).expect("marked ket is in D");
            let mut v = vec![C64::new(0.0, 0.0); ndb];
            v[idx] = C64::new(1.0, 0.0);
            Ok(v)
        }
    }
}

/// `1 - |Tr(P_D U_pulse P_D U_ideal†)| / N_db` with `U_ideal` the target
/// Householder reflection on the database manifold.
pub fn operator_infidelity(
    basis: &Arc<SectorBasis>,
    pulse: &PulseParams,
    target: &TuneTarget,
) -> Result<f64> {
    operator_infidelity_with(basis, pulse, target, &IntegratorOptions::default())
}

pub fn operator_infidelity_with(
    basis: &Arc<SectorBasis>,
    pulse: &PulseParams,
    target: &TuneTarget,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let ndb = basis.database_dim();
    let axis = target_axis(basis, target)?;
    let phase_factor = C64::from_polar(1.0, target.target_phase) - 1.0;
    let ham = SectorHamiltonian::new(basis, pulse);
    let dim = basis.dim();
    let partial: Result<Vec<C64>> = (0..ndb)
        .into_par_iter()
        .map(|x| {
            let mut psi = vec![C64::new(0.0, 0.0); dim];
            psi[x] = C64::new(1.0, 0.0);
            crate::dynamics::integrate_raw(&ham, &mut psi, opts)?;
            // ⟨U_ideal e_x | P_D U_pulse e_x⟩ with
            // U_ideal e_x = e_x + (e^{iφ}-1)·ψ*_x·ψ on D.
            let mut acc = psi[x];
            let corr = (phase_factor * axis[x].conj()).conj();
            for r in 0..ndb {
                acc += corr * axis[r].conj() * psi[r];
            }
            Ok(acc)
        })
        .collect();
    let trace: C64 = partial?.into_iter().sum();
    Ok(1.0 - trace.norm() / ndb as f64)
}

/// Deterministic grid scan followed by Nelder-Mead refinement from the best
/// grid cells.
pub fn tune(target: &TuneTarget) -> Result<TuneResult> {
    target.validate()?;
    let basis = build_sector_basis(target.ions);
    let addressed = target.addressed();
    let scan_opts = IntegratorOptions {
        tol: 1e-9,
        ..Default::default()
    };
    let refine_opts = IntegratorOptions {
        tol: 1e-10,
        ..Default::default()
    };

    let axis_points = |range: (f64, f64), n: usize| -> Vec<f64> {
        if n <= 1 || range.0 == range.1 {
            return vec![range.0];
        }
        (0..n)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
            .collect()
    };
    let g_points = axis_points(target.g0t_range, target.grid_density);
    let d_points = axis_points(target.deltat_range, target.grid_density);

    let objective = |g0_t: f64, delta_t: f64, opts: &IntegratorOptions| -> Result<f64> {
        let pulse = PulseParams::new(g0_t, delta_t, target.window, addressed)?;
        operator_infidelity_with(&basis, &pulse, target, opts)
    };

    let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity(g_points.len() * d_points.len());
    for &g in &g_points {
        for &d in &d_points {
            cells.push((objective(g, d, &scan_opts)?, g, d));
        }
    }
    // Tie-break near-equal optima toward smaller g0T, then smaller δT.
    cells.sort_by(|a, b| {
        (a.0, a.1, a.2)
            .partial_cmp(&(b.0, b.1, b.2))
            .expect("objective is finite")
    });

    let g_cell = if g_points.len() > 1 {
        (target.g0t_range.1 - target.g0t_range.0) / (g_points.len() - 1) as f64
    } else {
        0.0
    };
    let d_cell = if d_points.len() > 1 {
        (target.deltat_range.1 - target.deltat_range.0) / (d_points.len() - 1) as f64
    } else {
        0.0
    };

    let mut best = (cells[0].1, cells[0].2);
    let mut best_obj = cells[0].0;
    if g_cell > 0.0 || d_cell > 0.0 {
        for &(_, g, d) in cells.iter().take(8) {
            let (obj, point) = nelder_mead(
                |x, y| objective(x, y, &refine_opts),
                (g, d),
                (g_cell.max(1e-3), d_cell.max(1e-3)),
                target.g0t_range,
                target.deltat_range,
                target.refine_tolerance,
            )?;
            let better = obj < best_obj - 1e-12
                || ((obj - best_obj).abs() <= 1e-12
                    && (point.0, point.1) < (best.0, best.1));
            if better {
                best_obj = obj;
                best = point;
            }
        }
    }

    let pulse = PulseParams::new(best.0, best.1, target.window, addressed)?;
    let objective_value = operator_infidelity(&basis, &pulse, target)?;
    let probes = match target.kind {
        OperatorKind::Reflection => vec![(
            "W".to_string(),
            dicke_state(&basis, target.ions.excitations())?,
        )],
        OperatorKind::Oracle => phi_states(&basis, target.marked_bits.expect("validated"))?
            .into_iter()
            .enumerate()
            .map(|(k, s)| (format!("Phi_{k}"), s))
            .collect(),
    };
    let phase_report = extract_phases(&basis, &pulse, &probes)?;
    Ok(TuneResult {
        best: pulse,
        objective_value,
        phase_report,
        operator_fidelity: 1.0 - objective_value,
        converged: objective_value <= target.objective_threshold,
    })
}

/// 2-D Nelder-Mead with bound clamping; deterministic for fixed inputs.
fn nelder_mead<F>(
    f: F,
    start: (f64, f64),
    scale: (f64, f64),
    bx: (f64, f64),
    by: (f64, f64),
    tol: f64,
) -> Result<(f64, (f64, f64))>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let clamp = |p: (f64, f64)| (p.0.clamp(bx.0, bx.1), p.1.clamp(by.0, by.1));
    let mut simplex = vec![
        clamp(start),
        clamp((start.0 + scale.0, start.1)),
        clamp((start.0, start.1 + scale.1)),
    ];
    let mut values = Vec::with_capacity(3);
    for &(x, y) in &simplex {
        values.push(f(x, y)?);
    }
    for _ in 0..120 {
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let (lo, mid, hi) = (order[0], order[1], order[2]);
        if values[hi] - values[lo] < tol {
            break;
        }
        let centroid = (
            (simplex[lo].0 + simplex[mid].0) / 2.0,
            (simplex[lo].1 + simplex[mid].1) / 2.0,
        );
        let reflect = clamp((
            centroid.0 + (centroid.0 - simplex[hi].0),
            centroid.1 + (centroid.1 - simplex[hi].1),
        ));
        let fr = f(reflect.0, reflect.1)?;
        if fr < values[lo] {
            let expand = clamp((
                centroid.0 + 2.0 * (centroid.0 - simplex[hi].0),
                centroid.1 + 2.0 * (centroid.1 - simplex[hi].1),
            ));
            let fe = f(expand.0, expand.1)?;
            if fe < fr {
                simplex[hi] = expand;
                values[hi] = fe;
            } else {
                simplex[hi] = reflect;
                values[hi] = fr;
            }
        } else if fr < values[mid] {
            simplex[hi] = reflect;
            values[hi] = fr;
        } else {
            let contract = clamp((
                centroid.0 + 0.5 * (simplex[hi].0 - centroid.0),
                centroid.1 + 0.5 * (simplex[hi].1 - centroid.1),
            ));
            let fc = f(contract.0, contract.1)?;
            if fc < values[hi] {
                simplex[hi] = contract;
                values[hi] = fc;
            } else {
                for i in [mid, hi] {
                    simplex[i] = (
                        (simplex[i].0 + simplex[lo].0) / 2.0,
                        (simplex[i].1 + simplex[lo].1) / 2.0,
                    );
                    values[i] = f(simplex[i].0, simplex[i].1)?;
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    Ok((values[best], simplex[best]))
}
