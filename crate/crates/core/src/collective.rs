//! Collective pseudospin algebra, Dicke states, and the chain factorization
//! of the sector into decoupled angular-momentum ladders.
//!
//! The simultaneous eigenbasis of Ĵ² and Ĵz splits the sector into chains
//! labeled by `j`; neighboring rungs `|j, m⟩ → |j, m-1⟩` couple through
//! `√(n_p (j+m)(j-m+1))` with `n_p` the phonon number of the lower rung.
//! Chain construction here is validation machinery; production dynamics run
//! directly in the sector basis.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{IgsError, Result};
use crate::hilbert::{binomial, IonConfig, SectorBasis, StateVector};
use crate::sparse::SpMat;

/// Collective spin and phonon operators for an addressed-ion subset.
///
/// The `j_*`, `a`, `a_dagger` matrices act on the full qubit ⊗ phonon
/// product space (phonons truncated at `N/2`), where the commutation
/// relations close. The `sector_*` fields are the restrictions actually
/// used for dynamics: the sector is exactly invariant under
/// `â Ĵ₊ + â† Ĵ₋` and `Ĵz`.
pub struct CollectiveOperators {
    pub basis: Arc<SectorBasis>,
    pub addressed: u32,
    pub j_plus: SpMat,
    pub j_minus: SpMat,
    pub j_z: SpMat,
    pub j_squared: SpMat,
    pub a: SpMat,
    pub a_dagger: SpMat,
    /// `â† Ĵ₋` restricted to the sector (moves one rung down a chain).
    pub sector_lower: SpMat,
    /// `â Ĵ₊` restricted to the sector.
    pub sector_raise: SpMat,
    /// `â Ĵ₊ + â† Ĵ₋` restricted to the sector.
    pub sector_coupling: SpMat,
    /// Diagonal of `Ĵz` restricted to the sector.
    pub sector_jz: Vec<f64>,
    /// `Ĵ²` of the addressed subset restricted to the sector.
    pub sector_j_squared: SpMat,
}

/// Build all collective operators for `addressed` (a nonempty ion bitmask).
pub fn build_collective_operators(
    basis: &Arc<SectorBasis>,
    addressed: u32,
) -> Result<CollectiveOperators> {
    let n = basis.config().n_ions();
    if addressed == 0 {
        return Err(IgsError::Config("addressed ion set is empty".into()));
    }
    if addressed >= 1 << n {
        return Err(IgsError::Config(format!(
            "addressed mask {addressed:#b} exceeds {n} ions"
        )));
    }
    let half = basis.config().excitations();
    let nbits = 1usize << n;
    let p_max = half as usize; // phonons beyond N/2 never appear in the sector
    let dim = nbits * (p_max + 1);
    let pidx = |n_p: usize, bits: usize| n_p * nbits + bits;

    let mut j_plus = SpMat::new(dim, dim);
    let mut j_z = SpMat::new(dim, dim);
    let mut a = SpMat::new(dim, dim);
    for n_p in 0..=p_max {
        for bits in 0..nbits {
            let i = pidx(n_p, bits);
            let n_up = (bits as u32 & addressed).count_ones() as f64;
            let n_down = (addressed.count_ones() as f64) - n_up;
            j_z.push(i, i, 0.5 * (n_up - n_down));
            for k in 0..n {
                if addressed >> k & 1 == 1 && bits >> k & 1 == 0 {
                    j_plus.push(pidx(n_p, bits | 1 << k), i, 1.0);
                }
            }
            if n_p > 0 {
                a.push(pidx(n_p - 1, bits), i, (n_p as f64).sqrt());
            }
        }
    }
    j_plus.compress();
    j_z.compress();
    a.compress();
    let j_minus = j_plus.transpose();
    let a_dagger = a.transpose();
    let j_squared = j_plus
        .matmul(&j_minus)
        .add(&j_minus.matmul(&j_plus))
        .scaled(0.5)
        .add(&j_z.matmul(&j_z));

    let sector_lower = sector_lower_op(basis, addressed);
    let sector_raise = sector_lower.transpose();
    let sector_coupling = sector_lower.add(&sector_raise);
    let sector_jz = sector_jz_diag(basis, addressed);
    let sector_j_squared = sector_j_squared_op(basis, addressed);

    Ok(CollectiveOperators {
        basis: Arc::clone(basis),
        addressed,
        j_plus,
        j_minus,
        j_z,
        j_squared,
        a,
        a_dagger,
        sector_lower,
        sector_raise,
        sector_coupling,
        sector_jz,
        sector_j_squared,
    })
}

/// Sector restriction of `â† Ĵ₋` over `addressed`: de-excites one addressed
/// ion and creates one phonon.
pub fn sector_lower_op(basis: &Arc<SectorBasis>, addressed: u32) -> SpMat {
    let n = basis.config().n_ions();
    let mut m = SpMat::new(basis.dim(), basis.dim());
    for (i, ket) in basis.kets().iter().enumerate() {
        for k in 0..n {
            if addressed >> k & 1 == 1 && ket.ion_bits >> k & 1 == 1 {
                let target = crate::hilbert::BasisKet {
                    ion_bits: ket.ion_bits & !(1 << k),
                    phonons: ket.phonons + 1,
                };
                if let Some(r) = basis.index_of(&target) {
                    m.push(r, i, (ket.phonons as f64 + 1.0).sqrt());
                }
            }
        }
    }
    m.compress();
    m
}

/// Diagonal of the addressed-subset `Ĵz` over the sector basis.
pub fn sector_jz_diag(basis: &Arc<SectorBasis>, addressed: u32) -> Vec<f64> {
    basis
        .kets()
        .iter()
        .map(|ket| {
            let up = (ket.ion_bits & addressed).count_ones() as f64;
            up - addressed.count_ones() as f64 / 2.0
        })
        .collect()
}

/// Sector restriction of the addressed-subset `Ĵ²`.
///
/// `Ĵ²` conserves both `n_i` and `n_p`, so its sector matrix elements equal
/// the pure bit-space ones; they are assembled term by term from
/// `½(Ĵ₊Ĵ₋ + Ĵ₋Ĵ₊) + Ĵz²`.
pub fn sector_j_squared_op(basis: &Arc<SectorBasis>, addressed: u32) -> SpMat {
    let n = basis.config().n_ions();
    let jz = sector_jz_diag(basis, addressed);
    let mut m = SpMat::new(basis.dim(), basis.dim());
    for (i, ket) in basis.kets().iter().enumerate() {
        m.push(i, i, jz[i] * jz[i]);
        // ½ Σ_{k,l} (σ+_l σ-_k + σ-_l σ+_k)
        for k in 0..n {
            if addressed >> k & 1 == 0 {
                continue;
            }
            for l in 0..n {
                if addressed >> l & 1 == 0 {
                    continue;
                }
                if ket.ion_bits >> k & 1 == 1 {
                    let b1 = ket.ion_bits & !(1 << k);
                    if b1 >> l & 1 == 0 {
                        let target = crate::hilbert::BasisKet {
                            ion_bits: b1 | 1 << l,
                            phonons: ket.phonons,
                        };
                        m.push(basis.index_of(&target).unwrap(), i, 0.5);
                    }
                }
                if ket.ion_bits >> k & 1 == 0 {
                    let b1 = ket.ion_bits | 1 << k;
                    if b1 >> l & 1 == 1 {
                        let target = crate::hilbert::BasisKet {
                            ion_bits: b1 & !(1 << l),
                            phonons: ket.phonons,
                        };
                        m.push(basis.index_of(&target).unwrap(), i, 0.5);
                    }
                }
            }
        }
    }
    m.compress();
    m
}

/// Symmetric Dicke state `|W^N_n⟩ ⊗ |n_p = N/2 - n⟩`: equal positive
/// amplitudes over all permutations with `n` excited ions.
pub fn dicke_state(basis: &Arc<SectorBasis>, n_excited: u32) -> Result<StateVector> {
    let half = basis.config().excitations();
    if n_excited > half {
        return Err(IgsError::Config(format!(
            "n_excited must be in 0..={half}, got {n_excited}"
        )));
    }
    let count = binomial(basis.config().n_ions(), n_excited as i64);
    let amp = 1.0 / (count as f64).sqrt();
    let mut state = StateVector::zero(Arc::clone(basis));
    for (i, ket) in basis.kets().iter().enumerate() {
        if ket.n_ionic() == n_excited {
            state.amplitudes[i] = C64::new(amp, 0.0);
        }
    }
    Ok(state)
}

/// One decoupled chain of the factorized coupling scheme.
#[derive(Debug, Clone, Serialize)]
pub struct ChainSpec {
    pub j: u32,
    /// Number of degenerate chains with this `j`.
    #[serde(rename = "N_j")]
    pub degeneracy: u64,
    /// Dimensionless factors coupling rung `m` to rung `m-1`,
    /// for `m = 0, -1, ..., -j+1`.
    pub rung_couplings: Vec<f64>,
}

impl ChainSpec {
    /// Accessible chain length (`m = 0` down to `m = -j`).
    pub fn accessible_length(&self) -> u32 {
        self.j + 1
    }
}

/// Analytic rung coupling `√(n_p (j+m)(j-m+1))` for the transition
/// `|j, m⟩ → |j, m-1⟩`, with `n_p = 1 - m` the phonon number of the
/// lower rung.
pub fn rung_coupling(j: u32, m: i32) -> f64 {
    let j = j as f64;
    let m = m as f64;
    let n_p = 1.0 - m;
    (n_p * (j + m) * (j - m + 1.0)).sqrt()
}

/// One `ChainSpec` per `j = N/2 .. 0` (longest chain first), with
/// degeneracies `N_j = C(N, N/2-j) - C(N, N/2-j-1)`.
pub fn chain_census(config: IonConfig) -> Vec<ChainSpec> {
    let n = config.n_ions();
    let half = config.excitations();
    (0..=half)
        .rev()
        .map(|j| {
            let degeneracy = binomial(n, (half - j) as i64) - binomial(n, half as i64 - j as i64 - 1);
            let rung_couplings = (0..j).map(|step| rung_coupling(j, -(step as i32))).collect();
            ChainSpec {
                j,
                degeneracy,
                rung_couplings,
            }
        })
        .collect()
}

/// Label of one column of the chain basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsLabel {
    pub j: u32,
    pub m: i32,
    /// Degeneracy index, `1..=N_j`.
    pub k: u32,
}

/// Orthonormal change of basis from the sector basis to chain states
/// `(j, m, k)`. Columns are real.
pub struct MSBasis {
    pub basis: Arc<SectorBasis>,
    pub labels: Vec<MsLabel>,
    /// `columns[c]` is the sector-basis amplitude vector of chain state `c`.
    pub columns: Vec<Vec<f64>>,
}

impl MSBasis {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Index of the column labeled `(j, m, k)`.
    pub fn position(&self, j: u32, m: i32, k: u32) -> Option<usize> {
        self.labels.iter().position(|l| l.j == j && l.m == m && l.k == k)
    }

    pub fn column_state(&self, c: usize) -> StateVector {
        let mut s = StateVector::zero(Arc::clone(&self.basis));
        for (i, &v) in self.columns[c].iter().enumerate() {
            s.amplitudes[i] = C64::new(v, 0.0);
        }
        s
    }

    /// All `m = 0` columns (they span the database manifold).
    pub fn database_columns(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&c| self.labels[c].m == 0).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Build the chain basis from the full-chain collective operators.
///
/// Seeds for each `j` are found by applying the spectral projector of `Ĵ²`
/// (eigenvalues `j(j+1)` are known exactly) to database kets in ascending
/// sector index, with Gram-Schmidt orthogonalization; lower rungs follow by
/// repeated application of `â† Ĵ₋`. The seeding order makes the degeneracy
/// resolution deterministic.
pub fn build_ms_basis(basis: &Arc<SectorBasis>, ops: &CollectiveOperators) -> Result<MSBasis> {
    let all = basis.config().all_ions_mask();
    if ops.addressed != all {
        return Err(IgsError::Config(
            "chain basis requires operators for the full ion set".into(),
        ));
    }
    let half = basis.config().excitations();
    let ndb = basis.database_dim();
    let j2 = &ops.sector_j_squared;
    let lower = &ops.sector_lower;
    let census = chain_census(basis.config());

    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for spec in &census {
        let j = spec.j;
        let cj = (j * (j + 1)) as f64;
        // Spectral projector onto the j eigenspace.
        let project = |v: &[f64]| -> Vec<f64> {
            let mut w = v.to_vec();
            for jp in 0..=half {
                if jp == j {
                    continue;
                }
                let cp = (jp * (jp + 1)) as f64;
                let j2w = j2.apply_f64(&w);
                for (wi, j2wi) in w.iter_mut().zip(j2w) {
                    *wi = (j2wi - cp * *wi) / (cj - cp);
                }
            }
            w
        };

        let mut seeds: Vec<Vec<f64>> = Vec::new();
        for x in 0..ndb {
            if seeds.len() as u64 == spec.degeneracy {
                break;
            }
            let mut e = vec![0.0; basis.dim()];
            e[x] = 1.0;
            let mut v = project(&e);
            for s in &seeds {
                let c = dot(s, &v);
                for (vi, si) in v.iter_mut().zip(s) {
                    *vi -= c * si;
                }
            }
            let nv = norm(&v);
            if nv > 1e-6 {
                for vi in v.iter_mut() {
                    *vi /= nv;
                }
                seeds.push(v);
            }
        }
        if seeds.len() as u64 != spec.degeneracy {
            return Err(IgsError::NumericalDegeneracy(format!(
                "found {} of {} seeds for j={}",
                seeds.len(),
                spec.degeneracy,
                j
            )));
        }

        for (ki, seed) in seeds.into_iter().enumerate() {
            let mut w = seed;
            for step in 0..=j {
                labels.push(MsLabel {
                    j,
                    m: -(step as i32),
                    k: ki as u32 + 1,
                });
                columns.push(w.clone());
                if step < j {
                    let mut next = lower.apply_f64(&w);
                    let nn = norm(&next);
                    if nn < 1e-9 {
                        return Err(IgsError::NumericalDegeneracy(format!(
                            "chain j={j} terminated early at m={}",
                            -(step as i32)
                        )));
                    }
                    for vi in next.iter_mut() {
                        *vi /= nn;
                    }
                    w = next;
                }
            }
        }
    }
    debug_assert_eq!(columns.len(), basis.dim());
    Ok(MSBasis {
        basis: Arc::clone(basis),
        labels,
        columns,
    })
}
