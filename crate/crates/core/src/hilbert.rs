//! Enumeration and indexing of the conserved-excitation sector.
//!
//! The red-sideband Hamiltonian conserves the total number of excitations
//! (ionic plus motional), fixed here to `N/2`. The sector basis lists every
//! ket `|ion_bits, n_p⟩` with `popcount(ion_bits) + n_p = N/2`, grouped in
//! blocks of descending ionic excitation number so that the zero-phonon
//! database manifold `D` occupies the first `C(N, N/2)` positions.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{IgsError, Result};

/// Binomial coefficient C(n, k); zero outside the Pascal triangle.
pub fn binomial(n: u32, k: i64) -> u64 {
    if k < 0 || k as u64 > n as u64 {
        return 0;
    }
    let k = (k as u64).min(n as u64 - k as u64);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n as u64 - i) / (i + 1);
    }
    acc
}

/// Number of ions in the chain and the conserved excitation count `N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IonConfig {
    n_ions: u32,
}

impl IonConfig {
    /// `n_ions` must be even and at least 2.
    pub fn new(n_ions: u32) -> Result<Self> {
        if n_ions < 2 || n_ions % 2 != 0 {
            return Err(IgsError::Config(format!(
                "n_ions must be even and >= 2, got {n_ions}"
            )));
        }
        Ok(Self { n_ions })
    }

    pub fn n_ions(&self) -> u32 {
        self.n_ions
    }

    /// Total conserved excitation number, `N/2`.
    pub fn excitations(&self) -> u32 {
        self.n_ions / 2
    }

    /// Bitmask with every ion addressed.
    pub fn all_ions_mask(&self) -> u32 {
        (1u32 << self.n_ions) - 1
    }
}

/// A computational basis ket of the sector: internal bitstring plus phonons.
///
/// Bit convention: ion `k` (1-based) is bit `k-1`, so the paper's state
/// string `"111000"` (ion 1 leftmost) maps to `ion_bits = 0b000111`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisKet {
    pub ion_bits: u32,
    pub phonons: u32,
}

impl BasisKet {
    pub fn n_ionic(&self) -> u32 {
        self.ion_bits.count_ones()
    }

    /// Render the ion bitstring with ion 1 as the leftmost character.
    pub fn bits_string(&self, n_ions: u32) -> String {
        (0..n_ions)
            .map(|k| if self.ion_bits >> k & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for BasisKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{:b},{}⟩", self.ion_bits, self.phonons)
    }
}

/// Parse a marked-state string like `"111000"` (ion 1 leftmost) into a
/// bitmask with the crate's bit convention.
pub fn parse_bits_string(s: &str, n_ions: u32) -> Result<u32> {
    if s.len() != n_ions as usize {
        return Err(IgsError::InvalidMarkedState(format!(
            "expected {} characters, got {}",
            n_ions,
            s.len()
        )));
    }
    let mut bits = 0u32;
    for (k, c) in s.chars().enumerate() {
        match c {
            '1' => bits |= 1 << k,
            '0' => {}
            _ => {
                return Err(IgsError::InvalidMarkedState(format!(
                    "invalid character '{c}' in bitstring"
                )))
            }
        }
    }
    Ok(bits)
}

/// Ordered basis of the `n_i + n_p = N/2` sector with ket → index lookup.
#[derive(Debug)]
pub struct SectorBasis {
    config: IonConfig,
    kets: Vec<BasisKet>,
    index: HashMap<BasisKet, usize>,
}

impl SectorBasis {
    pub fn config(&self) -> IonConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.kets.len()
    }

    pub fn kets(&self) -> &[BasisKet] {
        &self.kets
    }

    pub fn ket(&self, i: usize) -> BasisKet {
        self.kets[i]
    }

    pub fn index_of(&self, ket: &BasisKet) -> Option<usize> {
        self.index.get(ket).copied()
    }

    /// Dimension of the database manifold `D` (the `n_p = 0` block).
    pub fn database_dim(&self) -> usize {
        database_dimension(self.config) as usize
    }
}

/// Build the sector basis: blocks of descending `n_i` starting with the
/// database manifold, ascending `ion_bits` within each block.
pub fn build_sector_basis(config: IonConfig) -> Arc<SectorBasis> {
    let n = config.n_ions();
    let half = config.excitations();
    let mut kets = Vec::new();
    for n_i in (0..=half).rev() {
        let n_p = half - n_i;
        for bits in 0u32..1 << n {
            if bits.count_ones() == n_i {
                kets.push(BasisKet {
                    ion_bits: bits,
                    phonons: n_p,
                });
            }
        }
    }
    let index = kets.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    Arc::new(SectorBasis {
        config,
        kets,
        index,
    })
}

/// Size of the search database, `C(N, N/2)`.
pub fn database_dimension(config: IonConfig) -> u64 {
    binomial(config.n_ions(), config.excitations() as i64)
}

/// The zero-phonon ket encoding a marked database element.
pub fn marked_ket(config: IonConfig, bits: u32) -> Result<BasisKet> {
    if bits >= 1 << config.n_ions() {
        return Err(IgsError::InvalidMarkedState(format!(
            "bitmask {bits:#b} has more than {} ions",
            config.n_ions()
        )));
    }
    if bits.count_ones() != config.excitations() {
        return Err(IgsError::InvalidMarkedState(format!(
            "marked state must have exactly {} excited ions, got {}",
            config.excitations(),
            bits.count_ones()
        )));
    }
    Ok(BasisKet {
        ion_bits: bits,
        phonons: 0,
    })
}

/// Normalized complex amplitude vector over a shared sector basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub basis: Arc<SectorBasis>,
    pub amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn zero(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        Self {
            basis,
            amplitudes: Array1::zeros(dim),
        }
    }

    /// Basis ket `|i⟩` as a state vector.
    pub fn basis_state(basis: Arc<SectorBasis>, i: usize) -> Self {
        let mut s = Self::zero(basis);
        s.amplitudes[i] = C64::new(1.0, 0.0);
        s
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Population of a single basis ket.
    pub fn population(&self, ket: &BasisKet) -> f64 {
        match self.basis.index_of(ket) {
            Some(i) => self.amplitudes[i].norm_sqr(),
            None => 0.0,
        }
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.mapv_inplace(|a| a / n);
        }
    }
}
