//! Exact database-level Grover reference: Householder reflections, the
//! Grover operator, the minimal step count, and closed-form evolution.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{IgsError, Result};

/// An abstract search database with one marked element.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Database {
    pub dimension: usize,
    pub marked: usize,
}

impl Database {
    pub fn new(dimension: usize, marked: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(IgsError::Config(format!(
                "database dimension must be >= 2, got {dimension}"
            )));
        }
        if marked >= dimension {
            return Err(IgsError::Config(format!(
                "marked index {marked} out of range 0..{dimension}"
            )));
        }
        Ok(Self { dimension, marked })
    }
}

/// Equal superposition of all basis elements.
pub fn uniform_state(db: &Database) -> Array1<C64> {
    Array1::from_elem(db.dimension, C64::new(1.0 / (db.dimension as f64).sqrt(), 0.0))
}

/// Householder reflection `1 + (e^{iφ} - 1)|ψ⟩⟨ψ|`.
pub fn householder(psi: &Array1<C64>, phi: f64) -> Result<Array2<C64>> {
    let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(IgsError::Config(format!(
            "householder axis not normalized: ‖ψ‖ = {norm}"
        )));
    }
    let n = psi.len();
    let factor = C64::from_polar(1.0, phi) - 1.0;
    let mut m = Array2::eye(n);
    for r in 0..n {
        for c in 0..n {
            m[(r, c)] += factor * psi[r] * psi[c].conj();
        }
    }
    Ok(m)
}

/// Apply `M_ψ(φ)` in O(n) via the rank-one update.
pub fn apply_householder(psi: &Array1<C64>, phi: f64, state: &mut Array1<C64>) {
    let overlap: C64 = psi.iter().zip(state.iter()).map(|(p, s)| p.conj() * s).sum();
    let factor = (C64::from_polar(1.0, phi) - 1.0) * overlap;
    for (s, p) in state.iter_mut().zip(psi.iter()) {
        *s += factor * p;
    }
}

/// The Grover operator `G = M_W(φ_W) · M_s(φ_s)` (oracle applied first).
pub fn grover_operator(db: &Database, phi_w: f64, phi_s: f64) -> Array2<C64> {
    let w = uniform_state(db);
    let mut marked = Array1::zeros(db.dimension);
    marked[db.marked] = C64::new(1.0, 0.0);
    let m_w = householder(&w, phi_w).expect("uniform state is normalized");
    let m_s = householder(&marked, phi_s).expect("basis state is normalized");
    m_w.dot(&m_s)
}

/// Minimum number of search steps at matched phases `φ = π`:
/// integer part of `π / (2·arcsin(2√(N-1)/N))`.
pub fn min_steps(n_db: usize) -> usize {
    assert!(n_db >= 2);
    let n = n_db as f64;
    let theta = (2.0 * (n - 1.0).sqrt() / n).asin();
    (std::f64::consts::PI / (2.0 * theta)).floor() as usize
}

/// Marked-state population after each of `n_steps` Grover applications to
/// the uniform state, using the O(N) rank-one apply path.
pub fn run_ideal(db: &Database, phi_w: f64, phi_s: f64, n_steps: usize) -> Vec<f64> {
    let w = uniform_state(db);
    let mut marked = Array1::zeros(db.dimension);
    marked[db.marked] = C64::new(1.0, 0.0);
    let mut state = w.clone();
    let mut trace = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        apply_householder(&marked, phi_s, &mut state);
        apply_householder(&w, phi_w, &mut state);
        trace.push(state[db.marked].norm_sqr());
    }
    trace
}

/// Closed-form marked population `sin²((2k+1)θ)`, `sinθ = 1/√N`, valid for
/// `φ_W = φ_s = π`. Used as an independent oracle in tests.
pub fn closed_form_population(n_db: usize, k: usize) -> f64 {
    let theta = (1.0 / (n_db as f64).sqrt()).asin();
    ((2 * k + 1) as f64 * theta).sin().powi(2)
}
