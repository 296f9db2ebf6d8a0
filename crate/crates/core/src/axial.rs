//! Discretization of the winding direction `s` with quadratic elements.

use serde::Serialize;

use crate::error::{Error, Result};

/// Half of the 100 mm length inside the stator.
pub const SLOT_HALF_LENGTH: f64 = 50e-3;
/// Half of the 66.6 mm overhang length.
pub const OVERHANG_HALF_LENGTH: f64 = 33.3e-3;

/// Lateral boundary condition of an axial element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AxialRegime {
    /// Inside the stator; lateral surface adiabatic.
    Slot,
    /// Outside the stator; lateral surface spray cooled.
    Overhang,
}

/// Element breakpoints along `s` and the regime of each element. Every
/// element carries three nodes (ends and midpoint); neighbours share their
/// end node, so the node count is `2 * n_elements + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxialGrid {
    breakpoints: Vec<f64>,
    regimes: Vec<AxialRegime>,
}

impl AxialGrid {
    pub fn new(breakpoints: Vec<f64>, regimes: Vec<AxialRegime>) -> Result<Self> {
        if breakpoints.len() < 2 || regimes.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints need {} regimes, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                regimes.len()
            )));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "breakpoints must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self {
            breakpoints,
            regimes,
        })
    }

    /// `n_slot` uniform slot elements on `[0, slot_half]` followed by
    /// `n_overhang` uniform overhang elements up to `slot_half + overhang_half`.
    pub fn uniform(
        slot_half: f64,
        overhang_half: f64,
        n_slot: usize,
        n_overhang: usize,
    ) -> Result<Self> {
        if n_slot == 0 || n_overhang == 0 {
            return Err(Error::InvalidInput(format!(
                "need at least one slot and one overhang element, got ({n_slot}, {n_overhang})"
            )));
        }
        if !(slot_half > 0.0 && overhang_half > 0.0) {
            return Err(Error::InvalidInput("axial lengths must be positive".into()));
        }
        let mut bps: Vec<f64> = (0..=n_slot)
            .map(|i| slot_half * (i as f64 / n_slot as f64))
            .collect();
        bps.extend(
            (1..=n_overhang).map(|i| slot_half + overhang_half * (i as f64 / n_overhang as f64)),
        );
        let mut regimes = vec![AxialRegime::Slot; n_slot];
        regimes.extend(std::iter::repeat_n(AxialRegime::Overhang, n_overhang));
        Self::new(bps, regimes)
    }

    /// Half-winding grid with the default slot and overhang lengths.
    pub fn generate(n_slot: usize, n_overhang: usize) -> Result<Self> {
        Self::uniform(SLOT_HALF_LENGTH, OVERHANG_HALF_LENGTH, n_slot, n_overhang)
    }

    /// Uniform grid whose elements all share one regime.
    pub fn single_regime(length: f64, n: usize, regime: AxialRegime) -> Result<Self> {
        let bps = (0..=n).map(|i| length * i as f64 / n as f64).collect();
        Self::new(bps, vec![regime; n])
    }

    /// The grid reflected about `s = start`, concatenated with itself.
    pub fn mirrored(&self) -> Self {
        let s0 = self.start();
        let mut bps: Vec<f64> = self
            .breakpoints
            .iter()
            .rev()
            .map(|&s| 2.0 * s0 - s)
            .collect();
        bps.extend_from_slice(&self.breakpoints[1..]);
        let mut regimes: Vec<AxialRegime> = self.regimes.iter().rev().copied().collect();
        regimes.extend_from_slice(&self.regimes);
        Self {
            breakpoints: bps,
            regimes,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn regimes(&self) -> &[AxialRegime] {
        &self.regimes
    }

    pub fn n_elements(&self) -> usize {
        self.regimes.len()
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.n_elements() + 1
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        self.end() - self.start()
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.breakpoints[e], self.breakpoints[e + 1])
    }

    pub fn element_length(&self, e: usize) -> f64 {
        self.breakpoints[e + 1] - self.breakpoints[e]
    }

    /// Global node indices of element `e`: left end, midpoint, right end.
    pub fn element_nodes(&self, e: usize) -> [usize; 3] {
        [2 * e, 2 * e + 1, 2 * e + 2]
    }

    pub fn node_coords(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.n_nodes());
        for e in 0..self.n_elements() {
            let (a, b) = self.element_bounds(e);
            s.push(a);
            s.push(0.5 * (a + b));
        }
        s.push(self.end());
        s
    }

    /// End of the last slot element, or `start` when there is none.
    pub fn slot_end(&self) -> f64 {
        self.regimes
            .iter()
            .rposition(|&r| r == AxialRegime::Slot)
            .map_or(self.start(), |e| self.breakpoints[e + 1])
    }

    pub fn has_overhang(&self) -> bool {
        self.regimes.contains(&AxialRegime::Overhang)
    }

    /// Element containing `s` and the reference coordinate `ξ ∈ [-1, 1]`.
    /// Breakpoints belong to the element on their left, except `start`.
    pub fn locate(&self, s: f64) -> Result<(usize, f64)> {
        let tol = 1e-12 * self.length().max(1.0);
        if s < self.start() - tol || s > self.end() + tol {
            return Err(Error::OutsideAxialRange {
                s,
                start: self.start(),
                end: self.end(),
            });
        }
        let e = self
            .breakpoints
            .partition_point(|&b| b < s)
            .clamp(1, self.n_elements())
            - 1;
        let (a, b) = self.element_bounds(e);
        let xi = (2.0 * (s - a) / (b - a) - 1.0).clamp(-1.0, 1.0);
        Ok((e, xi))
    }
}
