//! Per-axis aggregate quantities shared by the fluid moments and the reduced system.

use serde::{Deserialize, Serialize};

/// The twelve aggregates attached to risk axis `i`.
///
/// `p*`/`d*` are total Credit and Loan-Repayment impulses, `pz*`/`dz*` their
/// position-weighted moments (`∫ x_i P_xi dz`, ...), and `ec*`/`er*` the
/// energy factors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisMoments {
    pub px: f64,
    pub py: f64,
    pub dx: f64,
    pub dy: f64,
    pub pzx: f64,
    pub pzy: f64,
    pub dzx: f64,
    pub dzy: f64,
    pub ecx: f64,
    pub ecy: f64,
    pub erx: f64,
    pub ery: f64,
}

impl AxisMoments {
    pub const LEN: usize = 12;

    /// Column labels for axis number `i` (1-based), in storage order.
    pub fn labels(i: usize) -> [String; Self::LEN] {
        [
            "Px", "Py", "Dx", "Dy", "Pzx", "Pzy", "Dzx", "Dzy", "ECx", "ECy", "ERx", "ERy",
        ]
        .map(|s| format!("{s}{i}"))
    }

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.px, self.py, self.dx, self.dy, self.pzx, self.pzy, self.dzx, self.dzy, self.ecx, self.ecy, self.erx,
            self.ery,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            px: v[0],
            py: v[1],
            dx: v[2],
            dy: v[3],
            pzx: v[4],
            pzy: v[5],
            dzx: v[6],
            dzy: v[7],
            ecx: v[8],
            ecy: v[9],
            erx: v[10],
            ery: v[11],
        }
    }
}

/// Energy factors of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisEnergies {
    pub ecx: f64,
    pub ecy: f64,
    pub erx: f64,
    pub ery: f64,
}
