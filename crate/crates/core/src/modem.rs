//! Gray-mapped constellations and hard-decision bit/symbol conversion.
//!
//! Every scheme is a rectangular grid of `levels_i x levels_q` points
//! (BPSK is the degenerate `2 x 1` grid). A label is `(gray_i << bits_q) |
//! gray_q`, with level index 0 at the most positive amplitude on each axis,
//! so bit 0 always selects the positive half-plane. Constellations are scaled
//! to unit average symbol energy.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulation identifiers. The discriminant is the 3-bit wire id used in
/// frame headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    NoTx = 0,
    Bpsk = 1,
    Qpsk = 2,
    Qam8 = 3,
    Qam16 = 4,
    Qam32 = 5,
    Qam64 = 6,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::NoTx,
        SchemeId::Bpsk,
        SchemeId::Qpsk,
        SchemeId::Qam8,
        SchemeId::Qam16,
        SchemeId::Qam32,
        SchemeId::Qam64,
    ];

    /// The schemes that carry data, in increasing order.
    pub const ACTIVE: [SchemeId; 6] = [
        SchemeId::Bpsk,
        SchemeId::Qpsk,
        SchemeId::Qam8,
        SchemeId::Qam16,
        SchemeId::Qam32,
        SchemeId::Qam64,
    ];

    /// The mandatory set {2, 4, 16, 64}.
    pub const CORE: [SchemeId; 4] = [
        SchemeId::Bpsk,
        SchemeId::Qpsk,
        SchemeId::Qam16,
        SchemeId::Qam64,
    ];

    pub fn order(self) -> usize {
        match self {
            SchemeId::NoTx => 0,
            SchemeId::Bpsk => 2,
            SchemeId::Qpsk => 4,
            SchemeId::Qam8 => 8,
            SchemeId::Qam16 => 16,
            SchemeId::Qam32 => 32,
            SchemeId::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            SchemeId::NoTx => 0,
            other => other.order().trailing_zeros() as usize,
        }
    }

    /// Number of amplitude levels on the in-phase and quadrature axes.
    pub fn grid(self) -> (usize, usize) {
        match self {
            SchemeId::NoTx => (0, 0),
            SchemeId::Bpsk => (2, 1),
            SchemeId::Qpsk => (2, 2),
            SchemeId::Qam8 => (4, 2),
            SchemeId::Qam16 => (4, 4),
            SchemeId::Qam32 => (8, 4),
            SchemeId::Qam64 => (8, 8),
        }
    }

    pub fn wire_id(self) -> u8 {
        self as u8
    }

    pub fn from_wire_id(id: u8) -> Option<SchemeId> {
        SchemeId::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::NoTx => "notx",
            SchemeId::Bpsk => "bpsk",
            SchemeId::Qpsk => "qpsk",
            SchemeId::Qam8 => "qam8",
            SchemeId::Qam16 => "qam16",
            SchemeId::Qam32 => "qam32",
            SchemeId::Qam64 => "qam64",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

fn gray(n: usize) -> usize {
    n ^ (n >> 1)
}

/// One axis of a rectangular constellation: `levels` amplitudes
/// `(levels - 1 - 2j) * scale` for level index `j`, labelled `gray(j)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Axis {
    pub levels: usize,
    pub bits: usize,
    pub scale: f64,
    /// Level index for each Gray label.
    index_of_label: Vec<usize>,
}

impl Axis {
    fn new(levels: usize, scale: f64) -> Self {
        let mut index_of_label = vec![0; levels];
        for j in 0..levels {
            index_of_label[gray(j)] = j;
        }
        Axis {
            levels,
            bits: levels.trailing_zeros() as usize,
            scale,
            index_of_label,
        }
    }

    pub fn amplitude(&self, index: usize) -> f64 {
        (self.levels as f64 - 1.0 - 2.0 * index as f64) * self.scale
    }

    fn amplitude_of_label(&self, label: usize) -> f64 {
        self.amplitude(self.index_of_label[label])
    }

    /// Gray label of the nearest level; an exact midpoint goes to the lower label.
    fn slice(&self, x: f64) -> usize {
        if self.levels == 1 {
            return 0;
        }
        let top = (self.levels - 1) as f64;
        let t = ((top - x / self.scale) * 0.5).clamp(0.0, top);
        let lo = t.floor();
        let frac = t - lo;
        let lo = lo as usize;
        let index = if frac < 0.5 || lo + 1 == self.levels {
            lo
        } else if frac > 0.5 {
            lo + 1
        } else if gray(lo) < gray(lo + 1) {
            lo
        } else {
            lo + 1
        };
        gray(index)
    }
}

/// A Gray-labelled constellation with unit mean symbol energy.
///
/// `points()[label]` is the point carrying `label`, so the label list is the
/// identity permutation of `0..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationScheme {
    id: SchemeId,
    axis_i: Axis,
    axis_q: Axis,
    points: Vec<Complex64>,
}

impl ModulationScheme {
    pub fn new(id: SchemeId) -> Self {
        let (li, lq) = id.grid();
        if id == SchemeId::NoTx {
            return ModulationScheme {
                id,
                axis_i: Axis::new(1, 0.0),
                axis_q: Axis::new(1, 0.0),
                points: Vec::new(),
            };
        }
        // mean of (L-1-2j)^2 over j is (L^2 - 1) / 3
        let raw_energy = ((li * li - 1) + (lq * lq - 1)) as f64 / 3.0;
        let scale = 1.0 / raw_energy.sqrt();
        let axis_i = Axis::new(li, scale);
        let axis_q = Axis::new(lq, scale);
        let points = (0..li * lq)
            .map(|label| {
                let gi = label >> axis_q.bits;
                let gq = label & ((1 << axis_q.bits) - 1);
                let q = if lq == 1 { 0.0 } else { axis_q.amplitude_of_label(gq) };
                Complex64::new(axis_i.amplitude_of_label(gi), q)
            })
            .collect();
        ModulationScheme {
            id,
            axis_i,
            axis_q,
            points,
        }
    }

    pub fn id(&self) -> SchemeId {
        self.id
    }

    pub fn order(&self) -> usize {
        self.id.order()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.id.bits_per_symbol()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.points.len()).collect()
    }

    /// Smallest distance between two distinct points.
    pub fn min_distance(&self) -> f64 {
        2.0 * self.axis_i.scale
    }

    #[cfg(test)]
    pub(crate) fn axes(&self) -> (&Axis, &Axis) {
        (&self.axis_i, &self.axis_q)
    }

    /// Label of the Euclidean-nearest point, ties resolved to the lowest label.
    ///
    /// The grid is separable, so the nearest point is the per-axis nearest
    /// level on each axis; the I bits are the label's most significant bits,
    /// which makes per-axis low-label tie breaking the global one.
    pub fn nearest_label(&self, s: Complex64) -> usize {
        let gi = self.axis_i.slice(s.re);
        let gq = self.axis_q.slice(s.im);
        (gi << self.axis_q.bits) | gq
    }
}

/// Builds the constellation for `id`. `NoTx` yields an empty constellation.
pub fn build_scheme(id: SchemeId) -> ModulationScheme {
    ModulationScheme::new(id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub symbols: Vec<Complex64>,
    pub scheme_id: SchemeId,
}

impl SymbolBlock {
    pub fn new(symbols: Vec<Complex64>, scheme_id: SchemeId) -> Self {
        SymbolBlock { symbols, scheme_id }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Maps MSB-first groups of `k` bits onto constellation points.
pub fn map_bits(bits: &[u8], scheme: &ModulationScheme) -> Result<SymbolBlock> {
    let k = scheme.bits_per_symbol();
    if k == 0 {
        return Err(Error::NoTxScheme);
    }
    if bits.len() % k != 0 {
        return Err(Error::LengthError {
            len: bits.len(),
            bits_per_symbol: k,
        });
    }
    let mut symbols = Vec::with_capacity(bits.len() / k);
    for (g, group) in bits.chunks_exact(k).enumerate() {
        let mut label = 0usize;
        for (i, &b) in group.iter().enumerate() {
            if b > 1 {
                return Err(Error::InvalidBit(b, g * k + i));
            }
            label = (label << 1) | b as usize;
        }
        symbols.push(scheme.points[label]);
    }
    Ok(SymbolBlock::new(symbols, scheme.id))
}

/// Hard-decision demapping with `scheme`, whatever scheme produced the symbols.
pub fn demap_symbols(symbols: &[Complex64], scheme: &ModulationScheme) -> Result<Vec<u8>> {
    let k = scheme.bits_per_symbol();
    if k == 0 {
        return Err(Error::NoTxScheme);
    }
    let mut bits = Vec::with_capacity(symbols.len() * k);
    for &s in symbols {
        let label = scheme.nearest_label(s);
        bits.extend((0..k).rev().map(|i| ((label >> i) & 1) as u8));
    }
    Ok(bits)
}
