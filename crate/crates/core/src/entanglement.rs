//! Positive-partial-transpose scan over every bipartition of a multimode state.
//!
//! Partial transposition of side B flips the sign of its `p` quadratures,
//! `V -> ΛVΛ`. The state is separable across the cut only if
//! `P = ΛVΛ − iJ ≥ 0`, so a negative smallest eigenvalue of `P` certifies
//! entanglement.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{hermitian_min_eigenvalue, GaussianState, SymplecticForm};
use crate::scalar::Real;

pub const MAX_MODES: usize = 24;

/// Split of `n_modes` modes into side A and side B (bit `i` set ⇔ mode `i` in B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bipartition {
    n_modes: usize,
    mask: u32,
}

impl Bipartition {
    /// Any mask with both sides non-empty; not canonicalized.
    pub fn new(n_modes: usize, mask: u32) -> Result<Self> {
        if !(2..=MAX_MODES).contains(&n_modes) {
            return Err(Error::InvalidParameter(format!(
                "bipartitions need 2..={MAX_MODES} modes, got {n_modes}"
            )));
        }
        let full = full_mask(n_modes);
        if mask & !full != 0 || mask == 0 || mask == full {
            return Err(Error::InvalidParameter(format!(
                "mask {mask:#b} is not a proper split of {n_modes} modes"
            )));
        }
        Ok(Self { n_modes, mask })
    }

    /// Builds the split with `side_b` on side B, then canonicalizes.
    pub fn from_side_b(n_modes: usize, side_b: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &i in side_b {
            if i >= n_modes {
                return Err(Error::InvalidParameter(format!("mode {i} out of range")));
            }
            mask |= 1 << i;
        }
        Ok(Self::new(n_modes, mask)?.canonical())
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Representative with mode 0 on side A.
    pub fn canonical(&self) -> Self {
        if self.mask & 1 == 1 {
            self.complement()
        } else {
            *self
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            n_modes: self.n_modes,
            mask: !self.mask & full_mask(self.n_modes),
        }
    }

    pub fn in_side_b(&self, mode: usize) -> bool {
        self.mask >> mode & 1 == 1
    }

    pub fn side_a(&self) -> Vec<usize> {
        (0..self.n_modes).filter(|&i| !self.in_side_b(i)).collect()
    }

    pub fn side_b(&self) -> Vec<usize> {
        (0..self.n_modes).filter(|&i| self.in_side_b(i)).collect()
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<usize>| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{{{}}}|{{{}}}", join(self.side_a()), join(self.side_b()))
    }
}

fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// All `2^{n−1} − 1` canonical bipartitions in ascending mask order.
pub fn enumerate_bipartitions(n: usize) -> Result<Vec<Bipartition>> {
    if !(2..=MAX_MODES).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "bipartitions need 2..={MAX_MODES} modes, got {n}"
        )));
    }
    Ok((1..full_mask(n))
        .filter(|m| m & 1 == 0)
        .map(|mask| Bipartition { n_modes: n, mask })
        .collect())
}

/// Which priority pair a bipartition separates first. Mode indices are
/// 0-based; the text label counts frexels from 1, so `Splits(3, 4)` reads
/// `splits-4-5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BandClass {
    Splits(usize, usize),
    SplitsNone,
}

impl fmt::Display for BandClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandClass::Splits(a, b) => write!(f, "splits-{}-{}", a + 1, b + 1),
            BandClass::SplitsNone => f.write_str("splits-none"),
        }
    }
}

impl Serialize for BandClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BandClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "splits-none" {
            return Ok(BandClass::SplitsNone);
        }
        let bad = || serde::de::Error::custom(format!("unknown band class '{s}'"));
        let rest = s.strip_prefix("splits-").ok_or_else(bad)?;
        let (a, b) = rest.split_once('-').ok_or_else(bad)?;
        let index = |t: &str| match t.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(bad()),
        };
        Ok(BandClass::Splits(index(a)?, index(b)?))
    }
}

/// First pair (in the given priority order) whose members sit on opposite sides.
pub fn classify_band(bp: &Bipartition, frexel_pairs: &[(usize, usize)]) -> BandClass {
    frexel_pairs
        .iter()
        .find(|&&(a, b)| a < bp.n_modes && b < bp.n_modes && bp.in_side_b(a) != bp.in_side_b(b))
        .map(|&(a, b)| BandClass::Splits(a, b))
        .unwrap_or(BandClass::SplitsNone)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PptResult {
    pub bipartition: Bipartition,
    pub ppt_value: f64,
    pub entangled: bool,
    pub band_class: BandClass,
}

/// Smallest eigenvalue of `ΛVΛ − iJ` for side B of `bp` transposed.
pub fn ppt_eigenvalue<T: Real>(state: &GaussianState<T>, bp: &Bipartition) -> Result<T> {
    let n = state.n_modes();
    if bp.n_modes != n {
        return Err(Error::InvalidParameter(format!(
            "bipartition of {} modes applied to a {n}-mode state",
            bp.n_modes
        )));
    }
    let mut v = state.full_matrix();
    // Λ = diag(1..1, d) with d = −1 on side B: only the p block changes
    for i in 0..n {
        for j in 0..n {
            if bp.in_side_b(i) != bp.in_side_b(j) {
                v[(n + i, n + j)] = -v[(n + i, n + j)];
            }
        }
    }
    let minus_j: DMatrix<T> = -SymplecticForm::new(n).matrix::<T>();
    hermitian_min_eigenvalue(&v, &minus_j).ok_or_else(|| {
        Error::Numerical(format!(
            "PPT eigensolve did not converge for {bp}: max |V| = {}, tr V = {}",
            v.amax(),
            v.trace()
        ))
    })
}

pub fn ppt_value<T: Real>(
    state: &GaussianState<T>,
    bp: &Bipartition,
    frexel_pairs: &[(usize, usize)],
) -> Result<PptResult> {
    let value = ppt_eigenvalue(state, bp)?;
    Ok(PptResult {
        bipartition: *bp,
        ppt_value: value.as_f64(),
        entangled: value < -T::eig_tol(),
        band_class: classify_band(bp, frexel_pairs),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub band_class: BandClass,
    pub count: usize,
    pub entangled: usize,
    pub median_ppt_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PptScan {
    /// Ascending by PPT value, ties by mask.
    pub results: Vec<PptResult>,
    /// One entry per priority pair, then `splits-none`.
    pub bands: Vec<BandSummary>,
    pub n_bipartitions: usize,
    pub n_entangled: usize,
}

impl PptScan {
    pub fn band(&self, class: BandClass) -> Option<&BandSummary> {
        self.bands.iter().find(|b| b.band_class == class)
    }

    /// `rank,mask,side_a,side_b,ppt_value,entangled,band_class`; `rank` is the
    /// position in the sorted scan, ready to plot.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "rank",
            "mask",
            "side_a",
            "side_b",
            "ppt_value",
            "entangled",
            "band_class",
        ])?;
        let join = |v: Vec<usize>| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        for (rank, r) in self.results.iter().enumerate() {
            w.write_record([
                rank.to_string(),
                r.bipartition.mask.to_string(),
                join(r.bipartition.side_a()),
                join(r.bipartition.side_b()),
                format!("{:e}", r.ppt_value),
                r.entangled.to_string(),
                r.band_class.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }
}

/// PPT value of every canonical bipartition, evaluated in parallel.
pub fn ppt_scan<T: Real>(
    state: &GaussianState<T>,
    frexel_pairs: &[(usize, usize)],
) -> Result<PptScan> {
    let bps = enumerate_bipartitions(state.n_modes())?;
    let mut results: Vec<PptResult> = bps
        .par_iter()
        .map(|bp| ppt_value(state, bp, frexel_pairs))
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| {
        a.ppt_value
            .partial_cmp(&b.ppt_value)
            .unwrap_or(Ordering::Equal)
            .then(a.bipartition.mask.cmp(&b.bipartition.mask))
    });

    let classes = frexel_pairs
        .iter()
        .map(|&(a, b)| BandClass::Splits(a, b))
        .chain(std::iter::once(BandClass::SplitsNone));
    let mut bands = Vec::new();
    for class in classes {
        if bands.iter().any(|b: &BandSummary| b.band_class == class) {
            continue;
        }
        // results are sorted, so the members are too
        let values: Vec<f64> = results
            .iter()
            .filter(|r| r.band_class == class)
            .map(|r| r.ppt_value)
            .collect();
        bands.push(BandSummary {
            band_class: class,
            count: values.len(),
            entangled: results
                .iter()
                .filter(|r| r.band_class == class && r.entangled)
                .count(),
            median_ppt_value: median_sorted(&values),
        });
    }
    let n_entangled = results.iter().filter(|r| r.entangled).count();
    Ok(PptScan {
        n_bipartitions: results.len(),
        n_entangled,
        results,
        bands,
    })
}

fn median_sorted(v: &[f64]) -> Option<f64> {
    match v.len() {
        0 => None,
        n if n % 2 == 1 => Some(v[n / 2]),
        n => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::make_squeezed_vacuum;

    const PAIRS: [(usize, usize); 3] = [(4, 5), (3, 6), (2, 7)];

    #[test]
    fn counts() {
        assert_eq!(enumerate_bipartitions(2).unwrap().len(), 1);
        assert_eq!(enumerate_bipartitions(8).unwrap().len(), 127);
        assert!(enumerate_bipartitions(1).is_err());
        assert!(enumerate_bipartitions(25).is_err());
    }

    #[test]
    fn three_mode_enumeration() {
        let names: Vec<String> = enumerate_bipartitions(3)
            .unwrap()
            .iter()
            .map(|b| b.to_string())
            .collect();
        assert_eq!(names, ["{0,2}|{1}", "{0,1}|{2}", "{0}|{1,2}"]);
    }

    #[test]
    fn canonical_form() {
        let bp = Bipartition::new(4, 0b0011).unwrap();
        assert_eq!(bp.canonical().mask(), 0b1100);
        assert!(Bipartition::new(4, 0).is_err());
        assert!(Bipartition::new(4, 0b1111).is_err());
        assert!(Bipartition::new(4, 0b10000).is_err());
    }

    #[test]
    fn band_rules() {
        let split45 = Bipartition::from_side_b(8, &[5]).unwrap();
        assert_eq!(classify_band(&split45, &PAIRS), BandClass::Splits(4, 5));
        let lone0 = Bipartition::from_side_b(8, &[1, 2, 3, 4, 5, 6, 7]).unwrap();
        assert_eq!(classify_band(&lone0, &PAIRS), BandClass::SplitsNone);
        let halves = Bipartition::from_side_b(8, &[4, 5, 6, 7]).unwrap();
        assert_eq!(classify_band(&halves, &PAIRS), BandClass::Splits(3, 6));
        assert_eq!(BandClass::Splits(3, 4).to_string(), "splits-4-5");
    }

    #[test]
    fn band_class_serde() {
        for c in [BandClass::Splits(2, 7), BandClass::SplitsNone] {
            let s = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<BandClass>(&s).unwrap(), c);
        }
        assert!(serde_json::from_str::<BandClass>("\"splits-0-1\"").is_err());
    }

    #[test]
    fn vacuum_is_on_the_boundary() {
        let scan = ppt_scan(&GaussianState::<f64>::vacuum(8, "v"), &PAIRS).unwrap();
        assert_eq!(scan.n_bipartitions, 127);
        assert!(scan
            .results
            .iter()
            .all(|r| r.ppt_value.abs() < 1e-9 && !r.entangled));
    }

    #[test]
    fn product_of_squeezers_is_separable() {
        let s = make_squeezed_vacuum(&[0.3f64, -0.2, 0.5, 0.1]).unwrap();
        let scan = ppt_scan(&s, &[]).unwrap();
        assert_eq!(scan.n_entangled, 0);
        assert!(scan.results[0].ppt_value >= -1e-9);
    }

    #[test]
    fn two_mode_squeezed_oracle() {
        // r and −r squeezers on a balanced beam splitter
        let r = 0.5f64;
        let s = make_squeezed_vacuum(&[r, -r]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bs = DMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        let tmsv = s.transform(&bs, "tmsv").unwrap();
        let bp = Bipartition::new(2, 0b10).unwrap();
        let v = ppt_value(&tmsv, &bp, &[]).unwrap();
        assert!((v.ppt_value - ((-2.0 * r).exp() - 1.0)).abs() < 1e-9);
        assert!(v.entangled);
    }

    #[test]
    fn complement_is_bitwise_identical() {
        let s = make_squeezed_vacuum(&[0.4f64, -0.3, 0.2]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mix = DMatrix::from_row_slice(3, 3, &[h, h, 0.0, 0.5, -0.5, h, 0.5, -0.5, -h]);
        let s = s.transform(&mix, "mixed").unwrap();
        for bp in enumerate_bipartitions(3).unwrap() {
            let a = ppt_eigenvalue(&s, &bp).unwrap();
            let b = ppt_eigenvalue(&s, &bp.complement()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn single_precision() {
        let r = 0.5f32;
        let s = make_squeezed_vacuum(&[r, -r]).unwrap();
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let tmsv = s
            .transform(&DMatrix::from_row_slice(2, 2, &[h, h, h, -h]), "tmsv")
            .unwrap();
        let v = ppt_eigenvalue(&tmsv, &Bipartition::new(2, 0b10).unwrap()).unwrap();
        assert!((v - ((-2.0 * r).exp() - 1.0)).abs() < 1e-5);
    }
}
