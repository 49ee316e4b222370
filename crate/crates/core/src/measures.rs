//! Finitely supported probability measures on the real line.

use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Weight sums within this distance of 1 are accepted as-is.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;
/// Weight sums within this distance of 1 are renormalized; beyond it they are rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

/// A discrete probability measure `sum_i w_i * delta(z_i)`.
///
/// Atoms are kept as given: no sorting and no merging of duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            atoms: m.atoms,
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return domain("a measure needs at least one atom");
        }
        if atoms.len() != weights.len() {
            return domain(format!("{} atoms but {} weights", atoms.len(), weights.len()));
        }
        if let Some(z) = atoms.iter().find(|z| !z.is_finite()) {
            return domain(format!("atom {z} is not finite"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return domain(format!("weight {w} is not a finite nonnegative number"));
        }
        let total: f64 = weights.iter().sum();
        let drift = (total - 1.0).abs();
        if drift > RENORMALIZE_TOLERANCE {
            return domain(format!("weights sum to {total}, not 1"));
        }
        if drift > WEIGHT_SUM_TOLERANCE {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// Point mass at `z`.
    pub fn dirac(z: f64) -> Result<Self> {
        Self::new(vec![z], vec![1.0])
    }

    /// Between 1 and `max_atoms` atoms drawn uniformly from `[lo, hi)` with
    /// random positive weights.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_atoms: usize, lo: f64, hi: f64) -> Result<Self> {
        if max_atoms == 0 || lo.is_nan() || hi.is_nan() || lo >= hi {
            return domain("random measure needs atoms and a nonempty range");
        }
        let n = rng.random_range(1..=max_atoms);
        let atoms: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        Self::new(atoms, raw.into_iter().map(|w| w / total).collect())
    }

    /// Equal weights on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of atoms, duplicates included.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(atom, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// Image under `z -> reward + gamma * z`.
    pub fn pushforward_affine(&self, reward: f64, gamma: f64) -> DiscreteMeasure {
        DiscreteMeasure {
            atoms: self.atoms.iter().map(|z| reward + gamma * z).collect(),
            weights: self.weights.clone(),
        }
    }

    /// `sum_i probs[i] * measures[i]`, atoms concatenated in order.
    pub fn mixture(measures: &[DiscreteMeasure], probs: &[f64]) -> Result<DiscreteMeasure> {
        if measures.is_empty() {
            return domain("mixture of an empty list");
        }
        if measures.len() != probs.len() {
            return domain(format!(
                "{} measures but {} mixture probabilities",
                measures.len(),
                probs.len()
            ));
        }
        let total: usize = measures.iter().map(DiscreteMeasure::len).sum();
        let mut atoms = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for (m, &p) in measures.iter().zip(probs) {
            atoms.extend_from_slice(&m.atoms);
            weights.extend(m.weights.iter().map(|w| w * p));
        }
        DiscreteMeasure::new(atoms, weights)
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(z, w)| w * z).sum()
    }

    /// Raw moment `sum w z^n`, or the central moment about the mean when `central`
    /// is set. The first central moment is reported as the mean itself.
    pub fn moment(&self, n: u32, central: bool) -> Result<f64> {
        if n == 0 {
            return domain("moment order must be >= 1");
        }
        let shift = match (central, n) {
            (true, 1) | (false, _) => 0.0,
            (true, _) => self.mean(),
        };
        Ok(self.iter().map(|(z, w)| w * (z - shift).powi(n as i32)).sum())
    }

    /// Writes `atom,weight` rows with a header line.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["atom", "weight"])?;
        for (z, p) in self.iter() {
            w.write_record([z.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            atom: f64,
            weight: f64,
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            atoms.push(row.atom);
            weights.push(row.weight);
        }
        Self::new(atoms, weights)
    }
}

/// `N` equally weighted particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParticleSet {
    particles: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ParticleSet {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParticleSet::new(v)
    }
}

impl From<ParticleSet> for Vec<f64> {
    fn from(p: ParticleSet) -> Self {
        p.particles
    }
}

impl ParticleSet {
    pub fn new(particles: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return domain("a particle set needs at least one particle");
        }
        if let Some(z) = particles.iter().find(|z| !z.is_finite()) {
            return domain(format!("particle {z} is not finite"));
        }
        Ok(ParticleSet { particles })
    }

    /// `n` copies of `value`.
    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.particles
    }

    /// Mutable access for in-place updates. Callers are responsible for
    /// keeping the particles finite.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.particles
    }

    pub fn mean(&self) -> f64 {
        self.particles.iter().sum::<f64>() / self.particles.len() as f64
    }

    pub fn to_measure(&self) -> DiscreteMeasure {
        let w = 1.0 / self.particles.len() as f64;
        DiscreteMeasure {
            atoms: self.particles.clone(),
            weights: vec![w; self.particles.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(atoms: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(DiscreteMeasure::new(vec![], vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![-0.1, 1.1]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        // duplicates and zero weights are fine
        assert!(DiscreteMeasure::new(vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]).is_ok());
    }

    #[test]
    fn small_drift_is_renormalized() {
        let d = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5 + 5e-10]).unwrap();
        let total: f64 = d.weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-15);
        let exact = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5 + 5e-13]).unwrap();
        assert_eq!(exact.weights()[1], 0.5 + 5e-13);
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5 + 2e-9]).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let d = DiscreteMeasure::dirac(0.0).unwrap().pushforward_affine(1.0, 0.9);
        assert_eq!(d, DiscreteMeasure::dirac(1.0).unwrap());
        let two = m(&[0.0, 1.0], &[0.5, 0.5]).pushforward_affine(1.0, 0.9);
        assert_eq!(two.atoms(), &[1.0, 1.9]);
        assert_eq!(two.weights(), &[0.5, 0.5]);
        let x = m(&[-0.3, 2.0, 7.5], &[0.2, 0.3, 0.5]);
        assert_eq!(x.pushforward_affine(0.0, 1.0), x);
    }

    #[test]
    fn mixture_examples() {
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        let d1 = DiscreteMeasure::dirac(1.0).unwrap();
        let mix = DiscreteMeasure::mixture(&[d0.clone(), d1], &[0.5, 0.5]).unwrap();
        assert_eq!(mix, m(&[0.0, 1.0], &[0.5, 0.5]));
        let x = m(&[-0.3, 2.0], &[0.25, 0.75]);
        assert_eq!(DiscreteMeasure::mixture(std::slice::from_ref(&x), &[1.0]).unwrap(), x);
        let same = DiscreteMeasure::mixture(&[d0.clone(), d0], &[0.3, 0.7]).unwrap();
        assert_eq!(same.atoms(), &[0.0, 0.0]);
        assert_eq!(same.mean(), 0.0);
        assert!(DiscreteMeasure::mixture(&[], &[]).is_err());
        assert!(DiscreteMeasure::mixture(std::slice::from_ref(&x), &[0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::mixture(&[x.clone(), x], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn moment_examples() {
        assert_eq!(DiscreteMeasure::dirac(3.5).unwrap().moment(1, false).unwrap(), 3.5);
        assert_eq!(DiscreteMeasure::dirac(3.5).unwrap().moment(1, true).unwrap(), 3.5);
        assert_eq!(m(&[-1.0, 1.0], &[0.5, 0.5]).moment(2, true).unwrap(), 1.0);
        assert_eq!(m(&[0.0, 2.0], &[0.5, 0.5]).moment(3, true).unwrap(), 0.0);
        assert_eq!(m(&[0.0, 2.0], &[0.5, 0.5]).moment(2, false).unwrap(), 2.0);
        assert!(m(&[0.0], &[1.0]).moment(0, false).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let x = m(&[-0.3, 2.0, 1e-17], &[0.1, 0.2, 0.7]);
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("atom,weight\n-0.3,0.1\n"));
        assert_eq!(DiscreteMeasure::read_csv(buf.as_slice()).unwrap(), x);
        assert!(DiscreteMeasure::read_csv("atom,weight\n0,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn particle_sets() {
        assert!(ParticleSet::new(vec![]).is_err());
        assert!(ParticleSet::new(vec![0.0, f64::INFINITY]).is_err());
        let p = ParticleSet::new(vec![1.0, 2.0, 6.0]).unwrap();
        assert_eq!(p.mean(), 3.0);
        let m = p.to_measure();
        assert_eq!(m.atoms(), p.as_slice());
        assert!((m.mean() - 3.0).abs() < 1e-15);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[1.0,2.0,6.0]");
        assert!(serde_json::from_str::<ParticleSet>("[]").is_err());
    }

    fn arb_measure() -> impl Strategy<Value = DiscreteMeasure> {
        prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..8).prop_map(|pairs| {
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let (atoms, weights) = pairs.into_iter().map(|(z, w)| (z, w / total)).unzip();
            DiscreteMeasure::new(atoms, weights).unwrap()
        })
    }

    proptest! {
        #[test]
        fn pushforward_preserves_mass_and_shifts_mean(
            x in arb_measure(), r in -3.0f64..3.0, g in 0.0f64..1.0
        ) {
            let y = x.pushforward_affine(r, g);
            prop_assert_eq!(y.len(), x.len());
            prop_assert!((y.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let lhs = y.moment(1, false).unwrap();
            prop_assert!((lhs - (r + g * x.mean())).abs() < 1e-12);
        }

        #[test]
        fn mixture_moments_are_weighted_moments(
            a in arb_measure(), b in arb_measure(), c in arb_measure(),
            p in 0.0f64..1.0, q in 0.0f64..1.0, n in 1u32..5
        ) {
            let q = q * (1.0 - p);
            let probs = [p, q, 1.0 - p - q];
            let parts = [a, b, c];
            let mix = DiscreteMeasure::mixture(&parts, &probs).unwrap();
            let expect: f64 = parts
                .iter()
                .zip(probs)
                .map(|(m, pr)| pr * m.moment(n, false).unwrap())
                .sum();
            let got = mix.moment(n, false).unwrap();
            prop_assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0) * 10.0f64.powi(n as i32 - 1));
        }
    }
}
