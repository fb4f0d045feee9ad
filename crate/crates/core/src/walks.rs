//! Step laws on `F_d` and trajectories of the associated random walks.
//!
//! Randomness comes from ChaCha streams keyed by `(seed, replicate)`, so a
//! replicate is reproducible no matter which worker thread runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schreier::{GraphOracle, VertexAddr};
use crate::stats::mean_ci;
use crate::words::{ball, Letter, ReducedWord};

/// Independent random stream `replicate` under `seed`.
pub fn stream_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawFamily {
    /// Uniform on `S ∪ S^{-1}`.
    Srw,
    /// Identity with probability `alpha`, otherwise a uniform generator.
    Lazy { alpha: f64 },
    /// Length `L` with `P(L = k) ∝ k^{-beta}` on `1..=l_max`, then a uniform
    /// reduced word of that length.
    GeodesicTail { beta: f64, l_max: usize },
}

/// A symmetric adapted step law `μ` on `F_d`.
#[derive(Clone, Debug)]
pub struct StepLaw {
    family: LawFamily,
    d: usize,
    lengths: Option<WeightedAliasIndex<f64>>,
    length_probs: Vec<f64>,
}

impl StepLaw {
    pub fn new(family: LawFamily, d: usize) -> Result<StepLaw> {
        if !(2..=crate::words::MAX_RANK).contains(&d) {
            return Err(Error::Input(format!("rank {d} out of range")));
        }
        let length_probs = match family {
            LawFamily::Srw => vec![0.0, 1.0],
            LawFamily::Lazy { alpha } => {
                if !(0.0..1.0).contains(&alpha) {
                    return Err(Error::Input(format!("lazy alpha {alpha} outside [0,1)")));
                }
                vec![alpha, 1.0 - alpha]
            }
            LawFamily::GeodesicTail { beta, l_max } => {
                if l_max == 0 || !beta.is_finite() || beta <= 1.0 {
                    return Err(Error::Input(format!("geodesic tail needs beta > 1, l_max >= 1 (got {beta}, {l_max})")));
                }
                let w: Vec<f64> = (0..=l_max).map(|k| if k == 0 { 0.0 } else { (k as f64).powf(-beta) }).collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|x| x / z).collect()
            }
        };
        let lengths = match family {
            LawFamily::GeodesicTail { .. } => Some(
                WeightedAliasIndex::new(length_probs.clone()).map_err(|e| Error::Input(format!("length law: {e}")))?,
            ),
            _ => None,
        };
        Ok(StepLaw { family, d, lengths, length_probs })
    }

    pub fn srw(d: usize) -> StepLaw {
        StepLaw::new(LawFamily::Srw, d).expect("valid rank")
    }

    pub fn family(&self) -> LawFamily {
        self.family
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    pub fn id(&self) -> String {
        match self.family {
            LawFamily::Srw => format!("srw(d={})", self.d),
            LawFamily::Lazy { alpha } => format!("lazy(alpha={alpha},d={})", self.d),
            LawFamily::GeodesicTail { beta, l_max } => format!("geodesic_tail(beta={beta},l_max={l_max},d={})", self.d),
        }
    }

    /// `P(|U| = k)` for `k = 0..=max_length`.
    pub fn length_law(&self) -> &[f64] {
        &self.length_probs
    }

    pub fn max_length(&self) -> usize {
        self.length_probs.len() - 1
    }

    /// Analytic `E|U|^k`.
    pub fn moment(&self, k: u32) -> f64 {
        self.length_probs.iter().enumerate().map(|(l, p)| p * (l as f64).powi(k as i32)).sum()
    }

    /// Highest moment order that would stay finite without truncation.
    pub fn untruncated_moment_order(&self) -> Option<u32> {
        match self.family {
            LawFamily::GeodesicTail { beta, .. } => Some((beta - 1.0).ceil() as u32 - 1),
            _ => None,
        }
    }

    /// Append a sample of `μ` to `out` (raw letters, not reduced against `out`).
    #[inline]
    pub fn sample_letters<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Letter>) {
        let len = match self.family {
            LawFamily::Srw => 1,
            LawFamily::Lazy { alpha } => usize::from(rng.random::<f64>() >= alpha),
            LawFamily::GeodesicTail { .. } => self.lengths.as_ref().expect("tail law").sample(rng),
        };
        out.extend_from_slice(ReducedWord::random(self.d, len, rng).letters());
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> ReducedWord {
        let mut letters = Vec::new();
        self.sample_letters(rng, &mut letters);
        ReducedWord::reduce(letters)
    }

    /// Every atom of `μ` with its mass, for laws with enumerable support.
    pub fn atoms(&self, cap: usize) -> Result<Vec<(ReducedWord, f64)>> {
        let words = ball(self.d, self.max_length(), cap)?;
        let sphere = |k: usize| -> f64 {
            if k == 0 {
                1.0
            } else {
                (2 * self.d) as f64 * ((2 * self.d - 1) as f64).powi(k as i32 - 1)
            }
        };
        Ok(words
            .into_iter()
            .filter_map(|w| {
                let p = self.length_probs[w.len()] / sphere(w.len());
                (p > 0.0).then_some((w, p))
            })
            .collect())
    }
}

/// A walk `X_0 = 1, X_t = X_{t-1} U_t`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub seed: u64,
    pub replicate: u64,
    pub law: String,
    increments: Vec<ReducedWord>,
    lengths: Vec<usize>,
    last: ReducedWord,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[ReducedWord] {
        &self.increments
    }

    /// `|X_t|` for `t = 0..=T`.
    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn last(&self) -> &ReducedWord {
        &self.last
    }

    /// `X_t`, recomputed from the increments.
    pub fn word(&self, t: usize) -> ReducedWord {
        let mut x = ReducedWord::identity();
        for u in &self.increments[..t] {
            x.mul_assign(u);
        }
        x
    }

    /// Every position `X_0, ..., X_T`.
    pub fn words(&self) -> Vec<ReducedWord> {
        let mut x = ReducedWord::identity();
        let mut out = vec![x.clone()];
        for u in &self.increments {
            x.mul_assign(u);
            out.push(x.clone());
        }
        out
    }

    /// CSV rows `t,|X_t|,word` with words longer than `cap` elided.
    pub fn to_csv(&self, d: usize, cap: usize) -> String {
        let mut out = String::from("t,length,word\n");
        for (t, x) in self.words().iter().enumerate() {
            let w = if x.len() <= cap { x.render(d) } else { "...".into() };
            out.push_str(&format!("{t},{},{w}\n", x.len()));
        }
        out
    }
}

pub fn run_walk(law: &StepLaw, t_max: usize, seed: u64, replicate: u64) -> Trajectory {
    let mut rng = stream_rng(seed, replicate);
    run_walk_with(law, t_max, &mut rng, seed, replicate)
}

pub fn run_walk_with<R: Rng + ?Sized>(law: &StepLaw, t_max: usize, rng: &mut R, seed: u64, replicate: u64) -> Trajectory {
    let mut x = ReducedWord::identity();
    let mut increments = Vec::with_capacity(t_max);
    let mut lengths = Vec::with_capacity(t_max + 1);
    lengths.push(0);
    for _ in 0..t_max {
        let u = law.sample_step(rng);
        x.mul_assign(&u);
        lengths.push(x.len());
        increments.push(u);
    }
    Trajectory { seed, replicate, law: law.id(), increments, lengths, last: x }
}

/// `T_n = inf{t : |X_t| > n}`, or `None` if the trajectory never gets there.
pub fn first_exit_time(trajectory: &Trajectory, n: usize) -> Option<usize> {
    trajectory.lengths.iter().position(|&l| l > n)
}

/// Streaming form of a walk, for experiments that need only the current
/// position and never the history.
#[derive(Clone, Debug, Default)]
pub struct Walker {
    position: ReducedWord,
    scratch: Vec<Letter>,
}

impl Walker {
    pub fn new() -> Walker {
        Walker::default()
    }

    pub fn position(&self) -> &ReducedWord {
        &self.position
    }

    /// Take one step; the raw letters of the increment are returned.
    pub fn advance<R: Rng + ?Sized>(&mut self, law: &StepLaw, rng: &mut R) -> &[Letter] {
        self.scratch.clear();
        law.sample_letters(rng, &mut self.scratch);
        for &x in &self.scratch {
            self.position.push(x);
        }
        &self.scratch
    }
}

/// Cosets `K^{(i)} X_t`, tracked for every root by applying increments.
pub fn coset_trajectory<O: GraphOracle + ?Sized>(
    oracle: &O,
    roots: &[VertexAddr],
    trajectory: &Trajectory,
) -> Result<Vec<Vec<VertexAddr>>> {
    let mut current = roots.to_vec();
    let mut out = vec![current.clone()];
    for u in trajectory.increments() {
        for v in current.iter_mut() {
            for &x in u.letters() {
                oracle.step(v, x)?;
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Mean and 95% half-width of `|X_t| / t` over independent walks.
pub fn speed_estimate(law: &StepLaw, t: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if t == 0 || samples == 0 {
        return Err(Error::Input("speed needs t >= 1 and at least one walk".into()));
    }
    let ratios: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut w = Walker::new();
            for _ in 0..t {
                w.advance(law, &mut rng);
            }
            w.position().len() as f64 / t as f64
        })
        .collect();
    Ok(mean_ci(&ratios))
}
