//! End-to-end desk-scale experiments: two masters, two replicas each, every
//! pairwise peak correlation.

use serde::{Deserialize, Serialize};

use crate::correlation::{match_with_rotation, match_with_rotation_map, CorrelationMap, RotationSearch};
use crate::error::Result;
use crate::optics::{simulate_speckle, OpticalConfig, SpecklePattern};
use crate::surface::{
    generate_surface, make_replica, HeightMap, SurfaceParams, DEFAULT_CORR_LEN, DEFAULT_SIGMA_H,
};

/// Same-master pairs must reach this score.
pub const SAME_MASTER_MIN: f64 = 0.80;
/// Cross-master pairs must stay at or below this score.
pub const CROSS_MASTER_MAX: f64 = 0.15;

/// Grid, optics and search shared by every run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeskSetup {
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    pub sigma_h: f64,
    pub corr_len: f64,
    pub config: OpticalConfig,
    pub search: RotationSearch,
}

impl Default for DeskSetup {
    fn default() -> Self {
        Self {
            nx: 1024,
            ny: 1024,
            pitch: 2e-6,
            sigma_h: DEFAULT_SIGMA_H,
            corr_len: DEFAULT_CORR_LEN,
            config: OpticalConfig::default(),
            search: RotationSearch::default(),
        }
    }
}

impl DeskSetup {
    pub fn master(&self, seed: u64) -> Result<HeightMap> {
        generate_surface(&SurfaceParams::new(self.sigma_h, self.corr_len, seed), self.nx, self.ny, self.pitch)
    }

    pub fn capture(&self, map: &HeightMap, noise_seed: u64) -> Result<SpecklePattern> {
        simulate_speckle(map, &self.config, noise_seed)
    }

    pub fn score(&self, a: &SpecklePattern, b: &SpecklePattern) -> Result<f64> {
        Ok(match_with_rotation(a.to_f64().view(), b.to_f64().view(), &self.search)?.peak)
    }
}

/// Independent seed for one role within a seed set.
pub fn derive_seed(seed_set: u64, role: u64, index: u64) -> u64 {
    let mut z = seed_set
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(role.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB));
    z ^= z >> 31;
    z = z.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z ^ (z >> 29)
}

const ROLE_MASTER: u64 = 1;
const ROLE_REPLICA: u64 = 2;
const ROLE_NOISE: u64 = 3;

/// Pairwise scores of replicas `1a, 1b` (master 1) and `2c, 2d` (master 2).
#[derive(Debug, Clone)]
pub struct PairMatrix {
    pub seed_set: u64,
    pub labels: [&'static str; 4],
    pub matrix: [[f64; 4]; 4],
    /// Map at the winning rotation for `1a` against `1b`.
    pub same_surface: CorrelationMap,
    /// Map at the winning rotation for `1a` against `2c`.
    pub cross_surface: CorrelationMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMatrixCheck {
    pub diagonal_min: f64,
    pub same_master_min: f64,
    pub cross_master_max: f64,
    pub pass: bool,
}

impl PairMatrix {
    fn same_master(i: usize, j: usize) -> bool {
        i / 2 == j / 2
    }

    pub fn same_master_scores(&self) -> Vec<f64> {
        self.pairs().filter(|&(i, j)| Self::same_master(i, j)).map(|(i, j)| self.matrix[i][j]).collect()
    }

    pub fn cross_master_scores(&self) -> Vec<f64> {
        self.pairs().filter(|&(i, j)| !Self::same_master(i, j)).map(|(i, j)| self.matrix[i][j]).collect()
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j)))
    }

    pub fn check(&self) -> PairMatrixCheck {
        let diagonal_min = (0..4).map(|i| self.matrix[i][i]).fold(f64::INFINITY, f64::min);
        let same_master_min = self.same_master_scores().into_iter().fold(f64::INFINITY, f64::min);
        let cross_master_max = self.cross_master_scores().into_iter().fold(f64::NEG_INFINITY, f64::max);
        PairMatrixCheck {
            diagonal_min,
            same_master_min,
            cross_master_max,
            pass: (diagonal_min - 1.0).abs() <= 1e-9
                && same_master_min >= SAME_MASTER_MIN
                && cross_master_max <= CROSS_MASTER_MAX,
        }
    }

    /// Matrix as CSV with a label column and header row.
    pub fn to_csv(&self) -> String {
        let mut out = format!(",{}\n", self.labels.join(","));
        for (i, row) in self.matrix.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&format!("{},{}\n", self.labels[i], cells.join(",")));
        }
        out
    }
}

/// Runs the four-replica experiment for one seed set. Each unordered pair
/// is matched once and the score is used for both orders.
pub fn pair_matrix(setup: &DeskSetup, error_rms: f64, seed_set: u64) -> Result<PairMatrix> {
    let mut patterns = Vec::with_capacity(4);
    for m in 0..2u64 {
        let master = setup.master(derive_seed(seed_set, ROLE_MASTER, m))?;
        for r in 0..2u64 {
            let k = 2 * m + r;
            let replica = make_replica(&master, error_rms, derive_seed(seed_set, ROLE_REPLICA, k))?;
            patterns.push(setup.capture(&replica, derive_seed(seed_set, ROLE_NOISE, k))?.to_f64());
        }
    }
    let mut matrix = [[0.0; 4]; 4];
    let mut same_surface = None;
    let mut cross_surface = None;
    for i in 0..4 {
        for j in i..4 {
            let (res, map) = match_with_rotation_map(patterns[i].view(), patterns[j].view(), &setup.search)?;
            matrix[i][j] = res.peak;
            matrix[j][i] = res.peak;
            match (i, j) {
                (0, 1) => same_surface = Some(map),
                (0, 2) => cross_surface = Some(map),
                _ => {}
            }
        }
    }
    Ok(PairMatrix {
        seed_set,
        labels: ["1a", "1b", "2c", "2d"],
        matrix,
        same_surface: same_surface.expect("pair (0, 1) is matched"),
        cross_surface: cross_surface.expect("pair (0, 2) is matched"),
    })
}

/// Score between two independent replicas of one master.
pub fn same_master_score(setup: &DeskSetup, master: &HeightMap, error_rms: f64, seed: u64) -> Result<f64> {
    let a = make_replica(master, error_rms, derive_seed(seed, ROLE_REPLICA, 0))?;
    let b = make_replica(master, error_rms, derive_seed(seed, ROLE_REPLICA, 1))?;
    let pa = setup.capture(&a, derive_seed(seed, ROLE_NOISE, 0))?;
    let pb = setup.capture(&b, derive_seed(seed, ROLE_NOISE, 1))?;
    setup.score(&pa, &pb)
}

/// One point of a decorrelation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub error_rms: f64,
    pub mean_score: f64,
    pub min_score: f64,
    pub max_score: f64,
}

/// Mean same-master score versus replica error, over `seeds` masters.
pub fn decorrelation_curve(setup: &DeskSetup, errors: &[f64], seeds: &[u64]) -> Result<Vec<CurvePoint>> {
    let masters: Vec<HeightMap> = seeds
        .iter()
        .map(|&s| setup.master(derive_seed(s, ROLE_MASTER, 0)))
        .collect::<Result<_>>()?;
    errors
        .iter()
        .map(|&e| {
            let scores: Vec<f64> = masters
                .iter()
                .zip(seeds)
                .map(|(m, &s)| same_master_score(setup, m, e, s))
                .collect::<Result<_>>()?;
            let n = scores.len() as f64;
            Ok(CurvePoint {
                error_rms: e,
                mean_score: scores.iter().sum::<f64>() / n,
                min_score: scores.iter().copied().fold(f64::INFINITY, f64::min),
                max_score: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect()
}
