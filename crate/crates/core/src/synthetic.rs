//! Synthetic regression scenarios `y = Xβ + ε`, `X ~ N(0, Σ)`.
//!
//! Sampling is reproducible across implementations: the generator is
//! ChaCha20 seeded with `seed_from_u64(seed)` and switched to stream
//! [`ScenarioSpec::stream`]. Standard normal draws (`rand_distr`'s
//! `StandardNormal`) fill `Z` row by row, `n·p` draws, followed by `n`
//! noise draws. Rows of `X` are `Lz` with `Σ = LLᵀ` (Cholesky).

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{RenetError, Result};
use crate::model::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovKind {
    Identity,
    CompoundSym,
    Toeplitz,
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub rho: f64,
    pub sigma: f64,
    pub cov_kind: CovKind,
    /// Value of the nonzero coefficients.
    #[serde(default = "unit")]
    pub beta_value: f64,
}

fn unit() -> f64 {
    1.0
}

const TABLE: [(usize, usize, usize, f64, f64, CovKind); 10] = [
    (100_000, 20, 10, 0.0, 1.0, CovKind::Identity),
    (5_000, 20, 5, 0.5, 2.0, CovKind::CompoundSym),
    (2_000, 20, 2, 0.75, 0.5, CovKind::CompoundSym),
    (1_000, 100, 10, 0.75, 2.0, CovKind::Toeplitz),
    (5_000, 100, 80, 0.5, 2.0, CovKind::CompoundSym),
    (500, 20, 2, 0.25, 1.0, CovKind::CompoundSym),
    (300, 300, 10, 0.5, 1.0, CovKind::CompoundSym),
    (90, 4_000, 100, 0.25, 0.25, CovKind::CompoundSym),
    (200, 220, 20, 0.75, 2.0, CovKind::CompoundSym),
    (300, 3_000, 30, 0.75, 2.0, CovKind::Block),
];

/// Sample size used for S1 by the desk preset.
pub const DESK_S1_N: usize = 5_000;
/// Feature cap applied to S8 and S10 by the desk preset.
pub const DESK_P_CAP: usize = 1_000;

impl ScenarioSpec {
    /// Scenarios `S1`…`S10`.
    pub fn preset(name: &str) -> Option<ScenarioSpec> {
        let idx: usize = name.strip_prefix('S')?.parse().ok()?;
        let &(n, p, s, rho, sigma, cov_kind) = TABLE.get(idx.checked_sub(1)?)?;
        Some(ScenarioSpec {
            name: format!("S{idx}"),
            n,
            p,
            s,
            rho,
            sigma,
            cov_kind,
            beta_value: 1.0,
        })
    }

    pub fn all_presets() -> Vec<ScenarioSpec> {
        (1..=10).map(|i| Self::preset(&format!("S{i}")).expect("preset")).collect()
    }

    /// Desk-scale surrogate: S1 at `n = 5000`, S8 and S10 with `p ≤ 1000`
    /// (signal count kept). Other scenarios are unchanged.
    pub fn desk(mut self) -> ScenarioSpec {
        match self.name.as_str() {
            "S1" => self.n = self.n.min(DESK_S1_N),
            "S8" | "S10" => self.p = self.p.min(DESK_P_CAP),
            _ => {}
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(RenetError::InvalidArgument("scenario needs n, p ≥ 1".into()));
        }
        if self.s > self.p {
            return Err(RenetError::InvalidArgument(format!(
                "signal count {} exceeds p = {}",
                self.s, self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(RenetError::InvalidArgument(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(RenetError::InvalidArgument(format!("sigma must be ≥ 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Generator stream: the scenario number for `S1`…`S10`, else 0.
    pub fn stream(&self) -> u64 {
        self.name
            .strip_prefix('S')
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    }

    /// First `s` columns for block designs, `⌊k·p/s⌋` otherwise.
    pub fn support(&self) -> Vec<usize> {
        match self.cov_kind {
            CovKind::Block => (0..self.s).collect(),
            _ => (0..self.s).map(|k| k * self.p / self.s).collect(),
        }
    }

    pub fn beta_true(&self) -> DVector<f64> {
        let mut beta = DVector::zeros(self.p);
        for j in self.support() {
            beta[j] = self.beta_value;
        }
        beta
    }
}

pub fn build_covariance(spec: &ScenarioSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (p, s, rho) = (spec.p, spec.s, spec.rho);
    let sigma = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            return 1.0;
        }
        match spec.cov_kind {
            CovKind::Identity => 0.0,
            CovKind::CompoundSym => rho,
            CovKind::Toeplitz => rho.powi(i.abs_diff(j) as i32),
            CovKind::Block => match (i < s, j < s) {
                (true, true) => rho,
                (false, false) => rho / 2.0,
                _ => 0.0,
            },
        }
    });
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub data: Dataset,
    pub beta_true: DVector<f64>,
    pub support_true: Vec<usize>,
}

pub fn sample_scenario(spec: &ScenarioSpec, seed: u64) -> Result<Scenario> {
    let sigma = build_covariance(spec)?;
    let (n, p) = (spec.n, spec.p);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(spec.stream());

    let mut z = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let x = match spec.cov_kind {
        CovKind::Identity => z,
        _ => {
            let l = Cholesky::new(sigma)
                .ok_or_else(|| {
                    RenetError::Construction(format!("covariance of {} is not positive definite", spec.name))
                })?
                .unpack();
            z * l.transpose()
        }
    };
    let beta_true = spec.beta_true();
    let mut y = &x * &beta_true;
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += spec.sigma * e;
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    Ok(Scenario {
        spec: spec.clone(),
        seed,
        data: Dataset::new(x, y).with_names(names),
        support_true: spec.support(),
        beta_true,
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a ScenarioSpec,
    seed: u64,
    beta_true: Vec<f64>,
    support_true: &'a [usize],
}

/// Writes `<stem>.csv` (features then `y`) and `<stem>.json`.
pub fn dump_scenario(sc: &Scenario, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    let mut header = sc.data.feature_names.clone();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..sc.data.n() {
        let mut rec: Vec<String> = sc.data.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(sc.data.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let side = Sidecar {
        spec: &sc.spec,
        seed: sc.seed,
        beta_true: sc.beta_true.iter().copied().collect(),
        support_true: &sc.support_true,
    };
    let mut f = std::fs::File::create(dir.join(format!("{stem}.json")))?;
    let text = serde_json::to_string_pretty(&side).map_err(|e| RenetError::Io(e.to_string()))?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
