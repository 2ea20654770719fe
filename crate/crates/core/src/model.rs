//! Problem instances `y = Φx⋆ + v⋆ + z` and the random families they are drawn from.

use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, pairwise_sum, Matrix};
use crate::rng::{derive_seed, stream_rng};
use crate::scalar::Scalar;

const SALT_SIGNAL: u64 = 1;
const SALT_CORRUPTION: u64 = 2;
const SALT_SENSING: u64 = 3;
const SALT_NOISE: u64 = 4;

/// Sub-Gaussian family used for matrix entries and for noise entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Rademacher,
    #[serde(alias = "uniform-bounded", alias = "uniform")]
    UniformBounded,
}

impl Family {
    /// ψ₂-norm of the unit-variance member of the family.
    pub fn unit_psi2(self) -> f64 {
        match self {
            Family::Gaussian => (8.0f64 / 3.0).sqrt(),
            Family::Rademacher => 1.0 / std::f64::consts::LN_2.sqrt(),
            Family::UniformBounded => uniform_unit_psi2(),
        }
    }

    /// One unit-variance, mean-zero draw.
    pub fn draw<T: Scalar, R: Rng + ?Sized>(self, rng: &mut R) -> T {
        match self {
            Family::Gaussian => T::standard_normal(rng),
            Family::Rademacher => {
                if rng.random::<bool>() {
                    T::one()
                } else {
                    -T::one()
                }
            }
            Family::UniformBounded => {
                let s3 = T::lit(3.0f64.sqrt());
                (T::lit(2.0) * T::unit_uniform(rng) - T::one()) * s3
            }
        }
    }
}

// ψ₂ of Uniform[-√3, √3]: solve (1/2a)∫ exp(x²/t²) dx = 2 by bisection with Simpson's rule.
fn uniform_unit_psi2() -> f64 {
    let a = 3.0f64.sqrt();
    let mean_exp = |t: f64| {
        let k = 2000;
        let h = a / k as f64;
        let f = |x: f64| (x * x / (t * t)).exp();
        let mut s = f(0.0) + f(a);
        for i in 1..k {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / a
    };
    let (mut lo, mut hi) = (0.5, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mean_exp(mid) > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: Family,
    /// Row ψ₂ budget before the `1/√m` scaling. Defaults to the entry ψ₂ of the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgaussian_k: Option<f64>,
}

impl EnsembleSpec {
    pub fn new(kind: Family) -> Self {
        Self {
            kind,
            subgaussian_k: None,
        }
    }

    pub fn k(&self) -> f64 {
        self.subgaussian_k.unwrap_or_else(|| self.kind.unit_psi2())
    }

    pub fn validate(&self) -> Result<()> {
        match self.subgaussian_k {
            Some(k) if !(k > 0.0 && k.is_finite()) => Err(Error::InvalidSpec(format!(
                "ensemble subgaussian_k must be positive, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Bounded,
    Subgaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// ℓ₂ budget of the bounded model.
    #[serde(default)]
    pub delta: f64,
    /// Entrywise ψ₂ budget of the sub-Gaussian model.
    #[serde(default = "default_l")]
    pub l: f64,
    /// Entry law of the sub-Gaussian model.
    #[serde(default = "default_noise_family")]
    pub family: Family,
}

fn default_l() -> f64 {
    1.0
}

fn default_noise_family() -> Family {
    Family::Gaussian
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            delta: 0.0,
            l: default_l(),
            family: Family::Gaussian,
        }
    }

    pub fn bounded(delta: f64) -> Self {
        Self {
            kind: NoiseKind::Bounded,
            delta,
            ..Self::none()
        }
    }

    pub fn subgaussian(l: f64, family: Family) -> Self {
        Self {
            kind: NoiseKind::Subgaussian,
            l,
            family,
            delta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                requirement: "finite and nonnegative",
                value: self.delta,
            });
        }
        if self.kind == NoiseKind::Subgaussian && !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "L",
                requirement: "finite and nonnegative",
                value: self.l,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Sparse,
    #[serde(alias = "block-sparse")]
    BlockSparse,
}

/// Law of the nonzero entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Amplitude {
    /// `±scale` with fair signs.
    Rademacher { scale: f64 },
    /// `N(0, scale²)`.
    Gaussian { scale: f64 },
    /// Exactly `value`.
    Const { value: f64 },
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Rademacher { scale: 1.0 }
    }
}

impl Amplitude {
    fn draw<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            Amplitude::Rademacher { scale } => {
                if rng.random::<bool>() {
                    T::lit(scale)
                } else {
                    -T::lit(scale)
                }
            }
            Amplitude::Gaussian { scale } => T::lit(scale) * T::standard_normal(rng),
            Amplitude::Const { value } => T::lit(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub kind: StructureKind,
    /// Nonzero count, or active-block count for block sparsity.
    pub sparsity: usize,
    #[serde(default = "default_block")]
    pub block_size: usize,
    #[serde(default)]
    pub amplitude: Amplitude,
}

fn default_block() -> usize {
    1
}

impl StructureSpec {
    pub fn sparse(sparsity: usize) -> Self {
        Self {
            kind: StructureKind::Sparse,
            sparsity,
            block_size: 1,
            amplitude: Amplitude::default(),
        }
    }

    pub fn block_sparse(active_blocks: usize, block_size: usize) -> Self {
        Self {
            kind: StructureKind::BlockSparse,
            sparsity: active_blocks,
            block_size,
            amplitude: Amplitude::default(),
        }
    }

    pub fn with_amplitude(mut self, amplitude: Amplitude) -> Self {
        self.amplitude = amplitude;
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self.kind {
            StructureKind::Sparse => {
                if self.sparsity > dim {
                    return Err(Error::InvalidSpec(format!(
                        "sparsity {} exceeds dimension {dim}",
                        self.sparsity
                    )));
                }
            }
            StructureKind::BlockSparse => {
                if self.block_size == 0 || !dim.is_multiple_of(self.block_size) {
                    return Err(Error::InvalidSpec(format!(
                        "block size {} does not divide dimension {dim}",
                        self.block_size
                    )));
                }
                if self.sparsity > dim / self.block_size {
                    return Err(Error::InvalidSpec(format!(
                        "active blocks {} exceed block count {}",
                        self.sparsity,
                        dim / self.block_size
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draw a structured vector of length `dim`: support uniform at random, amplitudes from the spec.
fn gen_structured<T: Scalar>(dim: usize, spec: &StructureSpec, seed: u64) -> Result<Vec<T>> {
    spec.validate(dim)?;
    let mut rng = stream_rng(seed, 0);
    let mut out = vec![T::zero(); dim];
    match spec.kind {
        StructureKind::Sparse => {
            let mut support = sample_indices(&mut rng, dim, spec.sparsity).into_vec();
            support.sort_unstable();
            for i in support {
                out[i] = spec.amplitude.draw(&mut rng);
            }
        }
        StructureKind::BlockSparse => {
            let blocks = dim / spec.block_size;
            let mut active = sample_indices(&mut rng, blocks, spec.sparsity).into_vec();
            active.sort_unstable();
            for b in active {
                for o in &mut out[b * spec.block_size..(b + 1) * spec.block_size] {
                    *o = spec.amplitude.draw(&mut rng);
                }
            }
        }
    }
    Ok(out)
}

pub fn gen_signal<T: Scalar>(n: usize, spec: &StructureSpec, seed: u64) -> Result<Vec<T>> {
    gen_structured(n, spec, seed)
}

pub fn gen_corruption<T: Scalar>(m: usize, spec: &StructureSpec, seed: u64) -> Result<Vec<T>> {
    gen_structured(m, spec, seed)
}

/// `m×n` matrix with i.i.d. mean-zero entries of variance `1/m` from the ensemble family.
pub fn gen_sensing_matrix<T: Scalar>(
    m: usize,
    n: usize,
    spec: &EnsembleSpec,
    seed: u64,
) -> Result<Matrix<T>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidSpec(format!(
            "sensing matrix needs m, n >= 1 (got {m}x{n})"
        )));
    }
    spec.validate()?;
    let mut rng = stream_rng(seed, 0);
    let scale = T::one() / T::lit(m as f64).sqrt();
    let kind = spec.kind;
    Ok(Matrix::from_fn(m, n, |_, _| {
        kind.draw::<T, _>(&mut rng) * scale
    }))
}

pub fn gen_noise<T: Scalar>(m: usize, spec: &NoiseSpec, seed: u64) -> Result<Vec<T>> {
    spec.validate()?;
    let mut rng = stream_rng(seed, 0);
    match spec.kind {
        NoiseKind::None => Ok(vec![T::zero(); m]),
        NoiseKind::Bounded => {
            if spec.delta == 0.0 || m == 0 {
                return Ok(vec![T::zero(); m]);
            }
            // uniform in the ball: Gaussian direction, radius δ·U^{1/m}
            let mut dir: Vec<T> = (0..m).map(|_| T::standard_normal(&mut rng)).collect();
            let nrm = crate::linalg::norm2(&dir);
            let u = T::unit_uniform(&mut rng);
            let radius = T::lit(spec.delta) * u.powf(T::one() / T::lit(m as f64));
            // shave one ulp-scale factor so rounding never pushes the norm past δ
            let radius = radius * (T::one() - T::epsilon() * T::lit(4.0));
            dir.iter_mut().for_each(|d| *d = *d / nrm * radius);
            Ok(dir)
        }
        NoiseKind::Subgaussian => Ok((0..m).map(|_| spec.family.draw(&mut rng)).collect()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance<T> {
    pub n: usize,
    pub m: usize,
    pub sensing: Matrix<T>,
    pub signal: Vec<T>,
    pub corruption: Vec<T>,
    pub noise: Vec<T>,
    pub observation: Vec<T>,
    pub ensemble: EnsembleSpec,
    pub noise_model: NoiseSpec,
    pub seed: u64,
}

/// Compute `y = Φx⋆ + v⋆ + z` and package the instance.
pub fn assemble<T: Scalar>(
    sensing: Matrix<T>,
    signal: Vec<T>,
    corruption: Vec<T>,
    noise: Vec<T>,
) -> Result<ProblemInstance<T>> {
    let (m, n) = (sensing.rows(), sensing.cols());
    if m == 0 || n == 0 {
        return Err(Error::InvalidSpec("instance needs m, n >= 1".into()));
    }
    check_len("assemble: signal", n, signal.len())?;
    check_len("assemble: corruption", m, corruption.len())?;
    check_len("assemble: noise", m, noise.len())?;
    if !(sensing.is_finite()
        && all_finite(&signal)
        && all_finite(&corruption)
        && all_finite(&noise))
    {
        return Err(Error::InvalidSpec(
            "instance contains non-finite values".into(),
        ));
    }
    let mut observation = sensing.mul_vec(&signal)?;
    for ((o, &v), &z) in observation.iter_mut().zip(&corruption).zip(&noise) {
        *o = *o + v + z;
    }
    Ok(ProblemInstance {
        n,
        m,
        sensing,
        signal,
        corruption,
        noise,
        observation,
        ensemble: EnsembleSpec::new(Family::Gaussian),
        noise_model: NoiseSpec::none(),
        seed: 0,
    })
}

/// Everything needed to draw one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub signal: StructureSpec,
    pub corruption: StructureSpec,
    pub ensemble: EnsembleSpec,
    pub noise: NoiseSpec,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidSpec(
                "dimensions n and m must be at least 1".into(),
            ));
        }
        self.signal.validate(self.n)?;
        self.corruption.validate(self.m)?;
        self.ensemble.validate()?;
        self.noise.validate()
    }

    /// Draw the instance for `seed`; every component has its own derived stream.
    pub fn generate<T: Scalar>(&self, seed: u64) -> Result<ProblemInstance<T>> {
        let sensing = gen_sensing_matrix(
            self.m,
            self.n,
            &self.ensemble,
            derive_seed(seed, SALT_SENSING),
        )?;
        let signal = gen_signal(self.n, &self.signal, derive_seed(seed, SALT_SIGNAL))?;
        let corruption =
            gen_corruption(self.m, &self.corruption, derive_seed(seed, SALT_CORRUPTION))?;
        let noise = gen_noise(self.m, &self.noise, derive_seed(seed, SALT_NOISE))?;
        let mut inst = assemble(sensing, signal, corruption, noise)?;
        inst.ensemble = self.ensemble;
        inst.noise_model = self.noise;
        inst.seed = seed;
        Ok(inst)
    }
}

/// Sensing matrix an instance with this `seed` was generated with.
pub fn sensing_for_seed<T: Scalar>(
    m: usize,
    n: usize,
    ensemble: &EnsembleSpec,
    seed: u64,
) -> Result<Matrix<T>> {
    gen_sensing_matrix(m, n, ensemble, derive_seed(seed, SALT_SENSING))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct InstanceJson<T> {
    n: usize,
    m: usize,
    ensemble: EnsembleSpec,
    noise: NoiseSpec,
    seed: u64,
    signal: Vec<T>,
    corruption: Vec<T>,
    noise_vec: Vec<T>,
    y: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<Vec<T>>,
    #[serde(default)]
    phi_by_seed: bool,
}

impl<T: Scalar> ProblemInstance<T> {
    /// Serialize to the JSON container. With `phi_by_seed` the matrix is omitted and
    /// rebuilt from `(ensemble, seed)` on load.
    pub fn to_json(&self, phi_by_seed: bool) -> Result<String> {
        let doc = InstanceJson {
            n: self.n,
            m: self.m,
            ensemble: self.ensemble,
            noise: self.noise_model,
            seed: self.seed,
            signal: self.signal.clone(),
            corruption: self.corruption.clone(),
            noise_vec: self.noise.clone(),
            y: self.observation.clone(),
            phi: (!phi_by_seed).then(|| self.sensing.as_slice().to_vec()),
            phi_by_seed,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceJson<T> = serde_json::from_str(text)?;
        let sensing = match doc.phi {
            Some(data) => Matrix::from_row_major(doc.m, doc.n, data)?,
            None if doc.phi_by_seed => sensing_for_seed(doc.m, doc.n, &doc.ensemble, doc.seed)?,
            None => return Err(Error::config("phi", "missing and phi_by_seed is false")),
        };
        let mut inst = assemble(sensing, doc.signal, doc.corruption, doc.noise_vec)?;
        check_len("instance json: y", inst.m, doc.y.len())?;
        // keep the stored observation; reassembly must agree to rounding
        inst.observation = doc.y;
        inst.ensemble = doc.ensemble;
        inst.noise_model = doc.noise;
        inst.seed = doc.seed;
        Ok(inst)
    }

    /// `‖y − (Φx⋆ + v⋆ + z)‖₂`
    pub fn reassembly_residual(&self) -> T {
        let mut r = self
            .sensing
            .mul_vec(&self.signal)
            .expect("consistent instance");
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = self.observation[i] - (*ri + self.corruption[i] + self.noise[i]);
        }
        crate::linalg::norm2(&r)
    }
}

/// Write one value per line.
pub fn write_vector_csv<T: Scalar, W: Write>(out: &mut W, v: &[T]) -> Result<()> {
    for x in v {
        writeln!(out, "{x}")?;
    }
    Ok(())
}

/// Empirical Orlicz ψ₂ norm: smallest `t` with `mean exp(X²/t²) ≤ 2`, by bisection on `[1e-6, 1e3]`.
pub fn estimate_psi2(samples: &[f64]) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::InvalidSpec(format!(
            "estimate_psi2 needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let mut buf = vec![0.0; samples.len()];
    let mut mean_exp = |t: f64| {
        let inv = 1.0 / (t * t);
        for (b, &x) in buf.iter_mut().zip(samples) {
            *b = (x * x * inv).exp();
        }
        pairwise_sum(&buf) / samples.len() as f64
    };
    let (mut lo, mut hi) = (1e-6, 1e3);
    if mean_exp(hi) > 2.0 {
        return Ok(f64::INFINITY);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_exp(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDiagnostics {
    /// `max_j |(1/m)Σᵢ Φᵢⱼ² − 1/m|`
    pub max_diag_dev: f64,
    /// `max_{j≠k} |(1/m)Σᵢ Φᵢⱼ Φᵢₖ|`
    pub max_offdiag: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compare the row-averaged second moment `(1/m)Σ ΦᵢᵀΦᵢ` with `Iₙ/m`.
pub fn verify_ensemble<T: Scalar>(sensing: &Matrix<T>, tol: f64) -> EnsembleDiagnostics {
    let (m, n) = (sensing.rows(), sensing.cols());
    let mut second = vec![0.0f64; n * n];
    for i in 0..m {
        let row = sensing.row(i);
        for j in 0..n {
            let a = row[j].as_f64();
            if a == 0.0 {
                continue;
            }
            for k in j..n {
                second[j * n + k] += a * row[k].as_f64();
            }
        }
    }
    let target = 1.0 / m as f64;
    let mut max_diag_dev = 0.0f64;
    let mut max_offdiag = 0.0f64;
    for j in 0..n {
        max_diag_dev = max_diag_dev.max((second[j * n + j] / m as f64 - target).abs());
        for k in (j + 1)..n {
            max_offdiag = max_offdiag.max((second[j * n + k] / m as f64).abs());
        }
    }
    EnsembleDiagnostics {
        max_diag_dev,
        max_offdiag,
        tol,
        pass: max_diag_dev <= tol && max_offdiag <= tol,
    }
}
