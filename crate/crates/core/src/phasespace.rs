//! Raubold-Lynch n-body phase-space generation.
//!
//! Events are built as a chain of two-body decays: daughters `1..k` form a
//! subsystem of invariant mass `Mₖ`, and each step splits `Mₖ` into `Mₖ₋₁`
//! plus daughter `k` isotropically in the `Mₖ` rest frame. Weights are the
//! unnormalized product of the breakup momenta along the chain.

use smallvec::SmallVec;
use thiserror::Error;

use crate::functor::{FunctorError, FunctorExpr};
use crate::integration::IntegrationResult;
use crate::kinematics::{boost_into, breakup_momentum, invariant_mass, FourVector, KinematicsError};
use crate::parallel::{WorkerPool, CHUNK_SIZE};
use crate::rng::{CounterRng, RngKey};
use crate::store::{ColumnKind, ColumnSchema, ColumnStore, ColumnView, StoreError};

/// Relative agreement required between a mother's invariant mass and the decay's mother mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhspError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invalid decay: {0}")]
    InvalidSpec(String),
    #[error("mother invariant mass {actual} does not match decay mother mass {expected}")]
    MassMismatch { expected: f64, actual: f64 },
    #[error("event {row} has weight {weight} above the ceiling {w_max}")]
    WeightAboveMax { row: usize, weight: f64, w_max: f64 },
    #[error("daughter index {index} out of range for {n} daughters")]
    DaughterIndex { index: usize, n: usize },
    #[error("event block is empty")]
    Empty,
    #[error("function is not finite ({value}) at event {row}")]
    NonFinite { row: usize, value: f64 },
    #[error("malformed event block: {0}")]
    Block(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Functor(#[from] FunctorError),
}

/// A decay `M → m₁ m₂ … mₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySpec {
    mother_mass: f64,
    daughter_masses: Vec<f64>,
}

impl DecaySpec {
    pub fn new(mother_mass: f64, daughter_masses: Vec<f64>) -> Result<Self, PhspError> {
        if daughter_masses.len() < 2 {
            return Err(PhspError::InvalidSpec(format!(
                "need at least 2 daughters, got {}",
                daughter_masses.len()
            )));
        }
        if !(mother_mass.is_finite() && mother_mass > 0.0) {
            return Err(PhspError::InvalidSpec(format!(
                "mother mass must be positive and finite, got {mother_mass}"
            )));
        }
        if let Some(m) = daughter_masses.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(PhspError::InvalidSpec(format!(
                "daughter masses must be non-negative and finite, got {m}"
            )));
        }
        let sum: f64 = daughter_masses.iter().sum();
        if !(mother_mass > sum) {
            return Err(KinematicsError::below_threshold(format!(
                "mother mass {mother_mass} ≤ Σ daughter masses {sum}"
            ))
            .into());
        }
        Ok(Self {
            mother_mass,
            daughter_masses,
        })
    }

    pub fn mother_mass(&self) -> f64 {
        self.mother_mass
    }

    pub fn daughter_masses(&self) -> &[f64] {
        &self.daughter_masses
    }

    pub fn n_daughters(&self) -> usize {
        self.daughter_masses.len()
    }

    /// Kinetic energy released, `M − Σmᵢ`.
    pub fn q_value(&self) -> f64 {
        self.mother_mass - self.daughter_masses.iter().sum::<f64>()
    }
}

const COMPONENTS: [&str; 4] = ["e", "px", "py", "pz"];

/// Weighted events in columns `weight, p1_e, p1_px, p1_py, p1_pz, p2_e, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhspEventBlock {
    store: ColumnStore,
    n_daughters: usize,
}

impl PhspEventBlock {
    pub fn column_names(n_daughters: usize) -> Vec<String> {
        let mut names = vec!["weight".to_string()];
        for k in 1..=n_daughters {
            names.extend(COMPONENTS.iter().map(|c| format!("p{k}_{c}")));
        }
        names
    }

    pub fn schema(n_daughters: usize) -> ColumnSchema {
        ColumnSchema::homogeneous(Self::column_names(n_daughters), ColumnKind::Real64)
            .expect("generated names are valid and distinct")
    }

    /// Wraps a store whose schema is exactly the block layout for some `n ≥ 2`.
    pub fn from_store(store: ColumnStore) -> Result<Self, PhspError> {
        let cols = store.schema().len();
        if cols < 9 || !(cols - 1).is_multiple_of(4) {
            return Err(PhspError::Block(format!("{cols} columns is not 1 + 4n with n ≥ 2")));
        }
        let n = (cols - 1) / 4;
        if *store.schema() != Self::schema(n) {
            return Err(PhspError::Block(format!(
                "columns must be {}",
                Self::column_names(n).join(",")
            )));
        }
        Ok(Self {
            store,
            n_daughters: n,
        })
    }

    fn from_columns(n_daughters: usize, columns: Vec<Vec<f64>>) -> Self {
        let store = ColumnStore::from_real_columns(Self::column_names(n_daughters), columns)
            .expect("columns match the block schema");
        Self { store, n_daughters }
    }

    pub fn store(&self) -> &ColumnStore {
        &self.store
    }

    pub fn into_store(self) -> ColumnStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn n_daughters(&self) -> usize {
        self.n_daughters
    }

    fn real(&self, index: usize) -> &[f64] {
        match self.store.column_at(index) {
            ColumnView::Real64(v) => v,
            _ => unreachable!("block columns are real64"),
        }
    }

    pub fn weights(&self) -> &[f64] {
        self.real(0)
    }

    /// Four-momentum of daughter `k` (zero-based; columns `p{k+1}_*`) in event `row`.
    pub fn daughter(&self, row: usize, k: usize) -> FourVector {
        let base = 1 + 4 * k;
        FourVector::new(
            self.real(base)[row],
            self.real(base + 1)[row],
            self.real(base + 2)[row],
            self.real(base + 3)[row],
        )
    }

    pub fn daughters(&self, row: usize) -> Vec<FourVector> {
        (0..self.n_daughters).map(|k| self.daughter(row, k)).collect()
    }
}

type Momenta = SmallVec<[FourVector; 8]>;

fn isotropic(rng: &mut CounterRng, p: f64) -> [f64; 3] {
    let cos_theta = 2.0 * rng.uniform() - 1.0;
    let phi = 2.0 * std::f64::consts::PI * rng.uniform();
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    [p * sin_theta * phi.cos(), p * sin_theta * phi.sin(), p * cos_theta]
}

fn scaled(v: [f64; 3], s: f64) -> [f64; 3] {
    [s * v[0], s * v[1], s * v[2]]
}

/// One event in the mother rest frame; returns its weight.
fn generate_rest_frame(spec: &DecaySpec, rng: &mut CounterRng, out: &mut Momenta) -> Result<f64, KinematicsError> {
    let m = &spec.daughter_masses;
    let n = m.len();
    let mut r: SmallVec<[f64; 8]> = (0..n - 2).map(|_| rng.uniform()).collect();
    r.sort_by(f64::total_cmp);
    let q = spec.q_value();
    let mut sub: SmallVec<[f64; 8]> = SmallVec::with_capacity(n);
    let mut cumulative = 0.0;
    for k in 0..n {
        cumulative += m[k];
        sub.push(match k {
            0 => m[0],
            k if k == n - 1 => spec.mother_mass,
            k => cumulative + r[k - 1] * q,
        });
    }
    out.clear();
    let mut weight = 1.0;
    for k in 1..n {
        let p = breakup_momentum(sub[k], sub[k - 1], m[k])?;
        weight *= p;
        let dir = isotropic(rng, p);
        let daughter = FourVector::on_shell(m[k], dir);
        if k == 1 {
            out.push(FourVector::on_shell(m[0], scaled(dir, -1.0)));
        } else {
            let subsystem = FourVector::on_shell(sub[k - 1], scaled(dir, -1.0));
            for v in out.iter_mut() {
                *v = boost_into(v, &subsystem)?;
            }
        }
        out.push(daughter);
    }
    Ok(weight)
}

fn check_mother(spec: &DecaySpec, mother: &FourVector) -> Result<(), PhspError> {
    let actual = invariant_mass(mother)?;
    if (actual - spec.mother_mass).abs() > MASS_TOLERANCE * spec.mother_mass || !(mother.e > 0.0) {
        return Err(PhspError::MassMismatch {
            expected: spec.mother_mass,
            actual,
        });
    }
    Ok(())
}

/// Generates one event of `spec` in the frame where the mother has momentum `mother`.
fn generate_event(
    spec: &DecaySpec,
    mother: &FourVector,
    key: RngKey,
    out: &mut Momenta,
) -> Result<f64, PhspError> {
    let mut rng = key.rng();
    let weight = generate_rest_frame(spec, &mut rng, out)?;
    for v in out.iter_mut() {
        *v = boost_into(v, mother)?;
    }
    Ok(weight)
}

/// `n_events` weighted events of `spec` for a mother with four-momentum
/// `mother`; event `i` uses `key.at(i)`.
pub fn phsp_generate(
    spec: &DecaySpec,
    mother: &FourVector,
    n_events: usize,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<PhspEventBlock, PhspError> {
    check_mother(spec, mother)?;
    let n = spec.n_daughters();
    let chunks = pool.try_map_chunks(n_events, CHUNK_SIZE, |range| {
        let mut cols = vec![Vec::with_capacity(range.len()); 1 + 4 * n];
        let mut event = Momenta::new();
        for i in range {
            let w = generate_event(spec, mother, key.at(i as u64), &mut event)?;
            cols[0].push(w);
            for (k, v) in event.iter().enumerate() {
                for (c, x) in v.to_array().into_iter().enumerate() {
                    cols[1 + 4 * k + c].push(x);
                }
            }
        }
        Ok::<_, PhspError>(cols)
    })?;
    Ok(PhspEventBlock::from_columns(n, concat_columns(1 + 4 * n, chunks)))
}

fn concat_columns(n_cols: usize, chunks: Vec<Vec<Vec<f64>>>) -> Vec<Vec<f64>> {
    let len: usize = chunks.first().map_or(0, |c| c[0].len()) * chunks.len();
    let mut cols: Vec<Vec<f64>> = (0..n_cols).map(|_| Vec::with_capacity(len)).collect();
    for chunk in chunks {
        for (dst, src) in cols.iter_mut().zip(chunk) {
            dst.extend(src);
        }
    }
    cols
}

/// Upper bound on event weights: each two-body factor evaluated at the
/// largest parent and smallest child subsystem mass it can take.
pub fn phsp_max_weight(spec: &DecaySpec) -> Result<f64, PhspError> {
    let m = &spec.daughter_masses;
    let mut parent_max = spec.q_value() + m[0];
    let mut child_min = 0.0;
    let mut w = 1.0;
    for k in 1..m.len() {
        child_min += m[k - 1];
        parent_max += m[k];
        w *= breakup_momentum(parent_max, child_min, m[k])?;
    }
    Ok(w)
}

/// Accept-reject unweighting: event `i` survives iff `uniform(key.at(i))·w_max < weightᵢ`.
/// Survivors keep their order and get weight 1.
pub fn phsp_unweight(block: &PhspEventBlock, w_max: f64, key: RngKey) -> Result<PhspEventBlock, PhspError> {
    if !(w_max > 0.0 && w_max.is_finite()) {
        return Err(PhspError::InvalidSpec(format!("w_max must be positive, got {w_max}")));
    }
    let weights = block.weights();
    if let Some((row, &weight)) = weights.iter().enumerate().find(|(_, &w)| !(w <= w_max)) {
        return Err(PhspError::WeightAboveMax { row, weight, w_max });
    }
    let keep: Vec<usize> = (0..block.len())
        .filter(|&i| crate::rng::uniform(key.at(i as u64)) * w_max < weights[i])
        .collect();
    let mut cols: Vec<Vec<f64>> = (0..1 + 4 * block.n_daughters)
        .map(|c| {
            let src = block.real(c);
            keep.iter().map(|&i| src[i]).collect()
        })
        .collect();
    cols[0].iter_mut().for_each(|w| *w = 1.0);
    Ok(PhspEventBlock::from_columns(block.n_daughters, cols))
}

/// Decays daughter `k` (zero-based) of every event according to `subspec`.
///
/// The sub-decay is generated in daughter `k`'s rest frame from `key.at(i)`
/// and boosted along its momentum. Daughters are renumbered so that the
/// products take the place of daughter `k`:
/// `(d₀ … dₖ₋₁, s₀ … sⱼ, dₖ₊₁ …)`. Event weights are multiplied by the
/// sub-decay weight.
pub fn phsp_decay_chain(
    block: &PhspEventBlock,
    k: usize,
    subspec: &DecaySpec,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<PhspEventBlock, PhspError> {
    let n = block.n_daughters;
    if k >= n {
        return Err(PhspError::DaughterIndex { index: k, n });
    }
    let n_new = n - 1 + subspec.n_daughters();
    let chunks = pool.try_map_chunks(block.len(), CHUNK_SIZE, |range| {
        let mut cols = vec![Vec::with_capacity(range.len()); 1 + 4 * n_new];
        let mut products = Momenta::new();
        for i in range {
            let parent = block.daughter(i, k);
            check_mother(subspec, &parent)?;
            let w = generate_event(subspec, &parent, key.at(i as u64), &mut products)?;
            cols[0].push(block.weights()[i] * w);
            let mut slot = 0;
            let mut put = |v: FourVector| {
                for (c, x) in v.to_array().into_iter().enumerate() {
                    cols[1 + 4 * slot + c].push(x);
                }
                slot += 1;
            };
            for j in 0..n {
                if j == k {
                    products.iter().for_each(|&v| put(v));
                } else {
                    put(block.daughter(i, j));
                }
            }
        }
        Ok::<_, PhspError>(cols)
    })?;
    Ok(PhspEventBlock::from_columns(n_new, concat_columns(1 + 4 * n_new, chunks)))
}

/// Weighted average `Σ wᵢ f(xᵢ) / Σ wᵢ` of `expr` over a block, where
/// `args` fills the point `xᵢ` from event `i`'s daughter momenta.
///
/// The error is the standard error of the weighted mean,
/// `sqrt(Σ wᵢ² (fᵢ − value)²) / Σ wᵢ`.
pub fn phsp_average<A>(
    expr: &FunctorExpr,
    block: &PhspEventBlock,
    args: A,
    pool: &WorkerPool,
) -> Result<IntegrationResult, PhspError>
where
    A: Fn(&[FourVector], &mut [f64]) + Sync,
{
    if block.is_empty() {
        return Err(PhspError::Empty);
    }
    let _frozen = expr.params().freeze();
    let weights = block.weights();
    let values: Vec<Vec<f64>> = pool.try_map_chunks(block.len(), CHUNK_SIZE, |range| {
        let mut point = vec![0.0; expr.arity()];
        range
            .map(|i| {
                args(&block.daughters(i), &mut point);
                let f = expr.eval(&point)?;
                if f.is_finite() {
                    Ok(f)
                } else {
                    Err(PhspError::NonFinite { row: i, value: f })
                }
            })
            .collect()
    })?;
    let chunk_sums = |g: &dyn Fn(usize, f64) -> f64| -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(c, chunk)| {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| g(c * CHUNK_SIZE + j, f))
                    .sum::<f64>()
            })
            .sum()
    };
    let sum_w = chunk_sums(&|i, _| weights[i]);
    if !(sum_w > 0.0) {
        return Err(PhspError::Block(format!("total weight {sum_w} is not positive")));
    }
    let value = chunk_sums(&|i, f| weights[i] * f) / sum_w;
    let spread = chunk_sums(&|i, f| (weights[i] * (f - value)).powi(2));
    Ok(IntegrationResult {
        value,
        error: spread.sqrt() / sum_w,
        iterations: 1,
        chi2_per_dof: 0.0,
        calls_used: block.len() as u64,
        converged: true,
    })
}

/// Whether `(m₁₂², m₂₃²)` lies inside the Dalitz region of a three-body decay.
pub fn dalitz_contains(spec: &DecaySpec, m12_sq: f64, m23_sq: f64) -> bool {
    let [m1, m2, m3] = match spec.daughter_masses() {
        &[a, b, c] => [a, b, c],
        _ => return false,
    };
    let big = spec.mother_mass();
    if !(m12_sq >= (m1 + m2).powi(2) && m12_sq <= (big - m3).powi(2)) {
        return false;
    }
    let m12 = m12_sq.sqrt();
    // Energies of daughters 2 and 3 in the (12) rest frame.
    let e2 = (m12_sq - m1 * m1 + m2 * m2) / (2.0 * m12);
    let e3 = (big * big - m12_sq - m3 * m3) / (2.0 * m12);
    let p2 = (e2 * e2 - m2 * m2).max(0.0).sqrt();
    let p3 = (e3 * e3 - m3 * m3).max(0.0).sqrt();
    let lo = (e2 + e3).powi(2) - (p2 + p3).powi(2);
    let hi = (e2 + e3).powi(2) - (p2 - p3).powi(2);
    m23_sq >= lo && m23_sq <= hi
}
