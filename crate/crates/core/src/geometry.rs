//! Effective low-rank updates `ΔW = B·A` and their cosine geometry.
//!
//! Adapter directory layout:
//!
//! ```text
//! adapter.json        {"adapter_id", "heuristic", "seed", "modules": [...]}
//! <module>.A.bin      r × k, little-endian f32, row-major
//! <module>.B.bin      d × r
//! ```
//!
//! Each module entry is `{"name", "rank", "in_features", "out_features",
//! "a_file", "b_file"}`. The flattened update concatenates each module's
//! `B·A` row-major, modules in lexicographic name order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, CompensatedSum, Scalar};

pub const MANIFEST_FILE: &str = "adapter.json";

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}×{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = F::one();
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    /// `self · other`, summing each entry in index order.
    pub fn matmul(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = F::zero();
                for t in 0..self.cols {
                    acc = acc + self.get(i, t) * other.get(t, j);
                }
                out.data[i * other.cols + j] = acc;
            }
        }
        Ok(out)
    }
}

/// Factors of one adapted module: `A` is r × k, `B` is d × r.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraModule<F> {
    pub name: String,
    pub a: Matrix<F>,
    pub b: Matrix<F>,
}

impl<F: Scalar> LoraModule<F> {
    pub fn delta(&self) -> Result<Matrix<F>> {
        if self.b.cols != self.a.rows {
            return Err(Error::invalid(format!(
                "module {}: B is {}×{} but A is {}×{}",
                self.name, self.b.rows, self.b.cols, self.a.rows, self.a.cols
            )));
        }
        self.b.matmul(&self.a)
    }

    fn shape(&self) -> (usize, usize) {
        (self.b.rows, self.a.cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankUpdate<F> {
    pub adapter_id: String,
    /// Heuristic the adapter was trained on, e.g. `OT`.
    pub heuristic: String,
    /// Training rerun seed, when known.
    pub seed: Option<u64>,
    pub modules: Vec<LoraModule<F>>,
}

impl<F: Scalar> LowRankUpdate<F> {
    fn sorted_modules(&self) -> Result<Vec<&LoraModule<F>>> {
        let mut ms: Vec<&LoraModule<F>> = self.modules.iter().collect();
        ms.sort_by(|x, y| x.name.cmp(&y.name));
        if let Some(w) = ms.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(Error::invalid(format!("adapter {}: duplicate module {}", self.adapter_id, w[0].name)));
        }
        Ok(ms)
    }
}

/// Per-module `B·A`, flattened row-major and concatenated in module-name
/// order.
pub fn effective_update<F: Scalar>(u: &LowRankUpdate<F>) -> Result<Vec<F>> {
    let mut out = Vec::new();
    for m in u.sorted_modules()? {
        out.extend(m.delta()?.data);
    }
    Ok(out)
}

fn finish_cosine<F: Scalar>(dot: F, n1: F, n2: F) -> Result<F> {
    if n1 <= F::zero() || n2 <= F::zero() {
        return Err(Error::invalid("cosine similarity is undefined for a zero vector"));
    }
    Ok((dot / (n1.sqrt() * n2.sqrt())).max(-F::one()).min(F::one()))
}

/// Cosine similarity of two flattened updates.
pub fn cosine_similarity<F: Scalar>(v1: &[F], v2: &[F]) -> Result<F> {
    if v1.len() != v2.len() {
        return Err(Error::invalid(format!("vectors differ in length: {} vs {}", v1.len(), v2.len())));
    }
    let (mut dot, mut n1, mut n2) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (&x, &y) in v1.iter().zip(v2) {
        dot.add(x * y);
        n1.add(x * x);
        n2.add(y * y);
    }
    finish_cosine(dot.value(), n1.value(), n2.value())
}

/// Same value as flattening both adapters and calling
/// [`cosine_similarity`], one module product at a time.
pub fn cosine_streamed<F: Scalar>(u1: &LowRankUpdate<F>, u2: &LowRankUpdate<F>) -> Result<F> {
    let (m1, m2) = (u1.sorted_modules()?, u2.sorted_modules()?);
    let names1: Vec<&str> = m1.iter().map(|m| m.name.as_str()).collect();
    let names2: Vec<&str> = m2.iter().map(|m| m.name.as_str()).collect();
    if names1 != names2 {
        let s1: BTreeSet<&str> = names1.iter().copied().collect();
        let s2: BTreeSet<&str> = names2.iter().copied().collect();
        let diff: Vec<&&str> = s1.symmetric_difference(&s2).collect();
        return Err(Error::invalid(format!(
            "adapters {} and {} have different module sets (differing: {diff:?})",
            u1.adapter_id, u2.adapter_id
        )));
    }
    let (mut dot, mut n1, mut n2) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (a, b) in m1.iter().zip(&m2) {
        if a.shape() != b.shape() {
            return Err(Error::invalid(format!(
                "module {}: update shapes {:?} and {:?} differ",
                a.name,
                a.shape(),
                b.shape()
            )));
        }
        let (da, db) = (a.delta()?, b.delta()?);
        for (&x, &y) in da.data.iter().zip(&db.data) {
            dot.add(x * y);
            n1.add(x * x);
            n2.add(y * y);
        }
    }
    finish_cosine(dot.value(), n1.value(), n2.value())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport<F> {
    pub adapter_ids: Vec<String>,
    pub heuristics: Vec<String>,
    /// Symmetric, unit diagonal.
    pub matrix: Vec<Vec<F>>,
    pub same_mean: Option<F>,
    pub cross_mean: Option<F>,
    /// `same_mean - cross_mean`.
    pub gap: Option<F>,
    pub same_pairs: usize,
    pub cross_pairs: usize,
    /// No same-heuristic pair was available, so there is no gap.
    pub partial: bool,
}

/// Pairwise cosine matrix and same- versus cross-heuristic means.
pub fn group_gap<F: Scalar>(adapters: &[LowRankUpdate<F>]) -> Result<SimilarityReport<F>> {
    if adapters.len() < 2 {
        return Err(Error::invalid("similarity report needs at least two adapters"));
    }
    let n = adapters.len();
    let mut matrix = vec![vec![F::one(); n]; n];
    let (mut same, mut cross) = (Vec::new(), Vec::new());
    for i in 0..n {
        // a zero adapter has no direction; reject it up front
        cosine_streamed(&adapters[i], &adapters[i])?;
        for j in i + 1..n {
            let c = cosine_streamed(&adapters[i], &adapters[j])?;
            matrix[i][j] = c;
            matrix[j][i] = c;
            if adapters[i].heuristic == adapters[j].heuristic {
                same.push(c);
            } else {
                cross.push(c);
            }
        }
    }
    let same_mean = mean(&same);
    let cross_mean = mean(&cross);
    Ok(SimilarityReport {
        adapter_ids: adapters.iter().map(|a| a.adapter_id.clone()).collect(),
        heuristics: adapters.iter().map(|a| a.heuristic.clone()).collect(),
        matrix,
        same_mean,
        cross_mean,
        gap: same_mean.zip(cross_mean).map(|(s, c)| s - c),
        same_pairs: same.len(),
        cross_pairs: cross.len(),
        partial: same.is_empty(),
    })
}

impl<F: Scalar> SimilarityReport<F> {
    /// The cosine matrix as CSV with adapter ids as header and first column.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::from("adapter");
        for id in &self.adapter_ids {
            let _ = write!(out, ",{id}");
        }
        out.push('\n');
        for (id, row) in self.adapter_ids.iter().zip(&self.matrix) {
            out.push_str(id);
            for v in row {
                let _ = write!(out, ",{:.4}", v.as_f64());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleEntry {
    pub name: String,
    pub rank: usize,
    pub in_features: usize,
    pub out_features: usize,
    pub a_file: String,
    pub b_file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterManifest {
    pub adapter_id: String,
    pub heuristic: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub modules: Vec<ModuleEntry>,
}

fn read_matrix<F: Scalar>(path: &Path, rows: usize, cols: usize) -> Result<Matrix<F>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let want = rows * cols * 4;
    if bytes.len() != want {
        return Err(Error::invalid(format!(
            "{}: expected {rows}×{cols} f32 values ({want} bytes), found {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    let data =
        bytes.chunks_exact(4).map(|c| F::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect::<Vec<F>>();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{}: non-finite value at index {i}", path.display())));
    }
    Matrix::new(rows, cols, data)
}

/// Loads an adapter directory.
pub fn load_adapter<F: Scalar>(dir: &Path) -> Result<LowRankUpdate<F>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: AdapterManifest = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    if m.modules.is_empty() {
        return Err(Error::invalid(format!("{}: modules: empty module list", path.display())));
    }
    let mut modules = Vec::with_capacity(m.modules.len());
    for (i, e) in m.modules.iter().enumerate() {
        if e.rank == 0 || e.in_features == 0 || e.out_features == 0 {
            return Err(Error::invalid(format!("{}: modules[{i}] ({}): zero dimension", path.display(), e.name)));
        }
        let a = read_matrix(&dir.join(&e.a_file), e.rank, e.in_features)?;
        let b = read_matrix(&dir.join(&e.b_file), e.out_features, e.rank)?;
        modules.push(LoraModule { name: e.name.clone(), a, b });
    }
    Ok(LowRankUpdate { adapter_id: m.adapter_id, heuristic: m.heuristic, seed: m.seed, modules })
}

fn write_matrix<F: Scalar>(path: &Path, m: &Matrix<F>) -> Result<()> {
    let mut bytes = Vec::with_capacity(m.data.len() * 4);
    for v in &m.data {
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes an adapter directory (values rounded to f32).
pub fn save_adapter<F: Scalar>(u: &LowRankUpdate<F>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for m in &u.modules {
        let stem: String =
            m.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
        let (a_file, b_file) = (format!("{stem}.A.bin"), format!("{stem}.B.bin"));
        write_matrix(&dir.join(&a_file), &m.a)?;
        write_matrix(&dir.join(&b_file), &m.b)?;
        entries.push(ModuleEntry {
            name: m.name.clone(),
            rank: m.a.rows,
            in_features: m.a.cols,
            out_features: m.b.rows,
            a_file,
            b_file,
        });
    }
    let manifest = AdapterManifest {
        adapter_id: u.adapter_id.clone(),
        heuristic: u.heuristic.clone(),
        seed: u.seed,
        modules: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("adapter manifest", e))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}
