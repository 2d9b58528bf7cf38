//! Browser bindings: a 2-d blob dataset held in memory, with three
//! operations the demo page drives.
//!
//! * [`Playground::leaf_labels`]: which leaf of one tree each point lands in.
//! * [`Playground::query`]: candidates, found and true neighbors of one point.
//! * [`Playground::missing_curve`]: mean missing rate for growing forests.

use rpforest::data::random_centers;
use rpforest::{
    all_true_neighbors, build_forest, build_tree, exact_knn, gen_gaussian_blobs, missing_rate, Dataset, Error,
    Method, SeedStream, StrategyConfig, TreeConfig,
};
use wasm_bindgen::prelude::*;

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn tree_config(method: u8, leaf_capacity: usize) -> Result<TreeConfig, Error> {
    let cfg = TreeConfig::new(StrategyConfig::new(Method::from_number(method)?)).with_leaf_capacity(leaf_capacity);
    cfg.validate()?;
    Ok(cfg)
}

#[wasm_bindgen]
pub struct Playground {
    data: Dataset,
}

#[wasm_bindgen]
impl Playground {
    /// `n` points around `centers` random centers, each with standard
    /// deviation `sigma`.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, centers: usize, sigma: f64, seed: u32) -> Result<Playground, JsError> {
        Self::generate(n, centers, sigma, seed.into()).map_err(js_err)
    }

    /// Interleaved `x0, y0, x1, y1, ...`.
    pub fn points(&self) -> Vec<f64> {
        self.data.as_flat().to_vec()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leaf number of every point in one tree. Leaves are numbered in
    /// arena order.
    pub fn leaf_labels(&self, method: u8, leaf_capacity: usize, seed: u32) -> Result<Vec<u32>, JsError> {
        self.labels(method, leaf_capacity, seed.into()).map_err(js_err)
    }

    pub fn query(
        &self,
        index: usize,
        method: u8,
        trees: usize,
        k: usize,
        seed: u32,
    ) -> Result<QueryView, JsError> {
        self.run_query(index, method, trees, k, seed.into()).map_err(js_err)
    }

    /// Mean missing rate over `reps` forests at each size in `sizes`.
    pub fn missing_curve(&self, method: u8, k: usize, sizes: Vec<u32>, reps: u32, seed: u32) -> Result<Vec<f64>, JsError> {
        self.curve(method, k, &sizes, reps, seed.into()).map_err(js_err)
    }
}

impl Playground {
    pub fn generate(n: usize, centers: usize, sigma: f64, seed: u64) -> Result<Self, Error> {
        let stream = SeedStream::new(seed);
        let centers = random_centers(centers, 2, 10.0, stream.child(0).seed())?;
        let data = gen_gaussian_blobs(n, 2, &centers, sigma, stream.child(1).seed())?;
        Ok(Self { data })
    }

    pub fn labels(&self, method: u8, leaf_capacity: usize, seed: u64) -> Result<Vec<u32>, Error> {
        let cfg = tree_config(method, leaf_capacity)?;
        let tree = build_tree(&self.data, &cfg, &mut SeedStream::new(seed).rng())?;
        let mut labels = vec![0u32; self.data.len()];
        for (leaf, members) in tree.leaves().enumerate() {
            for &id in members {
                labels[id] = leaf as u32;
            }
        }
        Ok(labels)
    }

    pub fn run_query(&self, index: usize, method: u8, trees: usize, k: usize, seed: u64) -> Result<QueryView, Error> {
        if index >= self.data.len() {
            return Err(Error::InvalidArgument(format!("no point {index}")));
        }
        let forest = build_forest(&self.data, &tree_config(method, 20)?, trees, seed)?;
        let x = self.data.point(index);
        let found = forest.query_knn(&self.data, x, k, Some(index))?;
        let truth = exact_knn(&self.data, x, k, Some(index))?;
        let ids = |v: Vec<usize>| v.into_iter().map(|i| i as u32).collect();
        Ok(QueryView {
            candidates: ids(forest.candidates(&self.data, x)?),
            found: ids(found.ids().collect()),
            truth: ids(truth.ids().collect()),
        })
    }

    pub fn curve(&self, method: u8, k: usize, sizes: &[u32], reps: u32, seed: u64) -> Result<Vec<f64>, Error> {
        if reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        let cfg = tree_config(method, 20)?;
        let truth = all_true_neighbors(&self.data, k)?;
        let root = SeedStream::new(seed);
        sizes
            .iter()
            .enumerate()
            .map(|(c, &t)| {
                let mut total = 0.0;
                for r in 0..reps {
                    let s = root.child(c as u64).child(r as u64).seed();
                    let forest = build_forest(&self.data, &cfg, t as usize, s)?;
                    total += missing_rate(&truth, &forest.query_all(&self.data, k)?, k)?.rate;
                }
                Ok(total / reps as f64)
            })
            .collect()
    }
}

#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct QueryView {
    candidates: Vec<u32>,
    found: Vec<u32>,
    truth: Vec<u32>,
}

#[wasm_bindgen]
impl QueryView {
    /// Every point in the leaves the query reached.
    #[wasm_bindgen(getter)]
    pub fn candidates(&self) -> Vec<u32> {
        self.candidates.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn found(&self) -> Vec<u32> {
        self.found.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<u32> {
        self.truth.clone()
    }

    /// True neighbors absent from `found`.
    #[wasm_bindgen(getter)]
    pub fn missed(&self) -> Vec<u32> {
        self.truth.iter().copied().filter(|id| !self.found.contains(id)).collect()
    }
}
