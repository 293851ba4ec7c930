use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NDB_CELLS: usize = 50;
pub const NDB_ALPHA: f64 = 0.05;
const MAX_ITERS: usize = 100;

/// Voronoi cells fitted to training features, with each cell's training share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdbModel {
    pub dim: usize,
    /// `k × dim`, row major.
    pub centroids: Vec<f64>,
    pub proportions: Vec<f64>,
    pub n_train: usize,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdbResult {
    pub count: usize,
    pub significant: Vec<bool>,
    pub train_proportions: Vec<f64>,
    pub gen_proportions: Vec<f64>,
    pub z: Vec<f64>,
}

impl NdbResult {
    pub fn csv(&self) -> String {
        let mut s = String::from("cell,train_proportion,gen_proportion,z,significant\n");
        for i in 0..self.significant.len() {
            s += &format!(
                "{i},{:.6},{:.6},{:.4},{}\n",
                self.train_proportions[i], self.gen_proportions[i], self.z[i], self.significant[i] as u8
            );
        }
        s
    }
}

fn rows(x: &Tensor<f32>) -> Result<(usize, usize, Vec<f64>)> {
    match x.shape() {
        &[n, d] => Ok((n, d, x.data().iter().map(|&v| v as f64).collect())),
        s => Err(Error::shape("ndb", format!("features must be [n, d], got {s:?}"))),
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(c: &[f64], d: usize, x: &[f64]) -> (usize, f64) {
    c.chunks_exact(d)
        .enumerate()
        .map(|(j, cj)| (j, dist2(cj, x)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Index drawn with probability proportional to `w`, or uniformly if all weights vanish.
fn weighted_pick(w: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..w.len());
    }
    let mut r = rng.random::<f64>() * total;
    for (i, &wi) in w.iter().enumerate() {
        if r < wi {
            return i;
        }
        r -= wi;
    }
    w.len() - 1
}

/// k-means with k-means++ seeding; returns centroids and assignments.
pub fn kmeans(x: &[f64], d: usize, k: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let n = x.len() / d;
    let row = |i: usize| &x[i * d..(i + 1) * d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Vec::with_capacity(k * d);
    c.extend_from_slice(row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(row(i), &c[..d])).collect();
    for _ in 1..k {
        let pick = weighted_pick(&d2, &mut rng);
        let start = c.len();
        c.extend_from_slice(row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(dist2(row(i), &c[start..]));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (j, dj) = nearest(&c, d, row(i));
            dists[i] = dj;
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i] * d..][..d].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // move an empty centroid onto the point worst served by its cell
                let far = weighted_pick(&dists, &mut rng);
                c[j * d..(j + 1) * d].copy_from_slice(row(far));
                dists[far] = 0.0;
                changed = true;
            } else {
                for (cv, s) in c[j * d..(j + 1) * d].iter_mut().zip(&sums[j * d..(j + 1) * d]) {
                    *cv = s / counts[j] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for i in 0..n {
        assign[i] = nearest(&c, d, row(i)).0;
    }
    (c, assign)
}

fn shares(assign: &[usize], k: usize) -> Vec<f64> {
    let mut p = vec![0.0; k];
    for &a in assign {
        p[a] += 1.0;
    }
    p.iter_mut().for_each(|v| *v /= assign.len() as f64);
    p
}

/// Cluster training features `[n, d]` into `k` cells.
pub fn fit_ndb(train: &Tensor<f32>, k: usize, seed: u64) -> Result<NdbModel> {
    let (n, d, x) = rows(train)?;
    if k == 0 || n < k {
        return Err(Error::Invalid(format!("NDB needs at least k = {k} training examples, got {n}")));
    }
    let (centroids, assign) = kmeans(&x, d, k, seed);
    Ok(NdbModel { dim: d, centroids, proportions: shares(&assign, k), n_train: n, alpha: NDB_ALPHA })
}

impl NdbModel {
    pub fn k(&self) -> usize {
        self.proportions.len()
    }

    pub fn assign(&self, x: &Tensor<f32>) -> Result<Vec<usize>> {
        let (_, d, v) = rows(x)?;
        if d != self.dim {
            return Err(Error::shape("ndb", format!("feature width {d}, model expects {}", self.dim)));
        }
        Ok(v.chunks_exact(d).map(|r| nearest(&self.centroids, d, r).0).collect())
    }

    /// Pooled two-proportion z-test per cell between training and generated shares.
    pub fn evaluate(&self, gen: &Tensor<f32>) -> Result<NdbResult> {
        let assign = self.assign(gen)?;
        if assign.is_empty() {
            return Err(Error::Empty("generated set"));
        }
        let k = self.k();
        let q = shares(&assign, k);
        let (n1, n2) = (self.n_train as f64, assign.len() as f64);
        let crit = Normal::standard().inverse_cdf(1.0 - self.alpha / 2.0);
        let mut z = Vec::with_capacity(k);
        let mut significant = Vec::with_capacity(k);
        for j in 0..k {
            let (p1, p2) = (self.proportions[j], q[j]);
            let pooled = (p1 * n1 + p2 * n2) / (n1 + n2);
            let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
            let zj = if se > 0.0 { (p1 - p2) / se } else { 0.0 };
            z.push(zj);
            significant.push(zj.abs() > crit);
        }
        Ok(NdbResult {
            count: significant.iter().filter(|&&s| s).count(),
            significant,
            train_proportions: self.proportions.clone(),
            gen_proportions: q,
            z,
        })
    }
}

pub fn ndb(model: &NdbModel, gen: &Tensor<f32>) -> Result<NdbResult> {
    model.evaluate(gen)
}

/// Magnitude batch `[n, H, W, 1]` mean-pooled `pool`× along both axes and flattened.
pub fn ndb_features(mag: &Tensor<f32>, pool: usize) -> Result<Tensor<f32>> {
    let &[n, h, w, 1] = mag.shape() else {
        return Err(Error::shape("ndb_features", format!("expected [n, H, W, 1], got {:?}", mag.shape())));
    };
    let pool = pool.max(1);
    let (t, f) = (h / pool, w / pool);
    if t == 0 || f == 0 {
        return Err(Error::Invalid(format!("pool {pool} larger than {h}×{w} image")));
    }
    let norm = 1.0 / (pool * pool) as f32;
    let mut out = Vec::with_capacity(n * t * f);
    for img in mag.data().chunks_exact(h * w) {
        for ti in 0..t {
            for fi in 0..f {
                let mut s = 0.0;
                for a in 0..pool {
                    let row = &img[(ti * pool + a) * w + fi * pool..][..pool];
                    s += row.iter().sum::<f32>();
                }
                out.push(s * norm);
            }
        }
    }
    Tensor::new(&[n, t * f], out)
}
