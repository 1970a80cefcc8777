//! Co-occurrence distances and average-linkage agglomerative clustering.

use crate::error::{Error, Result};

use super::BinaryMatrix;

/// Dense symmetric matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        let d = DistanceMatrix { n, data };
        d.validate()?;
        Ok(d)
    }

    /// Evaluates `f(i, j)` for `i < j` and mirrors it; the diagonal is 0.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self::new(n, data)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::invalid(format!("distance diagonal entry {i} is not zero")));
            }
            for j in 0..self.n {
                let v = self.get(i, j);
                if !(v >= 0.0 && v.is_finite()) || v != self.get(j, i) {
                    return Err(Error::invalid(format!(
                        "distance ({i}, {j}) must be finite, nonnegative and symmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// `D_jk = exp(-O_jk / (C_j C_k))` from empirical frequencies `C` and
/// co-occurrences `O`. The diagonal is set to 0.
pub fn cooccurrence_distance(x: &BinaryMatrix) -> Result<DistanceMatrix> {
    let (n, p) = (x.rows(), x.cols());
    let mut counts = vec![0u64; p];
    let mut co = vec![0u64; p * p];
    let mut active = Vec::with_capacity(p);
    for i in 0..n {
        active.clear();
        active.extend((0..p).filter(|&j| x.get(i, j)));
        for &j in &active {
            counts[j] += 1;
            for &k in &active {
                co[j * p + k] += 1;
            }
        }
    }
    let inactive: Vec<usize> = (0..p).filter(|&j| counts[j] == 0).collect();
    if !inactive.is_empty() {
        return Err(Error::InactiveColumns(inactive));
    }
    let n = n as f64;
    DistanceMatrix::from_fn(p, |j, k| {
        // R = (co / n) / ((c_j / n)(c_k / n))
        let r = co[j * p + k] as f64 * n / (counts[j] as f64 * counts[k] as f64);
        (-r).exp()
    })
}

/// Average-linkage agglomerative clustering down to `k` clusters.
///
/// Clusters are named by their smallest member. Each merge joins the closest
/// pair; ties go to the lexicographically smallest pair of names. Labels are
/// numbered `0..k` in increasing order of cluster name.
pub fn agglomerative_average_linkage(d: &DistanceMatrix, k: usize) -> Result<Vec<usize>> {
    let n = d.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cluster count {k} must lie in 1..={n}")));
    }
    // Active clusters sorted by name; `link` holds inter-cluster averages
    // maintained with the Lance-Williams update.
    let mut names: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut link: Vec<f64> = d.data.clone();
    while names.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for (a, &i) in names.iter().enumerate() {
            for &j in &names[a + 1..] {
                let v = link[i * n + j];
                if v < best.0 {
                    best = (v, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let (si, sj) = (sizes[i] as f64, sizes[j] as f64);
        for &c in &names {
            if c != i && c != j {
                let v = (si * link[i * n + c] + sj * link[j * n + c]) / (si + sj);
                link[i * n + c] = v;
                link[c * n + i] = v;
            }
        }
        sizes[i] += sizes[j];
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        names.retain(|&c| c != j);
    }
    let mut labels = vec![0; n];
    for (label, &c) in names.iter().enumerate() {
        for &m in &members[c] {
            labels[m] = label;
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_distances(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.random();
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        DistanceMatrix::new(n, data).unwrap()
    }

    /// Recomputes every average linkage from the member lists at each merge.
    fn naive_average_linkage(d: &DistanceMatrix, k: usize) -> Vec<usize> {
        let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let mut s = 0.0;
                    for &x in &clusters[a] {
                        for &y in &clusters[b] {
                            s += d.get(x, y);
                        }
                    }
                    let avg = s / (clusters[a].len() * clusters[b].len()) as f64;
                    if avg < best.0 {
                        best = (avg, a, b);
                    }
                }
            }
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
        }
        let mut labels = vec![0; d.len()];
        for (l, c) in clusters.iter().enumerate() {
            for &m in c {
                labels[m] = l;
            }
        }
        labels
    }

    #[test]
    fn identical_columns() {
        // columns 0 and 1 identical, active in 2 of 4 rows
        let x = BinaryMatrix::from_rows(&[
            [true, true, false],
            [true, true, true],
            [false, false, true],
            [false, false, false],
        ])
        .unwrap();
        let d = cooccurrence_distance(&x).unwrap();
        let c = 0.5f64;
        assert!((d.get(0, 1) - (-1.0 / c).exp()).abs() < 1e-15);
        assert_eq!(d.get(0, 0), 0.0);
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(d.get(j, k), d.get(k, j));
                assert!(d.get(j, k) <= 1.0);
            }
        }
    }

    #[test]
    fn inactive_columns_are_reported() {
        let x = BinaryMatrix::from_rows(&[[true, false, false], [true, false, true]]).unwrap();
        match cooccurrence_distance(&x) {
            Err(Error::InactiveColumns(c)) => assert_eq!(c, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn independent_columns_approach_inverse_e() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = BinaryMatrix::bernoulli(100_000, 4, 0.3, &mut rng);
        let d = cooccurrence_distance(&x).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                if j != k {
                    assert!((d.get(j, k) - (-1f64).exp()).abs() < 0.1);
                }
            }
        }
    }

    #[test]
    fn singletons_when_k_equals_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = random_distances(&mut rng, 6);
        assert_eq!(agglomerative_average_linkage(&d, 6).unwrap(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn separated_blobs() {
        let blob = [0, 1, 0, 1, 1, 0, 0];
        let d = DistanceMatrix::from_fn(7, |i, j| {
            if i == j {
                0.0
            } else if blob[i] == blob[j] {
                0.1 + 0.01 * (i + j) as f64
            } else {
                5.0
            }
        })
        .unwrap();
        assert_eq!(agglomerative_average_linkage(&d, 2).unwrap(), blob.to_vec());
    }

    #[test]
    fn matches_naive_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.random_range(1..=9);
            let k = rng.random_range(1..=n);
            let d = random_distances(&mut rng, n);
            assert_eq!(
                agglomerative_average_linkage(&d, k).unwrap(),
                naive_average_linkage(&d, k)
            );
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DistanceMatrix::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceMatrix::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        let d = DistanceMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(agglomerative_average_linkage(&d, 0).is_err());
        assert!(agglomerative_average_linkage(&d, 3).is_err());
    }
}
