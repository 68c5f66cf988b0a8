//! Lloyd's k-means for numeric contexts and its categorical counterpart
//! (k-modes under Hamming distance) for room contexts.
//!
//! Both start from a seeded farthest-point initialization: the first centre is
//! a uniformly drawn point, every further centre is the point farthest from
//! the centres chosen so far (ties to the lowest index). Iteration stops after
//! [`MAX_ITERATIONS`] or once the cost improves by less than
//! [`CONVERGENCE_TOL`]. Clusters that become empty are dropped.

use crate::cb::room::{hamming_distance, RoomContext, NUM_ATTRIBUTES};
use crate::error::{Error, Result};
use crate::stochastics::RngStream;
use crate::util::sq_dist;

pub const MAX_ITERATIONS: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering<C> {
    pub centroids: Vec<C>,
    /// `assignment[i]` indexes into `centroids`.
    pub assignment: Vec<usize>,
    /// Cost after each assignment step.
    pub cost_history: Vec<f64>,
}

impl<C> Clustering<C> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn final_cost(&self) -> f64 {
        self.cost_history.last().copied().unwrap_or(0.0)
    }
}

trait Space {
    type Point: Clone;
    fn distance(a: &Self::Point, b: &Self::Point) -> f64;
    /// Cost contribution of a point at `distance` from its centre.
    fn cost(distance: f64) -> f64;
    fn center(members: &[&Self::Point]) -> Self::Point;
}

struct Euclidean;

impl Space for Euclidean {
    type Point = Vec<f64>;

    fn distance(a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        sq_dist(a, b).sqrt()
    }

    fn cost(distance: f64) -> f64 {
        distance * distance
    }

    fn center(members: &[&Vec<f64>]) -> Vec<f64> {
        let d = members[0].len();
        let mut c = vec![0.0; d];
        for m in members {
            for (ci, x) in c.iter_mut().zip(m.iter()) {
                *ci += x;
            }
        }
        let n = members.len() as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }
}

struct Categorical;

impl Space for Categorical {
    type Point = RoomContext;

    fn distance(a: &RoomContext, b: &RoomContext) -> f64 {
        hamming_distance(a, b) as f64
    }

    fn cost(distance: f64) -> f64 {
        distance
    }

    fn center(members: &[&RoomContext]) -> RoomContext {
        let card = RoomContext::cardinalities();
        let mut codes = [0usize; NUM_ATTRIBUTES];
        for (attr, slot) in codes.iter_mut().enumerate() {
            let mut counts = vec![0usize; card[attr]];
            for m in members {
                counts[m.codes()[attr]] += 1;
            }
            // mode, ties to the lowest value index
            let best = counts.iter().copied().max().unwrap_or(0);
            *slot = counts.iter().position(|&c| c == best).unwrap_or(0);
        }
        RoomContext::from_codes(codes)
    }
}

fn nearest<S: Space>(p: &S::Point, centroids: &[S::Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = S::distance(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn init<S: Space>(points: &[S::Point], k: usize, rng: &mut RngStream) -> Vec<S::Point> {
    let mut centroids = vec![points[rng.index(points.len())].clone()];
    let mut min_dist: Vec<f64> = points
        .iter()
        .map(|p| S::distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let mut far = 0;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > min_dist[far] {
                far = i;
            }
        }
        let c = points[far].clone();
        for (m, p) in min_dist.iter_mut().zip(points) {
            *m = m.min(S::distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign<S: Space>(points: &[S::Point], centroids: &[S::Point]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignment = points
        .iter()
        .map(|p| {
            let (i, d) = nearest::<S>(p, centroids);
            cost += S::cost(d);
            i
        })
        .collect();
    (assignment, cost)
}

/// Recompute centres from an assignment, dropping empty clusters and
/// remapping the assignment onto the surviving centres.
fn update<S: Space>(
    points: &[S::Point],
    assignment: &mut [usize],
    num_clusters: usize,
) -> Vec<S::Point> {
    let mut members: Vec<Vec<&S::Point>> = vec![Vec::new(); num_clusters];
    for (p, &a) in points.iter().zip(assignment.iter()) {
        members[a].push(p);
    }
    let mut remap = vec![usize::MAX; num_clusters];
    let mut centroids = Vec::new();
    for (old, m) in members.iter().enumerate() {
        if !m.is_empty() {
            remap[old] = centroids.len();
            centroids.push(S::center(m));
        }
    }
    for a in assignment.iter_mut() {
        *a = remap[*a];
    }
    centroids
}

fn cluster<S: Space>(points: &[S::Point], k: usize, rng: &mut RngStream) -> Result<Clustering<S::Point>> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if k > points.len() {
        return Err(Error::param(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    let mut centroids = init::<S>(points, k, rng);
    let (mut assignment, mut cost) = assign::<S>(points, &centroids);
    let mut cost_history = vec![cost];
    for _ in 0..MAX_ITERATIONS {
        centroids = update::<S>(points, &mut assignment, centroids.len());
        let (next, next_cost) = assign::<S>(points, &centroids);
        cost_history.push(next_cost);
        let improvement = cost - next_cost;
        let changed = next != assignment;
        assignment = next;
        cost = next_cost;
        if !changed || improvement < CONVERGENCE_TOL {
            break;
        }
    }
    // centres are exact cluster centres of the final assignment
    centroids = update::<S>(points, &mut assignment, centroids.len());
    let final_cost: f64 = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| S::cost(S::distance(p, &centroids[a])))
        .sum();
    if final_cost < cost {
        cost_history.push(final_cost);
    }
    Ok(Clustering {
        centroids,
        assignment,
        cost_history,
    })
}

/// Lloyd's algorithm on Euclidean points; cost is the within-cluster SSE.
pub fn lloyd_kmeans(points: &[Vec<f64>], k: usize, rng: &mut RngStream) -> Result<Clustering<Vec<f64>>> {
    if let Some(first) = points.first() {
        if let Some(bad) = points.iter().find(|p| p.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: bad.len(),
            });
        }
    }
    cluster::<Euclidean>(points, k, rng)
}

/// k-modes on room contexts; cost is the total Hamming distance.
pub fn kmodes(points: &[RoomContext], k: usize, rng: &mut RngStream) -> Result<Clustering<RoomContext>> {
    cluster::<Categorical>(points, k, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> RngStream {
        RngStream::new(42, &[])
    }

    #[test]
    fn single_cluster_is_mean() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let c = lloyd_kmeans(&pts, 1, &mut rng()).unwrap();
        assert_eq!(c.centroids, vec![vec![2.0, 1.0]]);
        assert_eq!(c.assignment, vec![0, 0, 0]);
    }

    #[test]
    fn separated_points_become_centroids() {
        let pts = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0], vec![10.0, 10.0]];
        let c = lloyd_kmeans(&pts, 4, &mut rng()).unwrap();
        assert_eq!(c.final_cost(), 0.0);
        let mut got = c.centroids.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn too_many_clusters() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(lloyd_kmeans(&pts, 3, &mut rng()).is_err());
        assert!(lloyd_kmeans(&pts, 0, &mut rng()).is_err());
    }

    #[test]
    fn duplicates_drop_empty_clusters() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0], vec![5.0]];
        let c = lloyd_kmeans(&pts, 3, &mut rng()).unwrap();
        assert!(c.centroids.len() <= 3);
        assert_eq!(c.cluster_sizes().iter().sum::<usize>(), 4);
        assert!(c.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn cost_never_increases() {
        let mut r = RngStream::new(3, &[]);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| crate::stochastics::uniform_box(-1.0, 1.0, 3, &mut r).unwrap())
            .collect();
        for k in [2, 5, 10] {
            let c = lloyd_kmeans(&pts, k, &mut RngStream::new(k as u64, &[])).unwrap();
            for w in c.cost_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", c.cost_history);
            }
            assert_eq!(c.cluster_sizes().iter().sum::<usize>(), 300);
        }
    }

    #[test]
    fn kmodes_basic() {
        let mut r = RngStream::new(5, &[]);
        let pts: Vec<RoomContext> = (0..200).map(|_| RoomContext::sample(&mut r)).collect();
        let c = kmodes(&pts, 6, &mut rng()).unwrap();
        assert!(c.centroids.len() <= 6);
        assert_eq!(c.cluster_sizes().iter().sum::<usize>(), 200);
        for w in c.cost_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn deterministic_given_stream() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, (i % 5) as f64]).collect();
        let a = lloyd_kmeans(&pts, 4, &mut rng()).unwrap();
        let b = lloyd_kmeans(&pts, 4, &mut rng()).unwrap();
        assert_eq!(a, b);
    }
}
